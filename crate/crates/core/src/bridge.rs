//! Turaev-Viro invariants of link complements as sums of squared colored Jones
//! moduli, and the cross-check against state sums.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jones::{LinkExpr, PreparedLink};
use crate::numeric::pairwise_sum;
use crate::qarith::{eta, eta_prime, Flavor, LogMagnitude, LogSum, RootContext};
use crate::statesum::{tv, Form};
use crate::triangulate::Triangulation;

/// Relative difference below which the two sides are declared equal.
pub const PASS_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub r: u32,
    pub flavor: Flavor,
    /// State sum on the triangulation.
    pub lhs: f64,
    /// Sum of squared Jones moduli.
    pub rhs: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub pass: bool,
    pub lower_bound: f64,
}

/// Largest color in the sum: `r - 1` at SU2 roots, `m = (r-1)/2` at SO3 roots.
pub fn color_bound(ctx: &RootContext) -> u32 {
    match ctx.flavor() {
        Flavor::Su2 => ctx.r() - 1,
        Flavor::So3 => (ctx.r() - 1) / 2,
    }
}

/// `H_r`: `η_r²` at SU2 roots, `2^{n-1} η'_r²` at SO3 roots.
pub fn lower_bound(ctx: &RootContext, link: &LinkExpr) -> f64 {
    normalizer(ctx, link).to_f64()
}

fn normalizer(ctx: &RootContext, link: &LinkExpr) -> LogMagnitude {
    match ctx.flavor() {
        Flavor::Su2 => LogMagnitude::from_f64(eta(ctx).powi(2)),
        Flavor::So3 => {
            let e = eta_prime(ctx).expect("so3 flavor checked");
            let n = link.components() as f64 - 1.0;
            LogMagnitude::from_log(n * std::f64::consts::LN_2 + 2.0 * e.abs().ln())
        }
    }
}

/// Color tuples whose first entry is `first`, with multiplicities.
///
/// The Borromean rings are symmetric in their three colors, so only sorted
/// triples are visited and each carries the number of its distinct permutations.
fn tuples_from(first: u32, max: u32, n: usize, symmetric: bool) -> Vec<(Vec<u32>, f64)> {
    let mut out = Vec::new();
    let mut cur = vec![first];
    fn rec(cur: &mut Vec<u32>, max: u32, n: usize, symmetric: bool, out: &mut Vec<(Vec<u32>, f64)>) {
        if cur.len() == n {
            let mult = if symmetric {
                let (a, b, c) = (cur[0], cur[1], cur[2]);
                if a == b && b == c {
                    1.0
                } else if a == b || b == c {
                    3.0
                } else {
                    6.0
                }
            } else {
                1.0
            };
            out.push((cur.clone(), mult));
            return;
        }
        let lo = if symmetric { *cur.last().unwrap() } else { 1 };
        for c in lo..=max {
            cur.push(c);
            rec(cur, max, n, symmetric, out);
            cur.pop();
        }
    }
    rec(&mut cur, max, n, symmetric, &mut out);
    out
}

fn is_symmetric(link: &LinkExpr) -> bool {
    matches!(link, LinkExpr::Borromean)
}

/// `Σ |J_i|²` over `1 ≤ i_k ≤ max`, in linear scale.
pub fn sum_sq(prep: &PreparedLink, max: u32) -> Result<f64> {
    let n = prep.components();
    let sym = is_symmetric(prep.expr());
    let partials: Vec<Result<f64>> = (1..=max)
        .into_par_iter()
        .map(|first| {
            let mut acc = crate::numeric::CompensatedSum::new();
            for (c, mult) in tuples_from(first, max, n, sym) {
                acc.add(mult * prep.eval(&c)?.norm_sqr());
            }
            Ok(acc.value())
        })
        .collect();
    let partials = partials.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&partials))
}

/// `Σ |J_i|²` over `1 ≤ i_k ≤ max`, in log scale.
///
/// A first pass without multi-precision repair sizes the total; the second pass
/// repairs only values large enough to move it.
pub fn sum_sq_log(prep: &PreparedLink, max: u32) -> Result<LogMagnitude> {
    let rough = scan_sq_log(&prep.clone().with_rescue_floor(f64::INFINITY), max)?;
    if rough.is_zero() {
        return Ok(rough);
    }
    let floor = 0.5 * (rough.log_abs() - 40.0 * std::f64::consts::LN_2);
    scan_sq_log(&prep.clone().with_rescue_floor(floor), max)
}

fn scan_sq_log(prep: &PreparedLink, max: u32) -> Result<LogMagnitude> {
    let n = prep.components();
    let sym = is_symmetric(prep.expr());
    let partials: Vec<Result<LogMagnitude>> = (1..=max)
        .into_par_iter()
        .map(|first| {
            let mut acc = LogSum::new();
            for (c, mult) in tuples_from(first, max, n, sym) {
                let j = prep.eval_log_abs(&c)?;
                acc.add(j.powi(2) * LogMagnitude::from_f64(mult));
            }
            Ok(acc.value())
        })
        .collect();
    let mut acc = LogSum::new();
    for p in partials {
        acc.add(p?);
    }
    Ok(acc.value())
}

/// `η_r² Σ_{1 ≤ i ≤ r-1} |J_{L,i}(t)|²` at an SU2 root.
pub fn tv_from_jones_su2(ctx: &RootContext, link: &LinkExpr) -> Result<f64> {
    ctx.require(Flavor::Su2)?;
    tv_from_jones(ctx, link)
}

/// `2^{n-1} η'_r² Σ_{1 ≤ i ≤ m} |J_{L,i}(t)|²` at an SO3 root.
pub fn tv_from_jones_so3(ctx: &RootContext, link: &LinkExpr) -> Result<f64> {
    ctx.require(Flavor::So3)?;
    tv_from_jones(ctx, link)
}

/// Dispatches on the flavor of `ctx`.
pub fn tv_from_jones(ctx: &RootContext, link: &LinkExpr) -> Result<f64> {
    let max = color_bound(ctx);
    let prep = PreparedLink::new(ctx, link, max)?;
    Ok(lower_bound(ctx, link) * sum_sq(&prep, max)?)
}

/// Log-scale version of [`tv_from_jones`], for levels where the sum overflows.
pub fn tv_from_jones_log(ctx: &RootContext, link: &LinkExpr) -> Result<LogMagnitude> {
    let max = color_bound(ctx);
    let prep = PreparedLink::new(ctx, link, max)?;
    Ok(normalizer(ctx, link) * sum_sq_log(&prep, max)?)
}

/// `TV'_r` of the complement, `η'_r² Σ |J|²` (the level-3 factor `2^{n-1}` removed).
pub fn tv_prime_from_jones(ctx: &RootContext, link: &LinkExpr) -> Result<f64> {
    ctx.require(Flavor::So3)?;
    let max = color_bound(ctx);
    let prep = PreparedLink::new(ctx, link, max)?;
    Ok(eta_prime(ctx)?.powi(2) * sum_sq(&prep, max)?)
}

/// Normalized partial sums over the color cubes `[1, k]^n`, `k = 1..=bound`.
pub fn partial_sums(ctx: &RootContext, link: &LinkExpr) -> Result<Vec<f64>> {
    let max = color_bound(ctx);
    let prep = PreparedLink::new(ctx, link, max)?;
    let n = prep.components();
    let mut buckets = vec![0.0; max as usize + 1];
    let mut cur = vec![1u32; n];
    loop {
        let top = *cur.iter().max().unwrap() as usize;
        buckets[top] += prep.eval(&cur)?.norm_sqr();
        let mut pos = 0;
        loop {
            if pos == n {
                let h = lower_bound(ctx, link);
                let mut run = 0.0;
                return Ok(buckets[1..]
                    .iter()
                    .map(|b| {
                        run += b;
                        h * run
                    })
                    .collect());
            }
            if cur[pos] < max {
                cur[pos] += 1;
                break;
            }
            cur[pos] = 1;
            pos += 1;
        }
    }
}

fn report(ctx: &RootContext, link: &LinkExpr, lhs: f64, rhs: f64) -> IdentityReport {
    let abs_diff = (lhs - rhs).abs();
    let scale = lhs.abs().max(rhs.abs());
    let rel_diff = if scale == 0.0 { 0.0 } else { abs_diff / scale };
    IdentityReport {
        r: ctx.r(),
        flavor: ctx.flavor(),
        lhs,
        rhs,
        abs_diff,
        rel_diff,
        pass: rel_diff < PASS_TOLERANCE,
        lower_bound: lower_bound(ctx, link),
    }
}

/// Compares the state sum `TV_r` on `tri` with the Jones sum of `link` at each root.
pub fn verify_identity_at(
    link: &LinkExpr,
    tri: &Triangulation,
    roots: &[RootContext],
) -> Result<Vec<IdentityReport>> {
    roots
        .iter()
        .map(|ctx| {
            let lhs = tv(tri, ctx, Form::Def27)?.value;
            let rhs = tv_from_jones(ctx, link)?;
            Ok(report(ctx, link, lhs, rhs))
        })
        .collect()
}

/// Odd levels use the principal SO3 root, even levels the principal SU2 root.
pub fn verify_identity(link: &LinkExpr, tri: &Triangulation, r_list: &[u32]) -> Result<Vec<IdentityReport>> {
    let roots = r_list
        .iter()
        .map(|&r| {
            let flavor = if r % 2 == 1 { Flavor::So3 } else { Flavor::Su2 };
            RootContext::principal(r, flavor)
        })
        .collect::<Result<Vec<_>>>()?;
    verify_identity_at(link, tri, &roots)
}
