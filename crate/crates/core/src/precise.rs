//! Multi-precision fallback for alternating Habiro sums that cancel in `f64`.
//!
//! Away from the dominant colors the figure-eight and Borromean sums have terms
//! many orders of magnitude larger than their total. When the `f64` pass loses
//! more than [`LOSS_BITS`] to cancellation the sum is recomputed here with enough
//! mantissa to cover the loss, doubling the precision until the result clears it.

use std::f64::consts::LN_2;
use std::sync::{Arc, OnceLock};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use dashmap::DashMap;

use rayon::prelude::*;

use crate::qarith::{LogMagnitude, RootContext};
use crate::skein::{ColorSixTuple, Normalization};
use crate::triangulate::Triangulation;

const RM: RoundingMode = RoundingMode::ToEven;
const MAX_PRECISION: usize = 1 << 16;
const GUARD_BITS: usize = 64;

/// Cancellation, in bits, tolerated before a sum is recomputed.
pub(crate) const LOSS_BITS: f64 = 8.0;

/// Whether `sum` lost more than [`LOSS_BITS`] against the absolute mass.
pub(crate) fn needs_rescue(sum: LogMagnitude, mass: LogMagnitude) -> bool {
    if mass.is_zero() {
        return false;
    }
    sum.is_zero() || (mass.log_abs() - sum.log_abs()) / LN_2 > LOSS_BITS
}

fn initial_precision(mass: LogMagnitude) -> usize {
    let bits = (mass.log_abs() / LN_2).max(0.0).ceil() as usize;
    (53 + bits + GUARD_BITS).next_multiple_of(64)
}

/// `sin(kπ/r)` for `0 ≤ k < 2r`, exact zeros at `k = 0, r`.
struct SineTable {
    vals: Vec<BigFloat>,
}

type SineKey = (u32, usize);

fn sine_cache() -> &'static DashMap<SineKey, Arc<SineTable>> {
    static CACHE: OnceLock<DashMap<SineKey, Arc<SineTable>>> = OnceLock::new();
    CACHE.get_or_init(DashMap::new)
}

fn sines(r: u32, p: usize) -> Arc<SineTable> {
    if let Some(t) = sine_cache().get(&(r, p)) {
        return t.clone();
    }
    let mut cc = Consts::new().expect("constants cache");
    let pi = cc.pi(p, RM);
    let rb = BigFloat::from_u32(r, p);
    let r = r as usize;
    let mut half = Vec::with_capacity(r / 2 + 1);
    for k in 0..=r / 2 {
        let arg = pi.mul(&BigFloat::from_u64(k as u64, p), p, RM).div(&rb, p, RM);
        half.push(if k == 0 { BigFloat::from_u8(0, p) } else { arg.sin(p, RM, &mut cc) });
    }
    let first = |k: usize| if k <= r / 2 { half[k].clone() } else { half[r - k].clone() };
    let vals = (0..2 * r)
        .map(|k| if k < r { first(k) } else if k == r { BigFloat::from_u8(0, p) } else { first(k - r).neg() })
        .collect();
    let table = Arc::new(SineTable { vals });
    sine_cache().insert((r as u32, p), table.clone());
    table
}

/// High-precision view of one root: `sin(2nθ)` for any integer `n`.
struct Root {
    table: Arc<SineTable>,
    step: i64,
    two_r: i64,
    p: usize,
}

impl Root {
    fn new(ctx: &RootContext, p: usize) -> Self {
        let r = ctx.r();
        Self {
            table: sines(r, p),
            step: i64::from(ctx.step()),
            two_r: 2 * i64::from(r),
            p,
        }
    }

    /// `sin(2nθ) = sin(n·step·π/r)`.
    fn sin2n(&self, n: i64) -> &BigFloat {
        let k = (n * self.step).rem_euclid(self.two_r);
        &self.table.vals[k as usize]
    }

    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }
}

pub(crate) fn to_log(x: &BigFloat) -> LogMagnitude {
    let Some((m, _, s, e, _)) = x.as_raw_parts() else {
        return LogMagnitude::from_f64(f64::NAN);
    };
    if x.is_zero() || m.is_empty() {
        return LogMagnitude::ZERO;
    }
    let top = m[m.len() - 1] as f64;
    let next = if m.len() > 1 { m[m.len() - 2] as f64 } else { 0.0 };
    let frac = (top + next / 2f64.powi(64)) / 2f64.powi(64);
    let log = frac.ln() + f64::from(e) * LN_2;
    LogMagnitude::new(if s == Sign::Neg { -1 } else { 1 }, log)
}

/// Repeats `eval` with growing precision until the result clears the mass.
fn rescue<F: Fn(usize) -> BigFloat>(mass: LogMagnitude, terms: usize, eval: F) -> LogMagnitude {
    let mut p = initial_precision(mass);
    let slack = (terms.max(1) as f64).log2().ceil();
    let mut was_noise = false;
    loop {
        let out = to_log(&eval(p));
        let lost = (mass.log_abs() - out.log_abs()) / LN_2;
        if (!out.is_zero() && lost + slack + 60.0 <= p as f64) || p >= MAX_PRECISION {
            return out;
        }
        // noise at two precisions in a row: the sum is an exact zero
        let noise = out.is_zero() || lost + slack + 8.0 >= p as f64;
        if noise && was_noise {
            return LogMagnitude::ZERO;
        }
        was_noise = noise;
        p *= 2;
    }
}

/// Reduced figure-eight Habiro sum `1 + Σ_j Π_{k≤j} -4 sin(2(i-k)θ) sin(2(i+k)θ)`.
pub(crate) fn fig8_reduced(ctx: &RootContext, i: i64, mass: LogMagnitude) -> LogMagnitude {
    rescue(mass, i as usize, |p| {
        let root = Root::new(ctx, p);
        let minus_four = BigFloat::from_i8(-4, p);
        let mut sum = BigFloat::from_u8(1, p);
        let mut prod = BigFloat::from_u8(1, p);
        for k in 1..i {
            let f = root.mul(&root.mul(root.sin2n(i - k), root.sin2n(i + k)), &minus_four);
            prod = root.mul(&prod, &f);
            if prod.is_zero() {
                break;
            }
            sum = sum.add(&prod, p, RM);
        }
        sum
    })
}

/// Borromean sum in brace form, `(1/{1}) Σ (-1)^j Π_x {x+j}!/{x-j-1}! · ({j}!/{2j+1}!)²`,
/// with real braces `{n} = 2 sin(2nθ)`. All factorial arguments must stay below `r`.
pub(crate) fn borromean(ctx: &RootContext, c: [i64; 3], mass: LogMagnitude) -> LogMagnitude {
    let lo = *c.iter().min().unwrap();
    let hi = (*c.iter().max().unwrap() + lo) as usize;
    rescue(mass, lo as usize, |p| {
        let root = Root::new(ctx, p);
        let two = BigFloat::from_u8(2, p);
        let mut fact = Vec::with_capacity(hi + 1);
        fact.push(BigFloat::from_u8(1, p));
        for n in 1..=hi {
            let b = root.mul(root.sin2n(n as i64), &two);
            let next = root.mul(&fact[n - 1], &b);
            fact.push(next);
        }
        let f = |n: i64| &fact[n as usize];
        let mut sum = BigFloat::from_u8(0, p);
        for j in 0..lo {
            let mut num = root.mul(f(j), f(j));
            let mut den = root.mul(f(2 * j + 1), f(2 * j + 1));
            for &x in &c {
                num = root.mul(&num, f(x + j));
                den = root.mul(&den, f(x - j - 1));
            }
            let term = num.div(&den, p, RM);
            sum = if j % 2 == 0 { sum.add(&term, p, RM) } else { sum.sub(&term, p, RM) };
        }
        sum.div(&root.mul(root.sin2n(1), &two), p, RM)
    })
}

/// Bare 6j z-sum `Σ (-1)^z [z+1]! / (Π[z-T_a]! Π[Q_b-z]!)` over `max T ≤ z ≤ min Q`.
pub(crate) fn sixj_bare(ctx: &RootContext, ts: [u32; 4], qs: [u32; 3], mass: LogMagnitude) -> LogMagnitude {
    let lo = *ts.iter().max().unwrap();
    let hi = *qs.iter().min().unwrap();
    let top = ((hi + 1) as usize).min(ctx.r() as usize - 1);
    rescue(mass, (hi - lo + 1) as usize, |p| {
        let root = Root::new(ctx, p);
        let unit = root.sin2n(1).clone();
        let mut fact = Vec::with_capacity(top + 1);
        fact.push(BigFloat::from_u8(1, p));
        for n in 1..=top {
            let q = root.sin2n(n as i64).div(&unit, p, RM);
            let next = root.mul(&fact[n - 1], &q);
            fact.push(next);
        }
        let f = |n: u32| &fact[n as usize];
        let mut sum = BigFloat::from_u8(0, p);
        for z in lo..=hi {
            if z as usize + 1 > top {
                break;
            }
            let mut den = BigFloat::from_u8(1, p);
            for &t in &ts {
                den = root.mul(&den, f(z - t));
            }
            for &q in &qs {
                den = root.mul(&den, f(q - z));
            }
            let term = f(z + 1).div(&den, p, RM);
            sum = if z % 2 == 0 { sum.add(&term, p, RM) } else { sum.sub(&term, p, RM) };
        }
        sum
    })
}

/// Edge, theta and 6j coefficients at one precision, mirroring the `f64` kernel.
struct Kernel {
    root: Root,
    /// `[n]!` for `n < r`.
    fact: Vec<BigFloat>,
    r: u32,
    norm: Normalization,
}

impl Kernel {
    fn new(ctx: &RootContext, p: usize, norm: Normalization) -> Self {
        let root = Root::new(ctx, p);
        let unit = root.sin2n(1).clone();
        let mut fact = vec![BigFloat::from_u8(1, p)];
        for n in 1..ctx.r() as usize {
            let q = root.sin2n(n as i64).div(&unit, p, RM);
            let next = root.mul(&fact[n - 1], &q);
            fact.push(next);
        }
        Self { root, fact, r: ctx.r(), norm }
    }

    fn p(&self) -> usize {
        self.root.p
    }

    fn f(&self, n: u32) -> &BigFloat {
        &self.fact[n as usize]
    }

    fn prod(&self, xs: impl IntoIterator<Item = u32>) -> BigFloat {
        xs.into_iter().fold(BigFloat::from_u8(1, self.p()), |acc, n| self.root.mul(&acc, self.f(n)))
    }

    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p(), RM)
    }

    fn edge(&self, i: u32) -> BigFloat {
        let v = self.div(self.root.sin2n(i64::from(i) + 1), self.root.sin2n(1));
        if i % 2 == 0 { v } else { v.neg() }
    }

    fn theta(&self, [i, j, k]: [u32; 3]) -> BigFloat {
        let s = (i + j + k) / 2;
        let inner = self.prod([s - i, s - j, s - k]);
        let v = match self.norm {
            Normalization::Section2 => self.div(&self.root.mul(&inner, self.f(s + 1)), &self.prod([i, j, k])),
            Normalization::Appendix => self.div(&inner, self.f(s + 1)),
        };
        if s % 2 == 0 { v } else { v.neg() }
    }

    fn sixj(&self, six: [u32; 6]) -> BigFloat {
        let six = ColorSixTuple::from(six);
        let (ts, qs) = (six.t_sums(), six.q_sums());
        let lo = *ts.iter().max().unwrap();
        let hi = *qs.iter().min().unwrap();
        let p = self.p();
        let mut bare = BigFloat::from_u8(0, p);
        for z in lo..=hi.min(self.r - 2) {
            let den = self.prod(ts.iter().map(|&t| z - t).chain(qs.iter().map(|&q| q - z)));
            let term = self.div(self.f(z + 1), &den);
            bare = if z % 2 == 0 { bare.add(&term, p, RM) } else { bare.sub(&term, p, RM) };
        }
        match self.norm {
            Normalization::Appendix => bare,
            Normalization::Section2 => {
                let num = self.prod(ts.iter().flat_map(|&t| qs.iter().map(move |&q| q - t)));
                let pre = self.div(&num, &self.prod(six.to_array()));
                self.root.mul(&pre, &bare)
            }
        }
    }

    fn weight(&self, tri: &Triangulation, c: &[u32]) -> BigFloat {
        let mut w = self.prod([]);
        for &x in c {
            w = self.root.mul(&w, &self.edge(x));
        }
        for f in tri.face_edge_incidence() {
            let th = self.theta([c[f[0]], c[f[1]], c[f[2]]]);
            w = match self.norm {
                Normalization::Appendix => self.root.mul(&w, &th),
                Normalization::Section2 => self.div(&w, &th),
            };
        }
        for t in tri.tetrahedra() {
            w = self.root.mul(&w, &self.sixj(t.map(|e| c[e])));
        }
        w
    }
}

/// Sum of coloring weights over `colorings`, recomputed at the precision the mass needs.
pub(crate) fn state_sum(
    tri: &Triangulation,
    ctx: &RootContext,
    norm: Normalization,
    colorings: &[Vec<u32>],
    mass: LogMagnitude,
) -> LogMagnitude {
    rescue(mass, colorings.len(), |p| {
        let kernel = Kernel::new(ctx, p, norm);
        colorings
            .par_iter()
            .map(|c| kernel.weight(tri, c))
            .collect::<Vec<_>>()
            .iter()
            .fold(BigFloat::from_u8(0, p), |acc, w| acc.add(w, p, RM))
    })
}
