//! Lobachevsky function, volume constants and growth rates of the invariants.

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::tv_from_jones_log;
use crate::error::{Error, Result};
use crate::jones::LinkExpr;
use crate::qarith::{brace, Flavor, RootContext};

const CLAUSEN_TERMS: usize = 40;

/// `ζ(2n)/(n(2n+1))` for `n = 1..CLAUSEN_TERMS`.
fn clausen_coefficients() -> &'static [f64; CLAUSEN_TERMS] {
    static COEFFS: OnceLock<[f64; CLAUSEN_TERMS]> = OnceLock::new();
    COEFFS.get_or_init(|| {
        let mut c = [0.0; CLAUSEN_TERMS];
        for (idx, slot) in c.iter_mut().enumerate() {
            let n = (idx + 1) as i32;
            let s = f64::from(2 * n);
            *slot = zeta_even(n) / (f64::from(n) * (s + 1.0));
        }
        c
    })
}

/// `ζ(2n)`, direct sum with an Euler-Maclaurin tail.
fn zeta_even(n: i32) -> f64 {
    match n {
        1 => PI.powi(2) / 6.0,
        2 => PI.powi(4) / 90.0,
        3 => PI.powi(6) / 945.0,
        _ => {
            let s = f64::from(2 * n);
            let k = 16.0_f64;
            let head: f64 = (1..16).rev().map(|j| f64::from(j).powf(-s)).sum();
            head + k.powf(1.0 - s) / (s - 1.0) + 0.5 * k.powf(-s) + s / 12.0 * k.powf(-s - 1.0)
        }
    }
}

/// Clausen function `Cl₂(x) = -∫₀^x log|2 sin(u/2)| du`, by its power series
/// about zero after reduction to `[-π, π]`.
pub fn clausen2(x: f64) -> f64 {
    let x = reduce(x, 2.0 * PI);
    if x == 0.0 {
        return 0.0;
    }
    let y = x / (2.0 * PI);
    let y2 = y * y;
    let mut pow = 1.0;
    let mut tail = 0.0;
    for c in clausen_coefficients() {
        pow *= y2;
        tail += c * pow;
    }
    x - x * x.abs().ln() + x * tail
}

/// Reduces `x` into `(-p/2, p/2]`.
fn reduce(x: f64, period: f64) -> f64 {
    let mut y = x.rem_euclid(period);
    if y > period / 2.0 {
        y -= period;
    }
    y
}

/// `Λ(θ) = -∫₀^θ log|2 sin u| du`.
pub fn lobachevsky(theta: f64) -> f64 {
    0.5 * clausen2(2.0 * theta)
}

/// `f(α,θ) = Λ(α+θ) - Λ(α-θ) + (2/3)Λ(θ) - (2/3)Λ(2θ)`.
pub fn f_alpha_theta(alpha: f64, theta: f64) -> f64 {
    lobachevsky(alpha + theta) - lobachevsky(alpha - theta) + 2.0 / 3.0 * lobachevsky(theta)
        - 2.0 / 3.0 * lobachevsky(2.0 * theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeConstants {
    pub lambda_pi_6: f64,
    /// Regular ideal tetrahedron, `3Λ(π/3) = 2Λ(π/6)`.
    pub v3: f64,
    /// Regular ideal octahedron, `8Λ(π/4)`.
    pub v8: f64,
    pub vol_fig8: f64,
    pub vol_borromean: f64,
}

impl VolumeConstants {
    pub fn compute() -> Self {
        let l6 = lobachevsky(PI / 6.0);
        Self {
            lambda_pi_6: l6,
            v3: 2.0 * l6,
            v8: 8.0 * lobachevsky(PI / 4.0),
            vol_fig8: 4.0 * l6,
            vol_borromean: 16.0 * lobachevsky(PI / 4.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridMinimum {
    pub alpha: f64,
    pub theta: f64,
    pub value: f64,
}

/// Minimizes `f(α,θ)` on the grid `(aπ/n, tπ/n)`, `0 ≤ a,t ≤ n`.
///
/// Every argument of `Λ` is a multiple of `π/n`, so one table serves the grid.
pub fn minimize_f_grid(n: usize) -> GridMinimum {
    let n_i = n as i64;
    let table: Vec<f64> = (-n_i..=3 * n_i)
        .map(|k| lobachevsky(k as f64 * PI / n as f64))
        .collect();
    let lam = |k: i64| table[(k + n_i) as usize];
    let mut best = GridMinimum { alpha: 0.0, theta: 0.0, value: f64::INFINITY };
    for a in 0..=n_i {
        for t in 0..=n_i {
            let v = lam(a + t) - lam(a - t) + 2.0 / 3.0 * lam(t) - 2.0 / 3.0 * lam(2 * t);
            if v < best.value {
                best = GridMinimum {
                    alpha: a as f64 * PI / n as f64,
                    theta: t as f64 * PI / n as f64,
                    value: v,
                };
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRow {
    pub r: u32,
    pub log_tv: f64,
    /// `(2π/r) log TV_r`.
    pub y_r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Root mean square of the fit residuals.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthSeries {
    pub rows: Vec<GrowthRow>,
    pub fit: Option<GrowthFit>,
}

impl GrowthSeries {
    pub fn from_rows(rows: Vec<GrowthRow>) -> Self {
        let fit = fit_growth(&rows);
        Self { rows, fit }
    }

    pub fn last(&self) -> Option<&GrowthRow> {
        self.rows.last()
    }

    /// CSV with header `r,log_tv,y_r`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,log_tv,y_r\n");
        for row in &self.rows {
            s.push_str(&format!("{},{:.12},{:.12}\n", row.r, row.log_tv, row.y_r));
        }
        s
    }
}

/// Fits `y = a + b·log(r)/r + c/r` by least squares over the larger-`r` half
/// of the rows (at least four). Returns `None` with fewer than four rows.
pub fn fit_growth(rows: &[GrowthRow]) -> Option<GrowthFit> {
    if rows.len() < 4 {
        return None;
    }
    let mut sorted = rows.to_vec();
    sorted.sort_by_key(|row| row.r);
    let keep = rows.len().div_ceil(2).max(4);
    let used = &sorted[sorted.len() - keep..];
    let design = DMatrix::from_fn(used.len(), 3, |i, j| {
        let r = f64::from(used[i].r);
        match j {
            0 => 1.0,
            1 => r.ln() / r,
            _ => 1.0 / r,
        }
    });
    let y = DVector::from_iterator(used.len(), used.iter().map(|row| row.y_r));
    let coef = design.clone().svd(true, true).solve(&y, 1e-14).ok()?;
    let res = &design * &coef - &y;
    Some(GrowthFit {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        residual: (res.norm_squared() / used.len() as f64).sqrt(),
    })
}

/// `(2π/r) log TV_r(S³∖L, e^{2πi/r})` through the Jones sum, one row per odd `r`.
pub fn growth_row(link: &LinkExpr, r: u32) -> Result<GrowthRow> {
    let ctx = RootContext::so3(r)?;
    let tv = tv_from_jones_log(&ctx, link)?;
    if tv.sign() <= 0 {
        return Err(Error::Internal(format!("non-positive TV at r={r}")));
    }
    let log_tv = tv.log_abs();
    Ok(GrowthRow { r, log_tv, y_r: 2.0 * PI / f64::from(r) * log_tv })
}

/// Growth rows for ascending odd `r`, fitted when there are enough rows.
pub fn growth_series(link: &LinkExpr, r_list: &[u32]) -> Result<GrowthSeries> {
    if let Some(&r) = r_list.iter().find(|&&r| r % 2 == 0 || r < 3) {
        return Err(Error::EvenLevelForSo3(r));
    }
    if r_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("growth levels must be strictly ascending".into()));
    }
    let rows = r_list
        .par_iter()
        .map(|&r| growth_row(link, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(GrowthSeries::from_rows(rows))
}

/// Odd levels `r_min, r_min + step, …` ending exactly at `r_max`.
pub fn odd_levels(r_min: u32, r_max: u32, step: u32) -> Vec<u32> {
    let step = step.max(2) & !1;
    let mut out = Vec::new();
    let mut r = r_max;
    while r >= r_min.max(3) {
        out.push(r);
        if r < step {
            break;
        }
        r -= step;
    }
    out.reverse();
    out
}

/// `log|{j}!| + (r/2π)Λ(2jπ/r)` for `0 < j < r`.
pub fn qfact_log_residual(ctx: &RootContext, j: u32) -> Result<f64> {
    ctx.require(Flavor::So3)?;
    if j == 0 || j >= ctx.r() {
        return Err(Error::OutOfRange { value: i64::from(j), reason: "residual needs 0 < j < r" });
    }
    let log = crate::qarith::brace_factorial_log(ctx, j)?.log_abs();
    Ok(log + lambda_term(ctx, j))
}

fn lambda_term(ctx: &RootContext, j: u32) -> f64 {
    let r = f64::from(ctx.r());
    r / (2.0 * PI) * lobachevsky(2.0 * f64::from(j) * PI / r)
}

/// All residuals `j = 1..r-1`, computed with a running factorial.
pub fn qfact_log_residuals(ctx: &RootContext) -> Result<Vec<f64>> {
    ctx.require(Flavor::So3)?;
    let mut log = 0.0;
    (1..ctx.r())
        .map(|j| {
            log += brace(ctx, i64::from(j))?.abs().ln();
            Ok(log + lambda_term(ctx, j))
        })
        .collect()
}
