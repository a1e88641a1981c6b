//! Admissibility and the closed-form coefficients of the state sum: circle values,
//! theta (trihedral) coefficients and tetrahedral coefficients / 6j-symbols.
//!
//! Two normalizations are provided. [`Normalization::Section2`] uses the theta
//! value with `[s+1]!` in the numerator (it divides the state-sum weight) and the
//! 6j-symbol carrying the `∏[Q_b - T_a]! / ∏[x]!` prefactor.
//! [`Normalization::Appendix`] uses `|i,j,k|` with `[s+1]!` in the denominator (it
//! multiplies the weight) and the bare alternating z-sum.

use std::fmt;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qarith::{LogMagnitude, LogSum, QuantumTable, RootContext};

/// Above this level the 6j z-sum is evaluated term by term in log scale.
pub const LOG_PATH_LEVEL: u32 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorTriple(pub u32, pub u32, pub u32);

impl ColorTriple {
    pub fn to_array(self) -> [u32; 3] {
        [self.0, self.1, self.2]
    }

    /// `(i+j+k)/2`.
    fn half_sum(self) -> u32 {
        (self.0 + self.1 + self.2) / 2
    }
}

impl From<[u32; 3]> for ColorTriple {
    fn from([i, j, k]: [u32; 3]) -> Self {
        Self(i, j, k)
    }
}

/// Colors of a tetrahedron, `(i, j, k, l, m, n) = (e12, e13, e23, e34, e24, e14)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ColorSixTuple {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub l: u32,
    pub m: u32,
    pub n: u32,
}

impl ColorSixTuple {
    pub fn new(i: u32, j: u32, k: u32, l: u32, m: u32, n: u32) -> Self {
        Self { i, j, k, l, m, n }
    }

    pub fn to_array(self) -> [u32; 6] {
        [self.i, self.j, self.k, self.l, self.m, self.n]
    }

    /// The four face triples `(i,j,k), (i,m,n), (j,l,n), (k,l,m)`; their half-sums
    /// are `T1..T4`.
    pub fn faces(self) -> [ColorTriple; 4] {
        let Self { i, j, k, l, m, n } = self;
        [ColorTriple(i, j, k), ColorTriple(i, m, n), ColorTriple(j, l, n), ColorTriple(k, l, m)]
    }

    pub fn t_sums(self) -> [u32; 4] {
        self.faces().map(ColorTriple::half_sum)
    }

    pub fn q_sums(self) -> [u32; 3] {
        let Self { i, j, k, l, m, n } = self;
        [(i + j + l + m) / 2, (i + k + l + n) / 2, (j + k + m + n) / 2]
    }
}

impl From<[u32; 6]> for ColorSixTuple {
    fn from([i, j, k, l, m, n]: [u32; 6]) -> Self {
        Self { i, j, k, l, m, n }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Section2,
    Appendix,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Section2 => "section2",
            Normalization::Appendix => "appendix",
        })
    }
}

/// Admissibility of `(i,j,k)` at level `r`, no range checks.
#[inline]
pub fn admissible(r: u32, i: u32, j: u32, k: u32) -> bool {
    let s = i + j + k;
    i + j >= k && j + k >= i && k + i >= j && s % 2 == 0 && s <= 2 * (r - 2)
}

#[inline]
pub fn admissible_six(r: u32, six: ColorSixTuple) -> bool {
    six.faces().iter().all(|t| admissible(r, t.0, t.1, t.2))
}

fn check_range(ctx: &RootContext, colors: &[u32]) -> Result<()> {
    let max = ctx.r() - 2;
    match colors.iter().find(|&&c| c > max) {
        Some(&color) => Err(Error::ColorOutOfRange { color, max }),
        None => Ok(()),
    }
}

pub fn is_admissible_triple(ctx: &RootContext, triple: ColorTriple, so3: bool) -> Result<bool> {
    let a = triple.to_array();
    check_range(ctx, &a)?;
    Ok((!so3 || a.iter().all(|c| c % 2 == 0)) && admissible(ctx.r(), a[0], a[1], a[2]))
}

pub fn is_admissible_six(ctx: &RootContext, six: ColorSixTuple, so3: bool) -> Result<bool> {
    let a = six.to_array();
    check_range(ctx, &a)?;
    Ok((!so3 || a.iter().all(|c| c % 2 == 0)) && admissible_six(ctx.r(), six))
}

/// `⟨e_i⟩ = (-1)^i [i+1]`.
pub fn bracket_cheby(ctx: &RootContext, i: u32) -> f64 {
    let v = crate::qarith::quantum_int(ctx, i64::from(i) + 1);
    if i % 2 == 0 {
        v
    } else {
        -v
    }
}

/// Circle value of an edge colored `i`; the same in both normalizations.
pub fn edge_weight(ctx: &RootContext, i: u32) -> f64 {
    bracket_cheby(ctx, i)
}

fn require_triple(ctx: &RootContext, t: ColorTriple) -> Result<()> {
    if is_admissible_triple(ctx, t, false)? {
        Ok(())
    } else {
        Err(Error::Inadmissible(t.to_array().to_vec()))
    }
}

fn require_six(ctx: &RootContext, six: ColorSixTuple) -> Result<()> {
    if is_admissible_six(ctx, six, false)? {
        Ok(())
    } else {
        Err(Error::Inadmissible(six.to_array().to_vec()))
    }
}

fn table_for(ctx: &RootContext) -> QuantumTable {
    QuantumTable::new(ctx, 2 * ctx.r())
}

/// Theta coefficient in the normalization where it divides the weight.
pub fn theta(ctx: &RootContext, triple: ColorTriple) -> Result<f64> {
    require_triple(ctx, triple)?;
    Ok(theta_with(&table_for(ctx), triple, Normalization::Section2))
}

/// `|i,j,k|`, the face weight of the multiplicative normalization.
pub fn theta_appendix(ctx: &RootContext, triple: ColorTriple) -> Result<f64> {
    require_triple(ctx, triple)?;
    Ok(theta_with(&table_for(ctx), triple, Normalization::Appendix))
}

pub fn sixj(ctx: &RootContext, six: ColorSixTuple, normalization: Normalization) -> Result<f64> {
    require_six(ctx, six)?;
    Ok(sixj_with(&table_for(ctx), six, normalization))
}

/// Unchecked theta; `table` must reach `(i+j+k)/2 + 1`.
pub fn theta_with(table: &QuantumTable, t: ColorTriple, norm: Normalization) -> f64 {
    let ColorTriple(i, j, k) = t;
    let s = t.half_sum();
    let inner = table.fact(s - k) * table.fact(s - i) * table.fact(s - j);
    let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
    match norm {
        Normalization::Section2 => {
            sign * inner * table.fact(s + 1) / (table.fact(i) * table.fact(j) * table.fact(k))
        }
        Normalization::Appendix => sign * inner / table.fact(s + 1),
    }
}

/// Unchecked 6j-symbol; `table` must reach `min Q + 1`.
pub fn sixj_with(table: &QuantumTable, six: ColorSixTuple, norm: Normalization) -> f64 {
    if table.ctx().r() > LOG_PATH_LEVEL {
        return sixj_log(table, six, norm).to_f64();
    }
    let ts = six.t_sums();
    let qs = six.q_sums();
    let lo = *ts.iter().max().unwrap();
    let hi = *qs.iter().min().unwrap();
    let mut sum = crate::numeric::CompensatedSum::new();
    let mut mass = 0.0;
    for z in lo..=hi {
        let num = table.fact(z + 1);
        if num == 0.0 {
            // [z+1]! contains [r] = 0 from here on
            break;
        }
        let den: f64 = ts.iter().map(|&t| table.fact(z - t)).product::<f64>()
            * qs.iter().map(|&q| table.fact(q - z)).product::<f64>();
        let term = num / den;
        mass += term.abs();
        sum.add(if z % 2 == 0 { term } else { -term });
    }
    let mut bare = sum.value();
    let (bare_log, mass_log) = (LogMagnitude::from_f64(bare), LogMagnitude::from_f64(mass));
    if crate::precise::needs_rescue(bare_log, mass_log) {
        bare = crate::precise::sixj_bare(table.ctx(), ts, qs, mass_log).to_f64();
    }
    match norm {
        Normalization::Appendix => bare,
        Normalization::Section2 => {
            let mut pre = 1.0;
            for &t in &ts {
                for &q in &qs {
                    pre *= table.fact(q - t);
                }
            }
            for x in six.to_array() {
                pre /= table.fact(x);
            }
            pre * bare
        }
    }
}

/// 6j-symbol with every z-term in log scale.
pub fn sixj_log(table: &QuantumTable, six: ColorSixTuple, norm: Normalization) -> LogMagnitude {
    let ts = six.t_sums();
    let qs = six.q_sums();
    let lo = *ts.iter().max().unwrap();
    let hi = *qs.iter().min().unwrap();
    let mut sum = LogSum::new();
    for z in lo..=hi {
        let num = table.log_fact(z + 1);
        if num.is_zero() {
            break;
        }
        let mut den = LogMagnitude::ONE;
        for &t in &ts {
            den *= table.log_fact(z - t);
        }
        for &q in &qs {
            den *= table.log_fact(q - z);
        }
        let term = num.checked_div(den).unwrap_or(LogMagnitude::ZERO);
        sum.add(if z % 2 == 0 { term } else { -term });
    }
    let bare = sum.value();
    match norm {
        Normalization::Appendix => bare,
        Normalization::Section2 => {
            let mut num = LogMagnitude::ONE;
            for &t in &ts {
                for &q in &qs {
                    num *= table.log_fact(q - t);
                }
            }
            let mut den = LogMagnitude::ONE;
            for x in six.to_array() {
                den *= table.log_fact(x);
            }
            num.checked_div(den).map_or(LogMagnitude::ZERO, |p| p * bare)
        }
    }
}

/// Memoized coefficients for one root and normalization.
///
/// Concurrent inserts of the same key store identical values, so the cache can be
/// shared freely between workers.
#[derive(Debug)]
pub struct Coefficients {
    table: QuantumTable,
    norm: Normalization,
    edges: Vec<f64>,
    thetas: DashMap<[u32; 3], f64>,
    sixjs: DashMap<[u32; 6], f64>,
}

impl Coefficients {
    pub fn new(ctx: &RootContext, norm: Normalization) -> Self {
        let edges = (0..=ctx.r() - 2).map(|i| edge_weight(ctx, i)).collect();
        Self {
            table: table_for(ctx),
            norm,
            edges,
            thetas: DashMap::new(),
            sixjs: DashMap::new(),
        }
    }

    pub fn ctx(&self) -> &RootContext {
        self.table.ctx()
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    #[inline]
    pub fn edge(&self, i: u32) -> f64 {
        self.edges[i as usize]
    }

    /// Theta of an admissible triple (symmetric, so keyed by the sorted triple).
    pub fn theta(&self, t: [u32; 3]) -> f64 {
        let mut key = t;
        key.sort_unstable();
        if let Some(v) = self.thetas.get(&key) {
            return *v;
        }
        let v = theta_with(&self.table, ColorTriple::from(key), self.norm);
        self.thetas.insert(key, v);
        v
    }

    /// 6j-symbol of an admissible tuple.
    pub fn sixj(&self, six: [u32; 6]) -> f64 {
        if let Some(v) = self.sixjs.get(&six) {
            return *v;
        }
        let v = sixj_with(&self.table, ColorSixTuple::from(six), self.norm);
        self.sixjs.insert(six, v);
        v
    }

    pub fn cached(&self) -> (usize, usize) {
        (self.thetas.len(), self.sixjs.len())
    }
}
