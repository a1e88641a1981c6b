//! Roots of unity and quantum arithmetic.
//!
//! A root context fixes the level `r` and a root `A`. Internally `A` is stored as
//! `exp(iπ·step/(2r))` with an integer `step`, so every angle that shows up in the
//! library is an integer multiple of `π/(2r)`. Sines of such angles are reduced
//! exactly before calling `sin`, which makes vanishing values (e.g. `[r]`) exactly
//! `0.0` rather than `1e-16`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Mul, MulAssign, Neg};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Which family of roots `A` belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    /// `A` a primitive `4r`-th root of unity, principal value `e^{iπ/2r}`.
    Su2,
    /// `A` a primitive `2r`-th root of unity with `r` odd, principal value `e^{iπ/r}`.
    So3,
}

impl fmt::Display for Flavor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Flavor::Su2 => f.write_str("su2"),
            Flavor::So3 => f.write_str("so3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RootContext {
    r: u32,
    flavor: Flavor,
    exponent: u32,
    /// `A = exp(iπ·step/(2r))`.
    step: u32,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl RootContext {
    /// Root `A = e^{iπk/2r}` (SU2) or `A = e^{iπk/r}` (SO3) for exponent `k`.
    pub fn new(r: u32, flavor: Flavor, exponent: u32) -> Result<Self> {
        if r < 3 {
            return Err(Error::LevelTooSmall(r));
        }
        let (order, step) = match flavor {
            Flavor::Su2 => (4 * u64::from(r), u64::from(exponent)),
            Flavor::So3 => {
                if r % 2 == 0 {
                    return Err(Error::EvenLevelForSo3(r));
                }
                (2 * u64::from(r), 2 * u64::from(exponent))
            }
        };
        if exponent == 0 || gcd(u64::from(exponent), order) != 1 {
            return Err(Error::NotPrimitive { r, exponent });
        }
        let step = u32::try_from(step % (4 * u64::from(r)))
            .map_err(|_| Error::OutOfRange { value: i64::from(r), reason: "level too large" })?;
        Ok(Self { r, flavor, exponent, step })
    }

    /// Principal root for the flavor.
    pub fn principal(r: u32, flavor: Flavor) -> Result<Self> {
        Self::new(r, flavor, 1)
    }

    pub fn su2(r: u32) -> Result<Self> {
        Self::principal(r, Flavor::Su2)
    }

    pub fn so3(r: u32) -> Result<Self> {
        Self::principal(r, Flavor::So3)
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn exponent(&self) -> u32 {
        self.exponent
    }

    /// `(r-1)/2` for SO3 roots.
    pub fn m(&self) -> Option<u32> {
        match self.flavor {
            Flavor::So3 => Some((self.r - 1) / 2),
            Flavor::Su2 => None,
        }
    }

    pub fn require(&self, flavor: Flavor) -> Result<()> {
        if self.flavor == flavor {
            Ok(())
        } else {
            Err(Error::FlavorMismatch { expected: flavor, found: self.flavor })
        }
    }

    /// The argument `θ` of `A = e^{iθ}`, in radians.
    /// `A = exp(iπ·step/(2r))`, `0 ≤ step < 4r`.
    pub(crate) fn step(&self) -> u32 {
        self.step
    }

    pub fn theta(&self) -> f64 {
        std::f64::consts::PI * f64::from(self.step) / (2.0 * f64::from(self.r))
    }

    pub fn a(&self) -> Complex64 {
        self.a_pow(1)
    }

    pub fn q(&self) -> Complex64 {
        self.a_pow(2)
    }

    pub fn t(&self) -> Complex64 {
        self.a_pow(4)
    }

    fn period(&self) -> i64 {
        4 * i64::from(self.r)
    }

    /// Angle units `n·step` reduced mod `4r`.
    fn units(&self, n: i64) -> i64 {
        let p = self.period();
        ((i128::from(n) * i128::from(self.step)).rem_euclid(i128::from(p))) as i64
    }

    /// `A^n` on the unit circle.
    pub fn a_pow(&self, n: i64) -> Complex64 {
        let u = self.units(n);
        Complex64::new(self.cos_units(u), self.sin_units(u))
    }

    /// `sin(π·p/(2r))`, exact at multiples of `π/2`.
    pub(crate) fn sin_units(&self, p: i64) -> f64 {
        let r = i64::from(self.r);
        let mut p = p.rem_euclid(4 * r);
        let mut sign = 1.0;
        if p >= 2 * r {
            p -= 2 * r;
            sign = -1.0;
        }
        if p > r {
            p = 2 * r - p;
        }
        match p.cmp(&r) {
            Ordering::Equal => sign,
            _ if p == 0 => 0.0,
            _ => sign * (std::f64::consts::PI * p as f64 / (2 * r) as f64).sin(),
        }
    }

    pub(crate) fn cos_units(&self, p: i64) -> f64 {
        self.sin_units(p.rem_euclid(self.period()) + i64::from(self.r))
    }

    /// `sin(2nθ)`, the numerator of `[n]` up to the common factor.
    pub(crate) fn sin_2n_theta(&self, n: i64) -> f64 {
        let p = self.period();
        let u = (2 * i128::from(n) * i128::from(self.step)).rem_euclid(i128::from(p)) as i64;
        self.sin_units(u)
    }
}

impl fmt::Display for RootContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(r={}, k={})", self.flavor, self.r, self.exponent)
    }
}

/// `[n] = (A^{2n} - A^{-2n}) / (A^2 - A^{-2}) = sin(2nθ)/sin(2θ)`.
pub fn quantum_int(ctx: &RootContext, n: i64) -> f64 {
    match n {
        0 => 0.0,
        1 => 1.0,
        -1 => -1.0,
        _ => ctx.sin_2n_theta(n) / ctx.sin_2n_theta(1),
    }
}

/// `[n]! = [1][2]⋯[n]`; exactly zero once `n ≥ r`.
pub fn quantum_factorial(ctx: &RootContext, n: u32) -> f64 {
    (1..=i64::from(n)).map(|k| quantum_int(ctx, k)).product()
}

/// `[n]!` as a sign and log-magnitude.
pub fn quantum_factorial_log(ctx: &RootContext, n: u32) -> LogMagnitude {
    (1..=i64::from(n))
        .map(|k| LogMagnitude::from_f64(quantum_int(ctx, k)))
        .fold(LogMagnitude::ONE, |acc, x| acc * x)
}

/// `{j} = 2 sin(2jθ)`; at the principal SO3 root this is `2 sin(2jπ/r)`.
pub fn brace(ctx: &RootContext, j: i64) -> Result<f64> {
    ctx.require(Flavor::So3)?;
    Ok(2.0 * ctx.sin_2n_theta(j))
}

/// `{j}! = {1}{2}⋯{j}` in log scale, for `0 ≤ j < r`.
pub fn brace_factorial_log(ctx: &RootContext, j: u32) -> Result<LogMagnitude> {
    ctx.require(Flavor::So3)?;
    if j >= ctx.r() {
        return Err(Error::OutOfRange {
            value: i64::from(j),
            reason: "brace factorial needs j < r",
        });
    }
    let mut acc = LogMagnitude::ONE;
    for k in 1..=i64::from(j) {
        acc *= LogMagnitude::from_f64(2.0 * ctx.sin_2n_theta(k));
    }
    Ok(acc)
}

/// `η_r = (A^2 - A^{-2}) / sqrt(-2r)`.
pub fn eta(ctx: &RootContext) -> f64 {
    2.0 * ctx.sin_2n_theta(1) / (2.0 * f64::from(ctx.r())).sqrt()
}

/// `η'_r = (A^2 - A^{-2}) / sqrt(-r)`, SO3 roots only.
pub fn eta_prime(ctx: &RootContext) -> Result<f64> {
    ctx.require(Flavor::So3)?;
    Ok(2.0 * ctx.sin_2n_theta(1) / f64::from(ctx.r()).sqrt())
}

/// A real number stored as a sign and the natural log of its absolute value.
#[derive(Debug, Clone, Copy)]
pub struct LogMagnitude {
    sign: i8,
    log_abs: f64,
}

impl LogMagnitude {
    pub const ZERO: Self = Self { sign: 0, log_abs: f64::NEG_INFINITY };
    pub const ONE: Self = Self { sign: 1, log_abs: 0.0 };

    /// Builds a value from its parts; a zero sign or a `-∞` log gives [`Self::ZERO`].
    pub fn new(sign: i8, log_abs: f64) -> Self {
        if sign == 0 || log_abs == f64::NEG_INFINITY {
            Self::ZERO
        } else {
            Self { sign: sign.signum(), log_abs }
        }
    }

    /// Positive value `e^{log_abs}`.
    pub fn from_log(log_abs: f64) -> Self {
        Self::new(1, log_abs)
    }

    pub fn from_f64(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            Self { sign: if x > 0.0 { 1 } else { -1 }, log_abs: x.abs().ln() }
        }
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn log_abs(&self) -> f64 {
        self.log_abs
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    /// Back to linear scale; may overflow to `±∞` or underflow to `0`.
    pub fn to_f64(&self) -> f64 {
        match self.sign {
            0 => 0.0,
            s => f64::from(s) * self.log_abs.exp(),
        }
    }

    pub fn abs(&self) -> Self {
        Self::new(self.sign.abs(), self.log_abs)
    }

    pub fn recip(&self) -> Option<Self> {
        (!self.is_zero()).then(|| Self { sign: self.sign, log_abs: -self.log_abs })
    }

    pub fn checked_div(&self, rhs: Self) -> Option<Self> {
        rhs.recip().map(|inv| *self * inv)
    }

    pub fn powi(&self, n: i32) -> Self {
        match (self.sign, n) {
            (_, 0) => Self::ONE,
            (0, _) => Self::ZERO,
            (s, n) => Self {
                sign: if n % 2 == 0 { 1 } else { s },
                log_abs: self.log_abs * f64::from(n),
            },
        }
    }

    /// Signed sum of arbitrarily scaled terms.
    pub fn sum_of<I: IntoIterator<Item = LogMagnitude>>(terms: I) -> Self {
        let mut acc = LogSum::new();
        for t in terms {
            acc.add(t);
        }
        acc.value()
    }
}

impl PartialEq for LogMagnitude {
    fn eq(&self, other: &Self) -> bool {
        self.sign == other.sign && (self.sign == 0 || self.log_abs == other.log_abs)
    }
}

impl Mul for LogMagnitude {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        if self.sign == 0 || rhs.sign == 0 {
            Self::ZERO
        } else {
            Self { sign: self.sign * rhs.sign, log_abs: self.log_abs + rhs.log_abs }
        }
    }
}

impl MulAssign for LogMagnitude {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl Neg for LogMagnitude {
    type Output = Self;

    fn neg(self) -> Self {
        Self { sign: -self.sign, log_abs: self.log_abs }
    }
}

impl Sum for LogMagnitude {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        Self::sum_of(iter)
    }
}

impl From<f64> for LogMagnitude {
    fn from(x: f64) -> Self {
        Self::from_f64(x)
    }
}

/// Streaming signed sum in log scale.
///
/// Terms are held relative to the largest magnitude seen so far and accumulated
/// with compensated summation; when a larger term arrives the running sum is
/// rescaled.
#[derive(Debug, Clone, Copy)]
pub struct LogSum {
    scale: f64,
    acc: CompensatedSum,
}

impl Default for LogSum {
    fn default() -> Self {
        Self::new()
    }
}

impl LogSum {
    pub fn new() -> Self {
        Self { scale: f64::NEG_INFINITY, acc: CompensatedSum::new() }
    }

    pub fn add(&mut self, term: LogMagnitude) {
        if term.is_zero() {
            return;
        }
        if term.log_abs > self.scale {
            if self.scale.is_finite() {
                self.acc.scale((self.scale - term.log_abs).exp());
            }
            self.scale = term.log_abs;
        }
        self.acc.add(f64::from(term.sign) * (term.log_abs - self.scale).exp());
    }

    pub fn value(&self) -> LogMagnitude {
        let v = self.acc.value();
        if v == 0.0 || !self.scale.is_finite() {
            LogMagnitude::ZERO
        } else {
            LogMagnitude::new(if v > 0.0 { 1 } else { -1 }, v.abs().ln() + self.scale)
        }
    }
}

/// Precomputed `[n]`, `[n]!` and `log|[n]!|` for `0 ≤ n ≤ max`.
#[derive(Debug, Clone)]
pub struct QuantumTable {
    ctx: RootContext,
    ints: Vec<f64>,
    facts: Vec<f64>,
    log_facts: Vec<LogMagnitude>,
}

impl QuantumTable {
    pub fn new(ctx: &RootContext, max: u32) -> Self {
        let n = max as usize + 1;
        let mut ints = Vec::with_capacity(n);
        let mut facts = Vec::with_capacity(n);
        let mut log_facts = Vec::with_capacity(n);
        let (mut f, mut lf) = (1.0, LogMagnitude::ONE);
        for k in 0..n {
            let qk = quantum_int(ctx, k as i64);
            ints.push(qk);
            if k > 0 {
                f *= qk;
                lf *= LogMagnitude::from_f64(qk);
            }
            facts.push(f);
            log_facts.push(lf);
        }
        Self { ctx: *ctx, ints, facts, log_facts }
    }

    pub fn ctx(&self) -> &RootContext {
        &self.ctx
    }

    pub fn max(&self) -> u32 {
        (self.ints.len() - 1) as u32
    }

    #[inline]
    pub fn int(&self, n: u32) -> f64 {
        self.ints[n as usize]
    }

    #[inline]
    pub fn fact(&self, n: u32) -> f64 {
        self.facts[n as usize]
    }

    #[inline]
    pub fn log_fact(&self, n: u32) -> LogMagnitude {
        self.log_facts[n as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn so3(r: u32) -> RootContext {
        RootContext::so3(r).unwrap()
    }

    #[test]
    fn construction_checks() {
        assert_eq!(RootContext::so3(4), Err(Error::EvenLevelForSo3(4)));
        assert_eq!(RootContext::su2(2), Err(Error::LevelTooSmall(2)));
        assert!(matches!(RootContext::new(5, Flavor::So3, 5), Err(Error::NotPrimitive { .. })));
        assert!(matches!(RootContext::new(5, Flavor::Su2, 2), Err(Error::NotPrimitive { .. })));
        assert!(RootContext::new(7, Flavor::So3, 3).is_ok());
        assert_eq!(so3(5).m(), Some(2));
        assert_eq!(RootContext::su2(6).unwrap().m(), None);
    }

    #[test]
    fn roots_have_stated_order() {
        for r in 3..30u32 {
            for (flavor, order) in [(Flavor::Su2, 4 * r), (Flavor::So3, 2 * r)] {
                let Ok(ctx) = RootContext::principal(r, flavor) else { continue };
                let a = ctx.a();
                assert!((a.powu(order) - 1.0).norm() < 1e-12);
                for d in 1..order {
                    if order % d == 0 {
                        assert!((a.powu(d) - 1.0).norm() > 1e-12, "r={r} d={d}");
                    }
                }
                // q^2 primitive r-th root
                let q2 = ctx.q() * ctx.q();
                for d in 1..r {
                    if r % d == 0 {
                        assert!((q2.powu(d) - 1.0).norm() > 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn a_pow_matches_complex_exp() {
        let ctx = RootContext::new(9, Flavor::Su2, 5).unwrap();
        for n in -50..50 {
            let expect = Complex64::from_polar(1.0, ctx.theta() * n as f64);
            assert!((ctx.a_pow(n) - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn quantum_int_examples() {
        let ctx = so3(5);
        assert_eq!(quantum_int(&ctx, 1), 1.0);
        assert_eq!(quantum_int(&ctx, 0), 0.0);
        assert!((quantum_int(&ctx, 2) - 0.618_033_988_749_894_8).abs() < 1e-12);
        assert_eq!(quantum_int(&ctx, 5), 0.0);
        assert_eq!(quantum_int(&RootContext::su2(5).unwrap(), 5), 0.0);
    }

    #[test]
    fn quantum_factorial_examples() {
        let ctx = so3(7);
        assert_eq!(quantum_factorial(&ctx, 0), 1.0);
        assert_eq!(quantum_factorial(&ctx, 1), 1.0);
        let s = |x: f64| x.sin();
        let expect = s(4.0 * PI / 7.0) / s(2.0 * PI / 7.0) * s(6.0 * PI / 7.0) / s(2.0 * PI / 7.0);
        assert!((quantum_factorial(&ctx, 3) - expect).abs() < 1e-12);
        assert_eq!(quantum_factorial(&ctx, 7), 0.0);
        assert_eq!(quantum_factorial(&ctx, 9), 0.0);
    }

    #[test]
    fn braces() {
        let ctx = so3(5);
        assert_eq!(brace(&ctx, 0).unwrap(), 0.0);
        assert!((brace(&ctx, 1).unwrap() - 1.902_113_032_590_307).abs() < 1e-12);
        assert_eq!(brace(&so3(7), 7).unwrap(), 0.0);
        assert!(matches!(
            brace(&RootContext::su2(5).unwrap(), 1),
            Err(Error::FlavorMismatch { .. })
        ));
    }

    #[test]
    fn brace_factorial_examples() {
        assert_eq!(brace_factorial_log(&so3(7), 0).unwrap(), LogMagnitude::ONE);
        let got = brace_factorial_log(&so3(7), 3).unwrap();
        let s = |k: f64| (2.0 * k * PI / 7.0).sin();
        let expect = (8.0 * (s(1.0) * s(2.0) * s(3.0)).abs()).ln();
        assert!((got.log_abs() - expect).abs() < 1e-12);
        assert_eq!(got.sign(), 1);
        // {4},{5},{6} are negative at r = 7
        assert_eq!(brace_factorial_log(&so3(7), 5).unwrap().sign(), 1);
        assert_eq!(brace_factorial_log(&so3(7), 6).unwrap().sign(), -1);
        assert!(brace_factorial_log(&so3(7), 7).is_err());
    }

    #[test]
    fn eta_examples() {
        let su = RootContext::su2(3).unwrap();
        assert!((eta(&su) - 0.707_106_781_186_547_5).abs() < 1e-12);
        assert!((eta_prime(&so3(5)).unwrap() - 0.850_650_808_352_039_9).abs() < 1e-12);
        assert!(eta_prime(&su).is_err());
        let big = so3(100_001);
        let e = eta_prime(&big).unwrap();
        assert!(e.abs() < 1e-6 && (e * e).ln().abs() / 100_001.0 < 1e-3);
    }

    #[test]
    fn log_magnitude_arithmetic() {
        let a = LogMagnitude::from_f64(-3.0);
        let b = LogMagnitude::from_f64(0.5);
        assert!(((a * b).to_f64() + 1.5).abs() < 1e-15);
        assert_eq!((a * LogMagnitude::ZERO), LogMagnitude::ZERO);
        assert!((a.powi(3).to_f64() + 27.0).abs() < 1e-12);
        assert!((a.checked_div(b).unwrap().to_f64() + 6.0).abs() < 1e-14);
        assert!(a.checked_div(LogMagnitude::ZERO).is_none());
        assert_eq!(LogMagnitude::new(1, f64::NEG_INFINITY), LogMagnitude::ZERO);
        assert_eq!((-a).sign(), 1);
    }

    #[test]
    fn log_sum_handles_huge_terms() {
        let big = LogMagnitude::from_log(1000.0);
        let s = LogMagnitude::sum_of([big, LogMagnitude::from_f64(-2.0), -big, big]);
        assert_eq!(s.sign(), 1);
        assert!((s.log_abs() - 1000.0).abs() < 1e-12);
        let t: LogMagnitude = [LogMagnitude::from_log(800.0), LogMagnitude::from_log(800.0)]
            .into_iter()
            .sum();
        assert!((t.log_abs() - (800.0 + 2f64.ln())).abs() < 1e-12);
        let u = LogMagnitude::sum_of([1.0, 2.0, -3.5].map(LogMagnitude::from_f64));
        assert!((u.to_f64() + 0.5).abs() < 1e-15);
    }

    #[test]
    fn table_matches_direct() {
        let ctx = so3(11);
        let t = QuantumTable::new(&ctx, 14);
        for n in 0..=14 {
            assert_eq!(t.int(n), quantum_int(&ctx, i64::from(n)));
            assert!((t.fact(n) - quantum_factorial(&ctx, n)).abs() < 1e-12);
            assert!((t.log_fact(n).to_f64() - t.fact(n)).abs() < 1e-10);
        }
        assert!(t.log_fact(11).is_zero());
    }
}
