//! Colored Jones values at roots of unity for links built from closed-form
//! families: the unknot, the figure-eight knot, the Borromean rings and torus
//! knots, closed under split union, connected sum and cabling.
//!
//! Normalization: `J_{U,i} = [i]` and `J_{L,(1,…,1)} = 1`. Colors are `≥ 1`; knot
//! values are extended by `J_{K,0} = 0` and `J_{K,-n} = -J_{K,n}` where the
//! cabling sum needs it.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::precise;
use crate::qarith::{quantum_int, Flavor, LogMagnitude, LogSum, QuantumTable, RootContext};

/// Habiro sums switch to per-term log arithmetic above this level.
pub const HABIRO_LOG_LEVEL: u32 = 400;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinkExpr {
    Unknot,
    FigureEight,
    Borromean,
    Torus { p: i64, q: i64 },
    Split(Box<LinkExpr>, Box<LinkExpr>),
    /// Band the component `ca` of `a` to the component `cb` of `b` (0-based).
    ConnectedSum { a: Box<LinkExpr>, b: Box<LinkExpr>, ca: usize, cb: usize },
    /// `(p,q)`-cable of a knot.
    Cable { p: i64, q: i64, knot: Box<LinkExpr> },
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl LinkExpr {
    pub fn torus(p: i64, q: i64) -> Self {
        LinkExpr::Torus { p, q }
    }

    pub fn split(a: LinkExpr, b: LinkExpr) -> Self {
        LinkExpr::Split(Box::new(a), Box::new(b))
    }

    pub fn connsum(a: LinkExpr, b: LinkExpr) -> Self {
        LinkExpr::ConnectedSum { a: Box::new(a), b: Box::new(b), ca: 0, cb: 0 }
    }

    pub fn cable(p: i64, q: i64, knot: LinkExpr) -> Self {
        LinkExpr::Cable { p, q, knot: Box::new(knot) }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser { src: text, pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("trailing input"));
        }
        e.validate()?;
        Ok(e)
    }

    pub fn components(&self) -> usize {
        match self {
            LinkExpr::Unknot | LinkExpr::FigureEight | LinkExpr::Torus { .. } => 1,
            LinkExpr::Borromean => 3,
            LinkExpr::Split(a, b) => a.components() + b.components(),
            LinkExpr::ConnectedSum { a, b, .. } => a.components() + b.components() - 1,
            LinkExpr::Cable { .. } => 1,
        }
    }

    pub fn is_knot(&self) -> bool {
        self.components() == 1
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            LinkExpr::Unknot | LinkExpr::FigureEight | LinkExpr::Borromean => Ok(()),
            LinkExpr::Torus { p, q } => {
                if *p == 0 || *q == 0 || gcd(*p, *q) != 1 {
                    Err(Error::InvalidLink(format!("torus({p},{q}) needs coprime nonzero p, q")))
                } else {
                    Ok(())
                }
            }
            LinkExpr::Split(a, b) => {
                a.validate()?;
                b.validate()
            }
            LinkExpr::ConnectedSum { a, b, ca, cb } => {
                a.validate()?;
                b.validate()?;
                if *ca >= a.components() || *cb >= b.components() {
                    return Err(Error::InvalidLink(format!(
                        "connected sum component ({ca},{cb}) out of range ({},{})",
                        a.components(),
                        b.components()
                    )));
                }
                Ok(())
            }
            LinkExpr::Cable { p, q, knot } => {
                knot.validate()?;
                if !knot.is_knot() {
                    return Err(Error::InvalidLink("cabling applies to knots only".into()));
                }
                if *p == 0 || *q == 0 || gcd(*p, *q) != 1 {
                    return Err(Error::InvalidLink(format!("cable({p},{q},_) needs coprime nonzero p, q")));
                }
                Ok(())
            }
        }
    }
}

impl fmt::Display for LinkExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkExpr::Unknot => f.write_str("unknot"),
            LinkExpr::FigureEight => f.write_str("fig8"),
            LinkExpr::Borromean => f.write_str("borromean"),
            LinkExpr::Torus { p, q } => write!(f, "torus({p},{q})"),
            LinkExpr::Split(a, b) => write!(f, "split({a},{b})"),
            LinkExpr::ConnectedSum { a, b, ca: 0, cb: 0 } => write!(f, "connsum({a},{b})"),
            LinkExpr::ConnectedSum { a, b, ca, cb } => write!(f, "connsum({a},{b},{ca},{cb})"),
            LinkExpr::Cable { p, q, knot } => write!(f, "cable({p},{q},{knot})"),
        }
    }
}

impl FromStr for LinkExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LinkExpr::parse(s)
    }
}

/// Recursive-descent parser for the link expression syntax.
struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

const MAX_DEPTH: usize = 64;

impl<'a> Parser<'a> {
    fn error(&self, msg: &str) -> Error {
        Error::LinkSyntax(format!("{msg} at offset {} in {:?}", self.pos, self.src))
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.error(&format!("expected {c:?}")))
        }
    }

    fn ident(&mut self) -> Result<&'a str> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.error("expected a link name"));
        }
        self.pos += len;
        Ok(&rest[..len])
    }

    fn int(&mut self) -> Result<i64> {
        self.skip_ws();
        let rest = &self.src[self.pos..];
        let sign = usize::from(rest.starts_with(['-', '+']));
        let digits = rest[sign..].find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len() - sign);
        if digits == 0 {
            return Err(self.error("expected an integer"));
        }
        let text = &rest[..sign + digits];
        let v = text.parse().map_err(|_| self.error("integer out of range"))?;
        self.pos += sign + digits;
        Ok(v)
    }

    fn index(&mut self) -> Result<usize> {
        let v = self.int()?;
        usize::try_from(v).map_err(|_| self.error("component index must be ≥ 0"))
    }

    fn expr(&mut self) -> Result<LinkExpr> {
        self.expr_at(0)
    }

    fn expr_at(&mut self, depth: usize) -> Result<LinkExpr> {
        if depth > MAX_DEPTH {
            return Err(self.error("expression nested too deeply"));
        }
        let start = self.pos;
        let name = self.ident()?;
        let e = match name {
            "unknot" => LinkExpr::Unknot,
            "fig8" | "figure8" | "4_1" => LinkExpr::FigureEight,
            "borromean" => LinkExpr::Borromean,
            "torus" => {
                self.expect('(')?;
                let p = self.int()?;
                self.expect(',')?;
                let q = self.int()?;
                self.expect(')')?;
                LinkExpr::Torus { p, q }
            }
            "split" => {
                self.expect('(')?;
                let a = self.expr_at(depth + 1)?;
                self.expect(',')?;
                let b = self.expr_at(depth + 1)?;
                self.expect(')')?;
                LinkExpr::split(a, b)
            }
            "connsum" => {
                self.expect('(')?;
                let a = self.expr_at(depth + 1)?;
                self.expect(',')?;
                let b = self.expr_at(depth + 1)?;
                let (mut ca, mut cb) = (0, 0);
                if self.peek() == Some(',') {
                    self.expect(',')?;
                    ca = self.index()?;
                    self.expect(',')?;
                    cb = self.index()?;
                }
                self.expect(')')?;
                LinkExpr::ConnectedSum { a: Box::new(a), b: Box::new(b), ca, cb }
            }
            "cable" => {
                self.expect('(')?;
                let p = self.int()?;
                self.expect(',')?;
                let q = self.int()?;
                self.expect(',')?;
                let k = self.expr_at(depth + 1)?;
                self.expect(')')?;
                LinkExpr::cable(p, q, k)
            }
            other => {
                self.pos = start;
                return Err(self.error(&format!("unknown link {other:?}")));
            }
        };
        Ok(e)
    }
}

/// `J_{U,i} = [i]`.
pub fn jones_unknot(ctx: &RootContext, i: i64) -> Complex64 {
    Complex64::new(quantum_int(ctx, i), 0.0)
}

/// `-4 sin(2(i-k)θ) sin(2(i+k)θ)`, the `k`-th factor of the figure-eight Habiro sum.
fn fig8_factor(ctx: &RootContext, i: i64, k: i64) -> f64 {
    -4.0 * ctx.sin_2n_theta(i - k) * ctx.sin_2n_theta(i + k)
}

/// The figure-eight Habiro sum `1 + Σ_j Π_{k≤j} (t^{(i-k)/2} - t^{-(i-k)/2})(t^{(i+k)/2} - t^{-(i+k)/2})`,
/// i.e. the value normalized so that the unknot is 1.
pub fn jones_fig8_reduced(ctx: &RootContext, i: i64) -> f64 {
    if ctx.r() > HABIRO_LOG_LEVEL {
        return fig8_reduced_log(ctx, i, f64::NEG_INFINITY).to_f64();
    }
    let mut sum = CompensatedSum::new();
    let mut mass = 1.0;
    sum.add(1.0);
    let mut prod = 1.0;
    for k in 1..i {
        prod *= fig8_factor(ctx, i, k);
        if prod == 0.0 {
            break;
        }
        sum.add(prod);
        mass += prod.abs();
    }
    let (sum, mass) = (LogMagnitude::from_f64(sum.value()), LogMagnitude::from_f64(mass));
    if precise::needs_rescue(sum, mass) {
        precise::fig8_reduced(ctx, i, mass).to_f64()
    } else {
        sum.to_f64()
    }
}

/// Log-scale reduced sum. Cancellation is repaired only when the absolute mass
/// of the terms reaches `floor` (a natural log); below it the `f64` result is kept.
fn fig8_reduced_log(ctx: &RootContext, i: i64, floor: f64) -> LogMagnitude {
    let mut sum = LogSum::new();
    let mut mass = LogSum::new();
    sum.add(LogMagnitude::ONE);
    mass.add(LogMagnitude::ONE);
    let mut prod = LogMagnitude::ONE;
    for k in 1..i {
        prod *= LogMagnitude::from_f64(fig8_factor(ctx, i, k));
        if prod.is_zero() {
            break;
        }
        sum.add(prod);
        mass.add(prod.abs());
    }
    let (sum, mass) = (sum.value(), mass.value());
    if mass.log_abs() >= floor && precise::needs_rescue(sum, mass) {
        precise::fig8_reduced(ctx, i, mass)
    } else {
        sum
    }
}

/// `J_{4_1,i} = [i] · (reduced Habiro sum)`; real at every root on the unit circle.
pub fn jones_fig8(ctx: &RootContext, i: i64) -> Complex64 {
    Complex64::new(quantum_int(ctx, i) * jones_fig8_reduced(ctx, i), 0.0)
}

pub fn jones_fig8_log(ctx: &RootContext, i: i64) -> LogMagnitude {
    LogMagnitude::from_f64(quantum_int(ctx, i)) * fig8_reduced_log(ctx, i, f64::NEG_INFINITY)
}

/// Symmetric `q`-binomial `[n choose k]` evaluated at the root, pairing the
/// vanishing factors `[ar]/[br] → (a/b)·ε^{a-b}` with `ε = q^r = ±1`.
pub fn qbinom(ctx: &RootContext, n: i64, k: i64) -> f64 {
    if k < 0 || k > n {
        return 0.0;
    }
    let r = i64::from(ctx.r());
    let eps_odd = ctx.a_pow(2 * r).re < 0.0;
    let mut value = 1.0;
    let mut num_zeros = Vec::new();
    let mut den_zeros = Vec::new();
    for s in 1..=k {
        let top = n - k + s;
        if top % r == 0 {
            num_zeros.push(top / r);
        } else {
            value *= quantum_int(ctx, top);
        }
        if s % r == 0 {
            den_zeros.push(s / r);
        } else {
            value /= quantum_int(ctx, s);
        }
    }
    if num_zeros.len() > den_zeros.len() {
        return 0.0;
    }
    for (a, b) in num_zeros.into_iter().zip(den_zeros) {
        value *= a as f64 / b as f64;
        if eps_odd && (a - b) % 2 != 0 {
            value = -value;
        }
    }
    value
}

/// Whether every factorial in the Borromean Habiro terms has argument `< r`.
fn borromean_fits(ctx: &RootContext, c: [i64; 3]) -> bool {
    let lo = *c.iter().min().unwrap();
    let hi = *c.iter().max().unwrap();
    hi + lo - 1 < i64::from(ctx.r())
}

/// `|{1}|^{4j}`, the weight that turns the quantum-integer form of the Habiro
/// sum into the brace form with a single `1/{1}`.
fn borromean_weight_log(ctx: &RootContext, j: i64) -> f64 {
    (4 * j) as f64 * (2.0 * ctx.sin_2n_theta(1)).abs().ln()
}

/// Per-term values of the Borromean Habiro sum, as sign and log-magnitude.
///
/// SO3 roots use brace factorials `{n}! = [n]!·{1}^n` and the prefactor `1/{1}`.
/// Requires all factorial arguments below `r`.
pub fn borromean_terms_log(ctx: &RootContext, colors: [i64; 3]) -> Result<Vec<LogMagnitude>> {
    if colors.iter().any(|&c| c < 1) {
        return Err(Error::NonPositiveColor(*colors.iter().min().unwrap()));
    }
    if !borromean_fits(ctx, colors) {
        return Err(Error::OutOfRange {
            value: colors.iter().sum(),
            reason: "Borromean log terms need max+min-1 < r",
        });
    }
    let lo = *colors.iter().min().unwrap();
    let hi = (*colors.iter().max().unwrap() + lo) as usize;
    let (fact, prefactor): (Vec<LogMagnitude>, LogMagnitude) = match ctx.flavor() {
        Flavor::So3 => {
            let mut t = Vec::with_capacity(hi + 1);
            let mut acc = LogMagnitude::ONE;
            t.push(acc);
            for k in 1..=hi as i64 {
                acc *= LogMagnitude::from_f64(2.0 * ctx.sin_2n_theta(k));
                t.push(acc);
            }
            let one = LogMagnitude::from_f64(2.0 * ctx.sin_2n_theta(1));
            (t, one.recip().ok_or(Error::VanishingQuantumInteger(1))?)
        }
        Flavor::Su2 => {
            let table = QuantumTable::new(ctx, hi as u32);
            ((0..=hi as u32).map(|n| table.log_fact(n)).collect(), LogMagnitude::ONE)
        }
    };
    let f = |n: i64| fact[n as usize];
    let mut terms = Vec::with_capacity(lo as usize);
    for j in 0..lo {
        let mut num = LogMagnitude::ONE;
        let mut den = LogMagnitude::ONE;
        for &x in &colors {
            num *= f(x + j);
            den *= f(x - j - 1);
        }
        let ratio = f(j).checked_div(f(2 * j + 1)).unwrap_or(LogMagnitude::ZERO);
        let mut term = num.checked_div(den).unwrap_or(LogMagnitude::ZERO) * ratio.powi(2) * prefactor;
        if ctx.flavor() == Flavor::Su2 {
            term *= LogMagnitude::from_log(borromean_weight_log(ctx, j));
        }
        terms.push(if j % 2 == 0 { term } else { -term });
    }
    Ok(terms)
}

pub fn jones_borromean_log(ctx: &RootContext, colors: [i64; 3]) -> Result<LogMagnitude> {
    borromean_log(ctx, colors, f64::NEG_INFINITY)
}

fn borromean_log(ctx: &RootContext, colors: [i64; 3], floor: f64) -> Result<LogMagnitude> {
    if borromean_fits(ctx, colors) {
        let terms = borromean_terms_log(ctx, colors)?;
        let sum = LogMagnitude::sum_of(terms.iter().copied());
        let mass = LogMagnitude::sum_of(terms.iter().map(LogMagnitude::abs));
        if mass.log_abs() >= floor && precise::needs_rescue(sum, mass) {
            Ok(precise::borromean(ctx, colors, mass))
        } else {
            Ok(sum)
        }
    } else {
        Ok(LogMagnitude::from_f64(jones_borromean_generic(ctx, colors)?))
    }
}

fn jones_borromean_generic(ctx: &RootContext, c: [i64; 3]) -> Result<f64> {
    if let Some(&bad) = c.iter().find(|&&x| x < 1) {
        return Err(Error::NonPositiveColor(bad));
    }
    let lo = *c.iter().min().unwrap();
    let mut sum = CompensatedSum::new();
    for j in 0..lo {
        let mut term = crate::qarith::quantum_factorial(ctx, (2 * j + 1) as u32)
            * crate::qarith::quantum_factorial(ctx, j as u32).powi(2)
            * borromean_weight_log(ctx, j).exp();
        for &x in &c {
            term *= qbinom(ctx, x + j, 2 * j + 1);
        }
        sum.add(if j % 2 == 0 { term } else { -term });
    }
    Ok(sum.value())
}

/// Borromean rings, Habiro's cyclotomic sum over `0 ≤ j < min(k,l,n)`:
/// `Σ (-1)^j {1}^{4j} Π_x [x+j]!/[x-j-1]! · ([j]!/[2j+1]!)²`.
pub fn jones_borromean(ctx: &RootContext, colors: [i64; 3]) -> Result<Complex64> {
    if let Some(&bad) = colors.iter().find(|&&x| x < 1) {
        return Err(Error::NonPositiveColor(bad));
    }
    let v = if !borromean_fits(ctx, colors) {
        jones_borromean_generic(ctx, colors)?
    } else if ctx.r() > HABIRO_LOG_LEVEL {
        jones_borromean_log(ctx, colors)?.to_f64()
    } else {
        let lo = *colors.iter().min().unwrap();
        let hi = (*colors.iter().max().unwrap() + lo) as u32;
        let t = QuantumTable::new(ctx, hi);
        let f = |n: i64| t.fact(n as u32);
        let mut sum = CompensatedSum::new();
        let mut mass = 0.0;
        for j in 0..lo {
            let mut term = (f(j) / f(2 * j + 1)).powi(2) * borromean_weight_log(ctx, j).exp();
            for &x in &colors {
                term *= f(x + j) / f(x - j - 1);
            }
            sum.add(if j % 2 == 0 { term } else { -term });
            mass += term.abs();
        }
        let (sum, mass) = (LogMagnitude::from_f64(sum.value()), LogMagnitude::from_f64(mass));
        if precise::needs_rescue(sum, mass) {
            precise::borromean(ctx, colors, mass).to_f64()
        } else {
            sum.to_f64()
        }
    };
    Ok(Complex64::new(v, 0.0))
}

/// Torus knot `T(p,q)` by Morton's formula, written in `A`.
///
/// With `K = 2k`, each fraction `(A^a - A^b)/(A^2 - A^{-2})` equals `A^{b+2d}·[d]`
/// for `d = 1 - qK`, so no removable singularity is ever evaluated.
pub fn jones_torus(ctx: &RootContext, p: i64, q: i64, i: i64) -> Result<Complex64> {
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(Error::InvalidLink(format!("torus({p},{q}) needs coprime nonzero p, q")));
    }
    if i < 1 {
        return Err(Error::NonPositiveColor(i));
    }
    Ok(torus_value(ctx, p, q, i))
}

fn torus_value(ctx: &RootContext, p: i64, q: i64, i: i64) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for s in 0..i {
        let kk = 2 * s - (i - 1);
        let b = p * q * kk * kk - 2 * (p - q) * kk - 2;
        let d = 1 - q * kk;
        let term = ctx.a_pow(b + 2 * d) * quantum_int(ctx, d);
        re.add(term.re);
        im.add(term.im);
    }
    ctx.a_pow(p * q * (1 - i * i)) * Complex64::new(re.value(), im.value())
}

/// A link expression prepared for repeated evaluation at one root.
///
/// Cable nodes carry a table of their base knot's values, which turns the cabling
/// sum into `O(i)` work per color.
#[derive(Debug, Clone)]
pub struct PreparedLink {
    ctx: RootContext,
    expr: LinkExpr,
    node: Node,
    floor: f64,
}

#[derive(Debug, Clone)]
enum Node {
    Unknot,
    Fig8,
    Borromean,
    Torus(i64, i64),
    Split(Box<Node>, Box<Node>, usize),
    ConnSum { a: Box<Node>, b: Box<Node>, na: usize, ca: usize, cb: usize },
    Cable { p: i64, q: i64, base: Box<Node>, table: Vec<Complex64> },
}

impl PreparedLink {
    /// Prepares `expr` for colors up to `max_color`.
    pub fn new(ctx: &RootContext, expr: &LinkExpr, max_color: u32) -> Result<Self> {
        expr.validate()?;
        let node = prepare(ctx, expr, i64::from(max_color.max(1)))?;
        Ok(Self { ctx: *ctx, expr: expr.clone(), node, floor: f64::NEG_INFINITY })
    }

    /// Skips multi-precision repair in [`eval_log_abs`](Self::eval_log_abs) for
    /// figure-eight and Borromean values whose Habiro terms have total magnitude
    /// below `exp(log_floor)`. Their `f64` error is then at most a few ulps of
    /// that magnitude, which is harmless when they only feed a sum of squares
    /// dominated by much larger values.
    pub fn with_rescue_floor(mut self, log_floor: f64) -> Self {
        self.floor = log_floor;
        self
    }

    pub fn ctx(&self) -> &RootContext {
        &self.ctx
    }

    pub fn expr(&self) -> &LinkExpr {
        &self.expr
    }

    pub fn components(&self) -> usize {
        self.expr.components()
    }

    fn check(&self, colors: &[u32]) -> Result<()> {
        if colors.len() != self.components() {
            return Err(Error::ColorCount { expected: self.components(), found: colors.len() });
        }
        if let Some(&c) = colors.iter().find(|&&c| c == 0) {
            return Err(Error::NonPositiveColor(i64::from(c)));
        }
        Ok(())
    }

    pub fn eval(&self, colors: &[u32]) -> Result<Complex64> {
        self.check(colors)?;
        let c: Vec<i64> = colors.iter().map(|&x| i64::from(x)).collect();
        eval_node(&self.ctx, &self.node, &c)
    }

    /// `|J|` in log scale.
    pub fn eval_log_abs(&self, colors: &[u32]) -> Result<LogMagnitude> {
        self.check(colors)?;
        let c: Vec<i64> = colors.iter().map(|&x| i64::from(x)).collect();
        match self.node {
            Node::Fig8 => {
                let qi = LogMagnitude::from_f64(quantum_int(&self.ctx, c[0]));
                Ok((qi * fig8_reduced_log(&self.ctx, c[0], self.floor - qi.log_abs())).abs())
            }
            Node::Borromean => Ok(borromean_log(&self.ctx, [c[0], c[1], c[2]], self.floor)?.abs()),
            _ => eval_node_log_abs(&self.ctx, &self.node, &c),
        }
    }
}

fn prepare(ctx: &RootContext, expr: &LinkExpr, max_color: i64) -> Result<Node> {
    Ok(match expr {
        LinkExpr::Unknot => Node::Unknot,
        LinkExpr::FigureEight => Node::Fig8,
        LinkExpr::Borromean => Node::Borromean,
        LinkExpr::Torus { p, q } => Node::Torus(*p, *q),
        LinkExpr::Split(a, b) => Node::Split(
            Box::new(prepare(ctx, a, max_color)?),
            Box::new(prepare(ctx, b, max_color)?),
            a.components(),
        ),
        LinkExpr::ConnectedSum { a, b, ca, cb } => Node::ConnSum {
            a: Box::new(prepare(ctx, a, max_color)?),
            b: Box::new(prepare(ctx, b, max_color)?),
            na: a.components(),
            ca: *ca,
            cb: *cb,
        },
        LinkExpr::Cable { p, q, knot } => {
            let base_max = q.abs() * (max_color - 1) + 1;
            let base = prepare(ctx, knot, base_max)?;
            let mut table = Vec::with_capacity(base_max as usize + 1);
            table.push(Complex64::new(0.0, 0.0));
            for n in 1..=base_max {
                table.push(eval_node(ctx, &base, &[n])?);
            }
            Node::Cable { p: *p, q: *q, base: Box::new(base), table }
        }
    })
}

/// Knot value with the extension to all integer colors.
fn eval_knot(ctx: &RootContext, node: &Node, n: i64) -> Result<Complex64> {
    match n.cmp(&0) {
        std::cmp::Ordering::Equal => Ok(Complex64::new(0.0, 0.0)),
        std::cmp::Ordering::Less => Ok(-eval_node(ctx, node, &[-n])?),
        std::cmp::Ordering::Greater => eval_node(ctx, node, &[n]),
    }
}

fn connsum_colors(c: &[i64], na: usize, ca: usize, cb: usize) -> (Vec<i64>, Vec<i64>, i64) {
    let ca_colors = c[..na].to_vec();
    let shared = ca_colors[ca];
    let mut cb_colors = c[na..].to_vec();
    cb_colors.insert(cb, shared);
    (ca_colors, cb_colors, shared)
}

fn eval_node(ctx: &RootContext, node: &Node, c: &[i64]) -> Result<Complex64> {
    match node {
        Node::Unknot => Ok(jones_unknot(ctx, c[0])),
        Node::Fig8 => Ok(jones_fig8(ctx, c[0])),
        Node::Borromean => jones_borromean(ctx, [c[0], c[1], c[2]]),
        Node::Torus(p, q) => Ok(torus_value(ctx, *p, *q, c[0])),
        Node::Split(a, b, na) => Ok(eval_node(ctx, a, &c[..*na])? * eval_node(ctx, b, &c[*na..])?),
        Node::ConnSum { a, b, na, ca, cb } => {
            let (x, y, shared) = connsum_colors(c, *na, *ca, *cb);
            let qi = quantum_int(ctx, shared);
            if qi == 0.0 {
                return Err(Error::VanishingQuantumInteger(shared));
            }
            Ok(eval_node(ctx, a, &x)? * eval_node(ctx, b, &y)? / qi)
        }
        Node::Cable { p, q, base, table } => {
            let i = c[0];
            let mut re = CompensatedSum::new();
            let mut im = CompensatedSum::new();
            for s in 0..i {
                let kk = 2 * s - (i - 1);
                let n = q * kk + 1;
                let jn = match table.get(n.unsigned_abs() as usize) {
                    Some(v) if n >= 0 => *v,
                    Some(v) => -*v,
                    None => eval_knot(ctx, base, n)?,
                };
                let term = ctx.a_pow(-p * kk * (q * kk + 2)) * jn;
                re.add(term.re);
                im.add(term.im);
            }
            Ok(ctx.a_pow(p * q * (i * i - 1)) * Complex64::new(re.value(), im.value()))
        }
    }
}

fn eval_node_log_abs(ctx: &RootContext, node: &Node, c: &[i64]) -> Result<LogMagnitude> {
    match node {
        Node::Fig8 => Ok(jones_fig8_log(ctx, c[0]).abs()),
        Node::Borromean => Ok(jones_borromean_log(ctx, [c[0], c[1], c[2]])?.abs()),
        Node::Split(a, b, na) => {
            Ok(eval_node_log_abs(ctx, a, &c[..*na])? * eval_node_log_abs(ctx, b, &c[*na..])?)
        }
        Node::ConnSum { a, b, na, ca, cb } => {
            let (x, y, shared) = connsum_colors(c, *na, *ca, *cb);
            let qi = LogMagnitude::from_f64(quantum_int(ctx, shared)).abs();
            let prod = eval_node_log_abs(ctx, a, &x)? * eval_node_log_abs(ctx, b, &y)?;
            prod.checked_div(qi).ok_or(Error::VanishingQuantumInteger(shared))
        }
        _ => Ok(LogMagnitude::from_f64(eval_node(ctx, node, c)?.norm())),
    }
}

/// Colored Jones value of `link` at `colors` (one color `≥ 1` per component).
pub fn jones_eval(ctx: &RootContext, link: &LinkExpr, colors: &[u32]) -> Result<Complex64> {
    let max = colors.iter().copied().max().unwrap_or(1);
    PreparedLink::new(ctx, link, max)?.eval(colors)
}

/// `|J|` in log scale; stays finite where the linear value would overflow.
pub fn jones_eval_log_abs(ctx: &RootContext, link: &LinkExpr, colors: &[u32]) -> Result<LogMagnitude> {
    let max = colors.iter().copied().max().unwrap_or(1);
    PreparedLink::new(ctx, link, max)?.eval_log_abs(colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qarith::quantum_factorial;

    fn so3(r: u32) -> RootContext {
        RootContext::so3(r).unwrap()
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in [
            "unknot",
            "fig8",
            "borromean",
            "torus(2,3)",
            "torus(-2,5)",
            "split(fig8,torus(2,3))",
            "connsum(torus(2,3),torus(2,5))",
            "connsum(borromean,fig8,2,0)",
            "cable(2,3,fig8)",
            "cable(2,3,cable(3,2,torus(2,3)))",
        ] {
            let e = LinkExpr::parse(s).unwrap();
            assert_eq!(e.to_string(), s);
        }
        assert_eq!(LinkExpr::parse(" split( fig8 , unknot ) ").unwrap().to_string(), "split(fig8,unknot)");
    }

    #[test]
    fn parse_errors() {
        for s in ["", "fig9", "torus(2,4)", "torus(2,3", "cable(2,3,borromean)", "fig8 x", "connsum(fig8,fig8,1,0)", "torus(0,1)"] {
            assert!(LinkExpr::parse(s).is_err(), "{s}");
        }
        let deep = "split(".repeat(100) + "unknot" + &",unknot)".repeat(100);
        assert!(LinkExpr::parse(&deep).is_err());
    }

    #[test]
    fn component_counts() {
        let c = |s: &str| LinkExpr::parse(s).unwrap().components();
        assert_eq!(c("borromean"), 3);
        assert_eq!(c("split(borromean,fig8)"), 4);
        assert_eq!(c("connsum(borromean,borromean)"), 5);
        assert_eq!(c("cable(2,3,fig8)"), 1);
    }

    #[test]
    fn unknot_values() {
        let ctx = so3(5);
        assert_eq!(jones_unknot(&ctx, 1).re, 1.0);
        assert!((jones_unknot(&ctx, 2).re - 0.618_033_988_749_894_8).abs() < 1e-12);
        assert_eq!(jones_unknot(&ctx, 0).re, 0.0);
    }

    #[test]
    fn fig8_reduced_matches_expansion() {
        // 1 + (t^{1/2} - t^{-1/2})(t^{3/2} - t^{-3/2}) = t^2 - t + 1 - t^{-1} + t^{-2}
        let ctx = so3(5);
        let t = ctx.t();
        let expect = t * t - t + 1.0 - t.inv() + (t * t).inv();
        assert!(expect.im.abs() < 1e-12);
        assert!((jones_fig8_reduced(&ctx, 2) - expect.re).abs() < 1e-12);
        assert_eq!(jones_fig8(&ctx, 1).re, 1.0);
    }

    #[test]
    fn fig8_log_matches_linear() {
        for r in [31u32, 101] {
            let ctx = so3(r);
            for i in 1..=(r as i64 - 1) / 2 {
                let lin = jones_fig8(&ctx, i).re;
                let log = jones_fig8_log(&ctx, i).to_f64();
                // the alternating sum cancels; measure against its absolute mass
                let mut mass = 1.0;
                let mut prod = 1.0f64;
                for k in 1..i {
                    prod *= fig8_factor(&ctx, i, k);
                    mass += prod.abs();
                }
                mass *= quantum_int(&ctx, i).abs();
                assert!((lin - log).abs() <= 1e-13 * mass.max(lin.abs()), "r={r} i={i} {lin} {log}");
            }
        }
    }

    #[test]
    fn borromean_basic_values() {
        let ctx = so3(7);
        assert!((jones_borromean(&ctx, [1, 1, 1]).unwrap().re - 1.0).abs() < 1e-15);
        // a trivially colored pair leaves an unknot
        let v = jones_borromean(&ctx, [2, 1, 1]).unwrap().re;
        assert!((v - quantum_int(&ctx, 2)).abs() < 1e-12);
    }

    #[test]
    fn borromean_fundamental_color_is_jones_polynomial() {
        // [2]·V(t) with V the Jones polynomial of the Borromean rings
        let v = |t: Complex64| {
            -t.powi(3) + 3.0 * t.powi(2) - 2.0 * t + 4.0 - 2.0 / t + 3.0 / t.powi(2) - 1.0 / t.powi(3)
        };
        for ctx in [so3(7), so3(11), RootContext::su2(9).unwrap(), RootContext::new(13, Flavor::So3, 3).unwrap()] {
            let expect = quantum_int(&ctx, 2) * v(ctx.t());
            let got = jones_borromean(&ctx, [2, 2, 2]).unwrap();
            assert!((got - expect).norm() < 1e-12, "{ctx}: {got} vs {expect}");
            let log = jones_borromean_log(&ctx, [2, 2, 2]).unwrap().to_f64();
            assert!((log - expect.re).abs() < 1e-12);
        }
    }

    #[test]
    fn fig8_survives_cancellation() {
        // 60-digit reference values; the Habiro terms reach 1e20 here
        let ctx = RootContext::su2(151).unwrap();
        for (i, expect) in [(51, 582.123765172), (71, -170.950628891), (81, -313.499914719)] {
            let got = jones_fig8(&ctx, i).re;
            assert!((got - expect).abs() < 1e-8, "i={i}: {got}");
            let log = jones_fig8_log(&ctx, i).to_f64();
            assert!((log - expect).abs() < 1e-8, "i={i}: {log}");
        }
    }

    #[test]
    fn borromean_survives_cancellation() {
        let ctx = so3(51);
        for (c, expect) in [([10, 13, 16], -13.449255803745424), ([10, 16, 16], -4.3945923067297415)] {
            let got = jones_borromean(&ctx, c).unwrap().re;
            assert!((got - expect).abs() < 1e-11, "{c:?}: {got}");
            let log = jones_borromean_log(&ctx, c).unwrap().to_f64();
            assert!((log - expect).abs() < 1e-11, "{c:?}: {log}");
        }
    }

    #[test]
    fn borromean_paths_agree() {
        for r in [9u32, 15] {
            let ctx = so3(r);
            let m = i64::from(ctx.m().unwrap());
            for c in [[1, 2, 3], [m, m, m], [m, 2, m - 1], [3, 3, 2]] {
                let lin = jones_borromean(&ctx, c).unwrap().re;
                let log = jones_borromean_log(&ctx, c).unwrap().to_f64();
                let gen = jones_borromean_generic(&ctx, c).unwrap();
                let scale = lin.abs().max(1.0);
                assert!((lin - log).abs() < 1e-9 * scale, "{c:?}");
                assert!((lin - gen).abs() < 1e-9 * scale, "{c:?}");
            }
        }
    }

    #[test]
    fn qbinom_matches_factorials_away_from_zeros() {
        let ctx = RootContext::su2(11).unwrap();
        for n in 0..10 {
            for k in 0..=n {
                let expect = quantum_factorial(&ctx, n as u32)
                    / (quantum_factorial(&ctx, k as u32) * quantum_factorial(&ctx, (n - k) as u32));
                assert!((qbinom(&ctx, n, k) - expect).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn qbinom_at_root_agrees_with_nearby_generic_point() {
        // evaluate the Gaussian binomial as a polynomial limit
        for (r, flavor) in [(5u32, Flavor::Su2), (5, Flavor::So3), (4, Flavor::Su2)] {
            let ctx = RootContext::principal(r, flavor).unwrap();
            let theta = ctx.theta() + 1e-7;
            let qi = |n: i64| (2.0 * n as f64 * theta).sin() / (2.0 * theta).sin();
            for n in 0..14i64 {
                for k in 0..=n {
                    let mut v = 1.0;
                    for s in 1..=k {
                        v *= qi(n - k + s) / qi(s);
                    }
                    let exact = qbinom(&ctx, n, k);
                    assert!((exact - v).abs() < 1e-4 * v.abs().max(1.0), "r={r} n={n} k={k}: {exact} vs {v}");
                }
            }
        }
    }

    #[test]
    fn torus_trivial_color_and_unknotted_cases() {
        let ctx = RootContext::new(9, Flavor::Su2, 5).unwrap();
        assert!((jones_torus(&ctx, 2, 3, 1).unwrap() - 1.0).norm() < 1e-12);
        for i in 1..8 {
            let u = quantum_int(&ctx, i).abs();
            assert!((jones_torus(&ctx, 2, 1, i).unwrap().norm() - u).abs() < 1e-12);
            assert!((jones_torus(&ctx, 3, 1, i).unwrap().norm() - u).abs() < 1e-12);
        }
        assert!(jones_torus(&ctx, 2, 4, 2).is_err());
    }

    #[test]
    fn trefoil_two_colored() {
        // J_2 = [2]·V(t), V = -t^{-4} + t^{-3} + t^{-1} (up to mirror image and unit)
        let ctx = RootContext::new(13, Flavor::Su2, 3).unwrap();
        let t = ctx.t();
        let v = -t.powi(-4) + t.powi(-3) + t.powi(-1);
        let expect = quantum_int(&ctx, 2) * v.norm();
        assert!((jones_torus(&ctx, 2, 3, 2).unwrap().norm() - expect.abs()).abs() < 1e-12);
    }

    #[test]
    fn combinators() {
        let ctx = so3(11);
        let uu = LinkExpr::split(LinkExpr::Unknot, LinkExpr::Unknot);
        let v = jones_eval(&ctx, &uu, &[2, 3]).unwrap();
        assert!((v.re - quantum_int(&ctx, 2) * quantum_int(&ctx, 3)).abs() < 1e-12);
        let cs = LinkExpr::connsum(LinkExpr::Unknot, LinkExpr::Unknot);
        for i in 1..6 {
            assert!((jones_eval(&ctx, &cs, &[i]).unwrap().re - quantum_int(&ctx, i64::from(i))).abs() < 1e-12);
        }
        assert!(matches!(jones_eval(&ctx, &uu, &[1]), Err(Error::ColorCount { .. })));
        assert!(matches!(jones_eval(&ctx, &LinkExpr::FigureEight, &[0]), Err(Error::NonPositiveColor(0))));
    }

    #[test]
    fn cable_of_unknot_is_torus_knot_in_modulus() {
        let ctx = RootContext::new(13, Flavor::Su2, 1).unwrap();
        for (p, q) in [(2, 3), (3, 2), (2, 1), (3, 1), (2, 5)] {
            let cab = LinkExpr::cable(p, q, LinkExpr::Unknot);
            for i in 1..9 {
                let a = jones_eval(&ctx, &cab, &[i]).unwrap().norm();
                let b = jones_torus(&ctx, p, q, i64::from(i)).unwrap().norm();
                assert!((a - b).abs() < 1e-10, "({p},{q}) i={i}");
            }
        }
    }

    #[test]
    fn connsum_uses_selected_components() {
        let ctx = so3(13);
        let e = LinkExpr::parse("connsum(borromean,fig8,1,0)").unwrap();
        let got = jones_eval(&ctx, &e, &[2, 3, 4]).unwrap();
        let b = jones_borromean(&ctx, [2, 3, 4]).unwrap();
        let f = jones_fig8(&ctx, 3);
        assert!((got - b * f / quantum_int(&ctx, 3)).norm() < 1e-12);
    }

    #[test]
    fn log_abs_matches_linear() {
        let ctx = so3(21);
        for s in ["fig8", "torus(2,5)", "connsum(torus(2,3),fig8)", "cable(2,3,torus(2,3))", "split(borromean,fig8)"] {
            let e = LinkExpr::parse(s).unwrap();
            let prep = PreparedLink::new(&ctx, &e, 10).unwrap();
            let colors = vec![7u32; e.components()];
            let lin = prep.eval(&colors).unwrap().norm();
            let log = prep.eval_log_abs(&colors).unwrap().to_f64();
            assert!((lin - log).abs() <= 1e-9 * lin.max(1e-300), "{s}");
        }
    }
}
