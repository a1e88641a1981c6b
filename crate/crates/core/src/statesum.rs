//! Turaev-Viro state sums over admissible colorings.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{pairwise_sum, CompensatedSum};
use crate::precise;
use crate::qarith::{eta, eta_prime, Flavor, LogMagnitude, RootContext};
use crate::skein::{admissible, Coefficients, Normalization};
use crate::triangulate::{Triangulation, TET_FACES};

/// Color set for the edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Palette {
    /// `I_r = {0, 1, ..., r-2}`.
    Full,
    /// `I'_r = {0, 2, ..., r-3}`.
    Even,
}

impl Palette {
    pub fn colors(self, r: u32) -> Vec<u32> {
        match self {
            Palette::Full => (0..=r - 2).collect(),
            Palette::Even => (0..=r - 2).step_by(2).collect(),
        }
    }
}

/// Which pair of theta / 6j normalizations the state sum uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// Theta values divide the weight.
    Def27,
    /// Theta values multiply the weight, 6j-symbols are the bare z-sums.
    #[serde(rename = "appendix")]
    AppendixA1,
}

impl Form {
    pub fn normalization(self) -> Normalization {
        match self {
            Form::Def27 => Normalization::Section2,
            Form::AppendixA1 => Normalization::Appendix,
        }
    }
}

impl std::str::FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "def27" => Ok(Form::Def27),
            "appendix" | "appendixA1" => Ok(Form::AppendixA1),
            other => Err(Error::Validation(format!("unknown state-sum form {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Coloring {
    pub colors: Vec<u32>,
    pub palette: Palette,
}

impl Coloring {
    pub fn is_admissible(&self, tri: &Triangulation, r: u32) -> bool {
        let c = &self.colors;
        let in_palette = |x: u32| x <= r - 2 && (self.palette == Palette::Full || x % 2 == 0);
        c.len() == tri.num_edges()
            && c.iter().all(|&x| in_palette(x))
            && tri.face_edge_incidence().iter().all(|f| admissible(r, c[f[0]], c[f[1]], c[f[2]]))
            && tri.tetrahedra().iter().all(|t| {
                TET_FACES.iter().all(|p| admissible(r, c[t[p[0]]], c[t[p[1]]], c[t[p[2]]]))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSumResult {
    pub value: f64,
    /// Admissible colorings.
    pub admissible: u64,
    /// Partial colorings visited by the search, pruned ones included.
    pub visited: u64,
    pub seconds: f64,
}

/// Search order and the checks that become decidable at each depth.
#[derive(Debug, Clone)]
struct Plan {
    order: Vec<usize>,
    faces_at: Vec<Vec<[usize; 3]>>,
    tets_at: Vec<Vec<[usize; 6]>>,
}

impl Plan {
    fn new(tri: &Triangulation) -> Self {
        let valence = tri.valence();
        let mut order: Vec<usize> = (0..tri.num_edges()).collect();
        order.sort_by_key(|&e| (std::cmp::Reverse(valence[e]), e));
        let mut rank = vec![0; tri.num_edges()];
        for (d, &e) in order.iter().enumerate() {
            rank[e] = d;
        }
        let n = order.len();
        let mut faces_at = vec![Vec::new(); n];
        for f in tri.face_edge_incidence() {
            faces_at[f.iter().map(|&e| rank[e]).max().unwrap()].push(*f);
        }
        let mut tets_at = vec![Vec::new(); n];
        for t in tri.tetrahedra() {
            tets_at[t.iter().map(|&e| rank[e]).max().unwrap()].push(*t);
        }
        Self { order, faces_at, tets_at }
    }

    fn ok_at(&self, depth: usize, r: u32, c: &[u32]) -> bool {
        self.faces_at[depth].iter().all(|f| admissible(r, c[f[0]], c[f[1]], c[f[2]]))
            && self.tets_at[depth].iter().all(|t| {
                TET_FACES.iter().all(|p| admissible(r, c[t[p[0]]], c[t[p[1]]], c[t[p[2]]]))
            })
    }
}

/// Depth-first enumeration of admissible colorings with pruning.
#[derive(Debug, Clone)]
pub struct AdmissibleColorings {
    plan: Plan,
    r: u32,
    palette: Palette,
    choices: Vec<u32>,
    first: Option<u32>,
    colors: Vec<u32>,
    cursor: Vec<usize>,
    depth: usize,
    done: bool,
    visited: u64,
}

impl AdmissibleColorings {
    fn new(tri: &Triangulation, r: u32, palette: Palette, first: Option<u32>) -> Self {
        let plan = Plan::new(tri);
        let n = plan.order.len();
        Self {
            plan,
            r,
            palette,
            choices: palette.colors(r),
            first,
            colors: vec![0; n],
            cursor: vec![0; n],
            depth: 0,
            done: n == 0,
            visited: 0,
        }
    }

    /// Partial colorings tried so far.
    pub fn visited(&self) -> u64 {
        self.visited
    }

    fn choice(&self, depth: usize, idx: usize) -> Option<u32> {
        match (depth, self.first) {
            (0, Some(c)) => (idx == 0).then_some(c),
            _ => self.choices.get(idx).copied(),
        }
    }
}

impl Iterator for AdmissibleColorings {
    type Item = Coloring;

    fn next(&mut self) -> Option<Coloring> {
        let n = self.colors.len();
        loop {
            if self.done {
                return None;
            }
            let d = self.depth;
            let Some(c) = self.choice(d, self.cursor[d]) else {
                self.cursor[d] = 0;
                if d == 0 {
                    self.done = true;
                    return None;
                }
                self.depth -= 1;
                continue;
            };
            self.cursor[d] += 1;
            self.visited += 1;
            self.colors[self.plan.order[d]] = c;
            if !self.plan.ok_at(d, self.r, &self.colors) {
                continue;
            }
            if d + 1 == n {
                return Some(Coloring { colors: self.colors.clone(), palette: self.palette });
            }
            self.depth = d + 1;
        }
    }
}

/// All admissible colorings of `tri` at the level of `ctx`.
pub fn enumerate_admissible(tri: &Triangulation, ctx: &RootContext, palette: Palette) -> AdmissibleColorings {
    AdmissibleColorings::new(tri, ctx.r(), palette, None)
}

/// Weight of one admissible coloring (without the vertex normalization).
pub fn coloring_weight(tri: &Triangulation, coeffs: &Coefficients, c: &[u32]) -> Result<f64> {
    let mut w = 1.0;
    for &x in c {
        w *= coeffs.edge(x);
    }
    for f in tri.face_edge_incidence() {
        let th = coeffs.theta([c[f[0]], c[f[1]], c[f[2]]]);
        match coeffs.normalization() {
            Normalization::Appendix => w *= th,
            Normalization::Section2 => {
                if th == 0.0 {
                    return Err(Error::Internal(format!("zero theta on face {f:?} for colors {c:?}")));
                }
                w /= th;
            }
        }
    }
    for t in tri.tetrahedra() {
        w *= coeffs.sixj(t.map(|e| c[e]));
    }
    Ok(w)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateSumOptions {
    /// Worker threads; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

/// Runs `f` on a pool with `threads` workers, or on the current pool.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn state_sum(
    tri: &Triangulation,
    ctx: &RootContext,
    palette: Palette,
    form: Form,
    normalizer: f64,
    opts: StateSumOptions,
) -> Result<StateSumResult> {
    let start = Instant::now();
    let coeffs = Coefficients::new(ctx, form.normalization());
    let firsts = palette.colors(ctx.r());
    let partials: Vec<Result<(f64, f64, u64, u64)>> = with_threads(opts.threads, || {
        firsts
            .par_iter()
            .map(|&c0| {
                let mut it = AdmissibleColorings::new(tri, ctx.r(), palette, Some(c0));
                let mut sum = CompensatedSum::new();
                let mut mass = 0.0;
                let mut count = 0;
                for col in it.by_ref() {
                    let w = coloring_weight(tri, &coeffs, &col.colors)?;
                    sum.add(w);
                    mass += w.abs();
                    count += 1;
                }
                Ok((sum.value(), mass, count, it.visited()))
            })
            .collect()
    });
    let partials: Vec<(f64, f64, u64, u64)> = partials.into_iter().collect::<Result<_>>()?;
    let sums: Vec<f64> = partials.iter().map(|p| p.0).collect();
    let mut total = pairwise_sum(&sums);
    let mass = LogMagnitude::from_f64(partials.iter().map(|p| p.1).sum());
    if precise::needs_rescue(LogMagnitude::from_f64(total), mass) {
        let colorings: Vec<Vec<u32>> = enumerate_admissible(tri, ctx, palette).map(|c| c.colors).collect();
        total = with_threads(opts.threads, || {
            precise::state_sum(tri, ctx, form.normalization(), &colorings, mass).to_f64()
        });
    }
    Ok(StateSumResult {
        value: normalizer * total,
        admissible: partials.iter().map(|p| p.2).sum(),
        visited: partials.iter().map(|p| p.3).sum(),
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `TV_r` over the full palette, at whatever root `ctx` carries.
pub fn tv(tri: &Triangulation, ctx: &RootContext, form: Form) -> Result<StateSumResult> {
    tv_with(tri, ctx, form, StateSumOptions::default())
}

pub fn tv_with(tri: &Triangulation, ctx: &RootContext, form: Form, opts: StateSumOptions) -> Result<StateSumResult> {
    let norm = eta(ctx).powi(2 * tri.num_vertices() as i32);
    state_sum(tri, ctx, Palette::Full, form, norm, opts)
}

/// `TV'_r` over even colors; needs an SO3 root.
pub fn tv_prime(tri: &Triangulation, ctx: &RootContext, form: Form) -> Result<StateSumResult> {
    tv_prime_with(tri, ctx, form, StateSumOptions::default())
}

pub fn tv_prime_with(
    tri: &Triangulation,
    ctx: &RootContext,
    form: Form,
    opts: StateSumOptions,
) -> Result<StateSumResult> {
    ctx.require(Flavor::So3)?;
    let norm = eta_prime(ctx)?.powi(2 * tri.num_vertices() as i32);
    state_sum(tri, ctx, Palette::Even, form, norm, opts)
}
