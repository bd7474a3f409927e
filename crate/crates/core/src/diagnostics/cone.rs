//! Cone-restricted constants of a Gram matrix.
//!
//! Fixing `‖β_S‖₁ = 1` splits the cone `{‖β_{Sᶜ}‖₁ ≤ 3‖β_S‖₁}` into sign
//! orthants of `β_S`; on each one the feasible set is a simplex times an
//! ℓ₁ ball of radius 3 and `s·βᵀMβ` is convex for PSD `M`. Orthants are
//! seeded by random cone samples and refined by projected gradient, so the
//! reported value upper-bounds the true minimum and matches it when every
//! orthant is refined.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::stream_rng;

/// Off-support to on-support ℓ₁ ratio defining the cone.
pub const CONE_RATIO: f64 = 3.0;

/// A vector inside the cone of a support set.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeSample {
    beta: DVector<f64>,
}

impl ConeSample {
    pub fn new(beta: DVector<f64>, support: &[usize]) -> Result<Self> {
        check_support(beta.len(), support)?;
        if !in_cone(&beta, support) {
            return Err(Error::InvalidInput("vector lies outside the cone".into()));
        }
        Ok(Self { beta })
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }
}

/// `‖β_{Sᶜ}‖₁ ≤ 3‖β_S‖₁` with `β_S ≠ 0`.
pub fn in_cone(beta: &DVector<f64>, support: &[usize]) -> bool {
    let (on, off) = split_l1(beta, support);
    on > 0.0 && off <= CONE_RATIO * on
}

fn split_l1(beta: &DVector<f64>, support: &[usize]) -> (f64, f64) {
    let on: f64 = support.iter().map(|&j| beta[j].abs()).sum();
    (on, beta.iter().map(|b| b.abs()).sum::<f64>() - on)
}

fn check_support(d: usize, support: &[usize]) -> Result<()> {
    if support.is_empty() {
        return Err(Error::InvalidInput("support set is empty".into()));
    }
    let mut seen = vec![false; d];
    for &j in support {
        if j >= d || seen[j] {
            return Err(Error::InvalidInput(format!("support index {j} invalid for dimension {d}")));
        }
        seen[j] = true;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConeOptions {
    /// Random cone points used to seed the orthants.
    pub samples: usize,
    /// Refine every orthant when there are at most this many.
    pub max_exhaustive_orthants: usize,
    /// Orthants refined otherwise, best samples first.
    pub refine_top: usize,
    pub max_iter: usize,
    /// Stop refining once an iteration improves by less than this fraction.
    pub rel_tol: f64,
    pub seed: u64,
}

impl Default for ConeOptions {
    fn default() -> Self {
        Self { samples: 20_000, max_exhaustive_orthants: 64, refine_top: 16, max_iter: 20_000, rel_tol: 1e-13, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ConeEstimate {
    pub value: f64,
    /// Minimizer found, scaled to `‖β_S‖₁ = 1`.
    pub beta: Vec<f64>,
    pub samples: usize,
    pub orthants_refined: usize,
    /// True when every orthant was refined.
    pub exhaustive: bool,
}

/// Orthant-restricted point: `β_S = signs ⊙ u` with `u` on the simplex and
/// `β_{Sᶜ} = v` in the radius-3 ℓ₁ ball.
#[derive(Clone)]
struct Point {
    u: Vec<f64>,
    v: Vec<f64>,
}

struct Layout<'a> {
    d: usize,
    support: &'a [usize],
    rest: Vec<usize>,
}

impl<'a> Layout<'a> {
    fn new(d: usize, support: &'a [usize]) -> Self {
        let rest = (0..d).filter(|j| !support.contains(j)).collect();
        Self { d, support, rest }
    }

    fn assemble(&self, signs: &[f64], p: &Point) -> DVector<f64> {
        let mut beta = DVector::zeros(self.d);
        for (k, &j) in self.support.iter().enumerate() {
            beta[j] = signs[k] * p.u[k];
        }
        for (k, &j) in self.rest.iter().enumerate() {
            beta[j] = p.v[k];
        }
        beta
    }

    fn orthants(&self) -> usize {
        1usize.checked_shl(self.support.len() as u32 - 1).unwrap_or(usize::MAX)
    }
}

fn signs_of(orthant: usize, s: usize) -> Vec<f64> {
    // The first sign is fixed: β and −β give the same value.
    (0..s).map(|k| if k > 0 && (orthant >> (k - 1)) & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

fn dirichlet(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut e: Vec<f64> = (0..n).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = e.iter().sum();
    e.iter_mut().for_each(|x| *x /= total);
    e
}

/// Euclidean projection onto the probability simplex.
pub(crate) fn project_simplex(x: &mut [f64]) {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let (mut cum, mut theta) = (0.0, 0.0);
    for (k, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (k + 1) as f64;
        if v - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

/// Euclidean projection onto the ℓ₁ ball of the given radius.
pub(crate) fn project_l1_ball(x: &mut [f64], radius: f64) {
    let norm: f64 = x.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return;
    }
    let mut mag: Vec<f64> = x.iter().map(|v| v.abs() / radius).collect();
    project_simplex(&mut mag);
    for (v, m) in x.iter_mut().zip(mag) {
        *v = v.signum() * m * radius;
    }
}

trait ConeObjective {
    fn value(&self, beta: &DVector<f64>) -> f64;
    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64>;
}

/// `s·βᵀMβ` (the compatibility ratio once `‖β_S‖₁ = 1`).
struct Compat<'a> {
    m: &'a DMatrix<f64>,
    s: f64,
}

impl ConeObjective for Compat<'_> {
    fn value(&self, beta: &DVector<f64>) -> f64 {
        self.s * beta.dot(&(self.m * beta))
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        (self.m * beta) * (2.0 * self.s)
    }
}

/// `βᵀMβ / ‖β‖₂²`.
struct Rayleigh<'a> {
    m: &'a DMatrix<f64>,
}

impl ConeObjective for Rayleigh<'_> {
    fn value(&self, beta: &DVector<f64>) -> f64 {
        beta.dot(&(self.m * beta)) / beta.norm_squared()
    }

    fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let n2 = beta.norm_squared();
        let mb = self.m * beta;
        (mb - beta * (beta.dot(&(self.m * beta)) / n2)) * (2.0 / n2)
    }
}

/// `φ²(M, S) = min { s·βᵀMβ / ‖β_S‖₁² : β in the cone }`.
pub fn compatibility_constant(m: &DMatrix<f64>, support: &[usize], opts: &ConeOptions) -> Result<ConeEstimate> {
    check_square(m)?;
    check_support(m.nrows(), support)?;
    let gersh = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let lipschitz = 2.0 * support.len() as f64 * gersh;
    let objective = Compat { m, s: support.len() as f64 };
    minimize(&objective, m.nrows(), support, opts, Step::Fixed(lipschitz))
}

/// Restricted eigenvalue `min { βᵀMβ / ‖β‖₂² : β in the cone }`.
pub fn restricted_eigenvalue(m: &DMatrix<f64>, support: &[usize], opts: &ConeOptions) -> Result<ConeEstimate> {
    check_square(m)?;
    check_support(m.nrows(), support)?;
    minimize(&Rayleigh { m }, m.nrows(), support, opts, Step::Backtracking)
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if let Some(k) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { coordinate: k / m.nrows() });
    }
    Ok(())
}

enum Step {
    /// Constant step `1/L`.
    Fixed(f64),
    Backtracking,
}

fn minimize(
    obj: &dyn ConeObjective,
    d: usize,
    support: &[usize],
    opts: &ConeOptions,
    step: Step,
) -> Result<ConeEstimate> {
    let layout = Layout::new(d, support);
    let s = support.len();
    let orthants = layout.orthants();
    let exhaustive = orthants <= opts.max_exhaustive_orthants;
    let mut rng = stream_rng(opts.seed, 0);

    // Best sample per orthant seen so far.
    let mut seeds: std::collections::HashMap<usize, (f64, Point)> = Default::default();
    for _ in 0..opts.samples {
        let orthant = if s > 1 { rng.random_range(0..orthants) } else { 0 };
        let u = dirichlet(&mut rng, s);
        let v = if layout.rest.is_empty() || rng.random::<f64>() < 0.25 {
            vec![0.0; layout.rest.len()]
        } else {
            let radius = CONE_RATIO * rng.random::<f64>();
            dirichlet(&mut rng, layout.rest.len())
                .into_iter()
                .map(|w| if rng.random::<bool>() { w * radius } else { -w * radius })
                .collect()
        };
        let p = Point { u, v };
        let val = obj.value(&layout.assemble(&signs_of(orthant, s), &p));
        match seeds.get(&orthant) {
            Some((best, _)) if *best <= val => {}
            _ => {
                seeds.insert(orthant, (val, p));
            }
        }
    }

    let centre = Point { u: vec![1.0 / s as f64; s], v: vec![0.0; layout.rest.len()] };
    let mut starts: Vec<(usize, f64, Point)> = if exhaustive {
        (0..orthants)
            .map(|o| match seeds.remove(&o) {
                Some((val, p)) => (o, val, p),
                None => (o, obj.value(&layout.assemble(&signs_of(o, s), &centre)), centre.clone()),
            })
            .collect()
    } else {
        let mut v: Vec<_> = seeds.into_iter().map(|(o, (val, p))| (o, val, p)).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v.truncate(opts.refine_top.max(1));
        if v.is_empty() {
            v.push((0, obj.value(&layout.assemble(&signs_of(0, s), &centre)), centre.clone()));
        }
        v
    };
    starts.sort_by_key(|x| x.0);

    let mut best = (f64::INFINITY, DVector::zeros(d));
    let refined = starts.len();
    for (orthant, val, start) in starts {
        let signs = signs_of(orthant, s);
        let (v, beta) = refine(obj, &layout, &signs, start, val, opts, &step);
        if v < best.0 {
            best = (v, beta);
        }
    }
    Ok(ConeEstimate {
        value: best.0,
        beta: best.1.iter().copied().collect(),
        samples: opts.samples,
        orthants_refined: refined,
        exhaustive,
    })
}

fn refine(
    obj: &dyn ConeObjective,
    layout: &Layout,
    signs: &[f64],
    mut p: Point,
    mut val: f64,
    opts: &ConeOptions,
    step: &Step,
) -> (f64, DVector<f64>) {
    let mut beta = layout.assemble(signs, &p);
    let mut trial_step = 1.0;
    for _ in 0..opts.max_iter {
        let g = obj.gradient(&beta);
        let propose = |h: f64| {
            let mut q = p.clone();
            for (k, &j) in layout.support.iter().enumerate() {
                q.u[k] -= h * signs[k] * g[j];
            }
            for (k, &j) in layout.rest.iter().enumerate() {
                q.v[k] -= h * g[j];
            }
            project_simplex(&mut q.u);
            project_l1_ball(&mut q.v, CONE_RATIO);
            q
        };
        let (next, next_val) = match step {
            Step::Fixed(l) if *l > 0.0 => {
                let q = propose(1.0 / l);
                let v = obj.value(&layout.assemble(signs, &q));
                (q, v)
            }
            Step::Fixed(_) => return (val, beta),
            Step::Backtracking => {
                let mut h = trial_step * 2.0;
                loop {
                    let q = propose(h);
                    let v = obj.value(&layout.assemble(signs, &q));
                    if v <= val || h < 1e-16 {
                        trial_step = h;
                        break (q, v);
                    }
                    h *= 0.5;
                }
            }
        };
        if !(next_val < val) {
            break;
        }
        let gain = val - next_val;
        p = next;
        val = next_val;
        beta = layout.assemble(signs, &p);
        if gain <= opts.rel_tol * val.abs() {
            break;
        }
    }
    (val, beta)
}
