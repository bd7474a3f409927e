//! Reference Lasso-GLM minimizer for tiny problems, written against plain
//! `Vec<f64>` so that it shares no numerics with the library.
//!
//! Every support/sign pattern `s ∈ {−1, 0, +1}^d` is tried. On a fixed pattern
//! the penalty is linear, so the restricted objective is smooth and convex and
//! is minimized by damped Newton. The global minimizer is the restricted
//! minimizer of its own pattern, so the best sign-consistent candidate wins.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Link {
    Linear,
    Logistic,
}

#[derive(Clone, Debug)]
pub struct Problem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub lambda: f64,
    pub link: Link,
}

fn cumulant(link: Link, z: f64) -> f64 {
    match link {
        Link::Linear => 0.5 * z * z,
        Link::Logistic => {
            if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            }
        }
    }
}

fn mean_fn(link: Link, z: f64) -> f64 {
    match link {
        Link::Linear => z,
        Link::Logistic => 1.0 / (1.0 + (-z).exp()),
    }
}

fn slope(link: Link, z: f64) -> f64 {
    match link {
        Link::Linear => 1.0,
        Link::Logistic => {
            let p = mean_fn(link, z);
            p * (1.0 - p)
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl Problem {
    pub fn random(seed: u64, n: usize, d: usize, lambda: f64, link: Link) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|j| if j % 2 == 0 { rng.random_range(-1.5..1.5) } else { 0.0 }).collect();
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|_| rng.random_range(-1.7..1.7)).collect();
            let z = dot(&row, &truth);
            y.push(match link {
                Link::Linear => z + rng.random_range(-1.0..1.0),
                Link::Logistic => f64::from(rng.random::<f64>() < mean_fn(link, z)),
            });
            x.push(row);
        }
        Self { x, y, lambda, link }
    }

    pub fn d(&self) -> usize {
        self.x[0].len()
    }

    pub fn objective(&self, beta: &[f64]) -> f64 {
        let n = self.x.len() as f64;
        let loss: f64 = self.x.iter().zip(&self.y).map(|(r, &y)| {
            let z = dot(r, beta);
            cumulant(self.link, z) - y * z
        }).sum::<f64>() / n;
        loss + self.lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    }

    pub fn gradient(&self, beta: &[f64]) -> Vec<f64> {
        let n = self.x.len() as f64;
        let mut g = vec![0.0; self.d()];
        for (r, &y) in self.x.iter().zip(&self.y) {
            let res = mean_fn(self.link, dot(r, beta)) - y;
            for (gj, xj) in g.iter_mut().zip(r) {
                *gj += res * xj / n;
            }
        }
        g
    }

    /// Largest violation of the subgradient optimality conditions.
    pub fn kkt(&self, beta: &[f64]) -> f64 {
        self.gradient(beta).iter().zip(beta).map(|(&g, &b)| {
            if b == 0.0 { (g.abs() - self.lambda).max(0.0) } else { (g + self.lambda * b.signum()).abs() }
        }).fold(0.0, f64::max)
    }

    /// Global minimum of the penalized objective and a minimizer.
    pub fn solve(&self) -> (f64, Vec<f64>) {
        let d = self.d();
        let mut best = (self.objective(&vec![0.0; d]), vec![0.0; d]);
        for code in 0..3usize.pow(d as u32) {
            let signs: Vec<i32> = (0..d).map(|j| (code / 3usize.pow(j as u32) % 3) as i32 - 1).collect();
            let active: Vec<usize> = (0..d).filter(|&j| signs[j] != 0).collect();
            if active.is_empty() {
                continue;
            }
            let Some(beta) = self.restricted_newton(&active, &signs) else { continue };
            if active.iter().any(|&j| beta[j] * f64::from(signs[j]) < 0.0) {
                continue;
            }
            let value = self.objective(&beta);
            if value < best.0 {
                best = (value, beta);
            }
        }
        best
    }

    fn restricted_value(&self, beta: &[f64], active: &[usize], signs: &[i32]) -> f64 {
        let n = self.x.len() as f64;
        let smooth: f64 = self.x.iter().zip(&self.y).map(|(r, &y)| {
            let z = dot(r, beta);
            cumulant(self.link, z) - y * z
        }).sum::<f64>() / n;
        smooth + self.lambda * active.iter().map(|&j| f64::from(signs[j]) * beta[j]).sum::<f64>()
    }

    fn restricted_newton(&self, active: &[usize], signs: &[i32]) -> Option<Vec<f64>> {
        let d = self.d();
        let k = active.len();
        let n = self.x.len() as f64;
        let mut beta = vec![0.0; d];
        for _ in 0..200 {
            let mut g = vec![0.0; k];
            let mut h = vec![vec![0.0; k]; k];
            for (r, &y) in self.x.iter().zip(&self.y) {
                let z = dot(r, &beta);
                let res = mean_fn(self.link, z) - y;
                let w = slope(self.link, z);
                for (a, &ja) in active.iter().enumerate() {
                    g[a] += res * r[ja] / n;
                    for (b, &jb) in active.iter().enumerate() {
                        h[a][b] += w * r[ja] * r[jb] / n;
                    }
                }
            }
            for (a, &ja) in active.iter().enumerate() {
                g[a] += self.lambda * f64::from(signs[ja]);
            }
            if g.iter().all(|v| v.abs() < 1e-14) {
                return Some(beta);
            }
            let step = solve_linear(h, g.clone())?;
            let decrement = dot(&g, &step);
            if decrement < 1e-28 {
                return Some(beta);
            }
            let f0 = self.restricted_value(&beta, active, signs);
            let mut t = 1.0;
            loop {
                let mut trial = beta.clone();
                for (a, &ja) in active.iter().enumerate() {
                    trial[ja] -= t * step[a];
                }
                if self.restricted_value(&trial, active, signs) <= f0 - 0.25 * t * decrement || t < 1e-12 {
                    beta = trial;
                    break;
                }
                t *= 0.5;
            }
            if beta.iter().any(|b| b.abs() > 1e6) {
                return None;
            }
        }
        Some(beta)
    }
}

/// Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let (top, bottom) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (offset, row) in bottom.iter_mut().enumerate() {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
            b[col + 1 + offset] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for row in (0..k).rev() {
        let tail: f64 = (row + 1..k).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Some(x)
}
