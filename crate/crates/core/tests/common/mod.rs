//! Naive dense reference implementations and random instance builders.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spikegram::{FilterSet, LcaConfig};

/// Materialized dictionary, one column per atom, column index `i·M + j`.
pub struct DenseDict {
    pub rows: usize,
    pub cols: usize,
    /// column-major
    pub data: Vec<f64>,
}

impl DenseDict {
    pub fn build(filters: &FilterSet, stride: usize, len: usize) -> Self {
        let (k, fl) = (filters.num_channels(), filters.filter_len());
        let shifts = (len - fl) / stride + 1;
        let cols = k * shifts;
        let mut data = vec![0.0; len * cols];
        for i in 0..k {
            for j in 0..shifts {
                let col = i * shifts + j;
                for n in 0..fl {
                    data[col * len + j * stride + n] = filters.filter(i)[n];
                }
            }
        }
        Self { rows: len, cols, data }
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.rows + row]
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                y[r] += self.at(r, c) * x[c];
            }
        }
        y
    }

    pub fn apply_t(&self, y: &[f64]) -> Vec<f64> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.at(r, c) * y[r]).sum())
            .collect()
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        (0..self.cols)
            .map(|a| {
                (0..self.cols)
                    .map(|b| (0..self.rows).map(|r| self.at(r, a) * self.at(r, b)).sum())
                    .collect()
            })
            .collect()
    }

    /// `(DᵀD − I) a`
    pub fn inhibit(&self, a: &[f64]) -> Vec<f64> {
        let g = self.gram();
        (0..self.cols)
            .map(|m| {
                (0..self.cols)
                    .map(|n| (g[m][n] - if m == n { 1.0 } else { 0.0 }) * a[n])
                    .sum()
            })
            .collect()
    }

    /// Euler iteration from rest; returns `(u, a)` after `iters` steps.
    pub fn lca(&self, signal: &[f64], config: &LcaConfig, iters: usize) -> (Vec<f64>, Vec<f64>) {
        let p = self.apply_t(signal);
        let alpha = config.dt / config.tau;
        let mut u = vec![0.0; self.cols];
        let mut a = vec![0.0; self.cols];
        for _ in 0..iters {
            let inh = self.inhibit(&a);
            for m in 0..self.cols {
                u[m] = alpha * (p[m] - inh[m]) + (1.0 - alpha) * u[m];
            }
            for m in 0..self.cols {
                a[m] = if u[m].abs() < config.threshold { 0.0 } else { u[m] };
            }
        }
        (u, a)
    }
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| gaussian(rng)).collect()
}

pub fn random_filters(rng: &mut ChaCha8Rng, k: usize, fl: usize) -> FilterSet {
    FilterSet::from_rows((0..k).map(|_| random_vec(rng, fl)).collect()).unwrap()
}

/// `(k, F_l, r, T)` with `T − F_l` a multiple of `r` and at most 200 atoms.
pub fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize, usize) {
    loop {
        let k = rng.gen_range(1..=4);
        let fl = rng.gen_range(4..=64);
        let r = rng.gen_range(1..=8);
        let extra = rng.gen_range(0..=(256 - fl) / r);
        let t = fl + extra * r;
        if k * (extra + 1) <= 200 {
            return (k, fl, r, t);
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn rel_l2(analytic: &[f64], reference: &[f64]) -> f64 {
    let num: f64 = analytic.iter().zip(reference).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = reference.iter().map(|b| b * b).sum();
    (num / den.max(1e-300)).sqrt()
}
