// SPDX-License-Identifier: MIT OR Apache-2.0
#![allow(dead_code)]

use breakscope::{Segmentation, TimeSeriesDataset};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::collections::HashMap;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|j| a[r][j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Determinant by elimination.
pub fn det(mut a: Vec<Vec<f64>>) -> f64 {
    let n = a.len();
    let mut d = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if p != c {
            a.swap(c, p);
            d = -d;
        }
        d *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for j in c..n {
                a[r][j] -= f * a[c][j];
            }
        }
    }
    d
}

pub struct NaiveOls {
    pub beta: Vec<f64>,
    pub ssr: f64,
    pub xtx: Vec<Vec<f64>>,
}

/// OLS on observations `start+1..=end` straight from the raw rows.
pub fn naive_ols(ds: &TimeSeriesDataset, start: usize, end: usize) -> NaiveOls {
    let k = ds.n_regressors();
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for t in start..end {
        let x = ds.row(t);
        for i in 0..k {
            xty[i] += x[i] * ds.y()[t];
            for j in 0..k {
                xtx[i][j] += x[i] * x[j];
            }
        }
    }
    let beta = gauss_solve(xtx.clone(), xty);
    let ssr = (start..end)
        .map(|t| {
            let fit: f64 = ds.row(t).iter().zip(&beta).map(|(a, b)| a * b).sum();
            (ds.y()[t] - fit).powi(2)
        })
        .sum();
    NaiveOls { beta, ssr, xtx }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1.0)
}

/// Plain Monte Carlo estimate of the log marginal likelihood of regime
/// `(a, b]` under the NIG prior `prior`, averaging the likelihood over
/// `draws` prior draws. Returns the estimate and its delta-method standard
/// error on the log scale.
pub fn naive_mc_log_marginal(
    ds: &TimeSeriesDataset,
    a: usize,
    b: usize,
    prior: &breakscope::mdl::CalibratedPrior,
    draws: usize,
    rng: &mut impl Rng,
) -> (f64, f64) {
    use breakscope::linalg::Cholesky;
    use rand_distr::Gamma;
    let s = ds.segment_stats(a, b).unwrap();
    let k = s.k();
    let n = s.n as f64;
    let chol = Cholesky::new(&s.xtx, k).unwrap();
    let gamma = Gamma::new(prior.nu_under / 2.0, 1.0).unwrap();
    let mut logs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let sigma2 = (prior.s_under / 2.0) / gamma.sample(rng);
        let z = normals(rng, k);
        let u = chol.solve_upper(&z);
        let scale = (sigma2 * prior.g_under).sqrt();
        let d: Vec<f64> = u.iter().map(|v| v * scale).collect();
        // residual SS at β = β̂ + d is s + dᵀXᵀXd
        let mut quad = 0.0;
        for i in 0..k {
            for j in 0..k {
                quad += d[i] * s.xtx[i * k + j] * d[j];
            }
        }
        logs.push(-0.5 * n * (2.0 * std::f64::consts::PI * sigma2).ln() - (s.ssr + quad) / (2.0 * sigma2));
    }
    let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
    let mean = w.iter().sum::<f64>() / draws as f64;
    let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
    let se = (var / draws as f64).sqrt() / mean;
    (max + mean.ln(), se)
}

/// Pearson goodness-of-fit p-value of observed state counts against exact
/// probabilities, pooling states with expected count below 5.
pub fn chi_square_p(counts: &HashMap<Vec<usize>, usize>, exact: &[(Vec<usize>, f64)], n: usize) -> f64 {
    let mut sorted: Vec<&(Vec<usize>, f64)> = exact.iter().collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (state, p) in sorted {
        let e = p * n as f64;
        let o = *counts.get(state).unwrap_or(&0) as f64;
        if e >= 5.0 {
            cells.push((o, e));
        } else {
            pool.0 += o;
            pool.1 += e;
        }
    }
    if pool.1 > 0.0 {
        cells.push(pool);
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = (cells.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

/// Mean model with unit-variance noise and level shifts of `shift` at `breaks`.
pub fn weak_break_fixture(seed: u64, t: usize, breaks: &[usize], shift: f64) -> TimeSeriesDataset {
    let mut r = rng(seed);
    let e = normals(&mut r, t);
    let y = (0..t).map(|i| e[i] + shift * breaks.iter().filter(|&&b| i >= b).count() as f64).collect();
    TimeSeriesDataset::mean_model(y).unwrap()
}

/// Mean model of length 20..=40 with up to three level shifts.
pub fn small_fixture(seed: u64) -> (TimeSeriesDataset, usize) {
    let mut r = rng(seed);
    let t = r.random_range(20..=40);
    let m = r.random_range(0..=3);
    let mut cuts: Vec<usize> = (0..m).map(|_| r.random_range(5..t - 5)).collect();
    cuts.sort();
    let e = normals(&mut r, t);
    let mut level = 0.0;
    let y: Vec<f64> = (0..t)
        .map(|i| {
            if cuts.contains(&i) {
                level += r.random_range(-4.0..4.0);
            }
            level + e[i]
        })
        .collect();
    (TimeSeriesDataset::mean_model(y).unwrap(), t)
}

/// Uniformly placed `m` breaks with every regime at least `min_n` long.
pub fn random_segmentation(r: &mut impl Rng, t: usize, m: usize, min_n: usize) -> Option<Segmentation> {
    if (m + 1) * min_n > t {
        return None;
    }
    let slack = t - (m + 1) * min_n;
    let mut cuts: Vec<usize> = (0..m).map(|_| r.random_range(0..=slack)).collect();
    cuts.sort();
    let breaks = cuts.iter().enumerate().map(|(i, c)| c + (i + 1) * min_n).collect();
    Segmentation::new(breaks, t).ok()
}
