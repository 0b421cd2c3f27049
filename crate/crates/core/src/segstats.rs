// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data model and per-segment least-squares statistics.
//!
//! A [`TimeSeriesDataset`] keeps compensated prefix sums of `x xᵀ`, `x y`,
//! `y²` and `y`, so the OLS fit of any contiguous segment `(start, end]`
//! costs O(K²) for the sums plus one K×K Cholesky solve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, Cholesky};

/// Dependent series, design matrix (intercept first) and prefix caches.
///
/// Immutable once built; every query takes `&self`.
#[derive(Clone, Debug)]
pub struct TimeSeriesDataset {
    y: Vec<f64>,
    x: Vec<f64>,
    t: usize,
    k: usize,
    prefix_xtx: Vec<f64>,
    prefix_xty: Vec<f64>,
    prefix_yty: Vec<f64>,
    prefix_y: Vec<f64>,
    ar_order: Option<usize>,
    offset: usize,
}

/// Running sum with Neumaier compensation.
#[derive(Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

impl TimeSeriesDataset {
    /// Builds a dataset from `y` and design rows. Every row must start with
    /// the intercept `1.0`.
    pub fn new(y: Vec<f64>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let t = y.len();
        if t == 0 {
            return Err(Error::TooShort("dataset needs at least one observation".into()));
        }
        if rows.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "y has {t} observations but X has {} rows",
                rows.len()
            )));
        }
        let k = rows[0].len();
        if k == 0 {
            return Err(Error::DimensionMismatch("X has no columns".into()));
        }
        let mut x = Vec::with_capacity(t * k);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {k}",
                    row.len()
                )));
            }
            x.extend_from_slice(row);
        }
        Self::from_flat(y, x, k)
    }

    /// Same as [`new`](Self::new) with a row-major flat design of width `k`.
    pub fn from_flat(y: Vec<f64>, x: Vec<f64>, k: usize) -> Result<Self> {
        let t = y.len();
        if t == 0 {
            return Err(Error::TooShort("dataset needs at least one observation".into()));
        }
        if k == 0 || x.len() != t * k {
            return Err(Error::DimensionMismatch(format!(
                "design has {} entries, expected {t}x{k}",
                x.len()
            )));
        }
        for (i, v) in y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: 0 });
            }
        }
        for (idx, v) in x.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: idx / k, col: idx % k + 1 });
            }
        }
        for i in 0..t {
            if x[i * k] != 1.0 {
                return Err(Error::MissingIntercept(i));
            }
        }

        let kk = k * k;
        let mut prefix_xtx = vec![0.0; (t + 1) * kk];
        let mut prefix_xty = vec![0.0; (t + 1) * k];
        let mut prefix_yty = vec![0.0; t + 1];
        let mut prefix_y = vec![0.0; t + 1];
        let mut acc_xtx = vec![Compensated::default(); kk];
        let mut acc_xty = vec![Compensated::default(); k];
        let mut acc_yty = Compensated::default();
        let mut acc_y = Compensated::default();
        for i in 0..t {
            let row = &x[i * k..(i + 1) * k];
            let yi = y[i];
            for a in 0..k {
                for b in a..k {
                    acc_xtx[a * k + b].add(row[a] * row[b]);
                }
                acc_xty[a].add(row[a] * yi);
            }
            acc_yty.add(yi * yi);
            acc_y.add(yi);
            let base = (i + 1) * kk;
            for a in 0..k {
                for b in a..k {
                    let v = acc_xtx[a * k + b].value();
                    prefix_xtx[base + a * k + b] = v;
                    prefix_xtx[base + b * k + a] = v;
                }
                prefix_xty[(i + 1) * k + a] = acc_xty[a].value();
            }
            prefix_yty[i + 1] = acc_yty.value();
            prefix_y[i + 1] = acc_y.value();
        }

        Ok(Self {
            y,
            x,
            t,
            k,
            prefix_xtx,
            prefix_xty,
            prefix_yty,
            prefix_y,
            ar_order: None,
            offset: 0,
        })
    }

    /// AR(p) design `[1, y_{t-1}, …, y_{t-p}]` conditioned on the first `p`
    /// values of `raw`.
    pub fn autoregressive(raw: &[f64], p: usize) -> Result<Self> {
        Self::autoregressive_with_presample(raw, p, p)
    }

    /// AR(p) design that drops `presample ≥ p` leading values, so models of
    /// different order can be scored on the same effective sample.
    pub fn autoregressive_with_presample(raw: &[f64], p: usize, presample: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("AR order must be at least 1".into()));
        }
        if presample < p {
            return Err(Error::InvalidArgument(format!(
                "presample {presample} smaller than AR order {p}"
            )));
        }
        if raw.len() <= presample {
            return Err(Error::TooShort(format!(
                "series of length {} needs more than {presample} values for AR({p})",
                raw.len()
            )));
        }
        let t = raw.len() - presample;
        let k = p + 1;
        let mut x = Vec::with_capacity(t * k);
        for i in presample..raw.len() {
            x.push(1.0);
            for lag in 1..=p {
                x.push(raw[i - lag]);
            }
        }
        let mut ds = Self::from_flat(raw[presample..].to_vec(), x, k)?;
        ds.ar_order = Some(p);
        ds.offset = presample;
        Ok(ds)
    }

    /// Intercept-only design.
    pub fn mean_model(y: Vec<f64>) -> Result<Self> {
        let x = vec![1.0; y.len()];
        Self::from_flat(y, x, 1)
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// Number of regressors including the intercept.
    pub fn n_regressors(&self) -> usize {
        self.k
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.k..(i + 1) * self.k]
    }

    pub fn ar_order(&self) -> Option<usize> {
        self.ar_order
    }

    /// Presample observations consumed before the first dependent value.
    /// Adding it to an internal break date gives the date in the raw series.
    pub fn time_offset(&self) -> usize {
        self.offset
    }

    pub fn prefix_yty(&self) -> &[f64] {
        &self.prefix_yty
    }

    pub fn prefix_xtx_at(&self, t: usize) -> &[f64] {
        let kk = self.k * self.k;
        &self.prefix_xtx[t * kk..(t + 1) * kk]
    }

    pub fn prefix_xty_at(&self, t: usize) -> &[f64] {
        &self.prefix_xty[t * self.k..(t + 1) * self.k]
    }

    /// Σ y over `(start, end]`.
    pub fn sum_y(&self, start: usize, end: usize) -> f64 {
        self.prefix_y[end] - self.prefix_y[start]
    }

    /// Sufficient statistics of `(start, end]` without solving.
    pub fn moments(&self, start: usize, end: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let kk = self.k * self.k;
        let xtx: Vec<f64> = (0..kk)
            .map(|i| self.prefix_xtx[end * kk + i] - self.prefix_xtx[start * kk + i])
            .collect();
        let xty: Vec<f64> = (0..self.k)
            .map(|i| self.prefix_xty[end * self.k + i] - self.prefix_xty[start * self.k + i])
            .collect();
        let yty = self.prefix_yty[end] - self.prefix_yty[start];
        (xtx, xty, yty)
    }

    /// OLS statistics of observations `start+1..=end` (1-based), i.e. the
    /// half-open segment `(start, end]`.
    pub fn segment_stats(&self, start: usize, end: usize) -> Result<SegmentStats> {
        if start >= end || end > self.t {
            return Err(Error::InvalidRange { start, end, t: self.t });
        }
        let (xtx, xty, yty) = self.moments(start, end);
        let chol = Cholesky::new(&xtx, self.k).ok_or(Error::Singular { start, end })?;
        let beta_hat = chol.solve(&xty);
        let mut ssr = yty - dot(&beta_hat, &xty);
        if ssr <= 16.0 * f64::EPSILON * yty.abs() {
            ssr = 0.0;
        }
        Ok(SegmentStats {
            start,
            end,
            n: end - start,
            beta_hat,
            ssr,
            log_det_xtx: chol.log_det(),
            xtx,
        })
    }
}

/// OLS output for one segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub start: usize,
    pub end: usize,
    pub n: usize,
    pub beta_hat: Vec<f64>,
    /// Residual sum of squares; exactly zero for perfect fits.
    pub ssr: f64,
    /// Row-major XᵢᵀXᵢ.
    pub xtx: Vec<f64>,
    pub log_det_xtx: f64,
}

impl SegmentStats {
    pub fn k(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.ssr <= 0.0
    }

    /// Maximum-likelihood variance sᵢ/nᵢ.
    pub fn sigma2_mle(&self) -> f64 {
        self.ssr / self.n as f64
    }
}

/// Strictly increasing interior break dates in `(0, T)`.
///
/// Break `τᵢ` is the last observation of regime `i`, so regime `i` is
/// `(τᵢ₋₁, τᵢ]` with `τ₀ = 0` and `τ_{m+1} = T`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Segmentation {
    breaks: Vec<usize>,
    t: usize,
}

impl Segmentation {
    pub fn new(breaks: Vec<usize>, t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidSegmentation("T must be positive".into()));
        }
        let mut prev = 0;
        for &b in &breaks {
            if b <= prev || b >= t {
                return Err(Error::InvalidSegmentation(format!(
                    "breaks {breaks:?} are not strictly increasing inside (0, {t})"
                )));
            }
            prev = b;
        }
        Ok(Self { breaks, t })
    }

    /// Validates and additionally checks every regime length ≥ `min_duration`.
    pub fn with_min_duration(breaks: Vec<usize>, t: usize, min_duration: usize) -> Result<Self> {
        let seg = Self::new(breaks, t)?;
        if let Some(n) = seg.segment_lengths().into_iter().find(|&n| n < min_duration) {
            return Err(Error::InvalidSegmentation(format!(
                "regime of length {n} is shorter than the minimum duration {min_duration}"
            )));
        }
        Ok(seg)
    }

    pub fn empty(t: usize) -> Self {
        Self { breaks: Vec::new(), t }
    }

    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    pub fn n_breaks(&self) -> usize {
        self.breaks.len()
    }

    pub fn sample_size(&self) -> usize {
        self.t
    }

    /// `(start, end]` pairs for the m+1 regimes.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.breaks.len() + 1);
        let mut prev = 0;
        for &b in self.breaks.iter().chain(std::iter::once(&self.t)) {
            out.push((prev, b));
            prev = b;
        }
        out
    }

    pub fn segment_lengths(&self) -> Vec<usize> {
        self.segments().into_iter().map(|(a, b)| b - a).collect()
    }

    pub fn min_segment_length(&self) -> usize {
        self.segment_lengths().into_iter().min().unwrap_or(self.t)
    }

    /// Index of the regime containing observation `t` (1-based).
    pub fn regime_of(&self, t: usize) -> usize {
        self.breaks.iter().take_while(|&&b| b < t).count()
    }
}
