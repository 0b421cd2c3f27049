// SPDX-License-Identifier: MIT OR Apache-2.0

//! Benchmark data-generating processes and replication studies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::detect::{detect, DetectorConfig, Method, MethodResult};
use crate::error::{Error, Result};
use crate::segstats::TimeSeriesDataset;
use crate::select::ModelEnsemble;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DgpId {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl DgpId {
    pub const ALL: [DgpId; 6] = [DgpId::A, DgpId::B, DgpId::C, DgpId::D, DgpId::E, DgpId::F];
}

impl fmt::Display for DgpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for DgpId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(DgpId::A),
            "B" => Ok(DgpId::B),
            "C" => Ok(DgpId::C),
            "D" => Ok(DgpId::D),
            "E" => Ok(DgpId::E),
            "F" => Ok(DgpId::F),
            other => Err(Error::InvalidArgument(format!("unknown DGP '{other}'"))),
        }
    }
}

/// Break placement of a DGP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BreakPlacement {
    /// Dates at the reference length, scaled proportionally for other T.
    Absolute { dates: Vec<usize>, reference_t: usize },
    /// Fractions of T.
    Relative(Vec<f64>),
}

/// Piecewise AR(2) process `y_t = β₀ + β₁ y_{t−1} + β₂ y_{t−2} + ε_t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub id: Option<DgpId>,
    pub breaks: BreakPlacement,
    pub beta0: Vec<f64>,
    pub beta1: Vec<f64>,
    pub beta2: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub burn_in: usize,
    /// AR order used when fitting (1 or 2).
    pub ar_order: usize,
}

impl DgpSpec {
    pub fn table(id: DgpId) -> Self {
        let abs = |dates: &[usize]| BreakPlacement::Absolute { dates: dates.to_vec(), reference_t: 1024 };
        let (breaks, beta1, beta2, sigma2, ar_order) = match id {
            DgpId::A => (abs(&[]), vec![-0.7], vec![0.0], vec![1.0], 1),
            DgpId::B => (abs(&[514, 768]), vec![0.9, 1.69, 1.32], vec![0.0, -0.81, -0.81], vec![1.0; 3], 2),
            DgpId::C => (abs(&[400, 612]), vec![0.4, -0.6, 0.5], vec![0.0; 3], vec![1.0; 3], 1),
            DgpId::D => (abs(&[50]), vec![0.75, -0.5], vec![0.0; 2], vec![1.0; 2], 1),
            DgpId::E => (abs(&[400, 750]), vec![0.999; 3], vec![0.0; 3], vec![1.0, 2.25, 1.0], 1),
            DgpId::F => (abs(&[400, 750]), vec![1.399, 0.999, 0.699], vec![-0.4, 0.0, 0.3], vec![1.0, 2.25, 1.0], 2),
        };
        let regimes = beta1.len();
        Self { id: Some(id), breaks, beta0: vec![0.0; regimes], beta1, beta2, sigma2, burn_in: 200, ar_order }
    }

    /// DGP B with breaks at 0.5T and 0.75T, the long-series design.
    pub fn long_b() -> Self {
        Self { breaks: BreakPlacement::Relative(vec![0.5, 0.75]), ..Self::table(DgpId::B) }
    }

    /// Table design for `t = 1024`; other lengths use relative breaks for
    /// DGP B and proportionally scaled dates otherwise.
    pub fn at_length(id: DgpId, t: usize) -> Self {
        if id == DgpId::B && t != 1024 {
            Self::long_b()
        } else {
            Self::table(id)
        }
    }

    pub fn n_regimes(&self) -> usize {
        self.beta1.len()
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.n_regimes();
        let n_breaks = match &self.breaks {
            BreakPlacement::Absolute { dates, .. } => dates.len(),
            BreakPlacement::Relative(f) => f.len(),
        };
        if r == 0 || self.beta0.len() != r || self.beta2.len() != r || self.sigma2.len() != r || n_breaks + 1 != r {
            return Err(Error::InvalidArgument("regime parameter vectors must all have m+1 entries".into()));
        }
        if self.sigma2.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::InvalidArgument("regime variances must be positive".into()));
        }
        for i in 0..r {
            let (b1, b2) = (self.beta1[i], self.beta2[i]);
            if !(b2.abs() < 1.0 && b1 + b2 < 1.0 && b2 - b1 < 1.0) {
                return Err(Error::InvalidArgument(format!("regime {} is not stationary", i + 1)));
            }
        }
        if !(1..=2).contains(&self.ar_order) {
            return Err(Error::InvalidArgument("fitted AR order must be 1 or 2".into()));
        }
        Ok(())
    }

    /// Break dates (1-based, regime i ends at date τᵢ) for length `t`.
    pub fn breaks_for(&self, t: usize) -> Vec<usize> {
        match &self.breaks {
            BreakPlacement::Absolute { dates, reference_t } => {
                if t == *reference_t {
                    dates.clone()
                } else {
                    dates.iter().map(|&d| ((d as f64) * t as f64 / *reference_t as f64).round() as usize).collect()
                }
            }
            BreakPlacement::Relative(f) => f.iter().map(|&x| (x * t as f64).round() as usize).collect(),
        }
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` and stream `stream` (0 for data, a method tag
/// otherwise), independent of which other streams are used.
pub fn replication_seed(base: u64, rep: u64, stream: u64) -> u64 {
    mix64(mix64(mix64(base) ^ rep) ^ stream)
}

fn method_stream(m: Method) -> u64 {
    m as u64 + 1
}

/// Simulates `t` observations after `burn_in` regime-1 draws from zero lags.
pub fn simulate_dgp(spec: &DgpSpec, t: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if t < 100 {
        return Err(Error::TooShort(format!("DGP series need T >= 100, got {t}")));
    }
    let breaks = spec.breaks_for(t);
    if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.iter().any(|&b| b == 0 || b >= t) {
        return Err(Error::InvalidArgument(format!("breaks {breaks:?} invalid for T={t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut step = |regime: usize, rng: &mut ChaCha8Rng| {
        let e = spec.sigma2[regime].sqrt() * noise.sample(rng);
        let y = spec.beta0[regime] + spec.beta1[regime] * y1 + spec.beta2[regime] * y2 + e;
        y2 = y1;
        y1 = y;
        y
    };
    for _ in 0..spec.burn_in {
        step(0, &mut rng);
    }
    let mut out = Vec::with_capacity(t);
    let mut regime = 0;
    for date in 1..=t {
        while regime < breaks.len() && date > breaks[regime] {
            regime += 1;
        }
        out.push(step(regime, &mut rng));
    }
    Ok(out)
}

/// Per-method aggregate over replications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    /// `m_histogram[j]` counts replications with j breaks (last bin is "j or more").
    pub m_histogram: Vec<usize>,
    pub correct_m_frequency: f64,
    pub exact_frequency: f64,
    /// Mean |τ̂ᵢ − τᵢ| over replications with the correct break count.
    pub mean_abs_break_errors: Vec<f64>,
    pub mean_mdl: f64,
    pub mean_runtime_ms: f64,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub dgp: Option<DgpId>,
    pub t: usize,
    pub true_breaks: Vec<usize>,
    pub n_reps: usize,
    pub seed: u64,
    pub exact_tolerance: usize,
    pub methods: Vec<MethodSummary>,
}

impl ReplicationReport {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub detector: DetectorConfig,
    /// Largest break-count bin of the histogram.
    pub histogram_bins: usize,
    pub exact_tolerance: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { detector: DetectorConfig::default(), histogram_bins: 3, exact_tolerance: 50 }
    }
}

/// Dataset for a raw DGP series, fitted with the DGP's AR order.
pub fn dgp_dataset(spec: &DgpSpec, raw: &[f64]) -> Result<TimeSeriesDataset> {
    TimeSeriesDataset::autoregressive(raw, spec.ar_order)
}

/// Break dates of a result in raw-series time.
pub fn raw_breaks(ds: &TimeSeriesDataset, r: &MethodResult) -> Vec<usize> {
    r.breaks().iter().map(|b| b + ds.time_offset()).collect()
}

fn run_one(
    spec: &DgpSpec,
    methods: &[Method],
    t: usize,
    base_seed: u64,
    rep: usize,
    study: &StudyConfig,
) -> Vec<Result<(Vec<usize>, f64, u64)>> {
    let raw = match simulate_dgp(spec, t, replication_seed(base_seed, rep as u64, 0)) {
        Ok(r) => r,
        Err(e) => return methods.iter().map(|_| Err(e.clone())).collect(),
    };
    let ds = match dgp_dataset(spec, &raw) {
        Ok(d) => d,
        Err(e) => return methods.iter().map(|_| Err(e.clone())).collect(),
    };
    methods
        .iter()
        .map(|&m| {
            let mut cfg = study.detector.clone();
            cfg.rng_seed = replication_seed(base_seed, rep as u64, method_stream(m));
            let r = detect(&ds, &cfg, m)?;
            Ok((raw_breaks(&ds, &r), r.log_ml(), r.runtime_ms))
        })
        .collect()
}

/// Simulates `n_reps` series and runs every method on each.
pub fn run_replications(
    spec: &DgpSpec,
    methods: &[Method],
    n_reps: usize,
    t: usize,
    base_seed: u64,
    study: &StudyConfig,
) -> Result<ReplicationReport> {
    if n_reps == 0 {
        return Err(Error::InvalidArgument("n_reps must be at least 1".into()));
    }
    spec.validate()?;
    study.detector.validate()?;
    let truth = spec.breaks_for(t);
    let per_rep: Vec<_> = (0..n_reps)
        .into_par_iter()
        .map(|rep| run_one(spec, methods, t, base_seed, rep, study))
        .collect();
    let m0 = truth.len();
    let bins = study.histogram_bins.max(m0 + 1);
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(mi, &method)| {
            let mut hist = vec![0usize; bins + 1];
            let (mut correct, mut exact, mut failures) = (0usize, 0usize, 0usize);
            let mut err_sum = vec![0.0; m0];
            let (mut mdl_sum, mut mdl_n, mut rt_sum) = (0.0, 0usize, 0.0);
            for rep in &per_rep {
                match &rep[mi] {
                    Ok((breaks, mdl, rt)) => {
                        hist[breaks.len().min(bins)] += 1;
                        mdl_sum += mdl;
                        mdl_n += 1;
                        rt_sum += *rt as f64;
                        if breaks.len() == m0 {
                            correct += 1;
                            let errs: Vec<usize> = breaks.iter().zip(&truth).map(|(a, b)| a.abs_diff(*b)).collect();
                            for (acc, e) in err_sum.iter_mut().zip(&errs) {
                                *acc += *e as f64;
                            }
                            if errs.iter().all(|&e| e <= study.exact_tolerance) {
                                exact += 1;
                            }
                        }
                    }
                    Err(_) => failures += 1,
                }
            }
            let n = n_reps as f64;
            MethodSummary {
                method,
                m_histogram: hist,
                correct_m_frequency: 100.0 * correct as f64 / n,
                exact_frequency: 100.0 * exact as f64 / n,
                mean_abs_break_errors: err_sum.iter().map(|s| if correct > 0 { s / correct as f64 } else { f64::NAN }).collect(),
                mean_mdl: if mdl_n > 0 { mdl_sum / mdl_n as f64 } else { f64::NAN },
                mean_runtime_ms: if mdl_n > 0 { rt_sum / mdl_n as f64 } else { f64::NAN },
                failures,
            }
        })
        .collect();
    Ok(ReplicationReport {
        dgp: spec.id,
        t,
        true_breaks: truth,
        n_reps,
        seed: base_seed,
        exact_tolerance: study.exact_tolerance,
        methods: summaries,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorStudy {
    pub methods: Vec<Method>,
    /// Average posterior probability per method, in percent.
    pub average_posterior: Vec<f64>,
    /// Percentage of replications with at least two posteriors above 10%.
    pub mix_percentage: f64,
    pub n_reps: usize,
}

/// Average posterior probabilities across methods' segmentations.
pub fn posterior_prob_study(
    spec: &DgpSpec,
    methods: &[Method],
    n_reps: usize,
    t: usize,
    base_seed: u64,
    study: &StudyConfig,
) -> Result<PosteriorStudy> {
    if methods.len() < 2 {
        return Err(Error::InvalidArgument("posterior study needs at least two methods".into()));
    }
    if n_reps == 0 {
        return Err(Error::InvalidArgument("n_reps must be at least 1".into()));
    }
    spec.validate()?;
    let rows: Vec<Option<Vec<f64>>> = (0..n_reps)
        .into_par_iter()
        .map(|rep| {
            let raw = simulate_dgp(spec, t, replication_seed(base_seed, rep as u64, 0)).ok()?;
            let ds = dgp_dataset(spec, &raw).ok()?;
            let mut results = Vec::new();
            let mut present = Vec::new();
            for &m in methods {
                let mut cfg = study.detector.clone();
                cfg.rng_seed = replication_seed(base_seed, rep as u64, method_stream(m));
                match detect(&ds, &cfg, m) {
                    Ok(r) => {
                        results.push(r);
                        present.push(true);
                    }
                    Err(_) => present.push(false),
                }
            }
            let ens = ModelEnsemble::new(results).ok()?;
            let mut post = ens.posterior.into_iter();
            Some(present.iter().map(|&p| if p { post.next().unwrap_or(0.0) } else { 0.0 }).collect())
        })
        .collect();
    let ok: Vec<&Vec<f64>> = rows.iter().flatten().collect();
    if ok.is_empty() {
        return Err(Error::Refused("no replication produced a usable ensemble".into()));
    }
    let n = ok.len() as f64;
    let average_posterior = (0..methods.len()).map(|i| 100.0 * ok.iter().map(|r| r[i]).sum::<f64>() / n).collect();
    let mixed = ok.iter().filter(|r| r.iter().filter(|&&p| p > 0.1).count() >= 2).count();
    Ok(PosteriorStudy {
        methods: methods.to_vec(),
        average_posterior,
        mix_percentage: 100.0 * mixed as f64 / n,
        n_reps,
    })
}

/// Random piecewise regression with `k` regressors (intercept plus
/// standard normal covariates), `m` breaks and every regime at least
/// `min_n` long. Regime coefficients and noise scales are redrawn per regime.
pub fn random_regression_fixture<R: rand::Rng + ?Sized>(
    rng: &mut R,
    k: usize,
    m: usize,
    min_n: usize,
    max_n: usize,
) -> Result<(TimeSeriesDataset, crate::segstats::Segmentation)> {
    if k == 0 || min_n == 0 || max_n < min_n {
        return Err(Error::InvalidArgument("fixture needs k >= 1 and 1 <= min_n <= max_n".into()));
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let lengths: Vec<usize> = (0..=m).map(|_| rng.random_range(min_n..=max_n)).collect();
    let t: usize = lengths.iter().sum();
    let mut breaks = Vec::with_capacity(m);
    let mut acc = 0;
    for n in &lengths[..m] {
        acc += n;
        breaks.push(acc);
    }
    let mut y = Vec::with_capacity(t);
    let mut rows = Vec::with_capacity(t);
    for &n in &lengths {
        let beta: Vec<f64> = (0..k).map(|_| 2.0 * normal.sample(rng)).collect();
        let sigma = rng.random_range(0.3..3.0);
        for _ in 0..n {
            let mut row = vec![1.0];
            row.extend((1..k).map(|_| normal.sample(rng)));
            let mean: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            y.push(mean + sigma * normal.sample(rng));
            rows.push(row);
        }
    }
    Ok((TimeSeriesDataset::new(y, rows)?, crate::segstats::Segmentation::new(breaks, t)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_breaks() {
        assert_eq!(DgpSpec::table(DgpId::B).breaks_for(1024), vec![514, 768]);
        assert_eq!(DgpSpec::long_b().breaks_for(8192), vec![4096, 6144]);
        assert_eq!(DgpSpec::table(DgpId::D).breaks_for(2048), vec![100]);
        for id in DgpId::ALL {
            DgpSpec::table(id).validate().unwrap();
        }
    }

    #[test]
    fn seeds_are_stream_independent() {
        assert_ne!(replication_seed(1, 0, 0), replication_seed(1, 1, 0));
        assert_ne!(replication_seed(1, 0, 0), replication_seed(1, 0, 1));
        assert_eq!(replication_seed(7, 3, 2), replication_seed(7, 3, 2));
    }

    #[test]
    fn rejects_explosive_regime() {
        let mut s = DgpSpec::table(DgpId::A);
        s.beta1 = vec![1.01];
        assert!(s.validate().is_err());
        assert!(simulate_dgp(&DgpSpec::table(DgpId::A), 50, 0).is_err());
    }
}
