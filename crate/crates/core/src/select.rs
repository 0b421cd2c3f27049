// SPDX-License-Identifier: MIT OR Apache-2.0

//! Posterior model probabilities over competing segmentations, selection,
//! mixtures and forecast combination.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{FutureBreakPrior, PathSimulator};
use crate::detect::{detect, DetectorConfig, Method, MethodResult};
use crate::error::{Error, Result};
use crate::segstats::{Segmentation, TimeSeriesDataset};

/// Softmax of log marginal likelihoods under a uniform model prior.
/// `-inf` entries get probability zero.
pub fn posterior_probabilities(log_ml: &[f64]) -> Result<Vec<f64>> {
    if log_ml.is_empty() {
        return Err(Error::InvalidArgument("no candidates".into()));
    }
    if log_ml.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidArgument("log marginal likelihoods must be finite or -inf".into()));
    }
    let top = log_ml.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::InvalidArgument("every candidate has zero marginal likelihood".into()));
    }
    let w: Vec<f64> = log_ml.iter().map(|v| (v - top).exp()).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Competing detector outputs on one dataset with their posterior weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelEnsemble {
    pub candidates: Vec<MethodResult>,
    pub log_ml: Vec<f64>,
    pub posterior: Vec<f64>,
}

impl ModelEnsemble {
    pub fn new(candidates: Vec<MethodResult>) -> Result<Self> {
        let log_ml: Vec<f64> = candidates.iter().map(|c| c.log_ml()).collect();
        let posterior = posterior_probabilities(&log_ml)?;
        Ok(Self { candidates, log_ml, posterior })
    }

    /// Index of the most probable candidate; ties go to the first.
    pub fn best_index(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.posterior.iter().enumerate() {
            if p > self.posterior[best] {
                best = i;
            }
        }
        best
    }

    pub fn best(&self) -> &MethodResult {
        &self.candidates[self.best_index()]
    }

    /// Number of candidates whose posterior exceeds `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.posterior.iter().filter(|&&p| p > threshold).count()
    }
}

/// Outcome of the SEL rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: usize,
    pub ensemble: ModelEnsemble,
    /// Methods that failed, with their error messages.
    pub failures: Vec<(Method, String)>,
}

impl Selection {
    pub fn result(&self) -> &MethodResult {
        &self.ensemble.candidates[self.chosen]
    }
}

/// Runs every listed detector and keeps the segmentation with the highest
/// posterior probability. Methods run in canonical order, so ties go to the
/// earlier method.
pub fn sel(ds: &TimeSeriesDataset, cfg: &DetectorConfig, methods: &[Method]) -> Result<Selection> {
    if methods.is_empty() {
        return Err(Error::InvalidArgument("sel needs at least one method".into()));
    }
    let mut ordered = methods.to_vec();
    ordered.sort_unstable();
    ordered.dedup();
    let mut candidates = Vec::new();
    let mut failures = Vec::new();
    for m in ordered {
        match detect(ds, cfg, m) {
            Ok(r) => candidates.push(r),
            Err(e) => failures.push((m, e.to_string())),
        }
    }
    if candidates.is_empty() {
        return Err(Error::Refused(format!("every method failed: {failures:?}")));
    }
    let ensemble = ModelEnsemble::new(candidates)?;
    Ok(Selection { chosen: ensemble.best_index(), ensemble, failures })
}

/// Draws with attached weights summing to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedDraws {
    pub values: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl WeightedDraws {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean of every coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let dim = self.values.first().map(|v| v.len()).unwrap_or(0);
        let total = self.total_weight();
        (0..dim)
            .map(|c| self.values.iter().zip(&self.weights).map(|(v, w)| v[c] * w).sum::<f64>() / total)
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[c]).collect()
    }
}

/// Pools per-model draw sets, each weighted by its model probability.
pub fn mix_draws(weights: &[f64], per_model: Vec<Vec<Vec<f64>>>) -> Result<WeightedDraws> {
    if weights.len() != per_model.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} draw sets",
            weights.len(),
            per_model.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    let mut out = WeightedDraws { values: Vec::new(), weights: Vec::new() };
    for (w, draws) in weights.iter().zip(per_model) {
        if *w == 0.0 {
            continue;
        }
        if draws.is_empty() {
            return Err(Error::InvalidArgument("a candidate with positive weight has no draws".into()));
        }
        let each = w / total / draws.len() as f64;
        out.weights.extend(std::iter::repeat_n(each, draws.len()));
        out.values.extend(draws);
    }
    Ok(out)
}

/// Mixture of regime-parameter posteriors at time `t` (1-based). Each draw
/// row is `[β…, σ²]` for the regime that covers `t` in that candidate.
pub fn mixture_parameter_density(ensemble: &ModelEnsemble, draws: Vec<Vec<Vec<f64>>>) -> Result<WeightedDraws> {
    mix_draws(&ensemble.posterior, draws)
}

/// Parameter draws `[β…, σ²]` at time `t` for every ensemble member.
pub fn parameter_draws_at(
    ds: &TimeSeriesDataset,
    ensemble: &ModelEnsemble,
    t: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    if t == 0 || t > ds.len() {
        return Err(Error::InvalidArgument(format!("time {t} outside 1..={}", ds.len())));
    }
    ensemble
        .candidates
        .iter()
        .enumerate()
        .map(|(p, c)| {
            let seg = &c.segmentation;
            let regime = seg.regime_of(t);
            let (a, b) = seg.segments()[regime];
            let post = crate::bayes::NigPosterior::for_regime(ds, a, b, seg.n_breaks())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            Ok((0..n)
                .map(|_| {
                    let (mut beta, s2) = post.draw(&mut rng);
                    beta.push(s2);
                    beta
                })
                .collect())
        })
        .collect()
}

/// Posterior-weighted predictive draws of `y_{T+1..T+h}`.
pub fn combined_predictive(weights: &[f64], h: usize, per_model_paths: Vec<Vec<Vec<f64>>>) -> Result<WeightedDraws> {
    if h == 0 {
        return Err(Error::InvalidArgument("forecast horizon must be at least 1".into()));
    }
    if per_model_paths.iter().flatten().any(|p| p.len() != h) {
        return Err(Error::DimensionMismatch(format!("predictive paths must have length {h}")));
    }
    mix_draws(weights, per_model_paths)
}

/// Simulates `n` predictive paths from each candidate's terminal regime.
pub fn candidate_paths(
    ds: &TimeSeriesDataset,
    segmentations: &[&Segmentation],
    h: usize,
    n: usize,
    future_break: bool,
    seed: u64,
) -> Result<Vec<Vec<Vec<f64>>>> {
    segmentations
        .iter()
        .enumerate()
        .map(|(p, seg)| {
            let fb = if future_break && seg.n_breaks() >= 2 {
                Some(FutureBreakPrior::for_segmentation(ds, seg)?)
            } else {
                None
            };
            let sim = PathSimulator::new(ds, seg, fb.as_ref())?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            Ok(sim.draw_many(h, n, &mut rng))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSpec {
    pub ar_orders: Vec<usize>,
    pub methods: Vec<Method>,
    pub horizons: Vec<usize>,
    /// First estimation window as a fraction of the series.
    pub start_frac: f64,
    /// Distance between consecutive forecast origins.
    pub origin_step: usize,
    /// Also report the combination with one out-of-sample break.
    pub future_break: bool,
    pub draws_per_model: usize,
    pub detector: DetectorConfig,
    pub seed: u64,
}

impl Default for ForecastSpec {
    fn default() -> Self {
        Self {
            ar_orders: vec![1, 2],
            methods: vec![Method::Bsmdl, Method::Wbsmdl, Method::Pgmdl],
            horizons: vec![1, 3, 6, 12],
            start_frac: 0.1,
            origin_step: 1,
            future_break: false,
            draws_per_model: 500,
            detector: DetectorConfig::default(),
            seed: 0,
        }
    }
}

impl ForecastSpec {
    fn validate(&self, len: usize) -> Result<()> {
        if self.ar_orders.is_empty() || self.ar_orders.contains(&0) {
            return Err(Error::InvalidArgument("AR orders must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("at least one method is required".into()));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::InvalidArgument("horizons must be positive".into()));
        }
        if !(self.start_frac > 0.0 && self.start_frac < 1.0) {
            return Err(Error::InvalidArgument("start fraction must lie in (0, 1)".into()));
        }
        if self.origin_step == 0 || self.draws_per_model == 0 {
            return Err(Error::InvalidArgument("origin step and draw count must be positive".into()));
        }
        let k_max = self.ar_orders.iter().max().copied().unwrap_or(1) + 1;
        if self.first_origin(len) < 10 * k_max {
            return Err(Error::TooShort(format!(
                "first window has {} observations, need at least {}",
                self.first_origin(len),
                10 * k_max
            )));
        }
        self.detector.validate()
    }

    fn first_origin(&self, len: usize) -> usize {
        (self.start_frac * len as f64).ceil() as usize
    }

    pub fn model_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.ar_orders.iter().map(|p| format!("ar{p}")).collect();
        names.push("local".into());
        if self.future_break {
            names.push("local_future_break".into());
        }
        names
    }
}

/// Point forecasts and realized values at one origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OriginForecast {
    /// Number of observations in the estimation window.
    pub origin: usize,
    /// `forecasts[model][horizon index]`, `None` when the target lies past the sample.
    pub forecasts: Vec<Vec<Option<f64>>>,
    pub actuals: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub model: String,
    pub horizon: usize,
    pub rmsfe: f64,
    pub mafe: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub models: Vec<String>,
    pub horizons: Vec<usize>,
    pub origins: Vec<OriginForecast>,
    pub skipped: Vec<(usize, String)>,
    pub summary: Vec<LossSummary>,
}

impl ForecastReport {
    pub fn loss(&self, model: &str, horizon: usize) -> Option<&LossSummary> {
        self.summary.iter().find(|s| s.model == model && s.horizon == horizon)
    }

    /// One row per origin, one squared-error column per model × horizon.
    pub fn write_loss_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["origin".to_string()];
        for m in &self.models {
            for h in &self.horizons {
                header.push(format!("{m}_h{h}"));
            }
        }
        w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
        for o in &self.origins {
            let mut row = vec![o.origin.to_string()];
            for f in &o.forecasts {
                for (hi, v) in f.iter().enumerate() {
                    row.push(match (v, o.actuals[hi]) {
                        (Some(p), Some(a)) => format!("{}", (p - a).powi(2)),
                        _ => String::new(),
                    });
                }
            }
            w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn weighted_mean_paths(weights: &[f64], paths: &[Vec<Vec<f64>>], h: usize) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    let mut mean = vec![0.0; h];
    for (w, set) in weights.iter().zip(paths) {
        if *w == 0.0 || set.is_empty() {
            continue;
        }
        for path in set {
            for (acc, v) in mean.iter_mut().zip(path) {
                *acc += w / total / set.len() as f64 * v;
            }
        }
    }
    mean
}

fn forecast_origin(raw: &[f64], origin: usize, spec: &ForecastSpec, h_max: usize) -> Result<Vec<Vec<f64>>> {
    let window = &raw[..origin];
    let n_models = spec.model_names().len();
    if window.iter().all(|v| *v == window[0]) {
        return Ok(vec![vec![window[0]; h_max]; n_models]);
    }
    let p_max = *spec.ar_orders.iter().max().expect("validated");
    let seed = spec.seed ^ (origin as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
    let mut out = Vec::with_capacity(n_models);
    let mut local_results: Vec<(TimeSeriesDataset, Segmentation, f64)> = Vec::new();
    for (pi, &p) in spec.ar_orders.iter().enumerate() {
        let ds = TimeSeriesDataset::autoregressive_with_presample(window, p, p_max)?;
        let null = Segmentation::empty(ds.len());
        let paths = candidate_paths(&ds, &[&null], h_max, spec.draws_per_model, false, seed ^ (pi as u64) << 32)?;
        out.push(weighted_mean_paths(&[1.0], &paths, h_max));
        let mut cfg = spec.detector.clone();
        cfg.rng_seed = seed ^ (pi as u64);
        for &m in &spec.methods {
            if let Ok(r) = detect(&ds, &cfg, m) {
                local_results.push((ds.clone(), r.segmentation, r.score.value));
            }
        }
    }
    if local_results.is_empty() {
        return Err(Error::Refused("no detector produced a usable segmentation".into()));
    }
    let log_ml: Vec<f64> = local_results.iter().map(|r| r.2).collect();
    let weights = posterior_probabilities(&log_ml)?;
    let variants: &[bool] = if spec.future_break { &[false, true] } else { &[false] };
    for &fb in variants {
        let mut paths = Vec::with_capacity(local_results.len());
        for (i, (ds, seg, _)) in local_results.iter().enumerate() {
            if weights[i] == 0.0 {
                paths.push(Vec::new());
                continue;
            }
            let mut set = candidate_paths(ds, &[seg], h_max, spec.draws_per_model, fb, seed ^ 0xA5A5 ^ (i as u64) << 40)?;
            paths.push(set.pop().expect("one candidate"));
        }
        out.push(weighted_mean_paths(&weights, &paths, h_max));
    }
    Ok(out)
}

/// Expanding-window forecast evaluation.
///
/// At every origin the detectors run on each AR order over a common
/// effective sample, all (order, method) segmentations are weighted by their
/// posterior probabilities, and iterated predictive simulation gives point
/// forecasts (predictive means) for the no-break AR models and the local
/// combination. Origins whose window cannot be fitted are skipped.
pub fn forecast_harness(raw: &[f64], spec: &ForecastSpec) -> Result<ForecastReport> {
    spec.validate(raw.len())?;
    let h_max = *spec.horizons.iter().max().expect("validated");
    let first = spec.first_origin(raw.len());
    let origins: Vec<usize> = (first..raw.len()).step_by(spec.origin_step).collect();
    let results: Vec<(usize, Result<Vec<Vec<f64>>>)> =
        origins.par_iter().map(|&o| (o, forecast_origin(raw, o, spec, h_max))).collect();
    let models = spec.model_names();
    let mut report = ForecastReport {
        models: models.clone(),
        horizons: spec.horizons.clone(),
        origins: Vec::new(),
        skipped: Vec::new(),
        summary: Vec::new(),
    };
    for (origin, res) in results {
        match res {
            Ok(points) => {
                let actuals: Vec<Option<f64>> = spec.horizons.iter().map(|&h| raw.get(origin + h - 1).copied()).collect();
                let forecasts = points
                    .iter()
                    .map(|pts| spec.horizons.iter().zip(&actuals).map(|(&h, a)| a.map(|_| pts[h - 1])).collect())
                    .collect();
                report.origins.push(OriginForecast { origin, forecasts, actuals });
            }
            Err(e) => report.skipped.push((origin, e.to_string())),
        }
    }
    for (mi, name) in models.iter().enumerate() {
        for (hi, &h) in spec.horizons.iter().enumerate() {
            let errs: Vec<f64> = report
                .origins
                .iter()
                .filter_map(|o| Some(o.forecasts[mi][hi]? - o.actuals[hi]?))
                .collect();
            let n = errs.len();
            let (rmsfe, mafe) = if n == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (
                    (errs.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt(),
                    errs.iter().map(|e| e.abs()).sum::<f64>() / n as f64,
                )
            };
            report.summary.push(LossSummary { model: name.clone(), horizon: h, rmsfe, mafe, n });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(posterior_probabilities(&[-3.0]).unwrap(), vec![1.0]);
        let p = posterior_probabilities(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        let p = posterior_probabilities(&[1e6, 1e6, 1e6]).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 3.0).abs() < 1e-15));
        let p = posterior_probabilities(&[f64::NEG_INFINITY, 0.0]).unwrap();
        assert_eq!(p, vec![0.0, 1.0]);
        assert!(posterior_probabilities(&[f64::NEG_INFINITY]).is_err());
        assert!(posterior_probabilities(&[]).is_err());
        assert!(posterior_probabilities(&[f64::NAN]).is_err());
    }

    #[test]
    fn mixing_normalizes() {
        let d = mix_draws(&[0.5, 0.5], vec![vec![vec![1.0]; 3], vec![vec![3.0]; 7]]).unwrap();
        assert!((d.total_weight() - 1.0).abs() < 1e-12);
        assert!((d.mean()[0] - 2.0).abs() < 1e-12);
        assert!(mix_draws(&[1.0, 0.0], vec![vec![vec![1.0]], vec![]]).is_ok());
        assert!(mix_draws(&[0.5, 0.5], vec![vec![vec![1.0]], vec![]]).is_err());
        assert!(combined_predictive(&[1.0], 0, vec![vec![]]).is_err());
    }

    #[test]
    fn constant_series_forecasts_exactly() {
        let raw = vec![4.2; 200];
        let spec = ForecastSpec {
            ar_orders: vec![1],
            methods: vec![Method::Bsmdl],
            horizons: vec![1, 3],
            start_frac: 0.5,
            origin_step: 10,
            draws_per_model: 10,
            ..Default::default()
        };
        let rep = forecast_harness(&raw, &spec).unwrap();
        assert!(rep.skipped.is_empty());
        for s in &rep.summary {
            assert_eq!(s.rmsfe, 0.0);
            assert_eq!(s.mafe, 0.0);
        }
    }
}
