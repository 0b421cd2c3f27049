// SPDX-License-Identifier: MIT OR Apache-2.0

//! Change-point detectors.
//!
//! All detectors work on half-open regimes `(start, end]` over a
//! [`TimeSeriesDataset`] and return a [`MethodResult`] scored with the MDL
//! marginal log-likelihood:
//!
//! - `BS` / `WBS`: (wild) binary segmentation on the cumsum statistic.
//! - `BSMDL` / `WBSMDL`: the same searches driven by the local log Bayes
//!   factor of a split, so `δ = 3` means a split posterior above ~95%.
//! - `PGMDL`: exact optimum over subsets of the scan-statistic local maxima.
//! - `GMDL`: exact optimum over all segmentations by dynamic programming.
//! - `ORACLE`: brute-force enumeration, used to check GMDL.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::mdl::{default_min_duration, ln_plus, mdl_marginal_loglik, stats_cost, MdlScore};
use crate::segstats::{Segmentation, TimeSeriesDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bs,
    Wbs,
    Bsmdl,
    Wbsmdl,
    Pgmdl,
    Gmdl,
    Oracle,
}

impl Method {
    pub const LOCAL: [Method; 5] = [Method::Bs, Method::Wbs, Method::Bsmdl, Method::Wbsmdl, Method::Pgmdl];
    pub const ALL: [Method; 6] =
        [Method::Bs, Method::Wbs, Method::Bsmdl, Method::Wbsmdl, Method::Pgmdl, Method::Gmdl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bs => "bs",
            Method::Wbs => "wbs",
            Method::Bsmdl => "bsmdl",
            Method::Wbsmdl => "wbsmdl",
            Method::Pgmdl => "pgmdl",
            Method::Gmdl => "gmdl",
            Method::Oracle => "oracle",
        }
    }

    fn stream_tag(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name().to_uppercase())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bs" => Ok(Method::Bs),
            "wbs" => Ok(Method::Wbs),
            "bsmdl" => Ok(Method::Bsmdl),
            "wbsmdl" => Ok(Method::Wbsmdl),
            "pgmdl" => Ok(Method::Pgmdl),
            "gmdl" => Ok(Method::Gmdl),
            "oracle" | "brute" | "brute_force" => Ok(Method::Oracle),
            other => Err(Error::InvalidArgument(format!("unknown method '{other}'"))),
        }
    }
}

/// Split statistic used by (wild) binary segmentation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Cumsum,
    Mdl,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Split threshold δ on the log Bayes factor scale (BSMDL/WBSMDL).
    pub threshold_delta: f64,
    /// Threshold on the |cumsum| scale; `None` uses `1.3 √(2 ln T) σ̂`.
    pub cumsum_threshold: Option<f64>,
    pub wbs_intervals: usize,
    /// `None` uses `max(10K, ⌈√T⌉/2)`.
    pub min_duration: Option<usize>,
    pub max_breaks: usize,
    /// `None` uses the integer closest to ln T.
    pub scan_radius: Option<usize>,
    pub rng_seed: u64,
    /// GMDL refuses larger samples (quadratic cost table).
    pub gmdl_max_len: usize,
    /// Upper bound on segmentations enumerated by the brute-force oracle.
    pub brute_force_limit: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            threshold_delta: 3.0,
            cumsum_threshold: None,
            wbs_intervals: 1000,
            min_duration: None,
            max_breaks: 50,
            scan_radius: None,
            rng_seed: 0,
            gmdl_max_len: 8192,
            brute_force_limit: 10_000_000,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_delta >= 0.0) {
            return Err(Error::InvalidArgument("threshold_delta must be >= 0".into()));
        }
        if let Some(c) = self.cumsum_threshold {
            if !(c >= 0.0) {
                return Err(Error::InvalidArgument("cumsum threshold must be >= 0".into()));
            }
        }
        if self.wbs_intervals == 0 {
            return Err(Error::InvalidArgument("wbs_intervals must be >= 1".into()));
        }
        if self.scan_radius == Some(0) {
            return Err(Error::InvalidArgument("scan_radius must be >= 1".into()));
        }
        if self.min_duration == Some(0) {
            return Err(Error::InvalidArgument("min_duration must be >= 1".into()));
        }
        Ok(())
    }

    pub fn min_duration_for(&self, ds: &TimeSeriesDataset) -> usize {
        self.min_duration
            .unwrap_or_else(|| default_min_duration(ds.len(), ds.n_regressors()))
            .max(ds.n_regressors() + 1)
    }

    pub fn scan_radius_for(&self, t: usize) -> usize {
        self.scan_radius.unwrap_or_else(|| ((t as f64).ln().round() as usize).max(1))
    }
}

/// One test performed by a segmentation search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStep {
    pub start: usize,
    pub end: usize,
    pub candidate: usize,
    pub statistic: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Binary segmentation trace in visiting order.
    pub steps: Vec<SplitStep>,
    /// Best MDL marginal log-likelihood for each break count (GMDL, PGMDL).
    pub best_by_m: Vec<f64>,
    /// Scan candidate set (PGMDL).
    pub candidates: Vec<usize>,
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub segmentation: Segmentation,
    pub score: MdlScore,
    pub runtime_ms: u64,
    pub diagnostics: Diagnostics,
}

impl MethodResult {
    pub fn breaks(&self) -> &[usize] {
        self.segmentation.breaks()
    }

    pub fn log_ml(&self) -> f64 {
        self.score.value
    }
}

fn finish(
    method: Method,
    ds: &TimeSeriesDataset,
    breaks: Vec<usize>,
    started: Instant,
    diagnostics: Diagnostics,
) -> Result<MethodResult> {
    let segmentation = Segmentation::new(breaks, ds.len())?;
    let score = mdl_marginal_loglik(ds, &segmentation)?;
    Ok(MethodResult {
        method,
        segmentation,
        score,
        runtime_ms: started.elapsed().as_millis() as u64,
        diagnostics,
    })
}

/// Runs `method` on `ds`.
pub fn detect(ds: &TimeSeriesDataset, cfg: &DetectorConfig, method: Method) -> Result<MethodResult> {
    match method {
        Method::Bs => binary_segmentation(ds, cfg, Statistic::Cumsum),
        Method::Wbs => wild_binary_segmentation(ds, cfg, Statistic::Cumsum),
        Method::Bsmdl => binary_segmentation(ds, cfg, Statistic::Mdl),
        Method::Wbsmdl => wild_binary_segmentation(ds, cfg, Statistic::Mdl),
        Method::Pgmdl => pgmdl(ds, cfg),
        Method::Gmdl => gmdl(ds, cfg),
        Method::Oracle => brute_force(ds, cfg),
    }
}

/// Cumsum statistic on observations `start+1..=end` split after `tau`.
///
/// With `a = start + 1`, `b = end`:
/// `√((b−τ)/((b−a+1)(τ−a+1))) Σ_{a..τ} y − √((τ−a+1)/((b−a+1)(b−τ))) Σ_{τ+1..b} y`.
pub fn cumsum_statistic(ds: &TimeSeriesDataset, start: usize, end: usize, tau: usize) -> Result<f64> {
    if !(start < tau && tau < end && end <= ds.len()) {
        return Err(Error::InvalidArgument(format!(
            "cumsum split {tau} outside ({start}, {end})"
        )));
    }
    Ok(cumsum_unchecked(ds, start, end, tau))
}

#[inline]
fn cumsum_unchecked(ds: &TimeSeriesDataset, start: usize, end: usize, tau: usize) -> f64 {
    let len = (end - start) as f64;
    let left = (tau - start) as f64;
    let right = (end - tau) as f64;
    (right / (len * left)).sqrt() * ds.sum_y(start, tau) - (left / (len * right)).sqrt() * ds.sum_y(tau, end)
}

/// Local log Bayes factor of splitting `(start, end]` after `tau` against
/// keeping it whole. Both models are scored with T equal to the interval
/// length and m counted locally (1 vs 0). Returns `-inf` when either side
/// is shorter than `min_duration` or cannot be fitted.
pub fn bsmdl_statistic(ds: &TimeSeriesDataset, start: usize, end: usize, tau: usize, min_duration: usize) -> f64 {
    if tau < start + min_duration || tau + min_duration > end || end > ds.len() {
        return f64::NEG_INFINITY;
    }
    let t_loc = end - start;
    let whole = match ds.segment_stats(start, end) {
        Ok(s) => stats_cost(&s, t_loc),
        Err(_) => return f64::NEG_INFINITY,
    };
    split_gain(ds, start, end, tau, t_loc, whole)
}

#[inline]
fn split_gain(ds: &TimeSeriesDataset, start: usize, end: usize, tau: usize, t_loc: usize, whole: f64) -> f64 {
    if whole == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let left = match ds.segment_stats(start, tau) {
        Ok(s) => stats_cost(&s, t_loc),
        Err(_) => return f64::NEG_INFINITY,
    };
    let right = match ds.segment_stats(tau, end) {
        Ok(s) => stats_cost(&s, t_loc),
        Err(_) => return f64::NEG_INFINITY,
    };
    left + right - whole
}

/// Evaluates statistics for every admissible split of one interval.
struct IntervalScanner<'a> {
    ds: &'a TimeSeriesDataset,
    stat: Statistic,
    min_duration: usize,
}

impl<'a> IntervalScanner<'a> {
    /// Positions `tau` with both sides at least `min_duration` long.
    fn range(&self, start: usize, end: usize) -> Option<(usize, usize)> {
        let lo = start + self.min_duration;
        let hi = end.checked_sub(self.min_duration)?;
        (lo <= hi).then_some((lo, hi))
    }

    /// Statistic profile on `(start, end]` restricted to `lo..=hi`.
    fn profile(&self, start: usize, end: usize, lo: usize, hi: usize) -> Vec<f64> {
        match self.stat {
            Statistic::Cumsum => (lo..=hi).map(|tau| cumsum_unchecked(self.ds, start, end, tau).abs()).collect(),
            Statistic::Mdl => {
                let t_loc = end - start;
                let whole = match self.ds.segment_stats(start, end) {
                    Ok(s) => stats_cost(&s, t_loc),
                    Err(_) => f64::NEG_INFINITY,
                };
                (lo..=hi).map(|tau| split_gain(self.ds, start, end, tau, t_loc, whole)).collect()
            }
        }
    }

    /// Argmax over admissible splits of `(start, end]`; ties go to the
    /// smallest position.
    fn best(&self, start: usize, end: usize) -> Option<(usize, f64)> {
        let (lo, hi) = self.range(start, end)?;
        self.best_within(start, end, lo, hi)
    }

    fn best_within(&self, start: usize, end: usize, lo: usize, hi: usize) -> Option<(usize, f64)> {
        let profile = self.profile(start, end, lo, hi);
        argmax_first(&profile).map(|(i, v)| (lo + i, v))
    }
}

fn argmax_first(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Default cumsum threshold `1.3 √(2 ln T) σ̂`, with σ̂ the MAD scale of first
/// differences divided by √2.
pub fn default_cumsum_threshold(y: &[f64]) -> f64 {
    let t = y.len();
    if t < 3 {
        return f64::INFINITY;
    }
    let mut diffs: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]) / std::f64::consts::SQRT_2).collect();
    let med = median(&mut diffs.clone());
    let mut dev: Vec<f64> = diffs.iter_mut().map(|d| (*d - med).abs()).collect();
    let sigma = 1.482_602_218_505_602 * median(&mut dev);
    1.3 * (2.0 * (t as f64).ln()).sqrt() * sigma
}

fn threshold_for(ds: &TimeSeriesDataset, cfg: &DetectorConfig, stat: Statistic) -> f64 {
    match stat {
        Statistic::Mdl => cfg.threshold_delta,
        Statistic::Cumsum => cfg.cumsum_threshold.unwrap_or_else(|| default_cumsum_threshold(ds.y())),
    }
}

/// Binary segmentation. On each active interval the best split is accepted
/// when its statistic exceeds the threshold, then both halves are searched.
pub fn binary_segmentation(ds: &TimeSeriesDataset, cfg: &DetectorConfig, stat: Statistic) -> Result<MethodResult> {
    cfg.validate()?;
    let started = Instant::now();
    let scanner = IntervalScanner { ds, stat, min_duration: cfg.min_duration_for(ds) };
    let threshold = threshold_for(ds, cfg, stat);
    let mut diagnostics = Diagnostics { threshold: Some(threshold), ..Default::default() };
    let mut breaks = Vec::new();
    let mut stack = vec![(0usize, ds.len())];
    while let Some((start, end)) = stack.pop() {
        if breaks.len() >= cfg.max_breaks {
            break;
        }
        let Some((tau, value)) = scanner.best(start, end) else { continue };
        let accepted = value > threshold;
        diagnostics.steps.push(SplitStep { start, end, candidate: tau, statistic: value, accepted });
        if accepted {
            breaks.push(tau);
            stack.push((tau, end));
            stack.push((start, tau));
        }
    }
    breaks.sort_unstable();
    let method = match stat {
        Statistic::Cumsum => Method::Bs,
        Statistic::Mdl => Method::Bsmdl,
    };
    finish(method, ds, breaks, started, diagnostics)
}

/// Uniform draw of a sub-interval `(a, b]` of `(start, end]` with
/// `b − a ≥ 2 min_duration`.
fn draw_interval(rng: &mut ChaCha8Rng, start: usize, end: usize, min_duration: usize) -> Option<(usize, usize)> {
    let span = (end - start).checked_sub(2 * min_duration)?;
    // Unordered pairs {p, q}, p ≠ q, of 0..=span map one-to-one onto the
    // admissible intervals.
    let l = span + 1;
    loop {
        let p = rng.random_range(0..=l);
        let q = rng.random_range(0..=l);
        if p == q {
            continue;
        }
        let (p, q) = if p < q { (p, q) } else { (q, p) };
        return Some((start + p, start + q - 1 + 2 * min_duration));
    }
}

fn method_rng(seed: u64, method: Method) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(method.stream_tag());
    rng
}

/// Wild binary segmentation. Each active interval draws `N` random
/// sub-intervals and keeps the one with the largest maximum. The break is
/// placed at the argmax of the active interval's own statistic over that
/// sub-interval. With the cumsum statistic the sub-interval maximum is
/// tested against the threshold; with the MDL statistic the active
/// interval's value at the placed break is tested.
pub fn wild_binary_segmentation(
    ds: &TimeSeriesDataset,
    cfg: &DetectorConfig,
    stat: Statistic,
) -> Result<MethodResult> {
    cfg.validate()?;
    let started = Instant::now();
    let method = match stat {
        Statistic::Cumsum => Method::Wbs,
        Statistic::Mdl => Method::Wbsmdl,
    };
    let d = cfg.min_duration_for(ds);
    let scanner = IntervalScanner { ds, stat, min_duration: d };
    let threshold = threshold_for(ds, cfg, stat);
    let mut rng = method_rng(cfg.rng_seed, method);
    let mut diagnostics = Diagnostics { threshold: Some(threshold), ..Default::default() };
    let mut breaks = Vec::new();
    let mut stack = vec![(0usize, ds.len())];
    while let Some((start, end)) = stack.pop() {
        if breaks.len() >= cfg.max_breaks || end - start < 2 * d {
            continue;
        }
        let mut winner: Option<(usize, usize, usize, f64)> = None;
        for _ in 0..cfg.wbs_intervals {
            let Some((a, b)) = draw_interval(&mut rng, start, end, d) else { break };
            if let Some((tau, v)) = scanner.best(a, b) {
                if winner.is_none_or(|w| v > w.3) {
                    winner = Some((a, b, tau, v));
                }
            }
        }
        let Some((a, b, tau_sub, value)) = winner else { continue };
        let refined = scanner.best_within(start, end, a + d, b - d);
        // The MDL statistic is a log Bayes factor for the interval it is
        // computed on, so the test uses the active interval at the refined
        // location. Cumsum keeps the sub-interval maximum.
        let (tau, value) = match (stat, refined) {
            (Statistic::Mdl, Some(r)) => r,
            (_, Some((t, _))) => (t, value),
            (_, None) => (tau_sub, value),
        };
        let accepted = value > threshold;
        diagnostics.steps.push(SplitStep { start, end, candidate: tau, statistic: value, accepted });
        if accepted {
            breaks.push(tau);
            stack.push((tau, end));
            stack.push((start, tau));
        }
    }
    breaks.sort_unstable();
    finish(method, ds, breaks, started, diagnostics)
}

/// Local maxima of the full-sample split statistic under a sliding window
/// of radius `h`: positions `l ∈ [h, T−h]` whose value equals the maximum
/// over `(l−h, l+h)`.
pub fn scan_candidates(ds: &TimeSeriesDataset, cfg: &DetectorConfig) -> Vec<usize> {
    let t = ds.len();
    let h = cfg.scan_radius_for(t);
    if t <= 2 * h {
        return Vec::new();
    }
    let d = cfg.min_duration_for(ds);
    let scanner = IntervalScanner { ds, stat: Statistic::Mdl, min_duration: d };
    // profile[l] for l in 1..t (index 0 unused)
    let mut profile = vec![f64::NEG_INFINITY; t];
    if let Some((lo, hi)) = scanner.range(0, t) {
        for (i, v) in scanner.profile(0, t, lo, hi).into_iter().enumerate() {
            profile[lo + i] = v;
        }
    }
    local_window_maxima(&profile, h, h, t - h)
}

/// Positions `l ∈ [lo, hi]` with finite `values[l]` equal to the maximum of
/// `values` over the open window `(l−h, l+h)` (clipped to `1..len`).
pub(crate) fn local_window_maxima(values: &[f64], h: usize, lo: usize, hi: usize) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut deque: VecDeque<usize> = VecDeque::new();
    let mut next = 1usize;
    for l in lo..=hi.min(n - 1) {
        let right = (l + h - 1).min(n - 1);
        while next <= right {
            while let Some(&back) = deque.back() {
                if values[back] <= values[next] {
                    deque.pop_back();
                } else {
                    break;
                }
            }
            deque.push_back(next);
            next += 1;
        }
        let left = (l + 1).saturating_sub(h).max(1);
        while let Some(&front) = deque.front() {
            if front < left {
                deque.pop_front();
            } else {
                break;
            }
        }
        if let Some(&front) = deque.front() {
            let v = values[l];
            if v.is_finite() && v >= values[front] {
                out.push(l);
            }
        }
    }
    out
}

/// Best partition of `(0, T]` using only the given ordered `boundaries`
/// (which must start at 0 and end at T). Returns the breaks and the best
/// score for each break count.
fn partition_dp(
    boundaries: &[usize],
    max_breaks: usize,
    min_duration: usize,
    cost: impl Fn(usize, usize) -> f64,
) -> (Vec<usize>, Vec<f64>) {
    let nb = boundaries.len();
    let last = nb - 1;
    let max_m = max_breaks.min(last.saturating_sub(1));
    // seg_cost[i][j] for i < j
    let mut seg_cost = vec![f64::NEG_INFINITY; nb * nb];
    for i in 0..nb {
        for j in (i + 1)..nb {
            if boundaries[j] - boundaries[i] >= min_duration {
                seg_cost[i * nb + j] = cost(boundaries[i], boundaries[j]);
            }
        }
    }
    let (best, back) = dp_tables(nb, max_m, |i, j| seg_cost[i * nb + j]);
    select_partition(boundaries, &best, &back, nb, max_m)
}

/// `best[m][j]`: best sum of costs splitting `(0, boundary_j]` into m+1
/// regimes; `back[m][j]` is the start boundary of the last regime.
fn dp_tables(nb: usize, max_m: usize, cost: impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<usize>) {
    let mut best = vec![f64::NEG_INFINITY; (max_m + 1) * nb];
    let mut back = vec![usize::MAX; (max_m + 1) * nb];
    for j in 1..nb {
        best[j] = cost(0, j);
    }
    for m in 1..=max_m {
        let (prev, cur) = best.split_at_mut(m * nb);
        let prev = &prev[(m - 1) * nb..];
        let cur = &mut cur[..nb];
        for j in (m + 1)..nb {
            let mut top = f64::NEG_INFINITY;
            let mut arg = usize::MAX;
            for i in m..j {
                let p = prev[i];
                if p == f64::NEG_INFINITY {
                    continue;
                }
                let v = p + cost(i, j);
                if v > top {
                    top = v;
                    arg = i;
                }
            }
            cur[j] = top;
            back[m * nb + j] = arg;
        }
    }
    (best, back)
}

fn select_partition(
    boundaries: &[usize],
    best: &[f64],
    back: &[usize],
    nb: usize,
    max_m: usize,
) -> (Vec<usize>, Vec<f64>) {
    let last = nb - 1;
    let by_m: Vec<f64> = (0..=max_m).map(|m| best[m * nb + last] - ln_plus(m)).collect();
    let mut m_best = 0;
    for m in 1..=max_m {
        if by_m[m] > by_m[m_best] {
            m_best = m;
        }
    }
    let mut breaks = Vec::with_capacity(m_best);
    let mut j = last;
    for m in (1..=m_best).rev() {
        let i = back[m * nb + j];
        if i == usize::MAX {
            break;
        }
        breaks.push(boundaries[i]);
        j = i;
    }
    breaks.reverse();
    (breaks, by_m)
}

/// Pruned global method: exact optimum over subsets of the scan candidates.
pub fn pgmdl(ds: &TimeSeriesDataset, cfg: &DetectorConfig) -> Result<MethodResult> {
    cfg.validate()?;
    let started = Instant::now();
    let t = ds.len();
    let d = cfg.min_duration_for(ds);
    let candidates = scan_candidates(ds, cfg);
    let mut boundaries = Vec::with_capacity(candidates.len() + 2);
    boundaries.push(0);
    boundaries.extend(candidates.iter().copied());
    boundaries.push(t);
    let max_m = cfg.max_breaks.min(candidates.len());
    let (breaks, by_m) = partition_dp(&boundaries, max_m, d, |a, b| match ds.segment_stats(a, b) {
        Ok(s) => stats_cost(&s, t),
        Err(_) => f64::NEG_INFINITY,
    });
    let diagnostics = Diagnostics { best_by_m: by_m, candidates, ..Default::default() };
    finish(Method::Pgmdl, ds, breaks, started, diagnostics)
}

/// Global method: exact maximization of the MDL marginal likelihood over all
/// segmentations with at most `max_breaks` breaks, by dynamic programming
/// over the table of m-free regime costs.
pub fn gmdl(ds: &TimeSeriesDataset, cfg: &DetectorConfig) -> Result<MethodResult> {
    cfg.validate()?;
    let t = ds.len();
    if t > cfg.gmdl_max_len {
        return Err(Error::Refused(format!(
            "GMDL needs a T×T cost table; T={t} exceeds the cap {} (use PGMDL)",
            cfg.gmdl_max_len
        )));
    }
    let started = Instant::now();
    let d = cfg.min_duration_for(ds);
    let nb = t + 1;
    let max_m = cfg.max_breaks.min((t / d).saturating_sub(1));
    // Row s holds costs of (s, e] for e in s+d..=t.
    let mut offsets = vec![0usize; nb + 1];
    for s in 0..nb {
        let width = if s + d <= t { t - (s + d) + 1 } else { 0 };
        offsets[s + 1] = offsets[s] + width;
    }
    let mut table = vec![f64::NEG_INFINITY; offsets[nb]];
    for s in 0..nb {
        if s + d > t {
            break;
        }
        let row = &mut table[offsets[s]..offsets[s + 1]];
        for (idx, e) in ((s + d)..=t).enumerate() {
            row[idx] = match ds.segment_stats(s, e) {
                Ok(st) => stats_cost(&st, t),
                Err(_) => f64::NEG_INFINITY,
            };
        }
    }
    let cost = |s: usize, e: usize| {
        if e < s + d {
            f64::NEG_INFINITY
        } else {
            table[offsets[s] + (e - s - d)]
        }
    };
    let (best, back) = dp_tables(nb, max_m, cost);
    let boundaries: Vec<usize> = (0..nb).collect();
    let (breaks, by_m) = select_partition(&boundaries, &best, &back, nb, max_m);
    if by_m.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::Degenerate { start: 0, end: t });
    }
    let diagnostics = Diagnostics { best_by_m: by_m, ..Default::default() };
    finish(Method::Gmdl, ds, breaks, started, diagnostics)
}

/// Number of segmentations of `(0, t]` with at most `max_breaks` breaks and
/// every regime at least `min_duration` long.
pub fn count_segmentations(t: usize, max_breaks: usize, min_duration: usize) -> u64 {
    // ways[m][e]: partitions of (0, e] into m+1 admissible regimes
    let d = min_duration.max(1);
    let mut ways = vec![vec![0u64; t + 1]; max_breaks + 1];
    for e in d..=t {
        ways[0][e] = 1;
    }
    for m in 1..=max_breaks {
        for e in 0..=t {
            let mut acc = 0u64;
            for s in d..=e.saturating_sub(d) {
                acc = acc.saturating_add(ways[m - 1][s]);
            }
            ways[m][e] = acc;
        }
    }
    (0..=max_breaks).map(|m| ways[m][t]).fold(0u64, |a, b| a.saturating_add(b))
}

/// Exhaustive search over all admissible segmentations. Ties keep the
/// first segmentation in enumeration order (fewer breaks first, then
/// lexicographic).
pub fn brute_force(ds: &TimeSeriesDataset, cfg: &DetectorConfig) -> Result<MethodResult> {
    cfg.validate()?;
    let t = ds.len();
    let d = cfg.min_duration_for(ds);
    let count = count_segmentations(t, cfg.max_breaks, d);
    if count > cfg.brute_force_limit {
        return Err(Error::Refused(format!(
            "{count} segmentations exceed the brute-force limit {}",
            cfg.brute_force_limit
        )));
    }
    let started = Instant::now();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut by_m = vec![f64::NEG_INFINITY; cfg.max_breaks + 1];
    let mut current = Vec::new();
    for m in 0..=cfg.max_breaks {
        enumerate(t, d, m, 0, &mut current, &mut |breaks| {
            let seg = Segmentation::new(breaks.to_vec(), t).expect("enumeration yields valid breaks");
            let Ok(score) = mdl_marginal_loglik(ds, &seg) else { return };
            if score.value > by_m[m] {
                by_m[m] = score.value;
            }
            if best.as_ref().is_none_or(|(_, b)| score.value > *b) {
                best = Some((breaks.to_vec(), score.value));
            }
        });
    }
    let (breaks, _) = best.ok_or(Error::Degenerate { start: 0, end: t })?;
    let diagnostics = Diagnostics { best_by_m: by_m, ..Default::default() };
    finish(Method::Oracle, ds, breaks, started, diagnostics)
}

fn enumerate(t: usize, d: usize, remaining: usize, prev: usize, current: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
    if remaining == 0 {
        if t - prev >= d {
            visit(current);
        }
        return;
    }
    let lo = prev + d;
    let Some(hi) = t.checked_sub(d * remaining) else { return };
    for b in lo..=hi {
        current.push(b);
        enumerate(t, d, remaining - 1, b, current, visit);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumsum_hand_value() {
        let ds = TimeSeriesDataset::mean_model(vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let v = cumsum_statistic(&ds, 0, 6, 3).unwrap();
        assert!((v + 3.0 / 6f64.sqrt()).abs() < 1e-12);
        assert!(cumsum_statistic(&ds, 0, 6, 6).is_err());
        assert!(cumsum_statistic(&ds, 2, 6, 2).is_err());
    }

    #[test]
    fn cumsum_constant_symmetric_zero() {
        let ds = TimeSeriesDataset::mean_model(vec![2.5; 10]).unwrap();
        assert!(cumsum_statistic(&ds, 0, 10, 5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }

    #[test]
    fn interval_draws_are_admissible_and_cover_all_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..5000 {
            let (a, b) = draw_interval(&mut rng, 10, 30, 5).unwrap();
            assert!(a >= 10 && b <= 30 && b - a >= 10);
            seen.insert((a, b));
        }
        // span 10 -> 11 starts; pairs (a, b) with b − a ≥ 10 inside [10, 30]
        assert_eq!(seen.len(), 11 * 12 / 2);
        assert!(draw_interval(&mut rng, 0, 9, 5).is_none());
    }

    #[test]
    fn counting_matches_enumeration() {
        let mut n = 0u64;
        for m in 0..=1 {
            enumerate(10, 2, m, 0, &mut Vec::new(), &mut |_| n += 1);
        }
        assert_eq!(n, 8);
        assert_eq!(count_segmentations(10, 1, 2), 8);
        for (t, mb, d) in [(20, 3, 3), (15, 2, 1), (30, 4, 5)] {
            let mut n = 0u64;
            for m in 0..=mb {
                enumerate(t, d, m, 0, &mut Vec::new(), &mut |_| n += 1);
            }
            assert_eq!(n, count_segmentations(t, mb, d));
        }
    }

    #[test]
    fn window_maxima_on_monotone_profile() {
        let values: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let got = local_window_maxima(&values, 4, 4, 46);
        assert!(got.len() <= 1);
        let mut bumpy = vec![0.0; 40];
        bumpy[10] = 5.0;
        bumpy[25] = 3.0;
        let got = local_window_maxima(&bumpy, 4, 4, 36);
        assert!(got.contains(&10) && got.contains(&25));
    }

    #[test]
    fn short_series_has_no_breaks() {
        let ds = TimeSeriesDataset::mean_model((0..30).map(|i| (i as f64).sin()).collect()).unwrap();
        let cfg = DetectorConfig { min_duration: Some(16), ..Default::default() };
        let r = binary_segmentation(&ds, &cfg, Statistic::Mdl).unwrap();
        assert_eq!(r.segmentation.n_breaks(), 0);
        assert!(r.diagnostics.steps.is_empty());
    }
}
