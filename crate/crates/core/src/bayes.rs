// SPDX-License-Identifier: MIT OR Apache-2.0

//! Bayesian layer conditional on a detected break count: conjugate regime
//! posteriors, truncated-binomial priors on break dates, a discrete
//! differential-evolution Metropolis sampler for the dates, a one-break
//! out-of-sample prior and predictive path simulation.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::mdl::{calibrate, ln_gamma, mdl_marginal_loglik, CalibratedPrior};
use crate::segstats::{Segmentation, SegmentStats, TimeSeriesDataset};

/// Conjugate posterior of one regime under the calibrated g-prior.
#[derive(Clone, Debug)]
pub struct NigPosterior {
    /// ν̄ = n + ν̲
    pub nu_bar: f64,
    /// s̄ = s̲ + s
    pub s_bar: f64,
    pub beta_bar: Vec<f64>,
    /// Factor g̲/(1+g̲) multiplying σ²(XᵀX)⁻¹.
    pub shrink: f64,
    xtx: Cholesky,
}

impl NigPosterior {
    pub fn new(stats: &SegmentStats, prior: &CalibratedPrior) -> Result<Self> {
        let k = stats.k();
        let xtx = Cholesky::new(&stats.xtx, k).ok_or(Error::Singular { start: stats.start, end: stats.end })?;
        Ok(Self {
            nu_bar: stats.n as f64 + prior.nu_under,
            s_bar: prior.s_under + stats.ssr,
            beta_bar: stats.beta_hat.clone(),
            shrink: 1.0 / (1.0 + 1.0 / prior.g_under),
            xtx,
        })
    }

    /// Posterior for regime `(start, end]` of a segmentation with `m` breaks.
    pub fn for_regime(ds: &TimeSeriesDataset, start: usize, end: usize, m: usize) -> Result<Self> {
        let stats = ds.segment_stats(start, end)?;
        let prior = calibrate(&stats, m, ds.len(), ds.n_regressors())?;
        Self::new(&stats, &prior)
    }

    /// E[σ² | y] = s̄/(ν̄ − 2).
    pub fn sigma2_mean(&self) -> Option<f64> {
        (self.nu_bar > 2.0).then(|| self.s_bar / (self.nu_bar - 2.0))
    }

    /// Row-major (XᵀX)⁻¹ scaled by the shrinkage factor.
    pub fn beta_scale(&self) -> Vec<f64> {
        self.xtx.inverse().into_iter().map(|v| v * self.shrink).collect()
    }

    /// σ² ~ IG(ν̄/2, s̄/2), then β | σ² ~ N(β̄, σ² g̲/(1+g̲) (XᵀX)⁻¹).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let gamma = Gamma::new(self.nu_bar / 2.0, 1.0).expect("nu_bar > 0");
        let sigma2 = (self.s_bar / 2.0) / gamma.sample(rng);
        let z: Vec<f64> = (0..self.beta_bar.len()).map(|_| rng.sample(StandardNormal)).collect();
        let dev = self.xtx.solve_upper(&z);
        let sd = (sigma2 * self.shrink).sqrt();
        let beta = self.beta_bar.iter().zip(&dev).map(|(b, d)| b + sd * d).collect();
        (beta, sigma2)
    }
}

/// One Gibbs draw of (β, σ²) for a regime.
pub fn gibbs_segment_draw<R: Rng + ?Sized>(
    stats: &SegmentStats,
    prior: &CalibratedPrior,
    rng: &mut R,
) -> Result<(Vec<f64>, f64)> {
    Ok(NigPosterior::new(stats, prior)?.draw(rng))
}

/// Truncated binomial priors on the break dates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakPrior {
    pub r: Vec<usize>,
    pub e: Vec<f64>,
    pub support_lo: Vec<usize>,
    pub support_hi: Vec<usize>,
    pub t: usize,
}

/// `rᵢ = ⌊(τ̂ᵢ+τ̂ᵢ₊₁)/2⌋`, `eᵢ = τ̂ᵢ/rᵢ`, support `[⌈(τ̂ᵢ₋₁+τ̂ᵢ)/2⌉, rᵢ]`.
pub fn build_break_prior(tau_hat: &Segmentation) -> Result<BreakPrior> {
    let m = tau_hat.n_breaks();
    if m == 0 {
        return Err(Error::InvalidArgument("break prior needs at least one break".into()));
    }
    let t = tau_hat.sample_size();
    let mut bounds = Vec::with_capacity(m + 2);
    bounds.push(0);
    bounds.extend_from_slice(tau_hat.breaks());
    bounds.push(t);
    let mut prior = BreakPrior {
        r: Vec::with_capacity(m),
        e: Vec::with_capacity(m),
        support_lo: Vec::with_capacity(m),
        support_hi: Vec::with_capacity(m),
        t,
    };
    for i in 1..=m {
        let r = (bounds[i] + bounds[i + 1]) / 2;
        let e = bounds[i] as f64 / r as f64;
        if !(e > 0.0 && e < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "break {} at {} gives success probability {e} outside (0, 1)",
                i, bounds[i]
            )));
        }
        prior.r.push(r);
        prior.e.push(e);
        prior.support_lo.push((bounds[i - 1] + bounds[i]).div_ceil(2));
        prior.support_hi.push(r);
    }
    Ok(prior)
}

fn ln_binomial_pmf(k: usize, r: usize, e: f64) -> f64 {
    if k > r {
        return f64::NEG_INFINITY;
    }
    let (kf, rf) = (k as f64, r as f64);
    ln_gamma(rf + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(rf - kf + 1.0) + kf * e.ln() + (rf - kf) * (1.0 - e).ln()
}

impl BreakPrior {
    pub fn n_breaks(&self) -> usize {
        self.r.len()
    }

    pub fn in_support(&self, tau: &[usize]) -> bool {
        tau.len() == self.n_breaks()
            && tau.iter().enumerate().all(|(i, &v)| v >= self.support_lo[i] && v <= self.support_hi[i])
    }

    /// Unnormalized log prior of break `i` at date `k`.
    pub fn ln_pmf(&self, i: usize, k: usize) -> f64 {
        if k < self.support_lo[i] || k > self.support_hi[i] {
            return f64::NEG_INFINITY;
        }
        ln_binomial_pmf(k, self.r[i], self.e[i])
    }

    /// Normalized pmf of break `i` over its support.
    pub fn pmf(&self, i: usize) -> Vec<(usize, f64)> {
        let lp: Vec<(usize, f64)> =
            (self.support_lo[i]..=self.support_hi[i]).map(|k| (k, self.ln_pmf(i, k))).collect();
        let top = lp.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = lp.iter().map(|p| (p.1 - top).exp()).sum();
        lp.into_iter().map(|(k, v)| (k, (v - top).exp() / z)).collect()
    }

    /// Independent draw from each truncated marginal.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.n_breaks())
            .map(|i| {
                let pmf = self.pmf(i);
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(k, p) in &pmf {
                    acc += p;
                    if u < acc {
                        return k;
                    }
                }
                pmf.last().map(|p| p.0).unwrap_or(self.support_hi[i])
            })
            .collect()
    }
}

/// Unnormalized log posterior of break dates: MDL marginal log-likelihood
/// plus binomial log prior. `-inf` outside the supports, for unordered dates
/// or for regimes that cannot be fitted.
pub fn log_posterior_tau(ds: &TimeSeriesDataset, tau: &[usize], prior: &BreakPrior) -> f64 {
    if !prior.in_support(tau) || tau.windows(2).any(|w| w[0] >= w[1]) || prior.t != ds.len() {
        return f64::NEG_INFINITY;
    }
    let Ok(seg) = Segmentation::new(tau.to_vec(), ds.len()) else {
        return f64::NEG_INFINITY;
    };
    let Ok(score) = mdl_marginal_loglik(ds, &seg) else {
        return f64::NEG_INFINITY;
    };
    score.value + tau.iter().enumerate().map(|(i, &k)| prior.ln_pmf(i, k)).sum::<f64>()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    /// `None` discards the first half.
    pub burn_in: Option<usize>,
    /// Keep every `thin`-th post-burn-in sweep.
    pub thin: usize,
    /// Standard deviation of the Gaussian jitter added before rounding.
    pub jitter_sd: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { chains: 10, iterations: 1000, burn_in: None, thin: 1, jitter_sd: 0.01, seed: 0 }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.chains < 7 {
            return Err(Error::InvalidArgument(format!(
                "differential-evolution moves need at least 7 chains, got {}",
                self.chains
            )));
        }
        if self.iterations == 0 || self.thin == 0 {
            return Err(Error::InvalidArgument("iterations and thin must be positive".into()));
        }
        if self.burn_in.is_some_and(|b| b >= self.iterations) {
            return Err(Error::InvalidArgument("burn-in must be smaller than iterations".into()));
        }
        if !(self.jitter_sd >= 0.0) {
            return Err(Error::InvalidArgument("jitter_sd must be >= 0".into()));
        }
        Ok(())
    }

    pub fn burn(&self) -> usize {
        self.burn_in.unwrap_or(self.iterations / 2)
    }
}

/// Scale of the differential move, `2.38/√(2δm)`.
pub fn ddream_gamma(delta: usize, m: usize) -> f64 {
    2.38 / ((2 * delta * m) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakDraws {
    /// Pooled post-burn-in draws, one row per retained chain state.
    pub draws: Vec<Vec<usize>>,
    pub acceptance: Vec<f64>,
    pub iterations: usize,
    pub burn_in: usize,
}

impl BreakDraws {
    pub fn pooled_acceptance(&self) -> f64 {
        self.acceptance.iter().sum::<f64>() / self.acceptance.len().max(1) as f64
    }

    /// Draws of break `i` as reals.
    pub fn column(&self, i: usize) -> Vec<f64> {
        self.draws.iter().map(|d| d[i] as f64).collect()
    }
}

/// Multi-chain differential-evolution Metropolis sampler over break dates.
///
/// Each sweep updates the chains in index order. Chain `j` proposes
/// `τⱼ + round(γ(δ,m)(Σ τ_{r₁} − Σ τ_{r₂}) + ξ)` from the current states of
/// `2δ` other chains, so chains earlier in the sweep contribute their new
/// positions, and accepts with the Metropolis ratio.
pub fn ddream_sample(ds: &TimeSeriesDataset, prior: &BreakPrior, cfg: &SamplerConfig) -> Result<BreakDraws> {
    cfg.validate()?;
    let m = prior.n_breaks();
    if m == 0 {
        return Err(Error::InvalidArgument("sampler needs at least one break".into()));
    }
    if prior.t != ds.len() {
        return Err(Error::DimensionMismatch(format!(
            "prior is for T={} but dataset has T={}",
            prior.t,
            ds.len()
        )));
    }
    let r = cfg.chains;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut chains = Vec::with_capacity(r);
    let mut logp = Vec::with_capacity(r);
    for _ in 0..r {
        let (state, lp) = init_chain(ds, prior, &mut rng)?;
        chains.push(state);
        logp.push(lp);
    }
    let burn = cfg.burn();
    let mut accepted = vec![0usize; r];
    let kept = (cfg.iterations - burn).div_ceil(cfg.thin) * r;
    let mut draws = Vec::with_capacity(kept);
    let mut z = vec![0usize; m];
    for it in 0..cfg.iterations {
        for j in 0..r {
            let delta = rng.random_range(1..=3usize);
            let picks = index::sample(&mut rng, r - 1, 2 * delta);
            let other = |p: usize| if p >= j { p + 1 } else { p };
            let gamma = ddream_gamma(delta, m);
            let mut valid = true;
            for (c, zc) in z.iter_mut().enumerate() {
                let mut diff = 0.0;
                for g in 0..delta {
                    diff += chains[other(picks.index(g))][c] as f64;
                    diff -= chains[other(picks.index(delta + g))][c] as f64;
                }
                let xi: f64 = cfg.jitter_sd * rng.sample::<f64, _>(StandardNormal);
                let step = (gamma * diff + xi).round();
                let prop = chains[j][c] as f64 + step;
                if prop < 1.0 || prop >= ds.len() as f64 {
                    valid = false;
                    *zc = 0;
                } else {
                    *zc = prop as usize;
                }
            }
            let lp_new = if valid { log_posterior_tau(ds, &z, prior) } else { f64::NEG_INFINITY };
            let u: f64 = rng.random();
            if lp_new > f64::NEG_INFINITY && u.ln() < lp_new - logp[j] {
                chains[j].copy_from_slice(&z);
                logp[j] = lp_new;
                accepted[j] += 1;
            }
            debug_assert!(prior.in_support(&chains[j]));
        }
        if it >= burn && (it - burn).is_multiple_of(cfg.thin) {
            draws.extend(chains.iter().cloned());
        }
    }
    Ok(BreakDraws {
        draws,
        acceptance: accepted.iter().map(|&a| a as f64 / cfg.iterations as f64).collect(),
        iterations: cfg.iterations,
        burn_in: burn,
    })
}

fn init_chain(ds: &TimeSeriesDataset, prior: &BreakPrior, rng: &mut ChaCha8Rng) -> Result<(Vec<usize>, f64)> {
    for _ in 0..1000 {
        let state = prior.draw(rng);
        let lp = log_posterior_tau(ds, &state, prior);
        if lp > f64::NEG_INFINITY {
            return Ok((state, lp));
        }
    }
    Err(Error::InvalidArgument("could not draw a valid initial break vector from the prior".into()))
}

/// Exact normalized posterior over all admissible break vectors, for
/// fixtures with at most `limit` states.
pub fn enumerate_posterior(ds: &TimeSeriesDataset, prior: &BreakPrior, limit: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let size: usize = (0..prior.n_breaks())
        .map(|i| prior.support_hi[i] - prior.support_lo[i] + 1)
        .try_fold(1usize, |acc, w| acc.checked_mul(w))
        .unwrap_or(usize::MAX);
    if size > limit {
        return Err(Error::Refused(format!("{size} break configurations exceed the limit {limit}")));
    }
    let mut states = Vec::new();
    let mut cur = prior.support_lo.clone();
    loop {
        let lp = log_posterior_tau(ds, &cur, prior);
        if lp > f64::NEG_INFINITY {
            states.push((cur.clone(), lp));
        }
        let mut i = prior.n_breaks();
        loop {
            if i == 0 {
                let top = states.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = states.iter().map(|s| (s.1 - top).exp()).sum();
                return Ok(states.into_iter().map(|(s, v)| (s, (v - top).exp() / z)).collect());
            }
            i -= 1;
            if cur[i] < prior.support_hi[i] {
                cur[i] += 1;
                break;
            }
            cur[i] = prior.support_lo[i];
        }
    }
}

/// One-break out-of-sample prior built from in-sample regime estimates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FutureBreakPrior {
    /// Per-period break probability m/T.
    pub geom_rate: f64,
    pub beta_mean: Vec<f64>,
    /// Diagonal of the across-regime sample variance of the OLS estimates.
    pub beta_var: Vec<f64>,
    pub sigma2_shape: f64,
    pub sigma2_scale: f64,
}

impl FutureBreakPrior {
    /// Needs at least two in-sample breaks.
    pub fn from_segments(stats: &[SegmentStats], t: usize) -> Result<Self> {
        let m = stats.len().saturating_sub(1);
        if m < 2 {
            return Err(Error::InvalidArgument(format!(
                "future-break prior needs at least 2 in-sample breaks, got {m}"
            )));
        }
        let k = stats[0].k();
        let p = stats.len() as f64;
        let beta_mean: Vec<f64> = (0..k).map(|c| stats.iter().map(|s| s.beta_hat[c]).sum::<f64>() / p).collect();
        let beta_var = (0..k)
            .map(|c| stats.iter().map(|s| (s.beta_hat[c] - beta_mean[c]).powi(2)).sum::<f64>() / (p - 1.0))
            .collect();
        let mean_s = stats.iter().map(|s| s.ssr).sum::<f64>() / p;
        Ok(Self {
            geom_rate: m as f64 / t as f64,
            beta_mean,
            beta_var,
            sigma2_shape: t as f64 / 2.0,
            sigma2_scale: mean_s / 2.0,
        })
    }

    pub fn for_segmentation(ds: &TimeSeriesDataset, seg: &Segmentation) -> Result<Self> {
        let stats = seg
            .segments()
            .into_iter()
            .map(|(a, b)| ds.segment_stats(a, b))
            .collect::<Result<Vec<_>>>()?;
        Self::from_segments(&stats, ds.len())
    }

    /// Periods after T until the break, at least 1.
    pub fn draw_delay<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        Geometric::new(self.geom_rate).expect("rate in (0, 1)").sample(rng) + 1
    }

    pub fn draw_regime<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, f64) {
        let beta = self
            .beta_mean
            .iter()
            .zip(&self.beta_var)
            .map(|(mu, v)| mu + v.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let gamma = Gamma::new(self.sigma2_shape, 1.0).expect("shape > 0");
        (beta, self.sigma2_scale / gamma.sample(rng))
    }
}

/// Predictive path simulator for AR (or intercept-only) datasets.
///
/// Regime parameters come from the terminal regime's posterior; lags start
/// from the last observed values and each simulated value feeds the next
/// step.
pub struct PathSimulator<'a> {
    posterior: NigPosterior,
    history: &'a [f64],
    order: usize,
    future: Option<&'a FutureBreakPrior>,
}

impl<'a> PathSimulator<'a> {
    pub fn new(ds: &'a TimeSeriesDataset, seg: &Segmentation, future: Option<&'a FutureBreakPrior>) -> Result<Self> {
        let order = match ds.ar_order() {
            Some(p) => p,
            None if ds.n_regressors() == 1 => 0,
            None => {
                return Err(Error::InvalidArgument(
                    "predictive simulation needs an AR or intercept-only design".into(),
                ))
            }
        };
        if seg.sample_size() != ds.len() {
            return Err(Error::InvalidSegmentation("segmentation does not match dataset".into()));
        }
        let start = seg.breaks().last().copied().unwrap_or(0);
        let posterior = NigPosterior::for_regime(ds, start, ds.len(), seg.n_breaks())?;
        Ok(Self { posterior, history: ds.y(), order, future })
    }

    /// One path `y_{T+1..T+h}`.
    pub fn draw<R: Rng + ?Sized>(&self, h: usize, rng: &mut R) -> Vec<f64> {
        let (mut beta, mut sigma2) = self.posterior.draw(rng);
        let switch_after = self.future.map(|f| f.draw_delay(rng));
        let p = self.order;
        let mut lags: Vec<f64> = self.history[self.history.len().saturating_sub(p)..].to_vec();
        let mut path = Vec::with_capacity(h);
        for step in 1..=h {
            if let (Some(f), Some(d)) = (self.future, switch_after) {
                if step as u64 == d + 1 {
                    (beta, sigma2) = f.draw_regime(rng);
                }
            }
            let mut mean = beta[0];
            for lag in 1..=p {
                mean += beta[lag] * lags[lags.len() - lag];
            }
            let y = mean + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal);
            path.push(y);
            if p > 0 {
                lags.push(y);
            }
        }
        path
    }

    pub fn draw_many<R: Rng + ?Sized>(&self, h: usize, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.draw(h, rng)).collect()
    }
}

/// Weighted equal-tailed interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
}

/// Smallest value whose cumulative weight reaches `q` of the total.
pub fn weighted_quantile(values: &[f64], weights: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(Error::InvalidArgument("quantile needs matching nonempty values and weights".into()));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("weights must have positive total".into()));
    }
    let target = q.clamp(0.0, 1.0) * total;
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= target * (1.0 - 1e-12) {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("nonempty")])
}

pub fn credible_interval(values: &[f64], weights: Option<&[f64]>, level: f64) -> Result<CredibleInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!("credible level {level} outside (0, 1)")));
    }
    let uniform;
    let w = match weights {
        Some(w) => w,
        None => {
            uniform = vec![1.0; values.len()];
            &uniform
        }
    };
    let tail = (1.0 - level) / 2.0;
    Ok(CredibleInterval {
        lo: weighted_quantile(values, w, tail)?,
        hi: weighted_quantile(values, w, 1.0 - tail)?,
        level,
    })
}

/// Interval for every break date from pooled sampler draws.
pub fn break_credible_intervals(draws: &BreakDraws, level: f64) -> Result<Vec<CredibleInterval>> {
    let m = draws.draws.first().map(|d| d.len()).unwrap_or(0);
    (0..m).map(|i| credible_interval(&draws.column(i), None, level)).collect()
}

/// One `(beta, sigma2)` draw.
pub type ParamDraw = (Vec<f64>, f64);

/// Posterior parameter draws of each regime, given break dates.
pub fn regime_parameter_draws<R: Rng + ?Sized>(
    ds: &TimeSeriesDataset,
    seg: &Segmentation,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<ParamDraw>>> {
    let m = seg.n_breaks();
    seg.segments()
        .into_iter()
        .map(|(a, b)| {
            let post = NigPosterior::for_regime(ds, a, b, m)?;
            Ok((0..n).map(|_| post.draw(rng)).collect())
        })
        .collect()
}
