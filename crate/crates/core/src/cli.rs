// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command-line front end. Every command writes one JSON [`Envelope`];
//! break dates in inputs and outputs are 1-based dates of the raw series.

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::time::Instant;

use crate::bayes::{
    break_credible_intervals, build_break_prior, credible_interval, ddream_sample, FutureBreakPrior, NigPosterior,
    SamplerConfig,
};
use crate::detect::{detect, DetectorConfig, Method, MethodResult};
use crate::error::{Error, Result};
use crate::io::{emit, read_csv, Envelope};
use crate::mdl::{mdl_criterion, mdl_marginal_loglik};
use crate::segstats::{Segmentation, TimeSeriesDataset};
use crate::select::{forecast_harness, ForecastSpec, ModelEnsemble};
use crate::simlab::{posterior_prob_study, random_regression_fixture, run_replications, DgpId, DgpSpec, StudyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "breakscope", version, about = "Change-point detection with the MDL marginal likelihood")]
struct Cli {
    /// Worker threads (BREAKSCOPE_THREADS takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Detect change points in a series or regression.
    Detect(DetectArgs),
    /// Replication study on a benchmark DGP.
    Simulate(SimulateArgs),
    /// Sample break dates and regime parameters given detected breaks.
    Sample(SampleArgs),
    /// Expanding-window forecast evaluation.
    Forecast(ForecastArgs),
    /// Exhaustive search over all segmentations (small inputs only).
    Oracle(OracleArgs),
    /// Compare the MDL criterion with the calibrated marginal likelihood.
    EquivCheck(EquivArgs),
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// CSV file; first column is the series, other columns are covariates.
    #[arg(long)]
    input: PathBuf,
    /// Fit an AR(p) on the first column instead of the covariate columns.
    #[arg(long, default_value_t = 0)]
    ar_order: usize,
    /// Do not prepend an intercept column (the first covariate must be it).
    #[arg(long)]
    no_intercept: bool,
}

impl DataArgs {
    fn load(&self) -> Result<TimeSeriesDataset> {
        let table = read_csv(&self.input)?;
        if self.ar_order > 0 {
            TimeSeriesDataset::autoregressive(table.series(), self.ar_order)
        } else {
            table.regression(self.no_intercept)
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct DetectorArgs {
    /// Split threshold on the log Bayes factor scale.
    #[arg(long, default_value_t = 3.0)]
    threshold: f64,
    /// Threshold for the cumsum detectors (default: universal threshold).
    #[arg(long)]
    cumsum_threshold: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 50)]
    max_breaks: usize,
    #[arg(long)]
    min_duration: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    wbs_intervals: usize,
    #[arg(long)]
    scan_radius: Option<usize>,
    #[arg(long, default_value_t = 8192)]
    gmdl_max_len: usize,
}

impl DetectorArgs {
    fn config(&self, seed: u64) -> DetectorConfig {
        DetectorConfig {
            threshold_delta: self.threshold,
            cumsum_threshold: self.cumsum_threshold,
            wbs_intervals: self.wbs_intervals,
            min_duration: self.min_duration,
            max_breaks: self.max_breaks,
            scan_radius: self.scan_radius,
            rng_seed: seed,
            gmdl_max_len: self.gmdl_max_len,
            ..DetectorConfig::default()
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct DetectArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated methods, or `all`.
    #[arg(long, default_value = "bsmdl")]
    method: String,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    dgp: String,
    #[arg(long = "T", default_value_t = 1024)]
    t: usize,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value = "bsmdl,gmdl")]
    methods: String,
    /// Also report average posterior probabilities across the methods.
    #[arg(long)]
    posterior: bool,
    #[arg(long, default_value_t = 50)]
    exact_tolerance: usize,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated 1-based break dates.
    #[arg(long)]
    breaks: String,
    #[arg(long, default_value_t = 1000)]
    iters: usize,
    #[arg(long, default_value_t = 10)]
    chains: usize,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Parameter draws per regime.
    #[arg(long, default_value_t = 2000)]
    param_draws: usize,
    /// Include the one-break out-of-sample prior (needs at least 2 breaks).
    #[arg(long)]
    future_break: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ForecastArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "1,2")]
    ar: String,
    #[arg(long, default_value = "bsmdl,wbsmdl,pgmdl")]
    methods: String,
    #[arg(long, default_value = "1,3,6,12")]
    horizons: String,
    #[arg(long, default_value_t = 0.1)]
    start_frac: f64,
    #[arg(long, default_value_t = 1)]
    origin_step: usize,
    #[arg(long, default_value_t = 500)]
    draws: usize,
    #[arg(long)]
    future_break: bool,
    /// Per-origin squared errors as CSV.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 3)]
    max_breaks: usize,
    #[arg(long)]
    min_duration: Option<usize>,
    #[arg(long, default_value_t = 10_000_000)]
    limit: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EquivArgs {
    /// Check one segmentation of this file instead of random fixtures.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    ar_order: usize,
    #[arg(long)]
    no_intercept: bool,
    /// 1-based break dates for `--input`.
    #[arg(long, default_value = "")]
    breaks: String,
    #[arg(long, default_value_t = 100)]
    fixtures: usize,
    #[arg(long, default_value_t = 30)]
    min_n: usize,
    #[arg(long, default_value_t = 200)]
    max_n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(|_| Error::InvalidArgument(format!("bad {what} '{p}'"))))
        .collect()
}

fn parse_methods(s: &str) -> Result<Vec<Method>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(Method::ALL.to_vec());
    }
    let v: Vec<Method> = parse_list(s, "method")?;
    if v.is_empty() {
        return Err(Error::InvalidArgument("no methods given".into()));
    }
    Ok(v)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos() as u64)
            .unwrap_or(0);
        nanos ^ ((std::process::id() as u64) << 32)
    })
}

fn echo<T: Serialize>(args: &T, seed: Option<u64>) -> Value {
    let mut v = serde_json::to_value(args).unwrap_or(Value::Null);
    if let (Some(s), Some(obj)) = (seed, v.as_object_mut()) {
        obj.insert("seed".into(), json!(s));
    }
    v
}

/// Detector output in raw-series time.
pub fn result_json(ds: &TimeSeriesDataset, r: &MethodResult) -> Value {
    let off = ds.time_offset();
    let segments: Vec<Value> = r
        .segmentation
        .segments()
        .into_iter()
        .map(|(a, b)| match ds.segment_stats(a, b) {
            Ok(s) => json!({"start": a + off + 1, "end": b + off, "beta": s.beta_hat, "sigma2": s.sigma2_mle()}),
            Err(_) => json!({"start": a + off + 1, "end": b + off, "beta": Value::Null, "sigma2": Value::Null}),
        })
        .collect();
    let steps: Vec<Value> = r
        .diagnostics
        .steps
        .iter()
        .map(|s| {
            json!({
                "start": s.start + off + 1,
                "end": s.end + off,
                "candidate": s.candidate + off,
                "statistic": s.statistic,
                "accepted": s.accepted,
            })
        })
        .collect();
    json!({
        "method": r.method.name(),
        "breaks": r.breaks().iter().map(|b| b + off).collect::<Vec<_>>(),
        "score": r.score.value,
        "per_segment_params": segments,
        "runtime_ms": r.runtime_ms,
        "diagnostics": {
            "steps": steps,
            "threshold": r.diagnostics.threshold,
            "best_by_m": r.diagnostics.best_by_m.iter().map(|v| if v.is_finite() { json!(v) } else { Value::Null }).collect::<Vec<_>>(),
            "candidates": r.diagnostics.candidates.iter().map(|c| c + off).collect::<Vec<_>>(),
        },
    })
}

fn to_internal(ds: &TimeSeriesDataset, dates: &[usize]) -> Result<Segmentation> {
    let off = ds.time_offset();
    let internal = dates
        .iter()
        .map(|&d| {
            d.checked_sub(off).filter(|&v| v > 0).ok_or_else(|| {
                Error::InvalidSegmentation(format!("break {d} falls in the {off}-observation presample"))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Segmentation::new(internal, ds.len())
}

fn cmd_detect(a: &DetectArgs) -> Result<Envelope> {
    let started = Instant::now();
    let methods = parse_methods(&a.method)?;
    let seed = resolve_seed(a.detector.seed);
    let cfg = a.detector.config(seed);
    cfg.validate()?;
    let ds = a.data.load()?;
    let mut out = Vec::new();
    let mut ok = Vec::new();
    for m in methods {
        match detect(&ds, &cfg, m) {
            Ok(r) => {
                out.push(result_json(&ds, &r));
                ok.push(r);
            }
            Err(e @ Error::Refused(_)) => out.push(json!({"method": m.name(), "error": e.to_string()})),
            Err(e) => return Err(e),
        }
    }
    let mut results = json!({ "methods": out });
    if let Ok(ens) = ModelEnsemble::new(ok) {
        results["posterior"] = json!(ens
            .candidates
            .iter()
            .zip(&ens.posterior)
            .map(|(c, p)| json!({"method": c.method.name(), "probability": p}))
            .collect::<Vec<_>>());
        results["selected"] = json!(ens.best().method.name());
    }
    Ok(Envelope::new("detect", echo(a, Some(seed)), results, started.elapsed().as_millis() as u64))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Envelope> {
    let started = Instant::now();
    let id: DgpId = a.dgp.parse()?;
    let methods = parse_methods(&a.methods)?;
    let seed = resolve_seed(a.detector.seed);
    let study = StudyConfig { detector: a.detector.config(seed), exact_tolerance: a.exact_tolerance, ..Default::default() };
    let spec = DgpSpec::at_length(id, a.t);
    let report = run_replications(&spec, &methods, a.reps, a.t, seed, &study)?;
    let mut results = serde_json::to_value(&report).map_err(|e| Error::Io(e.to_string()))?;
    if a.posterior {
        let post = posterior_prob_study(&spec, &methods, a.reps, a.t, seed, &study)?;
        results["posterior_study"] = serde_json::to_value(&post).map_err(|e| Error::Io(e.to_string()))?;
    }
    Ok(Envelope::new("simulate", echo(a, Some(seed)), results, started.elapsed().as_millis() as u64))
}

fn interval_json(values: &[f64], level: f64) -> Result<Value> {
    let ci = credible_interval(values, None, level)?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(json!({"mean": mean, "lo": ci.lo, "hi": ci.hi}))
}

fn cmd_sample(a: &SampleArgs) -> Result<Envelope> {
    let started = Instant::now();
    let seed = resolve_seed(a.seed);
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(Error::InvalidArgument("--level must lie in (0, 1)".into()));
    }
    let cfg = SamplerConfig { chains: a.chains, iterations: a.iters, burn_in: a.burn_in, thin: a.thin, seed, ..Default::default() };
    let ds = a.data.load()?;
    let off = ds.time_offset();
    let tau_hat = to_internal(&ds, &parse_list(&a.breaks, "break date")?)?;
    let prior = build_break_prior(&tau_hat)?;
    let draws = ddream_sample(&ds, &prior, &cfg)?;
    let intervals = break_credible_intervals(&draws, a.level)?;
    let m = tau_hat.n_breaks();

    // Regime parameters integrated over the sampled break dates.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let k = ds.n_regressors();
    let mut per_regime: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); k + 1]; m + 1];
    for _ in 0..a.param_draws {
        let tau = &draws.draws[rng.random_range(0..draws.draws.len())];
        let seg = Segmentation::new(tau.clone(), ds.len())?;
        for (i, (s, e)) in seg.segments().into_iter().enumerate() {
            let (beta, s2) = NigPosterior::for_regime(&ds, s, e, m)?.draw(&mut rng);
            for (c, b) in beta.into_iter().enumerate() {
                per_regime[i][c].push(b);
            }
            per_regime[i][k].push(s2);
        }
    }
    let regimes = per_regime
        .iter()
        .enumerate()
        .map(|(i, cols)| {
            Ok(json!({
                "regime": i + 1,
                "beta": cols[..k].iter().map(|c| interval_json(c, a.level)).collect::<Result<Vec<_>>>()?,
                "sigma2": interval_json(&cols[k], a.level)?,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut results = json!({
        "breaks_hat": tau_hat.breaks().iter().map(|b| b + off).collect::<Vec<_>>(),
        "prior": {
            "r": prior.r.iter().map(|r| r + off).collect::<Vec<_>>(),
            "e": prior.e,
            "support_lo": prior.support_lo.iter().map(|v| v + off).collect::<Vec<_>>(),
            "support_hi": prior.support_hi.iter().map(|v| v + off).collect::<Vec<_>>(),
        },
        "acceptance": draws.acceptance,
        "pooled_acceptance": draws.pooled_acceptance(),
        "burn_in": draws.burn_in,
        "draws": draws.draws.iter().map(|d| d.iter().map(|v| v + off).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "break_intervals": intervals.iter().map(|c| json!({"lo": c.lo as usize + off, "hi": c.hi as usize + off, "level": c.level})).collect::<Vec<_>>(),
        "regimes": regimes,
    });
    if a.future_break {
        let fb = FutureBreakPrior::for_segmentation(&ds, &tau_hat)?;
        let mut cols = vec![Vec::new(); k + 1];
        for _ in 0..a.param_draws {
            let (beta, s2) = fb.draw_regime(&mut rng);
            for (c, b) in beta.into_iter().enumerate() {
                cols[c].push(b);
            }
            cols[k].push(s2);
        }
        results["future_break"] = json!({
            "prior": fb,
            "beta": cols[..k].iter().map(|c| interval_json(c, a.level)).collect::<Result<Vec<_>>>()?,
            "sigma2": interval_json(&cols[k], a.level)?,
        });
    }
    Ok(Envelope::new("sample", echo(a, Some(seed)), results, started.elapsed().as_millis() as u64))
}

fn cmd_forecast(a: &ForecastArgs) -> Result<Envelope> {
    let started = Instant::now();
    let seed = resolve_seed(a.detector.seed);
    let spec = ForecastSpec {
        ar_orders: parse_list(&a.ar, "AR order")?,
        methods: parse_methods(&a.methods)?,
        horizons: parse_list(&a.horizons, "horizon")?,
        start_frac: a.start_frac,
        origin_step: a.origin_step,
        future_break: a.future_break,
        draws_per_model: a.draws,
        detector: a.detector.config(seed),
        seed,
    };
    let table = read_csv(&a.input)?;
    let report = forecast_harness(table.series(), &spec)?;
    if let Some(p) = &a.loss_csv {
        let f = std::fs::File::create(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        report.write_loss_csv(f)?;
    }
    for (origin, why) in &report.skipped {
        eprintln!("warning: skipped origin {origin}: {why}");
    }
    let results = json!({
        "models": report.models,
        "horizons": report.horizons,
        "summary": report.summary,
        "n_origins": report.origins.len(),
        "skipped": report.skipped.iter().map(|(o, w)| json!({"origin": o, "reason": w})).collect::<Vec<_>>(),
    });
    Ok(Envelope::new("forecast", echo(a, Some(seed)), results, started.elapsed().as_millis() as u64))
}

fn cmd_oracle(a: &OracleArgs) -> Result<Envelope> {
    let started = Instant::now();
    let ds = a.data.load()?;
    let cfg = DetectorConfig {
        max_breaks: a.max_breaks,
        min_duration: a.min_duration,
        brute_force_limit: a.limit,
        ..DetectorConfig::default()
    };
    cfg.validate()?;
    let r = detect(&ds, &cfg, Method::Oracle)?;
    Ok(Envelope::new("oracle", echo(a, None), json!({"methods": [result_json(&ds, &r)]}), started.elapsed().as_millis() as u64))
}

fn equiv_row(ds: &TimeSeriesDataset, seg: &Segmentation) -> Result<Value> {
    let lm = mdl_marginal_loglik(ds, seg)?.value;
    let mdl = mdl_criterion(ds, seg)?.value;
    let off = ds.time_offset();
    Ok(json!({
        "t": ds.len(),
        "k": ds.n_regressors(),
        "breaks": seg.breaks().iter().map(|b| b + off).collect::<Vec<_>>(),
        "min_n": seg.min_segment_length(),
        "log_marginal": lm,
        "mdl": mdl,
        "abs_diff": (lm - mdl).abs(),
    }))
}

fn cmd_equiv(a: &EquivArgs) -> Result<Envelope> {
    let started = Instant::now();
    let mut rows = Vec::new();
    let seed = if a.input.is_some() { None } else { Some(resolve_seed(a.seed)) };
    if let Some(path) = &a.input {
        let data = DataArgs { input: path.clone(), ar_order: a.ar_order, no_intercept: a.no_intercept };
        let ds = data.load()?;
        let seg = to_internal(&ds, &parse_list(&a.breaks, "break date")?)?;
        rows.push(equiv_row(&ds, &seg)?);
    } else {
        if a.min_n < 4 || a.max_n < a.min_n {
            return Err(Error::InvalidArgument("need 4 <= --min-n <= --max-n".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed.expect("set above"));
        for _ in 0..a.fixtures {
            let k = rng.random_range(1..=3);
            let m = rng.random_range(0..=3);
            let (ds, seg) = random_regression_fixture(&mut rng, k, m, a.min_n.max(k + 2), a.max_n)?;
            rows.push(equiv_row(&ds, &seg)?);
        }
    }
    let max_diff = rows.iter().filter_map(|r| r["abs_diff"].as_f64()).fold(0.0, f64::max);
    let results = json!({"fixtures": rows, "max_abs_diff": max_diff});
    Ok(Envelope::new("equiv-check", echo(a, seed), results, started.elapsed().as_millis() as u64))
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match std::env::var("BREAKSCOPE_THREADS") {
        Ok(v) => Some(
            v.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("BREAKSCOPE_THREADS='{v}' is not a count")))?,
        ),
        Err(_) => flag,
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidArgument("thread count must be positive".into()));
        }
        // Fails only when a pool already exists in this process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Exit code for an error: 1 for usage problems, 2 for data problems.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    let (outcome, output) = match &cli.command {
        Command::Detect(a) => (cmd_detect(a), a.output.clone()),
        Command::Simulate(a) => (cmd_simulate(a), a.output.clone()),
        Command::Sample(a) => (cmd_sample(a), a.output.clone()),
        Command::Forecast(a) => (cmd_forecast(a), a.output.clone()),
        Command::Oracle(a) => (cmd_oracle(a), a.output.clone()),
        Command::EquivCheck(a) => (cmd_equiv(a), a.output.clone()),
    };
    match outcome.and_then(|env| emit(&env, output.as_deref())) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
