// SPDX-License-Identifier: MIT OR Apache-2.0

//! Acceptance suite. Runs every criterion and prints one PASS/FAIL line
//! each. With `ACCEPTANCE_STRICT=1` any failure also fails the process.

mod common;

use breakscope::bayes::{build_break_prior, ddream_sample, enumerate_posterior, gibbs_segment_draw, SamplerConfig};
use breakscope::detect::{brute_force, gmdl};
use breakscope::mdl::{calibrate, calibrated_variance_mode_mean, mdl_criterion, mdl_marginal_loglik, segment_log_marginal};
use breakscope::select::{forecast_harness, posterior_probabilities, sel, ForecastSpec};
use breakscope::simlab::{
    dgp_dataset, random_regression_fixture, replication_seed, run_replications, simulate_dgp, DgpId, DgpSpec,
    StudyConfig,
};
use breakscope::{detect, DetectorConfig, Method, Segmentation};
use rand::Rng;
use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: u64) -> (bool, String) {
    (elapsed.as_secs_f64() < limit_s as f64, format!("{:.1}s (limit {limit_s}s)", elapsed.as_secs_f64()))
}

fn equivalence() -> Outcome {
    let started = Instant::now();
    let mut r = common::rng(1001);
    let (mut worst30, mut worst100) = (0.0f64, 0.0f64);
    for i in 0..500 {
        let k = 1 + i % 3;
        let m = r.random_range(0..=3);
        let min_n = if i % 2 == 0 { 30 } else { 100 };
        let (ds, seg) = random_regression_fixture(&mut r, k, m, min_n, 3 * min_n).unwrap();
        let d = (mdl_marginal_loglik(&ds, &seg).unwrap().value - mdl_criterion(&ds, &seg).unwrap().value).abs();
        if min_n == 30 {
            worst30 = worst30.max(d);
        } else {
            worst100 = worst100.max(d);
        }
    }
    let (fast, time) = within(started.elapsed(), 10);
    outcome(
        worst30 <= 1e-4 && worst100 <= 1e-6 && fast,
        format!("max |diff| {worst30:.2e} (min n 30), {worst100:.2e} (min n 100); {time}"),
    )
}

fn gmdl_exactness() -> Outcome {
    let started = Instant::now();
    let mut mismatches = 0;
    let mut worst = 0.0f64;
    for seed in 0..50 {
        let (ds, _) = common::small_fixture(5000 + seed);
        let cfg = DetectorConfig { min_duration: Some(5), max_breaks: 3, ..Default::default() };
        let g = gmdl(&ds, &cfg).unwrap();
        let b = brute_force(&ds, &cfg).unwrap();
        let d = (g.log_ml() - b.log_ml()).abs();
        worst = worst.max(d);
        if g.breaks() != b.breaks() || d > 1e-9 * b.log_ml().abs().max(1.0) {
            mismatches += 1;
        }
    }
    let (fast, time) = within(started.elapsed(), 30);
    outcome(mismatches == 0 && fast, format!("{mismatches}/50 mismatches, max score diff {worst:.1e}; {time}"))
}

fn table_two() -> Outcome {
    let started = Instant::now();
    // (BSMDL correct-m, GMDL exact, tolerance in pp)
    let targets = [
        (DgpId::A, 100.0, 100.0, 5.0),
        (DgpId::B, 100.0, 99.7, 5.0),
        (DgpId::C, 100.0, 100.0, 5.0),
        (DgpId::D, 97.1, 99.9, 5.0),
        (DgpId::E, 86.5, 81.7, 10.0),
        (DgpId::F, 94.9, 90.1, 10.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (id, bs_target, g_target, tol) in targets {
        let rep = run_replications(&DgpSpec::table(id), &[Method::Bsmdl, Method::Gmdl], 200, 1024, 42, &StudyConfig::default())
            .unwrap();
        let bs = rep.method(Method::Bsmdl).unwrap().correct_m_frequency;
        let g = rep.method(Method::Gmdl).unwrap().exact_frequency;
        let ok = (bs - bs_target).abs() <= tol && (g - g_target).abs() <= tol;
        pass &= ok;
        parts.push(format!("{id} bsmdl m {bs:.1}/{bs_target} gmdl exact {g:.1}/{g_target}{}", if ok { "" } else { " (out)" }));
    }
    let (fast, time) = within(started.elapsed(), 30 * 60);
    outcome(pass && fast, format!("{}; {time}", parts.join(", ")))
}

fn long_series() -> Outcome {
    let started = Instant::now();
    let rep = run_replications(&DgpSpec::long_b(), &[Method::Bsmdl], 50, 8192, 42, &StudyConfig::default()).unwrap();
    let s = rep.method(Method::Bsmdl).unwrap();
    let mdl_ok = (s.mean_mdl - -11636.49).abs() <= 0.01 * 11636.49;
    // GMDL reference cost at half the length
    let spec = DgpSpec::long_b();
    let mut g_ms = 0.0;
    for rep in 0..2u64 {
        let raw = simulate_dgp(&spec, 4096, replication_seed(43, rep, 0)).unwrap();
        let ds = dgp_dataset(&spec, &raw).unwrap();
        g_ms += detect(&ds, &DetectorConfig::default(), Method::Gmdl).unwrap().runtime_ms as f64 / 2.0;
    }
    let speed_ok = s.mean_runtime_ms <= 0.1 * g_ms;
    let (fast, time) = within(started.elapsed(), 20 * 60);
    outcome(
        s.correct_m_frequency == 100.0 && s.mean_abs_break_errors[0] <= 10.0 && mdl_ok && speed_ok && fast,
        format!(
            "correct m {:.0}%, mean |tau1 err| {:.2}, mean MDL {:.2}, BSMDL {:.0} ms at 2^13 vs GMDL {:.0} ms at 2^12; {time}",
            s.correct_m_frequency, s.mean_abs_break_errors[0], s.mean_mdl, s.mean_runtime_ms, g_ms
        ),
    )
}

fn monte_carlo_marginal() -> Outcome {
    let mut r = common::rng(1005);
    let mut worst = 0.0f64;
    for i in 0..10 {
        let k = 1 + i % 2;
        let (ds, _) = random_regression_fixture(&mut r, k, 0, 8, 20).unwrap();
        let t = ds.len();
        let s = ds.segment_stats(0, t).unwrap();
        let p = calibrate(&s, 0, t, k).unwrap();
        let exact = segment_log_marginal(&s, &p);
        let (est, se) = common::naive_mc_log_marginal(&ds, 0, t, &p, 100_000, &mut r);
        worst = worst.max((est - exact).abs() / se);
    }
    outcome(worst <= 3.0, format!("max |mc - exact| = {worst:.2} standard errors over 10 segments"))
}

fn sampler() -> Outcome {
    let fixtures: [(u64, usize, Vec<usize>, f64); 5] = [
        (1, 70, vec![35], 0.5),
        (2, 80, vec![40], 0.6),
        (3, 90, vec![30, 60], 0.9),
        (4, 120, vec![50, 80], 0.8),
        (5, 100, vec![35, 70], 1.0),
    ];
    let mut ps = Vec::new();
    for (seed, t, breaks, shift) in fixtures {
        let ds = common::weak_break_fixture(seed, t, &breaks, shift);
        let prior = build_break_prior(&Segmentation::new(breaks.clone(), t).unwrap()).unwrap();
        let exact = enumerate_posterior(&ds, &prior, 10_000).unwrap();
        let cfg = SamplerConfig { iterations: 40_000, burn_in: Some(2_000), thin: 20, seed, ..Default::default() };
        let draws = ddream_sample(&ds, &prior, &cfg).unwrap();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for d in &draws.draws {
            *counts.entry(d.clone()).or_default() += 1;
        }
        ps.push(common::chi_square_p(&counts, &exact, draws.draws.len()));
    }
    let mut r = common::rng(1006);
    let (ds, _) = random_regression_fixture(&mut r, 2, 0, 100, 100).unwrap();
    let s = ds.segment_stats(0, 100).unwrap();
    let p = calibrate(&s, 0, 100, 2).unwrap();
    let n = 50_000;
    let sig: Vec<f64> = (0..n).map(|_| gibbs_segment_draw(&s, &p, &mut r).unwrap().1).collect();
    let m = sig.iter().sum::<f64>() / n as f64;
    let sd = (sig.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    let expected = (p.s_under + s.ssr) / (100.0 + p.nu_under - 2.0);
    let z = (m - expected).abs() / (sd / (n as f64).sqrt());
    let pass = ps.iter().all(|&p| p > 0.001) && z <= 3.0;
    let shown: Vec<String> = ps.iter().map(|p| format!("{p:.3}")).collect();
    outcome(pass, format!("chi-square p = [{}]; Gibbs sigma2 mean off by {z:.2} MC-SE", shown.join(", ")))
}

fn remark_one() -> Outcome {
    let mut bad = Vec::new();
    for n in [5.0f64, 10.0, 50.0, 100.0, 1000.0] {
        for s in [0.1, 1.0, 100.0] {
            let (mode, mean) = calibrated_variance_mode_mean(n, s);
            let lo = s / (n + 2.0 * n.sqrt());
            let hi = s / (n - 2.0 * n.sqrt());
            let ok = lo < s / n
                && s / n < hi
                && (mode - lo).abs() <= 1e-12 * lo
                && mean.is_some_and(|m| (m - hi).abs() <= 1e-12 * hi);
            if !ok {
                bad.push(format!("n={n} s={s}"));
            }
        }
    }
    outcome(bad.is_empty(), if bad.is_empty() { "15/15 grid points strictly ordered".to_string() } else { bad.join(", ") })
}

fn forecasting() -> Outcome {
    let started = Instant::now();
    let spec = DgpSpec::long_b();
    let horizons = [3usize, 12];
    let mut wins = [0usize; 2];
    let mut fb_wins = 0;
    let mut power_mean_ok = true;
    for s in 0..20u64 {
        let raw = simulate_dgp(&spec, 900, replication_seed(11, s, 0)).unwrap();
        let fs = ForecastSpec {
            ar_orders: vec![2],
            methods: vec![Method::Bsmdl, Method::Wbsmdl, Method::Pgmdl],
            horizons: horizons.to_vec(),
            origin_step: 5,
            future_break: true,
            draws_per_model: 500,
            seed: s,
            ..Default::default()
        };
        let rep = forecast_harness(&raw, &fs).unwrap();
        power_mean_ok &= rep.summary.iter().all(|l| l.rmsfe >= l.mafe);
        for (i, &h) in horizons.iter().enumerate() {
            if rep.loss("local", h).unwrap().rmsfe <= rep.loss("ar2", h).unwrap().rmsfe {
                wins[i] += 1;
            }
        }
        if rep.loss("local_future_break", 12).unwrap().rmsfe <= rep.loss("ar2", 12).unwrap().rmsfe {
            fb_wins += 1;
        }
    }
    let (fast, time) = within(started.elapsed(), 15 * 60);
    outcome(
        wins.iter().all(|&w| w >= 15) && power_mean_ok && fast,
        format!(
            "combination beats AR(2): h=3 {}/20, h=12 {}/20 (need 15); with future break h=12 {fb_wins}/20; RMSFE >= MAFE {}; {time}",
            wins[0],
            wins[1],
            if power_mean_ok { "everywhere" } else { "VIOLATED" }
        ),
    )
}

fn softmax_and_selection() -> Outcome {
    let mut r = common::rng(1009);
    let mut bad_softmax = 0;
    for case in 0..5000 {
        let n = r.random_range(1..30);
        let mut v: Vec<f64> = (0..n).map(|_| r.random_range(-1e6..=1e6)).collect();
        if case % 2 == 1 {
            let base = v[0];
            v.iter_mut().for_each(|x| *x = base + r.random_range(-25.0..25.0));
        }
        let p = posterior_probabilities(&v).unwrap();
        let sum: f64 = p.iter().sum();
        let shift = r.random_range(-1e6..=1e6);
        let q = posterior_probabilities(&v.iter().map(|x| x + shift).collect::<Vec<_>>()).unwrap();
        // shifting rounds the inputs at the scale of ulp(2e6)
        let shift_ok = p.iter().zip(&q).all(|(a, b)| (a - b).abs() <= 1e-9);
        if p.iter().any(|x| x.is_nan()) || (sum - 1.0).abs() > 1e-12 || !shift_ok {
            bad_softmax += 1;
        }
    }
    let mut bad_sel = 0;
    for case in 0..100u64 {
        let k = r.random_range(1..=2);
        let m = r.random_range(0..=2);
        let (ds, _) = random_regression_fixture(&mut r, k, m, 60, 150).unwrap();
        let cfg = DetectorConfig { wbs_intervals: 200, rng_seed: case, ..Default::default() };
        let s = sel(&ds, &cfg, &Method::LOCAL).unwrap();
        let chosen = s.result().log_ml();
        if s.ensemble.candidates.iter().any(|c| c.log_ml() > chosen) {
            bad_sel += 1;
        }
    }
    outcome(
        bad_softmax == 0 && bad_sel == 0,
        format!("softmax violations {bad_softmax}/5000; sel dominance violations {bad_sel}/100"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("equivalence of marginal likelihood and MDL", equivalence),
        ("GMDL equals brute force", gmdl_exactness),
        ("Table 2 at 200 replications", table_two),
        ("DGP B at T = 8192", long_series),
        ("Monte Carlo marginal likelihood", monte_carlo_marginal),
        ("sampler against exact posterior", sampler),
        ("variance mode and mean ordering", remark_one),
        ("forecast combination vs no-break AR", forecasting),
        ("softmax and selection properties", softmax_and_selection),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!("{tag} [{id}] {name}: {} [{:.1}s]", result.detail, started.elapsed().as_secs_f64());
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: criteria {failed:?} failed");
        if std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
            std::process::exit(1);
        }
        return;
    }
    println!("acceptance: all criteria passed");
}
