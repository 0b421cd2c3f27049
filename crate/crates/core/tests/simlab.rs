// SPDX-License-Identifier: MIT OR Apache-2.0

use breakscope::detect::detect;
use breakscope::simlab::*;
use breakscope::{DetectorConfig, Method};
use rand::SeedableRng;

fn lag1_autocorrelation(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let m = y.iter().sum::<f64>() / n;
    let c0: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
    let c1: f64 = y.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    c1 / c0
}

#[test]
fn dgp_a_autocorrelation() {
    let y = simulate_dgp(&DgpSpec::table(DgpId::A), 100_000, 1).unwrap();
    let r = lag1_autocorrelation(&y);
    assert!((r + 0.7).abs() < 0.01, "{r}");
}

#[test]
fn table_break_dates() {
    assert_eq!(DgpSpec::table(DgpId::B).breaks_for(1024), vec![514, 768]);
    assert_eq!(DgpSpec::table(DgpId::C).breaks_for(1024), vec![400, 612]);
    assert_eq!(DgpSpec::table(DgpId::D).breaks_for(1024), vec![50]);
    assert!(DgpSpec::table(DgpId::A).breaks_for(1024).is_empty());
    assert_eq!(DgpSpec::at_length(DgpId::B, 2048).breaks_for(2048), vec![1024, 1536]);
    assert_eq!(DgpSpec::at_length(DgpId::B, 1024).breaks_for(1024), vec![514, 768]);
    assert_eq!(DgpSpec::table(DgpId::E).breaks_for(102_400), vec![40_000, 75_000]);
}

#[test]
fn dgp_e_innovation_variance_ratio() {
    // The level is nearly integrated, so compare innovation variances.
    let spec = DgpSpec::table(DgpId::E);
    let t = 102_400;
    let y = simulate_dgp(&spec, t, 2).unwrap();
    let br = spec.breaks_for(t);
    let resid_var = |a: usize, b: usize| {
        let e: Vec<f64> = (a.max(1)..b).map(|i| y[i] - 0.999 * y[i - 1]).collect();
        let n = e.len() as f64;
        let m = e.iter().sum::<f64>() / n;
        e.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let ratio = resid_var(br[0], br[1]) / resid_var(0, br[0]);
    assert!((ratio / 2.25 - 1.0).abs() < 0.15, "{ratio}");
    let ratio3 = resid_var(br[1], t) / resid_var(0, br[0]);
    assert!((ratio3 - 1.0).abs() < 0.15, "{ratio3}");
}

#[test]
fn regime_switch_happens_after_the_break_date() {
    // Regime 2 of DGP D has a negative coefficient; a long fixture shows it.
    let spec = DgpSpec::table(DgpId::D);
    let t = 20_480;
    let y = simulate_dgp(&spec, t, 3).unwrap();
    let b = spec.breaks_for(t)[0];
    assert!((lag1_autocorrelation(&y[..b]) - 0.75).abs() < 0.05);
    assert!((lag1_autocorrelation(&y[b..]) + 0.5).abs() < 0.05);
}

#[test]
fn near_unit_root_designs_stay_finite() {
    for id in [DgpId::E, DgpId::F] {
        let y = simulate_dgp(&DgpSpec::table(id), 1 << 14, 4).unwrap();
        assert!(y.iter().all(|v| v.is_finite()), "{id}");
    }
}

#[test]
fn simulation_is_seeded() {
    let spec = DgpSpec::table(DgpId::C);
    assert_eq!(simulate_dgp(&spec, 500, 9).unwrap(), simulate_dgp(&spec, 500, 9).unwrap());
    assert_ne!(simulate_dgp(&spec, 500, 9).unwrap(), simulate_dgp(&spec, 500, 10).unwrap());
    let seeds: Vec<u64> = (0..4).map(|s| replication_seed(1, 0, s)).collect();
    assert!(seeds.windows(2).all(|w| w[0] != w[1]));
    assert_eq!(replication_seed(1, 5, 2), replication_seed(1, 5, 2));
}

#[test]
fn invalid_specs() {
    let mut s = DgpSpec::table(DgpId::B);
    s.sigma2.pop();
    assert!(simulate_dgp(&s, 1024, 0).is_err());
    let mut s = DgpSpec::table(DgpId::A);
    s.beta1[0] = 1.01;
    assert!(simulate_dgp(&s, 1024, 0).is_err());
    let mut s = DgpSpec::table(DgpId::A);
    s.sigma2[0] = 0.0;
    assert!(simulate_dgp(&s, 1024, 0).is_err());
    assert!(simulate_dgp(&DgpSpec::table(DgpId::A), 99, 0).is_err());
    let s = DgpSpec { breaks: BreakPlacement::Relative(vec![0.5, 1.2]), ..DgpSpec::table(DgpId::B) };
    assert!(simulate_dgp(&s, 1024, 0).is_err());
}

fn zero_runtimes(mut r: ReplicationReport) -> ReplicationReport {
    for m in &mut r.methods {
        m.mean_runtime_ms = 0.0;
    }
    r
}

#[test]
fn replication_report_invariants() {
    let study = StudyConfig { detector: DetectorConfig { wbs_intervals: 200, ..Default::default() }, ..Default::default() };
    let methods = [Method::Bs, Method::Bsmdl, Method::Wbsmdl];
    let rep = run_replications(&DgpSpec::table(DgpId::C), &methods, 12, 1024, 5, &study).unwrap();
    assert_eq!(rep.true_breaks, vec![400, 612]);
    for m in &rep.methods {
        assert_eq!(m.m_histogram.iter().sum::<usize>() + m.failures, 12);
        assert!(m.exact_frequency <= m.correct_m_frequency);
        assert_eq!(m.mean_abs_break_errors.len(), 2);
    }
    let again = run_replications(&DgpSpec::table(DgpId::C), &methods, 12, 1024, 5, &study).unwrap();
    let a = serde_json::to_string(&zero_runtimes(rep)).unwrap();
    let b = serde_json::to_string(&zero_runtimes(again)).unwrap();
    assert_eq!(a, b);
    assert!(run_replications(&DgpSpec::table(DgpId::C), &methods, 0, 1024, 5, &study).is_err());
}

#[test]
fn single_replication_matches_direct_run() {
    let spec = DgpSpec::table(DgpId::B);
    let study = StudyConfig::default();
    let rep = run_replications(&spec, &[Method::Bsmdl], 1, 1024, 31, &study).unwrap();
    let raw = simulate_dgp(&spec, 1024, replication_seed(31, 0, 0)).unwrap();
    let ds = dgp_dataset(&spec, &raw).unwrap();
    let r = detect(&ds, &study.detector, Method::Bsmdl).unwrap();
    let found = raw_breaks(&ds, &r);
    let s = &rep.methods[0];
    assert_eq!(s.m_histogram[found.len().min(3)], 1);
    assert_eq!(s.mean_mdl, r.log_ml());
    if found.len() == 2 {
        assert_eq!(s.mean_abs_break_errors[0], found[0].abs_diff(514) as f64);
        assert_eq!(s.mean_abs_break_errors[1], found[1].abs_diff(768) as f64);
    }
}

#[test]
fn adding_a_method_keeps_other_streams() {
    let study = StudyConfig { detector: DetectorConfig { wbs_intervals: 100, ..Default::default() }, ..Default::default() };
    let spec = DgpSpec::table(DgpId::D);
    let one = run_replications(&spec, &[Method::Wbsmdl], 6, 1024, 8, &study).unwrap();
    let two = run_replications(&spec, &[Method::Bsmdl, Method::Wbsmdl], 6, 1024, 8, &study).unwrap();
    let a = zero_runtimes(one).methods.remove(0);
    let b = zero_runtimes(two).methods.remove(1);
    assert_eq!(a, b);
}

#[test]
fn dgp_c_gmdl_exact() {
    let rep = run_replications(&DgpSpec::table(DgpId::C), &[Method::Gmdl], 200, 1024, 42, &StudyConfig::default()).unwrap();
    let s = &rep.methods[0];
    assert!(s.exact_frequency >= 95.0, "{s:?}");
}

#[test]
fn dgp_b_2048_bsmdl() {
    let spec = DgpSpec::at_length(DgpId::B, 2048);
    let rep = run_replications(&spec, &[Method::Bsmdl], 100, 2048, 42, &StudyConfig::default()).unwrap();
    let s = &rep.methods[0];
    assert_eq!(s.correct_m_frequency, 100.0, "{s:?}");
    assert!(s.mean_abs_break_errors[0] <= 10.0, "{s:?}");
}

#[test]
fn posterior_study_identical_methods() {
    let study = StudyConfig::default();
    let r = posterior_prob_study(&DgpSpec::table(DgpId::D), &[Method::Bsmdl, Method::Bsmdl], 5, 1024, 3, &study).unwrap();
    for p in &r.average_posterior {
        assert!((p - 50.0).abs() < 1e-9);
    }
    assert_eq!(r.mix_percentage, 100.0);
    assert!(posterior_prob_study(&DgpSpec::table(DgpId::D), &[Method::Bsmdl], 5, 1024, 3, &study).is_err());
}

#[test]
fn posterior_study_dgp_a_is_near_uniform() {
    let study = StudyConfig::default();
    let methods = [Method::Bsmdl, Method::Wbsmdl, Method::Pgmdl];
    let r = posterior_prob_study(&DgpSpec::table(DgpId::A), &methods, 100, 1024, 12, &study).unwrap();
    assert!((r.average_posterior.iter().sum::<f64>() - 100.0).abs() < 1e-9);
    for p in &r.average_posterior {
        assert!((p - 100.0 / 3.0).abs() <= 10.0, "{:?}", r.average_posterior);
    }
}

#[test]
fn fixture_generator_shapes() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let (ds, seg) = random_regression_fixture(&mut rng, 3, 2, 30, 60).unwrap();
    assert_eq!(ds.n_regressors(), 3);
    assert_eq!(seg.n_breaks(), 2);
    assert!(seg.min_segment_length() >= 30);
    assert_eq!(seg.sample_size(), ds.len());
    assert!(random_regression_fixture(&mut rng, 0, 1, 30, 60).is_err());
    assert!(random_regression_fixture(&mut rng, 1, 1, 60, 30).is_err());
}

