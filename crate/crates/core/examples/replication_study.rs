// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte Carlo accuracy of two detectors on one design.

use breakscope::simlab::{run_replications, DgpId, DgpSpec, StudyConfig};
use breakscope::Method;

fn main() -> breakscope::Result<()> {
    let reps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let rep = run_replications(&DgpSpec::table(DgpId::C), &[Method::Bsmdl, Method::Gmdl], reps, 1024, 42, &StudyConfig::default())?;
    println!("true breaks {:?}, {reps} replications", rep.true_breaks);
    for m in &rep.methods {
        println!(
            "{:>6}: m histogram {:?}, correct m {:.1}%, exact {:.1}%, errors {:?}, {:.1} ms",
            m.method.name(),
            m.m_histogram,
            m.correct_m_frequency,
            m.exact_frequency,
            m.mean_abs_break_errors,
            m.mean_runtime_ms
        );
    }
    Ok(())
}
