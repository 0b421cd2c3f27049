// SPDX-License-Identifier: MIT OR Apache-2.0

//! Posterior draws of the break dates around a point estimate.

use breakscope::bayes::{break_credible_intervals, build_break_prior, ddream_sample, SamplerConfig};
use breakscope::simlab::{dgp_dataset, simulate_dgp, DgpId, DgpSpec};
use breakscope::{detect, DetectorConfig, Method};

fn main() -> breakscope::Result<()> {
    let spec = DgpSpec::table(DgpId::C);
    let raw = simulate_dgp(&spec, 1024, 5)?;
    let ds = dgp_dataset(&spec, &raw)?;
    let point = detect(&ds, &DetectorConfig::default(), Method::Bsmdl)?;
    let prior = build_break_prior(&point.segmentation)?;
    let draws = ddream_sample(&ds, &prior, &SamplerConfig { iterations: 4000, seed: 5, ..Default::default() })?;
    println!("point estimate {:?}, acceptance {:.3}", point.breaks(), draws.pooled_acceptance());
    for (i, ci) in break_credible_intervals(&draws, 0.95)?.iter().enumerate() {
        println!("break {}: 95% interval [{}, {}]", i + 1, ci.lo, ci.hi);
    }
    Ok(())
}
