// SPDX-License-Identifier: MIT OR Apache-2.0

//! Combined predictive distribution, with and without an out-of-sample break.

use breakscope::bayes::credible_interval;
use breakscope::select::{candidate_paths, combined_predictive, sel};
use breakscope::simlab::{dgp_dataset, simulate_dgp, DgpSpec};
use breakscope::{DetectorConfig, Method};

fn main() -> breakscope::Result<()> {
    let spec = DgpSpec::long_b();
    let raw = simulate_dgp(&spec, 900, 4)?;
    let ds = dgp_dataset(&spec, &raw)?;
    let s = sel(&ds, &DetectorConfig::default(), &Method::LOCAL)?;
    let segs: Vec<_> = s.ensemble.candidates.iter().map(|c| &c.segmentation).collect();
    let h = 6;
    for future_break in [false, true] {
        let paths = candidate_paths(&ds, &segs, h, 1000, future_break, 9)?;
        let pred = combined_predictive(&s.ensemble.posterior, h, paths)?;
        let last = pred.column(h - 1);
        let ci = credible_interval(&last, Some(&pred.weights), 0.9)?;
        println!(
            "future break {future_break}: mean path {:.3?}, h={h} 90% [{:.3}, {:.3}]",
            pred.mean(),
            ci.lo,
            ci.hi
        );
    }
    Ok(())
}
