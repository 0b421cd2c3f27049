// SPDX-License-Identifier: MIT OR Apache-2.0

//! Posterior model probabilities over detectors and the selected segmentation.

use breakscope::select::sel;
use breakscope::simlab::{dgp_dataset, raw_breaks, simulate_dgp, DgpId, DgpSpec};
use breakscope::{DetectorConfig, Method};

fn main() -> breakscope::Result<()> {
    let spec = DgpSpec::table(DgpId::E);
    let raw = simulate_dgp(&spec, 1024, 21)?;
    let ds = dgp_dataset(&spec, &raw)?;
    let s = sel(&ds, &DetectorConfig::default(), &Method::LOCAL)?;
    for (c, p) in s.ensemble.candidates.iter().zip(&s.ensemble.posterior) {
        println!("{:>7}  {:?}  p = {p:.4}", c.method.name(), raw_breaks(&ds, c));
    }
    println!("selected {} (true {:?})", s.result().method.name(), spec.breaks_for(1024));
    Ok(())
}
