// SPDX-License-Identifier: MIT OR Apache-2.0

//! Runs every detector on one simulated piecewise AR(1) series.

use breakscope::simlab::{dgp_dataset, raw_breaks, simulate_dgp, DgpId, DgpSpec};
use breakscope::{detect, DetectorConfig, Method};

fn main() -> breakscope::Result<()> {
    let spec = DgpSpec::table(DgpId::B);
    let raw = simulate_dgp(&spec, 1024, 7)?;
    let ds = dgp_dataset(&spec, &raw)?;
    println!("true breaks {:?}", spec.breaks_for(1024));
    let cfg = DetectorConfig { rng_seed: 7, ..Default::default() };
    for method in Method::ALL {
        if method == Method::Oracle {
            continue;
        }
        let r = detect(&ds, &cfg, method)?;
        println!(
            "{:>7}  breaks {:?}  MDL {:.2}  {} ms",
            method.name(),
            raw_breaks(&ds, &r),
            r.log_ml(),
            r.runtime_ms
        );
    }
    Ok(())
}
