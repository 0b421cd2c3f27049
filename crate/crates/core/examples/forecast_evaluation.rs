// SPDX-License-Identifier: MIT OR Apache-2.0

//! Rolling-origin forecast losses of AR models and the local combination.

use breakscope::select::{forecast_harness, ForecastSpec};
use breakscope::simlab::{simulate_dgp, DgpSpec};

fn main() -> breakscope::Result<()> {
    let raw = simulate_dgp(&DgpSpec::long_b(), 900, 11)?;
    let spec = ForecastSpec {
        horizons: vec![1, 3],
        origin_step: 40,
        draws_per_model: 200,
        start_frac: 0.5,
        future_break: true,
        ..Default::default()
    };
    let report = forecast_harness(&raw, &spec)?;
    println!("{} origins", report.origins.len());
    for l in &report.summary {
        println!("{:>20} h={:<2} RMSFE {:.4}  MAFE {:.4}  n={}", l.model, l.horizon, l.rmsfe, l.mafe, l.n);
    }
    Ok(())
}
