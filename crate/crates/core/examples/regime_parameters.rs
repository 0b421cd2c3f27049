// SPDX-License-Identifier: MIT OR Apache-2.0

//! Model-averaged posterior of the AR coefficients at a chosen date.

use breakscope::bayes::credible_interval;
use breakscope::select::{mixture_parameter_density, parameter_draws_at, sel};
use breakscope::simlab::{dgp_dataset, simulate_dgp, DgpId, DgpSpec};
use breakscope::{DetectorConfig, Method};

fn main() -> breakscope::Result<()> {
    let spec = DgpSpec::table(DgpId::B);
    let raw = simulate_dgp(&spec, 1024, 2)?;
    let ds = dgp_dataset(&spec, &raw)?;
    let s = sel(&ds, &DetectorConfig::default(), &Method::LOCAL)?;
    for t in [200, 600, 900] {
        let per_model = parameter_draws_at(&ds, &s.ensemble, t, 2000, 1)?;
        let mix = mixture_parameter_density(&s.ensemble, per_model)?;
        let slope = mix.column(1);
        let ci = credible_interval(&slope, Some(&mix.weights), 0.9)?;
        println!("t={t}: beta1 mean {:.3}, 90% [{:.3}, {:.3}]", mix.mean()[1], ci.lo, ci.hi);
    }
    Ok(())
}
