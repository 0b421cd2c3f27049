// SPDX-License-Identifier: MIT OR Apache-2.0

//! Log marginal likelihood under the calibrated prior next to the MDL value.

use breakscope::simlab::random_regression_fixture;
use breakscope::{mdl_criterion, mdl_marginal_loglik};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> breakscope::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (k, m, min_n) in [(1, 0, 30), (2, 1, 30), (3, 2, 100)] {
        let (ds, seg) = random_regression_fixture(&mut rng, k, m, min_n, 2 * min_n)?;
        let a = mdl_marginal_loglik(&ds, &seg)?.value;
        let b = mdl_criterion(&ds, &seg)?.value;
        println!("k={k} breaks {:?}: log ML {a:.6}  MDL {b:.6}  diff {:.1e}", seg.breaks(), (a - b).abs());
    }
    Ok(())
}
