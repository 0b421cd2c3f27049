// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dynamic programming against exhaustive enumeration on a short series.

use breakscope::detect::{brute_force, count_segmentations, gmdl};
use breakscope::{DetectorConfig, TimeSeriesDataset};

fn main() -> breakscope::Result<()> {
    let y: Vec<f64> = (0..36)
        .map(|t| if t < 18 { 0.0 } else { 2.0 } + ((t * 7919) % 13) as f64 / 13.0 - 0.5)
        .collect();
    let ds = TimeSeriesDataset::mean_model(y)?;
    let cfg = DetectorConfig { min_duration: Some(5), max_breaks: 3, ..Default::default() };
    println!("{} segmentations", count_segmentations(ds.len(), 3, 5));
    let g = gmdl(&ds, &cfg)?;
    let b = brute_force(&ds, &cfg)?;
    println!("gmdl   {:?} {:.6}", g.breaks(), g.log_ml());
    println!("oracle {:?} {:.6}", b.breaks(), b.log_ml());
    Ok(())
}
