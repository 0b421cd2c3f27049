// SPDX-License-Identifier: MIT OR Apache-2.0

//! Breaks in a regression read from CSV text with a covariate column.

use breakscope::io::parse_csv;
use breakscope::{detect, DetectorConfig, Method};
use std::fmt::Write;

fn main() -> breakscope::Result<()> {
    let mut text = String::from("y,x\n");
    for t in 0..240 {
        let x = ((t * 37) % 17) as f64 / 4.0;
        let slope = if t < 150 { 0.5 } else { -1.0 };
        let noise = ((t * 7919) % 23) as f64 / 23.0 - 0.5;
        writeln!(text, "{},{x}", 1.0 + slope * x + noise).unwrap();
    }
    let table = parse_csv(text.as_bytes())?;
    let ds = table.regression(false)?;
    let r = detect(&ds, &DetectorConfig::default(), Method::Gmdl)?;
    println!("header {:?}, breaks {:?}", table.header, r.breaks());
    for (seg, (a, b)) in r.segmentation.segments().into_iter().enumerate() {
        println!("regime {}: rows {}..{} beta {:.3?}", seg + 1, a + 1, b, ds.segment_stats(a, b)?.beta_hat);
    }
    Ok(())
}
