//! Radial Green functions on conformally flat spaces: closed forms on the
//! sphere and pseudosphere, a quadrature construction for any tabulated
//! metric, and the flat Coulomb limit.
//!
//! ```bash
//! cargo run --release --example green_functions
//! ```

use micz::fields::{GreenFunction, MetricProfile};

fn main() -> Result<(), micz::error::Error> {
    let profiles = [MetricProfile::Flat, MetricProfile::sphere(1.0)?, MetricProfile::pseudosphere(1.0)?];
    println!("{:>6} {:>22} {:>22} {:>22}", "r", "flat", "sphere", "pseudosphere");
    for &r in &[0.1, 0.5, 0.9, 2.0, 5.0, 10.0] {
        let vals: Vec<f64> = profiles.iter().map(|p| GreenFunction::new(p.clone()).value(r)).collect::<Result<_, _>>()?;
        println!("{r:>6.2} {:>22.15} {:>22.15} {:>22.15}", vals[0], vals[1], vals[2]);
    }

    for p in &profiles[1..] {
        let (closed, numeric) = (GreenFunction::new(p.clone()), GreenFunction::numeric(p.clone()));
        let worst = (0..=990)
            .map(|i| 0.1 + 0.01 * i as f64)
            .filter(|r| (r - 1.0_f64).abs() > 1e-6)
            .map(|r| (closed.value(r).unwrap() - numeric.value(r).unwrap()).abs())
            .fold(0.0, f64::max);
        println!("{p}: max |closed - quadrature| = {worst:.2e}");
    }

    // a tabulated metric: the sphere sampled on 200 knots
    let table: Vec<(f64, f64)> = (0..200)
        .map(|i| {
            let r = 0.01 + 0.05 * i as f64;
            (r, (2.0 / (1.0 + r * r)).powi(2))
        })
        .collect();
    let custom = GreenFunction::new(MetricProfile::custom(&table)?);
    let sphere = GreenFunction::new(MetricProfile::sphere(1.0)?);
    for &r in &[0.5, 2.0, 5.0] {
        println!("custom table at r = {r}: {:.8} (sphere {:.8})", custom.value(r)?, sphere.value(r)?);
    }
    Ok(())
}
