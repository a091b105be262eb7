//! Solves the separated Hamilton-Jacobi equations by quadrature and checks
//! them against an integrated trajectory: the predicted time and azimuth
//! at every sample must match the ODE.
//!
//! ```bash
//! cargo run --release --example quadrature_vs_ode
//! ```

use std::f64::consts::PI;

use micz::dynamics::{integrate, Controls, PhaseState};
use micz::geometry::Vec3;
use micz::hamiltonians::SystemSpec;
use micz::quadrature::{
    azimuth_integral, libration_containing, radicand, time_integral, validate_quadrature, SeparatedConstants, Variable,
};

fn main() -> Result<(), micz::error::Error> {
    // Kepler limit in parabolic coordinates: E = -1/2 gives period 2π
    let kepler = SystemSpec::stark_zeeman(1.0, 0.0, -1.0, 0.0, 0.0)?;
    let c = SeparatedConstants { energy: -0.5, sep_n: 0.3, p_phi: 0.5 };
    let (rx, ry) = (radicand(&kepler, c, Variable::XiParabolic)?, radicand(&kepler, c, Variable::EtaParabolic)?);
    let (ix, iy) = (libration_containing(&rx, 1.0)?, libration_containing(&ry, 1.0)?);
    let period = 2.0 * (time_integral(&rx, ix)?.value + time_integral(&ry, iy)?.value);
    let advance = 2.0 * (azimuth_integral(&rx, ix)?.value + azimuth_integral(&ry, iy)?.value);
    println!("Kepler period {period:.14} (2π = {:.14})", 2.0 * PI);
    println!("Kepler Δφ     {advance:.14}");

    let controls = Controls::default().with_tol(1e-11, 1e-13).with_max_step(0.02);
    let cases = [
        ("two-center", SystemSpec::two_center(1.0, 1.0, (0.5, -1.0), (-0.3, -0.6))?, Vec3::new(1.1, 0.2, 0.4), Vec3::new(0.1, 0.6, -0.2)),
        ("stark-zeeman", SystemSpec::stark_zeeman(1.0, 0.7, -1.0, 0.08, 0.05)?, Vec3::new(1.0, 0.0, 0.3), Vec3::new(0.1, 0.7, 0.2)),
    ];
    for (name, spec, r, v) in cases {
        let traj = integrate(&PhaseState::new(0.0, r, v), &spec, 60.0, &controls)?;
        let rep = validate_quadrature(&traj)?;
        println!("{name}: {} samples, max |Δt| {:.2e}, max |Δφ| {:.2e}", rep.samples, rep.max_dt_residual, rep.max_dphi_residual);
        for tp in &rep.turning_points {
            println!("  {}: [{:.8}, {:.8}] after {} half-librations", tp.variable, tp.lo, tp.hi, tp.half_librations);
        }
    }
    Ok(())
}
