//! Two fixed dyons on the z-axis. The motion separates in prolate
//! spheroidal (elliptic) coordinates; besides `E` and `p_φ` the separation
//! constant `I_e` is conserved.
//!
//! ```bash
//! cargo run --release --example two_center
//! ```

use micz::dynamics::{integrate, monitor, Controls, PhaseState};
use micz::geometry::{canonical_momenta_map, to_elliptic, CoordinateFamily, Vec3};
use micz::hamiltonians::{elliptic_hamiltonian, flat_hamiltonian, SystemSpec};
use micz::quadrature::{libration_containing, radicand, separated_constants, Variable};

fn main() -> Result<(), micz::error::Error> {
    // a = 1, dyon 1 (g=0.5, q=-1) at z=-1, dyon 2 (g=-0.3, q=-0.6) at z=+1
    let spec = SystemSpec::two_center(1.0, 1.0, (0.5, -1.0), (-0.3, -0.6))?;
    let s0 = PhaseState::new(0.0, Vec3::new(1.1, 0.2, 0.4), Vec3::new(0.1, 0.6, -0.2));

    let p = canonical_momenta_map(&s0.r, &s0.v, CoordinateFamily::Elliptic { a: 1.0 }, spec.cfg())?;
    let q = to_elliptic(&s0.r, 1.0);
    println!("ξ = {:.6}, η = {:.6}, p_ξ = {:.6}, p_η = {:.6}, p_φ = {:.6}", q.xi, q.eta, p.p1, p.p2, p.p_phi);
    println!("H (separated) = {:.15}", elliptic_hamiltonian(&q, &p, &spec)?);
    println!("H (cartesian) = {:.15}", flat_hamiltonian(&s0.r, &s0.v, &spec)?.total);

    let c = separated_constants(&s0.r, &s0.v, &spec)?;
    for (var, x) in [(Variable::XiElliptic, q.xi), (Variable::EtaElliptic, q.eta)] {
        let iv = libration_containing(&radicand(&spec, c, var)?, x)?;
        println!("{var}: libration [{:.6}, {:.6}] ({:?})", iv.lo, iv.hi, iv.kind);
    }

    let traj = integrate(&s0, &spec, 1000.0, &Controls::default().with_tol(1e-10, 1e-12))?;
    traj.check()?;
    let report = monitor(&traj);
    println!("{} steps", traj.steps);
    for d in &report.quantities {
        println!("{:>6} initial {:+.10} max relative drift {:.2e}", d.name, d.initial, d.max_rel_drift);
    }
    Ok(())
}
