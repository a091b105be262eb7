//! A dyon in parallel uniform electric and magnetic fields. Parabolic
//! coordinates separate the motion; the extra integral is `I_p`.
//! Sweeps the magnetic field and reports the drift of every invariant.
//!
//! ```bash
//! cargo run --release --example stark_zeeman
//! ```

use micz::dynamics::{integrate, monitor, Controls, PhaseState};
use micz::geometry::{canonical_momenta_map, to_parabolic, CoordinateFamily, Vec3};
use micz::hamiltonians::{stark_zeeman_hamiltonian, stark_zeeman_spherical, SystemSpec};
use rayon::prelude::*;

fn main() -> Result<(), micz::error::Error> {
    let s0 = PhaseState::new(0.0, Vec3::new(1.0, 0.0, 0.3), Vec3::new(0.1, 0.7, 0.2));

    let spec = SystemSpec::stark_zeeman(1.0, 0.7, -1.0, 0.08, 0.05)?;
    let pp = canonical_momenta_map(&s0.r, &s0.v, CoordinateFamily::Parabolic, spec.cfg())?;
    let ps = canonical_momenta_map(&s0.r, &s0.v, CoordinateFamily::Spherical, spec.cfg())?;
    let r = s0.r.norm();
    println!("H parabolic = {:.15}", stark_zeeman_hamiltonian(&to_parabolic(&s0.r), &pp, &spec)?);
    println!("H spherical = {:.15}", stark_zeeman_spherical(r, (s0.r.z / r).acos(), &ps, &spec)?);

    let fields = [0.0, 0.025, 0.05, 0.075, 0.1];
    let rows: Vec<_> = fields
        .par_iter()
        .map(|&b| {
            let spec = SystemSpec::stark_zeeman(1.0, 0.7, -1.0, b, 0.05)?;
            let traj = integrate(&s0, &spec, 500.0, &Controls::default())?;
            traj.check()?;
            Ok((b, monitor(&traj)))
        })
        .collect::<Result<_, micz::error::Error>>()?;
    println!("{:>6} {:>10} {:>10} {:>10}", "B", "E", "p_phi", "I_p");
    for (b, rep) in rows {
        let d = |n: &str| rep.get(n).map_or(f64::NAN, |q| q.max_rel_drift);
        println!("{b:>6.3} {:>10.2e} {:>10.2e} {:>10.2e}", d("E"), d("p_phi"), d("I_p"));
    }
    Ok(())
}
