//! Dyons on the sphere and pseudosphere. Compares the curved Hamiltonian
//! with the one-center replacement form and, for dyons sharing one charge
//! ratio, with the DSZ form. Both differences are state-independent.
//!
//! ```bash
//! cargo run --release --example curved_dsz
//! ```

use micz::dynamics::{integrate, monitor, Controls, PhaseState};
use micz::fields::{dsz_check, Dyon, DyonConfig, MetricProfile};
use micz::geometry::Vec3;
use micz::hamiltonians::{curved_hamiltonian, curved_hamiltonian_dsz, curved_replacement_form, SystemSpec};

fn main() -> Result<(), micz::error::Error> {
    let states = [
        (Vec3::new(0.3, 0.1, -0.2), Vec3::new(0.1, 0.4, 0.0)),
        (Vec3::new(-0.5, 0.2, 0.4), Vec3::new(-0.3, 0.0, 0.2)),
        (Vec3::new(0.1, -0.7, 0.1), Vec3::new(0.0, 0.1, -0.6)),
    ];

    let s = 0.8;
    for profile in [MetricProfile::sphere(1.5)?, MetricProfile::pseudosphere(2.0)?] {
        let spec = SystemSpec::curved(DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), s, -0.7)]), profile.clone())?;
        let (eps, r0) = (profile.epsilon().unwrap(), profile.r0().unwrap());
        print!("{profile}: H - H_rep =");
        for (r, v) in &states {
            print!(" {:.12}", curved_hamiltonian(r, v, &spec)? - curved_replacement_form(r, v, &spec)?);
        }
        println!("  (-εs²/2r0² = {:.12})", -eps * s * s / (2.0 * r0 * r0));
    }

    let lambda = -0.7;
    let cfg = DyonConfig::new(
        1.0,
        vec![Dyon::new(Vec3::new(0.0, 0.0, 0.2), 0.8, 0.8 * lambda), Dyon::new(Vec3::new(0.3, -0.1, 0.0), -0.5, -0.5 * lambda)],
    );
    println!("DSZ ratio q/g = {:?}", dsz_check(&cfg));
    let spec = SystemSpec::curved(cfg, MetricProfile::sphere(1.2)?)?;
    print!("H - H_dsz =");
    for (r, v) in &states {
        print!(" {:.12}", curved_hamiltonian(r, v, &spec)? - curved_hamiltonian_dsz(r, v, &spec)?);
    }
    println!("  (-λ²/2 = {:.12})", -lambda * lambda / 2.0);

    let traj = integrate(&PhaseState::new(0.0, Vec3::new(0.4, 0.1, 0.0), Vec3::new(0.0, 0.1, 0.05)), &spec, 50.0, &Controls::default())?;
    traj.check()?;
    println!("energy drift on the sphere over t = 50: {:.2e}", monitor(&traj).get("E").unwrap().max_rel_drift);
    Ok(())
}
