//! One-center MICZ-Kepler orbit: the motion stays on a cone around the
//! conserved angular momentum `J`, with opening `cos θ = s/|J|`.
//!
//! ```bash
//! cargo run --release --example micz_cone
//! ```

use micz::dynamics::{conserved_quantities, integrate, monitor, Controls, PhaseState};
use micz::fields::{Dyon, DyonConfig};
use micz::geometry::Vec3;
use micz::hamiltonians::SystemSpec;

fn main() -> Result<(), micz::error::Error> {
    let (s, q) = (0.7, -1.0);
    let spec = SystemSpec::flat(DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), s, q)]))?;
    let s0 = PhaseState::new(0.0, Vec3::new(1.0, 0.2, -0.1), Vec3::new(0.1, 0.8, 0.3));

    let c = conserved_quantities(&s0, &spec)?;
    let j = c.j.expect("one-center systems carry J");
    println!("E = {:.12}", c.energy);
    println!("J = ({:.6}, {:.6}, {:.6}), |J| = {:.6}", j.x, j.y, j.z, j.norm());

    let traj = integrate(&s0, &spec, 200.0, &Controls::default())?;
    traj.check()?;
    let report = monitor(&traj);
    let cone = report.get("cone_cos").unwrap();
    println!("r̂·Ĵ: mean {:.12}, std {:.2e}", cone.mean, cone.std_dev);
    println!("s/|J| = {:.12}", s / j.norm());
    for name in ["E", "J_x", "J_y", "J_z"] {
        let d = report.get(name).unwrap();
        println!("{name:>4} max relative drift {:.2e}", d.max_rel_drift);
    }
    Ok(())
}
