//! Dirac vector potentials, their curl, and string (gauge) changes.
//! The canonical Hamiltonian is the same in every patched gauge.
//!
//! ```bash
//! cargo run --release --example dirac_strings
//! ```

use micz::dynamics::gauge_patch;
use micz::fields::{dirac_vector_potential, finite_difference_curl, monopole_b, Dyon, DyonConfig};
use micz::geometry::Vec3;
use micz::hamiltonians::{canonical_shift, energy, flat_hamiltonian_canonical, SystemSpec};

fn main() -> Result<(), micz::error::Error> {
    let center = Vec3::zeros();
    let string = Vec3::new(0.0, 0.0, -1.0);
    let r = Vec3::new(0.4, -0.3, 0.8);
    let a = dirac_vector_potential(&r, &center, &string)?;
    let curl = finite_difference_curl(|x| dirac_vector_potential(x, &center, &string), &r, 1e-5)?;
    let b = monopole_b(&r, &center, 1.0)?;
    println!("A = {a:?}");
    println!("curl A = {curl:?}");
    println!("B      = {b:?}");

    match dirac_vector_potential(&Vec3::new(0.0, 0.0, -2.0), &center, &string) {
        Err(e) => println!("on the string: {e}"),
        Ok(_) => unreachable!(),
    }

    // a point near the string of a +z string is patched by flipping it
    let cfg = DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), 1.2, -0.5).with_string(Vec3::z())]);
    let spec = SystemSpec::flat(cfg.clone())?;
    let (near, v) = (Vec3::new(0.05, 0.0, 1.0), Vec3::new(0.2, -0.4, 0.1));
    let patched = spec.with_cfg_strings(&gauge_patch(&near, &cfg)?);
    println!("patched string: {:?}", patched.cfg().string_dir(0));
    for (label, s) in [("original", &spec), ("patched", &patched)] {
        let p = v + canonical_shift(&near, s.cfg())?;
        println!("{label:>8}: p = {p:?}, H = {:.15}", flat_hamiltonian_canonical(&near, &p, s)?);
    }
    println!("velocity-form energy {:.15}", energy(&near, &v, &spec)?);
    Ok(())
}
