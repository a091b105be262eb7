//! Cartesian, spherical, elliptic and parabolic coordinates on R³.
//!
//! Elliptic coordinates use foci at `(0, 0, -a)` (focus 1) and `(0, 0, a)`
//! (focus 2), so `xi = (r1 + r2) / 2a` and `eta = (r1 - r2) / 2a`. Parabolic
//! coordinates are `xi = r + z`, `eta = r - z`. The azimuth is shared by all
//! families, normalized to `[0, 2π)` and set to `0` on the z-axis.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::fields::DyonConfig;

pub type Vec3 = nalgebra::Vector3<f64>;

/// A point of R³ in Cartesian components.
pub type CartesianPoint = Vec3;

const AXIS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticPoint {
    pub xi: f64,
    pub eta: f64,
    pub phi: f64,
    /// Focal half-distance.
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicPoint {
    pub xi: f64,
    pub eta: f64,
    pub phi: f64,
}

/// Angles under which the two foci see the point, plus the polar angle
/// about the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicAngles {
    pub cos_theta1: f64,
    pub cos_theta2: f64,
    pub theta: f64,
}

impl KinematicAngles {
    /// Cosine of the angle between the two focal rays, from the law of cosines.
    pub fn cos_difference(&self) -> f64 {
        let s1 = (1.0 - self.cos_theta1 * self.cos_theta1).max(0.0).sqrt();
        let s2 = (1.0 - self.cos_theta2 * self.cos_theta2).max(0.0).sqrt();
        self.cos_theta1 * self.cos_theta2 + s1 * s2
    }
}

/// Azimuth `atan2(y, x)` in `[0, 2π)`; `0` on the z-axis.
pub fn azimuth(p: &Vec3) -> f64 {
    if p.x == 0.0 && p.y == 0.0 {
        return 0.0;
    }
    let phi = p.y.atan2(p.x);
    if phi < 0.0 {
        let wrapped = phi + TAU;
        // atan2 can return -0.0 or a value so small that the shift rounds to 2π
        if wrapped >= TAU {
            0.0
        } else {
            wrapped
        }
    } else {
        phi
    }
}

pub fn focal_distances(p: &Vec3, a: f64) -> (f64, f64) {
    let rho2 = p.x * p.x + p.y * p.y;
    let r1 = (rho2 + (p.z + a) * (p.z + a)).sqrt();
    let r2 = (rho2 + (p.z - a) * (p.z - a)).sqrt();
    (r1, r2)
}

pub fn to_elliptic(p: &Vec3, a: f64) -> EllipticPoint {
    assert!(a > 0.0, "focal half-distance must be positive");
    let (r1, r2) = focal_distances(p, a);
    // rounding can push the pair slightly outside the admissible ranges
    let xi = ((r1 + r2) / (2.0 * a)).max(1.0);
    let eta = ((r1 - r2) / (2.0 * a)).clamp(-1.0, 1.0);
    EllipticPoint { xi, eta, phi: azimuth(p), a }
}

pub fn from_elliptic(q: &EllipticPoint) -> Vec3 {
    let rho = q.a * ((q.xi * q.xi - 1.0).max(0.0) * (1.0 - q.eta * q.eta).max(0.0)).sqrt();
    Vec3::new(rho * q.phi.cos(), rho * q.phi.sin(), q.a * q.xi * q.eta)
}

pub fn to_parabolic(p: &Vec3) -> ParabolicPoint {
    let r = p.norm();
    let (xi, eta) = if p.z >= 0.0 {
        let xi = r + p.z;
        // r - z loses precision near the positive axis; use ρ² / (r + z)
        let eta = if xi > 0.0 { (p.x * p.x + p.y * p.y) / xi } else { 0.0 };
        (xi, eta)
    } else {
        let eta = r - p.z;
        let xi = (p.x * p.x + p.y * p.y) / eta;
        (xi, eta)
    };
    ParabolicPoint { xi, eta, phi: azimuth(p) }
}

pub fn from_parabolic(q: &ParabolicPoint) -> Vec3 {
    let rho = (q.xi * q.eta).max(0.0).sqrt();
    Vec3::new(rho * q.phi.cos(), rho * q.phi.sin(), 0.5 * (q.xi - q.eta))
}

pub fn kinematic_angles(p: &Vec3, a: f64) -> Result<KinematicAngles> {
    let (r1, r2) = focal_distances(p, a);
    if r1 == 0.0 || r2 == 0.0 {
        return Err(Error::AtFocus);
    }
    let r = p.norm();
    let theta = if r > 0.0 { (p.z / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
    Ok(KinematicAngles {
        cos_theta1: (p.z + a) / r1,
        cos_theta2: (p.z - a) / r2,
        theta,
    })
}

/// Target coordinate family for [`canonical_momenta_map`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordinateFamily {
    Spherical,
    Elliptic { a: f64 },
    Parabolic,
}

/// Canonical momenta conjugate to `(q1, q2, phi)`: `(p_r, p_theta)` for
/// spherical targets, `(p_xi, p_eta)` for elliptic and parabolic ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanonicalMomenta {
    pub p1: f64,
    pub p2: f64,
    pub p_phi: f64,
}

/// Canonical azimuthal momentum in the axial gauge.
///
/// Each dyon contributes `A_φ = -g cos θ_i` (the axial form of the field
/// `g r/r³`) and a uniform field along z contributes `A_φ = B ρ²/2`, so
/// `p_φ = ρ² φ̇ - Σ s_i cos θ_i + e B_z ρ²/2`.
pub fn axial_momentum(p: &Vec3, v: &Vec3, cfg: &DyonConfig) -> Result<f64> {
    let rho2 = p.x * p.x + p.y * p.y;
    let mut p_phi = p.x * v.y - p.y * v.x + 0.5 * cfg.e * cfg.b0.z * rho2;
    for (i, d) in cfg.dyons.iter().enumerate() {
        let rel = p - d.position;
        let ri = rel.norm();
        if ri == 0.0 {
            return Err(Error::AtCenter { index: Some(i) });
        }
        p_phi -= cfg.e * d.g * rel.z / ri;
    }
    Ok(p_phi)
}

/// Point transformation `P_Q = v · ∂x/∂Q` (unit mass), plus the gauge part
/// of `p_φ`. The radial-type gauge components vanish in the axial gauge.
pub fn canonical_momenta_map(
    p: &Vec3,
    v: &Vec3,
    target: CoordinateFamily,
    cfg: &DyonConfig,
) -> Result<CanonicalMomenta> {
    let rho2 = p.x * p.x + p.y * p.y;
    let p_phi = axial_momentum(p, v, cfg)?;
    match target {
        CoordinateFamily::Spherical => {
            let r = p.norm();
            if r == 0.0 || rho2.sqrt() <= AXIS_TOL * r {
                return Err(Error::SingularJacobian);
            }
            let rho = rho2.sqrt();
            let r_dot = p.dot(v) / r;
            // θ̇ = (z ṙ - r ż) / (r ρ)
            let theta_dot = (p.z * r_dot - r * v.z) / (r * rho);
            Ok(CanonicalMomenta { p1: r_dot, p2: r * r * theta_dot, p_phi })
        }
        CoordinateFamily::Elliptic { a } => {
            let (r1, r2) = focal_distances(p, a);
            if r1 == 0.0 || r2 == 0.0 {
                return Err(Error::SingularJacobian);
            }
            let q = to_elliptic(p, a);
            let xi2m1 = q.xi * q.xi - 1.0;
            let om_eta2 = 1.0 - q.eta * q.eta;
            if rho2.sqrt() <= AXIS_TOL * a.max(p.norm()) || xi2m1 <= 0.0 || om_eta2 <= 0.0 {
                return Err(Error::SingularJacobian);
            }
            let f1 = Vec3::new(0.0, 0.0, -a);
            let f2 = Vec3::new(0.0, 0.0, a);
            let r1_dot = (p - f1).dot(v) / r1;
            let r2_dot = (p - f2).dot(v) / r2;
            let xi_dot = (r1_dot + r2_dot) / (2.0 * a);
            let eta_dot = (r1_dot - r2_dot) / (2.0 * a);
            let scale = a * a * (q.xi * q.xi - q.eta * q.eta);
            Ok(CanonicalMomenta {
                p1: scale / xi2m1 * xi_dot,
                p2: scale / om_eta2 * eta_dot,
                p_phi,
            })
        }
        CoordinateFamily::Parabolic => {
            let q = to_parabolic(p);
            if q.xi <= 0.0 || q.eta <= 0.0 {
                return Err(Error::SingularJacobian);
            }
            let r_dot = p.dot(v) / p.norm();
            let xi_dot = r_dot + v.z;
            let eta_dot = r_dot - v.z;
            let sum = q.xi + q.eta;
            Ok(CanonicalMomenta {
                p1: sum / (4.0 * q.xi) * xi_dot,
                p2: sum / (4.0 * q.eta) * eta_dot,
                p_phi,
            })
        }
    }
}
