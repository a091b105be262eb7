//! Hamiltonian families: flat multi-center, two-center elliptic,
//! Stark-Zeeman parabolic and curved multi-center.
//!
//! Separated forms are written with axial monopole numbers
//! `σ_i = -e g_i`, the sign for which `p_φ = ρ²φ̇ + Σ σ_i cos θ_i` is the
//! canonical azimuthal momentum of the field `B = Σ g_i (r - a_i)/r_i³`.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::{Dyon, DyonConfig, GreenFunction, MetricProfile, CENTER_TOL};
use crate::geometry::{CanonicalMomenta, EllipticPoint, ParabolicPoint, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    FlatMultiCenter,
    TwoCenterElliptic,
    StarkZeemanParabolic,
    CurvedMultiCenter,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::FlatMultiCenter => "flat_multi_center",
            Family::TwoCenterElliptic => "two_center_elliptic",
            Family::StarkZeemanParabolic => "stark_zeeman_parabolic",
            Family::CurvedMultiCenter => "curved_multi_center",
        })
    }
}

/// Validated, immutable description of one system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    family: Family,
    cfg: DyonConfig,
    green: GreenFunction,
    a: Option<f64>,
}

/// Derived constants of the elliptic separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticParams {
    pub a: f64,
    pub sigma_plus: f64,
    pub sigma_minus: f64,
    /// `e (q1 + q2)`.
    pub eq_plus: f64,
    /// `e (q1 - q2)`.
    pub eq_minus: f64,
}

/// Derived constants of the parabolic separation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolicParams {
    pub sigma: f64,
    pub eq: f64,
    /// `e B` with `B = B0·ẑ`.
    pub eb: f64,
    /// `e E` with `E = E0·ẑ`.
    pub ee: f64,
}

impl SystemSpec {
    /// Any number of dyons in flat space, with optional uniform fields.
    pub fn flat(cfg: DyonConfig) -> Result<Self> {
        check_cfg(&cfg)?;
        Ok(SystemSpec { family: Family::FlatMultiCenter, cfg, green: GreenFunction::flat(), a: None })
    }

    /// Dyon 1 `(g1, q1)` at `(0,0,-a)`, dyon 2 `(g2, q2)` at `(0,0,a)`.
    pub fn two_center(a: f64, e: f64, dyon1: (f64, f64), dyon2: (f64, f64)) -> Result<Self> {
        let cfg = DyonConfig::new(
            e,
            vec![
                Dyon::new(Vec3::new(0.0, 0.0, -a), dyon1.0, dyon1.1),
                Dyon::new(Vec3::new(0.0, 0.0, a), dyon2.0, dyon2.1),
            ],
        );
        Self::from_parts(Family::TwoCenterElliptic, cfg, MetricProfile::Flat)
    }

    /// One dyon at the origin in uniform fields `B ẑ` and `E ẑ`.
    pub fn stark_zeeman(e: f64, g: f64, q: f64, b: f64, e_field: f64) -> Result<Self> {
        let cfg = DyonConfig::new(e, vec![Dyon::new(Vec3::zeros(), g, q)])
            .with_uniform_fields(Vec3::new(0.0, 0.0, b), Vec3::new(0.0, 0.0, e_field));
        Self::from_parts(Family::StarkZeemanParabolic, cfg, MetricProfile::Flat)
    }

    /// Dyons on a conformally flat space.
    pub fn curved(cfg: DyonConfig, profile: MetricProfile) -> Result<Self> {
        Self::from_parts(Family::CurvedMultiCenter, cfg, profile)
    }

    /// Validates the family constraints of an assembled configuration.
    pub fn from_parts(family: Family, cfg: DyonConfig, profile: MetricProfile) -> Result<Self> {
        check_cfg(&cfg)?;
        let uniform = cfg.b0 != Vec3::zeros() || cfg.e0 != Vec3::zeros();
        let mut a = None;
        match family {
            Family::FlatMultiCenter => {}
            Family::TwoCenterElliptic => {
                if cfg.dyons.len() != 2 {
                    return Err(Error::InvalidSpec(format!(
                        "two-center family needs exactly 2 dyons, got {}",
                        cfg.dyons.len()
                    )));
                }
                let (p1, p2) = (cfg.dyons[0].position, cfg.dyons[1].position);
                let half = p2.z;
                if !(half > 0.0) || p1 != Vec3::new(0.0, 0.0, -half) || p2 != Vec3::new(0.0, 0.0, half) {
                    return Err(Error::InvalidSpec("two-center dyons must sit at (0,0,-a) and (0,0,a), a > 0".into()));
                }
                if uniform {
                    return Err(Error::InvalidSpec("two-center family takes no uniform fields".into()));
                }
                a = Some(half);
            }
            Family::StarkZeemanParabolic => {
                if cfg.dyons.len() != 1 || cfg.dyons[0].position != Vec3::zeros() {
                    return Err(Error::InvalidSpec("Stark-Zeeman family needs exactly one dyon at the origin".into()));
                }
                if cfg.b0.xy() != nalgebra::Vector2::zeros() || cfg.e0.xy() != nalgebra::Vector2::zeros() {
                    return Err(Error::InvalidSpec("Stark-Zeeman uniform fields must point along z".into()));
                }
            }
            Family::CurvedMultiCenter => {
                if uniform {
                    return Err(Error::InvalidSpec("curved family takes no uniform fields".into()));
                }
            }
        }
        if family != Family::CurvedMultiCenter && !profile.is_flat() {
            return Err(Error::InvalidSpec(format!("family {family} requires the flat metric")));
        }
        Ok(SystemSpec { family, cfg, green: GreenFunction::new(profile), a })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn cfg(&self) -> &DyonConfig {
        &self.cfg
    }

    pub fn profile(&self) -> &MetricProfile {
        self.green.profile()
    }

    pub fn green(&self) -> &GreenFunction {
        &self.green
    }

    /// Focal half-distance of the two-center family.
    pub fn a(&self) -> Option<f64> {
        self.a
    }

    /// Same system with different dyon string directions.
    pub fn with_cfg_strings(&self, cfg: &DyonConfig) -> Self {
        let mut out = self.clone();
        for (d, other) in out.cfg.dyons.iter_mut().zip(&cfg.dyons) {
            d.string_dir = other.string_dir;
        }
        out
    }

    pub fn elliptic_params(&self) -> Result<EllipticParams> {
        let a = self.a.ok_or_else(|| Error::FamilyMismatch(format!("elliptic separation needs the two-center family, got {}", self.family)))?;
        let e = self.cfg.e;
        let (d1, d2) = (&self.cfg.dyons[0], &self.cfg.dyons[1]);
        let (sig1, sig2) = (-e * d1.g, -e * d2.g);
        Ok(EllipticParams {
            a,
            sigma_plus: sig1 + sig2,
            sigma_minus: sig1 - sig2,
            eq_plus: e * (d1.q + d2.q),
            eq_minus: e * (d1.q - d2.q),
        })
    }

    pub fn parabolic_params(&self) -> Result<ParabolicParams> {
        if self.family != Family::StarkZeemanParabolic {
            return Err(Error::FamilyMismatch(format!("parabolic separation needs the Stark-Zeeman family, got {}", self.family)));
        }
        let e = self.cfg.e;
        let d = &self.cfg.dyons[0];
        Ok(ParabolicParams { sigma: -e * d.g, eq: e * d.q, eb: e * self.cfg.b0.z, ee: e * self.cfg.e0.z })
    }
}

fn check_cfg(cfg: &DyonConfig) -> Result<()> {
    let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
    if !cfg.e.is_finite() || !finite(&cfg.b0) || !finite(&cfg.e0) {
        return Err(Error::InvalidSpec("non-finite probe charge or uniform field".into()));
    }
    for (i, d) in cfg.dyons.iter().enumerate() {
        if !finite(&d.position) || !d.g.is_finite() || !d.q.is_finite() {
            return Err(Error::InvalidSpec(format!("dyon {i} has non-finite data")));
        }
        if let Some(n) = d.string_dir {
            if !finite(&n) || (n.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidSpec(format!("dyon {i} string direction is not a unit vector")));
            }
        }
        for (j, o) in cfg.dyons[..i].iter().enumerate() {
            if (d.position - o.position).norm() < CENTER_TOL {
                return Err(Error::InvalidSpec(format!("dyons {j} and {i} coincide")));
            }
        }
    }
    Ok(())
}

/// Energy split into its physical parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// `½ (Σ s_i / r_i)²`.
    pub micz_quadratic: f64,
    /// `Σ e q_i / r_i`.
    pub coulomb: f64,
    /// Uniform-field terms: `½ (e B0·r)² - (Σ s_i/r_i)(e B0·r) - e E0·r`.
    pub external: f64,
    pub total: f64,
}

/// Flat-space potential `U = ½ (Σ s_i/r_i - e B0·r)² + Σ e q_i/r_i - e E0·r`
/// and its gradient.
pub fn flat_potential(cfg: &DyonConfig, r: &Vec3) -> Result<(f64, Vec3)> {
    let e = cfg.e;
    let mut m = -e * cfg.b0.dot(r);
    let mut grad_m = -e * cfg.b0;
    let mut coulomb = 0.0;
    let mut grad_c = Vec3::zeros();
    for (i, d) in cfg.dyons.iter().enumerate() {
        let rel = r - d.position;
        let ri = rel.norm();
        if ri < CENTER_TOL {
            return Err(Error::AtCenter { index: Some(i) });
        }
        let inv3 = 1.0 / (ri * ri * ri);
        m += e * d.g / ri;
        grad_m -= rel * (e * d.g * inv3);
        coulomb += e * d.q / ri;
        grad_c -= rel * (e * d.q * inv3);
    }
    let u = 0.5 * m * m + coulomb - e * cfg.e0.dot(r);
    Ok((u, grad_m * m + grad_c - e * cfg.e0))
}

/// Energy of the flat families from position and velocity.
pub fn flat_hamiltonian(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<EnergyBreakdown> {
    let cfg = &spec.cfg;
    let e = cfg.e;
    let mut sum_s = 0.0;
    let mut coulomb = 0.0;
    for (i, d) in cfg.dyons.iter().enumerate() {
        let ri = (r - d.position).norm();
        if ri < CENTER_TOL {
            return Err(Error::AtCenter { index: Some(i) });
        }
        sum_s += e * d.g / ri;
        coulomb += e * d.q / ri;
    }
    let eb = e * cfg.b0.dot(r);
    let kinetic = 0.5 * v.norm_squared();
    let micz_quadratic = 0.5 * sum_s * sum_s;
    let external = 0.5 * eb * eb - sum_s * eb - e * cfg.e0.dot(r);
    Ok(EnergyBreakdown { kinetic, micz_quadratic, coulomb, external, total: kinetic + micz_quadratic + coulomb + external })
}

/// Flat Hamiltonian in canonical form `(p - e A_total - ½ e B0 × r)²/2 + U`
/// with the Dirac potentials of the configured strings.
pub fn flat_hamiltonian_canonical(r: &Vec3, p: &Vec3, spec: &SystemSpec) -> Result<f64> {
    let v = p - canonical_shift(r, &spec.cfg)?;
    Ok(0.5 * v.norm_squared() + flat_potential(&spec.cfg, r)?.0)
}

/// `e A_total + ½ e B0 × r`, the difference between canonical and kinetic
/// momentum.
pub fn canonical_shift(r: &Vec3, cfg: &DyonConfig) -> Result<Vec3> {
    let mut a = 0.5 * cfg.b0.cross(r);
    for (i, d) in cfg.dyons.iter().enumerate() {
        let ad = crate::fields::dirac_vector_potential(r, &d.position, &cfg.string_dir(i)).map_err(|e| e.with_index(i))?;
        a += ad * d.g;
    }
    Ok(a * cfg.e)
}

/// `V(ξ) = (p_φ² + σ₋² - 2 p_φ σ₋ ξ)/(ξ² - 1) + 2 a e q₊ ξ`.
///
/// Returns `+∞` at `ξ = 1` unless the centrifugal numerator vanishes there.
pub fn v_elliptic(xi: f64, p_phi: f64, k: &EllipticParams) -> f64 {
    let num = (p_phi - k.sigma_minus * xi).powi(2);
    let den = xi * xi - 1.0;
    let cent = if den == 0.0 { if num == 0.0 { 0.0 } else { f64::INFINITY } } else { num / den };
    cent - k.sigma_minus * k.sigma_minus + 2.0 * k.a * k.eq_plus * xi
}

/// `W(η) = (p_φ² + σ₊² - 2 p_φ σ₊ η)/(1 - η²) - 2 a e q₋ η`.
pub fn w_elliptic(eta: f64, p_phi: f64, k: &EllipticParams) -> f64 {
    let num = (p_phi - k.sigma_plus * eta).powi(2);
    let den = 1.0 - eta * eta;
    let cent = if den == 0.0 { if num == 0.0 { 0.0 } else { f64::INFINITY } } else { num / den };
    cent + k.sigma_plus * k.sigma_plus - 2.0 * k.a * k.eq_minus * eta
}

/// `H = [(ξ²-1) p_ξ² + (1-η²) p_η² + V(ξ) + W(η)] / (2a²(ξ²-η²))`.
pub fn elliptic_hamiltonian(q: &EllipticPoint, p: &CanonicalMomenta, spec: &SystemSpec) -> Result<f64> {
    let k = spec.elliptic_params()?;
    let (xi, eta) = (q.xi, q.eta);
    let den = xi * xi - eta * eta;
    if den <= 0.0 {
        return Err(Error::AtFocus);
    }
    let v = v_elliptic(xi, p.p_phi, &k);
    let w = w_elliptic(eta, p.p_phi, &k);
    if v.is_infinite() || w.is_infinite() {
        return Err(Error::BoundaryDegenerate);
    }
    let num = (xi * xi - 1.0) * p.p1 * p.p1 + (1.0 - eta * eta) * p.p2 * p.p2 + v + w;
    Ok(num / (2.0 * k.a * k.a * den))
}

/// `V(ξ) = (p_φ+σ)²/ξ + 3σeBξ - eEξ² + e²B²ξ³/4 + 2eq`.
pub fn v_parabolic(xi: f64, p_phi: f64, k: &ParabolicParams) -> f64 {
    (p_phi + k.sigma).powi(2) / xi + 3.0 * k.sigma * k.eb * xi - k.ee * xi * xi + k.eb * k.eb * xi.powi(3) / 4.0
        + 2.0 * k.eq
}

/// `W(η) = (p_φ-σ)²/η - 3σeBη + eEη² + e²B²η³/4 + 2eq`.
pub fn w_parabolic(eta: f64, p_phi: f64, k: &ParabolicParams) -> f64 {
    (p_phi - k.sigma).powi(2) / eta - 3.0 * k.sigma * k.eb * eta + k.ee * eta * eta + k.eb * k.eb * eta.powi(3) / 4.0
        + 2.0 * k.eq
}

/// `H = (4ξp_ξ² + 4ηp_η² + V(ξ) + W(η)) / (2(ξ+η)) - ½ p_φ e B`.
pub fn stark_zeeman_hamiltonian(q: &ParabolicPoint, p: &CanonicalMomenta, spec: &SystemSpec) -> Result<f64> {
    let k = spec.parabolic_params()?;
    let sum = q.xi + q.eta;
    if sum < CENTER_TOL || q.xi <= 0.0 || q.eta <= 0.0 {
        return Err(Error::AtOrigin);
    }
    let num = 4.0 * q.xi * p.p1 * p.p1 + 4.0 * q.eta * p.p2 * p.p2 + v_parabolic(q.xi, p.p_phi, &k)
        + w_parabolic(q.eta, p.p_phi, &k);
    Ok(num / (2.0 * sum) - 0.5 * p.p_phi * k.eb)
}

/// Spherical-gauge form in spherical coordinates `(r, θ)` with momenta
/// `(p_r, p_θ, p_φ)`:
/// `p_r²/2 + p_θ²/2r² + (p_φ - σ cosθ - ½eBr²sin²θ)²/(2r²sin²θ) + ½(σ/r + eBz)² + eq/r - eEz`.
pub fn stark_zeeman_spherical(r: f64, theta: f64, p: &CanonicalMomenta, spec: &SystemSpec) -> Result<f64> {
    let k = spec.parabolic_params()?;
    if r < CENTER_TOL {
        return Err(Error::AtCenter { index: Some(0) });
    }
    let (sin, cos) = theta.sin_cos();
    let rho2 = r * r * sin * sin;
    if rho2 == 0.0 {
        return Err(Error::SingularJacobian);
    }
    let z = r * cos;
    let az = p.p_phi - k.sigma * cos - 0.5 * k.eb * rho2;
    Ok(0.5 * p.p1 * p.p1 + p.p2 * p.p2 / (2.0 * r * r) + az * az / (2.0 * rho2)
        + 0.5 * (k.sigma / r + k.eb * z).powi(2)
        + k.eq / r
        - k.ee * z)
}

/// Curved potential `½ e² φ_g² + e φ_q` and its gradient.
pub fn curved_potential(spec: &SystemSpec, r: &Vec3) -> Result<(f64, Vec3)> {
    let cfg = &spec.cfg;
    let e = cfg.e;
    let (mut phi_g, mut phi_q) = (0.0, 0.0);
    let (mut grad_g, mut grad_q) = (Vec3::zeros(), Vec3::zeros());
    for (i, d) in cfg.dyons.iter().enumerate() {
        let rel = r - d.position;
        let ri = rel.norm();
        if ri < CENTER_TOL {
            return Err(Error::AtCenter { index: Some(i) });
        }
        let phi = spec.green.value(ri)?;
        let dphi = rel * (spec.green.derivative(ri)? / ri);
        phi_g += d.g * phi;
        phi_q += d.q * phi;
        grad_g += dphi * d.g;
        grad_q += dphi * d.q;
    }
    Ok((0.5 * e * e * phi_g * phi_g + e * phi_q, grad_g * (e * e * phi_g) + grad_q * e))
}

/// `G(|r|)` and `∇G`.
pub fn metric_factor(profile: &MetricProfile, r: &Vec3) -> Result<(f64, Vec3)> {
    let d = r.norm();
    let g = profile.g(d)?;
    let grad = if d == 0.0 { Vec3::zeros() } else { r * (profile.dg_dr(d)? / d) };
    Ok((g, grad))
}

/// `(p - eA)²/(2G) + e²φ_g²/2 + eφ_q` evaluated from velocity,
/// so that the kinetic part is `G |v|²/2`.
pub fn curved_hamiltonian(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<f64> {
    let (g, _) = metric_factor(spec.profile(), r)?;
    Ok(0.5 * g * v.norm_squared() + curved_potential(spec, r)?.0)
}

/// Completed-square form `G|v|²/2 + ½ (e φ_g + λ)²` available when all dyons
/// share the ratio `λ = q_i/g_i`; it exceeds the defining form by `λ²/2`.
pub fn curved_hamiltonian_dsz(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<f64> {
    let lambda = crate::fields::dsz_check(&spec.cfg)
        .ok_or_else(|| Error::InvalidSpec("dyon charges do not share a common ratio".into()))?;
    let (g, _) = metric_factor(spec.profile(), r)?;
    let e = spec.cfg.e;
    let mut phi_g = 0.0;
    for (i, d) in spec.cfg.dyons.iter().enumerate() {
        let ri = (r - d.position).norm();
        if ri < CENTER_TOL {
            return Err(Error::AtCenter { index: Some(i) });
        }
        phi_g += d.g * spec.green.value(ri)?;
    }
    Ok(0.5 * g * v.norm_squared() + 0.5 * (e * phi_g + lambda).powi(2))
}

/// One-center MICZ replacement on a curved space:
/// `G|v|²/2 + s²/(2 G r_1²) + e q φ_C(r_1)`.
pub fn curved_replacement_form(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<f64> {
    if spec.cfg.dyons.len() != 1 {
        return Err(Error::FamilyMismatch("replacement form is defined for one center".into()));
    }
    let d = &spec.cfg.dyons[0];
    let rel = r - d.position;
    let ri = rel.norm();
    if ri < CENTER_TOL {
        return Err(Error::AtCenter { index: Some(0) });
    }
    let (g, _) = metric_factor(spec.profile(), r)?;
    let s = spec.cfg.e * d.g;
    let u = spec.cfg.e * d.q * spec.green.value(ri)?;
    let centers = [(d.position, s)];
    let potential = micz_replace(|_| u, spec.profile(), &centers)(r);
    Ok(0.5 * g * v.norm_squared() + potential)
}

/// `U ↦ U + (1/2G) (Σ s_i / r_i)²` with `G` evaluated at `|r|`.
pub fn micz_replace<'a, U>(u: U, profile: &'a MetricProfile, centers: &'a [(Vec3, f64)]) -> impl Fn(&Vec3) -> f64 + 'a
where
    U: Fn(&Vec3) -> f64 + 'a,
{
    move |r: &Vec3| {
        let sum: f64 = centers.iter().map(|(c, s)| s / (r - c).norm()).sum();
        let g = profile.g(r.norm()).unwrap_or(f64::NAN);
        u(r) + sum * sum / (2.0 * g)
    }
}

/// Interaction energy `-M·B` of the orbital magnetic moment `M = eJ/2`
/// with the field of a single monopole, `J = r×v - s r̂`.
pub fn moment_field_energy(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<f64> {
    let d = spec
        .cfg
        .dyons
        .first()
        .filter(|_| spec.cfg.dyons.len() == 1)
        .ok_or_else(|| Error::FamilyMismatch("moment energy is defined for one center".into()))?;
    let rel = r - d.position;
    let s = spec.cfg.e * d.g;
    let j = rel.cross(v) - rel.normalize() * s;
    let b = crate::fields::monopole_b(r, &d.position, d.g)?;
    Ok(-0.5 * spec.cfg.e * j.dot(&b))
}

/// Energy for any family, from position and velocity.
pub fn energy(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<f64> {
    match spec.family {
        Family::CurvedMultiCenter => curved_hamiltonian(r, v, spec),
        _ => Ok(flat_hamiltonian(r, v, spec)?.total),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{canonical_momenta_map, to_elliptic, to_parabolic, CoordinateFamily};
    use proptest::prelude::*;

    fn one(g: f64, q: f64) -> SystemSpec {
        SystemSpec::flat(DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), g, q)])).unwrap()
    }

    #[test]
    fn flat_examples() {
        let h = flat_hamiltonian(&Vec3::new(2.0, 0.0, 0.0), &Vec3::zeros(), &one(0.0, -1.0)).unwrap();
        assert_eq!(h.total, -0.5);
        let h = flat_hamiltonian(&Vec3::new(0.0, 1.0, 0.0), &Vec3::zeros(), &one(1.0, 0.0)).unwrap();
        assert_eq!(h.total, 0.5);
        let spec = SystemSpec::two_center(1.0, 1.0, (1.0, 0.0), (1.0, 0.0)).unwrap();
        let h = flat_hamiltonian(&Vec3::zeros(), &Vec3::zeros(), &spec).unwrap();
        assert_eq!(h.total, 2.0);
    }

    #[test]
    fn breakdown_sums_to_total() {
        let cfg = DyonConfig::new(0.7, vec![Dyon::new(Vec3::new(0.1, 0.0, 0.3), 1.3, -0.4), Dyon::new(Vec3::zeros(), -0.5, 0.9)])
            .with_uniform_fields(Vec3::new(0.02, -0.03, 0.05), Vec3::new(0.01, 0.0, -0.04));
        let spec = SystemSpec::flat(cfg).unwrap();
        let h = flat_hamiltonian(&Vec3::new(0.4, -1.1, 0.8), &Vec3::new(0.2, 0.3, -0.1), &spec).unwrap();
        let sum = h.kinetic + h.micz_quadratic + h.coulomb + h.external;
        assert!((h.total - sum).abs() < 1e-14);
    }

    #[test]
    fn potential_gradient_matches_finite_differences() {
        let cfg = DyonConfig::new(0.7, vec![Dyon::new(Vec3::new(0.1, 0.0, 0.3), 1.3, -0.4), Dyon::new(Vec3::zeros(), -0.5, 0.9)])
            .with_uniform_fields(Vec3::new(0.02, -0.03, 0.05), Vec3::new(0.01, 0.0, -0.04));
        let r = Vec3::new(0.4, -1.1, 0.8);
        let (_, grad) = flat_potential(&cfg, &r).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut d = Vec3::zeros();
            d[k] = h;
            let fd = (flat_potential(&cfg, &(r + d)).unwrap().0 - flat_potential(&cfg, &(r - d)).unwrap().0) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn spec_validation() {
        let three = DyonConfig::new(
            1.0,
            (0..3).map(|i| Dyon::new(Vec3::new(0.0, 0.0, i as f64 - 1.0), 1.0, 0.0)).collect(),
        );
        assert!(matches!(
            SystemSpec::from_parts(Family::TwoCenterElliptic, three, MetricProfile::Flat),
            Err(Error::InvalidSpec(_))
        ));
        let off = DyonConfig::new(1.0, vec![Dyon::new(Vec3::new(0.0, 0.0, 1.0), 1.0, 0.0)]);
        assert!(SystemSpec::from_parts(Family::StarkZeemanParabolic, off, MetricProfile::Flat).is_err());
        let tilted = DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), 1.0, 0.0)])
            .with_uniform_fields(Vec3::new(0.1, 0.0, 0.0), Vec3::zeros());
        assert!(SystemSpec::from_parts(Family::StarkZeemanParabolic, tilted, MetricProfile::Flat).is_err());
        assert!(SystemSpec::two_center(-1.0, 1.0, (0.0, 0.0), (0.0, 0.0)).is_err());
        let sphere = MetricProfile::sphere(1.0).unwrap();
        let cfg = DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), 1.0, 0.0)]);
        assert!(SystemSpec::from_parts(Family::FlatMultiCenter, cfg.clone(), sphere.clone()).is_err());
        assert!(SystemSpec::curved(cfg, sphere).is_ok());
        assert!(matches!(one(1.0, 0.0).elliptic_params(), Err(Error::FamilyMismatch(_))));
    }

    #[test]
    fn separated_potential_examples() {
        let k = EllipticParams { a: 1.0, sigma_plus: 0.0, sigma_minus: 0.0, eq_plus: 1.0, eq_minus: 0.0 };
        assert_eq!(v_elliptic(2.0, 0.0, &k), 4.0);
        for &eta in &[-0.9, 0.0, 0.3] {
            assert_eq!(w_elliptic(eta, 0.0, &k), 0.0);
        }
        // σ1 = 1, σ2 = 0
        let k = EllipticParams { a: 1.0, sigma_plus: 1.0, sigma_minus: 1.0, eq_plus: 0.0, eq_minus: 0.0 };
        assert!((v_elliptic(2.0, 1.0, &k) + 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(v_elliptic(1.0, 0.5, &k), f64::INFINITY);
        assert!(v_elliptic(1.0, 1.0, &k).is_finite());

        let k = ParabolicParams { sigma: 0.0, eq: 0.0, eb: 0.0, ee: 0.0 };
        assert_eq!(v_parabolic(2.0, 1.0, &k), 0.5);
        let k = ParabolicParams { sigma: 0.7, eq: 0.0, eb: 0.0, ee: 0.0 };
        for &xi in &[0.1, 1.0, 7.0] {
            assert_eq!(v_parabolic(xi, -0.7, &k), 0.0);
        }
        let k = ParabolicParams { sigma: 1.0, eq: 0.0, eb: 1.0, ee: 0.0 };
        assert_eq!(w_parabolic(2.0, 0.0, &k), -3.5);
    }

    #[test]
    fn elliptic_charges_only_is_coulomb() {
        let spec = SystemSpec::two_center(0.7, 1.3, (0.0, 0.4), (0.0, -1.1)).unwrap();
        let r = Vec3::new(0.3, -0.2, 0.5);
        let q = to_elliptic(&r, 0.7);
        let p = CanonicalMomenta { p1: 0.0, p2: 0.0, p_phi: 0.0 };
        let h = elliptic_hamiltonian(&q, &p, &spec).unwrap();
        let flat = flat_hamiltonian(&r, &Vec3::zeros(), &spec).unwrap();
        assert!((h - flat.coulomb).abs() < 1e-14);
    }

    #[test]
    fn elliptic_boundary_and_focus() {
        let spec = SystemSpec::two_center(1.0, 1.0, (0.5, 0.0), (0.0, 0.0)).unwrap();
        let p = CanonicalMomenta { p1: 0.0, p2: 0.0, p_phi: 2.0 };
        let q = EllipticPoint { xi: 1.0, eta: 0.2, phi: 0.0, a: 1.0 };
        assert_eq!(elliptic_hamiltonian(&q, &p, &spec), Err(Error::BoundaryDegenerate));
        let q = EllipticPoint { xi: 1.0, eta: 1.0, phi: 0.0, a: 1.0 };
        assert_eq!(elliptic_hamiltonian(&q, &p, &spec), Err(Error::AtFocus));
    }

    #[test]
    fn stark_zeeman_examples() {
        let spec = SystemSpec::stark_zeeman(1.0, 0.0, -1.0, 0.0, 0.0).unwrap();
        let (r, v) = (Vec3::new(0.6, 0.8, 0.0), Vec3::new(-0.8, 0.6, 0.0));
        let q = to_parabolic(&r);
        let p = canonical_momenta_map(&r, &v, CoordinateFamily::Parabolic, spec.cfg()).unwrap();
        assert!((stark_zeeman_hamiltonian(&q, &p, &spec).unwrap() + 0.5).abs() < 1e-15);
        let spec = SystemSpec::stark_zeeman(1.0, 0.0, 0.0, 0.0, 0.0).unwrap();
        let p = CanonicalMomenta { p1: 0.0, p2: 0.0, p_phi: 0.0 };
        assert_eq!(stark_zeeman_hamiltonian(&q, &p, &spec).unwrap(), 0.0);
        let origin = ParabolicPoint { xi: 0.0, eta: 0.0, phi: 0.0 };
        assert_eq!(stark_zeeman_hamiltonian(&origin, &p, &spec), Err(Error::AtOrigin));
    }

    #[test]
    fn curved_examples() {
        let cfg = DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), 1.0, 0.0)]);
        let spec = SystemSpec::curved(cfg.clone(), MetricProfile::sphere(1.0).unwrap()).unwrap();
        let h = curved_hamiltonian(&Vec3::new(0.0, 0.0, 1.0), &Vec3::zeros(), &spec).unwrap();
        assert!(h.abs() < 1e-16);

        let cfg = DyonConfig::new(0.8, vec![Dyon::new(Vec3::new(0.2, 0.0, 0.0), 1.1, -0.3), Dyon::new(Vec3::zeros(), -0.4, 0.5)]);
        let flat = SystemSpec::flat(cfg.clone()).unwrap();
        let curved_flat = SystemSpec::curved(cfg, MetricProfile::Flat).unwrap();
        let (r, v) = (Vec3::new(0.5, 0.6, -0.7), Vec3::new(0.1, -0.4, 0.2));
        let a = flat_hamiltonian(&r, &v, &flat).unwrap().total;
        let b = curved_hamiltonian(&r, &v, &curved_flat).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn curved_potential_gradient_matches_finite_differences() {
        let cfg = DyonConfig::new(0.8, vec![Dyon::new(Vec3::new(0.2, 0.0, 0.0), 1.1, -0.3), Dyon::new(Vec3::zeros(), -0.4, 0.5)]);
        let spec = SystemSpec::curved(cfg, MetricProfile::pseudosphere(0.9).unwrap()).unwrap();
        let r = Vec3::new(0.3, 0.4, -0.2);
        let (_, grad) = curved_potential(&spec, &r).unwrap();
        let h = 1e-6;
        for k in 0..3 {
            let mut d = Vec3::zeros();
            d[k] = h;
            let fd = (curved_potential(&spec, &(r + d)).unwrap().0 - curved_potential(&spec, &(r - d)).unwrap().0) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7 * (1.0 + grad[k].abs()));
        }
    }

    #[test]
    fn micz_replace_examples() {
        let flat = MetricProfile::Flat;
        let c1 = [(Vec3::zeros(), 1.0)];
        let f = micz_replace(|_| 0.0, &flat, &c1);
        assert_eq!(f(&Vec3::new(2.0, 0.0, 0.0)), 0.125);
        let c0 = [(Vec3::zeros(), 0.0)];
        let f = micz_replace(|r: &Vec3| r.x * 3.0, &flat, &c0);
        assert_eq!(f(&Vec3::new(2.0, 0.0, 0.0)), 6.0);
        let c2 = [(Vec3::new(0.0, 0.0, 1.0), 1.0), (Vec3::new(0.0, 0.0, -1.0), 1.0)];
        let f = micz_replace(|_| 0.0, &flat, &c2);
        let d = 2f64.sqrt();
        assert!((f(&Vec3::new(1.0, 0.0, 0.0)) - 2.0 / (d * d)).abs() < 1e-15);

        // with G = 1 and the Coulomb U it reproduces the flat potential
        let spec = SystemSpec::two_center(1.0, 1.0, (0.6, 0.3), (-1.2, 0.8)).unwrap();
        let cs = [(Vec3::new(0.0, 0.0, -1.0), 0.6), (Vec3::new(0.0, 0.0, 1.0), -1.2)];
        let coulomb = |r: &Vec3| 0.3 / (r - cs[0].0).norm() + 0.8 / (r - cs[1].0).norm();
        let f = micz_replace(coulomb, &flat, &cs);
        let r = Vec3::new(0.4, -0.3, 0.2);
        assert!((f(&r) - flat_potential(spec.cfg(), &r).unwrap().0).abs() < 1e-14);
    }

    #[test]
    fn moment_energy_is_centrifugal_term() {
        let spec = one(1.7, 0.0);
        let (r, v) = (Vec3::new(0.3, -0.8, 0.5), Vec3::new(0.9, 0.1, -0.4));
        let u = moment_field_energy(&r, &v, &spec).unwrap();
        assert!((u - 1.7f64.powi(2) / (2.0 * r.norm_squared())).abs() < 1e-14);
    }

    fn admissible(r: &Vec3) -> bool {
        let rho = (r.x * r.x + r.y * r.y).sqrt();
        rho > 1e-2 && r.norm() > 0.05
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn elliptic_equals_cartesian(
            a in 0.3f64..2.0, e in -1.5f64..1.5,
            g1 in -2.0f64..2.0, g2 in -2.0f64..2.0, q1 in -2.0f64..2.0, q2 in -2.0f64..2.0,
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
            vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
        ) {
            let r = Vec3::new(x, y, z);
            prop_assume!(admissible(&r));
            let spec = SystemSpec::two_center(a, e, (g1, q1), (g2, q2)).unwrap();
            let v = Vec3::new(vx, vy, vz);
            let (r1, r2) = crate::geometry::focal_distances(&r, a);
            prop_assume!(r1 > 1e-2 && r2 > 1e-2);
            let p = canonical_momenta_map(&r, &v, CoordinateFamily::Elliptic { a }, spec.cfg()).unwrap();
            let he = elliptic_hamiltonian(&to_elliptic(&r, a), &p, &spec).unwrap();
            let hc = flat_hamiltonian(&r, &v, &spec).unwrap().total;
            prop_assert!((he - hc).abs() < 1e-9 * (1.0 + hc.abs()), "{he} vs {hc}");
        }

        #[test]
        fn parabolic_equals_spherical_and_cartesian(
            e in -1.5f64..1.5, g in -2.0f64..2.0, q in -2.0f64..2.0, b in 0.0f64..0.1, ef in 0.0f64..0.1,
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
            vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
        ) {
            let r = Vec3::new(x, y, z);
            prop_assume!(admissible(&r));
            let spec = SystemSpec::stark_zeeman(e, g, q, b, ef).unwrap();
            let v = Vec3::new(vx, vy, vz);
            let pp = canonical_momenta_map(&r, &v, CoordinateFamily::Parabolic, spec.cfg()).unwrap();
            let ps = canonical_momenta_map(&r, &v, CoordinateFamily::Spherical, spec.cfg()).unwrap();
            let hp = stark_zeeman_hamiltonian(&to_parabolic(&r), &pp, &spec).unwrap();
            let hs = stark_zeeman_spherical(r.norm(), (r.z / r.norm()).acos(), &ps, &spec).unwrap();
            let hc = flat_hamiltonian(&r, &v, &spec).unwrap().total;
            prop_assert!((hp - hs).abs() < 1e-9 * (1.0 + hs.abs()), "{hp} vs {hs}");
            prop_assert!((hs - hc).abs() < 1e-9 * (1.0 + hc.abs()), "{hs} vs {hc}");
        }

        #[test]
        fn canonical_form_matches_velocity_form(
            g1 in -2.0f64..2.0, g2 in -2.0f64..2.0,
            x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
            vx in -2.0f64..2.0, vy in -2.0f64..2.0, vz in -2.0f64..2.0,
        ) {
            let cfg = DyonConfig::new(0.9, vec![
                Dyon::new(Vec3::new(0.0, 0.0, -0.5), g1, 0.3),
                Dyon::new(Vec3::new(0.4, 0.1, 0.5), g2, -0.7),
            ]).with_uniform_fields(Vec3::new(0.0, 0.02, 0.05), Vec3::zeros());
            let spec = SystemSpec::flat(cfg).unwrap();
            let (r, v) = (Vec3::new(x, y, z), Vec3::new(vx, vy, vz));
            let shift = canonical_shift(&r, spec.cfg());
            prop_assume!(shift.is_ok() && spec.cfg().colliding(&r, 0.05).is_none());
            let p = v + shift.unwrap();
            let hc = flat_hamiltonian_canonical(&r, &p, &spec).unwrap();
            let hv = flat_hamiltonian(&r, &v, &spec).unwrap().total;
            prop_assert!((hc - hv).abs() < 1e-9 * (1.0 + hv.abs()));
        }
    }
}
