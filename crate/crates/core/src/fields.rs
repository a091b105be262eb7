//! Dyon fields: Dirac vector potentials, monopole fields, and the
//! so(3)-invariant Green functions of conformally flat metrics.

use std::fmt;

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::numeric::{adaptive_gk, MonotoneCubic};

/// Relative distance below which a point counts as lying on a Dirac string.
pub const STRING_TOL: f64 = 1e-9;
/// Absolute distance below which a point coincides with a center.
pub const CENTER_TOL: f64 = 1e-12;

/// A fixed dyon with magnetic charge `g` and electric charge `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dyon {
    pub position: Vec3,
    pub g: f64,
    pub q: f64,
    /// Direction of the Dirac string; `None` selects the per-index default.
    pub string_dir: Option<Vec3>,
}

impl Dyon {
    pub fn new(position: Vec3, g: f64, q: f64) -> Self {
        Dyon { position, g, q, string_dir: None }
    }

    pub fn with_string(mut self, dir: Vec3) -> Self {
        self.string_dir = Some(dir.normalize());
        self
    }
}

/// Default string direction for dyon `index`: `-ẑ` tilted by a small
/// index-dependent angle so that strings of dyons placed on the z-axis never
/// coincide.
pub fn default_string_dir(index: usize) -> Vec3 {
    let tilt = 0.01 * (index as f64 + 1.0);
    let turn = 2.399_963_229_728_653 * index as f64;
    Vec3::new(tilt.sin() * turn.cos(), tilt.sin() * turn.sin(), -tilt.cos())
}

/// Background dyons, probe charge `e`, and uniform fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DyonConfig {
    pub dyons: Vec<Dyon>,
    pub e: f64,
    pub b0: Vec3,
    pub e0: Vec3,
}

impl DyonConfig {
    pub fn new(e: f64, dyons: Vec<Dyon>) -> Self {
        DyonConfig { dyons, e, b0: Vec3::zeros(), e0: Vec3::zeros() }
    }

    pub fn with_uniform_fields(mut self, b0: Vec3, e0: Vec3) -> Self {
        self.b0 = b0;
        self.e0 = e0;
        self
    }

    /// Monopole number `s_i = e g_i`.
    pub fn s(&self, i: usize) -> f64 {
        self.e * self.dyons[i].g
    }

    pub fn string_dir(&self, i: usize) -> Vec3 {
        self.dyons[i].string_dir.unwrap_or_else(|| default_string_dir(i))
    }

    /// Index of the first dyon closer than `radius` to `r`.
    pub fn colliding(&self, r: &Vec3, radius: f64) -> Option<usize> {
        self.dyons.iter().position(|d| (r - d.position).norm() < radius)
    }
}

/// Unit-charge Dirac potential `(r × n) / (r (r - n·r))` of a monopole at
/// `center` with its string along `+n`.
pub fn dirac_vector_potential(r: &Vec3, center: &Vec3, n: &Vec3) -> Result<Vec3> {
    let rel = r - center;
    let d = rel.norm();
    if d < CENTER_TOL {
        return Err(Error::AtCenter { index: None });
    }
    let denom = d - n.dot(&rel);
    if denom < STRING_TOL * d {
        return Err(Error::OnString { index: None });
    }
    Ok(rel.cross(n) / (d * denom))
}

/// Magnetic field `g (r - c) / |r - c|³`.
pub fn monopole_b(r: &Vec3, center: &Vec3, g: f64) -> Result<Vec3> {
    let rel = r - center;
    let d = rel.norm();
    if d < CENTER_TOL {
        return Err(Error::AtCenter { index: None });
    }
    Ok(rel * (g / (d * d * d)))
}

/// Radial conformal factor of `ds² = G(r) dr²`.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricProfile {
    Flat,
    /// `G = 4 r0² / (1 + r²)²`.
    Sphere { r0: f64 },
    /// `G = 4 r0² / (1 - r²)²`; `r > 1` is the second sheet of the hyperboloid.
    Pseudosphere { r0: f64 },
    /// Sampled `(r, G)` table, monotone-cubic interpolated and held constant
    /// outside the sampled range.
    Custom(MonotoneCubic),
}

impl fmt::Display for MetricProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricProfile::Flat => write!(f, "flat"),
            MetricProfile::Sphere { r0 } => write!(f, "sphere(r0={r0})"),
            MetricProfile::Pseudosphere { r0 } => write!(f, "pseudosphere(r0={r0})"),
            MetricProfile::Custom(t) => write!(f, "custom({} samples)", t.xs().len()),
        }
    }
}

impl MetricProfile {
    pub fn sphere(r0: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::InvalidSpec(format!("sphere radius must be positive, got {r0}")));
        }
        Ok(MetricProfile::Sphere { r0 })
    }

    pub fn pseudosphere(r0: f64) -> Result<Self> {
        if !(r0 > 0.0) {
            return Err(Error::InvalidSpec(format!("pseudosphere radius must be positive, got {r0}")));
        }
        Ok(MetricProfile::Pseudosphere { r0 })
    }

    pub fn custom(table: &[(f64, f64)]) -> Result<Self> {
        if table.iter().any(|&(r, g)| !(r >= 0.0) || !(g > 0.0) || !g.is_finite()) {
            return Err(Error::InvalidSpec("custom metric needs r >= 0 and finite G > 0".into()));
        }
        let xs = table.iter().map(|p| p.0).collect();
        let ys = table.iter().map(|p| p.1).collect();
        MonotoneCubic::new(xs, ys)
            .map(MetricProfile::Custom)
            .ok_or_else(|| Error::InvalidSpec("custom metric table must have >= 2 strictly increasing radii".into()))
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, MetricProfile::Flat)
    }

    /// Curvature sign `ε` of the (pseudo)sphere kinds.
    pub fn epsilon(&self) -> Option<f64> {
        match self {
            MetricProfile::Sphere { .. } => Some(1.0),
            MetricProfile::Pseudosphere { .. } => Some(-1.0),
            _ => None,
        }
    }

    pub fn r0(&self) -> Option<f64> {
        match self {
            MetricProfile::Sphere { r0 } | MetricProfile::Pseudosphere { r0 } => Some(*r0),
            _ => None,
        }
    }

    fn check(&self, r: f64) -> Result<()> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::DomainError(format!("radius {r} is not a valid distance")));
        }
        if let MetricProfile::Pseudosphere { .. } = self {
            if (1.0 - r * r).abs() < 1e-12 {
                return Err(Error::DomainError("pseudosphere metric diverges at r = 1".into()));
            }
        }
        Ok(())
    }

    /// Signed square root of `G`: `2 r0 / (1 + ε r²)` for the curved kinds,
    /// so that the Green function stays analytic across `r = 1` on the
    /// pseudosphere.
    pub fn sqrt_g(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(match self {
            MetricProfile::Flat => 1.0,
            MetricProfile::Sphere { r0 } => 2.0 * r0 / (1.0 + r * r),
            MetricProfile::Pseudosphere { r0 } => 2.0 * r0 / (1.0 - r * r),
            MetricProfile::Custom(t) => t.eval(r).sqrt(),
        })
    }

    pub fn g(&self, r: f64) -> Result<f64> {
        let s = self.sqrt_g(r)?;
        Ok(s * s)
    }

    /// `dG/dr`; central differences with step `1e-6` for custom tables.
    pub fn dg_dr(&self, r: f64) -> Result<f64> {
        self.check(r)?;
        Ok(match self {
            MetricProfile::Flat => 0.0,
            MetricProfile::Sphere { r0 } | MetricProfile::Pseudosphere { r0 } => {
                let eps = self.epsilon().unwrap();
                let d = 1.0 + eps * r * r;
                -16.0 * r0 * r0 * eps * r / (d * d * d)
            }
            MetricProfile::Custom(t) => {
                let h = 1e-6;
                let lo = (r - h).max(0.0);
                (t.eval(r + h) - t.eval(lo)) / (r + h - lo)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum GreenRoute {
    Closed,
    /// Cumulative integrals of the regular part at the knots.
    Numeric { knots: Vec<f64>, cumulative: Vec<f64>, inv_sqrt_g0: f64 },
}

/// so(3)-invariant Green function `φ_C` with `dφ_C/dr = -1 / (r² √G)`.
///
/// The additive constant is fixed by requiring `φ_C - 1/(√G(0) r)` to vanish
/// at the origin, which gives `1/r` on flat space and
/// `(1 - ε r²) / (2 r0 r)` on the (pseudo)sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct GreenFunction {
    profile: MetricProfile,
    route: GreenRoute,
}

const GREEN_TOL: f64 = 1e-13;

impl GreenFunction {
    /// Closed forms for the analytic kinds, quadrature for custom tables.
    pub fn new(profile: MetricProfile) -> Self {
        match profile {
            MetricProfile::Custom(_) => Self::numeric(profile),
            _ => GreenFunction { profile, route: GreenRoute::Closed },
        }
    }

    /// Forces the quadrature route regardless of profile kind.
    pub fn numeric(profile: MetricProfile) -> Self {
        let knots: Vec<f64> = match &profile {
            MetricProfile::Custom(t) => {
                let mut k = vec![0.0];
                k.extend(t.xs().iter().copied().filter(|&x| x > 0.0));
                k
            }
            _ => {
                let mut k = vec![0.0];
                let mut x = 1e-2;
                while x < 1e3 {
                    k.push(x);
                    x *= 1.25;
                }
                k
            }
        };
        let inv_sqrt_g0 = 1.0 / profile.sqrt_g(0.0).expect("G(0) is always in the domain");
        let mut cumulative = vec![0.0; knots.len()];
        for i in 1..knots.len() {
            let piece = adaptive_gk(
                |r| regular_integrand(&profile, inv_sqrt_g0, r),
                knots[i - 1],
                knots[i],
                GREEN_TOL,
                GREEN_TOL,
            );
            cumulative[i] = cumulative[i - 1] + piece;
        }
        GreenFunction { profile, route: GreenRoute::Numeric { knots, cumulative, inv_sqrt_g0 } }
    }

    pub fn flat() -> Self {
        Self::new(MetricProfile::Flat)
    }

    pub fn profile(&self) -> &MetricProfile {
        &self.profile
    }

    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::DomainError(format!("Green function needs r > 0, got {r}")));
        }
        match &self.route {
            GreenRoute::Closed => Ok(match &self.profile {
                MetricProfile::Flat => 1.0 / r,
                MetricProfile::Sphere { r0 } | MetricProfile::Pseudosphere { r0 } => {
                    let eps = self.profile.epsilon().unwrap();
                    (1.0 - eps * r * r) / (2.0 * r0 * r)
                }
                MetricProfile::Custom(_) => unreachable!("custom profiles always use quadrature"),
            }),
            GreenRoute::Numeric { knots, cumulative, inv_sqrt_g0 } => {
                let k = knots.partition_point(|&x| x <= r) - 1;
                let tail = adaptive_gk(
                    |x| regular_integrand(&self.profile, *inv_sqrt_g0, x),
                    knots[k],
                    r,
                    GREEN_TOL,
                    GREEN_TOL,
                );
                Ok(inv_sqrt_g0 / r - (cumulative[k] + tail))
            }
        }
    }

    /// `dφ_C/dr = -1 / (r² √G(r))`.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::DomainError(format!("Green function needs r > 0, got {r}")));
        }
        Ok(-1.0 / (r * r * self.profile.sqrt_g(r)?))
    }
}

fn regular_integrand(profile: &MetricProfile, inv_sqrt_g0: f64, r: f64) -> f64 {
    if r == 0.0 {
        return match profile {
            MetricProfile::Sphere { r0 } | MetricProfile::Pseudosphere { r0 } => {
                profile.epsilon().unwrap() / (2.0 * r0)
            }
            _ => 0.0,
        };
    }
    let s = profile.sqrt_g(r).unwrap_or(f64::INFINITY);
    (1.0 / s - inv_sqrt_g0) / (r * r)
}

/// Superposed potentials of all dyons at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potentials {
    /// `Σ g_i A_D(r - a_i)`.
    pub a_total: Vec3,
    /// `Σ g_i φ_C(r_i)`.
    pub phi_g: f64,
    /// `Σ q_i φ_C(r_i)`.
    pub phi_q: f64,
}

pub fn total_potentials(cfg: &DyonConfig, green: &GreenFunction, r: &Vec3) -> Result<Potentials> {
    let mut out = Potentials { a_total: Vec3::zeros(), phi_g: 0.0, phi_q: 0.0 };
    for (i, d) in cfg.dyons.iter().enumerate() {
        let a = dirac_vector_potential(r, &d.position, &cfg.string_dir(i)).map_err(|e| e.with_index(i))?;
        let phi = green.value((r - d.position).norm()).map_err(|e| e.with_index(i))?;
        out.a_total += a * d.g;
        out.phi_g += d.g * phi;
        out.phi_q += d.q * phi;
    }
    Ok(out)
}

/// Common ratio `q_i / g_i` when every pair satisfies `g_i q_j - g_j q_i = 0`.
pub fn dsz_check(cfg: &DyonConfig) -> Option<f64> {
    let lead = cfg
        .dyons
        .iter()
        .max_by(|a, b| a.g.abs().total_cmp(&b.g.abs()))
        .filter(|d| d.g != 0.0)?;
    for (i, a) in cfg.dyons.iter().enumerate() {
        for b in &cfg.dyons[i + 1..] {
            let scale = 1.0f64.max(a.g.abs().max(b.g.abs()) * a.q.abs().max(b.q.abs()));
            if (a.g * b.q - b.g * a.q).abs() > 1e-12 * scale {
                return None;
            }
        }
    }
    Some(lead.q / lead.g)
}

/// Central-difference curl, used by tests and diagnostics.
pub fn finite_difference_curl<F>(f: F, r: &Vec3, h: f64) -> Result<Vec3>
where
    F: Fn(&Vec3) -> Result<Vec3>,
{
    let mut jac = [[0.0; 3]; 3];
    for j in 0..3 {
        let mut step = Vec3::zeros();
        step[j] = h;
        let plus = f(&(r + step))?;
        let minus = f(&(r - step))?;
        for i in 0..3 {
            jac[i][j] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    Ok(Vec3::new(jac[2][1] - jac[1][2], jac[0][2] - jac[2][0], jac[1][0] - jac[0][1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dirac_potential_examples() {
        let z = Vec3::z();
        let a = dirac_vector_potential(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), &z).unwrap();
        assert!((a - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-15);
        let a = dirac_vector_potential(&Vec3::new(0.0, 0.0, -1.0), &Vec3::zeros(), &z).unwrap();
        assert_eq!(a, Vec3::zeros());
        assert_eq!(
            dirac_vector_potential(&Vec3::new(0.0, 0.0, 1.0), &Vec3::zeros(), &z),
            Err(Error::OnString { index: None })
        );
        assert_eq!(
            dirac_vector_potential(&Vec3::zeros(), &Vec3::zeros(), &z),
            Err(Error::AtCenter { index: None })
        );
    }

    #[test]
    fn monopole_field_examples() {
        let b = monopole_b(&Vec3::new(0.0, 0.0, 2.0), &Vec3::zeros(), 1.0).unwrap();
        assert!((b - Vec3::new(0.0, 0.0, 0.25)).norm() < 1e-16);
        let b = monopole_b(&Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros(), -2.0).unwrap();
        assert_eq!(b, Vec3::new(-2.0, 0.0, 0.0));
    }

    #[test]
    fn curl_of_potential_is_monopole_field_for_any_string() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let center = Vec3::new(0.2, -0.1, 0.4);
        let g = -1.7;
        let strings = [Vec3::z(), -Vec3::z(), Vec3::new(1.0, 2.0, -0.5).normalize()];
        let mut checked = 0;
        while checked < 200 {
            let r = center + Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let rel = r - center;
            if rel.norm() < 0.3 || strings.iter().any(|n| rel.normalize().dot(n) > 0.98) {
                continue;
            }
            let b = monopole_b(&r, &center, g).unwrap();
            for n in &strings {
                let curl = finite_difference_curl(
                    |x| dirac_vector_potential(x, &center, n).map(|a| a * g),
                    &r,
                    1e-5,
                )
                .unwrap();
                assert!((curl - b).norm() < 1e-6 * b.norm(), "curl {curl:?} vs {b:?}");
            }
            checked += 1;
        }
    }

    #[test]
    fn default_strings_are_distinct_unit_vectors() {
        for i in 0..5 {
            let n = default_string_dir(i);
            assert!((n.norm() - 1.0).abs() < 1e-15);
            assert!(n.z < -0.99);
            for j in 0..i {
                assert!((n - default_string_dir(j)).norm() > 1e-3);
            }
        }
    }

    #[test]
    fn green_examples() {
        assert_eq!(GreenFunction::flat().value(2.0).unwrap(), 0.5);
        let sphere = GreenFunction::new(MetricProfile::sphere(1.0).unwrap());
        assert_eq!(sphere.value(1.0).unwrap(), 0.0);
        // (1/2r0)(1 + r²)/r at r0 = 0.5, r = 1
        let pseudo = GreenFunction::new(MetricProfile::pseudosphere(0.5).unwrap());
        assert_eq!(pseudo.value(1.0).unwrap(), 2.0);
        assert!(matches!(sphere.value(0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn numeric_green_matches_closed_forms() {
        for profile in [
            MetricProfile::Flat,
            MetricProfile::sphere(1.0).unwrap(),
            MetricProfile::sphere(2.5).unwrap(),
            MetricProfile::pseudosphere(0.5).unwrap(),
            MetricProfile::pseudosphere(1.3).unwrap(),
        ] {
            let closed = GreenFunction::new(profile.clone());
            let numeric = GreenFunction::numeric(profile.clone());
            for k in 0..=60 {
                let r = 0.1 * 100f64.powf(k as f64 / 60.0);
                if (r - 1.0).abs() < 1e-6 && profile.epsilon() == Some(-1.0) {
                    continue;
                }
                let a = closed.value(r).unwrap();
                let b = numeric.value(r).unwrap();
                assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "{profile} r={r}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn green_satisfies_radial_equation() {
        let table: Vec<(f64, f64)> = (0..=40).map(|k| {
            let r = 0.25 * k as f64;
            (r, 1.0 + 0.5 / (1.0 + r * r))
        }).collect();
        for profile in [
            MetricProfile::Flat,
            MetricProfile::sphere(1.0).unwrap(),
            MetricProfile::pseudosphere(0.7).unwrap(),
            MetricProfile::custom(&table).unwrap(),
        ] {
            let green = GreenFunction::numeric(profile.clone());
            for &r in &[0.3, 0.8, 1.7, 4.2, 9.0] {
                let h = 1e-5;
                let fd = (green.value(r + h).unwrap() - green.value(r - h).unwrap()) / (2.0 * h);
                let exact = green.derivative(r).unwrap();
                assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "{profile} r={r}");
            }
        }
    }

    #[test]
    fn custom_profile_that_is_flat_gives_coulomb() {
        let table: Vec<(f64, f64)> = (0..=10).map(|k| (k as f64, 1.0)).collect();
        let green = GreenFunction::new(MetricProfile::custom(&table).unwrap());
        for &r in &[0.2, 1.0, 3.3, 25.0] {
            assert!((green.value(r).unwrap() - 1.0 / r).abs() < 1e-12);
        }
        assert!(MetricProfile::custom(&[(0.0, 1.0), (1.0, -1.0)]).is_err());
    }

    #[test]
    fn superposition_examples() {
        let flat = GreenFunction::flat();
        let cfg = DyonConfig::new(1.0, vec![Dyon::new(Vec3::zeros(), 1.0, 0.0)]);
        let r = Vec3::new(0.3, 1.1, -0.4);
        let p = total_potentials(&cfg, &flat, &r).unwrap();
        assert!((p.phi_g - 1.0 / r.norm()).abs() < 1e-15);
        assert_eq!(p.phi_q, 0.0);

        let cfg = DyonConfig::new(
            1.0,
            vec![Dyon::new(Vec3::new(0.0, 0.0, 1.0), 0.0, 1.0), Dyon::new(Vec3::new(0.0, 0.0, -1.0), 0.0, 1.0)],
        );
        let p = total_potentials(&cfg, &flat, &Vec3::zeros()).unwrap();
        assert_eq!(p.phi_q, 2.0);

        let a = 0.8;
        let cfg = DyonConfig::new(
            1.0,
            vec![Dyon::new(Vec3::new(0.0, 0.0, -a), 1.0, 0.0), Dyon::new(Vec3::new(0.0, 0.0, a), -1.0, 0.0)],
        );
        let p = total_potentials(&cfg, &flat, &Vec3::new(0.4, -1.2, 0.0)).unwrap();
        assert!(p.phi_g.abs() < 1e-15);
    }

    #[test]
    fn superposition_reports_offending_dyon() {
        let cfg = DyonConfig::new(
            1.0,
            vec![
                Dyon::new(Vec3::new(5.0, 0.0, 0.0), 1.0, 0.0),
                Dyon::new(Vec3::zeros(), 1.0, 0.0).with_string(Vec3::z()),
            ],
        );
        let flat = GreenFunction::flat();
        assert_eq!(
            total_potentials(&cfg, &flat, &Vec3::new(0.0, 0.0, 2.0)),
            Err(Error::OnString { index: Some(1) })
        );
        assert_eq!(
            total_potentials(&cfg, &flat, &Vec3::new(5.0, 0.0, 0.0)),
            Err(Error::AtCenter { index: Some(0) })
        );
    }

    #[test]
    fn dsz_examples() {
        let make = |pairs: &[(f64, f64)]| {
            DyonConfig::new(
                1.0,
                pairs.iter().enumerate().map(|(i, &(g, q))| Dyon::new(Vec3::new(0.0, 0.0, i as f64), g, q)).collect(),
            )
        };
        assert_eq!(dsz_check(&make(&[(1.0, 2.0), (2.0, 4.0)])), Some(2.0));
        assert_eq!(dsz_check(&make(&[(1.0, 2.0), (2.0, 3.0)])), None);
        assert_eq!(dsz_check(&make(&[(1.0, 0.0), (5.0, 0.0)])), Some(0.0));
        assert_eq!(dsz_check(&make(&[(0.0, 1.0)])), None);
    }
}
