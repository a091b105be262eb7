//! Hamilton-Jacobi quadratures of the separable families: radicands,
//! turning points, time/azimuth integrals and validation against
//! integrated trajectories.
//!
//! Every integral has the form `∫ w(x) dx / √R(x)` over a libration
//! interval `[lo, hi]`. The substitution `x = lo + (hi - lo) sin²u` turns it
//! into `∫ 2 w / √Q du` with `Q = R / ((x - lo)(hi - x))`, which is smooth
//! at simple turning points.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use crate::dynamics::{elliptic_separation, parabolic_separation, Trajectory};
use crate::error::{Error, Result};
use crate::geometry::{axial_momentum, canonical_momenta_map, to_elliptic, to_parabolic, CoordinateFamily, Vec3};
use crate::hamiltonians::{
    v_elliptic, v_parabolic, w_elliptic, w_parabolic, EllipticParams, Family, ParabolicParams, SystemSpec,
};
use crate::numeric::{brent, gl32, golden_max};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variable {
    XiElliptic,
    EtaElliptic,
    XiParabolic,
    EtaParabolic,
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variable::XiElliptic => "xi_elliptic",
            Variable::EtaElliptic => "eta_elliptic",
            Variable::XiParabolic => "xi_parabolic",
            Variable::EtaParabolic => "eta_parabolic",
        })
    }
}

/// Constants fixing a separated motion. `energy` is the Hamilton-Jacobi
/// energy: `H` for the elliptic family, `H + ½ p_φ e B` for the parabolic one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatedConstants {
    pub energy: f64,
    pub sep_n: f64,
    pub p_phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Params {
    Elliptic(EllipticParams),
    Parabolic(ParabolicParams),
}

/// One-dimensional radicand `R(x)` with `p_x² = factor · R(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Radicand {
    pub variable: Variable,
    pub constants: SeparatedConstants,
    params: Params,
}

/// Integrand weight selecting which quadrature is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    /// Contribution to physical time.
    Time,
    /// Contribution to the azimuth (without the uniform-field drift).
    Azimuth,
    /// Contribution to the separating time `τ`.
    Tau,
}

impl Radicand {
    pub fn new(spec: &SystemSpec, constants: SeparatedConstants, variable: Variable) -> Result<Self> {
        let params = match variable {
            Variable::XiElliptic | Variable::EtaElliptic => Params::Elliptic(spec.elliptic_params()?),
            Variable::XiParabolic | Variable::EtaParabolic => Params::Parabolic(spec.parabolic_params()?),
        };
        Ok(Radicand { variable, constants, params })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let SeparatedConstants { energy, sep_n, p_phi } = self.constants;
        match (self.variable, &self.params) {
            (Variable::XiElliptic, Params::Elliptic(k)) => {
                2.0 * k.a * k.a * energy + (sep_n - v_elliptic(x, p_phi, k)) / (x * x - 1.0)
            }
            (Variable::EtaElliptic, Params::Elliptic(k)) => {
                2.0 * k.a * k.a * energy - (sep_n + w_elliptic(x, p_phi, k)) / (1.0 - x * x)
            }
            (Variable::XiParabolic, Params::Parabolic(k)) => 2.0 * energy + (sep_n - v_parabolic(x, p_phi, k)) / x,
            (Variable::EtaParabolic, Params::Parabolic(k)) => 2.0 * energy - (sep_n + w_parabolic(x, p_phi, k)) / x,
            _ => unreachable!("parameters always match the variable"),
        }
    }

    /// `p_x² / R(x)`.
    pub fn momentum_factor(&self) -> f64 {
        match self.variable {
            Variable::XiElliptic | Variable::EtaElliptic => 1.0,
            Variable::XiParabolic | Variable::EtaParabolic => 0.25,
        }
    }

    /// Open coordinate range of the variable.
    pub fn domain(&self) -> (f64, f64) {
        match self.variable {
            Variable::XiElliptic => (1.0, f64::INFINITY),
            Variable::EtaElliptic => (-1.0, 1.0),
            _ => (0.0, f64::INFINITY),
        }
    }

    pub fn weight(&self, kind: Weight, x: f64) -> f64 {
        let p_phi = self.constants.p_phi;
        match (&self.params, self.variable, kind) {
            (Params::Elliptic(k), _, Weight::Time) => k.a * k.a,
            (Params::Elliptic(k), Variable::XiElliptic, Weight::Azimuth) => {
                (p_phi - k.sigma_minus * x) / (x * x - 1.0).powi(2)
            }
            (Params::Elliptic(k), _, Weight::Azimuth) => (p_phi - k.sigma_plus * x) / (1.0 - x * x).powi(2),
            (Params::Elliptic(_), Variable::XiElliptic, Weight::Tau) => 1.0 / (x * x - 1.0),
            (Params::Elliptic(_), _, Weight::Tau) => 1.0 / (1.0 - x * x),
            (Params::Parabolic(_), _, Weight::Time) => 0.5,
            (Params::Parabolic(k), Variable::XiParabolic, Weight::Azimuth) => 0.5 * (p_phi + k.sigma) / (x * x),
            (Params::Parabolic(k), _, Weight::Azimuth) => 0.5 * (p_phi - k.sigma) / (x * x),
            (Params::Parabolic(_), _, Weight::Tau) => 0.5 / x,
        }
    }

    fn scale(&self) -> f64 {
        match &self.params {
            Params::Elliptic(k) => 1.0 + (2.0 * k.a * k.a * self.constants.energy).abs() + self.constants.sep_n.abs(),
            Params::Parabolic(_) => 1.0 + (2.0 * self.constants.energy).abs() + self.constants.sep_n.abs(),
        }
    }
}

/// Builds the radicand of one variable.
pub fn radicand(spec: &SystemSpec, constants: SeparatedConstants, variable: Variable) -> Result<Radicand> {
    Radicand::new(spec, constants, variable)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    /// Both endpoints are simple roots.
    Bound,
    /// The radicand stays positive up to the search cutoff.
    Scattering,
    /// Double root: the libration has collapsed to a point.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LibrationInterval {
    pub lo: f64,
    pub hi: f64,
    pub kind: IntervalKind,
}

fn root_between(r: &Radicand, a: f64, b: f64) -> f64 {
    brent(|x| r.eval(x), a, b, 0.0).unwrap_or(0.5 * (a + b))
}

/// All libration intervals of `R` inside `[a, b]`, found on a sampling grid
/// and polished with Brent's method.
pub fn turning_points(r: &Radicand, a: f64, b: f64) -> Result<Vec<LibrationInterval>> {
    const N: usize = 4000;
    let geometric = a > 0.0 && b / a > 100.0;
    let grid: Vec<f64> = (0..=N)
        .map(|i| {
            let f = i as f64 / N as f64;
            if geometric { a * (b / a).powf(f) } else { a + (b - a) * f }
        })
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&x| r.eval(x)).collect();
    let tol = 1e-10 * r.scale();
    let mut out = Vec::new();
    let mut open: Option<f64> = if vals[0] > 0.0 { Some(a) } else { None };
    for i in 1..=N {
        let (x0, x1) = (grid[i - 1], grid[i]);
        let (f0, f1) = (vals[i - 1], vals[i]);
        if f0 <= 0.0 && f1 > 0.0 {
            open = Some(if f0 == 0.0 { x0 } else { root_between(r, x0, x1) });
        } else if f0 > 0.0 && f1 <= 0.0 {
            let hi = if f1 == 0.0 { x1 } else { root_between(r, x0, x1) };
            let lo = open.take().unwrap_or(a);
            let kind = if lo == a && vals[0] > 0.0 { IntervalKind::Scattering } else { IntervalKind::Bound };
            out.push(LibrationInterval { lo, hi, kind });
        }
        // near-zero local maximum without a sign change
        if i < N && f1 <= 0.0 && f1 >= f0 && f1 >= vals[i + 1] {
            let (xm, fm) = golden_max(|x| r.eval(x), x0, grid[i + 1], 1e-14);
            if fm.abs() <= tol {
                out.push(LibrationInterval { lo: xm, hi: xm, kind: IntervalKind::Degenerate });
            }
        }
    }
    if let Some(lo) = open {
        out.push(LibrationInterval { lo, hi: b, kind: IntervalKind::Scattering });
    }
    if out.is_empty() {
        return Err(Error::NoLibration);
    }
    Ok(out)
}

/// Search cutoff used for unbounded variables.
pub const SCATTERING_CUTOFF: f64 = 1e8;

/// The libration interval containing `x0`, found by an outward search.
pub fn libration_containing(r: &Radicand, x0: f64) -> Result<LibrationInterval> {
    let (dlo, dhi) = r.domain();
    let mut x0 = x0.clamp(dlo, dhi);
    if !(r.eval(x0) > 0.0) {
        let mut found = None;
        'probe: for k in 0..40 {
            let d = 1e-12 * 2f64.powi(k) * x0.abs().max(1.0);
            for x in [x0 + d, x0 - d] {
                if x > dlo && x < dhi && r.eval(x) > 0.0 {
                    found = Some(x);
                    break 'probe;
                }
            }
        }
        x0 = found.ok_or(Error::NoLibration)?;
    }
    let hi = search(r, x0, dhi, 1.0);
    let lo = search(r, x0, dlo, -1.0);
    let kind = match (lo, hi) {
        (Some(_), Some(_)) => IntervalKind::Bound,
        _ => IntervalKind::Scattering,
    };
    let cut = |edge: f64| if edge.is_finite() { edge } else { SCATTERING_CUTOFF.copysign(edge) };
    let lo = lo.unwrap_or(cut(dlo));
    let hi = hi.unwrap_or(cut(dhi));
    if hi - lo <= 1e-13 * (1.0 + lo.abs()) {
        return Ok(LibrationInterval { lo, hi, kind: IntervalKind::Degenerate });
    }
    Ok(LibrationInterval { lo, hi, kind })
}

fn search(r: &Radicand, x0: f64, edge: f64, dir: f64) -> Option<f64> {
    let mut prev = x0;
    let mut step = 1e-6 * x0.abs().max(1e-3);
    loop {
        let mut x = x0 + dir * step;
        if (x - edge) * dir >= 0.0 {
            if !edge.is_finite() {
                return None;
            }
            // approach the finite boundary geometrically
            let mut near = prev;
            for _ in 0..80 {
                let next = edge - 0.5 * (edge - near);
                if next == near || next == edge {
                    return None;
                }
                if !(r.eval(next) > 0.0) {
                    return Some(brent(|x| r.eval(x), near, next, 0.0).unwrap_or(next));
                }
                near = next;
            }
            return None;
        }
        if x.abs() > SCATTERING_CUTOFF {
            x = SCATTERING_CUTOFF.copysign(x);
            return if r.eval(x) > 0.0 { None } else { brent(|y| r.eval(y), prev, x, 0.0) };
        }
        if !(r.eval(x) > 0.0) {
            return Some(brent(|y| r.eval(y), prev.min(x), prev.max(x), 0.0).unwrap_or(x));
        }
        prev = x;
        step *= 1.25;
    }
}

/// Value of a half-libration integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPeriod {
    pub value: f64,
    /// Set when the interval is degenerate and the value is the small
    /// oscillation limit `π w(x*) / √(|R''(x*)|/2)`.
    pub harmonic: bool,
}

/// Cached quadrature of one weight over one libration interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LibrationMap {
    pub radicand: Radicand,
    pub interval: LibrationInterval,
    pub weight: Weight,
    half: HalfPeriod,
    panels: usize,
}

impl LibrationMap {
    pub fn new(radicand: &Radicand, interval: LibrationInterval, weight: Weight) -> Result<Self> {
        let mut map = LibrationMap {
            radicand: *radicand,
            interval,
            weight,
            half: HalfPeriod { value: 0.0, harmonic: false },
            panels: 2,
        };
        if interval.kind == IntervalKind::Degenerate || interval.hi <= interval.lo {
            let x = 0.5 * (interval.lo + interval.hi);
            let h = 1e-4 * x.abs().max(1e-2);
            let d2 = (radicand.eval(x + h) - 2.0 * radicand.eval(x) + radicand.eval(x - h)) / (h * h);
            if !(d2 < 0.0) {
                return Err(Error::DegenerateInterval);
            }
            map.half = HalfPeriod { value: PI * radicand.weight(weight, x) / (0.5 * d2.abs()).sqrt(), harmonic: true };
            return Ok(map);
        }
        let mut prev = map.integrate_u(FRAC_PI_2, map.panels);
        loop {
            let next = map.integrate_u(FRAC_PI_2, map.panels * 2);
            map.panels *= 2;
            if (next - prev).abs() <= 1e-11 * (1.0 + next.abs()) || map.panels >= 1024 {
                prev = next;
                break;
            }
            prev = next;
        }
        if !prev.is_finite() {
            return Err(Error::NumericalFailure(format!("{} quadrature is not finite", radicand.variable)));
        }
        map.half = HalfPeriod { value: prev, harmonic: false };
        Ok(map)
    }

    fn integrand(&self, u: f64) -> f64 {
        let LibrationInterval { lo, hi, .. } = self.interval;
        let s = u.sin();
        let w = hi - lo;
        let x = lo + w * s * s;
        // R/((x-lo)(hi-x)) is smooth; keep it off the rounding noise at the roots
        let t = (s * s).clamp(1e-9, 1.0 - 1e-9);
        let q = self.radicand.eval(lo + w * t) / (w * w * t * (1.0 - t));
        2.0 * self.radicand.weight(self.weight, x) / q.sqrt()
    }

    fn integrate_u(&self, u: f64, panels: usize) -> f64 {
        gl32().integrate(0.0, u, panels, |v| self.integrand(v))
    }

    pub fn half_period(&self) -> HalfPeriod {
        self.half
    }

    /// `∫_lo^x w dx / √R`.
    pub fn partial(&self, x: f64) -> f64 {
        if self.half.harmonic {
            return 0.0;
        }
        let LibrationInterval { lo, hi, .. } = self.interval;
        let f = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        let u = f.sqrt().asin();
        let panels = ((self.panels as f64 * u / FRAC_PI_2).ceil() as usize).max(1);
        self.integrate_u(u, panels)
    }

    /// Monotone unfolded coordinate after `pass` completed half-librations.
    pub fn unfolded(&self, pass: i64, increasing: bool, x: f64) -> f64 {
        let h = self.half.value;
        let f = self.partial(x);
        pass as f64 * h + if increasing { f } else { h - f }
    }
}

/// Half-libration contribution to the time.
pub fn time_integral(r: &Radicand, interval: LibrationInterval) -> Result<HalfPeriod> {
    Ok(LibrationMap::new(r, interval, Weight::Time)?.half_period())
}

/// Half-libration contribution to the azimuth.
pub fn azimuth_integral(r: &Radicand, interval: LibrationInterval) -> Result<HalfPeriod> {
    Ok(LibrationMap::new(r, interval, Weight::Azimuth)?.half_period())
}

/// The paired `τ` maps whose equality defines the orbit.
pub fn trajectory_relation(
    r1: &Radicand,
    i1: LibrationInterval,
    r2: &Radicand,
    i2: LibrationInterval,
) -> Result<(LibrationMap, LibrationMap)> {
    Ok((LibrationMap::new(r1, i1, Weight::Tau)?, LibrationMap::new(r2, i2, Weight::Tau)?))
}

/// Separation constants of a separable family at one state.
pub fn separated_constants(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<SeparatedConstants> {
    let p_phi = axial_momentum(r, v, spec.cfg())?;
    let (sep_n, energy) = match spec.family() {
        Family::TwoCenterElliptic => elliptic_separation(r, v, spec)?,
        Family::StarkZeemanParabolic => parabolic_separation(r, v, spec)?,
        f => return Err(Error::FamilyMismatch(format!("family {f} is not separable"))),
    };
    Ok(SeparatedConstants { energy, sep_n, p_phi })
}

/// Separated coordinates and their canonical momenta at one state.
pub fn separated_point(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<[(f64, f64); 2]> {
    match spec.family() {
        Family::TwoCenterElliptic => {
            let a = spec.a().unwrap();
            let q = to_elliptic(r, a);
            let p = canonical_momenta_map(r, v, CoordinateFamily::Elliptic { a }, spec.cfg())?;
            Ok([(q.xi, p.p1), (q.eta, p.p2)])
        }
        Family::StarkZeemanParabolic => {
            let q = to_parabolic(r);
            let p = canonical_momenta_map(r, v, CoordinateFamily::Parabolic, spec.cfg())?;
            Ok([(q.xi, p.p1), (q.eta, p.p2)])
        }
        f => Err(Error::FamilyMismatch(format!("family {f} is not separable"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurningPointRecord {
    pub variable: Variable,
    pub lo: f64,
    pub hi: f64,
    pub kind: IntervalKind,
    /// Half-librations completed along the trajectory.
    pub half_librations: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub max_dt_residual: f64,
    pub max_dphi_residual: f64,
    pub turning_points: Vec<TurningPointRecord>,
    pub constants: SeparatedConstants,
    pub samples: usize,
}

struct Tracker {
    time: LibrationMap,
    azimuth: LibrationMap,
    pass: i64,
    increasing: bool,
    deadband: f64,
}

impl Tracker {
    fn new(r: &Radicand, x0: f64, p0: f64) -> Result<Self> {
        let interval = libration_containing(r, x0)?;
        match interval.kind {
            IntervalKind::Bound => {}
            IntervalKind::Degenerate => return Err(Error::DegenerateInterval),
            IntervalKind::Scattering => {
                return Err(Error::BranchTrackingFailure(format!("{} motion is not bound", r.variable)))
            }
        }
        let mid = 0.5 * (interval.lo + interval.hi);
        let p_scale = (r.momentum_factor() * r.eval(mid).max(0.0)).sqrt();
        let deadband = 1e-7 * p_scale;
        let increasing = if p0.abs() > deadband { p0 > 0.0 } else { x0 < mid };
        Ok(Tracker {
            time: LibrationMap::new(r, interval, Weight::Time)?,
            azimuth: LibrationMap::new(r, interval, Weight::Azimuth)?,
            pass: 0,
            increasing,
            deadband,
        })
    }

    fn advance(&mut self, x: f64, p: f64) -> Result<(f64, f64)> {
        if p.abs() > self.deadband && (p > 0.0) != self.increasing {
            let LibrationInterval { lo, hi, .. } = self.time.interval;
            let mid = 0.5 * (lo + hi);
            let consistent = if self.increasing { x > mid } else { x < mid };
            if !consistent {
                return Err(Error::BranchTrackingFailure(format!(
                    "{} momentum reversed at x = {x} away from the expected turning point",
                    self.time.radicand.variable
                )));
            }
            self.pass += 1;
            self.increasing = !self.increasing;
        }
        Ok((self.time.unfolded(self.pass, self.increasing, x), self.azimuth.unfolded(self.pass, self.increasing, x)))
    }
}

fn wrap(d: f64) -> f64 {
    let w = (d + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI { PI } else { w }
}

/// Compares sampled times and azimuths of a trajectory with the
/// quadrature predictions, anchored at the first sample.
pub fn validate_quadrature(traj: &Trajectory) -> Result<ValidationReport> {
    let spec = &traj.spec;
    let (vx, vy) = match spec.family() {
        Family::TwoCenterElliptic => (Variable::XiElliptic, Variable::EtaElliptic),
        Family::StarkZeemanParabolic => (Variable::XiParabolic, Variable::EtaParabolic),
        f => return Err(Error::FamilyMismatch(format!("family {f} has no quadrature solution"))),
    };
    let s0 = traj.samples[0];
    let constants = separated_constants(&s0.r, &s0.v, spec)?;
    let rx = Radicand::new(spec, constants, vx)?;
    let ry = Radicand::new(spec, constants, vy)?;
    let [(x0, px0), (y0, py0)] = separated_point(&s0.r, &s0.v, spec)?;
    let mut tx = Tracker::new(&rx, x0, px0)?;
    let mut ty = Tracker::new(&ry, y0, py0)?;
    let drift = match spec.parabolic_params() {
        Ok(k) => -0.5 * k.eb,
        Err(_) => 0.0,
    };
    let (ux0, wx0) = tx.advance(x0, px0)?;
    let (uy0, wy0) = ty.advance(y0, py0)?;
    let phi_start = crate::geometry::azimuth(&s0.r);
    let mut phi_actual = phi_start;
    let mut phi_prev = phi_start;
    let (mut max_dt, mut max_dphi) = (0.0f64, 0.0f64);
    let mut used = 0;
    for s in &traj.samples {
        let [(x, px), (y, py)] = separated_point(&s.r, &s.v, spec)?;
        let (ux, wx) = tx.advance(x, px)?;
        let (uy, wy) = ty.advance(y, py)?;
        let dt_pred = (ux - ux0) + (uy - uy0);
        let t_pred = s0.t + dt_pred;
        let phi_pred = phi_start + (wx - wx0) + (wy - wy0) + drift * dt_pred;
        let phi_now = crate::geometry::azimuth(&s.r);
        phi_actual += wrap(phi_now - phi_prev);
        phi_prev = phi_now;
        max_dt = max_dt.max((t_pred - s.t).abs());
        max_dphi = max_dphi.max((phi_pred - phi_actual).abs());
        used += 1;
    }
    let record = |t: &Tracker| TurningPointRecord {
        variable: t.time.radicand.variable,
        lo: t.time.interval.lo,
        hi: t.time.interval.hi,
        kind: t.time.interval.kind,
        half_librations: t.pass,
    };
    log::info!("quadrature validation: max |dt| = {max_dt:.3e}, max |dphi| = {max_dphi:.3e} over {used} samples");
    Ok(ValidationReport {
        max_dt_residual: max_dt,
        max_dphi_residual: max_dphi,
        turning_points: vec![record(&tx), record(&ty)],
        constants,
        samples: used,
    })
}
