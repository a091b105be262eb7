//! Equations of motion, integrators, conserved quantities and string
//! patching.
//!
//! All families are integrated in position/velocity form, so the flow never
//! sees a Dirac string.

use nalgebra::SVector;

use crate::error::{Error, Result};
use crate::fields::{monopole_b, DyonConfig, CENTER_TOL};
use crate::geometry::{canonical_momenta_map, to_elliptic, to_parabolic, CoordinateFamily, Vec3};
use crate::hamiltonians::{
    curved_potential, elliptic_hamiltonian, energy, flat_potential, metric_factor, stark_zeeman_hamiltonian,
    v_elliptic, v_parabolic, w_elliptic, w_parabolic, Family, SystemSpec,
};

type Y = SVector<f64, 6>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub r: Vec3,
    pub v: Vec3,
}

impl PhaseState {
    pub fn new(t: f64, r: Vec3, v: Vec3) -> Self {
        PhaseState { t, r, v }
    }

    fn y(&self) -> Y {
        Y::new(self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z)
    }

    fn from_y(t: f64, y: &Y) -> Self {
        PhaseState { t, r: Vec3::new(y[0], y[1], y[2]), v: Vec3::new(y[3], y[4], y[5]) }
    }
}

/// Time derivative `(ṙ, v̇)` of a state.
pub fn equations_of_motion(s: &PhaseState, spec: &SystemSpec) -> Result<(Vec3, Vec3)> {
    let cfg = spec.cfg();
    let mut b = cfg.b0;
    for (i, d) in cfg.dyons.iter().enumerate() {
        b += monopole_b(&s.r, &d.position, d.g).map_err(|e| e.with_index(i))?;
    }
    let lorentz = s.v.cross(&b) * cfg.e;
    let acc = match spec.family() {
        Family::CurvedMultiCenter => {
            let (g, grad_g) = metric_factor(spec.profile(), &s.r)?;
            let (_, grad_u) = curved_potential(spec, &s.r)?;
            (grad_g * (0.5 * s.v.norm_squared()) - s.v * grad_g.dot(&s.v) + lorentz - grad_u) / g
        }
        _ => lorentz - flat_potential(cfg, &s.r)?.1,
    };
    Ok((s.v, acc))
}

fn rhs(t: f64, y: &Y, spec: &SystemSpec) -> Result<Y> {
    let (dr, dv) = equations_of_motion(&PhaseState::from_y(t, y), spec)?;
    Ok(Y::new(dr.x, dr.y, dr.z, dv.x, dv.y, dv.z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Adaptive Dormand-Prince 5(4).
    Dopri5,
    /// Fixed-step implicit midpoint rule.
    ImplicitMidpoint { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Controls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub method: Method,
    /// Keep every `stride`-th accepted step (the first and last state are always kept).
    pub stride: usize,
    pub collision_radius: f64,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 1.0,
            method: Method::Dopri5,
            stride: 1,
            collision_radius: 1e-6,
            max_steps: 50_000_000,
        }
    }
}

impl Controls {
    pub fn with_tol(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_max_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    pub fn with_method(mut self, method: Method) -> Self {
        self.method = method;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    Completed,
    Collision { index: usize },
    StepUnderflow,
    MaxSteps,
    SolverFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<PhaseState>,
    pub spec: SystemSpec,
    pub controls: Controls,
    pub steps: usize,
    pub rejected: usize,
    pub termination: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &PhaseState {
        self.samples.last().expect("trajectories hold at least the initial state")
    }

    /// Converts an early termination into the matching error.
    pub fn check(&self) -> Result<()> {
        match self.termination {
            Termination::Completed => Ok(()),
            Termination::Collision { index } => Err(Error::Collision { index }),
            Termination::StepUnderflow => Err(Error::NumericalFailure(format!("step size underflow at t = {}", self.last().t))),
            Termination::MaxSteps => Err(Error::NumericalFailure(format!("step budget exhausted at t = {}", self.last().t))),
            Termination::SolverFailure => {
                Err(Error::NumericalFailure(format!("implicit solve did not converge at t = {}", self.last().t)))
            }
        }
    }
}

// Dormand-Prince tableau
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Sampler {
    samples: Vec<PhaseState>,
    stride: usize,
    count: usize,
}

impl Sampler {
    fn push(&mut self, s: PhaseState, last: bool) {
        self.count += 1;
        if last || self.count.is_multiple_of(self.stride) {
            self.samples.push(s);
        }
    }
}

/// Integrates from `s0` to `t_end`. Collisions, step underflow and solver
/// failures end the run early and are recorded in `termination`.
pub fn integrate(s0: &PhaseState, spec: &SystemSpec, t_end: f64, controls: &Controls) -> Result<Trajectory> {
    if !(t_end > s0.t) {
        return Err(Error::InvalidSpec(format!("t_end = {t_end} must exceed the start time {}", s0.t)));
    }
    if !s0.r.iter().chain(s0.v.iter()).all(|c| c.is_finite()) {
        return Err(Error::InvalidSpec("initial state is not finite".into()));
    }
    if let Some(index) = spec.cfg().colliding(&s0.r, controls.collision_radius) {
        return Err(Error::Collision { index });
    }
    let mut out = Sampler { samples: vec![*s0], stride: controls.stride.max(1), count: 0 };
    let (steps, rejected, termination) = match controls.method {
        Method::Dopri5 => dopri5(s0, spec, t_end, controls, &mut out),
        Method::ImplicitMidpoint { dt } => midpoint(s0, spec, t_end, dt, controls, &mut out),
    };
    log::debug!("integration ended after {steps} steps ({rejected} rejected): {termination:?}");
    Ok(Trajectory { samples: out.samples, spec: spec.clone(), controls: *controls, steps, rejected, termination })
}

fn collided(y: &Y, spec: &SystemSpec, radius: f64) -> Option<usize> {
    spec.cfg().colliding(&Vec3::new(y[0], y[1], y[2]), radius)
}

fn error_index(e: &Error, y: &Y, spec: &SystemSpec) -> Option<usize> {
    match e {
        Error::AtCenter { index } => index.or_else(|| collided(y, spec, f64::INFINITY)),
        _ => None,
    }
}

fn dopri5(s0: &PhaseState, spec: &SystemSpec, t_end: f64, c: &Controls, out: &mut Sampler) -> (usize, usize, Termination) {
    let mut t = s0.t;
    let mut y = s0.y();
    let mut k = [Y::zeros(); 7];
    k[0] = match rhs(t, &y, spec) {
        Ok(f) => f,
        Err(e) => return (0, 0, fail_termination(&e, &y, spec)),
    };
    let scale = |y: &Y| y.map(|v| c.abs_tol + c.rel_tol * v.abs());
    let d0 = y.component_div(&scale(&y)).norm() / 6f64.sqrt();
    let d1 = k[0].component_div(&scale(&y)).norm() / 6f64.sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(c.max_step).min(t_end - t);
    let (mut steps, mut rejected) = (0usize, 0usize);
    loop {
        if steps + rejected >= c.max_steps {
            return (steps, rejected, Termination::MaxSteps);
        }
        if h < 1e-14 * t.abs().max(1.0) {
            out.push(PhaseState::from_y(t, &y), true);
            return (steps, rejected, Termination::StepUnderflow);
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let mut stage_err = None;
        for s in 1..7 {
            let mut ys = y;
            for (j, kj) in k.iter().enumerate().take(s) {
                if A[s][j] != 0.0 {
                    ys += kj * (h * A[s][j]);
                }
            }
            match rhs(t + C[s] * h, &ys, spec) {
                Ok(f) => k[s] = f,
                Err(e) => {
                    stage_err = Some(e);
                    break;
                }
            }
        }
        if stage_err.is_some() {
            rejected += 1;
            h *= 0.25;
            continue;
        }
        let mut y_new = y;
        let mut err = Y::zeros();
        for s in 0..7 {
            if s < 6 {
                y_new += k[s] * (h * A[6][s]);
            }
            err += k[s] * (h * E[s]);
        }
        let sc = y.zip_map(&y_new, |a, b| c.abs_tol + c.rel_tol * a.abs().max(b.abs()));
        let en = err.component_div(&sc).norm() / 6f64.sqrt();
        if !en.is_finite() {
            rejected += 1;
            h *= 0.25;
            continue;
        }
        if en <= 1.0 {
            t = if last { t_end } else { t + h };
            y = y_new;
            k[0] = k[6];
            steps += 1;
            if let Some(index) = collided(&y, spec, c.collision_radius) {
                out.push(PhaseState::from_y(t, &y), true);
                return (steps, rejected, Termination::Collision { index });
            }
            out.push(PhaseState::from_y(t, &y), last);
            if last {
                return (steps, rejected, Termination::Completed);
            }
            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(c.max_step);
        } else {
            rejected += 1;
            h *= (0.9 * en.powf(-0.2)).max(0.2);
        }
    }
}

fn fail_termination(e: &Error, y: &Y, spec: &SystemSpec) -> Termination {
    match error_index(e, y, spec) {
        Some(index) => Termination::Collision { index },
        None => Termination::SolverFailure,
    }
}

fn midpoint(s0: &PhaseState, spec: &SystemSpec, t_end: f64, dt: f64, c: &Controls, out: &mut Sampler) -> (usize, usize, Termination) {
    if !(dt > 0.0) {
        return (0, 0, Termination::StepUnderflow);
    }
    let n = ((t_end - s0.t) / dt).ceil() as usize;
    let h = (t_end - s0.t) / n as f64;
    let mut y = s0.y();
    for step in 0..n {
        if step >= c.max_steps {
            return (step, 0, Termination::MaxSteps);
        }
        let t = s0.t + step as f64 * h;
        let mut f = match rhs(t, &y, spec) {
            Ok(f) => f,
            Err(e) => return (step, 0, fail_termination(&e, &y, spec)),
        };
        let mut y_new = y + f * h;
        let mut converged = false;
        for _ in 0..100 {
            let mid = (y + y_new) * 0.5;
            f = match rhs(t + 0.5 * h, &mid, spec) {
                Ok(f) => f,
                Err(e) => return (step, 0, fail_termination(&e, &mid, spec)),
            };
            let next = y + f * h;
            let delta = (next - y_new).amax();
            y_new = next;
            if delta <= 1e-15 * (1.0 + y_new.amax()) {
                converged = true;
                break;
            }
        }
        if !converged {
            return (step, 0, Termination::SolverFailure);
        }
        y = y_new;
        let t_new = if step + 1 == n { t_end } else { s0.t + (step + 1) as f64 * h };
        if let Some(index) = collided(&y, spec, c.collision_radius) {
            out.push(PhaseState::from_y(t_new, &y), true);
            return (step + 1, 0, Termination::Collision { index });
        }
        out.push(PhaseState::from_y(t_new, &y), step + 1 == n);
    }
    (n, 0, Termination::Completed)
}

/// Constants of motion at one state. Entries not defined for the family
/// are `None`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conserved {
    pub energy: f64,
    /// Axial canonical momentum (axial flat configurations).
    pub p_phi: Option<f64>,
    /// Raw separation constant of the separated radicands.
    pub sep_n: Option<f64>,
    /// `I_e = n - 2a²E` (two-center family).
    pub i_e: Option<f64>,
    /// `I_p = n` (Stark-Zeeman family).
    pub i_p: Option<f64>,
    /// `J = r×v - s r̂` (one flat center, no uniform fields).
    pub j: Option<Vec3>,
    /// `r̂·Ĵ`.
    pub cone_cosine: Option<f64>,
}

fn is_axial(cfg: &DyonConfig) -> bool {
    cfg.dyons.iter().all(|d| d.position.x == 0.0 && d.position.y == 0.0)
        && cfg.b0.x == 0.0
        && cfg.b0.y == 0.0
        && cfg.e0.x == 0.0
        && cfg.e0.y == 0.0
}

/// Separation constant and energy of the two-center family at one state.
pub fn elliptic_separation(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<(f64, f64)> {
    let k = spec.elliptic_params()?;
    let a = k.a;
    let q = to_elliptic(r, a);
    let p = canonical_momenta_map(r, v, CoordinateFamily::Elliptic { a }, spec.cfg())?;
    let xi2 = q.xi * q.xi;
    let eta2 = q.eta * q.eta;
    let big_a = (xi2 - 1.0) * p.p1 * p.p1 + v_elliptic(q.xi, p.p_phi, &k);
    let big_b = (1.0 - eta2) * p.p2 * p.p2 + w_elliptic(q.eta, p.p_phi, &k);
    let n = (big_a * (1.0 - eta2) - big_b * (xi2 - 1.0)) / (xi2 - eta2);
    Ok((n, elliptic_hamiltonian(&q, &p, spec)?))
}

/// Separation constant and Hamilton-Jacobi energy `H + ½ p_φ e B` of the
/// Stark-Zeeman family at one state.
pub fn parabolic_separation(r: &Vec3, v: &Vec3, spec: &SystemSpec) -> Result<(f64, f64)> {
    let k = spec.parabolic_params()?;
    let q = to_parabolic(r);
    let p = canonical_momenta_map(r, v, CoordinateFamily::Parabolic, spec.cfg())?;
    let big_a = 4.0 * q.xi * p.p1 * p.p1 + v_parabolic(q.xi, p.p_phi, &k);
    let big_b = 4.0 * q.eta * p.p2 * p.p2 + w_parabolic(q.eta, p.p_phi, &k);
    let n = (q.eta * big_a - q.xi * big_b) / (q.xi + q.eta);
    let h = stark_zeeman_hamiltonian(&q, &p, spec)?;
    Ok((n, h + 0.5 * p.p_phi * k.eb))
}

pub fn conserved_quantities(s: &PhaseState, spec: &SystemSpec) -> Result<Conserved> {
    let cfg = spec.cfg();
    let flat = spec.family() != Family::CurvedMultiCenter;
    let mut out = Conserved {
        energy: energy(&s.r, &s.v, spec)?,
        p_phi: None,
        sep_n: None,
        i_e: None,
        i_p: None,
        j: None,
        cone_cosine: None,
    };
    if flat && is_axial(cfg) {
        out.p_phi = Some(crate::geometry::axial_momentum(&s.r, &s.v, cfg)?);
    }
    match spec.family() {
        Family::TwoCenterElliptic => {
            let (n, h) = elliptic_separation(&s.r, &s.v, spec)?;
            let a = spec.a().unwrap();
            out.sep_n = Some(n);
            out.i_e = Some(n - 2.0 * a * a * h);
        }
        Family::StarkZeemanParabolic => {
            let (n, _) = parabolic_separation(&s.r, &s.v, spec)?;
            out.sep_n = Some(n);
            out.i_p = Some(n);
        }
        _ => {}
    }
    if flat && cfg.dyons.len() == 1 && cfg.b0 == Vec3::zeros() && cfg.e0 == Vec3::zeros() {
        let d = &cfg.dyons[0];
        let rel = s.r - d.position;
        if rel.norm() < CENTER_TOL {
            return Err(Error::AtCenter { index: Some(0) });
        }
        let rhat = rel.normalize();
        let j = rel.cross(&s.v) - rhat * (cfg.e * d.g);
        out.j = Some(j);
        let jn = j.norm();
        if jn > 0.0 {
            out.cone_cosine = Some(rhat.dot(&j) / jn);
        }
    }
    Ok(out)
}

/// Drift statistics of one conserved quantity along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantityDrift {
    pub name: String,
    pub initial: f64,
    pub mean: f64,
    pub std_dev: f64,
    pub max_abs_drift: f64,
    pub mean_abs_drift: f64,
    pub max_rel_drift: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    pub quantities: Vec<QuantityDrift>,
    pub threshold: f64,
    /// Samples at which the quantities could not be evaluated.
    pub skipped: usize,
}

impl ConservationReport {
    pub fn get(&self, name: &str) -> Option<&QuantityDrift> {
        self.quantities.iter().find(|q| q.name == name)
    }

    pub fn flagged(&self) -> Vec<&str> {
        self.quantities.iter().filter(|q| q.flagged).map(|q| q.name.as_str()).collect()
    }
}

/// Relative-drift threshold used by [`monitor`].
pub const DEFAULT_DRIFT_THRESHOLD: f64 = 1e-6;

pub fn monitor(traj: &Trajectory) -> ConservationReport {
    monitor_with(traj, DEFAULT_DRIFT_THRESHOLD)
}

pub fn monitor_with(traj: &Trajectory, threshold: f64) -> ConservationReport {
    let mut series: Vec<(&'static str, Vec<f64>)> = Vec::new();
    let mut skipped = 0;
    for s in &traj.samples {
        let Ok(c) = conserved_quantities(s, &traj.spec) else {
            skipped += 1;
            continue;
        };
        let mut row = vec![("E", Some(c.energy)), ("p_phi", c.p_phi), ("I_e", c.i_e), ("I_p", c.i_p)];
        if let Some(j) = c.j {
            row.extend([("J_x", Some(j.x)), ("J_y", Some(j.y)), ("J_z", Some(j.z))]);
        }
        row.push(("cone_cos", c.cone_cosine));
        for (name, value) in row {
            let Some(value) = value else { continue };
            match series.iter_mut().find(|(n, _)| *n == name) {
                Some((_, v)) => v.push(value),
                None => series.push((name, vec![value])),
            }
        }
    }
    let quantities = series
        .into_iter()
        .map(|(name, xs)| {
            let x0 = xs[0];
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let drifts: Vec<f64> = xs.iter().map(|x| (x - x0).abs()).collect();
            let max_abs = drifts.iter().cloned().fold(0.0, f64::max);
            let denom = if x0 != 0.0 { x0.abs() } else { 1.0 };
            QuantityDrift {
                name: name.to_string(),
                initial: x0,
                mean,
                std_dev: var.sqrt(),
                max_abs_drift: max_abs,
                mean_abs_drift: drifts.iter().sum::<f64>() / n,
                max_rel_drift: max_abs / denom,
                flagged: max_abs / denom > threshold,
            }
        })
        .collect();
    ConservationReport { quantities, threshold, skipped }
}

/// Angle below which a point counts as too close to a string.
pub const PATCH_ANGLE_DEG: f64 = 10.0;

/// Reverses the string of every dyon whose string ray passes within
/// `PATCH_ANGLE_DEG` of the point.
pub fn gauge_patch(r: &Vec3, cfg: &DyonConfig) -> Result<DyonConfig> {
    let mut out = cfg.clone();
    let limit = PATCH_ANGLE_DEG.to_radians().cos();
    for (i, d) in cfg.dyons.iter().enumerate() {
        let rel = r - d.position;
        let dist = rel.norm();
        if dist < CENTER_TOL {
            return Err(Error::Unpatchable { index: i });
        }
        let n = cfg.string_dir(i);
        if rel.dot(&n) / dist > limit {
            out.dyons[i].string_dir = Some(-n);
        }
    }
    Ok(out)
}
