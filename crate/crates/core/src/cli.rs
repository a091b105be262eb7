//! Command-line runner: JSON run configurations, the four run modes and
//! their CSV/JSON outputs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::dynamics::{conserved_quantities, integrate, monitor, Controls, Method, PhaseState, Trajectory};
use crate::error::Error;
use crate::fields::{Dyon, DyonConfig, GreenFunction, MetricProfile};
use crate::geometry::Vec3;
use crate::hamiltonians::{Family, SystemSpec};
use crate::quadrature::validate_quadrature;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Simulate,
    Validate,
    Sweep,
    Green,
}

#[derive(Debug, Parser)]
#[command(name = "micz", about = "Charged particle dynamics in fields of Dirac dyons")]
pub struct Args {
    #[arg(value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Keep every N-th accepted integrator step (overrides the config).
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) | Error::FamilyMismatch(_) | Error::DomainError(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    pub system: SystemConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green: Option<GreenConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    FlatMultiCenter,
    TwoCenterElliptic,
    StarkZeemanParabolic,
    CurvedMultiCenter,
}

impl From<FamilyName> for Family {
    fn from(f: FamilyName) -> Self {
        match f {
            FamilyName::FlatMultiCenter => Family::FlatMultiCenter,
            FamilyName::TwoCenterElliptic => Family::TwoCenterElliptic,
            FamilyName::StarkZeemanParabolic => Family::StarkZeemanParabolic,
            FamilyName::CurvedMultiCenter => Family::CurvedMultiCenter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub family: FamilyName,
    pub e: f64,
    pub dyons: Vec<DyonEntry>,
    #[serde(default)]
    pub b0: [f64; 3],
    #[serde(default)]
    pub e0: [f64; 3],
    #[serde(default)]
    pub metric: MetricConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DyonEntry {
    pub position: [f64; 3],
    pub g: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub string_dir: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MetricConfig {
    #[default]
    Flat,
    Sphere {
        r0: f64,
    },
    Pseudosphere {
        r0: f64,
    },
    Custom {
        table: Vec<[f64; 2]>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub t: f64,
    pub r: [f64; 3],
    pub v: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Dopri5,
    ImplicitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub method: MethodName,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    /// Step of the implicit midpoint rule.
    pub dt: f64,
    pub collision_radius: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        let c = Controls::default();
        IntegratorConfig {
            method: MethodName::Dopri5,
            rel_tol: c.rel_tol,
            abs_tol: c.abs_tol,
            max_step: c.max_step,
            dt: 1e-3,
            collision_radius: c.collision_radius,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// One of `e`, `b0.z`, `e0.z`, `dyons[i].g`, `dyons[i].q`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Use the quadrature construction even where a closed form exists.
    #[serde(default)]
    pub numeric: bool,
}

fn default_r_min() -> f64 {
    0.1
}
fn default_r_max() -> f64 {
    10.0
}
fn default_points() -> usize {
    100
}

fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl RunConfig {
    pub fn from_path(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn spec(&self) -> CliResult<SystemSpec> {
        let s = &self.system;
        let dyons = s
            .dyons
            .iter()
            .map(|d| {
                let dy = Dyon::new(vec3(d.position), d.g, d.q);
                match d.string_dir {
                    Some(n) if vec3(n).norm() > 0.0 => Ok(dy.with_string(vec3(n))),
                    Some(_) => Err(CliError::Config("string_dir must be nonzero".into())),
                    None => Ok(dy),
                }
            })
            .collect::<CliResult<_>>()?;
        let cfg = DyonConfig::new(s.e, dyons).with_uniform_fields(vec3(s.b0), vec3(s.e0));
        let profile = match &s.metric {
            MetricConfig::Flat => MetricProfile::Flat,
            MetricConfig::Sphere { r0 } => MetricProfile::sphere(*r0)?,
            MetricConfig::Pseudosphere { r0 } => MetricProfile::pseudosphere(*r0)?,
            MetricConfig::Custom { table } => {
                MetricProfile::custom(&table.iter().map(|p| (p[0], p[1])).collect::<Vec<_>>())?
            }
        };
        Ok(SystemSpec::from_parts(s.family.into(), cfg, profile)?)
    }

    pub fn controls(&self, stride_override: Option<usize>) -> CliResult<Controls> {
        let i = &self.integrator;
        let positive = [i.rel_tol, i.abs_tol, i.max_step, i.dt, i.collision_radius];
        if positive.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(CliError::Config("integrator tolerances, steps and collision radius must be positive".into()));
        }
        let stride = stride_override.or(self.stride).unwrap_or(1);
        if stride == 0 {
            return Err(CliError::Config("stride must be at least 1".into()));
        }
        let method = match i.method {
            MethodName::Dopri5 => Method::Dopri5,
            MethodName::ImplicitMidpoint => Method::ImplicitMidpoint { dt: i.dt },
        };
        Ok(Controls {
            rel_tol: i.rel_tol,
            abs_tol: i.abs_tol,
            max_step: i.max_step,
            method,
            stride,
            collision_radius: i.collision_radius,
            ..Controls::default()
        })
    }

    fn initial(&self) -> CliResult<(PhaseState, f64)> {
        let s = self.initial.ok_or_else(|| CliError::Config("this mode needs an \"initial\" state".into()))?;
        let t_end = self.t_end.ok_or_else(|| CliError::Config("this mode needs \"t_end\"".into()))?;
        Ok((PhaseState::new(s.t, vec3(s.r), vec3(s.v)), t_end))
    }
}

fn mode_name(m: Mode) -> &'static str {
    match m {
        Mode::Simulate => "simulate",
        Mode::Validate => "validate",
        Mode::Sweep => "sweep",
        Mode::Green => "green",
    }
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args(args: Args) -> i32 {
    match run(&args) {
        Ok(summary) => {
            if !args.quiet {
                println!("{summary}");
            }
            0
        }
        Err(e) => {
            eprintln!("micz: {e}");
            e.exit_code()
        }
    }
}

/// Executes one mode and returns a one-line summary.
pub fn run(args: &Args) -> CliResult<String> {
    let cfg = RunConfig::from_path(&args.config)?;
    if let Some(m) = cfg.mode {
        if m != args.mode {
            return Err(CliError::Config(format!("config is for mode {} but {} was requested", mode_name(m), mode_name(args.mode))));
        }
    }
    let out = args.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out).map_err(|e| CliError::Config(format!("cannot create {}: {e}", out.display())))?;
    match args.mode {
        Mode::Simulate => simulate(&cfg, &out, args.stride),
        Mode::Validate => validate(&cfg, &out, args.stride),
        Mode::Sweep => sweep(&cfg, &out, args.stride),
        Mode::Green => green(&cfg, &out),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

/// Writes a file atomically enough for our purposes: create, write, flush.
fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

/// 17 significant digits, round-trip exact.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() { format!("{x:.16e}") } else { "nan".into() }
}

pub fn trajectory_csv(traj: &Trajectory, w: &mut dyn Write) -> std::io::Result<()> {
    let extra = match traj.spec.family() {
        Family::TwoCenterElliptic => ",I_e",
        Family::StarkZeemanParabolic => ",I_p",
        _ => "",
    };
    writeln!(w, "t,x,y,z,vx,vy,vz,E,p_phi{extra}")?;
    for s in &traj.samples {
        let c = conserved_quantities(s, &traj.spec).ok();
        let mut row: Vec<f64> = vec![s.t, s.r.x, s.r.y, s.r.z, s.v.x, s.v.y, s.v.z];
        row.push(c.map_or(f64::NAN, |c| c.energy));
        row.push(c.and_then(|c| c.p_phi).unwrap_or(f64::NAN));
        if !extra.is_empty() {
            row.push(c.and_then(|c| c.i_e.or(c.i_p)).unwrap_or(f64::NAN));
        }
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

fn termination_text(traj: &Trajectory) -> String {
    match traj.check() {
        Ok(()) => "completed".into(),
        Err(e) => e.to_string(),
    }
}

pub fn conservation_json(traj: &Trajectory) -> Value {
    let report = monitor(traj);
    let mut m = Map::new();
    for q in &report.quantities {
        m.insert(q.name.clone(), json!({ "max_abs_drift": q.max_abs_drift, "max_rel_drift": q.max_rel_drift }));
    }
    let e = report.get("E").map_or(f64::NAN, |q| q.max_rel_drift);
    m.insert("E_rel_drift".into(), json!(e));
    m.insert("flagged".into(), json!(report.flagged()));
    m.insert("termination".into(), json!(termination_text(traj)));
    Value::Object(m)
}

fn write_json(path: &Path, v: &Value) -> CliResult<()> {
    write_file(path, |w| {
        serde_json::to_writer_pretty(&mut *w, v).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

fn simulate(cfg: &RunConfig, out: &Path, stride: Option<usize>) -> CliResult<String> {
    let spec = cfg.spec()?;
    let controls = cfg.controls(stride)?;
    let (s0, t_end) = cfg.initial()?;
    let traj = integrate(&s0, &spec, t_end, &controls)?;
    write_file(&out.join("trajectory.csv"), |w| trajectory_csv(&traj, w))?;
    let report = conservation_json(&traj);
    write_json(&out.join("report.json"), &report)?;
    traj.check()?;
    Ok(format!(
        "simulate: {} samples, {} steps, E_rel_drift = {:.3e}",
        traj.samples.len(),
        traj.steps,
        report["E_rel_drift"].as_f64().unwrap_or(f64::NAN)
    ))
}

fn validate(cfg: &RunConfig, out: &Path, stride: Option<usize>) -> CliResult<String> {
    let spec = cfg.spec()?;
    if !matches!(spec.family(), Family::TwoCenterElliptic | Family::StarkZeemanParabolic) {
        return Err(CliError::Config(format!("validate needs a separable family, got {}", spec.family())));
    }
    let controls = cfg.controls(stride)?;
    let (s0, t_end) = cfg.initial()?;
    let traj = integrate(&s0, &spec, t_end, &controls)?;
    traj.check()?;
    let rep = validate_quadrature(&traj)?;
    let tps: Vec<Value> = rep
        .turning_points
        .iter()
        .map(|t| {
            json!({
                "variable": t.variable.to_string(),
                "lo": t.lo,
                "hi": t.hi,
                "kind": format!("{:?}", t.kind).to_lowercase(),
                "half_librations": t.half_librations,
            })
        })
        .collect();
    let v = json!({
        "max_dt_residual": rep.max_dt_residual,
        "max_dphi_residual": rep.max_dphi_residual,
        "turning_points": tps,
        "samples": rep.samples,
    });
    write_json(&out.join("validation.json"), &v)?;
    Ok(format!("validate: max |dt| = {:.3e}, max |dphi| = {:.3e}", rep.max_dt_residual, rep.max_dphi_residual))
}

fn apply_parameter(cfg: &RunConfig, name: &str, value: f64) -> CliResult<RunConfig> {
    let mut c = cfg.clone();
    let s = &mut c.system;
    let bad = || CliError::Config(format!("unknown sweep parameter {name:?}"));
    match name {
        "e" => s.e = value,
        "b0.z" => s.b0[2] = value,
        "e0.z" => s.e0[2] = value,
        _ => {
            let rest = name.strip_prefix("dyons[").ok_or_else(bad)?;
            let (idx, field) = rest.split_once("].").ok_or_else(bad)?;
            let i: usize = idx.parse().map_err(|_| bad())?;
            let d = s.dyons.get_mut(i).ok_or_else(bad)?;
            match field {
                "g" => d.g = value,
                "q" => d.q = value,
                _ => return Err(bad()),
            }
        }
    }
    Ok(c)
}

fn sweep(cfg: &RunConfig, out: &Path, stride: Option<usize>) -> CliResult<String> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| CliError::Config("sweep mode needs a \"sweep\" section".into()))?;
    let controls = cfg.controls(stride)?;
    let (s0, t_end) = cfg.initial()?;
    let points: Vec<(f64, SystemSpec)> = sw
        .values
        .iter()
        .map(|&v| Ok((v, apply_parameter(cfg, &sw.parameter, v)?.spec()?)))
        .collect::<CliResult<_>>()?;
    let rows: Vec<CliResult<String>> = points
        .par_iter()
        .map(|(value, spec)| {
            let traj = integrate(&s0, spec, t_end, &controls)?;
            let report = monitor(&traj);
            let get = |n: &str| report.get(n).map_or(f64::NAN, |q| q.max_rel_drift);
            let sep = if report.get("I_e").is_some() { get("I_e") } else { get("I_p") };
            let p_phi = report.get("p_phi").map_or(f64::NAN, |q| q.max_abs_drift);
            Ok(format!(
                "{},{},{},{},{},{}",
                fmt_f64(*value),
                fmt_f64(get("E")),
                fmt_f64(sep),
                fmt_f64(p_phi),
                traj.steps,
                termination_text(&traj).replace(',', ";")
            ))
        })
        .collect();
    let mut lines = Vec::with_capacity(rows.len());
    let mut failures = 0;
    for (row, (value, _)) in rows.into_iter().zip(&points) {
        match row {
            Ok(l) => {
                if !l.ends_with(",completed") {
                    failures += 1;
                }
                lines.push(l);
            }
            Err(e) => {
                failures += 1;
                lines.push(format!("{},nan,nan,nan,0,{}", fmt_f64(*value), e.to_string().replace(',', ";")));
            }
        }
    }
    write_file(&out.join("sweep.csv"), |w| {
        writeln!(w, "{},E_rel_drift,sep_rel_drift,p_phi_abs_drift,steps,termination", sw.parameter)?;
        for l in &lines {
            writeln!(w, "{l}")?;
        }
        Ok(())
    })?;
    if failures > 0 {
        return Err(CliError::Numerical(format!("{failures} of {} sweep points ended early", lines.len())));
    }
    Ok(format!("sweep: {} points over {}", lines.len(), sw.parameter))
}

fn green(cfg: &RunConfig, out: &Path) -> CliResult<String> {
    let spec = cfg.spec()?;
    let gc = cfg.green.clone().unwrap_or(GreenConfig {
        radii: None,
        r_min: default_r_min(),
        r_max: default_r_max(),
        points: default_points(),
        numeric: false,
    });
    let radii = match &gc.radii {
        Some(r) => r.clone(),
        None => {
            if !(gc.r_min > 0.0 && gc.r_max > gc.r_min && gc.points >= 2) {
                return Err(CliError::Config("green needs 0 < r_min < r_max and points >= 2".into()));
            }
            (0..gc.points).map(|i| gc.r_min + (gc.r_max - gc.r_min) * i as f64 / (gc.points - 1) as f64).collect()
        }
    };
    let g = if gc.numeric { GreenFunction::numeric(spec.profile().clone()) } else { spec.green().clone() };
    let values: Vec<(f64, f64)> = radii.iter().map(|&r| Ok((r, g.value(r)?))).collect::<Result<_, Error>>()?;
    write_file(&out.join("green.csv"), |w| {
        writeln!(w, "r,phi")?;
        for (r, phi) in &values {
            writeln!(w, "{},{}", fmt_f64(*r), fmt_f64(*phi))?;
        }
        Ok(())
    })?;
    Ok(format!("green: {} values for {}", values.len(), spec.profile()))
}
