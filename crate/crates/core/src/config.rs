//! Run configuration: a single JSON document with sections `domain`, `fluid`,
//! `kinetic`, `theory` and `output`. Unknown keys anywhere are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ConfigError;
use crate::theory::SOBOLEV_CONSTANT_3D;

/// Initial fluid density layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// Compactly supported density blob surrounded by vacuum.
    VacuumBlob,
    /// Constant density filling the periodic box.
    Uniform,
    /// Density read from a CSV table with header `x1,x2[,x3],value`.
    CustomTable(PathBuf),
}

/// Initial fluid velocity, always generated from a stream function so it is
/// discretely divergence free before projection.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum VelocityProfile {
    /// Compact swirl `curl(ψ e₃)` with `ψ` a radial bump around the box center.
    Swirl,
    /// Periodic shear `(A sin(2π x₂ / L), 0, 0)`.
    Shear,
    /// `u₀ ≡ 0`.
    Rest,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimConfig {
    pub dim: usize,
    pub length: f64,
    pub cells: usize,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,

    pub viscosity: f64,
    pub scenario: Scenario,
    pub rho_max: f64,
    pub blob_radius: f64,
    pub velocity: VelocityProfile,
    pub velocity_amplitude: f64,
    pub swirl_radius: f64,
    /// Keep `u ≡ u₀` and `ρ ≡ ρ₀` (drag-only validation runs).
    pub frozen_fluid: bool,
    pub linear_tol: f64,
    pub div_tol: f64,
    pub max_iterations: usize,

    pub drag: f64,
    pub particles: usize,
    pub particle_mass: f64,
    pub spatial_radius: f64,
    pub velocity_radius: f64,

    pub sobolev_constant: f64,
    pub smallness_margin: f64,
    pub moment_ceiling: Option<f64>,
    pub slack: f64,
    pub tolerance: f64,
    pub probe_times: Vec<f64>,
    pub probe_particles: usize,
    pub probe_eps: Option<f64>,

    pub output_dir: PathBuf,
    pub snapshot_every: usize,

    /// `κ < 1`: outside the regime the decay theorems cover. Not an error.
    pub theory_warning: bool,
}

impl SimConfig {
    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Number of steps, `⌈T_end / Δt⌉`.
    pub fn steps(&self) -> usize {
        let r = self.t_end / self.dt;
        // tolerate representation error in ratios like 2.0 / 0.01
        let rounded = r.round();
        if (r - rounded).abs() <= 1e-9 * rounded.max(1.0) {
            rounded as usize
        } else {
            r.ceil() as usize
        }
    }

    /// Box center along the active axes.
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for v in c.iter_mut().take(self.dim) {
            *v = 0.5 * self.length;
        }
        c
    }

    /// Upper bound on the initial speed used by the CFL guard.
    pub fn initial_speed_bound(&self) -> f64 {
        let fluid = match self.velocity {
            VelocityProfile::Rest => 0.0,
            _ => self.velocity_amplitude,
        };
        let kinetic = if self.particles > 0 {
            self.velocity_radius
        } else {
            0.0
        };
        fluid.max(kinetic)
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.theory_warning {
            w.push(format!(
                "drag coefficient κ = {} < 1: outside the theorem regime, rate comparisons are informational",
                self.drag
            ));
        }
        if self.dim != 3 {
            w.push("d = 2: theory rates use the 3-D Sobolev constant and are informational".into());
        }
        w
    }

    /// Parses and validates a JSON document.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let raw: Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        validate_config(&raw)
    }

    pub fn from_path(path: &Path) -> Result<Self, crate::Error> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(path, e))?;
        let mut cfg = Self::from_json_str(&text)?;
        if let Scenario::CustomTable(p) = &cfg.scenario {
            if p.is_relative() {
                if let Some(parent) = path.parent() {
                    cfg.scenario = Scenario::CustomTable(parent.join(p));
                }
            }
        }
        Ok(cfg)
    }

    /// The JSON document this config was validated from (defaults filled in).
    pub fn to_json(&self) -> Value {
        let scenario = match &self.scenario {
            Scenario::VacuumBlob => "vacuum-blob",
            Scenario::Uniform => "uniform",
            Scenario::CustomTable(_) => "custom-table",
        };
        let velocity = match self.velocity {
            VelocityProfile::Swirl => "swirl",
            VelocityProfile::Shear => "shear",
            VelocityProfile::Rest => "rest",
        };
        let mut fluid = serde_json::json!({
            "viscosity": self.viscosity,
            "scenario": scenario,
            "rho_max": self.rho_max,
            "blob_radius": self.blob_radius,
            "velocity": velocity,
            "velocity_amplitude": self.velocity_amplitude,
            "swirl_radius": self.swirl_radius,
            "frozen": self.frozen_fluid,
            "linear_tol": self.linear_tol,
            "div_tol": self.div_tol,
            "max_iterations": self.max_iterations,
        });
        if let Scenario::CustomTable(p) = &self.scenario {
            fluid["table"] = Value::String(p.display().to_string());
        }
        let mut theory = serde_json::json!({
            "sobolev_constant": self.sobolev_constant,
            "smallness_margin": self.smallness_margin,
            "slack": self.slack,
            "tolerance": self.tolerance,
            "probe_times": self.probe_times,
            "probe_particles": self.probe_particles,
        });
        if let Some(c) = self.moment_ceiling {
            theory["moment_ceiling"] = c.into();
        }
        if let Some(e) = self.probe_eps {
            theory["probe_eps"] = e.into();
        }
        serde_json::json!({
            "domain": {
                "dimension": self.dim,
                "length": self.length,
                "cells": self.cells,
                "dt": self.dt,
                "t_end": self.t_end,
                "seed": self.seed,
            },
            "fluid": fluid,
            "kinetic": {
                "drag": self.drag,
                "particles": self.particles,
                "mass": self.particle_mass,
                "spatial_radius": self.spatial_radius,
                "velocity_radius": self.velocity_radius,
            },
            "theory": theory,
            "output": {
                "dir": self.output_dir.display().to_string(),
                "snapshot_every": self.snapshot_every,
            },
        })
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    (
        "domain",
        &["dimension", "length", "cells", "dt", "t_end", "seed"],
    ),
    (
        "fluid",
        &[
            "viscosity",
            "scenario",
            "table",
            "rho_max",
            "blob_radius",
            "velocity",
            "velocity_amplitude",
            "swirl_radius",
            "frozen",
            "linear_tol",
            "div_tol",
            "max_iterations",
        ],
    ),
    (
        "kinetic",
        &[
            "drag",
            "particles",
            "mass",
            "spatial_radius",
            "velocity_radius",
        ],
    ),
    (
        "theory",
        &[
            "sobolev_constant",
            "smallness_margin",
            "moment_ceiling",
            "slack",
            "tolerance",
            "probe_times",
            "probe_particles",
            "probe_eps",
        ],
    ),
    ("output", &["dir", "snapshot_every"]),
];

struct Section<'a> {
    name: &'static str,
    map: &'a serde_json::Map<String, Value>,
}

impl Section<'_> {
    fn key(&self, k: &str) -> String {
        format!("{}.{}", self.name, k)
    }

    fn get(&self, k: &str) -> Option<&Value> {
        self.map.get(k).filter(|v| !v.is_null())
    }

    fn f64_opt(&self, k: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => {
                let x = v
                    .as_f64()
                    .ok_or_else(|| ConfigError::invalid(&self.key(k), "expected a number"))?;
                if !x.is_finite() {
                    return Err(ConfigError::NonFinite(self.key(k)));
                }
                Ok(Some(x))
            }
        }
    }

    fn f64_req(&self, k: &str) -> Result<f64, ConfigError> {
        self.f64_opt(k)?
            .ok_or_else(|| ConfigError::MissingKey(self.key(k)))
    }

    fn f64_or(&self, k: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.f64_opt(k)?.unwrap_or(default))
    }

    fn usize_opt(&self, k: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => v.as_u64().map(|x| Some(x as usize)).ok_or_else(|| {
                ConfigError::invalid(&self.key(k), "expected a nonnegative integer")
            }),
        }
    }

    fn usize_req(&self, k: &str) -> Result<usize, ConfigError> {
        self.usize_opt(k)?
            .ok_or_else(|| ConfigError::MissingKey(self.key(k)))
    }

    fn bool_or(&self, k: &str, default: bool) -> Result<bool, ConfigError> {
        match self.get(k) {
            None => Ok(default),
            Some(v) => v
                .as_bool()
                .ok_or_else(|| ConfigError::invalid(&self.key(k), "expected a boolean")),
        }
    }

    fn str_opt(&self, k: &str) -> Result<Option<&str>, ConfigError> {
        match self.get(k) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| ConfigError::invalid(&self.key(k), "expected a string")),
        }
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must be positive, got {v}"),
        ))
    }
}

/// Validates a parsed key-value document into a [`SimConfig`].
pub fn validate_config(raw: &Value) -> Result<SimConfig, ConfigError> {
    let top = raw
        .as_object()
        .ok_or_else(|| ConfigError::Parse("top level must be an object".into()))?;
    for key in top.keys() {
        if !SECTIONS.iter().any(|(s, _)| s == key) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    let mut sections = Vec::new();
    for (name, known) in SECTIONS {
        let map = top
            .get(*name)
            .ok_or_else(|| ConfigError::MissingKey(name.to_string()))?
            .as_object()
            .ok_or_else(|| ConfigError::invalid(name, "expected an object"))?;
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(format!("{name}.{key}")));
            }
        }
        sections.push(Section { name, map });
    }
    let [domain, fluid, kinetic, theory, output] =
        <[Section; 5]>::try_from(sections).unwrap_or_else(|_| unreachable!("five sections"));

    let dim = domain.usize_req("dimension")?;
    if dim != 2 && dim != 3 {
        return Err(ConfigError::invalid("domain.dimension", "must be 2 or 3"));
    }
    let length = positive("domain.length", domain.f64_req("length")?)?;
    let cells = domain.usize_req("cells")?;
    if cells < 8 {
        return Err(ConfigError::invalid(
            "domain.cells",
            "need at least 8 cells per axis",
        ));
    }
    let dt = domain.f64_req("dt")?;
    if dt <= 0.0 {
        return Err(ConfigError::NonPositiveTimeStep(dt));
    }
    let t_end = domain.f64_req("t_end")?;
    if t_end < dt {
        return Err(ConfigError::invalid(
            "domain.t_end",
            "must be at least one time step",
        ));
    }
    let seed = domain.usize_req("seed")? as u64;

    let viscosity = positive("fluid.viscosity", fluid.f64_req("viscosity")?)?;
    let scenario = match fluid.str_opt("scenario")?.unwrap_or("vacuum-blob") {
        "vacuum-blob" => Scenario::VacuumBlob,
        "uniform" => Scenario::Uniform,
        "custom-table" => Scenario::CustomTable(PathBuf::from(
            fluid
                .str_opt("table")?
                .ok_or_else(|| ConfigError::MissingKey("fluid.table".into()))?,
        )),
        other => {
            return Err(ConfigError::invalid(
                "fluid.scenario",
                format!("unknown scenario `{other}`"),
            ))
        }
    };
    let rho_max = fluid.f64_or("rho_max", 1.0)?;
    if rho_max < 0.0 {
        return Err(ConfigError::invalid("fluid.rho_max", "must be nonnegative"));
    }
    let blob_radius = positive(
        "fluid.blob_radius",
        fluid.f64_or("blob_radius", 0.25 * length)?,
    )?;
    let velocity = match fluid.str_opt("velocity")?.unwrap_or("swirl") {
        "swirl" => VelocityProfile::Swirl,
        "shear" => VelocityProfile::Shear,
        "rest" => VelocityProfile::Rest,
        other => {
            return Err(ConfigError::invalid(
                "fluid.velocity",
                format!("unknown velocity profile `{other}`"),
            ))
        }
    };
    let velocity_amplitude = fluid.f64_or("velocity_amplitude", 0.0)?;
    if velocity_amplitude < 0.0 {
        return Err(ConfigError::invalid(
            "fluid.velocity_amplitude",
            "must be nonnegative",
        ));
    }
    let swirl_radius = positive(
        "fluid.swirl_radius",
        fluid.f64_or("swirl_radius", blob_radius)?,
    )?;
    let frozen_fluid = fluid.bool_or("frozen", false)?;
    let linear_tol = positive("fluid.linear_tol", fluid.f64_or("linear_tol", 1e-10)?)?;
    let div_tol = positive("fluid.div_tol", fluid.f64_or("div_tol", 1e-10)?)?;
    let max_iterations = fluid.usize_opt("max_iterations")?.unwrap_or(500);

    let drag = positive("kinetic.drag", kinetic.f64_req("drag")?)?;
    let particles = kinetic.usize_req("particles")?;
    let particle_mass = kinetic.f64_or("mass", if particles > 0 { 0.1 } else { 0.0 })?;
    if particles > 0 && particle_mass <= 0.0 {
        return Err(ConfigError::invalid(
            "kinetic.mass",
            "must be positive when particles are present",
        ));
    }
    let spatial_radius = positive(
        "kinetic.spatial_radius",
        kinetic.f64_or("spatial_radius", 0.2 * length)?,
    )?;
    let velocity_radius = kinetic.f64_or("velocity_radius", 0.0)?;
    if velocity_radius < 0.0 {
        return Err(ConfigError::invalid(
            "kinetic.velocity_radius",
            "must be nonnegative",
        ));
    }

    let sobolev_constant = positive(
        "theory.sobolev_constant",
        theory.f64_or("sobolev_constant", SOBOLEV_CONSTANT_3D)?,
    )?;
    let smallness_margin = positive(
        "theory.smallness_margin",
        theory.f64_or("smallness_margin", 1.0)?,
    )?;
    let moment_ceiling = theory.f64_opt("moment_ceiling")?;
    if let Some(c) = moment_ceiling {
        positive("theory.moment_ceiling", c)?;
    }
    let slack = theory.f64_or("slack", 0.05)?;
    let tolerance = theory.f64_or("tolerance", 0.05)?;
    if !(0.0..1.0).contains(&slack) {
        return Err(ConfigError::invalid("theory.slack", "must lie in [0, 1)"));
    }
    if tolerance < 0.0 {
        return Err(ConfigError::invalid(
            "theory.tolerance",
            "must be nonnegative",
        ));
    }
    let probe_times = match theory.get("probe_times") {
        None => vec![1.0, 2.0, 5.0],
        Some(v) => v
            .as_array()
            .ok_or_else(|| ConfigError::invalid("theory.probe_times", "expected an array"))?
            .iter()
            .map(|x| {
                x.as_f64()
                    .filter(|t| t.is_finite() && *t > 0.0)
                    .ok_or_else(|| {
                        ConfigError::invalid("theory.probe_times", "expected positive numbers")
                    })
            })
            .collect::<Result<_, _>>()?,
    };
    let probe_particles = theory.usize_opt("probe_particles")?.unwrap_or(100);
    let probe_eps = theory.f64_opt("probe_eps")?;

    let output_dir = PathBuf::from(output.str_opt("dir")?.unwrap_or("out"));
    let snapshot_every = output.usize_opt("snapshot_every")?.unwrap_or(0);

    let cfg = SimConfig {
        dim,
        length,
        cells,
        dt,
        t_end,
        seed,
        viscosity,
        scenario,
        rho_max,
        blob_radius,
        velocity,
        velocity_amplitude,
        swirl_radius,
        frozen_fluid,
        linear_tol,
        div_tol,
        max_iterations,
        drag,
        particles,
        particle_mass,
        spatial_radius,
        velocity_radius,
        sobolev_constant,
        smallness_margin,
        moment_ceiling,
        slack,
        tolerance,
        probe_times,
        probe_particles,
        probe_eps,
        output_dir,
        snapshot_every,
        theory_warning: drag < 1.0,
    };
    let courant = cfg.dt * cfg.initial_speed_bound() / cfg.h();
    if courant > 1.0 {
        return Err(ConfigError::Cfl { courant });
    }
    Ok(cfg)
}
