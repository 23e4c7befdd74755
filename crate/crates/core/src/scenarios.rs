//! Built-in reference scenarios, embedded as config documents.

use crate::config::SimConfig;
use crate::error::Result;

pub const DRAG_ONLY: &str = r#"{
  "domain": {"dimension": 2, "length": 1.0, "cells": 32, "dt": 0.01, "t_end": 3.0, "seed": 5},
  "fluid": {"viscosity": 1.0, "scenario": "vacuum-blob", "velocity": "rest", "frozen": true},
  "kinetic": {"drag": 2.0, "particles": 1000, "mass": 0.1, "spatial_radius": 0.2, "velocity_radius": 0.5},
  "theory": {"probe_times": [1.0, 2.0], "probe_particles": 20},
  "output": {"dir": "out/drag-only"}
}"#;

pub const PURE_FLUID: &str = r#"{
  "domain": {"dimension": 3, "length": 4.0, "cells": 16, "dt": 0.01, "t_end": 2.0, "seed": 2},
  "fluid": {"viscosity": 1.0, "scenario": "vacuum-blob", "rho_max": 1.0, "blob_radius": 1.4,
            "velocity": "swirl", "velocity_amplitude": 0.01, "swirl_radius": 1.2},
  "kinetic": {"drag": 1.0, "particles": 0},
  "theory": {},
  "output": {"dir": "out/pure-fluid"}
}"#;

pub const COUPLED_3D: &str = r#"{
  "domain": {"dimension": 3, "length": 1.0, "cells": 32, "dt": 0.01, "t_end": 5.0, "seed": 1},
  "fluid": {"viscosity": 1.0, "scenario": "vacuum-blob", "rho_max": 1.0, "blob_radius": 0.35,
            "velocity": "swirl", "velocity_amplitude": 0.005, "swirl_radius": 0.3},
  "kinetic": {"drag": 1.0, "particles": 100000, "mass": 0.1, "spatial_radius": 0.25, "velocity_radius": 0.01},
  "theory": {"probe_times": [1.0, 2.0, 5.0], "probe_particles": 100},
  "output": {"dir": "out/coupled-3d"}
}"#;

pub const COUPLED_2D: &str = r#"{
  "domain": {"dimension": 2, "length": 1.0, "cells": 64, "dt": 0.01, "t_end": 2.0, "seed": 4},
  "fluid": {"viscosity": 1.0, "scenario": "vacuum-blob", "rho_max": 1.0, "blob_radius": 0.35,
            "velocity": "swirl", "velocity_amplitude": 0.005, "swirl_radius": 0.3},
  "kinetic": {"drag": 1.0, "particles": 10000, "mass": 0.1, "spatial_radius": 0.25, "velocity_radius": 0.01},
  "theory": {"probe_times": [1.0, 2.0], "probe_particles": 100},
  "output": {"dir": "out/coupled-2d"}
}"#;

/// `(name, document)` for every built-in scenario.
pub const REFERENCE: [(&str, &str); 4] = [
    ("drag-only", DRAG_ONLY),
    ("pure-fluid", PURE_FLUID),
    ("coupled-3d", COUPLED_3D),
    ("coupled-2d", COUPLED_2D),
];

pub fn names() -> Vec<&'static str> {
    REFERENCE.iter().map(|(n, _)| *n).collect()
}

pub fn reference(name: &str) -> Option<SimConfig> {
    REFERENCE
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, doc)| SimConfig::from_json_str(doc).expect("embedded scenario is valid"))
}

pub fn all() -> Result<Vec<(&'static str, SimConfig)>> {
    REFERENCE
        .iter()
        .map(|(n, doc)| Ok((*n, SimConfig::from_json_str(doc)?)))
        .collect()
}
