//! Particle discretization of the distribution function `f(t, x, v)`.

mod cic;
mod push;
mod snapshot;

pub(crate) use cic::interpolate_at;
pub use cic::{
    deposit_cell_scalar, deposit_drag, deposit_moments, interpolate_cell, interpolate_velocity,
    DragFields, MomentFields,
};
pub use push::{push_one, push_particles};
pub use snapshot::{read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

/// Weighted phase-space particles. Positions are kept inside `[0, L)^d`;
/// unused coordinates (d = 2) are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble {
    pub dim: usize,
    pub x: Vec<[f64; 3]>,
    pub v: Vec<[f64; 3]>,
    pub w: Vec<f64>,
    /// `max_p |v_p|` at `t = 0`.
    pub initial_radius: f64,
}

impl ParticleEnsemble {
    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            x: Vec::new(),
            v: Vec::new(),
            w: Vec::new(),
            initial_radius: 0.0,
        }
    }

    /// Builds an ensemble and records its current support radius as `R₀`.
    pub fn new(dim: usize, x: Vec<[f64; 3]>, v: Vec<[f64; 3]>, w: Vec<f64>) -> Self {
        assert!(x.len() == v.len() && v.len() == w.len());
        let mut e = Self {
            dim,
            x,
            v,
            w,
            initial_radius: 0.0,
        };
        e.initial_radius = support_radius(&e);
        e
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `Σ_p w_p`, summed in particle order.
    pub fn total_mass(&self) -> f64 {
        self.w.iter().sum()
    }

    /// `Σ_p w_p v_p`
    pub fn momentum(&self) -> [f64; 3] {
        let mut m = [0.0; 3];
        for (w, v) in self.w.iter().zip(&self.v) {
            for a in 0..3 {
                m[a] += w * v[a];
            }
        }
        m
    }

    /// `½ Σ_p w_p |v_p|²`
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self
            .w
            .iter()
            .zip(&self.v)
            .map(|(w, v)| w * norm2(v))
            .sum::<f64>()
    }
}

/// `max_p |v_p|`, or 0 for an empty ensemble.
pub fn support_radius(ensemble: &ParticleEnsemble) -> f64 {
    ensemble
        .v
        .iter()
        .map(|v| norm2(v).sqrt())
        .fold(0.0, f64::max)
}

#[inline]
pub(crate) fn norm2(v: &[f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}
