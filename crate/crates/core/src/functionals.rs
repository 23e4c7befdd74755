//! Energy-type functionals of a discrete state.
//!
//! Fluid terms are summed over faces with the face density `ρ_face` (average
//! of the two adjacent cells). That is the quadratic form the implicit
//! momentum step is stable in, so the discrete energy inequality is measured
//! in the same norm the scheme dissipates.

use serde::Serialize;

use crate::fluid::{velocity_gradient_norms, FluidState};
use crate::grid::{to_faces, FaceField, Grid, ScalarField};
use crate::kinetic::{interpolate_velocity, MomentFields, ParticleEnsemble};
use crate::theory::TheoryConstants;

/// `½ Σ ρ_face |u|² h^d`.
pub fn fluid_energy(grid: &Grid, rho: &ScalarField, u: &FaceField) -> f64 {
    weighted_square(grid, rho, u) * 0.5
}

fn weighted_square(grid: &Grid, rho: &ScalarField, u: &FaceField) -> f64 {
    let mut total = 0.0;
    for (k, comp) in u.comps.iter().enumerate() {
        let rf = to_faces(grid, rho, k);
        total += comp.iter().zip(&rf).map(|(v, r)| r * v * v).sum::<f64>();
    }
    total * grid.cell_volume()
}

/// `E = ½ Σ ρ|u|² h^d + ½ Σ w_p |v_p|²`.
pub fn energy(grid: &Grid, fluid: &FluidState, particles: &ParticleEnsemble) -> f64 {
    fluid_energy(grid, &fluid.rho, &fluid.u) + particles.kinetic_energy()
}

/// `Σ w_p |u(x_p) − v_p|²`.
pub fn relative_velocity_square(grid: &Grid, u: &FaceField, particles: &ParticleEnsemble) -> f64 {
    let up = interpolate_velocity(grid, u, &particles.x);
    up.iter()
        .zip(&particles.v)
        .zip(&particles.w)
        .map(|((a, b), w)| w * (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>())
        .sum()
}

/// `D = μ ‖∇u‖²_{L²} + κ Σ w_p |u(x_p) − v_p|²`.
pub fn dissipation(
    grid: &Grid,
    u: &FaceField,
    particles: &ParticleEnsemble,
    mu: f64,
    kappa: f64,
) -> f64 {
    let g = velocity_gradient_norms(grid, u)
        .map(|n| n.grad_l2)
        .unwrap_or(f64::NAN);
    mu * g * g + kappa * relative_velocity_square(grid, u, particles)
}

/// `𝓔 = Σ ρ |(u − u_prev)/Δt|² h^d + κ² Σ w_p |u(x_p) − v_p|²` (backward
/// difference for `u_t`).
pub fn high_dissipation(
    grid: &Grid,
    rho: &ScalarField,
    u: &FaceField,
    u_prev: &FaceField,
    particles: &ParticleEnsemble,
    kappa: f64,
    dt: f64,
) -> f64 {
    let mut ut = u.clone();
    ut.axpy(-1.0, u_prev);
    ut.scale(1.0 / dt);
    weighted_square(grid, rho, &ut) + kappa * kappa * relative_velocity_square(grid, u, particles)
}

/// `‖∇ρ‖_{L²}` from forward differences.
pub fn density_gradient_l2(grid: &Grid, rho: &ScalarField) -> f64 {
    let inv_h = 1.0 / grid.h();
    let mut s = 0.0;
    for k in 0..grid.dim() {
        for (i, r) in rho.data.iter().enumerate() {
            let d = (rho.data[grid.up(i, k)] - r) * inv_h;
            s += d * d;
        }
    }
    (s * grid.cell_volume()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CeilingMargins {
    pub n: f64,
    pub j: f64,
    pub e: f64,
    pub violated: bool,
}

/// Margins `B − sup` for the three moment ceilings.
pub fn moment_ceiling_check(moments: &MomentFields, theory: &TheoryConstants) -> CeilingMargins {
    let n = theory.ceiling_n - moments.sup_density();
    let j = theory.ceiling_j - moments.sup_momentum();
    let e = theory.ceiling_e - moments.sup_energy();
    CeilingMargins {
        n,
        j,
        e,
        violated: n < 0.0 || j < 0.0 || e < 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct W1Surrogate {
    /// `Σ w_p |v_p|`, the exact cost of moving `f` onto `n_f ⊗ δ_{v=0}`.
    pub surrogate: f64,
    /// `√2 ‖n_f‖^{1/2}_{L¹} E^{1/2}`.
    pub duality_bound: f64,
}

impl W1Surrogate {
    pub fn within_bound(&self) -> bool {
        self.surrogate <= self.duality_bound * (1.0 + 1e-10)
    }
}

pub fn w1_to_dirac(particles: &ParticleEnsemble, nf_mass: f64, energy: f64) -> W1Surrogate {
    let surrogate = particles
        .v
        .iter()
        .zip(&particles.w)
        .map(|(v, w)| w * crate::kinetic::norm2(v).sqrt())
        .sum();
    W1Surrogate {
        surrogate,
        duality_bound: (2.0 * nf_mass.max(0.0) * energy.max(0.0)).sqrt(),
    }
}

/// Mass of `g` in each slab orthogonal to each axis: `out[a][i] = Σ_{cells with
/// coordinate i along a} g h^d`.
pub fn axis_marginals(grid: &Grid, g: &ScalarField) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; grid.n()]; grid.dim()];
    let vol = grid.cell_volume();
    for (i, v) in g.data.iter().enumerate() {
        let c = grid.coords(i);
        for (a, m) in out.iter_mut().enumerate() {
            m[c[a]] += v * vol;
        }
    }
    out
}

/// Exact `W₁` between two measures on a periodic 1-D grid of spacing `h` with
/// equal total mass: `h Σ |F_a − F_b − m|` with `m` the median of the
/// cumulative difference.
pub fn periodic_w1_1d(a: &[f64], b: &[f64], h: f64) -> f64 {
    let mut acc = 0.0;
    let mut cum: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            acc += x - y;
            acc
        })
        .collect();
    let mut sorted = cum.clone();
    sorted.sort_by(f64::total_cmp);
    let med = sorted[sorted.len() / 2];
    cum.iter_mut().for_each(|c| *c = (*c - med).abs());
    h * cum.iter().sum::<f64>()
}

/// `D / (2αE)`; `+∞` when `E = 0`.
pub fn coercivity_ratio(dissipation: f64, energy: f64, alpha: f64) -> f64 {
    if energy > 0.0 {
        dissipation / (2.0 * alpha * energy)
    } else {
        f64::INFINITY
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradDensityCheck {
    pub pass: bool,
    /// `min_t (2‖∇ρ₀‖ − ‖∇ρ(t)‖)`.
    pub margin: f64,
}

/// `‖∇ρ(t)‖_{L²} ≤ 2‖∇ρ₀‖_{L²}` over a sampled series, first sample is `t = 0`.
pub fn grad_density_check(gradrho: &[f64]) -> GradDensityCheck {
    let Some(&g0) = gradrho.first() else {
        return GradDensityCheck {
            pass: true,
            margin: 0.0,
        };
    };
    let margin = gradrho
        .iter()
        .map(|g| 2.0 * g0 - g)
        .fold(f64::INFINITY, f64::min);
    GradDensityCheck {
        pass: margin >= 0.0,
        margin,
    }
}
