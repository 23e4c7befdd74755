//! Fluid substep: upwind transport of density and momentum followed by an
//! implicit generalized Stokes solve that carries viscosity, drag and the
//! incompressibility constraint.

mod advect;
mod norms;
mod stokes;

pub(crate) use advect::transport_faces;
pub use advect::{advect_density, courant_number, mass_fluxes, transport_momentum};
pub use norms::{velocity_gradient_norms, GradientNorms};
pub use stokes::{stokes_drag_solve, StokesOptions, StokesSolution, StokesSystem};

use crate::grid::{FaceField, Grid, ScalarField};

/// Density at cell centers, staggered velocity, mean-zero pressure.
#[derive(Clone, Debug, PartialEq)]
pub struct FluidState {
    pub rho: ScalarField,
    pub u: FaceField,
    pub p: ScalarField,
    pub t: f64,
}

impl FluidState {
    pub fn at_rest(grid: &Grid, rho: ScalarField) -> Self {
        Self {
            rho,
            u: FaceField::zeros(grid),
            p: ScalarField::zeros(grid),
            t: 0.0,
        }
    }

    /// `Σ_faces ρ_face u h^d` per component.
    pub fn momentum(&self, grid: &Grid) -> [f64; 3] {
        let mut m = [0.0; 3];
        for (k, comp) in self.u.comps.iter().enumerate() {
            let rho_f = crate::grid::to_faces(grid, &self.rho, k);
            m[k] = comp.iter().zip(&rho_f).map(|(u, r)| u * r).sum::<f64>() * grid.cell_volume();
        }
        m
    }
}
