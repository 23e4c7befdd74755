use crate::error::Result;
use crate::grid::{grid_norm_vector, non_finite, FaceField, Grid, NormKind};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradientNorms {
    pub grad_l2: f64,
    pub grad_linf: f64,
    pub u_linf: f64,
}

/// `‖∇u‖_{L²}`, `‖∇u‖_{L∞}` and `‖u‖_{L∞}` from staggered-native forward
/// differences. The `L²` form is the Dirichlet form of the discrete Laplacian,
/// so `μ‖∇u‖²` is exactly the viscous dissipation of the scheme.
pub fn velocity_gradient_norms(grid: &Grid, u: &FaceField) -> Result<GradientNorms> {
    if let Some((k, i)) = u.first_non_finite() {
        return Err(non_finite(&format!("velocity component {k}"), grid, i));
    }
    let inv_h = 1.0 / grid.h();
    let mut sum_sq = 0.0;
    let mut max_abs: f64 = 0.0;
    for comp in &u.comps {
        for j in 0..grid.dim() {
            for (i, &val) in comp.iter().enumerate() {
                let d = (comp[grid.up(i, j)] - val) * inv_h;
                sum_sq += d * d;
                max_abs = max_abs.max(d.abs());
            }
        }
    }
    Ok(GradientNorms {
        grad_l2: (sum_sq * grid.cell_volume()).sqrt(),
        grad_linf: max_abs,
        u_linf: grid_norm_vector(grid, u, NormKind::Inf)?,
    })
}
