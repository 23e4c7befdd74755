//! Cloud-in-cell (multilinear) transfer between particles and the grid.
//!
//! Interpolation and deposition share one kernel per staggered location, so
//! `Σ_p w_p I(g)(x_p) = Σ_cells g D(w) h^d` holds for every grid field `g`.

use rayon::prelude::*;

use super::{norm2, ParticleEnsemble};
use crate::grid::{FaceField, Grid, ScalarField};

/// Particles per deposition chunk. Fixed so the merge order, and therefore
/// the floating-point result, does not depend on the worker count.
const CHUNK: usize = 8192;

/// Multilinear stencil: up to 8 periodic node indices with their weights.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    pub nodes: [usize; 8],
    pub weights: [f64; 8],
    pub len: usize,
}

/// Stencil for a location grid shifted by `offset[a]` cells along each axis
/// (0.5 for cell centers, 0 along the normal axis of a face).
pub(crate) fn stencil(grid: &Grid, x: &[f64; 3], offset: [f64; 3]) -> Stencil {
    let dim = grid.dim();
    let inv_h = 1.0 / grid.h();
    let mut base = [0i64; 3];
    let mut frac = [0.0; 3];
    for a in 0..dim {
        let s = x[a] * inv_h - offset[a];
        let f = s.floor();
        base[a] = f as i64;
        frac[a] = s - f;
    }
    let len = 1usize << dim;
    let mut nodes = [0usize; 8];
    let mut weights = [0.0; 8];
    for corner in 0..len {
        let mut c = base;
        let mut wgt = 1.0;
        for a in 0..dim {
            if corner >> a & 1 == 1 {
                c[a] += 1;
                wgt *= frac[a];
            } else {
                wgt *= 1.0 - frac[a];
            }
        }
        nodes[corner] = grid.wrapped_index(c);
        weights[corner] = wgt;
    }
    Stencil {
        nodes,
        weights,
        len,
    }
}

pub(crate) fn cell_offset() -> [f64; 3] {
    [0.5; 3]
}

pub(crate) fn face_offset(comp: usize) -> [f64; 3] {
    let mut o = [0.5; 3];
    o[comp] = 0.0;
    o
}

/// Velocity at one position, each component interpolated from its own face grid.
pub(crate) fn interpolate_at(grid: &Grid, u: &FaceField, x: &[f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (k, comp) in u.comps.iter().enumerate() {
        let s = stencil(grid, x, face_offset(k));
        out[k] = (0..s.len).map(|c| s.weights[c] * comp[s.nodes[c]]).sum();
    }
    out
}

/// Interpolates the staggered velocity to every position.
pub fn interpolate_velocity(grid: &Grid, u: &FaceField, positions: &[[f64; 3]]) -> Vec<[f64; 3]> {
    positions
        .par_iter()
        .map(|x| interpolate_at(grid, u, x))
        .collect()
}

/// Interpolates a cell-centered field to one position.
pub fn interpolate_cell(grid: &Grid, g: &ScalarField, x: &[f64; 3]) -> f64 {
    let s = stencil(grid, x, cell_offset());
    (0..s.len).map(|c| s.weights[c] * g.data[s.nodes[c]]).sum()
}

/// Velocity moments deposited at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentFields {
    /// `n_f`
    pub density: ScalarField,
    /// `j_f`, one field per component
    pub momentum: Vec<ScalarField>,
    /// `e_f`
    pub energy: ScalarField,
}

impl MomentFields {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            density: ScalarField::zeros(grid),
            momentum: vec![ScalarField::zeros(grid); grid.dim()],
            energy: ScalarField::zeros(grid),
        }
    }

    pub fn sup_density(&self) -> f64 {
        self.density.data.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_momentum(&self) -> f64 {
        (0..self.density.data.len())
            .map(|i| {
                self.momentum
                    .iter()
                    .map(|j| j.data[i] * j.data[i])
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn sup_energy(&self) -> f64 {
        self.energy.data.iter().copied().fold(0.0, f64::max)
    }
}

/// Drag coefficients `n_f` and `j_f` deposited directly on the velocity faces
/// with the face kernel, so the fluid-side drag is the exact adjoint of the
/// particle-side interpolation.
#[derive(Clone, Debug, PartialEq)]
pub struct DragFields {
    pub density: FaceField,
    pub momentum: FaceField,
}

/// Deposits `n_f`, `j_f`, `e_f` (divided by `h^d`).
pub fn deposit_moments(grid: &Grid, ensemble: &ParticleEnsemble) -> MomentFields {
    let dim = grid.dim();
    let ncomp = dim + 2;
    let acc = chunked_deposit(grid, ensemble, ncomp, |x, v, w, out, grid| {
        let s = stencil(grid, x, cell_offset());
        let e = 0.5 * w * norm2(v);
        for c in 0..s.len {
            let node = s.nodes[c];
            let wt = s.weights[c];
            out[0][node] += wt * w;
            for k in 0..dim {
                out[1 + k][node] += wt * w * v[k];
            }
            out[dim + 1][node] += wt * e;
        }
    });
    let inv_vol = 1.0 / grid.cell_volume();
    let mut fields: Vec<ScalarField> = acc
        .into_iter()
        .map(|mut d| {
            d.iter_mut().for_each(|v| *v *= inv_vol);
            ScalarField { data: d }
        })
        .collect();
    let energy = fields.pop().expect("energy field");
    let momentum = fields.split_off(1);
    let density = fields.pop().expect("density field");
    MomentFields {
        density,
        momentum,
        energy,
    }
}

/// Deposits `w_p g_p` for a per-particle scalar with the cell kernel
/// (not divided by `h^d`).
pub fn deposit_cell_scalar(
    grid: &Grid,
    ensemble: &ParticleEnsemble,
    values: &[f64],
) -> ScalarField {
    let mut out = vec![0.0; grid.len()];
    for ((x, w), g) in ensemble.x.iter().zip(&ensemble.w).zip(values) {
        let s = stencil(grid, x, cell_offset());
        for c in 0..s.len {
            out[s.nodes[c]] += s.weights[c] * w * g;
        }
    }
    ScalarField { data: out }
}

/// Deposits `n_f` and `j_f` on the faces (divided by `h^d`).
pub fn deposit_drag(grid: &Grid, ensemble: &ParticleEnsemble) -> DragFields {
    let dim = grid.dim();
    let acc = chunked_deposit(grid, ensemble, 2 * dim, |x, v, w, out, grid| {
        for k in 0..dim {
            let s = stencil(grid, x, face_offset(k));
            for c in 0..s.len {
                out[k][s.nodes[c]] += s.weights[c] * w;
                out[dim + k][s.nodes[c]] += s.weights[c] * w * v[k];
            }
        }
    });
    let inv_vol = 1.0 / grid.cell_volume();
    let mut comps: Vec<Vec<f64>> = acc
        .into_iter()
        .map(|mut d| {
            d.iter_mut().for_each(|v| *v *= inv_vol);
            d
        })
        .collect();
    let momentum = comps.split_off(dim);
    DragFields {
        density: FaceField { comps },
        momentum: FaceField { comps: momentum },
    }
}

fn chunked_deposit<F>(
    grid: &Grid,
    ensemble: &ParticleEnsemble,
    ncomp: usize,
    kernel: F,
) -> Vec<Vec<f64>>
where
    F: Fn(&[f64; 3], &[f64; 3], f64, &mut [Vec<f64>], &Grid) + Sync,
{
    let n = ensemble.len();
    let partials: Vec<Vec<Vec<f64>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut out = vec![vec![0.0; grid.len()]; ncomp];
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(n);
            for p in lo..hi {
                kernel(
                    &ensemble.x[p],
                    &ensemble.v[p],
                    ensemble.w[p],
                    &mut out,
                    grid,
                );
            }
            out
        })
        .collect();
    let mut iter = partials.into_iter();
    let mut total = iter
        .next()
        .unwrap_or_else(|| vec![vec![0.0; grid.len()]; ncomp]);
    for part in iter {
        for (t, p) in total.iter_mut().zip(part) {
            for (a, b) in t.iter_mut().zip(p) {
                *a += b;
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn single_particle_at_cell_center() {
        let g = Grid::new(3, 8, 1.0);
        let idx = g.index([2, 5, 7]);
        let e = ParticleEnsemble::new(
            3,
            vec![g.cell_center(idx)],
            vec![[2.0, 0.0, 0.0]],
            vec![0.75],
        );
        let m = deposit_moments(&g, &e);
        let vol = g.cell_volume();
        for (i, n) in m.density.data.iter().enumerate() {
            let expect = if i == idx { 0.75 / vol } else { 0.0 };
            assert!((n - expect).abs() < 1e-9 * expect.max(1.0), "cell {i}");
        }
        let e1 = ParticleEnsemble::new(3, vec![[0.3, 0.1, 0.9]], vec![[2.0, 0.0, 0.0]], vec![1.0]);
        let m1 = deposit_moments(&g, &e1);
        assert!((m1.energy.integral(&g) - 2.0).abs() < 1e-12);
        assert!((m1.density.integral(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn interpolation_reproduces_constants_and_affine_fields() {
        let g = Grid::new(3, 8, 1.0);
        let u = FaceField::from_fn(&g, |_| [1.0, 0.0, 0.0]);
        let pts = vec![[0.01, 0.5, 0.99], [0.77, 0.23, 0.41]];
        for up in interpolate_velocity(&g, &u, &pts) {
            assert!((up[0] - 1.0).abs() < 1e-14 && up[1] == 0.0 && up[2] == 0.0);
        }
        // affine in x1, away from the periodic seam
        let u = FaceField::from_fn(&g, |x| [0.5 + 2.0 * x[0], 0.0, 0.0]);
        let face = g.face_center(0, g.index([3, 4, 1]));
        assert!((interpolate_at(&g, &u, &face)[0] - (0.5 + 2.0 * face[0])).abs() < 1e-13);
        let x = [0.41, 0.63, 0.2];
        assert!((interpolate_at(&g, &u, &x)[0] - (0.5 + 2.0 * x[0])).abs() < 1e-13);
    }

    #[test]
    fn interpolated_sine_at_quarter() {
        // u1 = sin(2π x₂) at x₂ = 1/4 equals 1 up to O(h²)
        let mut errs = Vec::new();
        for n in [16, 32, 64] {
            let g = Grid::new(2, n, 1.0);
            let u = FaceField::from_fn(&g, |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]);
            let up = interpolate_at(&g, &u, &[0.3, 0.25 + 0.25 / n as f64, 0.0]);
            let exact = (2.0 * PI * (0.25 + 0.25 / n as f64)).sin();
            errs.push((up[0] - exact).abs());
        }
        assert!(
            errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0,
            "{errs:?}"
        );
        // h²(2π)²/8 bounds the linear interpolation error near the crest
        assert!(errs[0] < 2.0e-2, "{errs:?}");
        let g = Grid::new(2, 64, 1.0);
        let u = FaceField::from_fn(&g, |x| [(2.0 * PI * x[1]).sin(), 0.0, 0.0]);
        assert!((interpolate_at(&g, &u, &[0.5, 0.25, 0.0])[0] - 1.0).abs() < 2e-3);
    }

    fn ensemble_strategy() -> impl Strategy<Value = ParticleEnsemble> {
        prop::collection::vec(
            (
                prop::array::uniform3(0.0f64..1.0),
                prop::array::uniform3(-2.0f64..2.0),
                0.01f64..1.0,
            ),
            1..40,
        )
        .prop_map(|ps| {
            let x = ps.iter().map(|p| p.0).collect();
            let v = ps.iter().map(|p| p.1).collect();
            let w = ps.iter().map(|p| p.2).collect();
            ParticleEnsemble::new(3, x, v, w)
        })
    }

    proptest! {
        #[test]
        fn deposition_conserves_mass_and_satisfies_cauchy_schwarz(e in ensemble_strategy()) {
            let g = Grid::new(3, 8, 1.0);
            let m = deposit_moments(&g, &e);
            let mass = e.total_mass();
            prop_assert!((m.density.integral(&g) - mass).abs() <= 1e-12 * mass);
            for i in 0..g.len() {
                let n = m.density.data[i];
                let en = m.energy.data[i];
                prop_assert!(n >= 0.0 && en >= 0.0);
                let j2: f64 = m.momentum.iter().map(|j| j.data[i] * j.data[i]).sum();
                prop_assert!(j2 <= 2.0 * n * en * (1.0 + 1e-12) + 1e-300);
            }
        }

        #[test]
        fn interpolation_is_adjoint_to_deposition(e in ensemble_strategy(), seed in 0u64..1000) {
            let g = Grid::new(3, 8, 1.0);
            let field = ScalarField {
                data: (0..g.len()).map(|i| ((i as u64 * 2654435761 + seed) % 1000) as f64 / 1000.0 - 0.5).collect(),
            };
            let lhs: f64 = e.x.iter().zip(&e.w).map(|(x, w)| w * interpolate_cell(&g, &field, x)).sum();
            let m = deposit_moments(&g, &e);
            let rhs: f64 = field.data.iter().zip(&m.density.data).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));

            // face kernel: drag deposition is adjoint to velocity interpolation
            let u = FaceField {
                comps: (0..3).map(|k| (0..g.len()).map(|i| ((i * (k + 3)) % 17) as f64 * 0.1).collect()).collect(),
            };
            let drag = deposit_drag(&g, &e);
            let ups = interpolate_velocity(&g, &u, &e.x);
            let lhs: f64 = ups.iter().zip(&e.w).map(|(up, w)| w * (up[0] + up[1] + up[2])).sum();
            let rhs: f64 = (0..3).map(|k| u.comps[k].iter().zip(&drag.density.comps[k]).map(|(a, b)| a * b).sum::<f64>()).sum::<f64>() * g.cell_volume();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn deposition_is_independent_of_thread_count() {
        let g = Grid::new(2, 16, 1.0);
        let n = 3 * CHUNK + 17;
        let x: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                [
                    ((i as f64) * 0.6180339887).fract(),
                    ((i as f64) * 0.7548776662).fract(),
                    0.0,
                ]
            })
            .collect();
        let v: Vec<[f64; 3]> = (0..n)
            .map(|i| [(i as f64).sin(), (i as f64).cos(), 0.0])
            .collect();
        let e = ParticleEnsemble::new(2, x, v, vec![1.0 / n as f64; n]);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| deposit_moments(&g, &e));
        let b = four.install(|| deposit_moments(&g, &e));
        assert_eq!(a, b);
    }
}
