//! Fast-transform operators on the periodic MAC grid.
//!
//! All operators are diagonal (or 2x2/3x3 per wavenumber) in Fourier space
//! because the grid is periodic and the stencils are translation invariant,
//! so they are exact inverses of the corresponding discrete stencils.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::grid::{FaceField, Grid, ScalarField};

pub struct Spectral {
    grid: Grid,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// `e^{iθ_a}` per wavenumber index and axis.
    shift: Vec<[Complex64; 3]>,
    /// Symbol of the negative discrete Laplacian, `Σ_a (2 - 2 cos θ_a) / h²`.
    laplacian: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("grid", &self.grid)
            .finish()
    }
}

impl Spectral {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let shape = grid.shape();
        let forward = (0..grid.dim())
            .map(|a| planner.plan_fft_forward(shape[a]))
            .collect();
        let inverse = (0..grid.dim())
            .map(|a| planner.plan_fft_inverse(shape[a]))
            .collect();
        let h2 = grid.h() * grid.h();
        let mut shift = Vec::with_capacity(grid.len());
        let mut laplacian = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let c = grid.coords(idx);
            let mut s = [Complex64::new(1.0, 0.0); 3];
            let mut lam = 0.0;
            for a in 0..grid.dim() {
                let theta = 2.0 * std::f64::consts::PI * c[a] as f64 / shape[a] as f64;
                s[a] = Complex64::from_polar(1.0, theta);
                lam += (2.0 - 2.0 * theta.cos()) / h2;
            }
            shift.push(s);
            laplacian.push(lam);
        }
        Self {
            grid: grid.clone(),
            forward,
            inverse,
            shift,
            laplacian,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let [n0, n1, n2] = self.grid.shape();
        let slab = n0 * n1;
        // axis 0: contiguous lines
        data.par_chunks_mut(n0)
            .for_each(|line| plans[0].process(line));
        if self.grid.dim() >= 2 {
            let plan = &plans[1];
            data.par_chunks_mut(slab).for_each(|s| {
                let mut line = vec![Complex64::default(); n1];
                for i0 in 0..n0 {
                    for (i1, v) in line.iter_mut().enumerate() {
                        *v = s[i0 + n0 * i1];
                    }
                    plan.process(&mut line);
                    for (i1, v) in line.iter().enumerate() {
                        s[i0 + n0 * i1] = *v;
                    }
                }
            });
        }
        if self.grid.dim() == 3 {
            let plan = &plans[2];
            // gather pencils along axis 2, transform, scatter back
            let mut pencils: Vec<Complex64> = vec![Complex64::default(); data.len()];
            for i2 in 0..n2 {
                for j in 0..slab {
                    pencils[j * n2 + i2] = data[j + slab * i2];
                }
            }
            pencils
                .par_chunks_mut(n2)
                .for_each(|line| plan.process(line));
            for i2 in 0..n2 {
                for j in 0..slab {
                    data[j + slab * i2] = pencils[j * n2 + i2];
                }
            }
        }
    }

    pub(crate) fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    pub(crate) fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inverse);
        let scale = 1.0 / self.grid.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    fn div_symbol(&self, k: usize, a: usize) -> Complex64 {
        (self.shift[k][a] - 1.0) / self.grid.h()
    }

    fn grad_symbol(&self, k: usize, a: usize) -> Complex64 {
        (1.0 - self.shift[k][a].conj()) / self.grid.h()
    }

    /// Discrete Leray projection: removes the discrete-gradient part of `u`
    /// so that its discrete divergence vanishes to rounding.
    pub fn project(&self, u: &mut FaceField) {
        let dim = self.grid.dim();
        let mut hats: Vec<Vec<Complex64>> = u.comps.iter().map(|c| self.forward_real(c)).collect();
        for k in 0..self.grid.len() {
            let lam = self.laplacian[k];
            if lam == 0.0 {
                continue;
            }
            let div: Complex64 = (0..dim).map(|a| self.div_symbol(k, a) * hats[a][k]).sum();
            let phi = -div / lam;
            for (a, hat) in hats.iter_mut().enumerate() {
                hat[k] -= self.grad_symbol(k, a) * phi;
            }
        }
        for (c, hat) in u.comps.iter_mut().zip(hats) {
            *c = self.inverse_real(hat);
        }
    }

    /// Applies `(c̄ I − μ Δ)^{-1}` componentwise. The zero mode is dropped when
    /// `c̄ = 0`.
    pub fn helmholtz_inverse(&self, u: &mut FaceField, c_bar: f64, mu: f64) {
        for c in u.comps.iter_mut() {
            let mut hat = self.forward_real(c);
            for (k, v) in hat.iter_mut().enumerate() {
                let denom = c_bar + mu * self.laplacian[k];
                *v = if denom > 0.0 {
                    *v / denom
                } else {
                    Complex64::default()
                };
            }
            *c = self.inverse_real(hat);
        }
    }

    /// Mean-zero potential `P` whose discrete gradient is the gradient part of `r`.
    pub fn gradient_potential(&self, r: &FaceField) -> ScalarField {
        let dim = self.grid.dim();
        let hats: Vec<Vec<Complex64>> = r.comps.iter().map(|c| self.forward_real(c)).collect();
        let p_hat: Vec<Complex64> = (0..self.grid.len())
            .map(|k| {
                let lam = self.laplacian[k];
                if lam == 0.0 {
                    return Complex64::default();
                }
                let div: Complex64 = (0..dim).map(|a| self.div_symbol(k, a) * hats[a][k]).sum();
                -div / lam
            })
            .collect();
        ScalarField {
            data: self.inverse_real(p_hat),
        }
    }

    /// Mean-zero solution of `-Δ φ = f` for a cell field (zero mode dropped).
    pub fn poisson(&self, f: &ScalarField) -> ScalarField {
        let mut hat = self.forward_real(&f.data);
        for (k, v) in hat.iter_mut().enumerate() {
            let lam = self.laplacian[k];
            *v = if lam > 0.0 {
                *v / lam
            } else {
                Complex64::default()
            };
        }
        ScalarField {
            data: self.inverse_real(hat),
        }
    }
}

/// `-Δ u` on each face component (standard `2d + 1` periodic stencil).
pub fn neg_laplacian(grid: &Grid, u: &FaceField) -> FaceField {
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let dim = grid.dim();
    let comps = u
        .comps
        .iter()
        .map(|c| {
            (0..grid.len())
                .map(|i| {
                    let mut acc = 2.0 * dim as f64 * c[i];
                    for a in 0..dim {
                        acc -= c[grid.up(i, a)] + c[grid.down(i, a)];
                    }
                    acc * inv_h2
                })
                .collect()
        })
        .collect();
    FaceField { comps }
}

/// Discrete gradient of a cell field onto faces.
pub fn gradient(grid: &Grid, p: &ScalarField) -> FaceField {
    let inv_h = 1.0 / grid.h();
    let comps = (0..grid.dim())
        .map(|a| {
            (0..grid.len())
                .map(|i| (p.data[i] - p.data[grid.down(i, a)]) * inv_h)
                .collect()
        })
        .collect();
    FaceField { comps }
}
