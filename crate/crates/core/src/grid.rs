//! Periodic Cartesian grid with a staggered (MAC) layout.
//!
//! Scalars live at cell centers `(i + 1/2) h`. Velocity component `k` lives on
//! the lower face of each cell along axis `k`, i.e. at `i h` along axis `k` and
//! `(i + 1/2) h` along the other axes. Axis 0 varies fastest in memory.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    cells_per_axis: usize,
    length: f64,
    h: f64,
    shape: [usize; 3],
    strides: [usize; 3],
}

impl Grid {
    /// Builds a periodic grid of `n` cells per axis on `[0, length)^dim`.
    ///
    /// `dim` may be 1, 2 or 3; configurations only expose 2 and 3, the 1-D
    /// case serves the phase-space cross-checks.
    pub fn new(dim: usize, n: usize, length: f64) -> Self {
        assert!((1..=3).contains(&dim), "grid dimension must be 1, 2 or 3");
        assert!(n >= 1 && length > 0.0);
        let mut shape = [1; 3];
        for s in shape.iter_mut().take(dim) {
            *s = n;
        }
        let strides = [1, shape[0], shape[0] * shape[1]];
        Self {
            dim,
            cells_per_axis: n,
            length,
            h: length / n as f64,
            shape,
            strides,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.cells_per_axis
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `h^d`
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.strides[1] * c[1] + self.strides[2] * c[2]
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let i0 = idx % self.shape[0];
        let rest = idx / self.shape[0];
        [i0, rest % self.shape[1], rest / self.shape[1]]
    }

    /// Index of the periodic neighbour one cell up along `axis`.
    #[inline]
    pub fn up(&self, idx: usize, axis: usize) -> usize {
        let n = self.shape[axis];
        let s = self.strides[axis];
        let i = (idx / s) % n;
        if i + 1 == n {
            idx + s - n * s
        } else {
            idx + s
        }
    }

    /// Index of the periodic neighbour one cell down along `axis`.
    #[inline]
    pub fn down(&self, idx: usize, axis: usize) -> usize {
        let n = self.shape[axis];
        let s = self.strides[axis];
        let i = (idx / s) % n;
        if i == 0 {
            idx + n * s - s
        } else {
            idx - s
        }
    }

    /// Index of the cell with periodically wrapped integer coordinates.
    pub fn wrapped_index(&self, c: [i64; 3]) -> usize {
        let mut w = [0usize; 3];
        for a in 0..3 {
            w[a] = c[a].rem_euclid(self.shape[a] as i64) as usize;
        }
        self.index(w)
    }

    /// Physical position of a cell center (unused axes are 0).
    pub fn cell_center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = (c[a] as f64 + 0.5) * self.h;
        }
        x
    }

    /// Physical position of the face carrying velocity component `comp` of cell `idx`.
    pub fn face_center(&self, comp: usize, idx: usize) -> [f64; 3] {
        let mut x = self.cell_center(idx);
        x[comp] -= 0.5 * self.h;
        x
    }

    /// Wraps a position into `[0, L)` along the active axes.
    pub fn wrap(&self, x: &mut [f64; 3]) {
        for xa in x.iter_mut().take(self.dim) {
            let mut w = xa.rem_euclid(self.length);
            // rem_euclid can round up to exactly L for tiny negative inputs
            if w >= self.length {
                w = 0.0;
            }
            *xa = w;
        }
    }
}

/// Cell-centered scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            data: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        Self {
            data: (0..grid.len()).map(|i| f(grid.cell_center(i))).collect(),
        }
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Σ g h^d`, summed in index order.
    pub fn integral(&self, grid: &Grid) -> f64 {
        self.data.iter().sum::<f64>() * grid.cell_volume()
    }

    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }
}

/// Face-centered vector field: one array per velocity component.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    pub comps: Vec<Vec<f64>>,
}

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            comps: vec![vec![0.0; grid.len()]; grid.dim()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let comps = (0..grid.dim())
            .map(|k| {
                (0..grid.len())
                    .map(|i| f(grid.face_center(k, i))[k])
                    .collect()
            })
            .collect();
        Self { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.comps {
            c.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Euclidean dot product over all faces (no volume factor).
    pub fn dot(&self, other: &FaceField) -> f64 {
        self.comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &FaceField) {
        for (a, b) in self.comps.iter_mut().zip(&other.comps) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += s * y;
            }
        }
    }

    /// Velocity averaged to the cell center of `idx`.
    pub fn center_value(&self, grid: &Grid, idx: usize) -> [f64; 3] {
        let mut v = [0.0; 3];
        for (k, c) in self.comps.iter().enumerate() {
            v[k] = 0.5 * (c[idx] + c[grid.up(idx, k)]);
        }
        v
    }

    /// Per-component sum over faces times `h^d`.
    pub fn component_integrals(&self, grid: &Grid) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, c) in self.comps.iter().enumerate() {
            out[k] = c.iter().sum::<f64>() * grid.cell_volume();
        }
        out
    }

    /// First face holding a non-finite value, as `(component, cell index)`.
    pub fn first_non_finite(&self) -> Option<(usize, usize)> {
        self.comps
            .iter()
            .enumerate()
            .find_map(|(k, c)| c.iter().position(|v| !v.is_finite()).map(|i| (k, i)))
    }
}

/// Face-averaged value of a cell field on the faces normal to `axis`.
pub fn to_faces(grid: &Grid, field: &ScalarField, axis: usize) -> Vec<f64> {
    (0..grid.len())
        .map(|i| 0.5 * (field.data[i] + field.data[grid.down(i, axis)]))
        .collect()
}

/// Discrete divergence at cell centers.
pub fn divergence(grid: &Grid, u: &FaceField) -> ScalarField {
    let inv_h = 1.0 / grid.h();
    let data = (0..grid.len())
        .map(|i| {
            (0..grid.dim())
                .map(|k| u.comps[k][grid.up(i, k)] - u.comps[k][i])
                .sum::<f64>()
                * inv_h
        })
        .collect();
    ScalarField { data }
}

/// Lebesgue exponent accepted by [`grid_norm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    L3Over2,
    L2,
    Inf,
}

impl NormKind {
    fn apply(self, grid: &Grid, values: impl Iterator<Item = f64>) -> f64 {
        match self {
            NormKind::Inf => values.map(f64::abs).fold(0.0, f64::max),
            NormKind::L2 => (values.map(|g| g * g).sum::<f64>() * grid.cell_volume()).sqrt(),
            NormKind::L3Over2 => (values.map(|g| g.abs().powf(1.5)).sum::<f64>()
                * grid.cell_volume())
            .powf(2.0 / 3.0),
        }
    }
}

/// Discrete Lebesgue norm of a cell field: `(Σ |g|^p h^d)^{1/p}`, or `max |g|`.
pub fn grid_norm(grid: &Grid, field: &ScalarField, p: NormKind) -> Result<f64> {
    if let Some(i) = field.first_non_finite() {
        return Err(non_finite("scalar field", grid, i));
    }
    Ok(p.apply(grid, field.data.iter().copied()))
}

/// Norm of a staggered vector field after averaging each component to cell
/// centers; pointwise magnitude is Euclidean.
pub fn grid_norm_vector(grid: &Grid, u: &FaceField, p: NormKind) -> Result<f64> {
    if let Some((k, i)) = u.first_non_finite() {
        return Err(non_finite(&format!("velocity component {k}"), grid, i));
    }
    let mags = (0..grid.len()).map(|i| {
        let v = u.center_value(grid, i);
        (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
    });
    Ok(p.apply(grid, mags))
}

pub(crate) fn non_finite(field: &str, grid: &Grid, idx: usize) -> Error {
    let c = grid.coords(idx);
    Error::NonFinite {
        field: field.to_string(),
        cell: c[..grid.dim()].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn neighbours_wrap() {
        let g = Grid::new(3, 4, 1.0);
        let i = g.index([3, 0, 2]);
        assert_eq!(g.coords(g.up(i, 0)), [0, 0, 2]);
        assert_eq!(g.coords(g.down(i, 1)), [3, 3, 2]);
        assert_eq!(g.coords(g.up(i, 2)), [3, 0, 3]);
        assert_eq!(g.down(g.up(i, 2), 2), i);
        assert_eq!(g.wrapped_index([-1, 4, 2]), g.index([3, 0, 2]));
    }

    #[test]
    fn constant_field_norms() {
        let g = Grid::new(2, 8, 1.0);
        let f = ScalarField {
            data: vec![2.0; g.len()],
        };
        assert!((grid_norm(&g, &f, NormKind::L3Over2).unwrap() - 2.0).abs() < 1e-14);
        assert!((grid_norm(&g, &f, NormKind::L2).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(grid_norm(&g, &f, NormKind::Inf).unwrap(), 2.0);
        let z = ScalarField::zeros(&g);
        for p in [NormKind::L3Over2, NormKind::L2, NormKind::Inf] {
            assert_eq!(grid_norm(&g, &z, p).unwrap(), 0.0);
        }
    }

    #[test]
    fn sine_l2_norm_converges() {
        // ∫_0^1 sin²(2πx) dx = 1/2 on the unit square
        let exact = 0.5f64.sqrt();
        let mut errs = Vec::new();
        for n in [16, 32] {
            let g = Grid::new(2, n, 1.0);
            let f = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
            errs.push((grid_norm(&g, &f, NormKind::L2).unwrap() - exact).abs());
        }
        assert!(
            errs[0] < 1e-2 && errs[1] <= errs[0] / 3.0 + 1e-15,
            "{errs:?}"
        );
    }

    #[test]
    fn nan_names_the_cell() {
        let g = Grid::new(2, 8, 1.0);
        let mut f = ScalarField::zeros(&g);
        f.data[g.index([3, 5, 0])] = f64::NAN;
        match grid_norm(&g, &f, NormKind::L2) {
            Err(Error::NonFinite { cell, .. }) => assert_eq!(cell, vec![3, 5]),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn divergence_of_constant_is_zero() {
        let g = Grid::new(3, 6, 2.0);
        let u = FaceField::from_fn(&g, |_| [1.0, -2.0, 0.5]);
        assert!(divergence(&g, &u).data.iter().all(|d| d.abs() < 1e-14));
        let m = grid_norm_vector(&g, &u, NormKind::Inf).unwrap();
        assert!((m - (1.0f64 + 4.0 + 0.25).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn wrap_stays_inside_box() {
        let g = Grid::new(2, 8, 1.0);
        let mut x = [-1e-18, 1.0, 7.0];
        g.wrap(&mut x);
        assert!(x[0] >= 0.0 && x[0] < 1.0);
        assert_eq!(x[1], 0.0);
        assert_eq!(x[2], 7.0);
    }
}
