//! Small brute-force validators: closed-form characteristics, a 1d1v
//! finite-volume Vlasov solver, exact discrete optimal transport, a dense
//! Stokes solve and a characteristic-map Jacobian replay.
//!
//! Everything here is single-threaded and size-capped.

use nalgebra::{DMatrix, DVector};

use crate::coupler::determinant;
use crate::error::{Error, Result};
use crate::grid::{FaceField, Grid, ScalarField};
use crate::kinetic::{interpolate_at, push_one};

/// `(1 − e^{−y}) / y`, by its Taylor series for small `y`.
fn phi(y: f64) -> f64 {
    if y.abs() < 0.5 {
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..25 {
            term *= -y / (k as f64 + 1.0);
            sum += term;
        }
        sum
    } else {
        (1.0 - (-y).exp()) / y
    }
}

/// Characteristics of `ẋ = v, v̇ = κ(U − v)` for a constant `U`.
pub fn char_closed_form(
    x0: [f64; 3],
    v0: [f64; 3],
    u: [f64; 3],
    kappa: f64,
    t: f64,
) -> ([f64; 3], [f64; 3]) {
    assert!(kappa > 0.0, "drag coefficient must be positive");
    let decay = (-kappa * t).exp();
    let drift = t * phi(kappa * t);
    let mut x = [0.0; 3];
    let mut v = [0.0; 3];
    for a in 0..3 {
        v[a] = u[a] + (v0[a] - u[a]) * decay;
        x[a] = x0[a] + u[a] * t + (v0[a] - u[a]) * drift;
    }
    (x, v)
}

pub const FV_MAX_CELLS: usize = 128;

/// Cell averages of `f(x, v)` on `[0, L) × [−V, V]`, stored as `f[i * nv + j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpace1d1v {
    pub nx: usize,
    pub nv: usize,
    pub length: f64,
    pub v_max: f64,
    pub f: Vec<f64>,
}

impl PhaseSpace1d1v {
    /// Samples `f` at cell midpoints.
    pub fn from_fn(
        nx: usize,
        nv: usize,
        length: f64,
        v_max: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        if nx == 0 || nv == 0 || nx > FV_MAX_CELLS || nv > FV_MAX_CELLS {
            return Err(Error::Invalid(format!(
                "phase grid {nx}x{nv} outside 1..={FV_MAX_CELLS} per axis"
            )));
        }
        let mut s = Self {
            nx,
            nv,
            length,
            v_max,
            f: vec![0.0; nx * nv],
        };
        for i in 0..nx {
            for j in 0..nv {
                s.f[i * nv + j] = f(s.x(i), s.v(j));
            }
        }
        Ok(s)
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.v_max / self.nv as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn v(&self, j: usize) -> f64 {
        -self.v_max + (j as f64 + 0.5) * self.dv()
    }

    pub fn mass(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.dx() * self.dv()
    }

    /// `n_f` at the x-cell centers.
    pub fn density(&self) -> Vec<f64> {
        let dv = self.dv();
        self.f
            .chunks(self.nv)
            .map(|row| row.iter().sum::<f64>() * dv)
            .collect()
    }

    /// `j_f` at the x-cell centers.
    pub fn momentum(&self) -> Vec<f64> {
        let dv = self.dv();
        self.f
            .chunks(self.nv)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(j, f)| self.v(j) * f)
                    .sum::<f64>()
                    * dv
            })
            .collect()
    }
}

/// Conservative first-order upwind for `∂_t f + v ∂_x f + ∂_v(κ(u − v) f) = 0`,
/// periodic in `x`, zero flux at `v = ±V`. One x sweep then one v sweep per step.
/// `u(t, x)` is evaluated at x-cell centers.
pub fn fv_vlasov_1d1v(
    f0: &PhaseSpace1d1v,
    u: impl Fn(f64, f64) -> f64,
    kappa: f64,
    dt: f64,
    t_end: f64,
) -> Result<PhaseSpace1d1v> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Invalid(format!(
            "bad time stepping dt = {dt}, T = {t_end}"
        )));
    }
    let (nx, nv) = (f0.nx, f0.nv);
    let (dx, dv) = (f0.dx(), f0.dv());
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let dt = if steps > 0 { t_end / steps as f64 } else { dt };
    let cx = dt * f0.v_max / dx;
    if cx > 1.0 {
        return Err(Error::Cfl { courant: cx });
    }
    let mut f = f0.clone();
    let mut flux = vec![0.0; nx.max(nv) + 1];
    for n in 0..steps {
        let t = n as f64 * dt;
        // x sweep, each velocity row separately
        for j in 0..nv {
            let vj = f.v(j);
            for i in 0..nx {
                // face between cell i and i+1 (periodic)
                let ip = (i + 1) % nx;
                flux[i] = if vj > 0.0 {
                    vj * f.f[i * nv + j]
                } else {
                    vj * f.f[ip * nv + j]
                };
            }
            let lam = dt / dx;
            let mut prev = flux[nx - 1];
            for i in 0..nx {
                let out = flux[i];
                f.f[i * nv + j] -= lam * (out - prev);
                prev = out;
            }
        }
        // v sweep
        let lam = dt / dv;
        for i in 0..nx {
            let ui = u(t, f.x(i));
            let row = &mut f.f[i * nv..(i + 1) * nv];
            flux[0] = 0.0;
            flux[nv] = 0.0;
            for j in 1..nv {
                let vf = -f0.v_max + j as f64 * dv;
                let a = kappa * (ui - vf);
                if (a.abs() * lam) > 1.0 {
                    return Err(Error::Cfl {
                        courant: a.abs() * lam,
                    });
                }
                flux[j] = if a > 0.0 { a * row[j - 1] } else { a * row[j] };
            }
            for j in 0..nv {
                row[j] -= lam * (flux[j + 1] - flux[j]);
            }
        }
    }
    Ok(f)
}

/// Relative `L¹` differences between the finite-volume oracle and the
/// particle solver on the same 1d1v data.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct CrossCheck {
    pub density_l1: f64,
    pub momentum_l1: f64,
    pub fv_mass_drift: f64,
}

pub const CROSS_CHECK_DRAG: f64 = 0.5;

/// Fixture data for [`fv_vs_particles`]: a mildly modulated density with a
/// compact centered velocity bump, drag toward `0.4 sin 2πx`.
pub fn cross_check_f0(x: f64, v: f64) -> f64 {
    let r = v / 0.5;
    if r.abs() < 1.0 {
        (1.0 + 0.3 * (2.0 * std::f64::consts::PI * x).cos()) * (1.0 - r * r).powi(2) * 15.0 / 8.0
    } else {
        0.0
    }
}

pub fn cross_check_u(x: f64) -> f64 {
    0.4 * (2.0 * std::f64::consts::PI * x).sin()
}

/// Runs both solvers to `t_end` on `[0,1) × [−0.55, 0.55]` with `κ = 0.5`.
/// Particles sit on a `particles/100 × 100` phase-space lattice with weights
/// `f₀ Δx Δv`; moments are compared at the `cells` x-cell centers.
pub fn fv_vs_particles(cells: usize, particles: usize, t_end: f64) -> Result<CrossCheck> {
    let kappa = CROSS_CHECK_DRAG;
    let dt = 0.002;
    let v_max = 0.55;
    let f0 = PhaseSpace1d1v::from_fn(cells, cells, 1.0, v_max, cross_check_f0)?;
    let f = fv_vlasov_1d1v(&f0, |_, x| cross_check_u(x), kappa, dt, t_end)?;
    let n_fv = f.density();
    let j_fv = f.momentum();

    let grid = Grid::new(1, cells, 1.0);
    let nv = 100;
    let nxp = (particles / nv).max(1);
    let (hx, hv) = (1.0 / nxp as f64, 2.0 * v_max / nv as f64);
    let mut xs = Vec::with_capacity(nxp * nv);
    let mut vs = Vec::with_capacity(nxp * nv);
    let mut ws = Vec::with_capacity(nxp * nv);
    for i in 0..nxp {
        for j in 0..nv {
            let x = (i as f64 + 0.5) * hx;
            let v = -v_max + (j as f64 + 0.5) * hv;
            let w = cross_check_f0(x, v) * hx * hv;
            if w > 0.0 {
                xs.push([x, 0.0, 0.0]);
                vs.push([v, 0.0, 0.0]);
                ws.push(w);
            }
        }
    }
    let mut ens = crate::kinetic::ParticleEnsemble::new(1, xs, vs, ws);
    let u = FaceField::from_fn(&grid, |x| [cross_check_u(x[0]), 0.0, 0.0]);
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let dtp = if steps > 0 { t_end / steps as f64 } else { dt };
    for _ in 0..steps {
        let up = crate::kinetic::interpolate_velocity(&grid, &u, &ens.x);
        crate::kinetic::push_particles(&grid, &mut ens, &up, kappa, dtp);
    }
    let m = crate::kinetic::deposit_moments(&grid, &ens);
    let l1 = |a: &[f64], b: &[f64]| {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        let den: f64 = a.iter().map(|x| x.abs()).sum();
        num / den
    };
    Ok(CrossCheck {
        density_l1: l1(&n_fv, &m.density.data),
        momentum_l1: l1(&j_fv, &m.momentum[0].data),
        fv_mass_drift: ((f.mass() - f0.mass()) / f0.mass()).abs(),
    })
}

pub const W1_MAX_ATOMS: usize = 64;

/// A weighted point in `ℝ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub point: Vec<f64>,
    pub mass: f64,
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Exact `W₁` between two discrete measures with Euclidean ground cost.
pub fn exact_w1(a: &[Atom], b: &[Atom]) -> Result<f64> {
    if a.len() > W1_MAX_ATOMS || b.len() > W1_MAX_ATOMS {
        return Err(Error::Invalid(format!(
            "at most {W1_MAX_ATOMS} atoms per measure"
        )));
    }
    let ma: f64 = a.iter().map(|x| x.mass).sum();
    let mb: f64 = b.iter().map(|x| x.mass).sum();
    if (ma - mb).abs() > 1e-12 {
        return Err(Error::Invalid(format!("mass mismatch: {ma} vs {mb}")));
    }
    if a.is_empty() || b.is_empty() {
        return Ok(0.0);
    }
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|p| b.iter().map(|q| distance(&p.point, &q.point)).collect())
        .collect();
    let supply: Vec<f64> = a.iter().map(|x| x.mass).collect();
    let demand: Vec<f64> = b.iter().map(|x| x.mass).collect();
    transport(&supply, &demand, &cost)
}

/// Transportation simplex (northwest-corner start, potentials, cycle pivots).
pub fn transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> Result<f64> {
    let (m, n) = (supply.len(), demand.len());
    let mut flow = vec![vec![0.0; n]; m];
    let mut basic = vec![vec![false; n]; m];
    let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    loop {
        let x = s[i].min(d[j]).max(0.0);
        flow[i][j] = x;
        basic[i][j] = true;
        s[i] -= x;
        d[j] -= x;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    let scale = cost
        .iter()
        .flatten()
        .fold(0.0f64, |a, c| a.max(c.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-13 * scale;
    let max_iter = 50 * (m + n) * (m + n) + 100;
    // nodes: rows 0..m, columns m..m+n
    for iter in 0..max_iter {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); m + n];
        for (r, row) in basic.iter().enumerate() {
            for (c, b) in row.iter().enumerate() {
                if *b {
                    adj[r].push(m + c);
                    adj[m + c].push(r);
                }
            }
        }
        let mut pot = vec![f64::NAN; m + n];
        pot[0] = 0.0;
        let mut stack = vec![0];
        while let Some(node) = stack.pop() {
            for &nb in &adj[node] {
                if pot[nb].is_nan() {
                    pot[nb] = if node < m {
                        cost[node][nb - m] - pot[node]
                    } else {
                        cost[nb][node - m] - pot[node]
                    };
                    stack.push(nb);
                }
            }
        }
        // entering cell: most negative reduced cost, first negative once the
        // iteration count suggests degenerate cycling
        let bland = iter > max_iter / 2;
        let mut enter = None;
        let mut best = -tol;
        'search: for r in 0..m {
            for c in 0..n {
                if basic[r][c] {
                    continue;
                }
                let red = cost[r][c] - pot[r] - pot[m + c];
                if red < best {
                    enter = Some((r, c));
                    if bland {
                        break 'search;
                    }
                    best = red;
                }
            }
        }
        let Some((er, ec)) = enter else {
            return Ok((0..m)
                .map(|r| (0..n).map(|c| flow[r][c] * cost[r][c]).sum::<f64>())
                .sum());
        };
        // tree path from row er to column ec
        let mut parent = vec![usize::MAX; m + n];
        parent[er] = er;
        let mut queue = std::collections::VecDeque::from([er]);
        while let Some(node) = queue.pop_front() {
            if node == m + ec {
                break;
            }
            for &nb in &adj[node] {
                if parent[nb] == usize::MAX {
                    parent[nb] = node;
                    queue.push_back(nb);
                }
            }
        }
        let mut path = vec![m + ec];
        while *path.last().unwrap() != er {
            path.push(parent[*path.last().unwrap()]);
        }
        path.reverse();
        // edges along the path alternate −, +, −, … starting at row er
        let cells: Vec<(usize, usize)> = path
            .windows(2)
            .map(|w| {
                if w[0] < m {
                    (w[0], w[1] - m)
                } else {
                    (w[1], w[0] - m)
                }
            })
            .collect();
        let mut theta = f64::INFINITY;
        let mut leave = cells[0];
        for (k, &(r, c)) in cells.iter().enumerate() {
            if k % 2 == 0 && flow[r][c] < theta {
                theta = flow[r][c];
                leave = (r, c);
            }
        }
        for (k, &(r, c)) in cells.iter().enumerate() {
            if k % 2 == 0 {
                flow[r][c] -= theta;
            } else {
                flow[r][c] += theta;
            }
        }
        flow[er][ec] = theta;
        basic[er][ec] = true;
        basic[leave.0][leave.1] = false;
        flow[leave.0][leave.1] = 0.0;
    }
    Err(Error::Invalid(format!(
        "transportation simplex did not converge in {max_iter} pivots"
    )))
}

pub const DENSE_MAX_UNKNOWNS: usize = 4096;

/// Direct solve of `c u − μΔu + ∇P = b`, `div u = 0`, `Σ P = 0` with the
/// same face stencils as the iterative solver, assembled densely and
/// factored by LU. Returns `(u, P)`.
pub fn dense_stokes(
    grid: &Grid,
    coeff: &FaceField,
    mu: f64,
    rhs: &FaceField,
) -> Result<(FaceField, ScalarField)> {
    let dim = grid.dim();
    let cells = grid.len();
    let nu = dim * cells;
    let size = nu + cells + 1;
    if size > DENSE_MAX_UNKNOWNS {
        return Err(Error::Invalid(format!(
            "{size} unknowns exceed the dense cap {DENSE_MAX_UNKNOWNS}"
        )));
    }
    let h = grid.h();
    let mut a = DMatrix::<f64>::zeros(size, size);
    let mut b = DVector::<f64>::zeros(size);
    for k in 0..dim {
        for i in 0..cells {
            let row = k * cells + i;
            a[(row, row)] += coeff.comps[k][i] + 2.0 * dim as f64 * mu / (h * h);
            for ax in 0..dim {
                a[(row, k * cells + grid.up(i, ax))] -= mu / (h * h);
                a[(row, k * cells + grid.down(i, ax))] -= mu / (h * h);
            }
            // (∇P)_k on the lower face of cell i
            a[(row, nu + i)] += 1.0 / h;
            a[(row, nu + grid.down(i, k))] -= 1.0 / h;
            b[row] = rhs.comps[k][i];
        }
    }
    for i in 0..cells {
        let row = nu + i;
        for k in 0..dim {
            a[(row, k * cells + grid.up(i, k))] += 1.0 / h;
            a[(row, k * cells + i)] -= 1.0 / h;
        }
        a[(row, size - 1)] = 1.0;
        a[(size - 1, row)] = 1.0;
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Invalid("dense Stokes matrix is singular".into()))?;
    let u = FaceField {
        comps: (0..dim)
            .map(|k| x.as_slice()[k * cells..(k + 1) * cells].to_vec())
            .collect(),
    };
    let p = ScalarField {
        data: x.as_slice()[nu..nu + cells].to_vec(),
    };
    Ok((u, p))
}

/// Replays the characteristics of one particle through a stored velocity
/// history (`history[k]` is the field at step `k`; step `k → k+1` pushes
/// with `history[k+1]`) from `v₀ ± ε e_a`, and returns
/// `det(D_{v₀}V(t)) e^{κ d t}` at `t = steps · Δt`.
#[allow(clippy::too_many_arguments)]
pub fn jacobian_probe(
    grid: &Grid,
    history: &[FaceField],
    kappa: f64,
    dt: f64,
    x0: [f64; 3],
    v0: [f64; 3],
    eps: f64,
    steps: usize,
) -> Result<f64> {
    if history.len() <= steps {
        return Err(Error::Invalid(format!(
            "velocity history holds {} fields, replay needs {}",
            history.len(),
            steps + 1
        )));
    }
    let dim = grid.dim();
    let mut jac = [[0.0; 3]; 3];
    for a in 0..dim {
        let mut ends = [[0.0; 3]; 2];
        for (s, sign) in [1.0, -1.0].into_iter().enumerate() {
            let mut x = x0;
            let mut v = v0;
            v[a] += sign * eps;
            for u in &history[1..=steps] {
                let up = interpolate_at(grid, u, &x);
                let (mut xn, vn) = push_one(x, v, up, kappa, dt);
                grid.wrap(&mut xn);
                x = xn;
                v = vn;
            }
            ends[s] = v;
        }
        let [vp, vm] = ends;
        let diff: f64 = (0..dim)
            .map(|r| (vp[r] - vm[r]).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = (0..dim)
            .map(|r| vp[r].abs().max(vm[r].abs()))
            .fold(0.0, f64::max);
        let floor = 64.0 * f64::EPSILON * scale;
        if diff <= floor {
            return Err(Error::ProbeConditioning {
                difference: diff,
                floor,
            });
        }
        for r in 0..dim {
            jac[r][a] = (vp[r] - vm[r]) / (2.0 * eps);
        }
    }
    let t = steps as f64 * dt;
    Ok(determinant(&jac, dim) * (kappa * dim as f64 * t).exp())
}
