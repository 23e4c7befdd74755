//! Initial fluid state and particle ensemble.
//!
//! Particles are placed by a Halton sequence with a seeded Cranley–Patterson
//! shift: positions uniform in a spatial ball at the box center, velocities
//! uniform in a velocity ball of radius `R_v`. Odd particles carry the
//! negated velocity of their even neighbour, so the ensemble has zero net
//! momentum.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Scenario, SimConfig, VelocityProfile};
use crate::error::{Error, Result};
use crate::fluid::{velocity_gradient_norms, FluidState};
use crate::functionals::{density_gradient_l2, fluid_energy, relative_velocity_square};
use crate::grid::{grid_norm, FaceField, Grid, NormKind, ScalarField};
use crate::kinetic::{support_radius, ParticleEnsemble};
use crate::spectral::Spectral;
use crate::theory::InitialNorms;

#[derive(Clone, Debug)]
pub struct InitialData {
    pub grid: Grid,
    pub fluid: FluidState,
    pub particles: ParticleEnsemble,
    pub norms: InitialNorms,
}

/// Builds `(ρ₀, u₀)` and the particle ensemble for `scenario`.
pub fn make_initial_data(config: &SimConfig, scenario: &Scenario) -> Result<InitialData> {
    let grid = Grid::new(config.dim, config.cells, config.length);
    let rho = match scenario {
        Scenario::VacuumBlob => vacuum_blob(&grid, config),
        Scenario::Uniform => ScalarField {
            data: vec![config.rho_max; grid.len()],
        },
        Scenario::CustomTable(path) => read_density_table(&grid, path)?,
    };
    if !matches!(scenario, Scenario::Uniform) {
        check_support(&grid, &rho)?;
    }
    let mut u = match config.velocity {
        VelocityProfile::Rest => FaceField::zeros(&grid),
        VelocityProfile::Shear => {
            let a = config.velocity_amplitude;
            let l = config.length;
            FaceField::from_fn(&grid, |x| [a * (2.0 * PI * x[1] / l).sin(), 0.0, 0.0])
        }
        VelocityProfile::Swirl => swirl(&grid, config),
    };
    Spectral::new(&grid).project(&mut u);

    let particles = sample_particles(&grid, config)?;
    let norms = initial_norms(&grid, config, &rho, &u, &particles)?;
    Ok(InitialData {
        fluid: FluidState {
            rho,
            u,
            p: ScalarField::zeros(&grid),
            t: 0.0,
        },
        grid,
        particles,
        norms,
    })
}

fn distance_to_center(grid: &Grid, x: &[f64; 3]) -> f64 {
    let c = 0.5 * grid.length();
    (0..grid.dim())
        .map(|a| (x[a] - c).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `ρ_max` on `r ≤ R/2`, `cos²` taper to zero at `r = R`.
fn vacuum_blob(grid: &Grid, config: &SimConfig) -> ScalarField {
    let r_blob = config.blob_radius;
    ScalarField::from_fn(grid, |x| {
        let r = distance_to_center(grid, &x);
        if r <= 0.5 * r_blob {
            config.rho_max
        } else if r < r_blob {
            let s = (r - 0.5 * r_blob) / (0.5 * r_blob);
            config.rho_max * (0.5 * PI * s).cos().powi(2)
        } else {
            0.0
        }
    })
}

fn check_support(grid: &Grid, rho: &ScalarField) -> Result<()> {
    let n = grid.n();
    for (i, r) in rho.data.iter().enumerate() {
        let c = grid.coords(i);
        let edge = (0..grid.dim()).any(|a| c[a] == 0 || c[a] == n - 1);
        if edge && *r != 0.0 {
            return Err(Error::SupportAtBoundary(format!(
                "fluid density is nonzero at boundary cell {:?}",
                &c[..grid.dim()]
            )));
        }
    }
    Ok(())
}

/// CSV with header `x1,x2[,x3],value`; each row sets the cell containing the
/// point. Cells not listed are vacuum.
pub fn read_density_table(grid: &Grid, path: &Path) -> Result<ScalarField> {
    let fmt = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => fmt(format!("{other:?}")),
    })?;
    let expected: Vec<String> = (1..=grid.dim())
        .map(|a| format!("x{a}"))
        .chain(["value".to_string()])
        .collect();
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| fmt(e.to_string()))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header != expected {
        return Err(fmt(format!(
            "expected header `{}`, found `{}`",
            expected.join(","),
            header.join(",")
        )));
    }
    let mut rho = ScalarField::zeros(grid);
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| fmt(format!("row {}: {e}", line + 2)))?;
        if vals.iter().any(|v| !v.is_finite()) || vals[grid.dim()] < 0.0 {
            return Err(fmt(format!(
                "row {}: values must be finite and density nonnegative",
                line + 2
            )));
        }
        let mut c = [0i64; 3];
        for a in 0..grid.dim() {
            c[a] = (vals[a] / grid.h()).floor() as i64;
        }
        rho.data[grid.wrapped_index(c)] = vals[grid.dim()];
    }
    Ok(rho)
}

/// `u = curl(ψ e₃)` with `ψ(r) = A S (1 − s²)³ / c₀`, `s = r/S`, sampled on
/// the cell edges so the discrete divergence vanishes identically. `c₀` is
/// the maximum of `6s(1 − s²)²`, so `max |u| ≈ A`.
fn swirl(grid: &Grid, config: &SimConfig) -> FaceField {
    let a = config.velocity_amplitude;
    let s_rad = config.swirl_radius;
    let c0 = 6.0 / 5f64.sqrt() * (0.8f64).powi(2);
    let h = grid.h();
    let psi = |x: [f64; 3]| {
        let s = distance_to_center(grid, &x) / s_rad;
        if s < 1.0 {
            a * s_rad * (1.0 - s * s).powi(3) / c0
        } else {
            0.0
        }
    };
    // ψ lives at (i h, j h, (k + ½) h)
    let edge = |i: usize| {
        let c = grid.coords(i);
        [
            c[0] as f64 * h,
            c[1] as f64 * h,
            if grid.dim() == 3 {
                (c[2] as f64 + 0.5) * h
            } else {
                0.0
            },
        ]
    };
    let psi_e: Vec<f64> = (0..grid.len()).map(|i| psi(edge(i))).collect();
    let mut u = FaceField::zeros(grid);
    for i in 0..grid.len() {
        u.comps[0][i] = (psi_e[grid.up(i, 1)] - psi_e[i]) / h;
        u.comps[1][i] = -(psi_e[grid.up(i, 0)] - psi_e[i]) / h;
    }
    u
}

const PRIMES: [u32; 6] = [2, 3, 5, 7, 11, 13];

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += (i % b) as f64 * f;
        i /= b;
        f *= inv;
    }
    r
}

/// Maps a point of the unit cube to the ball of radius `radius`, uniformly.
fn to_ball(dim: usize, u: &[f64], radius: f64) -> [f64; 3] {
    let r = radius * u[0].powf(1.0 / dim as f64);
    let phi = 2.0 * PI * u[1];
    if dim == 2 {
        [r * phi.cos(), r * phi.sin(), 0.0]
    } else {
        let ct = 1.0 - 2.0 * u[2];
        let st = (1.0 - ct * ct).max(0.0).sqrt();
        [r * st * phi.cos(), r * st * phi.sin(), r * ct]
    }
}

pub fn ball_volume(dim: usize, r: f64) -> f64 {
    if dim == 2 {
        PI * r * r
    } else {
        4.0 / 3.0 * PI * r * r * r
    }
}

fn sample_particles(grid: &Grid, config: &SimConfig) -> Result<ParticleEnsemble> {
    let d = config.dim;
    let np = config.particles;
    if np == 0 {
        return Ok(ParticleEnsemble::empty(d));
    }
    let c = 0.5 * config.length;
    if config.spatial_radius >= c - grid.h() {
        return Err(Error::SupportAtBoundary(format!(
            "particle spatial radius {} reaches the box boundary",
            config.spatial_radius
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let shift: Vec<f64> = (0..2 * d).map(|_| rng.gen::<f64>()).collect();
    let w = config.particle_mass / np as f64;
    let mut xs = Vec::with_capacity(np);
    let mut vs = Vec::with_capacity(np);
    let mut unit = vec![0.0; 2 * d];
    for p in 0..np {
        for (k, u) in unit.iter_mut().enumerate() {
            *u = (radical_inverse(p as u64 + 1, PRIMES[k]) + shift[k]).fract();
        }
        let mut x = to_ball(d, &unit[..d], config.spatial_radius);
        for v in x.iter_mut().take(d) {
            *v += c;
        }
        xs.push(x);
        let v = if p % 2 == 1 {
            let prev: [f64; 3] = vs[p - 1];
            [-prev[0], -prev[1], -prev[2]]
        } else {
            to_ball(d, &unit[d..], config.velocity_radius)
        };
        vs.push(v);
    }
    Ok(ParticleEnsemble::new(d, xs, vs, vec![w; np]))
}

fn initial_norms(
    grid: &Grid,
    config: &SimConfig,
    rho: &ScalarField,
    u: &FaceField,
    particles: &ParticleEnsemble,
) -> Result<InitialNorms> {
    let d = config.dim as f64;
    let grad = velocity_gradient_norms(grid, u)?.grad_l2;
    let mut norms = InitialNorms {
        e0: fluid_energy(grid, rho, u) + particles.kinetic_energy(),
        m: grad * grad + relative_velocity_square(grid, u, particles),
        rho_l32: grid_norm(grid, rho, NormKind::L3Over2)?,
        grad_rho_l2: density_gradient_l2(grid, rho),
        r0: support_radius(particles),
        ..Default::default()
    };
    if !particles.is_empty() {
        // f₀ uniform on B_x × B_v: sup_x f₀ integrates to m_f / |B_x| over v
        let m_f = particles.total_mass();
        let rv = config.velocity_radius;
        let level = m_f / ball_volume(config.dim, config.spatial_radius);
        norms.f_l1 = m_f;
        norms.f_linf_x = level;
        norms.f_v1 = level * (1.0 + rv * d / (d + 1.0));
        norms.f_v2 = level * (1.0 + rv * rv * d / (d + 2.0));
    }
    Ok(norms)
}
