//! Time stepping of the coupled system.
//!
//! One step: (1) drag moments from the start-of-step particles (already
//! deposited), (2) upwind transport of `ρ` and `ρu`, (3) implicit
//! Stokes-drag solve for `u^{n+1}`, (4) exponential particle push in the
//! frozen `u^{n+1}`, (5) deposit and diagnostics. Step (5)'s deposit is the
//! next step's (1).

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::SimConfig;
use crate::diagnostics::{write_series, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::fluid::{
    advect_density, mass_fluxes, stokes_drag_solve, velocity_gradient_norms, FluidState,
    StokesOptions, StokesSystem,
};
use crate::functionals::{
    axis_marginals, density_gradient_l2, dissipation, energy, high_dissipation, w1_to_dirac,
};
use crate::grid::{divergence, grid_norm, to_faces, FaceField, Grid, NormKind};
use crate::initial::make_initial_data;
use crate::kinetic::{
    deposit_drag, deposit_moments, interpolate_velocity, push_one, push_particles, support_radius,
    write_snapshot, DragFields, MomentFields, ParticleEnsemble,
};
use crate::spectral::Spectral;
use crate::theory::{theory_constants, InitialNorms, TheoryConstants};

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Fault injection: solve without the divergence constraint.
    pub disable_projection: bool,
    /// Keep `u^n` for every step (for replaying characteristics).
    pub record_velocity_history: bool,
}

/// Per-step bookkeeping that is not part of `series.csv`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepAudit {
    pub step: usize,
    pub t: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// `Σ ρ h^d`.
    pub fluid_mass: f64,
    /// `Σ w_p`.
    pub particle_mass: f64,
    /// `‖n_f‖_{L^{3/2}}`.
    pub nf_l32: f64,
    /// `E(t_{n+1}) − E(t_n) + Δt D(t_{n+1})`.
    pub energy_residual: f64,
    /// `|P(t_{n+1}) − P(t_n)|` for the total momentum.
    pub momentum_change: f64,
    pub solver_iterations: usize,
    pub solver_residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverLogEntry {
    pub step: usize,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeSample {
    pub t: f64,
    /// `det(D_{v₀}V(t)) e^{κdt}` for each probed particle.
    pub normalized_det: Vec<f64>,
    pub min: f64,
}

/// Shadow particles started at `v₀ ± ε e_a` next to each probed particle and
/// advanced in the same velocity fields, so the finite-difference Jacobian of
/// `v₀ ↦ V(t)` is available in-line without storing the field history.
#[derive(Clone, Debug)]
struct Shadow {
    eps: f64,
    x: Vec<[f64; 3]>,
    v: Vec<[f64; 3]>,
    pending_times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Bootstrap {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub within_budget: bool,
}

/// Left-endpoint quadrature of `μ^{−3}‖∇u‖⁴_{L²}`, `κ‖u‖_∞`, `20κ‖∇u‖_∞`.
pub fn bootstrap_account(series: &[DiagnosticsRecord], mu: f64, kappa: f64) -> Bootstrap {
    let mut b = [0.0; 3];
    for w in series.windows(2) {
        let dt = w[1].t - w[0].t;
        let r = &w[0];
        b[0] += dt * r.gradu_l2.powi(4) / mu.powi(3);
        b[1] += dt * kappa * r.u_linf;
        b[2] += dt * 20.0 * kappa * r.gradu_linf;
    }
    Bootstrap {
        b1: b[0],
        b2: b[1],
        b3: b[2],
        within_budget: b[0] + b[1] + b[2] <= 1.0,
    }
}

pub struct RunState {
    pub config: SimConfig,
    pub grid: Grid,
    spectral: Spectral,
    pub theory: TheoryConstants,
    pub initial_norms: InitialNorms,
    pub fluid: FluidState,
    pub particles: ParticleEnsemble,
    pub moments: MomentFields,
    drag: DragFields,
    /// `u^{n−1}` for the backward-difference `u_t`.
    pub u_prev: FaceField,
    pub series: Vec<DiagnosticsRecord>,
    pub audit: Vec<StepAudit>,
    pub solver_log: Vec<SolverLogEntry>,
    pub probes: Vec<ProbeSample>,
    pub velocity_history: Vec<FaceField>,
    /// Axis marginals of `n_f` at every sample.
    pub nf_marginals: Vec<Vec<Vec<f64>>>,
    pub step: usize,
    options: RunOptions,
    shadow: Option<Shadow>,
    stokes: StokesOptions,
}

impl RunState {
    pub fn new(config: &SimConfig, options: RunOptions) -> Result<Self> {
        let data = make_initial_data(config, &config.scenario)?;
        let grid = data.grid.clone();
        let spectral = Spectral::new(&grid);
        let theory = theory_constants(config, &data.norms, None);
        let moments = deposit_moments(&grid, &data.particles);
        let drag = deposit_drag(&grid, &data.particles);
        let shadow = make_shadow(config, &data.particles, data.norms.r0);
        let mut state = Self {
            config: config.clone(),
            spectral,
            theory,
            initial_norms: data.norms,
            u_prev: data.fluid.u.clone(),
            fluid: data.fluid,
            particles: data.particles,
            moments,
            drag,
            series: Vec::new(),
            audit: Vec::new(),
            solver_log: Vec::new(),
            probes: Vec::new(),
            velocity_history: Vec::new(),
            nf_marginals: Vec::new(),
            step: 0,
            options,
            shadow,
            stokes: StokesOptions {
                linear_tol: config.linear_tol,
                div_tol: config.div_tol,
                max_iterations: config.max_iterations,
                enforce_constraint: !options.disable_projection,
            },
            grid,
        };
        if options.record_velocity_history {
            state.velocity_history.push(state.fluid.u.clone());
        }
        let rec = state.record(None)?;
        state.series.push(rec);
        state
            .nf_marginals
            .push(axis_marginals(&state.grid, &state.moments.density));
        state.audit.push(state.audit_entry(0.0, 0.0, 0, 0.0));
        Ok(state)
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn bootstrap(&self) -> Bootstrap {
        let b = self.series.last().map(|r| r.bootstrap).unwrap_or_default();
        Bootstrap {
            b1: b[0],
            b2: b[1],
            b3: b[2],
            within_budget: b.iter().sum::<f64>() <= 1.0,
        }
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.config.dt;
        let kappa = self.config.drag;
        let grid = &self.grid;
        let u_n = self.fluid.u.clone();
        let mut iterations = 0;
        let mut residual = 0.0;
        if !self.config.frozen_fluid {
            let rho_next = advect_density(grid, &self.fluid.rho, &u_n, dt)?;
            let flux = mass_fluxes(grid, &self.fluid.rho, &u_n);
            let m = crate::fluid::transport_faces(grid, &self.fluid.rho, &flux, &u_n, dt);
            let mut coeff = FaceField {
                comps: (0..grid.dim())
                    .map(|k| to_faces(grid, &rho_next, k))
                    .collect(),
            };
            coeff.scale(1.0 / dt);
            coeff.axpy(kappa, &self.drag.density);
            let mut rhs = m;
            rhs.scale(1.0 / dt);
            rhs.axpy(kappa, &self.drag.momentum);
            let sys = StokesSystem {
                coeff,
                viscosity: self.config.viscosity,
                rhs,
            };
            let step = self.step + 1;
            let sol =
                stokes_drag_solve(&self.spectral, &sys, Some(&u_n), &self.stokes).map_err(|e| {
                    match e {
                        Error::NonFinite { field, .. } => Error::NanAbort { step, name: field },
                        other => other,
                    }
                })?;
            iterations = sol.iterations;
            residual = sol.residual;
            self.solver_log.push(SolverLogEntry {
                step: self.step + 1,
                iterations,
                residual,
            });
            self.fluid.rho = rho_next;
            self.fluid.u = sol.velocity;
            self.fluid.p = sol.pressure;
        }

        if !self.particles.is_empty() {
            let u_p = interpolate_velocity(grid, &self.fluid.u, &self.particles.x);
            push_particles(grid, &mut self.particles, &u_p, kappa, dt);
        }
        if let Some(shadow) = self.shadow.as_mut() {
            let u_s = interpolate_velocity(grid, &self.fluid.u, &shadow.x);
            for ((x, v), u) in shadow.x.iter_mut().zip(shadow.v.iter_mut()).zip(&u_s) {
                let (mut xn, vn) = push_one(*x, *v, *u, kappa, dt);
                grid.wrap(&mut xn);
                *x = xn;
                *v = vn;
            }
        }
        self.step += 1;
        self.fluid.t = self.time();
        self.moments = deposit_moments(grid, &self.particles);
        self.drag = deposit_drag(grid, &self.particles);
        if self.options.record_velocity_history {
            self.velocity_history.push(self.fluid.u.clone());
        }

        self.u_prev = u_n;
        let prev = *self.series.last().expect("initial record");
        let rec = self.record(Some(&prev))?;
        if let Some(name) = rec.first_non_finite() {
            return Err(Error::NanAbort {
                step: self.step,
                name: name.to_string(),
            });
        }
        let energy_residual = rec.energy - prev.energy + dt * rec.dissipation;
        let dm = (0..3)
            .map(|k| (rec.momentum[k] - prev.momentum[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        self.series.push(rec);
        self.nf_marginals
            .push(axis_marginals(grid, &self.moments.density));
        let entry = self.audit_entry(energy_residual, dm, iterations, residual);
        self.audit.push(entry);
        self.sample_probe()?;
        Ok(())
    }

    fn audit_entry(
        &self,
        energy_residual: f64,
        momentum_change: f64,
        iters: usize,
        residual: f64,
    ) -> StepAudit {
        let nf_l32 =
            grid_norm(&self.grid, &self.moments.density, NormKind::L3Over2).unwrap_or(f64::NAN);
        StepAudit {
            step: self.step,
            t: self.time(),
            rho_min: self.fluid.rho.min(),
            rho_max: self.fluid.rho.max(),
            fluid_mass: self.fluid.rho.integral(&self.grid),
            particle_mass: self.particles.total_mass(),
            nf_l32,
            energy_residual,
            momentum_change,
            solver_iterations: iters,
            solver_residual: residual,
        }
    }

    fn record(&self, prev: Option<&DiagnosticsRecord>) -> Result<DiagnosticsRecord> {
        let grid = &self.grid;
        let c = &self.config;
        let u = &self.fluid.u;
        let norms = velocity_gradient_norms(grid, u)?;
        let e = energy(grid, &self.fluid, &self.particles);
        let fluid_mom = self.fluid.momentum(grid);
        let part_mom = self.particles.momentum();
        let bootstrap = match prev {
            None => [0.0; 3],
            Some(p) => {
                let dt = self.time() - p.t;
                [
                    p.bootstrap[0] + dt * p.gradu_l2.powi(4) / c.viscosity.powi(3),
                    p.bootstrap[1] + dt * c.drag * p.u_linf,
                    p.bootstrap[2] + dt * 20.0 * c.drag * p.gradu_linf,
                ]
            }
        };
        Ok(DiagnosticsRecord {
            t: self.time(),
            energy: e,
            dissipation: dissipation(grid, u, &self.particles, c.viscosity, c.drag),
            high_dissipation: high_dissipation(
                grid,
                &self.fluid.rho,
                u,
                &self.u_prev,
                &self.particles,
                c.drag,
                c.dt,
            ),
            sup_nf: self.moments.sup_density(),
            sup_jf: self.moments.sup_momentum(),
            sup_ef: self.moments.sup_energy(),
            support_radius: support_radius(&self.particles),
            w1_surrogate: w1_to_dirac(&self.particles, self.particles.total_mass(), e).surrogate,
            gradu_l2: norms.grad_l2,
            gradu_linf: norms.grad_linf,
            u_linf: norms.u_linf,
            div_linf: divergence(grid, u)
                .data
                .iter()
                .fold(0.0, |m, d| m.max(d.abs())),
            rho_l32: grid_norm(grid, &self.fluid.rho, NormKind::L3Over2)?,
            gradrho_l2: density_gradient_l2(grid, &self.fluid.rho),
            mass_f: self.particles.total_mass(),
            momentum: [
                fluid_mom[0] + part_mom[0],
                fluid_mom[1] + part_mom[1],
                fluid_mom[2] + part_mom[2],
            ],
            bootstrap,
        })
    }

    fn sample_probe(&mut self) -> Result<()> {
        let t = self.time();
        let dim = self.grid.dim();
        let kappa = self.config.drag;
        let Some(shadow) = self.shadow.as_mut() else {
            return Ok(());
        };
        let half = 0.5 * self.config.dt;
        if shadow.pending_times.first().is_none_or(|&tp| t + half < tp) {
            return Ok(());
        }
        shadow.pending_times.remove(0);
        let stride = 2 * dim;
        let mut dets = Vec::with_capacity(shadow.v.len() / stride);
        for group in shadow.v.chunks(stride) {
            let mut jac = [[0.0; 3]; 3];
            for a in 0..dim {
                let vp = group[2 * a];
                let vm = group[2 * a + 1];
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
                    jac[r][a] = (vp[r] - vm[r]) / (2.0 * shadow.eps);
                }
            }
            dets.push(determinant(&jac, dim) * (kappa * dim as f64 * t).exp());
        }
        let min = dets.iter().copied().fold(f64::INFINITY, f64::min);
        self.probes.push(ProbeSample {
            t,
            normalized_det: dets,
            min,
        });
        Ok(())
    }

    /// Runs to `T_end`.
    pub fn run_to_end(&mut self) -> Result<()> {
        let steps = self.config.steps();
        while self.step < steps {
            self.step()?;
        }
        Ok(())
    }
}

pub(crate) fn determinant(m: &[[f64; 3]; 3], dim: usize) -> f64 {
    if dim == 1 {
        m[0][0]
    } else if dim == 2 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    } else {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

fn make_shadow(config: &SimConfig, particles: &ParticleEnsemble, r0: f64) -> Option<Shadow> {
    let n = particles.len();
    let count = config.probe_particles.min(n);
    let times: Vec<f64> = {
        let mut t: Vec<f64> = config
            .probe_times
            .iter()
            .copied()
            .filter(|t| *t <= config.t_end + 0.5 * config.dt)
            .collect();
        t.sort_by(f64::total_cmp);
        t
    };
    if count == 0 || times.is_empty() {
        return None;
    }
    let eps = config
        .probe_eps
        .unwrap_or(if r0 > 0.0 { 1e-5 * r0 } else { 1e-8 });
    let dim = config.dim;
    let mut x = Vec::with_capacity(count * 2 * dim);
    let mut v = Vec::with_capacity(count * 2 * dim);
    for i in 0..count {
        let p = i * n / count;
        for a in 0..dim {
            for s in [1.0, -1.0] {
                let mut vv = particles.v[p];
                vv[a] += s * eps;
                x.push(particles.x[p]);
                v.push(vv);
            }
        }
    }
    Some(Shadow {
        eps,
        x,
        v,
        pending_times: times,
    })
}

/// Everything a finished run reports besides the series itself.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub steps: usize,
    pub theory: TheoryConstants,
    pub initial: InitialNorms,
    pub bootstrap: Bootstrap,
    pub sigma_within_one: bool,
    pub in_regime: bool,
    pub warnings: Vec<String>,
}

pub struct RunOutput {
    pub state: RunState,
    pub summary: RunSummary,
    pub files: Vec<PathBuf>,
}

/// Executes `⌈T_end/Δt⌉` steps and writes `series.csv`, `solver_log.csv`,
/// `report.json`, `verdicts.csv`, snapshots at the configured cadence and a
/// final particle/fluid snapshot into `out`.
pub fn run(config: &SimConfig, out: &Path, options: RunOptions) -> Result<RunOutput> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut state = RunState::new(config, options)?;
    let mut files = Vec::new();
    let steps = config.steps();
    let snapshot = |state: &RunState, files: &mut Vec<PathBuf>| -> Result<()> {
        let p = out.join(format!("particles_{:06}.nsvp", state.step));
        write_snapshot(&p, &state.particles)?;
        files.push(p);
        let f = out.join(format!("fluid_{:06}.csv", state.step));
        crate::io::write_atomic(&f, fluid_csv(&state.grid, &state.fluid).as_bytes())?;
        files.push(f);
        Ok(())
    };
    if config.snapshot_every > 0 {
        snapshot(&state, &mut files)?;
    }
    while state.step < steps {
        state.step()?;
        if config.snapshot_every > 0
            && state.step % config.snapshot_every == 0
            && state.step < steps
        {
            snapshot(&state, &mut files)?;
        }
    }
    snapshot(&state, &mut files)?;
    let summary = summarize(&state);
    let series_path = out.join("series.csv");
    write_series(&series_path, &state.series)?;
    files.push(series_path);
    let log_path = out.join("solver_log.csv");
    crate::io::write_atomic(&log_path, solver_log_csv(&state.solver_log).as_bytes())?;
    files.push(log_path);
    let report = crate::report::build_report(&state, &summary)?;
    let verdict_path = out.join("verdicts.csv");
    crate::rates::write_verdicts(&verdict_path, &report.verdicts)?;
    files.push(verdict_path);
    let report_path = out.join("report.json");
    let text = serde_json::to_string_pretty(&report).map_err(|e| Error::Invalid(e.to_string()))?;
    crate::io::write_atomic(&report_path, text.as_bytes())?;
    files.push(report_path);
    Ok(RunOutput {
        state,
        summary,
        files,
    })
}

pub fn summarize(state: &RunState) -> RunSummary {
    let c = &state.config;
    let bootstrap = state.bootstrap();
    let sigma_within_one = state.theory.sigma <= 1.0;
    RunSummary {
        steps: state.step,
        theory: state.theory,
        initial: state.initial_norms,
        bootstrap,
        sigma_within_one,
        in_regime: c.dim == 3 && !c.theory_warning && sigma_within_one && bootstrap.within_budget,
        warnings: c.warnings(),
    }
}

pub fn solver_log_csv(log: &[SolverLogEntry]) -> String {
    let mut s = String::from("step,iters,residual\n");
    for e in log {
        s.push_str(&format!("{},{},{:?}\n", e.step, e.iterations, e.residual));
    }
    s
}

/// Cell-centered fluid snapshot: `i1,i2[,i3],rho,p,u1,u2[,u3]` with the
/// velocity averaged to the cell center.
pub fn fluid_csv(grid: &Grid, fluid: &FluidState) -> String {
    let d = grid.dim();
    let mut s = String::new();
    let axes: Vec<String> = (1..=d).map(|a| format!("i{a}")).collect();
    let vel: Vec<String> = (1..=d).map(|a| format!("u{a}")).collect();
    s.push_str(&format!("{},rho,p,{}\n", axes.join(","), vel.join(",")));
    for i in 0..grid.len() {
        let c = grid.coords(i);
        let uc = fluid.u.center_value(grid, i);
        let mut row: Vec<String> = (0..d).map(|a| c[a].to_string()).collect();
        row.push(format!("{:?}", fluid.rho.data[i]));
        row.push(format!("{:?}", fluid.p.data[i]));
        row.extend((0..d).map(|a| format!("{:?}", uc[a])));
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
