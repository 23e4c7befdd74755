//! Property suite over finished runs, plus the oracle cross-checks.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SimConfig;
use crate::coupler::{run, RunOptions, RunOutput};
use crate::error::Result;
use crate::fluid::{stokes_drag_solve, StokesOptions, StokesSystem};
use crate::functionals::w1_to_dirac;
use crate::grid::{FaceField, Grid};
use crate::kinetic::{push_one, ParticleEnsemble};
use crate::oracle::{char_closed_form, dense_stokes, exact_w1, fv_vs_particles, Atom};
use crate::report::{build_report, Report};
use crate::spectral::Spectral;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub scenario: String,
    pub property: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    /// Non-binding checks are outside the regime their bound is proven for.
    pub binding: bool,
}

impl PropertyCheck {
    fn new(
        scenario: &str,
        property: &str,
        measured: f64,
        bound: f64,
        pass: bool,
        binding: bool,
    ) -> Self {
        Self {
            scenario: scenario.into(),
            property: property.into(),
            measured,
            bound,
            pass,
            binding,
        }
    }

    pub fn failed(&self) -> bool {
        self.binding && !self.pass
    }
}

/// Checks every property of one finished run against its bound.
pub fn check_report(scenario: &str, config: &SimConfig, report: &Report) -> Vec<PropertyCheck> {
    let mut out = Vec::new();
    let mut push = |p: &str, measured: f64, bound: f64, pass: bool, binding: bool| {
        out.push(PropertyCheck::new(
            scenario, p, measured, bound, pass, binding,
        ));
    };
    let mp = &report.max_principle;
    push(
        "max_principle_upper",
        mp.rho_max,
        mp.rho_max_initial * (1.0 + 1e-14),
        mp.rho_max <= mp.rho_max_initial * (1.0 + 1e-14),
        true,
    );
    push(
        "max_principle_lower",
        mp.rho_min,
        -1e-14 * mp.rho_max_initial,
        mp.rho_min >= -1e-14 * mp.rho_max_initial,
        true,
    );
    let c = &report.conservation;
    push(
        "particle_mass",
        c.particle_mass_drift,
        0.0,
        c.particle_mass_drift == 0.0,
        true,
    );
    push(
        "fluid_mass",
        c.fluid_mass_relative_drift,
        1e-12,
        c.fluid_mass_relative_drift <= 1e-12,
        true,
    );
    push(
        "divergence",
        report.divergence_max,
        config.div_tol,
        report.divergence_max <= config.div_tol,
        true,
    );
    let e0 = report.initial.e0;
    let eps = report.energy_inequality.max_positive_residual;
    let bound = 0.01 * config.dt * e0;
    push("energy_inequality", eps, bound, eps <= bound, true);
    let ce = &report.ceilings;
    let margin = ce.margin_n.min(ce.margin_j).min(ce.margin_e);
    push(
        "moment_ceilings",
        -margin,
        0.0,
        !ce.violated,
        ce.flag_active,
    );
    let co = &report.coercivity;
    let ratio = co.min_ratio.unwrap_or(f64::INFINITY);
    push("coercivity", ratio, 1.0, co.pass, report.regime.in_regime);
    let w1 = &report.concentration;
    push(
        "w1_duality",
        w1.max_duality_ratio,
        1.0 + 1e-10,
        w1.duality_bound_holds,
        true,
    );
    let gd = &report.grad_density;
    push("grad_density", -gd.margin, 0.0, gd.pass, true);
    if !report.jacobian.samples.is_empty() {
        let min = report
            .jacobian
            .samples
            .iter()
            .map(|s| s.min)
            .fold(f64::INFINITY, f64::min);
        push(
            "jacobian",
            min,
            0.5,
            report.jacobian.pass,
            report.jacobian.b3_within_one,
        );
    }
    for v in &report.verdicts {
        let bound = if v.check == "energy_pointwise" {
            v.claimed_rate
        } else {
            v.claimed_rate * (1.0 - config.slack)
        };
        push(
            &format!("decay:{}", v.check),
            v.fitted_rate,
            bound,
            v.pass,
            !v.informational,
        );
    }
    out
}

/// Runs `config` into `out` and checks it.
pub fn verify_config(
    scenario: &str,
    config: &SimConfig,
    out: &Path,
    options: RunOptions,
) -> Result<(RunOutput, Report, Vec<PropertyCheck>)> {
    let output = run(config, out, options)?;
    let report = build_report(&output.state, &output.summary)?;
    let checks = check_report(scenario, config, &report);
    Ok((output, report, checks))
}

/// Oracle cross-checks that need no run.
pub fn oracle_checks() -> Result<Vec<PropertyCheck>> {
    let mut out = Vec::new();
    let worst = pusher_vs_closed_form(1000, 17);
    out.push(PropertyCheck::new(
        "oracle",
        "characteristics",
        worst,
        1e-13,
        worst <= 1e-13,
        true,
    ));

    let cc = fv_vs_particles(128, 100_000, 1.0)?;
    out.push(PropertyCheck::new(
        "oracle",
        "fv_density_l1",
        cc.density_l1,
        0.03,
        cc.density_l1 <= 0.03,
        true,
    ));
    out.push(PropertyCheck::new(
        "oracle",
        "fv_momentum_l1",
        cc.momentum_l1,
        0.03,
        cc.momentum_l1 <= 0.03,
        true,
    ));

    let gap = w1_fixture_gap(32, 23)?;
    out.push(PropertyCheck::new(
        "oracle",
        "w1_surrogate_exact",
        gap,
        1e-10,
        gap <= 1e-10,
        true,
    ));

    let rel = dense_stokes_gap()?;
    let tol = 10.0 * StokesOptions::default().linear_tol;
    out.push(PropertyCheck::new(
        "oracle",
        "dense_stokes",
        rel,
        tol,
        rel <= tol,
        true,
    ));
    Ok(out)
}

/// Largest error of the exponential pusher against the closed form over
/// random frozen-field cases with `κΔt` log-uniform in `[1e-6, 1e3]`,
/// relative to the magnitude of the summed terms.
pub fn pusher_vs_closed_form(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let kdt = 10f64.powf(rng.gen_range(-6.0..3.0));
        let kappa = 10f64.powf(rng.gen_range(-1.0..1.0));
        let dt = kdt / kappa;
        let x0: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
        let v0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let u: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let (xc, vc) = char_closed_form(x0, v0, u, kappa, dt);
        let (xp, vp) = push_one(x0, v0, u, kappa, dt);
        for a in 0..3 {
            let rel = (v0[a] - u[a]).abs();
            let xs = x0[a].abs() + (u[a] * dt).abs() + rel * (-(-kdt).exp_m1()) / kappa;
            let vs = u[a].abs() + rel * (-kdt).exp();
            worst = worst.max((xc[a] - xp[a]).abs() / xs.max(f64::MIN_POSITIVE));
            worst = worst.max((vc[a] - vp[a]).abs() / vs.max(f64::MIN_POSITIVE));
        }
    }
    worst
}

/// `|Σw|v| − W₁(f, n_f ⊗ δ₀)|` on a random 3-D ensemble with `atoms` particles,
/// the distance computed by the transportation simplex in phase space.
pub fn w1_fixture_gap(atoms: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<[f64; 3]> = (0..atoms)
        .map(|_| [rng.gen(), rng.gen(), rng.gen()])
        .collect();
    let v: Vec<[f64; 3]> = (0..atoms)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let w: Vec<f64> = (0..atoms)
        .map(|_| rng.gen_range(0.5..1.5) / atoms as f64)
        .collect();
    let ens = ParticleEnsemble::new(3, x.clone(), v.clone(), w.clone());
    let f: Vec<Atom> = (0..atoms)
        .map(|p| Atom {
            point: x[p].iter().chain(&v[p]).copied().collect(),
            mass: w[p],
        })
        .collect();
    let g: Vec<Atom> = (0..atoms)
        .map(|p| Atom {
            point: x[p].iter().chain(&[0.0; 3]).copied().collect(),
            mass: w[p],
        })
        .collect();
    let exact = exact_w1(&f, &g)?;
    let sur = w1_to_dirac(&ens, ens.total_mass(), 0.0).surrogate;
    Ok((exact - sur).abs())
}

/// Relative velocity gap between the iterative and the dense Stokes solves
/// on an 8³ grid with `c = 1 + cos 2πx₁`.
pub fn dense_stokes_gap() -> Result<f64> {
    use std::f64::consts::PI;
    let grid = Grid::new(3, 8, 1.0);
    let mu = 1.0;
    let coeff = FaceField::from_fn(&grid, |x| [1.0 + (2.0 * PI * x[0]).cos(); 3]);
    let rhs = FaceField::from_fn(&grid, |x| {
        [
            (2.0 * PI * x[1]).sin(),
            (2.0 * PI * x[2]).sin() * (2.0 * PI * x[0]).cos(),
            (2.0 * PI * (x[0] + x[1])).cos(),
        ]
    });
    let (ud, _) = dense_stokes(&grid, &coeff, mu, &rhs)?;
    let sol = stokes_drag_solve(
        &Spectral::new(&grid),
        &StokesSystem {
            coeff,
            viscosity: mu,
            rhs,
        },
        None,
        &StokesOptions::default(),
    )?;
    let mut diff = ud.clone();
    diff.axpy(-1.0, &sol.velocity);
    Ok(diff.norm() / ud.norm())
}

/// Human-readable table, failing rows first.
pub fn format_table(checks: &[PropertyCheck]) -> String {
    let mut rows: Vec<&PropertyCheck> = checks.iter().collect();
    rows.sort_by_key(|c| !c.failed());
    let mut s = String::new();
    for c in rows {
        let tag = match (c.pass, c.binding) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        let _ = writeln!(
            s,
            "{tag}  {:<12} {:<36} measured {:>12.5e}  bound {:>12.5e}",
            c.scenario, c.property, c.measured, c.bound
        );
    }
    s
}

pub fn checks_csv(checks: &[PropertyCheck]) -> String {
    let mut s = String::from("scenario,property,measured,bound,pass,binding\n");
    for c in checks {
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{},{}",
            c.scenario, c.property, c.measured, c.bound, c.pass, c.binding
        );
    }
    s
}
