//! `report.json`: theory constants, regime flags, property checks and rate
//! verdicts of a finished run. The schema is documented in the README.

use serde::Serialize;
use serde_json::Value;

use crate::coupler::{Bootstrap, ProbeSample, RunState, RunSummary};
use crate::error::Result;
use crate::functionals::{coercivity_ratio, grad_density_check, periodic_w1_1d, GradDensityCheck};
use crate::rates::{decay_report, DecayParams, Verdict};
use crate::theory::{alpha, InitialNorms, TheoryConstants};

pub const REPORT_SCHEMA: &str = "nsv-report/1";

#[derive(Clone, Debug, Serialize)]
pub struct Regime {
    pub sigma: f64,
    pub sigma_within_one: bool,
    pub bootstrap: Bootstrap,
    pub dimension: usize,
    pub drag_below_one: bool,
    /// All theory comparisons are binding only when this is true.
    pub in_regime: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Coercivity {
    /// `max_t ‖n_f‖_{L^{3/2}}` over the run.
    pub realized_c_star: f64,
    pub a_priori_c_star: f64,
    /// `α` evaluated with the realized `C_*`.
    pub alpha_realized: f64,
    /// `min_t D/(2αE)` with `α_realized`; `null` when `E ≡ 0`.
    pub min_ratio: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Ceilings {
    pub margin_n: f64,
    pub margin_j: f64,
    pub margin_e: f64,
    pub violated: bool,
    /// Violations count only inside the bootstrap budget.
    pub flag_active: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Concentration {
    /// `max_t Σw|v| / (√2 ‖n_f‖^{1/2} E^{1/2})`.
    pub max_duality_ratio: f64,
    pub duality_bound_holds: bool,
    /// Per sample: max over axes of the exact 1-D `W₁` between the `n_f`
    /// marginals at `t` and at `T_end` (lower bound for `W₁(n_f(t), n_f(T_end))`).
    pub sliced_w1_to_final: Vec<f64>,
    /// Per sample: `∫_t^{T_end} Σw|v| ds` (upper bound for the same distance).
    pub transport_upper_bound: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Conservation {
    pub particle_mass_drift: f64,
    pub fluid_mass_relative_drift: f64,
    /// `max_n |ΔP| / Δt`.
    pub momentum_drift_per_time: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MaxPrinciple {
    pub rho_max_initial: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergyInequality {
    /// `max_n (E_{n+1} − E_n + Δt D_{n+1})⁺`.
    pub max_positive_residual: f64,
    /// `max_n residual⁺ / Δt²`.
    pub c_e: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Jacobian {
    pub samples: Vec<ProbeSample>,
    /// `min ≥ ½` at every probe time (binding when `B₃ ≤ 1`).
    pub pass: bool,
    pub b3_within_one: bool,
    pub note: &'static str,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub config: Value,
    pub theory: TheoryConstants,
    pub initial: InitialNorms,
    pub regime: Regime,
    pub coercivity: Coercivity,
    pub ceilings: Ceilings,
    pub concentration: Concentration,
    pub grad_density: GradDensityCheck,
    pub conservation: Conservation,
    pub max_principle: MaxPrinciple,
    pub energy_inequality: EnergyInequality,
    pub divergence_max: f64,
    pub jacobian: Jacobian,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub notes: Vec<&'static str>,
}

pub fn build_report(state: &RunState, summary: &RunSummary) -> Result<Report> {
    let c = &state.config;
    let series = &state.series;
    let th = &state.theory;

    let realized = state.audit.iter().map(|a| a.nf_l32).fold(0.0, f64::max);
    let alpha_realized = alpha(
        c.viscosity,
        c.drag,
        c.sobolev_constant,
        state.initial_norms.rho_l32,
        realized,
    );
    let min_ratio = series
        .iter()
        .map(|r| coercivity_ratio(r.dissipation, r.energy, alpha_realized))
        .filter(|r| r.is_finite())
        .fold(None, |m: Option<f64>, r| Some(m.map_or(r, |m| m.min(r))));

    let sup = |f: fn(&crate::diagnostics::DiagnosticsRecord) -> f64| {
        series.iter().map(f).fold(0.0, f64::max)
    };
    let margin_n = th.ceiling_n - sup(|r| r.sup_nf);
    let margin_j = th.ceiling_j - sup(|r| r.sup_jf);
    let margin_e = th.ceiling_e - sup(|r| r.sup_ef);

    let ratios = series.iter().map(|r| {
        let bound = (2.0 * r.mass_f * r.energy).sqrt();
        if bound > 0.0 {
            r.w1_surrogate / bound
        } else if r.w1_surrogate == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    });
    let max_duality_ratio = ratios.fold(0.0, f64::max);
    let h = state.grid.h();
    let last = state.nf_marginals.last().cloned().unwrap_or_default();
    let sliced: Vec<f64> = state
        .nf_marginals
        .iter()
        .map(|m| {
            m.iter()
                .zip(&last)
                .map(|(a, b)| periodic_w1_1d(a, b, h))
                .fold(0.0, f64::max)
        })
        .collect();
    let mut upper = vec![0.0; series.len()];
    for i in (0..series.len().saturating_sub(1)).rev() {
        upper[i] = upper[i + 1] + (series[i + 1].t - series[i].t) * series[i].w1_surrogate;
    }

    let first = &state.audit[0];
    let particle_mass_drift = state
        .audit
        .iter()
        .map(|a| (a.particle_mass - first.particle_mass).abs())
        .fold(0.0, f64::max);
    let fluid_mass_relative_drift = state
        .audit
        .iter()
        .map(|a| (a.fluid_mass - first.fluid_mass).abs() / first.fluid_mass.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let momentum_drift_per_time = state
        .audit
        .iter()
        .map(|a| a.momentum_change)
        .fold(0.0, f64::max)
        / c.dt;

    let rho0 = first.rho_max;
    let rho_min = state
        .audit
        .iter()
        .map(|a| a.rho_min)
        .fold(f64::INFINITY, f64::min);
    let rho_max = state.audit.iter().map(|a| a.rho_max).fold(0.0, f64::max);

    let max_pos = state
        .audit
        .iter()
        .map(|a| a.energy_residual.max(0.0))
        .fold(0.0, f64::max);
    let b3 = summary.bootstrap.b3 <= 1.0;
    let verdicts = decay_report(
        series,
        th,
        &DecayParams {
            slack: c.slack,
            tolerance: c.tolerance,
            window: DecayParams::default_window(c.dt, c.t_end),
            in_regime: summary.in_regime,
        },
    )?;
    Ok(Report {
        schema: REPORT_SCHEMA,
        config: c.to_json(),
        theory: *th,
        initial: state.initial_norms,
        regime: Regime {
            sigma: th.sigma,
            sigma_within_one: summary.sigma_within_one,
            bootstrap: summary.bootstrap,
            dimension: c.dim,
            drag_below_one: c.theory_warning,
            in_regime: summary.in_regime,
        },
        coercivity: Coercivity {
            realized_c_star: realized,
            a_priori_c_star: th.c_star,
            alpha_realized,
            min_ratio,
            pass: min_ratio.is_none_or(|r| r >= 1.0),
        },
        ceilings: Ceilings {
            margin_n,
            margin_j,
            margin_e,
            violated: margin_n < 0.0 || margin_j < 0.0 || margin_e < 0.0,
            flag_active: summary.bootstrap.within_budget,
        },
        concentration: Concentration {
            max_duality_ratio,
            duality_bound_holds: max_duality_ratio <= 1.0 + 1e-10,
            sliced_w1_to_final: sliced,
            transport_upper_bound: upper,
        },
        grad_density: grad_density_check(&series.iter().map(|r| r.gradrho_l2).collect::<Vec<_>>()),
        conservation: Conservation {
            particle_mass_drift,
            fluid_mass_relative_drift,
            momentum_drift_per_time,
        },
        max_principle: MaxPrinciple {
            rho_max_initial: rho0,
            rho_min,
            rho_max,
            pass: rho_min >= -1e-14 * rho0 && rho_max <= rho0 * (1.0 + 1e-14),
        },
        energy_inequality: EnergyInequality {
            max_positive_residual: max_pos,
            c_e: max_pos / (c.dt * c.dt),
        },
        divergence_max: series.iter().map(|r| r.div_linf).fold(0.0, f64::max),
        jacobian: Jacobian {
            pass: state.probes.iter().all(|p| p.min >= 0.5),
            samples: state.probes.clone(),
            b3_within_one: b3,
            note: "forward map v0 -> V(t), normalized by exp(kappa d t); its inverse is the backward map of the change of variables",
        },
        verdicts,
        warnings: summary.warnings.clone(),
        notes: vec![
            "Ecal uses the backward difference (u^{n+1} - u^n)/dt for u_t; at t = 0 the u_t term is zero",
            "fluid energy and momentum are summed on faces with the face-averaged density",
            "concentration distances use n_f(T_end) as a stand-in for the unobservable limit profile",
        ],
    })
}
