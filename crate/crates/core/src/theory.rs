//! Explicit rates and ceilings from the decay theorems, evaluated on the
//! initial data.

use serde::Serialize;

use crate::config::SimConfig;

/// Sharp constant in `‖u‖²_{L⁶(ℝ³)} ≤ C_S ‖∇u‖²_{L²(ℝ³)}` (Talenti/Aubin):
/// `C_S = 1 / (3 (π/2)^{4/3})`, approximately 0.18255.
pub const SOBOLEV_CONSTANT_3D: f64 = 0.182_551_571_487_181;

/// Norms of the initial data that enter the theory constants.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InitialNorms {
    /// `E₀ = ½‖√ρ₀u₀‖² + ½‖|v|²f₀‖_{L¹}`.
    pub e0: f64,
    /// `M = ‖∇u₀‖²_{L²} + ∫|u₀ − v|²f₀`.
    pub m: f64,
    pub rho_l32: f64,
    pub grad_rho_l2: f64,
    /// `‖f₀‖_{L¹_{x,v}}`.
    pub f_l1: f64,
    /// `‖f₀‖_{L¹_v(L^∞_x)}`.
    pub f_linf_x: f64,
    /// `‖(1+|v|)f₀‖_{L¹_v(L^∞_x)}`.
    pub f_v1: f64,
    /// `‖(1+|v|²)f₀‖_{L¹_v(L^∞_x)}`.
    pub f_v2: f64,
    /// `R₀ = max |v|` over the support of `f₀`.
    pub r0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TheoryConstants {
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub c_star: f64,
    pub sigma: f64,
    pub ceiling_n: f64,
    pub ceiling_j: f64,
    pub ceiling_e: f64,
    pub sobolev_constant: f64,
}

/// `2‖f₀‖^{2/3}_{L¹}‖f₀‖^{1/3}_{L¹_v(L^∞_x)}`, the a-priori `L^{3/2}` ceiling on `n_f`.
pub fn default_c_star(norms: &InitialNorms) -> f64 {
    2.0 * norms.f_l1.powf(2.0 / 3.0) * norms.f_linf_x.powf(1.0 / 3.0)
}

/// `α = min{μ,κ} / (2 + C_S(‖ρ₀‖_{L^{3/2}} + 2C_*))`.
pub fn alpha(mu: f64, kappa: f64, c_s: f64, rho_l32: f64, c_star: f64) -> f64 {
    mu.min(kappa) / (2.0 + c_s * (rho_l32 + 2.0 * c_star))
}

pub fn theory_constants(
    config: &SimConfig,
    norms: &InitialNorms,
    c_star: Option<f64>,
) -> TheoryConstants {
    let mu = config.viscosity;
    let kappa = config.drag;
    let c_s = config.sobolev_constant;
    let c_star = c_star
        .or(config.moment_ceiling)
        .unwrap_or_else(|| default_c_star(norms));
    let alpha = alpha(mu, kappa, c_s, norms.rho_l32, c_star);
    let alpha1 = mu.min(1.0) / (2.0 + c_s * (norms.rho_l32 + 2.0 * default_c_star(norms)));
    let alpha2 = (kappa / 2.0).min(alpha1 / 4.0);
    let scale = (mu.powf(10.0 / 7.0)).min(mu.powi(13)) * kappa.powi(-16) * config.smallness_margin;
    TheoryConstants {
        alpha,
        alpha1,
        alpha2,
        c_star,
        sigma: norms.e0 / scale,
        ceiling_n: 2.0 * norms.f_linf_x,
        ceiling_j: 2.0 * norms.f_v1,
        ceiling_e: 2.0 * norms.f_v2,
        sobolev_constant: c_s,
    }
}
