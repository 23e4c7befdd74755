use rayon::prelude::*;

use super::ParticleEnsemble;
use crate::grid::Grid;

/// Exact solution of `ẋ = v, v̇ = κ(u − v)` over `dt` for frozen `u`.
///
/// `(1 − e^{−κ dt}) / κ` is evaluated through `exp_m1` so the update stays
/// accurate for `κ dt` down to 1e-6 and below.
#[inline]
pub fn push_one(
    x: [f64; 3],
    v: [f64; 3],
    u: [f64; 3],
    kappa: f64,
    dt: f64,
) -> ([f64; 3], [f64; 3]) {
    let one_minus_decay = -(-kappa * dt).exp_m1();
    let decay = 1.0 - one_minus_decay;
    let drift = one_minus_decay / kappa;
    let mut xn = [0.0; 3];
    let mut vn = [0.0; 3];
    for a in 0..3 {
        let rel = v[a] - u[a];
        vn[a] = u[a] + rel * decay;
        xn[a] = x[a] + u[a] * dt + rel * drift;
    }
    (xn, vn)
}

/// Advances every particle with its interpolated fluid velocity held fixed
/// over the step, then wraps positions into the box. Weights are untouched.
pub fn push_particles(
    grid: &Grid,
    ensemble: &mut ParticleEnsemble,
    u_p: &[[f64; 3]],
    kappa: f64,
    dt: f64,
) {
    assert!(kappa > 0.0, "drag coefficient must be positive");
    assert_eq!(u_p.len(), ensemble.len());
    ensemble
        .x
        .par_iter_mut()
        .zip(ensemble.v.par_iter_mut())
        .zip(u_p.par_iter())
        .for_each(|((x, v), u)| {
            let (mut xn, vn) = push_one(*x, *v, *u, kappa, dt);
            grid.wrap(&mut xn);
            *x = xn;
            *v = vn;
        });
}
