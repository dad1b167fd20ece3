//! Correlated random walk headings.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geom::wrap_angle;
use crate::params::{CpfaParams, MAX_RHO_U};

/// Perturbs `heading` by a zero-mean normal turn of std `sigma`.
pub fn step_heading<R: Rng + ?Sized>(heading: f64, sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    wrap_angle(heading + sigma * z)
}

/// Next heading of the uninformed walk (std `rho_u`).
pub fn uninformed_step_heading<R: Rng + ?Sized>(heading: f64, params: &CpfaParams, rng: &mut R) -> f64 {
    step_heading(heading, params.rho_u, rng)
}

/// Turning std of the informed walk `t_informed` seconds after it began:
/// maximally tortuous at the start, relaxing toward `rho_u`.
pub fn informed_sigma(t_informed: f64, params: &CpfaParams) -> f64 {
    let t = t_informed.max(0.0);
    params.rho_u + (MAX_RHO_U - params.rho_u) * (-params.lambda_i * t).exp()
}
