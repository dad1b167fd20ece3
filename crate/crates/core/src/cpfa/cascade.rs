//! Parameter-driven CPFA decisions. These are the vanilla controller's
//! choices and the fallback whenever a tactical query fails.

use rand::Rng;

use super::ForagerMemory;
use crate::params::CpfaParams;
use crate::policy::TacticalAction;
use crate::stats::poisson_cdf;

fn cdf(count: usize, lambda: f64) -> f64 {
    poisson_cdf(count as f64, lambda.max(0.0)).expect("count and rate are nonnegative")
}

/// Site fidelity with probability `CDF_Pois(c, lambda_f)` when the fidelity
/// flag is set, else a pheromone if one exists, else a fresh uninformed search.
pub fn cascade_post_deposit<R: Rng + ?Sized>(
    mem: &ForagerMemory,
    pheromones_active: usize,
    params: &CpfaParams,
    rng: &mut R,
) -> TacticalAction {
    if mem.fidelity && mem.last_pickup.is_some() {
        let u: f64 = rng.random();
        if cdf(mem.last_density, params.lambda_f) > u {
            return TacticalAction::UseSiteFidelity;
        }
    }
    if pheromones_active > 0 {
        TacticalAction::FollowPheromone
    } else {
        TacticalAction::UninformedSearch
    }
}

/// Empty-handed arrival: the fidelity flag was cleared on give-up, so only
/// the pheromone-or-random branches remain.
pub fn cascade_central_arrival<R: Rng + ?Sized>(
    _mem: &ForagerMemory,
    pheromones_active: usize,
    _params: &CpfaParams,
    _rng: &mut R,
) -> TacticalAction {
    if pheromones_active > 0 {
        TacticalAction::FollowPheromone
    } else {
        TacticalAction::UninformedSearch
    }
}

/// `CDF_Pois(c, lambda_lp) > U(0,1)`.
pub fn should_lay_pheromone<R: Rng + ?Sized>(density: usize, params: &CpfaParams, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    cdf(density, params.lambda_lp) > u
}

pub fn should_give_up<R: Rng + ?Sized>(params: &CpfaParams, rng: &mut R) -> bool {
    rng.random::<f64>() < params.p_r
}

pub fn should_switch_to_search<R: Rng + ?Sized>(params: &CpfaParams, rng: &mut R) -> bool {
    rng.random::<f64>() < params.p_s
}
