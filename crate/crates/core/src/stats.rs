//! Poisson CDF used by the site-fidelity and pheromone-laying decisions.

use crate::Error;

/// `P(X <= floor(c))` for `X ~ Poisson(lambda)`.
pub fn poisson_cdf(c: f64, lambda: f64) -> Result<f64, Error> {
    if !(c >= 0.0) || !(lambda >= 0.0) || c.is_infinite() || lambda.is_infinite() {
        return Err(Error::Domain(format!("poisson_cdf(c={c}, lambda={lambda})")));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    let k = c.floor() as u64;
    // Terms are accumulated in log space so large rates do not underflow e^-lambda.
    let ln_lambda = lambda.ln();
    let mut ln_term = -lambda;
    let mut sum = ln_term.exp();
    for i in 1..=k {
        ln_term += ln_lambda - (i as f64).ln();
        let term = ln_term.exp();
        sum += term;
        if i as f64 > lambda && term < sum * 1e-17 {
            break;
        }
    }
    Ok(sum.min(1.0))
}
