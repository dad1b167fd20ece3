use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::Error;

pub const MAX_RHO_U: f64 = 4.0 * PI;
pub const MAX_POISSON_RATE: f64 = 20.0;

/// The seven evolvable CPFA parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpfaParams {
    /// Probability of switching from travel to searching, per 1 s tick.
    pub p_s: f64,
    /// Probability of giving up a search, per search waypoint.
    pub p_r: f64,
    /// Turning-angle std of the uninformed correlated walk (radians).
    pub rho_u: f64,
    /// Decay rate of informed-search tortuosity (1/s).
    pub lambda_i: f64,
    /// Poisson rate for the site-fidelity decision.
    pub lambda_f: f64,
    /// Poisson rate for the pheromone-laying decision.
    pub lambda_lp: f64,
    /// Pheromone decay rate (1/s).
    pub lambda_d: f64,
}

impl Default for CpfaParams {
    /// A hand-picked baseline for untuned runs; `ga-train` produces tuned values.
    fn default() -> Self {
        Self {
            p_s: 0.1,
            p_r: 0.01,
            rho_u: 0.4,
            lambda_i: 0.2,
            lambda_f: 4.0,
            lambda_lp: 8.0,
            lambda_d: 0.02,
        }
    }
}

impl CpfaParams {
    pub const NAMES: [&'static str; 7] =
        ["p_s", "p_r", "rho_u", "lambda_i", "lambda_f", "lambda_lp", "lambda_d"];

    pub fn zeros() -> Self {
        Self::from_array([0.0; 7])
    }

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.p_s,
            self.p_r,
            self.rho_u,
            self.lambda_i,
            self.lambda_f,
            self.lambda_lp,
            self.lambda_d,
        ]
    }

    pub fn from_array(v: [f64; 7]) -> Self {
        Self {
            p_s: v[0],
            p_r: v[1],
            rho_u: v[2],
            lambda_i: v[3],
            lambda_f: v[4],
            lambda_lp: v[5],
            lambda_d: v[6],
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if v.is_finite() && v >= lo && v <= hi {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name}={v} outside [{lo}, {hi}]")))
            }
        };
        check("p_s", self.p_s, 0.0, 1.0)?;
        check("p_r", self.p_r, 0.0, 1.0)?;
        check("rho_u", self.rho_u, 0.0, MAX_RHO_U)?;
        check("lambda_f", self.lambda_f, 0.0, MAX_POISSON_RATE)?;
        check("lambda_lp", self.lambda_lp, 0.0, MAX_POISSON_RATE)?;
        check("lambda_i", self.lambda_i, 0.0, f64::MAX)?;
        check("lambda_d", self.lambda_d, 0.0, f64::MAX)?;
        Ok(())
    }

    /// Renders the parameters as `name = value` lines.
    pub fn to_kv_text(&self) -> String {
        toml::to_string(self).expect("plain struct of floats always serializes")
    }

    pub fn from_kv_text(text: &str) -> Result<Self, Error> {
        let params: CpfaParams =
            toml::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))?;
        params.validate()?;
        Ok(params)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_text_roundtrip() {
        let p = CpfaParams::default();
        let text = p.to_kv_text();
        assert!(text.contains("lambda_lp = 8.0"));
        assert_eq!(CpfaParams::from_kv_text(&text).unwrap(), p);
    }

    #[test]
    fn rejects_out_of_range() {
        let mut p = CpfaParams::default();
        p.p_r = 1.5;
        assert!(p.validate().is_err());
        p.p_r = 0.5;
        p.lambda_f = 25.0;
        assert!(p.validate().is_err());
        assert!(CpfaParams::zeros().validate().is_ok());
    }
}
