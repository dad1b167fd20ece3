use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

use forage_core::engine::MotionLimits;
use forage_core::rng::derive_seed;
use forage_core::{CpfaParams, Distribution, PolicyKind, TrialConfig};
use forage_gateway::GatewayConfig;

use crate::HarnessError;

/// Resources placed in a square arena of the given side.
pub fn resource_count_for_arena(side_m: u32) -> Result<usize, HarnessError> {
    match side_m {
        6 => Ok(64),
        8 => Ok(128),
        10 => Ok(256),
        other => Err(HarnessError::Spec(format!("no resource count defined for a {other} m arena"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub team_sizes: Vec<usize>,
    /// Arena sides in meters.
    pub arenas: Vec<u32>,
    pub distributions: Vec<Distribution>,
    pub trials_per_cell: usize,
    pub duration_secs: f64,
    pub policies: Vec<PolicyKind>,
    pub master_seed: u64,
    /// Share layout seeds across policies for each (cell, trial).
    pub paired_seeds: bool,
    pub params: CpfaParams,
    pub limits: MotionLimits,
    /// Used by the `llm` policy.
    pub gateway: GatewayConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            team_sizes: vec![4, 6, 8, 10],
            arenas: vec![6, 8, 10],
            distributions: Distribution::ALL.to_vec(),
            trials_per_cell: 10,
            duration_secs: 1200.0,
            policies: vec![PolicyKind::Cascade, PolicyKind::Llm],
            master_seed: 2025,
            paired_seeds: true,
            params: CpfaParams::default(),
            limits: MotionLimits::default(),
            gateway: GatewayConfig::default(),
        }
    }
}

impl GridSpec {
    pub fn empty() -> Self {
        Self {
            team_sizes: vec![],
            ..Self::default()
        }
    }

    /// Reads a `.json` or `.toml` spec; missing fields take defaults.
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        let spec: GridSpec = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text)?,
            _ => toml::from_str(&text).map_err(|e| HarnessError::Spec(e.to_string()))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        for a in &self.arenas {
            resource_count_for_arena(*a)?;
        }
        if self.team_sizes.contains(&0) {
            return Err(HarnessError::Spec("team size 0".into()));
        }
        if !(self.duration_secs >= 0.0) {
            return Err(HarnessError::Spec("negative duration".into()));
        }
        let mut seen = self.policies.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.policies.len() {
            return Err(HarnessError::Spec("duplicate policy".into()));
        }
        self.params.validate()?;
        self.limits.validate()?;
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &team_size in &self.team_sizes {
            for &arena in &self.arenas {
                for &distribution in &self.distributions {
                    out.push(Cell {
                        team_size,
                        arena,
                        distribution,
                    });
                }
            }
        }
        out
    }

    pub fn layout_seed(&self, cell: &Cell, trial: usize, policy: PolicyKind) -> u64 {
        if self.paired_seeds {
            derive_seed(self.master_seed, &format!("layout/{cell}/{trial}"))
        } else {
            derive_seed(self.master_seed, &format!("layout/{cell}/{trial}/{policy}"))
        }
    }

    pub fn behavior_seed(layout_seed: u64, policy: PolicyKind) -> u64 {
        derive_seed(layout_seed, &format!("behavior/{policy}"))
    }
}

/// One (team, arena, distribution) combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub team_size: usize,
    pub arena: u32,
    pub distribution: Distribution,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}_a{}_{}", self.team_size, self.arena, self.distribution)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialKey {
    pub cell: Cell,
    pub trial: usize,
    pub policy: PolicyKind,
}

impl fmt::Display for TrialKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_n{}_{}", self.cell, self.trial, self.policy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTrial {
    pub key: TrialKey,
    pub layout_seed: u64,
    pub config: TrialConfig,
}

/// Every trial of the grid, grouped by policy, then cell, then trial index.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<GridTrial>, HarnessError> {
    spec.validate()?;
    let mut out = Vec::new();
    for &policy in &spec.policies {
        for cell in spec.cells() {
            let count = resource_count_for_arena(cell.arena)?;
            for trial in 0..spec.trials_per_cell {
                let layout_seed = spec.layout_seed(&cell, trial, policy);
                let mut config = TrialConfig::new(
                    cell.team_size,
                    cell.arena as f64,
                    cell.distribution,
                    count,
                    policy,
                    GridSpec::behavior_seed(layout_seed, policy),
                );
                config.layout.seed = layout_seed;
                config.duration_secs = spec.duration_secs;
                config.params = spec.params;
                config.limits = spec.limits;
                out.push(GridTrial {
                    key: TrialKey { cell, trial, policy },
                    layout_seed,
                    config,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_shape() {
        let spec = GridSpec::default();
        assert_eq!(spec.cells().len(), 36);
        let trials = expand_grid(&spec).unwrap();
        assert_eq!(trials.len(), 36 * 10 * 2);
        for p in &spec.policies {
            assert_eq!(trials.iter().filter(|t| t.key.policy == *p).count(), 360);
        }
        for t in &trials {
            let want = resource_count_for_arena(t.key.cell.arena).unwrap();
            assert_eq!(t.config.layout.resource_count, want);
        }
    }

    #[test]
    fn layouts_are_paired_and_behavior_is_not() {
        let spec = GridSpec {
            team_sizes: vec![4],
            arenas: vec![8],
            distributions: vec![Distribution::Random],
            trials_per_cell: 3,
            ..GridSpec::default()
        };
        let t = expand_grid(&spec).unwrap();
        assert_eq!(t.len(), 6);
        for i in 0..3 {
            assert_eq!(t[i].config.layout.seed, t[i + 3].config.layout.seed);
            assert_ne!(t[i].config.seed, t[i + 3].config.seed);
            assert_eq!(t[i].config.layout.resource_count, 128);
        }
        let unpaired = GridSpec {
            paired_seeds: false,
            ..spec
        };
        let u = expand_grid(&unpaired).unwrap();
        assert_ne!(u[0].config.layout.seed, u[3].config.layout.seed);
    }

    #[test]
    fn empty_and_bad_specs() {
        assert!(expand_grid(&GridSpec::empty()).unwrap().is_empty());
        let bad = GridSpec {
            arenas: vec![7],
            ..GridSpec::default()
        };
        assert!(expand_grid(&bad).is_err());
    }

    #[test]
    fn toml_spec_with_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("grid.toml");
        std::fs::write(&p, "team_sizes = [4]\narenas = [6]\ntrials_per_cell = 2\npolicies = [\"scripted\"]\n").unwrap();
        let spec = GridSpec::load(&p).unwrap();
        assert_eq!(spec.distributions.len(), 3);
        assert_eq!(expand_grid(&spec).unwrap().len(), 6);
    }
}
