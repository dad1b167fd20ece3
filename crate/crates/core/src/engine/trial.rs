//! Trial configuration, the step loop, and results.

use serde::{Deserialize, Serialize};

use super::events::{self, EventRecord};
use super::motion::{apply_yield, yield_retreat, MotionLimits, RobotPose};
use super::world::{sim_time, CallTally, Environment, StarvationTiming};
use crate::cpfa::{fsm_step, Robot};
use crate::geom::{Arena, Vec2};
use crate::layout::{generate, Distribution, LayoutSpec, ResourceField};
use crate::params::CpfaParams;
use crate::pheromone::{PheromoneField, PheromoneSelection};
use crate::policy::{BuiltinPolicies, PolicyKind, PolicyProvider, TacticalPolicy};
use crate::rng::RngStreams;
use crate::Error;

pub const DEFAULT_DURATION_SECS: f64 = 1200.0;
pub const DEFAULT_SUMMARY_CAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub arena: Arena,
    pub team_size: usize,
    pub layout: LayoutSpec,
    pub params: CpfaParams,
    pub policy: PolicyKind,
    pub duration_secs: f64,
    /// Behavior seed; the layout has its own seed in `layout`.
    pub seed: u64,
    #[serde(default)]
    pub limits: MotionLimits,
    #[serde(default)]
    pub pheromone_selection: PheromoneSelection,
    #[serde(default)]
    pub starvation: StarvationTiming,
    #[serde(default = "default_summary_cap")]
    pub summary_cap: usize,
    /// Resource positions to use instead of generating from `layout`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_layout: Option<Vec<Vec2>>,
}

fn default_summary_cap() -> usize {
    DEFAULT_SUMMARY_CAP
}

impl TrialConfig {
    /// A square arena of `side` meters; the layout shares `seed`.
    pub fn new(
        team_size: usize,
        side: f64,
        distribution: Distribution,
        resource_count: usize,
        policy: PolicyKind,
        seed: u64,
    ) -> Self {
        let arena = Arena::square(side);
        Self {
            arena,
            team_size,
            layout: LayoutSpec::new(distribution, resource_count, arena, seed),
            params: CpfaParams::default(),
            policy,
            duration_secs: DEFAULT_DURATION_SECS,
            seed,
            limits: MotionLimits::default(),
            pheromone_selection: PheromoneSelection::default(),
            starvation: StarvationTiming::default(),
            summary_cap: DEFAULT_SUMMARY_CAP,
            preset_layout: None,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.params.validate()?;
        self.limits.validate()?;
        if self.team_size == 0 {
            return Err(Error::Spec("team size must be at least 1".into()));
        }
        if !(self.duration_secs >= 0.0) || !self.duration_secs.is_finite() {
            return Err(Error::Spec(format!("invalid trial duration {}", self.duration_secs)));
        }
        if self.layout.arena != self.arena {
            return Err(Error::Spec("layout arena differs from trial arena".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.limits.steps(self.duration_secs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub deposits: usize,
    pub initial_resources: usize,
    pub remaining_resources: usize,
    pub carrying_at_end: usize,
    pub steps: u64,
    pub llm_calls: usize,
    pub llm_fallbacks: usize,
    /// Per-call latencies; kept out of the event log.
    pub latency_samples: Vec<f64>,
    pub event_log: Vec<EventRecord>,
}

impl TrialResult {
    pub fn event_log_jsonl(&self) -> String {
        events::to_jsonl(&self.event_log)
    }

    pub fn count_kind(&self, kind: &str) -> usize {
        self.event_log.iter().filter(|r| r.event.kind() == kind).count()
    }
}

/// A trial in progress.
pub struct Trial {
    config: TrialConfig,
    env: Environment,
    robots: Vec<Robot>,
    policies: Vec<Box<dyn TacticalPolicy>>,
    total_steps: u64,
}

impl Trial {
    pub fn new(config: TrialConfig) -> Result<Self, Error> {
        Self::with_provider(config, &BuiltinPolicies)
    }

    pub fn with_provider(config: TrialConfig, provider: &dyn PolicyProvider) -> Result<Self, Error> {
        config.validate()?;
        let positions = match &config.preset_layout {
            Some(p) => p.clone(),
            None => generate(&config.layout)?,
        };
        let field = ResourceField::new(&config.arena, positions);
        let env = Environment {
            arena: config.arena,
            limits: config.limits,
            params: config.params,
            field,
            pheromones: PheromoneField::new(config.params.lambda_d),
            selection: config.pheromone_selection,
            starvation: config.starvation,
            summary_cap: config.summary_cap,
            deposits: 0,
            step: 0,
            log: Vec::new(),
            tally: CallTally::default(),
        };
        let streams = RngStreams::new(config.seed);
        let robots: Vec<Robot> = (0..config.team_size as u32)
            .map(|id| Robot::spawn(id, config.team_size, &env, &streams))
            .collect();
        let policies = robots
            .iter()
            .map(|r| provider.create(config.policy, &r.name))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| Error::Policy(format!("cannot start {} policy: {e}", config.policy)))?;
        let total_steps = config.total_steps();
        Ok(Self {
            config,
            env,
            robots,
            policies,
            total_steps,
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.config
    }

    pub fn env(&self) -> &Environment {
        &self.env
    }

    pub fn robots(&self) -> &[Robot] {
        &self.robots
    }

    pub fn now(&self) -> f64 {
        sim_time(self.env.step, self.env.limits.dt)
    }

    pub fn is_finished(&self) -> bool {
        self.env.step >= self.total_steps
    }

    /// Advances every robot by one timestep, in id order.
    pub fn step(&mut self) -> Result<(), Error> {
        let now = self.now();
        self.env.pheromones.prune(now);
        let ids: Vec<u32> = self.robots.iter().map(|r| r.id).collect();
        let poses: Vec<RobotPose> = self.robots.iter().map(|r| r.pose).collect();
        let gated = if self.env.limits.yield_enabled {
            apply_yield(&ids, &poses, &self.env.limits)
        } else {
            vec![false; ids.len()]
        };
        let mut positions: Vec<Vec2> = poses.iter().map(|p| p.position).collect();
        let mut others = Vec::with_capacity(positions.len());
        for i in 0..self.robots.len() {
            others.clear();
            others.extend(positions.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| *p));
            let gate = gated[i].then(|| yield_retreat(i, &ids, &poses, &self.env.limits));
            fsm_step(
                &mut self.robots[i],
                &mut self.env,
                &others,
                gate,
                self.policies[i].as_mut(),
            )?;
            positions[i] = self.robots[i].pose.position;
        }
        self.env.step += 1;
        Ok(())
    }

    /// Deposited + carried + still on the floor must equal the initial count.
    pub fn audit(&self) -> Result<(), Error> {
        let carrying = self.robots.iter().filter(|r| r.carrying).count();
        let total = self.env.deposits + carrying + self.env.field.remaining();
        if total != self.env.field.len() {
            return Err(Error::Spec(format!(
                "resource accounting broken: {} deposited + {carrying} carried + {} remaining != {}",
                self.env.deposits,
                self.env.field.remaining(),
                self.env.field.len()
            )));
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<TrialResult, Error> {
        while !self.is_finished() {
            self.step()?;
        }
        self.audit()?;
        Ok(self.finish())
    }

    pub fn finish(self) -> TrialResult {
        let carrying = self.robots.iter().filter(|r| r.carrying).count();
        TrialResult {
            deposits: self.env.deposits,
            initial_resources: self.env.field.len(),
            remaining_resources: self.env.field.remaining(),
            carrying_at_end: carrying,
            steps: self.env.step,
            llm_calls: self.env.tally.calls,
            llm_fallbacks: self.env.tally.fallbacks,
            latency_samples: self.env.tally.latencies,
            event_log: self.env.log,
        }
    }
}

pub fn run_trial(config: TrialConfig) -> Result<TrialResult, Error> {
    Trial::new(config)?.run()
}

pub fn run_trial_with(config: TrialConfig, provider: &dyn PolicyProvider) -> Result<TrialResult, Error> {
    Trial::with_provider(config, provider)?.run()
}
