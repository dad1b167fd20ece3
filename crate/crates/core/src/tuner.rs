//! Real-coded GA over the seven CPFA parameters, with the simulator as
//! fitness oracle.

use rand::Rng;
use rand_distr::{Distribution as _, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{run_trial, TrialConfig};
use crate::layout::Distribution;
use crate::params::{CpfaParams, MAX_POISSON_RATE, MAX_RHO_U};
use crate::policy::PolicyKind;
use crate::rng::{derive_seed, RngStreams};
use crate::Error;

pub type Genome = CpfaParams;

/// Upper bound for the exponentially distributed genes.
pub const EXP_GENE_MAX: f64 = 50.0;

/// Per-gene `[lo, hi]`, in `CpfaParams::NAMES` order.
pub const GENE_RANGES: [(f64, f64); 7] = [
    (0.0, 1.0),
    (0.0, 1.0),
    (0.0, MAX_RHO_U),
    (0.0, EXP_GENE_MAX),
    (0.0, MAX_POISSON_RATE),
    (0.0, MAX_POISSON_RATE),
    (0.0, EXP_GENE_MAX),
];

/// How `exp(k)` in the sampling table is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpReading {
    #[default]
    Rate,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub trials_per_genome: usize,
    pub eval_duration_secs: f64,
    /// Template for every evaluation trial; policy, params, seeds and
    /// duration are overwritten per evaluation.
    pub training: TrialConfig,
    pub master_seed: u64,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    /// Mutation std as a fraction of each gene's spread.
    pub mutation_scale: f64,
    pub elites: usize,
    pub lambda_i_k: f64,
    pub lambda_d_k: f64,
    pub exp_reading: ExpReading,
    pub parallel: bool,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 10,
            generations: 30,
            trials_per_genome: 10,
            eval_duration_secs: 720.0,
            training: TrialConfig::new(6, 8.0, Distribution::Powerlaw, 128, PolicyKind::Cascade, 0),
            master_seed: 0,
            tournament_size: 2,
            crossover_rate: 0.5,
            mutation_rate: 0.1,
            mutation_scale: 0.1,
            elites: 1,
            lambda_i_k: 5.0,
            lambda_d_k: 10.0,
            exp_reading: ExpReading::Rate,
            parallel: true,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), Error> {
        if self.population == 0 || self.generations == 0 || self.trials_per_genome == 0 {
            return Err(Error::Spec("population, generations and trials must be at least 1".into()));
        }
        if self.tournament_size == 0 {
            return Err(Error::Spec("tournament size must be at least 1".into()));
        }
        if self.elites > self.population {
            return Err(Error::Spec("more elites than population".into()));
        }
        for p in [self.crossover_rate, self.mutation_rate] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Spec(format!("operator probability {p} outside [0, 1]")));
            }
        }
        if !(self.lambda_i_k > 0.0 && self.lambda_d_k > 0.0) {
            return Err(Error::Spec("exponential gene parameters must be positive".into()));
        }
        if !(self.eval_duration_secs >= 0.0) {
            return Err(Error::Spec("evaluation duration must be nonnegative".into()));
        }
        Ok(())
    }

    fn exp_rate(&self, k: f64) -> f64 {
        match self.exp_reading {
            ExpReading::Rate => k,
            ExpReading::Mean => 1.0 / k,
        }
    }

    /// Mutation std per gene. Exponential genes use a spread of five means.
    pub fn mutation_sigmas(&self) -> [f64; 7] {
        let mut s = [0.0; 7];
        for (i, (lo, hi)) in GENE_RANGES.iter().enumerate() {
            s[i] = self.mutation_scale * (hi - lo);
        }
        s[3] = self.mutation_scale * 5.0 / self.exp_rate(self.lambda_i_k);
        s[6] = self.mutation_scale * 5.0 / self.exp_rate(self.lambda_d_k);
        s
    }

    /// Seed of evaluation trial `t`; every genome sees the same seeds.
    pub fn eval_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, &format!("ga/eval/{trial}"))
    }
}

pub fn clamp_genome(g: Genome) -> Genome {
    let mut v = g.to_array();
    for (x, (lo, hi)) in v.iter_mut().zip(GENE_RANGES) {
        *x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
    }
    CpfaParams::from_array(v)
}

pub fn sample_genome<R: Rng + ?Sized>(config: &GaConfig, rng: &mut R) -> Genome {
    let exp_i = Exp::new(config.exp_rate(config.lambda_i_k)).expect("positive rate");
    let exp_d = Exp::new(config.exp_rate(config.lambda_d_k)).expect("positive rate");
    let g = CpfaParams {
        p_s: rng.random_range(0.0..=1.0),
        p_r: rng.random_range(0.0..=1.0),
        rho_u: rng.random_range(0.0..=MAX_RHO_U),
        lambda_i: exp_i.sample(rng),
        lambda_f: rng.random_range(0.0..=MAX_POISSON_RATE),
        lambda_lp: rng.random_range(0.0..=MAX_POISSON_RATE),
        lambda_d: exp_d.sample(rng),
    };
    clamp_genome(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub diagnostics: Vec<String>,
}

fn trial_config(genome: &Genome, config: &GaConfig, trial: usize) -> TrialConfig {
    let mut t = config.training.clone();
    let seed = config.eval_seed(trial);
    t.params = *genome;
    t.policy = PolicyKind::Cascade;
    t.duration_secs = config.eval_duration_secs;
    t.seed = derive_seed(seed, "behavior");
    t.layout.seed = seed;
    t
}

/// Mean deposits over the configured evaluation trials. A failing trial
/// zeroes the genome's fitness.
pub fn evaluate_detailed(genome: &Genome, config: &GaConfig) -> Evaluation {
    if let Err(e) = genome.validate() {
        return Evaluation {
            fitness: 0.0,
            diagnostics: vec![e.to_string()],
        };
    }
    let run = |t: usize| run_trial(trial_config(genome, config, t)).map(|r| r.deposits);
    let results: Vec<Result<usize, Error>> = if config.parallel {
        (0..config.trials_per_genome).into_par_iter().map(run).collect()
    } else {
        (0..config.trials_per_genome).map(run).collect()
    };
    let mut total = 0usize;
    let mut diagnostics = Vec::new();
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(d) => total += d,
            Err(e) => diagnostics.push(format!("trial {t}: {e}")),
        }
    }
    let fitness = if diagnostics.is_empty() {
        total as f64 / config.trials_per_genome as f64
    } else {
        0.0
    };
    Evaluation { fitness, diagnostics }
}

pub fn evaluate(genome: &Genome, config: &GaConfig) -> f64 {
    evaluate_detailed(genome, config).fitness
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub median: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best: Genome,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    /// Fitness of every genome in the initial population.
    pub initial_fitness: Vec<f64>,
    pub diagnostics: Vec<String>,
}

impl GaResult {
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best,mean,median,best_so_far\n");
        for h in &self.history {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                h.generation, h.best, h.mean, h.median, h.best_so_far
            ));
        }
        out
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn tournament<R: Rng + ?Sized>(fitness: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] > fitness[best] {
            best = c;
        }
    }
    best
}

pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, rate: f64, rng: &mut R) -> Genome {
    let (a, b) = (a.to_array(), b.to_array());
    let mut child = a;
    for i in 0..7 {
        if rng.random::<f64>() < rate {
            child[i] = b[i];
        }
    }
    CpfaParams::from_array(child)
}

pub fn mutate<R: Rng + ?Sized>(g: &Genome, config: &GaConfig, rng: &mut R) -> Genome {
    let sigmas = config.mutation_sigmas();
    let mut v = g.to_array();
    for i in 0..7 {
        if rng.random::<f64>() < config.mutation_rate {
            let n = Normal::new(0.0, sigmas[i]).expect("finite sigma");
            v[i] += n.sample(rng);
        }
    }
    clamp_genome(CpfaParams::from_array(v))
}

fn rank_best(fitness: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    idx
}

pub fn ga_run(config: &GaConfig) -> Result<GaResult, Error> {
    config.validate()?;
    let mut rng = RngStreams::new(config.master_seed).stream("ga/operators");
    let mut population: Vec<Genome> = (0..config.population)
        .map(|_| sample_genome(config, &mut rng))
        .collect();
    // Fitness carried over for elites so they are not re-evaluated.
    let mut known: Vec<Option<f64>> = vec![None; population.len()];
    let mut history = Vec::with_capacity(config.generations);
    let mut diagnostics = Vec::new();
    let mut initial_fitness = Vec::new();
    let mut best: Option<(Genome, f64)> = None;

    for generation in 0..config.generations {
        let fitness: Vec<f64> = population
            .iter()
            .zip(&known)
            .map(|(g, k)| match k {
                Some(f) => *f,
                None => {
                    let e = evaluate_detailed(g, config);
                    diagnostics.extend(e.diagnostics.into_iter().map(|d| format!("gen {generation}: {d}")));
                    e.fitness
                }
            })
            .collect();
        if generation == 0 {
            initial_fitness = fitness.clone();
        }
        let order = rank_best(&fitness);
        let gen_best = fitness[order[0]];
        if best.as_ref().is_none_or(|(_, f)| gen_best > *f) {
            best = Some((population[order[0]], gen_best));
        }
        history.push(GenerationStats {
            generation,
            best: gen_best,
            mean: fitness.iter().sum::<f64>() / fitness.len() as f64,
            median: median(&fitness),
            best_so_far: best.as_ref().map(|b| b.1).unwrap_or(gen_best),
        });
        if generation + 1 == config.generations {
            break;
        }
        let mut next = Vec::with_capacity(config.population);
        let mut next_known = Vec::with_capacity(config.population);
        for &i in order.iter().take(config.elites) {
            next.push(population[i]);
            next_known.push(Some(fitness[i]));
        }
        while next.len() < config.population {
            let a = tournament(&fitness, config.tournament_size, &mut rng);
            let b = tournament(&fitness, config.tournament_size, &mut rng);
            let child = crossover(&population[a], &population[b], config.crossover_rate, &mut rng);
            next.push(mutate(&child, config, &mut rng));
            next_known.push(None);
        }
        population = next;
        known = next_known;
    }
    let (best, best_fitness) = best.expect("at least one generation");
    Ok(GaResult {
        best,
        best_fitness,
        history,
        initial_fitness,
        diagnostics,
    })
}

/// Total GA wall time: `t_eval * n_trials * population * generations`.
pub fn ga_cost(t_eval_minutes: f64, n_trials: u64, population: u64, generations: u64) -> f64 {
    t_eval_minutes * n_trials as f64 * population as f64 * generations as f64
}
