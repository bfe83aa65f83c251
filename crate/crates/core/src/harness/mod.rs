//! K-episode experiments with exact per-episode regret.

mod fit;
pub mod invariants;
pub mod io;
mod sweep;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{Agent, Algorithm, Hyperparams};
use crate::mdp::{optimal_values, policy_values, run_episode, DeterministicPolicy, MdpError, TabularMdp};
use crate::rng::RunRng;

pub use fit::{fit_regret_exponent, FitError, RegretFit};
pub use invariants::{check_invariants, CheckLevel, InvariantReport};
pub use sweep::{sweep, sweep_with_threads, CellOutcome, HpPoint, SweepCell, SweepError, SweepGrid, THREADS_ENV};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("hyperparameters are for S={hp_s}, A={hp_a}, H={hp_h} but the MDP is S={s}, A={a}, H={h}")]
    DimensionMismatch {
        hp_s: usize,
        hp_a: usize,
        hp_h: usize,
        s: usize,
        a: usize,
        h: usize,
    },
    #[error("initial state {state} outside 0..{states}")]
    InitialState { state: usize, states: usize },
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// How `s_1^k` is chosen each episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum InitStateSchedule {
    Fixed { state: usize },
    /// `s_1^k = k mod S`.
    RoundRobin,
    /// Uniform draw from the run's generator at the start of each episode.
    SeededRandom,
}

impl Default for InitStateSchedule {
    fn default() -> Self {
        InitStateSchedule::Fixed { state: 0 }
    }
}

impl InitStateSchedule {
    fn initial_state(&self, k: u64, states: usize, rng: &mut RunRng) -> usize {
        match *self {
            InitStateSchedule::Fixed { state } => state,
            InitStateSchedule::RoundRobin => (k % states as u64) as usize,
            InitStateSchedule::SeededRandom => rng.below(states),
        }
    }
}

impl std::str::FromStr for InitStateSchedule {
    type Err = String;

    /// `fixed`, `fixed:<state>`, `round-robin` or `seeded-random`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(InitStateSchedule::Fixed { state: 0 }),
            "round-robin" => Ok(InitStateSchedule::RoundRobin),
            "seeded-random" => Ok(InitStateSchedule::SeededRandom),
            other => match other.strip_prefix("fixed:").map(str::parse) {
                Some(Ok(state)) => Ok(InitStateSchedule::Fixed { state }),
                _ => Err(format!(
                    "unknown schedule `{other}` (expected fixed[:state] | round-robin | seeded-random)"
                )),
            },
        }
    }
}

/// Everything besides the MDP that determines a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub algorithm: Algorithm,
    pub hyperparams: Hyperparams,
    pub schedule: InitStateSchedule,
    pub seed: u64,
    pub check_level: CheckLevel,
    /// UCB-Q only: min-combine each update with the previous `Q`.
    pub monotone: bool,
}

/// Violation totals over a run, keyed by invariant name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InvariantCounters {
    pub checks: u64,
    pub deterministic: BTreeMap<String, u64>,
    pub statistical: BTreeMap<String, u64>,
}

impl InvariantCounters {
    fn absorb(&mut self, report: &InvariantReport) {
        self.checks += 1;
        for (name, n) in &report.deterministic {
            *self.deterministic.entry(name.to_string()).or_insert(0) += n;
        }
        for (name, n) in &report.statistical {
            *self.statistical.entry(name.to_string()).or_insert(0) += n;
        }
    }

    pub fn hard_failures(&self) -> u64 {
        self.deterministic.values().sum()
    }

    pub fn statistical_failures(&self) -> u64 {
        self.statistical.values().sum()
    }

    /// Violations of one statistical invariant (0 when never checked).
    pub fn statistical_count(&self, name: &str) -> u64 {
        self.statistical.get(name).copied().unwrap_or(0)
    }
}

/// Result of one `(MDP, algorithm, hyperparameters, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub spec: ExperimentSpec,
    pub initial_states: Vec<usize>,
    pub episode_regret: Vec<f64>,
    pub cumulative_regret: Vec<f64>,
    pub invariants: InvariantCounters,
    pub wall_time_secs: f64,
}

impl RegretRecord {
    pub fn episodes(&self) -> usize {
        self.episode_regret.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }

    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &RegretRecord) -> bool {
        self.spec == other.spec
            && self.initial_states == other.initial_states
            && self.episode_regret.len() == other.episode_regret.len()
            && self
                .episode_regret
                .iter()
                .zip(&other.episode_regret)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self
                .cumulative_regret
                .iter()
                .zip(&other.cumulative_regret)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.invariants == other.invariants
    }
}

/// Runs `spec.hyperparams.episodes` episodes of a freshly built learner.
pub fn run_experiment(mdp: &TabularMdp, spec: &ExperimentSpec) -> Result<RegretRecord, HarnessError> {
    let mut agent = spec.algorithm.build(spec.hyperparams, spec.monotone);
    run_with_agent(mdp, agent.as_mut(), spec)
}

/// Same protocol as [`run_experiment`] for a caller-supplied learner.
///
/// Each episode: pick `s_1`, snapshot the greedy policy, roll out while the
/// learner updates online, then charge `V*_1(s_1) - V^pi_1(s_1)` using exact
/// policy evaluation of the snapshot.
pub fn run_with_agent(
    mdp: &TabularMdp,
    agent: &mut dyn Agent,
    spec: &ExperimentSpec,
) -> Result<RegretRecord, HarnessError> {
    let hp = &spec.hyperparams;
    if (hp.states, hp.actions, hp.horizon) != (mdp.states(), mdp.actions(), mdp.horizon()) {
        return Err(HarnessError::DimensionMismatch {
            hp_s: hp.states,
            hp_a: hp.actions,
            hp_h: hp.horizon,
            s: mdp.states(),
            a: mdp.actions(),
            h: mdp.horizon(),
        });
    }
    if let InitStateSchedule::Fixed { state } = spec.schedule {
        if state >= mdp.states() {
            return Err(HarnessError::InitialState {
                state,
                states: mdp.states(),
            });
        }
    }

    let started = Instant::now();
    let optimal = optimal_values(mdp);
    let k_total = hp.episodes as usize;
    let mut rng = RunRng::seed_from_u64(spec.seed);
    let mut record = RegretRecord {
        spec: *spec,
        initial_states: Vec::with_capacity(k_total),
        episode_regret: Vec::with_capacity(k_total),
        cumulative_regret: Vec::with_capacity(k_total),
        invariants: InvariantCounters::default(),
        wall_time_secs: 0.0,
    };

    let mut cache = PolicyCache::default();
    let mut settle_counts = vec![0u32; mdp.horizon() * mdp.states()];
    let checking = spec.check_level != CheckLevel::Off;
    if checking {
        let report = check_invariants(None, &agent.view(), &optimal, spec.check_level, &[]);
        record.invariants.absorb(&report);
    }

    let mut cumulative = 0.0;
    for k in 0..hp.episodes {
        let s1 = spec.schedule.initial_state(k, mdp.states(), &mut rng);
        let policy = agent.greedy_policy();
        let regret = optimal.v(0, s1) - cache.start_values(mdp, &policy)?[s1];

        let prev = checking.then(|| agent.view().into_owned());
        // Step h only rewrites layer h of Q, after acting there, so the
        // pre-episode snapshot reproduces the online greedy choices.
        let trajectory = run_episode(mdp, |h, s| policy.action(h, s), |t| agent.observe(t), s1, &mut rng);
        if let Some(prev) = prev {
            let report = check_invariants(Some(&prev), &agent.view(), &optimal, spec.check_level, &trajectory);
            for &(h, s) in &report.newly_settled {
                settle_counts[h * mdp.states() + s] += 1;
            }
            record.invariants.absorb(&report);
        }

        cumulative += regret;
        record.initial_states.push(s1);
        record.episode_regret.push(regret);
        record.cumulative_regret.push(cumulative);
    }
    if spec.check_level == CheckLevel::Full && agent.view().esa.is_some() {
        let repeated = settle_counts.iter().filter(|&&n| n > 1).count() as u64;
        record
            .invariants
            .deterministic
            .insert(invariants::SETTLE_ONCE.to_string(), repeated);
    }
    record.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(record)
}

/// Keeps `V^pi_1` of the last evaluated policy; greedy policies change rarely
/// once the learner settles.
#[derive(Default)]
struct PolicyCache {
    policy: Option<DeterministicPolicy>,
    values: Vec<f64>,
}

impl PolicyCache {
    fn start_values(&mut self, mdp: &TabularMdp, policy: &DeterministicPolicy) -> Result<&[f64], MdpError> {
        if self.policy.as_ref() != Some(policy) {
            let values = policy_values(mdp, policy)?;
            self.values = values.v[..mdp.states()].to_vec();
            self.policy = Some(policy.clone());
        }
        Ok(&self.values)
    }
}

