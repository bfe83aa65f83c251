//! Seeded generators for benchmark MDP instances.
//!
//! Each generator draws one stationary kernel and replicates it across all
//! `H` steps. A positive `perturb` mixes an independent random row into every
//! step's kernel: `P_h = (1 - perturb) P + perturb U_h`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{MdpError, RawMdp, TabularMdp};
use crate::rng::RunRng;

/// Reward of the left action at state 0 in the chain.
pub const CHAIN_LEFT_REWARD: f64 = 0.05;
/// Reward of the right action at the last state in the chain.
pub const CHAIN_GOAL_REWARD: f64 = 1.0;
/// Baseline reward of every needle entry except the elevated one.
pub const NEEDLE_BASE_REWARD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("dimension {0} must be at least 1")]
    ZeroDimension(&'static str),
    #[error("chain needs at least 2 states and exactly 2 actions, got S={states}, A={actions}")]
    ChainShape { states: usize, actions: usize },
    #[error("chain slip must lie in [0, 0.5], got {0}")]
    Slip(f64),
    #[error("needle gap must lie in (0, 0.5], got {0}")]
    Gap(f64),
    #[error("perturbation must lie in [0, 1], got {0}")]
    Perturb(f64),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeneratorKind {
    Random,
    Chain { slip: f64 },
    Needle { gap: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub seed: u64,
    #[serde(default)]
    pub perturb: f64,
}

impl GeneratorSpec {
    pub fn random(states: usize, actions: usize, horizon: usize, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Random,
            states,
            actions,
            horizon,
            seed,
            perturb: 0.0,
        }
    }

    pub fn chain(states: usize, horizon: usize, slip: f64) -> Self {
        Self {
            kind: GeneratorKind::Chain { slip },
            states,
            actions: 2,
            horizon,
            seed: 0,
            perturb: 0.0,
        }
    }

    pub fn needle(states: usize, actions: usize, horizon: usize, gap: f64, seed: u64) -> Self {
        Self {
            kind: GeneratorKind::Needle { gap },
            states,
            actions,
            horizon,
            seed,
            perturb: 0.0,
        }
    }

    pub fn with_perturb(mut self, perturb: f64) -> Self {
        self.perturb = perturb;
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        for (name, dim) in [("S", self.states), ("A", self.actions), ("H", self.horizon)] {
            if dim == 0 {
                return Err(GenError::ZeroDimension(name));
            }
        }
        if !(0.0..=1.0).contains(&self.perturb) {
            return Err(GenError::Perturb(self.perturb));
        }
        match self.kind {
            GeneratorKind::Random => Ok(()),
            GeneratorKind::Chain { slip } => {
                if self.states < 2 || self.actions != 2 {
                    Err(GenError::ChainShape {
                        states: self.states,
                        actions: self.actions,
                    })
                } else if !(0.0..=0.5).contains(&slip) {
                    Err(GenError::Slip(slip))
                } else {
                    Ok(())
                }
            }
            GeneratorKind::Needle { gap } => {
                if gap > 0.0 && gap <= 0.5 {
                    Ok(())
                } else {
                    Err(GenError::Gap(gap))
                }
            }
        }
    }

    pub fn build(&self) -> Result<TabularMdp, GenError> {
        self.validate()?;
        let mut rng = RunRng::seed_from_u64(self.seed);
        let (ns, na, nh) = (self.states, self.actions, self.horizon);
        let (kernel, rewards) = match self.kind {
            GeneratorKind::Random => random_stationary(ns, na, &mut rng),
            GeneratorKind::Chain { slip } => chain_stationary(ns, slip),
            GeneratorKind::Needle { .. } => {
                let (kernel, _) = random_stationary(ns, na, &mut rng);
                (kernel, vec![NEEDLE_BASE_REWARD; ns * na])
            }
        };
        let mut raw = replicate(ns, na, nh, &kernel, &rewards);
        if let GeneratorKind::Needle { gap } = self.kind {
            let (h, s, a) = (rng.below(nh), rng.below(ns), rng.below(na));
            raw.r[h][s][a] = NEEDLE_BASE_REWARD + gap;
        }
        if self.perturb > 0.0 {
            for layer in raw.transitions.iter_mut() {
                for row in layer.iter_mut().flatten() {
                    let noise = random_row(ns, &mut rng);
                    for (p, u) in row.iter_mut().zip(noise) {
                        *p = (1.0 - self.perturb) * *p + self.perturb * u;
                    }
                }
            }
        }
        Ok(TabularMdp::from_raw(&raw)?)
    }
}

/// Random rows (normalized independent uniforms) and uniform rewards.
pub fn random_mdp(states: usize, actions: usize, horizon: usize, seed: u64) -> Result<TabularMdp, GenError> {
    GeneratorSpec::random(states, actions, horizon, seed).build()
}

/// Two-action chain: action 0 steps left (reward 0.05 at state 0 only),
/// action 1 steps right with probability `1 - slip`, else stays (reward 1 at
/// state `S-1` only).
pub fn chain_mdp(states: usize, horizon: usize, slip: f64) -> Result<TabularMdp, GenError> {
    GeneratorSpec::chain(states, horizon, slip).build()
}

/// Random rows, every reward 0.5 except one seeded `(h, s, a)` at `0.5 + gap`.
pub fn needle_mdp(states: usize, actions: usize, horizon: usize, gap: f64, seed: u64) -> Result<TabularMdp, GenError> {
    GeneratorSpec::needle(states, actions, horizon, gap, seed).build()
}

fn random_row(ns: usize, rng: &mut RunRng) -> Vec<f64> {
    // 1 - u lies in (0, 1], so the row total is never zero
    let mut row: Vec<f64> = (0..ns).map(|_| 1.0 - rng.uniform()).collect();
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

/// `[S][A][S]` kernel and `[S][A]` rewards.
fn random_stationary(ns: usize, na: usize, rng: &mut RunRng) -> (Vec<f64>, Vec<f64>) {
    let mut kernel = Vec::with_capacity(ns * na * ns);
    let mut rewards = Vec::with_capacity(ns * na);
    for _ in 0..ns * na {
        kernel.extend(random_row(ns, rng));
        rewards.push(rng.uniform());
    }
    (kernel, rewards)
}

fn chain_stationary(ns: usize, slip: f64) -> (Vec<f64>, Vec<f64>) {
    let mut kernel = vec![0.0; ns * 2 * ns];
    let mut rewards = vec![0.0; ns * 2];
    for s in 0..ns {
        let left = (s * 2) * ns;
        kernel[left + s.saturating_sub(1)] = 1.0;
        let right = (s * 2 + 1) * ns;
        let target = (s + 1).min(ns - 1);
        kernel[right + target] += 1.0 - slip;
        kernel[right + s] += slip;
    }
    rewards[0] = CHAIN_LEFT_REWARD;
    rewards[(ns - 1) * 2 + 1] = CHAIN_GOAL_REWARD;
    (kernel, rewards)
}

fn replicate(ns: usize, na: usize, nh: usize, kernel: &[f64], rewards: &[f64]) -> RawMdp {
    let layer_p: Vec<Vec<Vec<f64>>> = (0..ns)
        .map(|s| {
            (0..na)
                .map(|a| kernel[(s * na + a) * ns..(s * na + a + 1) * ns].to_vec())
                .collect()
        })
        .collect();
    let layer_r: Vec<Vec<f64>> = (0..ns).map(|s| rewards[s * na..(s + 1) * na].to_vec()).collect();
    RawMdp {
        states: ns,
        actions: na,
        horizon: nh,
        transitions: vec![layer_p; nh],
        r: vec![layer_r; nh],
    }
}
