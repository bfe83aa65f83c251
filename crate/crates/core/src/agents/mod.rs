//! Online tabular learners behind a shared act / observe interface.

mod esa;
mod ucbq;

use std::borrow::Cow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{DeterministicPolicy, ValueTables};
pub use crate::mdp::Transition;

pub use esa::{
    advantage_bonus, hoeffding_bonus, update_bonus, update_lcb_q, update_moments, update_ucb_q,
    update_ucb_q_advantage, BonusUpdate, EsaAgent, Moments, RefUpdate, StepOutcome,
};
pub use ucbq::UcbQAgent;

pub const DEFAULT_CB: f64 = 2.0;
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Error, PartialEq)]
pub enum HyperparamError {
    #[error("dimension {0} must be at least 1")]
    ZeroDimension(&'static str),
    #[error("bonus constant c_b must be positive and finite, got {0}")]
    BonusConstant(f64),
    #[error("failure probability delta must lie in (0,1), got {0}")]
    Delta(f64),
    #[error("log term iota must be positive and finite, got {0}")]
    Iota(f64),
}

/// Run-level constants shared by both learners.
///
/// `iota = ln(S * A * T / delta)` with `T = K * H`. A zero episode budget is
/// allowed (it runs nothing); `T` is floored at 1 so `iota` stays positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub episodes: u64,
    pub c_b: f64,
    pub delta: f64,
    pub iota: f64,
}

impl Hyperparams {
    pub fn new(
        states: usize,
        actions: usize,
        horizon: usize,
        episodes: u64,
        c_b: f64,
        delta: f64,
    ) -> Result<Self, HyperparamError> {
        for (name, dim) in [("S", states), ("A", actions), ("H", horizon)] {
            if dim == 0 {
                return Err(HyperparamError::ZeroDimension(name));
            }
        }
        if !(c_b > 0.0 && c_b.is_finite()) {
            return Err(HyperparamError::BonusConstant(c_b));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(HyperparamError::Delta(delta));
        }
        let t = (episodes.saturating_mul(horizon as u64)).max(1) as f64;
        let iota = (states as f64 * actions as f64 * t / delta).ln();
        Self {
            states,
            actions,
            horizon,
            episodes,
            c_b,
            delta,
            iota,
        }
        .checked()
    }

    /// Overrides the derived log term; used to pin hand-worked examples.
    pub fn with_iota(mut self, iota: f64) -> Result<Self, HyperparamError> {
        self.iota = iota;
        self.checked()
    }

    fn checked(self) -> Result<Self, HyperparamError> {
        if !(self.iota > 0.0 && self.iota.is_finite()) {
            return Err(HyperparamError::Iota(self.iota));
        }
        Ok(self)
    }

    pub fn total_steps(&self) -> u64 {
        self.episodes * self.horizon as u64
    }

    pub(crate) fn hsa(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    pub(crate) fn hs(&self) -> usize {
        self.horizon * self.states
    }
}

/// Per-(h,s,a) tables specific to the early-settled advantage learner.
#[derive(Debug, Clone, PartialEq)]
pub struct EsaView<'a> {
    pub q_ucb: Cow<'a, [f64]>,
    pub q_lcb: Cow<'a, [f64]>,
    pub q_ref: Cow<'a, [f64]>,
    pub visits: Cow<'a, [u64]>,
    pub mu_ref: Cow<'a, [f64]>,
    pub sigma_ref: Cow<'a, [f64]>,
    pub mu_adv: Cow<'a, [f64]>,
    pub sigma_adv: Cow<'a, [f64]>,
    pub b_ref: Cow<'a, [f64]>,
    pub v_lcb: Cow<'a, [f64]>,
    pub v_ref: Cow<'a, [f64]>,
    pub u_ref: Cow<'a, [bool]>,
}

impl EsaView<'_> {
    pub fn into_owned(self) -> EsaView<'static> {
        EsaView {
            q_ucb: Cow::Owned(self.q_ucb.into_owned()),
            q_lcb: Cow::Owned(self.q_lcb.into_owned()),
            q_ref: Cow::Owned(self.q_ref.into_owned()),
            visits: Cow::Owned(self.visits.into_owned()),
            mu_ref: Cow::Owned(self.mu_ref.into_owned()),
            sigma_ref: Cow::Owned(self.sigma_ref.into_owned()),
            mu_adv: Cow::Owned(self.mu_adv.into_owned()),
            sigma_adv: Cow::Owned(self.sigma_adv.into_owned()),
            b_ref: Cow::Owned(self.b_ref.into_owned()),
            v_lcb: Cow::Owned(self.v_lcb.into_owned()),
            v_ref: Cow::Owned(self.v_ref.into_owned()),
            u_ref: Cow::Owned(self.u_ref.into_owned()),
        }
    }
}

/// Read-only view of a learner's tables, borrowed or owned.
///
/// Layouts are row-major: `[h][s][a]` for Q-like tables, `[h][s]` for
/// value-like tables.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentView<'a> {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    pub q: Cow<'a, [f64]>,
    pub v: Cow<'a, [f64]>,
    pub esa: Option<EsaView<'a>>,
}

impl AgentView<'_> {
    pub fn into_owned(self) -> AgentView<'static> {
        AgentView {
            states: self.states,
            actions: self.actions,
            horizon: self.horizon,
            q: Cow::Owned(self.q.into_owned()),
            v: Cow::Owned(self.v.into_owned()),
            esa: self.esa.map(EsaView::into_owned),
        }
    }

    #[inline]
    pub fn sa_index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    #[inline]
    pub fn s_index(&self, h: usize, s: usize) -> usize {
        h * self.states + s
    }
}

/// A learner driven one transition at a time by the harness.
pub trait Agent: Send {
    fn name(&self) -> &'static str;

    /// Greedy action at `(h, s)`; lowest index on ties.
    fn act(&self, h: usize, s: usize) -> usize;

    fn observe(&mut self, t: &Transition);

    fn view(&self) -> AgentView<'_>;

    /// Value copy of the greedy policy over every `(h, s)`.
    fn greedy_policy(&self) -> DeterministicPolicy {
        let view = self.view();
        let table = (0..view.horizon)
            .flat_map(|h| (0..view.states).map(move |s| (h, s)))
            .map(|(h, s)| self.act(h, s))
            .collect();
        DeterministicPolicy::new(view.horizon, view.states, table)
            .expect("greedy policy has one entry per (h, s)")
    }

    /// Overwrites `Q` (and the induced `V = max_a Q`). Test hook.
    fn seed_q(&mut self, q: &ValueTables);
}

/// Which learner a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Esa,
    UcbQ,
}

impl Algorithm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Esa => "esa",
            Algorithm::UcbQ => "ucb-q",
        }
    }

    /// `monotone` only affects the UCB-Q baseline.
    pub fn build(&self, hp: Hyperparams, monotone: bool) -> Box<dyn Agent> {
        match self {
            Algorithm::Esa => Box::new(EsaAgent::new(hp)),
            Algorithm::UcbQ => Box::new(UcbQAgent::new(hp, monotone)),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "esa" => Ok(Algorithm::Esa),
            "ucb-q" | "ucbq" => Ok(Algorithm::UcbQ),
            other => Err(format!("unknown algorithm `{other}` (expected esa | ucb-q)")),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[inline]
pub(crate) fn row_max(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iota_uses_natural_log_of_sat_over_delta() {
        let hp = Hyperparams::new(3, 2, 4, 100, 2.0, 0.05).unwrap();
        let expected = (3.0 * 2.0 * 400.0 / 0.05f64).ln();
        assert!((hp.iota - expected).abs() < 1e-12);
        assert_eq!(hp.total_steps(), 400);
    }

    #[test]
    fn invalid_hyperparams_rejected() {
        assert_eq!(
            Hyperparams::new(0, 1, 1, 1, 1.0, 0.1),
            Err(HyperparamError::ZeroDimension("S"))
        );
        assert!(matches!(
            Hyperparams::new(1, 1, 1, 1, 0.0, 0.1),
            Err(HyperparamError::BonusConstant(_))
        ));
        assert!(matches!(
            Hyperparams::new(1, 1, 1, 1, 1.0, 1.0),
            Err(HyperparamError::Delta(_))
        ));
        let hp = Hyperparams::new(1, 1, 1, 1, 1.0, 0.5).unwrap();
        assert!(matches!(hp.with_iota(0.0), Err(HyperparamError::Iota(_))));
    }

    #[test]
    fn zero_budget_still_has_positive_iota() {
        let hp = Hyperparams::new(1, 1, 1, 0, 1.0, 0.5).unwrap();
        assert!(hp.iota > 0.0);
    }

    #[test]
    fn algorithm_names_round_trip() {
        for algo in [Algorithm::Esa, Algorithm::UcbQ] {
            assert_eq!(algo.as_str().parse::<Algorithm>().unwrap(), algo);
        }
        assert!("ucb-v".parse::<Algorithm>().is_err());
    }
}
