//! Finite-horizon tabular MDPs, exact backward-induction solvers and
//! environment sampling.
//!
//! All indices are 0-based: steps `h in 0..H`, states `s in 0..S`,
//! actions `a in 0..A`. The value at step `H` (one past the last step) is
//! identically zero and never stored.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{inverse_cdf, RunRng};

/// Tolerance on each transition row's total mass at load time.
pub const ROW_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("invalid MDP:\n{0}")]
    Invalid(ValidationReport),
    #[error("policy shape {got:?} does not match MDP (H={horizon}, S={states})")]
    PolicyShape {
        got: (usize, usize),
        horizon: usize,
        states: usize,
    },
    #[error("policy action {action} at (h={h},s={s}) outside 0..{actions}")]
    PolicyAction {
        h: usize,
        s: usize,
        action: usize,
        actions: usize,
    },
    #[error("policy table has {got} entries, expected {expected}")]
    PolicyLen { got: usize, expected: usize },
    #[error("reading MDP file: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing MDP file: {0}")]
    Json(#[from] serde_json::Error),
}

/// One broken MDP invariant, with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    ZeroDimension(&'static str),
    Shape(String),
    NegativeProbability {
        h: usize,
        s: usize,
        a: usize,
        next: usize,
        value: f64,
    },
    NonFiniteProbability {
        h: usize,
        s: usize,
        a: usize,
        next: usize,
    },
    RowSum {
        h: usize,
        s: usize,
        a: usize,
        sum: f64,
    },
    RewardOutOfRange {
        h: usize,
        s: usize,
        a: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroDimension(name) => write!(f, "dimension {name} must be at least 1"),
            Violation::Shape(what) => write!(f, "shape mismatch: {what}"),
            Violation::NegativeProbability {
                h,
                s,
                a,
                next,
                value,
            } => write!(
                f,
                "negative probability {value} at (h={h},s={s},a={a}) -> s'={next}"
            ),
            Violation::NonFiniteProbability { h, s, a, next } => {
                write!(f, "non-finite probability at (h={h},s={s},a={a}) -> s'={next}")
            }
            Violation::RowSum { h, s, a, sum } => write!(
                f,
                "row sum {sum} ≠ 1 ± {ROW_SUM_TOL:e} at (h={h},s={s},a={a})"
            ),
            Violation::RewardOutOfRange { h, s, a, value } => {
                write!(f, "reward {value} out of [0,1] at (h={h},s={s},a={a})")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

/// On-disk MDP description: `P` is `[H][S][A][S]`, `r` is `[H][S][A]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawMdp {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    #[serde(rename = "P")]
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    pub r: Vec<Vec<Vec<f64>>>,
}

/// Checks every `TabularMdp` invariant and reports all violations.
pub fn validate_mdp(raw: &RawMdp) -> ValidationReport {
    let mut violations = Vec::new();
    for (name, dim) in [("S", raw.states), ("A", raw.actions), ("H", raw.horizon)] {
        if dim == 0 {
            violations.push(Violation::ZeroDimension(name));
        }
    }
    if !violations.is_empty() {
        return ValidationReport { violations };
    }
    let (ns, na, nh) = (raw.states, raw.actions, raw.horizon);
    if raw.transitions.len() != nh {
        violations.push(Violation::Shape(format!(
            "P has {} steps, expected H={nh}",
            raw.transitions.len()
        )));
    }
    if raw.r.len() != nh {
        violations.push(Violation::Shape(format!(
            "r has {} steps, expected H={nh}",
            raw.r.len()
        )));
    }
    for (h, layer) in raw.transitions.iter().enumerate().take(nh) {
        if layer.len() != ns {
            violations.push(Violation::Shape(format!("P[{h}] has {} states, expected {ns}", layer.len())));
            continue;
        }
        for (s, per_action) in layer.iter().enumerate() {
            if per_action.len() != na {
                violations.push(Violation::Shape(format!(
                    "P[{h}][{s}] has {} actions, expected {na}",
                    per_action.len()
                )));
                continue;
            }
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != ns {
                    violations.push(Violation::Shape(format!(
                        "P[{h}][{s}][{a}] has {} entries, expected {ns}",
                        row.len()
                    )));
                    continue;
                }
                check_row(h, s, a, row, &mut violations);
            }
        }
    }
    for (h, layer) in raw.r.iter().enumerate().take(nh) {
        if layer.len() != ns {
            violations.push(Violation::Shape(format!("r[{h}] has {} states, expected {ns}", layer.len())));
            continue;
        }
        for (s, per_action) in layer.iter().enumerate() {
            if per_action.len() != na {
                violations.push(Violation::Shape(format!(
                    "r[{h}][{s}] has {} actions, expected {na}",
                    per_action.len()
                )));
                continue;
            }
            for (a, &value) in per_action.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    violations.push(Violation::RewardOutOfRange { h, s, a, value });
                }
            }
        }
    }
    ValidationReport { violations }
}

fn check_row(h: usize, s: usize, a: usize, row: &[f64], out: &mut Vec<Violation>) {
    let mut finite = true;
    for (next, &value) in row.iter().enumerate() {
        if !value.is_finite() {
            out.push(Violation::NonFiniteProbability { h, s, a, next });
            finite = false;
        } else if value < 0.0 {
            out.push(Violation::NegativeProbability {
                h,
                s,
                a,
                next,
                value,
            });
        }
    }
    if finite {
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            out.push(Violation::RowSum { h, s, a, sum });
        }
    }
}

/// A validated episodic MDP with step-indexed kernels and deterministic rewards.
///
/// Transition rows are re-normalized after validation, and a cumulative table
/// whose last entry is exactly `1.0` is kept alongside for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    states: usize,
    actions: usize,
    horizon: usize,
    probs: Vec<f64>,
    cdf: Vec<f64>,
    rewards: Vec<f64>,
}

impl TabularMdp {
    pub fn from_raw(raw: &RawMdp) -> Result<Self, MdpError> {
        let report = validate_mdp(raw);
        if !report.is_valid() {
            return Err(MdpError::Invalid(report));
        }
        let probs: Vec<f64> = raw
            .transitions
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .copied()
            .collect();
        let rewards: Vec<f64> = raw.r.iter().flatten().flatten().copied().collect();
        Ok(Self::from_validated(raw.states, raw.actions, raw.horizon, probs, rewards))
    }

    /// Builds from flat row-major tables (`probs` is `[H][S][A][S]`, `rewards` is `[H][S][A]`).
    pub fn from_flat(
        states: usize,
        actions: usize,
        horizon: usize,
        probs: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Result<Self, MdpError> {
        let raw = RawMdp::from_flat(states, actions, horizon, &probs, &rewards)?;
        Self::from_raw(&raw)
    }

    fn from_validated(
        states: usize,
        actions: usize,
        horizon: usize,
        mut probs: Vec<f64>,
        rewards: Vec<f64>,
    ) -> Self {
        let mut cdf = vec![0.0; probs.len()];
        for (row, cum) in probs.chunks_mut(states).zip(cdf.chunks_mut(states)) {
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= total);
            let mut acc = 0.0;
            for (c, p) in cum.iter_mut().zip(row.iter()) {
                acc += p;
                *c = acc.min(1.0);
            }
            // last bucket with positive mass closes the CDF at exactly 1
            let last = row.iter().rposition(|&p| p > 0.0).unwrap_or(states - 1);
            cum[last..].iter_mut().for_each(|c| *c = 1.0);
        }
        Self {
            states,
            actions,
            horizon,
            probs,
            cdf,
            rewards,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MdpError> {
        let text = fs::read_to_string(path)?;
        let raw: RawMdp = serde_json::from_str(&text)?;
        Self::from_raw(&raw)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), MdpError> {
        let text = serde_json::to_string_pretty(&self.to_raw())?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn to_raw(&self) -> RawMdp {
        RawMdp {
            states: self.states,
            actions: self.actions,
            horizon: self.horizon,
            transitions: (0..self.horizon)
                .map(|h| {
                    (0..self.states)
                        .map(|s| (0..self.actions).map(|a| self.row(h, s, a).to_vec()).collect())
                        .collect()
                })
                .collect(),
            r: (0..self.horizon)
                .map(|h| {
                    (0..self.states)
                        .map(|s| (0..self.actions).map(|a| self.reward(h, s, a)).collect())
                        .collect()
                })
                .collect(),
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    #[inline]
    pub fn sa_index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    /// Next-state distribution `P_h(. | s, a)`.
    #[inline]
    pub fn row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.sa_index(h, s, a) * self.states;
        &self.probs[start..start + self.states]
    }

    #[inline]
    pub fn cdf_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let start = self.sa_index(h, s, a) * self.states;
        &self.cdf[start..start + self.states]
    }

    #[inline]
    pub fn reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rewards[self.sa_index(h, s, a)]
    }
}

impl RawMdp {
    pub fn from_flat(
        states: usize,
        actions: usize,
        horizon: usize,
        probs: &[f64],
        rewards: &[f64],
    ) -> Result<Self, MdpError> {
        let n_sa = horizon * states * actions;
        if probs.len() != n_sa * states || rewards.len() != n_sa {
            return Err(MdpError::Invalid(ValidationReport {
                violations: vec![Violation::Shape(format!(
                    "flat tables have {} / {} entries, expected {} / {}",
                    probs.len(),
                    rewards.len(),
                    n_sa * states,
                    n_sa
                ))],
            }));
        }
        let nest_p = |h: usize, s: usize, a: usize| {
            let start = ((h * states + s) * actions + a) * states;
            probs[start..start + states].to_vec()
        };
        Ok(Self {
            states,
            actions,
            horizon,
            transitions: (0..horizon)
                .map(|h| {
                    (0..states)
                        .map(|s| (0..actions).map(|a| nest_p(h, s, a)).collect())
                        .collect()
                })
                .collect(),
            r: (0..horizon)
                .map(|h| {
                    (0..states)
                        .map(|s| {
                            (0..actions)
                                .map(|a| rewards[(h * states + s) * actions + a])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        })
    }
}

/// Deterministic non-stationary policy `pi[h][s]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeterministicPolicy {
    horizon: usize,
    states: usize,
    table: Vec<usize>,
}

impl DeterministicPolicy {
    pub fn new(horizon: usize, states: usize, table: Vec<usize>) -> Result<Self, MdpError> {
        if table.len() != horizon * states {
            return Err(MdpError::PolicyLen {
                got: table.len(),
                expected: horizon * states,
            });
        }
        Ok(Self {
            horizon,
            states,
            table,
        })
    }

    pub fn constant(horizon: usize, states: usize, action: usize) -> Self {
        Self {
            horizon,
            states,
            table: vec![action; horizon * states],
        }
    }

    #[inline]
    pub fn action(&self, h: usize, s: usize) -> usize {
        self.table[h * self.states + s]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.table
    }

    fn check_against(&self, mdp: &TabularMdp) -> Result<(), MdpError> {
        if self.horizon != mdp.horizon || self.states != mdp.states {
            return Err(MdpError::PolicyShape {
                got: (self.horizon, self.states),
                horizon: mdp.horizon,
                states: mdp.states,
            });
        }
        for h in 0..self.horizon {
            for s in 0..self.states {
                let action = self.action(h, s);
                if action >= mdp.actions {
                    return Err(MdpError::PolicyAction {
                        h,
                        s,
                        action,
                        actions: mdp.actions,
                    });
                }
            }
        }
        Ok(())
    }
}

/// `Q[h][s][a]` and `V[h][s]` for steps `0..H`; `V` at step `H` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    states: usize,
    actions: usize,
    horizon: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl ValueTables {
    pub fn zeros(states: usize, actions: usize, horizon: usize) -> Self {
        Self {
            states,
            actions,
            horizon,
            q: vec![0.0; horizon * states * actions],
            v: vec![0.0; horizon * states],
        }
    }

    #[inline]
    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[(h * self.states + s) * self.actions + a]
    }

    #[inline]
    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.states + s]
    }

    /// `V[h+1][s]`, zero past the last step.
    #[inline]
    pub fn v_next(&self, h: usize, s: usize) -> f64 {
        if h + 1 >= self.horizon {
            0.0
        } else {
            self.v(h + 1, s)
        }
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Greedy policy w.r.t. `Q`, lowest action index on ties.
    pub fn greedy_policy(&self) -> DeterministicPolicy {
        let table = self
            .q
            .chunks(self.actions)
            .map(argmax_lowest)
            .collect();
        DeterministicPolicy {
            horizon: self.horizon,
            states: self.states,
            table,
        }
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax_lowest(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn expected_next(mdp: &TabularMdp, h: usize, s: usize, a: usize, next_v: Option<&[f64]>) -> f64 {
    match next_v {
        None => 0.0,
        Some(v) => mdp.row(h, s, a).iter().zip(v).map(|(p, v)| p * v).sum(),
    }
}

/// Backward induction for `Q*` and `V*`.
pub fn optimal_values(mdp: &TabularMdp) -> ValueTables {
    let (ns, na, nh) = (mdp.states, mdp.actions, mdp.horizon);
    let mut out = ValueTables::zeros(ns, na, nh);
    for h in (0..nh).rev() {
        let (cur_v, next_v) = split_layers(&mut out.v, h, ns);
        for (s, v_s) in cur_v.iter_mut().enumerate() {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let q = mdp.reward(h, s, a) + expected_next(mdp, h, s, a, next_v);
                out.q[(h * ns + s) * na + a] = q;
                if q > best {
                    best = q;
                }
            }
            *v_s = best;
        }
    }
    out
}

/// Exact `Q^pi` and `V^pi` of a deterministic policy.
pub fn policy_values(mdp: &TabularMdp, policy: &DeterministicPolicy) -> Result<ValueTables, MdpError> {
    policy.check_against(mdp)?;
    let (ns, na, nh) = (mdp.states, mdp.actions, mdp.horizon);
    let mut out = ValueTables::zeros(ns, na, nh);
    for h in (0..nh).rev() {
        let (cur_v, next_v) = split_layers(&mut out.v, h, ns);
        for (s, v_s) in cur_v.iter_mut().enumerate() {
            for a in 0..na {
                out.q[(h * ns + s) * na + a] = mdp.reward(h, s, a) + expected_next(mdp, h, s, a, next_v);
            }
            *v_s = out.q[(h * ns + s) * na + policy.action(h, s)];
        }
    }
    Ok(out)
}

fn split_layers(v: &mut [f64], h: usize, ns: usize) -> (&mut [f64], Option<&[f64]>) {
    let (head, tail) = v.split_at_mut((h + 1) * ns);
    let cur = &mut head[h * ns..];
    let next = if tail.is_empty() { None } else { Some(&tail[..ns]) };
    (cur, next)
}

/// Draws `s' ~ P_h(. | s, a)` with one uniform draw.
pub fn sample_transition(mdp: &TabularMdp, h: usize, s: usize, a: usize, rng: &mut RunRng) -> usize {
    inverse_cdf(mdp.cdf_row(h, s, a), rng.uniform())
}

/// One observed step `(h, s, a, r, s')`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s_next: usize,
}

/// Rolls out one episode from `s1`.
///
/// `observe` sees each transition before the next action is chosen, so an
/// online learner's updates at step `h` are visible to its choice at `h+1`.
pub fn run_episode<A, O>(
    mdp: &TabularMdp,
    mut act: A,
    mut observe: O,
    s1: usize,
    rng: &mut RunRng,
) -> Vec<Transition>
where
    A: FnMut(usize, usize) -> usize,
    O: FnMut(&Transition),
{
    let mut trajectory = Vec::with_capacity(mdp.horizon);
    let mut s = s1;
    for h in 0..mdp.horizon {
        let a = act(h, s);
        let s_next = sample_transition(mdp, h, s, a, rng);
        let t = Transition {
            h,
            s,
            a,
            r: mdp.reward(h, s, a),
            s_next,
        };
        observe(&t);
        trajectory.push(t);
        s = s_next;
    }
    trajectory
}

#[cfg(test)]
mod tests {
    use super::*;

    /// H=1, A=1; state 0 gets row `p` and reward `r`, other states are valid.
    fn single(r: f64, p: Vec<f64>) -> RawMdp {
        let ns = p.len();
        let uniform = vec![1.0 / ns as f64; ns];
        let mut rows = vec![vec![uniform]; ns];
        rows[0] = vec![p];
        let mut rewards = vec![vec![0.0]; ns];
        rewards[0] = vec![r];
        RawMdp {
            states: ns,
            actions: 1,
            horizon: 1,
            transitions: vec![rows],
            r: vec![rewards],
        }
    }

    /// S=2, A=2, H=2. At h=0, s=0: a0 -> s1 (r=0), a1 -> stay (r=0.5).
    /// At h=1: r(1,.)=1, r(0,.)=0.
    pub(crate) fn two_state() -> TabularMdp {
        let mut p = vec![0.0; 2 * 2 * 2 * 2];
        let mut r = vec![0.0; 2 * 2 * 2];
        let idx = |h: usize, s: usize, a: usize| (h * 2 + s) * 2 + a;
        for h in 0..2 {
            for s in 0..2 {
                for a in 0..2 {
                    // default: stay
                    p[idx(h, s, a) * 2 + s] = 1.0;
                }
            }
        }
        // h=0, s=0, a0 moves to s=1
        p[idx(0, 0, 0) * 2] = 0.0;
        p[idx(0, 0, 0) * 2 + 1] = 1.0;
        r[idx(0, 0, 1)] = 0.5;
        r[idx(1, 1, 0)] = 1.0;
        r[idx(1, 1, 1)] = 1.0;
        TabularMdp::from_flat(2, 2, 2, p, r).unwrap()
    }

    #[test]
    fn trivial_mdp_is_valid() {
        assert!(validate_mdp(&single(0.5, vec![1.0])).is_valid());
    }

    #[test]
    fn reward_out_of_range_reported() {
        let report = validate_mdp(&single(1.5, vec![1.0]));
        assert_eq!(
            report.violations,
            vec![Violation::RewardOutOfRange {
                h: 0,
                s: 0,
                a: 0,
                value: 1.5
            }]
        );
        assert_eq!(
            report.violations[0].to_string(),
            "reward 1.5 out of [0,1] at (h=0,s=0,a=0)"
        );
    }

    #[test]
    fn short_row_reported() {
        let report = validate_mdp(&single(0.5, vec![0.49, 0.49]));
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::RowSum { sum, .. } => assert!((sum - 0.98).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(report.violations[0].to_string().starts_with("row sum 0.98"));
    }

    #[test]
    fn every_violation_listed() {
        let mut raw = single(-0.1, vec![-0.5, 1.5]);
        raw.r[0][0].push(0.3); // wrong action count
        let report = validate_mdp(&raw);
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::NegativeProbability { next: 0, .. })));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::Shape(_))));
        assert!(!report.is_valid());
    }

    #[test]
    fn zero_dimension_rejected() {
        let raw = RawMdp {
            states: 0,
            actions: 1,
            horizon: 1,
            transitions: vec![],
            r: vec![],
        };
        assert!(matches!(TabularMdp::from_raw(&raw), Err(MdpError::Invalid(_))));
    }

    #[test]
    fn rows_renormalized_and_cdf_closed() {
        let raw = single(0.0, vec![0.3, 0.7 + 5e-10]);
        let mdp = TabularMdp::from_raw(&raw).unwrap();
        let sum: f64 = mdp.row(0, 0, 0).iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
        assert_eq!(*mdp.cdf_row(0, 0, 0).last().unwrap(), 1.0);
    }

    #[test]
    fn optimal_values_decoupled_maxima() {
        // S=1, A=2, H=2; a0 pays 1, a1 pays 0
        let mdp = TabularMdp::from_flat(1, 2, 2, vec![1.0; 4], vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let opt = optimal_values(&mdp);
        assert_eq!(opt.v(0, 0), 2.0);
        assert_eq!(opt.q(0, 0, 0), 2.0);
        assert_eq!(opt.q(0, 0, 1), 1.0);
    }

    #[test]
    fn zero_reward_values_are_zero() {
        let mdp = TabularMdp::from_flat(2, 2, 3, vec![0.5; 24], vec![0.0; 12]).unwrap();
        let opt = optimal_values(&mdp);
        assert!(opt.q.iter().chain(&opt.v).all(|&x| x == 0.0));
        let pol = policy_values(&mdp, &DeterministicPolicy::constant(3, 2, 1)).unwrap();
        assert!(pol.v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_state_example_values() {
        let mdp = two_state();
        let opt = optimal_values(&mdp);
        assert_eq!(opt.q(0, 0, 0), 1.0);
        assert_eq!(opt.q(0, 0, 1), 0.5);
        assert_eq!(opt.v(0, 0), 1.0);

        let greedy = opt.greedy_policy();
        let on_greedy = policy_values(&mdp, &greedy).unwrap();
        assert_eq!(on_greedy.v(0, 0), 1.0);

        let mut table = greedy.as_slice().to_vec();
        table[0] = 1;
        let stay = DeterministicPolicy::new(2, 2, table).unwrap();
        assert_eq!(policy_values(&mdp, &stay).unwrap().v(0, 0), 0.5);
    }

    #[test]
    fn malformed_policy_rejected() {
        let mdp = two_state();
        let bad = DeterministicPolicy::constant(2, 2, 2);
        assert!(matches!(
            policy_values(&mdp, &bad),
            Err(MdpError::PolicyAction { action: 2, .. })
        ));
        let wrong_shape = DeterministicPolicy::constant(3, 2, 0);
        assert!(matches!(
            policy_values(&mdp, &wrong_shape),
            Err(MdpError::PolicyShape { .. })
        ));
        assert!(DeterministicPolicy::new(2, 2, vec![0; 3]).is_err());
    }

    #[test]
    fn degenerate_row_always_first_state() {
        let mdp = TabularMdp::from_flat(2, 1, 1, vec![1.0, 0.0, 1.0, 0.0], vec![0.0, 0.0]).unwrap();
        let mut rng = RunRng::seed_from_u64(3);
        for _ in 0..1000 {
            assert_eq!(sample_transition(&mdp, 0, 0, 0, &mut rng), 0);
        }
    }

    #[test]
    fn fair_coin_frequency() {
        let mdp = TabularMdp::from_flat(2, 1, 1, vec![0.5; 4], vec![0.0, 0.0]).unwrap();
        let mut rng = RunRng::seed_from_u64(2024);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| sample_transition(&mdp, 0, 0, 0, &mut rng) == 1)
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq {freq}");
    }

    #[test]
    fn episode_length_and_observe_order() {
        let mdp = two_state();
        let mut rng = RunRng::seed_from_u64(0);
        let mut seen = 0;
        let traj = run_episode(&mdp, |_, _| 0, |t| {
            assert_eq!(t.h, seen);
            seen += 1;
        }, 0, &mut rng);
        assert_eq!(traj.len(), 2);
        assert_eq!(seen, 2);
        assert_eq!(traj[0].s_next, 1);
        assert_eq!(traj[1].r, 1.0);

        let one = TabularMdp::from_flat(1, 1, 1, vec![1.0], vec![0.5]).unwrap();
        assert_eq!(run_episode(&one, |_, _| 0, |_| {}, 0, &mut rng).len(), 1);
    }

    #[test]
    fn deterministic_mdp_trajectory_ignores_seed() {
        let mdp = two_state();
        let a = run_episode(&mdp, |_, _| 0, |_| {}, 0, &mut RunRng::seed_from_u64(1));
        let b = run_episode(&mdp, |_, _| 0, |_| {}, 0, &mut RunRng::seed_from_u64(99));
        assert_eq!(a, b);
    }

    #[test]
    fn raw_round_trip_through_json() {
        let mdp = two_state();
        let text = serde_json::to_string(&mdp.to_raw()).unwrap();
        assert!(text.contains("\"S\":2") && text.contains("\"P\":"));
        let back: RawMdp = serde_json::from_str(&text).unwrap();
        assert_eq!(TabularMdp::from_raw(&back).unwrap(), mdp);
    }
}
