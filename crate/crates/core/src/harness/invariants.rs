//! Runtime checks of the learners' structural and high-probability invariants.
//!
//! Deterministic invariants hold on every trajectory by construction of the
//! updates; any violation is a bug. Statistical invariants (optimism,
//! pessimism, reference closeness) hold with probability at least `1 - delta`
//! and are only counted.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agents::{AgentView, Transition};
use crate::mdp::ValueTables;

pub const Q_MONOTONE: &str = "q_monotone";
pub const V_MONOTONE: &str = "v_monotone";
pub const V_LCB_MONOTONE: &str = "v_lcb_monotone";
pub const Q_REF_DOMINATES: &str = "q_ref_dominates_q";
pub const JENSEN_REF: &str = "jensen_ref";
pub const JENSEN_ADV: &str = "jensen_adv";
pub const SETTLE_ONCE: &str = "settle_once";
pub const Q_RANGE: &str = "q_range";
pub const V_RANGE: &str = "v_range";
pub const Q_LCB_UPPER: &str = "q_lcb_upper";
pub const V_LCB_RANGE: &str = "v_lcb_range";

pub const OPTIMISM: &str = "optimism";
pub const PESSIMISM_Q: &str = "pessimism_q";
pub const PESSIMISM_V: &str = "pessimism_v";
pub const CLOSENESS: &str = "closeness";

/// Slack for comparisons against the exact oracle and for Jensen gaps.
pub const ORACLE_TOL: f64 = 1e-9;
/// Largest allowed `|V - V_ref|`.
pub const CLOSENESS_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckLevel {
    #[default]
    Off,
    /// Monotonicity and closeness on the entries visited this episode.
    Cheap,
    /// Every invariant on every entry.
    Full,
}

impl std::str::FromStr for CheckLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(CheckLevel::Off),
            "cheap" => Ok(CheckLevel::Cheap),
            "full" => Ok(CheckLevel::Full),
            other => Err(format!("unknown check level `{other}` (expected off | cheap | full)")),
        }
    }
}

/// Violation counts from one check.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InvariantReport {
    pub deterministic: BTreeMap<&'static str, u64>,
    pub statistical: BTreeMap<&'static str, u64>,
    /// `(h, s)` cells whose settle flag went from raised to lowered.
    pub newly_settled: Vec<(usize, usize)>,
}

impl InvariantReport {
    fn det(&mut self, name: &'static str, ok: bool) {
        let slot = self.deterministic.entry(name).or_insert(0);
        if !ok {
            *slot += 1;
        }
    }

    fn stat(&mut self, name: &'static str, ok: bool) {
        let slot = self.statistical.entry(name).or_insert(0);
        if !ok {
            *slot += 1;
        }
    }

    pub fn deterministic_violations(&self) -> u64 {
        self.deterministic.values().sum()
    }

    pub fn statistical_violations(&self) -> u64 {
        self.statistical.values().sum()
    }
}

/// Compares `cur` against the exact oracle and, when given, the snapshot
/// `prev` taken one episode earlier.
///
/// `visited` restricts the cheap level to the entries touched this episode;
/// the full level ignores it.
pub fn check_invariants(
    prev: Option<&AgentView<'_>>,
    cur: &AgentView<'_>,
    oracle: &ValueTables,
    level: CheckLevel,
    visited: &[Transition],
) -> InvariantReport {
    let mut report = InvariantReport::default();
    match level {
        CheckLevel::Off => {}
        CheckLevel::Cheap => {
            for t in visited {
                let i = cur.sa_index(t.h, t.s, t.a);
                let j = cur.s_index(t.h, t.s);
                if let Some(prev) = prev {
                    report.det(Q_MONOTONE, cur.q[i] <= prev.q[i]);
                    report.det(V_MONOTONE, cur.v[j] <= prev.v[j]);
                    if let (Some(c), Some(p)) = (&cur.esa, &prev.esa) {
                        report.det(V_LCB_MONOTONE, c.v_lcb[j] >= p.v_lcb[j]);
                    }
                }
                if let Some(esa) = &cur.esa {
                    report.stat(CLOSENESS, (cur.v[j] - esa.v_ref[j]).abs() <= CLOSENESS_BOUND + ORACLE_TOL);
                }
            }
        }
        CheckLevel::Full => full_check(prev, cur, oracle, &mut report),
    }
    report
}

fn full_check(prev: Option<&AgentView<'_>>, cur: &AgentView<'_>, oracle: &ValueTables, report: &mut InvariantReport) {
    let horizon = cur.horizon as f64;
    for h in 0..cur.horizon {
        for s in 0..cur.states {
            let j = cur.s_index(h, s);
            for a in 0..cur.actions {
                let i = cur.sa_index(h, s, a);
                let q = cur.q[i];
                report.det(Q_RANGE, (0.0..=horizon).contains(&q));
                report.stat(OPTIMISM, q >= oracle.q(h, s, a) - ORACLE_TOL);
                if let Some(prev) = prev {
                    report.det(Q_MONOTONE, q <= prev.q[i]);
                }
                if let Some(esa) = &cur.esa {
                    report.det(Q_REF_DOMINATES, esa.q_ref[i] >= q);
                    report.det(Q_LCB_UPPER, esa.q_lcb[i] <= horizon);
                    report.det(JENSEN_REF, esa.sigma_ref[i] - esa.mu_ref[i] * esa.mu_ref[i] >= -ORACLE_TOL);
                    report.det(JENSEN_ADV, esa.sigma_adv[i] - esa.mu_adv[i] * esa.mu_adv[i] >= -ORACLE_TOL);
                    report.stat(PESSIMISM_Q, esa.q_lcb[i] <= oracle.q(h, s, a) + ORACLE_TOL);
                }
            }
            let v = cur.v[j];
            report.det(V_RANGE, (0.0..=horizon).contains(&v));
            if let Some(prev) = prev {
                report.det(V_MONOTONE, v <= prev.v[j]);
            }
            if let Some(esa) = &cur.esa {
                report.det(V_LCB_RANGE, (0.0..=horizon).contains(&esa.v_lcb[j]));
                report.stat(PESSIMISM_V, esa.v_lcb[j] <= oracle.v(h, s) + ORACLE_TOL);
                report.stat(CLOSENESS, (v - esa.v_ref[j]).abs() <= CLOSENESS_BOUND + ORACLE_TOL);
                if let Some(p) = prev.and_then(|p| p.esa.as_ref()) {
                    report.det(V_LCB_MONOTONE, esa.v_lcb[j] >= p.v_lcb[j]);
                    if p.u_ref[j] && !esa.u_ref[j] {
                        report.newly_settled.push((h, s));
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{Agent, EsaAgent, Hyperparams};
    use crate::env_gen::random_mdp;
    use crate::mdp::optimal_values;
    use std::borrow::Cow;

    fn setup() -> (EsaAgent, ValueTables) {
        let mdp = random_mdp(3, 2, 3, 1).unwrap();
        let hp = Hyperparams::new(3, 2, 3, 100, 2.0, 0.05).unwrap();
        (EsaAgent::new(hp), optimal_values(&mdp))
    }

    #[test]
    fn fresh_agent_is_optimistic_and_pessimistic() {
        let (agent, oracle) = setup();
        let view = agent.view();
        let report = check_invariants(Some(&view), &view, &oracle, CheckLevel::Full, &[]);
        assert_eq!(report.deterministic_violations(), 0);
        assert_eq!(report.statistical[OPTIMISM], 0);
        assert_eq!(report.statistical[PESSIMISM_Q], 0);
        assert_eq!(report.statistical[PESSIMISM_V], 0);
        // V = V_ref = H at initialization
        assert_eq!(report.statistical[CLOSENESS], 0);
        assert!(report.newly_settled.is_empty());
    }

    #[test]
    fn injected_q_increase_counts_once() {
        let (agent, oracle) = setup();
        let cur = agent.view();
        // pretend the previous episode had a lower Q at one entry
        let mut prev = cur.clone().into_owned();
        let mut q = prev.q.into_owned();
        q[4] -= 0.5;
        prev.q = Cow::Owned(q);
        let report = check_invariants(Some(&prev), &cur, &oracle, CheckLevel::Full, &[]);
        assert_eq!(report.deterministic[Q_MONOTONE], 1);
        assert_eq!(report.deterministic_violations(), 1, "{report:?}");
    }

    #[test]
    fn cheap_level_only_looks_at_visited_entries() {
        let (agent, oracle) = setup();
        let prev = agent.view().into_owned();
        let mut cur = prev.clone();
        let mut q = cur.q.into_owned();
        q[0] = 100.0;
        cur.q = Cow::Owned(q);
        let elsewhere = Transition {
            h: 2,
            s: 2,
            a: 1,
            r: 0.0,
            s_next: 0,
        };
        let r = check_invariants(Some(&prev), &cur, &oracle, CheckLevel::Cheap, &[elsewhere]);
        assert_eq!(r.deterministic_violations(), 0);
        let here = Transition { h: 0, s: 0, a: 0, ..elsewhere };
        let r = check_invariants(Some(&prev), &cur, &oracle, CheckLevel::Cheap, &[here]);
        assert_eq!(r.deterministic[Q_MONOTONE], 1);
        assert!(check_invariants(Some(&prev), &cur, &oracle, CheckLevel::Off, &[here])
            .deterministic
            .is_empty());
    }

    #[test]
    fn settle_transition_detected() {
        let (agent, oracle) = setup();
        let prev = agent.view().into_owned();
        let mut cur = prev.clone();
        let mut esa = cur.esa.take().unwrap();
        let mut flags = esa.u_ref.into_owned();
        flags[4] = false;
        esa.u_ref = Cow::Owned(flags);
        cur.esa = Some(esa);
        let report = check_invariants(Some(&prev), &cur, &oracle, CheckLevel::Full, &[]);
        assert_eq!(report.newly_settled, vec![(1, 1)]);
    }

    #[test]
    fn closeness_violation_counted_not_failed() {
        let (agent, oracle) = setup();
        let mut cur = agent.view().into_owned();
        let mut esa = cur.esa.take().unwrap();
        let mut v_ref = esa.v_ref.into_owned();
        v_ref[0] = -1.0;
        esa.v_ref = Cow::Owned(v_ref);
        cur.esa = Some(esa);
        let report = check_invariants(None, &cur, &oracle, CheckLevel::Full, &[]);
        assert_eq!(report.statistical[CLOSENESS], 1);
        assert_eq!(report.deterministic_violations(), 0);
    }
}
