//! Q-learning with a Hoeffding exploration bonus (UCB-Q baseline).

use std::borrow::Cow;

use super::esa::{hoeffding_bonus, update_ucb_q};
use super::{row_max, Agent, AgentView, Hyperparams, Transition};
use crate::mdp::{argmax_lowest, ValueTables};
use crate::rate::eta_unchecked;

/// Keeps only `Q`, `V` and visit counts.
///
/// With `monotone` set (the default), each update is min-combined with the
/// previous `Q` entry so `Q` and `V` never increase; without it the raw
/// convex-combination update is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbQAgent {
    hp: Hyperparams,
    monotone: bool,
    q: Vec<f64>,
    v: Vec<f64>,
    visits: Vec<u64>,
}

impl UcbQAgent {
    pub fn new(hp: Hyperparams, monotone: bool) -> Self {
        let h = hp.horizon as f64;
        Self {
            hp,
            monotone,
            q: vec![h; hp.hsa()],
            v: vec![h; hp.hs()],
            visits: vec![0; hp.hsa()],
        }
    }

    pub fn monotone(&self) -> bool {
        self.monotone
    }

    #[inline]
    fn sa(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.hp.states + s) * self.hp.actions + a
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.sa(h, s, a)]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.hp.states + s]
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.sa(h, s, a)]
    }

    pub fn ucbq_step(&mut self, t: &Transition) -> f64 {
        let i = self.sa(t.h, t.s, t.a);
        let v_next = if t.h + 1 >= self.hp.horizon {
            0.0
        } else {
            self.v[(t.h + 1) * self.hp.states + t.s_next]
        };
        self.visits[i] += 1;
        let n = self.visits[i];
        let eta = eta_unchecked(n, self.hp.horizon);
        let updated = update_ucb_q(self.q[i], eta, t.r, v_next, hoeffding_bonus(&self.hp, n));
        self.q[i] = if self.monotone { updated.min(self.q[i]) } else { updated };
        let start = self.sa(t.h, t.s, 0);
        self.v[t.h * self.hp.states + t.s] = row_max(&self.q[start..start + self.hp.actions]);
        self.q[i]
    }
}

impl Agent for UcbQAgent {
    fn name(&self) -> &'static str {
        "ucb-q"
    }

    fn act(&self, h: usize, s: usize) -> usize {
        let start = self.sa(h, s, 0);
        argmax_lowest(&self.q[start..start + self.hp.actions])
    }

    fn observe(&mut self, t: &Transition) {
        self.ucbq_step(t);
    }

    fn view(&self) -> AgentView<'_> {
        AgentView {
            states: self.hp.states,
            actions: self.hp.actions,
            horizon: self.hp.horizon,
            q: Cow::Borrowed(&self.q),
            v: Cow::Borrowed(&self.v),
            esa: None,
        }
    }

    fn seed_q(&mut self, q: &ValueTables) {
        assert_eq!(q.q.len(), self.q.len(), "seeded Q has the wrong shape");
        self.q.copy_from_slice(&q.q);
        for (v, row) in self.v.iter_mut().zip(self.q.chunks(self.hp.actions)) {
            *v = row_max(row);
        }
    }
}
