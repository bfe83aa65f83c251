//! Q-learning with early-settled reference-advantage updates.
//!
//! Three estimates of `Q*` are kept per `(h, s, a)`:
//!
//! * `q_ucb`: Q-learning with a Hoeffding bonus (optimistic),
//! * `q_lcb`: the mirrored lower-confidence run (pessimistic),
//! * `q_ref`: a reference-advantage estimate whose reference mean uses every
//!   past sample and whose advantage uses the rescaled learning rate.
//!
//! The acting table `q` is the running minimum of `q_ref`, `q_ucb` and its own
//! previous value. The reference `v_ref[h][s]` tracks `v[h][s]` until the
//! optimistic/pessimistic gap `v - v_lcb` first drops to 1 or below, takes
//! one final copy, and is frozen from then on.
//!
//! The bonus increment `delta_ref` is produced and consumed within a single
//! visit, so it is returned from [`update_bonus`] rather than stored; the
//! agent keeps 10 `H*S*A` tables and 4 `H*S` tables.

use std::borrow::Cow;

use super::{row_max, Agent, AgentView, EsaView, Hyperparams, Transition};
use crate::mdp::{argmax_lowest, ValueTables};
use crate::rate::eta_unchecked;

/// `c_b * sqrt(H^3 * iota / n)`.
pub fn hoeffding_bonus(hp: &Hyperparams, n: u64) -> f64 {
    let h = hp.horizon as f64;
    hp.c_b * (h * h * h * hp.iota / n as f64).sqrt()
}

/// `(1 - eta) * q_old + eta * (r + v_next + bonus)`.
#[inline]
pub fn update_ucb_q(q_old: f64, eta: f64, r: f64, v_next: f64, bonus: f64) -> f64 {
    (1.0 - eta) * q_old + eta * (r + v_next + bonus)
}

/// `(1 - eta) * q_old + eta * (r + v_lcb_next - bonus)`. Not clamped.
#[inline]
pub fn update_lcb_q(q_old: f64, eta: f64, r: f64, v_lcb_next: f64, bonus: f64) -> f64 {
    (1.0 - eta) * q_old + eta * (r + v_lcb_next - bonus)
}

/// Running moments of the reference and the advantage at one `(h, s, a)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub mu_ref: f64,
    pub sigma_ref: f64,
    pub mu_adv: f64,
    pub sigma_adv: f64,
}

impl Moments {
    pub fn ref_variance(&self) -> f64 {
        self.sigma_ref - self.mu_ref * self.mu_ref
    }

    pub fn adv_variance(&self) -> f64 {
        self.sigma_adv - self.mu_adv * self.mu_adv
    }
}

/// Folds one sample into the moments.
///
/// The reference pair is an equal-weight running mean / second moment of
/// `v_ref_next`; the advantage pair is `eta`-weighted over
/// `v_next - v_ref_next`.
pub fn update_moments(m: Moments, n: u64, eta: f64, v_next: f64, v_ref_next: f64) -> Moments {
    let w = 1.0 / n as f64;
    let adv = v_next - v_ref_next;
    Moments {
        mu_ref: (1.0 - w) * m.mu_ref + w * v_ref_next,
        sigma_ref: (1.0 - w) * m.sigma_ref + w * v_ref_next * v_ref_next,
        mu_adv: (1.0 - eta) * m.mu_adv + eta * adv,
        sigma_adv: (1.0 - eta) * m.sigma_adv + eta * adv * adv,
    }
}

/// New accumulated bonus and its increment over the previous one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BonusUpdate {
    pub delta_ref: f64,
    pub b_ref: f64,
}

/// `B_next = c_b sqrt(iota/n) (sd_ref + sqrt(H) sd_adv)`; negative variances
/// from rounding are clamped to zero before the square root.
pub fn update_bonus(m: &Moments, b_ref_old: f64, n: u64, hp: &Hyperparams) -> BonusUpdate {
    let sd_ref = m.ref_variance().max(0.0).sqrt();
    let sd_adv = m.adv_variance().max(0.0).sqrt();
    let b_next = hp.c_b * (hp.iota / n as f64).sqrt() * (sd_ref + (hp.horizon as f64).sqrt() * sd_adv);
    BonusUpdate {
        delta_ref: b_next - b_ref_old,
        b_ref: b_next,
    }
}

/// `b^R = B + (1 - eta) delta / eta + c_b H^2 iota / n^(3/4)`.
pub fn advantage_bonus(bonus: &BonusUpdate, eta: f64, n: u64, hp: &Hyperparams) -> f64 {
    let h = hp.horizon as f64;
    bonus.b_ref + (1.0 - eta) * bonus.delta_ref / eta + hp.c_b * h * h * hp.iota / (n as f64).powf(0.75)
}

/// `(1 - eta) q_ref_old + eta (r + v_next - v_ref_next + mu_ref + b_adv)`.
#[inline]
pub fn update_ucb_q_advantage(
    q_ref_old: f64,
    eta: f64,
    r: f64,
    v_next: f64,
    v_ref_next: f64,
    mu_ref: f64,
    b_adv: f64,
) -> f64 {
    (1.0 - eta) * q_ref_old + eta * (r + v_next - v_ref_next + mu_ref + b_adv)
}

/// Which reference branch a step took.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefUpdate {
    /// Gap still above 1: reference follows `v`, flag raised.
    Track,
    /// First visit with gap at most 1: last copy, flag lowered.
    Settle,
    /// Already settled: reference untouched.
    Frozen,
}

/// Intermediate values of one `esa_step`, exposed for tests and tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub n: u64,
    pub eta: f64,
    pub bonus: BonusUpdate,
    pub b_adv: f64,
    pub reference: RefUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsaAgent {
    hp: Hyperparams,
    // [h][s][a]
    q: Vec<f64>,
    q_ucb: Vec<f64>,
    q_lcb: Vec<f64>,
    q_ref: Vec<f64>,
    visits: Vec<u64>,
    mu_ref: Vec<f64>,
    sigma_ref: Vec<f64>,
    mu_adv: Vec<f64>,
    sigma_adv: Vec<f64>,
    b_ref: Vec<f64>,
    // [h][s]
    v: Vec<f64>,
    v_lcb: Vec<f64>,
    v_ref: Vec<f64>,
    u_ref: Vec<bool>,
}

impl EsaAgent {
    pub fn new(hp: Hyperparams) -> Self {
        let h = hp.horizon as f64;
        let (hsa, hs) = (hp.hsa(), hp.hs());
        Self {
            hp,
            q: vec![h; hsa],
            q_ucb: vec![h; hsa],
            q_lcb: vec![0.0; hsa],
            q_ref: vec![h; hsa],
            visits: vec![0; hsa],
            mu_ref: vec![0.0; hsa],
            sigma_ref: vec![0.0; hsa],
            mu_adv: vec![0.0; hsa],
            sigma_adv: vec![0.0; hsa],
            b_ref: vec![0.0; hsa],
            v: vec![h; hs],
            v_lcb: vec![0.0; hs],
            v_ref: vec![h; hs],
            u_ref: vec![true; hs],
        }
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    /// Name and entry count of every persistent table.
    pub fn table_shapes(&self) -> Vec<(&'static str, usize)> {
        vec![
            ("q", self.q.len()),
            ("q_ucb", self.q_ucb.len()),
            ("q_lcb", self.q_lcb.len()),
            ("q_ref", self.q_ref.len()),
            ("visits", self.visits.len()),
            ("mu_ref", self.mu_ref.len()),
            ("sigma_ref", self.sigma_ref.len()),
            ("mu_adv", self.mu_adv.len()),
            ("sigma_adv", self.sigma_adv.len()),
            ("b_ref", self.b_ref.len()),
            ("v", self.v.len()),
            ("v_lcb", self.v_lcb.len()),
            ("v_ref", self.v_ref.len()),
            ("u_ref", self.u_ref.len()),
        ]
    }

    pub fn table_entries(&self) -> usize {
        self.table_shapes().iter().map(|(_, n)| n).sum()
    }

    #[inline]
    fn sa(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.hp.states + s) * self.hp.actions + a
    }

    #[inline]
    fn si(&self, h: usize, s: usize) -> usize {
        h * self.hp.states + s
    }

    pub fn q(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q[self.sa(h, s, a)]
    }

    pub fn q_ucb(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q_ucb[self.sa(h, s, a)]
    }

    pub fn q_lcb(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q_lcb[self.sa(h, s, a)]
    }

    pub fn q_ref(&self, h: usize, s: usize, a: usize) -> f64 {
        self.q_ref[self.sa(h, s, a)]
    }

    pub fn visits(&self, h: usize, s: usize, a: usize) -> u64 {
        self.visits[self.sa(h, s, a)]
    }

    pub fn moments(&self, h: usize, s: usize, a: usize) -> Moments {
        let i = self.sa(h, s, a);
        Moments {
            mu_ref: self.mu_ref[i],
            sigma_ref: self.sigma_ref[i],
            mu_adv: self.mu_adv[i],
            sigma_adv: self.sigma_adv[i],
        }
    }

    pub fn b_ref(&self, h: usize, s: usize, a: usize) -> f64 {
        self.b_ref[self.sa(h, s, a)]
    }

    pub fn v(&self, h: usize, s: usize) -> f64 {
        self.v[self.si(h, s)]
    }

    pub fn v_lcb(&self, h: usize, s: usize) -> f64 {
        self.v_lcb[self.si(h, s)]
    }

    pub fn v_ref(&self, h: usize, s: usize) -> f64 {
        self.v_ref[self.si(h, s)]
    }

    pub fn u_ref(&self, h: usize, s: usize) -> bool {
        self.u_ref[self.si(h, s)]
    }

    /// `(V, V_lcb, V_ref)` at step `h + 1`, all zero past the horizon.
    fn next_values(&self, h: usize, s_next: usize) -> (f64, f64, f64) {
        if h + 1 >= self.hp.horizon {
            (0.0, 0.0, 0.0)
        } else {
            let j = self.si(h + 1, s_next);
            (self.v[j], self.v_lcb[j], self.v_ref[j])
        }
    }

    /// Applies one observed transition in the fixed order: counter, UCB and
    /// LCB runs, moments, bonus, reference-advantage estimate, min-combine,
    /// value refresh, reference update.
    pub fn esa_step(&mut self, t: &Transition) -> StepOutcome {
        let hp = self.hp;
        let i = self.sa(t.h, t.s, t.a);
        let j = self.si(t.h, t.s);
        let (v_next, v_lcb_next, v_ref_next) = self.next_values(t.h, t.s_next);

        self.visits[i] += 1;
        let n = self.visits[i];
        let eta = eta_unchecked(n, hp.horizon);

        let bonus_h = hoeffding_bonus(&hp, n);
        self.q_ucb[i] = update_ucb_q(self.q_ucb[i], eta, t.r, v_next, bonus_h);
        self.q_lcb[i] = update_lcb_q(self.q_lcb[i], eta, t.r, v_lcb_next, bonus_h);

        let m = update_moments(self.moments(t.h, t.s, t.a), n, eta, v_next, v_ref_next);
        self.mu_ref[i] = m.mu_ref;
        self.sigma_ref[i] = m.sigma_ref;
        self.mu_adv[i] = m.mu_adv;
        self.sigma_adv[i] = m.sigma_adv;
        let bonus = update_bonus(&m, self.b_ref[i], n, &hp);
        self.b_ref[i] = bonus.b_ref;
        let b_adv = advantage_bonus(&bonus, eta, n, &hp);
        self.q_ref[i] = update_ucb_q_advantage(self.q_ref[i], eta, t.r, v_next, v_ref_next, m.mu_ref, b_adv);

        self.q[i] = self.q_ref[i].min(self.q_ucb[i]).min(self.q[i]);

        let row = self.sa(t.h, t.s, 0)..self.sa(t.h, t.s, 0) + hp.actions;
        self.v[j] = row_max(&self.q[row.clone()]);
        self.v_lcb[j] = row_max(&self.q_lcb[row]).max(self.v_lcb[j]);

        let reference = if self.v[j] - self.v_lcb[j] > 1.0 {
            self.v_ref[j] = self.v[j];
            self.u_ref[j] = true;
            RefUpdate::Track
        } else if self.u_ref[j] {
            self.v_ref[j] = self.v[j];
            self.u_ref[j] = false;
            RefUpdate::Settle
        } else {
            RefUpdate::Frozen
        };

        StepOutcome {
            n,
            eta,
            bonus,
            b_adv,
            reference,
        }
    }
}

impl Agent for EsaAgent {
    fn name(&self) -> &'static str {
        "esa"
    }

    fn act(&self, h: usize, s: usize) -> usize {
        let start = self.sa(h, s, 0);
        argmax_lowest(&self.q[start..start + self.hp.actions])
    }

    fn observe(&mut self, t: &Transition) {
        self.esa_step(t);
    }

    fn view(&self) -> AgentView<'_> {
        AgentView {
            states: self.hp.states,
            actions: self.hp.actions,
            horizon: self.hp.horizon,
            q: Cow::Borrowed(&self.q),
            v: Cow::Borrowed(&self.v),
            esa: Some(EsaView {
                q_ucb: Cow::Borrowed(&self.q_ucb),
                q_lcb: Cow::Borrowed(&self.q_lcb),
                q_ref: Cow::Borrowed(&self.q_ref),
                visits: Cow::Borrowed(&self.visits),
                mu_ref: Cow::Borrowed(&self.mu_ref),
                sigma_ref: Cow::Borrowed(&self.sigma_ref),
                mu_adv: Cow::Borrowed(&self.mu_adv),
                sigma_adv: Cow::Borrowed(&self.sigma_adv),
                b_ref: Cow::Borrowed(&self.b_ref),
                v_lcb: Cow::Borrowed(&self.v_lcb),
                v_ref: Cow::Borrowed(&self.v_ref),
                u_ref: Cow::Borrowed(&self.u_ref),
            }),
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
