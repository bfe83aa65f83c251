//! Brute-force reference values, independent of the backward-induction solver.
#![allow(dead_code)]

use esa_rl::mdp::TabularMdp;

/// `V^pi_h(s)` by expanding every trajectory below `(h, s)`.
pub fn rollout_value(mdp: &TabularMdp, policy: &[usize], h: usize, s: usize) -> f64 {
    if h == mdp.horizon() {
        return 0.0;
    }
    let a = policy[h * mdp.states() + s];
    q_under(mdp, policy, h, s, a)
}

fn q_under(mdp: &TabularMdp, policy: &[usize], h: usize, s: usize, a: usize) -> f64 {
    let mut total = mdp.reward(h, s, a);
    for (next, &p) in mdp.row(h, s, a).iter().enumerate() {
        if p > 0.0 {
            total += p * rollout_value(mdp, policy, h + 1, next);
        }
    }
    total
}

/// Every deterministic policy as a flat `[h][s]` action table.
pub fn all_policies(mdp: &TabularMdp) -> Vec<Vec<usize>> {
    let cells = mdp.horizon() * mdp.states();
    let na = mdp.actions();
    let count = na.pow(cells as u32);
    (0..count)
        .map(|mut code| {
            (0..cells)
                .map(|_| {
                    let a = code % na;
                    code /= na;
                    a
                })
                .collect()
        })
        .collect()
}

/// `(Q*, V*)` as flat `[h][s][a]` / `[h][s]` tables, maximizing over every
/// deterministic policy entrywise.
pub fn brute_force_optimal(mdp: &TabularMdp) -> (Vec<f64>, Vec<f64>) {
    let (ns, na, nh) = (mdp.states(), mdp.actions(), mdp.horizon());
    let policies = all_policies(mdp);
    let mut q = vec![f64::NEG_INFINITY; nh * ns * na];
    let mut v = vec![f64::NEG_INFINITY; nh * ns];
    for pi in &policies {
        for h in 0..nh {
            for s in 0..ns {
                let idx = h * ns + s;
                v[idx] = v[idx].max(rollout_value(mdp, pi, h, s));
                for a in 0..na {
                    let qi = idx * na + a;
                    q[qi] = q[qi].max(q_under(mdp, pi, h, s, a));
                }
            }
        }
    }
    (q, v)
}
