//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any fails.

mod common;

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use esa_rl::agents::{
    advantage_bonus, hoeffding_bonus, update_bonus, update_lcb_q, update_moments, update_ucb_q,
    update_ucb_q_advantage, Algorithm, BonusUpdate, EsaAgent, Hyperparams, Moments, DEFAULT_CB, DEFAULT_DELTA,
};
use esa_rl::config::EnvSource;
use esa_rl::env_gen::GeneratorSpec;
use esa_rl::harness::invariants::{CLOSENESS, OPTIMISM, PESSIMISM_Q, PESSIMISM_V, SETTLE_ONCE};
use esa_rl::harness::{
    fit_regret_exponent, run_experiment, sweep_with_threads, CheckLevel, ExperimentSpec, HpPoint, InitStateSchedule,
    SweepGrid,
};
use esa_rl::mdp::optimal_values;
use esa_rl::rate::{eta, eta_seq_row, rate_property_suite, SUITE_HORIZONS};
use esa_rl::rng::RunRng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn within_budget(elapsed: Duration, budget_secs: f64) -> bool {
    elapsed.as_secs_f64() < budget_secs
}

fn rate_suite() -> Outcome {
    let started = Instant::now();
    let report = rate_property_suite(&SUITE_HORIZONS, 1000, 5000, 1e-9);
    let row = eta_seq_row(3, 1);
    let expected = [1.0 / 6.0, 1.0 / 3.0, 0.5];
    let spot_row = row.iter().zip(expected).all(|(x, y)| (x - y).abs() <= 1e-12);
    let weighted: f64 = row.iter().enumerate().map(|(i, w)| w / (i + 1) as f64).sum();
    let spot_weighted = (weighted - 0.5).abs() <= 1e-12;
    let elapsed = started.elapsed();
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.passed())
        .map(|c| c.name.as_str())
        .collect();
    outcome(
        report.passed() && spot_row && spot_weighted && within_budget(elapsed, 2.0),
        format!(
            "{} properties over H in {:?}, N <= 1000; failing: {failed:?}; H=1,N=3 row {row:?}, weighted sum {weighted}; {:.2}s (budget 2s)",
            report.checks.len(),
            report.horizons,
            elapsed.as_secs_f64()
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let mut dims = RunRng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let (s, a, h) = (1 + dims.below(3), 1 + dims.below(2), 1 + dims.below(3));
        let mdp = GeneratorSpec::random(s, a, h, case).build().unwrap();
        let opt = optimal_values(&mdp);
        let (q, v) = common::brute_force_optimal(&mdp);
        for (x, y) in opt.q.iter().zip(&q).chain(opt.v.iter().zip(&v)) {
            worst = worst.max((x - y).abs());
        }
    }
    let elapsed = started.elapsed();
    outcome(
        worst <= 1e-10 && within_budget(elapsed, 10.0),
        format!(
            "200 MDPs (S<=3, A<=2, H<=3), worst |solver - brute force| = {worst:e}; {:.2}s (budget 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn esa_spec(s: usize, a: usize, h: usize, episodes: u64, seed: u64, level: CheckLevel) -> ExperimentSpec {
    ExperimentSpec {
        algorithm: Algorithm::Esa,
        hyperparams: Hyperparams::new(s, a, h, episodes, DEFAULT_CB, DEFAULT_DELTA).unwrap(),
        schedule: InitStateSchedule::default(),
        seed,
        check_level: level,
        monotone: true,
    }
}

fn deterministic_invariants() -> Outcome {
    let started = Instant::now();
    let mdp = GeneratorSpec::random(4, 3, 4, 0).build().unwrap();
    let record = run_experiment(&mdp, &esa_spec(4, 3, 4, 20_000, 0, CheckLevel::Full)).unwrap();
    let elapsed = started.elapsed();
    let inv = &record.invariants;
    let settle_checked = inv.deterministic.contains_key(SETTLE_ONCE);
    outcome(
        inv.hard_failures() == 0 && settle_checked && within_budget(elapsed, 60.0),
        format!(
            "K=20000, {} snapshots checked, violations {:?}; {:.1}s (budget 60s)",
            inv.checks,
            inv.deterministic,
            elapsed.as_secs_f64()
        ),
    )
}

fn statistical_invariants() -> Outcome {
    let started = Instant::now();
    let mdp = GeneratorSpec::random(3, 2, 3, 0).build().unwrap();
    let seeds = 50u64;
    let mut clean = 0u64;
    let mut totals = [0u64; 4];
    for seed in 0..seeds {
        let record = run_experiment(&mdp, &esa_spec(3, 2, 3, 5000, seed, CheckLevel::Full)).unwrap();
        let inv = &record.invariants;
        let counts = [
            inv.statistical_count(OPTIMISM),
            inv.statistical_count(PESSIMISM_Q),
            inv.statistical_count(CLOSENESS),
            inv.statistical_count(PESSIMISM_V),
        ];
        for (t, c) in totals.iter_mut().zip(counts) {
            *t += c;
        }
        if counts[..3].iter().all(|&c| c == 0) {
            clean += 1;
        }
    }
    let elapsed = started.elapsed();
    let fraction = clean as f64 / seeds as f64;
    outcome(
        fraction >= 0.9 && within_budget(elapsed, 300.0),
        format!(
            "{clean}/{seeds} seeds clean ({:.0}%, need 90%); total violations optimism {} pessimism_q {} closeness {} (pessimism_v {}, not gated); {:.1}s (budget 300s)",
            100.0 * fraction,
            totals[0],
            totals[1],
            totals[2],
            totals[3],
            elapsed.as_secs_f64()
        ),
    )
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn regret_shape() -> Outcome {
    let started = Instant::now();
    let (s, a, h, k) = (5, 4, 5, 100_000u64);
    let grid = SweepGrid {
        envs: vec![EnvSource::Generator(GeneratorSpec::random(s, a, h, 0))],
        algorithms: vec![Algorithm::Esa, Algorithm::UcbQ],
        hp_grid: vec![HpPoint {
            c_b: DEFAULT_CB,
            delta: DEFAULT_DELTA,
        }],
        seeds: (0..5).collect(),
        episodes: k,
        schedule: InitStateSchedule::default(),
        check_level: CheckLevel::Off,
        monotone: true,
    };
    let cells = sweep_with_threads(&grid, None).unwrap();
    let elapsed = started.elapsed();
    let mut slopes = Vec::new();
    let mut esa_final = Vec::new();
    let mut ucb_final = Vec::new();
    for cell in &cells {
        let record = cell.result.as_ref().unwrap();
        match cell.cell.algorithm {
            Algorithm::Esa => {
                let fit = fit_regret_exponent(&record.cumulative_regret, 0.5).unwrap();
                slopes.push(fit.slope().unwrap_or(0.0));
                esa_final.push(record.final_regret());
            }
            Algorithm::UcbQ => ucb_final.push(record.final_regret()),
        }
    }
    let slope = median(slopes.clone());
    let bound = 0.2 * (k * h as u64) as f64;
    let worst_final = esa_final.iter().copied().fold(0.0, f64::max);
    let ratio = median(esa_final.clone()) / median(ucb_final.clone());
    outcome(
        (0.30..=0.80).contains(&slope) && worst_final < bound && within_budget(elapsed, 600.0),
        format!(
            "median slope {slope:.4} (need [0.30, 0.80]; per seed {slopes:.4?}); max final regret {worst_final:.1} (need < {bound}); \
             ESA/UCB-Q median final-regret ratio {ratio:.3} (reported only); {:.1}s (budget 600s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn space_audit() -> Outcome {
    let mut lines = Vec::new();
    let mut passed = true;
    for (s, a, h) in [(2, 3, 4), (5, 4, 5), (7, 2, 3)] {
        let agent = EsaAgent::new(Hyperparams::new(s, a, h, 1, DEFAULT_CB, DEFAULT_DELTA).unwrap());
        let shapes = agent.table_shapes();
        let hsa = shapes.iter().filter(|(_, n)| *n == h * s * a).count();
        let hs = shapes.iter().filter(|(_, n)| *n == h * s).count();
        let total = agent.table_entries();
        let ok = hsa == 10 && hs == 4 && shapes.len() == 14 && total == 10 * h * s * a + 4 * h * s;
        passed &= ok;
        lines.push(format!("(S={s},A={a},H={h}): {hsa} HSA + {hs} HS tables, {total} entries"));
    }
    outcome(passed, lines.join("; "))
}

fn cli_round_trip() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_esa-rl");
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.success();
    let base = [
        "run", "--algo", "esa", "--env", "chain", "--S", "5", "--H", "5", "--episodes", "1000", "--seed", "7",
    ];
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    let ok_a = run(&[&base[..], &["--out", a.to_str().unwrap()]].concat());
    let ok_b = run(&[&base[..], &["--out", b.to_str().unwrap()]].concat());
    let summary = a.join("summary.json");
    let ok_c = run(&["run", "--config", summary.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    let read = |d: &std::path::Path| fs::read(d.join("regret.csv")).unwrap_or_default();
    let identical = ok_a && ok_b && !read(&a).is_empty() && read(&a) == read(&b);
    let reproduced = ok_c && read(&a) == read(&c);
    outcome(
        identical && reproduced,
        format!("identical CSV bytes across runs: {identical}; config echo reproduces run: {reproduced}"),
    )
}

fn unit_oracles() -> Outcome {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12;
    let mut failures = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if !close(got, want) {
            failures.push(format!("{name}: got {got}, want {want}"));
        }
    };

    let hp = Hyperparams::new(1, 1, 2, 1, 2.0, 0.05).unwrap().with_iota(4.0).unwrap();
    let e2 = eta(2, 2).unwrap();
    check("eta_2 (H=2)", e2, 0.75);
    let bonus = hoeffding_bonus(&hp, 2);
    check("Hoeffding bonus", bonus, 8.0);
    check("UCB update", update_ucb_q(4.0, e2, 1.0, 2.0, bonus), 9.25);
    check("LCB update", update_lcb_q(0.0, e2, 1.0, 2.0, bonus), -3.75);

    let unit = Hyperparams::new(1, 1, 2, 1, 1.0, 0.05).unwrap().with_iota(1.0).unwrap();
    let m = Moments {
        sigma_ref: 4.0,
        ..Moments::default()
    };
    let b = update_bonus(&m, 0.0, 1, &unit);
    check("B_next", b.b_ref, 2.0);
    check("delta_ref", b.delta_ref, 2.0);

    let fresh = BonusUpdate::default();
    let b_adv = advantage_bonus(&fresh, 1.0, 1, &unit);
    check("b^R at n=1", b_adv, 4.0);
    let moments = update_moments(Moments::default(), 1, 1.0, 2.0, 2.0);
    check("mu_ref after first visit", moments.mu_ref, 2.0);
    let q_ref = update_ucb_q_advantage(2.0, 1.0, 0.5, 2.0, 2.0, moments.mu_ref, b_adv);
    check("Q_ref chain", q_ref, 6.5);
    check("min-combine", q_ref.min(5.32843).min(2.0), 2.0);

    outcome(failures.is_empty(), if failures.is_empty() { "all hand-worked values within 1e-12".to_string() } else { failures.join("; ") })
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("learning-rate weight suite", rate_suite),
        ("solver vs brute-force oracle", oracle_equivalence),
        ("deterministic invariants under full checks", deterministic_invariants),
        ("optimism / pessimism / closeness across seeds", statistical_invariants),
        ("sublinear regret shape", regret_shape),
        ("table footprint", space_audit),
        ("CLI determinism and config round-trip", cli_round_trip),
        ("hand-worked update values", unit_oracles),
    ];
    let mut all = true;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        all &= o.passed;
        println!("{} [{}] {name}: {}", if o.passed { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if all {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
