//! `esa-rl` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when an
//! invariant hard-fails (`verify`, or `run` with `--check-level full|cheap`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agents::{Algorithm, Hyperparams};
use crate::config::{EnvSource, RunConfig};
use crate::env_gen::{GeneratorKind, GeneratorSpec};
use crate::harness::io::{read_regret_csv, write_regret_csv, RunSummary};
use crate::harness::{run_experiment, sweep, CheckLevel, ExperimentSpec, HpPoint, InitStateSchedule, SweepGrid};
use crate::plot::regret_svg;
use crate::rate::{rate_property_suite, RateSuiteReport, SUITE_HORIZONS};
use crate::rng::RunRng;

const DEFAULT_SLIP: f64 = 0.1;
const DEFAULT_GAP: f64 = 0.25;
const DEFAULT_EPISODES: u64 = 1000;
const RATE_TAIL_N_MAX: u64 = 5000;
const RATE_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "esa-rl", version, about = "Tabular episodic Q-learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one experiment and write regret.csv and summary.json.
    Run(RunArgs),
    /// Run the product of algorithms, hyperparameters and seeds.
    Sweep(SweepArgs),
    /// Check the learning-rate weight bounds and fuzz the learners' invariants.
    Verify(VerifyArgs),
    /// Write a generated MDP as JSON.
    Gen(GenArgs),
    /// Render a regret CSV as an SVG line chart.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Random,
    Chain,
    Needle,
}

#[derive(Debug, Args)]
struct EnvArgs {
    /// Generator family.
    #[arg(long = "env", value_enum)]
    kind: Option<EnvKind>,
    /// Load the MDP from a JSON file instead of generating one.
    #[arg(long, conflicts_with = "kind")]
    mdp_file: Option<PathBuf>,
    #[arg(long = "S")]
    states: Option<usize>,
    #[arg(long = "A")]
    actions: Option<usize>,
    #[arg(long = "H")]
    horizon: Option<usize>,
    /// Generator seed (distinct from the run seed).
    #[arg(long)]
    env_seed: Option<u64>,
    /// Chain slip probability.
    #[arg(long)]
    slip: Option<f64>,
    /// Needle reward gap.
    #[arg(long)]
    gap: Option<f64>,
    /// Per-step kernel perturbation weight.
    #[arg(long)]
    perturb: Option<f64>,
}

impl EnvArgs {
    fn touches_generator(&self) -> bool {
        self.kind.is_some()
            || self.states.is_some()
            || self.actions.is_some()
            || self.horizon.is_some()
            || self.env_seed.is_some()
            || self.slip.is_some()
            || self.gap.is_some()
            || self.perturb.is_some()
    }

    /// Applies these flags on top of `base`.
    fn resolve(&self, base: Option<EnvSource>) -> Result<EnvSource, String> {
        if let Some(path) = &self.mdp_file {
            if self.touches_generator() {
                return Err("--mdp-file cannot be combined with generator flags".into());
            }
            return Ok(EnvSource::MdpFile(path.clone()));
        }
        if !self.touches_generator() {
            return Ok(base.unwrap_or_else(|| EnvSource::Generator(default_generator())));
        }
        let mut spec = match base {
            Some(EnvSource::Generator(spec)) => spec,
            Some(_) if self.kind.is_none() => {
                return Err("generator flags need --env when the configured environment is not generated".into())
            }
            _ => default_generator(),
        };
        let kind = self.kind.unwrap_or(match spec.kind {
            GeneratorKind::Random => EnvKind::Random,
            GeneratorKind::Chain { .. } => EnvKind::Chain,
            GeneratorKind::Needle { .. } => EnvKind::Needle,
        });
        spec.kind = match (kind, spec.kind) {
            (EnvKind::Random, _) => GeneratorKind::Random,
            (EnvKind::Chain, GeneratorKind::Chain { slip }) => GeneratorKind::Chain {
                slip: self.slip.unwrap_or(slip),
            },
            (EnvKind::Chain, _) => {
                spec.actions = 2;
                GeneratorKind::Chain {
                    slip: self.slip.unwrap_or(DEFAULT_SLIP),
                }
            }
            (EnvKind::Needle, GeneratorKind::Needle { gap }) => GeneratorKind::Needle {
                gap: self.gap.unwrap_or(gap),
            },
            (EnvKind::Needle, _) => GeneratorKind::Needle {
                gap: self.gap.unwrap_or(DEFAULT_GAP),
            },
        };
        if let Some(s) = self.states {
            spec.states = s;
        }
        if let Some(a) = self.actions {
            spec.actions = a;
        }
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(seed) = self.env_seed {
            spec.seed = seed;
        }
        if let Some(p) = self.perturb {
            spec.perturb = p;
        }
        spec.validate().map_err(|e| e.to_string())?;
        Ok(EnvSource::Generator(spec))
    }
}

fn default_generator() -> GeneratorSpec {
    GeneratorSpec::random(5, 2, 5, 0)
}

#[derive(Debug, Args)]
struct RunArgs {
    /// JSON run config (or a summary.json); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "algo")]
    algorithm: Option<Algorithm>,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cb: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// fixed[:state] | round-robin | seeded-random
    #[arg(long)]
    schedule: Option<InitStateSchedule>,
    /// off | cheap | full
    #[arg(long)]
    check_level: Option<CheckLevel>,
    /// Drop the min with the previous Q in the UCB-Q baseline.
    #[arg(long)]
    no_monotone: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeatable; defaults to both algorithms.
    #[arg(long = "algo")]
    algorithms: Vec<Algorithm>,
    #[command(flatten)]
    env: EnvArgs,
    #[arg(long)]
    episodes: Option<u64>,
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Repeatable.
    #[arg(long = "cb")]
    cbs: Vec<f64>,
    /// Repeatable.
    #[arg(long = "delta")]
    deltas: Vec<f64>,
    #[arg(long)]
    schedule: Option<InitStateSchedule>,
    #[arg(long)]
    check_level: Option<CheckLevel>,
    #[arg(long)]
    no_monotone: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run the learning-rate weight suite.
    #[arg(long)]
    rate_suite: bool,
    /// Largest visit count N in the weight suite.
    #[arg(long = "Nmax", default_value_t = 1000)]
    n_max: u64,
    /// Fuzz both learners on small random MDPs with full invariant checks.
    #[arg(long)]
    invariant_fuzz: bool,
    #[arg(long, default_value_t = 20)]
    fuzz_cases: u64,
    #[arg(long, default_value_t = 300)]
    fuzz_episodes: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    env: EnvArgs,
    /// Generator seed; same as --env-seed.
    #[arg(long, conflicts_with = "env_seed")]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// Defaults to the CSV path with an .svg extension.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    loglog: bool,
}

/// Failure carrying the process exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

fn config_error(msg: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        msg: msg.to_string(),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// exit code.
pub fn main<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Plot(a) => cmd_plot(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn load_base(path: Option<&Path>) -> Result<Option<RunConfig>, Failure> {
    path.map(RunConfig::load).transpose().map_err(config_error)
}

fn build_run_config(a: &RunArgs) -> Result<RunConfig, Failure> {
    let base = load_base(a.config.as_deref())?;
    let env = a.env.resolve(base.as_ref().map(|c| c.env.clone())).map_err(config_error)?;
    let mut cfg = match base {
        Some(cfg) => RunConfig { env, ..cfg },
        None => RunConfig {
            algorithm: Algorithm::Esa,
            env,
            episodes: DEFAULT_EPISODES,
            seeds: vec![0],
            c_b: crate::agents::DEFAULT_CB,
            delta: crate::agents::DEFAULT_DELTA,
            schedule: InitStateSchedule::default(),
            check_level: CheckLevel::Off,
            monotone: true,
            out: None,
        },
    };
    if let Some(alg) = a.algorithm {
        cfg.algorithm = alg;
    }
    if let Some(k) = a.episodes {
        cfg.episodes = k;
    }
    if let Some(seed) = a.seed {
        cfg.seeds = vec![seed];
    }
    if let Some(cb) = a.cb {
        cfg.c_b = cb;
    }
    if let Some(delta) = a.delta {
        cfg.delta = delta;
    }
    if let Some(schedule) = a.schedule {
        cfg.schedule = schedule;
    }
    if let Some(level) = a.check_level {
        cfg.check_level = level;
    }
    if a.no_monotone {
        cfg.monotone = false;
    }
    if let Some(out) = &a.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<(), Failure> {
    let cfg = build_run_config(&a)?;
    let seed = match cfg.seeds.as_slice() {
        [seed] => *seed,
        other => {
            return Err(config_error(format!(
                "run takes exactly one seed, got {}; use `sweep` for several",
                other.len()
            )))
        }
    };
    let out = cfg.out.clone().ok_or_else(|| config_error("missing --out directory"))?;
    let mdp = cfg.env.load().map_err(config_error)?;
    let spec = cfg.experiment(&mdp, seed).map_err(config_error)?;
    let record = run_experiment(&mdp, &spec).map_err(config_error)?;

    fs::create_dir_all(&out).map_err(|e| config_error(format!("creating {}: {e}", out.display())))?;
    write_regret_csv(out.join("regret.csv"), &record).map_err(config_error)?;
    let summary = RunSummary::new(cfg, &record);
    summary.write(out.join("summary.json")).map_err(config_error)?;

    let slope = summary
        .fitted_slope
        .map_or_else(|| "n/a".to_string(), |s| format!("{s:.4}"));
    println!(
        "{} episodes, final cumulative regret {:.6}, fitted slope {slope}",
        summary.episodes, summary.final_cumulative_regret
    );
    let hard = record.invariants.hard_failures();
    if hard > 0 {
        return Err(Failure {
            code: 2,
            msg: format!("{hard} invariant violations: {:?}", record.invariants.deterministic),
        });
    }
    Ok(())
}

const SWEEP_HEADER: &str =
    "cell,env,algorithm,c_b,delta,seed,episodes,final_cum_regret,fitted_slope,hard_failures,statistical_failures,error";

fn cmd_sweep(a: SweepArgs) -> Result<(), Failure> {
    let base = load_base(a.config.as_deref())?;
    let env = a.env.resolve(base.as_ref().map(|c| c.env.clone())).map_err(config_error)?;
    let pick = |v: &[f64], fallback: f64| if v.is_empty() { vec![fallback] } else { v.to_vec() };
    let (cb0, delta0) = base
        .as_ref()
        .map_or((crate::agents::DEFAULT_CB, crate::agents::DEFAULT_DELTA), |c| (c.c_b, c.delta));
    let mut hp_grid = Vec::new();
    for c_b in pick(&a.cbs, cb0) {
        for delta in pick(&a.deltas, delta0) {
            hp_grid.push(HpPoint { c_b, delta });
        }
    }
    let algorithms = match (&a.algorithms[..], &base) {
        ([], Some(cfg)) => vec![cfg.algorithm],
        ([], None) => vec![Algorithm::Esa, Algorithm::UcbQ],
        (algs, _) => algs.to_vec(),
    };
    let seeds = match (&a.seeds[..], &base) {
        ([], Some(cfg)) => cfg.seeds.clone(),
        ([], None) => vec![0],
        (seeds, _) => seeds.to_vec(),
    };
    let grid = SweepGrid {
        envs: vec![env],
        algorithms,
        hp_grid,
        seeds,
        episodes: a.episodes.or(base.as_ref().map(|c| c.episodes)).unwrap_or(DEFAULT_EPISODES),
        schedule: a.schedule.or(base.as_ref().map(|c| c.schedule)).unwrap_or_default(),
        check_level: a.check_level.or(base.as_ref().map(|c| c.check_level)).unwrap_or_default(),
        monotone: !a.no_monotone && base.as_ref().is_none_or(|c| c.monotone),
    };
    let out = a
        .out
        .clone()
        .or(base.and_then(|c| c.out))
        .ok_or_else(|| config_error("missing --out directory"))?;
    fs::create_dir_all(&out).map_err(|e| config_error(format!("creating {}: {e}", out.display())))?;

    let outcomes = sweep(&grid).map_err(config_error)?;
    let mut table = String::from(SWEEP_HEADER);
    table.push('\n');
    let mut failed = 0usize;
    for (i, o) in outcomes.iter().enumerate() {
        let label = grid.envs[o.cell.env_index].label();
        let name = format!(
            "cell-{i:03}-{}-cb{}-d{}-seed{}",
            o.cell.algorithm, o.cell.hp.c_b, o.cell.hp.delta, o.cell.seed
        );
        let _ = write!(
            table,
            "{i},{label},{},{},{},{},{}",
            o.cell.algorithm, o.cell.hp.c_b, o.cell.hp.delta, o.cell.seed, grid.episodes
        );
        match &o.result {
            Ok(record) => {
                let dir = out.join(&name);
                fs::create_dir_all(&dir).map_err(|e| config_error(format!("creating {}: {e}", dir.display())))?;
                write_regret_csv(dir.join("regret.csv"), record).map_err(config_error)?;
                let mut cfg = o.config.clone();
                cfg.out = Some(dir.clone());
                let summary = RunSummary::new(cfg, record);
                summary.write(dir.join("summary.json")).map_err(config_error)?;
                let slope = summary.fitted_slope.map(|s| format!("{s:.16e}")).unwrap_or_default();
                let _ = writeln!(
                    table,
                    ",{:.16e},{slope},{},{},",
                    summary.final_cumulative_regret,
                    record.invariants.hard_failures(),
                    record.invariants.statistical_failures()
                );
            }
            Err(msg) => {
                failed += 1;
                eprintln!("cell {i} ({name}) failed: {msg}");
                let _ = writeln!(table, ",,,,,\"{}\"", msg.replace('"', "'"));
            }
        }
    }
    fs::write(out.join("sweep.csv"), table).map_err(|e| config_error(e.to_string()))?;
    println!(
        "{} cells ({} failed); results in {}",
        outcomes.len(),
        failed,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct FuzzCase {
    case: u64,
    states: usize,
    actions: usize,
    horizon: usize,
    algorithm: Algorithm,
    hard_failures: u64,
    deterministic: std::collections::BTreeMap<String, u64>,
    statistical: std::collections::BTreeMap<String, u64>,
}

#[derive(Debug, Default, Serialize)]
struct VerifyReport {
    rate_suite: Option<RateSuiteReport>,
    invariant_fuzz: Option<Vec<FuzzCase>>,
    passed: bool,
}

fn fuzz_invariants(cases: u64, episodes: u64, seed: u64) -> Result<Vec<FuzzCase>, Failure> {
    let mut dims = RunRng::seed_from_u64(seed);
    let mut out = Vec::new();
    for case in 0..cases {
        let (s, a, h) = (1 + dims.below(4), 1 + dims.below(3), 1 + dims.below(4));
        let mdp = GeneratorSpec::random(s, a, h, seed.wrapping_add(case))
            .build()
            .map_err(config_error)?;
        for algorithm in [Algorithm::Esa, Algorithm::UcbQ] {
            let spec = ExperimentSpec {
                algorithm,
                hyperparams: Hyperparams::new(s, a, h, episodes, crate::agents::DEFAULT_CB, crate::agents::DEFAULT_DELTA)
                    .map_err(config_error)?,
                schedule: InitStateSchedule::SeededRandom,
                seed: seed.wrapping_add(case),
                check_level: CheckLevel::Full,
                monotone: true,
            };
            let record = run_experiment(&mdp, &spec).map_err(config_error)?;
            out.push(FuzzCase {
                case,
                states: s,
                actions: a,
                horizon: h,
                algorithm,
                hard_failures: record.invariants.hard_failures(),
                deterministic: record.invariants.deterministic,
                statistical: record.invariants.statistical,
            });
        }
    }
    Ok(out)
}

fn cmd_verify(a: VerifyArgs) -> Result<(), Failure> {
    let (rate, fuzz) = if a.rate_suite || a.invariant_fuzz {
        (a.rate_suite, a.invariant_fuzz)
    } else {
        (true, true)
    };
    let mut report = VerifyReport {
        passed: true,
        ..Default::default()
    };
    if rate {
        let suite = rate_property_suite(&SUITE_HORIZONS, a.n_max, RATE_TAIL_N_MAX.max(a.n_max), RATE_TOL);
        println!(
            "learning-rate suite: H in {:?}, N <= {}, tolerance {:e}",
            suite.horizons, suite.n_max, suite.tolerance
        );
        for check in &suite.checks {
            println!(
                "  {:<4} {} ({} checked, {} failed, worst excess {:e})",
                if check.passed() { "PASS" } else { "FAIL" },
                check.name,
                check.checked,
                check.failures,
                check.worst_excess
            );
        }
        report.passed &= suite.passed();
        report.rate_suite = Some(suite);
    }
    if fuzz {
        let cases = fuzz_invariants(a.fuzz_cases, a.fuzz_episodes, a.seed)?;
        let hard: u64 = cases.iter().map(|c| c.hard_failures).sum();
        let stat: u64 = cases.iter().flat_map(|c| c.statistical.values()).sum();
        println!(
            "invariant fuzz: {} runs, {} episodes each, {hard} hard violations, {stat} statistical violations",
            cases.len(),
            a.fuzz_episodes
        );
        for c in cases.iter().filter(|c| c.hard_failures > 0) {
            println!(
                "  FAIL case {} {} S={} A={} H={}: {:?}",
                c.case, c.algorithm, c.states, c.actions, c.horizon, c.deterministic
            );
        }
        report.passed &= hard == 0;
        report.invariant_fuzz = Some(cases);
    }
    if let Some(path) = &a.out {
        let text = serde_json::to_string_pretty(&report).map_err(config_error)?;
        fs::write(path, text + "\n").map_err(|e| config_error(format!("writing {}: {e}", path.display())))?;
    }
    if report.passed {
        println!("verify: PASS");
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            msg: "verify: FAIL".into(),
        })
    }
}

fn cmd_gen(a: GenArgs) -> Result<(), Failure> {
    let mut env = a.env;
    if a.seed.is_some() {
        env.env_seed = a.seed;
    }
    let spec = match env.resolve(None).map_err(config_error)? {
        EnvSource::Generator(spec) => spec,
        _ => return Err(config_error("gen needs a generator (--env), not --mdp-file")),
    };
    let mdp = spec.build().map_err(config_error)?;
    mdp.save(&a.out).map_err(config_error)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_plot(a: PlotArgs) -> Result<(), Failure> {
    let rows = read_regret_csv(&a.csv).map_err(|e| config_error(format!("{}: {e}", a.csv.display())))?;
    let out = a.out.unwrap_or_else(|| a.csv.with_extension("svg"));
    let title = a
        .csv
        .parent()
        .and_then(|p| p.file_name())
        .map_or_else(|| "cumulative regret".to_string(), |n| n.to_string_lossy().into_owned());
    fs::write(&out, regret_svg(&rows, a.loglog, &title))
        .map_err(|e| config_error(format!("writing {}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> Vec<String> {
        std::iter::once("esa-rl").chain(extra.iter().copied()).map(String::from).collect()
    }

    #[test]
    fn unknown_flag_exits_one() {
        assert_eq!(main(args(&["run", "--bogus"])), 1);
        assert_eq!(main(args(&[])), 1);
        assert_eq!(main(args(&["--help"])), 0);
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            algorithm: Algorithm::UcbQ,
            env: EnvSource::Generator(GeneratorSpec::chain(4, 3, 0.2)),
            episodes: 10,
            seeds: vec![3],
            c_b: 1.0,
            delta: 0.1,
            schedule: InitStateSchedule::RoundRobin,
            check_level: CheckLevel::Off,
            monotone: true,
            out: None,
        };
        let path = dir.path().join("c.json");
        fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
        let cli = Cli::try_parse_from(args(&[
            "run",
            "--config",
            path.to_str().unwrap(),
            "--algo",
            "esa",
            "--S",
            "6",
            "--slip",
            "0.3",
        ]))
        .unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        let merged = build_run_config(&a).unwrap();
        assert_eq!(merged.algorithm, Algorithm::Esa);
        assert_eq!(merged.episodes, 10);
        assert_eq!(merged.schedule, InitStateSchedule::RoundRobin);
        assert_eq!(
            merged.env,
            EnvSource::Generator(GeneratorSpec::chain(6, 3, 0.3))
        );
    }

    #[test]
    fn env_flag_switches_family() {
        let a = EnvArgs {
            kind: Some(EnvKind::Needle),
            mdp_file: None,
            states: Some(3),
            actions: None,
            horizon: None,
            env_seed: Some(4),
            slip: None,
            gap: None,
            perturb: None,
        };
        let env = a.resolve(Some(EnvSource::Generator(GeneratorSpec::chain(5, 5, 0.1)))).unwrap();
        assert_eq!(env, EnvSource::Generator(GeneratorSpec::needle(3, 2, 5, DEFAULT_GAP, 4)));
    }

    #[test]
    fn invalid_generator_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("o");
        let code = main(args(&["run", "--env", "chain", "--A", "3", "--out", out.to_str().unwrap()]));
        assert_eq!(code, 1);
    }
}
