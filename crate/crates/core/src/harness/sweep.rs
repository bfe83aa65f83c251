//! Cartesian-product experiment grids, run in parallel with per-cell
//! failure isolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run_experiment, CheckLevel, InitStateSchedule, RegretRecord};
use crate::agents::Algorithm;
use crate::config::{EnvSource, RunConfig};

/// Caps the number of worker threads a sweep uses.
pub const THREADS_ENV: &str = "ESA_RL_THREADS";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("sweep grid axis `{0}` is empty")]
    EmptyAxis(&'static str),
    #[error("building thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HpPoint {
    pub c_b: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub envs: Vec<EnvSource>,
    pub algorithms: Vec<Algorithm>,
    pub hp_grid: Vec<HpPoint>,
    pub seeds: Vec<u64>,
    pub episodes: u64,
    pub schedule: InitStateSchedule,
    pub check_level: CheckLevel,
    pub monotone: bool,
}

impl SweepGrid {
    /// Cells in declared order: environments, then algorithms, then
    /// hyperparameters, then seeds (innermost).
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for env_index in 0..self.envs.len() {
            for &algorithm in &self.algorithms {
                for &hp in &self.hp_grid {
                    for &seed in &self.seeds {
                        cells.push(SweepCell {
                            env_index,
                            algorithm,
                            hp,
                            seed,
                        });
                    }
                }
            }
        }
        cells
    }

    pub fn config_for(&self, cell: &SweepCell) -> RunConfig {
        RunConfig {
            algorithm: cell.algorithm,
            env: self.envs[cell.env_index].clone(),
            episodes: self.episodes,
            seeds: vec![cell.seed],
            c_b: cell.hp.c_b,
            delta: cell.hp.delta,
            schedule: self.schedule,
            check_level: self.check_level,
            monotone: self.monotone,
            out: None,
        }
    }

    fn check_nonempty(&self) -> Result<(), SweepError> {
        if self.envs.is_empty() {
            return Err(SweepError::EmptyAxis("envs"));
        }
        if self.algorithms.is_empty() {
            return Err(SweepError::EmptyAxis("algorithms"));
        }
        if self.hp_grid.is_empty() {
            return Err(SweepError::EmptyAxis("hp_grid"));
        }
        if self.seeds.is_empty() {
            return Err(SweepError::EmptyAxis("seeds"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub env_index: usize,
    pub algorithm: Algorithm,
    pub hp: HpPoint,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub cell: SweepCell,
    pub config: RunConfig,
    pub result: Result<RegretRecord, String>,
}

fn run_cell(grid: &SweepGrid, cell: SweepCell) -> CellOutcome {
    let config = grid.config_for(&cell);
    let result = config
        .env
        .load()
        .map_err(|e| e.to_string())
        .and_then(|mdp| {
            let spec = config.experiment(&mdp, cell.seed).map_err(|e| e.to_string())?;
            run_experiment(&mdp, &spec).map_err(|e| e.to_string())
        });
    CellOutcome { cell, config, result }
}

/// Runs every cell, honoring `ESA_RL_THREADS` when set.
pub fn sweep(grid: &SweepGrid) -> Result<Vec<CellOutcome>, SweepError> {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok());
    sweep_with_threads(grid, threads)
}

/// Output order matches [`SweepGrid::cells`] whatever the thread count.
pub fn sweep_with_threads(grid: &SweepGrid, threads: Option<usize>) -> Result<Vec<CellOutcome>, SweepError> {
    grid.check_nonempty()?;
    let cells = grid.cells();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads.filter(|&n| n > 0) {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    Ok(pool.install(|| cells.into_par_iter().map(|cell| run_cell(grid, cell)).collect()))
}
