//! Monte-Carlo driver: paired trials over power and weight grids, summary
//! statistics and CSV export.

mod export;

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use export::{
    export_array_pattern, export_element_pattern, export_results, export_summary, read_results, RESULTS_HEADER,
};

use crate::channel::{sample_scenario_with, Scenario, ScenarioConfig};
use crate::error::{Error, Result};
use crate::geometry::{UpaGeometry, SPEED_OF_LIGHT};
use crate::harmonics::HarmonicBasis;
use crate::manifolds::FactorizeOptions;
use crate::solver::{tri_hybrid_solve, Mode, SolveReport, SolverConfig};

/// `10^((dBm - 30) / 10)` watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Experiment description. Defaults reproduce the reference system: a 4×4
/// half-wavelength array at 3 GHz, 2 RF chains, 2 users, 2 clutter
/// scatterers, harmonics up to degree 4 and -80 dBm noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub array_x: usize,
    pub array_y: usize,
    /// Receive antennas of the sensing array (recorded, not used by the
    /// transmit-side optimization).
    pub rx_antennas: usize,
    pub rf_chains: usize,
    pub carrier_hz: f64,
    pub num_users: usize,
    pub num_scatterers: usize,
    pub paths_per_user: usize,
    pub max_degree: usize,
    pub noise_dbm: f64,
    pub theta_deg: (f64, f64),
    pub phi_deg: (f64, f64),
    pub range_m: (f64, f64),
    pub target_rcs: f64,
    pub scatterer_rcs: f64,
    pub trials: usize,
    pub seed: u64,
    pub power_dbm: Vec<f64>,
    pub beta: Vec<f64>,
    pub modes: Vec<Mode>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub dual_tolerance: f64,
    pub em_inner_steps: usize,
    pub em_sweeps: usize,
    /// Worker threads; `0` uses every available core.
    pub workers: usize,
    /// When false, `wall_ms` is written as zero so output files are
    /// reproducible byte for byte.
    pub record_timing: bool,
    pub out_dir: PathBuf,
    pub pattern_theta: usize,
    pub pattern_phi: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            array_x: 4,
            array_y: 4,
            rx_antennas: 16,
            rf_chains: 2,
            carrier_hz: 3.0e9,
            num_users: 2,
            num_scatterers: 2,
            paths_per_user: 1,
            max_degree: 4,
            noise_dbm: -80.0,
            theta_deg: (0.0, 180.0),
            phi_deg: (0.0, 360.0),
            range_m: (10.0, 50.0),
            target_rcs: 1.0,
            scatterer_rcs: 1.0,
            trials: 100,
            seed: 1,
            power_dbm: vec![-20.0],
            beta: vec![0.5],
            modes: Mode::ALL.to_vec(),
            max_iterations: 50,
            tolerance: 1e-4,
            dual_tolerance: 1e-8,
            em_inner_steps: 1,
            em_sweeps: 10,
            workers: 0,
            record_timing: true,
            out_dir: PathBuf::from("results"),
            pattern_theta: 91,
            pattern_phi: 180,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.power_dbm.is_empty() || self.beta.is_empty() || self.modes.is_empty() {
            return Err(Error::Config("power, beta and mode lists must be nonempty".into()));
        }
        if let Some(b) = self.beta.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::domain("beta", *b, "[0, 1]"));
        }
        if let Some(p) = self.power_dbm.iter().find(|p| !p.is_finite()) {
            return Err(Error::domain("power_dbm", *p, "finite"));
        }
        if !self.noise_dbm.is_finite() {
            return Err(Error::domain("noise_dbm", self.noise_dbm, "finite"));
        }
        if self.array_x == 0 || self.array_y == 0 {
            return Err(Error::Config("array dimensions must be positive".into()));
        }
        self.geometry()?;
        self.basis()?;
        self.solver_config(Mode::EraTrihybrid).validate()?;
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn geometry(&self) -> Result<UpaGeometry> {
        UpaGeometry::half_wavelength(self.array_x, self.array_y, self.carrier_hz)
    }

    pub fn basis(&self) -> Result<HarmonicBasis> {
        HarmonicBasis::new(self.max_degree)
    }

    /// Sampling configuration at the first power and weight of the grids.
    pub fn scenario_config(&self) -> ScenarioConfig {
        ScenarioConfig {
            num_users: self.num_users,
            num_scatterers: self.num_scatterers,
            paths_per_user: self.paths_per_user,
            theta_deg: self.theta_deg,
            phi_deg: self.phi_deg,
            range_m: self.range_m,
            target_rcs: self.target_rcs,
            scatterer_rcs: self.scatterer_rcs,
            wavelength: self.wavelength(),
            power_w: dbm_to_watts(self.power_dbm.first().copied().unwrap_or(-20.0)),
            noise_power_w: dbm_to_watts(self.noise_dbm),
            beta: self.beta.first().copied().unwrap_or(0.5),
        }
    }

    pub fn solver_config(&self, mode: Mode) -> SolverConfig {
        SolverConfig {
            mode,
            rf_chains: self.rf_chains,
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            dual_tolerance: self.dual_tolerance,
            em_inner_steps: self.em_inner_steps,
            em_sweeps: self.em_sweeps,
            factorize: FactorizeOptions::default(),
            ..SolverConfig::default()
        }
    }

    /// Scenario of trial `index`: a ChaCha8 stream selected by the index
    /// under the run seed.
    pub fn scenario(&self, index: usize) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        sample_scenario_with(&self.scenario_config(), &mut rng)
    }
}

/// One solved (trial, mode, power, β) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub mode: Mode,
    pub beta: f64,
    pub power_dbm: f64,
    /// `(1-β) R_c + β η` with the rate in bits/s/Hz.
    pub objective: f64,
    pub sum_rate_bps_hz: f64,
    pub scnr_db: f64,
    pub iterations: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub trial: usize,
    pub mode: Mode,
    pub beta: f64,
    pub power_dbm: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialOutcome {
    pub results: Vec<TrialResult>,
    pub failures: Vec<CellFailure>,
}

impl TrialOutcome {
    fn extend(&mut self, other: TrialOutcome) {
        self.results.extend(other.results);
        self.failures.extend(other.failures);
    }
}

/// Solves one cell of the grid on an already sampled scenario.
pub fn solve_cell(
    config: &RunConfig,
    scenario: &Scenario,
    mode: Mode,
    power_dbm: f64,
    beta: f64,
) -> Result<SolveReport> {
    let scenario = scenario.clone().with_power(dbm_to_watts(power_dbm)).with_beta(beta);
    tri_hybrid_solve(
        &scenario,
        &config.geometry()?,
        &config.basis()?,
        &config.solver_config(mode),
    )
}

/// Every requested (power, β, mode) cell on the scenario of trial `index`.
/// Cell failures are recorded, not propagated.
pub fn run_trial(config: &RunConfig, index: usize) -> Result<TrialOutcome> {
    let scenario = config.scenario(index)?;
    let geom = config.geometry()?;
    let basis = config.basis()?;
    let mut out = TrialOutcome::default();
    for &mode in &config.modes {
        let solver = config.solver_config(mode);
        for &power_dbm in &config.power_dbm {
            for &beta in &config.beta {
                let cell = scenario.clone().with_power(dbm_to_watts(power_dbm)).with_beta(beta);
                match tri_hybrid_solve(&cell, &geom, &basis, &solver) {
                    Ok(report) => out.results.push(TrialResult {
                        trial: index,
                        seed: config.seed,
                        mode,
                        beta,
                        power_dbm,
                        objective: report.metrics.objective,
                        sum_rate_bps_hz: report.metrics.sum_rate,
                        scnr_db: report.metrics.scnr_db(),
                        iterations: report.iterations,
                        wall_ms: if config.record_timing {
                            report.elapsed.as_secs_f64() * 1e3
                        } else {
                            0.0
                        },
                    }),
                    Err(e) => out.failures.push(CellFailure {
                        trial: index,
                        mode,
                        beta,
                        power_dbm,
                        message: e.to_string(),
                    }),
                }
            }
        }
    }
    Ok(out)
}

fn cell_key(config: &RunConfig, trial: usize, mode: Mode, power: f64, beta: f64) -> (usize, Mode, usize, usize) {
    let pi = config.power_dbm.iter().position(|p| *p == power).unwrap_or(usize::MAX);
    let bi = config.beta.iter().position(|b| *b == beta).unwrap_or(usize::MAX);
    (trial, mode, pi, bi)
}

/// Full factorial sweep over trials × modes × powers × weights, run on
/// `config.workers` threads. `progress` is called once per finished trial.
pub fn sweep_with_progress<F>(config: &RunConfig, progress: F) -> Result<TrialOutcome>
where
    F: Fn(usize, usize) + Sync,
{
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let done = std::sync::atomic::AtomicUsize::new(0);
    let outcomes: Vec<TrialOutcome> = pool.install(|| {
        (0..config.trials)
            .into_par_iter()
            .map(|i| {
                let out = run_trial(config, i);
                let n = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                progress(n, config.trials);
                out
            })
            .collect::<Result<_>>()
    })?;
    let mut all = TrialOutcome::default();
    for o in outcomes {
        all.extend(o);
    }
    all.results
        .sort_by_key(|r| cell_key(config, r.trial, r.mode, r.power_dbm, r.beta));
    all.failures
        .sort_by_key(|f| cell_key(config, f.trial, f.mode, f.power_dbm, f.beta));
    Ok(all)
}

pub fn sweep(config: &RunConfig) -> Result<TrialOutcome> {
    sweep_with_progress(config, |_, _| {})
}

/// Mean and median of each metric over the trials of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub mode: Mode,
    pub beta: f64,
    pub power_dbm: f64,
    pub trials: usize,
    pub mean_objective: f64,
    pub median_objective: f64,
    pub mean_sum_rate: f64,
    pub median_sum_rate: f64,
    pub mean_scnr_db: f64,
    pub median_scnr_db: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-cell aggregates, ordered by (mode, power, β). The statistics do not
/// depend on row order.
pub fn summarize(results: &[TrialResult]) -> Vec<CellSummary> {
    let mut cells: BTreeMap<(Mode, u64, u64), Vec<&TrialResult>> = BTreeMap::new();
    for r in results {
        cells
            .entry((r.mode, ordered_bits(r.power_dbm), ordered_bits(r.beta)))
            .or_default()
            .push(r);
    }
    cells
        .into_values()
        .map(|rows| {
            let pick = |f: fn(&TrialResult) -> f64| rows.iter().map(|r| f(r)).collect::<Vec<_>>();
            let obj = pick(|r| r.objective);
            let rate = pick(|r| r.sum_rate_bps_hz);
            let scnr = pick(|r| r.scnr_db);
            CellSummary {
                mode: rows[0].mode,
                beta: rows[0].beta,
                power_dbm: rows[0].power_dbm,
                trials: rows.len(),
                mean_objective: mean(&obj),
                median_objective: median(&obj),
                mean_sum_rate: mean(&rate),
                median_sum_rate: median(&rate),
                mean_scnr_db: mean(&scnr),
                median_scnr_db: median(&scnr),
            }
        })
        .collect()
}

// Order-preserving map from f64 to u64 so floats can key a BTreeMap.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

/// `(R_c, η dB)` medians per β at one power level and mode, in β order.
pub fn tradeoff_curve(summary: &[CellSummary], mode: Mode, power_dbm: f64) -> Vec<(f64, f64, f64)> {
    let mut pts: Vec<_> = summary
        .iter()
        .filter(|s| s.mode == mode && s.power_dbm == power_dbm)
        .map(|s| (s.beta, s.median_sum_rate, s.median_scnr_db))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}
