//! Tri-hybrid beamforming optimizer.
//!
//! Each outer iteration refreshes the FP auxiliary variables, solves the
//! fully digital beamformer in closed form, optionally factorizes it into
//! analog and digital parts, then sweeps the antennas updating their
//! harmonic coefficients. All internal objective values are in nats.

mod em;
mod fp;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use em::{
    curvature_scaled, em_gradient, em_gradient_at, em_step, per_antenna_context, update_aux_antenna, EmStep,
    PerAntennaContext,
};
pub use fp::{digital_solution_at, digital_update, surrogate_objective, update_aux, AuxVars, DigitalUpdate, Products};

use crate::channel::{assemble_channels, CompactChannels, EmBeamformer, EmChannels, Scenario};
use crate::error::{Error, Result};
use crate::geometry::UpaGeometry;
use crate::harmonics::HarmonicBasis;
use crate::linalg::CMatrix;
use crate::manifolds::{hybrid_factorize, Armijo, FactorizeOptions};
use crate::metrics::{evaluate, MetricsReport, TriHybridBeamformer};

/// Which precoding stages are optimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Digital, analog and EM precoding.
    EraTrihybrid,
    /// Fully digital precoding with reconfigurable elements.
    EraDigital,
    /// Hybrid precoding with isotropic elements.
    OaHybrid,
    /// Fully digital precoding with isotropic elements.
    OaDigital,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::EraTrihybrid, Mode::EraDigital, Mode::OaHybrid, Mode::OaDigital];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::EraTrihybrid => "era-trihybrid",
            Mode::EraDigital => "era-digital",
            Mode::OaHybrid => "oa-hybrid",
            Mode::OaDigital => "oa-digital",
        }
    }

    pub fn optimizes_em(self) -> bool {
        matches!(self, Mode::EraTrihybrid | Mode::EraDigital)
    }

    pub fn is_hybrid(self) -> bool {
        matches!(self, Mode::EraTrihybrid | Mode::OaHybrid)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s.trim()).ok_or_else(|| {
            Error::Config(format!(
                "unknown mode '{s}' (expected era-trihybrid, era-digital, oa-hybrid or oa-digital)"
            ))
        })
    }
}

/// Solver knobs. The weight `β` and the power budget live on the [`Scenario`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: Mode,
    /// RF chains for the hybrid modes.
    pub rf_chains: usize,
    pub max_iterations: usize,
    /// Stop once `|Δobjective|` (nats) falls to this level.
    pub tolerance: f64,
    /// Relative power tolerance of the dual bisection.
    pub dual_tolerance: f64,
    /// Riemannian steps per antenna per visit.
    pub em_inner_steps: usize,
    /// Passes over the array per outer iteration.
    pub em_sweeps: usize,
    pub armijo: Armijo,
    /// Measure the EM line-search initial step in units of the inverse
    /// surrogate curvature instead of absolute units.
    pub scale_em_step: bool,
    pub factorize: FactorizeOptions,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mode: Mode::EraTrihybrid,
            rf_chains: 2,
            max_iterations: 50,
            tolerance: 1e-4,
            dual_tolerance: 1e-8,
            em_inner_steps: 1,
            em_sweeps: 1,
            armijo: Armijo::default(),
            scale_em_step: true,
            factorize: FactorizeOptions::default(),
        }
    }
}

impl SolverConfig {
    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !(self.dual_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be at least 1".into()));
        }
        if self.mode.is_hybrid() && self.rf_chains == 0 {
            return Err(Error::Config("hybrid modes need at least one RF chain".into()));
        }
        if self.em_inner_steps == 0 || self.em_sweeps == 0 {
            return Err(Error::Config("em_inner_steps and em_sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub mode: Mode,
    /// Weighted objective (nats) after each outer iteration.
    pub trace: Vec<f64>,
    /// The same with the rate in bits.
    pub trace_bits: Vec<f64>,
    /// Objective (nats) at the initial point.
    pub initial_objective: f64,
    pub metrics: MetricsReport,
    pub beamformer: TriHybridBeamformer,
    pub iterations: usize,
    pub converged: bool,
    /// Antenna updates whose line search found no ascent.
    pub em_stalls: usize,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Digital,
    Factorization,
    Em(usize),
}

/// Constraint snapshot taken after every solver step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub iteration: usize,
    pub stage: Stage,
    pub power: f64,
    pub power_budget: f64,
    /// Power-constraint multiplier, digital stage only.
    pub mu: Option<f64>,
    /// `max_n |‖c^(n)‖ - 1|`.
    pub coeff_norm_error: f64,
    /// `max_ij ||[F_RF]_ij| - 1|`, zero without an analog stage.
    pub modulus_error: f64,
}

impl StepDiagnostics {
    /// `|μ (Σ‖f_k‖² - P)|`.
    pub fn slackness(&self) -> f64 {
        self.mu.map_or(0.0, |mu| (mu * (self.power - self.power_budget)).abs())
    }
}

fn frob_sqr(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

struct State<'a> {
    scenario: &'a Scenario,
    channels: EmChannels,
    em: EmBeamformer,
    analog: Option<CMatrix>,
    digital: CMatrix,
}

impl State<'_> {
    fn precoder(&self) -> CMatrix {
        match &self.analog {
            Some(rf) => rf * &self.digital,
            None => self.digital.clone(),
        }
    }

    fn diagnostics(&self, iteration: usize, stage: Stage, mu: Option<f64>, power: f64) -> StepDiagnostics {
        StepDiagnostics {
            iteration,
            stage,
            power,
            power_budget: self.scenario.power_w,
            mu,
            coeff_norm_error: self
                .em
                .coeffs()
                .iter()
                .map(|c| (c.norm() - 1.0).abs())
                .fold(0.0, f64::max),
            modulus_error: self
                .analog
                .as_ref()
                .map_or(0.0, |rf| rf.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)),
        }
    }

    fn compact(&self) -> Result<CompactChannels> {
        self.channels.compact(&self.em)
    }

    fn metrics(&self) -> Result<MetricsReport> {
        evaluate(
            &self.compact()?,
            &self.precoder(),
            self.scenario.noise_power_w,
            self.scenario.beta,
        )
    }

    /// Sets the fully digital target, factorizing it in the hybrid modes.
    fn install(&mut self, fd: CMatrix, config: &SolverConfig) -> Result<()> {
        if config.mode.is_hybrid() {
            let fac = hybrid_factorize(&fd, config.rf_chains, self.scenario.power_w, &config.factorize)?;
            self.analog = Some(fac.analog.into_matrix());
            self.digital = fac.digital;
        } else {
            self.digital = fd;
        }
        Ok(())
    }
}

/// Matched filter on the isotropic channels, scaled to the power budget.
fn matched_filter(compact: &CompactChannels, power: f64) -> CMatrix {
    let n = compact.target.len();
    let mut f = CMatrix::zeros(n, compact.users.len());
    for (k, h) in compact.users.iter().enumerate() {
        f.set_column(k, h);
    }
    let norm = frob_sqr(&f);
    if norm > 0.0 {
        f *= Complex64::new((power / norm).sqrt(), 0.0);
    }
    f
}

/// Runs the optimizer on one scenario.
pub fn tri_hybrid_solve(
    scenario: &Scenario,
    geom: &UpaGeometry,
    basis: &HarmonicBasis,
    config: &SolverConfig,
) -> Result<SolveReport> {
    tri_hybrid_solve_observed(scenario, geom, basis, config, |_| {})
}

/// [`tri_hybrid_solve`] with a callback invoked after every step.
pub fn tri_hybrid_solve_observed<F>(
    scenario: &Scenario,
    geom: &UpaGeometry,
    basis: &HarmonicBasis,
    config: &SolverConfig,
    mut observe: F,
) -> Result<SolveReport>
where
    F: FnMut(&StepDiagnostics),
{
    let start = Instant::now();
    config.validate()?;
    scenario.validate()?;
    let channels = assemble_channels(scenario, geom, basis)?;
    let n_t = geom.num_elements();
    let em = EmBeamformer::isotropic(n_t, basis.len());
    let mut state = State {
        scenario,
        channels,
        em,
        analog: None,
        digital: CMatrix::zeros(n_t, scenario.num_users()),
    };
    let beta = scenario.beta;
    let noise = scenario.noise_power_w;
    let power = scenario.power_w;

    let mf = matched_filter(&state.compact()?, power);
    state.install(mf, config)?;
    let initial_objective = state.metrics()?.objective_nats(beta);

    let mut trace = Vec::new();
    let mut trace_bits = Vec::new();
    let mut previous = initial_objective;
    let mut converged = false;
    let mut em_stalls = 0;

    for iteration in 1..=config.max_iterations {
        let compact = state.compact()?;
        let aux = update_aux(&compact, &state.precoder(), beta, noise);
        let digital = digital_update(&compact, &aux, beta, power, config.dual_tolerance)?;
        let mu = digital.mu;
        let fd_power = digital.power;
        state.analog = None;
        state.digital = digital.precoder.clone();
        observe(&state.diagnostics(iteration, Stage::Digital, Some(mu), fd_power));
        if config.mode.is_hybrid() {
            state.install(digital.precoder, config)?;
            let p = frob_sqr(&state.precoder());
            observe(&state.diagnostics(iteration, Stage::Factorization, None, p));
        }

        if config.mode.optimizes_em() {
            let precoder = state.precoder();
            let p = frob_sqr(&precoder);
            for n in (0..n_t).cycle().take(n_t * config.em_sweeps) {
                let ctx = per_antenna_context(n, &state.channels, &state.em, &precoder)?;
                let aux_n = update_aux_antenna(&ctx, beta, noise);
                let rule = if config.scale_em_step {
                    curvature_scaled(&config.armijo, &ctx, &aux_n)
                } else {
                    config.armijo
                };
                let step = em_step(&ctx, &aux_n, beta, noise, &rule, config.em_inner_steps)?;
                if step.stalled && step.step == 0.0 {
                    em_stalls += 1;
                }
                state.em.set_coeff(n, step.coeff);
                observe(&state.diagnostics(iteration, Stage::Em(n), None, p));
            }
        }

        let metrics = state.metrics()?;
        let value = metrics.objective_nats(beta);
        trace.push(value);
        trace_bits.push(metrics.objective);
        if (value - previous).abs() <= config.tolerance {
            converged = true;
            break;
        }
        previous = value;
    }

    let metrics = state.metrics()?;
    let iterations = trace.len();
    Ok(SolveReport {
        mode: config.mode,
        trace,
        trace_bits,
        initial_objective,
        metrics,
        beamformer: TriHybridBeamformer {
            analog: state.analog,
            digital: state.digital,
            em: state.em,
        },
        iterations,
        converged,
        em_stalls,
        elapsed: start.elapsed(),
    })
}
