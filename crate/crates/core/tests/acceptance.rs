//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trihybrid::channel::{
    assemble_channels, elementwise_oracle, sample_scenario, sample_scenario_with, Entity, ScenarioConfig,
};
use trihybrid::geometry::UpaGeometry;
use trihybrid::harmonics::HarmonicBasis;
use trihybrid::harness::{dbm_to_watts, export_results, median, sweep, RunConfig, TrialResult};
use trihybrid::linalg::{cis, CMatrix, CVector};
use trihybrid::manifolds::{hybrid_factorize, FactorizeOptions};
use trihybrid::metrics::{element_gain, evaluate};
use trihybrid::solver::{
    em_gradient_at, per_antenna_context, tri_hybrid_solve, tri_hybrid_solve_observed, update_aux, update_aux_antenna,
    Mode, SolverConfig,
};

// Pinned tolerances.
const CHANNEL_REL_TOL: f64 = 1e-10;
const TIGHTNESS_REL_TOL: f64 = 1e-8;
const GRADIENT_REL_TOL: f64 = 1e-5;
const FD_STEP: f64 = 1e-6;
const MONOTONE_SLACK: f64 = 1e-6;
const CONVERGED_MIN: usize = 95;
const UNIT_TOL: f64 = 1e-12;
const POWER_REL_TOL: f64 = 1e-9;
const SLACKNESS_REL_TOL: f64 = 1e-6;
const CLOSED_FORM_REL_TOL: f64 = 0.01;
const GRAM_TOL: f64 = 1e-3;
const ADDITION_TOL: f64 = 1e-9;
const FACTOR_RESIDUAL_TOL: f64 = 1e-6;
const ERA_GAIN_MIN_DB: f64 = 5.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table_one() -> (UpaGeometry, HarmonicBasis) {
    (
        UpaGeometry::half_wavelength(4, 4, 3.0e9).unwrap(),
        HarmonicBasis::new(4).unwrap(),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn channel_oracle() -> Outcome {
    let start = Instant::now();
    let (geom, basis) = table_one();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cfg = ScenarioConfig::default();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = sample_scenario_with(&cfg, &mut rng).unwrap();
        let em = common::random_em(&mut rng, 16, 25);
        let compact = assemble_channels(&s, &geom, &basis).unwrap().compact(&em).unwrap();
        let mut check = |entity, h: &CVector| {
            let o = elementwise_oracle(&s, entity, &em, &geom, &basis).unwrap();
            worst = worst.max((h - &o).norm() / o.norm());
        };
        for (k, h) in compact.users.iter().enumerate() {
            check(Entity::User(k), h);
        }
        check(Entity::Target, &compact.target);
        for (m, h) in compact.scatterers.iter().enumerate() {
            check(Entity::Scatterer(m), h);
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= CHANNEL_REL_TOL && elapsed < Duration::from_secs(2),
        format!(
            "max rel err {worst:.2e} over 100 scenarios in {:.2} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn fp_tightness() -> Outcome {
    let (geom, basis) = table_one();
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let beta = rng.random::<f64>();
        let power = dbm_to_watts(rng.random_range(-30.0..0.0));
        let s = sample_scenario_with(&ScenarioConfig::default(), &mut rng).unwrap();
        let em = common::random_em(&mut rng, 16, 25);
        let compact = assemble_channels(&s, &geom, &basis).unwrap().compact(&em).unwrap();
        let f = common::random_precoder(&mut rng, 16, 2, power);
        let aux = update_aux(&compact, &f, beta, s.noise_power_w);
        let surrogate = trihybrid::solver::surrogate_objective(&compact, &f, &aux, beta, s.noise_power_w);
        let truth = evaluate(&compact, &f, s.noise_power_w, beta)
            .unwrap()
            .objective_nats(beta);
        worst = worst.max(rel(surrogate, truth));
    }
    outcome(
        worst <= TIGHTNESS_REL_TOL,
        format!("max rel gap {worst:.2e} over 100 states"),
    )
}

fn gradient_oracle() -> Outcome {
    let (geom, basis) = table_one();
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for n in 0..16 {
        for _ in 0..50 {
            let beta = rng.random::<f64>();
            let s = sample_scenario_with(&ScenarioConfig::default(), &mut rng).unwrap();
            let channels = assemble_channels(&s, &geom, &basis).unwrap();
            let em = common::random_em(&mut rng, 16, 25);
            let f = common::random_precoder(&mut rng, 16, 2, s.power_w);
            let ctx = per_antenna_context(n, &channels, &em, &f).unwrap();
            let aux = update_aux_antenna(&ctx, beta, s.noise_power_w);
            let noise = s.noise_power_w;
            let c = common::random_unit(&mut rng, 25);
            let g = em_gradient_at(&ctx, &c, &aux, beta);
            let mut fd = CVector::zeros(25);
            for i in 0..25 {
                for unit in [Complex64::new(FD_STEP, 0.0), Complex64::new(0.0, FD_STEP)] {
                    let mut plus = c.clone();
                    plus[i] += unit;
                    let mut minus = c.clone();
                    minus[i] -= unit;
                    let d = (ctx.surrogate(&plus, &aux, beta, noise) - ctx.surrogate(&minus, &aux, beta, noise))
                        / (2.0 * FD_STEP);
                    if unit.re != 0.0 {
                        fd[i].re = d;
                    } else {
                        fd[i].im = d;
                    }
                }
            }
            worst = worst.max((&g - &fd).norm() / g.norm());
            checks += 1;
        }
    }
    outcome(
        worst <= GRADIENT_REL_TOL,
        format!("max rel err {worst:.2e} over {checks} states (50 per antenna)"),
    )
}

fn monotone_convergence() -> Outcome {
    let start = Instant::now();
    let run = RunConfig::default();
    let (geom, basis) = (run.geometry().unwrap(), run.basis().unwrap());
    let solver = run.solver_config(Mode::EraDigital);
    let mut converged = 0;
    let mut worst_drop: f64 = 0.0;
    let mut iterations = Vec::new();
    for i in 0..100 {
        let s = run.scenario(i).unwrap();
        let r = tri_hybrid_solve(&s, &geom, &basis, &solver).unwrap();
        let mut prev = r.initial_objective;
        for &v in &r.trace {
            worst_drop = worst_drop.max(prev - v);
            prev = v;
        }
        if r.converged {
            converged += 1;
        }
        iterations.push(r.iterations as f64);
    }
    let elapsed = start.elapsed();
    outcome(
        worst_drop <= MONOTONE_SLACK && converged >= CONVERGED_MIN && elapsed < Duration::from_secs(120),
        format!(
            "{converged}/100 converged within 50 iterations (median {}), worst decrease {worst_drop:.1e}, {:.1} s",
            median(&iterations),
            elapsed.as_secs_f64()
        ),
    )
}

fn constraint_suite() -> Outcome {
    let run = RunConfig::default();
    let (geom, basis) = (run.geometry().unwrap(), run.basis().unwrap());
    let mut ok = true;
    let (mut norm, mut modulus, mut power, mut slack) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let mut steps = 0;
    for i in 0..10 {
        let s = run.scenario(i).unwrap();
        for mode in Mode::ALL {
            tri_hybrid_solve_observed(&s, &geom, &basis, &run.solver_config(mode), |d| {
                steps += 1;
                norm = norm.max(d.coeff_norm_error);
                modulus = modulus.max(d.modulus_error);
                power = power.max(d.power / d.power_budget - 1.0);
                slack = slack.max(d.slackness() / d.power_budget);
                ok &= d.coeff_norm_error <= UNIT_TOL
                    && d.modulus_error <= UNIT_TOL
                    && d.power <= d.power_budget * (1.0 + POWER_REL_TOL)
                    && d.slackness() <= SLACKNESS_REL_TOL * d.power_budget;
            })
            .unwrap();
        }
    }
    outcome(
        ok,
        format!(
            "{steps} steps: norm err {norm:.1e}, modulus err {modulus:.1e}, power excess {power:.1e}, slackness/P {slack:.1e}"
        ),
    )
}

fn single_user_closed_form() -> Outcome {
    let (geom, basis) = table_one();
    let target = basis.len() as f64 / (4.0 * PI);
    let cfg = ScenarioConfig {
        num_users: 1,
        num_scatterers: 0,
        paths_per_user: 1,
        beta: 0.0,
        ..ScenarioConfig::default()
    };
    let solver = SolverConfig {
        max_iterations: 50,
        em_sweeps: 10,
        ..SolverConfig::default().with_mode(Mode::EraDigital)
    };
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let s = sample_scenario(&cfg, 600 + seed).unwrap();
        let r = tri_hybrid_solve(&s, &geom, &basis, &solver).unwrap();
        let dir = s.users[0][0].dir;
        for c in r.beamformer.em.coeffs() {
            worst = worst.max(rel(element_gain(c, &basis, dir).unwrap(), target));
        }
    }
    outcome(
        worst <= CLOSED_FORM_REL_TOL,
        format!("max rel deviation of |c^H b|^2 from T/(4pi) = {target:.5}: {worst:.2e} (5 scenarios x 16 elements)"),
    )
}

fn harmonics() -> Outcome {
    let basis = HarmonicBasis::new(4).unwrap();
    let gram = common::quadrature_gram(&basis, 128, 256);
    let gram_err = (gram - CMatrix::identity(25, 25)).camax();
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    let mut add_err: f64 = 0.0;
    for _ in 0..1000 {
        let b = basis
            .basis_vector(rng.random_range(0.0..PI), rng.random_range(0.0..2.0 * PI))
            .unwrap();
        add_err = add_err.max((b.norm_squared() - 25.0 / (4.0 * PI)).abs());
    }
    outcome(
        gram_err <= GRAM_TOL && add_err <= ADDITION_TOL,
        format!("Gram max err {gram_err:.1e} (128x256 nodes), addition theorem err {add_err:.1e}"),
    )
}

fn factorization() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    let mut worst: f64 = 0.0;
    let mut monotone = true;
    for _ in 0..20 {
        let rf = CMatrix::from_fn(16, 2, |_, _| cis(rng.random_range(0.0..2.0 * PI)));
        let bb = CMatrix::from_fn(2, 2, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let out = hybrid_factorize(&(&rf * &bb), 2, 1e3, &FactorizeOptions::default()).unwrap();
        worst = worst.max(out.relative_residual());
        monotone &= out.residuals.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    }
    outcome(
        worst <= FACTOR_RESIDUAL_TOL && monotone,
        format!("max residual {worst:.1e} over 20 exact targets, monotone: {monotone}"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let base = RunConfig {
        trials: 6,
        seed: 9,
        power_dbm: vec![-20.0, -10.0],
        record_timing: false,
        ..RunConfig::default()
    };
    let mut files = Vec::new();
    for (i, workers) in [1, 4, 4].into_iter().enumerate() {
        let cfg = RunConfig {
            workers,
            ..base.clone()
        };
        let out = sweep(&cfg).unwrap();
        let path = dir.path().join(format!("r{i}.csv"));
        export_results(&out.results, &path).unwrap();
        files.push(std::fs::read(&path).unwrap());
    }
    let identical = files.windows(2).all(|w| w[0] == w[1]);
    outcome(
        identical,
        format!(
            "3 sweeps (workers 1, 4, 4), {} bytes each, identical: {identical}",
            files[0].len()
        ),
    )
}

fn paired(results: &[TrialResult], power: f64, mode: Mode) -> Vec<f64> {
    results
        .iter()
        .filter(|r| r.mode == mode && r.power_dbm == power)
        .map(|r| r.objective)
        .collect()
}

fn era_gain_and_ordering() -> (Outcome, Outcome) {
    let start = Instant::now();
    let cfg = RunConfig {
        trials: 100,
        power_dbm: vec![-30.0, -20.0, -10.0],
        beta: vec![0.5],
        modes: vec![Mode::EraTrihybrid, Mode::OaDigital, Mode::OaHybrid],
        ..RunConfig::default()
    };
    let out = sweep(&cfg).unwrap();
    let elapsed = start.elapsed();
    let era = paired(&out.results, -20.0, Mode::EraTrihybrid);
    let oa = paired(&out.results, -20.0, Mode::OaHybrid);
    let gains: Vec<f64> = era.iter().zip(&oa).map(|(e, o)| 10.0 * (e / o).log10()).collect();
    let gain = median(&gains);
    let gain_outcome = outcome(
        gain >= ERA_GAIN_MIN_DB && gains.len() == 100 && out.failures.is_empty(),
        format!(
            "median ERA tri-hybrid / OA hybrid = {gain:.2} dB over {} paired trials at -20 dBm ({:.1} s)",
            gains.len(),
            elapsed.as_secs_f64()
        ),
    );
    let mut ok = out.failures.is_empty();
    let mut parts = Vec::new();
    for p in cfg.power_dbm.iter().copied() {
        let m: Vec<f64> = [Mode::EraTrihybrid, Mode::OaDigital, Mode::OaHybrid]
            .into_iter()
            .map(|mode| median(&paired(&out.results, p, mode)))
            .collect();
        ok &= m[0] >= m[1] && m[1] >= m[2];
        parts.push(format!("{p} dBm: {:.6} >= {:.6} >= {:.6}", m[0], m[1], m[2]));
    }
    (gain_outcome, outcome(ok, parts.join("; ")))
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, name: &str, o: Outcome| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} [{tag}] {name}: {}", o.detail);
        if !o.pass {
            failed += 1;
        }
    };
    report(1, "channel oracle", channel_oracle());
    report(2, "FP tightness", fp_tightness());
    report(3, "gradient oracle", gradient_oracle());
    report(4, "monotone convergence", monotone_convergence());
    report(5, "constraint suite", constraint_suite());
    report(6, "single-user closed form", single_user_closed_form());
    report(7, "harmonics", harmonics());
    report(8, "factorization", factorization());
    report(9, "determinism", determinism());
    let (gain, ordering) = era_gain_and_ordering();
    report(10, "ERA vs OA gain", gain);
    report(11, "mode ordering", ordering);
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 11 acceptance criteria passed");
}
