//! `trihybrid` command-line driver.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use trihybrid::harness::{
    export_array_pattern, export_element_pattern, export_results, export_summary, solve_cell, summarize,
    sweep_with_progress, RunConfig,
};
use trihybrid::metrics::AngleGrid;
use trihybrid::solver::Mode;

#[derive(Parser, Debug)]
#[command(name = "trihybrid", version, about = "Tri-hybrid ISAC beamforming simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one scenario with every requested mode and print its metrics.
    Run(Common),
    /// Monte-Carlo sweep over trials, powers, weights and modes; writes CSV.
    Sweep(Common),
    /// Solve one scenario and write element and array pattern grids.
    Pattern(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// TOML file with any subset of the run parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma-separated transmit powers in dBm.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    power_dbm: Option<Vec<f64>>,
    /// Comma-separated sensing weights in [0, 1].
    #[arg(long, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    /// Comma-separated modes: era-trihybrid, era-digital, oa-hybrid, oa-digital.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<Mode>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Trial index used by `run` and `pattern`.
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Write wall_ms as 0 so repeated sweeps produce identical files.
    #[arg(long)]
    no_timing: bool,
}

fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl Common {
    /// File values first, then flags on top.
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.trials {
            cfg.trials = v;
        }
        if let Some(v) = &self.power_dbm {
            cfg.power_dbm = v.clone();
        }
        if let Some(v) = &self.beta {
            cfg.beta = v.clone();
        }
        if let Some(v) = &self.modes {
            cfg.modes = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out_dir = v.clone();
        }
        if let Some(v) = self.workers {
            cfg.workers = v;
        }
        if self.no_timing {
            cfg.record_timing = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))
}

fn run(opts: &Common) -> Result<()> {
    let cfg = opts.resolve()?;
    let scenario = cfg.scenario(opts.trial)?;
    println!("mode,beta,power_dbm,objective,sum_rate_bps_hz,scnr_db,sinr_db,iterations,converged");
    for &mode in &cfg.modes {
        for &p in &cfg.power_dbm {
            for &beta in &cfg.beta {
                let r = solve_cell(&cfg, &scenario, mode, p, beta)?;
                let sinr: Vec<String> = r
                    .metrics
                    .sinr
                    .iter()
                    .map(|s| format!("{:.3}", 10.0 * s.log10()))
                    .collect();
                println!(
                    "{mode},{beta},{p},{:.6},{:.6},{:.3},{},{},{}",
                    r.metrics.objective,
                    r.metrics.sum_rate,
                    r.metrics.scnr_db(),
                    sinr.join(";"),
                    r.iterations,
                    r.converged
                );
            }
        }
    }
    Ok(())
}

fn sweep(opts: &Common) -> Result<()> {
    let cfg = opts.resolve()?;
    create_out_dir(&cfg)?;
    let cells = cfg.modes.len() * cfg.power_dbm.len() * cfg.beta.len();
    eprintln!("sweep: {} trials x {cells} cells", cfg.trials);
    let out = sweep_with_progress(&cfg, |done, total| {
        if done == total || done % 10 == 0 {
            eprintln!("  {done}/{total} trials");
        }
    })?;
    for f in &out.failures {
        eprintln!(
            "warning: trial {} {} beta={} power={} dBm failed: {}",
            f.trial, f.mode, f.beta, f.power_dbm, f.message
        );
    }
    let results = cfg.out_dir.join("results.csv");
    export_results(&out.results, &results)?;
    let summary = summarize(&out.results);
    export_summary(&summary, &cfg.out_dir.join("summary.csv"))?;
    println!("mode,beta,power_dbm,trials,median_objective,median_sum_rate_bps_hz,median_scnr_db");
    for s in &summary {
        println!(
            "{},{},{},{},{:.6},{:.6},{:.3}",
            s.mode, s.beta, s.power_dbm, s.trials, s.median_objective, s.median_sum_rate, s.median_scnr_db
        );
    }
    eprintln!("wrote {}", results.display());
    Ok(())
}

fn pattern(opts: &Common) -> Result<()> {
    let cfg = opts.resolve()?;
    create_out_dir(&cfg)?;
    let grid = AngleGrid::new(cfg.pattern_theta, cfg.pattern_phi)?;
    let geom = cfg.geometry()?;
    let basis = cfg.basis()?;
    let scenario = cfg.scenario(opts.trial)?;
    let (p, beta) = (cfg.power_dbm[0], cfg.beta[0]);
    for &mode in &cfg.modes {
        let r = solve_cell(&cfg, &scenario, mode, p, beta)?;
        let element = cfg.out_dir.join(format!("pattern_{mode}_element.csv"));
        let array = cfg.out_dir.join(format!("pattern_{mode}_array.csv"));
        export_element_pattern(r.beamformer.em.coeff(0), &basis, &grid, &element)?;
        export_array_pattern(&r.beamformer, &geom, &basis, &grid, &array)?;
        eprintln!("wrote {} and {}", element.display(), array.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(o) => run(o),
        Command::Sweep(o) => sweep(o),
        Command::Pattern(o) => pattern(o),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\ntrials = 3\nbeta = [0.2]\nmodes = [\"oa-digital\"]\n").unwrap();
        let opts = Common {
            config: Some(path),
            seed: Some(9),
            ..Common::default()
        };
        let cfg = opts.resolve().unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.trials, 3);
        assert_eq!(cfg.beta, vec![0.2]);
        assert_eq!(cfg.modes, vec![Mode::OaDigital]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "sed = 5\n").unwrap();
        let opts = Common {
            config: Some(path),
            ..Common::default()
        };
        assert!(opts.resolve().is_err());
    }

    #[test]
    fn parses_lists() {
        let cli = Cli::try_parse_from([
            "trihybrid",
            "sweep",
            "--power-dbm",
            "-30,-20",
            "--modes",
            "era-trihybrid,oa-hybrid",
        ])
        .unwrap();
        let Command::Sweep(o) = cli.command else { panic!() };
        assert_eq!(o.power_dbm, Some(vec![-30.0, -20.0]));
        assert_eq!(o.modes, Some(vec![Mode::EraTrihybrid, Mode::OaHybrid]));
        assert!(Cli::try_parse_from(["trihybrid", "sweep", "--modes", "bogus"]).is_err());
    }
}
