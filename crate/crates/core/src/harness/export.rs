use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::{CellSummary, TrialResult};
use crate::error::{Error, Result};
use crate::geometry::UpaGeometry;
use crate::harmonics::HarmonicBasis;
use crate::linalg::CVector;
use crate::metrics::{array_gain, element_pattern, AngleGrid, TriHybridBeamformer};

pub const RESULTS_HEADER: [&str; 10] = [
    "trial",
    "seed",
    "mode",
    "beta",
    "power_dbm",
    "objective",
    "sum_rate_bps_hz",
    "scnr_db",
    "iterations",
    "wall_ms",
];

const SUMMARY_HEADER: [&str; 10] = [
    "mode",
    "beta",
    "power_dbm",
    "trials",
    "mean_objective",
    "median_objective",
    "mean_sum_rate_bps_hz",
    "median_sum_rate_bps_hz",
    "mean_scnr_db",
    "median_scnr_db",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn finish(mut w: csv::Writer<BufWriter<File>>, path: &Path) -> Result<()> {
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One row per solved cell, in the given order.
pub fn export_results(results: &[TrialResult], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(RESULTS_HEADER).map_err(&e)?;
    for r in results {
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.mode.to_string(),
            num(r.beta),
            num(r.power_dbm),
            num(r.objective),
            num(r.sum_rate_bps_hz),
            num(r.scnr_db),
            r.iterations.to_string(),
            num(r.wall_ms),
        ])
        .map_err(&e)?;
    }
    finish(w, path)
}

/// Parses a file written by [`export_results`].
pub fn read_results(path: &Path) -> Result<Vec<TrialResult>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let headers = r.headers().map_err(csv_err(path))?.clone();
    if headers.iter().ne(RESULTS_HEADER) {
        return Err(Error::Config(format!("{}: unexpected header", path.display())));
    }
    r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
}

pub fn export_summary(summary: &[CellSummary], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(SUMMARY_HEADER).map_err(&e)?;
    for s in summary {
        w.write_record([
            s.mode.to_string(),
            num(s.beta),
            num(s.power_dbm),
            s.trials.to_string(),
            num(s.mean_objective),
            num(s.median_objective),
            num(s.mean_sum_rate),
            num(s.median_sum_rate),
            num(s.mean_scnr_db),
            num(s.median_scnr_db),
        ])
        .map_err(&e)?;
    }
    finish(w, path)
}

/// Element power pattern of one coefficient vector over the grid.
pub fn export_element_pattern(c: &CVector, basis: &HarmonicBasis, grid: &AngleGrid, path: &Path) -> Result<()> {
    let gains = element_pattern(c, basis, grid)?;
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(["theta_deg", "phi_deg", "gain_db"]).map_err(&e)?;
    for (dir, g) in grid.directions().zip(gains) {
        w.write_record([num(dir.theta.to_degrees()), num(dir.phi.to_degrees()), num(db(g))])
            .map_err(&e)?;
    }
    finish(w, path)
}

/// Beam power pattern of every stream, stream-major.
pub fn export_array_pattern(
    beamformer: &TriHybridBeamformer,
    geom: &UpaGeometry,
    basis: &HarmonicBasis,
    grid: &AngleGrid,
    path: &Path,
) -> Result<()> {
    let mut w = writer(path)?;
    let e = csv_err(path);
    w.write_record(["theta_deg", "phi_deg", "gain_db", "stream"])
        .map_err(&e)?;
    for stream in 0..beamformer.num_streams() {
        for dir in grid.directions() {
            let g = array_gain(beamformer, geom, basis, dir, stream)?;
            w.write_record([
                num(dir.theta.to_degrees()),
                num(dir.phi.to_degrees()),
                num(db(g)),
                stream.to_string(),
            ])
            .map_err(&e)?;
        }
    }
    finish(w, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::unit_vector;
    use crate::solver::Mode;

    fn row(trial: usize, mode: Mode) -> TrialResult {
        TrialResult {
            trial,
            seed: 7,
            mode,
            beta: 0.5,
            power_dbm: -20.0,
            objective: 1.0 / 3.0,
            sum_rate_bps_hz: std::f64::consts::PI,
            scnr_db: -42.123456789012345,
            iterations: 12,
            wall_ms: 0.1 + 0.2,
        }
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        export_results(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), RESULTS_HEADER.join(",") + "\n");
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let rows: Vec<_> = (0..2)
            .flat_map(|t| [row(t, Mode::EraTrihybrid), row(t, Mode::OaHybrid)])
            .collect();
        export_results(&rows, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(!text.contains('\r'));
        assert_eq!(read_results(&p).unwrap(), rows);
    }

    #[test]
    fn io_errors_carry_the_path() {
        let p = Path::new("/nonexistent-dir/x/r.csv");
        let err = export_results(&[], p).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x/r.csv"));
    }

    #[test]
    fn isotropic_element_pattern_is_flat() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        let basis = HarmonicBasis::new(4).unwrap();
        let grid = AngleGrid::new(7, 12).unwrap();
        export_element_pattern(&unit_vector(25, 0), &basis, &grid, &p).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        let expected = 10.0 * (1.0 / (4.0 * std::f64::consts::PI)).log10();
        let mut n = 0;
        for rec in r.records() {
            let g: f64 = rec.unwrap()[2].parse().unwrap();
            assert!((g - expected).abs() < 1e-12);
            n += 1;
        }
        assert_eq!(n, 7 * 12);
    }
}
