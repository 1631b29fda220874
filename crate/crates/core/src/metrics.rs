//! Communication and sensing performance measures, and radiation patterns.

use std::f64::consts::{LN_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{compact_channel, em_channel_multipath, CompactChannels, EmBeamformer, Path};
use crate::error::{Error, Result};
use crate::geometry::{Direction, UpaGeometry};
use crate::harmonics::HarmonicBasis;
use crate::linalg::{inner, norm_sqr, CMatrix, CVector};

/// Digital, analog and electromagnetic precoders.
///
/// `analog` is `None` for fully digital operation, in which case `digital`
/// is the `N_T × K` precoder itself; otherwise `digital` is `N_TRF × K` and
/// `analog` is the unit-modulus `N_T × N_TRF` phase-shifter network.
#[derive(Debug, Clone, PartialEq)]
pub struct TriHybridBeamformer {
    pub analog: Option<CMatrix>,
    pub digital: CMatrix,
    pub em: EmBeamformer,
}

impl TriHybridBeamformer {
    /// Equivalent fully digital precoder `F_RF F_BB`; column `k` is `f_FD,k`.
    pub fn precoder(&self) -> CMatrix {
        match &self.analog {
            Some(rf) => rf * &self.digital,
            None => self.digital.clone(),
        }
    }

    /// `Tr(F_RF F_BB F_BB^H F_RF^H)`.
    pub fn transmit_power(&self) -> f64 {
        self.precoder().iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn num_streams(&self) -> usize {
        self.digital.ncols()
    }
}

/// Per-user SINR, sum rate in bits/s/Hz, radar SCNR (all linear) and the
/// weighted objective `(1-β) R_c + β η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub sinr: Vec<f64>,
    pub sum_rate: f64,
    pub scnr: f64,
    pub objective: f64,
}

impl MetricsReport {
    pub fn scnr_db(&self) -> f64 {
        10.0 * self.scnr.log10()
    }

    /// Sum rate in nats/s/Hz.
    pub fn sum_rate_nats(&self) -> f64 {
        self.sum_rate * LN_2
    }

    /// The weighted objective with the rate measured in nats.
    pub fn objective_nats(&self, beta: f64) -> f64 {
        weighted_objective(self.sum_rate_nats(), self.scnr, beta)
    }
}

fn check_noise(noise_power: f64) -> Result<()> {
    if !(noise_power > 0.0) {
        return Err(Error::domain("noise_power", noise_power, "positive"));
    }
    Ok(())
}

fn check_rows(h: &CVector, precoder: &CMatrix) -> Result<()> {
    if h.len() != precoder.nrows() {
        return Err(Error::Dimension(format!(
            "channel length {} does not match precoder rows {}",
            h.len(),
            precoder.nrows()
        )));
    }
    Ok(())
}

/// `|h^H f_j|²` for every column `f_j` of the precoder.
pub(crate) fn beam_powers(h: &CVector, precoder: &CMatrix) -> Vec<f64> {
    precoder
        .column_iter()
        .map(|f| {
            h.iter()
                .zip(f.iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect()
}

/// SINR of each user and the sum rate `Σ log2(1 + γ_k)`.
pub fn sinr_and_rate(users: &[CVector], precoder: &CMatrix, noise_power: f64) -> Result<(Vec<f64>, f64)> {
    check_noise(noise_power)?;
    if users.len() != precoder.ncols() {
        return Err(Error::Dimension(format!(
            "{} users but {} precoder columns",
            users.len(),
            precoder.ncols()
        )));
    }
    let mut sinr = Vec::with_capacity(users.len());
    for (k, h) in users.iter().enumerate() {
        check_rows(h, precoder)?;
        let powers = beam_powers(h, precoder);
        let interference: f64 = powers.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, p)| p).sum();
        sinr.push(powers[k] / (interference + noise_power));
    }
    let rate = sinr.iter().map(|g| (1.0 + g).log2()).sum();
    Ok((sinr, rate))
}

/// Radar SCNR `Σ_k |h_t^H f_k|² / (Σ_j Σ_m |h_int,m^H f_j|² + σ²)`,
/// accumulated as a sum of fractions over the common clutter denominator.
pub fn scnr(target: &CVector, scatterers: &[CVector], precoder: &CMatrix, noise_power: f64) -> Result<f64> {
    check_noise(noise_power)?;
    check_rows(target, precoder)?;
    let mut clutter = noise_power;
    for h in scatterers {
        check_rows(h, precoder)?;
        clutter += beam_powers(h, precoder).iter().sum::<f64>();
    }
    Ok(beam_powers(target, precoder).iter().map(|c| c / clutter).sum())
}

/// `(1 - β) · rate + β · scnr`.
pub fn weighted_objective(rate: f64, scnr: f64, beta: f64) -> f64 {
    (1.0 - beta) * rate + beta * scnr
}

/// All metrics for a precoder over the given effective channels.
pub fn evaluate(channels: &CompactChannels, precoder: &CMatrix, noise_power: f64, beta: f64) -> Result<MetricsReport> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::domain("beta", beta, "[0, 1]"));
    }
    let (sinr, sum_rate) = sinr_and_rate(&channels.users, precoder, noise_power)?;
    let eta = scnr(&channels.target, &channels.scatterers, precoder, noise_power)?;
    Ok(MetricsReport {
        sinr,
        sum_rate,
        scnr: eta,
        objective: weighted_objective(sum_rate, eta, beta),
    })
}

/// Uniform angular sampling: `n_theta` polar samples spanning `[0, π]`
/// (inclusive) and `n_phi` azimuth samples spanning `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AngleGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl AngleGrid {
    pub fn new(n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < 2 || n_phi < 1 {
            return Err(Error::Config(format!(
                "pattern grid {n_theta}x{n_phi} needs n_theta >= 2 and n_phi >= 1"
            )));
        }
        Ok(Self { n_theta, n_phi })
    }

    pub fn theta(&self, i: usize) -> f64 {
        PI * i as f64 / (self.n_theta - 1) as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.n_phi as f64
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid points in row-major order (θ outer, φ inner).
    pub fn directions(&self) -> impl Iterator<Item = Direction> + '_ {
        (0..self.n_theta).flat_map(move |i| {
            (0..self.n_phi).map(move |j| Direction {
                theta: self.theta(i),
                phi: self.phi(j),
            })
        })
    }
}

/// Element power pattern `|c^H b(θ, φ)|²` at a single direction.
pub fn element_gain(c: &CVector, basis: &HarmonicBasis, dir: Direction) -> Result<f64> {
    let b = basis.basis_vector(dir.theta, dir.phi)?;
    if b.len() != c.len() {
        return Err(Error::Dimension(format!(
            "coefficient length {} vs basis {}",
            c.len(),
            b.len()
        )));
    }
    Ok(inner(c, &b).norm_sqr())
}

/// Element power pattern over a grid, row-major (θ outer).
pub fn element_pattern(c: &CVector, basis: &HarmonicBasis, grid: &AngleGrid) -> Result<Vec<f64>> {
    let norm = norm_sqr(c).sqrt();
    if (norm - 1.0).abs() > EmBeamformer::NORM_TOLERANCE {
        return Err(Error::domain("||c||", norm, "unit norm"));
    }
    grid.directions().map(|d| element_gain(c, basis, d)).collect()
}

/// Beam power `|h(dir)^H f_FD,k|²` toward a unit-gain line-of-sight probe
/// user placed at `dir`.
pub fn array_gain(
    beamformer: &TriHybridBeamformer,
    geom: &UpaGeometry,
    basis: &HarmonicBasis,
    dir: Direction,
    stream: usize,
) -> Result<f64> {
    let precoder = beamformer.precoder();
    array_gain_with(&precoder, &beamformer.em, geom, basis, dir, stream)
}

pub(crate) fn array_gain_with(
    precoder: &CMatrix,
    em: &EmBeamformer,
    geom: &UpaGeometry,
    basis: &HarmonicBasis,
    dir: Direction,
    stream: usize,
) -> Result<f64> {
    if stream >= precoder.ncols() {
        return Err(Error::Dimension(format!(
            "stream {stream} out of {} streams",
            precoder.ncols()
        )));
    }
    let probe = Path {
        dir,
        gain: Complex64::new(1.0, 0.0),
        range: 1.0,
    };
    let h = compact_channel(em, &em_channel_multipath(&[probe], geom, basis)?)?;
    check_rows(&h, precoder)?;
    let f = precoder.column(stream);
    Ok(h.iter()
        .zip(f.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<Complex64>()
        .norm_sqr())
}
