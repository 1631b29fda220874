//! Scenario sampling and EM-domain channel synthesis.
//!
//! An EM-domain channel vector has length `N_T · T` and is antenna-major:
//! entries `n·T .. (n+1)·T` hold `α · a_n · b(θ, φ)` for element `n`. The
//! effective (compact) channel seen by the precoder is obtained blockwise as
//! `h_n = c^(n)^H · block_n`, i.e. `F_EM^H h^EM` with a block-diagonal
//! `F_EM`, without forming `F_EM` explicitly.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Direction, UpaGeometry};
use crate::harmonics::HarmonicBasis;
use crate::linalg::{cis, inner, norm_sqr, unit_vector, CVector};

/// One propagation path (or a point reflector seen over a round trip).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub dir: Direction,
    pub gain: Complex64,
    /// Radial distance of the entity producing this path, in meters.
    pub range: f64,
}

/// Placement of users, target and scatterers together with the link budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Paths of each communication user; the first one is line of sight.
    pub users: Vec<Vec<Path>>,
    pub target: Path,
    pub scatterers: Vec<Path>,
    /// Transmit power budget in watts.
    pub power_w: f64,
    /// Noise power in watts.
    pub noise_power_w: f64,
    /// Sensing weight; the communication weight is `1 - beta`.
    pub beta: f64,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_scatterers(&self) -> usize {
        self.scatterers.len()
    }

    pub fn comm_weight(&self) -> f64 {
        1.0 - self.beta
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() {
            return Err(Error::Config("scenario needs at least one user".into()));
        }
        if let Some(k) = self.users.iter().position(|p| p.is_empty()) {
            return Err(Error::Config(format!("user {k} has no propagation paths")));
        }
        if !(self.power_w > 0.0 && self.power_w.is_finite()) {
            return Err(Error::domain("power_w", self.power_w, "positive"));
        }
        if !(self.noise_power_w > 0.0 && self.noise_power_w.is_finite()) {
            return Err(Error::domain("noise_power_w", self.noise_power_w, "positive"));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::domain("beta", self.beta, "[0, 1]"));
        }
        let all = self
            .users
            .iter()
            .flatten()
            .chain(std::iter::once(&self.target))
            .chain(&self.scatterers);
        if all
            .into_iter()
            .any(|p| !(p.gain.re.is_finite() && p.gain.im.is_finite()))
        {
            return Err(Error::Config("non-finite path gain".into()));
        }
        Ok(())
    }

    pub fn with_power(mut self, power_w: f64) -> Self {
        self.power_w = power_w;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }
}

/// Sampling bounds and counts for [`sample_scenario`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_users: usize,
    pub num_scatterers: usize,
    /// Paths per user: one LoS path plus `paths_per_user - 1` NLoS paths
    /// bounced off the first scatterers.
    pub paths_per_user: usize,
    pub theta_deg: (f64, f64),
    pub phi_deg: (f64, f64),
    pub range_m: (f64, f64),
    pub target_rcs: f64,
    pub scatterer_rcs: f64,
    pub wavelength: f64,
    pub power_w: f64,
    pub noise_power_w: f64,
    pub beta: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_users: 2,
            num_scatterers: 2,
            paths_per_user: 1,
            theta_deg: (0.0, 180.0),
            phi_deg: (0.0, 360.0),
            range_m: (10.0, 50.0),
            target_rcs: 1.0,
            scatterer_rcs: 1.0,
            wavelength: crate::geometry::SPEED_OF_LIGHT / 3.0e9,
            power_w: 1e-5,
            noise_power_w: 1e-11,
            beta: 0.5,
        }
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("theta_deg", self.theta_deg),
            ("phi_deg", self.phi_deg),
            ("range_m", self.range_m),
        ] {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::Config(format!("empty sampling interval {name} = ({lo}, {hi})")));
            }
        }
        if self.theta_deg.0 < 0.0 || self.theta_deg.1 > 180.0 {
            return Err(Error::Config("theta bounds must lie in [0, 180] degrees".into()));
        }
        if self.range_m.0 < 0.0 {
            return Err(Error::Config("range bounds must be nonnegative".into()));
        }
        if self.paths_per_user == 0 && self.num_users > 0 {
            return Err(Error::Config("paths_per_user must be at least 1".into()));
        }
        if self.paths_per_user > 1 + self.num_scatterers {
            return Err(Error::Config(format!(
                "paths_per_user = {} needs at least {} scatterers for NLoS bounces",
                self.paths_per_user,
                self.paths_per_user - 1
            )));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::domain("wavelength", self.wavelength, "positive"));
        }
        if self.target_rcs < 0.0 || self.scatterer_rcs < 0.0 {
            return Err(Error::Config("radar cross sections must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    OneWay,
    RoundTrip,
}

/// Path amplitude: free-space `λ/(4πr)` one way, radar equation
/// `sqrt(λ² σ / ((4π)³ r⁴))` over a round trip.
pub fn path_gain_magnitude(kind: PathKind, range: f64, wavelength: f64, rcs: f64) -> Result<f64> {
    if !(range > 0.0 && range.is_finite()) {
        return Err(Error::domain("range", range, "positive"));
    }
    Ok(match kind {
        PathKind::OneWay => wavelength / (4.0 * PI * range),
        PathKind::RoundTrip => (wavelength * wavelength * rcs / ((4.0 * PI).powi(3) * range.powi(4))).sqrt(),
    })
}

/// Complex path gain with a phase drawn uniformly from `[0, 2π)`.
pub fn path_gain<R: Rng + ?Sized>(
    kind: PathKind,
    range: f64,
    wavelength: f64,
    rcs: f64,
    rng: &mut R,
) -> Result<Complex64> {
    let mag = path_gain_magnitude(kind, range, wavelength, rcs)?;
    Ok(mag * cis(rng.random_range(0.0..2.0 * PI)))
}

fn open_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    loop {
        let v = rng.random_range(lo..hi);
        if v > lo {
            return v;
        }
    }
}

struct Placement {
    dir: Direction,
    range: f64,
}

fn place<R: Rng + ?Sized>(rng: &mut R, cfg: &ScenarioConfig) -> Placement {
    let theta = open_uniform(rng, cfg.theta_deg).to_radians();
    let phi = open_uniform(rng, cfg.phi_deg).to_radians();
    let range = open_uniform(rng, cfg.range_m);
    Placement {
        dir: Direction { theta, phi },
        range,
    }
}

/// Draws a scenario from the generator.
pub fn sample_scenario_with<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<Scenario> {
    cfg.validate()?;
    let user_pos: Vec<_> = (0..cfg.num_users).map(|_| place(rng, cfg)).collect();
    let target_pos = place(rng, cfg);
    let scat_pos: Vec<_> = (0..cfg.num_scatterers).map(|_| place(rng, cfg)).collect();

    let lambda = cfg.wavelength;
    let mut users = Vec::with_capacity(cfg.num_users);
    for pos in &user_pos {
        let mut paths = Vec::with_capacity(cfg.paths_per_user);
        paths.push(Path {
            dir: pos.dir,
            gain: path_gain(PathKind::OneWay, pos.range, lambda, 1.0, rng)?,
            range: pos.range,
        });
        for s in scat_pos.iter().take(cfg.paths_per_user - 1) {
            paths.push(Path {
                dir: s.dir,
                gain: path_gain(PathKind::OneWay, s.range + pos.range, lambda, 1.0, rng)?,
                range: s.range,
            });
        }
        users.push(paths);
    }
    let target = Path {
        dir: target_pos.dir,
        gain: path_gain(PathKind::RoundTrip, target_pos.range, lambda, cfg.target_rcs, rng)?,
        range: target_pos.range,
    };
    let scatterers = scat_pos
        .iter()
        .map(|s| {
            Ok(Path {
                dir: s.dir,
                gain: path_gain(PathKind::RoundTrip, s.range, lambda, cfg.scatterer_rcs, rng)?,
                range: s.range,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let scenario = Scenario {
        users,
        target,
        scatterers,
        power_w: cfg.power_w,
        noise_power_w: cfg.noise_power_w,
        beta: cfg.beta,
    };
    scenario.validate()?;
    Ok(scenario)
}

/// Deterministic scenario for `seed`.
pub fn sample_scenario(cfg: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_scenario_with(cfg, &mut rng)
}

/// Per-element harmonic coefficients `c^(n)`, each of unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmBeamformer {
    coeffs: Vec<CVector>,
}

impl EmBeamformer {
    /// Unit-norm tolerance accepted by [`EmBeamformer::new`].
    pub const NORM_TOLERANCE: f64 = 1e-9;

    pub fn new(coeffs: Vec<CVector>) -> Result<Self> {
        let Some(first) = coeffs.first() else {
            return Err(Error::Dimension("EM beamformer needs at least one element".into()));
        };
        let t = first.len();
        for (n, c) in coeffs.iter().enumerate() {
            if c.len() != t {
                return Err(Error::Dimension(format!(
                    "coefficient vector {n} has length {}, expected {t}",
                    c.len()
                )));
            }
            let norm = norm_sqr(c).sqrt();
            if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
                return Err(Error::domain("||c||", norm, "unit norm"));
            }
        }
        Ok(Self { coeffs })
    }

    /// Every element set to the constant harmonic `e_1` (isotropic pattern).
    pub fn isotropic(num_antennas: usize, basis_len: usize) -> Self {
        Self {
            coeffs: vec![unit_vector(basis_len, 0); num_antennas],
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.coeffs.len()
    }

    pub fn basis_len(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn coeff(&self, n: usize) -> &CVector {
        &self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[CVector] {
        &self.coeffs
    }

    /// Replaces `c^(n)`; the caller guarantees unit norm.
    pub(crate) fn set_coeff(&mut self, n: usize, c: CVector) {
        debug_assert!((norm_sqr(&c) - 1.0).abs() < 1e-9);
        self.coeffs[n] = c;
    }
}

/// EM-domain channel vector (antenna-major, blocks of length `T`).
#[derive(Debug, Clone, PartialEq)]
pub struct EmChannelVector {
    values: CVector,
    block_len: usize,
}

impl EmChannelVector {
    pub fn new(values: CVector, block_len: usize) -> Result<Self> {
        if block_len == 0 || !values.len().is_multiple_of(block_len) {
            return Err(Error::Dimension(format!(
                "length {} is not a multiple of block length {block_len}",
                values.len()
            )));
        }
        Ok(Self { values, block_len })
    }

    pub fn zeros(num_antennas: usize, block_len: usize) -> Self {
        Self {
            values: CVector::zeros(num_antennas * block_len),
            block_len,
        }
    }

    pub fn values(&self) -> &CVector {
        &self.values
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn num_antennas(&self) -> usize {
        self.values.len() / self.block_len
    }

    /// Block `n` (0-based), i.e. `h^EM_(n)`.
    pub fn block(&self, n: usize) -> CVector {
        self.values.rows(n * self.block_len, self.block_len).into_owned()
    }

    fn scale(mut self, s: f64) -> Self {
        self.values *= Complex64::new(s, 0.0);
        self
    }
}

impl std::ops::Add for EmChannelVector {
    type Output = EmChannelVector;

    fn add(mut self, rhs: Self) -> Self {
        assert_eq!(self.values.len(), rhs.values.len());
        self.values += rhs.values;
        self
    }
}

/// Single-path EM vector: block `n` is `α · a_n · b(θ, φ)`.
pub fn em_channel_single_path(path: &Path, geom: &UpaGeometry, basis: &HarmonicBasis) -> Result<EmChannelVector> {
    let b = basis.basis_vector(path.dir.theta, path.dir.phi)?;
    let a = geom.steering(path.dir);
    let t = basis.len();
    let mut values = CVector::zeros(a.len() * t);
    for (n, an) in a.iter().enumerate() {
        let w = path.gain * an;
        for (i, bi) in b.iter().enumerate() {
            values[n * t + i] = w * bi;
        }
    }
    EmChannelVector::new(values, t)
}

/// Communication channel `sqrt(N_T / L) Σ_l h^EM_l` over a user's paths.
pub fn em_channel_multipath(paths: &[Path], geom: &UpaGeometry, basis: &HarmonicBasis) -> Result<EmChannelVector> {
    if paths.is_empty() {
        return Err(Error::Config("a user needs at least one path".into()));
    }
    let mut acc = EmChannelVector::zeros(geom.num_elements(), basis.len());
    for p in paths {
        acc = acc + em_channel_single_path(p, geom, basis)?;
    }
    let scale = (geom.num_elements() as f64 / paths.len() as f64).sqrt();
    Ok(acc.scale(scale))
}

/// EM channels of every entity in a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct EmChannels {
    pub users: Vec<EmChannelVector>,
    pub target: EmChannelVector,
    pub scatterers: Vec<EmChannelVector>,
}

impl EmChannels {
    pub fn num_antennas(&self) -> usize {
        self.target.num_antennas()
    }

    pub fn block_len(&self) -> usize {
        self.target.block_len()
    }

    pub fn get(&self, entity: Entity) -> &EmChannelVector {
        match entity {
            Entity::User(k) => &self.users[k],
            Entity::Target => &self.target,
            Entity::Scatterer(m) => &self.scatterers[m],
        }
    }

    /// Effective channels for a given EM configuration.
    pub fn compact(&self, em: &EmBeamformer) -> Result<CompactChannels> {
        Ok(CompactChannels {
            users: self
                .users
                .iter()
                .map(|h| compact_channel(em, h))
                .collect::<Result<_>>()?,
            target: compact_channel(em, &self.target)?,
            scatterers: self
                .scatterers
                .iter()
                .map(|h| compact_channel(em, h))
                .collect::<Result<_>>()?,
        })
    }
}

/// Assembles `h_k^EM`, `h_t^EM` and `h_int,m^EM`.
pub fn assemble_channels(scenario: &Scenario, geom: &UpaGeometry, basis: &HarmonicBasis) -> Result<EmChannels> {
    scenario.validate()?;
    Ok(EmChannels {
        users: scenario
            .users
            .iter()
            .map(|paths| em_channel_multipath(paths, geom, basis))
            .collect::<Result<_>>()?,
        target: em_channel_single_path(&scenario.target, geom, basis)?,
        scatterers: scenario
            .scatterers
            .iter()
            .map(|p| em_channel_single_path(p, geom, basis))
            .collect::<Result<_>>()?,
    })
}

/// `F_EM^H h^EM`, computed block by block.
pub fn compact_channel(em: &EmBeamformer, h_em: &EmChannelVector) -> Result<CVector> {
    if h_em.block_len() != em.basis_len() || h_em.num_antennas() != em.num_antennas() {
        return Err(Error::Dimension(format!(
            "EM channel has {} blocks of length {}, beamformer has {} vectors of length {}",
            h_em.num_antennas(),
            h_em.block_len(),
            em.num_antennas(),
            em.basis_len()
        )));
    }
    let t = h_em.block_len();
    Ok(CVector::from_iterator(
        em.num_antennas(),
        em.coeffs()
            .iter()
            .enumerate()
            .map(|(n, c)| c.dotc(&h_em.values().rows(n * t, t))),
    ))
}

/// Effective channels of every entity (length `N_T` each).
#[derive(Debug, Clone, PartialEq)]
pub struct CompactChannels {
    pub users: Vec<CVector>,
    pub target: CVector,
    pub scatterers: Vec<CVector>,
}

impl CompactChannels {
    /// All channels divided by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let f = Complex64::new(1.0 / s, 0.0);
        Self {
            users: self.users.iter().map(|h| h * f).collect(),
            target: &self.target * f,
            scatterers: self.scatterers.iter().map(|h| h * f).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Entity {
    User(usize),
    Target,
    Scatterer(usize),
}

/// Reference channel built element by element: per-element pattern gain
/// `G^(n) = c^(n)^H b(θ, φ)`, array response `a`, summed over paths with the
/// `sqrt(N_T / L)` normalization for users.
pub fn elementwise_oracle(
    scenario: &Scenario,
    entity: Entity,
    em: &EmBeamformer,
    geom: &UpaGeometry,
    basis: &HarmonicBasis,
) -> Result<CVector> {
    let n_t = geom.num_elements();
    if em.num_antennas() != n_t || em.basis_len() != basis.len() {
        return Err(Error::Dimension("beamformer does not match geometry/basis".into()));
    }
    let (paths, scale): (&[Path], f64) = match entity {
        Entity::User(k) => {
            let p = &scenario.users[k];
            (p, (n_t as f64 / p.len() as f64).sqrt())
        }
        Entity::Target => (std::slice::from_ref(&scenario.target), 1.0),
        Entity::Scatterer(m) => (std::slice::from_ref(&scenario.scatterers[m]), 1.0),
    };
    let mut h = CVector::zeros(n_t);
    for p in paths {
        let b = basis.basis_vector(p.dir.theta, p.dir.phi)?;
        let a = geom.steering(p.dir);
        for n in 0..n_t {
            let g = inner(em.coeff(n), &b);
            h[n] += p.gain * g * a[n];
        }
    }
    Ok(h * Complex64::new(scale, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn geom() -> UpaGeometry {
        UpaGeometry::half_wavelength(4, 4, 3.0e9).unwrap()
    }

    fn random_em(rng: &mut ChaCha8Rng, n: usize, t: usize) -> EmBeamformer {
        let coeffs = (0..n)
            .map(|_| {
                let v = CVector::from_fn(t, |_, _| {
                    Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
                });
                let norm = v.norm();
                v / Complex64::new(norm, 0.0)
            })
            .collect();
        EmBeamformer::new(coeffs).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let cfg = ScenarioConfig::default();
        let a = sample_scenario(&cfg, 42).unwrap();
        let b = sample_scenario(&cfg, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.num_users(), 2);
        assert_eq!(a.num_scatterers(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let s = sample_scenario_with(&cfg, &mut rng).unwrap();
            for p in s.users.iter().flatten().chain([&s.target]).chain(&s.scatterers) {
                assert!(p.range > 10.0 && p.range < 50.0);
                assert!(p.dir.theta > 0.0 && p.dir.theta < PI);
                assert!(p.dir.phi > 0.0 && p.dir.phi < 2.0 * PI);
            }
        }
    }

    #[test]
    fn empty_interval_rejected() {
        let cfg = ScenarioConfig {
            range_m: (20.0, 20.0),
            ..Default::default()
        };
        assert!(sample_scenario(&cfg, 1).is_err());
        let cfg = ScenarioConfig {
            paths_per_user: 4,
            ..Default::default()
        };
        assert!(sample_scenario(&cfg, 1).is_err());
    }

    #[test]
    fn nlos_paths_reuse_scatterer_directions() {
        let cfg = ScenarioConfig {
            paths_per_user: 3,
            ..Default::default()
        };
        let s = sample_scenario(&cfg, 3).unwrap();
        for paths in &s.users {
            assert_eq!(paths.len(), 3);
            assert_eq!(paths[1].dir, s.scatterers[0].dir);
            assert_eq!(paths[2].dir, s.scatterers[1].dir);
        }
    }

    #[test]
    fn path_gain_laws() {
        let one = path_gain_magnitude(PathKind::OneWay, 10.0, 0.1, 1.0).unwrap();
        let one2 = path_gain_magnitude(PathKind::OneWay, 20.0, 0.1, 1.0).unwrap();
        assert!((one / one2 - 2.0).abs() < 1e-12);
        let rt = path_gain_magnitude(PathKind::RoundTrip, 10.0, 0.1, 1.0).unwrap();
        let rt2 = path_gain_magnitude(PathKind::RoundTrip, 20.0, 0.1, 1.0).unwrap();
        assert!((rt / rt2 - 4.0).abs() < 1e-12);
        let expected = (0.01_f64 / ((4.0 * PI).powi(3) * 1e4)).sqrt();
        assert!((rt - expected).abs() < 1e-18);
        assert!((rt - 2.245e-5).abs() < 0.001e-5);
        assert!(path_gain_magnitude(PathKind::OneWay, 0.0, 0.1, 1.0).is_err());
    }

    #[test]
    fn single_antenna_path_is_scaled_basis() {
        let g = UpaGeometry::new(1, 1, 0.05, 0.05, 0.1).unwrap();
        let basis = HarmonicBasis::new(3).unwrap();
        let path = Path {
            dir: Direction::new(1.0, 2.0).unwrap(),
            gain: Complex64::new(0.3, -0.4),
            range: 12.0,
        };
        let h = em_channel_single_path(&path, &g, &basis).unwrap();
        let b = basis.basis_vector(1.0, 2.0).unwrap();
        assert!((h.values() - b * path.gain).norm() < 1e-15);
    }

    #[test]
    fn blocks_follow_steering_and_norm() {
        let g = geom();
        let basis = HarmonicBasis::new(4).unwrap();
        let path = Path {
            dir: Direction::new(0.7, 4.0).unwrap(),
            gain: Complex64::new(2e-3, 1e-3),
            range: 20.0,
        };
        let h = em_channel_single_path(&path, &g, &basis).unwrap();
        let a = g.steering(path.dir);
        let b0 = h.block(0);
        for n in 0..16 {
            let bn = h.block(n);
            for t in 0..basis.len() {
                if b0[t].norm() > 1e-12 {
                    assert!((bn[t] / b0[t] - a[n]).norm() < 1e-10);
                }
            }
        }
        let expected = path.gain.norm_sqr() * 16.0 * 25.0 / (4.0 * PI);
        assert!((norm_sqr(h.values()) / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn multipath_normalization() {
        let g = geom();
        let basis = HarmonicBasis::new(2).unwrap();
        let path = Path {
            dir: Direction::new(0.7, 4.0).unwrap(),
            gain: Complex64::new(1.0, 0.0),
            range: 20.0,
        };
        let single = em_channel_single_path(&path, &g, &basis).unwrap();
        let one = em_channel_multipath(&[path], &g, &basis).unwrap();
        assert!((one.values() - single.values() * Complex64::new(4.0, 0.0)).norm() < 1e-12);
        let two = em_channel_multipath(&[path, path], &g, &basis).unwrap();
        let expected = single.values() * Complex64::new(2.0 * (8.0_f64).sqrt(), 0.0);
        assert!((two.values() - expected).norm() < 1e-12);
        assert!(em_channel_multipath(&[], &g, &basis).is_err());
    }

    #[test]
    fn isotropic_compact_channel() {
        let g = geom();
        let basis = HarmonicBasis::new(4).unwrap();
        let path = Path {
            dir: Direction::new(1.2, 0.4).unwrap(),
            gain: Complex64::new(0.5, 0.5),
            range: 20.0,
        };
        let h = em_channel_single_path(&path, &g, &basis).unwrap();
        let em = EmBeamformer::isotropic(16, 25);
        let compact = compact_channel(&em, &h).unwrap();
        let a = g.steering(path.dir);
        for n in 0..16 {
            let expected = path.gain * a[n] / (4.0 * PI).sqrt();
            assert!((compact[n] - expected).norm() < 1e-14);
        }
        let zero = compact_channel(&em, &EmChannelVector::zeros(16, 25)).unwrap();
        assert_eq!(zero.norm(), 0.0);
        let bad = EmChannelVector::zeros(16, 9);
        assert!(compact_channel(&em, &bad).is_err());
    }

    #[test]
    fn compact_matches_elementwise() {
        let g = geom();
        let basis = HarmonicBasis::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cfg = ScenarioConfig {
            paths_per_user: 2,
            ..Default::default()
        };
        for _ in 0..10 {
            let s = sample_scenario_with(&cfg, &mut rng).unwrap();
            let em = random_em(&mut rng, 16, 25);
            let ch = assemble_channels(&s, &g, &basis).unwrap();
            let compact = ch.compact(&em).unwrap();
            for (entity, h) in [(Entity::User(0), &compact.users[0]), (Entity::Target, &compact.target)] {
                let oracle = elementwise_oracle(&s, entity, &em, &g, &basis).unwrap();
                assert!((h - &oracle).norm() <= 1e-10 * oracle.norm());
            }
        }
    }

    #[test]
    fn zero_gain_gives_zero_channel() {
        let g = geom();
        let basis = HarmonicBasis::new(4).unwrap();
        let mut s = sample_scenario(&ScenarioConfig::default(), 5).unwrap();
        s.target.gain = Complex64::new(0.0, 0.0);
        let em = EmBeamformer::isotropic(16, 25);
        let h = elementwise_oracle(&s, Entity::Target, &em, &g, &basis).unwrap();
        assert_eq!(h.norm(), 0.0);
    }

    #[test]
    fn em_beamformer_validation() {
        assert!(EmBeamformer::new(vec![]).is_err());
        assert!(EmBeamformer::new(vec![CVector::zeros(4)]).is_err());
        assert!(EmBeamformer::new(vec![unit_vector(4, 1), unit_vector(3, 0)]).is_err());
        assert!(EmBeamformer::new(vec![unit_vector(4, 1)]).is_ok());
    }
}
