//! Fractional-programming surrogate: closed-form auxiliary variables and the
//! fully digital beamformer update with its power-constraint multiplier.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;

use crate::channel::CompactChannels;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Auxiliary variables of the Lagrangian-dual and quadratic transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxVars {
    pub gamma: Vec<f64>,
    /// Communication multipliers `p_k`.
    pub p: Vec<Complex64>,
    /// Sensing multipliers `q_k`.
    pub q: Vec<Complex64>,
}

/// Every inner product the objective depends on:
/// `x[(k, j)] = h_k^H f_j`, `y[k] = h_t^H f_k`, `z[(j, m)] = h_int,m^H f_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Products {
    pub x: CMatrix,
    pub y: Vec<Complex64>,
    pub z: CMatrix,
}

impl Products {
    pub fn new(channels: &CompactChannels, precoder: &CMatrix) -> Self {
        let k = precoder.ncols();
        let m = channels.scatterers.len();
        let cols: Vec<CVector> = precoder.column_iter().map(|c| c.into_owned()).collect();
        let x = CMatrix::from_fn(k, k, |a, b| channels.users[a].dotc(&cols[b]));
        let y = cols.iter().map(|f| channels.target.dotc(f)).collect();
        let z = CMatrix::from_fn(k, m, |j, s| channels.scatterers[s].dotc(&cols[j]));
        Self { x, y, z }
    }

    pub fn num_users(&self) -> usize {
        self.y.len()
    }

    /// `A_k + B_k = Σ_j |x_kj|² + σ²`.
    fn received_power(&self, k: usize, noise: f64) -> f64 {
        self.x.row(k).iter().map(|v| v.norm_sqr()).sum::<f64>() + noise
    }

    /// Clutter-plus-noise `D = Σ_j Σ_m |z_jm|² + σ²`.
    fn clutter(&self, noise: f64) -> f64 {
        self.z.iter().map(|v| v.norm_sqr()).sum::<f64>() + noise
    }

    fn sinr(&self, k: usize, noise: f64) -> f64 {
        let a = self.x[(k, k)].norm_sqr();
        a / (self.received_power(k, noise) - a)
    }

    /// `(1-β) Σ ln(1+γ_k) + β Σ |y_k|²/D`, the objective in nats.
    pub fn objective(&self, beta: f64, noise: f64) -> f64 {
        let d = self.clutter(noise);
        (0..self.num_users())
            .map(|k| (1.0 - beta) * (1.0 + self.sinr(k, noise)).ln() + beta * self.y[k].norm_sqr() / d)
            .sum()
    }

    /// Closed-form maximizers of the surrogate in `(γ, p, q)`.
    pub fn aux(&self, beta: f64, noise: f64) -> AuxVars {
        let d = self.clutter(noise);
        let kk = self.num_users();
        let mut gamma = Vec::with_capacity(kk);
        let mut p = Vec::with_capacity(kk);
        let mut q = Vec::with_capacity(kk);
        for k in 0..kk {
            let g = self.sinr(k, noise);
            let w = ((1.0 - beta) * (1.0 + g)).sqrt();
            gamma.push(g);
            p.push(self.x[(k, k)] * (w / self.received_power(k, noise)));
            q.push(self.y[k] * (beta.sqrt() / d));
        }
        AuxVars { gamma, p, q }
    }

    /// Quadratic-transform surrogate `f_qua` at fixed auxiliary variables.
    pub fn surrogate(&self, aux: &AuxVars, beta: f64, noise: f64) -> f64 {
        let comm = 1.0 - beta;
        let d = self.clutter(noise);
        let sb = beta.sqrt();
        (0..self.num_users())
            .map(|k| {
                let g = aux.gamma[k];
                let w = (comm * (1.0 + g)).sqrt();
                comm * (1.0 + g).ln() - comm * g + 2.0 * (aux.p[k].conj() * self.x[(k, k)]).re * w
                    - aux.p[k].norm_sqr() * self.received_power(k, noise)
                    + 2.0 * (aux.q[k].conj() * self.y[k]).re * sb
                    - aux.q[k].norm_sqr() * d
            })
            .sum()
    }
}

/// `γ_k`, `p_k`, `q_k` for the current beamformers.
pub fn update_aux(channels: &CompactChannels, precoder: &CMatrix, beta: f64, noise: f64) -> AuxVars {
    Products::new(channels, precoder).aux(beta, noise)
}

/// `f_qua` evaluated at the given beamformers and auxiliary variables.
pub fn surrogate_objective(
    channels: &CompactChannels,
    precoder: &CMatrix,
    aux: &AuxVars,
    beta: f64,
    noise: f64,
) -> f64 {
    Products::new(channels, precoder).surrogate(aux, beta, noise)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalUpdate {
    /// `N_T × K`, column `k` is `f_FD,k`.
    pub precoder: CMatrix,
    /// Optimal multiplier of the power constraint.
    pub mu: f64,
    /// `Σ_k ||f_k||²`.
    pub power: f64,
    pub bisection_steps: usize,
}

/// Eigen-decomposed normal equations `(Q + μ I) f_k = r_k`.
struct DualSystem {
    vectors: CMatrix,
    values: Vec<f64>,
    // U^H r_k, one column per user
    projected: CMatrix,
    null: Vec<bool>,
}

impl DualSystem {
    fn new(q: CMatrix, rhs: &CMatrix) -> Self {
        let eig = SymmetricEigen::new(q);
        let values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        let top = values.iter().cloned().fold(0.0, f64::max);
        let null = values.iter().map(|&v| v <= 1e-12 * top || v == 0.0).collect();
        let projected = eig.eigenvectors.adjoint() * rhs;
        Self {
            vectors: eig.eigenvectors,
            values,
            projected,
            null,
        }
    }

    /// Right-hand-side energy outside the range of `Q`, relative to the total.
    fn null_energy_fraction(&self) -> f64 {
        let total: f64 = self.projected.iter().map(|z| z.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let null: f64 = self
            .projected
            .row_iter()
            .zip(&self.null)
            .filter(|(_, &n)| n)
            .map(|(r, _)| r.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        null / total
    }

    fn weights(&self, mu: f64) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.null)
            .map(|(&v, &n)| if mu == 0.0 && n { 0.0 } else { 1.0 / (v + mu) })
            .collect()
    }

    fn power(&self, mu: f64) -> f64 {
        let w = self.weights(mu);
        self.projected
            .row_iter()
            .zip(&w)
            .map(|(r, wi)| wi * wi * r.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum()
    }

    fn solve(&self, mu: f64) -> CMatrix {
        let w = self.weights(mu);
        let mut scaled = self.projected.clone();
        for (i, wi) in w.iter().enumerate() {
            scaled.row_mut(i).scale_mut(*wi);
        }
        &self.vectors * scaled
    }
}

/// Maximizer of `f_qua` over the fully digital beamformers subject to
/// `Σ_k ||f_k||² ≤ power`:
/// `f_k = [Σ_j |p_j|² h_j h_j^H + (Σ_j |q_j|²) Σ_m h_m h_m^H + μ I]^† (p_k sqrt((1-β)(1+γ_k)) h_k + q_k sqrt(β) h_t)`
/// with `μ ≥ 0` set by bisection (complementary slackness).
pub fn digital_update(
    channels: &CompactChannels,
    aux: &AuxVars,
    beta: f64,
    power: f64,
    tolerance: f64,
) -> Result<DigitalUpdate> {
    if !(power > 0.0) {
        return Err(Error::domain("power", power, "positive"));
    }
    let (q, rhs) = normal_equations(channels, aux, beta);
    let (n, k) = rhs.shape();
    if rhs.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(DigitalUpdate {
            precoder: CMatrix::zeros(n, k),
            mu: 0.0,
            power: 0.0,
            bisection_steps: 0,
        });
    }

    let system = DualSystem::new(q, &rhs);
    if system.null_energy_fraction() <= 1e-20 {
        let p0 = system.power(0.0);
        if p0 <= power {
            return Ok(DigitalUpdate {
                precoder: system.solve(0.0),
                mu: 0.0,
                power: p0,
                bisection_steps: 0,
            });
        }
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut steps = 0;
    while system.power(hi) > power {
        lo = hi;
        hi *= 2.0;
        steps += 1;
        if !hi.is_finite() {
            return Err(Error::Config("dual variable bracket diverged".into()));
        }
    }
    let mut p_hi = system.power(hi);
    for _ in 0..200 {
        let gap = power - p_hi;
        if gap <= tolerance * power && hi * gap <= tolerance * power {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        steps += 1;
        let p_mid = system.power(mid);
        if p_mid > power {
            lo = mid;
        } else {
            hi = mid;
            p_hi = p_mid;
        }
    }
    Ok(DigitalUpdate {
        precoder: system.solve(hi),
        mu: hi,
        power: p_hi,
        bisection_steps: steps,
    })
}

/// Gram matrix `Σ_j |p_j|² h_j h_j^H + (Σ_j |q_j|²) Σ_m h_m h_m^H` and the
/// right-hand sides `p_k sqrt((1-β)(1+γ_k)) h_k + q_k sqrt(β) h_t` as columns.
fn normal_equations(channels: &CompactChannels, aux: &AuxVars, beta: f64) -> (CMatrix, CMatrix) {
    let n = channels.target.len();
    let k = channels.users.len();
    let mut q = CMatrix::zeros(n, n);
    for (h, pj) in channels.users.iter().zip(&aux.p) {
        q.gerc(Complex64::new(pj.norm_sqr(), 0.0), h, h, Complex64::new(1.0, 0.0));
    }
    let qsum: f64 = aux.q.iter().map(|v| v.norm_sqr()).sum();
    if qsum > 0.0 {
        for h in &channels.scatterers {
            q.gerc(Complex64::new(qsum, 0.0), h, h, Complex64::new(1.0, 0.0));
        }
    }
    let mut rhs = CMatrix::zeros(n, k);
    for j in 0..k {
        let w = ((1.0 - beta) * (1.0 + aux.gamma[j])).sqrt();
        let col = &channels.users[j] * (aux.p[j] * w) + &channels.target * (aux.q[j] * beta.sqrt());
        rhs.set_column(j, &col);
    }
    (q, rhs)
}

/// Digital beamformers at a fixed multiplier `μ`, ignoring the power budget.
pub fn digital_solution_at(channels: &CompactChannels, aux: &AuxVars, beta: f64, mu: f64) -> CMatrix {
    let (q, rhs) = normal_equations(channels, aux, beta);
    DualSystem::new(q, &rhs).solve(mu)
}
