//! Per-element update of the harmonic coefficients `c^(n)`.
//!
//! With every other element and the digital beamformers fixed, each inner
//! product in the objective is affine in `c^(n)`:
//! `h_k^H f_j = h̃_{k,j,n}^H c^(n) + cons_{k,j,n}` with
//! `h̃_{k,j,n} = conj(f_{j,(n)}) h^EM_{k,(n)}` and `cons` collecting the other
//! elements. The surrogate restricted to `c^(n)` is a concave quadratic on
//! the unit sphere, ascended with one Armijo-controlled Riemannian step.

use num_complex::Complex64;

use super::fp::{AuxVars, Products};
use crate::channel::{EmBeamformer, EmChannels};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};
use crate::manifolds::{armijo_search, sphere_tangent_project, Armijo, SpherePoint};

/// Effective vectors and constant terms for element `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerAntennaContext {
    pub antenna: usize,
    /// Current `c^(n)`.
    pub coeff: CVector,
    /// `user_vectors[k][j] = h̃_{k,j,n}`.
    pub user_vectors: Vec<Vec<CVector>>,
    /// `user_cons[(k, j)] = cons_{k,j,n}`.
    pub user_cons: CMatrix,
    /// `target_vectors[k] = h̃_{t,k,n}`.
    pub target_vectors: Vec<CVector>,
    pub target_cons: Vec<Complex64>,
    /// `clutter_vectors[j][m] = h̃_{int,j,m,n}`.
    pub clutter_vectors: Vec<Vec<CVector>>,
    /// `clutter_cons[(j, m)]`.
    pub clutter_cons: CMatrix,
}

/// Builds the element-`n` decomposition at the current state.
pub fn per_antenna_context(
    antenna: usize,
    channels: &EmChannels,
    em: &EmBeamformer,
    precoder: &CMatrix,
) -> Result<PerAntennaContext> {
    let n_t = em.num_antennas();
    if antenna >= n_t {
        return Err(Error::Dimension(format!("antenna {antenna} out of {n_t}")));
    }
    if channels.num_antennas() != n_t || channels.block_len() != em.basis_len() || precoder.nrows() != n_t {
        return Err(Error::Dimension(
            "EM channels, coefficients and precoder disagree".into(),
        ));
    }
    let k = precoder.ncols();
    if channels.users.len() != k {
        return Err(Error::Dimension(format!(
            "{} users but {k} streams",
            channels.users.len()
        )));
    }
    let m = channels.scatterers.len();
    let compact = channels.compact(em)?;
    let full = Products::new(&compact, precoder);
    let c = em.coeff(antenna);
    let f_n: Vec<Complex64> = (0..k).map(|j| precoder[(antenna, j)]).collect();

    // own[e] = h^EM_{e,(n)}^H c^(n)
    let own = |h: &crate::channel::EmChannelVector| -> (CVector, Complex64) {
        let block = h.block(antenna);
        let g = block.dotc(c);
        (block, g)
    };

    let users: Vec<_> = channels.users.iter().map(own).collect();
    let user_vectors = users
        .iter()
        .map(|(block, _)| f_n.iter().map(|fj| block * fj.conj()).collect())
        .collect();
    let user_cons = CMatrix::from_fn(k, k, |a, j| full.x[(a, j)] - f_n[j] * users[a].1);

    let (t_block, t_g) = own(&channels.target);
    let target_vectors = f_n.iter().map(|fk| &t_block * fk.conj()).collect();
    let target_cons = (0..k).map(|a| full.y[a] - f_n[a] * t_g).collect();

    let scat: Vec<_> = channels.scatterers.iter().map(own).collect();
    let clutter_vectors = f_n
        .iter()
        .map(|fj| scat.iter().map(|(block, _)| block * fj.conj()).collect())
        .collect();
    let clutter_cons = CMatrix::from_fn(k, m, |j, s| full.z[(j, s)] - f_n[j] * scat[s].1);

    Ok(PerAntennaContext {
        antenna,
        coeff: c.clone(),
        user_vectors,
        user_cons,
        target_vectors,
        target_cons,
        clutter_vectors,
        clutter_cons,
    })
}

impl PerAntennaContext {
    pub fn num_users(&self) -> usize {
        self.target_vectors.len()
    }

    pub fn num_scatterers(&self) -> usize {
        self.clutter_cons.ncols()
    }

    /// All inner products with `c^(n)` replaced by `c`.
    pub fn products(&self, c: &CVector) -> Products {
        let k = self.num_users();
        let m = self.num_scatterers();
        let x = CMatrix::from_fn(k, k, |a, j| self.user_vectors[a][j].dotc(c) + self.user_cons[(a, j)]);
        let y = (0..k)
            .map(|a| self.target_vectors[a].dotc(c) + self.target_cons[a])
            .collect();
        let z = CMatrix::from_fn(k, m, |j, s| {
            self.clutter_vectors[j][s].dotc(c) + self.clutter_cons[(j, s)]
        });
        Products { x, y, z }
    }

    /// Trace of the quadratic form in `c` that `f_qua^(n)` subtracts,
    /// `Σ_k |p_k|² Σ_j ||h̃_{k,j}||² + Σ_k |q_k|² Σ_j Σ_m ||h̃_{int,j,m}||²`.
    /// It bounds the largest curvature of the surrogate from above.
    pub fn curvature(&self, aux: &AuxVars) -> f64 {
        let users: f64 = self
            .user_vectors
            .iter()
            .zip(&aux.p)
            .map(|(row, p)| p.norm_sqr() * row.iter().map(|v| v.norm_squared()).sum::<f64>())
            .sum();
        let q: f64 = aux.q.iter().map(|q| q.norm_sqr()).sum();
        let clutter: f64 = self.clutter_vectors.iter().flatten().map(|v| v.norm_squared()).sum();
        users + q * clutter
    }

    /// Surrogate `f_qua^(n)` as a function of `c`.
    pub fn surrogate(&self, c: &CVector, aux: &AuxVars, beta: f64, noise: f64) -> f64 {
        self.products(c).surrogate(aux, beta, noise)
    }
}

/// `γ^(n)`, `p^(n)`, `q^(n)` from the element-`n` decomposition.
pub fn update_aux_antenna(ctx: &PerAntennaContext, beta: f64, noise: f64) -> AuxVars {
    ctx.products(&ctx.coeff).aux(beta, noise)
}

/// Euclidean gradient of `f_qua^(n)` at `c` under the real inner product
/// `Re(a^H b)` (so it equals `2 ∂f/∂c*`):
///
/// `2 Σ_k [ p_k w_k h̃_{k,k} - |p_k|² Σ_j h̃_{k,j} x_{k,j} + q_k sqrt(β) h̃_{t,k}
///          - |q_k|² Σ_j Σ_m h̃_{int,j,m} z_{j,m} ]`, `w_k = sqrt((1-β)(1+γ_k))`.
pub fn em_gradient_at(ctx: &PerAntennaContext, c: &CVector, aux: &AuxVars, beta: f64) -> CVector {
    let prods = ctx.products(c);
    let k = ctx.num_users();
    let m = ctx.num_scatterers();
    let sb = beta.sqrt();
    let mut g = CVector::zeros(c.len());
    // clutter part shares Σ_j Σ_m h̃ z across users
    let mut clutter = CVector::zeros(c.len());
    for j in 0..k {
        for s in 0..m {
            clutter.axpy(prods.z[(j, s)], &ctx.clutter_vectors[j][s], Complex64::new(1.0, 0.0));
        }
    }
    let q_energy: f64 = aux.q.iter().map(|q| q.norm_sqr()).sum();
    for a in 0..k {
        let w = ((1.0 - beta) * (1.0 + aux.gamma[a])).sqrt();
        g.axpy(aux.p[a] * w, &ctx.user_vectors[a][a], Complex64::new(1.0, 0.0));
        let pp = aux.p[a].norm_sqr();
        for j in 0..k {
            g.axpy(-prods.x[(a, j)] * pp, &ctx.user_vectors[a][j], Complex64::new(1.0, 0.0));
        }
        g.axpy(aux.q[a] * sb, &ctx.target_vectors[a], Complex64::new(1.0, 0.0));
    }
    g.axpy(Complex64::new(-q_energy, 0.0), &clutter, Complex64::new(1.0, 0.0));
    g * Complex64::new(2.0, 0.0)
}

/// Gradient at the context's current coefficient.
pub fn em_gradient(ctx: &PerAntennaContext, aux: &AuxVars, beta: f64) -> CVector {
    em_gradient_at(ctx, &ctx.coeff, aux, beta)
}

/// Rescales the rule's initial step by `1 / (2 · curvature)` so that a unit
/// `initial_step` corresponds to a gradient step on the curvature bound,
/// independent of channel and power scale.
pub fn curvature_scaled(rule: &Armijo, ctx: &PerAntennaContext, aux: &AuxVars) -> Armijo {
    let curv = ctx.curvature(aux);
    if curv > 0.0 && curv.is_finite() {
        rule.with_initial_step(rule.initial_step / (2.0 * curv))
    } else {
        *rule
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmStep {
    pub coeff: CVector,
    /// Surrogate value before and after the step.
    pub before: f64,
    pub after: f64,
    pub step: f64,
    pub stalled: bool,
}

/// Tangent projection, Armijo ascent and retraction of `c^(n)`; repeated
/// `steps` times with the auxiliary variables held fixed.
pub fn em_step(
    ctx: &PerAntennaContext,
    aux: &AuxVars,
    beta: f64,
    noise: f64,
    rule: &Armijo,
    steps: usize,
) -> Result<EmStep> {
    let mut point = SpherePoint::normalize(ctx.coeff.clone())?;
    let before = ctx.surrogate(point.as_vector(), aux, beta, noise);
    let mut value = before;
    let mut last_step = 0.0;
    let mut stalled = false;
    for _ in 0..steps.max(1) {
        let egrad = em_gradient_at(ctx, point.as_vector(), aux, beta);
        let rgrad = sphere_tangent_project(&point, &egrad);
        let out = armijo_search(
            rule,
            |c: &SpherePoint| ctx.surrogate(c.as_vector(), aux, beta, noise),
            &point,
            &rgrad,
        );
        if out.stalled {
            stalled = true;
            break;
        }
        last_step = out.step;
        value = out.value;
        point = out.point;
    }
    Ok(EmStep {
        coeff: point.into_vector(),
        before,
        after: value,
        step: last_step,
        stalled,
    })
}
