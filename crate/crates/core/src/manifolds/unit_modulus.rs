use nalgebra::linalg::Cholesky;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::line_search::Armijo;
use crate::error::{Error, Result};
use crate::linalg::{cis, CMatrix};

/// Matrix whose entries all have unit modulus (analog phase shifters).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitModulusMatrix(CMatrix);

impl UnitModulusMatrix {
    pub const TOLERANCE: f64 = 1e-12;

    pub fn new(m: CMatrix) -> Result<Self> {
        if let Some(z) = m.iter().find(|z| (z.norm() - 1.0).abs() > 1e-9) {
            return Err(Error::domain("|entry|", z.norm(), "unit modulus"));
        }
        Ok(Self::from_phases(&m))
    }

    /// Entrywise `e^{j arg(m)}`; zero entries map to `1`.
    pub fn from_phases(m: &CMatrix) -> Self {
        Self(m.map(|z| {
            if z.norm() > 0.0 {
                cis(z.arg())
            } else {
                Complex64::new(1.0, 0.0)
            }
        }))
    }

    pub fn as_matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

/// Tangent projection on the complex circle product: `G - Re(G ∘ X*) ∘ X`.
pub fn unit_modulus_tangent_project(x: &UnitModulusMatrix, g: &CMatrix) -> CMatrix {
    g.zip_map(x.as_matrix(), |gi, xi| gi - xi * (gi * xi.conj()).re)
}

/// Retraction `phase(X + V)` entrywise.
pub fn unit_modulus_retract(x: &UnitModulusMatrix, v: &CMatrix) -> UnitModulusMatrix {
    UnitModulusMatrix::from_phases(&(x.as_matrix() + v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorizeOptions {
    pub max_outer: usize,
    pub max_inner: usize,
    /// Outer loop stops once the relative residual change drops below this.
    pub tolerance: f64,
    /// Ridge added to `F_RF^H F_RF` in the digital least-squares step.
    pub ridge: f64,
    /// Starting points tried; the lowest residual wins.
    pub starts: usize,
}

impl Default for FactorizeOptions {
    fn default() -> Self {
        Self {
            max_outer: 100,
            max_inner: 50,
            tolerance: 1e-6,
            ridge: 1e-12,
            starts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridFactorization {
    pub analog: UnitModulusMatrix,
    pub digital: CMatrix,
    /// `||F_RF F_BB - F_FD||_F / ||F_FD||_F` after each outer iteration,
    /// before any final power rescaling.
    pub residuals: Vec<f64>,
}

impl HybridFactorization {
    pub fn relative_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(0.0)
    }
}

fn frob_sqr(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

fn least_squares_digital(rf: &CMatrix, target: &CMatrix, ridge: f64) -> CMatrix {
    let mut gram = rf.adjoint() * rf;
    let scale = (gram.trace().re / gram.nrows() as f64).max(1.0);
    for i in 0..gram.nrows() {
        gram[(i, i)] += Complex64::new(ridge * scale, 0.0);
    }
    let rhs = rf.adjoint() * target;
    match Cholesky::new(gram) {
        Some(ch) => ch.solve(&rhs),
        None => CMatrix::zeros(rf.ncols(), target.ncols()),
    }
}

fn initial_analog(target: &CMatrix, n_rf: usize) -> UnitModulusMatrix {
    let n = target.nrows();
    let k = target.ncols();
    let mut init = CMatrix::zeros(n, n_rf);
    for j in 0..n_rf {
        if j < k {
            init.set_column(j, &target.column(j));
        } else {
            // extra chains start from DFT columns
            for i in 0..n {
                init[(i, j)] = cis(2.0 * std::f64::consts::PI * (i * j) as f64 / n as f64);
            }
        }
    }
    UnitModulusMatrix::from_phases(&init)
}

/// Greedy start: each column takes the phases of the dominant left singular
/// vector of what the previous columns leave unexplained.
fn deflation_analog(target: &CMatrix, n_rf: usize) -> UnitModulusMatrix {
    let mut init = initial_analog(target, n_rf).into_matrix();
    let mut residual = target.clone();
    for j in 0..n_rf.min(target.ncols()) {
        let svd = residual.clone().svd(true, false);
        let Some(u) = svd.u else { break };
        let (imax, smax) = svd.singular_values.argmax();
        if smax <= 1e-12 {
            break;
        }
        for (i, z) in u.column(imax).iter().enumerate() {
            init[(i, j)] = if z.norm() > 0.0 {
                cis(z.arg())
            } else {
                Complex64::new(1.0, 0.0)
            };
        }
        let basis = init.columns(0, j + 1).into_owned();
        let coeffs = least_squares_digital(&basis, target, 1e-12);
        residual = target - basis * coeffs;
    }
    UnitModulusMatrix::from_phases(&init)
}

/// Moves every column of `init` to a nearby unit-modulus vector of the
/// target's dominant column space by alternating projections.
fn subspace_projected(target: &CMatrix, init: UnitModulusMatrix) -> UnitModulusMatrix {
    let rank = init.as_matrix().ncols().min(target.ncols());
    let svd = target.clone().svd(true, false);
    let Some(u) = svd.u else { return init };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let basis = CMatrix::from_columns(&order[..rank].iter().map(|&i| u.column(i)).collect::<Vec<_>>());
    let mut x = init.into_matrix();
    for _ in 0..200 {
        let projected = &basis * (basis.adjoint() * &x);
        x = UnitModulusMatrix::from_phases(&projected).into_matrix();
    }
    UnitModulusMatrix::from_phases(&x)
}

fn starting_point(target: &CMatrix, n_rf: usize, start: usize) -> UnitModulusMatrix {
    match start {
        0 => subspace_projected(target, deflation_analog(target, n_rf)),
        1 => subspace_projected(target, initial_analog(target, n_rf)),
        2 => initial_analog(target, n_rf),
        3 => deflation_analog(target, n_rf),
        _ => {
            let k = target.ncols();
            let mut rng = ChaCha8Rng::seed_from_u64(start as u64);
            let mix = CMatrix::from_fn(k, k, |_, _| {
                cis(rng.random_range(0.0..std::f64::consts::TAU)) * rng.random::<f64>()
            });
            initial_analog(&(target * mix), n_rf)
        }
    }
}

struct Refined {
    analog: UnitModulusMatrix,
    digital: CMatrix,
    residuals: Vec<f64>,
}

/// Descent from one starting analog matrix; `target` has unit Frobenius
/// norm. The digital factor is re-solved by least squares at every trial
/// point, so each analog step is taken on the projected residual
/// `min_BB ||F_RF F_BB - target||²`, whose Riemannian gradient equals the
/// partial gradient at the optimal `F_BB`.
fn refine(target: &CMatrix, mut analog: UnitModulusMatrix, opts: &FactorizeOptions) -> Refined {
    let fit = |rf: &CMatrix| {
        let bb = least_squares_digital(rf, target, opts.ridge);
        let r = frob_sqr(&(rf * &bb - target));
        (bb, r)
    };
    let (mut digital, mut current) = fit(analog.as_matrix());
    let mut residuals = vec![current.sqrt()];
    // 1 / Lipschitz constant of the partial gradient, then adapted
    let mut step = 1.0 / frob_sqr(&digital).max(f64::MIN_POSITIVE);

    for _ in 0..opts.max_outer {
        let previous = current;
        for _ in 0..opts.max_inner {
            let egrad = (analog.as_matrix() * &digital - target) * digital.adjoint() * Complex64::new(2.0, 0.0);
            let rgrad = unit_modulus_tangent_project(&analog, &egrad);
            let directional = frob_sqr(&rgrad);
            if directional <= 1e-30 {
                break;
            }
            let descent = -&rgrad;
            let out = Armijo::default().with_initial_step(step).search(
                analog.clone(),
                -current,
                directional,
                |t| Some(unit_modulus_retract(&analog, &(&descent * Complex64::new(t, 0.0)))),
                |x: &UnitModulusMatrix| -fit(x.as_matrix()).1,
            );
            if out.stalled {
                break;
            }
            let improvement = current + out.value;
            analog = out.point;
            (digital, current) = fit(analog.as_matrix());
            step = 2.0 * out.step;
            if improvement <= opts.tolerance * 1e-3 * previous {
                break;
            }
        }
        residuals.push(current.sqrt());
        if current <= 1e-28 || (previous - current).abs() <= opts.tolerance * previous {
            break;
        }
    }
    Refined {
        analog,
        digital,
        residuals,
    }
}

/// Minimizes `||F_RF F_BB - F_FD||_F²` subject to unit-modulus `F_RF`: the
/// digital factor is the (ridge-regularized) least-squares solution and the
/// analog factor takes Riemannian gradient steps on the complex circle
/// product. Starts, in order: the greedy deflation start and the target
/// column phases, each pulled onto the target's column space by alternating
/// projections; the same two unprojected; then phases of fixed pseudo-random
/// column mixtures. The lowest residual is kept. `F_BB` is finally scaled down to meet
/// `||F_RF F_BB||_F² ≤ power` when that bound is violated.
pub fn hybrid_factorize(
    target: &CMatrix,
    n_rf: usize,
    power: f64,
    opts: &FactorizeOptions,
) -> Result<HybridFactorization> {
    if n_rf == 0 {
        return Err(Error::Config("at least one RF chain is required".into()));
    }
    if !(power > 0.0) {
        return Err(Error::domain("power", power, "positive"));
    }
    let target_norm_sqr = frob_sqr(target);
    if target_norm_sqr == 0.0 {
        return Ok(HybridFactorization {
            analog: initial_analog(target, n_rf),
            digital: CMatrix::zeros(n_rf, target.ncols()),
            residuals: vec![0.0],
        });
    }
    // work on a unit-norm copy so step sizes are scale free
    let scale = target_norm_sqr.sqrt();
    let target_n = target / Complex64::new(scale, 0.0);

    let mut best: Option<Refined> = None;
    for start in 0..opts.starts.max(1) {
        let run = refine(&target_n, starting_point(&target_n, n_rf, start), opts);
        let last = |r: &Refined| r.residuals.last().copied().unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|b| last(&run) < last(b)) {
            best = Some(run);
        }
        if best.as_ref().is_some_and(|b| last(b) <= 1e-12) {
            break;
        }
    }
    let Refined {
        analog,
        digital,
        residuals,
    } = best.expect("at least one start");

    let mut digital = digital * Complex64::new(scale, 0.0);
    let achieved = frob_sqr(&(analog.as_matrix() * &digital));
    if achieved > power {
        digital *= Complex64::new((power / achieved).sqrt(), 0.0);
    }
    Ok(HybridFactorization {
        analog,
        digital,
        residuals,
    })
}
