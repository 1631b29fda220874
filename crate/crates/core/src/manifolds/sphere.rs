use num_complex::Complex64;

use super::line_search::{Armijo, LineSearchOutcome};
use crate::error::{Error, Result};
use crate::linalg::{norm_sqr, real_inner, CVector};

/// A point on the unit sphere of `C^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(CVector);

impl SpherePoint {
    pub const TOLERANCE: f64 = 1e-12;

    /// Normalizes `v`; fails on the zero vector.
    pub fn normalize(v: CVector) -> Result<Self> {
        let n = norm_sqr(&v).sqrt();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::DegenerateRetraction);
        }
        Ok(Self(v / Complex64::new(n, 0.0)))
    }

    /// Wraps `v`, which must already have unit norm.
    pub fn new(v: CVector) -> Result<Self> {
        let n = norm_sqr(&v).sqrt();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::domain("||c||", n, "unit norm"));
        }
        Self::normalize(v)
    }

    pub fn as_vector(&self) -> &CVector {
        &self.0
    }

    pub fn into_vector(self) -> CVector {
        self.0
    }
}

/// Orthogonal projection onto the tangent space at `c`: `g - Re(c^H g) c`.
pub fn sphere_tangent_project(c: &SpherePoint, g: &CVector) -> CVector {
    let r = real_inner(c.as_vector(), g);
    g - c.as_vector() * Complex64::new(r, 0.0)
}

/// `(c - δ d) / ||c - δ d||`.
pub fn sphere_retract(c: &SpherePoint, step: f64, d: &CVector) -> Result<SpherePoint> {
    SpherePoint::normalize(c.as_vector() - d * Complex64::new(step, 0.0))
}

/// Armijo ascent from `c` along the Riemannian gradient `grad` of the
/// maximized objective `f`. A zero (or non-ascent) gradient stalls and
/// returns `c` unchanged.
pub fn armijo_search<F>(rule: &Armijo, f: F, c: &SpherePoint, grad: &CVector) -> LineSearchOutcome<SpherePoint>
where
    F: FnMut(&SpherePoint) -> f64,
{
    let mut f = f;
    let value = f(c);
    let directional = norm_sqr(grad);
    let ascent = -grad;
    rule.search(
        c.clone(),
        value,
        directional,
        |step| sphere_retract(c, step, &ascent).ok(),
        f,
    )
}
