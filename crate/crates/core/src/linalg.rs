//! Dense complex vector/matrix aliases and small helpers shared across modules.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// `a^H b`.
#[inline]
pub fn inner(a: &CVector, b: &CVector) -> Complex64 {
    a.dotc(b)
}

/// Squared Euclidean norm.
#[inline]
pub fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Real inner product `Re(a^H b)` of the underlying real vector space.
#[inline]
pub fn real_inner(a: &CVector, b: &CVector) -> f64 {
    a.dotc(b).re
}

/// Unit-modulus complex number `e^{j x}`.
#[inline]
pub fn cis(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, x)
}

/// Canonical basis vector `e_{index}` (0-based) of length `len`.
pub fn unit_vector(len: usize, index: usize) -> CVector {
    let mut v = CVector::zeros(len);
    v[index] = Complex64::new(1.0, 0.0);
    v
}
