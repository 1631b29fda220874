//! Orthonormal complex spherical harmonics and the truncated basis vector
//! `b(θ, φ)` that parameterizes every reconfigurable element pattern.
//!
//! Conventions: `θ` is the polar (elevation) angle measured from `+z` in
//! `[0, π]`, `φ` the azimuth. Associated Legendre functions carry the
//! Condon–Shortley phase and negative orders reuse `P_u^{|q|}`, so that
//! `Y_u^{-q} = conj(Y_u^q)` and the family is orthonormal on the sphere.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{cis, CVector};

/// Largest supported truncation degree.
pub const MAX_DEGREE: usize = 8;

/// A `(degree, order)` pair together with its 1-based linear position
/// `t = u² + u + q + 1` in the basis vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    pub degree: usize,
    pub order: i64,
    pub linear: usize,
}

impl HarmonicIndex {
    pub fn new(degree: usize, order: i64) -> Result<Self> {
        if order.unsigned_abs() as usize > degree {
            return Err(Error::HarmonicIndex {
                degree: degree as i64,
                order,
            });
        }
        let u = degree as i64;
        let linear = (u * u + u + order + 1) as usize;
        Ok(Self { degree, order, linear })
    }

    /// Inverse of the linear map: recovers `(u, q)` from `t ≥ 1`.
    pub fn from_linear(linear: usize) -> Result<Self> {
        if linear == 0 {
            return Err(Error::LinearIndex(linear, usize::MAX));
        }
        let zero_based = linear - 1;
        let degree = (zero_based as f64).sqrt() as usize;
        // guard against sqrt rounding for perfect squares
        let degree = if (degree + 1) * (degree + 1) <= zero_based {
            degree + 1
        } else if degree * degree > zero_based {
            degree - 1
        } else {
            degree
        };
        let order = zero_based as i64 - (degree * degree + degree) as i64;
        Self::new(degree, order)
    }
}

/// Linear index `t` of `(u, q)` within a basis truncated at `max_degree`.
pub fn harmonic_index(degree: usize, order: i64, max_degree: usize) -> Result<usize> {
    if degree > max_degree {
        return Err(Error::HarmonicIndex {
            degree: degree as i64,
            order,
        });
    }
    HarmonicIndex::new(degree, order).map(|h| h.linear)
}

/// Associated Legendre function `P_u^m(x)` with the Condon–Shortley phase,
/// evaluated by upward recurrence in the degree.
pub fn assoc_legendre(degree: usize, order: usize, x: f64) -> Result<f64> {
    if order > degree {
        return Err(Error::HarmonicIndex {
            degree: degree as i64,
            order: order as i64,
        });
    }
    check_unit_interval(x)?;
    Ok(legendre_column(degree, order, x))
}

fn check_unit_interval(x: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain("x", x, "[-1, 1]"));
    }
    Ok(())
}

// P_degree^order(x) for validated inputs.
fn legendre_column(degree: usize, order: usize, x: f64) -> f64 {
    let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let mut pmm = 1.0;
    let mut odd = 1.0;
    for _ in 0..order {
        pmm *= -odd * somx2;
        odd += 2.0;
    }
    if degree == order {
        return pmm;
    }
    let mut pmm1 = x * (2 * order + 1) as f64 * pmm;
    for l in (order + 2)..=degree {
        let next = ((2 * l - 1) as f64 * x * pmm1 - (l + order - 1) as f64 * pmm) / (l - order) as f64;
        pmm = pmm1;
        pmm1 = next;
    }
    pmm1
}

/// `N_u^{|q|} = sqrt((2u+1)/(4π) · (u-|q|)!/(u+|q|)!)`.
fn normalization(degree: usize, abs_order: usize) -> f64 {
    let ratio: f64 = ((degree - abs_order + 1)..=(degree + abs_order))
        .map(|k| 1.0 / k as f64)
        .product();
    ((2 * degree + 1) as f64 / (4.0 * PI) * ratio).sqrt()
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::domain("theta", theta, "[0, pi]"));
    }
    if !phi.is_finite() {
        return Err(Error::domain("phi", phi, "finite"));
    }
    Ok(())
}

/// Orthonormal spherical harmonic `Y_u^q(θ, φ) = N_u^{|q|} P_u^{|q|}(cos θ) e^{jqφ}`.
pub fn sph_harmonic(degree: usize, order: i64, theta: f64, phi: f64) -> Result<Complex64> {
    let index = HarmonicIndex::new(degree, order)?;
    check_angles(theta, phi)?;
    let m = index.order.unsigned_abs() as usize;
    let radial = normalization(degree, m) * legendre_column(degree, m, theta.cos());
    Ok(radial * cis(order as f64 * phi))
}

/// Truncated harmonic basis of degree `U` and length `T = (U + 1)²`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicBasis {
    max_degree: usize,
    // (degree, order) for each t-1
    indices: Vec<HarmonicIndex>,
    norms: Vec<f64>,
}

impl HarmonicBasis {
    pub fn new(max_degree: usize) -> Result<Self> {
        if max_degree > MAX_DEGREE {
            return Err(Error::Config(format!(
                "truncation degree {max_degree} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let len = (max_degree + 1) * (max_degree + 1);
        let indices: Vec<_> = (1..=len)
            .map(|t| HarmonicIndex::from_linear(t).expect("valid linear index"))
            .collect();
        let norms = indices
            .iter()
            .map(|h| normalization(h.degree, h.order.unsigned_abs() as usize))
            .collect();
        Ok(Self {
            max_degree,
            indices,
            norms,
        })
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Basis length `T`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, degree: usize, order: i64) -> Result<usize> {
        harmonic_index(degree, order, self.max_degree)
    }

    pub fn inverse(&self, linear: usize) -> Result<HarmonicIndex> {
        if linear == 0 || linear > self.len() {
            return Err(Error::LinearIndex(linear, self.len()));
        }
        Ok(self.indices[linear - 1])
    }

    /// `b(θ, φ) = [Ỹ_1, …, Ỹ_T]^T`, ordered by the linear index.
    pub fn basis_vector(&self, theta: f64, phi: f64) -> Result<CVector> {
        check_angles(theta, phi)?;
        let x = theta.cos();
        let u_max = self.max_degree;
        // table[m][u] = P_u^m(x)
        let mut table = vec![vec![0.0; u_max + 1]; u_max + 1];
        for (m, row) in table.iter_mut().enumerate() {
            let somx2 = ((1.0 - x) * (1.0 + x)).sqrt();
            let mut pmm = 1.0;
            let mut odd = 1.0;
            for _ in 0..m {
                pmm *= -odd * somx2;
                odd += 2.0;
            }
            row[m] = pmm;
            if m < u_max {
                row[m + 1] = x * (2 * m + 1) as f64 * pmm;
            }
            for l in (m + 2)..=u_max {
                row[l] = ((2 * l - 1) as f64 * x * row[l - 1] - (l + m - 1) as f64 * row[l - 2]) / (l - m) as f64;
            }
        }
        Ok(CVector::from_iterator(
            self.len(),
            self.indices.iter().zip(&self.norms).map(|(h, n)| {
                let m = h.order.unsigned_abs() as usize;
                n * table[m][h.degree] * cis(h.order as f64 * phi)
            }),
        ))
    }
}
