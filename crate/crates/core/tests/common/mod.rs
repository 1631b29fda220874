#![allow(dead_code)]

use gauss_quad::GaussLegendre;
use num_complex::Complex64;
use rand::Rng;
use trihybrid::channel::EmBeamformer;
use trihybrid::harmonics::HarmonicBasis;
use trihybrid::linalg::{CMatrix, CVector};

/// `∫ b b^H dΩ` by Gauss-Legendre in `cos θ` times the trapezoid rule in `φ`.
pub fn quadrature_gram(basis: &HarmonicBasis, n_theta: usize, n_phi: usize) -> CMatrix {
    let rule = GaussLegendre::new(n_theta.try_into().unwrap());
    let t = basis.len();
    let mut gram = CMatrix::zeros(t, t);
    let dphi = std::f64::consts::TAU / n_phi as f64;
    for (x, w) in rule.iter() {
        let theta = x.acos();
        for j in 0..n_phi {
            let b = basis.basis_vector(theta, j as f64 * dphi).unwrap();
            gram.gerc(Complex64::new(w * dphi, 0.0), &b, &b, Complex64::new(1.0, 0.0));
        }
    }
    gram
}

pub fn random_unit<R: Rng>(rng: &mut R, len: usize) -> CVector {
    let v = CVector::from_fn(len, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let n = v.norm();
    v / Complex64::new(n, 0.0)
}

pub fn random_em<R: Rng>(rng: &mut R, n_t: usize, t: usize) -> EmBeamformer {
    EmBeamformer::new((0..n_t).map(|_| random_unit(rng, t)).collect()).unwrap()
}

/// Random precoder with total power `power`.
pub fn random_precoder<R: Rng>(rng: &mut R, n_t: usize, k: usize, power: f64) -> CMatrix {
    let f = CMatrix::from_fn(n_t, k, |_, _| {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let s = (power / f.norm_squared()).sqrt();
    f * Complex64::new(s, 0.0)
}
