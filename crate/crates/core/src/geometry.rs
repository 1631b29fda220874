//! Uniform planar array in the XoY plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, CVector};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Far-field direction: `theta` is the polar angle from `+z`, `phi` the azimuth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::domain("theta", theta, "[0, pi]"));
        }
        if !phi.is_finite() {
            return Err(Error::domain("phi", phi, "finite"));
        }
        Ok(Self { theta, phi })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaGeometry {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub wavelength: f64,
}

impl UpaGeometry {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, wavelength: f64) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config(format!("array size {nx}x{ny} must be at least 1x1")));
        }
        for (name, v) in [("dx", dx), ("dy", dy), ("wavelength", wavelength)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(name, v, "positive"));
            }
        }
        Ok(Self {
            nx,
            ny,
            dx,
            dy,
            wavelength,
        })
    }

    /// Half-wavelength-spaced `nx × ny` array at carrier frequency `carrier_hz`.
    pub fn half_wavelength(nx: usize, ny: usize, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz > 0.0) {
            return Err(Error::domain("carrier_hz", carrier_hz, "positive"));
        }
        let wavelength = SPEED_OF_LIGHT / carrier_hz;
        Self::new(nx, ny, wavelength / 2.0, wavelength / 2.0, wavelength)
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Array response `a = a_x ⊗ a_y`; element `ix * ny + iy` (x index slowest).
    pub fn steering(&self, dir: Direction) -> CVector {
        let k = 2.0 * PI / self.wavelength;
        let st = dir.theta.sin();
        let px = -k * self.dx * st * dir.phi.cos();
        let py = -k * self.dy * st * dir.phi.sin();
        CVector::from_iterator(
            self.num_elements(),
            (0..self.nx).flat_map(|ix| (0..self.ny).map(move |iy| cis(px * ix as f64 + py * iy as f64))),
        )
    }
}

/// Free-function form of [`UpaGeometry::steering`].
pub fn upa_steering(geom: &UpaGeometry, dir: Direction) -> CVector {
    geom.steering(dir)
}
