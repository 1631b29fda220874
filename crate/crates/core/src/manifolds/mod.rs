//! Riemannian primitives for the two constraint sets of the precoder: the
//! unit sphere (per-element harmonic coefficients) and the complex circle
//! product (analog phase shifters). Complex vectors are treated as real
//! vectors of twice the dimension, so inner products are `Re(a^H b)`.

mod line_search;
mod sphere;
mod unit_modulus;

pub use line_search::{Armijo, LineSearchOutcome};
pub use sphere::{armijo_search, sphere_retract, sphere_tangent_project, SpherePoint};
pub use unit_modulus::{
    hybrid_factorize, unit_modulus_retract, unit_modulus_tangent_project, FactorizeOptions, HybridFactorization,
    UnitModulusMatrix,
};
