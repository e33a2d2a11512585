//! Proper holomorphic maps between equidimensional generalized Hartogs
//! triangles `F_{p,q} = { sum |z_j|^{2p_j} < sum |w_j|^{2q_j} < 1 }` and
//! between complex ellipsoids `E_p = { sum |z_j|^{2p_j} < 1 }`.
//!
//! The crate decides existence of proper maps from exponent data
//! ([`exponents`]), builds closed-form witnesses and automorphisms
//! ([`ellipsoid`], [`hartogs`]) and checks their structural properties
//! numerically ([`verify`]).
//!
//! Exponents are exact (`r * L^t` with `r` rational and `L` a formal
//! transcendental). All numerical code is generic over the floating-point
//! scalar; the `*64` aliases below fix it to `f64`.

pub mod ellipsoid;
pub mod error;
pub mod exponents;
pub mod hartogs;
pub mod linalg;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use exponents::{Exponent, ExponentVec, ExtRatio, Rational};
pub use scalar::Scalar;

pub type Complex64 = num_complex::Complex<f64>;

pub type BallAut64 = ellipsoid::BallAut<f64>;
pub type EllipsoidAut64 = ellipsoid::EllipsoidAut<f64>;
pub type EllipsoidProperMap64 = ellipsoid::EllipsoidProperMap<f64>;
pub type BlaschkeProduct64 = hartogs::BlaschkeProduct<f64>;
pub type HartogsProperMap64 = hartogs::HartogsProperMap<f64>;
pub type Point64 = hartogs::Point<f64>;

pub type BallAut32 = ellipsoid::BallAut<f32>;
pub type EllipsoidAut32 = ellipsoid::EllipsoidAut<f32>;
pub type HartogsProperMap32 = hartogs::HartogsProperMap<f32>;
