//! KAM reducibility for the quantum harmonic oscillator `i∂_t u = (−∂²_x + x² + εV(x, ωt))u`
//! with potentials decaying only logarithmically in `x`.
//!
//! Everything except [`floquet`] is generic over [`scalar::Real`]; the aliases below fix the
//! common instantiations.

pub mod error;
pub mod floquet;
pub mod flow;
pub mod fourier;
pub mod hermite;
pub mod homological;
pub mod kam;
pub mod norms;
pub mod potential;
pub mod quadratic;
pub mod resonance;
pub mod sampling;
pub mod scalar;
pub mod series;
pub mod zeta;

pub use error::{KamError, Result};
pub use scalar::Real;

pub type FourierBlockMatrix64 = quadratic::FourierBlockMatrix<f64>;
pub type FourierBlockMatrix32 = quadratic::FourierBlockMatrix<f32>;
pub type QuadraticPart64 = quadratic::QuadraticPart<f64>;
pub type QuadraticPart32 = quadratic::QuadraticPart<f32>;
pub type QuadraticHamiltonian64 = quadratic::QuadraticHamiltonian<f64>;
pub type QuadraticHamiltonian32 = quadratic::QuadraticHamiltonian<f32>;
pub type SymplecticMap64 = flow::SymplecticMap<f64>;
pub type SymplecticMap32 = flow::SymplecticMap<f32>;
pub type Potential64 = potential::Potential<f64>;
pub type Potential32 = potential::Potential<f32>;
pub type ReducedNormalForm64 = kam::ReducedNormalForm<f64>;
pub type ReducedNormalForm32 = kam::ReducedNormalForm<f32>;
pub type RunReport64 = kam::RunReport<f64>;
pub type RunReport32 = kam::RunReport<f32>;
