//! Exact non-Markovian dynamics of a two-level emitter coupled to the
//! surface plasmon polaritons of a planar metal–dielectric interface.
//!
//! The pipeline runs material parameters → spectral density J(ω) →
//! memory kernel K(τ) → Volterra solve for the excited-state amplitude,
//! with a bound-state pole analysis and a Lorentzian pseudomode model
//! alongside for comparison.
//!
//! Everything numerical is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound_state;
pub mod dynamics;
pub mod error;
pub mod kernel;
pub mod materials;
pub mod pseudomode;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod table;

pub use error::{Error, Result};
pub use scalar::Real;

pub use num_complex::Complex;

pub type C64 = Complex<f64>;

pub type MaterialSystem = materials::MaterialSystem<f64>;
pub type DrudeMetal = materials::DrudeMetal<f64>;
pub type Dielectric = materials::Dielectric<f64>;
pub type Emitter = materials::Emitter<f64>;
pub type QuadConfig = quadrature::QuadConfig<f64>;
pub type QuadResult = quadrature::QuadResult<f64>;
pub type SpectralOptions = spectral::SpectralOptions<f64>;
pub type SpectralTable = table::SpectralTable<f64>;
pub type KernelTable = kernel::KernelTable<f64>;
pub type AmplitudeTrajectory = dynamics::AmplitudeTrajectory<f64>;
pub type DensityMatrix = dynamics::DensityMatrix<f64>;
pub type MarkovSolution = dynamics::MarkovSolution<f64>;
pub type BoundStateResult = bound_state::BoundStateResult<f64>;
pub type SpectrumMap = bound_state::SpectrumMap<f64>;
pub type PseudomodeParams = pseudomode::PseudomodeParams<f64>;
