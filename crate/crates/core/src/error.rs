use thiserror::Error;

use crate::bound_state::BoundStateError;
use crate::dynamics::DynamicsError;
use crate::kernel::KernelError;
use crate::materials::MaterialError;
use crate::quadrature::QuadError;
use crate::spectral::SpectralError;

/// Any failure raised by the numerical pipeline.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    BoundState(#[from] BoundStateError),
}

impl Error {
    /// True for failures of an iterative numerical procedure (as opposed to bad input).
    pub fn is_convergence(&self) -> bool {
        match self {
            Error::Quadrature(_) => true,
            Error::Spectral(SpectralError::Quadrature { .. }) => true,
            Error::BoundState(BoundStateError::Pathological { .. }) => true,
            Error::BoundState(BoundStateError::NotMonotone { .. }) => true,
            Error::BoundState(BoundStateError::Spectral(e)) => {
                matches!(e, SpectralError::Quadrature { .. })
            }
            Error::Kernel(
                KernelError::NotPositiveDefinite { .. }
                | KernelError::NotBounded { .. }
                | KernelError::NotRealAtZero { .. },
            ) => true,
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
