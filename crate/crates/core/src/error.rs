// Copyright 2026 The qest Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the estimation, identification and control routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An input violated a documented precondition (non-Hermitian generator, non-unitary
    /// propagator, ...).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    /// The polar factor (or another factorization) is not unique for this input.
    #[error("ambiguous result: {0}")]
    Ambiguous(String),

    /// The regression design does not determine every parameter.
    #[error("singular design: null-space dimension {nullity} of {params} parameters")]
    SingularDesign { nullity: usize, params: usize },

    #[error("empty problem: {0}")]
    EmptyProblem(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),
}

impl Error {
    /// `true` for failures caused by the numbers themselves rather than by how the call was
    /// set up (singular designs, non-physical inputs, degenerate data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ContractViolation(_) | Error::Ambiguous(_) | Error::SingularDesign { .. } | Error::DegenerateData(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
