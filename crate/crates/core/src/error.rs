use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid exponent: {0}")]
    InvalidExponent(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no proper holomorphic map exists")]
    NoProperMap,
    #[error("ball automorphism center too close to the unit sphere (|a| = {0})")]
    CenterTooCloseToSphere(f64),
    #[error("point is not in the domain")]
    NotInDomain,
    #[error("power base vanishes with a negative or fractional exponent")]
    BranchPole,
    #[error("point is not on the K part of the boundary")]
    NotOnK,
    #[error("requested sample region is empty")]
    EmptyRegion,
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;
