use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FracError {
    #[error("structural mismatch: {0}")]
    Structural(String),
    #[error("parameter out of range: {0}")]
    Domain(String),
    #[error("dyadic band {0} does not meet the resolved frequency lattice")]
    EmptyBand(i32),
    #[error("resolution exceeded: {0}")]
    Resolution(String),
    #[error("no negative-energy data reached: {0}")]
    NoNegativeEnergy(String),
    #[error("bracket endpoints have the same verdict: {0}")]
    BracketInvalid(String),
    #[error("schedule violates the vanishing-ratio condition at t = {0}")]
    ScheduleInvalid(f64),
    #[error("fixed-point iteration failed to contract: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, FracError>;
