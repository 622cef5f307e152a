use thiserror::Error;

/// Errors surfaced by the simulator library.
#[derive(Debug, Error)]
pub enum Error {
    /// A scenario parameter is missing, out of range, or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The subchannel pool cannot satisfy the disjointness constraint.
    #[error("infeasible subchannel assignment: {0}")]
    InfeasibleAssignment(String),

    /// No lease terms satisfy the power budget and the member vetoes.
    #[error("infeasible lease: {0}")]
    InfeasibleLease(String),

    /// A partition does not cover the player set or overlaps.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A payoff evaluation hit a zero delay with positive rate.
    #[error("unbounded payoff diagnostic: {0}")]
    UnboundedPayoff(String),

    /// The exhaustive oracle was asked for more players than its cap.
    #[error("oracle refused: {0} players exceeds cap of {1}")]
    OracleTooLarge(usize, usize),

    /// Domain error in a closed-form evaluation (e.g. non-positive distance).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
