use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("p = {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),

    #[error("{name} = {value} is outside [-1, 1]")]
    CorrelationOutOfRange { name: &'static str, value: f64 },

    #[error("p = {p} is infeasible for {name} = {rho}: feasible interval is [{lo}, {hi}]")]
    Infeasible {
        name: &'static str,
        rho: f64,
        p: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no joint distribution satisfies the pairwise constraints {0}")]
    JointInfeasible(String),

    #[error("invalid field modulus {0}: must be a prime below 2^32")]
    BadModulus(u64),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
