//! Two-user spatially correlated interference packet networks with delayed
//! channel-state feedback at the transmitters.
//!
//! The crate computes the throughput region in closed form, simulates the
//! multi-phase opportunistic retransmission protocol (statistically or with
//! full finite-field equation tracking) and cross-checks both by Monte Carlo.

pub mod correlation;
pub mod error;
pub mod linalg;
pub mod protocol;
pub mod region;
pub mod verifier;

pub use correlation::{
    build_joint_pmf, feasible_range, pairwise_joint, sample_state, Alpha, ChannelState,
    CorrelationParams, Interval, JointStatePmf, PairwiseJoint, User,
};
pub use error::{Error, Result};
pub use linalg::FieldSpec;
pub use region::{beta, max_symmetric_sum_rate, p_rx_00, region, Region};
