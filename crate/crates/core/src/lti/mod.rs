//! Linear time-invariant system tools: transfer functions, state-space
//! realizations, interconnection, frequency response, discretization and
//! the H-infinity norm.

pub mod freq;
pub mod hinf;
pub mod ss;
pub mod tf;

pub use freq::{freq_response, log_grid, FrequencyResponse};
pub use hinf::hinf_norm;
pub use ss::{connect, discretize, tf_to_ss, ConnectMode, DiscreteStateSpace, StateSpace};
pub use tf::TransferFunction;
