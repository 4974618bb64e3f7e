//! Sum-rate maximization for a multi-user mmWave downlink assisted by
//! distributed, individually switchable reflecting surfaces.

pub mod ao;
pub mod beamforming;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod hybrid;
pub mod metrics;
pub mod phase;
pub mod switch;

pub use error::{CoreError, Result};
