//! Discrete-time simulator for cross-layer adaptive video streaming over
//! massive MU-MIMO small-cell networks.
//!
//! Clients pick per-chunk quality modes with a drift-plus-penalty rule driven
//! by their own request-queue backlog, helpers schedule users with a
//! max-weight greedy subset selection, and each user's player pre-buffers
//! adaptively against a sliding-window delay estimate.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod client;
pub mod config;
pub mod error;
pub mod phy;
pub mod playback;
pub mod report;
pub mod scheduler;
pub mod sim;
pub mod topology;
pub mod validate;
pub mod video;

pub use client::{optimize_gamma, select_mode, utility, RequestQueueState, UtilityConfig};
pub use config::{Policy, SimConfig, ThetaUpdate};
pub use error::{Error, Result};
pub use phy::{slot_bits, user_rate_per_symbol, MimoConfig, SinrTable};
pub use playback::{PlaybackState, QoeMetrics};
pub use scheduler::{
    exhaustive_select, greedy_select, schedule_network, Candidate, RateAllocation, ReceiverModel, Selection,
};
pub use sim::{run, run_with_observer, sweep, SimObserver, SimResult, SlotView, UserResult, World};
pub use topology::{pathloss_gain, torus_distance, NetworkGraph, Point, TopologyState};
pub use video::{QualityRateProfile, VideoSession};
