//! Inter-operator millimeter-wave multi-hop backhaul simulator.
//!
//! The pipeline alternates two matching games per hop: D-BSs pick A-BSs
//! ([`formation`]), then each A-BS hands its sub-channels to its D-BSs
//! ([`allocation`]). [`pipeline`] drives the hops, [`baselines`] holds the
//! comparison schemes and [`metrics`] the reported quantities.

// `!(x > 0.0)` is how the validators reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod allocation;
pub mod baselines;
pub mod channel;
pub mod error;
pub mod formation;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod topology;

pub use allocation::{AllocationResult, SubchannelGame, SubchannelPlan};
pub use baselines::{exhaustive_optimal, non_cooperative, random_baseline, ExhaustiveLimits, OptimalSolution};
pub use channel::{ChannelRealization, LinkState, RadioConfig};
pub use error::{Error, Result};
pub use formation::{FormationGame, FormationResult, PricingConfig, Stage};
pub use metrics::{aggregate, overhead_check, RunMetrics, Summary};
pub use pipeline::{run, NetworkConfig, RunOutput, Scheme};
pub use scenario::{Instance, Scenario};
pub use topology::{generate_topology, MnoId, NodeId, Point, Topology};
