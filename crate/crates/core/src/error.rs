use thiserror::Error;

use crate::topology::NodeId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown node {0}")]
    UnknownNode(NodeId),

    #[error("distance {dist} m is below the reference distance {d0} m")]
    BelowReferenceDistance { dist: f64, d0: f64 },

    #[error(
        "instance too large for exhaustive search: M={sbs}, K={subchannels} \
         (limits M<={max_sbs}, K<={max_subchannels}), ~{estimate:.3e} candidate assignments"
    )]
    InstanceTooLarge {
        sbs: usize,
        subchannels: usize,
        max_sbs: usize,
        max_subchannels: usize,
        estimate: f64,
    },

    #[error("cannot aggregate an empty set of runs")]
    EmptyAggregate,

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
