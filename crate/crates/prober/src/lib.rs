//! Live rate difference tests over UDP packet trains.
//!
//! A [`Prober`] paces trains of probe packets towards a [`Receiver`], which
//! timestamps arrivals and reports them back over a TCP control connection
//! on the same port. The egress rate of each train comes from the arrival
//! gaps of its valid packets; the median over trains is compared with the
//! ingress rate.

pub mod control;
pub mod receiver;
pub mod sender;
pub mod train;
pub mod wire;

use thiserror::Error;

pub use receiver::{Receiver, ReceiverConfig};
pub use sender::{measure, LiveMeasurer, ProbeOutcome, Prober};
pub use train::{egress_rate, lower_median, pace_train, ProbeSpec, TrainRecord};
pub use wire::{ProbeHeader, WireError, HEADER_LEN};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid probe parameters: {0}")]
    InvalidSpec(String),
    #[error("cannot resolve receiver: {0}")]
    Resolve(String),
    #[error("receiver did not respond: {0}")]
    Timeout(String),
    #[error("no valid packets in train")]
    NoValidPackets,
    #[error("every valid packet gap lost an arrival")]
    MissingArrival,
    #[error("no train produced an egress rate")]
    AllTrainsInvalid,
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
