//! Conventional two-step PTP and the PTPsec extension.
//!
//! Message flow of one PTPsec round, for each measured redundant path `P_i`:
//!
//! ```text
//! master                                   slave
//!   | --- Sync (P0) -----------------------> |  t1 / t2
//!   | --- Follow_Up(t1) (P0) --------------> |
//!   | <-- Meas (Pi) ------------------------ |  t_m2 / t_m1
//!   | <-- Meas_Fup(t_m1) (Pi) -------------- |
//!   | <-- Delay_Req (P0) ------------------- |  t4 / t3
//!   | --- Meas (Pi) -----------------------> |  t_m3 / t_m4
//!   | --- Meas_Fup(t_m3) (Pi) -------------> |
//!   | --- Delay_Resp(t4, t_m2..) (P0) -----> |
//! ```
//!
//! In PTP mode the Meas legs are absent. State machines are plain values
//! driven by the simulator: they consume `(message, ingress timestamp)` and
//! egress notifications and return the messages to send.

mod master;
mod message;
mod round;
mod slave;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::DetectionError;
use crate::time::{micros, secs};

pub use master::MasterSession;
pub use message::{Body, Message, MessageKind, UnknownMessageKind};
pub use round::{
    asymmetry_estimate, compute_offset, expected_offset_under_attack, finish_round,
    messages_per_cycle, offset_from_timestamps, rectified_offset, round_trip_times,
    MeasTimestamps, RoundReport, ServoState, SyncRoundRecord,
};
pub use slave::{SlaveReaction, SlaveSession};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Ptp,
    Ptpsec,
}

/// Which redundant paths carry Meas messages in a given round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathPolicy {
    /// Every redundant path, every round.
    #[default]
    All,
    /// One redundant path per round, round-robin by sequence number.
    Rotation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub mode: Mode,
    /// Steer the servo with `θ_rect` instead of `θ_rep` (PTPsec only).
    pub mitigation: bool,
    pub sync_interval: i64,
    /// Turnaround between receiving an event message and sending the
    /// answering Meas (or Delay_Resp).
    pub residence: i64,
    /// Slave delay between Sync ingress and Delay_Req egress.
    pub delay_req_gap: i64,
    pub path_policy: PathPolicy,
    /// Rounds still open this many sync intervals after they began are
    /// discarded.
    pub round_timeout_intervals: i64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            mode: Mode::Ptpsec,
            mitigation: true,
            sync_interval: secs(1),
            residence: micros(10),
            delay_req_gap: micros(400),
            path_policy: PathPolicy::All,
            round_timeout_intervals: 3,
        }
    }
}

impl ProtocolConfig {
    pub fn round_timeout(&self) -> i64 {
        self.sync_interval * self.round_timeout_intervals
    }

    /// Redundant path indices measured in round `seq`, given `n` redundant
    /// paths. Empty in PTP mode.
    pub fn measured_paths(&self, seq: u32, n: usize) -> Vec<usize> {
        if self.mode == Mode::Ptp || n == 0 {
            return Vec::new();
        }
        match self.path_policy {
            PathPolicy::All => (1..=n).collect(),
            PathPolicy::Rotation => vec![1 + seq as usize % n],
        }
    }
}

/// A message a state machine wants sent, `after` nanoseconds from now.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub message: Message,
    pub after: i64,
}

impl Outgoing {
    pub fn now(message: Message) -> Self {
        Outgoing { message, after: 0 }
    }

    pub fn after(message: Message, after: i64) -> Self {
        Outgoing { message, after }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("no open round with sequence {0}")]
    UnknownSeq(u32),
    #[error("duplicate {kind} for round {seq} on path {route}")]
    DuplicateMessage {
        kind: MessageKind,
        seq: u32,
        route: usize,
    },
    #[error("round {0} is already closed")]
    StaleRound(u32),
    #[error("{kind} is not expected by the {role}")]
    UnexpectedMessage { kind: MessageKind, role: &'static str },
    #[error("round {seq} does not measure path {route}")]
    UnknownRoute { seq: u32, route: usize },
    #[error("round {0} is missing timestamps")]
    IncompleteRound(u32),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}
