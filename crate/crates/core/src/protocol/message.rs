use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::time::Timestamp;

/// PTP message types used by the two-step delay request-response exchange,
/// plus the `Meas` / `Meas_Fup` pair that closes the cyclic measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Sync,
    #[serde(rename = "Follow_Up")]
    FollowUp,
    #[serde(rename = "Delay_Req")]
    DelayReq,
    #[serde(rename = "Delay_Resp")]
    DelayResp,
    Meas,
    #[serde(rename = "Meas_Fup")]
    MeasFup,
}

impl MessageKind {
    pub const ALL: [MessageKind; 6] = [
        MessageKind::Sync,
        MessageKind::FollowUp,
        MessageKind::DelayReq,
        MessageKind::DelayResp,
        MessageKind::Meas,
        MessageKind::MeasFup,
    ];

    /// Event messages are timestamped on egress and ingress.
    pub fn is_event(self) -> bool {
        matches!(self, MessageKind::Sync | MessageKind::DelayReq | MessageKind::Meas)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Sync => "Sync",
            MessageKind::FollowUp => "Follow_Up",
            MessageKind::DelayReq => "Delay_Req",
            MessageKind::DelayResp => "Delay_Resp",
            MessageKind::Meas => "Meas",
            MessageKind::MeasFup => "Meas_Fup",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownMessageKind(pub String);

impl FromStr for MessageKind {
    type Err = UnknownMessageKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s) || format!("{k:?}").eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownMessageKind(s.to_owned()))
    }
}

/// Message payload. Event messages carry nothing in two-step mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Body {
    Empty,
    /// `Follow_Up` carries t1, `Meas_Fup` carries t_m1 or t_m3.
    Timestamp(Timestamp),
    /// t4 plus the master's ingress timestamps t_m2 of the slave's `Meas`
    /// messages, keyed by path index.
    DelayResp {
        t4: Timestamp,
        meas_ingress: Vec<(usize, Timestamp)>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub kind: MessageKind,
    /// Round sequence number, shared by every message of a round.
    pub seq: u32,
    /// Index of the path in the slave's disjoint path set the message
    /// travels on. 0 for the synchronization path.
    pub route_index: usize,
    pub body: Body,
}

impl Message {
    pub fn event(kind: MessageKind, seq: u32, route_index: usize) -> Self {
        debug_assert!(kind.is_event());
        Message {
            kind,
            seq,
            route_index,
            body: Body::Empty,
        }
    }

    pub fn follow_up(kind: MessageKind, seq: u32, route_index: usize, ts: Timestamp) -> Self {
        Message {
            kind,
            seq,
            route_index,
            body: Body::Timestamp(ts),
        }
    }

    pub fn carried_timestamp(&self) -> Option<Timestamp> {
        match self.body {
            Body::Empty => None,
            Body::Timestamp(ts) => Some(ts),
            Body::DelayResp { t4, .. } => Some(t4),
        }
    }
}
