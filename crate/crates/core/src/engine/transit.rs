use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::AttackerState;
use crate::protocol::MessageKind;
use crate::time::{nanos_from_micros_f64, SimTime};
use crate::topology::{Direction, NetworkGraph, NodeId, Path};

use super::EngineError;

/// Per-hop link jitter, identically distributed in both directions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum JitterModel {
    #[default]
    None,
    /// Uniform integer nanoseconds in `[-half_width, +half_width]`.
    Uniform { half_width_us: f64 },
}

/// Seeded sample stream for one [`JitterModel`].
///
/// Streams are selected by `stream`, so independent traffic flows (one per
/// slave) draw from non-overlapping sequences under the same seed.
pub struct JitterSource {
    half_width: i64,
    rng: ChaCha8Rng,
}

impl JitterSource {
    pub fn new(model: JitterModel, seed: u64, stream: u64) -> Self {
        let half_width = match model {
            JitterModel::None => 0,
            JitterModel::Uniform { half_width_us } => nanos_from_micros_f64(half_width_us).abs(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        JitterSource { half_width, rng }
    }

    pub fn none() -> Self {
        Self::new(JitterModel::None, 0, 0)
    }

    pub fn sample(&mut self) -> i64 {
        if self.half_width == 0 {
            0
        } else {
            self.rng.gen_range(-self.half_width..=self.half_width)
        }
    }
}

/// A packet in flight along a route.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketEnvelope<M> {
    pub message: M,
    pub kind: MessageKind,
    pub route: Path,
    /// `Forward` walks the route origin to terminus, `Reverse` back.
    pub direction: Direction,
    pub egress: SimTime,
    /// Filled by [`transmit`]; one entry per traversed edge.
    pub per_hop_delays: Vec<i64>,
}

impl<M> PacketEnvelope<M> {
    pub fn new(message: M, kind: MessageKind, route: Path, direction: Direction, egress: SimTime) -> Self {
        PacketEnvelope {
            message,
            kind,
            route,
            direction,
            egress,
            per_hop_delays: Vec::new(),
        }
    }

    pub fn sender(&self) -> &NodeId {
        match self.direction {
            Direction::Forward => self.route.origin(),
            Direction::Reverse => self.route.terminus(),
        }
    }

    pub fn receiver(&self) -> &NodeId {
        match self.direction {
            Direction::Forward => self.route.terminus(),
            Direction::Reverse => self.route.origin(),
        }
    }
}

/// Walks `packet` across its route and returns the true arrival time.
///
/// Each hop costs its directional base delay plus a jitter sample (the sum
/// clamped at zero) plus whatever the adversary adds for that edge,
/// direction and message kind at the instant the packet enters the edge.
pub fn transmit<M>(
    graph: &NetworkGraph,
    packet: &mut PacketEnvelope<M>,
    attacker: &AttackerState,
    jitter: &mut JitterSource,
) -> Result<SimTime, EngineError> {
    let hops: Vec<_> = match packet.direction {
        Direction::Forward => packet
            .route
            .hops()
            .iter()
            .map(|h| (h.edge.clone(), h.direction))
            .collect(),
        Direction::Reverse => packet
            .route
            .hops()
            .iter()
            .rev()
            .map(|h| (h.edge.clone(), h.direction.flip()))
            .collect(),
    };
    let mut at = packet.egress;
    let mut position = packet.sender().clone();
    packet.per_hop_delays.clear();
    for (edge_id, direction) in hops {
        let edge = graph
            .edge(&edge_id)
            .ok_or_else(|| EngineError::InvalidRoute(format!("unknown edge `{edge_id}`")))?;
        if *edge.tail(direction) != position {
            return Err(EngineError::InvalidRoute(format!(
                "edge `{edge_id}` does not leave `{position}`"
            )));
        }
        let base = (edge.delay(direction) + jitter.sample()).max(0);
        let added = attacker.added_delay(&edge_id, direction, packet.kind, at);
        let hop = base + added;
        packet.per_hop_delays.push(hop);
        at = at + hop;
        position = edge.head(direction).clone();
    }
    Ok(at)
}
