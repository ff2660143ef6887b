//! Man-in-the-middle delay injection.
//!
//! The attacker sits on edges as a transparent hook. For each compromised
//! edge it may add a unidirectional delay to selected message kinds, either
//! as a constant or as a linear ramp that saturates. It never drops,
//! reorders or rewrites packets, and the set of compromised links is fixed
//! for a run.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::MessageKind;
use crate::time::{nanos_from_micros_f64, nanos_from_secs_f64, SimTime, NANOS_PER_SEC};
use crate::topology::{Direction, EdgeId, NetworkGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Static,
    Incremental,
}

/// Delay level over time within the closed window `[start, end]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackProfile {
    pub kind: ProfileKind,
    /// Static level, or the saturation level of a ramp. Nanoseconds.
    pub epsilon: i64,
    /// Ramp rate in nanoseconds per second. Zero for static profiles.
    pub delta_per_second: i64,
    pub start: SimTime,
    pub end: SimTime,
}

impl AttackProfile {
    pub fn fixed(epsilon: i64, start: SimTime, end: SimTime) -> Self {
        AttackProfile {
            kind: ProfileKind::Static,
            epsilon,
            delta_per_second: 0,
            start,
            end,
        }
    }

    pub fn ramp(epsilon: i64, delta_per_second: i64, start: SimTime, end: SimTime) -> Self {
        AttackProfile {
            kind: ProfileKind::Incremental,
            epsilon,
            delta_per_second,
            start,
            end,
        }
    }

    pub fn is_active(&self, at: SimTime) -> bool {
        self.start <= at && at <= self.end
    }

    /// Added delay at `at`; 0 outside the window. Ramps are evaluated
    /// continuously and truncated to whole nanoseconds.
    pub fn delay_at(&self, at: SimTime) -> i64 {
        if !self.is_active(at) {
            return 0;
        }
        match self.kind {
            ProfileKind::Static => self.epsilon,
            ProfileKind::Incremental => {
                let ramp = (at - self.start) as i128 * self.delta_per_second as i128
                    / NANOS_PER_SEC as i128;
                ramp.min(self.epsilon as i128) as i64
            }
        }
    }

    /// Instant at which a ramp first reaches `epsilon`.
    pub fn saturation_time(&self) -> SimTime {
        match self.kind {
            ProfileKind::Static => self.start,
            ProfileKind::Incremental => {
                let num = self.epsilon as i128 * NANOS_PER_SEC as i128;
                let rate = self.delta_per_second.max(1) as i128;
                self.start + ((num + rate - 1) / rate) as i64
            }
        }
    }

    fn overlaps(&self, other: &AttackProfile) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

/// Which message kinds an attack applies to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageFilter {
    All,
    Only(BTreeSet<MessageKind>),
}

impl MessageFilter {
    pub fn only(kinds: impl IntoIterator<Item = MessageKind>) -> Self {
        MessageFilter::Only(kinds.into_iter().collect())
    }

    pub fn matches(&self, kind: MessageKind) -> bool {
        match self {
            MessageFilter::All => true,
            MessageFilter::Only(set) => set.contains(&kind),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, MessageFilter::Only(set) if set.is_empty())
    }

    fn intersects(&self, other: &MessageFilter) -> bool {
        match (self, other) {
            (MessageFilter::All, f) | (f, MessageFilter::All) => !f.is_empty(),
            (MessageFilter::Only(a), MessageFilter::Only(b)) => !a.is_disjoint(b),
        }
    }

    fn labels(&self) -> Vec<String> {
        match self {
            MessageFilter::All => vec!["all".into()],
            MessageFilter::Only(set) => set.iter().map(|k| k.as_str().to_owned()).collect(),
        }
    }
}

impl fmt::Display for MessageFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.labels().join("|"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackSpec {
    pub target_edge: EdgeId,
    pub direction: Direction,
    pub messages: MessageFilter,
    pub profile: AttackProfile,
}

impl AttackSpec {
    fn applies(&self, edge: &EdgeId, direction: Direction, kind: MessageKind) -> bool {
        self.target_edge == *edge && self.direction == direction && self.messages.matches(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("attack {index} targets unknown edge `{edge}`")]
    UnknownEdge { index: usize, edge: EdgeId },
    #[error("attacks {first} and {second} both delay {messages} on `{edge}` ({direction:?}) in overlapping windows")]
    ConflictingSpecs {
        first: usize,
        second: usize,
        edge: EdgeId,
        direction: Direction,
        messages: String,
    },
    #[error("attack {0} has an empty message filter")]
    EmptyFilter(usize),
    #[error("attack {0}: unknown message kind `{1}`")]
    UnknownMessageKind(usize, String),
    #[error("attack {0}: window start must precede its end")]
    InvalidWindow(usize),
    #[error("attack {0}: delay level must not be negative")]
    NegativeEpsilon(usize),
    #[error("attack {0}: incremental profile needs a positive ramp rate")]
    ZeroRamp(usize),
    #[error("attack {0}: ramp does not reach its final level before the window ends")]
    RampExceedsWindow(usize),
}

/// All attacks of a run. Build with [`AttackerState::new`] and check with
/// [`validate_attacker`] before use.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttackerState {
    specs: Vec<AttackSpec>,
}

impl AttackerState {
    pub fn new(specs: Vec<AttackSpec>) -> Self {
        AttackerState { specs }
    }

    pub fn specs(&self) -> &[AttackSpec] {
        &self.specs
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    /// Total delay added to a `kind` packet entering `edge` in `direction`
    /// at `at`. Matching specs add up.
    pub fn added_delay(
        &self,
        edge: &EdgeId,
        direction: Direction,
        kind: MessageKind,
        at: SimTime,
    ) -> i64 {
        self.specs
            .iter()
            .filter(|s| s.applies(edge, direction, kind))
            .map(|s| s.profile.delay_at(at))
            .sum()
    }

    /// Earliest start and latest end over all attack windows.
    pub fn active_span(&self) -> Option<(SimTime, SimTime)> {
        let start = self.specs.iter().map(|s| s.profile.start).min()?;
        let end = self.specs.iter().map(|s| s.profile.end).max()?;
        Some((start, end))
    }
}

/// Checks edges exist, profiles are well formed, and no two specs delay the
/// same (edge, direction, kind) in overlapping windows. Any number of edges
/// may be compromised.
pub fn validate_attacker(state: &AttackerState, graph: &NetworkGraph) -> Result<(), AdversaryError> {
    for (i, spec) in state.specs.iter().enumerate() {
        if graph.edge(&spec.target_edge).is_none() {
            return Err(AdversaryError::UnknownEdge {
                index: i,
                edge: spec.target_edge.clone(),
            });
        }
        if spec.messages.is_empty() {
            return Err(AdversaryError::EmptyFilter(i));
        }
        let p = &spec.profile;
        if p.start >= p.end {
            return Err(AdversaryError::InvalidWindow(i));
        }
        if p.epsilon < 0 {
            return Err(AdversaryError::NegativeEpsilon(i));
        }
        if p.kind == ProfileKind::Incremental {
            if p.delta_per_second <= 0 {
                return Err(AdversaryError::ZeroRamp(i));
            }
            if p.saturation_time() > p.end {
                return Err(AdversaryError::RampExceedsWindow(i));
            }
        }
    }
    for (i, a) in state.specs.iter().enumerate() {
        for (j, b) in state.specs.iter().enumerate().skip(i + 1) {
            if a.target_edge == b.target_edge
                && a.direction == b.direction
                && a.messages.intersects(&b.messages)
                && a.profile.overlaps(&b.profile)
            {
                return Err(AdversaryError::ConflictingSpecs {
                    first: i,
                    second: j,
                    edge: a.target_edge.clone(),
                    direction: a.direction,
                    messages: a.messages.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// One entry of a scenario file's `attacks` list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackEntry {
    pub edge: String,
    pub direction: Direction,
    /// Message kind names (`Sync`, `Delay_Req`, ...) or `["all"]`.
    pub messages: Vec<String>,
    pub kind: ProfileKind,
    pub epsilon_us: f64,
    #[serde(default)]
    pub delta_us_per_s: f64,
    pub start_s: f64,
    pub end_s: f64,
}

impl AttackEntry {
    pub fn to_spec(&self, index: usize) -> Result<AttackSpec, AdversaryError> {
        let messages = if self.messages.iter().any(|m| m.eq_ignore_ascii_case("all")) {
            MessageFilter::All
        } else {
            let kinds = self
                .messages
                .iter()
                .map(|m| {
                    m.parse::<MessageKind>()
                        .map_err(|_| AdversaryError::UnknownMessageKind(index, m.clone()))
                })
                .collect::<Result<BTreeSet<_>, _>>()?;
            MessageFilter::Only(kinds)
        };
        let start = SimTime(nanos_from_secs_f64(self.start_s));
        let end = SimTime(nanos_from_secs_f64(self.end_s));
        let epsilon = nanos_from_micros_f64(self.epsilon_us);
        let profile = match self.kind {
            ProfileKind::Static => AttackProfile::fixed(epsilon, start, end),
            ProfileKind::Incremental => {
                AttackProfile::ramp(epsilon, nanos_from_micros_f64(self.delta_us_per_s), start, end)
            }
        };
        Ok(AttackSpec {
            target_edge: EdgeId::new(self.edge.as_str()),
            direction: self.direction,
            messages,
            profile,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::micros;
    use crate::topology::Edge;

    fn graph() -> NetworkGraph {
        NetworkGraph::new(
            vec!["M".into(), "S".into()],
            vec![
                Edge::new("e0", "M", "S", micros(100), micros(100)),
                Edge::new("e1", "M", "S", micros(100), micros(100)),
            ],
            "M".into(),
            vec!["S".into()],
        )
        .unwrap()
    }

    fn sync_attack(start: i64, end: i64) -> AttackSpec {
        AttackSpec {
            target_edge: "e0".into(),
            direction: Direction::Forward,
            messages: MessageFilter::only([MessageKind::Sync]),
            profile: AttackProfile::fixed(micros(500), SimTime::from_secs(start), SimTime::from_secs(end)),
        }
    }

    #[test]
    fn static_attack_inside_window() {
        let s = AttackerState::new(vec![sync_attack(100, 500)]);
        let e0 = EdgeId::from("e0");
        assert_eq!(
            s.added_delay(&e0, Direction::Forward, MessageKind::Sync, SimTime::from_secs(300)),
            micros(500)
        );
        assert_eq!(
            s.added_delay(&e0, Direction::Forward, MessageKind::Sync, SimTime::from_secs(50)),
            0
        );
        // Window is closed on both ends.
        assert_eq!(
            s.added_delay(&e0, Direction::Forward, MessageKind::Sync, SimTime::from_secs(500)),
            micros(500)
        );
        assert_eq!(
            s.added_delay(&e0, Direction::Forward, MessageKind::Sync, SimTime::from_secs(500) + 1),
            0
        );
    }

    #[test]
    fn filter_is_selective() {
        let s = AttackerState::new(vec![sync_attack(0, 10)]);
        let e0 = EdgeId::from("e0");
        let at = SimTime::from_secs(5);
        for kind in MessageKind::ALL {
            let d = s.added_delay(&e0, Direction::Forward, kind, at);
            if kind == MessageKind::Sync {
                assert_eq!(d, micros(500));
            } else {
                assert_eq!(d, 0, "{kind:?} must pass untouched");
            }
        }
        assert_eq!(s.added_delay(&e0, Direction::Reverse, MessageKind::Sync, at), 0);
        assert_eq!(s.added_delay(&"e1".into(), Direction::Forward, MessageKind::Sync, at), 0);
    }

    #[test]
    fn incremental_ramp() {
        let p = AttackProfile::ramp(
            micros(500),
            1_250,
            SimTime::from_secs(100),
            SimTime::from_secs(600),
        );
        assert_eq!(p.delay_at(SimTime::from_secs(300)), micros(250));
        assert_eq!(p.delay_at(SimTime::from_secs(100)), 0);
        assert_eq!(p.delay_at(SimTime::from_secs(500)), micros(500));
        assert_eq!(p.delay_at(SimTime::from_secs(550)), micros(500));
        assert_eq!(p.saturation_time(), SimTime::from_secs(500));
    }

    #[test]
    fn matching_specs_sum() {
        let mut b = sync_attack(0, 10);
        b.messages = MessageFilter::only([MessageKind::DelayReq]);
        let mut c = sync_attack(0, 10);
        c.messages = MessageFilter::All;
        c.target_edge = "e1".into();
        let s = AttackerState::new(vec![sync_attack(0, 10), b, c]);
        assert!(validate_attacker(&s, &graph()).is_ok());
    }

    #[test]
    fn validation_errors() {
        let g = graph();
        let conflict = AttackerState::new(vec![sync_attack(100, 500), sync_attack(400, 550)]);
        assert!(matches!(
            validate_attacker(&conflict, &g),
            Err(AdversaryError::ConflictingSpecs { first: 0, second: 1, .. })
        ));

        let disjoint_windows = AttackerState::new(vec![sync_attack(100, 200), sync_attack(300, 400)]);
        assert!(validate_attacker(&disjoint_windows, &g).is_ok());

        let mut unknown = sync_attack(1, 2);
        unknown.target_edge = "nope".into();
        assert!(matches!(
            validate_attacker(&AttackerState::new(vec![unknown]), &g),
            Err(AdversaryError::UnknownEdge { .. })
        ));

        let mut empty = sync_attack(1, 2);
        empty.messages = MessageFilter::Only(BTreeSet::new());
        assert_eq!(
            validate_attacker(&AttackerState::new(vec![empty]), &g),
            Err(AdversaryError::EmptyFilter(0))
        );

        assert_eq!(
            validate_attacker(&AttackerState::new(vec![sync_attack(5, 5)]), &g),
            Err(AdversaryError::InvalidWindow(0))
        );

        let long_ramp = AttackSpec {
            profile: AttackProfile::ramp(micros(500), 1_250, SimTime::from_secs(100), SimTime::from_secs(400)),
            ..sync_attack(0, 1)
        };
        assert_eq!(
            validate_attacker(&AttackerState::new(vec![long_ramp]), &g),
            Err(AdversaryError::RampExceedsWindow(0))
        );
    }

    #[test]
    fn cancellation_pair_is_valid() {
        let g = graph();
        let opposing = AttackSpec {
            target_edge: "e1".into(),
            direction: Direction::Forward,
            messages: MessageFilter::only([MessageKind::Meas]),
            profile: AttackProfile::fixed(micros(500), SimTime::from_secs(100), SimTime::from_secs(500)),
        };
        let s = AttackerState::new(vec![sync_attack(100, 500), opposing]);
        assert!(validate_attacker(&s, &g).is_ok());
        assert_eq!(
            s.active_span(),
            Some((SimTime::from_secs(100), SimTime::from_secs(500)))
        );
    }

    #[test]
    fn entry_conversion() {
        let entry: AttackEntry = serde_json::from_str(
            r#"{"edge":"e0","direction":"forward","messages":["Sync"],"kind":"incremental",
                "epsilon_us":500,"delta_us_per_s":1.25,"start_s":100,"end_s":600}"#,
        )
        .unwrap();
        let spec = entry.to_spec(0).unwrap();
        assert_eq!(spec.profile.delta_per_second, 1_250);
        assert_eq!(spec.messages, MessageFilter::only([MessageKind::Sync]));

        let all: AttackEntry = serde_json::from_str(
            r#"{"edge":"e0","direction":"reverse","messages":["all"],"kind":"static",
                "epsilon_us":1,"start_s":0,"end_s":1}"#,
        )
        .unwrap();
        assert_eq!(all.to_spec(0).unwrap().messages, MessageFilter::All);

        let bad = AttackEntry {
            messages: vec!["Announce".into()],
            ..entry
        };
        assert!(matches!(bad.to_spec(3), Err(AdversaryError::UnknownMessageKind(3, _))));
    }
}
