//! Deterministic simulator for PTP and PTPsec under delay attacks.
//!
//! The crate models a PTP network as a graph with per-direction link
//! delays, runs the two-step PTP exchange (optionally extended with cyclic
//! `Meas` round trips over edge-disjoint redundant paths) on a
//! discrete-event engine, injects man-in-the-middle delays, and reports the
//! reported, rectified and actual clock offsets per round together with
//! attack verdicts.

pub mod adversary;
pub mod detection;
pub mod engine;
pub mod protocol;
pub mod report;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod topology;

pub use adversary::{AttackProfile, AttackSpec, AttackerState, MessageFilter};
pub use detection::{DetectionConfig, Localization, Verdict};
pub use engine::{JitterModel, LocalClock};
pub use protocol::{Message, MessageKind, Mode, PathPolicy, ProtocolConfig, RoundReport};
pub use scenario::{parse_scenario, Scenario, ScenarioError, ScenarioFile, ValidationError};
pub use sim::{preflight, run_scenario, RoundRow, RunError, RunOutput, RunSummary, SlaveRun, SlaveSummary};
pub use time::{SimTime, Timestamp};
pub use topology::{DisjointPathSet, NetworkGraph, NodeId, Path};
