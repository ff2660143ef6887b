//! JSON scenario files: schema, parsing and cross-reference validation.
//!
//! Keys are snake_case and carry their unit (`epsilon_us`, `start_s`).
//! See `docs/scenario-format.md` for the full schema.

use std::collections::BTreeMap;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{validate_attacker, AdversaryError, AttackEntry, AttackerState};
use crate::detection::DetectionConfig;
use crate::engine::{JitterModel, LocalClock};
use crate::protocol::{Mode, PathPolicy, ProtocolConfig};
use crate::time::{nanos_from_micros_f64, nanos_from_secs_f64};
use crate::topology::{
    build_graph, find_edge_disjoint_paths, DisjointPathSet, NetworkGraph, NodeId, TopologyError,
    TopologySpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub clocks: BTreeMap<String, ClockSection>,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default)]
    pub attacks: Vec<AttackEntry>,
    pub run: RunSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockSection {
    #[serde(default)]
    pub offset_us: f64,
    #[serde(default)]
    pub drift_ppm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_true")]
    pub mitigation: bool,
    #[serde(default = "default_sync_interval")]
    pub sync_interval_s: f64,
    #[serde(default = "default_residence")]
    pub residence_us: f64,
    #[serde(default = "default_delay_req_gap")]
    pub delay_req_gap_us: f64,
    #[serde(default)]
    pub path_policy: PathPolicy,
    /// Caps the number of redundant paths used per slave.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_redundant_paths: Option<usize>,
}

fn default_mode() -> Mode {
    Mode::Ptpsec
}
fn default_true() -> bool {
    true
}
fn default_sync_interval() -> f64 {
    1.0
}
fn default_residence() -> f64 {
    10.0
}
fn default_delay_req_gap() -> f64 {
    400.0
}
fn default_threshold() -> f64 {
    1.0
}

impl Default for ProtocolSection {
    fn default() -> Self {
        ProtocolSection {
            mode: default_mode(),
            mitigation: true,
            sync_interval_s: default_sync_interval(),
            residence_us: default_residence(),
            delay_req_gap_us: default_delay_req_gap(),
            path_policy: PathPolicy::All,
            max_redundant_paths: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub jitter: JitterModel,
    #[serde(default = "default_threshold")]
    pub threshold_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attacker_bound: Option<usize>,
    /// Fail the run (CLI exit code 3) if a slave whose paths cross an
    /// attacked edge never raises a verdict.
    #[serde(default)]
    pub assert_detection: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid `{field}`: {reason}")]
    InvalidValue { field: &'static str, reason: String },
    #[error("clock section names unknown node `{0}`")]
    UnknownClockNode(String),
    #[error("attack {index} window ends after the run ({end_s} s > {duration_s} s)")]
    AttackOutsideRun { index: usize, end_s: f64, duration_s: f64 },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation failed: {0}")]
    Validation(#[from] ValidationError),
}

/// A parsed and validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub graph: NetworkGraph,
    pub attacker: AttackerState,
    pub protocol: ProtocolConfig,
    pub detection: DetectionConfig,
    pub clocks: BTreeMap<NodeId, LocalClock>,
    /// Run length in nanoseconds.
    pub duration: i64,
}

/// Reads and validates a scenario file.
pub fn parse_scenario(path: impl AsRef<FsPath>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

fn require_positive(field: &'static str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(ValidationError::InvalidValue {
            field,
            reason: format!("{value} must be positive"),
        })
    }
}

fn require_non_negative(field: &'static str, value: f64) -> Result<(), ValidationError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ValidationError::InvalidValue {
            field,
            reason: format!("{value} must not be negative"),
        })
    }
}

impl ScenarioFile {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(Scenario::validate(ScenarioFile::from_json(text)?)?)
    }

    /// Checks every cross reference and converts units.
    pub fn validate(file: ScenarioFile) -> Result<Self, ValidationError> {
        if file.topology.master.is_none() {
            return Err(ValidationError::MissingField("topology.master"));
        }
        for edge in &file.topology.edges {
            require_non_negative("topology.edges.delay_fwd_us", edge.delay_fwd_us)?;
            require_non_negative("topology.edges.delay_bwd_us", edge.delay_bwd_us)?;
        }
        let graph = build_graph(&file.topology)?;

        let p = &file.protocol;
        require_positive("protocol.sync_interval_s", p.sync_interval_s)?;
        require_non_negative("protocol.residence_us", p.residence_us)?;
        require_non_negative("protocol.delay_req_gap_us", p.delay_req_gap_us)?;
        let protocol = ProtocolConfig {
            mode: p.mode,
            mitigation: p.mitigation,
            sync_interval: nanos_from_secs_f64(p.sync_interval_s),
            residence: nanos_from_micros_f64(p.residence_us),
            delay_req_gap: nanos_from_micros_f64(p.delay_req_gap_us),
            path_policy: p.path_policy,
            ..ProtocolConfig::default()
        };
        if protocol.delay_req_gap < protocol.residence {
            return Err(ValidationError::InvalidValue {
                field: "protocol.delay_req_gap_us",
                reason: "must not be shorter than residence_us".into(),
            });
        }
        if p.max_redundant_paths == Some(0) && p.mode == Mode::Ptpsec {
            return Err(ValidationError::InvalidValue {
                field: "protocol.max_redundant_paths",
                reason: "PTPsec needs at least one redundant path".into(),
            });
        }

        let r = &file.run;
        require_non_negative("run.duration_s", r.duration_s)?;
        require_non_negative("run.threshold_us", r.threshold_us)?;
        if let JitterModel::Uniform { half_width_us } = r.jitter {
            require_non_negative("run.jitter.half_width_us", half_width_us)?;
        }
        let duration = nanos_from_secs_f64(r.duration_s);
        let detection = DetectionConfig {
            threshold: nanos_from_micros_f64(r.threshold_us),
            attacker_bound: r.attacker_bound,
        };

        let mut clocks = BTreeMap::new();
        for (node, spec) in &file.clocks {
            let id = NodeId::new(node.as_str());
            if !graph.contains_node(&id) {
                return Err(ValidationError::UnknownClockNode(node.clone()));
            }
            if !spec.offset_us.is_finite() || !spec.drift_ppm.is_finite() {
                return Err(ValidationError::InvalidValue {
                    field: "clocks",
                    reason: format!("non-finite value for `{node}`"),
                });
            }
            let drift_ppb = (spec.drift_ppm * 1_000.0).round() as i64;
            clocks.insert(id, LocalClock::new(nanos_from_micros_f64(spec.offset_us), drift_ppb));
        }

        let specs = file
            .attacks
            .iter()
            .enumerate()
            .map(|(i, a)| a.to_spec(i))
            .collect::<Result<Vec<_>, _>>()?;
        let attacker = AttackerState::new(specs);
        validate_attacker(&attacker, &graph)?;
        for (index, a) in file.attacks.iter().enumerate() {
            if nanos_from_secs_f64(a.end_s) > duration {
                return Err(ValidationError::AttackOutsideRun {
                    index,
                    end_s: a.end_s,
                    duration_s: r.duration_s,
                });
            }
        }

        Ok(Scenario {
            file,
            graph,
            attacker,
            protocol,
            detection,
            clocks,
            duration,
        })
    }

    pub fn name(&self) -> &str {
        &self.file.name
    }

    pub fn seed(&self) -> u64 {
        self.file.run.seed
    }

    pub fn jitter(&self) -> JitterModel {
        self.file.run.jitter
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.file.protocol.mode = mode;
        self.protocol.mode = mode;
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.file.run.seed = seed;
    }

    pub fn clock(&self, node: &NodeId) -> LocalClock {
        self.clocks.get(node).cloned().unwrap_or_default()
    }

    /// Disjoint path set per slave, in slave order, capped at
    /// `max_redundant_paths` redundant paths.
    pub fn disjoint_paths(&self) -> Result<Vec<(NodeId, DisjointPathSet)>, TopologyError> {
        self.graph
            .slaves()
            .iter()
            .map(|slave| {
                let mut set = find_edge_disjoint_paths(&self.graph, self.graph.master(), slave)?;
                if let Some(cap) = self.file.protocol.max_redundant_paths {
                    set.truncate(cap + 1);
                }
                Ok((slave.clone(), set))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "name": "t",
        "topology": {
            "nodes": ["M", "S"],
            "edges": [
                {"id": "e0", "a": "M", "b": "S", "delay_fwd_us": 100, "delay_bwd_us": 100},
                {"id": "e1", "a": "M", "b": "S", "delay_fwd_us": 100, "delay_bwd_us": 100}
            ],
            "master": "M",
            "slaves": ["S"]
        },
        "attacks": [
            {"edge": "e0", "direction": "forward", "messages": ["Sync"], "kind": "static",
             "epsilon_us": 500, "start_s": 100, "end_s": 500}
        ],
        "run": {"duration_s": 600}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let s = Scenario::from_json(BASE).unwrap();
        assert_eq!(s.protocol.mode, Mode::Ptpsec);
        assert_eq!(s.protocol.sync_interval, crate::time::secs(1));
        assert_eq!(s.protocol.residence, crate::time::micros(10));
        assert_eq!(s.detection.threshold, crate::time::micros(1));
        assert_eq!(s.duration, crate::time::secs(600));
        assert_eq!(s.attacker.specs().len(), 1);
    }

    #[test]
    fn missing_master_is_validation_error() {
        let text = BASE.replace(r#""master": "M","#, "");
        assert!(matches!(
            Scenario::from_json(&text),
            Err(ScenarioError::Validation(ValidationError::MissingField("topology.master")))
        ));
    }

    #[test]
    fn unknown_attack_edge() {
        let text = BASE.replace(r#"{"edge": "e0""#, r#"{"edge": "e9""#);
        assert!(matches!(
            Scenario::from_json(&text),
            Err(ScenarioError::Validation(ValidationError::Adversary(
                AdversaryError::UnknownEdge { .. }
            )))
        ));
    }

    #[test]
    fn parse_error_has_position() {
        let err = Scenario::from_json("{\n  \"name\": 3,\n}").unwrap_err();
        match err {
            ScenarioError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let text = BASE.replace(r#""run": {"duration_s": 600}"#, r#""run": {"duration_s": 600, "sede": 1}"#);
        assert!(matches!(Scenario::from_json(&text), Err(ScenarioError::Parse { .. })));
    }

    #[test]
    fn attack_must_fit_in_run() {
        let text = BASE.replace(r#""duration_s": 600"#, r#""duration_s": 400"#);
        assert!(matches!(
            Scenario::from_json(&text),
            Err(ScenarioError::Validation(ValidationError::AttackOutsideRun { .. }))
        ));
    }

    #[test]
    fn clock_for_unknown_node() {
        let text = BASE.replace(r#""attacks""#, r#""clocks": {"X": {"offset_us": 1}}, "attacks""#);
        assert!(matches!(
            Scenario::from_json(&text),
            Err(ScenarioError::Validation(ValidationError::UnknownClockNode(_)))
        ));
    }

    #[test]
    fn json_round_trip_is_stable() {
        let first = ScenarioFile::from_json(BASE).unwrap();
        let emitted = first.to_json_pretty();
        let second = ScenarioFile::from_json(&emitted).unwrap();
        assert_eq!(first, second);
        assert_eq!(emitted, second.to_json_pretty());
    }

    #[test]
    fn path_cap() {
        let text = BASE.replace(r#""run""#, r#""protocol": {"max_redundant_paths": 0, "mode": "ptp"}, "run""#);
        let s = Scenario::from_json(&text).unwrap();
        let paths = s.disjoint_paths().unwrap();
        assert_eq!(paths[0].1.len(), 1);
    }
}
