//! Runs a validated [`Scenario`] end to end on the event engine.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::detection::{
    clear_latency, onset_latency, DetectionConfig, DetectionError, RoundVerdict,
};
use crate::engine::{
    capture_timestamp, transmit, true_offset, EngineError, JitterSource, LocalClock,
    PacketEnvelope, Scheduler,
};
use crate::protocol::{
    finish_round, MasterSession, Message, MessageKind, Mode, Outgoing, ProtocolConfig,
    ProtocolError, RoundReport, ServoState, SlaveSession, SyncRoundRecord,
};
use crate::scenario::Scenario;
use crate::time::SimTime;
use crate::topology::{Direction, DisjointPathSet, NodeId, TopologyError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("slave `{0}` has no edge-disjoint redundant path to the master")]
    NoRedundantPath(NodeId),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Detection(#[from] DetectionError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Record every send and delivery in [`RunOutput::trace`].
    pub trace: bool,
}

/// One completed sync round of one slave.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundRow {
    pub round: u32,
    /// True time the Sync left the master.
    pub sync_time: SimTime,
    /// True time the Delay_Req left the slave.
    pub delay_req_time: SimTime,
    /// True time the slave closed the round and stepped its clock.
    pub completed_at: SimTime,
    /// Slave minus master just before the step: what an ideal servo removes.
    pub theta_true: i64,
    /// Master minus slave just after the step.
    pub theta_act: i64,
    pub report: RoundReport,
    /// Messages of this round put on the wire, both directions.
    pub packets: usize,
}

impl RoundRow {
    pub fn attacked(&self) -> Option<bool> {
        self.report.verdict.as_ref().map(|v| v.attacked)
    }

    pub fn alpha(&self, path: usize) -> Option<i64> {
        self.report
            .alphas
            .iter()
            .find(|(p, _)| *p == path)
            .map(|&(_, a)| a)
    }
}

#[derive(Debug, Clone)]
pub struct SlaveRun {
    pub slave: NodeId,
    pub paths: DisjointPathSet,
    pub rows: Vec<RoundRow>,
    pub summary: SlaveSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlaveSummary {
    pub slave: String,
    pub redundant_paths: usize,
    pub rounds_started: u32,
    pub rounds_completed: usize,
    /// Rounds discarded after the round timeout.
    pub rounds_dropped: usize,
    /// Rounds still open when the run ended.
    pub rounds_open_at_end: usize,
    /// Messages that arrived for a closed or unknown round.
    pub late_messages: usize,
    pub packets_total: usize,
    pub packets_per_cycle_min: Option<usize>,
    pub packets_per_cycle_max: Option<usize>,
    /// Whether some attacked edge lies on one of this slave's paths.
    pub on_attacked_path: bool,
    pub onset_latency_rounds: Option<u32>,
    pub clear_latency_rounds: Option<u32>,
    pub detection_error: Option<String>,
    /// Median `θ_act` over rounds starting inside the attack span.
    pub steady_theta_act_ns: Option<i64>,
    pub max_abs_theta_act_ns: i64,
    /// Largest `|θ_rect - θ_true|` over all rounds.
    pub max_abs_rect_error_ns: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: Mode,
    pub mitigation: bool,
    pub seed: u64,
    pub duration_ns: i64,
    pub sync_interval_ns: i64,
    pub attack_start_ns: Option<i64>,
    pub attack_end_ns: Option<i64>,
    pub slaves: Vec<SlaveSummary>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStep {
    Send,
    Deliver,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub at: SimTime,
    pub slave: usize,
    pub step: TraceStep,
    pub kind: MessageKind,
    pub seq: u32,
    pub route: usize,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub slaves: Vec<SlaveRun>,
    pub summary: RunSummary,
    pub trace: Vec<TraceEvent>,
}

impl RunOutput {
    pub fn slave(&self, name: &str) -> Option<&SlaveRun> {
        self.slaves.iter().find(|s| s.slave.as_str() == name)
    }

    /// Slaves on an attacked path that never raised a verdict.
    pub fn undetected(&self) -> Vec<&NodeId> {
        self.slaves
            .iter()
            .filter(|s| {
                s.summary.on_attacked_path
                    && s.summary.detection_error.as_deref()
                        == Some(&DetectionError::NeverDetected.to_string())
            })
            .map(|s| &s.slave)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Master,
    Slave,
}

#[derive(Debug)]
enum Action {
    SyncTimer { slave: usize, k: u32 },
    Send { slave: usize, from: Role, message: Message },
    Deliver { slave: usize, to: Role, message: Message },
    Timeout { slave: usize, seq: u32 },
}

struct SlaveState {
    node: NodeId,
    paths: DisjointPathSet,
    clock: LocalClock,
    master: MasterSession,
    session: SlaveSession,
    servo: ServoState,
    jitter: JitterSource,
    sync_times: BTreeMap<u32, SimTime>,
    delay_req_times: BTreeMap<u32, SimTime>,
    packets: BTreeMap<u32, usize>,
    rows: Vec<RoundRow>,
    rounds_started: u32,
    dropped: usize,
    late: usize,
}

/// FNV-1a, used to give every slave its own jitter stream.
fn stream_id(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn is_late(err: &ProtocolError) -> bool {
    matches!(err, ProtocolError::StaleRound(_) | ProtocolError::UnknownSeq(_))
}

/// Computes every slave's disjoint path set and checks it can support the
/// configured mode and attacker bound.
pub fn preflight(scenario: &Scenario) -> Result<Vec<(NodeId, DisjointPathSet)>, RunError> {
    let config = &scenario.protocol;
    let sets = scenario.disjoint_paths()?;
    if config.mode == Mode::Ptpsec {
        for (node, paths) in &sets {
            let redundant = paths.redundant_count();
            if redundant == 0 {
                return Err(RunError::NoRedundantPath(node.clone()));
            }
            let measured = config.measured_paths(0, redundant).len();
            if let Some(bound) = scenario.detection.attacker_bound {
                if bound > measured / 2 {
                    return Err(DetectionError::BoundViolation { bound, n: measured }.into());
                }
            }
        }
    }
    Ok(sets)
}

pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput, RunError> {
    run_scenario_with(scenario, RunOptions::default())
}

pub fn run_scenario_with(scenario: &Scenario, options: RunOptions) -> Result<RunOutput, RunError> {
    Runner::new(scenario, options)?.run()
}

struct Runner<'a> {
    scenario: &'a Scenario,
    config: ProtocolConfig,
    detection: DetectionConfig,
    master_clock: LocalClock,
    slaves: Vec<SlaveState>,
    scheduler: Scheduler<Action>,
    rounds_total: u32,
    options: RunOptions,
    trace: Vec<TraceEvent>,
}

impl<'a> Runner<'a> {
    fn new(scenario: &'a Scenario, options: RunOptions) -> Result<Self, RunError> {
        let config = scenario.protocol;
        let detection = scenario.detection;
        let mut slaves = Vec::new();
        for (node, paths) in preflight(scenario)? {
            let redundant = paths.redundant_count();
            slaves.push(SlaveState {
                clock: scenario.clock(&node),
                master: MasterSession::new(config, redundant),
                session: SlaveSession::new(config, redundant),
                servo: ServoState::new(config.mode, config.mitigation),
                jitter: JitterSource::new(scenario.jitter(), scenario.seed(), stream_id(node.as_str())),
                node,
                paths,
                sync_times: BTreeMap::new(),
                delay_req_times: BTreeMap::new(),
                packets: BTreeMap::new(),
                rows: Vec::new(),
                rounds_started: 0,
                dropped: 0,
                late: 0,
            });
        }
        let rounds_total = (scenario.duration / config.sync_interval) as u32;
        Ok(Runner {
            scenario,
            config,
            detection,
            master_clock: scenario.clock(scenario.graph.master()),
            slaves,
            scheduler: Scheduler::new(),
            rounds_total,
            options,
            trace: Vec::new(),
        })
    }

    fn run(mut self) -> Result<RunOutput, RunError> {
        if self.rounds_total > 0 {
            for slave in 0..self.slaves.len() {
                self.scheduler.schedule(SimTime::ZERO, Action::SyncTimer { slave, k: 0 })?;
            }
        }
        let end = SimTime(self.scenario.duration);
        while let Some((now, action)) = self.scheduler.pop_until(end) {
            match action {
                Action::SyncTimer { slave, k } => self.on_sync_timer(now, slave, k)?,
                Action::Send { slave, from, message } => self.on_send(now, slave, from, message)?,
                Action::Deliver { slave, to, message } => self.on_deliver(now, slave, to, message)?,
                Action::Timeout { slave, seq } => {
                    let s = &mut self.slaves[slave];
                    if s.session.expire(seq) {
                        s.dropped += 1;
                    }
                    s.master.expire(seq);
                }
            }
        }
        Ok(self.finish())
    }

    fn schedule_all(&mut self, now: SimTime, slave: usize, from: Role, out: Vec<Outgoing>) -> Result<(), RunError> {
        for o in out {
            self.scheduler.schedule(
                now + o.after,
                Action::Send {
                    slave,
                    from,
                    message: o.message,
                },
            )?;
        }
        Ok(())
    }

    fn on_sync_timer(&mut self, now: SimTime, slave: usize, k: u32) -> Result<(), RunError> {
        if k + 1 < self.rounds_total {
            self.scheduler.schedule(
                now + self.config.sync_interval,
                Action::SyncTimer { slave, k: k + 1 },
            )?;
        }
        let s = &mut self.slaves[slave];
        let (seq, out) = s.master.start_round();
        s.rounds_started += 1;
        s.sync_times.insert(seq, now);
        self.scheduler
            .schedule(now + self.config.round_timeout(), Action::Timeout { slave, seq })?;
        self.schedule_all(now, slave, Role::Master, out)
    }

    fn on_send(&mut self, now: SimTime, slave: usize, from: Role, message: Message) -> Result<(), RunError> {
        let mut follow = Vec::new();
        let mut completed = None;
        {
            let s = &mut self.slaves[slave];
            if message.kind.is_event() {
                let result = match from {
                    Role::Master => {
                        let ts = capture_timestamp(&self.master_clock, now);
                        s.master.handle_egress(&message, ts)
                    }
                    Role::Slave => {
                        let ts = capture_timestamp(&s.clock, now);
                        s.session.handle_egress(&message, ts).map(|r| {
                            completed = r.completed;
                            r.outgoing
                        })
                    }
                };
                match result {
                    Ok(out) => follow = out,
                    // The round expired before this message left.
                    Err(e) if is_late(&e) => return Ok(()),
                    Err(e) => return Err(e.into()),
                }
            }
            if message.kind == MessageKind::DelayReq {
                s.delay_req_times.insert(message.seq, now);
            }
            *s.packets.entry(message.seq).or_default() += 1;
        }
        self.record(now, slave, TraceStep::Send, &message);

        let s = &mut self.slaves[slave];
        let route = s
            .paths
            .get(message.route_index)
            .ok_or_else(|| EngineError::InvalidRoute(format!("no path {}", message.route_index)))?
            .clone();
        let (direction, to) = match from {
            Role::Master => (Direction::Forward, Role::Slave),
            Role::Slave => (Direction::Reverse, Role::Master),
        };
        let kind = message.kind;
        let mut packet = PacketEnvelope::new(message, kind, route, direction, now);
        let arrival = transmit(&self.scenario.graph, &mut packet, &self.scenario.attacker, &mut s.jitter)?;
        self.scheduler.schedule(
            arrival,
            Action::Deliver {
                slave,
                to,
                message: packet.message,
            },
        )?;
        self.schedule_all(now, slave, from, follow)?;
        if let Some(rec) = completed {
            self.complete(now, slave, rec)?;
        }
        Ok(())
    }

    fn on_deliver(&mut self, now: SimTime, slave: usize, to: Role, message: Message) -> Result<(), RunError> {
        self.record(now, slave, TraceStep::Deliver, &message);
        let s = &mut self.slaves[slave];
        let (out, completed) = match to {
            Role::Master => {
                let ts = capture_timestamp(&self.master_clock, now);
                (s.master.handle_message(&message, ts), None)
            }
            Role::Slave => {
                let ts = capture_timestamp(&s.clock, now);
                match s.session.handle_message(&message, ts) {
                    Ok(r) => (Ok(r.outgoing), r.completed),
                    Err(e) => (Err(e), None),
                }
            }
        };
        let out = match out {
            Ok(out) => out,
            Err(e) if is_late(&e) => {
                s.late += 1;
                return Ok(());
            }
            Err(e) => return Err(e.into()),
        };
        self.schedule_all(now, slave, to, out)?;
        if let Some(rec) = completed {
            self.complete(now, slave, rec)?;
        }
        Ok(())
    }

    fn complete(&mut self, now: SimTime, slave: usize, rec: SyncRoundRecord) -> Result<(), RunError> {
        let s = &mut self.slaves[slave];
        let report = finish_round(&mut s.servo, &rec, &self.detection)?;
        let theta_true = -true_offset(&self.master_clock, &s.clock, now);
        s.clock.apply_servo_correction(report.correction, now);
        let theta_act = true_offset(&self.master_clock, &s.clock, now);
        s.rows.push(RoundRow {
            round: rec.seq,
            sync_time: s.sync_times.remove(&rec.seq).unwrap_or(now),
            delay_req_time: s.delay_req_times.remove(&rec.seq).unwrap_or(now),
            completed_at: now,
            theta_true,
            theta_act,
            report,
            packets: 0,
        });
        Ok(())
    }

    fn record(&mut self, at: SimTime, slave: usize, step: TraceStep, message: &Message) {
        if self.options.trace {
            self.trace.push(TraceEvent {
                at,
                slave,
                step,
                kind: message.kind,
                seq: message.seq,
                route: message.route_index,
            });
        }
    }

    fn finish(self) -> RunOutput {
        let span = self.scenario.attacker.active_span();
        let attacked_edges: BTreeSet<_> = self
            .scenario
            .attacker
            .specs()
            .iter()
            .map(|s| s.target_edge.clone())
            .collect();
        let mode = self.config.mode;
        let slaves: Vec<SlaveRun> = self
            .slaves
            .into_iter()
            .map(|mut s| {
                for row in &mut s.rows {
                    row.packets = s.packets.get(&row.round).copied().unwrap_or(0);
                }
                let on_attacked_path = s
                    .paths
                    .paths()
                    .iter()
                    .any(|p| p.hops().iter().any(|h| attacked_edges.contains(&h.edge)));
                let summary = summarize(&s, mode, span, on_attacked_path);
                SlaveRun {
                    slave: s.node,
                    paths: s.paths,
                    rows: s.rows,
                    summary,
                }
            })
            .collect();
        let file = &self.scenario.file;
        let summary = RunSummary {
            scenario: file.name.clone(),
            mode,
            mitigation: self.config.mitigation,
            seed: file.run.seed,
            duration_ns: self.scenario.duration,
            sync_interval_ns: self.config.sync_interval,
            attack_start_ns: span.map(|(s, _)| s.0),
            attack_end_ns: span.map(|(_, e)| e.0),
            slaves: slaves.iter().map(|s| s.summary.clone()).collect(),
        };
        RunOutput {
            slaves,
            summary,
            trace: self.trace,
        }
    }
}

fn summarize(
    s: &SlaveState,
    mode: Mode,
    span: Option<(SimTime, SimTime)>,
    on_attacked_path: bool,
) -> SlaveSummary {
    let packets: Vec<usize> = s.rows.iter().map(|r| s.packets.get(&r.round).copied().unwrap_or(0)).collect();
    let mut summary = SlaveSummary {
        slave: s.node.as_str().to_string(),
        redundant_paths: s.paths.redundant_count(),
        rounds_started: s.rounds_started,
        rounds_completed: s.rows.len(),
        rounds_dropped: s.dropped,
        rounds_open_at_end: s.session.open_rounds(),
        late_messages: s.late,
        packets_total: s.packets.values().sum(),
        packets_per_cycle_min: packets.iter().min().copied(),
        packets_per_cycle_max: packets.iter().max().copied(),
        on_attacked_path,
        onset_latency_rounds: None,
        clear_latency_rounds: None,
        detection_error: None,
        steady_theta_act_ns: None,
        max_abs_theta_act_ns: s.rows.iter().map(|r| r.theta_act.abs()).max().unwrap_or(0),
        max_abs_rect_error_ns: s
            .rows
            .iter()
            .map(|r| (r.report.theta_rect - r.theta_true).abs())
            .max()
            .unwrap_or(0),
    };
    let Some((start, end)) = span else {
        return summary;
    };
    let mut inside: Vec<i64> = s
        .rows
        .iter()
        .filter(|r| r.sync_time >= start && r.sync_time <= end)
        .map(|r| r.theta_act)
        .collect();
    inside.sort_unstable();
    summary.steady_theta_act_ns = inside.get(inside.len() / 2).copied();

    if mode == Mode::Ptpsec {
        let series: Vec<RoundVerdict> = s
            .rows
            .iter()
            .map(|r| RoundVerdict {
                start: r.sync_time,
                attacked: r.attacked().unwrap_or(false),
            })
            .collect();
        match onset_latency(&series, start) {
            Ok(n) => summary.onset_latency_rounds = Some(n),
            Err(e) => summary.detection_error = Some(e.to_string()),
        }
        if summary.detection_error.is_none() && series.iter().any(|r| r.start > end) {
            match clear_latency(&series, end) {
                Ok(n) => summary.clear_latency_rounds = Some(n),
                Err(e) => summary.detection_error = Some(e.to_string()),
            }
        }
    }
    summary
}
