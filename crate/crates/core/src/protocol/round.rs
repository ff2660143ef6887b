use std::collections::BTreeMap;

use serde::Serialize;

use crate::detection::{consensus_asymmetry, detect, DetectionConfig, EstimateSet, Localization, Verdict};
use crate::time::Timestamp;

use super::{Mode, ProtocolError};

/// Timestamps of one cyclic measurement over redundant path `P_i`.
///
/// `t_m1`/`t_m4` are slave clock readings (Meas egress toward the master,
/// Meas ingress from the master), `t_m2`/`t_m3` master clock readings.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct MeasTimestamps {
    pub t_m1: Option<Timestamp>,
    pub t_m2: Option<Timestamp>,
    pub t_m3: Option<Timestamp>,
    pub t_m4: Option<Timestamp>,
}

impl MeasTimestamps {
    pub fn is_complete(&self) -> bool {
        self.t_m1.is_some() && self.t_m2.is_some() && self.t_m3.is_some() && self.t_m4.is_some()
    }
}

/// All timestamps of one synchronization round as seen by the slave.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SyncRoundRecord {
    pub seq: u32,
    /// Master Sync egress.
    pub t1: Option<Timestamp>,
    /// Slave Sync ingress.
    pub t2: Option<Timestamp>,
    /// Slave Delay_Req egress.
    pub t3: Option<Timestamp>,
    /// Master Delay_Req ingress.
    pub t4: Option<Timestamp>,
    /// Cyclic measurements keyed by redundant path index (1-based).
    pub meas: BTreeMap<usize, MeasTimestamps>,
}

impl SyncRoundRecord {
    pub fn new(seq: u32) -> Self {
        SyncRoundRecord {
            seq,
            ..Default::default()
        }
    }

    pub fn has_ptp_timestamps(&self) -> bool {
        self.t1.is_some() && self.t2.is_some() && self.t3.is_some() && self.t4.is_some()
    }

    pub fn is_complete(&self) -> bool {
        self.has_ptp_timestamps() && self.meas.values().all(MeasTimestamps::is_complete)
    }

    fn ptp(&self) -> Result<[Timestamp; 4], ProtocolError> {
        match (self.t1, self.t2, self.t3, self.t4) {
            (Some(t1), Some(t2), Some(t3), Some(t4)) => Ok([t1, t2, t3, t4]),
            _ => Err(ProtocolError::IncompleteRound(self.seq)),
        }
    }

    /// `(RTT_fwd, RTT_rev)` for redundant path `path`.
    pub fn rtt_measurements(&self, path: usize) -> Result<(i64, i64), ProtocolError> {
        let [t1, t2, t3, t4] = self.ptp()?;
        let m = self
            .meas
            .get(&path)
            .ok_or(ProtocolError::IncompleteRound(self.seq))?;
        match (m.t_m1, m.t_m2, m.t_m3, m.t_m4) {
            (Some(t_m1), Some(t_m2), Some(t_m3), Some(t_m4)) => {
                Ok(round_trip_times([t1, t2, t3, t4], [t_m1, t_m2, t_m3, t_m4]))
            }
            _ => Err(ProtocolError::IncompleteRound(self.seq)),
        }
    }
}

/// Offset of the slave relative to the master, `((t2 - t1) - (t4 - t3)) / 2`,
/// assuming a symmetric path. Halving truncates toward zero.
pub fn offset_from_timestamps(t1: Timestamp, t2: Timestamp, t3: Timestamp, t4: Timestamp) -> i64 {
    ((t2 - t1) - (t4 - t3)) / 2
}

/// Reported offset of a round (`θ_rep`).
pub fn compute_offset(rec: &SyncRoundRecord) -> Result<i64, ProtocolError> {
    let [t1, t2, t3, t4] = rec.ptp()?;
    Ok(offset_from_timestamps(t1, t2, t3, t4))
}

/// Offset a PTP slave computes when `Sync` is delayed by `eps_sync` and
/// `Delay_Req` by `eps_delay_req` on an otherwise symmetric path:
/// `θ + (ε1 - ε2) / 2`, with the same truncation as [`compute_offset`].
pub fn expected_offset_under_attack(theta_true: i64, eps_sync: i64, eps_delay_req: i64) -> i64 {
    (2 * theta_true + eps_sync - eps_delay_req) / 2
}

/// Cyclic round-trip times of one round:
///
/// * `RTT_fwd = (t_m2 - t1) - (t_m1 - t2)`: Sync out on the sync path, Meas
///   back on the redundant path.
/// * `RTT_rev = (t_m4 - t3) - (t_m3 - t4)`: Delay_Req in on the sync path,
///   Meas out on the redundant path.
///
/// Each bracket is a difference of readings from one clock, so clock
/// offsets and the responder's processing time drop out.
pub fn round_trip_times(ptp: [Timestamp; 4], meas: [Timestamp; 4]) -> (i64, i64) {
    let [t1, t2, t3, t4] = ptp;
    let [t_m1, t_m2, t_m3, t_m4] = meas;
    let fwd = (t_m2 - t1) - (t_m1 - t2);
    let rev = (t_m4 - t3) - (t_m3 - t4);
    (fwd, rev)
}

/// `α^(i) = RTT_fwd - RTT_rev`, which equals `α_P0 - α_Pi`.
pub fn asymmetry_estimate(rtt_fwd: i64, rtt_rev: i64) -> i64 {
    rtt_fwd - rtt_rev
}

/// `θ_rect = θ_rep - α/2`, halving truncated toward zero.
pub fn rectified_offset(theta_rep: i64, alpha: i64) -> i64 {
    theta_rep - alpha / 2
}

/// Packets per synchronization cycle with `n` measured redundant paths:
/// four PTP messages plus Meas and Meas_Fup in both directions per path.
pub fn messages_per_cycle(n: usize) -> usize {
    4 + 4 * n
}

/// Servo inputs of the most recent round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ServoState {
    pub mode: Mode,
    /// When false, a PTPsec slave measures and reports but still steers on
    /// `θ_rep`.
    pub mitigation: bool,
    pub last_reported_offset: i64,
    pub last_asymmetry: Option<i64>,
    pub last_rectified_offset: i64,
}

impl ServoState {
    pub fn new(mode: Mode, mitigation: bool) -> Self {
        ServoState {
            mode,
            mitigation,
            last_reported_offset: 0,
            last_asymmetry: None,
            last_rectified_offset: 0,
        }
    }
}

/// Outcome of one completed round; the contract consumed by detection
/// summaries and CSV output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RoundReport {
    pub seq: u32,
    pub theta_rep: i64,
    pub theta_rect: i64,
    /// `(i, α^(i))` per measured redundant path.
    pub alphas: Vec<(usize, i64)>,
    pub verdict: Option<Verdict>,
    pub localization: Option<Localization>,
    /// Value handed to the clock servo; the slave steps by its negation.
    pub correction: i64,
}

/// Closes a round: computes `θ_rep`, and in PTPsec mode the per-path
/// asymmetry estimates, verdict, consensus `α_P0` and `θ_rect`. Returns the
/// report with the correction the servo should apply.
pub fn finish_round(
    servo: &mut ServoState,
    rec: &SyncRoundRecord,
    detection: &DetectionConfig,
) -> Result<RoundReport, ProtocolError> {
    let theta_rep = compute_offset(rec)?;
    let mut report = RoundReport {
        seq: rec.seq,
        theta_rep,
        theta_rect: theta_rep,
        alphas: Vec::new(),
        verdict: None,
        localization: None,
        correction: theta_rep,
    };
    servo.last_reported_offset = theta_rep;

    if servo.mode == Mode::Ptpsec {
        for &path in rec.meas.keys() {
            let (fwd, rev) = rec.rtt_measurements(path)?;
            report.alphas.push((path, asymmetry_estimate(fwd, rev)));
        }
        if report.alphas.is_empty() {
            return Err(ProtocolError::IncompleteRound(rec.seq));
        }
        let set = EstimateSet::indexed(rec.seq, report.alphas.clone(), detection.threshold);
        let verdict = detect(&set)?;
        let localization = consensus_asymmetry(&set, detection.bound_for(report.alphas.len()))?;
        let alpha = localization.consensus_alpha;
        report.theta_rect = rectified_offset(theta_rep, alpha);
        if servo.mitigation {
            report.correction = report.theta_rect;
        }
        report.verdict = Some(verdict);
        report.localization = Some(localization);
        servo.last_asymmetry = Some(alpha);
    }
    servo.last_rectified_offset = report.theta_rect;
    Ok(report)
}
