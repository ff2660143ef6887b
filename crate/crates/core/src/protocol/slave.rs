use std::collections::{BTreeMap, BTreeSet};

use crate::time::Timestamp;

use super::{
    Body, MeasTimestamps, Message, MessageKind, Outgoing, ProtocolConfig, ProtocolError,
    SyncRoundRecord,
};

#[derive(Debug, Default)]
struct SlaveRound {
    record: SyncRoundRecord,
    follow_up_seen: bool,
    resp_seen: bool,
    meas_fup_seen: BTreeSet<usize>,
}

/// What the slave wants done after an input.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct SlaveReaction {
    pub outgoing: Vec<Outgoing>,
    /// Set when this input completed a round.
    pub completed: Option<SyncRoundRecord>,
}

/// Slave side of the exchange with the master.
#[derive(Debug)]
pub struct SlaveSession {
    config: ProtocolConfig,
    redundant: usize,
    rounds: BTreeMap<u32, SlaveRound>,
    closed: BTreeSet<u32>,
    /// Follow_Up timestamps that overtook their (delayed) Sync.
    early_follow_up: BTreeMap<u32, Timestamp>,
}

impl SlaveSession {
    pub fn new(config: ProtocolConfig, redundant: usize) -> Self {
        SlaveSession {
            config,
            redundant,
            rounds: BTreeMap::new(),
            closed: BTreeSet::new(),
            early_follow_up: BTreeMap::new(),
        }
    }

    pub fn open_rounds(&self) -> usize {
        self.rounds.len()
    }

    fn round_mut(&mut self, seq: u32) -> Result<&mut SlaveRound, ProtocolError> {
        if self.closed.contains(&seq) {
            return Err(ProtocolError::StaleRound(seq));
        }
        self.rounds.get_mut(&seq).ok_or(ProtocolError::UnknownSeq(seq))
    }

    fn take_if_complete(&mut self, seq: u32) -> Option<SyncRoundRecord> {
        let round = self.rounds.get(&seq)?;
        if !(round.record.is_complete() && round.follow_up_seen && round.resp_seen) {
            return None;
        }
        self.closed.insert(seq);
        self.rounds.remove(&seq).map(|r| r.record)
    }

    /// A message from the master arrived; `ingress` is the slave clock
    /// reading.
    pub fn handle_message(&mut self, msg: &Message, ingress: Timestamp) -> Result<SlaveReaction, ProtocolError> {
        let seq = msg.seq;
        if msg.kind == MessageKind::Sync {
            return self.open_round(seq, ingress);
        }
        if msg.kind == MessageKind::FollowUp && !self.closed.contains(&seq) && !self.rounds.contains_key(&seq) {
            let t1 = msg.carried_timestamp().ok_or(ProtocolError::IncompleteRound(seq))?;
            if self.early_follow_up.insert(seq, t1).is_some() {
                return Err(ProtocolError::DuplicateMessage {
                    kind: msg.kind,
                    seq,
                    route: msg.route_index,
                });
            }
            return Ok(SlaveReaction::default());
        }
        let round = self.round_mut(seq)?;
        let duplicate = ProtocolError::DuplicateMessage {
            kind: msg.kind,
            seq,
            route: msg.route_index,
        };
        let unknown_route = ProtocolError::UnknownRoute {
            seq,
            route: msg.route_index,
        };
        match msg.kind {
            MessageKind::FollowUp => {
                if round.follow_up_seen {
                    return Err(duplicate);
                }
                round.record.t1 = Some(msg.carried_timestamp().ok_or(ProtocolError::IncompleteRound(seq))?);
                round.follow_up_seen = true;
            }
            MessageKind::Meas => {
                let m = round.record.meas.get_mut(&msg.route_index).ok_or(unknown_route)?;
                if m.t_m4.is_some() {
                    return Err(duplicate);
                }
                m.t_m4 = Some(ingress);
            }
            MessageKind::MeasFup => {
                let t_m3 = msg.carried_timestamp().ok_or(ProtocolError::IncompleteRound(seq))?;
                let m = round.record.meas.get_mut(&msg.route_index).ok_or(unknown_route)?;
                if !round.meas_fup_seen.insert(msg.route_index) {
                    return Err(duplicate);
                }
                m.t_m3 = Some(t_m3);
            }
            MessageKind::DelayResp => {
                if round.resp_seen {
                    return Err(duplicate);
                }
                let Body::DelayResp { t4, meas_ingress } = &msg.body else {
                    return Err(ProtocolError::IncompleteRound(seq));
                };
                if let Some(&(p, _)) = meas_ingress.iter().find(|(p, _)| !round.record.meas.contains_key(p)) {
                    return Err(ProtocolError::UnknownRoute { seq, route: p });
                }
                round.record.t4 = Some(*t4);
                for &(p, t_m2) in meas_ingress {
                    if let Some(m) = round.record.meas.get_mut(&p) {
                        m.t_m2 = Some(t_m2);
                    }
                }
                round.resp_seen = true;
            }
            kind => {
                return Err(ProtocolError::UnexpectedMessage { kind, role: "slave" });
            }
        }
        Ok(SlaveReaction {
            outgoing: Vec::new(),
            completed: self.take_if_complete(seq),
        })
    }

    fn open_round(&mut self, seq: u32, t2: Timestamp) -> Result<SlaveReaction, ProtocolError> {
        if self.closed.contains(&seq) {
            return Err(ProtocolError::StaleRound(seq));
        }
        if self.rounds.contains_key(&seq) {
            return Err(ProtocolError::DuplicateMessage {
                kind: MessageKind::Sync,
                seq,
                route: 0,
            });
        }
        let paths = self.config.measured_paths(seq, self.redundant);
        let mut record = SyncRoundRecord::new(seq);
        record.t2 = Some(t2);
        record.t1 = self.early_follow_up.remove(&seq);
        record.meas = paths.iter().map(|&p| (p, MeasTimestamps::default())).collect();
        self.rounds.insert(
            seq,
            SlaveRound {
                follow_up_seen: record.t1.is_some(),
                record,
                ..Default::default()
            },
        );
        let mut outgoing: Vec<Outgoing> = paths
            .iter()
            .map(|&p| Outgoing::after(Message::event(MessageKind::Meas, seq, p), self.config.residence))
            .collect();
        outgoing.push(Outgoing::after(
            Message::event(MessageKind::DelayReq, seq, 0),
            self.config.delay_req_gap,
        ));
        Ok(SlaveReaction {
            outgoing,
            completed: None,
        })
    }

    /// Egress timestamp of one of our own event messages.
    pub fn handle_egress(&mut self, msg: &Message, ts: Timestamp) -> Result<SlaveReaction, ProtocolError> {
        let seq = msg.seq;
        let round = self.round_mut(seq)?;
        let mut outgoing = Vec::new();
        match msg.kind {
            MessageKind::Meas => {
                let m = round.record.meas.get_mut(&msg.route_index).ok_or(ProtocolError::UnknownRoute {
                    seq,
                    route: msg.route_index,
                })?;
                m.t_m1 = Some(ts);
                outgoing.push(Outgoing::now(Message::follow_up(
                    MessageKind::MeasFup,
                    seq,
                    msg.route_index,
                    ts,
                )));
            }
            MessageKind::DelayReq => {
                round.record.t3 = Some(ts);
            }
            _ => {}
        }
        Ok(SlaveReaction {
            outgoing,
            completed: self.take_if_complete(seq),
        })
    }

    /// Discards round `seq` if still open. Returns whether it was open.
    pub fn expire(&mut self, seq: u32) -> bool {
        self.early_follow_up.remove(&seq);
        let open = self.rounds.remove(&seq).is_some();
        if open {
            self.closed.insert(seq);
        }
        open
    }
}
