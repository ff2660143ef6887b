use std::collections::{BTreeMap, BTreeSet};

use crate::time::Timestamp;

use super::{Body, Message, MessageKind, Outgoing, ProtocolConfig, ProtocolError};

#[derive(Debug, Default)]
struct MasterRound {
    paths: Vec<usize>,
    t1: Option<Timestamp>,
    t4: Option<Timestamp>,
    /// t_m2 per path: ingress of the slave's Meas.
    meas_in: BTreeMap<usize, Timestamp>,
    /// t_m1 per path, from the slave's Meas_Fup.
    meas_fup_in: BTreeMap<usize, Timestamp>,
    /// Paths whose answering Meas_Fup (t_m3) has been sent.
    meas_fup_out: BTreeSet<usize>,
    resp_sent: bool,
}

impl MasterRound {
    fn done(&self) -> bool {
        self.resp_sent
            && self.paths.iter().all(|p| {
                self.meas_fup_in.contains_key(p) && self.meas_fup_out.contains(p)
            })
    }
}

/// Master side of the exchange with one slave.
#[derive(Debug)]
pub struct MasterSession {
    config: ProtocolConfig,
    redundant: usize,
    next_seq: u32,
    rounds: BTreeMap<u32, MasterRound>,
    closed: BTreeSet<u32>,
}

impl MasterSession {
    /// `redundant` is the number of redundant paths available to this slave.
    pub fn new(config: ProtocolConfig, redundant: usize) -> Self {
        MasterSession {
            config,
            redundant,
            next_seq: 0,
            rounds: BTreeMap::new(),
            closed: BTreeSet::new(),
        }
    }

    pub fn open_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Opens the next round and returns its sequence number and the Sync.
    pub fn start_round(&mut self) -> (u32, Vec<Outgoing>) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.rounds.insert(
            seq,
            MasterRound {
                paths: self.config.measured_paths(seq, self.redundant),
                ..Default::default()
            },
        );
        (seq, vec![Outgoing::now(Message::event(MessageKind::Sync, seq, 0))])
    }

    fn round_mut(&mut self, seq: u32) -> Result<&mut MasterRound, ProtocolError> {
        if self.closed.contains(&seq) {
            return Err(ProtocolError::StaleRound(seq));
        }
        self.rounds.get_mut(&seq).ok_or(ProtocolError::UnknownSeq(seq))
    }

    fn close_if_done(&mut self, seq: u32) {
        if self.rounds.get(&seq).is_some_and(MasterRound::done) {
            self.rounds.remove(&seq);
            self.closed.insert(seq);
        }
    }

    /// Egress timestamp of one of our own event messages. Produces the
    /// matching follow-up.
    pub fn handle_egress(&mut self, msg: &Message, ts: Timestamp) -> Result<Vec<Outgoing>, ProtocolError> {
        let seq = msg.seq;
        let round = self.round_mut(seq)?;
        let out = match msg.kind {
            MessageKind::Sync => {
                round.t1 = Some(ts);
                vec![Outgoing::now(Message::follow_up(MessageKind::FollowUp, seq, 0, ts))]
            }
            MessageKind::Meas => {
                round.meas_fup_out.insert(msg.route_index);
                vec![Outgoing::now(Message::follow_up(
                    MessageKind::MeasFup,
                    seq,
                    msg.route_index,
                    ts,
                ))]
            }
            _ => Vec::new(),
        };
        self.close_if_done(seq);
        Ok(out)
    }

    /// A message from the slave arrived; `ingress` is the master clock
    /// reading (meaningful for event messages).
    pub fn handle_message(&mut self, msg: &Message, ingress: Timestamp) -> Result<Vec<Outgoing>, ProtocolError> {
        let seq = msg.seq;
        let residence = self.config.residence;
        let round = self.round_mut(seq)?;
        let duplicate = ProtocolError::DuplicateMessage {
            kind: msg.kind,
            seq,
            route: msg.route_index,
        };
        let mut out = Vec::new();
        match msg.kind {
            MessageKind::Meas => {
                if !round.paths.contains(&msg.route_index) {
                    return Err(ProtocolError::UnknownRoute {
                        seq,
                        route: msg.route_index,
                    });
                }
                if round.meas_in.contains_key(&msg.route_index) {
                    return Err(duplicate);
                }
                round.meas_in.insert(msg.route_index, ingress);
            }
            MessageKind::MeasFup => {
                if !round.paths.contains(&msg.route_index) {
                    return Err(ProtocolError::UnknownRoute {
                        seq,
                        route: msg.route_index,
                    });
                }
                let t_m1 = msg.carried_timestamp().ok_or(ProtocolError::IncompleteRound(seq))?;
                if round.meas_fup_in.contains_key(&msg.route_index) {
                    return Err(duplicate);
                }
                round.meas_fup_in.insert(msg.route_index, t_m1);
            }
            MessageKind::DelayReq => {
                if round.t4.is_some() {
                    return Err(duplicate);
                }
                round.t4 = Some(ingress);
                out.extend(
                    round
                        .paths
                        .iter()
                        .map(|&p| Outgoing::after(Message::event(MessageKind::Meas, seq, p), residence)),
                );
            }
            kind => {
                return Err(ProtocolError::UnexpectedMessage {
                    kind,
                    role: "master",
                })
            }
        }
        if !round.resp_sent {
            if let Some(t4) = round.t4 {
                if round.paths.iter().all(|p| round.meas_in.contains_key(p)) {
                    round.resp_sent = true;
                    out.push(Outgoing::after(
                        Message {
                            kind: MessageKind::DelayResp,
                            seq,
                            route_index: 0,
                            body: Body::DelayResp {
                                t4,
                                meas_ingress: round.meas_in.iter().map(|(&p, &t)| (p, t)).collect(),
                            },
                        },
                        residence,
                    ));
                }
            }
        }
        self.close_if_done(seq);
        Ok(out)
    }

    /// Discards round `seq` if still open. Returns whether it was open.
    pub fn expire(&mut self, seq: u32) -> bool {
        let open = self.rounds.remove(&seq).is_some();
        if open {
            self.closed.insert(seq);
        }
        open
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::Mode;

    fn kinds(out: &[Outgoing]) -> Vec<(MessageKind, usize)> {
        out.iter().map(|o| (o.message.kind, o.message.route_index)).collect()
    }

    #[test]
    fn sync_then_follow_up() {
        let mut m = MasterSession::new(ProtocolConfig::default(), 1);
        let (seq, out) = m.start_round();
        assert_eq!(seq, 0);
        assert_eq!(kinds(&out), vec![(MessageKind::Sync, 0)]);
        let fup = m.handle_egress(&out[0].message, Timestamp(5)).unwrap();
        assert_eq!(fup[0].message.kind, MessageKind::FollowUp);
        assert_eq!(fup[0].message.carried_timestamp(), Some(Timestamp(5)));
    }

    #[test]
    fn delay_req_triggers_meas_and_resp() {
        let mut m = MasterSession::new(ProtocolConfig::default(), 2);
        let (seq, out) = m.start_round();
        m.handle_egress(&out[0].message, Timestamp(0)).unwrap();
        for p in [1, 2] {
            m.handle_message(&Message::event(MessageKind::Meas, seq, p), Timestamp(100 + p as i64))
                .unwrap();
        }
        let out = m
            .handle_message(&Message::event(MessageKind::DelayReq, seq, 0), Timestamp(900))
            .unwrap();
        assert_eq!(
            kinds(&out),
            vec![
                (MessageKind::Meas, 1),
                (MessageKind::Meas, 2),
                (MessageKind::DelayResp, 0)
            ]
        );
        match &out[2].message.body {
            Body::DelayResp { t4, meas_ingress } => {
                assert_eq!(*t4, Timestamp(900));
                assert_eq!(meas_ingress, &vec![(1, Timestamp(101)), (2, Timestamp(102))]);
            }
            other => panic!("unexpected body {other:?}"),
        }
    }

    #[test]
    fn resp_waits_for_late_meas() {
        let mut m = MasterSession::new(ProtocolConfig::default(), 1);
        let (seq, _) = m.start_round();
        let out = m
            .handle_message(&Message::event(MessageKind::DelayReq, seq, 0), Timestamp(900))
            .unwrap();
        assert_eq!(kinds(&out), vec![(MessageKind::Meas, 1)]);
        let out = m
            .handle_message(&Message::event(MessageKind::Meas, seq, 1), Timestamp(950))
            .unwrap();
        assert_eq!(kinds(&out), vec![(MessageKind::DelayResp, 0)]);
    }

    #[test]
    fn ptp_mode_answers_immediately() {
        let cfg = ProtocolConfig {
            mode: Mode::Ptp,
            ..Default::default()
        };
        let mut m = MasterSession::new(cfg, 3);
        let (seq, _) = m.start_round();
        let out = m
            .handle_message(&Message::event(MessageKind::DelayReq, seq, 0), Timestamp(1))
            .unwrap();
        assert_eq!(kinds(&out), vec![(MessageKind::DelayResp, 0)]);
        // Round is finished once Delay_Resp is out.
        assert_eq!(m.open_rounds(), 0);
    }

    #[test]
    fn errors() {
        let mut m = MasterSession::new(ProtocolConfig::default(), 1);
        assert_eq!(
            m.handle_message(&Message::event(MessageKind::Meas, 9, 1), Timestamp(0)),
            Err(ProtocolError::UnknownSeq(9))
        );
        let (seq, _) = m.start_round();
        m.handle_message(&Message::event(MessageKind::DelayReq, seq, 0), Timestamp(0))
            .unwrap();
        assert!(matches!(
            m.handle_message(&Message::event(MessageKind::DelayReq, seq, 0), Timestamp(0)),
            Err(ProtocolError::DuplicateMessage { .. })
        ));
        assert!(matches!(
            m.handle_message(&Message::event(MessageKind::Meas, seq, 4), Timestamp(0)),
            Err(ProtocolError::UnknownRoute { .. })
        ));
        assert!(matches!(
            m.handle_message(&Message::event(MessageKind::Sync, seq, 0), Timestamp(0)),
            Err(ProtocolError::UnexpectedMessage { .. })
        ));
        assert!(m.expire(seq));
        assert!(!m.expire(seq));
        assert_eq!(
            m.handle_message(&Message::event(MessageKind::Meas, seq, 1), Timestamp(0)),
            Err(ProtocolError::StaleRound(seq))
        );
    }
}
