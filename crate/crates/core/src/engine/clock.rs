use serde::{Deserialize, Serialize};

use crate::time::{SimTime, Timestamp, NANOS_PER_SEC};

/// Simulated oscillator of one node.
///
/// `local_time(t) = t + offset_at_epoch + drift(t) - sum of corrections applied at or before t`
/// where `drift(t) = t * drift_ppb / 1e9`, truncated toward zero. The
/// result is piecewise affine in `t` and exact in integer arithmetic.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalClock {
    offset_at_epoch: i64,
    drift_ppb: i64,
    correction_log: Vec<(SimTime, i64)>,
    total_correction: i64,
}

impl LocalClock {
    pub fn new(offset_at_epoch: i64, drift_ppb: i64) -> Self {
        LocalClock {
            offset_at_epoch,
            drift_ppb,
            correction_log: Vec::new(),
            total_correction: 0,
        }
    }

    /// A clock that reads true simulation time.
    pub fn ideal() -> Self {
        Self::default()
    }

    pub fn offset_at_epoch(&self) -> i64 {
        self.offset_at_epoch
    }

    pub fn drift_ppb(&self) -> i64 {
        self.drift_ppb
    }

    pub fn correction_log(&self) -> &[(SimTime, i64)] {
        &self.correction_log
    }

    fn drift_term(&self, t: SimTime) -> i64 {
        // i128 division truncates toward zero.
        (t.0 as i128 * self.drift_ppb as i128 / NANOS_PER_SEC as i128) as i64
    }

    fn corrections_until(&self, t: SimTime) -> i64 {
        match self.correction_log.last() {
            Some(&(last, _)) if last <= t => self.total_correction,
            _ => self
                .correction_log
                .iter()
                .take_while(|(at, _)| *at <= t)
                .map(|(_, c)| c)
                .sum(),
        }
    }

    pub fn local_time(&self, t: SimTime) -> Timestamp {
        Timestamp(t.0 + self.offset_at_epoch + self.drift_term(t) - self.corrections_until(t))
    }

    /// Step servo: every reading at or after `at` moves by `-correction`.
    ///
    /// Corrections must be applied in non-decreasing time order.
    pub fn apply_servo_correction(&mut self, correction: i64, at: SimTime) {
        debug_assert!(self
            .correction_log
            .last()
            .map_or(true, |&(last, _)| last <= at));
        self.correction_log.push((at, correction));
        self.total_correction += correction;
    }
}

/// Ideal hardware timestamp: the node clock's reading at `true_time`.
pub fn capture_timestamp(clock: &LocalClock, true_time: SimTime) -> Timestamp {
    clock.local_time(true_time)
}

/// How far `slave` lags `master` at `at`: `master.local - slave.local`.
///
/// Positive when the slave clock is behind the master. This is the sign
/// of the oscilloscope PPS comparison used for the actual clock offset: a
/// successful delay on `Sync` leaves the slave behind, and shows up here as
/// a positive value. It is the negation of the slave-minus-master offset
/// that the protocol's own offset formula estimates.
pub fn true_offset(master: &LocalClock, slave: &LocalClock, at: SimTime) -> i64 {
    master.local_time(at) - slave.local_time(at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::{micros, secs};

    #[test]
    fn identity_clock() {
        let c = LocalClock::ideal();
        assert_eq!(c.local_time(SimTime(12_345)), Timestamp(12_345));
    }

    #[test]
    fn constant_offset() {
        let c = LocalClock::new(micros(250), 0);
        let t = SimTime::from_secs(200);
        assert_eq!(capture_timestamp(&c, t), Timestamp(t.0 + micros(250)));
    }

    #[test]
    fn drift_ten_ppm_after_one_second() {
        let c = LocalClock::new(0, 10_000);
        assert_eq!(
            c.local_time(SimTime::from_secs(1)),
            Timestamp(secs(1) + micros(10))
        );
    }

    #[test]
    fn drift_truncates_toward_zero() {
        let c = LocalClock::new(0, -1);
        // -1 ppb over 1.5 s is -1.5 ns, truncated to -1.
        assert_eq!(c.local_time(SimTime(1_500_000_000)), Timestamp(1_500_000_000 - 1));
    }

    #[test]
    fn correction_removes_offset() {
        let master = LocalClock::ideal();
        let mut slave = LocalClock::new(micros(40), 0);
        let at = SimTime::from_secs(3);
        let slave_ahead = -true_offset(&master, &slave, at);
        assert_eq!(slave_ahead, micros(40));
        slave.apply_servo_correction(slave_ahead, at);
        assert_eq!(true_offset(&master, &slave, at), 0);
        // Earlier readings are untouched.
        assert_eq!(true_offset(&master, &slave, SimTime(at.0 - 1)), -micros(40));
    }

    #[test]
    fn corrections_add_up() {
        let mut c = LocalClock::ideal();
        c.apply_servo_correction(7, SimTime(10));
        c.apply_servo_correction(-3, SimTime(20));
        assert_eq!(c.local_time(SimTime(15)), Timestamp(15 - 7));
        assert_eq!(c.local_time(SimTime(30)), Timestamp(30 - 4));
        assert_eq!(c.correction_log().len(), 2);
    }

    #[test]
    fn true_offset_is_antisymmetric() {
        let a = LocalClock::new(17, 3_000);
        let b = LocalClock::new(-5, -200);
        let t = SimTime::from_secs(9);
        assert_eq!(true_offset(&a, &b, t), -true_offset(&b, &a, t));
    }
}
