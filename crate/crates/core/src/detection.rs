//! Attack verdicts and attacked-path localization from per-path asymmetry
//! estimates.
//!
//! Each redundant path `P_i` yields one estimate `α^(i) = α_P0 - α_Pi` of
//! the synchronization path asymmetry. If every estimate is within the
//! threshold of zero the sync path is considered clean. Localization groups
//! equal estimates: a group of agreeing estimates comes from paths sharing
//! the same asymmetry, so the largest group is taken as the genuine one and
//! its value as `α_P0`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::{micros, SimTime};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DetectionError {
    #[error("no asymmetry estimates to evaluate")]
    EmptyEstimates,
    #[error("attacker bound {bound} exceeds floor(n/2) for n = {n} estimates")]
    BoundViolation { bound: usize, n: usize },
    #[error("threshold must not be negative")]
    NegativeThreshold,
    #[error("attack was never detected")]
    NeverDetected,
    #[error("attack verdict never cleared after the attack ended")]
    NeverCleared,
}

/// Detection parameters of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// `|α| > threshold` counts as an asymmetry. Nanoseconds.
    pub threshold: i64,
    /// Maximum number of attacked paths assumed during localization.
    /// `None` means `floor(n/2)`.
    pub attacker_bound: Option<usize>,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            threshold: micros(1),
            attacker_bound: None,
        }
    }
}

impl DetectionConfig {
    /// Bound to use for `n` estimates: the configured bound capped at
    /// `floor(n/2)`.
    pub fn bound_for(&self, n: usize) -> usize {
        self.attacker_bound.unwrap_or(n / 2).min(n / 2)
    }
}

/// Estimates `α^(1) .. α^(n)` of one round; `estimates[k]` belongs to
/// redundant path `P_(k+1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimateSet {
    pub seq: u32,
    pub estimates: Vec<(usize, i64)>,
    pub threshold: i64,
}

impl EstimateSet {
    /// Estimates indexed 1..=n in order.
    pub fn new(seq: u32, estimates: impl IntoIterator<Item = i64>, threshold: i64) -> Self {
        EstimateSet {
            seq,
            estimates: estimates.into_iter().enumerate().map(|(k, a)| (k + 1, a)).collect(),
            threshold,
        }
    }

    /// Estimates keyed by explicit path index.
    pub fn indexed(seq: u32, estimates: Vec<(usize, i64)>, threshold: i64) -> Self {
        EstimateSet {
            seq,
            estimates,
            threshold,
        }
    }

    fn check(&self) -> Result<(), DetectionError> {
        if self.estimates.is_empty() {
            return Err(DetectionError::EmptyEstimates);
        }
        if self.threshold < 0 {
            return Err(DetectionError::NegativeThreshold);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub attacked: bool,
    /// Redundant path indices whose estimate exceeded the threshold.
    pub triggering: BTreeSet<usize>,
}

/// Attack iff some estimate is non-zero beyond the threshold.
pub fn detect(set: &EstimateSet) -> Result<Verdict, DetectionError> {
    set.check()?;
    let triggering: BTreeSet<usize> = set
        .estimates
        .iter()
        .filter(|(_, a)| a.abs() > set.threshold)
        .map(|&(i, _)| i)
        .collect();
    Ok(Verdict {
        attacked: !triggering.is_empty(),
        triggering,
    })
}

/// One explanation of the estimates: a value for `α_P0` and the implied
/// asymmetry of every redundant path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hypothesis {
    pub consensus_alpha: i64,
    /// Path indices judged attacked; 0 is the sync path.
    pub attacked_paths: BTreeSet<usize>,
    /// `(i, α_Pi)` with `α_Pi = consensus - α^(i)`.
    pub implied_path_asymmetry: Vec<(usize, i64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Localization {
    pub consensus_alpha: i64,
    pub attacked_paths: BTreeSet<usize>,
    pub implied_path_asymmetry: Vec<(usize, i64)>,
    /// Set when the winning group is not unique or too small to be trusted
    /// under the attacker bound.
    pub ambiguous: bool,
    pub alternative: Option<Hypothesis>,
}

struct Cluster {
    members: Vec<(usize, i64)>,
    mean: i64,
    first_index: usize,
}

fn hypothesis(cluster: &Cluster, set: &EstimateSet) -> Hypothesis {
    let consensus = cluster.mean;
    let implied: Vec<(usize, i64)> = set
        .estimates
        .iter()
        .map(|&(i, a)| (i, consensus - a))
        .collect();
    let mut attacked: BTreeSet<usize> = implied
        .iter()
        .filter(|(_, a)| a.abs() > set.threshold)
        .map(|&(i, _)| i)
        .collect();
    if consensus.abs() > set.threshold {
        attacked.insert(0);
    }
    Hypothesis {
        consensus_alpha: consensus,
        attacked_paths: attacked,
        implied_path_asymmetry: implied,
    }
}

/// Groups estimates (single linkage, gap = threshold) and takes the largest
/// group as genuine.
///
/// The group must hold at least `n - attacker_bound` estimates. When two
/// groups tie for size, or no group is large enough, the result is flagged
/// ambiguous and the runner-up is returned as `alternative`. Ranking among
/// equally sized groups prefers the larger `|mean|` (the hypothesis that the
/// sync path carries the asymmetry), then the lowest path index.
pub fn consensus_asymmetry(
    set: &EstimateSet,
    attacker_bound: usize,
) -> Result<Localization, DetectionError> {
    set.check()?;
    let n = set.estimates.len();
    if attacker_bound > n / 2 {
        return Err(DetectionError::BoundViolation {
            bound: attacker_bound,
            n,
        });
    }

    let mut sorted = set.estimates.clone();
    sorted.sort_by_key(|&(i, a)| (a, i));
    let mut groups: Vec<Vec<(usize, i64)>> = Vec::new();
    for est in sorted {
        match groups.last_mut() {
            Some(g) if est.1 - g.last().expect("groups are non-empty").1 <= set.threshold => {
                g.push(est)
            }
            _ => groups.push(vec![est]),
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_iter()
        .map(|members| {
            let sum: i128 = members.iter().map(|&(_, a)| a as i128).sum();
            // Floor, so shifting every estimate shifts the mean exactly.
            let mean = sum.div_euclid(members.len() as i128) as i64;
            let first_index = members.iter().map(|&(i, _)| i).min().unwrap_or(0);
            Cluster {
                members,
                mean,
                first_index,
            }
        })
        .collect();
    clusters.sort_by(|x, y| {
        y.members
            .len()
            .cmp(&x.members.len())
            .then_with(|| y.mean.abs().cmp(&x.mean.abs()))
            .then_with(|| x.first_index.cmp(&y.first_index))
    });

    let best = &clusters[0];
    let tie = clusters
        .get(1)
        .is_some_and(|c| c.members.len() == best.members.len());
    let too_small = best.members.len() < n - attacker_bound;
    let ambiguous = tie || too_small;
    let primary = hypothesis(best, set);
    let alternative = if ambiguous {
        clusters.get(1).map(|c| hypothesis(c, set))
    } else {
        None
    };
    Ok(Localization {
        consensus_alpha: primary.consensus_alpha,
        attacked_paths: primary.attacked_paths,
        implied_path_asymmetry: primary.implied_path_asymmetry,
        ambiguous,
        alternative,
    })
}

/// Verdict of one sync round, keyed by the round's start time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundVerdict {
    pub start: SimTime,
    pub attacked: bool,
}

/// Rounds from the one whose window contains `attack_start` up to and
/// including the first attacked verdict. An immediate detection is 1.
pub fn onset_latency(series: &[RoundVerdict], attack_start: SimTime) -> Result<u32, DetectionError> {
    let reference = series
        .iter()
        .rposition(|r| r.start <= attack_start)
        .unwrap_or(0);
    series
        .iter()
        .skip(reference)
        .position(|r| r.attacked)
        .map(|k| k as u32 + 1)
        .ok_or(DetectionError::NeverDetected)
}

/// Rounds from the first one starting after `attack_end` (the window is
/// closed, so a round starting exactly at the end is still attacked) up to
/// and including the first clean verdict.
pub fn clear_latency(series: &[RoundVerdict], attack_end: SimTime) -> Result<u32, DetectionError> {
    let reference = series
        .iter()
        .position(|r| r.start > attack_end)
        .ok_or(DetectionError::NeverCleared)?;
    series
        .iter()
        .skip(reference)
        .position(|r| !r.attacked)
        .map(|k| k as u32 + 1)
        .ok_or(DetectionError::NeverCleared)
}
