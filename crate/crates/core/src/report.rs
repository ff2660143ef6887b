//! CSV and JSON emission of run results.
//!
//! One `rounds_<slave>.csv` per slave with header
//! `round,true_time_s,theta_rep_us,theta_act_us,theta_rect_us,alpha_p1_us,…,alpha_pn_us,attacked`
//! and a `summary.json`. Durations are decimal microseconds with three
//! fractional digits. Output is byte-identical for identical runs.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::sim::{RunOutput, SlaveRun};
use crate::time::{format_micros, format_secs};

pub const SUMMARY_FILE: &str = "summary.json";

pub fn csv_header(redundant_paths: usize) -> String {
    let mut h = String::from("round,true_time_s,theta_rep_us,theta_act_us,theta_rect_us");
    for i in 1..=redundant_paths {
        let _ = write!(h, ",alpha_p{i}_us");
    }
    h.push_str(",attacked");
    h
}

/// The per-round series of one slave. Alpha cells of paths not measured
/// in a round and the verdict cell in PTP mode are empty.
pub fn slave_csv(run: &SlaveRun) -> String {
    let n = run.paths.redundant_count();
    let mut out = csv_header(n);
    out.push('\n');
    for row in &run.rows {
        let r = &row.report;
        let _ = write!(
            out,
            "{},{},{},{},{}",
            row.round,
            format_secs(row.sync_time.0),
            format_micros(r.theta_rep),
            format_micros(row.theta_act),
            format_micros(r.theta_rect),
        );
        for i in 1..=n {
            out.push(',');
            if let Some(a) = row.alpha(i) {
                out.push_str(&format_micros(a));
            }
        }
        out.push(',');
        if let Some(attacked) = row.attacked() {
            out.push_str(if attacked { "true" } else { "false" });
        }
        out.push('\n');
    }
    out
}

pub fn csv_file_name(run: &SlaveRun) -> String {
    format!("rounds_{}.csv", run.slave.as_str())
}

pub fn summary_json(out: &RunOutput) -> String {
    let mut s = serde_json::to_string_pretty(&out.summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes every slave's CSV and the summary into `dir`, creating it if
/// needed. Returns the written paths.
pub fn emit_outputs(out: &RunOutput, dir: impl AsRef<Path>) -> io::Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for run in &out.slaves {
        let path = dir.join(csv_file_name(run));
        fs::write(&path, slave_csv(run))?;
        written.push(path);
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, summary_json(out))?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(2),
            "round,true_time_s,theta_rep_us,theta_act_us,theta_rect_us,alpha_p1_us,alpha_p2_us,attacked"
        );
        assert_eq!(
            csv_header(0),
            "round,true_time_s,theta_rep_us,theta_act_us,theta_rect_us,attacked"
        );
    }
}
