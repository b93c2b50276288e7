//! Run reports and their comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendanceRow {
    pub student_id: String,
    /// One character per block: `1` detected, `0` not.
    pub blocks: String,
    pub blocks_present: u32,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionTable {
    pub session_id: String,
    pub course_id: String,
    /// `complete` or `failed`.
    pub state: String,
    pub block_count: usize,
    pub threshold: u32,
    pub rows: Vec<AttendanceRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandingRow {
    pub course_id: String,
    pub student_id: String,
    pub sessions_held: u32,
    pub sessions_attended: u32,
    pub total_scheduled: u32,
    pub required_percent: u32,
    pub allowed_misses: u32,
}

/// Block-level disagreements with the scenario script, over blocks whose
/// snapshot was taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecognitionErrors {
    pub false_absent: u64,
    pub false_present: u64,
}

impl RecognitionErrors {
    pub fn total(&self) -> u64 {
        self.false_absent + self.false_present
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub seed: u64,
    pub noise_sigma: f64,
    pub sessions: Vec<SessionTable>,
    pub standings: Vec<StandingRow>,
    pub errors: RecognitionErrors,
    pub wall_ms: u64,
    /// Virtual time from the first camera connection to the last class end.
    pub virtual_minutes: i64,
}

impl RunReport {
    /// The attendance tables alone, as canonical JSON.
    pub fn tables_json(&self) -> String {
        serde_json::to_string(&(&self.sessions, &self.standings)).expect("tables serialize")
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mode {}  seed {}  noise {}  wall {} ms  virtual {} min",
            self.mode, self.seed, self.noise_sigma, self.wall_ms, self.virtual_minutes
        );
        for s in &self.sessions {
            let present = s.rows.iter().filter(|r| r.present).count();
            let _ = writeln!(
                out,
                "\n{} ({})  {}  blocks {}  n {}  present {}/{}",
                s.session_id,
                s.course_id,
                s.state,
                s.block_count,
                s.threshold,
                present,
                s.rows.len()
            );
            for r in &s.rows {
                let _ = writeln!(
                    out,
                    "  {:<10} {:<12} {:>2}  {}",
                    r.student_id,
                    r.blocks,
                    r.blocks_present,
                    if r.present { "present" } else { "absent" }
                );
            }
        }
        let _ = writeln!(out, "\nstandings");
        for s in &self.standings {
            let _ = writeln!(
                out,
                "  {:<8} {:<10} {}/{} held of {}  need {}%  can miss {}",
                s.course_id,
                s.student_id,
                s.sessions_attended,
                s.sessions_held,
                s.total_scheduled,
                s.required_percent,
                s.allowed_misses
            );
        }
        let _ = writeln!(
            out,
            "\nrecognition errors: {} false absent, {} false present",
            self.errors.false_absent, self.errors.false_present
        );
        out
    }
}

/// Human-readable differences between the attendance tables of two reports.
pub fn diff_tables(a: &RunReport, b: &RunReport) -> Vec<String> {
    let mut out = Vec::new();
    for sa in &a.sessions {
        let Some(sb) = b.sessions.iter().find(|s| s.session_id == sa.session_id) else {
            out.push(format!("{}: only in first", sa.session_id));
            continue;
        };
        if (&sa.state, sa.block_count, sa.threshold) != (&sb.state, sb.block_count, sb.threshold) {
            out.push(format!(
                "{}: {} blocks {} n {} vs {} blocks {} n {}",
                sa.session_id,
                sa.state,
                sa.block_count,
                sa.threshold,
                sb.state,
                sb.block_count,
                sb.threshold
            ));
        }
        for ra in &sa.rows {
            match sb.rows.iter().find(|r| r.student_id == ra.student_id) {
                Some(rb) if rb == ra => {}
                Some(rb) => out.push(format!(
                    "{} {}: {} {} vs {} {}",
                    sa.session_id, ra.student_id, ra.blocks, ra.present, rb.blocks, rb.present
                )),
                None => out.push(format!(
                    "{} {}: only in first",
                    sa.session_id, ra.student_id
                )),
            }
        }
        for rb in &sb.rows {
            if !sa.rows.iter().any(|r| r.student_id == rb.student_id) {
                out.push(format!(
                    "{} {}: only in second",
                    sa.session_id, rb.student_id
                ));
            }
        }
    }
    for sb in &b.sessions {
        if !a.sessions.iter().any(|s| s.session_id == sb.session_id) {
            out.push(format!("{}: only in second", sb.session_id));
        }
    }
    for sa in &a.standings {
        match b
            .standings
            .iter()
            .find(|s| s.course_id == sa.course_id && s.student_id == sa.student_id)
        {
            Some(sb) if sb == sa => {}
            Some(sb) => out.push(format!(
                "standing {} {}: {:?} vs {:?}",
                sa.course_id, sa.student_id, sa, sb
            )),
            None => out.push(format!(
                "standing {} {}: only in first",
                sa.course_id, sa.student_id
            )),
        }
    }
    if a.standings.len() != b.standings.len() {
        out.push(format!(
            "standings: {} rows vs {}",
            a.standings.len(),
            b.standings.len()
        ));
    }
    // Anything the field-wise walk missed, such as ordering.
    if out.is_empty() && a.tables_json() != b.tables_json() {
        out.push("tables hold the same rows in a different order".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> RunReport {
        RunReport {
            mode: "oracle".into(),
            seed: 1,
            noise_sigma: 0.0,
            sessions: vec![SessionTable {
                session_id: "a".into(),
                course_id: "c".into(),
                state: "complete".into(),
                block_count: 2,
                threshold: 1,
                rows: vec![AttendanceRow {
                    student_id: "s1".into(),
                    blocks: "10".into(),
                    blocks_present: 1,
                    present: true,
                }],
            }],
            standings: vec![],
            errors: RecognitionErrors::default(),
            wall_ms: 0,
            virtual_minutes: 20,
        }
    }

    #[test]
    fn timing_does_not_count_as_a_difference() {
        let a = report();
        let mut b = report();
        b.wall_ms = 99;
        b.mode = "networked".into();
        assert!(diff_tables(&a, &b).is_empty());
    }

    #[test]
    fn flipped_row_is_reported() {
        let a = report();
        let mut b = report();
        b.sessions[0].rows[0].present = false;
        let d = diff_tables(&a, &b);
        assert_eq!(d.len(), 1);
        assert!(d[0].starts_with("a s1"), "{d:?}");
    }
}
