//! Expected outcome of a scenario, read straight off its script.
//!
//! Presence per block is the scripted presence minus failed snapshots; a
//! student attends when the count reaches the effective threshold. Sessions
//! on offline cameras fail and produce no records. Nothing here goes
//! through the matcher, the engine or the back-end.

use attenface_core::policy::CourseStanding;
use attenface_core::scenario::Scenario;

use crate::report::{AttendanceRow, RecognitionErrors, RunReport, SessionTable, StandingRow};

pub fn oracle_report(scenario: &Scenario) -> anyhow::Result<RunReport> {
    let mut sessions = Vec::with_capacity(scenario.sessions.len());
    for s in &scenario.sessions {
        let course = scenario
            .course(&s.course_id)
            .ok_or_else(|| anyhow::anyhow!("session {} has no course", s.id))?;
        let threshold = s.threshold_override.unwrap_or(course.default_threshold);
        let block_count = s.schedule.block_count();
        let failed = scenario.offline_cameras.contains(&s.camera_id);
        let mut rows = Vec::new();
        if !failed {
            let mut students = course.students.clone();
            students.sort();
            for student in students {
                let blocks: String = (0..block_count)
                    .map(|k| {
                        let seen = s.present.get(&student).is_some_and(|b| b.contains(&k))
                            && !scenario.snapshot_fails(&s.id, k);
                        if seen {
                            '1'
                        } else {
                            '0'
                        }
                    })
                    .collect();
                let count = blocks.chars().filter(|&c| c == '1').count() as u32;
                rows.push(AttendanceRow {
                    student_id: student,
                    blocks,
                    blocks_present: count,
                    present: count >= threshold,
                });
            }
        }
        sessions.push(SessionTable {
            session_id: s.id.clone(),
            course_id: s.course_id.clone(),
            state: if failed { "failed" } else { "complete" }.into(),
            block_count,
            threshold,
            rows,
        });
    }

    let mut standings = Vec::new();
    for course in &scenario.courses {
        let held: Vec<&SessionTable> = sessions
            .iter()
            .filter(|t| t.course_id == course.id && t.state == "complete")
            .collect();
        let mut students = course.students.clone();
        students.sort();
        for student in students {
            let attended = held
                .iter()
                .filter(|t| t.rows.iter().any(|r| r.student_id == student && r.present))
                .count() as u32;
            let standing = CourseStanding::new(
                &course.id,
                &student,
                held.len() as u32,
                attended,
                course.total_scheduled,
                course.required_percent,
            )?;
            standings.push(standing_row(&standing));
        }
    }

    Ok(RunReport {
        mode: "oracle".into(),
        seed: scenario.seed,
        noise_sigma: scenario.noise_sigma,
        sessions,
        standings,
        errors: RecognitionErrors::default(),
        wall_ms: 0,
        virtual_minutes: virtual_span(scenario),
    })
}

pub fn standing_row(s: &CourseStanding) -> StandingRow {
    StandingRow {
        course_id: s.course_id.clone(),
        student_id: s.student_id.clone(),
        sessions_held: s.sessions_held,
        sessions_attended: s.sessions_attended,
        total_scheduled: s.total_scheduled,
        required_percent: s.required_percent,
        allowed_misses: s.allowed_misses,
    }
}

/// Minutes from the first camera connection to the last class end.
pub fn virtual_span(scenario: &Scenario) -> i64 {
    let first = scenario.sessions.iter().map(|s| s.start).min();
    let last = scenario.sessions.iter().map(|s| s.end).max();
    match (first, last) {
        (Some(a), Some(b)) => b.minutes_since(a) + attenface_core::CONNECT_LEAD_MINUTES,
        _ => 0,
    }
}

/// Compares observed per-block presence with the script.
pub fn recognition_errors(scenario: &Scenario, sessions: &[SessionTable]) -> RecognitionErrors {
    let mut errors = RecognitionErrors::default();
    for table in sessions {
        let Some(s) = scenario.session(&table.session_id) else {
            continue;
        };
        for row in &table.rows {
            for (k, c) in row.blocks.chars().enumerate() {
                if scenario.snapshot_fails(&s.id, k) {
                    continue;
                }
                let scripted = s
                    .present
                    .get(&row.student_id)
                    .is_some_and(|b| b.contains(&k));
                match (scripted, c == '1') {
                    (true, false) => errors.false_absent += 1,
                    (false, true) => errors.false_present += 1,
                    _ => {}
                }
            }
        }
    }
    errors
}
