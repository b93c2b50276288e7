//! Attendance semantics: block schedules, threshold decisions, course
//! aggregation and override precedence. Every function here is pure.

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Timestamp};

/// Snapshot times of one class session.
///
/// The first snapshot is taken at session start and one more every
/// `interval_minutes` while strictly before session end, so the block count
/// is `ceil(duration / interval)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub session_start: Timestamp,
    pub session_end: Timestamp,
    pub interval_minutes: u32,
    pub snapshot_times: Vec<Timestamp>,
}

impl BlockSchedule {
    pub fn block_count(&self) -> usize {
        self.snapshot_times.len()
    }

    /// Index of the block containing `t`, if `t` falls inside the session.
    pub fn block_index_at(&self, t: Timestamp) -> Option<usize> {
        if t < self.session_start || t >= self.session_end {
            return None;
        }
        let offset = t.minutes_since(self.session_start);
        Some((offset / i64::from(self.interval_minutes)) as usize)
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        t >= self.session_start && t < self.session_end
    }
}

pub fn compute_block_schedule(
    start: Timestamp,
    end: Timestamp,
    interval_minutes: i64,
) -> Result<BlockSchedule> {
    if interval_minutes <= 0 {
        return Err(Error::InvalidConfig(format!(
            "snapshot interval must be at least 1 minute, got {interval_minutes}"
        )));
    }
    if interval_minutes > i64::from(u32::MAX) {
        return Err(Error::InvalidConfig(format!(
            "snapshot interval {interval_minutes} is too large"
        )));
    }
    if end <= start {
        return Err(Error::InvalidSession(format!(
            "session end {end} is not after start {start}"
        )));
    }
    let duration = end.minutes_since(start);
    let count = (duration + interval_minutes - 1) / interval_minutes;
    let snapshot_times = (0..count)
        .map(|k| start.plus_minutes(k * interval_minutes))
        .collect();
    Ok(BlockSchedule {
        session_start: start,
        session_end: end,
        interval_minutes: interval_minutes as u32,
        snapshot_times,
    })
}

/// The threshold `n`: a course-wide default plus an optional per-session value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    pub course_default_n: u32,
    pub session_override_n: Option<u32>,
}

impl ThresholdPolicy {
    pub fn new(course_default_n: u32, session_override_n: Option<u32>) -> Self {
        ThresholdPolicy {
            course_default_n,
            session_override_n,
        }
    }
}

pub fn effective_threshold(policy: &ThresholdPolicy) -> u32 {
    policy.session_override_n.unwrap_or(policy.course_default_n)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresenceVector {
    pub student_id: String,
    pub blocks: Vec<bool>,
}

impl PresenceVector {
    pub fn new(student_id: impl Into<String>, blocks: Vec<bool>) -> Self {
        PresenceVector {
            student_id: student_id.into(),
            blocks,
        }
    }

    pub fn blocks_present(&self) -> usize {
        self.blocks.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordSource {
    Computed,
    AdminOverride,
}

impl RecordSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            RecordSource::Computed => "computed",
            RecordSource::AdminOverride => "admin_override",
        }
    }
}

impl std::str::FromStr for RecordSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "computed" => Ok(RecordSource::Computed),
            "admin_override" => Ok(RecordSource::AdminOverride),
            other => Err(Error::Parse(format!("unknown record source {other:?}"))),
        }
    }
}

/// Final attendance decision for one student in one session.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttendanceRecord {
    pub student_id: String,
    pub session_id: String,
    pub blocks_present: u32,
    pub threshold_used: u32,
    pub present: bool,
    pub source: RecordSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub override_note: Option<String>,
}

impl AttendanceRecord {
    /// What the threshold rule alone says, ignoring any override.
    pub fn computed_present(&self) -> bool {
        self.blocks_present >= self.threshold_used
    }
}

pub fn decide_class_attendance(
    session_id: &str,
    presence: &PresenceVector,
    block_count: usize,
    policy: &ThresholdPolicy,
) -> Result<AttendanceRecord> {
    if presence.blocks.len() != block_count {
        return Err(Error::InconsistentPresence {
            expected: block_count,
            actual: presence.blocks.len(),
        });
    }
    let blocks_present = presence.blocks_present() as u32;
    let threshold_used = effective_threshold(policy);
    Ok(AttendanceRecord {
        student_id: presence.student_id.clone(),
        session_id: session_id.to_string(),
        blocks_present,
        threshold_used,
        present: blocks_present >= threshold_used,
        source: RecordSource::Computed,
        override_note: None,
    })
}

/// Recomputes a record from fresh presence, keeping an admin override intact.
pub fn recompute_attendance(
    record: &AttendanceRecord,
    presence: &PresenceVector,
    block_count: usize,
    policy: &ThresholdPolicy,
) -> Result<AttendanceRecord> {
    let fresh = decide_class_attendance(&record.session_id, presence, block_count, policy)?;
    if record.source == RecordSource::AdminOverride {
        return Ok(AttendanceRecord {
            blocks_present: fresh.blocks_present,
            threshold_used: fresh.threshold_used,
            ..record.clone()
        });
    }
    Ok(fresh)
}

/// Returns `(sessions_held, sessions_attended)`.
pub fn course_attendance_summary<'a, I>(
    records: I,
    session_course: impl Fn(&str) -> Option<&'a str>,
) -> Result<(u32, u32)>
where
    I: IntoIterator<Item = &'a AttendanceRecord>,
{
    let mut held = 0;
    let mut attended = 0;
    let mut key: Option<(&str, &str)> = None;
    for record in records {
        let course = session_course(&record.session_id).ok_or_else(|| {
            Error::InconsistentInput(format!(
                "session {} belongs to no known course",
                record.session_id
            ))
        })?;
        let this = (course, record.student_id.as_str());
        match key {
            None => key = Some(this),
            Some(k) if k != this => {
                return Err(Error::InconsistentInput(format!(
                    "records mix ({}, {}) with ({}, {})",
                    k.0, k.1, this.0, this.1
                )))
            }
            _ => {}
        }
        held += 1;
        if record.present {
            attended += 1;
        }
    }
    Ok((held, attended))
}

/// Sessions the student may still skip while remaining able to reach
/// `required_percent` of `total_scheduled`, assuming every other remaining
/// session is attended.
pub fn allowed_misses(
    attended: u32,
    held: u32,
    total_scheduled: u32,
    required_percent: u32,
) -> Result<u32> {
    if attended > held || held > total_scheduled {
        return Err(Error::InvalidInput(format!(
            "need attended <= held <= total, got {attended}/{held}/{total_scheduled}"
        )));
    }
    if required_percent > 100 {
        return Err(Error::InvalidInput(format!(
            "required percent {required_percent} exceeds 100"
        )));
    }
    let total = u64::from(total_scheduled);
    let required_sessions = (u64::from(required_percent) * total).div_ceil(100);
    let remaining = total - u64::from(held);
    let slack = (u64::from(attended) + remaining).saturating_sub(required_sessions);
    // Only sessions that have not been held yet can be missed.
    Ok(slack.min(remaining) as u32)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CourseStanding {
    pub course_id: String,
    pub student_id: String,
    pub sessions_held: u32,
    pub sessions_attended: u32,
    pub total_scheduled: u32,
    pub required_percent: u32,
    pub allowed_misses: u32,
}

impl CourseStanding {
    pub fn new(
        course_id: impl Into<String>,
        student_id: impl Into<String>,
        sessions_held: u32,
        sessions_attended: u32,
        total_scheduled: u32,
        required_percent: u32,
    ) -> Result<Self> {
        let allowed = allowed_misses(
            sessions_attended,
            sessions_held,
            total_scheduled,
            required_percent,
        )?;
        Ok(CourseStanding {
            course_id: course_id.into(),
            student_id: student_id.into(),
            sessions_held,
            sessions_attended,
            total_scheduled,
            required_percent,
            allowed_misses: allowed,
        })
    }
}

/// Last write wins; the computed evidence stays on the record.
pub fn apply_admin_override(
    record: &AttendanceRecord,
    present: bool,
    note: &str,
) -> AttendanceRecord {
    AttendanceRecord {
        present,
        source: RecordSource::AdminOverride,
        override_note: Some(note.to_string()),
        ..record.clone()
    }
}

pub fn clear_admin_override(record: &AttendanceRecord) -> AttendanceRecord {
    AttendanceRecord {
        present: record.computed_present(),
        source: RecordSource::Computed,
        override_note: None,
        ..record.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(h: u32, m: u32) -> Timestamp {
        Timestamp::ymd_hm(2026, 3, 2, h, m)
    }

    fn bits(s: &str) -> Vec<bool> {
        s.chars().map(|c| c == 'T').collect()
    }

    #[test]
    fn fifty_minute_class_has_five_blocks() {
        let s = compute_block_schedule(t(9, 0), t(9, 50), 10).unwrap();
        let shown: Vec<_> = s.snapshot_times.iter().map(|x| x.to_string()).collect();
        assert_eq!(
            shown,
            [
                "2026-03-02T09:00Z",
                "2026-03-02T09:10Z",
                "2026-03-02T09:20Z",
                "2026-03-02T09:30Z",
                "2026-03-02T09:40Z"
            ]
        );
    }

    #[test]
    fn short_and_long_sessions() {
        let s = compute_block_schedule(t(9, 0), t(9, 1), 10).unwrap();
        assert_eq!(s.snapshot_times, vec![t(9, 0)]);
        let s = compute_block_schedule(t(9, 0), t(10, 30), 10).unwrap();
        assert_eq!(s.block_count(), 9);
        assert_eq!(*s.snapshot_times.last().unwrap(), t(10, 20));
    }

    #[test]
    fn schedule_errors() {
        assert!(matches!(
            compute_block_schedule(t(9, 0), t(9, 0), 10),
            Err(Error::InvalidSession(_))
        ));
        assert!(matches!(
            compute_block_schedule(t(9, 0), t(8, 0), 10),
            Err(Error::InvalidSession(_))
        ));
        assert!(matches!(
            compute_block_schedule(t(9, 0), t(9, 50), 0),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            compute_block_schedule(t(9, 0), t(9, 50), -10),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn block_index_lookup() {
        let s = compute_block_schedule(t(9, 0), t(9, 50), 10).unwrap();
        assert_eq!(s.block_index_at(t(9, 0)), Some(0));
        assert_eq!(s.block_index_at(t(9, 19)), Some(1));
        assert_eq!(s.block_index_at(t(9, 49)), Some(4));
        assert_eq!(s.block_index_at(t(9, 50)), None);
        assert_eq!(s.block_index_at(t(8, 59)), None);
    }

    #[test]
    fn threshold_boundary() {
        let policy = ThresholdPolicy::new(3, None);
        let r =
            decide_class_attendance("c1", &PresenceVector::new("s1", bits("TTTFF")), 5, &policy)
                .unwrap();
        assert!(r.present);
        assert_eq!(r.blocks_present, 3);
        assert_eq!(r.threshold_used, 3);
        assert_eq!(r.source, RecordSource::Computed);
        let r =
            decide_class_attendance("c1", &PresenceVector::new("s1", bits("TTFFF")), 5, &policy)
                .unwrap();
        assert!(!r.present);
    }

    #[test]
    fn zero_threshold_is_unconditional() {
        let policy = ThresholdPolicy::new(0, None);
        let r =
            decide_class_attendance("c1", &PresenceVector::new("s1", bits("FFFFF")), 5, &policy)
                .unwrap();
        assert!(r.present);
    }

    #[test]
    fn length_mismatch_rejected() {
        let policy = ThresholdPolicy::new(1, None);
        let err = decide_class_attendance("c1", &PresenceVector::new("s1", bits("TT")), 5, &policy)
            .unwrap_err();
        assert_eq!(
            err,
            Error::InconsistentPresence {
                expected: 5,
                actual: 2
            }
        );
    }

    #[test]
    fn override_wins_over_default() {
        assert_eq!(effective_threshold(&ThresholdPolicy::new(3, None)), 3);
        assert_eq!(effective_threshold(&ThresholdPolicy::new(3, Some(1))), 1);
        assert_eq!(effective_threshold(&ThresholdPolicy::new(0, None)), 0);
    }

    fn record(session: &str, present: bool) -> AttendanceRecord {
        AttendanceRecord {
            student_id: "s1".into(),
            session_id: session.into(),
            blocks_present: if present { 5 } else { 0 },
            threshold_used: 3,
            present,
            source: RecordSource::Computed,
            override_note: None,
        }
    }

    #[test]
    fn summary_counts() {
        let course = |_: &str| Some("cs101");
        assert_eq!(course_attendance_summary(&[], course).unwrap(), (0, 0));
        let recs = [record("a", true), record("b", false), record("c", true)];
        assert_eq!(course_attendance_summary(&recs, course).unwrap(), (3, 2));
        let recs: Vec<_> = (0..10).map(|i| record(&format!("x{i}"), i < 8)).collect();
        assert_eq!(course_attendance_summary(&recs, course).unwrap(), (10, 8));
    }

    #[test]
    fn summary_rejects_mixed_input() {
        let course = |s: &str| Some(if s == "a" { "cs101" } else { "cs102" });
        let recs = [record("a", true), record("b", true)];
        assert!(matches!(
            course_attendance_summary(&recs, course),
            Err(Error::InconsistentInput(_))
        ));
        let mut other = record("a", true);
        other.student_id = "s2".into();
        let recs = [record("a", true), other];
        assert!(course_attendance_summary(&recs, |_| Some("cs101")).is_err());
        assert!(course_attendance_summary(&[record("a", true)], |_| None).is_err());
    }

    #[test]
    fn allowed_misses_examples() {
        assert_eq!(allowed_misses(8, 10, 20, 75).unwrap(), 3);
        assert_eq!(allowed_misses(7, 7, 7, 100).unwrap(), 0);
        assert_eq!(allowed_misses(0, 0, 10, 0).unwrap(), 10);
        // Surplus attendance does not create missable sessions.
        assert_eq!(allowed_misses(1, 1, 1, 0).unwrap(), 0);
        assert_eq!(allowed_misses(9, 10, 12, 50).unwrap(), 2);
    }

    #[test]
    fn allowed_misses_rejects_bad_input() {
        assert!(allowed_misses(5, 4, 10, 50).is_err());
        assert!(allowed_misses(1, 11, 10, 50).is_err());
        assert!(allowed_misses(1, 1, 10, 101).is_err());
    }

    #[test]
    fn admin_override_round_trip() {
        let absent = record("a", false);
        let o = apply_admin_override(&absent, true, "camera blocked");
        assert!(o.present);
        assert_eq!(o.source, RecordSource::AdminOverride);
        assert_eq!(o.blocks_present, absent.blocks_present);
        assert_eq!(o.override_note.as_deref(), Some("camera blocked"));

        let o = apply_admin_override(&record("a", true), false, "proxy");
        assert!(!o.present);

        let again = apply_admin_override(&o, true, "appeal granted");
        assert!(again.present);
        assert_eq!(again.override_note.as_deref(), Some("appeal granted"));

        let cleared = clear_admin_override(&again);
        assert_eq!(cleared, record("a", true));
    }

    #[test]
    fn recompute_keeps_override() {
        let policy = ThresholdPolicy::new(3, None);
        let pv = PresenceVector::new("s1", bits("FFFFF"));
        let base = decide_class_attendance("a", &pv, 5, &policy).unwrap();
        let o = apply_admin_override(&base, true, "medical");
        let again = recompute_attendance(&o, &pv, 5, &policy).unwrap();
        assert!(again.present);
        assert_eq!(again.source, RecordSource::AdminOverride);
        let plain = recompute_attendance(&base, &pv, 5, &policy).unwrap();
        assert_eq!(plain, base);
    }

    #[test]
    fn standing_includes_allowed_misses() {
        let s = CourseStanding::new("cs101", "s1", 10, 8, 20, 75).unwrap();
        assert_eq!(s.allowed_misses, 3);
    }
}
