//! Ground-truth scenario scripts.
//!
//! A scenario declares students (with canonical embeddings), courses, rooms
//! and sessions, and for each session which students are physically present
//! in which blocks. Simulated cameras render it into snapshot frames and the
//! oracle applies the attendance rules to it directly.
//!
//! On disk it is JSON:
//!
//! ```json
//! {
//!   "seed": 7, "noise_sigma": 0.0, "embedding_dim": 128,
//!   "students": [{"id": "s1", "embedding": "auto"}],
//!   "sessions": [{"id": "cs101-1", "camera_id": "cam-1",
//!                 "start": "2026-03-02T09:00Z", "end": "2026-03-02T09:50Z",
//!                 "present": {"s1": [0, 1, 2]}}]
//! }
//! ```
//!
//! Optional keys: `interval_minutes`, `tau`, `default_threshold`,
//! `required_percent`, `courses`, `rooms`, `offline_cameras`,
//! `failed_snapshots`, and per-session `course` and `threshold`. When no
//! courses are given every session belongs to one course that enrols every
//! student.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::FaceEmbedding;
use crate::engine::SessionJob;
use crate::matching::RosterEntry;
use crate::policy::{compute_block_schedule, BlockSchedule, ThresholdPolicy};
use crate::rng::{canonical_stream, StreamKey};
use crate::{
    Error, Result, Timestamp, DEFAULT_EMBEDDING_DIM, DEFAULT_INTERVAL_MINUTES, DEFAULT_TAU,
};

pub const DEFAULT_COURSE_ID: &str = "course-1";
pub const DEFAULT_PROFESSOR_ID: &str = "prof-1";
pub const DEFAULT_THRESHOLD: u32 = 3;
pub const DEFAULT_REQUIRED_PERCENT: u32 = 75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_dim")]
    pub embedding_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval_minutes: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_threshold: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_percent: Option<u32>,
    pub students: Vec<StudentSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub courses: Vec<CourseSpec>,
    /// Room number to camera id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rooms: BTreeMap<String, String>,
    pub sessions: Vec<SessionSpec>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub offline_cameras: BTreeSet<String>,
    /// Session id to block indices whose snapshot acquisition fails.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub failed_snapshots: BTreeMap<String, BTreeSet<usize>>,
}

fn default_dim() -> usize {
    DEFAULT_EMBEDDING_DIM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudentSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub embedding: EmbeddingSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EmbeddingSpec {
    Values(Vec<f64>),
    Keyword(String),
}

impl EmbeddingSpec {
    pub fn auto() -> Self {
        EmbeddingSpec::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CourseSpec {
    pub id: String,
    pub professor: String,
    pub room: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_threshold: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_percent: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_scheduled: Option<u32>,
    /// Enrolled students; every declared student when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub students: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionSpec {
    pub id: String,
    pub camera_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub course: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
    #[serde(default)]
    pub present: BTreeMap<String, BTreeSet<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Student {
    pub id: String,
    pub name: String,
    pub embedding: FaceEmbedding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Course {
    pub id: String,
    pub professor_id: String,
    pub room_number: String,
    pub camera_id: String,
    pub default_threshold: u32,
    pub required_percent: u32,
    pub total_scheduled: u32,
    pub students: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pub course_id: String,
    pub camera_id: String,
    pub room_number: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub threshold_override: Option<u32>,
    pub schedule: BlockSchedule,
    pub present: BTreeMap<String, BTreeSet<usize>>,
}

/// A loaded and validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub noise_sigma: f64,
    pub embedding_dim: usize,
    pub interval_minutes: u32,
    pub tau: f64,
    pub students: Vec<Student>,
    pub courses: Vec<Course>,
    /// Room number to camera id.
    pub rooms: BTreeMap<String, String>,
    pub sessions: Vec<Session>,
    pub offline_cameras: BTreeSet<String>,
    pub failed_snapshots: BTreeMap<String, BTreeSet<usize>>,
}

impl Scenario {
    pub fn student(&self, id: &str) -> Option<&Student> {
        self.students.iter().find(|s| s.id == id)
    }

    pub fn course(&self, id: &str) -> Option<&Course> {
        self.courses.iter().find(|c| c.id == id)
    }

    pub fn session(&self, id: &str) -> Option<&Session> {
        self.sessions.iter().find(|s| s.id == id)
    }

    pub fn policy_for(&self, session: &Session) -> ThresholdPolicy {
        let default = self
            .course(&session.course_id)
            .map(|c| c.default_threshold)
            .unwrap_or(DEFAULT_THRESHOLD);
        ThresholdPolicy::new(default, session.threshold_override)
    }

    /// Whether the simulated camera drops the snapshot of this block.
    pub fn snapshot_fails(&self, session_id: &str, block: usize) -> bool {
        self.failed_snapshots
            .get(session_id)
            .is_some_and(|blocks| blocks.contains(&block))
    }

    /// The recognition job for a session: its course's enrolled students
    /// with their canonical embeddings.
    pub fn session_job(&self, session: &Session) -> Result<SessionJob> {
        let course = self
            .course(&session.course_id)
            .ok_or_else(|| Error::not_found("course", &session.course_id))?;
        let roster = course
            .students
            .iter()
            .map(|sid| {
                self.student(sid)
                    .map(|s| RosterEntry::new(s.id.clone(), s.embedding.clone()))
                    .ok_or_else(|| Error::not_found("student", sid))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SessionJob {
            session_id: session.id.clone(),
            camera_id: session.camera_id.clone(),
            start_time: session.start,
            end_time: session.end,
            interval_minutes: i64::from(self.interval_minutes),
            tau: self.tau,
            roster,
        })
    }

    /// Ground-truth presence row of `student_id` in `session`.
    pub fn scripted_row(&self, session: &Session, student_id: &str) -> Vec<bool> {
        let blocks = session.present.get(student_id);
        (0..session.schedule.block_count())
            .map(|k| blocks.is_some_and(|b| b.contains(&k)))
            .collect()
    }
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file = parse_scenario_file(text)?;
    build_scenario(file)
}

pub fn parse_scenario_file(text: &str) -> Result<ScenarioFile> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        Error::Parse(format!(
            "line {}, column {}, field `{}`: {}",
            inner.line(),
            inner.column(),
            path,
            inner
        ))
    })
}

pub fn build_scenario(file: ScenarioFile) -> Result<Scenario> {
    let invalid = |msg: String| Error::Validation(msg);

    if !(file.noise_sigma >= 0.0 && file.noise_sigma.is_finite()) {
        return Err(invalid(format!(
            "noise_sigma must be >= 0, got {}",
            file.noise_sigma
        )));
    }
    if file.embedding_dim == 0 {
        return Err(invalid("embedding_dim must be positive".into()));
    }
    let interval = file
        .interval_minutes
        .unwrap_or(i64::from(DEFAULT_INTERVAL_MINUTES));
    if interval <= 0 || interval > i64::from(u32::MAX) {
        return Err(invalid(format!(
            "interval_minutes must be >= 1, got {interval}"
        )));
    }
    let tau = file.tau.unwrap_or(DEFAULT_TAU);
    if !(tau > 0.0 && tau < 2.0) {
        return Err(invalid(format!("tau must lie in (0, 2), got {tau}")));
    }
    let default_threshold = file.default_threshold.unwrap_or(DEFAULT_THRESHOLD);
    let required_percent = file.required_percent.unwrap_or(DEFAULT_REQUIRED_PERCENT);
    if required_percent > 100 {
        return Err(invalid(format!(
            "required_percent {required_percent} exceeds 100"
        )));
    }

    let mut students = Vec::with_capacity(file.students.len());
    let mut student_ids = HashSet::new();
    for spec in &file.students {
        if !student_ids.insert(spec.id.clone()) {
            return Err(invalid(format!("student {} declared twice", spec.id)));
        }
        let embedding = match &spec.embedding {
            EmbeddingSpec::Keyword(k) if k == "auto" => {
                canonical_stream(file.seed, &spec.id).unit_vector(file.embedding_dim)
            }
            EmbeddingSpec::Keyword(k) => {
                return Err(invalid(format!(
                    "student {}: embedding must be a list of numbers or \"auto\", got {k:?}",
                    spec.id
                )))
            }
            EmbeddingSpec::Values(values) => {
                if values.len() != file.embedding_dim {
                    return Err(invalid(format!(
                        "student {}: embedding has {} components, expected {}",
                        spec.id,
                        values.len(),
                        file.embedding_dim
                    )));
                }
                FaceEmbedding::normalize(values.clone())
                    .map_err(|e| invalid(format!("student {}: {e}", spec.id)))?
            }
        };
        students.push(Student {
            id: spec.id.clone(),
            name: spec.name.clone().unwrap_or_else(|| spec.id.clone()),
            embedding,
        });
    }

    // Rooms: explicit map plus one synthetic room per otherwise unnamed camera.
    let mut rooms = file.rooms.clone();
    let mut cameras_seen: BTreeSet<String> = rooms.values().cloned().collect();
    if cameras_seen.len() != rooms.len() {
        return Err(invalid("two rooms share one camera".into()));
    }
    for session in &file.sessions {
        if cameras_seen.insert(session.camera_id.clone()) {
            rooms.insert(
                format!("room-{}", session.camera_id),
                session.camera_id.clone(),
            );
        }
    }
    let room_of = |camera: &str| -> String {
        rooms
            .iter()
            .find(|(_, c)| c.as_str() == camera)
            .map(|(r, _)| r.clone())
            .expect("every session camera has a room")
    };

    let mut courses = Vec::new();
    if file.courses.is_empty() {
        let camera_id = file
            .sessions
            .first()
            .map(|s| s.camera_id.clone())
            .ok_or_else(|| invalid("scenario declares no sessions".into()))?;
        courses.push(Course {
            id: DEFAULT_COURSE_ID.into(),
            professor_id: DEFAULT_PROFESSOR_ID.into(),
            room_number: room_of(&camera_id),
            camera_id,
            default_threshold,
            required_percent,
            total_scheduled: file.sessions.len() as u32,
            students: students.iter().map(|s| s.id.clone()).collect(),
        });
    } else {
        let mut course_ids = HashSet::new();
        for spec in &file.courses {
            if !course_ids.insert(spec.id.clone()) {
                return Err(invalid(format!("course {} declared twice", spec.id)));
            }
            let camera_id = rooms.get(&spec.room).cloned().ok_or_else(|| {
                invalid(format!(
                    "course {}: room {} has no camera",
                    spec.id, spec.room
                ))
            })?;
            let enrolled = match &spec.students {
                Some(list) => {
                    for sid in list {
                        if !student_ids.contains(sid) {
                            return Err(invalid(format!(
                                "course {}: enrolls undeclared student {sid}",
                                spec.id
                            )));
                        }
                    }
                    list.clone()
                }
                None => students.iter().map(|s| s.id.clone()).collect(),
            };
            let session_count = file
                .sessions
                .iter()
                .filter(|s| s.course.as_deref() == Some(spec.id.as_str()))
                .count() as u32;
            let total_scheduled = spec.total_scheduled.unwrap_or(session_count);
            if total_scheduled < session_count {
                return Err(invalid(format!(
                    "course {}: total_scheduled {total_scheduled} is less than its {session_count} sessions",
                    spec.id
                )));
            }
            let course_required = spec.required_percent.unwrap_or(required_percent);
            if course_required > 100 {
                return Err(invalid(format!(
                    "course {}: required_percent {course_required} exceeds 100",
                    spec.id
                )));
            }
            courses.push(Course {
                id: spec.id.clone(),
                professor_id: spec.professor.clone(),
                room_number: spec.room.clone(),
                camera_id,
                default_threshold: spec.default_threshold.unwrap_or(default_threshold),
                required_percent: course_required,
                total_scheduled,
                students: enrolled,
            });
        }
    }

    let mut sessions = Vec::with_capacity(file.sessions.len());
    let mut session_ids = HashSet::new();
    for spec in &file.sessions {
        if !session_ids.insert(spec.id.clone()) {
            return Err(invalid(format!("session {} declared twice", spec.id)));
        }
        let course_id = match &spec.course {
            Some(c) => {
                if !courses.iter().any(|course| &course.id == c) {
                    return Err(invalid(format!("session {}: unknown course {c}", spec.id)));
                }
                c.clone()
            }
            None if courses.len() == 1 => courses[0].id.clone(),
            None => {
                return Err(invalid(format!(
                    "session {}: course is required when several courses exist",
                    spec.id
                )))
            }
        };
        let schedule = compute_block_schedule(spec.start, spec.end, interval)
            .map_err(|e| invalid(format!("session {}: {e}", spec.id)))?;
        for (student, blocks) in &spec.present {
            if !student_ids.contains(student) {
                return Err(invalid(format!(
                    "session {}: presence references undeclared student {student}",
                    spec.id
                )));
            }
            if let Some(&bad) = blocks.iter().find(|&&b| b >= schedule.block_count()) {
                return Err(invalid(format!(
                    "session {}: student {student} block {bad} is out of range (session has {} blocks)",
                    spec.id,
                    schedule.block_count()
                )));
            }
        }
        sessions.push(Session {
            id: spec.id.clone(),
            course_id,
            camera_id: spec.camera_id.clone(),
            room_number: room_of(&spec.camera_id),
            start: spec.start,
            end: spec.end,
            threshold_override: spec.threshold,
            schedule,
            present: spec.present.clone(),
        });
    }
    if sessions.is_empty() {
        return Err(invalid("scenario declares no sessions".into()));
    }
    let mut by_camera: Vec<&Session> = sessions.iter().collect();
    by_camera.sort_by(|a, b| (&a.camera_id, a.start).cmp(&(&b.camera_id, b.start)));
    for pair in by_camera.windows(2) {
        if pair[0].camera_id == pair[1].camera_id && pair[1].start < pair[0].end {
            return Err(invalid(format!(
                "sessions {} and {} overlap on camera {}",
                pair[0].id, pair[1].id, pair[0].camera_id
            )));
        }
    }

    for (sid, blocks) in &file.failed_snapshots {
        let session = sessions
            .iter()
            .find(|s| &s.id == sid)
            .ok_or_else(|| invalid(format!("failed_snapshots: unknown session {sid}")))?;
        if let Some(&bad) = blocks
            .iter()
            .find(|&&b| b >= session.schedule.block_count())
        {
            return Err(invalid(format!(
                "failed_snapshots: session {sid} block {bad} is out of range"
            )));
        }
    }

    Ok(Scenario {
        seed: file.seed,
        noise_sigma: file.noise_sigma,
        embedding_dim: file.embedding_dim,
        interval_minutes: interval as u32,
        tau,
        students,
        courses,
        rooms,
        sessions,
        offline_cameras: file.offline_cameras,
        failed_snapshots: file.failed_snapshots,
    })
}

/// Parameters for [`generate_scenario`].
#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub students: usize,
    pub sessions: usize,
    pub courses: usize,
    pub min_blocks: u32,
    pub max_blocks: u32,
    pub noise_sigma: f64,
    pub embedding_dim: usize,
    pub start: Timestamp,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 2026,
            students: 50,
            sessions: 10,
            courses: 2,
            min_blocks: 5,
            max_blocks: 9,
            noise_sigma: 0.0,
            embedding_dim: DEFAULT_EMBEDDING_DIM,
            start: Timestamp::ymd_hm(2026, 3, 2, 9, 0),
        }
    }
}

/// Builds a random timetable.
///
/// Each course owns one room; its sessions run back to back in that room
/// while sessions of different courses overlap in time. Every student gets a
/// personal attendance propensity and is present in each block with that
/// probability. A few sessions carry a threshold override.
pub fn generate_scenario(config: &GeneratorConfig) -> ScenarioFile {
    let mut rng = StreamKey::new("attenface/generator")
        .u64(config.seed)
        .stream();
    let courses = config.courses.max(1);
    let students: Vec<StudentSpec> = (0..config.students)
        .map(|i| StudentSpec {
            id: format!("s{:03}", i + 1),
            name: None,
            embedding: EmbeddingSpec::auto(),
        })
        .collect();
    let propensity: BTreeMap<String, f64> = students
        .iter()
        .map(|s| (s.id.clone(), 0.25 + 0.75 * rng.next_open01()))
        .collect();

    let mut rooms = BTreeMap::new();
    let mut course_specs = Vec::new();
    for c in 0..courses {
        let room = format!("R{}", 101 + c);
        rooms.insert(room.clone(), format!("cam-{}", c + 1));
        // Overlapping enrolment: roughly 70% of students per course.
        let mut enrolled: Vec<String> = students
            .iter()
            .filter(|_| courses == 1 || rng.bernoulli(0.7))
            .map(|s| s.id.clone())
            .collect();
        if enrolled.is_empty() {
            enrolled.push(students.first().map(|s| s.id.clone()).unwrap_or_default());
        }
        course_specs.push(CourseSpec {
            id: format!("C{}", 101 + c),
            professor: format!("prof-{}", c + 1),
            room,
            default_threshold: Some(3),
            required_percent: Some(75),
            total_scheduled: None,
            students: Some(enrolled),
        });
    }

    let mut next_start = vec![config.start; courses];
    let mut sessions = Vec::with_capacity(config.sessions);
    let mut per_course = vec![0u32; courses];
    for i in 0..config.sessions {
        let c = i % courses;
        let blocks = rng.range_inclusive(
            u64::from(config.min_blocks),
            u64::from(config.max_blocks.max(config.min_blocks)),
        ) as i64;
        // Any duration in ((b-1)*10, b*10] yields b blocks.
        let interval = i64::from(DEFAULT_INTERVAL_MINUTES);
        let duration = blocks * interval - rng.below(interval as u64) as i64;
        let start = next_start[c].plus_minutes(rng.below(3) as i64 * 5);
        let end = start.plus_minutes(duration);
        next_start[c] = end.plus_minutes(10);
        per_course[c] += 1;

        let course = &course_specs[c];
        let mut present = BTreeMap::new();
        for sid in course.students.as_deref().unwrap_or_default() {
            let p = propensity[sid];
            let scripted: BTreeSet<usize> =
                (0..blocks as usize).filter(|_| rng.bernoulli(p)).collect();
            if !scripted.is_empty() {
                present.insert(sid.clone(), scripted);
            }
        }
        let threshold = match rng.below(5) {
            0 => Some(rng.below(blocks as u64 + 1) as u32),
            _ => None,
        };
        sessions.push(SessionSpec {
            id: format!("{}-{}", course.id, per_course[c]),
            camera_id: rooms[&course.room].clone(),
            start,
            end,
            course: Some(course.id.clone()),
            threshold,
            present,
        });
    }
    for (c, spec) in course_specs.iter_mut().enumerate() {
        spec.total_scheduled = Some(per_course[c] * 2);
    }

    ScenarioFile {
        seed: config.seed,
        noise_sigma: config.noise_sigma,
        embedding_dim: config.embedding_dim,
        interval_minutes: None,
        tau: None,
        default_threshold: None,
        required_percent: None,
        students,
        courses: course_specs,
        rooms,
        sessions,
        offline_cameras: BTreeSet::new(),
        failed_snapshots: BTreeMap::new(),
    }
}
