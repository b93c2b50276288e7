//! SQLite persistence.
//!
//! One file database in WAL mode behind a connection pool. Row helpers take
//! a plain connection so callers can compose them inside one transaction.

use std::path::Path;
use std::time::Duration;

use attenface_core::embedding::FaceEmbedding;
use attenface_core::matching::RosterEntry;
use attenface_core::policy::{compute_block_schedule, AttendanceRecord, BlockSchedule};
use attenface_core::Timestamp;
use r2d2::{Pool, PooledConnection};
use r2d2_sqlite::SqliteConnectionManager;
use rusqlite::{params, Connection, OptionalExtension, Row};

use crate::auth::Role;
use crate::error::{ServiceError, ServiceResult};
use crate::views::{CourseView, SessionState};

const SCHEMA: &str = r#"
CREATE TABLE IF NOT EXISTS users (
    user_id TEXT PRIMARY KEY,
    role TEXT NOT NULL CHECK (role IN ('student', 'professor', 'admin')),
    password_sha256 TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS tokens (
    token TEXT PRIMARY KEY,
    user_id TEXT NOT NULL REFERENCES users(user_id),
    issued_at TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS rooms (
    room_number TEXT PRIMARY KEY,
    camera_id TEXT NOT NULL UNIQUE
);
CREATE TABLE IF NOT EXISTS students (
    student_id TEXT PRIMARY KEY REFERENCES users(user_id),
    name TEXT NOT NULL,
    embedding TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS courses (
    course_id TEXT PRIMARY KEY,
    professor_id TEXT NOT NULL REFERENCES users(user_id),
    room_number TEXT NOT NULL REFERENCES rooms(room_number),
    default_threshold INTEGER NOT NULL CHECK (default_threshold >= 0),
    required_percent INTEGER NOT NULL CHECK (required_percent BETWEEN 0 AND 100),
    total_scheduled INTEGER NOT NULL CHECK (total_scheduled >= 0)
);
CREATE TABLE IF NOT EXISTS enrollments (
    course_id TEXT NOT NULL REFERENCES courses(course_id),
    student_id TEXT NOT NULL REFERENCES students(student_id),
    PRIMARY KEY (course_id, student_id)
);
CREATE TABLE IF NOT EXISTS sessions (
    session_id TEXT PRIMARY KEY,
    course_id TEXT NOT NULL REFERENCES courses(course_id),
    start_time TEXT NOT NULL,
    end_time TEXT NOT NULL,
    interval_minutes INTEGER NOT NULL CHECK (interval_minutes >= 1),
    room_number TEXT NOT NULL REFERENCES rooms(room_number),
    threshold_override INTEGER CHECK (threshold_override >= 0),
    state TEXT NOT NULL DEFAULT 'scheduled',
    job_id TEXT,
    failure_reason TEXT
);
CREATE INDEX IF NOT EXISTS sessions_by_state ON sessions(state, start_time);
CREATE TABLE IF NOT EXISTS block_deliveries (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    block_index INTEGER NOT NULL,
    degraded INTEGER NOT NULL,
    PRIMARY KEY (session_id, block_index)
);
CREATE TABLE IF NOT EXISTS presence_blocks (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    block_index INTEGER NOT NULL,
    student_id TEXT NOT NULL REFERENCES students(student_id),
    distance REAL,
    PRIMARY KEY (session_id, block_index, student_id)
);
CREATE TABLE IF NOT EXISTS attendance_records (
    session_id TEXT NOT NULL REFERENCES sessions(session_id),
    student_id TEXT NOT NULL REFERENCES students(student_id),
    blocks_present INTEGER NOT NULL,
    threshold_used INTEGER NOT NULL,
    present INTEGER NOT NULL,
    source TEXT NOT NULL,
    override_note TEXT,
    PRIMARY KEY (session_id, student_id)
);
CREATE TABLE IF NOT EXISTS overrides (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    session_id TEXT NOT NULL,
    student_id TEXT NOT NULL,
    action TEXT NOT NULL CHECK (action IN ('set', 'clear')),
    present INTEGER,
    note TEXT,
    admin_id TEXT NOT NULL,
    at TEXT NOT NULL
);
"#;

#[derive(Clone)]
pub struct Store {
    pool: Pool<SqliteConnectionManager>,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> ServiceResult<Self> {
        let manager = SqliteConnectionManager::file(path.as_ref()).with_init(|c| {
            c.busy_timeout(Duration::from_secs(10))?;
            c.execute_batch("PRAGMA journal_mode = WAL; PRAGMA foreign_keys = ON;")
        });
        let pool = Pool::builder().max_size(8).build(manager)?;
        let store = Store { pool };
        store.conn()?.execute_batch(SCHEMA)?;
        Ok(store)
    }

    pub fn conn(&self) -> ServiceResult<PooledConnection<SqliteConnectionManager>> {
        Ok(self.pool.get()?)
    }
}

fn ts(row: &Row, idx: usize) -> rusqlite::Result<Timestamp> {
    let text: String = row.get(idx)?;
    text.parse().map_err(|e: attenface_core::Error| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    })
}

fn parse_col<T: std::str::FromStr>(row: &Row, idx: usize) -> rusqlite::Result<T>
where
    T::Err: std::error::Error + Send + Sync + 'static,
{
    let text: String = row.get(idx)?;
    text.parse().map_err(|e| {
        rusqlite::Error::FromSqlConversionFailure(idx, rusqlite::types::Type::Text, Box::new(e))
    })
}

// ---- users and tokens ----

pub fn insert_user(
    conn: &Connection,
    user_id: &str,
    role: Role,
    digest: &str,
) -> ServiceResult<()> {
    conn.execute(
        "INSERT INTO users (user_id, role, password_sha256) VALUES (?1, ?2, ?3)
         ON CONFLICT (user_id) DO UPDATE SET role = excluded.role,
             password_sha256 = excluded.password_sha256",
        params![user_id, role.as_str(), digest],
    )?;
    Ok(())
}

pub fn user_credentials(conn: &Connection, user_id: &str) -> ServiceResult<Option<(Role, String)>> {
    Ok(conn
        .query_row(
            "SELECT role, password_sha256 FROM users WHERE user_id = ?1",
            [user_id],
            |r| Ok((parse_col::<Role>(r, 0)?, r.get(1)?)),
        )
        .optional()?)
}

pub fn insert_token(
    conn: &Connection,
    token: &str,
    user_id: &str,
    at: Timestamp,
) -> ServiceResult<()> {
    conn.execute(
        "INSERT INTO tokens (token, user_id, issued_at) VALUES (?1, ?2, ?3)",
        params![token, user_id, at.to_string()],
    )?;
    Ok(())
}

pub fn token_principal(conn: &Connection, token: &str) -> ServiceResult<Option<(String, Role)>> {
    Ok(conn
        .query_row(
            "SELECT u.user_id, u.role FROM tokens t JOIN users u ON u.user_id = t.user_id
             WHERE t.token = ?1",
            [token],
            |r| Ok((r.get(0)?, parse_col::<Role>(r, 1)?)),
        )
        .optional()?)
}

// ---- rooms, students, courses ----

pub fn insert_room(conn: &Connection, room_number: &str, camera_id: &str) -> ServiceResult<()> {
    conn.execute(
        "INSERT INTO rooms (room_number, camera_id) VALUES (?1, ?2)
         ON CONFLICT (room_number) DO UPDATE SET camera_id = excluded.camera_id",
        params![room_number, camera_id],
    )?;
    Ok(())
}

pub fn room_camera(conn: &Connection, room_number: &str) -> ServiceResult<Option<String>> {
    Ok(conn
        .query_row(
            "SELECT camera_id FROM rooms WHERE room_number = ?1",
            [room_number],
            |r| r.get(0),
        )
        .optional()?)
}

pub fn rooms(conn: &Connection) -> ServiceResult<Vec<(String, String)>> {
    let mut stmt = conn.prepare("SELECT room_number, camera_id FROM rooms ORDER BY room_number")?;
    let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
    Ok(rows.collect::<Result<_, _>>()?)
}

pub fn insert_student(
    conn: &Connection,
    student_id: &str,
    name: &str,
    embedding: &FaceEmbedding,
) -> ServiceResult<()> {
    let json = serde_json::to_string(embedding)
        .map_err(|e| ServiceError::Internal(format!("encoding embedding: {e}")))?;
    conn.execute(
        "INSERT INTO students (student_id, name, embedding) VALUES (?1, ?2, ?3)
         ON CONFLICT (student_id) DO UPDATE SET name = excluded.name,
             embedding = excluded.embedding",
        params![student_id, name, json],
    )?;
    Ok(())
}

pub fn insert_course(conn: &Connection, c: &CourseView) -> ServiceResult<()> {
    conn.execute(
        "INSERT INTO courses
         (course_id, professor_id, room_number, default_threshold, required_percent, total_scheduled)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6)
         ON CONFLICT (course_id) DO UPDATE SET professor_id = excluded.professor_id,
             room_number = excluded.room_number, default_threshold = excluded.default_threshold,
             required_percent = excluded.required_percent,
             total_scheduled = excluded.total_scheduled",
        params![
            c.course_id,
            c.professor_id,
            c.room_number,
            c.default_threshold,
            c.required_percent,
            c.total_scheduled
        ],
    )?;
    Ok(())
}

pub fn enroll(conn: &Connection, course_id: &str, student_id: &str) -> ServiceResult<()> {
    conn.execute(
        "INSERT OR IGNORE INTO enrollments (course_id, student_id) VALUES (?1, ?2)",
        params![course_id, student_id],
    )?;
    Ok(())
}

const COURSE_COLUMNS: &str = "c.course_id, c.professor_id, c.room_number, r.camera_id,
     c.default_threshold, c.required_percent, c.total_scheduled
     FROM courses c JOIN rooms r ON r.room_number = c.room_number";

fn course_row(r: &Row) -> rusqlite::Result<CourseView> {
    Ok(CourseView {
        course_id: r.get(0)?,
        professor_id: r.get(1)?,
        room_number: r.get(2)?,
        camera_id: r.get(3)?,
        default_threshold: r.get(4)?,
        required_percent: r.get(5)?,
        total_scheduled: r.get(6)?,
    })
}

pub fn course(conn: &Connection, course_id: &str) -> ServiceResult<Option<CourseView>> {
    Ok(conn
        .query_row(
            &format!("SELECT {COURSE_COLUMNS} WHERE c.course_id = ?1"),
            [course_id],
            course_row,
        )
        .optional()?)
}

pub fn require_course(conn: &Connection, course_id: &str) -> ServiceResult<CourseView> {
    course(conn, course_id)?.ok_or_else(|| ServiceError::not_found("course", course_id))
}

pub fn courses_where(
    conn: &Connection,
    filter: &str,
    arg: Option<&str>,
) -> ServiceResult<Vec<CourseView>> {
    let sql = format!("SELECT {COURSE_COLUMNS} {filter} ORDER BY c.course_id");
    let mut stmt = conn.prepare(&sql)?;
    let rows = match arg {
        Some(a) => stmt.query_map([a], course_row)?.collect::<Result<_, _>>()?,
        None => stmt.query_map([], course_row)?.collect::<Result<_, _>>()?,
    };
    Ok(rows)
}

pub fn set_course_threshold(conn: &Connection, course_id: &str, n: u32) -> ServiceResult<()> {
    conn.execute(
        "UPDATE courses SET default_threshold = ?2 WHERE course_id = ?1",
        params![course_id, n],
    )?;
    Ok(())
}

pub fn set_course_room(conn: &Connection, course_id: &str, room: &str) -> ServiceResult<()> {
    conn.execute(
        "UPDATE courses SET room_number = ?2 WHERE course_id = ?1",
        params![course_id, room],
    )?;
    Ok(())
}

pub fn is_enrolled(conn: &Connection, course_id: &str, student_id: &str) -> ServiceResult<bool> {
    Ok(conn
        .query_row(
            "SELECT 1 FROM enrollments WHERE course_id = ?1 AND student_id = ?2",
            params![course_id, student_id],
            |_| Ok(()),
        )
        .optional()?
        .is_some())
}

pub fn student_exists(conn: &Connection, student_id: &str) -> ServiceResult<bool> {
    Ok(conn
        .query_row(
            "SELECT 1 FROM students WHERE student_id = ?1",
            [student_id],
            |_| Ok(()),
        )
        .optional()?
        .is_some())
}

pub fn enrolled_students(conn: &Connection, course_id: &str) -> ServiceResult<Vec<String>> {
    let mut stmt = conn
        .prepare("SELECT student_id FROM enrollments WHERE course_id = ?1 ORDER BY student_id")?;
    let rows = stmt.query_map([course_id], |r| r.get(0))?;
    Ok(rows.collect::<Result<_, _>>()?)
}

/// Enrolled students with their enrolment embeddings.
pub fn roster(conn: &Connection, course_id: &str) -> ServiceResult<Vec<RosterEntry>> {
    let mut stmt = conn.prepare(
        "SELECT s.student_id, s.embedding FROM enrollments e
         JOIN students s ON s.student_id = e.student_id
         WHERE e.course_id = ?1 ORDER BY s.student_id",
    )?;
    let rows = stmt.query_map([course_id], |r| {
        Ok((r.get::<_, String>(0)?, r.get::<_, String>(1)?))
    })?;
    let mut out = Vec::new();
    for row in rows {
        let (id, json) = row?;
        let embedding: FaceEmbedding = serde_json::from_str(&json)
            .map_err(|e| ServiceError::Internal(format!("student {id}: stored embedding: {e}")))?;
        out.push(RosterEntry::new(id, embedding));
    }
    Ok(out)
}

// ---- sessions ----

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionRow {
    pub session_id: String,
    pub course_id: String,
    pub start: Timestamp,
    pub end: Timestamp,
    pub interval_minutes: u32,
    pub room_number: String,
    pub camera_id: String,
    pub threshold_override: Option<u32>,
    pub state: SessionState,
    pub job_id: Option<String>,
    pub failure_reason: Option<String>,
}

impl SessionRow {
    pub fn schedule(&self) -> ServiceResult<BlockSchedule> {
        Ok(compute_block_schedule(
            self.start,
            self.end,
            i64::from(self.interval_minutes),
        )?)
    }
}

const SESSION_COLUMNS: &str = "s.session_id, s.course_id, s.start_time, s.end_time,
     s.interval_minutes, s.room_number, r.camera_id, s.threshold_override, s.state,
     s.job_id, s.failure_reason
     FROM sessions s JOIN rooms r ON r.room_number = s.room_number";

fn session_row(r: &Row) -> rusqlite::Result<SessionRow> {
    Ok(SessionRow {
        session_id: r.get(0)?,
        course_id: r.get(1)?,
        start: ts(r, 2)?,
        end: ts(r, 3)?,
        interval_minutes: r.get(4)?,
        room_number: r.get(5)?,
        camera_id: r.get(6)?,
        threshold_override: r.get(7)?,
        state: parse_col(r, 8)?,
        job_id: r.get(9)?,
        failure_reason: r.get(10)?,
    })
}

pub fn insert_session(conn: &Connection, s: &SessionRow) -> ServiceResult<()> {
    conn.execute(
        "INSERT INTO sessions
         (session_id, course_id, start_time, end_time, interval_minutes, room_number,
          threshold_override, state)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8)
         ON CONFLICT (session_id) DO UPDATE SET course_id = excluded.course_id,
             start_time = excluded.start_time, end_time = excluded.end_time,
             interval_minutes = excluded.interval_minutes, room_number = excluded.room_number,
             threshold_override = excluded.threshold_override, state = excluded.state",
        params![
            s.session_id,
            s.course_id,
            s.start.to_string(),
            s.end.to_string(),
            s.interval_minutes,
            s.room_number,
            s.threshold_override,
            s.state.as_str()
        ],
    )?;
    Ok(())
}

pub fn session(conn: &Connection, session_id: &str) -> ServiceResult<Option<SessionRow>> {
    Ok(conn
        .query_row(
            &format!("SELECT {SESSION_COLUMNS} WHERE s.session_id = ?1"),
            [session_id],
            session_row,
        )
        .optional()?)
}

pub fn require_session(conn: &Connection, session_id: &str) -> ServiceResult<SessionRow> {
    session(conn, session_id)?.ok_or_else(|| ServiceError::not_found("session", session_id))
}

pub fn sessions_in_states(
    conn: &Connection,
    states: &[SessionState],
) -> ServiceResult<Vec<SessionRow>> {
    let list = states
        .iter()
        .map(|s| format!("'{}'", s.as_str()))
        .collect::<Vec<_>>()
        .join(", ");
    let mut stmt = conn.prepare(&format!(
        "SELECT {SESSION_COLUMNS} WHERE s.state IN ({list}) ORDER BY s.start_time, s.session_id"
    ))?;
    let rows = stmt.query_map([], session_row)?;
    Ok(rows.collect::<Result<_, _>>()?)
}

pub fn sessions_of_course(conn: &Connection, course_id: &str) -> ServiceResult<Vec<SessionRow>> {
    let mut stmt = conn.prepare(&format!(
        "SELECT {SESSION_COLUMNS} WHERE s.course_id = ?1 ORDER BY s.start_time, s.session_id"
    ))?;
    let rows = stmt.query_map([course_id], session_row)?;
    Ok(rows.collect::<Result<_, _>>()?)
}

/// Moves a session from `from` to `to`; false when it was not in `from`.
pub fn transition(
    conn: &Connection,
    session_id: &str,
    from: SessionState,
    to: SessionState,
) -> ServiceResult<bool> {
    let n = conn.execute(
        "UPDATE sessions SET state = ?3 WHERE session_id = ?1 AND state = ?2",
        params![session_id, from.as_str(), to.as_str()],
    )?;
    Ok(n == 1)
}

pub fn mark_failed(conn: &Connection, session_id: &str, reason: &str) -> ServiceResult<bool> {
    let n = conn.execute(
        "UPDATE sessions SET state = 'failed', failure_reason = ?2
         WHERE session_id = ?1 AND state IN ('scheduled', 'connecting', 'running')",
        params![session_id, reason],
    )?;
    Ok(n == 1)
}

pub fn set_job_id(conn: &Connection, session_id: &str, job_id: &str) -> ServiceResult<()> {
    conn.execute(
        "UPDATE sessions SET job_id = ?2 WHERE session_id = ?1",
        params![session_id, job_id],
    )?;
    Ok(())
}

/// Updates the override unless the session is final; false if it was.
pub fn set_session_threshold(
    conn: &Connection,
    session_id: &str,
    n: Option<u32>,
) -> ServiceResult<bool> {
    let changed = conn.execute(
        "UPDATE sessions SET threshold_override = ?2
         WHERE session_id = ?1 AND state NOT IN ('complete', 'failed')",
        params![session_id, n],
    )?;
    Ok(changed == 1)
}

/// Moves a still-scheduled session to another room; false otherwise.
pub fn set_session_room(conn: &Connection, session_id: &str, room: &str) -> ServiceResult<bool> {
    let changed = conn.execute(
        "UPDATE sessions SET room_number = ?2 WHERE session_id = ?1 AND state = 'scheduled'",
        params![session_id, room],
    )?;
    Ok(changed == 1)
}

// ---- presence and records ----

/// Records a block delivery; false if that block was already delivered.
pub fn insert_delivery(
    conn: &Connection,
    session_id: &str,
    block: usize,
    degraded: bool,
) -> ServiceResult<bool> {
    let n = conn.execute(
        "INSERT OR IGNORE INTO block_deliveries (session_id, block_index, degraded)
         VALUES (?1, ?2, ?3)",
        params![session_id, block as i64, degraded],
    )?;
    Ok(n == 1)
}

pub fn insert_presence(
    conn: &Connection,
    session_id: &str,
    block: usize,
    student_id: &str,
    distance: Option<f64>,
) -> ServiceResult<()> {
    conn.execute(
        "INSERT OR IGNORE INTO presence_blocks (session_id, block_index, student_id, distance)
         VALUES (?1, ?2, ?3, ?4)",
        params![session_id, block as i64, student_id, distance],
    )?;
    Ok(())
}

/// `(block_index, degraded)` for every delivered block, in block order.
pub fn deliveries(conn: &Connection, session_id: &str) -> ServiceResult<Vec<(usize, bool)>> {
    let mut stmt = conn.prepare(
        "SELECT block_index, degraded FROM block_deliveries WHERE session_id = ?1
         ORDER BY block_index",
    )?;
    let rows = stmt.query_map([session_id], |r| {
        Ok((r.get::<_, i64>(0)? as usize, r.get(1)?))
    })?;
    Ok(rows.collect::<Result<_, _>>()?)
}

/// Blocks in which `student_id` was seen.
pub fn presence_of(
    conn: &Connection,
    session_id: &str,
    student_id: &str,
) -> ServiceResult<Vec<usize>> {
    let mut stmt = conn.prepare(
        "SELECT block_index FROM presence_blocks WHERE session_id = ?1 AND student_id = ?2
         ORDER BY block_index",
    )?;
    let rows = stmt.query_map(params![session_id, student_id], |r| {
        Ok(r.get::<_, i64>(0)? as usize)
    })?;
    Ok(rows.collect::<Result<_, _>>()?)
}

fn record_row(r: &Row) -> rusqlite::Result<AttendanceRecord> {
    Ok(AttendanceRecord {
        session_id: r.get(0)?,
        student_id: r.get(1)?,
        blocks_present: r.get(2)?,
        threshold_used: r.get(3)?,
        present: r.get(4)?,
        source: parse_col(r, 5)?,
        override_note: r.get(6)?,
    })
}

const RECORD_COLUMNS: &str = "session_id, student_id, blocks_present, threshold_used, present,
     source, override_note FROM attendance_records";

pub fn upsert_record(conn: &Connection, rec: &AttendanceRecord) -> ServiceResult<()> {
    conn.execute(
        "INSERT OR REPLACE INTO attendance_records
         (session_id, student_id, blocks_present, threshold_used, present, source, override_note)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        params![
            rec.session_id,
            rec.student_id,
            rec.blocks_present,
            rec.threshold_used,
            rec.present,
            rec.source.as_str(),
            rec.override_note
        ],
    )?;
    Ok(())
}

pub fn records(conn: &Connection, session_id: &str) -> ServiceResult<Vec<AttendanceRecord>> {
    let mut stmt = conn.prepare(&format!(
        "SELECT {RECORD_COLUMNS} WHERE session_id = ?1 ORDER BY student_id"
    ))?;
    let rows = stmt.query_map([session_id], record_row)?;
    Ok(rows.collect::<Result<_, _>>()?)
}

pub fn record(
    conn: &Connection,
    session_id: &str,
    student_id: &str,
) -> ServiceResult<Option<AttendanceRecord>> {
    Ok(conn
        .query_row(
            &format!("SELECT {RECORD_COLUMNS} WHERE session_id = ?1 AND student_id = ?2"),
            params![session_id, student_id],
            record_row,
        )
        .optional()?)
}

/// Records of one student across the finalized sessions of one course.
pub fn course_records(
    conn: &Connection,
    course_id: &str,
    student_id: &str,
) -> ServiceResult<Vec<AttendanceRecord>> {
    let mut stmt = conn.prepare(
        "SELECT a.session_id, a.student_id, a.blocks_present, a.threshold_used, a.present,
                a.source, a.override_note
         FROM attendance_records a JOIN sessions s ON s.session_id = a.session_id
         WHERE s.course_id = ?1 AND a.student_id = ?2 AND s.state = 'complete'
         ORDER BY s.start_time, s.session_id",
    )?;
    let rows = stmt.query_map(params![course_id, student_id], record_row)?;
    Ok(rows.collect::<Result<_, _>>()?)
}

pub fn log_override(
    conn: &Connection,
    session_id: &str,
    student_id: &str,
    present: Option<bool>,
    note: Option<&str>,
    admin_id: &str,
    at: Timestamp,
) -> ServiceResult<()> {
    conn.execute(
        "INSERT INTO overrides (session_id, student_id, action, present, note, admin_id, at)
         VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)",
        params![
            session_id,
            student_id,
            if present.is_some() { "set" } else { "clear" },
            present,
            note,
            admin_id,
            at.to_string()
        ],
    )?;
    Ok(())
}

pub fn override_log_len(
    conn: &Connection,
    session_id: &str,
    student_id: &str,
) -> ServiceResult<u32> {
    Ok(conn.query_row(
        "SELECT COUNT(*) FROM overrides WHERE session_id = ?1 AND student_id = ?2",
        params![session_id, student_id],
        |r| r.get(0),
    )?)
}
