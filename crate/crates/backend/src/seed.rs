//! Loads a scenario into an empty or existing store.

use std::collections::BTreeSet;

use attenface_core::scenario::Scenario;

use crate::auth::{password_digest, Role};
use crate::error::ServiceResult;
use crate::store::{self, SessionRow, Store};
use crate::views::{CourseView, SessionState};

pub const ADMIN_ID: &str = "admin";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SeedReport {
    pub users: usize,
    pub rooms: usize,
    pub courses: usize,
    pub sessions: usize,
}

/// Writes users, rooms, students, courses, enrollments and sessions. Every
/// user's password is its user id.
pub fn seed_scenario(store: &Store, scenario: &Scenario) -> ServiceResult<SeedReport> {
    let mut conn = store.conn()?;
    let tx = conn.transaction()?;
    let mut report = SeedReport::default();

    let professors: BTreeSet<&str> = scenario
        .courses
        .iter()
        .map(|c| c.professor_id.as_str())
        .collect();
    store::insert_user(&tx, ADMIN_ID, Role::Admin, &password_digest(ADMIN_ID))?;
    for p in &professors {
        store::insert_user(&tx, p, Role::Professor, &password_digest(p))?;
    }
    for s in &scenario.students {
        store::insert_user(&tx, &s.id, Role::Student, &password_digest(&s.id))?;
        store::insert_student(&tx, &s.id, &s.name, &s.embedding)?;
    }
    report.users = 1 + professors.len() + scenario.students.len();

    for (room, camera) in &scenario.rooms {
        store::insert_room(&tx, room, camera)?;
    }
    report.rooms = scenario.rooms.len();

    for c in &scenario.courses {
        store::insert_course(
            &tx,
            &CourseView {
                course_id: c.id.clone(),
                professor_id: c.professor_id.clone(),
                room_number: c.room_number.clone(),
                camera_id: c.camera_id.clone(),
                default_threshold: c.default_threshold,
                required_percent: c.required_percent,
                total_scheduled: c.total_scheduled,
            },
        )?;
        for s in &c.students {
            store::enroll(&tx, &c.id, s)?;
        }
    }
    report.courses = scenario.courses.len();

    for s in &scenario.sessions {
        store::insert_session(
            &tx,
            &SessionRow {
                session_id: s.id.clone(),
                course_id: s.course_id.clone(),
                start: s.start,
                end: s.end,
                interval_minutes: scenario.interval_minutes,
                room_number: s.room_number.clone(),
                camera_id: s.camera_id.clone(),
                threshold_override: s.threshold_override,
                state: SessionState::Scheduled,
                job_id: None,
                failure_reason: None,
            },
        )?;
    }
    report.sessions = scenario.sessions.len();

    tx.commit()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use attenface_core::scenario::{build_scenario, generate_scenario, GeneratorConfig};

    #[test]
    fn seeding_twice_is_harmless() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::open(dir.path().join("a.db")).unwrap();
        let scenario = build_scenario(generate_scenario(&GeneratorConfig {
            students: 5,
            sessions: 3,
            courses: 2,
            ..Default::default()
        }))
        .unwrap();
        let first = seed_scenario(&store, &scenario).unwrap();
        let second = seed_scenario(&store, &scenario).unwrap();
        assert_eq!(first, second);
        assert_eq!(first.users, 1 + 2 + 5);
        let conn = store.conn().unwrap();
        for c in &scenario.courses {
            let sessions = store::sessions_of_course(&conn, &c.id).unwrap();
            let expected = scenario
                .sessions
                .iter()
                .filter(|s| s.course_id == c.id)
                .count();
            assert_eq!(sessions.len(), expected);
            assert_eq!(
                store::enrolled_students(&conn, &c.id).unwrap().len(),
                c.students.len()
            );
        }
    }
}
