//! Use cases of the back-end.
//!
//! Every method is synchronous and safe to call from many threads. Session
//! state changes are conditional updates inside immediate transactions, so
//! two callers racing on one session serialize in the database and exactly
//! one of them wins each transition.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use attenface_core::camera::{CameraGateway, ConnectionHandle};
use attenface_core::engine::{PresenceMatrix, SessionJob};
use attenface_core::policy::{
    apply_admin_override, clear_admin_override, course_attendance_summary, decide_class_attendance,
    effective_threshold, AttendanceRecord, CourseStanding, PresenceVector, ThresholdPolicy,
};
use attenface_core::{Timestamp, CONNECT_LEAD_MINUTES, DEFAULT_TAU};
use attenface_engine::wire::BlockCallback;
use rusqlite::{Connection, TransactionBehavior};

use crate::auth::{IdentityProvider, Principal, Role};
use crate::clock::Clock;
use crate::dispatch::JobDispatcher;
use crate::error::{ServiceError, ServiceResult};
use crate::store::{self, SessionRow, Store};
use crate::views::{
    Ack, ClassTotal, ClockView, CourseView, LoginResponse, MeView, RecordView, RoomChange,
    SessionDetail, SessionState, SessionSummary, StandingsView, StudentAttendance, ThresholdChange,
    ThresholdView,
};

/// What one clock tick did.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TickReport {
    pub connected: Vec<String>,
    pub dispatched: Vec<String>,
    pub failed: Vec<String>,
}

/// How a principal relates to a course.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Access {
    Staff,
    Enrolled,
}

pub struct Service {
    store: Store,
    clock: Arc<dyn Clock>,
    identity: Arc<dyn IdentityProvider>,
    gateway: Arc<CameraGateway>,
    dispatcher: Arc<dyn JobDispatcher>,
    tau: f64,
    callback_url: RwLock<Option<String>>,
    connections: Mutex<HashMap<String, ConnectionHandle>>,
    tick_lock: Mutex<()>,
}

impl Service {
    pub fn new(
        store: Store,
        clock: Arc<dyn Clock>,
        identity: Arc<dyn IdentityProvider>,
        gateway: Arc<CameraGateway>,
        dispatcher: Arc<dyn JobDispatcher>,
    ) -> ServiceResult<Self> {
        let service = Service {
            store,
            clock,
            identity,
            gateway,
            dispatcher,
            tau: DEFAULT_TAU,
            callback_url: RwLock::new(None),
            connections: Mutex::new(HashMap::new()),
            tick_lock: Mutex::new(()),
        };
        service.sync_cameras()?;
        Ok(service)
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    /// Base URL the engine should post results under.
    pub fn set_callback_url(&self, url: impl Into<String>) {
        *self.callback_url.write().expect("callback url poisoned") = Some(url.into());
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn gateway(&self) -> &CameraGateway {
        &self.gateway
    }

    /// Registers every room's camera with the gateway.
    pub fn sync_cameras(&self) -> ServiceResult<()> {
        let conn = self.store.conn()?;
        for (room, camera) in store::rooms(&conn)? {
            self.gateway.register(&camera, &room);
        }
        Ok(())
    }

    fn immediate<T>(&self, f: impl FnOnce(&Connection) -> ServiceResult<T>) -> ServiceResult<T> {
        let mut conn = self.store.conn()?;
        let tx = conn.transaction_with_behavior(TransactionBehavior::Immediate)?;
        let out = f(&tx)?;
        tx.commit()?;
        Ok(out)
    }

    fn release(&self, session_id: &str) {
        let handle = self
            .connections
            .lock()
            .expect("connection table poisoned")
            .remove(session_id);
        if let Some(h) = handle {
            self.gateway.disconnect(&h);
        }
    }

    // ---- auth ----

    pub fn login(&self, user_id: &str, password: &str) -> ServiceResult<LoginResponse> {
        let role = self.identity.verify(user_id, password)?;
        let token = uuid::Uuid::new_v4().simple().to_string();
        let conn = self.store.conn()?;
        store::insert_token(&conn, &token, user_id, self.clock.now())?;
        Ok(LoginResponse {
            token,
            user_id: user_id.to_string(),
            role,
        })
    }

    pub fn authenticate(&self, token: &str) -> ServiceResult<Principal> {
        let conn = self.store.conn()?;
        store::token_principal(&conn, token)?
            .map(|(user_id, role)| Principal { user_id, role })
            .ok_or_else(|| ServiceError::Unauthorized("unknown or expired token".into()))
    }

    // ---- clock and orchestration ----

    pub fn clock_view(&self) -> ClockView {
        ClockView {
            now: self.clock.now(),
            is_virtual: self.clock.is_virtual(),
        }
    }

    /// Moves a virtual clock and runs everything that became due.
    pub fn set_clock(&self, now: Timestamp) -> ServiceResult<ClockView> {
        self.clock.set(now)?;
        self.tick()?;
        Ok(self.clock_view())
    }

    /// Runs due orchestration steps in time order: camera connection at
    /// start minus the lead time, then dispatch at start.
    pub fn tick(&self) -> ServiceResult<TickReport> {
        let _guard = self.tick_lock.lock().expect("tick lock poisoned");
        let now = self.clock.now();
        let mut report = TickReport::default();
        loop {
            let pending = {
                let conn = self.store.conn()?;
                store::sessions_in_states(
                    &conn,
                    &[SessionState::Scheduled, SessionState::Connecting],
                )?
            };
            let next = pending
                .into_iter()
                .filter_map(|s| {
                    let due = match s.state {
                        SessionState::Scheduled => s.start.plus_minutes(-CONNECT_LEAD_MINUTES),
                        _ => s.start,
                    };
                    (due <= now).then_some((due, s))
                })
                .min_by(|a, b| (a.0, &a.1.session_id).cmp(&(b.0, &b.1.session_id)));
            let Some((_, session)) = next else { break };
            match session.state {
                SessionState::Scheduled => self.connect_camera(&session.session_id, &mut report)?,
                _ => self.start_session(&session.session_id, &mut report)?,
            }
        }
        Ok(report)
    }

    fn connect_camera(&self, session_id: &str, report: &mut TickReport) -> ServiceResult<()> {
        // Leaving `scheduled` first freezes the room, so the camera read
        // below is the one the session will use.
        let session = self.immediate(|tx| {
            if store::transition(
                tx,
                session_id,
                SessionState::Scheduled,
                SessionState::Connecting,
            )? {
                store::session(tx, session_id)
            } else {
                Ok(None)
            }
        })?;
        let Some(s) = session else { return Ok(()) };
        let at = s.start.plus_minutes(-CONNECT_LEAD_MINUTES);
        match self.gateway.connect(&s.camera_id, at, s.start, s.end) {
            Ok(handle) => {
                self.connections
                    .lock()
                    .expect("connection table poisoned")
                    .insert(s.session_id.clone(), handle);
                report.connected.push(s.session_id);
            }
            Err(e) => {
                log::warn!("session {}: {e}", s.session_id);
                let conn = self.store.conn()?;
                store::mark_failed(&conn, &s.session_id, &e.to_string())?;
                report.failed.push(s.session_id);
            }
        }
        Ok(())
    }

    fn start_session(&self, session_id: &str, report: &mut TickReport) -> ServiceResult<()> {
        let prepared = self.immediate(|tx| {
            if !store::transition(
                tx,
                session_id,
                SessionState::Connecting,
                SessionState::Running,
            )? {
                return Ok(None);
            }
            let s = store::require_session(tx, session_id)?;
            let roster = store::roster(tx, &s.course_id)?;
            Ok(Some((s, roster)))
        })?;
        let Some((s, roster)) = prepared else {
            return Ok(());
        };
        let job = SessionJob {
            session_id: s.session_id.clone(),
            camera_id: s.camera_id.clone(),
            start_time: s.start,
            end_time: s.end,
            interval_minutes: i64::from(s.interval_minutes),
            tau: self.tau,
            roster,
        };
        let outcome = job.validate().map_err(|e| e.to_string()).and_then(|_| {
            let url = self
                .callback_url
                .read()
                .expect("callback url poisoned")
                .clone();
            self.dispatcher.dispatch(&job, url.as_deref())
        });
        let conn = self.store.conn()?;
        match outcome {
            Ok(job_id) => {
                store::set_job_id(&conn, &s.session_id, &job_id)?;
                report.dispatched.push(s.session_id);
            }
            Err(reason) => {
                log::warn!("session {}: dispatch failed: {reason}", s.session_id);
                store::mark_failed(&conn, &s.session_id, &reason)?;
                drop(conn);
                self.release(&s.session_id);
                report.failed.push(s.session_id);
            }
        }
        Ok(())
    }

    // ---- engine callbacks ----

    pub fn ingest_block(
        &self,
        session_id: &str,
        block: usize,
        delivery: &BlockCallback,
    ) -> ServiceResult<Ack> {
        let (ack, finalized) = self.immediate(|tx| {
            let s = store::require_session(tx, session_id)?;
            match s.state {
                SessionState::Running => {}
                SessionState::Complete => {
                    return Ok((
                        Ack {
                            ok: true,
                            applied: false,
                        },
                        false,
                    ))
                }
                other => {
                    return Err(ServiceError::Conflict(format!(
                        "session {session_id} is {other}, not running"
                    )))
                }
            }
            let block_count = s.schedule()?.block_count();
            if block >= block_count {
                return Err(ServiceError::InvalidInput(format!(
                    "block {block} is out of range; session {session_id} has {block_count} blocks"
                )));
            }
            for a in &delivery.assignments {
                if !store::is_enrolled(tx, &s.course_id, &a.student_id)? {
                    return Err(ServiceError::InvalidInput(format!(
                        "student {} is not enrolled in {}",
                        a.student_id, s.course_id
                    )));
                }
            }
            if !store::insert_delivery(tx, session_id, block, delivery.degraded)? {
                return Ok((
                    Ack {
                        ok: true,
                        applied: false,
                    },
                    false,
                ));
            }
            if !delivery.degraded {
                for a in &delivery.assignments {
                    store::insert_presence(tx, session_id, block, &a.student_id, Some(a.distance))?;
                }
            }
            let finalize = store::deliveries(tx, session_id)?.len() == block_count;
            if finalize {
                finalize_in(tx, &s)?;
            }
            Ok((
                Ack {
                    ok: true,
                    applied: true,
                },
                finalize,
            ))
        })?;
        if finalized {
            self.release(session_id);
        }
        Ok(ack)
    }

    /// Fills any blocks not delivered individually and finalizes.
    pub fn ingest_complete(&self, session_id: &str, matrix: &PresenceMatrix) -> ServiceResult<Ack> {
        let ack = self.immediate(|tx| {
            let s = store::require_session(tx, session_id)?;
            match s.state {
                SessionState::Running => {}
                SessionState::Complete => return Ok(Ack { ok: true, applied: false }),
                other => {
                    return Err(ServiceError::Conflict(format!(
                        "session {session_id} is {other}, not running"
                    )))
                }
            }
            let block_count = s.schedule()?.block_count();
            if matrix.session_id != session_id || matrix.block_count != block_count {
                return Err(ServiceError::InvalidInput(format!(
                    "matrix for {} with {} blocks does not fit session {session_id} with {block_count}",
                    matrix.session_id, matrix.block_count
                )));
            }
            for (student, row) in &matrix.rows {
                if row.len() != block_count {
                    return Err(ServiceError::InvalidInput(format!(
                        "row of {student} has {} blocks, expected {block_count}",
                        row.len()
                    )));
                }
                if !store::is_enrolled(tx, &s.course_id, student)? {
                    return Err(ServiceError::InvalidInput(format!(
                        "student {student} is not enrolled in {}",
                        s.course_id
                    )));
                }
            }
            for k in 0..block_count {
                let degraded = matrix.degraded_blocks.contains(&k);
                if !store::insert_delivery(tx, session_id, k, degraded)? {
                    continue;
                }
                for (student, row) in &matrix.rows {
                    if row[k] {
                        store::insert_presence(tx, session_id, k, student, None)?;
                    }
                }
            }
            finalize_in(tx, &s)?;
            Ok(Ack { ok: true, applied: true })
        })?;
        self.release(session_id);
        Ok(ack)
    }

    pub fn ingest_failed(&self, session_id: &str, reason: &str) -> ServiceResult<Ack> {
        let applied = self.immediate(|tx| {
            store::require_session(tx, session_id)?;
            store::mark_failed(tx, session_id, reason)
        })?;
        self.release(session_id);
        Ok(Ack { ok: true, applied })
    }

    /// Decides attendance for a running session. Repeating it on a complete
    /// session returns the stored records unchanged.
    pub fn finalize(&self, session_id: &str) -> ServiceResult<Vec<AttendanceRecord>> {
        let records = self.immediate(|tx| {
            let s = store::require_session(tx, session_id)?;
            match s.state {
                SessionState::Running => finalize_in(tx, &s),
                SessionState::Complete => store::records(tx, session_id),
                other => Err(ServiceError::Conflict(format!(
                    "session {session_id} is {other} and cannot be finalized"
                ))),
            }
        })?;
        self.release(session_id);
        Ok(records)
    }

    // ---- queries ----

    fn access(
        &self,
        conn: &Connection,
        p: &Principal,
        course: &CourseView,
    ) -> ServiceResult<Access> {
        match p.role {
            Role::Admin => Ok(Access::Staff),
            Role::Professor if course.professor_id == p.user_id => Ok(Access::Staff),
            Role::Student if store::is_enrolled(conn, &course.course_id, &p.user_id)? => {
                Ok(Access::Enrolled)
            }
            _ => Err(ServiceError::Forbidden(format!(
                "{} {} has no access to course {}",
                p.role, p.user_id, course.course_id
            ))),
        }
    }

    pub fn me(&self, p: &Principal) -> ServiceResult<MeView> {
        let conn = self.store.conn()?;
        let courses = match p.role {
            Role::Admin => store::courses_where(&conn, "", None)?,
            Role::Professor => {
                store::courses_where(&conn, "WHERE c.professor_id = ?1", Some(&p.user_id))?
            }
            Role::Student => store::courses_where(
                &conn,
                "WHERE c.course_id IN (SELECT course_id FROM enrollments WHERE student_id = ?1)",
                Some(&p.user_id),
            )?,
        };
        Ok(MeView {
            user_id: p.user_id.clone(),
            role: p.role,
            courses,
        })
    }

    pub fn standing(
        &self,
        p: &Principal,
        student_id: &str,
        course_id: Option<&str>,
    ) -> ServiceResult<StandingsView> {
        if p.role == Role::Student && p.user_id != student_id {
            return Err(ServiceError::Forbidden(format!(
                "student {} may not view {student_id}",
                p.user_id
            )));
        }
        let conn = self.store.conn()?;
        if !store::student_exists(&conn, student_id)? {
            return Err(ServiceError::not_found("student", student_id));
        }
        let enrolled = store::courses_where(
            &conn,
            "WHERE c.course_id IN (SELECT course_id FROM enrollments WHERE student_id = ?1)",
            Some(student_id),
        )?;
        let courses: Vec<CourseView> = match course_id {
            Some(cid) => {
                let course = store::require_course(&conn, cid)?;
                self.access(&conn, p, &course)?;
                if !enrolled.iter().any(|c| c.course_id == cid) {
                    return Err(ServiceError::NotFound(format!(
                        "student {student_id} is not enrolled in {cid}"
                    )));
                }
                vec![course]
            }
            None => enrolled
                .into_iter()
                .filter(|c| p.role != Role::Professor || c.professor_id == p.user_id)
                .collect(),
        };
        let mut standings = Vec::with_capacity(courses.len());
        for course in courses {
            let records = store::course_records(&conn, &course.course_id, student_id)?;
            let (held, attended) =
                course_attendance_summary(&records, |_| Some(course.course_id.as_str()))?;
            let standing = CourseStanding::new(
                &course.course_id,
                student_id,
                held,
                attended,
                course.total_scheduled,
                course.required_percent,
            )
            .map_err(|e| ServiceError::Internal(format!("course {}: {e}", course.course_id)))?;
            standings.push(standing);
        }
        Ok(StandingsView {
            student_id: student_id.to_string(),
            standings,
        })
    }

    fn threshold_view(course: &CourseView, s: &SessionRow) -> ThresholdView {
        let policy = ThresholdPolicy::new(course.default_threshold, s.threshold_override);
        ThresholdView {
            course_default: course.default_threshold,
            session_override: s.threshold_override,
            effective: effective_threshold(&policy),
        }
    }

    pub fn session_detail(&self, p: &Principal, session_id: &str) -> ServiceResult<SessionDetail> {
        let conn = self.store.conn()?;
        let s = store::require_session(&conn, session_id)?;
        let course = store::require_course(&conn, &s.course_id)?;
        let access = self.access(&conn, p, &course)?;
        let deliveries = store::deliveries(&conn, session_id)?;
        let records = store::records(&conn, session_id)?
            .iter()
            .filter(|r| access == Access::Staff || r.student_id == p.user_id)
            .map(RecordView::from)
            .collect();
        Ok(SessionDetail {
            session_id: s.session_id.clone(),
            course_id: s.course_id.clone(),
            start_time: s.start,
            end_time: s.end,
            interval_minutes: s.interval_minutes,
            block_count: s.schedule()?.block_count(),
            room_number: s.room_number.clone(),
            camera_id: s.camera_id.clone(),
            state: s.state,
            threshold: Self::threshold_view(&course, &s),
            failure_reason: s.failure_reason.clone(),
            blocks_delivered: deliveries.len(),
            degraded_blocks: deliveries
                .iter()
                .filter(|(_, d)| *d)
                .map(|(k, _)| *k)
                .collect(),
            records,
        })
    }

    pub fn list_sessions(
        &self,
        p: &Principal,
        course_id: &str,
    ) -> ServiceResult<Vec<SessionSummary>> {
        let conn = self.store.conn()?;
        let course = store::require_course(&conn, course_id)?;
        let access = self.access(&conn, p, &course)?;
        store::sessions_of_course(&conn, course_id)?
            .into_iter()
            .map(|s| {
                let record = if access == Access::Enrolled {
                    store::record(&conn, &s.session_id, &p.user_id)?
                        .as_ref()
                        .map(RecordView::from)
                } else {
                    None
                };
                Ok(SessionSummary {
                    threshold: Self::threshold_view(&course, &s),
                    session_id: s.session_id,
                    course_id: s.course_id,
                    start_time: s.start,
                    end_time: s.end,
                    room_number: s.room_number,
                    state: s.state,
                    record,
                })
            })
            .collect()
    }

    pub fn student_attendance(
        &self,
        p: &Principal,
        session_id: &str,
        student_id: &str,
    ) -> ServiceResult<StudentAttendance> {
        if p.role == Role::Student && p.user_id != student_id {
            return Err(ServiceError::Forbidden(format!(
                "student {} may not view {student_id}",
                p.user_id
            )));
        }
        let conn = self.store.conn()?;
        let s = store::require_session(&conn, session_id)?;
        let course = store::require_course(&conn, &s.course_id)?;
        self.access(&conn, p, &course)?;
        if !store::is_enrolled(&conn, &s.course_id, student_id)? {
            return Err(ServiceError::NotFound(format!(
                "student {student_id} is not enrolled in {}",
                s.course_id
            )));
        }
        let block_count = s.schedule()?.block_count();
        let mut blocks = vec![false; block_count];
        for k in store::presence_of(&conn, session_id, student_id)? {
            if k < block_count {
                blocks[k] = true;
            }
        }
        let record = store::record(&conn, session_id, student_id)?;
        Ok(StudentAttendance {
            session_id: session_id.to_string(),
            student_id: student_id.to_string(),
            state: s.state,
            block_count,
            blocks_present: blocks.iter().filter(|&&b| b).count() as u32,
            blocks,
            threshold: Self::threshold_view(&course, &s).effective,
            record: record.as_ref().map(RecordView::from),
        })
    }

    /// Count of present students in a finalized session.
    pub fn class_total(
        &self,
        p: &Principal,
        course_id: &str,
        session_id: &str,
    ) -> ServiceResult<ClassTotal> {
        let conn = self.store.conn()?;
        let course = store::require_course(&conn, course_id)?;
        if self.access(&conn, p, &course)? != Access::Staff {
            return Err(ServiceError::Forbidden(
                "class totals are visible to the professor and administrators".into(),
            ));
        }
        let s = store::require_session(&conn, session_id)?;
        if s.course_id != course_id {
            return Err(ServiceError::NotFound(format!(
                "session {session_id} does not belong to {course_id}"
            )));
        }
        if s.state != SessionState::Complete {
            return Err(ServiceError::Conflict(format!(
                "session {session_id} is {} and has no final attendance yet",
                s.state
            )));
        }
        let records = store::records(&conn, session_id)?;
        Ok(ClassTotal {
            course_id: course_id.to_string(),
            session_id: session_id.to_string(),
            enrolled: records.len() as u32,
            present: records.iter().filter(|r| r.present).count() as u32,
        })
    }

    // ---- professor and admin edits ----

    fn require_professor_of(
        &self,
        p: &Principal,
        course: &CourseView,
        action: &str,
    ) -> ServiceResult<()> {
        p.require(Role::Professor, action)?;
        if course.professor_id != p.user_id {
            return Err(ServiceError::Forbidden(format!(
                "professor {} does not teach {}",
                p.user_id, course.course_id
            )));
        }
        Ok(())
    }

    pub fn set_session_threshold(
        &self,
        p: &Principal,
        session_id: &str,
        n: Option<u32>,
    ) -> ServiceResult<ThresholdChange> {
        p.require(Role::Professor, "change attendance thresholds")?;
        self.immediate(|tx| {
            let s = store::require_session(tx, session_id)?;
            let course = store::require_course(tx, &s.course_id)?;
            self.require_professor_of(p, &course, "change attendance thresholds")?;
            if !store::set_session_threshold(tx, session_id, n)? {
                return Err(ServiceError::Conflict(format!(
                    "session {session_id} is {}; its attendance can no longer change",
                    s.state
                )));
            }
            let effective = n.unwrap_or(course.default_threshold);
            let block_count = s.schedule()?.block_count();
            let mut warnings = Vec::new();
            if effective as usize > block_count {
                warnings.push(format!(
                    "threshold {effective} exceeds the {block_count} blocks of {session_id}; nobody can reach it"
                ));
            }
            Ok(ThresholdChange {
                scope: "session".into(),
                id: session_id.to_string(),
                n,
                warnings,
            })
        })
    }

    pub fn set_course_threshold(
        &self,
        p: &Principal,
        course_id: &str,
        n: Option<u32>,
    ) -> ServiceResult<ThresholdChange> {
        p.require(Role::Professor, "change attendance thresholds")?;
        let n = n.ok_or_else(|| {
            ServiceError::InvalidInput("a course threshold cannot be cleared".into())
        })?;
        self.immediate(|tx| {
            let course = store::require_course(tx, course_id)?;
            self.require_professor_of(p, &course, "change attendance thresholds")?;
            store::set_course_threshold(tx, course_id, n)?;
            let mut warnings = Vec::new();
            for s in store::sessions_of_course(tx, course_id)? {
                let block_count = s.schedule()?.block_count();
                if !s.state.is_final() && s.threshold_override.is_none() && n as usize > block_count
                {
                    warnings.push(format!(
                        "threshold {n} exceeds the {block_count} blocks of {}",
                        s.session_id
                    ));
                }
            }
            Ok(ThresholdChange {
                scope: "course".into(),
                id: course_id.to_string(),
                n: Some(n),
                warnings,
            })
        })
    }

    pub fn set_session_room(
        &self,
        p: &Principal,
        session_id: &str,
        room: &str,
    ) -> ServiceResult<RoomChange> {
        p.require(Role::Professor, "move a class")?;
        self.immediate(|tx| {
            let s = store::require_session(tx, session_id)?;
            let course = store::require_course(tx, &s.course_id)?;
            self.require_professor_of(p, &course, "move a class")?;
            let camera = store::room_camera(tx, room)?
                .ok_or_else(|| ServiceError::not_found("room", room))?;
            if !store::set_session_room(tx, session_id, room)? {
                return Err(ServiceError::Conflict(format!(
                    "session {session_id} is {}; rooms can only change before the camera connects",
                    s.state
                )));
            }
            Ok(RoomChange {
                room_number: room.to_string(),
                camera_id: camera,
                sessions: vec![session_id.to_string()],
            })
        })
    }

    /// Moves a course and every one of its sessions that has not started.
    pub fn set_course_room(
        &self,
        p: &Principal,
        course_id: &str,
        room: &str,
    ) -> ServiceResult<RoomChange> {
        p.require(Role::Admin, "move a whole course")?;
        self.immediate(|tx| {
            store::require_course(tx, course_id)?;
            let camera = store::room_camera(tx, room)?
                .ok_or_else(|| ServiceError::not_found("room", room))?;
            store::set_course_room(tx, course_id, room)?;
            let mut moved = Vec::new();
            for s in store::sessions_of_course(tx, course_id)? {
                if s.state == SessionState::Scheduled
                    && store::set_session_room(tx, &s.session_id, room)?
                {
                    moved.push(s.session_id);
                }
            }
            Ok(RoomChange {
                room_number: room.to_string(),
                camera_id: camera,
                sessions: moved,
            })
        })
    }

    pub fn set_override(
        &self,
        p: &Principal,
        session_id: &str,
        student_id: &str,
        present: bool,
        note: &str,
    ) -> ServiceResult<RecordView> {
        p.require(Role::Admin, "override attendance")?;
        let note = note.trim();
        if note.is_empty() {
            return Err(ServiceError::InvalidInput(
                "an override needs a note".into(),
            ));
        }
        let now = self.clock.now();
        self.immediate(|tx| {
            let record = final_record(tx, session_id, student_id)?;
            let updated = apply_admin_override(&record, present, note);
            store::upsert_record(tx, &updated)?;
            store::log_override(
                tx,
                session_id,
                student_id,
                Some(present),
                Some(note),
                &p.user_id,
                now,
            )?;
            Ok(RecordView::from(&updated))
        })
    }

    pub fn clear_override(
        &self,
        p: &Principal,
        session_id: &str,
        student_id: &str,
    ) -> ServiceResult<RecordView> {
        p.require(Role::Admin, "override attendance")?;
        let now = self.clock.now();
        self.immediate(|tx| {
            let record = final_record(tx, session_id, student_id)?;
            let cleared = clear_admin_override(&record);
            store::upsert_record(tx, &cleared)?;
            store::log_override(tx, session_id, student_id, None, None, &p.user_id, now)?;
            Ok(RecordView::from(&cleared))
        })
    }
}

fn final_record(
    tx: &Connection,
    session_id: &str,
    student_id: &str,
) -> ServiceResult<AttendanceRecord> {
    let s = store::require_session(tx, session_id)?;
    if s.state != SessionState::Complete {
        return Err(ServiceError::Conflict(format!(
            "session {session_id} is {}; only final attendance can be overridden",
            s.state
        )));
    }
    store::record(tx, session_id, student_id)?.ok_or_else(|| {
        ServiceError::NotFound(format!("no record for {student_id} in {session_id}"))
    })
}

/// Applies the threshold rule to every enrolled student and marks the
/// session complete. Only the caller that wins the transition writes.
fn finalize_in(tx: &Connection, s: &SessionRow) -> ServiceResult<Vec<AttendanceRecord>> {
    if !store::transition(
        tx,
        &s.session_id,
        SessionState::Running,
        SessionState::Complete,
    )? {
        return store::records(tx, &s.session_id);
    }
    let course = store::require_course(tx, &s.course_id)?;
    // Re-read: the override may have changed since `s` was loaded.
    let current = store::require_session(tx, &s.session_id)?;
    let policy = ThresholdPolicy::new(course.default_threshold, current.threshold_override);
    let block_count = current.schedule()?.block_count();
    let mut out = Vec::new();
    for student in store::enrolled_students(tx, &s.course_id)? {
        let mut blocks = vec![false; block_count];
        for k in store::presence_of(tx, &s.session_id, &student)? {
            if k < block_count {
                blocks[k] = true;
            }
        }
        let record = decide_class_attendance(
            &s.session_id,
            &PresenceVector::new(student, blocks),
            block_count,
            &policy,
        )?;
        store::upsert_record(tx, &record)?;
        out.push(record);
    }
    Ok(out)
}
