mod support;

use attenface_core::scenario::{generate_scenario, GeneratorConfig, ScenarioFile};
use serde_json::{json, Value};
use support::{EngineKind, Harness};

fn small() -> ScenarioFile {
    let mut file = generate_scenario(&GeneratorConfig {
        students: 12,
        sessions: 4,
        courses: 2,
        min_blocks: 3,
        max_blocks: 5,
        ..Default::default()
    });
    file.rooms.insert("R900".into(), "cam-9".into());
    file
}

fn enrolled(h: &Harness, course: &str) -> Vec<String> {
    h.scenario.course(course).unwrap().students.clone()
}

fn record_of<'a>(detail: &'a Value, student: &str) -> &'a Value {
    detail["records"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["student_id"] == student)
        .unwrap_or_else(|| panic!("no record for {student}"))
}

#[test]
fn roles_are_enforced() {
    let h = Harness::start(small(), EngineKind::Stub);
    let student = &enrolled(&h, "C101")[0];
    let s = h.login(student);
    let p1 = h.login("prof-1");
    let p2 = h.login("prof-2");
    let admin = h.login("admin");
    let body = Some(json!({ "n": 2 }));

    let (status, err) = h.call("PUT", "/sessions/C101-1/threshold", Some(&s), body.clone());
    assert_eq!(status, 403, "{err}");
    assert_eq!(err["code"], "forbidden");
    assert_eq!(
        h.call("PUT", "/sessions/C101-1/threshold", Some(&p2), body.clone())
            .0,
        403
    );
    assert_eq!(
        h.call("PUT", "/courses/C101/threshold", Some(&s), body.clone())
            .0,
        403
    );
    assert_eq!(
        h.call("PUT", "/sessions/C101-1/threshold", Some(&p1), body)
            .0,
        200
    );

    let room = Some(json!({ "room_number": "R900" }));
    assert_eq!(
        h.call("PUT", "/courses/C101/room", Some(&p1), room.clone())
            .0,
        403
    );
    assert_eq!(
        h.call("PUT", "/courses/C101/room", Some(&admin), room.clone())
            .0,
        200
    );
    assert_eq!(
        h.call("PUT", "/sessions/C101-1/room", Some(&s), room).0,
        403
    );

    let other = h
        .scenario
        .students
        .iter()
        .find(|x| &x.id != student)
        .unwrap();
    let path = format!("/students/{}/standing", other.id);
    assert_eq!(h.call("GET", &path, Some(&s), None).0, 403);
    let path = format!("/sessions/C101-1/attendance/{}", other.id);
    assert_eq!(h.call("GET", &path, Some(&s), None).0, 403);
    assert_eq!(
        h.call("GET", "/courses/C101/sessions/C101-1/total", Some(&s), None)
            .0,
        403
    );
    let override_body = Some(json!({ "present": true, "note": "x" }));
    let path = format!("/sessions/C101-1/attendance/{student}/override");
    assert_eq!(h.call("PUT", &path, Some(&p1), override_body).0, 403);

    assert_eq!(h.call("GET", "/me", None, None).0, 401);
    assert_eq!(h.call("GET", "/me", Some("bogus"), None).0, 401);
    let (status, me) = h.call("GET", "/me", Some(&p2), None);
    assert_eq!(status, 200);
    assert_eq!(me["role"], "professor");
    assert_eq!(me["courses"].as_array().unwrap().len(), 1);

    let (status, _) = h.call(
        "POST",
        "/auth/login",
        None,
        Some(json!({ "user_id": "prof-1", "password": "wrong" })),
    );
    assert_eq!(status, 401);
}

#[test]
fn malformed_requests_are_rejected() {
    let h = Harness::start(small(), EngineKind::Stub);
    let p1 = h.login("prof-1");
    let (status, err) = h.call(
        "PUT",
        "/sessions/C101-1/threshold",
        Some(&p1),
        Some(json!({ "n": -1 })),
    );
    assert_eq!(status, 400);
    assert_eq!(err["code"], "invalid_input");
    assert_eq!(
        h.call(
            "PUT",
            "/sessions/nope/threshold",
            Some(&p1),
            Some(json!({ "n": 1 }))
        )
        .0,
        404
    );
    assert_eq!(
        h.call(
            "PUT",
            "/sessions/C101-1/room",
            Some(&p1),
            Some(json!({ "room_number": "R000" }))
        )
        .0,
        404
    );
    // Engine routes want the shared secret.
    let (status, _) = h.send(
        "POST",
        "/internal/sessions/C101-1/failed",
        None,
        Some("wrong"),
        Some(json!({ "reason": "x" })),
    );
    assert_eq!(status, 401);
    assert_eq!(h.session("C101-1")["state"], "scheduled");
}

#[test]
fn replayed_deliveries_change_nothing() {
    let h = Harness::start(small(), EngineKind::Stub);
    let session = h.scenario.session("C101-1").unwrap().clone();
    let blocks = session.schedule.block_count();
    let students = enrolled(&h, "C101");
    let (x, y) = (&students[0], &students[1]);
    h.set_clock(session.start);
    assert_eq!(h.session("C101-1")["state"], "running");
    assert!(h
        .jobs
        .lock()
        .unwrap()
        .iter()
        .any(|j| j.session_id == "C101-1"));

    let with = |ids: &[&String]| {
        json!({
            "assignments": ids.iter().enumerate().map(|(i, id)| json!({
                "student_id": id, "detection_index": i, "distance": 0.1
            })).collect::<Vec<_>>(),
            "degraded": false
        })
    };
    let path = |k: usize| format!("/internal/sessions/C101-1/blocks/{k}");

    let (status, ack) = h.internal(&path(0), with(&[x]));
    assert_eq!((status, ack["applied"].clone()), (200, json!(true)));
    // A second delivery of block 0 with different content is ignored.
    let (status, ack) = h.internal(&path(0), with(&[x, y]));
    assert_eq!((status, ack["applied"].clone()), (200, json!(false)));
    assert_eq!(h.internal(&path(blocks), with(&[x])).0, 400);
    assert_eq!(h.internal(&path(1), with(&[&"ghost".to_string()])).0, 400);

    for k in 1..blocks {
        assert_eq!(h.internal(&path(k), with(&[x])).0, 200);
    }
    let detail = h.session("C101-1");
    assert_eq!(detail["state"], "complete");
    assert_eq!(detail["records"].as_array().unwrap().len(), students.len());
    assert_eq!(record_of(&detail, x)["blocks_present"], blocks);
    assert_eq!(record_of(&detail, y)["blocks_present"], 0);

    let matrix = json!({
        "session_id": "C101-1",
        "block_count": blocks,
        "rows": students.iter().map(|s| (s.clone(), vec![true; blocks])).collect::<std::collections::BTreeMap<_, _>>(),
        "degraded_blocks": []
    });
    let (status, ack) = h.internal("/internal/sessions/C101-1/complete", matrix);
    assert_eq!((status, ack["applied"].clone()), (200, json!(false)));
    assert_eq!(h.internal(&path(0), with(&[y])).1["applied"], false);
    assert_eq!(h.session("C101-1")["records"], detail["records"]);

    // Finalizing again returns the same records.
    let again = h.service.finalize("C101-1").unwrap();
    assert_eq!(again.len(), students.len());
}

#[test]
fn threshold_set_just_before_start_is_applied() {
    let h = Harness::start(small(), EngineKind::Real);
    let session = h.scenario.session("C101-1").unwrap().clone();
    let p1 = h.login("prof-1");
    h.set_clock(session.start.plus_minutes(-2));
    assert_eq!(h.session("C101-1")["state"], "connecting");
    let (status, change) = h.call(
        "PUT",
        "/sessions/C101-1/threshold",
        Some(&p1),
        Some(json!({ "n": 1 })),
    );
    assert_eq!(status, 200, "{change}");

    h.set_clock(session.start);
    let detail = h.wait_state("C101-1", "complete");
    assert_eq!(detail["threshold"]["effective"], 1);
    for student in enrolled(&h, "C101") {
        let scripted = session.present.get(&student).map_or(0, |b| b.len());
        let record = record_of(&detail, &student);
        assert_eq!(record["threshold_used"], 1);
        assert_eq!(record["blocks_present"], scripted, "{student}");
        assert_eq!(record["present"], scripted >= 1, "{student}");
    }

    let (status, _) = h.call(
        "PUT",
        "/sessions/C101-1/threshold",
        Some(&p1),
        Some(json!({ "n": 2 })),
    );
    assert_eq!(status, 409);
    // An impossible threshold is accepted with a warning.
    let (status, change) = h.call(
        "PUT",
        "/sessions/C101-2/threshold",
        Some(&p1),
        Some(json!({ "n": 99 })),
    );
    assert_eq!(status, 200);
    assert_eq!(change["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn room_change_before_start_moves_the_camera() {
    let h = Harness::start(small(), EngineKind::Stub);
    let session = h.scenario.session("C101-1").unwrap().clone();
    let p1 = h.login("prof-1");
    let (status, change) = h.call(
        "PUT",
        "/sessions/C101-1/room",
        Some(&p1),
        Some(json!({ "room_number": "R900" })),
    );
    assert_eq!(status, 200, "{change}");
    assert_eq!(change["camera_id"], "cam-9");

    h.set_clock(session.start.plus_minutes(-5));
    let detail = h.session("C101-1");
    assert_eq!(detail["state"], "connecting");
    assert_eq!(detail["camera_id"], "cam-9");
    let (status, _) = h.call(
        "PUT",
        "/sessions/C101-1/room",
        Some(&p1),
        Some(json!({ "room_number": "R101" })),
    );
    assert_eq!(status, 409);

    h.set_clock(session.start);
    let jobs = h.jobs.lock().unwrap();
    let job = jobs.iter().find(|j| j.session_id == "C101-1").unwrap();
    assert_eq!(job.camera_id, "cam-9");
    assert_eq!(
        jobs.iter().filter(|j| j.session_id == "C101-1").count(),
        1,
        "dispatched once"
    );
}

#[test]
fn course_room_change_moves_unstarted_sessions() {
    let h = Harness::start(small(), EngineKind::Stub);
    let first = h.scenario.session("C101-1").unwrap().clone();
    let admin = h.login("admin");
    h.set_clock(first.start);
    let (status, change) = h.call(
        "PUT",
        "/courses/C101/room",
        Some(&admin),
        Some(json!({ "room_number": "R900" })),
    );
    assert_eq!(status, 200, "{change}");
    assert_eq!(change["sessions"], json!(["C101-2"]));
    assert_eq!(h.session("C101-1")["camera_id"], "cam-1");
    assert_eq!(h.session("C101-2")["camera_id"], "cam-9");
}

#[test]
fn overrides_keep_the_computed_decision() {
    let h = Harness::start(small(), EngineKind::Real);
    let session = h.scenario.session("C101-1").unwrap().clone();
    let admin = h.login("admin");
    let student = enrolled(&h, "C101")[0].clone();
    let path = format!("/sessions/C101-1/attendance/{student}/override");

    let body = |present: bool, note: &str| Some(json!({ "present": present, "note": note }));
    assert_eq!(
        h.call("PUT", &path, Some(&admin), body(true, "early")).0,
        409
    );

    h.set_clock(session.start);
    let detail = h.wait_state("C101-1", "complete");
    let computed = record_of(&detail, &student)["present"].as_bool().unwrap();

    let (status, err) = h.call("PUT", &path, Some(&admin), body(!computed, "  "));
    assert_eq!(status, 400, "{err}");
    let (status, rec) = h.call(
        "PUT",
        &path,
        Some(&admin),
        body(!computed, "medical certificate"),
    );
    assert_eq!(status, 200, "{rec}");
    assert_eq!(rec["present"], !computed);
    assert_eq!(rec["computed_present"], computed);
    assert_eq!(rec["source"], "admin_override");
    assert_eq!(rec["override_note"], "medical certificate");

    let s = h.login(&student);
    let (status, own) = h.call(
        "GET",
        &format!("/sessions/C101-1/attendance/{student}"),
        Some(&s),
        None,
    );
    assert_eq!(status, 200);
    assert_eq!(own["record"]["present"], !computed);
    let (_, total) = h.call(
        "GET",
        "/courses/C101/sessions/C101-1/total",
        Some(&admin),
        None,
    );
    let present = detail["records"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["present"] == true)
        .count() as i64;
    let delta = if computed { -1 } else { 1 };
    assert_eq!(total["present"], present + delta);

    let (status, rec) = h.call("DELETE", &path, Some(&admin), None);
    assert_eq!(status, 200);
    assert_eq!(rec["present"], computed);
    assert_eq!(rec["source"], "computed");
    let conn = h.service.store().conn().unwrap();
    assert_eq!(
        attenface_backend::store::override_log_len(&conn, "C101-1", &student).unwrap(),
        2
    );
}

#[test]
fn standing_follows_finished_sessions() {
    let h = Harness::start(small(), EngineKind::Real);
    let session = h.scenario.session("C101-1").unwrap().clone();
    let student = enrolled(&h, "C101")[0].clone();
    let s = h.login(&student);
    h.set_clock(session.start);
    let detail = h.wait_state("C101-1", "complete");
    let attended = record_of(&detail, &student)["present"] == true;

    let (status, view) = h.call(
        "GET",
        &format!("/students/{student}/standing?course=C101"),
        Some(&s),
        None,
    );
    assert_eq!(status, 200, "{view}");
    let standing = &view["standings"][0];
    assert_eq!(standing["sessions_held"], 1);
    assert_eq!(standing["sessions_attended"], u32::from(attended));
    assert_eq!(standing["total_scheduled"], 4);

    let (status, list) = h.call("GET", "/courses/C101/sessions", Some(&s), None);
    assert_eq!(status, 200);
    assert_eq!(list[0]["record"]["student_id"], student.as_str());
    assert!(list[1].get("record").is_none());
}

#[test]
fn unreachable_camera_fails_the_session() {
    let mut file = small();
    file.offline_cameras.insert("cam-1".into());
    let h = Harness::start(file, EngineKind::Real);
    let session = h.scenario.session("C101-1").unwrap().clone();
    h.set_clock(session.start);
    let detail = h.session("C101-1");
    assert_eq!(detail["state"], "failed");
    assert!(
        detail["failure_reason"].as_str().unwrap().contains("cam-1"),
        "{detail}"
    );
    assert!(detail["records"].as_array().unwrap().is_empty());
    let admin = h.login("admin");
    assert_eq!(
        h.call(
            "GET",
            "/courses/C101/sessions/C101-1/total",
            Some(&admin),
            None
        )
        .0,
        409
    );
    assert!(h.jobs.lock().unwrap().is_empty());
}
