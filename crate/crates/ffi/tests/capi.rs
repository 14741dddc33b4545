use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use intenbot_ffi::*;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn meeting_json() -> CString {
    CString::new(std::fs::read(workspace().join("scenes/meeting.json")).unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ib_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    ib_string_free(p);
    s
}

fn load_meeting() -> *mut IbScene {
    let mut scene = ptr::null_mut();
    assert_eq!(unsafe { ib_scene_load(meeting_json().as_ptr(), &mut scene) }, IbStatus::Ok);
    scene
}

#[test]
fn scene_round_trip_and_errors() {
    let scene = load_meeting();
    assert_eq!(unsafe { ib_scene_object_count(scene) }, 15);
    unsafe { ib_scene_free(scene) };

    let mut out = ptr::null_mut();
    let bad = CString::new(r#"{"version":"2","rooms":[],"objects":[]}"#).unwrap();
    assert_eq!(unsafe { ib_scene_load(bad.as_ptr(), &mut out) }, IbStatus::InvalidInput);
    assert!(last_error().contains("version"));
    assert!(out.is_null());
    assert_eq!(unsafe { ib_scene_load(ptr::null(), &mut out) }, IbStatus::NullArgument);
    assert_eq!(unsafe { ib_scene_object_count(ptr::null()) }, 0);
}

#[test]
fn angular_offset_matches_right_angle() {
    let (o, d, p) = ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]);
    let mut deg = 0.0;
    assert_eq!(unsafe { ib_angular_offset(o.as_ptr(), d.as_ptr(), p.as_ptr(), &mut deg) }, IbStatus::Ok);
    assert!((deg - 90.0).abs() < 1e-12);
    let zero = [0.0; 3];
    assert_eq!(unsafe { ib_angular_offset(o.as_ptr(), zero.as_ptr(), p.as_ptr(), &mut deg) }, IbStatus::InvalidInput);
}

#[test]
fn resolve_ray_returns_json_hits() {
    let scene = load_meeting();
    let origin = [0.0, 0.0, 1.2];
    let direction = [0.0, -5.0, -0.2];
    let mut json = ptr::null_mut();
    let status = unsafe { ib_resolve_ray(scene, origin.as_ptr(), direction.as_ptr(), IbModality::Gaze, ptr::null(), &mut json) };
    assert_eq!(status, IbStatus::Ok);
    let hits: serde_json::Value = serde_json::from_str(&unsafe { take_string(json) }).unwrap();
    assert_eq!(hits[0]["object_id"], "door");

    let narrow = IbAngles { gaze_range: 1.0, point_range: 1.0, gaze_high: 2.0, point_high: 0.5 };
    let status = unsafe { ib_resolve_ray(scene, origin.as_ptr(), direction.as_ptr(), IbModality::Gaze, &narrow, &mut json) };
    assert_eq!(status, IbStatus::InvalidInput, "high tier wider than range is rejected");
    unsafe { ib_scene_free(scene) };
}

fn come_back_session() -> *mut IbSession {
    let scene = load_meeting();
    let mut session = ptr::null_mut();
    unsafe {
        assert_eq!(ib_session_new(scene, ptr::null(), &mut session), IbStatus::Ok);
        ib_scene_free(scene);
        let pose = CString::new(r#"{"gaze":{"origin":[0,0,1.2],"direction":[0,-5,-0.2]},"head":{"position":[0,0,1.2]}}"#).unwrap();
        assert_eq!(ib_session_pose(session, pose.as_ptr()), IbStatus::Ok);
        assert_eq!(ib_session_event(session, IbRingEvent::Touch, 10), IbStatus::Ok);
        let text = CString::new("Come back").unwrap();
        assert_eq!(ib_session_set_transcript(session, text.as_ptr()), IbStatus::Ok);
        assert_eq!(ib_session_event(session, IbRingEvent::Release, 900), IbStatus::Ok);
    }
    session
}

#[test]
fn session_resolve_confirm() {
    let session = come_back_session();
    unsafe {
        assert_eq!(ib_session_phase(session), IbPhase::Dispatched);
        let mut xml = ptr::null_mut();
        assert_eq!(ib_session_confirm(session, 1, &mut xml), IbStatus::Protocol, "nothing presented yet");

        let mut json = ptr::null_mut();
        assert_eq!(ib_session_resolve(session, &mut json), IbStatus::Ok);
        let set: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(set["candidates"].as_array().unwrap().len(), 9);
        assert_eq!(set["candidates"][0]["task"], "GoTo");
        assert_eq!(set["candidates"][0]["destination"], "door");
        assert_eq!(ib_session_phase(session), IbPhase::Presenting);

        assert_eq!(ib_session_confirm(session, 10, &mut xml), IbStatus::InvalidInput);
        assert_eq!(ib_session_confirm(session, 1, &mut xml), IbStatus::Ok);
        let xml = take_string(xml);
        assert!(xml.contains(r#"<Action skill="NavigateTo" goal="door"/>"#), "{xml}");
        assert_eq!(ib_session_phase(session), IbPhase::Confirmed);
        ib_session_free(session);
    }
}

#[test]
fn ring_protocol_errors_map_to_status() {
    let scene = load_meeting();
    let mut session = ptr::null_mut();
    unsafe {
        ib_session_new(scene, ptr::null(), &mut session);
        ib_scene_free(scene);
        assert_eq!(ib_session_event(session, IbRingEvent::Press, 0), IbStatus::Protocol);
        assert_eq!(ib_session_event(session, IbRingEvent::Touch, 100), IbStatus::Ok);
        assert_eq!(ib_session_event(session, IbRingEvent::Press, 200), IbStatus::NoSnapshot);
        assert_eq!(ib_session_event(session, IbRingEvent::Touch, 50), IbStatus::Protocol);
        assert!(last_error().contains("precedes"));
        let bad = CString::new("{").unwrap();
        assert_eq!(ib_session_pose(session, bad.as_ptr()), IbStatus::InvalidInput);
        assert_eq!(ib_session_phase(session), IbPhase::Recording);
        ib_session_free(session);
    }
    assert_eq!(unsafe { ib_session_phase(ptr::null()) }, IbPhase::Abandoned);
}

#[test]
fn third_retry_is_exhausted() {
    let session = come_back_session();
    unsafe {
        let mut used = 0u8;
        for attempt in 1..=3u8 {
            let mut json = ptr::null_mut();
            assert_eq!(ib_session_resolve(session, &mut json), IbStatus::Ok);
            ib_string_free(json);
            let status = ib_session_retry(session, &mut used);
            if attempt < 3 {
                assert_eq!((status, used), (IbStatus::Ok, attempt));
                let pose = CString::new(r#"{"gaze":{"origin":[0,0,1.2],"direction":[0,-5,-0.2]}}"#).unwrap();
                ib_session_pose(session, pose.as_ptr());
                let t = 1000 * u64::from(attempt);
                assert_eq!(ib_session_event(session, IbRingEvent::Touch, t), IbStatus::Ok);
                assert_eq!(ib_session_event(session, IbRingEvent::Release, t + 500), IbStatus::Ok);
            } else {
                assert_eq!(status, IbStatus::RetryExhausted);
            }
        }
        assert_eq!(ib_session_phase(session), IbPhase::Abandoned);
        ib_session_free(session);
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/intenbot.h")).unwrap();
    let src = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 16);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("IB_STATUS_RETRY_EXHAUSTED = 6"));
}

/// Compile tests/c/smoke.c against the generated header and the static library.
#[test]
fn c_program_links_and_runs() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libintenbot_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let out_dir = tempfile::tempdir().unwrap();
    let exe = out_dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("running cc");
    assert!(status.success());
    let output = Command::new(&exe).arg(workspace().join("scenes/meeting.json")).output().unwrap();
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&output.stderr));
    assert_eq!(stdout, "objects 15\npresenting 1\ngoto door\n");
}
