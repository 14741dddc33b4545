//! C ABI over the intenbot engine.
//!
//! Handles are opaque and owned by the caller; free them with the matching `*_free`. Every
//! fallible call returns an [`IbStatus`]; on failure `ib_last_error_message` describes the
//! error for the calling thread. Strings returned through out-parameters are NUL-terminated
//! UTF-8 and must be released with `ib_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use intenbot::disambiguation::{confirm, generate_candidates, BaselineResolver, CandidateSet, DisambiguationError};
use intenbot::plan::{build_plan, to_xml, PlanError, SkillLibrary};
use intenbot::scene::{load_scene, SceneGraph, Vec3};
use intenbot::session::{Phase, PoseTrack, RingEvent, RingEventKind, SessionError, SessionState, Snapshot};
use intenbot::targeting::{angular_offset, resolve_ray, AngleConfig, ModalityKind, Ray};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Protocol = 4,
    NoSnapshot = 5,
    RetryExhausted = 6,
    SceneTooSmall = 7,
    ResolverTimeout = 8,
    ResolverProtocol = 9,
    Plan = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbPhase {
    Idle = 0,
    Recording = 1,
    Dispatched = 2,
    Presenting = 3,
    Confirmed = 4,
    Abandoned = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbRingEvent {
    Touch = 0,
    Press = 1,
    Release = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IbModality {
    Gaze = 0,
    ThumbLeft = 1,
    ThumbRight = 2,
    IndexLeft = 3,
    IndexRight = 4,
}

/// Cone sizes in degrees; pass NULL wherever accepted for the defaults (14, 11, 2.8, 8).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbAngles {
    pub gaze_range: f64,
    pub point_range: f64,
    pub gaze_high: f64,
    pub point_high: f64,
}

/// Opaque scene handle.
pub struct IbScene {
    scene: Arc<SceneGraph>,
}

/// Opaque interaction session. Holds its own reference to the scene.
pub struct IbSession {
    scene: Arc<SceneGraph>,
    angles: AngleConfig,
    state: SessionState,
    track: PoseTrack,
    candidates: Option<CandidateSet>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

struct Failure(IbStatus, String);

impl From<SessionError> for Failure {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::NoSnapshot(_) => IbStatus::NoSnapshot,
            SessionError::RetryExhausted => IbStatus::RetryExhausted,
            SessionError::InvalidSnapshot(_) | SessionError::Log { .. } | SessionError::EmptyScene => IbStatus::InvalidInput,
            SessionError::Protocol { .. } | SessionError::NonMonotonic { .. } | SessionError::Phase { .. } => IbStatus::Protocol,
        };
        Failure(status, e.to_string())
    }
}

impl From<DisambiguationError> for Failure {
    fn from(e: DisambiguationError) -> Self {
        let status = match e {
            DisambiguationError::Session(inner) => return inner.into(),
            DisambiguationError::Rank(_) | DisambiguationError::Index(_) => IbStatus::InvalidInput,
            DisambiguationError::SceneTooSmall { .. } => IbStatus::SceneTooSmall,
            DisambiguationError::ResolverTimeout { .. } => IbStatus::ResolverTimeout,
            DisambiguationError::ResolverProtocol(_) => IbStatus::ResolverProtocol,
        };
        Failure(status, e.to_string())
    }
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        Failure(IbStatus::Plan, e.to_string())
    }
}

fn invalid(message: impl std::fmt::Display) -> Failure {
    Failure(IbStatus::InvalidInput, message.to_string())
}

/// Run `body`, converting errors and panics into a status plus the thread's error message.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> IbStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => IbStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IbStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(IbStatus::NullArgument, format!("{name} is NULL")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(IbStatus::InvalidUtf8, format!("{name}: {e}")))
}

unsafe fn vec_arg(p: *const f64, name: &str) -> Result<Vec3, Failure> {
    if p.is_null() {
        return Err(Failure(IbStatus::NullArgument, format!("{name} is NULL")));
    }
    let a = std::slice::from_raw_parts(p, 3);
    Ok(Vec3::new(a[0], a[1], a[2]))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure(IbStatus::NullArgument, format!("{name} is NULL")))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|_| invalid("output contains NUL"))
}

unsafe fn angles_arg(p: *const IbAngles) -> Result<AngleConfig, Failure> {
    let Some(a) = p.as_ref() else { return Ok(AngleConfig::default()) };
    let cfg = AngleConfig {
        gaze_range: a.gaze_range,
        point_range: a.point_range,
        gaze_high: a.gaze_high,
        point_high: a.point_high,
        ..AngleConfig::default()
    };
    cfg.validate().map_err(invalid)?;
    Ok(cfg)
}

fn modality(m: IbModality) -> ModalityKind {
    match m {
        IbModality::Gaze => ModalityKind::Gaze,
        IbModality::ThumbLeft => ModalityKind::ThumbLeft,
        IbModality::ThumbRight => ModalityKind::ThumbRight,
        IbModality::IndexLeft => ModalityKind::IndexLeft,
        IbModality::IndexRight => ModalityKind::IndexRight,
    }
}

/// Message for the last failed call on this thread, or NULL. Valid until the next failing
/// call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ib_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ib_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ib_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parse and validate a scene document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ib_scene_load(json: *const c_char, out: *mut *mut IbScene) -> IbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(json, "json")?;
        let scene = load_scene(text.as_bytes()).map_err(invalid)?;
        *out = Box::into_raw(Box::new(IbScene { scene: Arc::new(scene) }));
        Ok(())
    })
}

/// # Safety
/// `scene` must come from `ib_scene_load` and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ib_scene_free(scene: *mut IbScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// Number of objects, or 0 for NULL.
///
/// # Safety
/// `scene` must be NULL or a live scene handle.
#[no_mangle]
pub unsafe extern "C" fn ib_scene_object_count(scene: *const IbScene) -> usize {
    scene.as_ref().map_or(0, |s| s.scene.objects().len())
}

/// Angle in degrees between a ray and the direction to `point`. Vectors are 3 doubles.
///
/// # Safety
/// Pointer arguments must reference three readable doubles; `out_deg` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ib_angular_offset(
    origin: *const f64,
    direction: *const f64,
    point: *const f64,
    out_deg: *mut f64,
) -> IbStatus {
    guard(|| {
        let out = out_arg(out_deg, "out_deg")?;
        let ray = Ray::new(vec_arg(origin, "origin")?, vec_arg(direction, "direction")?).map_err(invalid)?;
        *out = angular_offset(&ray, vec_arg(point, "point")?).map_err(invalid)?;
        Ok(())
    })
}

/// Objects inside the modality's cone as a JSON array of possible objects, best first.
///
/// # Safety
/// `scene` must be a live handle; vectors reference three doubles; `angles` may be NULL;
/// `out_json` must be writable and receives a string to release with `ib_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ib_resolve_ray(
    scene: *const IbScene,
    origin: *const f64,
    direction: *const f64,
    modality_kind: IbModality,
    angles: *const IbAngles,
    out_json: *mut *mut c_char,
) -> IbStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let scene = scene.as_ref().ok_or_else(|| Failure(IbStatus::NullArgument, "scene is NULL".into()))?;
        let ray = Ray::new(vec_arg(origin, "origin")?, vec_arg(direction, "direction")?).map_err(invalid)?;
        let hits = resolve_ray(&ray, modality(modality_kind), &scene.scene, &angles_arg(angles)?);
        *out = into_c_string(serde_json::to_string(&hits).map_err(invalid)?)?;
        Ok(())
    })
}

/// Start a session over `scene` with the baseline resolver. The scene handle may be freed
/// afterwards.
///
/// # Safety
/// `scene` must be a live handle; `angles` may be NULL; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ib_session_new(
    scene: *const IbScene,
    angles: *const IbAngles,
    out: *mut *mut IbSession,
) -> IbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scene = scene.as_ref().ok_or_else(|| Failure(IbStatus::NullArgument, "scene is NULL".into()))?;
        *out = Box::into_raw(Box::new(IbSession {
            scene: scene.scene.clone(),
            angles: angles_arg(angles)?,
            state: SessionState::new(),
            track: PoseTrack::default(),
            candidates: None,
        }));
        Ok(())
    })
}

/// # Safety
/// `session` must come from `ib_session_new` and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn ib_session_free(session: *mut IbSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

unsafe fn session_mut<'a>(p: *mut IbSession) -> Result<&'a mut IbSession, Failure> {
    p.as_mut().ok_or_else(|| Failure(IbStatus::NullArgument, "session is NULL".into()))
}

/// Record the latest head, gaze and finger pose (snapshot JSON). The next press, or a
/// press-free release, captures it.
///
/// # Safety
/// `session` must be a live handle; `snapshot_json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ib_session_pose(session: *mut IbSession, snapshot_json: *const c_char) -> IbStatus {
    guard(|| {
        let s = session_mut(session)?;
        let snapshot: Snapshot = serde_json::from_str(str_arg(snapshot_json, "snapshot_json")?).map_err(invalid)?;
        snapshot.validate()?;
        s.track.record(snapshot);
        Ok(())
    })
}

/// Feed one ring event at monotonic time `t_ms`.
///
/// # Safety
/// `session` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ib_session_event(session: *mut IbSession, event: IbRingEvent, t_ms: u64) -> IbStatus {
    guard(|| {
        let s = session_mut(session)?;
        let kind = match event {
            IbRingEvent::Touch => RingEventKind::Touch,
            IbRingEvent::Press => RingEventKind::Press,
            IbRingEvent::Release => RingEventKind::Release,
        };
        s.state.handle_event(RingEvent::new(kind, t_ms), &mut s.track)?;
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle; `text` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ib_session_set_transcript(session: *mut IbSession, text: *const c_char) -> IbStatus {
    guard(|| {
        let s = session_mut(session)?;
        s.state.attach_transcript(str_arg(text, "text")?)?;
        Ok(())
    })
}

/// Resolve the dispatched command into nine candidates (JSON candidate set) and start
/// presenting them.
///
/// # Safety
/// `session` must be a live handle; `out_json` writable; release the result with
/// `ib_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ib_session_resolve(session: *mut IbSession, out_json: *mut *mut c_char) -> IbStatus {
    guard(|| {
        let out = out_arg(out_json, "out_json")?;
        let s = session_mut(session)?;
        let command = s.state.finalize(&s.scene, &s.angles)?;
        let set = generate_candidates(&command, &s.scene, &BaselineResolver::default())?;
        let json = serde_json::to_string(&set).map_err(invalid)?;
        s.state.mark_presenting()?;
        s.candidates = Some(set);
        *out = into_c_string(json)?;
        Ok(())
    })
}

/// Confirm the candidate at `rank` (1..=9) and return its behavior-tree XML.
///
/// # Safety
/// `session` must be a live handle; `out_xml` writable; release the result with
/// `ib_string_free`.
#[no_mangle]
pub unsafe extern "C" fn ib_session_confirm(session: *mut IbSession, rank: u8, out_xml: *mut *mut c_char) -> IbStatus {
    guard(|| {
        let out = out_arg(out_xml, "out_xml")?;
        let s = session_mut(session)?;
        let Some(set) = s.candidates.as_ref() else {
            return Err(SessionError::Phase { operation: "confirm", phase: s.state.phase() }.into());
        };
        let chosen = set.by_rank(rank).ok_or(DisambiguationError::Rank(rank))?.clone();
        let preview = intenbot::disambiguation::ConfirmedInstruction {
            instruction: chosen,
            user_pose: s.state.snapshots().last().map(|x| x.head.position).unwrap_or_default(),
        };
        let tree = build_plan(&preview, &s.scene, &SkillLibrary::default())?;
        let set = s.candidates.clone().expect("checked above");
        confirm(&mut s.state, &set, rank)?;
        *out = into_c_string(to_xml(&tree))?;
        Ok(())
    })
}

/// Reject the presented candidates. `out_retries_used` (may be NULL) receives the count.
/// The third retry abandons the session and returns `IB_STATUS_RETRY_EXHAUSTED`.
///
/// # Safety
/// `session` must be a live handle; `out_retries_used` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ib_session_retry(session: *mut IbSession, out_retries_used: *mut u8) -> IbStatus {
    guard(|| {
        let s = session_mut(session)?;
        let used = s.state.retry()?;
        s.candidates = None;
        if let Some(out) = out_retries_used.as_mut() {
            *out = used;
        }
        Ok(())
    })
}

/// Current phase; `IB_PHASE_ABANDONED` for NULL.
///
/// # Safety
/// `session` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ib_session_phase(session: *const IbSession) -> IbPhase {
    match session.as_ref().map(|s| s.state.phase()) {
        Some(Phase::Idle) => IbPhase::Idle,
        Some(Phase::Recording) => IbPhase::Recording,
        Some(Phase::Dispatched) => IbPhase::Dispatched,
        Some(Phase::Presenting) => IbPhase::Presenting,
        Some(Phase::Confirmed) => IbPhase::Confirmed,
        Some(Phase::Abandoned) | None => IbPhase::Abandoned,
    }
}
