//! Ring-driven input session.
//!
//! Touch opens voice capture, each press snapshots the gaze and extended-finger rays, and
//! release closes the command. A release without any press captures one snapshot so every
//! command carries gaze input. A session is single-writer; apply events in order.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{SceneGraph, Vec3};
use crate::targeting::{resolve_snapshot, AngleConfig, ModalityKind, PossibleObject, Ray};

pub const MAX_RETRIES: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RingEventKind {
    Touch,
    Press,
    Release,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RingEvent {
    pub kind: RingEventKind,
    /// Monotonic milliseconds.
    pub t: u64,
}

impl RingEvent {
    pub fn new(kind: RingEventKind, t: u64) -> Self {
        RingEvent { kind, t }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HeadPose {
    pub position: Vec3,
    #[serde(default)]
    pub facing: Vec3,
}

/// Rays captured at one press.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    #[serde(default)]
    pub t: u64,
    pub gaze: Ray,
    /// Extended fingers only.
    #[serde(default)]
    pub fingers: BTreeMap<ModalityKind, Ray>,
    #[serde(default)]
    pub head: HeadPose,
}

impl Snapshot {
    pub fn gaze_only(t: u64, gaze: Ray, head: HeadPose) -> Self {
        Snapshot { t, gaze, fingers: BTreeMap::new(), head }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if self.fingers.contains_key(&ModalityKind::Gaze) {
            return Err(SessionError::InvalidSnapshot("`gaze` is not a finger".into()));
        }
        if !self.head.position.is_finite() || !self.head.facing.is_finite() {
            return Err(SessionError::InvalidSnapshot("non-finite head pose".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Recording,
    Dispatched,
    Presenting,
    Confirmed,
    Abandoned,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("ring event {event:?} is not allowed in phase {phase:?}")]
    Protocol { phase: Phase, event: RingEventKind },
    #[error("event at t={t} precedes previous event at t={last}")]
    NonMonotonic { last: u64, t: u64 },
    #[error("{operation} is not allowed in phase {phase:?}")]
    Phase { operation: &'static str, phase: Phase },
    #[error("no snapshot available at t={0}")]
    NoSnapshot(u64),
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("scene has no objects")]
    EmptyScene,
    #[error("retries exhausted after {MAX_RETRIES} attempts")]
    RetryExhausted,
    #[error("event log line {line}: {message}")]
    Log { line: usize, message: String },
}

/// Supplies the rays at a press (or at a press-free release).
pub trait SnapshotSource {
    fn capture(&mut self, t: u64) -> Option<Snapshot>;
}

impl<F: FnMut(u64) -> Option<Snapshot>> SnapshotSource for F {
    fn capture(&mut self, t: u64) -> Option<Snapshot> {
        self(t)
    }
}

/// Latest-pose capture: each press takes the most recently recorded snapshot.
#[derive(Debug, Default, Clone)]
pub struct PoseTrack {
    current: Option<Snapshot>,
}

impl PoseTrack {
    pub fn record(&mut self, snapshot: Snapshot) {
        self.current = Some(snapshot);
    }

    pub fn current(&self) -> Option<&Snapshot> {
        self.current.as_ref()
    }
}

impl SnapshotSource for PoseTrack {
    fn capture(&mut self, t: u64) -> Option<Snapshot> {
        self.current.clone().map(|mut s| {
            s.t = t;
            s
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    phase: Phase,
    snapshots: Vec<Snapshot>,
    transcript: Option<String>,
    retries_used: u8,
    touched_at: Option<u64>,
    released_at: Option<u64>,
    last_t: Option<u64>,
}

impl Default for SessionState {
    fn default() -> Self {
        SessionState::new()
    }
}

impl SessionState {
    pub fn new() -> Self {
        SessionState {
            phase: Phase::Idle,
            snapshots: Vec::new(),
            transcript: None,
            retries_used: 0,
            touched_at: None,
            released_at: None,
            last_t: None,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn transcript(&self) -> Option<&str> {
        self.transcript.as_deref()
    }

    pub fn retries_used(&self) -> u8 {
        self.retries_used
    }

    pub fn touched_at(&self) -> Option<u64> {
        self.touched_at
    }

    pub fn released_at(&self) -> Option<u64> {
        self.released_at
    }

    /// Apply one ring event. On error the state is left unchanged.
    pub fn handle_event(
        &mut self,
        event: RingEvent,
        source: &mut dyn SnapshotSource,
    ) -> Result<Phase, SessionError> {
        if let Some(last) = self.last_t {
            if event.t < last {
                return Err(SessionError::NonMonotonic { last, t: event.t });
            }
        }
        let capture = |source: &mut dyn SnapshotSource| -> Result<Snapshot, SessionError> {
            let mut snap = source.capture(event.t).ok_or(SessionError::NoSnapshot(event.t))?;
            snap.t = event.t;
            snap.validate()?;
            Ok(snap)
        };
        match (self.phase, event.kind) {
            (Phase::Idle, RingEventKind::Touch) => {
                self.phase = Phase::Recording;
                self.snapshots.clear();
                self.transcript = None;
                self.touched_at = Some(event.t);
                self.released_at = None;
            }
            (Phase::Recording, RingEventKind::Press) => {
                let snap = capture(source)?;
                self.snapshots.push(snap);
            }
            (Phase::Recording, RingEventKind::Release) => {
                if self.snapshots.is_empty() {
                    let snap = capture(source)?;
                    self.snapshots.push(snap);
                }
                self.phase = Phase::Dispatched;
                self.released_at = Some(event.t);
            }
            (phase, kind) => return Err(SessionError::Protocol { phase, event: kind }),
        }
        self.last_t = Some(event.t);
        Ok(self.phase)
    }

    /// Set (or overwrite) the transcript for the current command.
    pub fn attach_transcript(&mut self, text: impl Into<String>) -> Result<(), SessionError> {
        match self.phase {
            Phase::Recording | Phase::Dispatched => {
                self.transcript = Some(text.into());
                Ok(())
            }
            phase => Err(SessionError::Phase { operation: "attach_transcript", phase }),
        }
    }

    /// Resolve every snapshot against the scene and assemble the command.
    pub fn finalize(&self, scene: &SceneGraph, cfg: &AngleConfig) -> Result<MultimodalCommand, SessionError> {
        if self.phase != Phase::Dispatched {
            return Err(SessionError::Phase { operation: "finalize", phase: self.phase });
        }
        if scene.objects().is_empty() {
            return Err(SessionError::EmptyScene);
        }
        let possible_objects = self.snapshots.iter().map(|s| resolve_snapshot(s, scene, cfg)).collect();
        let user_pose = self.snapshots.last().map(|s| s.head.position).unwrap_or_default();
        Ok(MultimodalCommand {
            transcript: self.transcript.clone().unwrap_or_default(),
            snapshots: self.snapshots.clone(),
            possible_objects,
            user_pose,
            issued_at: self.released_at.unwrap_or_default(),
        })
    }

    /// Candidates arrived: Dispatched -> Presenting.
    pub fn mark_presenting(&mut self) -> Result<(), SessionError> {
        self.transition(Phase::Dispatched, Phase::Presenting, "present")
    }

    pub(crate) fn mark_confirmed(&mut self) -> Result<(), SessionError> {
        self.transition(Phase::Presenting, Phase::Confirmed, "confirm")
    }

    pub(crate) fn ensure_phase(&self, expected: Phase, operation: &'static str) -> Result<(), SessionError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(SessionError::Phase { operation, phase: self.phase })
        }
    }

    fn transition(&mut self, from: Phase, to: Phase, operation: &'static str) -> Result<(), SessionError> {
        self.ensure_phase(from, operation)?;
        self.phase = to;
        Ok(())
    }

    /// Discard the presented candidates and start over, keeping the scene context.
    ///
    /// The third attempt to retry abandons the session.
    pub fn retry(&mut self) -> Result<u8, SessionError> {
        self.ensure_phase(Phase::Presenting, "retry")?;
        if self.retries_used >= MAX_RETRIES {
            self.phase = Phase::Abandoned;
            return Err(SessionError::RetryExhausted);
        }
        self.retries_used += 1;
        self.phase = Phase::Idle;
        self.snapshots.clear();
        self.transcript = None;
        self.touched_at = None;
        self.released_at = None;
        Ok(self.retries_used)
    }

    pub fn abandon(&mut self) {
        if self.phase != Phase::Confirmed {
            self.phase = Phase::Abandoned;
        }
    }
}

/// One dispatched command: transcript plus ordered snapshots and their possible objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalCommand {
    pub transcript: String,
    pub snapshots: Vec<Snapshot>,
    pub possible_objects: Vec<Vec<PossibleObject>>,
    pub user_pose: Vec3,
    pub issued_at: u64,
}

impl MultimodalCommand {
    /// Gaze/pointing only, no spoken words.
    pub fn is_non_voice(&self) -> bool {
        self.transcript.trim().is_empty()
    }
}

/// One line of an event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Touch { t: u64 },
    Press { t: u64 },
    Release { t: u64 },
    Snapshot(Snapshot),
    Transcript { text: String },
}

impl LogRecord {
    pub fn ring_event(&self) -> Option<RingEvent> {
        match *self {
            LogRecord::Touch { t } => Some(RingEvent::new(RingEventKind::Touch, t)),
            LogRecord::Press { t } => Some(RingEvent::new(RingEventKind::Press, t)),
            LogRecord::Release { t } => Some(RingEvent::new(RingEventKind::Release, t)),
            _ => None,
        }
    }
}

/// Parse a JSONL event log; blank lines are skipped.
pub fn parse_event_log(text: &str) -> Result<Vec<LogRecord>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| SessionError::Log { line: i + 1, message: e.to_string() })
        })
        .collect()
}

/// Feed a record sequence through a session, using snapshot records as the pose track.
pub fn apply_log(session: &mut SessionState, records: &[LogRecord]) -> Result<(), SessionError> {
    let mut track = PoseTrack::default();
    for record in records {
        match record {
            LogRecord::Snapshot(s) => track.record(s.clone()),
            LogRecord::Transcript { text } => session.attach_transcript(text.clone())?,
            other => {
                let event = other.ring_event().expect("ring record");
                session.handle_event(event, &mut track)?;
            }
        }
    }
    Ok(())
}
