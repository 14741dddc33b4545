//! Reference model of the ring session and a checker that runs the engine beside it.

use rand::Rng;

use intenbot::session::{Phase, PoseTrack, RingEvent, RingEventKind, SessionError, SessionState, MAX_RETRIES};

use super::{gaze_at, v};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Op {
    /// Record a pose so later presses can capture it.
    Pose,
    Touch(i64),
    Press(i64),
    Release(i64),
    Transcript,
    Present,
    Retry,
}

pub fn random_op<R: Rng>(rng: &mut R) -> Op {
    // Mostly forward time steps, occasionally backwards.
    let dt = if rng.gen_bool(0.08) { -rng.gen_range(1..50) } else { rng.gen_range(0..200) };
    match rng.gen_range(0..100) {
        0..=9 => Op::Pose,
        10..=29 => Op::Touch(dt),
        30..=54 => Op::Press(dt),
        55..=74 => Op::Release(dt),
        75..=79 => Op::Transcript,
        80..=89 => Op::Present,
        _ => Op::Retry,
    }
}

pub fn random_ops<R: Rng>(rng: &mut R, max_len: usize) -> Vec<Op> {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| random_op(rng)).collect()
}

#[derive(Debug, Default)]
struct Model {
    phase: Option<Phase>,
    presses: usize,
    retries: u8,
    last_t: Option<u64>,
    has_pose: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Ok,
    Protocol,
    NonMonotonic,
    Phase,
    NoSnapshot,
    RetryExhausted,
}

fn classify(result: Result<(), SessionError>) -> Outcome {
    match result {
        Ok(()) => Outcome::Ok,
        Err(SessionError::Protocol { .. }) => Outcome::Protocol,
        Err(SessionError::NonMonotonic { .. }) => Outcome::NonMonotonic,
        Err(SessionError::Phase { .. }) => Outcome::Phase,
        Err(SessionError::NoSnapshot(_)) => Outcome::NoSnapshot,
        Err(SessionError::RetryExhausted) => Outcome::RetryExhausted,
        Err(other) => panic!("unexpected error {other}"),
    }
}

/// Applies `ops` to a fresh session and to the model. Returns the first divergence or law
/// violation.
pub fn check_sequence(ops: &[Op]) -> Result<(), String> {
    let mut state = SessionState::new();
    let mut track = PoseTrack::default();
    let mut model = Model { phase: Some(Phase::Idle), ..Model::default() };
    let mut clock: u64 = 0;
    let head = v(0.0, 0.0, 1.6);

    for (i, op) in ops.iter().enumerate() {
        let before = state.clone();
        let phase = model.phase.expect("model phase");
        let ring = |dt: i64| (clock as i64 + dt).max(0) as u64;
        let (expected, result, t) = match *op {
            Op::Pose => {
                track.record(gaze_at(head, v(1.0, i as f64, 1.0)));
                model.has_pose = true;
                continue;
            }
            Op::Touch(dt) | Op::Press(dt) | Op::Release(dt) => {
                let t = ring(dt);
                let kind = match op {
                    Op::Touch(_) => RingEventKind::Touch,
                    Op::Press(_) => RingEventKind::Press,
                    _ => RingEventKind::Release,
                };
                let expected = if model.last_t.is_some_and(|l| t < l) {
                    Outcome::NonMonotonic
                } else {
                    match (phase, kind) {
                        (Phase::Idle, RingEventKind::Touch) => Outcome::Ok,
                        (Phase::Recording, RingEventKind::Press) if !model.has_pose => Outcome::NoSnapshot,
                        (Phase::Recording, RingEventKind::Release) if model.presses == 0 && !model.has_pose => {
                            Outcome::NoSnapshot
                        }
                        (Phase::Recording, RingEventKind::Press | RingEventKind::Release) => Outcome::Ok,
                        _ => Outcome::Protocol,
                    }
                };
                let result = state.handle_event(RingEvent::new(kind, t), &mut track).map(drop);
                (expected, result, Some((kind, t)))
            }
            Op::Transcript => {
                let expected = if matches!(phase, Phase::Recording | Phase::Dispatched) { Outcome::Ok } else { Outcome::Phase };
                (expected, state.attach_transcript(format!("utterance {i}")), None)
            }
            Op::Present => {
                let expected = if phase == Phase::Dispatched { Outcome::Ok } else { Outcome::Phase };
                (expected, state.mark_presenting(), None)
            }
            Op::Retry => {
                let expected = match phase {
                    Phase::Presenting if model.retries >= MAX_RETRIES => Outcome::RetryExhausted,
                    Phase::Presenting => Outcome::Ok,
                    _ => Outcome::Phase,
                };
                (expected, state.retry().map(drop), None)
            }
        };
        let got = classify(result);
        if got != expected {
            return Err(format!("step {i} {op:?} in {phase:?}: expected {expected:?}, got {got:?}"));
        }

        if got == Outcome::Ok {
            match (*op, t) {
                (Op::Touch(_), Some((_, t))) => {
                    model.phase = Some(Phase::Recording);
                    model.presses = 0;
                    model.last_t = Some(t);
                    clock = t;
                }
                (Op::Press(_), Some((_, t))) => {
                    model.presses += 1;
                    model.last_t = Some(t);
                    clock = t;
                }
                (Op::Release(_), Some((_, t))) => {
                    model.phase = Some(Phase::Dispatched);
                    model.last_t = Some(t);
                    clock = t;
                    check_dispatch_laws(&state, model.presses).map_err(|e| format!("step {i}: {e}"))?;
                }
                (Op::Present, _) => model.phase = Some(Phase::Presenting),
                (Op::Retry, _) => {
                    model.retries += 1;
                    model.phase = Some(Phase::Idle);
                    if !state.snapshots().is_empty() || state.transcript().is_some() {
                        return Err(format!("step {i}: retry kept command state"));
                    }
                }
                _ => {}
            }
        } else if got == Outcome::RetryExhausted {
            model.phase = Some(Phase::Abandoned);
        } else if state != before {
            return Err(format!("step {i} {op:?}: rejected event mutated the session"));
        }
        if Some(state.phase()) != model.phase {
            return Err(format!("step {i}: phase {:?}, model {:?}", state.phase(), model.phase));
        }
        if state.retries_used() != model.retries {
            return Err(format!("step {i}: retries {} vs model {}", state.retries_used(), model.retries));
        }
    }
    Ok(())
}

/// Snapshot count equals press count (one for a press-free hold) and every snapshot lies in
/// the touch..release window in order.
fn check_dispatch_laws(state: &SessionState, presses: usize) -> Result<(), String> {
    let expected = presses.max(1);
    if state.snapshots().len() != expected {
        return Err(format!("{} snapshots for {presses} presses", state.snapshots().len()));
    }
    let (Some(touch), Some(release)) = (state.touched_at(), state.released_at()) else {
        return Err("dispatched without touch/release times".into());
    };
    let mut prev = touch;
    for s in state.snapshots() {
        if s.t < prev || s.t > release {
            return Err(format!("snapshot at {} outside [{touch}, {release}] or out of order", s.t));
        }
        prev = s.t;
    }
    Ok(())
}
