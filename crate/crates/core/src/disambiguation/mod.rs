//! Candidate generation: from a multimodal command to nine ranked instructions, and the
//! paging / confirm / retry loop around them.

mod baseline;
pub mod language;
mod prompt;
mod resolver;
#[cfg(test)]
pub(crate) mod testkit;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::scene::{SceneGraph, Vec3};
use crate::session::{Phase, SessionError, SessionState};

pub use baseline::{baseline_drafts, baseline_rank, baseline_rank_with, BaselineOptions};
pub use language::{parse_utterance, Lexicon, Mention, ParsedUtterance};
pub use prompt::{assemble_prompt, PromptBundle, PRIORITY_POLICY, PROMPT_TEMPLATE_VERSION};
pub use resolver::{
    generate_candidates, parse_remote_reply, BaselineResolver, MockResolver, RawCandidate, RemoteResolver,
    Resolver, ResolverMode, DEFAULT_RESOLVER_TIMEOUT_MS,
};

/// Candidates per set, and per displayed page.
pub const CANDIDATE_COUNT: usize = 9;
pub const PAGE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskType {
    Fetch,
    Move,
    CheckPresence,
    CheckState,
    GoTo,
    Dock,
}

impl TaskType {
    pub const ALL: [TaskType; 6] =
        [TaskType::Fetch, TaskType::Move, TaskType::CheckPresence, TaskType::CheckState, TaskType::GoTo, TaskType::Dock];

    /// Lenient name parsing ("check_presence", "Check Presence", "CHECKPRESENCE").
    pub fn parse_loose(name: &str) -> Option<TaskType> {
        let key: String = name.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_ascii_lowercase();
        Some(match key.as_str() {
            "fetch" | "bring" => TaskType::Fetch,
            "move" => TaskType::Move,
            "checkpresence" | "check" => TaskType::CheckPresence,
            "checkstate" => TaskType::CheckState,
            "goto" | "go" | "return" => TaskType::GoTo,
            "dock" => TaskType::Dock,
            _ => return None,
        })
    }
}

/// Where a task ends: the user, or an object or room id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Destination {
    User,
    Place(String),
}

pub const USER_DESTINATION: &str = crate::scene::RESERVED_USER_ID;

impl fmt::Display for Destination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Destination::User => f.write_str(USER_DESTINATION),
            Destination::Place(id) => f.write_str(id),
        }
    }
}

impl From<&str> for Destination {
    fn from(s: &str) -> Self {
        if s == USER_DESTINATION {
            Destination::User
        } else {
            Destination::Place(s.to_string())
        }
    }
}

impl Serialize for Destination {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Destination {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Destination::from(s.as_str()))
    }
}

/// Identity of an instruction for top-9 matching: task, target set, destination.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct InstructionKey {
    pub task: TaskType,
    pub targets: BTreeSet<String>,
    pub destination: Option<Destination>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateInstruction {
    pub rank: u8,
    pub task: TaskType,
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<Destination>,
    /// State attribute probed by CheckState, optionally `name=expected`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<String>,
    pub display_text: String,
    pub explanation: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub padding: bool,
}

impl CandidateInstruction {
    pub fn key(&self) -> InstructionKey {
        InstructionKey {
            task: self.task,
            targets: self.targets.iter().cloned().collect(),
            destination: self.destination.clone(),
        }
    }

    pub fn equivalent(&self, other: &CandidateInstruction) -> bool {
        self.key() == other.key()
    }

    /// Structural and referential checks against a scene.
    pub fn validate(&self, scene: &SceneGraph) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for t in &self.targets {
            if scene.object(t).is_none() {
                return Err(format!("unknown target {t:?}"));
            }
            if !seen.insert(t) {
                return Err(format!("duplicate target {t:?}"));
            }
        }
        if let Some(Destination::Place(p)) = &self.destination {
            if !scene.contains_id(p) {
                return Err(format!("unknown destination {p:?}"));
            }
            if self.targets.contains(p) {
                return Err(format!("destination {p:?} is also a target"));
            }
        }
        match self.task {
            TaskType::Fetch | TaskType::CheckPresence => {
                if self.targets.is_empty() {
                    return Err(format!("{:?} needs at least one target", self.task));
                }
                if self.destination.is_some() {
                    return Err(format!("{:?} takes no destination", self.task));
                }
            }
            TaskType::CheckState => {
                if self.targets.len() != 1 {
                    return Err("CheckState needs exactly one target".into());
                }
                if self.destination.is_some() {
                    return Err("CheckState takes no destination".into());
                }
            }
            TaskType::Move => {
                if self.targets.is_empty() {
                    return Err("Move needs at least one target".into());
                }
                match &self.destination {
                    Some(Destination::Place(_)) => {}
                    _ => return Err("Move needs an object or room destination".into()),
                }
            }
            TaskType::GoTo => {
                if !self.targets.is_empty() {
                    return Err("GoTo takes no targets".into());
                }
                if self.destination.is_none() {
                    return Err("GoTo needs a destination".into());
                }
            }
            TaskType::Dock => {
                if self.targets.len() > 1 || self.destination.is_some() {
                    return Err("Dock takes at most one dock target and no destination".into());
                }
            }
        }
        Ok(())
    }
}

/// Exactly nine ranked, pairwise non-equivalent instructions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub candidates: Vec<CandidateInstruction>,
    pub resolver_id: String,
    pub latency_ms: u64,
    /// Entries were dropped or padded to satisfy the set contract.
    #[serde(default)]
    pub repaired: bool,
}

impl CandidateSet {
    pub fn validate(&self, scene: &SceneGraph) -> Result<(), String> {
        if self.candidates.len() != CANDIDATE_COUNT {
            return Err(format!("expected {CANDIDATE_COUNT} candidates, got {}", self.candidates.len()));
        }
        let mut keys = BTreeSet::new();
        for (i, c) in self.candidates.iter().enumerate() {
            if usize::from(c.rank) != i + 1 {
                return Err(format!("candidate {i} has rank {}", c.rank));
            }
            c.validate(scene).map_err(|e| format!("rank {}: {e}", c.rank))?;
            if !keys.insert(c.key()) {
                return Err(format!("rank {} duplicates an earlier instruction", c.rank));
            }
        }
        Ok(())
    }

    pub fn by_rank(&self, rank: u8) -> Option<&CandidateInstruction> {
        self.candidates.iter().find(|c| c.rank == rank)
    }

    /// Lowest rank equivalent to `key`.
    pub fn match_rank(&self, key: &InstructionKey) -> Option<u8> {
        self.candidates.iter().find(|c| &c.key() == key).map(|c| c.rank)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfirmedInstruction {
    pub instruction: CandidateInstruction,
    pub user_pose: Vec3,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DisambiguationError {
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("rank {0} is outside 1..=9")]
    Rank(u8),
    #[error("page index {0} is outside 0..=2")]
    Index(usize),
    #[error("scene supports only {available} distinct instructions, need {CANDIDATE_COUNT}")]
    SceneTooSmall { available: usize },
    #[error("resolver did not answer within {budget_ms} ms: {detail}")]
    ResolverTimeout { budget_ms: u64, detail: String },
    #[error("resolver protocol error: {0}")]
    ResolverProtocol(String),
}

/// Three candidates for page `index` (0, 1 or 2).
pub fn page(set: &CandidateSet, index: usize) -> Result<&[CandidateInstruction], DisambiguationError> {
    let pages = CANDIDATE_COUNT / PAGE_SIZE;
    if index >= pages || set.candidates.len() < (index + 1) * PAGE_SIZE {
        return Err(DisambiguationError::Index(index));
    }
    Ok(&set.candidates[index * PAGE_SIZE..(index + 1) * PAGE_SIZE])
}

/// Confirm the candidate at `rank`; the session moves to Confirmed.
pub fn confirm(
    state: &mut SessionState,
    set: &CandidateSet,
    rank: u8,
) -> Result<ConfirmedInstruction, DisambiguationError> {
    state.ensure_phase(Phase::Presenting, "confirm")?;
    let instruction = set.by_rank(rank).filter(|_| (1..=9).contains(&rank)).ok_or(DisambiguationError::Rank(rank))?;
    state.mark_confirmed()?;
    let user_pose = state.snapshots().last().map(|s| s.head.position).unwrap_or_default();
    Ok(ConfirmedInstruction { instruction: instruction.clone(), user_pose })
}

/// Reject the presented set and return to Idle (at most twice).
pub fn retry(state: &mut SessionState) -> Result<u8, DisambiguationError> {
    Ok(state.retry()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{HeadPose, RingEvent, RingEventKind, Snapshot};
    use crate::targeting::Ray;

    fn instr(rank: u8, task: TaskType, targets: &[&str], dest: Option<&str>) -> CandidateInstruction {
        CandidateInstruction {
            rank,
            task,
            targets: targets.iter().map(|s| s.to_string()).collect(),
            destination: dest.map(Destination::from),
            attribute: None,
            display_text: String::new(),
            explanation: String::new(),
            padding: false,
        }
    }

    fn nine() -> CandidateSet {
        CandidateSet {
            candidates: (1..=9).map(|r| instr(r, TaskType::Fetch, &[&format!("o{r}")], None)).collect(),
            resolver_id: "test".into(),
            latency_ms: 0,
            repaired: false,
        }
    }

    fn presenting() -> SessionState {
        let mut s = SessionState::new();
        let mut src = |t| {
            Some(Snapshot::gaze_only(t, Ray::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0)).unwrap(), HeadPose::default()))
        };
        s.handle_event(RingEvent::new(RingEventKind::Touch, 0), &mut src).unwrap();
        s.handle_event(RingEvent::new(RingEventKind::Release, 10), &mut src).unwrap();
        s.mark_presenting().unwrap();
        s
    }

    #[test]
    fn pages_are_rank_slices() {
        let set = nine();
        let ranks = |i| page(&set, i).unwrap().iter().map(|c| c.rank).collect::<Vec<_>>();
        assert_eq!(ranks(0), vec![1, 2, 3]);
        assert_eq!(ranks(1), vec![4, 5, 6]);
        assert_eq!(ranks(2), vec![7, 8, 9]);
        assert_eq!(page(&set, 3), Err(DisambiguationError::Index(3)));
    }

    #[test]
    fn confirm_rank_one() {
        let mut s = presenting();
        let confirmed = confirm(&mut s, &nine(), 1).unwrap();
        assert_eq!(confirmed.instruction.targets, vec!["o1"]);
        assert_eq!(s.phase(), Phase::Confirmed);
    }

    #[test]
    fn confirm_rejects_bad_rank_and_second_confirm() {
        let mut s = presenting();
        assert_eq!(confirm(&mut s, &nine(), 10), Err(DisambiguationError::Rank(10)));
        assert_eq!(confirm(&mut s, &nine(), 0), Err(DisambiguationError::Rank(0)));
        assert_eq!(s.phase(), Phase::Presenting);
        confirm(&mut s, &nine(), 2).unwrap();
        assert!(matches!(confirm(&mut s, &nine(), 2), Err(DisambiguationError::Session(SessionError::Phase { .. }))));
    }

    #[test]
    fn retry_counts_and_exhausts() {
        let mut s = presenting();
        assert_eq!(retry(&mut s), Ok(1));
        let mut s = presenting();
        confirm(&mut s, &nine(), 1).unwrap();
        assert!(matches!(retry(&mut s), Err(DisambiguationError::Session(SessionError::Phase { .. }))));
    }

    #[test]
    fn equivalence_ignores_order_and_text() {
        let mut a = instr(1, TaskType::Fetch, &["x", "y"], None);
        let b = instr(4, TaskType::Fetch, &["y", "x"], None);
        a.display_text = "different".into();
        assert!(a.equivalent(&b));
        assert!(!a.equivalent(&instr(1, TaskType::CheckPresence, &["x", "y"], None)));
        assert!(!instr(1, TaskType::GoTo, &[], Some("user")).equivalent(&instr(1, TaskType::GoTo, &[], Some("door"))));
    }

    #[test]
    fn task_names_parse_loosely() {
        assert_eq!(TaskType::parse_loose("check_presence"), Some(TaskType::CheckPresence));
        assert_eq!(TaskType::parse_loose("Go To"), Some(TaskType::GoTo));
        assert_eq!(TaskType::parse_loose("teleport"), None);
    }

    #[test]
    fn destination_serializes_as_string() {
        let i = instr(1, TaskType::GoTo, &[], Some("user"));
        let json = serde_json::to_value(&i).unwrap();
        assert_eq!(json["destination"], "user");
        let back: CandidateInstruction = serde_json::from_value(json).unwrap();
        assert_eq!(back.destination, Some(Destination::User));
    }
}
