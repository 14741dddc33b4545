//! Scenario replay, top-9 accuracy, error taxonomy and the angle-range sweep.

mod classify;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use crate::disambiguation::{
    generate_candidates, parse_utterance, CandidateInstruction, CandidateSet, Destination, InstructionKey, Lexicon,
    Resolver, TaskType,
};
use crate::scene::{load_scene, SceneGraph, DEFAULT_FUZZY_THRESHOLD};
use crate::session::{apply_log, LogRecord, MultimodalCommand, SessionState};
use crate::targeting::AngleConfig;

pub use classify::{classify_error, ErrorClass, TrialContext};
pub use sweep::{sweep, GridPoint, SweepPhase, SweepResult, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    #[default]
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    #[default]
    Same,
    Hidden,
    OtherRoom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occupation {
    #[default]
    None,
    Stroop,
    Conversation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tags {
    #[serde(default)]
    pub horizon: Horizon,
    #[serde(default)]
    pub visibility: Visibility,
    #[serde(default)]
    pub occupation: Occupation,
}

impl Tags {
    fn labels(&self) -> [String; 3] {
        [
            format!("horizon={}", tag_name(&self.horizon)),
            format!("visibility={}", tag_name(&self.visibility)),
            format!("occupation={}", tag_name(&self.occupation)),
        ]
    }
}

/// The serialized (snake_case) name of a unit enum value.
fn tag_name<T: Serialize>(value: &T) -> String {
    serde_json::to_value(value).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub task: TaskType,
    pub targets: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destination: Option<Destination>,
}

impl GroundTruth {
    pub fn key(&self) -> InstructionKey {
        InstructionKey { task: self.task, targets: self.targets.clone(), destination: self.destination.clone() }
    }

    /// Target ids plus a place destination.
    pub fn referenced_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.targets.iter().map(String::as_str).collect();
        if let Some(Destination::Place(p)) = &self.destination {
            ids.push(p);
        }
        ids
    }
}

/// A later attempt after the user pressed retry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    #[serde(default)]
    pub transcript: String,
    pub events: Vec<LogRecord>,
}

/// What a fixture author expects a trial to produce.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Expectation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub match_rank: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_class: Option<ErrorClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    /// Scene file, relative to the corpus file.
    pub scene_ref: String,
    #[serde(default)]
    pub transcript: String,
    pub events: Vec<LogRecord>,
    pub ground_truth: GroundTruth,
    #[serde(default)]
    pub tags: Tags,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retries: Vec<Attempt>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
}

impl Scenario {
    pub fn validate(&self, scene: &SceneGraph) -> Result<(), String> {
        if self.retries.len() > usize::from(crate::session::MAX_RETRIES) {
            return Err(format!("{}: at most {} retries", self.id, crate::session::MAX_RETRIES));
        }
        for id in self.ground_truth.referenced_ids() {
            if !scene.contains_id(id) {
                return Err(format!("{}: ground truth id {id:?} not in scene", self.id));
            }
        }
        Ok(())
    }

    fn attempts(&self) -> impl Iterator<Item = (&str, &[LogRecord])> {
        std::iter::once((self.transcript.as_str(), self.events.as_slice()))
            .chain(self.retries.iter().map(|a| (a.transcript.as_str(), a.events.as_slice())))
    }
}

/// Scenes by `scene_ref`.
#[derive(Debug, Clone, Default)]
pub struct SceneSet {
    scenes: BTreeMap<String, Arc<SceneGraph>>,
}

impl SceneSet {
    pub fn insert(&mut self, scene_ref: impl Into<String>, scene: SceneGraph) {
        self.scenes.insert(scene_ref.into(), Arc::new(scene));
    }

    pub fn get(&self, scene_ref: &str) -> Option<&Arc<SceneGraph>> {
        self.scenes.get(scene_ref)
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

pub fn parse_corpus(text: &str) -> anyhow::Result<Vec<Scenario>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("corpus line {}", i + 1)))
        .collect()
}

/// Read a JSONL corpus and every scene it references, then validate the scenarios.
pub fn load_corpus(path: &Path) -> anyhow::Result<(Vec<Scenario>, SceneSet)> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let scenarios = parse_corpus(&text).with_context(|| path.display().to_string())?;
    if scenarios.is_empty() {
        bail!("{} holds no scenarios", path.display());
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let scenes = load_scenes(&scenarios, &base)?;
    Ok((scenarios, scenes))
}

pub fn load_scenes(scenarios: &[Scenario], base: &Path) -> anyhow::Result<SceneSet> {
    let mut scenes = SceneSet::default();
    for s in scenarios {
        if scenes.get(&s.scene_ref).is_none() {
            let path = resolve_ref(base, &s.scene_ref);
            let bytes = std::fs::read(&path).with_context(|| format!("scene {}", path.display()))?;
            let scene = load_scene(&bytes).with_context(|| format!("scene {}", path.display()))?;
            scenes.insert(s.scene_ref.clone(), scene);
        }
        let scene = scenes.get(&s.scene_ref).expect("inserted above");
        s.validate(scene).map_err(anyhow::Error::msg)?;
    }
    Ok(scenes)
}

fn resolve_ref(base: &Path, scene_ref: &str) -> PathBuf {
    let candidate = base.join(scene_ref);
    if candidate.exists() {
        candidate
    } else {
        PathBuf::from(scene_ref)
    }
}

/// Evaluation settings shared by every trial.
pub struct EvalContext<'a> {
    pub angles: AngleConfig,
    pub resolver: &'a dyn Resolver,
    pub lexicon: Lexicon,
}

impl<'a> EvalContext<'a> {
    pub fn new(angles: AngleConfig, resolver: &'a dyn Resolver) -> Self {
        EvalContext { angles, resolver, lexicon: Lexicon::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Timings {
    /// Touch to release on the event-log clock, summed over attempts.
    pub hold_ms: u64,
    /// Wall-clock resolver time, summed over attempts.
    pub resolver_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub scenario_id: String,
    pub match_rank: Option<u8>,
    pub attempts: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_class: Option<ErrorClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_detail: Option<String>,
    pub timings: Timings,
    pub word_count: usize,
    pub tags: Tags,
    /// Rank-1 candidate of the final attempt.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<CandidateInstruction>,
}

impl TrialResult {
    pub fn matched(&self) -> bool {
        self.match_rank.is_some()
    }

    /// Differences from the scenario's `expect` block, if any.
    pub fn expectation_mismatch(&self, scenario: &Scenario) -> Option<String> {
        let expect = scenario.expect.as_ref()?;
        if expect.match_rank.is_some() && expect.match_rank != self.match_rank {
            return Some(format!("{}: expected rank {:?}, got {:?}", scenario.id, expect.match_rank, self.match_rank));
        }
        if expect.error_class != self.error_class {
            return Some(format!("{}: expected class {:?}, got {:?}", scenario.id, expect.error_class, self.error_class));
        }
        None
    }
}

struct AttemptOutcome {
    command: Option<MultimodalCommand>,
    candidates: Option<CandidateSet>,
    failure: Option<String>,
    hold_ms: u64,
    resolver_ms: u64,
}

fn run_attempt(transcript: &str, events: &[LogRecord], scene: &SceneGraph, ctx: &EvalContext<'_>) -> AttemptOutcome {
    let mut outcome = AttemptOutcome { command: None, candidates: None, failure: None, hold_ms: 0, resolver_ms: 0 };
    let mut state = SessionState::new();
    let prepared = apply_log(&mut state, events)
        .and_then(|()| if transcript.trim().is_empty() { Ok(()) } else { state.attach_transcript(transcript) })
        .and_then(|()| state.finalize(scene, &ctx.angles));
    if let (Some(a), Some(b)) = (state.touched_at(), state.released_at()) {
        outcome.hold_ms = b.saturating_sub(a);
    }
    let command = match prepared {
        Ok(c) => c,
        Err(e) => {
            outcome.failure = Some(e.to_string());
            return outcome;
        }
    };
    let started = Instant::now();
    match generate_candidates(&command, scene, ctx.resolver) {
        Ok(set) => outcome.candidates = Some(set),
        Err(e) => outcome.failure = Some(e.to_string()),
    }
    outcome.resolver_ms = started.elapsed().as_millis() as u64;
    outcome.command = Some(command);
    outcome
}

/// Run every attempt of a scenario until one yields a set containing the ground truth.
pub fn replay(scenario: &Scenario, scene: &SceneGraph, ctx: &EvalContext<'_>) -> TrialResult {
    let key = scenario.ground_truth.key();
    let mut timings = Timings::default();
    let mut attempts = 0u8;
    let mut last = None;
    let mut last_transcript = "";
    for (transcript, events) in scenario.attempts() {
        attempts += 1;
        let outcome = run_attempt(transcript, events, scene, ctx);
        timings.hold_ms += outcome.hold_ms;
        timings.resolver_ms += outcome.resolver_ms;
        let rank = outcome.candidates.as_ref().and_then(|set| set.match_rank(&key));
        last_transcript = transcript;
        if let Some(rank) = rank {
            return TrialResult {
                scenario_id: scenario.id.clone(),
                match_rank: Some(rank),
                attempts,
                error_class: None,
                error_detail: None,
                timings,
                word_count: crate::disambiguation::language::word_count(transcript),
                tags: scenario.tags,
                top: outcome.candidates.and_then(|s| s.candidates.into_iter().next()),
            };
        }
        last = Some(outcome);
    }
    let outcome = last.expect("at least one attempt");
    let parsed = parse_utterance(last_transcript, scene, &ctx.lexicon, DEFAULT_FUZZY_THRESHOLD);
    let trial = TrialContext {
        ground_truth: &scenario.ground_truth,
        transcript: last_transcript,
        parsed: &parsed,
        command: outcome.command.as_ref(),
        candidates: outcome.candidates.as_ref(),
        failure: outcome.failure.as_deref(),
    };
    TrialResult {
        scenario_id: scenario.id.clone(),
        match_rank: None,
        attempts,
        error_class: Some(classify_error(&trial)),
        error_detail: outcome.failure.clone(),
        timings,
        word_count: crate::disambiguation::language::word_count(last_transcript),
        tags: scenario.tags,
        top: outcome.candidates.and_then(|s| s.candidates.into_iter().next()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tally {
    pub total: usize,
    pub matched: usize,
    pub accuracy: f64,
}

impl Tally {
    fn add(&mut self, matched: bool) {
        self.total += 1;
        self.matched += usize::from(matched);
        self.accuracy = self.matched as f64 / self.total as f64;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub overall: Tally,
    pub by_tag: BTreeMap<String, Tally>,
    pub error_counts: BTreeMap<ErrorClass, usize>,
    pub trials: Vec<TrialResult>,
}

impl CorpusReport {
    pub fn accuracy(&self) -> f64 {
        self.overall.accuracy
    }
}

pub fn corpus_accuracy(scenarios: &[Scenario], scenes: &SceneSet, ctx: &EvalContext<'_>) -> CorpusReport {
    let trials: Vec<TrialResult> = scenarios
        .iter()
        .map(|s| match scenes.get(&s.scene_ref) {
            Some(scene) => replay(s, scene, ctx),
            None => TrialResult {
                scenario_id: s.id.clone(),
                match_rank: None,
                attempts: 0,
                error_class: Some(ErrorClass::Other),
                error_detail: Some(format!("unknown scene_ref {:?}", s.scene_ref)),
                timings: Timings::default(),
                word_count: 0,
                tags: s.tags,
                top: None,
            },
        })
        .collect();
    summarize(trials)
}

pub(crate) fn summarize(trials: Vec<TrialResult>) -> CorpusReport {
    let mut overall = Tally::default();
    let mut by_tag: BTreeMap<String, Tally> = BTreeMap::new();
    let mut error_counts = BTreeMap::new();
    for t in &trials {
        overall.add(t.matched());
        for label in t.tags.labels() {
            by_tag.entry(label).or_default().add(t.matched());
        }
        if let Some(class) = t.error_class {
            *error_counts.entry(class).or_default() += 1;
        }
    }
    CorpusReport { overall, by_tag, error_counts, trials }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::disambiguation::testkit::{command, living_room};
    use crate::disambiguation::{BaselineResolver, MockResolver, RawCandidate};
    use crate::targeting::ModalityKind::{self, Gaze};

    /// Event log for one hold with one press per shot, built from the testkit geometry.
    pub(crate) fn events_for(scene: &SceneGraph, shots: &[&[(ModalityKind, &str)]]) -> Vec<LogRecord> {
        let cmd = command(scene, "", shots);
        let mut events = vec![LogRecord::Touch { t: 0 }];
        for (k, s) in cmd.snapshots.into_iter().enumerate() {
            events.push(LogRecord::Snapshot(s));
            events.push(LogRecord::Press { t: 100 * (k as u64 + 1) });
        }
        events.push(LogRecord::Release { t: 1000 });
        events
    }

    pub(crate) fn scenario(id: &str, transcript: &str, shots: &[&[(ModalityKind, &str)]], task: TaskType, targets: &[&str]) -> Scenario {
        let scene = living_room();
        Scenario {
            id: id.into(),
            scene_ref: "living".into(),
            transcript: transcript.into(),
            events: events_for(&scene, shots),
            ground_truth: GroundTruth { task, targets: targets.iter().map(|s| s.to_string()).collect(), destination: None },
            tags: Tags::default(),
            retries: vec![],
            expect: None,
        }
    }

    fn scenes() -> SceneSet {
        let mut set = SceneSet::default();
        set.insert("living", living_room());
        set
    }

    #[test]
    fn explicit_unique_names_score_one() {
        let corpus: Vec<Scenario> = ["cola", "wine", "cup", "book"]
            .iter()
            .map(|id| scenario(id, &format!("bring me the {id}"), &[&[(Gaze, "plant")]], TaskType::Fetch, &[id]))
            .collect();
        let resolver = BaselineResolver::default();
        let report = corpus_accuracy(&corpus, &scenes(), &EvalContext::new(AngleConfig::default(), &resolver));
        assert_eq!(report.accuracy(), 1.0);
        assert!(report.trials.iter().all(|t| t.match_rank == Some(1) && t.attempts == 1));
        assert_eq!(report.by_tag["horizon=short"].total, 4);
    }

    #[test]
    fn ground_truth_at_rank_nine_still_counts() {
        let corpus: Vec<Scenario> = ["cola", "cup"]
            .iter()
            .map(|id| scenario(id, "bring that", &[&[(Gaze, id)]], TaskType::Fetch, &[id]))
            .collect();
        let mock = MockResolver::from_fn(|cmd, scene| {
            // Ground truth is whatever the gaze hit; put it last.
            let target = cmd.possible_objects[0][0].object_id.clone();
            let mut entries: Vec<RawCandidate> = scene
                .objects()
                .iter()
                .filter(|o| o.id != target)
                .take(8)
                .enumerate()
                .map(|(i, o)| RawCandidate {
                    rank: Some(i as i64 + 1),
                    task: Some("CheckPresence".into()),
                    targets: vec![o.id.clone()],
                    display_text: Some("x".into()),
                    ..Default::default()
                })
                .collect();
            entries.push(RawCandidate {
                rank: Some(9),
                task: Some("Fetch".into()),
                targets: vec![target],
                display_text: Some("x".into()),
                ..Default::default()
            });
            Ok(entries)
        });
        let report = corpus_accuracy(&corpus, &scenes(), &EvalContext::new(AngleConfig::default(), &mock));
        assert_eq!(report.accuracy(), 1.0);
        assert!(report.trials.iter().all(|t| t.match_rank == Some(9)));
    }

    #[test]
    fn retry_attempt_is_used() {
        let scene = living_room();
        let mut s = scenario("r", "bring me the unicorn", &[&[(Gaze, "plant")]], TaskType::Fetch, &["door"]);
        s.retries.push(Attempt { transcript: "bring me the door".into(), events: events_for(&scene, &[&[(Gaze, "plant")]]) });
        let resolver = BaselineResolver::default();
        let result = replay(&s, &scene, &EvalContext::new(AngleConfig::default(), &resolver));
        assert_eq!(result.attempts, 2);
        assert_eq!(result.match_rank, Some(1));
        assert_eq!(result.timings.hold_ms, 2000);
    }

    #[test]
    fn missing_scene_is_other() {
        let mut s = scenario("m", "bring me the cola", &[&[(Gaze, "cola")]], TaskType::Fetch, &["cola"]);
        s.scene_ref = "nowhere".into();
        let resolver = BaselineResolver::default();
        let report = corpus_accuracy(&[s], &scenes(), &EvalContext::new(AngleConfig::default(), &resolver));
        assert_eq!(report.trials[0].error_class, Some(ErrorClass::Other));
    }

    #[test]
    fn corpus_lines_parse_and_validate() {
        let s = scenario("p", "bring me the cola", &[&[(Gaze, "cola")]], TaskType::Fetch, &["cola"]);
        let line = serde_json::to_string(&s).unwrap();
        let parsed = parse_corpus(&format!("{line}\n\n{line}\n")).unwrap();
        assert_eq!(parsed, vec![s.clone(), s]);
        let mut bad = parsed[0].clone();
        bad.ground_truth.targets.insert("ghost".into());
        assert!(bad.validate(&living_room()).is_err());
        assert!(parse_corpus(r#"{"id":"x","scene_ref":"s","events":[],"ground_truth":{"task":"Fetch","targets":[]},"tags":{"horizon":"medium"}}"#).is_err());
    }
}
