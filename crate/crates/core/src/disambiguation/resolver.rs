//! Resolver implementations and the shared repair step that turns any reply into a valid set.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::baseline::{baseline_drafts, baseline_rank_with, BaselineOptions};
use super::prompt::assemble_prompt;
use super::{CandidateInstruction, CandidateSet, Destination, DisambiguationError, TaskType, CANDIDATE_COUNT};
use crate::scene::SceneGraph;
use crate::session::MultimodalCommand;

pub const DEFAULT_RESOLVER_TIMEOUT_MS: u64 = 30_000;

/// Produces a candidate set for a finalized command. Shared across sessions.
pub trait Resolver: Send + Sync {
    fn id(&self) -> &str;
    fn resolve(&self, command: &MultimodalCommand, scene: &SceneGraph) -> Result<CandidateSet, DisambiguationError>;
}

/// Run `resolver`, stamp latency and re-check the set contract.
pub fn generate_candidates(
    command: &MultimodalCommand,
    scene: &SceneGraph,
    resolver: &dyn Resolver,
) -> Result<CandidateSet, DisambiguationError> {
    let started = Instant::now();
    let mut set = resolver.resolve(command, scene)?;
    set.latency_ms = started.elapsed().as_millis() as u64;
    set.validate(scene).map_err(DisambiguationError::ResolverProtocol)?;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ResolverMode {
    Mock,
    #[default]
    Baseline,
    Remote,
}

impl FromStr for ResolverMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mock" => Ok(ResolverMode::Mock),
            "baseline" => Ok(ResolverMode::Baseline),
            "remote" => Ok(ResolverMode::Remote),
            other => Err(format!("unknown resolver mode {other:?} (expected mock, baseline or remote)")),
        }
    }
}

impl fmt::Display for ResolverMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ResolverMode::Mock => "mock",
            ResolverMode::Baseline => "baseline",
            ResolverMode::Remote => "remote",
        })
    }
}

/// One entry of a resolver reply before validation. Every field is optional so a single bad
/// entry can be dropped without rejecting the reply.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawCandidate {
    #[serde(default)]
    pub rank: Option<i64>,
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default)]
    pub destination: Option<String>,
    #[serde(default)]
    pub attribute: Option<String>,
    #[serde(default)]
    pub display_text: Option<String>,
    #[serde(default)]
    pub explanation: Option<String>,
}

impl From<&CandidateInstruction> for RawCandidate {
    fn from(c: &CandidateInstruction) -> Self {
        RawCandidate {
            rank: Some(i64::from(c.rank)),
            task: Some(format!("{:?}", c.task)),
            targets: c.targets.clone(),
            destination: c.destination.as_ref().map(ToString::to_string),
            attribute: c.attribute.clone(),
            display_text: Some(c.display_text.clone()),
            explanation: Some(c.explanation.clone()),
        }
    }
}

/// Drop invalid or duplicate entries, cut to nine or pad with baseline drafts, renumber.
pub(crate) fn repair(
    raw: Vec<RawCandidate>,
    command: &MultimodalCommand,
    scene: &SceneGraph,
    resolver_id: &str,
    options: &BaselineOptions,
) -> Result<CandidateSet, DisambiguationError> {
    let mut repaired = false;
    let mut indexed: Vec<(usize, RawCandidate)> = raw.into_iter().enumerate().collect();
    indexed.sort_by_key(|(i, r)| (r.rank.unwrap_or(i64::MAX), *i));
    let mut expected_rank = 1;

    let mut kept: Vec<CandidateInstruction> = Vec::new();
    for (_, r) in indexed {
        if r.rank != Some(expected_rank) {
            repaired = true;
        }
        expected_rank += 1;
        let Some(task) = r.task.as_deref().and_then(TaskType::parse_loose) else {
            repaired = true;
            continue;
        };
        let display_text = r.display_text.filter(|t| !t.trim().is_empty()).unwrap_or_else(|| {
            repaired = true;
            format!("{task:?} {}", r.targets.join(", "))
        });
        let candidate = CandidateInstruction {
            rank: 0,
            task,
            targets: r.targets,
            destination: r.destination.as_deref().map(Destination::from),
            attribute: r.attribute.filter(|_| task == TaskType::CheckState),
            display_text,
            explanation: r.explanation.unwrap_or_default(),
            padding: false,
        };
        if candidate.validate(scene).is_err() || kept.iter().any(|k| k.equivalent(&candidate)) {
            repaired = true;
            continue;
        }
        kept.push(candidate);
    }
    if kept.len() > CANDIDATE_COUNT {
        kept.truncate(CANDIDATE_COUNT);
        repaired = true;
    }
    if kept.len() < CANDIDATE_COUNT {
        repaired = true;
        for mut draft in baseline_drafts(command, scene, options) {
            if kept.len() == CANDIDATE_COUNT {
                break;
            }
            if kept.iter().any(|k| k.equivalent(&draft)) {
                continue;
            }
            if !draft.padding {
                draft.padding = true;
                draft.explanation = format!("[padding] {}", draft.explanation);
            }
            kept.push(draft);
        }
    }
    if kept.len() < CANDIDATE_COUNT {
        return Err(DisambiguationError::SceneTooSmall { available: kept.len() });
    }
    for (i, c) in kept.iter_mut().enumerate() {
        c.rank = (i + 1) as u8;
    }
    Ok(CandidateSet { candidates: kept, resolver_id: resolver_id.to_string(), latency_ms: 0, repaired })
}

/// Pull candidate entries out of a reply body. Accepts a chat-completion envelope whose message
/// content holds the array, a bare array, or an object with a `candidates` array.
pub fn parse_remote_reply(body: &str) -> Result<Vec<RawCandidate>, DisambiguationError> {
    let protocol = |msg: String| DisambiguationError::ResolverProtocol(msg);
    let value: Value = serde_json::from_str(body).map_err(|e| protocol(format!("reply is not JSON: {e}")))?;
    let payload = match value.pointer("/choices/0/message/content") {
        Some(Value::String(content)) => extract_json(content).ok_or_else(|| protocol("message content holds no JSON".into()))?,
        Some(other) => other.clone(),
        None => value,
    };
    let items = match payload {
        Value::Array(items) => items,
        Value::Object(mut map) => match map.remove("candidates") {
            Some(Value::Array(items)) => items,
            _ => return Err(protocol("reply object has no candidates array".into())),
        },
        _ => return Err(protocol("reply holds no candidate array".into())),
    };
    Ok(items.into_iter().map(|v| serde_json::from_value(v).unwrap_or_default()).collect())
}

fn extract_json(content: &str) -> Option<Value> {
    if let Ok(v) = serde_json::from_str(content.trim()) {
        return Some(v);
    }
    // Models often wrap the array in prose or a code fence.
    let start = content.find(['[', '{'])?;
    let end = content.rfind([']', '}'])?;
    (end > start).then(|| serde_json::from_str(&content[start..=end]).ok()).flatten()
}

// ---- baseline ----------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
pub struct BaselineResolver {
    pub options: BaselineOptions,
}

impl Resolver for BaselineResolver {
    fn id(&self) -> &str {
        "baseline"
    }

    fn resolve(&self, command: &MultimodalCommand, scene: &SceneGraph) -> Result<CandidateSet, DisambiguationError> {
        baseline_rank_with(command, scene, &self.options)
    }
}

// ---- mock --------------------------------------------------------------------------------

type ScriptFn = dyn Fn(&MultimodalCommand, &SceneGraph) -> Result<Vec<RawCandidate>, DisambiguationError> + Send + Sync;

#[derive(Clone)]
enum Script {
    Fixed(Vec<RawCandidate>),
    Dynamic(Arc<ScriptFn>),
    /// CheckPresence on every possible object, best first.
    Echo,
}

/// Scripted resolver for tests and offline demos. Replies still go through repair.
#[derive(Clone)]
pub struct MockResolver {
    script: Script,
    delay: Duration,
    budget: Duration,
    options: BaselineOptions,
}

impl fmt::Debug for MockResolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MockResolver").field("delay", &self.delay).field("budget", &self.budget).finish_non_exhaustive()
    }
}

impl Default for MockResolver {
    fn default() -> Self {
        MockResolver::with_script(Script::Echo)
    }
}

impl MockResolver {
    fn with_script(script: Script) -> Self {
        MockResolver {
            script,
            delay: Duration::ZERO,
            budget: Duration::from_millis(DEFAULT_RESOLVER_TIMEOUT_MS),
            options: BaselineOptions::default(),
        }
    }

    pub fn fixed(entries: Vec<RawCandidate>) -> Self {
        MockResolver::with_script(Script::Fixed(entries))
    }

    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&MultimodalCommand, &SceneGraph) -> Result<Vec<RawCandidate>, DisambiguationError> + Send + Sync + 'static,
    {
        MockResolver::with_script(Script::Dynamic(Arc::new(f)))
    }

    /// Simulated think time; a delay beyond `budget_ms` yields a timeout once the budget is spent.
    pub fn with_delay(mut self, delay: Duration, budget_ms: u64) -> Self {
        self.delay = delay;
        self.budget = Duration::from_millis(budget_ms);
        self
    }
}

impl Resolver for MockResolver {
    fn id(&self) -> &str {
        "mock"
    }

    fn resolve(&self, command: &MultimodalCommand, scene: &SceneGraph) -> Result<CandidateSet, DisambiguationError> {
        if self.delay > self.budget {
            std::thread::sleep(self.budget);
            return Err(DisambiguationError::ResolverTimeout {
                budget_ms: self.budget.as_millis() as u64,
                detail: "scripted delay exceeds budget".into(),
            });
        }
        std::thread::sleep(self.delay);
        let raw = match &self.script {
            Script::Fixed(entries) => entries.clone(),
            Script::Dynamic(f) => f(command, scene)?,
            Script::Echo => {
                let mut ids: Vec<&str> = Vec::new();
                for p in command.possible_objects.iter().flatten() {
                    if !ids.contains(&p.object_id.as_str()) {
                        ids.push(&p.object_id);
                    }
                }
                ids.iter()
                    .enumerate()
                    .map(|(i, id)| RawCandidate {
                        rank: Some(i as i64 + 1),
                        task: Some("CheckPresence".into()),
                        targets: vec![id.to_string()],
                        display_text: Some(format!("Check the {id}")),
                        explanation: Some("echo of the possible objects".into()),
                        ..RawCandidate::default()
                    })
                    .collect()
            }
        };
        repair(raw, command, scene, self.id(), &self.options)
    }
}

// ---- remote ------------------------------------------------------------------------------

/// Chat-completion endpoint. Uses a blocking client, so call it off async executors.
#[derive(Debug, Clone)]
pub struct RemoteResolver {
    pub endpoint: String,
    pub model: String,
    pub api_key: Option<String>,
    pub timeout_ms: u64,
    pub options: BaselineOptions,
}

impl RemoteResolver {
    pub fn new(endpoint: impl Into<String>, timeout_ms: u64) -> Self {
        RemoteResolver {
            endpoint: endpoint.into(),
            model: "gpt-4o".into(),
            api_key: None,
            timeout_ms,
            options: BaselineOptions::default(),
        }
    }

    pub fn request_body(&self, command: &MultimodalCommand, scene: &SceneGraph) -> Value {
        let (system, user) = assemble_prompt(command, scene).to_messages();
        json!({
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        })
    }
}

impl Resolver for RemoteResolver {
    fn id(&self) -> &str {
        "remote"
    }

    fn resolve(&self, command: &MultimodalCommand, scene: &SceneGraph) -> Result<CandidateSet, DisambiguationError> {
        let timeout = |detail: String| DisambiguationError::ResolverTimeout { budget_ms: self.timeout_ms, detail };
        // Built per call: a blocking client must not be created or dropped on an async thread.
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(self.timeout_ms))
            .build()
            .map_err(|e| DisambiguationError::ResolverProtocol(format!("http client: {e}")))?;
        let mut request = client.post(&self.endpoint).json(&self.request_body(command, scene));
        if let Some(key) = &self.api_key {
            request = request.bearer_auth(key);
        }
        let response = request.send().map_err(|e| timeout(e.to_string()))?;
        let status = response.status();
        let body = response.text().map_err(|e| timeout(e.to_string()))?;
        if !status.is_success() {
            return Err(DisambiguationError::ResolverProtocol(format!("endpoint answered {status}")));
        }
        let raw = parse_remote_reply(&body)?;
        repair(raw, command, scene, self.id(), &self.options)
    }
}
