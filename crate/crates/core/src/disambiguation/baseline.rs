//! Deterministic rule-based ranker.
//!
//! Voice-named objects outrank anything that is only pointed at. Spatial evidence is ordered
//! High tier before Low, then by smaller offset, with gaze and fingers weighted equally. With
//! several snapshots, snapshot k fills slot k of the instruction (targets first, then the
//! destination of a Move) when there are at least as many snapshots as slots; otherwise the
//! snapshots fill the unnamed slots in order. Sets are padded to nine with nearest-object and
//! alternate-task variants that are flagged as padding.

use std::collections::HashSet;

use super::language::{parse_utterance, Lexicon, Mention, ParsedUtterance};
use super::{
    CandidateInstruction, CandidateSet, Destination, DisambiguationError, InstructionKey, TaskType, CANDIDATE_COUNT,
    USER_DESTINATION,
};
use crate::scene::{Affordance, SceneGraph, Vec3, DEFAULT_FUZZY_THRESHOLD};
use crate::session::MultimodalCommand;
use crate::targeting::{rank_order, PossibleObject};

const MAX_ALTERNATIVES_PER_SLOT: usize = 12;
const MAX_PRIMARY_HYPOTHESES: usize = 40;
const MAX_DRAFTS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOptions {
    pub lexicon: Lexicon,
    pub fuzzy_threshold: f64,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions { lexicon: Lexicon::default(), fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD }
    }
}

pub fn baseline_rank(command: &MultimodalCommand, scene: &SceneGraph) -> Result<CandidateSet, DisambiguationError> {
    baseline_rank_with(command, scene, &BaselineOptions::default())
}

pub fn baseline_rank_with(
    command: &MultimodalCommand,
    scene: &SceneGraph,
    options: &BaselineOptions,
) -> Result<CandidateSet, DisambiguationError> {
    let drafts = baseline_drafts(command, scene, options);
    if drafts.len() < CANDIDATE_COUNT {
        return Err(DisambiguationError::SceneTooSmall { available: drafts.len() });
    }
    let candidates = drafts
        .into_iter()
        .take(CANDIDATE_COUNT)
        .enumerate()
        .map(|(i, mut c)| {
            c.rank = (i + 1) as u8;
            c
        })
        .collect();
    Ok(CandidateSet { candidates, resolver_id: "baseline".into(), latency_ms: 0, repaired: false })
}

/// The full ordered list of valid, pairwise non-equivalent instructions (rank 0, unbounded
/// by nine). Used for ranking and for padding other resolvers' output.
pub fn baseline_drafts(
    command: &MultimodalCommand,
    scene: &SceneGraph,
    options: &BaselineOptions,
) -> Vec<CandidateInstruction> {
    let parsed = parse_utterance(&command.transcript, scene, &options.lexicon, options.fuzzy_threshold);
    let mut ranker = Ranker::new(scene, command, parsed);
    ranker.run();
    ranker.out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Target,
    Destination,
}

#[derive(Debug)]
struct Slot<'m> {
    role: Role,
    voice: Option<&'m Mention>,
    snapshot: Option<usize>,
    alternatives: Vec<String>,
}

struct Ranker<'a> {
    scene: &'a SceneGraph,
    command: &'a MultimodalCommand,
    parsed: ParsedUtterance,
    pool: Vec<PossibleObject>,
    out: Vec<CandidateInstruction>,
    seen: HashSet<InstructionKey>,
}

impl<'a> Ranker<'a> {
    fn new(scene: &'a SceneGraph, command: &'a MultimodalCommand, parsed: ParsedUtterance) -> Self {
        let mut pool: Vec<PossibleObject> = Vec::new();
        for hit in command.possible_objects.iter().flatten() {
            match pool.iter_mut().find(|p| p.object_id == hit.object_id) {
                Some(existing) if rank_order(hit, existing).is_lt() => *existing = hit.clone(),
                Some(_) => {}
                None => pool.push(hit.clone()),
            }
        }
        pool.sort_by(rank_order);
        Ranker { scene, command, parsed, pool, out: Vec::new(), seen: HashSet::new() }
    }

    fn run(&mut self) {
        match self.primary_task() {
            Some(task) => self.voice_mode(task),
            None => self.non_voice_mode(),
        }
        self.pad();
    }

    fn primary_task(&self) -> Option<TaskType> {
        if let Some(t) = self.parsed.tasks.first() {
            return Some(*t);
        }
        if self.parsed.named_objects().next().is_some() {
            return Some(TaskType::Fetch);
        }
        if self.parsed.mentions.iter().any(|m| m.room.is_some()) {
            return Some(TaskType::GoTo);
        }
        None
    }

    fn push(&mut self, draft: CandidateInstruction) {
        if self.out.len() >= MAX_DRAFTS || draft.validate(self.scene).is_err() {
            return;
        }
        if self.seen.insert(draft.key()) {
            self.out.push(draft);
        }
    }

    // ---- evidence -----------------------------------------------------------------------

    fn pool_index(&self, id: &str) -> Option<usize> {
        self.pool.iter().position(|p| p.object_id == id)
    }

    fn position_of(&self, id: &str) -> Option<Vec3> {
        self.scene.object(id).map(|o| o.position).or_else(|| self.scene.room(id).map(|r| r.centroid))
    }

    fn user_distance(&self, id: &str) -> f64 {
        self.position_of(id).map(|p| p.distance(self.command.user_pose)).unwrap_or(f64::INFINITY)
    }

    /// All object ids by distance from `anchor`, then id.
    fn nearest_objects(&self, anchor: Vec3) -> Vec<String> {
        let mut objs: Vec<(f64, &str)> =
            self.scene.objects().iter().map(|o| (o.position.distance(anchor), o.id.as_str())).collect();
        objs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
        objs.into_iter().map(|(_, id)| id.to_string()).collect()
    }

    fn spatial_list(&self, snapshot: Option<usize>) -> Vec<String> {
        let mut ids: Vec<String> = snapshot
            .and_then(|k| self.command.possible_objects.get(k))
            .map(|l| l.iter().map(|p| p.object_id.clone()).collect())
            .unwrap_or_default();
        for p in &self.pool {
            if !ids.contains(&p.object_id) {
                ids.push(p.object_id.clone());
            }
        }
        ids
    }

    fn order_voice_groundings(&self, ids: &[String], snapshot: Option<usize>) -> Vec<String> {
        let snap_list = snapshot.and_then(|k| self.command.possible_objects.get(k));
        let mut ranked: Vec<(usize, usize, f64, &String)> = ids
            .iter()
            .map(|id| {
                let in_snap = snap_list.and_then(|l| l.iter().position(|p| &p.object_id == id)).unwrap_or(usize::MAX);
                let in_pool = self.pool_index(id).unwrap_or(usize::MAX);
                (in_snap, in_pool, self.user_distance(id), id)
            })
            .collect();
        ranked.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)).then_with(|| a.3.cmp(b.3)));
        ranked.into_iter().map(|r| r.3.clone()).collect()
    }

    fn describe(&self, id: &str) -> String {
        if id == USER_DESTINATION {
            return "the user".into();
        }
        if let Some(m) = self.parsed.mentions.iter().find(|m| m.objects.iter().any(|o| o == id) || m.room.as_deref() == Some(id)) {
            return format!("{id} named by voice (\"{}\")", m.text);
        }
        if let Some(p) = self.pool.iter().find(|p| p.object_id == id) {
            return format!("{id} indicated by {} ({:?} tier, {:.1} deg)", p.modality.as_str(), p.tier, p.offset);
        }
        format!("{id} ({:.1} m from the user)", self.user_distance(id))
    }

    // ---- voice-driven instructions ------------------------------------------------------

    fn voice_mode(&mut self, task: TaskType) {
        let parsed = self.parsed.clone();
        let object_mentions: Vec<&Mention> = parsed.named_objects().collect();
        let plain: Vec<&Mention> = object_mentions.iter().copied().filter(|m| !m.after_preposition).collect();
        let dest_mention = parsed
            .mentions
            .iter()
            .rev()
            .find(|m| m.after_preposition && (!m.objects.is_empty() || m.room.is_some()));
        let n_snap = self.command.snapshots.len();

        let target_mentions: Vec<&Mention> = match task {
            TaskType::Move => plain.clone(),
            TaskType::GoTo => Vec::new(),
            _ if !plain.is_empty() => plain.clone(),
            _ => object_mentions.clone(),
        };
        let target_slots = match task {
            TaskType::Fetch => target_mentions.len().max(n_snap).max(1),
            TaskType::CheckState | TaskType::Dock => 1,
            TaskType::GoTo => 0,
            TaskType::Move | TaskType::CheckPresence => target_mentions.len().max(1),
        };
        let mut slots: Vec<Slot<'_>> = (0..target_slots)
            .map(|i| Slot { role: Role::Target, voice: target_mentions.get(i).copied(), snapshot: None, alternatives: vec![] })
            .collect();
        match task {
            TaskType::Move => slots.push(Slot { role: Role::Destination, voice: dest_mention, snapshot: None, alternatives: vec![] }),
            TaskType::GoTo => {
                let voice = dest_mention.or_else(|| parsed.mentions.iter().find(|m| !m.objects.is_empty() || m.room.is_some()));
                slots.push(Slot { role: Role::Destination, voice, snapshot: None, alternatives: vec![] });
            }
            _ => {}
        }

        // Snapshot binding.
        if n_snap >= slots.len() {
            for (i, slot) in slots.iter_mut().enumerate() {
                slot.snapshot = Some(i);
            }
        } else {
            let mut next = 0;
            for slot in slots.iter_mut().filter(|s| s.voice.is_none()) {
                if next < n_snap {
                    slot.snapshot = Some(next);
                    next += 1;
                }
            }
        }

        for i in 0..slots.len() {
            let alts = self.slot_alternatives(task, &slots[i]);
            slots[i].alternatives = alts;
        }

        let attribute = self.state_attribute(&slots);
        let combos = enumerate_combinations(&slots);
        let mut primary: Vec<CandidateInstruction> =
            combos.iter().map(|combo| self.instruction(task, &slots, combo, attribute.as_deref())).collect();

        // Named-only variant when extra snapshots forced extra spatial target slots.
        if task == TaskType::Fetch && !target_mentions.is_empty() && target_slots > target_mentions.len() {
            let named: Vec<String> = target_mentions
                .iter()
                .filter_map(|m| self.order_voice_groundings(&m.objects, None).into_iter().next())
                .collect();
            let variant = self.make(TaskType::Fetch, named, None, None, false);
            primary.insert(primary.len().min(1), variant);
        }

        let mut alternate_objects: Vec<String> = Vec::new();
        for draft in &primary {
            for id in draft.targets.iter().chain(draft.destination.iter().filter_map(|d| match d {
                Destination::Place(p) if self.scene.object(p).is_some() => Some(p),
                _ => None,
            })) {
                if !alternate_objects.contains(id) {
                    alternate_objects.push(id.clone());
                }
            }
        }
        let best = primary.first().cloned();
        for draft in primary {
            self.push(draft);
        }

        // Alternate tasks over the same evidence.
        if let Some(best) = best {
            match task {
                TaskType::Move => {
                    let d = self.make(TaskType::Fetch, best.targets.clone(), None, None, false);
                    self.push(d);
                }
                TaskType::CheckState => {
                    let d = self.make(TaskType::CheckPresence, best.targets.clone(), None, None, false);
                    self.push(d);
                }
                TaskType::GoTo if best.destination != Some(Destination::User) => {
                    let d = self.make(TaskType::GoTo, vec![], Some(Destination::User), None, false);
                    self.push(d);
                }
                _ => {}
            }
        }
        for id in alternate_objects {
            for draft in self.affordance_tasks(&id, false) {
                self.push(draft);
            }
        }
    }

    fn slot_alternatives(&self, task: TaskType, slot: &Slot<'_>) -> Vec<String> {
        let mut alts: Vec<String> = match slot.voice {
            Some(m) => {
                let mut ids = self.order_voice_groundings(&m.objects, slot.snapshot);
                if slot.role == Role::Destination {
                    ids.extend(m.room.iter().cloned());
                }
                ids
            }
            None => {
                let spatial = self.spatial_list(slot.snapshot);
                match (task, slot.role) {
                    (TaskType::GoTo, _) => {
                        let mut ids = spatial;
                        ids.push(USER_DESTINATION.to_string());
                        ids
                    }
                    (TaskType::Dock, _) => {
                        let mut ids: Vec<String> = spatial.into_iter().filter(|id| self.is_dock(id)).collect();
                        for id in self.nearest_objects(self.command.user_pose) {
                            if self.is_dock(&id) && !ids.contains(&id) {
                                ids.push(id);
                            }
                        }
                        ids
                    }
                    _ if spatial.is_empty() => self.nearest_objects(self.command.user_pose),
                    _ => spatial,
                }
            }
        };
        alts.truncate(MAX_ALTERNATIVES_PER_SLOT);
        alts
    }

    fn is_dock(&self, id: &str) -> bool {
        self.scene.object(id).is_some_and(|o| o.has(Affordance::Dock))
    }

    fn state_attribute(&self, slots: &[Slot<'_>]) -> Option<String> {
        let (attr, value) = self.parsed.state_query.clone()?;
        let target = slots.first()?.alternatives.first()?;
        let object = self.scene.object(target)?;
        let family: &[&str] = match value.as_str() {
            "on" | "off" | "running" => &["on", "off", "running", "standby"],
            _ => &["open", "closed"],
        };
        let name = if object.state_attributes.contains_key(&attr) {
            attr
        } else {
            object
                .state_attributes
                .iter()
                .find(|(_, v)| family.contains(&v.as_str()))
                .map(|(k, _)| k.clone())
                .unwrap_or(attr)
        };
        Some(if value == "on" { name } else { format!("{name}={value}") })
    }

    fn instruction(&self, task: TaskType, slots: &[Slot<'_>], combo: &[usize], attribute: Option<&str>) -> CandidateInstruction {
        let mut targets = Vec::new();
        let mut destination = None;
        for (slot, &idx) in slots.iter().zip(combo) {
            let id = slot.alternatives[idx].clone();
            match slot.role {
                Role::Target => targets.push(id),
                Role::Destination => destination = Some(Destination::from(id.as_str())),
            }
        }
        let attribute = (task == TaskType::CheckState).then(|| attribute.map(str::to_owned)).flatten();
        self.make(task, targets, destination, attribute, false)
    }

    // ---- gaze / pointing only ----------------------------------------------------------

    fn non_voice_mode(&mut self) {
        let ids: Vec<String> = self.pool.iter().map(|p| p.object_id.clone()).collect();
        for id in ids {
            for draft in self.affordance_tasks(&id, false) {
                self.push(draft);
            }
        }
    }

    /// Dock for docks, CheckPresence for inspectable things, Fetch for portable ones.
    fn affordance_tasks(&self, id: &str, padding: bool) -> Vec<CandidateInstruction> {
        let Some(obj) = self.scene.object(id) else { return vec![] };
        let mut tasks = Vec::new();
        if obj.has(Affordance::Dock) {
            tasks.push(self.make(TaskType::Dock, vec![id.to_string()], None, None, padding));
        }
        if obj.has(Affordance::Inspectable) {
            tasks.push(self.make(TaskType::CheckPresence, vec![id.to_string()], None, None, padding));
        }
        if obj.has(Affordance::Portable) {
            tasks.push(self.make(TaskType::Fetch, vec![id.to_string()], None, None, padding));
        }
        if tasks.is_empty() {
            tasks.push(self.make(TaskType::CheckPresence, vec![id.to_string()], None, None, padding));
        }
        tasks
    }

    // ---- padding --------------------------------------------------------------------------

    fn pad(&mut self) {
        if self.out.len() >= CANDIDATE_COUNT {
            return;
        }
        let task = self.primary_task();
        let anchor = self
            .out
            .first()
            .and_then(|c| c.targets.first())
            .and_then(|id| self.position_of(id))
            .unwrap_or(self.command.user_pose);
        let best_destination = self.out.iter().find(|c| c.task == TaskType::Move).and_then(|c| c.destination.clone());
        let go_home = self.make(TaskType::GoTo, vec![], Some(Destination::User), None, true);
        let nearest = self.nearest_objects(anchor);

        let mut drafts = Vec::new();
        for id in &nearest {
            let same_task = match task {
                Some(t @ (TaskType::Fetch | TaskType::CheckPresence)) => Some(self.make(t, vec![id.clone()], None, None, true)),
                Some(TaskType::CheckState) => self.scene.object(id).filter(|o| !o.state_attributes.is_empty()).map(|_| {
                    self.make(TaskType::CheckState, vec![id.clone()], None, None, true)
                }),
                Some(TaskType::Move) => best_destination
                    .clone()
                    .map(|d| self.make(TaskType::Move, vec![id.clone()], Some(d), None, true)),
                Some(TaskType::GoTo) => Some(self.make(TaskType::GoTo, vec![], Some(Destination::Place(id.clone())), None, true)),
                Some(TaskType::Dock) => self.is_dock(id).then(|| self.make(TaskType::Dock, vec![id.clone()], None, None, true)),
                None => None,
            };
            drafts.extend(same_task);
        }
        drafts.push(go_home);
        for id in &nearest {
            drafts.extend(self.affordance_tasks(id, true));
            drafts.push(self.make(TaskType::GoTo, vec![], Some(Destination::Place(id.clone())), None, true));
        }
        for d in drafts {
            if self.out.len() >= CANDIDATE_COUNT {
                break;
            }
            self.push(d);
        }
    }

    // ---- text -----------------------------------------------------------------------------

    fn label(&self, id: &str) -> String {
        if id == USER_DESTINATION {
            return "you".into();
        }
        self.scene
            .object(id)
            .map(|o| format!("the {}", o.label))
            .or_else(|| self.scene.room(id).map(|r| format!("the {}", r.label)))
            .unwrap_or_else(|| id.to_string())
    }

    fn make(
        &self,
        task: TaskType,
        targets: Vec<String>,
        destination: Option<Destination>,
        attribute: Option<String>,
        padding: bool,
    ) -> CandidateInstruction {
        let names: Vec<String> = targets.iter().map(|t| self.label(t)).collect();
        let joined = join_and(&names);
        let dest_label = destination.as_ref().map(|d| self.label(&d.to_string()));
        let display_text = match task {
            TaskType::Fetch => format!("Bring {joined} to you"),
            TaskType::Move => format!("Move {joined} to {}", dest_label.clone().unwrap_or_default()),
            TaskType::CheckPresence => format!("Check whether {joined} is still there"),
            TaskType::CheckState => match attribute.as_deref() {
                Some(a) => {
                    let (name, value) = a.split_once('=').unwrap_or((a, "on"));
                    format!("Check whether {joined} is {value} ({name})")
                }
                None => format!("Check the state of {joined}"),
            },
            TaskType::GoTo => match &destination {
                Some(Destination::User) => "Come back to you".to_string(),
                _ => format!("Go to {}", dest_label.clone().unwrap_or_default()),
            },
            TaskType::Dock if targets.is_empty() => "Return to the charging dock".to_string(),
            TaskType::Dock => format!("Return to {joined} and dock"),
        };
        let mut evidence: Vec<String> = targets.iter().map(|t| self.describe(t)).collect();
        if let Some(d) = &destination {
            evidence.push(format!("destination {}", self.describe(&d.to_string())));
        }
        let mut explanation = if self.command.is_non_voice() {
            format!("Non-voice command; {}", evidence.join("; "))
        } else {
            format!("Transcript \"{}\"; {}", self.command.transcript.trim(), evidence.join("; "))
        };
        if padding {
            explanation = format!("[padding] nearest-object or alternate-task variant; {explanation}");
        }
        CandidateInstruction { rank: 0, task, targets, destination, attribute, display_text, explanation, padding }
    }
}

fn join_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

/// Index tuples over the slots' alternatives, best-first by index sum then lexicographically,
/// skipping tuples that reuse an id.
fn enumerate_combinations(slots: &[Slot<'_>]) -> Vec<Vec<usize>> {
    if slots.is_empty() || slots.iter().any(|s| s.alternatives.is_empty()) {
        return Vec::new();
    }
    let max_sum: usize = slots.iter().map(|s| s.alternatives.len() - 1).sum();
    let mut out = Vec::new();
    for sum in 0..=max_sum {
        let mut current = Vec::with_capacity(slots.len());
        collect_with_sum(slots, sum, &mut current, &mut out);
        if out.len() >= MAX_PRIMARY_HYPOTHESES {
            break;
        }
    }
    out.truncate(MAX_PRIMARY_HYPOTHESES);
    out
}

fn collect_with_sum(slots: &[Slot<'_>], remaining: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    let depth = current.len();
    if depth == slots.len() {
        if remaining == 0 {
            let ids: HashSet<&String> = current.iter().zip(slots).map(|(&i, s)| &s.alternatives[i]).collect();
            if ids.len() == current.len() {
                out.push(current.clone());
            }
        }
        return;
    }
    let limit = (slots[depth].alternatives.len() - 1).min(remaining);
    for i in 0..=limit {
        current.push(i);
        collect_with_sum(slots, remaining - i, current, out);
        current.pop();
    }
}
