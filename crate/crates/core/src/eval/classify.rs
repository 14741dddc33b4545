use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::GroundTruth;
use crate::disambiguation::{CandidateSet, Destination, ParsedUtterance, TaskType};
use crate::session::MultimodalCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ErrorClass {
    VoiceInput,
    Pointing,
    Interpretation,
    Separation,
    Other,
}

/// Everything known about a failed final attempt.
#[derive(Debug, Clone, Copy)]
pub struct TrialContext<'a> {
    pub ground_truth: &'a GroundTruth,
    pub transcript: &'a str,
    pub parsed: &'a ParsedUtterance,
    pub command: Option<&'a MultimodalCommand>,
    pub candidates: Option<&'a CandidateSet>,
    /// Session or resolver error that ended the attempt.
    pub failure: Option<&'a str>,
}

/// Tasks a spoken verb can plausibly stand for.
fn verb_fits(spoken: TaskType, truth: TaskType) -> bool {
    use TaskType::*;
    spoken == truth
        || matches!(
            (spoken, truth),
            (Fetch, Move) | (Move, Fetch) | (Move, GoTo) | (GoTo, Move) | (CheckPresence, CheckState) | (CheckState, CheckPresence) | (GoTo, Dock) | (Dock, GoTo)
        )
}

/// Decision order: VoiceInput, Pointing, Separation, Interpretation, Other. Pipeline errors
/// short-circuit to Other.
pub fn classify_error(ctx: &TrialContext<'_>) -> ErrorClass {
    let (Some(command), Some(candidates), None) = (ctx.command, ctx.candidates, ctx.failure) else {
        return ErrorClass::Other;
    };
    let truth = ctx.ground_truth;
    let truth_ids: BTreeSet<&str> = truth.referenced_ids().into_iter().collect();

    if !ctx.transcript.trim().is_empty() {
        let parsed = ctx.parsed;
        let garbled = !parsed.unknown_words.is_empty();
        let wrong_verb = parsed.tasks.first().is_some_and(|t| !verb_fits(*t, truth.task));
        let wrong_name = parsed.mentions.iter().any(|m| {
            let named: Vec<&str> = m.objects.iter().map(String::as_str).chain(m.room.as_deref()).collect();
            !named.is_empty() && !named.iter().any(|id| truth_ids.contains(id))
        });
        if garbled || wrong_verb || wrong_name {
            return ErrorClass::VoiceInput;
        }
    }

    let voiced: BTreeSet<&str> = ctx
        .parsed
        .mentions
        .iter()
        .flat_map(|m| m.objects.iter().map(String::as_str).chain(m.room.as_deref()))
        .collect();
    let pointed: BTreeSet<&str> = command.possible_objects.iter().flatten().map(|p| p.object_id.as_str()).collect();
    if truth_ids.iter().any(|id| !voiced.contains(id) && !pointed.contains(id)) {
        return ErrorClass::Pointing;
    }

    if truth.targets.len() >= 2 {
        let union: BTreeSet<&str> = candidates.candidates.iter().flat_map(|c| c.targets.iter().map(String::as_str)).collect();
        let covered = truth.targets.iter().all(|t| union.contains(t.as_str()));
        let single = candidates.candidates.iter().any(|c| truth.targets.iter().all(|t| c.targets.contains(t)));
        if covered && !single {
            return ErrorClass::Separation;
        }
    }

    // The evidence was all there; the candidate set just did not contain the instruction.
    let destination_known = match &truth.destination {
        None | Some(Destination::User) => true,
        Some(Destination::Place(p)) => voiced.contains(p.as_str()) || pointed.contains(p.as_str()),
    };
    if destination_known {
        return ErrorClass::Interpretation;
    }
    ErrorClass::Other
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disambiguation::testkit::living_room;
    use crate::disambiguation::BaselineResolver;
    use crate::eval::tests::scenario;
    use crate::eval::{replay, EvalContext};
    use crate::targeting::AngleConfig;
    use crate::targeting::ModalityKind::{Gaze, IndexRight};

    fn class_of(s: &crate::eval::Scenario) -> Option<ErrorClass> {
        let resolver = BaselineResolver::default();
        replay(s, &living_room(), &EvalContext::new(AngleConfig::default(), &resolver)).error_class
    }

    #[test]
    fn nonexistent_name_is_voice_input() {
        let s = scenario("v", "bring me the unicorn", &[&[(Gaze, "plant")]], TaskType::Fetch, &["door"]);
        assert_eq!(class_of(&s), Some(ErrorClass::VoiceInput));
    }

    #[test]
    fn misheard_name_is_voice_input() {
        let s = scenario("v2", "bring me the wine", &[&[(Gaze, "cola")]], TaskType::Fetch, &["remote"]);
        assert_eq!(class_of(&s), Some(ErrorClass::VoiceInput));
    }

    #[test]
    fn target_outside_rays_is_pointing() {
        // The door sits opposite the plant on the circle, far outside every cone.
        let s = scenario("p", "check that", &[&[(Gaze, "plant"), (IndexRight, "plant")]], TaskType::CheckPresence, &["door"]);
        assert_eq!(class_of(&s), Some(ErrorClass::Pointing));
    }

    #[test]
    fn split_targets_are_separation() {
        let scene = living_room();
        let s = scenario("s", "bring me that", &[&[(Gaze, "cola")]], TaskType::Fetch, &["cola", "wine"]);
        let mut cmd = crate::disambiguation::testkit::command(&scene, "bring me that", &[&[(Gaze, "cola")]]);
        // Both targets were seen; the set only offers them one at a time.
        cmd.possible_objects[0].push(crate::targeting::PossibleObject {
            object_id: "wine".into(),
            modality: Gaze,
            offset: 5.0,
            tier: crate::targeting::Tier::Low,
            distance: 3.0,
        });
        let set = crate::disambiguation::baseline_rank(&cmd, &scene).unwrap();
        let parsed = crate::disambiguation::parse_utterance("bring me that", &scene, &Default::default(), 0.34);
        let ctx = TrialContext {
            ground_truth: &s.ground_truth,
            transcript: "bring me that",
            parsed: &parsed,
            command: Some(&cmd),
            candidates: Some(&set),
            failure: None,
        };
        assert_eq!(classify_error(&ctx), ErrorClass::Separation);
    }

    #[test]
    fn present_evidence_wrong_task_is_interpretation() {
        let mut s = scenario("i", "", &[&[(Gaze, "cup")], &[(Gaze, "table")]], TaskType::Move, &["cup"]);
        s.ground_truth.destination = Some(Destination::Place("table".into()));
        assert_eq!(class_of(&s), Some(ErrorClass::Interpretation));
    }

    #[test]
    fn pipeline_error_is_other() {
        let s = scenario("o", "bring that", &[&[(Gaze, "cola")]], TaskType::Fetch, &["cola"]);
        let parsed = ParsedUtterance::default();
        let ctx = TrialContext {
            ground_truth: &s.ground_truth,
            transcript: "",
            parsed: &parsed,
            command: None,
            candidates: None,
            failure: Some("resolver did not answer"),
        };
        assert_eq!(classify_error(&ctx), ErrorClass::Other);
    }
}
