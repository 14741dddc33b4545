//! Transcript parsing: task verbs, object mentions and leftover content words.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TaskType;
use crate::scene::{normalize_phrase, MatchKind, SceneGraph};

const MAX_MENTION_TOKENS: usize = 4;
const MIN_FUZZY_CHARS: usize = 4;

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "me", "my", "mine", "to", "please", "of", "and", "with", "for", "on", "off", "in", "into",
    "onto", "at", "from", "is", "are", "was", "can", "could", "would", "will", "you", "your", "i", "up", "over",
    "some", "just", "now", "also", "then", "next", "beside", "near", "by", "under", "whether", "if", "still",
    "hey", "robot", "ok", "okay", "um", "uh", "hmm", "so", "too", "us", "we", "our", "back", "here", "there",
    "open", "closed", "running", "this", "that", "it", "these", "those", "them", "one", "do", "does", "let",
];

const DEICTICS: &[&str] = &["this", "that", "it", "these", "those", "them", "there", "here", "one"];

const DESTINATION_PREPOSITIONS: &[&str] = &["to", "onto", "into", "on", "in", "beside", "near", "by", "under", "next"];

/// Words that turn an "is ... ?" question into a state check, and the attribute they probe.
const STATE_WORDS: &[(&str, &str)] = &[
    ("on", "power"),
    ("off", "power"),
    ("running", "power"),
    ("open", "open"),
    ("closed", "open"),
];

const QUESTION_LEADS: &[&str] = &["is", "are", "was"];

/// Verb phrase → task lexicon; multi-word phrases win over their single-word prefixes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub phrases: BTreeMap<String, TaskType>,
}

impl Default for Lexicon {
    fn default() -> Self {
        use TaskType::*;
        let entries: &[(&str, TaskType)] = &[
            ("bring", Fetch),
            ("take", Fetch),
            ("get", Fetch),
            ("fetch", Fetch),
            ("grab", Fetch),
            ("give", Fetch),
            ("hand", Fetch),
            ("deliver", Fetch),
            ("move", Move),
            ("put", Move),
            ("place", Move),
            ("relocate", Move),
            ("go", Move),
            ("check", CheckPresence),
            ("inspect", CheckPresence),
            ("look", CheckPresence),
            ("see", CheckPresence),
            ("find", CheckPresence),
            ("come back", GoTo),
            ("come here", GoTo),
            ("come", GoTo),
            ("go back", GoTo),
            ("go to", GoTo),
            ("return", GoTo),
            ("dock", Dock),
            ("charge", Dock),
            ("recharge", Dock),
            ("go home", Dock),
            ("go charge", Dock),
        ];
        Lexicon { phrases: entries.iter().map(|(p, t)| (p.to_string(), *t)).collect() }
    }
}

impl Lexicon {
    pub fn extend(&mut self, extra: &BTreeMap<String, TaskType>) {
        for (phrase, task) in extra {
            self.phrases.insert(normalize_phrase(phrase), *task);
        }
    }

    fn longest_at(&self, tokens: &[&str], i: usize) -> Option<(usize, TaskType)> {
        (1..=3.min(tokens.len() - i)).rev().find_map(|n| {
            let phrase = tokens[i..i + n].join(" ");
            self.phrases.get(&phrase).map(|t| (n, *t))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mention {
    pub text: String,
    /// Token index of the first word.
    pub position: usize,
    /// Object ids, best name match first.
    pub objects: Vec<String>,
    pub room: Option<String>,
    /// Mention follows a destination preposition ("to the table").
    pub after_preposition: bool,
}

impl Mention {
    /// Exactly one object fits the name.
    pub fn unique_object(&self) -> Option<&str> {
        match self.objects.as_slice() {
            [only] => Some(only),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedUtterance {
    pub tokens: Vec<String>,
    /// Tasks in spoken order.
    pub tasks: Vec<TaskType>,
    pub mentions: Vec<Mention>,
    /// (attribute, expected value) when the utterance is a yes/no state question.
    pub state_query: Option<(String, String)>,
    pub deictic: bool,
    /// Content words that are neither verbs, function words nor scene names.
    pub unknown_words: Vec<String>,
}

impl ParsedUtterance {
    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn named_objects(&self) -> impl Iterator<Item = &Mention> {
        self.mentions.iter().filter(|m| !m.objects.is_empty())
    }
}

fn is_stop(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

pub fn word_count(transcript: &str) -> usize {
    transcript.split_whitespace().count()
}

/// Parse a transcript against a scene.
pub fn parse_utterance(transcript: &str, scene: &SceneGraph, lexicon: &Lexicon, fuzzy_threshold: f64) -> ParsedUtterance {
    let normalized = normalize_phrase(transcript);
    let tokens: Vec<&str> = normalized.split(' ').filter(|t| !t.is_empty()).collect();
    let mut parsed = ParsedUtterance { tokens: tokens.iter().map(|t| t.to_string()).collect(), ..Default::default() };
    if tokens.is_empty() {
        return parsed;
    }
    parsed.deictic = tokens.iter().any(|t| DEICTICS.contains(t));

    let question = QUESTION_LEADS.contains(&tokens[0]);
    if question {
        if let Some((word, attr)) = tokens.iter().rev().find_map(|t| STATE_WORDS.iter().find(|(w, _)| w == t)) {
            parsed.state_query = Some((attr.to_string(), word.to_string()));
        }
    }

    let mut i = 0;
    let mut last_preposition: Option<usize> = None;
    while i < tokens.len() {
        if let Some((n, task)) = lexicon.longest_at(&tokens, i) {
            // "is the TV on" style questions are state checks, not commands.
            if !(question && parsed.state_query.is_some()) {
                parsed.tasks.push(task);
            }
            i += n;
            continue;
        }
        let token = tokens[i];
        if DESTINATION_PREPOSITIONS.contains(&token) {
            last_preposition = Some(i);
        }
        if is_stop(token) {
            i += 1;
            continue;
        }
        if let Some((n, mention)) = ground_span(&tokens, i, scene, fuzzy_threshold, lexicon) {
            let after_preposition = last_preposition.is_some_and(|p| {
                tokens[p + 1..i].iter().all(|t| matches!(*t, "a" | "an" | "the" | "my" | "your" | "to"))
            });
            parsed.mentions.push(Mention { after_preposition, ..mention });
            i += n;
            continue;
        }
        if !STATE_WORDS.iter().any(|(w, _)| *w == token) {
            parsed.unknown_words.push(token.to_string());
        }
        i += 1;
    }
    if question && parsed.state_query.is_some() {
        parsed.tasks.insert(0, TaskType::CheckState);
    } else if question && parsed.tasks.is_empty() && !parsed.mentions.is_empty() {
        // "is my bag there?"
        parsed.tasks.push(TaskType::CheckPresence);
    }
    parsed
}

fn ground_span(
    tokens: &[&str],
    start: usize,
    scene: &SceneGraph,
    fuzzy_threshold: f64,
    lexicon: &Lexicon,
) -> Option<(usize, Mention)> {
    let max_n = MAX_MENTION_TOKENS.min(tokens.len() - start);
    for n in (1..=max_n).rev() {
        let span = &tokens[start..start + n];
        let last = span[n - 1];
        if is_stop(last) || (n > 1 && lexicon.longest_at(tokens, start + n - 1).is_some()) {
            continue;
        }
        let phrase = span.join(" ");
        let hits = scene.match_by_name_with(&phrase, fuzzy_threshold);
        let best_kind = hits.first().map(|h| h.kind);
        let objects: Vec<String> = match best_kind {
            Some(MatchKind::ExactLabel | MatchKind::ExactSynonym) => hits
                .iter()
                .filter(|h| matches!(h.kind, MatchKind::ExactLabel | MatchKind::ExactSynonym))
                .map(|h| h.object.id.clone())
                .collect(),
            Some(MatchKind::TokenSubset) => {
                hits.iter().filter(|h| h.kind == MatchKind::TokenSubset).map(|h| h.object.id.clone()).collect()
            }
            Some(MatchKind::Fuzzy) if phrase.len() >= MIN_FUZZY_CHARS => {
                let best = hits[0].distance;
                hits.iter().filter(|h| h.distance == best).map(|h| h.object.id.clone()).collect()
            }
            _ => Vec::new(),
        };
        let room = scene.room_by_name(&phrase).map(|r| r.id.clone());
        if objects.is_empty() && room.is_none() {
            continue;
        }
        // Prefer exact room names over partial object-name hits ("kitchen" vs "kitchen towel").
        let objects = if room.is_some() && !matches!(best_kind, Some(MatchKind::ExactLabel | MatchKind::ExactSynonym)) {
            Vec::new()
        } else {
            objects
        };
        return Some((n, Mention { text: phrase, position: start, objects, room, after_preposition: false }));
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::load_scene;

    const SCENE: &str = r#"{
        "version": "1",
        "rooms": [{"id": "kitchen", "label": "Kitchen", "centroid": [0, 0, 0]},
                  {"id": "living", "label": "Living Room", "centroid": [5, 0, 0]}],
        "objects": [
          {"id": "wine_1", "label": "wine", "category": "drink", "position": [2, 0, 1], "room": "kitchen"},
          {"id": "glass_1", "label": "wine glass", "category": "glassware", "position": [1, 0, 1], "room": "kitchen"},
          {"id": "pepper_1", "label": "pepper shaker", "category": "condiment", "position": [2, 1, 1], "room": "kitchen"},
          {"id": "water_1", "label": "bottle of water", "synonyms": ["water"], "category": "drink", "position": [2, 2, 1], "room": "kitchen"},
          {"id": "table_1", "label": "table", "category": "furniture", "position": [6, 0, 0], "room": "living"},
          {"id": "tv", "label": "TV", "category": "appliance", "position": [6, 1, 1], "room": "living", "state": {"power": "off"}}
        ]
    }"#;

    fn parse(text: &str) -> ParsedUtterance {
        let scene = load_scene(SCENE.as_bytes()).unwrap();
        parse_utterance(text, &scene, &Lexicon::default(), crate::scene::DEFAULT_FUZZY_THRESHOLD)
    }

    #[test]
    fn explicit_fetch() {
        let p = parse("Bring me the wine");
        assert_eq!(p.tasks, vec![TaskType::Fetch]);
        assert_eq!(p.mentions.len(), 1);
        assert_eq!(p.mentions[0].objects, vec!["wine_1"]);
        assert!(p.unknown_words.is_empty());
    }

    #[test]
    fn implicit_fetch_is_deictic() {
        let p = parse("Bring me that.");
        assert_eq!(p.tasks, vec![TaskType::Fetch]);
        assert!(p.mentions.is_empty());
        assert!(p.deictic);
    }

    #[test]
    fn longest_name_wins() {
        let p = parse("bottle of water please");
        assert_eq!(p.mentions[0].objects, vec!["water_1"]);
        let p = parse("the wine glass");
        assert_eq!(p.mentions[0].objects, vec!["glass_1"]);
    }

    #[test]
    fn move_with_destination() {
        let p = parse("Pepper shaker ... Move");
        assert_eq!(p.tasks, vec![TaskType::Move]);
        assert_eq!(p.mentions[0].objects, vec!["pepper_1"]);
        let p = parse("move the wine to the table");
        assert!(!p.mentions[0].after_preposition);
        assert!(p.mentions[1].after_preposition);
        let p = parse("put the wine in the living room");
        assert_eq!(p.mentions[1].room.as_deref(), Some("living"));
    }

    #[test]
    fn state_question() {
        let p = parse("Is TV on?");
        assert_eq!(p.tasks, vec![TaskType::CheckState]);
        assert_eq!(p.state_query, Some(("power".into(), "on".into())));
        assert_eq!(p.mentions[0].objects, vec!["tv"]);
    }

    #[test]
    fn come_back_and_check() {
        assert_eq!(parse("Come back").tasks, vec![TaskType::GoTo]);
        assert_eq!(parse("Check.").tasks, vec![TaskType::CheckPresence]);
        assert_eq!(parse("go charge").tasks, vec![TaskType::Dock]);
    }

    #[test]
    fn unknown_content_words_are_reported() {
        let p = parse("Bring me the xylophone");
        assert!(p.mentions.is_empty());
        assert_eq!(p.unknown_words, vec!["xylophone"]);
    }

    #[test]
    fn verbs_are_not_fuzzy_matched() {
        // "bring" is one edit away from nothing in the scene, but must never ground.
        let p = parse("bring");
        assert!(p.mentions.is_empty());
    }

    #[test]
    fn empty_transcript() {
        let p = parse("   ");
        assert!(p.is_empty());
        assert!(p.tasks.is_empty());
    }
}
