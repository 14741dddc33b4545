use std::collections::BTreeSet;

use super::{ObjectNode, Room, SceneGraph};

/// Normalized edit distance at or below which a name counts as a fuzzy match.
pub const DEFAULT_FUZZY_THRESHOLD: f64 = 0.34;

/// Match quality, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MatchKind {
    ExactLabel,
    ExactSynonym,
    TokenSubset,
    Fuzzy,
}

#[derive(Debug, Clone, Copy)]
pub struct NameMatch<'a> {
    pub object: &'a ObjectNode,
    pub kind: MatchKind,
    /// Normalized edit distance for fuzzy matches, 0 otherwise.
    pub distance: f64,
}

/// Lowercase, map punctuation to spaces and collapse whitespace.
pub fn normalize_phrase(phrase: &str) -> String {
    let mapped: String = phrase
        .chars()
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect();
    mapped.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn tokens(s: &str) -> BTreeSet<&str> {
    s.split(' ').filter(|t| !t.is_empty()).collect()
}

fn edit_distance(a: &str, b: &str) -> f64 {
    1.0 - strsim::normalized_levenshtein(a, b)
}

fn classify(phrase: &str, object: &ObjectNode, threshold: f64) -> Option<(MatchKind, f64)> {
    let label = normalize_phrase(&object.label);
    if label == phrase {
        return Some((MatchKind::ExactLabel, 0.0));
    }
    let synonyms: Vec<String> = object.synonyms.iter().map(|s| normalize_phrase(s)).collect();
    if synonyms.iter().any(|s| s == phrase) {
        return Some((MatchKind::ExactSynonym, 0.0));
    }
    let wanted = tokens(phrase);
    let names = std::iter::once(&label).chain(synonyms.iter());
    if names.clone().any(|n| wanted.is_subset(&tokens(n))) {
        return Some((MatchKind::TokenSubset, 0.0));
    }
    let best = names
        .map(|n| edit_distance(phrase, n))
        .fold(f64::INFINITY, f64::min);
    (best <= threshold).then_some((MatchKind::Fuzzy, best))
}

impl SceneGraph {
    /// Objects whose label or synonyms match `phrase`, best match first.
    pub fn match_by_name(&self, phrase: &str) -> Vec<NameMatch<'_>> {
        self.match_by_name_with(phrase, DEFAULT_FUZZY_THRESHOLD)
    }

    pub fn match_by_name_with(&self, phrase: &str, fuzzy_threshold: f64) -> Vec<NameMatch<'_>> {
        let phrase = normalize_phrase(phrase);
        if phrase.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<NameMatch<'_>> = self
            .objects()
            .iter()
            .filter_map(|object| {
                classify(&phrase, object, fuzzy_threshold)
                    .map(|(kind, distance)| NameMatch { object, kind, distance })
            })
            .collect();
        hits.sort_by(|a, b| {
            a.kind
                .cmp(&b.kind)
                .then(a.distance.total_cmp(&b.distance))
                .then_with(|| a.object.id.cmp(&b.object.id))
        });
        hits
    }

    /// Room whose label or id equals `phrase` after normalization.
    pub fn room_by_name(&self, phrase: &str) -> Option<&Room> {
        let phrase = normalize_phrase(phrase);
        if phrase.is_empty() {
            return None;
        }
        let mut rooms: Vec<&Room> = self
            .rooms()
            .iter()
            .filter(|r| normalize_phrase(&r.label) == phrase || normalize_phrase(&r.id) == phrase)
            .collect();
        rooms.sort_by(|a, b| a.id.cmp(&b.id));
        rooms.into_iter().next()
    }
}

#[cfg(test)]
mod tests {
    use crate::scene::load_scene;

    const SCENE: &str = r#"{
        "version": "1",
        "rooms": [{"id": "kitchen", "label": "Kitchen", "centroid": [0, 0, 0]},
                  {"id": "living", "label": "Living Room", "centroid": [5, 0, 0]}],
        "objects": [
          {"id": "glass_1", "label": "wine glass", "category": "glassware", "position": [1, 0, 1], "room": "kitchen"},
          {"id": "wine_1", "label": "wine", "synonyms": ["red wine"], "category": "drink", "position": [2, 0, 1], "room": "kitchen"},
          {"id": "pepper_1", "label": "pepper shaker", "synonyms": ["pepper"], "category": "condiment", "position": [2, 1, 1], "room": "kitchen"},
          {"id": "salt_1", "label": "salt shaker", "category": "condiment", "position": [2, 2, 1], "room": "kitchen"},
          {"id": "tv", "label": "TV", "synonyms": ["television"], "category": "appliance", "position": [6, 0, 1], "room": "living"}
        ]
    }"#;

    fn ids(phrase: &str) -> Vec<String> {
        let scene = load_scene(SCENE.as_bytes()).unwrap();
        scene.match_by_name(phrase).iter().map(|m| m.object.id.clone()).collect()
    }

    #[test]
    fn exact_label_beats_token_subset() {
        assert_eq!(ids("wine"), vec!["wine_1", "glass_1"]);
    }

    #[test]
    fn multiword_label_ranks_first() {
        assert_eq!(ids("pepper shaker")[0], "pepper_1");
        assert_eq!(ids("Pepper Shaker!")[0], "pepper_1");
    }

    #[test]
    fn synonyms_and_case() {
        assert_eq!(ids("Television"), vec!["tv"]);
        assert_eq!(ids("tv"), vec!["tv"]);
    }

    #[test]
    fn fuzzy_tolerates_small_typos() {
        assert_eq!(ids("peper shaker")[0], "pepper_1");
        assert_eq!(ids("televison"), vec!["tv"]);
    }

    #[test]
    fn nothing_above_threshold() {
        assert!(ids("xylophone").is_empty());
        assert!(ids("  ").is_empty());
    }

    #[test]
    fn room_lookup() {
        let scene = load_scene(SCENE.as_bytes()).unwrap();
        assert_eq!(scene.room_by_name("living room").unwrap().id, "living");
        assert!(scene.room_by_name("garage").is_none());
    }
}
