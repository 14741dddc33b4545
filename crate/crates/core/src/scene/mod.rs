//! Scene graph: the world model every ray and every spoken name is grounded against.
//!
//! Scenes enter as JSON documents (format version `"1"`), are validated once on load and
//! are immutable afterwards, so a loaded [`SceneGraph`] can be shared freely between threads.

mod names;
mod prompt;
mod vec3;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use names::{normalize_phrase, MatchKind, NameMatch, DEFAULT_FUZZY_THRESHOLD};
pub use vec3::Vec3;

pub const SCENE_FORMAT_VERSION: &str = "1";

/// Id that destinations use for the user; no room or object may take it.
pub const RESERVED_USER_ID: &str = "user";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("scene schema error: {0}")]
    Schema(String),
    #[error("scene integrity error: {0}")]
    Integrity(String),
    #[error("unsupported scene version {found:?} (expected {SCENE_FORMAT_VERSION:?})")]
    Version { found: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Affordance {
    Portable,
    Container,
    Surface,
    Inspectable,
    Toggleable,
    Dock,
    Destination,
}

impl Affordance {
    pub fn as_str(self) -> &'static str {
        match self {
            Affordance::Portable => "portable",
            Affordance::Container => "container",
            Affordance::Surface => "surface",
            Affordance::Inspectable => "inspectable",
            Affordance::Toggleable => "toggleable",
            Affordance::Dock => "dock",
            Affordance::Destination => "destination",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub id: String,
    pub label: String,
    pub centroid: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectNode {
    pub id: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
    pub category: String,
    pub position: Vec3,
    #[serde(default)]
    pub bounding_radius: f64,
    pub room: String,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub affordances: BTreeSet<Affordance>,
    #[serde(default, rename = "state", skip_serializing_if = "BTreeMap::is_empty")]
    pub state_attributes: BTreeMap<String, String>,
}

impl ObjectNode {
    pub fn has(&self, affordance: Affordance) -> bool {
        self.affordances.contains(&affordance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationKind {
    InRoom,
    On,
    Inside,
    Near,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Relation {
    pub kind: RelationKind,
    pub subject: String,
    pub object: String,
}

#[derive(Debug, Deserialize)]
struct SceneDocument {
    version: String,
    rooms: Vec<Room>,
    objects: Vec<ObjectNode>,
    #[serde(default)]
    relations: Vec<Relation>,
}

#[derive(Serialize)]
struct SceneDocumentRef<'a> {
    version: &'a str,
    rooms: &'a [Room],
    objects: &'a [ObjectNode],
    relations: &'a [Relation],
}

/// A validated, immutable scene.
#[derive(Debug, Clone)]
pub struct SceneGraph {
    version: String,
    rooms: Vec<Room>,
    objects: Vec<ObjectNode>,
    relations: Vec<Relation>,
    object_index: HashMap<String, usize>,
    room_index: HashMap<String, usize>,
}

impl PartialEq for SceneGraph {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.rooms == other.rooms
            && self.objects == other.objects
            && self.relations == other.relations
    }
}

/// Parse and validate a scene document.
pub fn load_scene(document: &[u8]) -> Result<SceneGraph, SceneError> {
    let text = std::str::from_utf8(document)
        .map_err(|e| SceneError::Schema(format!("document is not UTF-8: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| SceneError::Schema(e.to_string()))?;
    match value.get("version") {
        Some(serde_json::Value::String(v)) if v != SCENE_FORMAT_VERSION => {
            return Err(SceneError::Version { found: v.clone() })
        }
        Some(serde_json::Value::String(_)) => {}
        Some(other) => {
            return Err(SceneError::Schema(format!("`version` must be a string, got {other}")))
        }
        None => return Err(SceneError::Schema("missing field `version`".into())),
    }
    let doc: SceneDocument =
        serde_json::from_value(value).map_err(|e| SceneError::Schema(e.to_string()))?;
    SceneGraph::from_parts(doc.version, doc.rooms, doc.objects, doc.relations)
}

impl SceneGraph {
    /// Build a scene from parts, enforcing every invariant `load_scene` enforces.
    pub fn from_parts(
        version: impl Into<String>,
        rooms: Vec<Room>,
        objects: Vec<ObjectNode>,
        relations: Vec<Relation>,
    ) -> Result<Self, SceneError> {
        let version = version.into();
        if version != SCENE_FORMAT_VERSION {
            return Err(SceneError::Version { found: version });
        }
        let scene = SceneGraph {
            object_index: objects.iter().enumerate().map(|(i, o)| (o.id.clone(), i)).collect(),
            room_index: rooms.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect(),
            version,
            rooms,
            objects,
            relations,
        };
        scene.validate()?;
        Ok(scene)
    }

    fn validate(&self) -> Result<(), SceneError> {
        let integrity = |msg: String| Err(SceneError::Integrity(msg));
        if self.rooms.is_empty() {
            return integrity("scene has no rooms".into());
        }
        if self.objects.is_empty() {
            return integrity("scene has no objects".into());
        }
        if self.room_index.len() != self.rooms.len() {
            let dup = first_duplicate(self.rooms.iter().map(|r| r.id.as_str()));
            return integrity(format!("duplicate room id {:?}", dup.unwrap_or_default()));
        }
        if self.object_index.len() != self.objects.len() {
            let dup = first_duplicate(self.objects.iter().map(|o| o.id.as_str()));
            return integrity(format!("duplicate object id {:?}", dup.unwrap_or_default()));
        }
        if let Some(id) = self.room_index.keys().chain(self.object_index.keys()).find(|id| *id == RESERVED_USER_ID) {
            return integrity(format!("id {id:?} is reserved for the user"));
        }
        for room in &self.rooms {
            if room.id.is_empty() {
                return integrity("room with empty id".into());
            }
            if !room.centroid.is_finite() {
                return integrity(format!("room {:?} has a non-finite centroid", room.id));
            }
        }
        for obj in &self.objects {
            if obj.id.is_empty() {
                return integrity("object with empty id".into());
            }
            if self.room_index.contains_key(&obj.id) {
                return integrity(format!("object id {:?} collides with a room id", obj.id));
            }
            if obj.label.trim().is_empty() {
                return integrity(format!("object {:?} has an empty label", obj.id));
            }
            if !obj.position.is_finite() {
                return integrity(format!("object {:?} has a non-finite position", obj.id));
            }
            if !(obj.bounding_radius.is_finite() && obj.bounding_radius >= 0.0) {
                return integrity(format!("object {:?} has an invalid bounding_radius", obj.id));
            }
            if !self.room_index.contains_key(&obj.room) {
                return integrity(format!("object {:?} references unknown room {:?}", obj.id, obj.room));
            }
        }

        let mut inside_parent: HashMap<&str, &str> = HashMap::new();
        let mut support: HashMap<&str, Vec<&str>> = HashMap::new();
        for rel in &self.relations {
            let Some(subject) = self.object(&rel.subject) else {
                return integrity(format!("relation subject {:?} is not an object", rel.subject));
            };
            if rel.subject == rel.object {
                return integrity(format!("relation on {:?} points at itself", rel.subject));
            }
            match rel.kind {
                RelationKind::InRoom => {
                    if !self.room_index.contains_key(&rel.object) {
                        return integrity(format!("in_room target {:?} is not a room", rel.object));
                    }
                    if subject.room != rel.object {
                        return integrity(format!(
                            "object {:?} declares room {:?} but in_room says {:?}",
                            rel.subject, subject.room, rel.object
                        ));
                    }
                }
                RelationKind::On | RelationKind::Inside => {
                    if !self.object_index.contains_key(&rel.object) {
                        return integrity(format!("relation target {:?} is not an object", rel.object));
                    }
                    if rel.kind == RelationKind::Inside
                        && inside_parent.insert(&rel.subject, &rel.object).is_some()
                    {
                        return integrity(format!("object {:?} is inside more than one parent", rel.subject));
                    }
                    support.entry(&rel.subject).or_default().push(&rel.object);
                }
                RelationKind::Near => {
                    if !self.object_index.contains_key(&rel.object)
                        && !self.room_index.contains_key(&rel.object)
                    {
                        return integrity(format!("relation target {:?} does not exist", rel.object));
                    }
                }
            }
        }
        if let Some(id) = find_cycle(&support) {
            return integrity(format!("containment cycle through {id:?}"));
        }
        Ok(())
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn objects(&self) -> &[ObjectNode] {
        &self.objects
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    /// Exact, case-sensitive id lookup.
    pub fn object(&self, id: &str) -> Option<&ObjectNode> {
        self.object_index.get(id).map(|&i| &self.objects[i])
    }

    pub fn room(&self, id: &str) -> Option<&Room> {
        self.room_index.get(id).map(|&i| &self.rooms[i])
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.object_index.contains_key(id) || self.room_index.contains_key(id)
    }

    /// The object (or room) this object sits in or on, preferring `inside` over `on`.
    pub fn container_of(&self, id: &str) -> Option<(RelationKind, &str)> {
        let mut on = None;
        for rel in self.relations.iter().filter(|r| r.subject == id) {
            match rel.kind {
                RelationKind::Inside => return Some((rel.kind, rel.object.as_str())),
                RelationKind::On if on.is_none() => on = Some((rel.kind, rel.object.as_str())),
                _ => {}
            }
        }
        on
    }

    /// Serialize back to the scene document format.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SceneDocumentRef {
            version: &self.version,
            rooms: &self.rooms,
            objects: &self.objects,
            relations: &self.relations,
        })
        .expect("scene serialization cannot fail")
    }
}

/// Look up an object by its exact id.
pub fn object_by_id<'a>(scene: &'a SceneGraph, id: &str) -> Option<&'a ObjectNode> {
    scene.object(id)
}

fn first_duplicate<'a>(ids: impl Iterator<Item = &'a str>) -> Option<String> {
    let mut seen = HashSet::new();
    ids.into_iter().find(|id| !seen.insert(*id)).map(str::to_owned)
}

fn find_cycle<'a>(edges: &HashMap<&'a str, Vec<&'a str>>) -> Option<&'a str> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Active,
        Done,
    }
    fn visit<'a>(
        node: &'a str,
        edges: &HashMap<&'a str, Vec<&'a str>>,
        marks: &mut HashMap<&'a str, Mark>,
    ) -> Option<&'a str> {
        match marks.get(node) {
            Some(Mark::Active) => return Some(node),
            Some(Mark::Done) => return None,
            None => {}
        }
        marks.insert(node, Mark::Active);
        for &next in edges.get(node).into_iter().flatten() {
            if let Some(hit) = visit(next, edges, marks) {
                return Some(hit);
            }
        }
        marks.insert(node, Mark::Done);
        None
    }

    let mut marks = HashMap::new();
    let mut starts: Vec<&str> = edges.keys().copied().collect();
    starts.sort_unstable();
    starts.into_iter().find_map(|s| visit(s, edges, &mut marks))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "version": "1",
        "rooms": [{"id": "kitchen", "label": "Kitchen", "centroid": [0, 0, 0]}],
        "objects": [{"id": "wine", "label": "wine", "category": "drink",
                     "position": [2, 0, 1], "room": "kitchen"}],
        "relations": []
    }"#;

    fn with_relations(relations: &str) -> String {
        format!(
            r#"{{"version":"1",
               "rooms":[{{"id":"kitchen","label":"Kitchen","centroid":[0,0,0]}}],
               "objects":[
                 {{"id":"a","label":"box","category":"c","position":[1,0,0],"room":"kitchen"}},
                 {{"id":"b","label":"crate","category":"c","position":[2,0,0],"room":"kitchen"}},
                 {{"id":"c","label":"shelf","category":"c","position":[3,0,0],"room":"kitchen"}}],
               "relations":{relations}}}"#
        )
    }

    #[test]
    fn loads_minimal_scene() {
        let scene = load_scene(MINIMAL.as_bytes()).unwrap();
        assert_eq!(scene.objects().len(), 1);
        assert_eq!(scene.rooms().len(), 1);
        let wine = scene.object("wine").unwrap();
        assert_eq!(wine.position, Vec3::new(2.0, 0.0, 1.0));
        assert_eq!(wine.bounding_radius, 0.0);
    }

    #[test]
    fn user_id_is_reserved() {
        let doc = MINIMAL.replace(r#""id": "wine""#, r#""id": "user""#);
        assert!(matches!(load_scene(doc.as_bytes()), Err(SceneError::Integrity(m)) if m.contains("reserved")));
    }

    #[test]
    fn ids_are_case_sensitive() {
        let scene = load_scene(MINIMAL.as_bytes()).unwrap();
        assert!(object_by_id(&scene, "wine").is_some());
        assert!(object_by_id(&scene, "WINE").is_none());
    }

    #[test]
    fn dangling_relation_subject_is_named() {
        let doc = with_relations(r#"[{"kind":"on","subject":"ghost","object":"a"}]"#);
        match load_scene(doc.as_bytes()) {
            Err(SceneError::Integrity(msg)) => assert!(msg.contains("ghost"), "{msg}"),
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn containment_cycle_is_rejected() {
        let doc = with_relations(
            r#"[{"kind":"inside","subject":"a","object":"b"},
                {"kind":"on","subject":"b","object":"c"},
                {"kind":"inside","subject":"c","object":"a"}]"#,
        );
        assert!(matches!(load_scene(doc.as_bytes()), Err(SceneError::Integrity(m)) if m.contains("cycle")));
    }

    #[test]
    fn second_inside_parent_is_rejected() {
        let doc = with_relations(
            r#"[{"kind":"inside","subject":"a","object":"b"},
                {"kind":"inside","subject":"a","object":"c"}]"#,
        );
        assert!(matches!(load_scene(doc.as_bytes()), Err(SceneError::Integrity(_))));
    }

    #[test]
    fn unsupported_version() {
        let doc = MINIMAL.replace(r#""version": "1""#, r#""version": "7""#);
        assert_eq!(
            load_scene(doc.as_bytes()),
            Err(SceneError::Version { found: "7".into() })
        );
    }

    #[test]
    fn malformed_documents_are_schema_errors() {
        assert!(matches!(load_scene(b"{not json"), Err(SceneError::Schema(_))));
        assert!(matches!(load_scene(b"{\"version\":\"1\"}"), Err(SceneError::Schema(_))));
        assert!(matches!(load_scene(&[0xff, 0xfe]), Err(SceneError::Schema(_))));
        let bad_pos = MINIMAL.replace("[2, 0, 1]", "[2, 0]");
        assert!(matches!(load_scene(bad_pos.as_bytes()), Err(SceneError::Schema(_))));
    }

    #[test]
    fn object_must_live_in_known_room() {
        let doc = MINIMAL.replace(r#""room": "kitchen""#, r#""room": "attic""#);
        assert!(matches!(load_scene(doc.as_bytes()), Err(SceneError::Integrity(m)) if m.contains("attic")));
    }

    #[test]
    fn negative_radius_is_rejected() {
        let doc = MINIMAL.replace(r#""room": "kitchen""#, r#""room": "kitchen", "bounding_radius": -0.1"#);
        assert!(matches!(load_scene(doc.as_bytes()), Err(SceneError::Integrity(_))));
    }

    #[test]
    fn json_round_trip() {
        let doc = with_relations(
            r#"[{"kind":"inside","subject":"a","object":"b"},
                {"kind":"in_room","subject":"c","object":"kitchen"},
                {"kind":"near","subject":"c","object":"a"}]"#,
        );
        let scene = load_scene(doc.as_bytes()).unwrap();
        let again = load_scene(scene.to_json().as_bytes()).unwrap();
        assert_eq!(scene, again);
        assert_eq!(scene.container_of("a"), Some((RelationKind::Inside, "b")));
    }
}
