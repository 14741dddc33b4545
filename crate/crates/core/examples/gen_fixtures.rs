//! Regenerates the scene, scenario and corpus fixtures under the workspace root.
//!
//! Usage: cargo run -p intenbot --example gen_fixtures [-- <out_dir>]
//!
//! Every crafted scenario is replayed after generation and the run aborts if one does not
//! behave as designed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{ensure, Context};
use intenbot::disambiguation::{BaselineResolver, Destination, TaskType};
use intenbot::eval::{replay, ErrorClass, EvalContext, Expectation, GroundTruth, Horizon, Occupation, Scenario, Tags, Visibility};
use intenbot::scene::{load_scene, SceneGraph, Vec3};
use intenbot::session::{HeadPose, LogRecord, Snapshot};
use intenbot::targeting::{AngleConfig, ModalityKind, Ray};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn main() -> anyhow::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../.."));
    for dir in ["scenes", "scenarios", "corpora", "fixtures"] {
        std::fs::create_dir_all(out.join(dir))?;
    }

    let home = write_scene(&out, "home7", home7_scene())?;
    let meeting = write_scene(&out, "meeting", meeting_scene())?;
    let planted = write_scene(&out, "planted", planted_scene())?;

    for (name, scenario) in fig8_scenarios(&meeting) {
        check_match(&scenario, &meeting, 1)?;
        std::fs::write(out.join(format!("scenarios/{name}.json")), serde_json::to_string_pretty(&scenario)? + "\n")?;
    }

    let planted_corpus = planted_scenarios(&planted);
    write_corpus(&out, "planted", &planted_corpus)?;

    let taxonomy = taxonomy_scenarios(&home)?;
    for s in &taxonomy {
        check_expectation(s, &home)?;
    }
    write_corpus(&out, "taxonomy", &taxonomy)?;

    write_corpus(&out, "home7_50", &home_corpus(&home))?;

    std::fs::write(out.join("fixtures/ring_conformance.json"), serde_json::to_string_pretty(&ring_conformance())? + "\n")?;
    println!("fixtures written to {}", out.display());
    Ok(())
}

// ---- geometry helpers ---------------------------------------------------------------------

fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

/// Unit vector perpendicular to `u`, rotated by `azimuth` degrees about it.
fn perpendicular(u: Vec3, azimuth: f64) -> Vec3 {
    let helper = if u.z.abs() < 0.9 { v(0.0, 0.0, 1.0) } else { v(1.0, 0.0, 0.0) };
    let a = u.cross(helper).normalized().unwrap();
    let b = u.cross(a).normalized().unwrap();
    let t = azimuth.to_radians();
    a * t.cos() + b * t.sin()
}

/// Ray from `origin` whose direction makes exactly `offset_deg` with the line to `target`.
fn ray_off(origin: Vec3, target: Vec3, offset_deg: f64, azimuth: f64) -> Ray {
    let u = (target - origin).normalized().unwrap();
    let t = offset_deg.to_radians();
    Ray::new(origin, u * t.cos() + perpendicular(u, azimuth) * t.sin()).unwrap()
}

fn ray_at(origin: Vec3, target: Vec3) -> Ray {
    Ray::towards(origin, target).unwrap()
}

fn looking_up(head: Vec3) -> Ray {
    Ray::new(head, v(0.0, 0.0, 1.0)).unwrap()
}

// ---- scenario helpers ---------------------------------------------------------------------

struct Shot {
    head: Vec3,
    gaze: Ray,
    fingers: Vec<(ModalityKind, Ray)>,
}

impl Shot {
    fn snapshot(&self) -> Snapshot {
        Snapshot {
            t: 0,
            gaze: self.gaze,
            fingers: self.fingers.iter().copied().collect(),
            head: HeadPose { position: self.head, facing: self.gaze.direction() },
        }
    }
}

/// touch, then a snapshot and press per shot, then release.
fn events(shots: &[Shot], hold_ms: u64) -> Vec<LogRecord> {
    let mut out = vec![LogRecord::Touch { t: 0 }];
    for (k, shot) in shots.iter().enumerate() {
        out.push(LogRecord::Snapshot(shot.snapshot()));
        out.push(LogRecord::Press { t: 150 + 300 * k as u64 });
    }
    out.push(LogRecord::Release { t: hold_ms.max(150 + 300 * shots.len() as u64) });
    out
}

fn truth(task: TaskType, targets: &[&str], destination: Option<&str>) -> GroundTruth {
    GroundTruth {
        task,
        targets: targets.iter().map(|s| s.to_string()).collect(),
        destination: destination.map(Destination::from),
    }
}

fn scenario(id: &str, scene_ref: &str, transcript: &str, shots: &[Shot], gt: GroundTruth) -> Scenario {
    Scenario {
        id: id.into(),
        scene_ref: scene_ref.into(),
        transcript: transcript.into(),
        events: events(shots, 900),
        ground_truth: gt,
        tags: Tags::default(),
        retries: vec![],
        expect: None,
    }
}

fn check_match(s: &Scenario, scene: &SceneGraph, rank: u8) -> anyhow::Result<()> {
    let resolver = BaselineResolver::default();
    let result = replay(s, scene, &EvalContext::new(AngleConfig::default(), &resolver));
    ensure!(result.match_rank == Some(rank), "{}: expected rank {rank}, got {:?} ({:?})", s.id, result.match_rank, result.top);
    Ok(())
}

fn check_expectation(s: &Scenario, scene: &SceneGraph) -> anyhow::Result<()> {
    let resolver = BaselineResolver::default();
    let result = replay(s, scene, &EvalContext::new(AngleConfig::default(), &resolver));
    if let Some(m) = result.expectation_mismatch(s) {
        anyhow::bail!("{m} (top {:?})", result.top);
    }
    Ok(())
}

fn write_scene(out: &Path, name: &str, doc: Value) -> anyhow::Result<SceneGraph> {
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    let scene = load_scene(text.as_bytes()).with_context(|| format!("scene {name}"))?;
    std::fs::write(out.join(format!("scenes/{name}.json")), text)?;
    Ok(scene)
}

fn write_corpus(out: &Path, name: &str, scenarios: &[Scenario]) -> anyhow::Result<()> {
    let mut text = String::new();
    for s in scenarios {
        text.push_str(&serde_json::to_string(s)?);
        text.push('\n');
    }
    std::fs::write(out.join(format!("corpora/{name}.jsonl")), text)?;
    Ok(())
}

// ---- scenes -------------------------------------------------------------------------------

struct Spec {
    label: &'static str,
    category: &'static str,
    affordances: &'static [&'static str],
    state: &'static [(&'static str, &'static str)],
    synonyms: &'static [&'static str],
    z: f64,
}

const fn o(label: &'static str, category: &'static str, affordances: &'static [&'static str], z: f64) -> Spec {
    Spec { label, category, affordances, state: &[], synonyms: &[], z }
}

const fn os(
    label: &'static str,
    category: &'static str,
    affordances: &'static [&'static str],
    state: &'static [(&'static str, &'static str)],
    z: f64,
) -> Spec {
    Spec { label, category, affordances, state, synonyms: &[], z }
}

const P: &[&str] = &["portable"];
const PI: &[&str] = &["portable", "inspectable"];
const SD: &[&str] = &["surface", "destination"];
const D: &[&str] = &["destination"];
const C: &[&str] = &["container"];
const CD: &[&str] = &["container", "destination"];
const T: &[&str] = &["toggleable", "inspectable"];
const I: &[&str] = &["inspectable"];
const ON: &[(&str, &str)] = &[("power", "on")];
const OFF: &[(&str, &str)] = &[("power", "off")];
const SHUT: &[(&str, &str)] = &[("open", "closed")];

fn home_rooms() -> Vec<(&'static str, &'static str, [f64; 3], Vec<Spec>)> {
    vec![
        ("living_room", "living room", [0.0, 0.0, 0.0], vec![
            Spec { synonyms: &["couch"], ..o("sofa", "furniture", SD, 0.5) },
            o("coffee table", "furniture", SD, 0.45),
            os("tv", "appliance", T, OFF, 1.2),
            Spec { synonyms: &["remote"], ..o("remote control", "device", P, 0.5) },
            os("floor lamp", "appliance", T, ON, 1.5),
            o("bookshelf", "furniture", C, 1.0),
            o("book", "item", P, 1.1),
            o("magazine", "item", P, 0.5),
            o("plant", "decor", I, 0.6),
            o("cushion", "item", P, 0.6),
            o("blanket", "item", P, 0.6),
            os("speaker", "device", T, OFF, 0.9),
            os("game console", "device", T, OFF, 0.4),
            o("vase", "decor", PI, 0.8),
            o("picture frame", "decor", P, 1.3),
            o("armchair", "furniture", D, 0.5),
            o("rug", "furniture", D, 0.02),
            o("candle", "item", P, 0.5),
        ]),
        ("kitchen", "kitchen", [9.0, 0.0, 0.0], vec![
            Spec { state: SHUT, ..o("fridge", "appliance", &["container", "inspectable"], 1.0) },
            os("stove", "appliance", T, OFF, 0.9),
            os("microwave", "appliance", T, OFF, 1.1),
            o("sink", "fixture", D, 0.9),
            o("kitchen counter", "furniture", SD, 0.9),
            os("kettle", "appliance", &["portable", "toggleable"], OFF, 1.0),
            Spec { synonyms: &["soda", "coke"], ..o("cola", "drink", P, 1.0) },
            o("wine", "drink", P, 1.0),
            o("apple", "food", P, 1.0),
            o("banana", "food", P, 1.0),
            o("cutting board", "item", P, 0.95),
            o("knife block", "item", P, 1.0),
            os("toaster", "appliance", T, OFF, 1.0),
            os("coffee maker", "appliance", T, OFF, 1.0),
            Spec { synonyms: &["cup"], ..o("mug", "item", P, 1.0) },
            o("bowl", "item", P, 1.0),
            o("trash can", "fixture", CD, 0.4),
        ]),
        ("dining_room", "dining room", [9.0, 8.0, 0.0], vec![
            o("dining table", "furniture", SD, 0.75),
            o("chair", "furniture", D, 0.5),
            o("chair", "furniture", D, 0.5),
            o("chair", "furniture", D, 0.5),
            o("chair", "furniture", D, 0.5),
            o("glass", "item", P, 0.8),
            o("plate", "item", P, 0.8),
            o("fork", "item", P, 0.8),
            o("water jug", "item", P, 0.85),
            o("fruit basket", "item", &["portable", "container"], 0.85),
            o("salt shaker", "item", P, 0.8),
            o("napkin", "item", P, 0.8),
        ]),
        ("bedroom", "bedroom", [-9.0, 0.0, 0.0], vec![
            o("bed", "furniture", SD, 0.5),
            o("nightstand", "furniture", SD, 0.55),
            os("bedside lamp", "appliance", T, ON, 0.7),
            Spec { state: SHUT, ..o("wardrobe", "furniture", &["container", "inspectable"], 1.0) },
            o("alarm clock", "device", P, 0.6),
            o("pillow", "item", P, 0.6),
            o("slippers", "item", P, 0.05),
            o("phone charger", "device", P, 0.6),
            Spec { synonyms: &["spectacles"], ..o("glasses", "item", P, 0.6) },
            o("jacket", "clothing", P, 1.0),
            o("backpack", "item", &["portable", "container", "inspectable"], 0.3),
            o("mirror", "decor", I, 1.4),
            Spec { state: SHUT, ..o("window", "fixture", I, 1.4) },
            o("laundry basket", "item", &["portable", "container"], 0.3),
        ]),
        ("bathroom", "bathroom", [-9.0, 8.0, 0.0], vec![
            o("towel", "item", P, 1.0),
            o("toothbrush", "item", P, 1.0),
            o("soap", "item", P, 0.9),
            o("shampoo", "item", P, 0.6),
            os("hair dryer", "device", &["portable", "toggleable"], OFF, 1.0),
            o("bathtub", "fixture", D, 0.5),
            os("washing machine", "appliance", T, OFF, 0.8),
            o("toilet paper", "item", P, 0.7),
            o("bathroom cabinet", "furniture", C, 1.5),
            o("scale", "device", P, 0.05),
        ]),
        ("office", "office", [0.0, 8.0, 0.0], vec![
            o("office desk", "furniture", SD, 0.75),
            o("office chair", "furniture", D, 0.5),
            os("laptop", "device", &["portable", "toggleable", "inspectable"], ON, 0.8),
            os("monitor", "device", T, ON, 1.1),
            os("printer", "device", T, OFF, 0.8),
            o("keyboard", "device", P, 0.78),
            o("mouse", "device", P, 0.78),
            o("notebook", "item", P, 0.78),
            o("pen", "item", P, 0.78),
            o("stapler", "item", P, 0.78),
            o("cactus", "decor", I, 0.9),
            o("filing cabinet", "furniture", C, 0.7),
            o("headphones", "device", P, 0.8),
            o("water bottle", "item", P, 0.8),
        ]),
        ("hallway", "hallway", [0.0, -7.0, 0.0], vec![
            Spec { state: SHUT, ..o("front door", "fixture", &["destination", "inspectable"], 1.0) },
            o("shoe rack", "furniture", CD, 0.4),
            o("umbrella", "item", P, 0.5),
            o("keys", "item", P, 1.0),
            o("coat", "clothing", P, 1.4),
            o("charging dock", "robot", &["dock"], 0.05),
            Spec { synonyms: &["bag", "purse"], ..o("handbag", "item", PI, 0.9) },
            o("letters", "item", P, 1.0),
            os("ceiling light", "fixture", T, ON, 2.5),
            o("doormat", "furniture", D, 0.02),
        ]),
    ]
}

fn id_for(label: &str) -> String {
    label.replace(' ', "_")
}

/// Objects sit on two rings around the room centroid so neighbors are well separated in angle.
fn home7_scene() -> Value {
    let mut rooms = Vec::new();
    let mut objects = Vec::new();
    let mut relations = Vec::new();
    let mut used: BTreeMap<String, usize> = BTreeMap::new();
    for (room_id, room_label, c, specs) in home_rooms() {
        rooms.push(json!({"id": room_id, "label": room_label, "centroid": c}));
        let n = specs.len();
        for (i, spec) in specs.iter().enumerate() {
            let base = id_for(spec.label);
            let count = used.entry(base.clone()).or_default();
            *count += 1;
            let id = if *count == 1 { base } else { format!("{base}_{count}") };
            let angle = (i as f64 * 360.0 / n as f64 + 7.0).to_radians();
            let radius = if i % 2 == 0 { 3.0 } else { 2.2 };
            let pos = [c[0] + radius * angle.cos(), c[1] + radius * angle.sin(), spec.z];
            let state: BTreeMap<&str, &str> = spec.state.iter().copied().collect();
            let mut obj = json!({
                "id": id, "label": spec.label, "category": spec.category, "position": pos,
                "bounding_radius": 0.15, "room": room_id, "affordances": spec.affordances, "state": state,
            });
            if !spec.synonyms.is_empty() {
                obj["synonyms"] = json!(spec.synonyms);
            }
            relations.push(json!({"kind": "in_room", "subject": id, "object": room_id}));
            objects.push(obj);
        }
    }
    relations.push(json!({"kind": "on", "subject": "remote_control", "object": "coffee_table"}));
    relations.push(json!({"kind": "inside", "subject": "book", "object": "bookshelf"}));
    relations.push(json!({"kind": "near", "subject": "handbag", "object": "front_door"}));
    json!({"version": "1", "rooms": rooms, "objects": objects, "relations": relations})
}

/// Meeting room demo: the user sits at the table; the TV, bag, dock and door lie outside.
const MEETING_HEAD: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.2 };
const MEETING_LEFT_HAND: Vec3 = Vec3 { x: 0.1, y: 0.25, z: 0.9 };
const MEETING_RIGHT_HAND: Vec3 = Vec3 { x: 0.1, y: -0.25, z: 0.9 };

fn meeting_scene() -> Value {
    let objects = vec![
        json!({"id": "meeting_table", "label": "meeting table", "category": "furniture", "position": [0.8, 0.0, 0.75], "room": "meeting_room", "affordances": ["surface", "destination"]}),
        json!({"id": "laptop", "label": "laptop", "category": "device", "position": [0.5, 0.3, 0.8], "room": "meeting_room", "affordances": ["portable", "toggleable"], "state": {"power": "on"}}),
        json!({"id": "whiteboard", "label": "whiteboard", "category": "fixture", "position": [-2.5, 0.0, 1.5], "room": "meeting_room", "affordances": ["inspectable"]}),
        json!({"id": "projector", "label": "projector", "category": "device", "position": [0.8, 0.0, 2.6], "room": "meeting_room", "affordances": ["toggleable"], "state": {"power": "on"}}),
        json!({"id": "chair_1", "label": "chair", "category": "furniture", "position": [1.6, 0.8, 0.5], "room": "meeting_room", "affordances": ["destination"]}),
        json!({"id": "chair_2", "label": "chair", "category": "furniture", "position": [1.6, -0.8, 0.5], "room": "meeting_room", "affordances": ["destination"]}),
        json!({"id": "water_bottle", "label": "water bottle", "category": "item", "position": [0.9, -0.4, 0.85], "room": "meeting_room", "affordances": ["portable"]}),
        json!({"id": "tv", "label": "TV", "synonyms": ["television"], "category": "appliance", "position": [7.0, 2.0, 1.3], "room": "lounge", "affordances": ["toggleable", "inspectable"], "state": {"power": "on"}}),
        json!({"id": "bag", "label": "bag", "category": "item", "position": [6.8, 3.1, 0.4], "room": "lounge", "affordances": ["portable", "inspectable"]}),
        json!({"id": "sofa", "label": "sofa", "category": "furniture", "position": [7.5, -1.5, 0.5], "room": "lounge", "affordances": ["surface", "destination"]}),
        json!({"id": "plant", "label": "plant", "category": "decor", "position": [5.5, -3.0, 0.6], "room": "lounge", "affordances": ["inspectable"]}),
        json!({"id": "coffee_machine", "label": "coffee machine", "category": "appliance", "position": [8.5, 0.5, 1.0], "room": "lounge", "affordances": ["toggleable"], "state": {"power": "off"}}),
        json!({"id": "door", "label": "door", "category": "fixture", "position": [0.0, -5.0, 1.0], "room": "corridor", "affordances": ["destination"], "state": {"open": "open"}}),
        json!({"id": "dock", "label": "charging dock", "category": "robot", "position": [-3.0, -6.0, 0.1], "room": "corridor", "affordances": ["dock"]}),
        json!({"id": "umbrella_stand", "label": "umbrella stand", "category": "furniture", "position": [2.0, -6.5, 0.4], "room": "corridor", "affordances": ["container"]}),
    ];
    json!({
        "version": "1",
        "rooms": [
            {"id": "meeting_room", "label": "meeting room", "centroid": [0.0, 0.0, 0.0]},
            {"id": "lounge", "label": "lounge", "centroid": [7.0, 0.0, 0.0]},
            {"id": "corridor", "label": "corridor", "centroid": [0.0, -6.0, 0.0]},
        ],
        "objects": objects,
        "relations": [
            {"kind": "near", "subject": "bag", "object": "tv"},
            {"kind": "on", "subject": "laptop", "object": "meeting_table"},
        ],
    })
}

fn meeting_pos(scene: &SceneGraph, id: &str) -> Vec3 {
    scene.object(id).unwrap().position
}

fn fig8_scenarios(scene: &SceneGraph) -> Vec<(&'static str, Scenario)> {
    let scene_ref = "../scenes/meeting.json";
    let head = MEETING_HEAD;
    // Eyes stay on the meeting: level, toward the empty side of the table.
    let meeting_gaze = Ray::new(head, v(0.0, 1.0, 0.05)).unwrap();
    let dock = Shot {
        head,
        gaze: meeting_gaze,
        fingers: vec![(ModalityKind::ThumbRight, ray_off(MEETING_RIGHT_HAND, meeting_pos(scene, "dock"), 4.5, 30.0))],
    };
    let check = Shot {
        head,
        gaze: ray_off(head, meeting_pos(scene, "bag"), 6.0, 200.0),
        fingers: vec![(ModalityKind::IndexLeft, ray_off(MEETING_LEFT_HAND, meeting_pos(scene, "bag"), 5.0, 120.0))],
    };
    let tv = Shot {
        head,
        gaze: ray_off(head, meeting_pos(scene, "tv"), 3.5, 10.0),
        fingers: vec![(ModalityKind::IndexRight, ray_off(MEETING_RIGHT_HAND, meeting_pos(scene, "tv"), 4.0, 250.0))],
    };
    let door = Shot { head, gaze: ray_off(head, meeting_pos(scene, "door"), 2.0, 90.0), fingers: vec![] };
    let mut out = vec![
        ("fig8_dock", scenario("fig8_dock", scene_ref, "", &[dock], truth(TaskType::Dock, &["dock"], None))),
        ("fig8_check", scenario("fig8_check", scene_ref, "Check", &[check], truth(TaskType::CheckPresence, &["bag"], None))),
        ("fig8_tv", scenario("fig8_tv", scene_ref, "Is TV on?", &[tv], truth(TaskType::CheckState, &["tv"], None))),
        ("fig8_come_back", scenario("fig8_come_back", scene_ref, "Come back", &[door], truth(TaskType::GoTo, &[], Some("door")))),
    ];
    for (_, s) in &mut out {
        s.tags.occupation = Occupation::Conversation;
        s.expect = Some(Expectation { match_rank: Some(1), error_class: None });
    }
    out
}

// ---- planted sweep corpus -----------------------------------------------------------------

const CLUSTERS_PER_FAMILY: usize = 10;
const CLUSTER_SPACING: f64 = 100.0;
const CLUTTER: usize = 12;

fn cluster_origin(family: usize, k: usize) -> Vec3 {
    // Stacked vertically: every ray in the corpus is near-horizontal, so other clusters stay
    // far outside any cone.
    v(0.0, 0.0, CLUSTER_SPACING * (family * CLUSTERS_PER_FAMILY + k) as f64)
}

fn planted_target(origin: Vec3, k: usize) -> Vec3 {
    origin + v(5.0, (k as f64 - 4.5) * 0.3, 1.0)
}

fn planted_hand(origin: Vec3) -> Vec3 {
    origin + v(0.25, -0.2, 1.2)
}

fn planted_head(origin: Vec3) -> Vec3 {
    origin + v(0.0, 0.0, 1.6)
}

/// Thumb distractors for family X: 11.5 to 13.5 deg off a thumb ray aimed along -y.
fn thumb_distractor(origin: Vec3, j: usize) -> Vec3 {
    let hand = planted_hand(origin);
    let u = v(0.0, -1.0, 0.0);
    let a = (11.5 + 0.25 * j as f64).to_radians();
    hand + (u * a.cos() + perpendicular(u, 40.0 * j as f64) * a.sin()) * 4.0
}

const FAMILIES: [&str; 3] = ["g", "p", "x"];

fn planted_scene() -> Value {
    let mut objects = Vec::new();
    for (f, fam) in FAMILIES.iter().enumerate() {
        for k in 0..CLUSTERS_PER_FAMILY {
            let origin = cluster_origin(f, k);
            let t = planted_target(origin, k);
            objects.push(json!({"id": format!("{fam}{k}_parcel"), "label": "parcel", "category": "item", "position": t.to_array(), "room": "hall", "affordances": ["portable"]}));
            // Clutter sits behind and beside the user, nearer than the parcel.
            for j in 0..CLUTTER {
                let p = origin + v(-0.6 - 0.12 * j as f64, (j % 4) as f64 * 0.4 - 0.6, 0.9);
                objects.push(json!({"id": format!("{fam}{k}_box{j}"), "label": "box", "category": "item", "position": p.to_array(), "room": "hall", "affordances": ["portable"]}));
            }
            if *fam == "x" {
                for j in 0..9 {
                    let p = thumb_distractor(origin, j);
                    objects.push(json!({"id": format!("{fam}{k}_crate{j}"), "label": "crate", "category": "item", "position": p.to_array(), "room": "hall", "affordances": ["portable"]}));
                }
            }
        }
    }
    json!({"version": "1", "rooms": [{"id": "hall", "label": "hall", "centroid": [0.0, 0.0, 1500.0]}], "objects": objects, "relations": []})
}

/// Family g needs gaze range >= 14 (target at 12.5 deg). Family p needs pointing range >= 11
/// (target at 10 deg, gaze sideways at nothing). Family x needs gaze >= 14 (13.8 deg) but fails once the
/// pointing range reaches 14, when nine thumb distractors at 11.5..13.5 deg crowd it out.
fn planted_scenarios(scene: &SceneGraph) -> Vec<Scenario> {
    let mut out = Vec::new();
    for (f, fam) in FAMILIES.iter().enumerate() {
        for k in 0..CLUSTERS_PER_FAMILY {
            let origin = cluster_origin(f, k);
            let head = planted_head(origin);
            let hand = planted_hand(origin);
            let target_id = format!("{fam}{k}_parcel");
            let target = scene.object(&target_id).unwrap().position;
            let az = 36.0 * k as f64;
            let shot = match *fam {
                "g" => Shot { head, gaze: ray_off(head, target, 12.5, az), fingers: vec![] },
                "p" => Shot {
                    head,
                    gaze: Ray::new(head, v(0.0, 1.0, 0.0)).unwrap(),
                    fingers: vec![(ModalityKind::IndexRight, ray_off(hand, target, 10.0, az))],
                },
                _ => Shot {
                    head,
                    gaze: ray_off(head, target, 13.8, az),
                    fingers: vec![(ModalityKind::ThumbRight, Ray::new(hand, v(0.0, -1.0, 0.0)).unwrap())],
                },
            };
            let mut s = scenario(
                &format!("planted_{fam}{k}"),
                "../scenes/planted.json",
                "Bring me that",
                &[shot],
                truth(TaskType::Fetch, &[&target_id], None),
            );
            s.tags.horizon = Horizon::Short;
            out.push(s);
        }
    }
    out
}

// ---- home scene corpora -------------------------------------------------------------------

fn head_in(scene: &SceneGraph, room: &str) -> Vec3 {
    let c = scene.room(room).unwrap().centroid;
    v(c.x, c.y, 1.6)
}

fn hand_in(scene: &SceneGraph, room: &str) -> Vec3 {
    let c = scene.room(room).unwrap().centroid;
    v(c.x + 0.15, c.y - 0.2, 1.2)
}

fn pos(scene: &SceneGraph, id: &str) -> Vec3 {
    scene.object(id).unwrap_or_else(|| panic!("no object {id}")).position
}

fn look(scene: &SceneGraph, room: &str, id: &str) -> Shot {
    let head = head_in(scene, room);
    Shot { head, gaze: ray_at(head, pos(scene, id)), fingers: vec![] }
}

fn look_point(scene: &SceneGraph, room: &str, id: &str) -> Shot {
    let mut shot = look(scene, room, id);
    shot.fingers.push((ModalityKind::IndexRight, ray_at(hand_in(scene, room), pos(scene, id))));
    shot
}

/// One snapshot: gaze on `a`, right index finger on `b`.
fn gaze_and_point(scene: &SceneGraph, room: &str, a: &str, b: &str) -> Shot {
    let mut shot = look(scene, room, a);
    shot.fingers.push((ModalityKind::IndexRight, ray_at(hand_in(scene, room), pos(scene, b))));
    shot
}

fn taxonomy_scenarios(scene: &SceneGraph) -> anyhow::Result<Vec<Scenario>> {
    let r = "../scenes/home7.json";
    use TaskType::*;
    let pass = |id: &str, transcript: &str, shots: Vec<Shot>, gt: GroundTruth| {
        let mut s = scenario(id, r, transcript, &shots, gt);
        s.expect = Some(Expectation::default());
        s
    };
    let mut out = vec![
        pass("tax_named_living", "bring me the book", vec![look(scene, "living_room", "book")], truth(Fetch, &["book"], None)),
        pass("tax_named_kitchen", "bring me the apple", vec![look(scene, "kitchen", "apple")], truth(Fetch, &["apple"], None)),
        pass("tax_named_dining", "bring me the plate", vec![look(scene, "dining_room", "plate")], truth(Fetch, &["plate"], None)),
        pass("tax_named_bedroom", "bring me my glasses", vec![look(scene, "bedroom", "glasses")], truth(Fetch, &["glasses"], None)),
        pass("tax_named_bathroom", "get me a towel", vec![look(scene, "bathroom", "towel")], truth(Fetch, &["towel"], None)),
        pass("tax_named_office", "grab the stapler", vec![look(scene, "office", "stapler")], truth(Fetch, &["stapler"], None)),
        pass("tax_named_hallway", "bring me the keys", vec![look(scene, "hallway", "keys")], truth(Fetch, &["keys"], None)),
        pass("tax_deictic_kitchen", "bring me that", vec![look_point(scene, "kitchen", "banana")], truth(Fetch, &["banana"], None)),
        pass("tax_deictic_living", "bring me that", vec![look_point(scene, "living_room", "magazine")], truth(Fetch, &["magazine"], None)),
        pass("tax_deictic_office", "bring me this", vec![look_point(scene, "office", "headphones")], truth(Fetch, &["headphones"], None)),
        pass("tax_deictic_bedroom", "take that to me", vec![look_point(scene, "bedroom", "alarm_clock")], truth(Fetch, &["alarm_clock"], None)),
        pass("tax_deictic_dining", "bring me that", vec![look_point(scene, "dining_room", "water_jug")], truth(Fetch, &["water_jug"], None)),
        pass("tax_check_plant", "check that", vec![look_point(scene, "living_room", "plant")], truth(CheckPresence, &["plant"], None)),
        pass("tax_check_handbag", "check the bag", vec![look(scene, "hallway", "handbag")], truth(CheckPresence, &["handbag"], None)),
        pass("tax_check_mirror", "look at that", vec![look(scene, "bedroom", "mirror")], truth(CheckPresence, &["mirror"], None)),
        pass("tax_silent_fetch", "", vec![look_point(scene, "office", "notebook")], truth(Fetch, &["notebook"], None)),
        pass("tax_silent_dock", "", vec![look_point(scene, "hallway", "charging_dock")], truth(Dock, &["charging_dock"], None)),
        pass(
            "tax_move_named",
            "put the mug on the kitchen counter",
            vec![look(scene, "kitchen", "mug"), look(scene, "kitchen", "kitchen_counter")],
            truth(Move, &["mug"], Some("kitchen_counter")),
        ),
        pass("tax_come_back", "come back", vec![Shot { head: head_in(scene, "office"), gaze: looking_up(head_in(scene, "office")), fingers: vec![] }], truth(GoTo, &[], Some("user"))),
        pass("tax_go_charge", "go charge", vec![look(scene, "hallway", "umbrella")], truth(Dock, &["charging_dock"], None)),
    ];

    let fail = |id: &str, transcript: &str, shots: Vec<Shot>, gt: GroundTruth, class: ErrorClass| {
        let mut s = scenario(id, r, transcript, &shots, gt);
        s.expect = Some(Expectation { match_rank: None, error_class: Some(class) });
        s
    };
    out.push(fail(
        "tax_fail_voice",
        "bring me the wine",
        vec![look(scene, "kitchen", "cola")],
        truth(Fetch, &["umbrella"], None),
        ErrorClass::VoiceInput,
    ));
    out.push(fail(
        "tax_fail_pointing",
        "bring me that",
        vec![look_point(scene, "kitchen", "cola")],
        truth(Fetch, &["umbrella"], None),
        ErrorClass::Pointing,
    ));
    out.push(fail(
        "tax_fail_separation",
        "bring me that",
        vec![gaze_and_point(scene, "dining_room", "fork", "water_jug")],
        truth(Fetch, &["fork", "water_jug"], None),
        ErrorClass::Separation,
    ));
    out.push(fail(
        "tax_fail_interpretation",
        "",
        vec![look(scene, "kitchen", "mug"), look(scene, "kitchen", "kitchen_counter")],
        truth(Move, &["mug"], Some("kitchen_counter")),
        ErrorClass::Interpretation,
    ));
    // Press and release with no tracked pose: the session cannot capture a snapshot.
    let mut other = fail("tax_fail_other", "bring me that", vec![], truth(Fetch, &["cola"], None), ErrorClass::Other);
    other.events = vec![LogRecord::Touch { t: 0 }, LogRecord::Press { t: 200 }, LogRecord::Release { t: 600 }];
    out.push(other);
    Ok(out)
}

/// Fifty noisy trials across the home: named, deictic, check and silent commands with
/// gaze and finger noise drawn from a fixed seed.
fn home_corpus(scene: &SceneGraph) -> Vec<Scenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1E7B07);
    let rooms: Vec<&str> = scene.rooms().iter().map(|r| r.id.as_str()).collect();
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    while out.len() < 50 {
        let room = rooms[rng.gen_range(0..rooms.len())];
        let candidates: Vec<_> = scene
            .objects()
            .iter()
            .filter(|o| o.room == room && o.affordances.iter().any(|a| a.as_str() == "portable"))
            .collect();
        let target = candidates[rng.gen_range(0..candidates.len())];
        let style = rng.gen_range(0..4);
        if !seen.insert((target.id.clone(), style)) {
            continue;
        }
        let head = head_in(scene, room);
        let hand = hand_in(scene, room);
        let gaze_noise = rng.gen_range(0.0..16.0);
        let finger_noise = rng.gen_range(0.0..13.0);
        let mut shot = Shot { head, gaze: ray_off(head, target.position, gaze_noise, rng.gen_range(0.0..360.0)), fingers: vec![] };
        if rng.gen_bool(0.6) {
            let finger = [ModalityKind::IndexRight, ModalityKind::IndexLeft, ModalityKind::ThumbRight][rng.gen_range(0..3)];
            shot.fingers.push((finger, ray_off(hand, target.position, finger_noise, rng.gen_range(0.0..360.0))));
        }
        let (transcript, task) = match style {
            0 => (format!("bring me the {}", target.label), TaskType::Fetch),
            1 => ("bring me that".to_string(), TaskType::Fetch),
            2 => ("check that".to_string(), TaskType::CheckPresence),
            _ => (String::new(), TaskType::Fetch),
        };
        let hold = rng.gen_range(700..2500);
        let mut s = scenario(
            &format!("home_{:02}", out.len()),
            "../scenes/home7.json",
            &transcript,
            &[],
            truth(task, &[&target.id], None),
        );
        s.events = events(&[shot], hold);
        s.tags = Tags {
            horizon: if rng.gen_bool(0.5) { Horizon::Short } else { Horizon::Long },
            visibility: [Visibility::Same, Visibility::Hidden, Visibility::OtherRoom][rng.gen_range(0..3)],
            occupation: [Occupation::None, Occupation::Stroop, Occupation::Conversation][rng.gen_range(0..3)],
        };
        out.push(s);
    }
    out
}

// ---- ring conformance ---------------------------------------------------------------------

/// Event sequences with the verdict every ring state machine must reach. `error` names the
/// first rejected step (0-based) or is absent; `phase` is the phase after the last accepted
/// step. Snapshot-bearing steps carry `"pose": true`; `present` and `retry` are session
/// operations rather than ring events.
fn ring_conformance() -> Value {
    let case = |name: &str, steps: Value, phase: &str, error: Option<(usize, &str)>| {
        let mut c = json!({"name": name, "steps": steps, "phase": phase});
        if let Some((at, code)) = error {
            c["error"] = json!({"step": at, "code": code});
        }
        c
    };
    json!({
        "version": "1",
        "max_retries": 2,
        "cases": [
            case("hold_release", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"release","t":500}]), "dispatched", None),
            case("single_press", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"press","t":100},{"op":"release","t":400}]), "dispatched", None),
            case("three_presses", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"press","t":100},{"op":"press","t":200},{"op":"press","t":300},{"op":"release","t":900}]), "dispatched", None),
            case("equal_timestamps", json!([{"op":"pose"},{"op":"touch","t":5},{"op":"press","t":5},{"op":"release","t":5}]), "dispatched", None),
            case("press_before_touch", json!([{"op":"pose"},{"op":"press","t":0}]), "idle", Some((1, "protocol"))),
            case("release_before_touch", json!([{"op":"pose"},{"op":"release","t":0}]), "idle", Some((1, "protocol"))),
            case("double_touch", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"touch","t":10}]), "recording", Some((2, "protocol"))),
            case("backwards_time", json!([{"op":"pose"},{"op":"touch","t":100},{"op":"press","t":50}]), "recording", Some((2, "non_monotonic"))),
            case("press_without_pose", json!([{"op":"touch","t":0},{"op":"press","t":100}]), "recording", Some((1, "no_snapshot"))),
            case("release_without_pose", json!([{"op":"touch","t":0},{"op":"release","t":100}]), "recording", Some((1, "no_snapshot"))),
            case("event_after_dispatch", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"release","t":100},{"op":"touch","t":200}]), "dispatched", Some((3, "protocol"))),
            case("present_then_retry", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"release","t":100},{"op":"present"},{"op":"retry"},{"op":"touch","t":300},{"op":"release","t":400}]), "dispatched", None),
            case("retry_before_present", json!([{"op":"pose"},{"op":"touch","t":0},{"op":"release","t":100},{"op":"retry"}]), "dispatched", Some((3, "phase"))),
            case("retries_exhausted", json!([
                {"op":"pose"},
                {"op":"touch","t":0},{"op":"release","t":10},{"op":"present"},{"op":"retry"},
                {"op":"touch","t":20},{"op":"release","t":30},{"op":"present"},{"op":"retry"},
                {"op":"touch","t":40},{"op":"release","t":50},{"op":"present"},{"op":"retry"}
            ]), "abandoned", Some((12, "retry_exhausted"))),
        ],
    })
}
