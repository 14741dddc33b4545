//! Helpers shared by the integration test targets.
#![allow(dead_code)]

pub mod machine;

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;

use intenbot::disambiguation::{CandidateInstruction, ConfirmedInstruction, Destination, TaskType};
use intenbot::scene::{load_scene, Affordance, ObjectNode, Room, SceneGraph, Vec3};
use intenbot::session::{HeadPose, Snapshot};
use intenbot::targeting::{ModalityKind, Ray};

pub fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture(rel: &str) -> PathBuf {
    workspace().join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("reading {rel}: {e}"))
}

pub fn scene(rel: &str) -> SceneGraph {
    load_scene(read_fixture(rel).as_bytes()).expect("fixture scene loads")
}

pub fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3 { x, y, z }
}

pub fn unit_vector<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let p = v(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = p.norm();
        if n > 1e-3 && n <= 1.0 {
            return v(p.x / n, p.y / n, p.z / n);
        }
    }
}

const LABELS: [&str; 16] = [
    "cup", "bottle", "book", "lamp", "chair", "table", "shelf", "box", "plant", "remote", "laptop", "basket",
    "kettle", "phone", "tray", "vase",
];

/// Random scene with `n` objects over 1..=3 rooms. Every object gets a mix of affordances and one
/// object is always a dock.
pub fn random_scene<R: Rng>(rng: &mut R, n: usize) -> SceneGraph {
    let room_count = rng.gen_range(1..=3);
    let rooms: Vec<Room> = (0..room_count)
        .map(|i| Room { id: format!("room{i}"), label: format!("room {i}"), centroid: v(i as f64 * 6.0, 0.0, 0.0) })
        .collect();
    let all = [
        Affordance::Portable,
        Affordance::Container,
        Affordance::Surface,
        Affordance::Inspectable,
        Affordance::Toggleable,
        Affordance::Destination,
    ];
    let objects = (0..n)
        .map(|i| {
            let label = LABELS[rng.gen_range(0..LABELS.len())];
            let mut affordances: BTreeSet<Affordance> =
                all.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            affordances.insert(Affordance::Inspectable);
            let mut state = BTreeMap::new();
            if i == 0 {
                affordances = [Affordance::Dock, Affordance::Destination].into();
            } else if affordances.contains(&Affordance::Toggleable) {
                state.insert("power".to_string(), if rng.gen_bool(0.5) { "on" } else { "off" }.to_string());
            }
            ObjectNode {
                id: if i == 0 { "dock".into() } else { format!("{label}_{i}") },
                label: if i == 0 { "dock".into() } else { label.to_string() },
                synonyms: Vec::new(),
                category: "thing".into(),
                position: v(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.0..2.5)),
                bounding_radius: rng.gen_range(0.0..0.3),
                room: rooms[rng.gen_range(0..rooms.len())].id.clone(),
                affordances,
                state_attributes: state,
            }
        })
        .collect();
    SceneGraph::from_parts("1", rooms, objects, Vec::new()).expect("generated scene is valid")
}

/// Random instruction that passes `CandidateInstruction::validate` on `scene`.
pub fn random_instruction<R: Rng>(rng: &mut R, scene: &SceneGraph) -> ConfirmedInstruction {
    let ids: Vec<&str> = scene.objects().iter().map(|o| o.id.as_str()).collect();
    let docks: Vec<&str> =
        scene.objects().iter().filter(|o| o.has(Affordance::Dock)).map(|o| o.id.as_str()).collect();
    let task = TaskType::ALL[rng.gen_range(0..TaskType::ALL.len())];
    let pick = |rng: &mut R, k: usize| -> Vec<String> {
        ids.choose_multiple(rng, k).map(|s| s.to_string()).collect()
    };
    let (targets, destination, attribute) = match task {
        TaskType::Fetch | TaskType::CheckPresence => {
            let k = rng.gen_range(1..=3);
            (pick(rng, k), None, None)
        },
        TaskType::CheckState => {
            let attr = rng.gen_bool(0.5).then(|| "power=on".to_string());
            (pick(rng, 1), None, attr)
        }
        TaskType::Move => {
            let k = rng.gen_range(2..=4);
            let mut chosen = pick(rng, k);
            let dest = if rng.gen_bool(0.3) {
                scene.rooms()[rng.gen_range(0..scene.rooms().len())].id.clone()
            } else {
                chosen.pop().expect("at least two picked")
            };
            (chosen, Some(Destination::Place(dest)), None)
        }
        TaskType::GoTo => {
            let dest = if rng.gen_bool(0.3) { Destination::User } else { Destination::Place(pick(rng, 1).remove(0)) };
            (Vec::new(), Some(dest), None)
        }
        TaskType::Dock => {
            let t = if rng.gen_bool(0.5) { vec![docks[rng.gen_range(0..docks.len())].to_string()] } else { Vec::new() };
            (t, None, None)
        }
    };
    let instruction = CandidateInstruction {
        rank: rng.gen_range(1..=9),
        task,
        targets,
        destination,
        attribute,
        display_text: format!("{task:?} & <generated>"),
        explanation: "generated \"instruction\"".into(),
        padding: false,
    };
    instruction.validate(scene).expect("generator emits valid instructions");
    let user_pose = v(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 1.6);
    ConfirmedInstruction { instruction, user_pose }
}

pub fn gaze_at(head: Vec3, target: Vec3) -> Snapshot {
    Snapshot::gaze_only(0, Ray::towards(head, target).unwrap(), HeadPose { position: head, facing: target - head })
}

pub fn with_finger(mut snapshot: Snapshot, kind: ModalityKind, origin: Vec3, target: Vec3) -> Snapshot {
    snapshot.fingers.insert(kind, Ray::towards(origin, target).unwrap());
    snapshot
}
