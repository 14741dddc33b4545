//! Shared fixture for disambiguation unit tests: twelve objects on a 3 m circle, 30 deg apart.

use std::collections::BTreeMap;

use crate::scene::{load_scene, SceneGraph, Vec3};
use crate::session::{HeadPose, MultimodalCommand, Snapshot};
use crate::targeting::{resolve_snapshot, AngleConfig, ModalityKind, Ray};

const OBJECTS: [(&str, &str, &str, &str); 12] = [
    ("tv", "TV", r#"["toggleable","inspectable"]"#, r#"{"power":"off"}"#),
    ("cola", "cola", r#"["portable"]"#, "{}"),
    ("wine", "wine", r#"["portable"]"#, "{}"),
    ("bag", "bag", r#"["portable","inspectable"]"#, "{}"),
    ("dock", "charging dock", r#"["dock"]"#, "{}"),
    ("door", "door", r#"["destination"]"#, "{}"),
    ("table", "table", r#"["surface","destination"]"#, "{}"),
    ("cup", "cup", r#"["portable"]"#, "{}"),
    ("remote", "remote control", r#"["portable"]"#, "{}"),
    ("book", "book", r#"["portable"]"#, "{}"),
    ("lamp", "lamp", r#"["toggleable"]"#, r#"{"power":"on"}"#),
    ("plant", "plant", r#"["inspectable"]"#, "{}"),
];

pub(crate) const HEAD: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.6 };
pub(crate) const HAND: Vec3 = Vec3 { x: 0.2, y: 0.0, z: 1.2 };

pub(crate) fn position(index: usize) -> Vec3 {
    let a = (index as f64 * 30.0).to_radians();
    Vec3::new(3.0 * a.cos(), 3.0 * a.sin(), 1.0)
}

pub(crate) fn living_room() -> SceneGraph {
    let objects: Vec<String> = OBJECTS
        .iter()
        .enumerate()
        .map(|(i, (id, label, aff, state))| {
            let p = position(i);
            format!(
                r#"{{"id":"{id}","label":"{label}","category":"thing","position":[{},{},{}],"room":"living","affordances":{aff},"state":{state}}}"#,
                p.x, p.y, p.z
            )
        })
        .collect();
    let doc = format!(
        r#"{{"version":"1","rooms":[{{"id":"living","label":"living room","centroid":[0,0,0]}},{{"id":"kitchen","label":"kitchen","centroid":[8,0,0]}}],"objects":[{}],"relations":[]}}"#,
        objects.join(",")
    );
    load_scene(doc.as_bytes()).unwrap()
}

/// One snapshot per entry; each entry aims the listed modalities straight at an object. A
/// snapshot without a gaze entry looks straight up.
pub(crate) fn command(scene: &SceneGraph, transcript: &str, shots: &[&[(ModalityKind, &str)]]) -> MultimodalCommand {
    let cfg = AngleConfig::default();
    let snapshots: Vec<Snapshot> = shots
        .iter()
        .enumerate()
        .map(|(k, shot)| {
            let mut gaze = Ray::new(HEAD, Vec3::new(0.0, 0.0, 1.0)).unwrap();
            let mut fingers = BTreeMap::new();
            for (modality, id) in shot.iter() {
                let target = scene.object(id).unwrap().position;
                if *modality == ModalityKind::Gaze {
                    gaze = Ray::towards(HEAD, target).unwrap();
                } else {
                    fingers.insert(*modality, Ray::towards(HAND, target).unwrap());
                }
            }
            Snapshot { t: 10 * k as u64, gaze, fingers, head: HeadPose { position: HEAD, facing: Vec3::new(1.0, 0.0, 0.0) } }
        })
        .collect();
    let possible_objects = snapshots.iter().map(|s| resolve_snapshot(s, scene, &cfg)).collect();
    MultimodalCommand { transcript: transcript.into(), snapshots, possible_objects, user_pose: HEAD, issued_at: 0 }
}
