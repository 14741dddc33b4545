use std::fmt::Write;

use super::SceneGraph;

impl SceneGraph {
    /// Deterministic text listing of every object, grouped by room (rooms by id, objects by id).
    ///
    /// Object lines start with `- `, room headers with `## `.
    pub fn serialize_for_prompt(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "SCENE OBJECTS (format {}, {} objects in {} rooms; includes objects outside the user's view)",
            self.version(),
            self.objects().len(),
            self.rooms().len()
        );
        let mut rooms: Vec<_> = self.rooms().iter().collect();
        rooms.sort_by(|a, b| a.id.cmp(&b.id));
        for room in rooms {
            let _ = writeln!(out, "## room={} label={:?} centroid={}", room.id, room.label, room.centroid);
            let mut objects: Vec<_> = self.objects().iter().filter(|o| o.room == room.id).collect();
            objects.sort_by(|a, b| a.id.cmp(&b.id));
            for obj in objects {
                let affordances = if obj.affordances.is_empty() {
                    "-".to_string()
                } else {
                    obj.affordances.iter().map(|a| a.as_str()).collect::<Vec<_>>().join(",")
                };
                let containment = match self.container_of(&obj.id) {
                    Some((kind, parent)) => format!("{kind:?}:{parent}").to_lowercase(),
                    None => "-".to_string(),
                };
                let _ = write!(
                    out,
                    "- id={} label={:?} category={} room={} position={} radius={:.3} affordances={} containment={}",
                    obj.id, obj.label, obj.category, obj.room, obj.position, obj.bounding_radius, affordances, containment
                );
                if !obj.synonyms.is_empty() {
                    let _ = write!(out, " synonyms={:?}", obj.synonyms.join("|"));
                }
                if !obj.state_attributes.is_empty() {
                    let state: Vec<String> =
                        obj.state_attributes.iter().map(|(k, v)| format!("{k}={v}")).collect();
                    let _ = write!(out, " state={}", state.join(","));
                }
                out.push('\n');
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use crate::scene::load_scene;
    use crate::scene::tests::MINIMAL;

    #[test]
    fn minimal_scene_has_one_object_line() {
        let scene = load_scene(MINIMAL.as_bytes()).unwrap();
        let text = scene.serialize_for_prompt();
        let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("- ")).collect();
        assert_eq!(lines.len(), 1);
        assert!(lines[0].contains("id=wine"));
        assert!(lines[0].contains("room=kitchen"));
        assert!(lines[0].contains("(2.000, 0.000, 1.000)"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let scene = load_scene(MINIMAL.as_bytes()).unwrap();
        assert_eq!(scene.serialize_for_prompt(), scene.serialize_for_prompt());
    }
}
