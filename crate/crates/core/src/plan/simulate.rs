use serde::{Deserialize, Serialize};

use super::{parse_pose, BehaviorTree, BtNode};
use crate::scene::{Affordance, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    /// `Sequence`, `Fallback`, or `Skill(arg, ...)`.
    pub node: String,
    pub outcome: Outcome,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub entries: Vec<TraceEntry>,
    pub status: Outcome,
}

impl Trace {
    pub fn succeeded(&self) -> bool {
        self.status == Outcome::Success
    }

    /// Last action entry, if any.
    pub fn last_action(&self) -> Option<&TraceEntry> {
        self.entries.iter().rev().find(|e| e.node != "Sequence" && e.node != "Fallback")
    }
}

#[derive(Debug, Default)]
struct World {
    at: Option<String>,
    held: Vec<String>,
}

/// Tick the tree once, depth first. Composites are logged when entered and stamped with their
/// result when they finish, so actions appear in execution order.
pub fn simulate(tree: &BehaviorTree, scene: &SceneGraph) -> Trace {
    let mut entries = Vec::new();
    let mut world = World::default();
    let status = tick(&tree.root, scene, &mut world, &mut entries);
    Trace { entries, status }
}

fn tick(node: &BtNode, scene: &SceneGraph, world: &mut World, trace: &mut Vec<TraceEntry>) -> Outcome {
    match node {
        BtNode::Sequence { children } | BtNode::Fallback { children } => {
            let is_sequence = matches!(node, BtNode::Sequence { .. });
            let slot = trace.len();
            trace.push(TraceEntry {
                node: if is_sequence { "Sequence" } else { "Fallback" }.into(),
                outcome: Outcome::Success,
                answer: None,
                reason: None,
            });
            let (stop_on, otherwise) =
                if is_sequence { (Outcome::Failure, Outcome::Success) } else { (Outcome::Success, Outcome::Failure) };
            let mut result = otherwise;
            for child in children {
                if tick(child, scene, world, trace) == stop_on {
                    result = stop_on;
                    break;
                }
            }
            trace[slot].outcome = result;
            result
        }
        BtNode::Action { skill, bindings } => {
            let args: Vec<&str> = bindings.iter().map(|(_, v)| v.as_str()).collect();
            let (outcome, answer, reason) = run_action(skill, node, scene, world);
            trace.push(TraceEntry { node: format!("{skill}({})", args.join(",")), outcome, answer, reason });
            outcome
        }
    }
}

type ActionResult = (Outcome, Option<String>, Option<String>);

fn ok(answer: Option<String>) -> ActionResult {
    (Outcome::Success, answer, None)
}

fn fail(reason: impl Into<String>) -> ActionResult {
    (Outcome::Failure, None, Some(reason.into()))
}

fn run_action(skill: &str, node: &BtNode, scene: &SceneGraph, world: &mut World) -> ActionResult {
    let arg = |name: &str| node.binding(name).unwrap_or_default();
    match skill {
        "NavigateTo" => {
            let goal = arg("goal");
            if scene.contains_id(goal) || parse_pose(goal).is_some() {
                world.at = Some(goal.to_string());
                ok(None)
            } else {
                fail(format!("no such place {goal:?}"))
            }
        }
        "Pick" => {
            let id = arg("object");
            let Some(obj) = scene.object(id) else { return fail(format!("no such object {id:?}")) };
            if world.at.as_deref() != Some(id) {
                return fail("robot is not at the object");
            }
            if !obj.has(Affordance::Portable) {
                return fail(format!("{id} is not portable"));
            }
            world.held.push(id.to_string());
            ok(None)
        }
        "Place" => {
            let (id, dest) = (arg("object"), arg("destination"));
            if world.at.as_deref() != Some(dest) {
                return fail("robot is not at the destination");
            }
            match world.held.iter().position(|h| h == id) {
                Some(i) => {
                    world.held.remove(i);
                    ok(None)
                }
                None => fail(format!("{id} is not held")),
            }
        }
        "Handover" => {
            let id = arg("object");
            if !world.at.as_deref().is_some_and(|a| parse_pose(a).is_some()) {
                return fail("robot is not at the user");
            }
            match world.held.iter().position(|h| h == id) {
                Some(i) => {
                    world.held.remove(i);
                    ok(None)
                }
                None => fail(format!("{id} is not held")),
            }
        }
        "CheckPresence" => {
            let id = arg("object");
            match scene.object(id) {
                Some(_) if world.at.as_deref() == Some(id) => ok(Some("present".into())),
                Some(_) => fail("robot is not at the object"),
                None => (Outcome::Failure, Some("absent".into()), Some(format!("{id} not found"))),
            }
        }
        "CheckState" => {
            let id = arg("object");
            let Some(obj) = scene.object(id) else { return fail(format!("no such object {id:?}")) };
            if world.at.as_deref() != Some(id) {
                return fail("robot is not at the object");
            }
            let spec = arg("attribute");
            let (name, expected) = spec.split_once('=').unwrap_or((spec, "on"));
            match obj.state_attributes.get(name) {
                Some(value) if value == expected => ok(Some(value.clone())),
                Some(value) => (Outcome::Failure, Some(value.clone()), Some(format!("{name} is {value}, expected {expected}"))),
                None => fail(format!("{id} has no attribute {name:?}")),
            }
        }
        "Dock" => match world.at.as_deref().and_then(|a| scene.object(a)) {
            Some(o) if o.has(Affordance::Dock) => ok(None),
            _ => fail("robot is not at a dock"),
        },
        other => fail(format!("no executor for skill {other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disambiguation::testkit::living_room;
    use crate::disambiguation::TaskType;
    use crate::plan::tests::confirmed;
    use crate::plan::{build_plan, SkillLibrary};

    fn run(task: TaskType, targets: &[&str], dest: Option<&str>, attribute: Option<&str>) -> Trace {
        let scene = living_room();
        let tree = build_plan(&confirmed(task, targets, dest, attribute), &scene, &SkillLibrary::default()).unwrap();
        simulate(&tree, &scene)
    }

    #[test]
    fn tv_off_fails_with_answer() {
        let trace = run(TaskType::CheckState, &["tv"], None, Some("power"));
        let last = trace.entries.last().unwrap();
        assert_eq!(last.node, "CheckState(tv,power)");
        assert_eq!(last.outcome, Outcome::Failure);
        assert_eq!(last.answer.as_deref(), Some("off"));
        assert_eq!(trace.status, Outcome::Failure);
    }

    #[test]
    fn lamp_on_succeeds() {
        let trace = run(TaskType::CheckState, &["lamp"], None, Some("power"));
        assert!(trace.succeeded());
        assert_eq!(trace.last_action().unwrap().answer.as_deref(), Some("on"));
    }

    #[test]
    fn fetch_and_move_succeed() {
        assert!(run(TaskType::Fetch, &["cola", "cup"], None, None).succeeded());
        assert!(run(TaskType::Move, &["book"], Some("table"), None).succeeded());
        assert!(run(TaskType::GoTo, &[], Some("user"), None).succeeded());
        assert!(run(TaskType::Dock, &[], None, None).succeeded());
    }

    #[test]
    fn non_portable_pick_aborts_sequence() {
        let trace = run(TaskType::Fetch, &["plant"], None, None);
        assert_eq!(trace.status, Outcome::Failure);
        let last = trace.entries.last().unwrap();
        assert_eq!(last.node, "Pick(plant)");
        assert_eq!(last.outcome, Outcome::Failure);
        assert_eq!(trace.entries[0].outcome, Outcome::Failure);
    }

    #[test]
    fn fallback_succeeds_fast() {
        let scene = living_room();
        let mut tree =
            build_plan(&confirmed(TaskType::Dock, &["dock"], None, None), &scene, &SkillLibrary::default()).unwrap();
        tree.root = BtNode::Fallback {
            children: vec![
                BtNode::action("Pick", &[("object", "plant")]),
                BtNode::action("NavigateTo", &[("goal", "dock")]),
                BtNode::action("Dock", &[]),
            ],
        };
        let trace = simulate(&tree, &scene);
        assert!(trace.succeeded());
        assert_eq!(trace.entries.len(), 3);
    }
}
