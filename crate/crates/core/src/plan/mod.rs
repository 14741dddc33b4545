//! Compile confirmed instructions into behavior-tree plans over a skill library.

mod simulate;
mod xml;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disambiguation::{ConfirmedInstruction, Destination, TaskType};
use crate::scene::{Affordance, SceneGraph, Vec3};

pub use simulate::{simulate, Outcome, Trace, TraceEntry};
pub use xml::{parse_xml, to_xml, validate_bt, Finding, FindingKind, BT_FORMAT, BT_SCHEMA_XSD};

const DEFAULT_SKILLS: &str = include_str!("../../assets/skills.json");

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("unknown skill {0:?}")]
    UnknownSkill(String),
    #[error("skill {skill} parameter {param:?}: {reason}")]
    UnboundParam { skill: String, param: String, reason: String },
    #[error("bad instruction: {0}")]
    BadInstruction(String),
    #[error("skill library: {0}")]
    Library(String),
    #[error("plan xml: {0}")]
    Xml(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticType {
    ObjectId,
    RoomId,
    Pose,
    Attribute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillParam {
    pub name: String,
    /// Any of these is accepted.
    pub types: Vec<SemanticType>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skill {
    pub name: String,
    #[serde(default)]
    pub params: Vec<SkillParam>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillLibrary {
    #[serde(default = "default_library_version")]
    pub version: String,
    pub skills: Vec<Skill>,
}

fn default_library_version() -> String {
    "1".into()
}

impl Default for SkillLibrary {
    fn default() -> Self {
        SkillLibrary::from_json(DEFAULT_SKILLS).expect("bundled skills.json is valid")
    }
}

impl SkillLibrary {
    pub fn from_json(text: &str) -> Result<Self, PlanError> {
        let lib: SkillLibrary = serde_json::from_str(text).map_err(|e| PlanError::Library(e.to_string()))?;
        lib.validate()?;
        Ok(lib)
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if self.skills.is_empty() {
            return Err(PlanError::Library("no skills".into()));
        }
        let mut names = BTreeSet::new();
        for skill in &self.skills {
            if skill.name.is_empty() || !names.insert(skill.name.as_str()) {
                return Err(PlanError::Library(format!("duplicate or empty skill name {:?}", skill.name)));
            }
            let mut params = BTreeSet::new();
            for p in &skill.params {
                if p.types.is_empty() || !params.insert(p.name.as_str()) || p.name == "skill" {
                    return Err(PlanError::Library(format!("bad parameter {:?} on {}", p.name, skill.name)));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Skill> {
        self.skills.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum BtNode {
    Sequence { children: Vec<BtNode> },
    Fallback { children: Vec<BtNode> },
    /// Bindings follow the skill's parameter order.
    Action { skill: String, bindings: Vec<(String, String)> },
}

impl BtNode {
    pub fn action(skill: &str, bindings: &[(&str, &str)]) -> BtNode {
        BtNode::Action {
            skill: skill.to_string(),
            bindings: bindings.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Actions in document order.
    pub fn actions(&self) -> Vec<&BtNode> {
        match self {
            BtNode::Action { .. } => vec![self],
            BtNode::Sequence { children } | BtNode::Fallback { children } => {
                children.iter().flat_map(BtNode::actions).collect()
            }
        }
    }

    pub fn binding(&self, name: &str) -> Option<&str> {
        match self {
            BtNode::Action { bindings, .. } => bindings.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorTree {
    pub id: String,
    pub root: BtNode,
    pub source: ConfirmedInstruction,
}

pub fn format_pose(p: Vec3) -> String {
    format!("{};{};{}", p.x, p.y, p.z)
}

pub fn parse_pose(text: &str) -> Option<Vec3> {
    let mut parts = text.split(';').map(|s| s.trim().parse::<f64>());
    let (x, y, z) = (parts.next()?.ok()?, parts.next()?.ok()?, parts.next()?.ok()?);
    let p = Vec3::new(x, y, z);
    (parts.next().is_none() && p.is_finite()).then_some(p)
}

fn type_matches(kind: SemanticType, value: &str, scene: Option<&SceneGraph>) -> bool {
    match kind {
        SemanticType::ObjectId => scene.map_or(!value.is_empty(), |s| s.object(value).is_some()),
        SemanticType::RoomId => scene.map_or(!value.is_empty(), |s| s.room(value).is_some()),
        SemanticType::Pose => parse_pose(value).is_some(),
        SemanticType::Attribute => !value.trim().is_empty(),
    }
}

/// Check an action's bindings against the library (and the scene, when given).
pub(crate) fn check_action(
    lib: &SkillLibrary,
    skill: &str,
    bindings: &[(String, String)],
    scene: Option<&SceneGraph>,
) -> Result<(), PlanError> {
    let def = lib.get(skill).ok_or_else(|| PlanError::UnknownSkill(skill.to_string()))?;
    for param in &def.params {
        let unbound = |reason: &str| PlanError::UnboundParam {
            skill: skill.to_string(),
            param: param.name.clone(),
            reason: reason.to_string(),
        };
        let value = bindings.iter().find(|(k, _)| *k == param.name).map(|(_, v)| v).ok_or_else(|| unbound("missing"))?;
        if !param.types.iter().any(|t| type_matches(*t, value, scene)) {
            return Err(unbound(&format!("{value:?} is not a valid {:?}", param.types)));
        }
    }
    Ok(())
}

pub fn build_plan(
    confirmed: &ConfirmedInstruction,
    scene: &SceneGraph,
    lib: &SkillLibrary,
) -> Result<BehaviorTree, PlanError> {
    let instr = &confirmed.instruction;
    instr.validate(scene).map_err(PlanError::BadInstruction)?;
    let user = format_pose(confirmed.user_pose);
    let mut steps: Vec<BtNode> = Vec::new();
    let nav = |goal: &str| BtNode::action("NavigateTo", &[("goal", goal)]);

    match instr.task {
        TaskType::Fetch => {
            for t in &instr.targets {
                steps.push(nav(t));
                steps.push(BtNode::action("Pick", &[("object", t)]));
            }
            steps.push(nav(&user));
            for t in &instr.targets {
                steps.push(BtNode::action("Handover", &[("object", t)]));
            }
        }
        TaskType::Move => {
            let Some(Destination::Place(dest)) = &instr.destination else {
                return Err(PlanError::BadInstruction("Move needs a destination".into()));
            };
            for t in &instr.targets {
                steps.push(nav(t));
                steps.push(BtNode::action("Pick", &[("object", t)]));
                steps.push(nav(dest));
                steps.push(BtNode::action("Place", &[("object", t), ("destination", dest)]));
            }
        }
        TaskType::CheckPresence => {
            for t in &instr.targets {
                steps.push(nav(t));
                steps.push(BtNode::action("CheckPresence", &[("object", t)]));
            }
        }
        TaskType::CheckState => {
            let t = &instr.targets[0];
            let attribute = instr.attribute.clone().unwrap_or_else(|| default_attribute(scene, t));
            steps.push(nav(t));
            steps.push(BtNode::action("CheckState", &[("object", t), ("attribute", &attribute)]));
        }
        TaskType::GoTo => {
            let goal = match &instr.destination {
                Some(Destination::Place(p)) => p.clone(),
                _ => user.clone(),
            };
            steps.push(nav(&goal));
        }
        TaskType::Dock => {
            let dock = match instr.targets.first() {
                Some(d) => d.clone(),
                None => nearest_dock(scene, confirmed.user_pose)
                    .ok_or_else(|| PlanError::BadInstruction("scene has no dock".into()))?,
            };
            if !scene.object(&dock).is_some_and(|o| o.has(Affordance::Dock)) {
                return Err(PlanError::BadInstruction(format!("{dock:?} is not a dock")));
            }
            steps.push(nav(&dock));
            steps.push(BtNode::action("Dock", &[]));
        }
    }
    for step in &steps {
        if let BtNode::Action { skill, bindings } = step {
            check_action(lib, skill, bindings, Some(scene))?;
        }
    }
    Ok(BehaviorTree { id: "Main".into(), root: BtNode::Sequence { children: steps }, source: confirmed.clone() })
}

fn default_attribute(scene: &SceneGraph, id: &str) -> String {
    scene
        .object(id)
        .and_then(|o| o.state_attributes.keys().next().cloned())
        .unwrap_or_else(|| "power".to_string())
}

fn nearest_dock(scene: &SceneGraph, from: Vec3) -> Option<String> {
    scene
        .objects()
        .iter()
        .filter(|o| o.has(Affordance::Dock))
        .min_by(|a, b| a.position.distance(from).total_cmp(&b.position.distance(from)).then_with(|| a.id.cmp(&b.id)))
        .map(|o| o.id.clone())
}
