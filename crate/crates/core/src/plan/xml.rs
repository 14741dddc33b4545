use std::fmt;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, Event};
use quick_xml::{Reader, Writer};
use serde::{Deserialize, Serialize};

use super::{check_action, format_pose, parse_pose, BehaviorTree, BtNode, PlanError, SkillLibrary};
use crate::disambiguation::{CandidateInstruction, ConfirmedInstruction, Destination, TaskType};

pub const BT_FORMAT: &str = "4";
pub const BT_SCHEMA_XSD: &str = include_str!("../../assets/bt_schema.xsd");

const TREE_ATTRIBUTES: [&str; 10] =
    ["ID", "rank", "task", "targets", "destination", "attribute", "user_pose", "display_text", "explanation", "padding"];

pub fn to_xml(tree: &BehaviorTree) -> String {
    let mut writer = Writer::new_with_indent(Vec::new(), b' ', 2);
    // Writing into a Vec cannot fail.
    let mut emit = |event: Event<'_>| writer.write_event(event).expect("in-memory write");
    emit(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)));
    emit(Event::Start(BytesStart::new("root").with_attributes([("bt_format", BT_FORMAT), ("main_tree_to_execute", &*tree.id)])));

    let instr = &tree.source.instruction;
    let rank = instr.rank.to_string();
    let task = format!("{:?}", instr.task);
    let targets = instr.targets.join(",");
    let destination = instr.destination.as_ref().map(ToString::to_string);
    let pose = format_pose(tree.source.user_pose);
    let mut head = BytesStart::new("BehaviorTree");
    head.push_attribute(("ID", tree.id.as_str()));
    head.push_attribute(("rank", rank.as_str()));
    head.push_attribute(("task", task.as_str()));
    head.push_attribute(("targets", targets.as_str()));
    if let Some(d) = &destination {
        head.push_attribute(("destination", d.as_str()));
    }
    if let Some(a) = &instr.attribute {
        head.push_attribute(("attribute", a.as_str()));
    }
    head.push_attribute(("user_pose", pose.as_str()));
    head.push_attribute(("display_text", instr.display_text.as_str()));
    head.push_attribute(("explanation", instr.explanation.as_str()));
    if instr.padding {
        head.push_attribute(("padding", "true"));
    }
    emit(Event::Start(head));
    write_node(&tree.root, &mut emit);
    emit(Event::End(BytesEnd::new("BehaviorTree")));
    emit(Event::End(BytesEnd::new("root")));
    drop(emit);
    let mut text = String::from_utf8(writer.into_inner()).expect("utf-8 output");
    text.push('\n');
    text
}

fn write_node(node: &BtNode, emit: &mut impl FnMut(Event<'_>)) {
    match node {
        BtNode::Action { skill, bindings } => {
            let mut el = BytesStart::new("Action");
            el.push_attribute(("skill", skill.as_str()));
            for (k, v) in bindings {
                el.push_attribute((k.as_str(), v.as_str()));
            }
            emit(Event::Empty(el));
        }
        BtNode::Sequence { children } | BtNode::Fallback { children } => {
            let name = if matches!(node, BtNode::Sequence { .. }) { "Sequence" } else { "Fallback" };
            emit(Event::Start(BytesStart::new(name)));
            for child in children {
                write_node(child, emit);
            }
            emit(Event::End(BytesEnd::new(name)));
        }
    }
}

/// Minimal element tree; text content is not part of the format.
#[derive(Debug)]
struct Element {
    name: String,
    attrs: Vec<(String, String)>,
    children: Vec<Element>,
}

impl Element {
    fn attr(&self, key: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

fn parse_dom(xml: &str) -> Result<Element, String> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    loop {
        let event = reader.read_event().map_err(|e| format!("malformed xml at byte {}: {e}", reader.buffer_position()))?;
        match event {
            Event::Start(e) | Event::Empty(e) if root.is_some() => {
                return Err(format!("content after the document element: <{}>", String::from_utf8_lossy(e.name().as_ref())));
            }
            Event::Start(e) => stack.push(element(&e)?),
            Event::Empty(e) => {
                let el = element(&e)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::End(_) => {
                let el = stack.pop().ok_or("unbalanced end tag")?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None => root = Some(el),
                }
            }
            Event::Text(t) => {
                let text = t.unescape().map_err(|e| e.to_string())?;
                if !text.trim().is_empty() {
                    return Err(format!("unexpected text {:?}", text.trim()));
                }
            }
            Event::CData(_) => return Err("unexpected CDATA".into()),
            Event::Eof => break,
            _ => {}
        }
    }
    if !stack.is_empty() {
        return Err(format!("unclosed element <{}>", stack.last().map(|e| e.name.as_str()).unwrap_or_default()));
    }
    root.ok_or_else(|| "empty document".into())
}

fn element(e: &BytesStart<'_>) -> Result<Element, String> {
    let name = String::from_utf8_lossy(e.name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| format!("bad attribute on <{name}>: {err}"))?;
        let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
        let value = attr.unescape_value().map_err(|err| err.to_string())?.into_owned();
        attrs.push((key, value));
    }
    Ok(Element { name, attrs, children: Vec::new() })
}

/// Structural checks; returns the tree element.
fn check_schema(doc: &Element) -> Result<&Element, String> {
    if doc.name != "root" {
        return Err(format!("document element is <{}>, expected <root>", doc.name));
    }
    if doc.attr("bt_format") != Some(BT_FORMAT) {
        return Err(format!("bt_format must be {BT_FORMAT:?}"));
    }
    let main = doc.attr("main_tree_to_execute").ok_or("missing main_tree_to_execute")?;
    let [tree] = doc.children.as_slice() else {
        return Err(format!("expected one <BehaviorTree>, found {} children", doc.children.len()));
    };
    if tree.name != "BehaviorTree" {
        return Err(format!("unexpected <{}> under <root>", tree.name));
    }
    if tree.attr("ID") != Some(main) {
        return Err("BehaviorTree ID does not match main_tree_to_execute".into());
    }
    if let Some((k, _)) = tree.attrs.iter().find(|(k, _)| !TREE_ATTRIBUTES.contains(&k.as_str())) {
        return Err(format!("unexpected BehaviorTree attribute {k:?}"));
    }
    if tree.attr("task").is_none() {
        return Err("BehaviorTree lacks task".into());
    }
    if tree.children.len() != 1 {
        return Err(format!("BehaviorTree must hold one node, found {}", tree.children.len()));
    }
    check_node_shape(&tree.children[0])?;
    Ok(tree)
}

fn check_node_shape(el: &Element) -> Result<(), String> {
    match el.name.as_str() {
        "Sequence" | "Fallback" => {
            if !el.attrs.is_empty() {
                return Err(format!("<{}> takes no attributes", el.name));
            }
            if el.children.is_empty() {
                return Err(format!("empty <{}>", el.name));
            }
            el.children.iter().try_for_each(check_node_shape)
        }
        "Action" => {
            if el.attr("skill").is_none_or(str::is_empty) {
                return Err("<Action> without skill".into());
            }
            if !el.children.is_empty() {
                return Err("<Action> must be empty".into());
            }
            Ok(())
        }
        other => Err(format!("unknown node <{other}>")),
    }
}

fn to_node(el: &Element) -> BtNode {
    match el.name.as_str() {
        "Action" => BtNode::Action {
            skill: el.attr("skill").unwrap_or_default().to_string(),
            bindings: el.attrs.iter().filter(|(k, _)| k != "skill").cloned().collect(),
        },
        name => {
            let children = el.children.iter().map(to_node).collect();
            if name == "Sequence" {
                BtNode::Sequence { children }
            } else {
                BtNode::Fallback { children }
            }
        }
    }
}

/// Parse a plan document back into a tree. Library membership is not checked here.
pub fn parse_xml(xml: &str) -> Result<BehaviorTree, PlanError> {
    let doc = parse_dom(xml).map_err(PlanError::Xml)?;
    let tree = check_schema(&doc).map_err(PlanError::Xml)?;
    let bad = |msg: String| PlanError::Xml(msg);
    let task_name = tree.attr("task").unwrap_or_default();
    let task = TaskType::parse_loose(task_name).ok_or_else(|| bad(format!("unknown task {task_name:?}")))?;
    let rank = match tree.attr("rank") {
        Some(r) => r.parse().map_err(|_| bad(format!("bad rank {r:?}")))?,
        None => 1,
    };
    let user_pose = match tree.attr("user_pose") {
        Some(p) => parse_pose(p).ok_or_else(|| bad(format!("bad user_pose {p:?}")))?,
        None => Default::default(),
    };
    let targets = tree
        .attr("targets")
        .filter(|t| !t.is_empty())
        .map(|t| t.split(',').map(str::to_owned).collect())
        .unwrap_or_default();
    let padding = match tree.attr("padding") {
        None | Some("false") => false,
        Some("true") => true,
        Some(other) => return Err(bad(format!("bad padding {other:?}"))),
    };
    let instruction = CandidateInstruction {
        rank,
        task,
        targets,
        destination: tree.attr("destination").map(Destination::from),
        attribute: tree.attr("attribute").map(str::to_owned),
        display_text: tree.attr("display_text").unwrap_or_default().to_string(),
        explanation: tree.attr("explanation").unwrap_or_default().to_string(),
        padding,
    };
    Ok(BehaviorTree {
        id: tree.attr("ID").unwrap_or_default().to_string(),
        root: to_node(&tree.children[0]),
        source: ConfirmedInstruction { instruction, user_pose },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    Schema,
    UnknownSkill,
    UnboundParam,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub kind: FindingKind,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

/// Every problem found in `xml`; empty means the plan is valid for `lib`.
pub fn validate_bt(xml: &str, lib: &SkillLibrary) -> Vec<Finding> {
    let schema = |message: String| vec![Finding { kind: FindingKind::Schema, message }];
    let doc = match parse_dom(xml) {
        Ok(doc) => doc,
        Err(e) => return schema(e),
    };
    if let Err(e) = check_schema(&doc) {
        return schema(e);
    }
    let tree = to_node(&doc.children[0].children[0]);
    let mut findings = Vec::new();
    for action in tree.actions() {
        let BtNode::Action { skill, bindings } = action else { continue };
        match check_action(lib, skill, bindings, None) {
            Ok(()) => {}
            Err(PlanError::UnknownSkill(name)) => {
                findings.push(Finding { kind: FindingKind::UnknownSkill, message: format!("unknown skill {name:?}") });
                continue;
            }
            Err(e) => findings.push(Finding { kind: FindingKind::UnboundParam, message: e.to_string() }),
        }
        if let Some(def) = lib.get(skill) {
            for (k, _) in bindings {
                if !def.params.iter().any(|p| &p.name == k) {
                    findings.push(Finding { kind: FindingKind::Schema, message: format!("{skill} has no parameter {k:?}") });
                }
            }
        }
    }
    findings
}
