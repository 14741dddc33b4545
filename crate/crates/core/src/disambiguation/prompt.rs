use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::scene::SceneGraph;
use crate::session::MultimodalCommand;

pub const PROMPT_TEMPLATE_VERSION: &str = "v1";

/// The modality priority statement carried verbatim by every rules section.
pub const PRIORITY_POLICY: &str = "Voice commands have the highest priority, while gaze and finger-pointing are treated equally.";

const GUIDANCE: &str = include_str!("../../assets/prompts/v1/guidance.txt");
const RULES: &str = include_str!("../../assets/prompts/v1/rules.txt");
const OUTPUT_FORMAT: &str = include_str!("../../assets/prompts/v1/output_format.txt");
const SKILL_LIBRARY: &str = include_str!("../../assets/prompts/v1/skill_library.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub version: String,
    pub guidance: String,
    pub rules: String,
    pub input_data: String,
    pub output_format: String,
    pub skill_library: String,
    /// Scene listing that grounds the ids used in the other sections.
    pub scene: String,
}

impl PromptBundle {
    /// System and user message texts for a chat-style endpoint.
    pub fn to_messages(&self) -> (String, String) {
        let system = format!(
            "# Guidance\n{}\n# Rules\n{}\n# Skill library\n{}\n# Output format\n{}",
            self.guidance, self.rules, self.skill_library, self.output_format
        );
        let user = format!("# Scene\n{}\n# Input data\n{}", self.scene, self.input_data);
        (system, user)
    }
}

pub fn assemble_prompt(command: &MultimodalCommand, scene: &SceneGraph) -> PromptBundle {
    PromptBundle {
        version: PROMPT_TEMPLATE_VERSION.to_string(),
        guidance: GUIDANCE.to_string(),
        rules: RULES.to_string(),
        input_data: format_input(command),
        output_format: OUTPUT_FORMAT.to_string(),
        skill_library: SKILL_LIBRARY.to_string(),
        scene: scene.serialize_for_prompt(),
    }
}

fn format_input(command: &MultimodalCommand) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "user_position={}", command.user_pose);
    if command.is_non_voice() {
        let _ = writeln!(out, "transcript=<non-voice>");
    } else {
        let _ = writeln!(out, "transcript={:?}", command.transcript.trim());
    }
    for (k, snapshot) in command.snapshots.iter().enumerate() {
        let _ = writeln!(out, "## snapshot {} t={}", k + 1, snapshot.t);
        let hits = command.possible_objects.get(k).map(Vec::as_slice).unwrap_or_default();
        if hits.is_empty() {
            let _ = writeln!(out, "- (no possible objects)");
        }
        for p in hits {
            let _ = writeln!(
                out,
                "- {} via {} tier={:?} offset={:.2}deg distance={:.2}m",
                p.object_id,
                p.modality.as_str(),
                p.tier,
                p.offset,
                p.distance
            );
        }
    }
    out
}
