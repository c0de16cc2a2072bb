//! Prompt templates with a fixed three-section grammar.
//!
//! Section headers `INSTRUCTIONS`, `CONTENT`, `CONSTRAINT` each appear on
//! their own line, slots render in a fixed order inside each section, and
//! sections are separated by exactly one blank line. The rendering is
//! byte-stable and golden-file tested.

use serde::{Deserialize, Serialize};

use super::embed::fnv1a64;
use super::SemGenError;

/// Expert statements used by the `expertise` variant in place of retrieved
/// knowledge.
pub const EXPERT_KNOWLEDGE: &str = include_str!("../../assets/expert_knowledge.txt");

pub const SEMANTIC_TASK_DESCRIPTION: &str =
    "Convert the network KPI table below into a precise natural-language description of each device's state.";
pub const SEMANTIC_TASK_CONFIRMATION: &str =
    "Confirm that the description covers every device and every KPI in the input.";
pub const SEMANTIC_REINFORCE: &str =
    "Keep all device identifiers, numeric values, and units exactly as given.";
pub const SEMANTIC_STEPS: &str =
    "Think step by step: review each device block, compare each KPI against its expected range, then summarize per device.";
pub const SEMANTIC_RULES: &str =
    "State observed values exactly; do not invent measurements; mention every device exactly once.";
pub const SYMBOLIC_TASK_DESCRIPTION: &str =
    "Convert the following network observations into first-order facts, one predicate(arg, ...) per line.";

const GENERIC_ROLE: &str = "You are a network operations analyst.";

/// Template layout families. The first four differ in which sections and
/// slots are populated; the last two are the demonstration-based layouts
/// used for symbolic generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptVariant {
    ZeroShot,
    GeneralInfo,
    Expertise,
    SelfHeuristic,
    OneShot,
    FewShot,
}

impl PromptVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            PromptVariant::ZeroShot => "zero_shot",
            PromptVariant::GeneralInfo => "general_info",
            PromptVariant::Expertise => "expertise",
            PromptVariant::SelfHeuristic => "self_heuristic",
            PromptVariant::OneShot => "one_shot",
            PromptVariant::FewShot => "few_shot",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "zero_shot" | "zero-shot" => Some(PromptVariant::ZeroShot),
            "general_info" | "general-info" => Some(PromptVariant::GeneralInfo),
            "expertise" => Some(PromptVariant::Expertise),
            "self_heuristic" | "self-heuristic" => Some(PromptVariant::SelfHeuristic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstructionSlots {
    pub role: String,
    pub task_description: String,
    pub reinforce: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ContentSlots {
    /// Only populated for the zero-shot layout, where the task description
    /// lives inside CONTENT.
    pub task_description: Option<String>,
    pub input: String,
    pub task_confirmation: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintSlots {
    pub knowledge: Vec<String>,
    pub steps: Option<String>,
    pub rules: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub variant: PromptVariant,
    pub instructions: Option<InstructionSlots>,
    pub content: ContentSlots,
    pub constraint: Option<ConstraintSlots>,
    pub demonstrations: Vec<Demonstration>,
}

impl PromptTemplate {
    /// Render the prompt in the fixed section grammar.
    pub fn render(&self) -> String {
        let mut sections: Vec<String> = Vec::new();

        if let Some(ins) = &self.instructions {
            let mut s = String::from("INSTRUCTIONS\n");
            push_line(&mut s, &ins.role);
            push_line(&mut s, &ins.task_description);
            push_line(&mut s, &ins.reinforce);
            sections.push(s);
        }

        let mut content = String::from("CONTENT\n");
        if let Some(td) = &self.content.task_description {
            push_line(&mut content, td);
        }
        for demo in &self.demonstrations {
            push_line(&mut content, "Example input:");
            push_line(&mut content, &demo.input);
            push_line(&mut content, "Example output:");
            push_line(&mut content, &demo.output);
        }
        push_line(&mut content, &self.content.input);
        if let Some(tc) = &self.content.task_confirmation {
            push_line(&mut content, tc);
        }
        sections.push(content);

        if let Some(con) = &self.constraint {
            let mut s = String::from("CONSTRAINT\n");
            for k in &con.knowledge {
                push_line(&mut s, k);
            }
            if let Some(steps) = &con.steps {
                push_line(&mut s, steps);
            }
            if let Some(rules) = &con.rules {
                push_line(&mut s, rules);
            }
            sections.push(s);
        }

        sections.join("\n")
    }

    /// Stable identifier derived from the rendered text.
    pub fn prompt_id(&self) -> String {
        format!("{:016x}", fnv1a64(self.render().as_bytes(), 0))
    }
}

fn push_line(out: &mut String, slot: &str) {
    let trimmed = slot.trim_end_matches('\n');
    if !trimmed.is_empty() {
        out.push_str(trimmed);
        out.push('\n');
    }
}

/// Build a semantic prompt for the given variant.
///
/// `kg_snippets` fill the `<knowledge>` slot (self-heuristic only) and
/// `device_context` fills `<role>`/`<task description>`; zero-shot ignores
/// both. The self-heuristic variant requires both to be present.
pub fn build_semantic_prompt(
    variant: PromptVariant,
    table_text: &str,
    kg_snippets: &[String],
    device_context: &str,
) -> Result<PromptTemplate, SemGenError> {
    let role = if device_context.is_empty() {
        GENERIC_ROLE.to_string()
    } else {
        format!("You are a network operations analyst responsible for {device_context}.")
    };
    let task_description = if device_context.is_empty() {
        SEMANTIC_TASK_DESCRIPTION.to_string()
    } else {
        format!("{SEMANTIC_TASK_DESCRIPTION} The network under observation is {device_context}.")
    };

    let template = match variant {
        PromptVariant::ZeroShot => PromptTemplate {
            variant,
            instructions: None,
            content: ContentSlots {
                task_description: Some(SEMANTIC_TASK_DESCRIPTION.to_string()),
                input: table_text.to_string(),
                task_confirmation: None,
            },
            constraint: None,
            demonstrations: vec![],
        },
        PromptVariant::GeneralInfo => PromptTemplate {
            variant,
            instructions: Some(InstructionSlots {
                role,
                task_description,
                reinforce: SEMANTIC_REINFORCE.to_string(),
            }),
            content: ContentSlots {
                task_description: None,
                input: table_text.to_string(),
                task_confirmation: Some(SEMANTIC_TASK_CONFIRMATION.to_string()),
            },
            constraint: Some(ConstraintSlots {
                knowledge: vec![],
                steps: Some(SEMANTIC_STEPS.to_string()),
                rules: Some(SEMANTIC_RULES.to_string()),
            }),
            demonstrations: vec![],
        },
        PromptVariant::Expertise => PromptTemplate {
            variant,
            instructions: Some(InstructionSlots {
                role,
                task_description,
                reinforce: SEMANTIC_REINFORCE.to_string(),
            }),
            content: ContentSlots {
                task_description: None,
                input: table_text.to_string(),
                task_confirmation: Some(SEMANTIC_TASK_CONFIRMATION.to_string()),
            },
            constraint: Some(ConstraintSlots {
                knowledge: EXPERT_KNOWLEDGE
                    .lines()
                    .filter(|l| !l.is_empty())
                    .map(str::to_string)
                    .collect(),
                steps: Some(SEMANTIC_STEPS.to_string()),
                rules: Some(SEMANTIC_RULES.to_string()),
            }),
            demonstrations: vec![],
        },
        PromptVariant::SelfHeuristic => {
            if kg_snippets.is_empty() || device_context.is_empty() {
                return Err(SemGenError::MissingContext);
            }
            PromptTemplate {
                variant,
                instructions: Some(InstructionSlots {
                    role,
                    task_description,
                    reinforce: SEMANTIC_REINFORCE.to_string(),
                }),
                content: ContentSlots {
                    task_description: None,
                    input: table_text.to_string(),
                    task_confirmation: Some(SEMANTIC_TASK_CONFIRMATION.to_string()),
                },
                constraint: Some(ConstraintSlots {
                    knowledge: kg_snippets.to_vec(),
                    steps: Some(SEMANTIC_STEPS.to_string()),
                    rules: Some(SEMANTIC_RULES.to_string()),
                }),
                demonstrations: vec![],
            }
        }
        PromptVariant::OneShot | PromptVariant::FewShot => {
            return Err(SemGenError::MissingContext)
        }
    };
    Ok(template)
}

/// Build a symbolic prompt: demonstrations in the given order, input last.
/// One demonstration yields the one-shot layout, more the few-shot layout.
pub fn build_symbolic_prompt(
    demonstrations: &[Demonstration],
    input: &str,
) -> Result<PromptTemplate, SemGenError> {
    if demonstrations.is_empty() {
        return Err(SemGenError::NoDemonstrations);
    }
    let variant = if demonstrations.len() == 1 {
        PromptVariant::OneShot
    } else {
        PromptVariant::FewShot
    };
    Ok(PromptTemplate {
        variant,
        instructions: None,
        content: ContentSlots {
            task_description: Some(SYMBOLIC_TASK_DESCRIPTION.to_string()),
            input: input.to_string(),
            task_confirmation: None,
        },
        constraint: None,
        demonstrations: demonstrations.to_vec(),
    })
}
