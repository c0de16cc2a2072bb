//! Diagnosis orchestration: the four-component context, problem statements,
//! fault blueprints with diagnostic plans, LLM-backed verdict/synthesis
//! reasoning, and the five-field report.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::FaultCategory;
use crate::nkg::{EntityKind, KnowledgeGraph, RetrievalResult};
use crate::symgen::{AnomalyFinding, EntitySet};

pub mod pipeline;
pub mod provider;

pub use pipeline::{run_pipeline, PipelineAudit, PipelineConfig, PipelineError, PipelineOutput};
pub use provider::{
    LlmProvider, MockProvider, ProviderCapabilities, ProviderError, RecordingProvider,
    RemoteProvider, ScriptedProvider,
};

#[derive(Debug, Error)]
pub enum DiagnoseError {
    #[error("diagnosis requires at least one blueprint")]
    NoBlueprints,

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("report field {0} is empty")]
    EmptyReportField(&'static str),

    #[error("report fault_type {0:?} is not a known category, normal, or unknown")]
    BadFaultType(String),
}

/// Marker substituted for a context component disabled by an ablation run.
/// Components are never empty strings.
pub const OMITTED_MARKER: &str = "[omitted]";

/// Fixed problem statement for a healthy network.
pub const NO_VIOLATION_SENTENCE: &str =
    "No rule violations were detected; verify network health.";

// ============================================================================
// Context
// ============================================================================

/// The four components of a diagnosis request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisContext {
    pub semantic_block: String,
    pub symbolic_block: String,
    pub knowledge_block: String,
    pub problem_statement: String,
}

impl DiagnosisContext {
    /// Fixed-order rendering with one labeled section per component.
    pub fn render(&self) -> String {
        let sections = [
            ("SEMANTIC", &self.semantic_block),
            ("SYMBOLIC", &self.symbolic_block),
            ("KNOWLEDGE", &self.knowledge_block),
            ("PROBLEM", &self.problem_statement),
        ];
        sections
            .iter()
            .map(|(header, body)| format!("{header}\n{}\n", body.trim_end_matches('\n')))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

/// Assemble the context; empty components are replaced by the omission
/// marker so every section is always present.
pub fn concat_context(
    semantic: &str,
    symbolic: &str,
    knowledge: &str,
    problem: &str,
) -> DiagnosisContext {
    let fill = |s: &str| {
        if s.trim().is_empty() {
            OMITTED_MARKER.to_string()
        } else {
            s.to_string()
        }
    };
    DiagnosisContext {
        semantic_block: fill(semantic),
        symbolic_block: fill(symbolic),
        knowledge_block: fill(knowledge),
        problem_statement: fill(problem),
    }
}

/// One sentence per distinct (entity, KPI) pair, sorted; a fixed sentence
/// when there are no findings.
pub fn make_problem_statement(findings: &[AnomalyFinding]) -> String {
    if findings.is_empty() {
        return NO_VIOLATION_SENTENCE.to_string();
    }
    let mut by_pair: BTreeMap<(String, String), &AnomalyFinding> = BTreeMap::new();
    for f in findings {
        by_pair.entry((f.entity.clone(), f.kpi.clone())).or_insert(f);
    }
    by_pair
        .values()
        .map(|f| {
            format!(
                "Device {} reported {} = {} (expected {}), violating rule {}.",
                f.entity, f.kpi, f.observed, f.relation, f.violated_rule
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

// ============================================================================
// Blueprints
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    TrafficStats,
    RoutingTable,
    InterfaceStatus,
    Signal,
    Config,
    Generic,
}

impl CheckKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CheckKind::TrafficStats => "traffic_stats",
            CheckKind::RoutingTable => "routing_table",
            CheckKind::InterfaceStatus => "interface_status",
            CheckKind::Signal => "signal",
            CheckKind::Config => "config",
            CheckKind::Generic => "generic",
        }
    }

    /// Infer the check family from a step description.
    pub fn infer(description: &str) -> Self {
        let d = description.to_lowercase();
        if d.contains("traffic") {
            CheckKind::TrafficStats
        } else if d.contains("routing") {
            CheckKind::RoutingTable
        } else if d.contains("interface") || d.contains("nic") || d.contains("port") {
            CheckKind::InterfaceStatus
        } else if d.contains("signal") || d.contains("rssi") {
            CheckKind::Signal
        } else if d.contains("config") {
            CheckKind::Config
        } else {
            CheckKind::Generic
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepProvenance {
    Kg,
    Builtin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticStep {
    pub description: String,
    pub check_kind: CheckKind,
    pub target: String,
    pub provenance: StepProvenance,
}

/// A candidate fault cause paired with its supporting evidence and plan.
/// Blueprint ids and causes are in bijection within one diagnosis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blueprint {
    pub id: String,
    /// Knowledge-graph entity id of the cause (`unknown`/`normal` for the
    /// fallback and health paths).
    pub cause_id: String,
    /// Human-readable cause name (the fault type).
    pub cause: String,
    pub evidence: EntitySet,
    pub steps: Vec<DiagnosticStep>,
}

impl Blueprint {
    fn render_section(&self) -> String {
        let mut out = String::from("BLUEPRINT\n");
        out.push_str(&format!("id: {}\n", self.id));
        out.push_str(&format!("cause_id: {}\n", self.cause_id));
        out.push_str(&format!("cause_name: {}\n", self.cause));
        out.push_str(&format!("evidence: {}\n", self.evidence.ids().join(", ")));
        if !self.steps.is_empty() {
            out.push_str("steps:\n");
            for s in &self.steps {
                out.push_str(&format!("- [{}] {} (target {})\n", s.check_kind, s.description, s.target));
            }
        }
        out
    }
}

/// One blueprint per fault-type entity reachable in the retrieved subgraph
/// from any anomalous entity, de-duplicated by cause and sorted by cause
/// name. Findings contribute device→metric edges, so an anomalous device
/// reaches causes through the metrics it violated even before the graph has
/// absorbed the device itself. When nothing is reachable the single fallback
/// blueprint carries cause `unknown`.
pub fn generate_blueprints(
    anomalous: &EntitySet,
    findings: &[AnomalyFinding],
    retrieval: &RetrievalResult,
) -> Vec<Blueprint> {
    if anomalous.is_empty() {
        return Vec::new();
    }

    let sub = &retrieval.subgraph;
    let known: BTreeSet<&str> = sub.entities.iter().map(|e| e.id.as_str()).collect();
    // Device-class entities are taxonomy hubs linked to every metric of the
    // class; paths through them carry no causal meaning and would make every
    // fault type reachable from any anomaly.
    let hubs: BTreeSet<&str> = sub
        .entities
        .iter()
        .filter(|e| e.kind == EntityKind::DeviceClass)
        .map(|e| e.id.as_str())
        .collect();

    let mut edges: Vec<(String, String)> = sub
        .relations
        .iter()
        .map(|r| (r.subject.clone(), r.object.clone()))
        .collect();
    for f in findings {
        if known.contains(f.kpi.as_str()) {
            edges.push((f.entity.clone(), f.kpi.clone()));
        }
    }
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (a, b) in &edges {
        adj.entry(a.as_str()).or_default().insert(b.as_str());
        adj.entry(b.as_str()).or_default().insert(a.as_str());
    }

    let fault_types: BTreeMap<&str, &str> = sub
        .entities
        .iter()
        .filter(|e| e.kind == EntityKind::FaultType)
        .map(|e| (e.id.as_str(), e.name.as_str()))
        .collect();

    // cause id -> (cause name, supporting entities)
    let mut causes: BTreeMap<&str, (&str, BTreeSet<String>)> = BTreeMap::new();
    for n in anomalous.ids() {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut stack = vec![n.as_str()];
        while let Some(v) = stack.pop() {
            if !seen.insert(v) {
                continue;
            }
            if hubs.contains(v) {
                continue;
            }
            if let Some(next) = adj.get(v) {
                stack.extend(next.iter().copied());
            }
        }
        for (fault_id, fault_name) in &fault_types {
            if seen.contains(fault_id) {
                causes
                    .entry(fault_id)
                    .or_insert_with(|| (fault_name, BTreeSet::new()))
                    .1
                    .insert(n.clone());
            }
        }
    }

    if causes.is_empty() {
        return vec![Blueprint {
            id: "k1".to_string(),
            cause_id: "unknown".to_string(),
            cause: "unknown".to_string(),
            evidence: anomalous.clone(),
            steps: Vec::new(),
        }];
    }

    let mut list: Vec<(String, String, BTreeSet<String>)> = causes
        .into_iter()
        .map(|(id, (name, evidence))| (name.to_string(), id.to_string(), evidence))
        .collect();
    list.sort();
    // De-duplicate by cause name, merging evidence.
    let mut merged: Vec<(String, String, BTreeSet<String>)> = Vec::new();
    for (name, id, evidence) in list {
        match merged.last_mut() {
            Some((last_name, _, last_evidence)) if *last_name == name => {
                last_evidence.extend(evidence);
            }
            _ => merged.push((name, id, evidence)),
        }
    }
    merged
        .into_iter()
        .enumerate()
        .map(|(i, (name, id, evidence))| Blueprint {
            id: format!("k{}", i + 1),
            cause_id: id,
            cause: name,
            evidence: EntitySet::from_ids(evidence),
            steps: Vec::new(),
        })
        .collect()
}

/// The blueprint used when no anomalies were found: a health check over the
/// whole device set.
pub fn health_blueprint(device_ids: impl IntoIterator<Item = String>) -> Blueprint {
    Blueprint {
        id: "k1".to_string(),
        cause_id: "normal".to_string(),
        cause: "normal".to_string(),
        evidence: EntitySet::from_ids(device_ids),
        steps: Vec::new(),
    }
}

const BUILTIN_STEPS: [&str; 3] = [
    "check the interface status",
    "verify the device configuration",
    "review recent KPI trends",
];

/// Extract the diagnostic plan for a blueprint from the knowledge graph:
/// step entities linked to the cause via `diagnosed_by`, in declared (id)
/// order, each targeting the first evidence entity. Causes without steps in
/// the graph fall back to generic builtin steps, flagged by provenance.
pub fn extract_plan(blueprint: &Blueprint, kg: &KnowledgeGraph) -> Vec<DiagnosticStep> {
    let target = blueprint
        .evidence
        .ids()
        .first()
        .cloned()
        .unwrap_or_else(|| "network".to_string());
    let mut step_ids: Vec<&str> = kg
        .relations()
        .filter(|r| r.predicate == "diagnosed_by" && r.subject == blueprint.cause_id)
        .map(|r| r.object.as_str())
        .collect();
    step_ids.sort_unstable();
    step_ids.dedup();

    if step_ids.is_empty() {
        return BUILTIN_STEPS
            .iter()
            .map(|description| DiagnosticStep {
                description: description.to_string(),
                check_kind: CheckKind::infer(description),
                target: target.clone(),
                provenance: StepProvenance::Builtin,
            })
            .collect();
    }
    step_ids
        .into_iter()
        .map(|id| {
            let description = kg
                .entity(id)
                .map(|e| e.name.clone())
                .unwrap_or_else(|| id.to_string());
            DiagnosticStep {
                check_kind: CheckKind::infer(&description),
                description,
                target: target.clone(),
                provenance: StepProvenance::Kg,
            }
        })
        .collect()
}

// ============================================================================
// Report
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Confirmed,
    RuledOut,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Confirmed => "confirmed",
            Verdict::RuledOut => "ruled_out",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlueprintVerdict {
    pub blueprint_id: String,
    pub cause: String,
    pub verdict: Verdict,
}

/// The final report: the five required fields plus machine sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub fault_type: String,
    pub phenomenon: String,
    pub explanation: String,
    pub summary: String,
    pub solutions: Vec<String>,
    pub per_blueprint: Vec<BlueprintVerdict>,
    pub anomalies: Vec<AnomalyFinding>,
}

impl DiagnosisReport {
    /// Enforce the report invariants: five non-empty fields and a fault type
    /// drawn from the six categories, `normal`, or `unknown`.
    pub fn validate(&self) -> Result<(), DiagnoseError> {
        if self.fault_type.is_empty() {
            return Err(DiagnoseError::EmptyReportField("fault_type"));
        }
        if self.phenomenon.is_empty() {
            return Err(DiagnoseError::EmptyReportField("phenomenon"));
        }
        if self.explanation.is_empty() {
            return Err(DiagnoseError::EmptyReportField("explanation"));
        }
        if self.summary.is_empty() {
            return Err(DiagnoseError::EmptyReportField("summary"));
        }
        if self.solutions.is_empty() || self.solutions.iter().any(String::is_empty) {
            return Err(DiagnoseError::EmptyReportField("solutions"));
        }
        let known = FaultCategory::ALL
            .iter()
            .any(|c| c.display_name() == self.fault_type);
        if !known && self.fault_type != "normal" && self.fault_type != "unknown" {
            return Err(DiagnoseError::BadFaultType(self.fault_type.clone()));
        }
        Ok(())
    }

    /// Human-readable rendering, derived from the structured form.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("NETWORK FAULT DIAGNOSIS REPORT\n");
        out.push_str("==============================\n");
        out.push_str(&format!("Fault Type: {}\n", self.fault_type));
        out.push_str(&format!("Phenomenon: {}\n", self.phenomenon));
        out.push_str(&format!("Explanation: {}\n", self.explanation));
        out.push_str(&format!("Summary: {}\n", self.summary));
        out.push_str("Proposed Solutions:\n");
        for (i, s) in self.solutions.iter().enumerate() {
            out.push_str(&format!("  {}. {}\n", i + 1, s));
        }
        out.push_str("Blueprint Verdicts:\n");
        for v in &self.per_blueprint {
            out.push_str(&format!("  {} ({}): {}\n", v.blueprint_id, v.cause, v.verdict));
        }
        out.push_str("Rule Findings:\n");
        if self.anomalies.is_empty() {
            out.push_str("  none\n");
        }
        for a in &self.anomalies {
            out.push_str(&format!(
                "  {} {} = {} violates {} ({}) in {}\n",
                a.entity, a.kpi, a.observed, a.violated_rule, a.relation, a.window
            ));
        }
        out
    }
}

// ============================================================================
// Reasoning
// ============================================================================

#[derive(Debug, Clone, Copy)]
pub struct DiagnosisConfig {
    /// Temperature for the synthesis call; verdict calls always run at 0.
    pub temperature: f64,
    pub seed: u64,
}

impl Default for DiagnosisConfig {
    fn default() -> Self {
        Self {
            temperature: 0.0,
            seed: 0,
        }
    }
}

fn parse_verdict(text: &str) -> Option<Verdict> {
    for line in text.lines() {
        if let Some(rest) = line.trim().strip_prefix("verdict:") {
            return match rest.trim() {
                "confirmed" => Some(Verdict::Confirmed),
                "ruled_out" => Some(Verdict::RuledOut),
                "inconclusive" => Some(Verdict::Inconclusive),
                _ => None,
            };
        }
    }
    None
}

struct ParsedReport {
    fault_type: String,
    phenomenon: String,
    explanation: String,
    summary: String,
    solutions: Vec<String>,
}

fn parse_report(text: &str) -> Option<ParsedReport> {
    let mut fields: BTreeMap<&str, String> = BTreeMap::new();
    let mut solutions = Vec::new();
    let mut in_solutions = false;
    for line in text.lines() {
        let line = line.trim_end();
        if line.trim() == "solutions:" {
            in_solutions = true;
            continue;
        }
        if in_solutions {
            if let Some(item) = line.trim().strip_prefix("- ") {
                solutions.push(item.to_string());
                continue;
            }
            in_solutions = false;
        }
        for key in ["fault_type", "phenomenon", "explanation", "summary"] {
            if let Some(value) = line.strip_prefix(&format!("{key}: ")) {
                fields.insert(key, value.trim().to_string());
            }
        }
    }
    let complete = ["fault_type", "phenomenon", "explanation", "summary"]
        .iter()
        .all(|k| fields.get(k).is_some_and(|v| !v.is_empty()));
    if !complete || solutions.is_empty() {
        return None;
    }
    Some(ParsedReport {
        fault_type: fields.remove("fault_type").unwrap(),
        phenomenon: fields.remove("phenomenon").unwrap(),
        explanation: fields.remove("explanation").unwrap(),
        summary: fields.remove("summary").unwrap(),
        solutions,
    })
}

const VERDICT_FORMAT_HINT: &str =
    "Respond with 'verdict: confirmed', 'verdict: ruled_out', or 'verdict: inconclusive', then a reason line.";
const REPORT_FORMAT_HINT: &str = "Respond with exactly these lines: 'fault_type: <type>', \
'phenomenon: <text>', 'explanation: <text>', 'summary: <text>', 'solutions:' followed by '- <solution>' items.";

/// Run blueprint-guided reasoning: one verdict call per blueprint (at
/// temperature 0) and one synthesis call for the report. Unparseable output
/// gets one reformat retry; a synthesis that still fails to parse degrades to
/// an `unknown` report carrying the raw text. The happy path issues exactly
/// `|blueprints| + 1` provider calls.
pub fn run_diagnosis(
    ctx: &DiagnosisContext,
    blueprints: &[Blueprint],
    provider: &dyn LlmProvider,
    config: &DiagnosisConfig,
    findings: &[AnomalyFinding],
) -> Result<DiagnosisReport, DiagnoseError> {
    if blueprints.is_empty() {
        return Err(DiagnoseError::NoBlueprints);
    }
    let ctx_text = ctx.render();

    let mut verdicts = Vec::with_capacity(blueprints.len());
    for blueprint in blueprints {
        let prompt = format!(
            "{ctx_text}\n{}\n{}\n{VERDICT_FORMAT_HINT}\n",
            blueprint.render_section(),
            provider::TASK_VERDICT
        );
        let response = provider.complete(&prompt, 0.0, config.seed)?;
        let verdict = match parse_verdict(&response) {
            Some(v) => v,
            None => {
                let retry_prompt = format!("{prompt}\n{VERDICT_FORMAT_HINT}\n");
                let retry = provider.complete(&retry_prompt, 0.0, config.seed)?;
                parse_verdict(&retry).unwrap_or(Verdict::Inconclusive)
            }
        };
        verdicts.push(BlueprintVerdict {
            blueprint_id: blueprint.id.clone(),
            cause: blueprint.cause.clone(),
            verdict,
        });
    }

    let mut synthesis = format!("{ctx_text}\nVERDICTS\n");
    for (b, v) in blueprints.iter().zip(&verdicts) {
        synthesis.push_str(&format!(
            "verdict {} {} {} {}\n",
            b.id,
            b.cause_id,
            v.verdict,
            b.cause
        ));
    }
    synthesis.push_str("\nSTEPS\n");
    for (b, v) in blueprints.iter().zip(&verdicts) {
        if v.verdict == Verdict::Confirmed {
            for s in &b.steps {
                synthesis.push_str(&format!("- {} (target {})\n", s.description, s.target));
            }
        }
    }
    synthesis.push_str(&format!("\n{}\n{REPORT_FORMAT_HINT}\n", provider::TASK_SYNTHESIZE));

    let mut response = provider.complete(&synthesis, config.temperature, config.seed)?;
    let parsed = match parse_report(&response) {
        Some(p) => Some(p),
        None => {
            let retry_prompt = format!("{synthesis}\n{REPORT_FORMAT_HINT}\n");
            response = provider.complete(&retry_prompt, config.temperature, config.seed)?;
            parse_report(&response)
        }
    };

    let report = match parsed {
        Some(p) => {
            let known = FaultCategory::ALL.iter().any(|c| c.display_name() == p.fault_type)
                || p.fault_type == "normal"
                || p.fault_type == "unknown";
            let (fault_type, explanation) = if known {
                (p.fault_type, p.explanation)
            } else {
                (
                    "unknown".to_string(),
                    format!("{} (reported type: {})", p.explanation, p.fault_type),
                )
            };
            DiagnosisReport {
                fault_type,
                phenomenon: p.phenomenon,
                explanation,
                summary: p.summary,
                solutions: p.solutions,
                per_blueprint: verdicts,
                anomalies: findings.to_vec(),
            }
        }
        None => DiagnosisReport {
            fault_type: "unknown".to_string(),
            phenomenon: ctx.problem_statement.clone(),
            explanation: if response.trim().is_empty() {
                "provider returned no parseable report".to_string()
            } else {
                response.trim().to_string()
            },
            summary: "Diagnosis inconclusive: provider output could not be parsed.".to_string(),
            solutions: vec!["Escalate to a network operator for manual review.".to_string()],
            per_blueprint: verdicts,
            anomalies: findings.to_vec(),
        },
    };
    report.validate()?;
    Ok(report)
}
