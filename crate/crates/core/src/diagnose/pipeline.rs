//! End-to-end diagnosis pipeline: semanticize, symbolize, retrieve, plan,
//! reason, report. Ablation flags replace the knowledge and symbolic
//! components with the omission marker.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, Dataset, TimeWindow};
use crate::nkg::{self, FactStatement, KnowledgeGraph, Observation, RetrievalResult};
use crate::semgen::{
    build_semantic_prompt, render_table, sample_semantics, select_best, Embedder, PromptVariant,
    SemGenError,
};
use crate::symgen::{
    anomalous_entities, derive_rules, evaluate_rules, extract_facts, kpi_vector,
    observe_connectivity, Aggregation, AnomalyFinding, FactSet, Rule, SymGenError,
};

use super::provider::LlmProvider;
use super::{
    concat_context, extract_plan, generate_blueprints, health_blueprint, make_problem_statement,
    run_diagnosis, Blueprint, DiagnoseError, DiagnosisConfig, DiagnosisContext, DiagnosisReport,
    RecordingProvider, OMITTED_MARKER,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("dataset contains no samples")]
    EmptyDataset,

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    SemGen(#[from] SemGenError),

    #[error(transparent)]
    SymGen(#[from] SymGenError),

    #[error(transparent)]
    Nkg(#[from] nkg::NkgError),

    #[error(transparent)]
    Diagnose(#[from] DiagnoseError),
}

impl PipelineError {
    /// True when the root cause is a provider failure (maps to exit code 1).
    pub fn is_provider_error(&self) -> bool {
        matches!(
            self,
            PipelineError::Diagnose(DiagnoseError::Provider(_))
                | PipelineError::SemGen(SemGenError::Provider { .. })
                | PipelineError::Nkg(nkg::NkgError::Provider(_))
        )
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Number of semanticization samples (n).
    pub samples: usize,
    /// Synthesis/sampling temperature; verdicts always run at 0.
    pub temperature: f64,
    /// Retrieval candidate count (K).
    pub top_k: usize,
    /// Neighborhood expansion depth (h).
    pub hops: usize,
    pub seed: u64,
    /// Analysis window; defaults to the dataset's full span.
    pub window: Option<TimeWindow>,
    pub aggregation: Aggregation,
    pub variant: PromptVariant,
    /// Ablation: skip retrieval and omit the knowledge block.
    pub no_kg: bool,
    /// Ablation: skip rule evaluation and omit the symbolic block.
    pub no_symbolic: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            samples: 5,
            temperature: 0.0,
            top_k: 5,
            hops: 2,
            seed: 0,
            window: None,
            aggregation: Aggregation::Last,
            variant: PromptVariant::SelfHeuristic,
            no_kg: false,
            no_symbolic: false,
        }
    }
}

/// Everything a run produced, for reporting and audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineAudit {
    pub provider_calls: usize,
    pub retrieval_calls: usize,
    pub findings_count: usize,
    pub blueprint_count: usize,
    pub selected_sample_index: usize,
    pub no_kg: bool,
    pub no_symbolic: bool,
    pub variant: String,
    pub window: TimeWindow,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub report: DiagnosisReport,
    pub context: DiagnosisContext,
    pub findings: Vec<AnomalyFinding>,
    pub blueprints: Vec<Blueprint>,
    pub rule_warnings: Vec<String>,
    pub audit: PipelineAudit,
    /// Observations for the post-report knowledge graph update.
    pub kg_observations: Vec<Observation>,
}

/// Short description of the network used for prompt roles and queries.
pub fn device_context(dataset: &Dataset) -> String {
    let classes: std::collections::BTreeSet<&str> = dataset
        .profiles
        .values()
        .map(|p| p.device_class.as_str())
        .collect();
    let classes = if classes.is_empty() {
        "unknown".to_string()
    } else {
        classes.into_iter().collect::<Vec<_>>().join("/")
    };
    format!(
        "a {}-device {} {} network",
        dataset.profiles.len(),
        classes,
        dataset.topology.kind
    )
}

/// Run the full diagnosis workflow over a dataset.
///
/// The knowledge graph must already be embedding-indexed. The graph is only
/// read here; `kg_observations` in the output carries the device facts for an
/// optional update after the report is emitted.
pub fn run_pipeline(
    dataset: &Dataset,
    kg: &KnowledgeGraph,
    provider: &dyn LlmProvider,
    embedder: &dyn Embedder,
    config: &PipelineConfig,
) -> Result<PipelineOutput, PipelineError> {
    let window = match config.window {
        Some(w) => w,
        None => dataset.span().ok_or(PipelineError::EmptyDataset)?,
    };
    let recorder = RecordingProvider::new(provider);
    let mut retrieval_calls = 0usize;

    // Semanticization: table, prompt, n samples, selector.
    let (_, table_text) = render_table(dataset, Some(window))?;
    let context_phrase = device_context(dataset);
    let effective_variant = if config.no_kg && config.variant == PromptVariant::SelfHeuristic {
        PromptVariant::GeneralInfo
    } else {
        config.variant
    };
    let kg_snippets: Vec<String> = if config.no_kg {
        Vec::new()
    } else {
        let kpis: std::collections::BTreeSet<&str> = dataset
            .series
            .values()
            .flat_map(|s| s.kpi_names.iter().map(|k| k.as_str()))
            .collect();
        let query = format!(
            "{context_phrase} {}",
            kpis.into_iter().collect::<Vec<_>>().join(" ")
        );
        retrieval_calls += 1;
        nkg::retrieve(kg, embedder, &query, config.top_k, config.hops)?
            .subgraph
            .render_snippets()
    };
    let prompt = build_semantic_prompt(
        effective_variant,
        &table_text,
        &kg_snippets,
        &context_phrase,
    )?;
    let samples = sample_semantics(&prompt, &recorder, config.samples, config.seed, config.temperature)?;
    let (selected_sample_index, best) = select_best(&samples, embedder)?;
    let semantic_block = best.text.clone();

    // Symbolization: facts, rules, feature vectors, findings.
    let empty_graph = KnowledgeGraph::default();
    let rules_graph = if config.no_kg { &empty_graph } else { kg };
    let mut rule_warnings = Vec::new();
    let (symbolic_block, findings) = if config.no_symbolic {
        (OMITTED_MARKER.to_string(), Vec::new())
    } else {
        let (ports, link_facts) = observe_connectivity(dataset, window);
        let base = extract_facts(&dataset.topology, &dataset.profiles, &ports)?;
        let facts = FactSet::from_atoms(base.atoms().iter().cloned().chain(link_facts));

        let mut rules: Vec<Rule> = Vec::new();
        let mut seen_classes = std::collections::BTreeSet::new();
        for profile in dataset.profiles.values() {
            if seen_classes.insert(profile.device_class) {
                let derivation = derive_rules(profile, rules_graph);
                rule_warnings.extend(derivation.warnings);
                rules.extend(derivation.rules);
            }
        }
        rules.sort_by(|a, b| a.rule_id.cmp(&b.rule_id));
        rules.dedup_by(|a, b| a.rule_id == b.rule_id);

        let mut vectors = Vec::new();
        for series in dataset.series.values() {
            if series.rows_in(Some(window)).next().is_some() {
                vectors.push(kpi_vector(series, window, config.aggregation)?);
            }
        }
        let findings = evaluate_rules(&rules, &facts, &vectors)?;

        let mut block = facts.render();
        for rule in &rules {
            block.push_str(&rule.render());
            block.push('\n');
        }
        (block, findings)
    };

    let anomalous = anomalous_entities(&findings);
    let problem = make_problem_statement(&findings);

    // Knowledge retrieval for the anomalous entities.
    let retrieval = if config.no_kg {
        RetrievalResult {
            candidates: Vec::new(),
            subgraph: Default::default(),
        }
    } else {
        let query = if findings.is_empty() {
            format!("{context_phrase} health check")
        } else {
            let kpis: std::collections::BTreeSet<&str> =
                findings.iter().map(|f| f.kpi.as_str()).collect();
            format!(
                "{} {}",
                anomalous.ids().join(" "),
                kpis.into_iter().collect::<Vec<_>>().join(" ")
            )
        };
        retrieval_calls += 1;
        nkg::retrieve(kg, embedder, &query, config.top_k, config.hops)?
    };
    let knowledge_block = if config.no_kg {
        OMITTED_MARKER.to_string()
    } else {
        retrieval.subgraph.render_snippets().join("\n")
    };

    let ctx = concat_context(&semantic_block, &symbolic_block, &knowledge_block, &problem);

    // Blueprints and plans.
    let mut blueprints = generate_blueprints(&anomalous, &findings, &retrieval);
    if blueprints.is_empty() {
        blueprints.push(health_blueprint(
            dataset.profiles.keys().cloned().collect::<Vec<_>>(),
        ));
    }
    for blueprint in &mut blueprints {
        blueprint.steps = extract_plan(blueprint, rules_graph);
    }

    // Reasoning and report.
    let diagnosis_config = DiagnosisConfig {
        temperature: config.temperature,
        seed: config.seed,
    };
    let report = run_diagnosis(&ctx, &blueprints, &recorder, &diagnosis_config, &findings)?;

    // Observations for the post-report adaptive update.
    let mut kg_observations: Vec<Observation> = dataset
        .profiles
        .keys()
        .map(|id| {
            Observation::Entity(
                nkg::Entity::new(id, id, nkg::EntityKind::Device).at(window.end_ms),
            )
        })
        .collect();
    for f in &findings {
        kg_observations.push(Observation::Fact(
            FactStatement::new(&f.entity, &f.kpi, &f.observed.to_string()).at(window.end_ms),
        ));
    }

    let audit = PipelineAudit {
        provider_calls: recorder.call_count(),
        retrieval_calls,
        findings_count: findings.len(),
        blueprint_count: blueprints.len(),
        selected_sample_index,
        no_kg: config.no_kg,
        no_symbolic: config.no_symbolic,
        variant: effective_variant.as_str().to_string(),
        window,
        seed: config.seed,
    };

    Ok(PipelineOutput {
        report,
        context: ctx,
        findings,
        blueprints,
        rule_warnings,
        audit,
        kg_observations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnose::MockProvider;
    use crate::nkg::{builtin_graph, index_entities};
    use crate::semgen::HashEmbedder;

    fn prepared_kg(embedder: &HashEmbedder) -> KnowledgeGraph {
        let mut kg = builtin_graph();
        index_entities(&mut kg, embedder).unwrap();
        kg
    }

    #[test]
    fn healthy_dataset_reports_normal() {
        let dataset = crate::testutil::star_dataset(4);
        let embedder = HashEmbedder::default();
        let kg = prepared_kg(&embedder);
        let out = run_pipeline(
            &dataset,
            &kg,
            &MockProvider::new(),
            &embedder,
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(out.report.fault_type, "normal");
        assert!(out.findings.is_empty());
        assert_eq!(out.audit.retrieval_calls, 2);
        assert_eq!(out.audit.provider_calls, 5 + 1 + 1);
    }

    #[test]
    fn congested_device_is_diagnosed() {
        let mut dataset = crate::testutil::star_dataset(4);
        let s = dataset.series.get_mut("d2").unwrap();
        let delay = s.kpi_index("delay_ms").unwrap();
        for row in &mut s.rows {
            row.values[delay] = 250.0;
        }
        let embedder = HashEmbedder::default();
        let kg = prepared_kg(&embedder);
        let out = run_pipeline(
            &dataset,
            &kg,
            &MockProvider::new(),
            &embedder,
            &PipelineConfig::default(),
        )
        .unwrap();
        assert_eq!(out.report.fault_type, "Network Congestion");
        assert!(out.findings.iter().all(|f| f.entity == "d2"));
        out.report.validate().unwrap();
    }

    #[test]
    fn no_kg_omits_knowledge_and_skips_retrieval() {
        let dataset = crate::testutil::star_dataset(4);
        let embedder = HashEmbedder::default();
        let kg = prepared_kg(&embedder);
        let config = PipelineConfig {
            no_kg: true,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&dataset, &kg, &MockProvider::new(), &embedder, &config).unwrap();
        assert_eq!(out.context.knowledge_block, OMITTED_MARKER);
        assert_eq!(out.audit.retrieval_calls, 0);
    }

    #[test]
    fn no_symbolic_records_zero_findings() {
        let mut dataset = crate::testutil::star_dataset(4);
        let s = dataset.series.get_mut("d2").unwrap();
        let delay = s.kpi_index("delay_ms").unwrap();
        for row in &mut s.rows {
            row.values[delay] = 250.0;
        }
        let embedder = HashEmbedder::default();
        let kg = prepared_kg(&embedder);
        let config = PipelineConfig {
            no_symbolic: true,
            ..PipelineConfig::default()
        };
        let out = run_pipeline(&dataset, &kg, &MockProvider::new(), &embedder, &config).unwrap();
        assert!(out.findings.is_empty());
        assert_eq!(out.context.symbolic_block, OMITTED_MARKER);
        assert_eq!(out.audit.findings_count, 0);
    }

    #[test]
    fn pipeline_is_deterministic() {
        let dataset = crate::testutil::star_dataset(5);
        let embedder = HashEmbedder::default();
        let kg = prepared_kg(&embedder);
        let config = PipelineConfig {
            seed: 42,
            ..PipelineConfig::default()
        };
        let a = run_pipeline(&dataset, &kg, &MockProvider::new(), &embedder, &config).unwrap();
        let b = run_pipeline(&dataset, &kg, &MockProvider::new(), &embedder, &config).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.context.render(), b.context.render());
    }
}
