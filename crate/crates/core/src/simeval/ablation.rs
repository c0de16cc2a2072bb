//! Ablation harness: run the pipeline with components disabled and score
//! per-sample detection against the injected ground truth.
//!
//! Variants with the symbolic engine enabled sweep one pipeline run per
//! timestamp and read detections from the rule findings. Variants without it
//! fall back to provider judgment: one full-span run produces the semantic
//! description, and a detection prompt over that text yields the flagged
//! `device@timestamp` samples.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{Dataset, TimeWindow};
use crate::diagnose::provider::{LlmProvider, TASK_DETECT};
use crate::diagnose::{run_pipeline, PipelineConfig, OMITTED_MARKER};
use crate::nkg::KnowledgeGraph;
use crate::semgen::Embedder;
use crate::symgen::Aggregation;

use super::metrics::{compute_confusion, compute_metrics, Metrics, SampleLabel};
use super::scenario::truth_labels;

#[derive(Debug, Error)]
#[error("ablation variant {variant} failed: {message}")]
pub struct AblationError {
    pub variant: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    Full,
    NoKg,
    NoSymbolic,
    SemanticOnly,
    ProviderSwap,
}

impl AblationVariant {
    pub fn as_str(&self) -> &'static str {
        match self {
            AblationVariant::Full => "full",
            AblationVariant::NoKg => "no_kg",
            AblationVariant::NoSymbolic => "no_symbolic",
            AblationVariant::SemanticOnly => "semantic_only",
            AblationVariant::ProviderSwap => "provider_swap",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "full" => Some(AblationVariant::Full),
            "no_kg" => Some(AblationVariant::NoKg),
            "no_symbolic" => Some(AblationVariant::NoSymbolic),
            "semantic_only" => Some(AblationVariant::SemanticOnly),
            "provider_swap" => Some(AblationVariant::ProviderSwap),
            _ => None,
        }
    }

    /// (no_kg, no_symbolic) pipeline flags.
    pub fn flags(&self) -> (bool, bool) {
        match self {
            AblationVariant::Full | AblationVariant::ProviderSwap => (false, false),
            AblationVariant::NoKg => (true, false),
            AblationVariant::NoSymbolic => (false, true),
            AblationVariant::SemanticOnly => (true, true),
        }
    }
}

impl std::fmt::Display for AblationVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub metrics: Metrics,
    pub pipeline_runs: usize,
    pub total_retrieval_calls: usize,
    pub total_findings: usize,
    /// True when every run's KNOWLEDGE section carried the omission marker.
    pub knowledge_omitted_everywhere: bool,
    /// True when every run's SYMBOLIC section carried the omission marker.
    pub symbolic_omitted_everywhere: bool,
}

impl AblationRow {
    /// Machine-readable row: `variant,accuracy,recall,fnr,fpr`.
    pub fn csv_row(&self) -> String {
        format!("{},{}", self.variant, self.metrics.csv_row())
    }
}

fn annotate<E: std::fmt::Display>(variant: AblationVariant) -> impl Fn(E) -> AblationError {
    move |e| AblationError {
        variant: variant.as_str().to_string(),
        message: e.to_string(),
    }
}

/// Run the listed variants over a labeled dataset and score detection.
/// `swap_provider`, when given, backs the `provider_swap` variant.
pub fn run_ablation(
    dataset: &Dataset,
    kg: &KnowledgeGraph,
    embedder: &dyn Embedder,
    provider: &dyn LlmProvider,
    swap_provider: Option<&dyn LlmProvider>,
    variants: &[AblationVariant],
    seed: u64,
) -> Result<Vec<AblationRow>, AblationError> {
    let truth = truth_labels(dataset);
    let mut rows = Vec::with_capacity(variants.len());
    for &variant in variants {
        let active: &dyn LlmProvider = match variant {
            AblationVariant::ProviderSwap => swap_provider.unwrap_or(provider),
            _ => provider,
        };
        let (no_kg, no_symbolic) = variant.flags();
        let mut positive: BTreeSet<String> = BTreeSet::new();
        let mut pipeline_runs = 0usize;
        let mut total_retrieval_calls = 0usize;
        let mut total_findings = 0usize;
        let mut knowledge_omitted_everywhere = true;
        let mut symbolic_omitted_everywhere = true;

        if !no_symbolic {
            // Per-timestamp sweep read off the rule findings.
            let timestamps: BTreeSet<i64> = dataset
                .series
                .values()
                .flat_map(|s| s.rows.iter().map(|r| r.timestamp_ms))
                .collect();
            for ts in timestamps {
                let config = PipelineConfig {
                    samples: 1,
                    window: Some(TimeWindow::new(ts, ts + 1)),
                    aggregation: Aggregation::Last,
                    seed,
                    no_kg,
                    no_symbolic,
                    ..PipelineConfig::default()
                };
                let out = run_pipeline(dataset, kg, active, embedder, &config)
                    .map_err(annotate(variant))?;
                pipeline_runs += 1;
                total_retrieval_calls += out.audit.retrieval_calls;
                total_findings += out.findings.len();
                knowledge_omitted_everywhere &= out.context.knowledge_block == OMITTED_MARKER;
                symbolic_omitted_everywhere &= out.context.symbolic_block == OMITTED_MARKER;
                for f in &out.findings {
                    positive.insert(format!("{}@{ts}", f.entity));
                }
            }
        } else {
            // Provider judgment over the full-span semantic description.
            let config = PipelineConfig {
                samples: 3,
                seed,
                no_kg,
                no_symbolic,
                ..PipelineConfig::default()
            };
            let out =
                run_pipeline(dataset, kg, active, embedder, &config).map_err(annotate(variant))?;
            pipeline_runs += 1;
            total_retrieval_calls += out.audit.retrieval_calls;
            total_findings += out.findings.len();
            knowledge_omitted_everywhere &= out.context.knowledge_block == OMITTED_MARKER;
            symbolic_omitted_everywhere &= out.context.symbolic_block == OMITTED_MARKER;

            let detect_prompt = format!(
                "SEMANTIC\n{}\n\n{TASK_DETECT}\nList anomalous samples as 'anomalous: device@timestamp, ...' or 'anomalous: none'.\n",
                out.context.semantic_block
            );
            let response = active
                .complete(&detect_prompt, 0.0, seed)
                .map_err(annotate(variant))?;
            for line in response.lines() {
                if let Some(rest) = line.trim().strip_prefix("anomalous:") {
                    for id in rest.split(',').map(str::trim) {
                        if id.contains('@') {
                            positive.insert(id.to_string());
                        }
                    }
                }
            }
        }

        let predictions: Vec<SampleLabel> = truth
            .iter()
            .map(|t| SampleLabel::new(&t.sample_id, positive.contains(&t.sample_id)))
            .collect();
        let cm = compute_confusion(&predictions, &truth).map_err(annotate(variant))?;
        let metrics = compute_metrics(&cm).map_err(annotate(variant))?;
        rows.push(AblationRow {
            variant,
            metrics,
            pipeline_runs,
            total_retrieval_calls,
            total_findings,
            knowledge_omitted_everywhere,
            symbolic_omitted_everywhere,
        });
    }
    Ok(rows)
}
