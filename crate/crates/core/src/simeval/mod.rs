//! Synthetic scenario generation, fault injection, and evaluation metrics.

pub mod ablation;
pub mod metrics;
pub mod scenario;

pub use ablation::{run_ablation, AblationError, AblationRow, AblationVariant};
pub use metrics::{
    compute_confusion, compute_metrics, ConfusionMatrix, MetricValue, Metrics, MetricsError,
    SampleLabel,
};
pub use scenario::{
    generate_scenario, inject_fault, truth_labels, FaultInjection, NetworkType, ScenarioSpec,
    SimEvalError, SCENARIO_KPIS,
};
