//! NetSemantic: semantic and symbolic fault diagnosis for multi-device networks.
//!
//! The pipeline turns raw network telemetry (device profiles, topology, KPI
//! time series) into three coordinated representations:
//!
//! 1. **Semantic** — structured text tables and LLM prompts, with an n-sample
//!    selector that picks the most central semanticization ([`semgen`]).
//! 2. **Symbolic** — first-order facts plus threshold rules evaluated by a
//!    built-in constraint engine ([`symgen`]).
//! 3. **Knowledge** — a triple-based network knowledge graph with embedding
//!    retrieval and multi-hop expansion ([`nkg`]).
//!
//! [`diagnose`] fuses the three into a four-part context, generates fault
//! blueprints, and drives an LLM provider (mock or remote) to a five-field
//! report. [`simeval`] generates labeled synthetic scenarios and computes
//! detection/diagnosis metrics so the whole system is testable offline.

pub mod datamodel;
pub mod diagnose;
pub mod nkg;
pub mod semgen;
pub mod simeval;
pub mod symgen;

#[cfg(test)]
pub(crate) mod testutil;

pub use datamodel::{Dataset, DeviceProfile, DeviceSeries, FaultCategory, TimeWindow, Topology};
pub use diagnose::{DiagnosisReport, LlmProvider, MockProvider};
pub use nkg::KnowledgeGraph;
pub use semgen::{Embedder, HashEmbedder};
