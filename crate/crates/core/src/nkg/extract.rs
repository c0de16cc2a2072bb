//! LLM-backed triple extraction from prose.

use crate::diagnose::provider::{LlmProvider, TASK_EXTRACT_TRIPLES};

use super::{NkgError, Triple};

/// Extraction outcome: valid triples plus per-line parse diagnostics for
/// provider output that did not fit the expected shape.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleExtraction {
    pub triples: Vec<Triple>,
    pub parse_errors: Vec<String>,
}

/// Ask the provider to turn prose into `(subject, predicate, object)` lines
/// and parse its answer. Malformed lines are reported, valid lines kept.
/// Empty input short-circuits to an empty result without a provider call.
pub fn extract_triples(
    text: &str,
    provider: &dyn LlmProvider,
) -> Result<TripleExtraction, NkgError> {
    if text.trim().is_empty() {
        return Ok(TripleExtraction::default());
    }
    let prompt = format!(
        "TEXT\n{}\n\nRULES\nRespond with one (subject, predicate, object) triple per line and nothing else.\n\n{TASK_EXTRACT_TRIPLES}\n",
        text.trim_end()
    );
    let response = provider.complete(&prompt, 0.0, 0)?;

    let mut out = TripleExtraction::default();
    for (i, line) in response.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_triple_line(line) {
            Some(triple) => out.triples.push(triple),
            None => out
                .parse_errors
                .push(format!("line {}: unparseable triple {line:?}", i + 1)),
        }
    }
    Ok(out)
}

fn parse_triple_line(line: &str) -> Option<Triple> {
    let inner = line.strip_prefix('(')?.strip_suffix(')')?;
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 || parts.iter().any(|p| p.is_empty()) {
        return None;
    }
    Some((parts[0].to_string(), parts[1].to_string(), parts[2].to_string()))
}
