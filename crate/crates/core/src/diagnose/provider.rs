//! LLM provider contract and implementations.
//!
//! [`MockProvider`] is a deterministic rule-based responder that makes the
//! full pipeline testable offline: its output is a pure function of
//! `(prompt, seed)`. [`RemoteProvider`] speaks a minimal chat-completion
//! exchange over HTTPS and attaches timeout/retry metadata to its errors.
//! [`RecordingProvider`] wraps any provider and records every call for
//! call-budget assertions.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Mutex;
use std::time::Duration;

use thiserror::Error;

/// Task markers dispatched on by the mock. Prompts built by the diagnosis
/// pipeline end with one of these lines; semanticization prompts carry none.
pub const TASK_VERDICT: &str = "TASK: verdict";
pub const TASK_SYNTHESIZE: &str = "TASK: synthesize";
pub const TASK_EXTRACT_TRIPLES: &str = "TASK: extract-triples";
pub const TASK_DETECT: &str = "TASK: detect";

#[derive(Debug, Error)]
#[error("provider {provider} failed after {attempts} attempt(s): {message}")]
pub struct ProviderError {
    pub provider: String,
    pub message: String,
    pub attempts: u32,
    pub timeout_ms: Option<u64>,
}

impl ProviderError {
    pub fn new(provider: &str, message: impl Into<String>) -> Self {
        Self {
            provider: provider.to_string(),
            message: message.into(),
            attempts: 1,
            timeout_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProviderCapabilities {
    /// Same (prompt, seed) always yields the same text.
    pub deterministic: bool,
    pub supports_temperature: bool,
}

/// A text-completion backend.
pub trait LlmProvider {
    fn name(&self) -> &str;

    fn capabilities(&self) -> ProviderCapabilities;

    fn complete(&self, prompt: &str, temperature: f64, seed: u64) -> Result<String, ProviderError>;
}

impl<T: LlmProvider + ?Sized> LlmProvider for &T {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn capabilities(&self) -> ProviderCapabilities {
        (**self).capabilities()
    }

    fn complete(&self, prompt: &str, temperature: f64, seed: u64) -> Result<String, ProviderError> {
        (**self).complete(prompt, temperature, seed)
    }
}

// ============================================================================
// Mock provider
// ============================================================================

/// Deterministic stand-in for a real LLM.
///
/// Dispatch is by task marker: verdict prompts are answered by checking
/// whether the PROBLEM section mentions a KPI that the blueprint's cause is
/// linked to in the KNOWLEDGE section; synthesis prompts fill the five report
/// fields from the confirmed blueprint; triple-extraction prompts run a small
/// verb-lexicon parse; anything else is treated as a semanticization request
/// over the KPI table embedded in the prompt.
#[derive(Debug, Default, Clone)]
pub struct MockProvider;

impl MockProvider {
    pub fn new() -> Self {
        Self
    }
}

impl LlmProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities {
            deterministic: true,
            supports_temperature: false,
        }
    }

    fn complete(&self, prompt: &str, _temperature: f64, seed: u64) -> Result<String, ProviderError> {
        if prompt.contains(TASK_VERDICT) {
            Ok(mock_verdict(prompt))
        } else if prompt.contains(TASK_SYNTHESIZE) {
            Ok(mock_synthesis(prompt))
        } else if prompt.contains(TASK_EXTRACT_TRIPLES) {
            Ok(mock_extract_triples(prompt))
        } else if prompt.contains(TASK_DETECT) {
            Ok(mock_detect(prompt))
        } else {
            Ok(mock_semanticize(prompt, seed))
        }
    }
}

/// Section body: lines after `header` up to the next ALL-CAPS section header
/// or blank-line-then-header boundary.
fn section<'a>(prompt: &'a str, header: &str) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut inside = false;
    for line in prompt.lines() {
        if line == header {
            inside = true;
            continue;
        }
        if inside {
            let is_header = !line.is_empty()
                && line
                    .chars()
                    .all(|c| c.is_ascii_uppercase() || c == '_' || c.is_ascii_whitespace())
                && line.chars().any(|c| c.is_ascii_uppercase());
            if is_header {
                break;
            }
            if !line.is_empty() {
                out.push(line);
            }
        }
    }
    out
}

fn field_value<'a>(lines: &[&'a str], key: &str) -> Option<&'a str> {
    let prefix = format!("{key}: ");
    lines
        .iter()
        .find_map(|l| l.strip_prefix(prefix.as_str()).map(str::trim))
}

/// KPIs linked to `cause_id` by any triple in the KNOWLEDGE section.
fn linked_metrics(knowledge: &[&str], cause_id: &str) -> BTreeSet<String> {
    let metric_ids: BTreeSet<&str> = knowledge
        .iter()
        .filter_map(|l| {
            let mut parts = l.split_whitespace();
            if parts.next() == Some("entity") {
                let id = parts.next()?;
                if parts.next() == Some("metric") {
                    return Some(id);
                }
            }
            None
        })
        .collect();
    let mut linked = BTreeSet::new();
    for line in knowledge {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() == 4 && parts[0] == "triple" {
            let (s, o) = (parts[1], parts[3]);
            if s == cause_id && metric_ids.contains(o) {
                linked.insert(o.to_string());
            }
            if o == cause_id && metric_ids.contains(s) {
                linked.insert(s.to_string());
            }
        }
    }
    linked
}

const NO_VIOLATION_SENTENCE: &str = "No rule violations were detected; verify network health.";

fn mock_verdict(prompt: &str) -> String {
    let problem = section(prompt, "PROBLEM").join("\n");
    let knowledge = section(prompt, "KNOWLEDGE");
    let blueprint = section(prompt, "BLUEPRINT");
    let cause_id = field_value(&blueprint, "cause_id").unwrap_or("unknown");

    let healthy = problem.contains(NO_VIOLATION_SENTENCE);
    let (verdict, reason) = match cause_id {
        "normal" => {
            if healthy {
                ("confirmed", "no violations reported".to_string())
            } else {
                ("ruled_out", "problem statement reports violations".to_string())
            }
        }
        "unknown" => {
            if healthy {
                ("ruled_out", "no violations to attribute".to_string())
            } else {
                ("confirmed", "violations present without a matching cause".to_string())
            }
        }
        _ => {
            let metrics = linked_metrics(&knowledge, cause_id);
            match metrics.iter().find(|m| problem.contains(m.as_str())) {
                Some(m) => ("confirmed", format!("problem mentions {m} linked to {cause_id}")),
                None => ("ruled_out", format!("no KPI linked to {cause_id} in the problem")),
            }
        }
    };
    format!("verdict: {verdict}\nreason: {reason}\n")
}

fn mock_synthesis(prompt: &str) -> String {
    let verdicts = section(prompt, "VERDICTS");
    let problem = section(prompt, "PROBLEM");
    let knowledge = section(prompt, "KNOWLEDGE");
    let steps = section(prompt, "STEPS");

    // verdict lines: `verdict <blueprint_id> <cause_id> <verdict> <cause name...>`
    let confirmed: Vec<(String, String)> = verdicts
        .iter()
        .filter_map(|l| {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() >= 5 && parts[0] == "verdict" && parts[3] == "confirmed" {
                Some((parts[2].to_string(), parts[4..].join(" ")))
            } else {
                None
            }
        })
        .collect();

    // Among confirmed causes, prefer the one whose linked KPIs best cover the
    // problem statement; ties keep verdict order (first wins).
    let problem_text = problem.join(" ");
    let mut best_confirmed: Option<&(String, String)> = None;
    let mut best_support = 0usize;
    for entry in &confirmed {
        let support = linked_metrics(&knowledge, &entry.0)
            .iter()
            .filter(|m| problem_text.contains(m.as_str()))
            .count();
        if best_confirmed.is_none() || support > best_support {
            best_confirmed = Some(entry);
            best_support = support;
        }
    }

    let (fault_type, cause_phrase) = match best_confirmed {
        Some((id, _)) if id == "normal" => ("normal".to_string(), "nominal operation".to_string()),
        Some((id, name)) if id == "unknown" => ("unknown".to_string(), name.clone()),
        Some((_, name)) => (name.clone(), name.clone()),
        None => {
            if problem_text.contains(NO_VIOLATION_SENTENCE) {
                ("normal".to_string(), "nominal operation".to_string())
            } else {
                ("unknown".to_string(), "an undetermined cause".to_string())
            }
        }
    };

    let phenomenon = if problem.is_empty() {
        "No observable anomaly.".to_string()
    } else {
        problem.join(" ")
    };
    let explanation = format!(
        "The reported observations are consistent with {cause_phrase}; {} candidate cause(s) were examined against the retrieved knowledge.",
        verdicts.len().max(1)
    );
    let summary = format!("Diagnosis: {fault_type}.");
    let mut solutions: Vec<String> = steps
        .iter()
        .filter_map(|l| l.strip_prefix("- ").map(str::to_string))
        .collect();
    if solutions.is_empty() {
        solutions.push("Verify device connectivity and restore nominal operation.".to_string());
    }

    let mut out = String::new();
    out.push_str(&format!("fault_type: {fault_type}\n"));
    out.push_str(&format!("phenomenon: {phenomenon}\n"));
    out.push_str(&format!("explanation: {explanation}\n"));
    out.push_str(&format!("summary: {summary}\n"));
    out.push_str("solutions:\n");
    for s in &solutions {
        out.push_str(&format!("- {s}\n"));
    }
    out
}

/// Tiny verb lexicon for sentence → triple extraction.
const TRIPLE_VERBS: [(&str, &str); 6] = [
    (" has metric ", "has_metric"),
    (" indicates ", "indicates"),
    (" is connected to ", "connected_to"),
    (" is diagnosed by ", "diagnosed_by"),
    (" causes ", "causes"),
    (" uses ", "uses"),
];

fn mock_extract_triples(prompt: &str) -> String {
    let text = section(prompt, "TEXT").join(" ");
    let mut out = String::new();
    for sentence in text.split('.') {
        let sentence = sentence.trim();
        if sentence.is_empty() {
            continue;
        }
        for (verb, predicate) in TRIPLE_VERBS {
            if let Some(pos) = sentence.find(verb) {
                let subject = slugify(&sentence[..pos]);
                let object = slugify(&sentence[pos + verb.len()..]);
                if !subject.is_empty() && !object.is_empty() {
                    out.push_str(&format!("({subject}, {predicate}, {object})\n"));
                }
                break;
            }
        }
    }
    out
}

fn slugify(text: &str) -> String {
    text.trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}

fn mock_detect(prompt: &str) -> String {
    let semantic = section(prompt, "SEMANTIC");
    let mut hits = Vec::new();
    for line in semantic {
        if line.contains("Notable deviation") {
            // lines look like `Device d3 at 4000 reports ...`
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() > 3 && parts[2] == "at" {
                hits.push(format!("{}@{}", parts[1], parts[3]));
            }
        }
    }
    if hits.is_empty() {
        "anomalous: none\n".to_string()
    } else {
        format!("anomalous: {}\n", hits.join(", "))
    }
}

/// Parsed KPI table line: `<dev> @ <ts>: k=v u, ...`.
struct ParsedRow<'a> {
    device: &'a str,
    timestamp: i64,
    entries: Vec<(&'a str, f64, &'a str)>,
}

fn parse_table_rows(prompt: &str) -> Vec<ParsedRow<'_>> {
    let mut rows = Vec::new();
    for line in prompt.lines() {
        let Some((head, rest)) = line.split_once(" @ ") else {
            continue;
        };
        if head.is_empty() || head.contains(' ') {
            continue;
        }
        let Some((ts, entries_text)) = rest.split_once(": ") else {
            continue;
        };
        let Ok(timestamp) = ts.parse::<i64>() else {
            continue;
        };
        let mut entries = Vec::new();
        let mut ok = true;
        for cell in entries_text.split(", ") {
            let Some((k, vu)) = cell.split_once('=') else {
                ok = false;
                break;
            };
            let (v, u) = vu.split_once(' ').unwrap_or((vu, ""));
            let Ok(value) = v.parse::<f64>() else {
                ok = false;
                break;
            };
            entries.push((k, value, u));
        }
        if ok && !entries.is_empty() {
            rows.push(ParsedRow {
                device: head,
                timestamp,
                entries,
            });
        }
    }
    rows
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// A value is notable when it strays more than 50% from that device+KPI's
/// median over the visible table, or flips between zero and nonzero.
fn is_notable(value: f64, med: f64) -> bool {
    if med == 0.0 {
        value != 0.0
    } else {
        value == 0.0 || (value - med).abs() > 0.5 * med.abs()
    }
}

fn mock_semanticize(prompt: &str, seed: u64) -> String {
    let rows = parse_table_rows(prompt);
    if rows.is_empty() {
        return format!("No tabular network data was found in the request (variant {}).", seed % 3);
    }

    // Per (device, kpi) medians for deviation marking.
    let mut groups: std::collections::BTreeMap<(&str, &str), Vec<f64>> =
        std::collections::BTreeMap::new();
    for row in &rows {
        for (k, v, _) in &row.entries {
            groups.entry((row.device, k)).or_default().push(*v);
        }
    }
    let medians: std::collections::BTreeMap<(&str, &str), f64> = groups
        .into_iter()
        .map(|(k, vs)| (k, median(vs)))
        .collect();

    let opener = match seed % 3 {
        0 => "Device",
        1 => "Device", // majority phrasing; the selector favors it
        _ => "Node",
    };
    let mut lines = Vec::new();
    let mut devices = BTreeSet::new();
    for row in &rows {
        devices.insert(row.device);
        let mut parts = Vec::new();
        let mut notable = Vec::new();
        for (k, v, u) in &row.entries {
            parts.push(format!("{k}={v} {u}"));
            if is_notable(*v, medians[&(row.device, *k)]) {
                notable.push(*k);
            }
        }
        let mut line = format!(
            "{opener} {} at {} reports {}.",
            row.device,
            row.timestamp,
            parts.join(", ")
        );
        if !notable.is_empty() {
            line.push_str(&format!(" Notable deviation in {}.", notable.join(", ")));
        }
        lines.push(line);
    }
    // One in five samples "forgets" the closing summary, mimicking the
    // quality variance the selector exists to smooth over.
    if seed % 5 != 3 {
        lines.push(format!("All {} devices were reviewed.", devices.len()));
    }
    lines.join("\n")
}

// ============================================================================
// Recording wrapper
// ============================================================================

#[derive(Debug, Clone, PartialEq)]
pub struct CallRecord {
    pub prompt: String,
    pub temperature: f64,
    pub seed: u64,
}

/// Wraps a provider and records every call; used to assert call budgets.
pub struct RecordingProvider<P> {
    inner: P,
    calls: Mutex<Vec<CallRecord>>,
}

impl<P: LlmProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap().len()
    }

    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().unwrap().clone()
    }
}

impl<P: LlmProvider> LlmProvider for RecordingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn capabilities(&self) -> ProviderCapabilities {
        self.inner.capabilities()
    }

    fn complete(&self, prompt: &str, temperature: f64, seed: u64) -> Result<String, ProviderError> {
        self.calls.lock().unwrap().push(CallRecord {
            prompt: prompt.to_string(),
            temperature,
            seed,
        });
        self.inner.complete(prompt, temperature, seed)
    }
}

/// A provider scripted to return fixed responses in order; handy for failure
/// and malformed-output tests.
pub struct ScriptedProvider {
    responses: Mutex<Vec<Result<String, String>>>,
}

impl ScriptedProvider {
    pub fn new(responses: Vec<Result<String, String>>) -> Self {
        Self {
            responses: Mutex::new(responses),
        }
    }
}

impl LlmProvider for ScriptedProvider {
    fn name(&self) -> &str {
        "scripted"
    }

    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities {
            deterministic: true,
            supports_temperature: false,
        }
    }

    fn complete(&self, _prompt: &str, _temperature: f64, _seed: u64) -> Result<String, ProviderError> {
        let mut guard = self.responses.lock().unwrap();
        if guard.is_empty() {
            return Err(ProviderError::new("scripted", "script exhausted"));
        }
        match guard.remove(0) {
            Ok(text) => Ok(text),
            Err(msg) => Err(ProviderError::new("scripted", msg)),
        }
    }
}

// ============================================================================
// Remote provider
// ============================================================================

/// Environment variables consumed by [`RemoteProvider::from_env`].
pub const ENV_ENDPOINT: &str = "NETSEM_LLM_ENDPOINT";
pub const ENV_API_KEY: &str = "NETSEM_LLM_API_KEY";
pub const ENV_MODEL: &str = "NETSEM_LLM_MODEL";

/// Minimal chat-completion client: one user message in, text out.
pub struct RemoteProvider {
    endpoint: String,
    api_key: Option<String>,
    model: String,
    timeout: Duration,
    network_retries: u32,
    backoff_ms: u64,
    client: reqwest::blocking::Client,
}

impl fmt::Debug for RemoteProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RemoteProvider")
            .field("endpoint", &self.endpoint)
            .field("model", &self.model)
            .finish()
    }
}

impl RemoteProvider {
    pub fn new(endpoint: String, api_key: Option<String>, model: String) -> Result<Self, ProviderError> {
        let timeout = Duration::from_secs(60);
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError::new("remote", e.to_string()))?;
        Ok(Self {
            endpoint,
            api_key,
            model,
            timeout,
            network_retries: 2,
            backoff_ms: 250,
            client,
        })
    }

    pub fn from_env() -> Result<Self, ProviderError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| ProviderError::new("remote", format!("{ENV_ENDPOINT} is not set")))?;
        let api_key = std::env::var(ENV_API_KEY).ok();
        let model = std::env::var(ENV_MODEL).unwrap_or_else(|_| "gpt-4o".to_string());
        Self::new(endpoint, api_key, model)
    }

    /// Shrink the retry/backoff envelope (tests).
    pub fn with_retry_policy(mut self, network_retries: u32, backoff_ms: u64) -> Self {
        self.network_retries = network_retries;
        self.backoff_ms = backoff_ms;
        self
    }

    fn attempt(&self, prompt: &str, temperature: f64, seed: u64) -> Result<String, String> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "seed": seed,
        });
        let mut req = self.client.post(&self.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("HTTP {}", resp.status()));
        }
        let value: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response missing choices[0].message.content".to_string())
    }
}

impl LlmProvider for RemoteProvider {
    fn name(&self) -> &str {
        "remote"
    }

    fn capabilities(&self) -> ProviderCapabilities {
        ProviderCapabilities {
            deterministic: false,
            supports_temperature: true,
        }
    }

    fn complete(&self, prompt: &str, temperature: f64, seed: u64) -> Result<String, ProviderError> {
        let mut last_err = String::new();
        let attempts = self.network_retries + 1;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(self.backoff_ms << (attempt - 1)));
            }
            match self.attempt(prompt, temperature, seed) {
                Ok(text) => return Ok(text),
                Err(e) => last_err = e,
            }
        }
        Err(ProviderError {
            provider: "remote".to_string(),
            message: last_err,
            attempts,
            timeout_ms: Some(self.timeout.as_millis() as u64),
        })
    }
}
