//! Core data types for multimodal network data: device profiles, topology,
//! per-device KPI time series, fault labels, and dataset ingestion/validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod io;
pub use io::{load_dataset, save_dataset};

/// Errors raised while ingesting or persisting a dataset.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(String),

    #[error("schema violation in {file} line {line}: {message}")]
    SchemaViolation {
        file: String,
        line: usize,
        message: String,
    },

    #[error("non-monotonic timestamps for device {device} at row {row}")]
    NonMonotonicTimestamps { device: String, row: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Half-open time interval `[start_ms, end_ms)` in integer milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeWindow {
    pub start_ms: i64,
    pub end_ms: i64,
}

impl TimeWindow {
    pub fn new(start_ms: i64, end_ms: i64) -> Self {
        Self { start_ms, end_ms }
    }

    pub fn contains(&self, ts_ms: i64) -> bool {
        ts_ms >= self.start_ms && ts_ms < self.end_ms
    }

    pub fn is_empty(&self) -> bool {
        self.start_ms >= self.end_ms
    }
}

impl fmt::Display for TimeWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start_ms, self.end_ms)
    }
}

/// A single KPI observation for one device at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    pub timestamp_ms: i64,
    pub device_id: String,
    pub kpi_name: String,
    pub value: f64,
    pub unit: String,
}

/// Canonical unit for a KPI name. Units are not stored in the series CSVs;
/// they are resolved from the name via this registry (exact matches first,
/// then suffix conventions).
pub fn kpi_unit(kpi_name: &str) -> &'static str {
    match kpi_name {
        "delay" | "latency" => "ms",
        "packet_loss" | "error_rate" => "%",
        "throughput" | "app_throughput" => "Mbps",
        "rssi" => "dBm",
        "packet_rate" => "pps",
        _ => {
            if kpi_name.ends_with("_ms") {
                "ms"
            } else if kpi_name.ends_with("_pct") {
                "%"
            } else if kpi_name.ends_with("_mbps") {
                "Mbps"
            } else if kpi_name.ends_with("_dbm") {
                "dBm"
            } else if kpi_name.ends_with("_pps") {
                "pps"
            } else {
                "n/a"
            }
        }
    }
}

/// One timestamped row of a device series: exactly one value per KPI name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub timestamp_ms: i64,
    pub values: Vec<f64>,
}

/// Time-ordered KPI matrix for a single device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSeries {
    pub device_id: String,
    pub kpi_names: Vec<String>,
    pub rows: Vec<SeriesRow>,
}

impl DeviceSeries {
    /// Rows whose timestamp falls inside `window` (all rows when `None`).
    pub fn rows_in(&self, window: Option<TimeWindow>) -> impl Iterator<Item = &SeriesRow> {
        self.rows
            .iter()
            .filter(move |r| window.map_or(true, |w| w.contains(r.timestamp_ms)))
    }

    /// Flattened per-(timestamp, KPI) sample view with units resolved.
    pub fn samples(&self) -> impl Iterator<Item = KpiSample> + '_ {
        self.rows.iter().flat_map(move |row| {
            self.kpi_names
                .iter()
                .zip(&row.values)
                .map(move |(kpi_name, value)| KpiSample {
                    timestamp_ms: row.timestamp_ms,
                    device_id: self.device_id.clone(),
                    kpi_name: kpi_name.clone(),
                    value: *value,
                    unit: kpi_unit(kpi_name).to_string(),
                })
        })
    }

    pub fn kpi_index(&self, kpi_name: &str) -> Option<usize> {
        self.kpi_names.iter().position(|k| k == kpi_name)
    }

    /// Full span of the series as a half-open window (last row + 1ms).
    pub fn span(&self) -> Option<TimeWindow> {
        let first = self.rows.first()?.timestamp_ms;
        let last = self.rows.last()?.timestamp_ms;
        Some(TimeWindow::new(first, last + 1))
    }
}

/// Device category, mirroring the evaluated network types plus a generic bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceClass {
    MobilePhone,
    Vehicle,
    Uav,
    BaseStation,
    Generic,
}

impl DeviceClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviceClass::MobilePhone => "mobile_phone",
            DeviceClass::Vehicle => "vehicle",
            DeviceClass::Uav => "uav",
            DeviceClass::BaseStation => "base_station",
            DeviceClass::Generic => "generic",
        }
    }

    /// Fixed installations have no speed attribute.
    pub fn is_fixed(&self) -> bool {
        matches!(self, DeviceClass::BaseStation | DeviceClass::Generic)
    }
}

impl fmt::Display for DeviceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static radio/link parameters of one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub device_id: String,
    pub device_class: DeviceClass,
    pub transmit_power_dbm: f64,
    pub bandwidth_mhz: f64,
    pub protocol: String,
    pub range_m: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed_mps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Star,
    Ring,
    Mesh,
    #[serde(other)]
    Unknown,
}

impl TopologyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TopologyKind::Star => "star",
            TopologyKind::Ring => "ring",
            TopologyKind::Mesh => "mesh",
            TopologyKind::Unknown => "unknown",
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Undirected device graph. Edges are stored with endpoints in lexicographic
/// order so set equality is structural.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
    pub kind: TopologyKind,
}

impl Topology {
    pub fn new(
        nodes: impl IntoIterator<Item = String>,
        edges: impl IntoIterator<Item = (String, String)>,
        kind: TopologyKind,
    ) -> Self {
        let nodes: BTreeSet<String> = nodes.into_iter().collect();
        let edges = edges
            .into_iter()
            .map(|(a, b)| if a <= b { (a, b) } else { (b, a) })
            .collect();
        Self { nodes, edges, kind }
    }

    pub fn degree(&self, node: &str) -> usize {
        self.edges
            .iter()
            .filter(|(a, b)| a == node || b == node)
            .count()
    }

    pub fn neighbors(&self, node: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .edges
            .iter()
            .filter_map(|(a, b)| {
                if a == node {
                    Some(b.as_str())
                } else if b == node {
                    Some(a.as_str())
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Kind implied by the actual shape, independent of the declared `kind`.
    pub fn classify(&self) -> TopologyKind {
        classify_shape(&self.nodes, &self.edges)
    }
}

/// Shape classification rules:
/// star — n ≥ 3, exactly one hub of degree n−1, all others degree 1;
/// ring — n ≥ 3, every node degree 2, connected (hence a single cycle);
/// mesh — n ≥ 2, connected, at least one edge, and neither of the above;
/// unknown — anything else (disconnected, empty, singleton).
pub fn classify_shape(nodes: &BTreeSet<String>, edges: &BTreeSet<(String, String)>) -> TopologyKind {
    let n = nodes.len();
    if n < 2 {
        return TopologyKind::Unknown;
    }
    let mut degree: BTreeMap<&str, usize> = nodes.iter().map(|v| (v.as_str(), 0)).collect();
    for (a, b) in edges {
        if let Some(d) = degree.get_mut(a.as_str()) {
            *d += 1;
        }
        if let Some(d) = degree.get_mut(b.as_str()) {
            *d += 1;
        }
    }
    let connected = is_connected(nodes, edges);
    if n >= 3 {
        let hubs = degree.values().filter(|&&d| d == n - 1).count();
        let leaves = degree.values().filter(|&&d| d == 1).count();
        if hubs == 1 && leaves == n - 1 {
            return TopologyKind::Star;
        }
        if degree.values().all(|&d| d == 2) && connected {
            return TopologyKind::Ring;
        }
    }
    if connected && !edges.is_empty() {
        TopologyKind::Mesh
    } else {
        TopologyKind::Unknown
    }
}

fn is_connected(nodes: &BTreeSet<String>, edges: &BTreeSet<(String, String)>) -> bool {
    let Some(start) = nodes.iter().next() else {
        return false;
    };
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (a, b) in edges {
        adj.entry(a.as_str()).or_default().push(b.as_str());
        adj.entry(b.as_str()).or_default().push(a.as_str());
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut stack = vec![start.as_str()];
    while let Some(v) = stack.pop() {
        if !seen.insert(v) {
            continue;
        }
        if let Some(next) = adj.get(v) {
            stack.extend(next.iter().copied());
        }
    }
    seen.len() == nodes.len()
}

/// The six failure categories used across labeling, injection, and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultCategory {
    ApplicationCrash,
    MaliciousTraffic,
    NetworkCongestion,
    NetworkNodeCrash,
    OutOfCommunicationRange,
    CommunicationObstacles,
}

impl FaultCategory {
    pub const ALL: [FaultCategory; 6] = [
        FaultCategory::ApplicationCrash,
        FaultCategory::MaliciousTraffic,
        FaultCategory::NetworkCongestion,
        FaultCategory::NetworkNodeCrash,
        FaultCategory::OutOfCommunicationRange,
        FaultCategory::CommunicationObstacles,
    ];

    /// Human-readable category name, also used as the report `fault_type`.
    pub fn display_name(&self) -> &'static str {
        match self {
            FaultCategory::ApplicationCrash => "Application Crash",
            FaultCategory::MaliciousTraffic => "Malicious Traffic",
            FaultCategory::NetworkCongestion => "Network Congestion",
            FaultCategory::NetworkNodeCrash => "Network Node Crash",
            FaultCategory::OutOfCommunicationRange => "Out of Communication Range",
            FaultCategory::CommunicationObstacles => "Communication Obstacles",
        }
    }

    /// Stable snake_case identifier (entity ids, CLI flags).
    pub fn slug(&self) -> &'static str {
        match self {
            FaultCategory::ApplicationCrash => "application_crash",
            FaultCategory::MaliciousTraffic => "malicious_traffic",
            FaultCategory::NetworkCongestion => "network_congestion",
            FaultCategory::NetworkNodeCrash => "network_node_crash",
            FaultCategory::OutOfCommunicationRange => "out_of_communication_range",
            FaultCategory::CommunicationObstacles => "communication_obstacles",
        }
    }

    pub fn from_slug(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.slug() == s)
    }
}

impl fmt::Display for FaultCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

/// What a fault label points at: one device or one link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FaultTarget {
    Device(String),
    Edge(String, String),
}

impl fmt::Display for FaultTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FaultTarget::Device(d) => f.write_str(d),
            FaultTarget::Edge(a, b) => write!(f, "{a}--{b}"),
        }
    }
}

/// Ground-truth fault annotation over a time interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultLabel {
    pub target: FaultTarget,
    pub category: FaultCategory,
    pub start_ms: i64,
    pub end_ms: i64,
}

impl FaultLabel {
    pub fn window(&self) -> TimeWindow {
        TimeWindow::new(self.start_ms, self.end_ms)
    }
}

/// A complete ingested dataset: profiles, topology, series, optional labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub profiles: BTreeMap<String, DeviceProfile>,
    pub topology: Topology,
    pub series: BTreeMap<String, DeviceSeries>,
    #[serde(default)]
    pub labels: Vec<FaultLabel>,
}

impl Dataset {
    /// Device ids in canonical (sorted) dataset order.
    pub fn device_ids(&self) -> Vec<&str> {
        self.series.keys().map(|s| s.as_str()).collect()
    }

    /// Union of all series spans, or `None` when there is no data.
    pub fn span(&self) -> Option<TimeWindow> {
        let mut start = i64::MAX;
        let mut end = i64::MIN;
        for s in self.series.values() {
            if let Some(w) = s.span() {
                start = start.min(w.start_ms);
                end = end.max(w.end_ms);
            }
        }
        (start < end).then_some(TimeWindow::new(start, end))
    }
}

/// One violated invariant, identified by the offending entity and a stable
/// invariant name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub entity: String,
    pub invariant: String,
    pub detail: String,
}

/// Outcome of [`validate_dataset`]: empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, entity: &str, invariant: &str, detail: String) {
        self.violations.push(Violation {
            entity: entity.to_string(),
            invariant: invariant.to_string(),
            detail,
        });
    }
}

/// Check every structural invariant of a dataset. Violations are data, not
/// errors: the report is empty iff the dataset is valid.
pub fn validate_dataset(d: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (id, p) in &d.profiles {
        if p.device_id != *id {
            report.push(id, "profile_key_matches_id", format!("profile key {id} has device_id {}", p.device_id));
        }
        if !(p.range_m > 0.0) {
            report.push(id, "range_positive", format!("range_m = {}", p.range_m));
        }
        if !(p.bandwidth_mhz > 0.0) {
            report.push(id, "bandwidth_positive", format!("bandwidth_mhz = {}", p.bandwidth_mhz));
        }
        if p.speed_mps.is_none() && !p.device_class.is_fixed() {
            report.push(id, "speed_required_for_mobile", format!("class {} lacks speed_mps", p.device_class));
        }
        if !p.transmit_power_dbm.is_finite() || !p.bandwidth_mhz.is_finite() || !p.range_m.is_finite() {
            report.push(id, "profile_values_finite", "non-finite profile value".to_string());
        }
    }

    for node in &d.topology.nodes {
        if !d.profiles.contains_key(node) {
            report.push(node, "topology_node_has_profile", format!("node {node} missing from profiles"));
        }
    }
    for (a, b) in &d.topology.edges {
        if a == b {
            report.push(a, "no_self_loops", format!("self loop on {a}"));
        }
        for end in [a, b] {
            if !d.topology.nodes.contains(end) {
                report.push(end, "edge_endpoint_known", format!("edge ({a}, {b}) references unknown node {end}"));
            }
        }
    }
    if d.topology.kind != TopologyKind::Unknown {
        let actual = d.topology.classify();
        if actual != d.topology.kind {
            report.push(
                "topology",
                "kind_mismatch",
                format!("declared {} but shape classifies as {}", d.topology.kind, actual),
            );
        }
    }

    for (id, s) in &d.series {
        if !d.profiles.contains_key(id) {
            report.push(id, "series_device_has_profile", format!("series for unknown device {id}"));
        }
        if s.device_id != *id {
            report.push(id, "series_key_matches_id", format!("series key {id} has device_id {}", s.device_id));
        }
        let mut seen = BTreeSet::new();
        for k in &s.kpi_names {
            if !seen.insert(k) {
                report.push(id, "kpi_names_unique", format!("duplicate KPI {k}"));
            }
        }
        let mut prev: Option<i64> = None;
        for (i, row) in s.rows.iter().enumerate() {
            if row.timestamp_ms < 0 {
                report.push(id, "timestamp_non_negative", format!("row {i} has timestamp {}", row.timestamp_ms));
            }
            if let Some(p) = prev {
                if row.timestamp_ms <= p {
                    report.push(id, "timestamps_strictly_increasing", format!("row {i}: {} after {}", row.timestamp_ms, p));
                }
            }
            prev = Some(row.timestamp_ms);
            if row.values.len() != s.kpi_names.len() {
                report.push(id, "row_width_matches_kpis", format!("row {i} has {} values, expected {}", row.values.len(), s.kpi_names.len()));
            }
            for (j, v) in row.values.iter().enumerate() {
                if !v.is_finite() {
                    report.push(id, "values_finite", format!("row {i} column {j} is {v}"));
                }
            }
        }
    }

    for (i, l) in d.labels.iter().enumerate() {
        if l.start_ms >= l.end_ms {
            report.push(&l.target.to_string(), "label_interval_nonempty", format!("label {i}: start {} >= end {}", l.start_ms, l.end_ms));
        }
        match &l.target {
            FaultTarget::Device(dev) => {
                if !d.profiles.contains_key(dev) {
                    report.push(dev, "label_target_known", format!("label {i} targets unknown device {dev}"));
                }
            }
            FaultTarget::Edge(a, b) => {
                let key = if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
                if !d.topology.edges.contains(&key) {
                    report.push(&l.target.to_string(), "label_target_known", format!("label {i} targets unknown edge {a}--{b}"));
                }
            }
        }
    }

    report
}
