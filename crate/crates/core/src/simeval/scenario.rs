//! Synthetic labeled scenarios: topology construction, per-network-type
//! baseline KPI series, and fault injection by category signature.
//!
//! Baselines are seeded Gaussian jitter (5% relative sigma) clamped into a
//! safe envelope strictly inside the builtin rule bounds, so an un-injected
//! sample can never violate a rule. Each injection perturbs only the target
//! device inside the interval, and the four rule-detectable categories
//! violate a builtin bound by construction.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{
    Dataset, DeviceClass, DeviceProfile, DeviceSeries, FaultCategory, FaultLabel, FaultTarget,
    SeriesRow, TimeWindow, Topology, TopologyKind,
};

#[derive(Debug, Error)]
pub enum SimEvalError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),

    #[error("unknown injection target {0}")]
    UnknownTarget(String),

    #[error("unknown fault category {0}")]
    UnknownCategory(String),
}

/// The evaluated network environments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkType {
    Mobile,
    Vanet,
    Uav,
    Cellular,
}

impl NetworkType {
    pub fn as_str(&self) -> &'static str {
        match self {
            NetworkType::Mobile => "mobile",
            NetworkType::Vanet => "vanet",
            NetworkType::Uav => "uav",
            NetworkType::Cellular => "cellular",
        }
    }

    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "mobile" => Some(NetworkType::Mobile),
            "vanet" => Some(NetworkType::Vanet),
            "uav" => Some(NetworkType::Uav),
            "cellular" => Some(NetworkType::Cellular),
            _ => None,
        }
    }

    /// Device parameters for this network type: class, transmit power (dBm),
    /// bandwidth (MHz), protocol, range (m), speed (m/s).
    pub fn device_params(&self) -> (DeviceClass, f64, f64, &'static str, f64, Option<f64>) {
        match self {
            NetworkType::Mobile => (DeviceClass::MobilePhone, 23.0, 20.0, "LTE", 200.0, Some(10.0)),
            NetworkType::Vanet => (DeviceClass::Vehicle, 30.0, 10.0, "802.11p", 200.0, Some(20.0)),
            NetworkType::Uav => (DeviceClass::Uav, 20.0, 5.0, "802.11AC", 400.0, Some(15.0)),
            NetworkType::Cellular => (DeviceClass::BaseStation, 43.0, 100.0, "LTE", 500.0, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub category: FaultCategory,
    pub target: String,
    pub window: TimeWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub topology_kind: TopologyKind,
    pub node_count: usize,
    pub network_type: NetworkType,
    pub duration_ms: i64,
    pub sample_period_ms: i64,
    pub fault_injections: Vec<FaultInjection>,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            topology_kind: TopologyKind::Star,
            node_count: 9,
            network_type: NetworkType::Uav,
            duration_ms: 10_000,
            sample_period_ms: 1_000,
            fault_injections: Vec::new(),
            seed: 0,
        }
    }
}

/// KPI column order for generated series.
pub const SCENARIO_KPIS: [&str; 7] = [
    "delay_ms",
    "packet_loss_pct",
    "throughput_mbps",
    "error_rate_pct",
    "rssi_dbm",
    "packet_rate_pps",
    "app_throughput_mbps",
];

/// Nominal value and safe clamp envelope per KPI for a network type. The
/// envelopes sit strictly inside the builtin rule bounds.
fn baseline(network: NetworkType, kpi: &str) -> (f64, f64, f64) {
    let delay = match network {
        NetworkType::Mobile => 30.0,
        NetworkType::Vanet => 35.0,
        NetworkType::Uav => 40.0,
        NetworkType::Cellular => 25.0,
    };
    let throughput = match network {
        NetworkType::Mobile => 10.0,
        NetworkType::Vanet => 6.0,
        NetworkType::Uav => 3.0,
        NetworkType::Cellular => 50.0,
    };
    match kpi {
        "delay_ms" => (delay, 1.0, 80.0),
        "packet_loss_pct" => (0.5, 0.0, 4.0),
        "throughput_mbps" => (throughput, 0.2, throughput * 2.0),
        "error_rate_pct" => (0.5, 0.0, 1.6),
        "rssi_dbm" => (-60.0, -85.0, -40.0),
        "packet_rate_pps" => (500.0, 1.0, 1000.0),
        "app_throughput_mbps" => (throughput / 2.0, 0.1, throughput),
        _ => (0.0, 0.0, 0.0),
    }
}

fn validate_spec(spec: &ScenarioSpec) -> Result<(), SimEvalError> {
    if spec.node_count < 3 {
        return Err(SimEvalError::InvalidSpec(format!(
            "node_count {} < 3",
            spec.node_count
        )));
    }
    if spec.sample_period_ms <= 0 {
        return Err(SimEvalError::InvalidSpec("sample_period_ms must be positive".into()));
    }
    if spec.duration_ms < spec.sample_period_ms {
        return Err(SimEvalError::InvalidSpec("duration shorter than one sample period".into()));
    }
    match spec.topology_kind {
        TopologyKind::Star | TopologyKind::Ring => {}
        TopologyKind::Mesh => {
            if spec.node_count < 4 {
                return Err(SimEvalError::InvalidSpec(
                    "mesh topologies need at least 4 nodes".into(),
                ));
            }
        }
        TopologyKind::Unknown => {
            return Err(SimEvalError::InvalidSpec("topology kind must be star, ring, or mesh".into()))
        }
    }
    for inj in &spec.fault_injections {
        if inj.window.is_empty() {
            return Err(SimEvalError::InvalidSpec(format!(
                "injection interval {} is empty",
                inj.window
            )));
        }
        if inj.window.start_ms < 0 || inj.window.end_ms > spec.duration_ms {
            return Err(SimEvalError::InvalidSpec(format!(
                "injection interval {} outside duration {}",
                inj.window, spec.duration_ms
            )));
        }
    }
    Ok(())
}

fn build_topology(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<Topology, SimEvalError> {
    let ids: Vec<String> = (0..spec.node_count).map(|i| format!("d{i}")).collect();
    let edges: Vec<(String, String)> = match spec.topology_kind {
        TopologyKind::Star => ids[1..].iter().map(|x| (ids[0].clone(), x.clone())).collect(),
        TopologyKind::Ring => (0..spec.node_count)
            .map(|i| (ids[i].clone(), ids[(i + 1) % spec.node_count].clone()))
            .collect(),
        TopologyKind::Mesh => {
            // Edge probability 0.4, resampled until the shape classifies as
            // a mesh (connected, not star, not ring).
            let mut attempt = 0;
            loop {
                attempt += 1;
                if attempt > 10_000 {
                    return Err(SimEvalError::InvalidSpec(
                        "could not sample a connected mesh".into(),
                    ));
                }
                let mut edges = Vec::new();
                for i in 0..spec.node_count {
                    for j in (i + 1)..spec.node_count {
                        if rng.gen_bool(0.4) {
                            edges.push((ids[i].clone(), ids[j].clone()));
                        }
                    }
                }
                let topo = Topology::new(ids.clone(), edges.clone(), TopologyKind::Mesh);
                if topo.classify() == TopologyKind::Mesh {
                    break edges;
                }
            }
        }
        TopologyKind::Unknown => unreachable!("rejected by validate_spec"),
    };
    Ok(Topology::new(ids, edges, spec.topology_kind))
}

/// Generate a labeled synthetic dataset. Fully deterministic in the spec.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<Dataset, SimEvalError> {
    validate_spec(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let topology = build_topology(spec, &mut rng)?;

    let (class, power, bandwidth, protocol, range, speed) = spec.network_type.device_params();
    let ids: Vec<String> = (0..spec.node_count).map(|i| format!("d{i}")).collect();
    let profiles: BTreeMap<String, DeviceProfile> = ids
        .iter()
        .map(|id| {
            (
                id.clone(),
                DeviceProfile {
                    device_id: id.clone(),
                    device_class: class,
                    transmit_power_dbm: power,
                    bandwidth_mhz: bandwidth,
                    protocol: protocol.to_string(),
                    range_m: range,
                    speed_mps: speed,
                },
            )
        })
        .collect();

    let timestamps: Vec<i64> = (0..)
        .map(|i| i * spec.sample_period_ms)
        .take_while(|t| *t < spec.duration_ms)
        .collect();
    let mut series = BTreeMap::new();
    for id in &ids {
        let mut rows = Vec::with_capacity(timestamps.len());
        for &timestamp_ms in &timestamps {
            let values = SCENARIO_KPIS
                .iter()
                .map(|kpi| {
                    let (nominal, lo, hi) = baseline(spec.network_type, kpi);
                    let sigma = 0.05 * nominal.abs();
                    let jitter = Normal::new(0.0, sigma)
                        .map(|n| n.sample(&mut rng))
                        .unwrap_or(0.0);
                    (nominal + jitter).clamp(lo, hi)
                })
                .collect();
            rows.push(SeriesRow { timestamp_ms, values });
        }
        series.insert(
            id.clone(),
            DeviceSeries {
                device_id: id.clone(),
                kpi_names: SCENARIO_KPIS.iter().map(|s| s.to_string()).collect(),
                rows,
            },
        );
    }

    let mut dataset = Dataset {
        profiles,
        topology,
        series,
        labels: vec![],
    };
    for (i, inj) in spec.fault_injections.iter().enumerate() {
        dataset = inject_fault(
            dataset,
            inj.category,
            &inj.target,
            inj.window,
            spec.seed.wrapping_add(1_000 + i as u64),
        )?;
    }
    Ok(dataset)
}

/// Apply one fault category's KPI signature to the target device inside the
/// interval, leaving every other sample untouched, and append the label.
pub fn inject_fault(
    mut dataset: Dataset,
    category: FaultCategory,
    target: &str,
    window: TimeWindow,
    seed: u64,
) -> Result<Dataset, SimEvalError> {
    if window.is_empty() {
        return Err(SimEvalError::InvalidSpec(format!(
            "injection interval {window} is empty"
        )));
    }
    let Some(series) = dataset.series.get_mut(target) else {
        return Err(SimEvalError::UnknownTarget(target.to_string()));
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index_of = |name: &str, kpis: &[String]| kpis.iter().position(|k| k == name);
    let kpis = series.kpi_names.clone();

    let mut nth_in_window = 0usize;
    for row in &mut series.rows {
        if !window.contains(row.timestamp_ms) {
            continue;
        }
        match category {
            FaultCategory::ApplicationCrash => {
                if let Some(i) = index_of("app_throughput_mbps", &kpis) {
                    row.values[i] = 0.0;
                }
            }
            FaultCategory::MaliciousTraffic => {
                if let Some(i) = index_of("packet_rate_pps", &kpis) {
                    row.values[i] *= 10.0;
                }
                if let Some(i) = index_of("error_rate_pct", &kpis) {
                    row.values[i] = (row.values[i] + 3.0).max(4.0);
                }
            }
            FaultCategory::NetworkCongestion => {
                if let Some(i) = index_of("delay_ms", &kpis) {
                    row.values[i] = (row.values[i] * 5.0).max(120.0);
                }
                if let Some(i) = index_of("packet_loss_pct", &kpis) {
                    row.values[i] = (row.values[i] + 10.0).max(10.0);
                }
            }
            FaultCategory::NetworkNodeCrash => {
                for v in &mut row.values {
                    *v = 0.0;
                }
            }
            FaultCategory::OutOfCommunicationRange => {
                if let Some(i) = index_of("rssi_dbm", &kpis) {
                    row.values[i] = -100.0 - rng.gen_range(0.0..5.0);
                }
            }
            FaultCategory::CommunicationObstacles => {
                if nth_in_window % 2 == 0 {
                    if let Some(i) = index_of("rssi_dbm", &kpis) {
                        row.values[i] = (-85.0_f64 + rng.gen_range(-2.0..2.0)).clamp(-89.0, -80.0);
                    }
                    if let Some(i) = index_of("packet_loss_pct", &kpis) {
                        row.values[i] = (row.values[i] + 3.0).min(4.5);
                    }
                }
            }
        }
        nth_in_window += 1;
    }

    dataset.labels.push(FaultLabel {
        target: FaultTarget::Device(target.to_string()),
        category,
        start_ms: window.start_ms,
        end_ms: window.end_ms,
    });
    dataset
        .labels
        .sort_by(|a, b| (a.start_ms, &a.target, a.category).cmp(&(b.start_ms, &b.target, b.category)));
    Ok(dataset)
}

/// Ground-truth sample labels: `(device, timestamp)` is anomalous iff it
/// falls inside any injected interval on that device. Sample ids are
/// `device@timestamp`, in sorted order.
pub fn truth_labels(dataset: &Dataset) -> Vec<super::metrics::SampleLabel> {
    let mut out = Vec::new();
    for (id, series) in &dataset.series {
        for row in &series.rows {
            let label = dataset.labels.iter().find(|l| {
                matches!(&l.target, FaultTarget::Device(d) if d == id)
                    && l.window().contains(row.timestamp_ms)
            });
            let mut sample =
                super::metrics::SampleLabel::new(format!("{id}@{}", row.timestamp_ms), label.is_some());
            if let Some(l) = label {
                sample = sample.with_class(l.category.slug());
            }
            out.push(sample);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{save_dataset, validate_dataset};
    use crate::symgen::{builtin_rules, evaluate_rules, kpi_vector, Aggregation, FactSet, RuleScope};

    fn spec() -> ScenarioSpec {
        ScenarioSpec {
            seed: 7,
            ..ScenarioSpec::default()
        }
    }

    #[test]
    fn star_hub_has_full_degree() {
        let d = generate_scenario(&spec()).unwrap();
        assert_eq!(d.topology.degree("d0"), 8);
        for i in 1..9 {
            assert_eq!(d.topology.degree(&format!("d{i}")), 1);
        }
        assert!(validate_dataset(&d).is_valid());
    }

    #[test]
    fn uav_profiles_carry_expected_parameters() {
        let d = generate_scenario(&spec()).unwrap();
        let p = &d.profiles["d1"];
        assert_eq!(p.device_class, DeviceClass::Uav);
        assert_eq!(p.transmit_power_dbm, 20.0);
        assert_eq!(p.bandwidth_mhz, 5.0);
        assert_eq!(p.protocol, "802.11AC");
        assert_eq!(p.range_m, 400.0);
        assert_eq!(p.speed_mps, Some(15.0));
    }

    #[test]
    fn same_spec_twice_is_byte_identical() {
        let d1 = generate_scenario(&spec()).unwrap();
        let d2 = generate_scenario(&spec()).unwrap();
        assert_eq!(d1, d2);
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        save_dataset(&d1, dir1.path()).unwrap();
        save_dataset(&d2, dir2.path()).unwrap();
        let a = std::fs::read(dir1.path().join("series/d3.csv")).unwrap();
        let b = std::fs::read(dir2.path().join("series/d3.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ring_and_mesh_shapes_classify_correctly() {
        for kind in [TopologyKind::Ring, TopologyKind::Mesh] {
            let s = ScenarioSpec {
                topology_kind: kind,
                node_count: 10,
                ..spec()
            };
            let d = generate_scenario(&s).unwrap();
            assert_eq!(d.topology.classify(), kind);
            assert!(validate_dataset(&d).is_valid());
        }
    }

    #[test]
    fn injection_changes_only_target_rows_in_interval() {
        let base = generate_scenario(&spec()).unwrap();
        let window = TimeWindow::new(3000, 7000);
        for category in FaultCategory::ALL {
            let injected =
                inject_fault(base.clone(), category, "d2", window, 99).unwrap();
            for (id, series) in &injected.series {
                let original = &base.series[id];
                for (row, orig) in series.rows.iter().zip(&original.rows) {
                    if id == "d2" && window.contains(row.timestamp_ms) {
                        continue;
                    }
                    assert_eq!(row, orig, "{category:?} leaked outside target/interval");
                }
            }
            assert_eq!(injected.labels.len(), 1);
            assert_eq!(injected.labels[0].category, category);
        }
    }

    #[test]
    fn node_crash_zeroes_throughput_and_neighbors_observe_link_down() {
        let base = generate_scenario(&spec()).unwrap();
        let window = TimeWindow::new(3000, 7000);
        let injected =
            inject_fault(base, FaultCategory::NetworkNodeCrash, "d3", window, 5).unwrap();
        let s = &injected.series["d3"];
        let t = s.kpi_index("throughput_mbps").unwrap();
        for row in s.rows.iter().filter(|r| window.contains(r.timestamp_ms)) {
            assert_eq!(row.values[t], 0.0);
        }
        let (_, links) = crate::symgen::observe_connectivity(&injected, window);
        assert!(links
            .iter()
            .any(|a| a.predicate == "link_down" && a.args == vec!["d0", "d3"]));
    }

    #[test]
    fn rule_detectable_signatures_violate_bounds_by_construction() {
        let base = generate_scenario(&spec()).unwrap();
        let window = TimeWindow::new(3000, 7000);
        let rules = builtin_rules(RuleScope::All);
        let detectable = [
            FaultCategory::NetworkCongestion,
            FaultCategory::NetworkNodeCrash,
            FaultCategory::MaliciousTraffic,
            FaultCategory::OutOfCommunicationRange,
        ];
        for category in detectable {
            let injected = inject_fault(base.clone(), category, "d4", window, 11).unwrap();
            let v = kpi_vector(&injected.series["d4"], window, Aggregation::Last).unwrap();
            let findings = evaluate_rules(&rules, &FactSet::default(), &[v]).unwrap();
            assert!(
                findings.iter().any(|f| f.entity == "d4"),
                "{category:?} produced no finding on the target"
            );
        }
    }

    #[test]
    fn non_detectable_signatures_stay_inside_bounds() {
        let base = generate_scenario(&spec()).unwrap();
        let window = TimeWindow::new(3000, 7000);
        let rules = builtin_rules(RuleScope::All);
        for category in [FaultCategory::ApplicationCrash, FaultCategory::CommunicationObstacles] {
            let injected = inject_fault(base.clone(), category, "d4", window, 11).unwrap();
            let v = kpi_vector(&injected.series["d4"], window, Aggregation::Mean).unwrap();
            let findings = evaluate_rules(&rules, &FactSet::default(), &[v]).unwrap();
            assert!(
                findings.is_empty(),
                "{category:?} unexpectedly violates a builtin rule: {findings:?}"
            );
        }
    }

    #[test]
    fn unknown_target_and_empty_interval_rejected() {
        let base = generate_scenario(&spec()).unwrap();
        assert!(matches!(
            inject_fault(base.clone(), FaultCategory::NetworkCongestion, "d99", TimeWindow::new(0, 1000), 0),
            Err(SimEvalError::UnknownTarget(_))
        ));
        assert!(matches!(
            inject_fault(base, FaultCategory::NetworkCongestion, "d1", TimeWindow::new(1000, 1000), 0),
            Err(SimEvalError::InvalidSpec(_))
        ));
    }

    #[test]
    fn small_mesh_is_rejected() {
        let s = ScenarioSpec {
            topology_kind: TopologyKind::Mesh,
            node_count: 3,
            ..spec()
        };
        assert!(matches!(generate_scenario(&s), Err(SimEvalError::InvalidSpec(_))));
    }

    #[test]
    fn truth_labels_mark_only_injected_samples() {
        let base = generate_scenario(&spec()).unwrap();
        let window = TimeWindow::new(3000, 7000);
        let injected =
            inject_fault(base, FaultCategory::NetworkCongestion, "d2", window, 3).unwrap();
        let labels = truth_labels(&injected);
        for l in &labels {
            let (dev, ts) = l.sample_id.split_once('@').unwrap();
            let ts: i64 = ts.parse().unwrap();
            assert_eq!(l.positive, dev == "d2" && window.contains(ts), "{}", l.sample_id);
        }
    }
}
