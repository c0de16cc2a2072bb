//! Symbolic generation: first-order facts from topology and device state,
//! per-device KPI feature vectors, second-order threshold rules, and a
//! built-in constraint evaluator that turns rule violations into anomaly
//! findings.
//!
//! The evaluator handles exactly what the rules express — linear threshold
//! checks plus one round of ground implications over facts — and is swappable
//! for an external solver through [`ConstraintSolver`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{
    kpi_unit, Dataset, DeviceClass, DeviceProfile, DeviceSeries, TimeWindow, Topology,
};
use crate::nkg::KnowledgeGraph;

#[derive(Debug, Error)]
pub enum SymGenError {
    #[error("port state references device {0} outside the topology")]
    UnknownDevice(String),

    #[error("window {0} contains no rows")]
    EmptyWindow(TimeWindow),

    #[error("rule {rule_id} unit {rule_unit} does not match KPI {kpi} unit {vector_unit}")]
    UnitMismatch {
        rule_id: String,
        rule_unit: String,
        kpi: String,
        vector_unit: String,
    },
}

// ============================================================================
// Facts
// ============================================================================

/// A ground first-order atom: `predicate(arg1, arg2, ...)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl FactAtom {
    pub fn new(predicate: &str, args: &[&str]) -> Self {
        Self {
            predicate: predicate.to_string(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for FactAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.predicate, self.args.join(","))
    }
}

/// Sorted, de-duplicated set of atoms with fixed arity per predicate.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FactSet {
    atoms: Vec<FactAtom>,
}

impl FactSet {
    pub fn from_atoms(atoms: impl IntoIterator<Item = FactAtom>) -> Self {
        let set: BTreeSet<FactAtom> = atoms.into_iter().collect();
        // Arity is fixed per predicate: keep the first-seen arity, drop others.
        let mut arity: BTreeMap<String, usize> = BTreeMap::new();
        let atoms: Vec<FactAtom> = set
            .into_iter()
            .filter(|a| *arity.entry(a.predicate.clone()).or_insert(a.args.len()) == a.args.len())
            .collect();
        Self { atoms }
    }

    pub fn atoms(&self) -> &[FactAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn with_predicate<'a>(&'a self, predicate: &'a str) -> impl Iterator<Item = &'a FactAtom> {
        self.atoms.iter().filter(move |a| a.predicate == predicate)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for a in &self.atoms {
            out.push_str(&a.to_string());
            out.push('\n');
        }
        out
    }
}

/// Observed port states keyed by (device, port).
pub type PortStates = BTreeMap<(String, String), bool>;

/// Convert topology, device classes, and port states into first-order atoms:
/// one `connected(a,b)` per edge (endpoints in lexicographic order), one
/// `role(device, class)` per node, one `port_up`/`port_down` per reported
/// port. Output order is deterministic.
pub fn extract_facts(
    topology: &Topology,
    profiles: &BTreeMap<String, DeviceProfile>,
    port_states: &PortStates,
) -> Result<FactSet, SymGenError> {
    for (device, _) in port_states.keys() {
        if !topology.nodes.contains(device) {
            return Err(SymGenError::UnknownDevice(device.clone()));
        }
    }
    let mut atoms = Vec::new();
    for (a, b) in &topology.edges {
        atoms.push(FactAtom::new("connected", &[a, b]));
    }
    for node in &topology.nodes {
        let class = profiles
            .get(node)
            .map_or(DeviceClass::Generic, |p| p.device_class);
        atoms.push(FactAtom::new("role", &[node, class.as_str()]));
    }
    for ((device, port), up) in port_states {
        let predicate = if *up { "port_up" } else { "port_down" };
        atoms.push(FactAtom::new(predicate, &[device, port]));
    }
    Ok(FactSet::from_atoms(atoms))
}

// ============================================================================
// KPI feature vectors
// ============================================================================

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Last,
    Mean,
    Max,
}

impl Aggregation {
    pub fn from_str_opt(s: &str) -> Option<Self> {
        match s {
            "last" => Some(Aggregation::Last),
            "mean" => Some(Aggregation::Mean),
            "max" => Some(Aggregation::Max),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiEntry {
    pub kpi_name: String,
    pub value: f64,
    pub unit: String,
}

/// Aggregated KPI values for one device over a window, in the device's
/// declared KPI order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiFeatureVector {
    pub device_id: String,
    pub entries: Vec<KpiEntry>,
    pub window: TimeWindow,
}

/// Aggregate a device series over a window into one feature vector.
pub fn kpi_vector(
    series: &DeviceSeries,
    window: TimeWindow,
    aggregation: Aggregation,
) -> Result<KpiFeatureVector, SymGenError> {
    let rows: Vec<_> = series.rows_in(Some(window)).collect();
    if rows.is_empty() {
        return Err(SymGenError::EmptyWindow(window));
    }
    let entries = series
        .kpi_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let column = rows.iter().map(|r| r.values[i]);
            let value = match aggregation {
                Aggregation::Last => rows.last().unwrap().values[i],
                Aggregation::Mean => column.sum::<f64>() / rows.len() as f64,
                Aggregation::Max => column.fold(f64::NEG_INFINITY, f64::max),
            };
            KpiEntry {
                kpi_name: name.clone(),
                value,
                unit: kpi_unit(name).to_string(),
            }
        })
        .collect();
    Ok(KpiFeatureVector {
        device_id: series.device_id.clone(),
        entries,
        window,
    })
}

// ============================================================================
// Rules
// ============================================================================

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleScope {
    All,
    DeviceClass(DeviceClass),
    Device(String),
}

impl fmt::Display for RuleScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleScope::All => f.write_str("all"),
            RuleScope::DeviceClass(c) => f.write_str(c.as_str()),
            RuleScope::Device(d) => f.write_str(d),
        }
    }
}

/// Threshold relation a KPI value must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Relation {
    /// True when `value` breaks the relation.
    pub fn violated_by(&self, value: f64) -> bool {
        match self {
            Relation::AtMost(max) => value > *max,
            Relation::AtLeast(min) => value < *min,
            Relation::Within(lo, hi) => value < *lo || value > *hi,
        }
    }

    /// Parse `within[lo,hi]`, `<=x`, or `>=x`.
    pub fn parse(text: &str) -> Option<Relation> {
        let text = text.trim().replace(' ', "");
        if let Some(rest) = text.strip_prefix("within[") {
            let inner = rest.strip_suffix(']')?;
            let (lo, hi) = inner.split_once(',')?;
            let (lo, hi): (f64, f64) = (lo.parse().ok()?, hi.parse().ok()?);
            if lo >= hi {
                return None;
            }
            return Some(Relation::Within(lo, hi));
        }
        if let Some(rest) = text.strip_prefix("<=") {
            return Some(Relation::AtMost(rest.parse().ok()?));
        }
        if let Some(rest) = text.strip_prefix(">=") {
            return Some(Relation::AtLeast(rest.parse().ok()?));
        }
        None
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::AtMost(x) => write!(f, "<= {x}"),
            Relation::AtLeast(x) => write!(f, ">= {x}"),
            Relation::Within(lo, hi) => write!(f, "within [{lo}, {hi}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Fault,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Fault => "fault",
        }
    }
}

/// A second-order threshold rule over one KPI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub rule_id: String,
    pub scope: RuleScope,
    pub kpi: String,
    pub relation: Relation,
    pub unit: String,
    pub severity: Severity,
    /// Knowledge-graph entity id the threshold came from, or `builtin`.
    pub provenance: String,
}

impl Rule {
    /// Line form used in the symbolic block of the diagnosis context.
    pub fn render(&self) -> String {
        format!(
            "rule {}: {}.{} {} [{}] severity={} from={}",
            self.rule_id,
            self.scope,
            self.kpi,
            self.relation,
            self.unit,
            self.severity.as_str(),
            self.provenance
        )
    }
}

/// Operational default thresholds, used only when the knowledge graph has no
/// threshold statement for a (class, KPI) pair.
pub fn builtin_rules(scope: RuleScope) -> Vec<Rule> {
    let defaults: [(&str, Relation); 5] = [
        ("delay_ms", Relation::Within(0.0, 100.0)),
        ("error_rate_pct", Relation::Within(0.0, 2.0)),
        ("packet_loss_pct", Relation::Within(0.0, 5.0)),
        ("rssi_dbm", Relation::AtLeast(-90.0)),
        ("throughput_mbps", Relation::AtLeast(0.1)),
    ];
    defaults
        .iter()
        .map(|(kpi, relation)| Rule {
            rule_id: format!("builtin.{scope}.{kpi}"),
            scope: scope.clone(),
            kpi: kpi.to_string(),
            relation: *relation,
            unit: kpi_unit(kpi).to_string(),
            severity: Severity::Fault,
            provenance: "builtin".to_string(),
        })
        .collect()
}

/// Rules derived from the knowledge graph plus any degradation warnings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RuleDerivation {
    pub rules: Vec<Rule>,
    pub warnings: Vec<String>,
}

/// Derive threshold rules for one device profile from the knowledge graph.
///
/// Metric entities reachable from the profile's class entity via `has_metric`
/// contribute one rule each, reading the `threshold.<class>` fact when
/// present and the plain `threshold` fact otherwise. Missing coverage
/// degrades to [`builtin_rules`] with a warning; malformed thresholds are
/// skipped and reported.
pub fn derive_rules(profile: &DeviceProfile, kg: &KnowledgeGraph) -> RuleDerivation {
    let class = profile.device_class;
    let scope = RuleScope::DeviceClass(class);
    let mut derivation = RuleDerivation::default();

    let mut covered = false;
    if kg.entity(class.as_str()).is_some() {
        let mut metric_ids: Vec<String> = kg
            .relations()
            .filter(|r| r.predicate == "has_metric" && r.subject == class.as_str())
            .map(|r| r.object.clone())
            .collect();
        metric_ids.sort();
        metric_ids.dedup();
        for metric_id in metric_ids {
            let scoped_attr = format!("threshold.{}", class.as_str());
            let threshold = kg
                .fact(&metric_id, &scoped_attr)
                .or_else(|| kg.fact(&metric_id, "threshold"));
            let Some(stmt) = threshold else {
                continue;
            };
            match Relation::parse(&stmt.value) {
                Some(relation) => {
                    let kpi = kg
                        .entity(&metric_id)
                        .map(|e| e.name.clone())
                        .unwrap_or_else(|| metric_id.clone());
                    let unit = kg
                        .fact(&metric_id, "unit")
                        .map(|f| f.value.clone())
                        .unwrap_or_else(|| kpi_unit(&kpi).to_string());
                    derivation.rules.push(Rule {
                        rule_id: format!("kg.{}.{kpi}", class.as_str()),
                        scope: scope.clone(),
                        kpi,
                        relation,
                        unit,
                        severity: Severity::Fault,
                        provenance: metric_id.clone(),
                    });
                    covered = true;
                }
                None => derivation.warnings.push(format!(
                    "malformed threshold '{}' on {metric_id} skipped",
                    stmt.value
                )),
            }
        }
    }

    if !covered {
        derivation.warnings.push(format!(
            "no knowledge-graph thresholds for class {class}; using builtin defaults"
        ));
        derivation.rules = builtin_rules(scope);
    }
    derivation
        .rules
        .sort_by(|a, b| (&a.kpi, &a.rule_id).cmp(&(&b.kpi, &b.rule_id)));
    derivation
}

// ============================================================================
// Evaluation
// ============================================================================

/// A rule violation backed by the observed value, re-checkable against the
/// rule's relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyFinding {
    pub entity: String,
    pub kpi: String,
    pub observed: f64,
    pub violated_rule: String,
    pub relation: Relation,
    pub window: TimeWindow,
}

impl AnomalyFinding {
    /// Soundness re-check: the observed value really violates the relation.
    pub fn recheck(&self) -> bool {
        self.relation.violated_by(self.observed)
    }
}

/// Sorted de-duplicated set of entity ids (the anomalous set).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySet(Vec<String>);

impl EntitySet {
    pub fn from_ids(ids: impl IntoIterator<Item = String>) -> Self {
        let set: BTreeSet<String> = ids.into_iter().collect();
        Self(set.into_iter().collect())
    }

    pub fn ids(&self) -> &[String] {
        &self.0
    }

    pub fn contains(&self, id: &str) -> bool {
        self.0.binary_search_by(|x| x.as_str().cmp(id)).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
}

fn scope_matches(scope: &RuleScope, device: &str, class_of: &BTreeMap<&str, &str>) -> bool {
    match scope {
        RuleScope::All => true,
        RuleScope::Device(d) => d == device,
        RuleScope::DeviceClass(c) => class_of.get(device).is_some_and(|x| *x == c.as_str()),
    }
}

/// Pluggable constraint backend. The built-in evaluator covers the rule
/// language completely (conjunctions of linear inequalities and ground
/// implications); an external solver can be swapped in behind this trait.
pub trait ConstraintSolver {
    fn evaluate(
        &self,
        rules: &[Rule],
        facts: &FactSet,
        vectors: &[KpiFeatureVector],
    ) -> Result<Vec<AnomalyFinding>, SymGenError>;
}

/// Direct evaluation: linear threshold checks plus one round of ground
/// forward propagation over `port_down` and `link_down` facts.
#[derive(Debug, Default, Clone)]
pub struct BuiltinEvaluator;

impl ConstraintSolver for BuiltinEvaluator {
    fn evaluate(
        &self,
        rules: &[Rule],
        facts: &FactSet,
        vectors: &[KpiFeatureVector],
    ) -> Result<Vec<AnomalyFinding>, SymGenError> {
        // Device classes come from role(device, class) atoms.
        let class_of: BTreeMap<&str, &str> = facts
            .with_predicate("role")
            .filter(|a| a.args.len() == 2)
            .map(|a| (a.args[0].as_str(), a.args[1].as_str()))
            .collect();

        let mut findings = Vec::new();
        for vector in vectors {
            for entry in &vector.entries {
                for rule in rules {
                    if rule.kpi != entry.kpi_name {
                        continue;
                    }
                    if !scope_matches(&rule.scope, &vector.device_id, &class_of) {
                        continue;
                    }
                    if rule.unit != entry.unit {
                        return Err(SymGenError::UnitMismatch {
                            rule_id: rule.rule_id.clone(),
                            rule_unit: rule.unit.clone(),
                            kpi: entry.kpi_name.clone(),
                            vector_unit: entry.unit.clone(),
                        });
                    }
                    if rule.relation.violated_by(entry.value) {
                        findings.push(AnomalyFinding {
                            entity: vector.device_id.clone(),
                            kpi: entry.kpi_name.clone(),
                            observed: entry.value,
                            violated_rule: rule.rule_id.clone(),
                            relation: rule.relation,
                            window: vector.window,
                        });
                    }
                }
            }
        }

        // Ground implications: port_down(d, p) flags d; link_down(x, y) flags
        // the unreachable endpoint y.
        let window = enclosing_window(vectors);
        for atom in facts.with_predicate("port_down") {
            if atom.args.len() == 2 {
                findings.push(AnomalyFinding {
                    entity: atom.args[0].clone(),
                    kpi: format!("port:{}", atom.args[1]),
                    observed: 0.0,
                    violated_rule: "fact.port_down".to_string(),
                    relation: Relation::AtLeast(1.0),
                    window,
                });
            }
        }
        for atom in facts.with_predicate("link_down") {
            if atom.args.len() == 2 {
                findings.push(AnomalyFinding {
                    entity: atom.args[1].clone(),
                    kpi: format!("link:{}", atom.args[0]),
                    observed: 0.0,
                    violated_rule: "fact.link_down".to_string(),
                    relation: Relation::AtLeast(1.0),
                    window,
                });
            }
        }

        findings.sort_by(|a, b| {
            (&a.entity, &a.kpi, &a.violated_rule).cmp(&(&b.entity, &b.kpi, &b.violated_rule))
        });
        Ok(findings)
    }
}

fn enclosing_window(vectors: &[KpiFeatureVector]) -> TimeWindow {
    let mut start = i64::MAX;
    let mut end = i64::MIN;
    for v in vectors {
        start = start.min(v.window.start_ms);
        end = end.max(v.window.end_ms);
    }
    if start > end {
        TimeWindow::new(0, 0)
    } else {
        TimeWindow::new(start, end)
    }
}

/// Evaluate rules against facts and feature vectors with the built-in solver.
pub fn evaluate_rules(
    rules: &[Rule],
    facts: &FactSet,
    vectors: &[KpiFeatureVector],
) -> Result<Vec<AnomalyFinding>, SymGenError> {
    BuiltinEvaluator.evaluate(rules, facts, vectors)
}

/// Sorted, de-duplicated device ids appearing in the findings (the set of
/// anomalous entities).
pub fn anomalous_entities(findings: &[AnomalyFinding]) -> EntitySet {
    EntitySet::from_ids(findings.iter().map(|f| f.entity.clone()))
}

/// Derive port states and link observations from KPI data: a device whose
/// link throughput is zero at the end of the window has its radio port down,
/// and each live neighbor observes the link toward it as down.
pub fn observe_connectivity(dataset: &Dataset, window: TimeWindow) -> (PortStates, Vec<FactAtom>) {
    let mut dead: BTreeSet<&str> = BTreeSet::new();
    let mut ports = PortStates::new();
    for (id, series) in &dataset.series {
        let Some(idx) = series.kpi_index("throughput_mbps") else {
            continue;
        };
        let last = series.rows_in(Some(window)).last().map(|r| r.values[idx]);
        if let Some(value) = last {
            let up = value > 0.0;
            ports.insert((id.clone(), "radio0".to_string()), up);
            if !up {
                dead.insert(id);
            }
        }
    }
    let mut link_facts = Vec::new();
    for (a, b) in &dataset.topology.edges {
        for (observer, target) in [(a, b), (b, a)] {
            if dead.contains(target.as_str()) && !dead.contains(observer.as_str()) {
                link_facts.push(FactAtom::new("link_down", &[observer, target]));
            }
        }
    }
    link_facts.sort();
    (ports, link_facts)
}
