//! Built-in seed knowledge for network fault diagnosis: device classes with
//! their radio parameters, the core KPI metrics with thresholds, the six
//! fault categories, and per-fault diagnostic steps.

use crate::datamodel::FaultCategory;

use super::{Entity, EntityKind, FactStatement, KnowledgeGraph, RelationEdge};

const CLASSES: [(&str, &str); 5] = [
    ("mobile_phone", "Mobile Phone"),
    ("vehicle", "Vehicle"),
    ("uav", "UAV"),
    ("base_station", "Base Station"),
    ("generic", "Generic Device"),
];

/// (id, unit, threshold). Metrics without a threshold are observational.
const METRICS: [(&str, &str, Option<&str>); 7] = [
    ("delay_ms", "ms", Some("within[0,100]")),
    ("packet_loss_pct", "%", Some("within[0,5]")),
    ("throughput_mbps", "Mbps", Some(">=0.1")),
    ("error_rate_pct", "%", Some("within[0,2]")),
    ("rssi_dbm", "dBm", Some(">=-90")),
    ("packet_rate_pps", "pps", None),
    ("app_throughput_mbps", "Mbps", None),
];

/// metric → fault types it points at.
const INDICATES: [(&str, &[&str]); 7] = [
    ("delay_ms", &["network_congestion"]),
    ("packet_loss_pct", &["network_congestion", "communication_obstacles"]),
    ("throughput_mbps", &["network_node_crash"]),
    ("error_rate_pct", &["malicious_traffic"]),
    ("packet_rate_pps", &["malicious_traffic"]),
    ("rssi_dbm", &["out_of_communication_range", "communication_obstacles"]),
    ("app_throughput_mbps", &["application_crash"]),
];

const STEPS: [(&str, &[&str]); 6] = [
    (
        "network_congestion",
        &[
            "check traffic statistics",
            "inspect the routing table",
            "review bandwidth allocation",
        ],
    ),
    (
        "network_node_crash",
        &[
            "check the network interface card status",
            "power-cycle the device",
            "verify link state with neighbors",
        ],
    ),
    (
        "malicious_traffic",
        &[
            "check traffic statistics for packet floods",
            "review firewall and access control configuration",
        ],
    ),
    (
        "out_of_communication_range",
        &[
            "measure received signal strength",
            "verify node position against the coverage range",
        ],
    ),
    (
        "communication_obstacles",
        &[
            "measure received signal strength variability",
            "survey the radio path for obstructions",
        ],
    ),
    (
        "application_crash",
        &[
            "check the application process status",
            "review application logs",
            "restart the application service",
        ],
    ),
];

/// Device class parameters: transmit power (dBm), bandwidth (MHz), protocol,
/// range (m), speed (m/s, empty for fixed installations).
const CLASS_PARAMS: [(&str, &str, &str, &str, &str, &str); 4] = [
    ("mobile_phone", "23", "20", "LTE", "200", "10"),
    ("vehicle", "30", "10", "802.11p", "200", "20"),
    ("uav", "20", "5", "802.11AC", "400", "15"),
    ("base_station", "43", "100", "LTE", "500", ""),
];

/// Construct the seed graph. Deterministic; every record carries timestamp 0.
pub fn builtin_graph() -> KnowledgeGraph {
    let mut g = KnowledgeGraph::new();

    for (id, name) in CLASSES {
        g.insert_entity(Entity::new(id, name, EntityKind::DeviceClass)).unwrap();
    }
    for (id, unit, threshold) in METRICS {
        g.insert_entity(Entity::new(id, id, EntityKind::Metric)).unwrap();
        g.insert_fact(FactStatement::new(id, "unit", unit)).unwrap();
        if let Some(t) = threshold {
            g.insert_fact(FactStatement::new(id, "threshold", t)).unwrap();
        }
    }
    for category in FaultCategory::ALL {
        g.insert_entity(Entity::new(
            category.slug(),
            category.display_name(),
            EntityKind::FaultType,
        ))
        .unwrap();
    }

    for (class_id, _) in CLASSES {
        for (metric_id, _, _) in METRICS {
            g.insert_relation(RelationEdge::new(class_id, "has_metric", metric_id)).unwrap();
        }
    }
    for (metric_id, faults) in INDICATES {
        for fault in faults {
            g.insert_relation(RelationEdge::new(metric_id, "indicates", fault)).unwrap();
        }
    }
    for (fault, steps) in STEPS {
        for (i, description) in steps.iter().enumerate() {
            let step_id = format!("{fault}_step{}", i + 1);
            g.insert_entity(Entity::new(&step_id, description, EntityKind::Step)).unwrap();
            g.insert_relation(RelationEdge::new(fault, "diagnosed_by", &step_id)).unwrap();
        }
    }

    for (class_id, power, bandwidth, protocol, range, speed) in CLASS_PARAMS {
        g.insert_fact(FactStatement::new(class_id, "transmit_power_dbm", power)).unwrap();
        g.insert_fact(FactStatement::new(class_id, "bandwidth_mhz", bandwidth)).unwrap();
        g.insert_fact(FactStatement::new(class_id, "protocol", protocol)).unwrap();
        g.insert_fact(FactStatement::new(class_id, "range_m", range)).unwrap();
        if !speed.is_empty() {
            g.insert_fact(FactStatement::new(class_id, "speed_mps", speed)).unwrap();
        }
    }

    g
}
