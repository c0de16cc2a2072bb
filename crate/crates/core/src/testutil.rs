//! Shared test fixtures.

use std::collections::BTreeMap;

use crate::datamodel::{
    Dataset, DeviceClass, DeviceProfile, DeviceSeries, SeriesRow, Topology, TopologyKind,
};

/// A minimal valid star dataset: `d0` is the hub, every device has two rows
/// of nominal UAV KPIs.
pub(crate) fn star_dataset(n: usize) -> Dataset {
    let ids: Vec<String> = (0..n).map(|i| format!("d{i}")).collect();
    let profiles: BTreeMap<String, DeviceProfile> = ids
        .iter()
        .map(|id| {
            (
                id.clone(),
                DeviceProfile {
                    device_id: id.clone(),
                    device_class: DeviceClass::Uav,
                    transmit_power_dbm: 20.0,
                    bandwidth_mhz: 5.0,
                    protocol: "802.11AC".to_string(),
                    range_m: 400.0,
                    speed_mps: Some(15.0),
                },
            )
        })
        .collect();
    let edges: Vec<(String, String)> = ids[1..]
        .iter()
        .map(|id| (ids[0].clone(), id.clone()))
        .collect();
    let kind = if n >= 3 { TopologyKind::Star } else { TopologyKind::Unknown };
    let topology = Topology::new(ids.clone(), edges, kind);
    let series: BTreeMap<String, DeviceSeries> = ids
        .iter()
        .map(|id| {
            (
                id.clone(),
                DeviceSeries {
                    device_id: id.clone(),
                    kpi_names: vec!["delay_ms".into(), "throughput_mbps".into()],
                    rows: vec![
                        SeriesRow { timestamp_ms: 0, values: vec![40.0, 3.0] },
                        SeriesRow { timestamp_ms: 1000, values: vec![41.0, 3.1] },
                    ],
                },
            )
        })
        .collect();
    Dataset {
        profiles,
        topology,
        series,
        labels: vec![],
    }
}
