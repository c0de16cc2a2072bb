//! Structured text rendering of KPI time series.
//!
//! One line per (device, timestamp):
//! `<device_id> @ <timestamp>: <kpi1>=<v1> <unit1>, <kpi2>=<v2> <unit2>, ...`
//! Devices appear in dataset (sorted id) order; rows ascend by timestamp.
//! Rendering the same table twice is byte-identical.

use serde::{Deserialize, Serialize};

use crate::datamodel::{kpi_unit, Dataset, TimeWindow};

use super::SemGenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    pub kpi_name: String,
    pub value: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub timestamp_ms: i64,
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceBlock {
    pub device_id: String,
    pub rows: Vec<TableRow>,
}

/// Per-device blocks of timestamped KPI readings, ready for text rendering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuredTable {
    pub blocks: Vec<DeviceBlock>,
}

impl StructuredTable {
    /// Deterministic textual rendering (the semantic prompt `<input>`).
    pub fn render(&self) -> String {
        let mut out = String::new();
        for block in &self.blocks {
            for row in &block.rows {
                out.push_str(&block.device_id);
                out.push_str(" @ ");
                out.push_str(&row.timestamp_ms.to_string());
                out.push_str(": ");
                for (i, e) in row.entries.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(&e.kpi_name);
                    out.push('=');
                    out.push_str(&format!("{}", e.value));
                    out.push(' ');
                    out.push_str(&e.unit);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn line_count(&self) -> usize {
        self.blocks.iter().map(|b| b.rows.len()).sum()
    }
}

/// Build the structured table for a dataset, optionally restricted to a time
/// window. Devices with no rows in the window are omitted; if nothing at all
/// falls inside the window the selection is empty and an error is returned.
pub fn render_table(
    dataset: &Dataset,
    window: Option<TimeWindow>,
) -> Result<(StructuredTable, String), SemGenError> {
    let mut blocks = Vec::new();
    for (device_id, series) in &dataset.series {
        let mut rows = Vec::new();
        for row in series.rows_in(window) {
            let entries = series
                .kpi_names
                .iter()
                .zip(&row.values)
                .map(|(k, v)| TableEntry {
                    kpi_name: k.clone(),
                    value: *v,
                    unit: kpi_unit(k).to_string(),
                })
                .collect();
            rows.push(TableRow {
                timestamp_ms: row.timestamp_ms,
                entries,
            });
        }
        if !rows.is_empty() {
            blocks.push(DeviceBlock {
                device_id: device_id.clone(),
                rows,
            });
        }
    }
    if blocks.is_empty() {
        return Err(SemGenError::EmptySelection);
    }
    let table = StructuredTable { blocks };
    let text = table.render();
    Ok((table, text))
}
