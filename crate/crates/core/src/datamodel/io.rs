//! Dataset directory ingestion and persistence.
//!
//! Layout: `profiles.json`, `topology.json`, optional `labels.json`, and one
//! `series/<device_id>.csv` per device with header `timestamp,<kpi1>,<kpi2>,...`.
//! CSV is UTF-8 with `.` decimal separator and `\n` line endings; JSON is
//! written with stable key ordering. Floats are rendered with the shortest
//! round-trip representation so write→read→write is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::{
    validate_dataset, DataError, Dataset, DeviceProfile, DeviceSeries, FaultLabel, SeriesRow,
    Topology,
};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn schema(file: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::SchemaViolation {
        file: file.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load a dataset directory, enforcing every type invariant. Row order in the
/// CSVs is irrelevant: rows are re-sorted by timestamp, and duplicates are
/// rejected as non-monotonic.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let root = path.as_ref();
    let profiles_path = root.join("profiles.json");
    let topology_path = root.join("topology.json");
    if !profiles_path.is_file() {
        return Err(DataError::MissingFile(profiles_path.display().to_string()));
    }
    if !topology_path.is_file() {
        return Err(DataError::MissingFile(topology_path.display().to_string()));
    }

    let profiles: BTreeMap<String, DeviceProfile> = read_json(&profiles_path)?;
    let topology: Topology = read_json(&topology_path)?;

    let labels_path = root.join("labels.json");
    let mut labels: Vec<FaultLabel> = if labels_path.is_file() {
        read_json(&labels_path)?
    } else {
        Vec::new()
    };
    labels.sort_by(|a, b| {
        (a.start_ms, &a.target, a.category).cmp(&(b.start_ms, &b.target, b.category))
    });

    let series_dir = root.join("series");
    let mut series = BTreeMap::new();
    if series_dir.is_dir() {
        let mut files: Vec<PathBuf> = fs::read_dir(&series_dir)
            .map_err(io_err(&series_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        files.sort();
        for file in files {
            let device_id = file
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_default();
            let s = read_series_csv(&file, &device_id)?;
            series.insert(device_id, s);
        }
    }

    let dataset = Dataset {
        profiles,
        topology,
        series,
        labels,
    };

    // The loader enforces invariants: an invalid directory never yields a Dataset.
    let report = validate_dataset(&dataset);
    if let Some(v) = report.violations.first() {
        return Err(schema(
            root,
            0,
            format!("{} violates {}: {}", v.entity, v.invariant, v.detail),
        ));
    }
    Ok(dataset)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| schema(path, e.line(), e.to_string()))
}

fn read_series_csv(path: &Path, device_id: &str) -> Result<DeviceSeries, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| schema(path, 1, "empty series file"))?;
    let mut cols = header.split(',');
    if cols.next() != Some("timestamp") {
        return Err(schema(path, 1, "header must start with 'timestamp'"));
    }
    let kpi_names: Vec<String> = cols.map(|c| c.trim().to_string()).collect();
    if kpi_names.iter().any(|k| k.is_empty()) {
        return Err(schema(path, 1, "empty KPI column name"));
    }

    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut cells = line.split(',');
        let ts_cell = cells
            .next()
            .ok_or_else(|| schema(path, lineno, "missing timestamp"))?;
        let timestamp_ms = parse_timestamp(ts_cell)
            .ok_or_else(|| schema(path, lineno, format!("bad timestamp '{ts_cell}'")))?;
        if timestamp_ms < 0 {
            return Err(schema(path, lineno, format!("negative timestamp {timestamp_ms}")));
        }
        let mut values = Vec::with_capacity(kpi_names.len());
        for cell in cells {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| schema(path, lineno, format!("bad value '{cell}'")))?;
            if !v.is_finite() {
                return Err(schema(path, lineno, format!("non-finite value '{cell}'")));
            }
            values.push(v);
        }
        if values.len() != kpi_names.len() {
            return Err(schema(
                path,
                lineno,
                format!("row has {} values, header has {} KPIs", values.len(), kpi_names.len()),
            ));
        }
        rows.push(SeriesRow { timestamp_ms, values });
    }

    rows.sort_by_key(|r| r.timestamp_ms);
    for (i, pair) in rows.windows(2).enumerate() {
        if pair[0].timestamp_ms == pair[1].timestamp_ms {
            return Err(DataError::NonMonotonicTimestamps {
                device: device_id.to_string(),
                row: i + 1,
            });
        }
    }

    Ok(DeviceSeries {
        device_id: device_id.to_string(),
        kpi_names,
        rows,
    })
}

/// Timestamps are integer milliseconds; sub-millisecond input is truncated.
fn parse_timestamp(cell: &str) -> Option<i64> {
    let cell = cell.trim();
    if let Ok(i) = cell.parse::<i64>() {
        return Some(i);
    }
    cell.parse::<f64>().ok().filter(|f| f.is_finite()).map(|f| f.trunc() as i64)
}

/// Persist a dataset in the documented directory layout. Output is canonical:
/// writing, reloading, and writing again produces byte-identical files.
pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let root = path.as_ref();
    fs::create_dir_all(root.join("series")).map_err(io_err(root))?;

    write_json(&root.join("profiles.json"), &d.profiles)?;
    write_json(&root.join("topology.json"), &d.topology)?;
    if !d.labels.is_empty() {
        let mut labels = d.labels.clone();
        labels.sort_by(|a, b| {
            (a.start_ms, &a.target, a.category).cmp(&(b.start_ms, &b.target, b.category))
        });
        write_json(&root.join("labels.json"), &labels)?;
    }

    for (id, s) in &d.series {
        let mut out = String::from("timestamp");
        for k in &s.kpi_names {
            out.push(',');
            out.push_str(k);
        }
        out.push('\n');
        for row in &s.rows {
            out.push_str(&row.timestamp_ms.to_string());
            for v in &row.values {
                out.push(',');
                out.push_str(&format_float(*v));
            }
            out.push('\n');
        }
        let file = root.join("series").join(format!("{id}.csv"));
        fs::write(&file, out).map_err(io_err(&file))?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| schema(path, 0, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// Shortest round-trip decimal rendering of an f64.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}
