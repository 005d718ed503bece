//! Dataset directories: one CSV plus one label sidecar per record, with an
//! index file fixing the record order.

use std::path::Path;

use anyhow::{bail, Context, Result};
use pmuedge_core::signalgen::{LabelSidecar, WaveformRecord};
use serde::{Deserialize, Serialize};

use crate::util::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetIndex {
    pub records: Vec<String>,
}

/// Write records as `records/<name>.csv` + `records/<name>.labels.json`
/// plus `index.json`.
pub fn save(dir: &Path, named: &[(String, WaveformRecord)]) -> Result<()> {
    let records_dir = dir.join("records");
    for (name, record) in named {
        write_atomic(
            &records_dir.join(format!("{name}.csv")),
            record.to_csv().as_bytes(),
        )?;
        let sidecar = LabelSidecar::for_record(record);
        write_atomic(
            &records_dir.join(format!("{name}.labels.json")),
            serde_json::to_string_pretty(&sidecar)?.as_bytes(),
        )?;
    }
    let index = DatasetIndex {
        records: named.iter().map(|(n, _)| n.clone()).collect(),
    };
    write_atomic(
        &dir.join("index.json"),
        serde_json::to_string_pretty(&index)?.as_bytes(),
    )?;
    Ok(())
}

/// Load a dataset directory written by [`save`]. Falls back to a sorted
/// directory listing when no index is present.
pub fn load(dir: &Path) -> Result<Vec<(String, WaveformRecord)>> {
    let records_dir = dir.join("records");
    let names: Vec<String> = if dir.join("index.json").exists() {
        let index: DatasetIndex = serde_json::from_str(
            &std::fs::read_to_string(dir.join("index.json"))
                .with_context(|| format!("reading {}/index.json", dir.display()))?,
        )?;
        index.records
    } else {
        let mut names = Vec::new();
        let listing = std::fs::read_dir(&records_dir)
            .or_else(|_| std::fs::read_dir(dir))
            .with_context(|| format!("listing {}", dir.display()))?;
        for entry in listing {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("csv") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    names.push(stem.to_string());
                }
            }
        }
        names.sort();
        names
    };
    if names.is_empty() {
        bail!("dataset at {} contains no records", dir.display());
    }
    let base = if records_dir.exists() {
        records_dir
    } else {
        dir.to_path_buf()
    };
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let csv_path = base.join(format!("{name}.csv"));
        let text = std::fs::read_to_string(&csv_path)
            .with_context(|| format!("reading {}", csv_path.display()))?;
        let mut record = WaveformRecord::from_csv(&text)?;
        let labels_path = base.join(format!("{name}.labels.json"));
        if labels_path.exists() {
            let sidecar: LabelSidecar =
                serde_json::from_str(&std::fs::read_to_string(&labels_path)?)
                    .with_context(|| format!("parsing {}", labels_path.display()))?;
            sidecar.apply(&mut record);
        }
        out.push((name, record));
    }
    Ok(out)
}
