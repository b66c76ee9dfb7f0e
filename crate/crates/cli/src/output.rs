//! Writing an [`Outcome`] to disk.
//!
//! * `csv`: one `<table>.csv` per table plus `<command>.meta.json` holding
//!   metadata and checks (CSV has nowhere to put them).
//! * `json`: a single `<command>.json` with metadata, checks and tables.
//! * `svg`: `<command>.svg` plus the same `.meta.json` sidecar.

use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value as Json};

use crate::commands::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

fn meta_document(o: &Outcome) -> Json {
    json!({
        "command": o.command,
        "metadata": Json::Object(o.metadata.clone()),
        "checks": o.checks,
        "tables": o.tables.iter().map(|t| t.title.clone()).collect::<Vec<_>>(),
    })
}

fn pretty(v: &Json) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Writes the outcome under `dir` and returns the created paths.
pub fn write(o: &Outcome, dir: &Path, format: Format) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> std::io::Result<()> {
        let p = dir.join(name);
        std::fs::write(&p, bytes)?;
        files.push(p);
        Ok(())
    };
    match format {
        Format::Csv => {
            for t in &o.tables {
                let s = t.to_csv_string().map_err(std::io::Error::other)?;
                put(format!("{}.csv", t.title), s.as_bytes())?;
            }
            put(format!("{}.meta.json", o.command), pretty(&meta_document(o)).as_bytes())?;
        }
        Format::Json => {
            let mut doc = meta_document(o);
            let tables: Map<String, Json> = o.tables.iter().map(|t| (t.title.clone(), t.to_json_value())).collect();
            doc["tables"] = Json::Object(tables);
            put(format!("{}.json", o.command), pretty(&doc).as_bytes())?;
        }
        Format::Svg => {
            let svg = o.plot.clone().unwrap_or_default();
            put(format!("{}.svg", o.command), svg.as_bytes())?;
            put(format!("{}.meta.json", o.command), pretty(&meta_document(o)).as_bytes())?;
        }
    }
    Ok(files)
}
