//! Artifact emission: every run writes a JSON record (and, for tabular
//! experiments, a CSV) that embeds the full effective configuration and a
//! SHA-256 content hash, so any artifact can be regenerated bit-identically
//! from the config it carries.

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub struct Csv {
    /// documented, fixed column header
    pub header: &'static str,
    pub rows: Vec<String>,
}

pub struct Outcome {
    pub verdict: bool,
    pub results: Value,
    pub csv: Option<Csv>,
}

fn sha256_hex(data: &str) -> String {
    let mut h = Sha256::new();
    h.update(data.as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `<out>/<id>.json` (and `<out>/<id>.csv` when tabular) and returns
/// the paths written.
pub fn write_artifacts(
    out_dir: &Path,
    id: &str,
    config: &Value,
    outcome: &Outcome,
) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let payload = json!({
        "experiment": id,
        "config": config,
        "verdict": if outcome.verdict { "pass" } else { "fail" },
        "results": outcome.results,
    });
    let payload_str = serde_json::to_string_pretty(&payload)?;
    let hash = sha256_hex(&payload_str);
    let mut artifact = Map::new();
    artifact.insert("content_hash".into(), Value::String(hash.clone()));
    if let Value::Object(fields) = payload {
        for (k, v) in fields {
            artifact.insert(k, v);
        }
    }
    let mut written = Vec::new();
    let json_path = out_dir.join(format!("{id}.json"));
    fs::write(
        &json_path,
        serde_json::to_string_pretty(&Value::Object(artifact))? + "\n",
    )?;
    written.push(json_path);

    if let Some(csv) = &outcome.csv {
        let mut body = String::new();
        body.push_str(&format!("# experiment: {id}\n"));
        body.push_str(&format!("# content_hash: {hash}\n"));
        body.push_str(&format!("# config: {}\n", serde_json::to_string(config)?));
        body.push_str(csv.header);
        body.push('\n');
        for row in &csv.rows {
            body.push_str(row);
            body.push('\n');
        }
        let csv_path = out_dir.join(format!("{id}.csv"));
        fs::write(&csv_path, body)?;
        written.push(csv_path);
    }
    Ok(written)
}
