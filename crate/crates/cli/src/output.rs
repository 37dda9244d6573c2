//! Fixed-format numeric output.
//!
//! Every real is written with 17 significant digits in scientific notation,
//! so identical runs produce byte-identical files and values round-trip.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::Failure;

/// `d.dddddddddddddddde±x` with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn config_hash(raw: &[u8]) -> String {
    hex::encode(Sha256::digest(raw))
}

/// Flat JSON object with fields kept in insertion order.
#[derive(Debug, Default, Clone)]
pub struct JsonObject {
    fields: Vec<(String, String)>,
}

impl JsonObject {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, key: &str, value: String) -> &mut Self {
        self.fields.push((key.to_string(), value));
        self
    }

    /// Non-finite values become `null`.
    pub fn num(&mut self, key: &str, x: f64) -> &mut Self {
        let v = if x.is_finite() { fmt17(x) } else { "null".into() };
        self.push(key, v)
    }

    pub fn opt_num(&mut self, key: &str, x: Option<f64>) -> &mut Self {
        self.num(key, x.unwrap_or(f64::NAN))
    }

    pub fn int(&mut self, key: &str, n: u64) -> &mut Self {
        self.push(key, n.to_string())
    }

    pub fn opt_int(&mut self, key: &str, n: Option<u64>) -> &mut Self {
        self.push(key, n.map_or("null".into(), |n| n.to_string()))
    }

    pub fn boolean(&mut self, key: &str, b: bool) -> &mut Self {
        self.push(key, b.to_string())
    }

    pub fn string(&mut self, key: &str, s: &str) -> &mut Self {
        self.push(key, serde_json::to_string(s).expect("strings serialize"))
    }

    pub fn render(&self) -> String {
        let body: Vec<String> = self
            .fields
            .iter()
            .map(|(k, v)| format!("  {}: {v}", serde_json::to_string(k).expect("strings serialize")))
            .collect();
        format!("{{\n{}\n}}\n", body.join(",\n"))
    }
}

/// `# key = value` lines shared by every CSV output.
pub fn provenance(hash: &str, seed: u64) -> Vec<(&'static str, String)> {
    vec![("config_sha256", hash.to_string()), ("seed", seed.to_string())]
}

/// Writes a CSV table preceded by comment lines.
pub fn csv_table(meta: &[(&str, String)], header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut out = String::new();
    for (k, v) in meta {
        out.push_str(&format!("# {k} = {v}\n"));
    }
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(header).map_err(|e| Failure::io("csv", e))?;
    for r in rows {
        wtr.write_record(r).map_err(|e| Failure::io("csv", e))?;
    }
    let bytes = wtr.into_inner().map_err(|e| Failure::io("csv", e))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn write(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(dir.display(), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::io(path.display(), e))?;
    Ok(path)
}
