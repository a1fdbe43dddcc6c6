//! Line-delimited JSON persistence for pipeline artifacts.
//!
//! Every file the pipeline writes starts with a [`Header`] record. Readers
//! recognise and skip it, so artifacts can also be written headerless
//! (fixtures, hand-made inputs).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = concat!("uiprune ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Header {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
}

impl Header {
    pub fn new(seed: u64, config_hash: impl Into<String>, with_timestamp: bool) -> Self {
        Header {
            tool_version: TOOL_VERSION.to_string(),
            seed,
            config_hash: config_hash.into(),
            created: with_timestamp.then(|| chrono::Utc::now().to_rfc3339()),
        }
    }

    /// One-line rendering for non-JSON outputs (markdown, CSV).
    pub fn comment_line(&self, prefix: &str) -> String {
        let mut line = format!(
            "{prefix} tool_version={} seed={} config_hash={}",
            self.tool_version, self.seed, self.config_hash
        );
        if let Some(created) = &self.created {
            line.push_str(&format!(" created={created}"));
        }
        line
    }
}

fn is_header(value: &Value) -> bool {
    value.as_object().is_some_and(|o| o.contains_key("tool_version"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn write_jsonl<T: Serialize>(path: &Path, header: Option<&Header>, records: &[T]) -> Result<()> {
    let mut out = create(path)?;
    let mut emit = |line: String| -> Result<()> {
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| Error::io(path, e))
    };
    if let Some(h) = header {
        emit(serde_json::to_string(h).map_err(|e| Error::json(path, e))?)?;
    }
    for r in records {
        emit(serde_json::to_string(r).map_err(|e| Error::json(path, e))?)?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Reads every line; a malformed line is a hard error. Use for artifacts
/// produced by the pipeline itself.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut records = Vec::new();
    for_each_line(path, |line| {
        let value: Value = serde_json::from_str(line).map_err(|e| Error::json(path, e))?;
        if !is_header(&value) {
            records.push(serde_json::from_value(value).map_err(|e| Error::json(path, e))?);
        }
        Ok(())
    })?;
    Ok(records)
}

/// Outcome of a lenient read: parsed records plus the number of skipped lines.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub skipped: usize,
}

/// Reads a JSONL input file, skipping (and logging) lines that fail to parse
/// or fail `validate`. Only an unreadable file is an error.
pub fn read_jsonl_lenient<T, F>(path: &Path, mut validate: F) -> Result<Loaded<T>>
where
    T: DeserializeOwned,
    F: FnMut(&T) -> std::result::Result<(), String>,
{
    let mut records = Vec::new();
    let mut skipped = 0;
    let mut lineno = 0usize;
    for_each_line(path, |line| {
        lineno += 1;
        let parsed = serde_json::from_str::<Value>(line)
            .map_err(|e| e.to_string())
            .and_then(|v| {
                if is_header(&v) {
                    Ok(None)
                } else {
                    serde_json::from_value::<T>(v).map(Some).map_err(|e| e.to_string())
                }
            })
            .and_then(|r| match r {
                Some(r) => validate(&r).map(|_| Some(r)),
                None => Ok(None),
            });
        match parsed {
            Ok(Some(r)) => records.push(r),
            Ok(None) => {}
            Err(msg) => {
                log::warn!("{}:{}: skipping line: {}", path.display(), lineno, msg);
                skipped += 1;
            }
        }
        Ok(())
    })?;
    Ok(Loaded { records, skipped })
}

fn for_each_line<F>(path: &Path, mut f: F) -> Result<()>
where
    F: FnMut(&str) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        f(&line)?;
    }
    Ok(())
}

/// Writes a single JSON document; the header is stored under `"header"`.
pub fn write_json<T: Serialize>(path: &Path, header: Option<&Header>, doc: &T) -> Result<()> {
    let mut value = serde_json::to_value(doc).map_err(|e| Error::json(path, e))?;
    if let (Some(h), Some(obj)) = (header, value.as_object_mut()) {
        obj.insert("header".into(), serde_json::to_value(h).map_err(|e| Error::json(path, e))?);
    }
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, &value).map_err(|e| Error::json(path, e))?;
    out.write_all(b"\n")
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("header");
    }
    serde_json::from_value(value).map_err(|e| Error::json(path, e))
}

/// Rounds to `places` decimal places for compact report fields.
pub fn round_to(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (x * scale).round() / scale
}
