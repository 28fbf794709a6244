//! Output paths, metadata blocks and file writers shared by the subcommands.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use plap_core::grid::GridFunction;
use plap_core::io;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{config_hash, file_hash};
use crate::error::{CliError, CliResult};

/// Environment variable naming the directory for outputs without an explicit path.
pub const OUT_DIR_VAR: &str = "PLAP_OUT_DIR";

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Explicit paths are used as given; defaults land in `$PLAP_OUT_DIR` or the
/// working directory.
pub fn out_path(given: Option<&Path>, default_name: &str) -> PathBuf {
    match given {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(OUT_DIR_VAR) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir).join(default_name),
            _ => PathBuf::from(default_name),
        },
    }
}

/// `dir/stem<suffix>`, e.g. the JSON sidecar of a CSV.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Header block carried by every output file.
#[derive(Clone, Debug)]
pub struct Meta {
    subcommand: &'static str,
    hash: String,
    config: Value,
}

impl Meta {
    pub fn new<T: Serialize>(subcommand: &'static str, resolved: &T) -> Self {
        Self {
            subcommand,
            hash: config_hash(resolved),
            config: serde_json::to_value(resolved).expect("resolved config serializes"),
        }
    }

    pub fn pairs(&self) -> Vec<(String, String)> {
        vec![
            ("version".into(), VERSION.into()),
            ("subcommand".into(), self.subcommand.into()),
            ("config_hash".into(), self.hash.clone()),
        ]
    }

    fn json(&self) -> Value {
        json!({
            "version": VERSION,
            "subcommand": self.subcommand,
            "config_hash": self.hash,
            "config": self.config,
        })
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("{}: {e}", path.display()))
}

/// Writes `{"meta": .., ..body}` as pretty JSON.
pub fn write_json(path: &Path, meta: &Meta, body: Value) -> CliResult<()> {
    let mut doc = serde_json::Map::new();
    doc.insert("meta".into(), meta.json());
    match body {
        Value::Object(m) => doc.extend(m),
        other => {
            doc.insert("data".into(), other);
        }
    }
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &Value::Object(doc)).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Diagnostics written when a computation fails after validation.
pub fn write_failure(path: &Path, meta: &Meta, err: &CliError) -> CliResult<()> {
    write_json(path, meta, json!({ "status": "failed", "error": err.to_string() }))
}

/// Writes a CSV table preceded by `# key=value` metadata lines.
pub fn write_table(path: &Path, meta: &Meta, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = create(path)?;
    for (k, v) in meta.pairs() {
        writeln!(w, "# {k}={v}").map_err(io_err(path))?;
    }
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(w, "{}", row.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_field(path: &Path, meta: &Meta, extra: &[(String, String)], u: &GridFunction) -> CliResult<()> {
    let mut pairs = meta.pairs();
    pairs.extend_from_slice(extra);
    let mut w = create(path)?;
    io::write_csv(u, &pairs, &mut w)?;
    w.flush().map_err(io_err(path))
}

/// A grid function read from disk together with its metadata and content hash.
pub struct LoadedField {
    pub u: GridFunction,
    pub meta: Vec<(String, String)>,
    pub sha256: String,
}

impl LoadedField {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Reads an input field; any failure is a configuration error naming `key`.
pub fn read_field(path: &Path, key: &str) -> CliResult<LoadedField> {
    let bytes = std::fs::read(path).map_err(|e| CliError::config(key, format!("cannot read {}: {e}", path.display())))?;
    let (u, meta) = io::read_csv(BufReader::new(bytes.as_slice()))
        .map_err(|e| CliError::config(key, format!("{}: {e}", path.display())))?;
    Ok(LoadedField {
        u,
        meta,
        sha256: file_hash(&bytes),
    })
}

/// Shortest round-trip text of a float; empty for `None`.
pub fn num(v: impl Into<Option<f64>>) -> String {
    v.into().map(|x| x.to_string()).unwrap_or_default()
}
