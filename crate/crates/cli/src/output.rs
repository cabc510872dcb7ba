use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Written as `manifest.json` next to every set of output files.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub seed: u64,
    pub versions: String,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

pub fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn versions() -> String {
    format!("projenergy {}", env!("CARGO_PKG_VERSION"))
}

/// Flag values as a JSON object keyed by long flag name, so the map can be
/// fed back through `--params`.
pub fn parameters<T: Serialize>(args: &T) -> BTreeMap<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(map)) => map.into_iter().collect(),
        _ => BTreeMap::new(),
    }
}

/// Seventeen significant digits, enough to round-trip.
pub fn file_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Twelve significant digits for terminal summaries.
pub fn term_float(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        format!("{:.*}", (11 - mag) as usize, x)
    } else {
        format!("{x:.11e}")
    }
}

/// Collects output files of one run inside `--output`.
pub struct Sink {
    dir: Option<PathBuf>,
    written: Vec<String>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).map_err(|e| Failure::input(format!("{}: {e}", d.display())))?;
        }
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    pub fn enabled(&self) -> bool {
        self.dir.is_some()
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), Failure> {
        if let Some(path) = self.path(name) {
            write(&path, body)?;
            self.written.push(path.display().to_string());
        }
        Ok(())
    }

    /// CSV with a header row; an optional trailing comment line.
    pub fn csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
        trailer: Option<&str>,
    ) -> Result<(), Failure> {
        if !self.enabled() {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| Failure::internal(format!("csv: {e}"));
        w.write_record(header).map_err(fail)?;
        for r in rows {
            w.write_record(r).map_err(fail)?;
        }
        let mut body = w
            .into_inner()
            .map_err(|e| Failure::internal(format!("csv: {e}")))?;
        if let Some(t) = trailer {
            body.extend_from_slice(t.as_bytes());
            body.push(b'\n');
        }
        self.text(name, &String::from_utf8_lossy(&body))
    }

    pub fn finish(self, mut manifest: RunManifest) -> Result<(), Failure> {
        if let Some(path) = self.path("manifest.json") {
            manifest.outputs = self.written;
            manifest.finished = timestamp();
            let body = serde_json::to_string_pretty(&manifest)
                .map_err(|e| Failure::internal(format!("manifest: {e}")))?;
            write(&path, &(body + "\n"))?;
        }
        Ok(())
    }
}

fn write(path: &Path, body: &str) -> Result<(), Failure> {
    fs::write(path, body).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}
