//! Artifact writing. Every file carries the config hash; only `meta.json`
//! holds run-dependent data (timestamp, wall time).

use std::fmt::Write as _;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use viscous_mather::torus::{io::slices_csv, ScalarField, TimeGrid};

pub struct Output {
    dir: PathBuf,
    hash: String,
    files: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, hash: &str) -> io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            hash: hash.to_owned(),
            files: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    fn write(&mut self, name: &str, content: &str) -> io::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)?;
        self.files.push(path);
        Ok(())
    }

    /// `{"config_hash": …, <fields of value>}`.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let mut v = json!({ "config_hash": self.hash });
        match serde_json::to_value(value).map_err(io::Error::other)? {
            Value::Object(map) => v.as_object_mut().expect("object").extend(map),
            other => {
                v["data"] = other;
            }
        }
        let mut text = serde_json::to_string_pretty(&v).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, &text)
    }

    pub fn table(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> io::Result<()> {
        let mut s = format!("# config_hash={}\n{}\n", self.hash, columns.join(","));
        for r in rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        self.write(name, &s)
    }

    pub fn slices(&mut self, name: &str, time: &TimeGrid, slices: &[&ScalarField]) -> io::Result<()> {
        let text = slices_csv(time, slices, &[format!("config_hash={}", self.hash)]);
        self.write(name, &text)
    }

    pub fn meta(&mut self, subcommand: &str, seed: u64, threads: usize, wall_time_s: f64) -> io::Result<()> {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let meta = json!({
            "config_hash": self.hash,
            "subcommand": subcommand,
            "seed": seed,
            "threads": threads,
            "versions": {
                "viscous-mather": viscous_mather::VERSION,
                "cli": env!("CARGO_PKG_VERSION"),
            },
            "wall_time_s": wall_time_s,
            "timestamp_unix": timestamp,
        });
        let mut text = serde_json::to_string_pretty(&meta).map_err(io::Error::other)?;
        text.push('\n');
        self.write("meta.json", &text)
    }
}

/// Shortest round-trip form in scientific notation, so tables are
/// reproducible bit for bit.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
