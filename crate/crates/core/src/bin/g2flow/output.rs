//! Single collector for every file a command writes. Each data file gets a
//! `<stem>.meta.json` sidecar carrying the command, the resolved
//! configuration and its hash.

use std::path::{Path, PathBuf};

use g2flow::io::{fmt_f64, write_csv, write_json};
use serde_json::{json, Map, Value};

use crate::config::{Format, RunConfig};
use crate::Failure;

pub enum Field {
    Num(f64),
    Text(String),
}

impl Field {
    fn csv(&self) -> String {
        match self {
            Field::Num(x) => fmt_f64(*x),
            Field::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Field::Num(x) if x.is_finite() => json!(x),
            Field::Num(_) => Value::Null,
            Field::Text(s) => json!(s),
        }
    }
}

pub fn nums(values: &[f64]) -> Vec<Field> {
    values.iter().map(|&x| Field::Num(x)).collect()
}

pub struct Output {
    dir: PathBuf,
    format: Format,
    command: &'static str,
    config: RunConfig,
    hash: String,
    pub written: Vec<PathBuf>,
}

impl Output {
    pub fn new(command: &'static str, config: &RunConfig) -> Self {
        Self {
            dir: config
                .directory
                .clone()
                .unwrap_or_else(|| PathBuf::from("g2flow-out")),
            format: config.format.unwrap_or_default(),
            command,
            config: config.clone(),
            hash: config.hash(),
            written: Vec::new(),
        }
    }

    fn prepare(&self, name: &str) -> Result<PathBuf, Failure> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| Failure::Io(format!("{}: {e}", self.dir.display())))?;
        Ok(self.dir.join(name))
    }

    fn sidecar(&mut self, stem: &str, file: &Path, extra: Value) -> Result<(), Failure> {
        let mut meta = Map::new();
        meta.insert("command".into(), json!(self.command));
        meta.insert("config_hash".into(), json!(self.hash));
        meta.insert("config".into(), self.config.canonical());
        meta.insert(
            "file".into(),
            json!(file.file_name().map(|f| f.to_string_lossy())),
        );
        if let Value::Object(m) = extra {
            meta.extend(m);
        }
        let path = self.prepare(&format!("{stem}.meta.json"))?;
        write_json(&path, &Value::Object(meta)).map_err(Failure::from_io)?;
        self.written.push(path);
        Ok(())
    }

    /// Writes a table as `<stem>.csv` or `<stem>.json` depending on the
    /// configured format.
    pub fn table(
        &mut self,
        stem: &str,
        header: &[&str],
        rows: &[Vec<Field>],
        extra: Value,
    ) -> Result<(), Failure> {
        let path = match self.format {
            Format::Csv => {
                let path = self.prepare(&format!("{stem}.csv"))?;
                write_csv(
                    &path,
                    header,
                    rows.iter()
                        .map(|r| r.iter().map(Field::csv).collect::<Vec<_>>()),
                )
                .map_err(Failure::from_io)?;
                path
            }
            Format::Json => {
                let path = self.prepare(&format!("{stem}.json"))?;
                let objects: Vec<Value> = rows
                    .iter()
                    .map(|r| {
                        Value::Object(
                            header
                                .iter()
                                .zip(r)
                                .map(|(h, f)| (h.to_string(), f.json()))
                                .collect(),
                        )
                    })
                    .collect();
                write_json(&path, &objects).map_err(Failure::from_io)?;
                path
            }
        };
        self.written.push(path.clone());
        self.sidecar(stem, &path, extra)
    }

    /// Writes a JSON report `<stem>.json`.
    pub fn report(&mut self, stem: &str, value: &Value) -> Result<(), Failure> {
        let path = self.prepare(&format!("{stem}.json"))?;
        write_json(&path, value).map_err(Failure::from_io)?;
        self.written.push(path.clone());
        self.sidecar(stem, &path, json!({}))
    }

    /// Writes a file through `write`, e.g. the gnuplot region data.
    pub fn raw(
        &mut self,
        name: &str,
        stem: &str,
        write: impl FnOnce(&Path) -> g2flow::Result<()>,
    ) -> Result<(), Failure> {
        let path = self.prepare(name)?;
        write(&path).map_err(Failure::from_io)?;
        self.written.push(path.clone());
        self.sidecar(stem, &path, json!({}))
    }
}
