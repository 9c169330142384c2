use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use shiftshare_core::report::to_json_string;

use crate::args::Cli;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub role: String,
    pub path: PathBuf,
    pub sha256: String,
}

/// Hashes of every input file, in the order they were registered.
#[derive(Debug, Default)]
pub struct Inputs(pub Vec<InputHash>);

impl Inputs {
    pub fn add(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let mut hex = String::with_capacity(64);
        for b in Sha256::digest(&bytes) {
            write!(hex, "{b:02x}").unwrap();
        }
        self.0.push(InputHash {
            role: role.to_string(),
            path: path.to_path_buf(),
            sha256: hex,
        });
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, R: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a Value,
    inputs: &'a [InputHash],
    notes: &'a [String],
    result: &'a R,
}

/// One estimate row for the CSV encoding.
#[derive(Debug, Clone)]
pub struct Row {
    pub name: String,
    pub estimate: f64,
    pub se: f64,
}

impl Row {
    pub fn new(name: impl Into<String>, estimate: f64, se: f64) -> Row {
        Row {
            name: name.into(),
            estimate,
            se,
        }
    }
}

pub struct Writer<'a> {
    pub cli: &'a Cli,
    /// Echo of the parsed arguments with defaults resolved.
    pub config: Value,
    pub inputs: Inputs,
    pub notes: Vec<String>,
}

impl<'a> Writer<'a> {
    pub fn new(cli: &'a Cli) -> Self {
        Writer {
            cli,
            config: serde_json::to_value(cli).expect("arguments serialize"),
            inputs: Inputs::default(),
            notes: Vec::new(),
        }
    }

    /// Record a value chosen on the user's behalf.
    pub fn resolve(&mut self, key: &str, value: impl Serialize) {
        self.config[key] = serde_json::to_value(value).expect("value serializes");
    }

    pub fn dir(&self) -> Result<&Path, CliError> {
        let dir = self.cli.global.out.as_path();
        fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_path_buf(), e))?;
        Ok(dir)
    }

    pub fn write_file(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir()?.join(name);
        fs::write(&path, contents).map_err(|e| CliError::Io(path.clone(), e))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    /// The JSON report (if requested) and the estimate table (if requested).
    pub fn report<R: Serialize>(&self, stem: &str, result: &R, rows: &[Row]) -> Result<(), CliError> {
        let format = self.cli.global.format;
        if format.json() {
            self.json(&format!("{stem}.json"), result)?;
        }
        if format.csv() {
            self.table(stem, rows)?;
        }
        Ok(())
    }

    pub fn table(&self, stem: &str, rows: &[Row]) -> Result<(), CliError> {
        let mut out = String::from("name,estimate,se\n");
        for r in rows {
            writeln!(out, "{},{},{}", r.name, num(r.estimate), num(r.se)).unwrap();
        }
        self.write_file(&format!("{stem}.csv"), &out)
    }

    /// Always-written JSON artifact wrapped in the config/input envelope.
    pub fn json<R: Serialize>(&self, name: &str, result: &R) -> Result<(), CliError> {
        let env = Envelope {
            tool: "shiftshare-lens",
            version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            inputs: &self.inputs.0,
            notes: &self.notes,
            result,
        };
        self.write_file(name, &to_json_string(&env))
    }
}

/// Shortest round-trip float text; empty for non-finite values.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        String::new()
    }
}
