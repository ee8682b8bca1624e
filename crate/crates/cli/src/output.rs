use std::fs::File;
use std::path::{Path, PathBuf};

use toml::Table;

use crate::config::Seed;
use crate::error::{CliError, Result};

/// 17 significant digits, enough to read back the same f64.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV file under construction.
pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    pub fn create(dir: &Path, name: &str, header: &[String]) -> Result<Self> {
        let path = dir.join(name);
        let writer = csv::Writer::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
        let mut out = Self { path, writer };
        out.row(header.iter().map(String::as_str))?;
        Ok(out)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|e| CliError::csv(&self.path, e))
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.writer.flush().map_err(|e| CliError::io(&self.path, e))?;
        Ok(self.path)
    }
}

/// Resolved settings of a run plus result notes, written as `manifest.toml`.
///
/// The file can be passed back through `--config` to repeat the run.
pub struct Manifest {
    command: &'static str,
    root: Table,
    section: Table,
    notes: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: Seed) -> Self {
        let mut root = Table::new();
        if let Ok(v) = toml::Value::try_from(seed) {
            root.insert("seed".into(), v);
        }
        Self { command, root, section: Table::new(), notes: Vec::new() }
    }

    pub fn settings(&mut self, table: Table) {
        self.section.extend(table);
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.notes.push((key.to_string(), value.to_string()));
    }

    pub fn write(mut self, dir: &Path) -> Result<PathBuf> {
        let mut text = format!("# epismc {} {}\n", env!("CARGO_PKG_VERSION"), self.command);
        for (k, v) in &self.notes {
            text.push_str(&format!("# {k} = {v}\n"));
        }
        self.root.insert(self.command.into(), toml::Value::Table(self.section));
        text.push_str(&toml::to_string(&self.root).map_err(|e| CliError::config(e.to_string()))?);
        let path = dir.join("manifest.toml");
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
