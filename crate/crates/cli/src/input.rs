use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

/// A CSV file of numbers, stored by column.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl NumericTable {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| CliError::csv(path, e))?;
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| CliError::csv(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns = vec![Vec::new(); headers.len()];
        for record in reader.records() {
            let record = record.map_err(|e| CliError::csv(path, e))?;
            let line = record.position().map_or(0, |p| p.line());
            for ((field, column), name) in record.iter().zip(&mut columns).zip(&headers) {
                let value = field.parse::<f64>().map_err(|e| CliError::Parse {
                    path: path.to_path_buf(),
                    line,
                    column: name.clone(),
                    message: format!("'{field}': {e}"),
                })?;
                column.push(value);
            }
        }
        if columns.first().is_none_or(Vec::is_empty) {
            return Err(CliError::Data { path: path.to_path_buf(), message: "no data rows".into() });
        }
        Ok(Self { path: path.to_path_buf(), headers, columns })
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.headers.iter().position(|h| h == name).ok_or_else(|| CliError::Data {
            path: self.path.clone(),
            message: format!("no column named '{name}' (have {})", self.headers.join(", ")),
        })
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        Ok(&self.columns[self.index_of(name)?])
    }
}
