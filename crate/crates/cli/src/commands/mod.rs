use std::path::PathBuf;

use toml::Table;

use crate::config::{decode, ConfigFile, Layered, Seed};
use crate::error::Result;

pub mod dist_check;
pub mod identify;
pub mod infer;
pub mod simulate;

/// What every command needs besides its own settings.
pub struct Context {
    pub seed: Seed,
    pub out_dir: PathBuf,
    pub file: ConfigFile,
}

impl Context {
    /// The command's config section, checked against the keys of its settings.
    pub fn section(&self, command: &str, keys: &[&[&str]]) -> Result<Table> {
        self.file.section(command, keys)
    }

    /// `flags` layered over the values of `table`.
    pub fn layer<T: Layered>(&self, flags: T, table: &Table, command: &str) -> Result<T> {
        let from_file: T = decode(table.clone(), &format!("[{command}]"))?;
        Ok(flags.or(from_file))
    }
}
