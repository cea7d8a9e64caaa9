use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use phasered::io::{csv_table, write_atomic};
use phasered::Tolerance;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::CliError;

/// Collects the files a command writes, so the manifest can list them.
pub struct Artifacts {
    dir: PathBuf,
    format: Format,
    files: Vec<String>,
    tolerances: BTreeMap<String, Tolerance>,
}

impl Artifacts {
    pub fn new(dir: &Path, format: Format) -> Self {
        Self {
            dir: dir.to_path_buf(),
            format,
            files: vec![],
            tolerances: BTreeMap::new(),
        }
    }

    fn write(&mut self, name: String, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(&name);
        write_atomic(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name);
        Ok(())
    }

    /// Numeric table as `<stem>.csv` or `<stem>.json` depending on the format.
    pub fn table<R: AsRef<[f64]>>(&mut self, stem: &str, columns: &[String], rows: &[R]) -> Result<(), CliError> {
        match self.format {
            Format::Csv => self.write(format!("{stem}.csv"), csv_table(columns, rows).as_bytes()),
            Format::Json => {
                let rows: Vec<&[f64]> = rows.iter().map(AsRef::as_ref).collect();
                let value = json!({ "columns": columns, "rows": rows });
                self.json(stem, &value)
            }
        }
    }

    pub fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        self.write(format!("{stem}.json"), text.as_bytes())
    }

    pub fn tolerance(&mut self, name: &str, tol: Tolerance) {
        self.tolerances.insert(name.to_string(), tol);
    }

    pub fn finish(mut self, command: &str, config_path: &Path, config_text: &str, seed: u64) -> Result<(), CliError> {
        let digest = Sha256::digest(config_text.as_bytes());
        let hash: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        let manifest: Value = json!({
            "command": command,
            "rerun": format!(
                "phasered {command} --config {} --seed {seed} --format {}",
                config_path.display(),
                self.format_name()
            ),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": seed,
            "format": self.format,
            "config_sha256": hash,
            "config": config_text,
            "tolerances": self.tolerances,
            "outputs": self.files,
        });
        self.write("manifest.json".into(), format!("{}\n", serde_json::to_string_pretty(&manifest).unwrap_or_default()).as_bytes())?;
        self.files.pop();
        Ok(())
    }

    fn format_name(&self) -> &'static str {
        match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

pub fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `prefix1, prefix2, ...`
pub fn indexed(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}{i}"))
}
