use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use predmarket::export::{schema_markdown, TableSchema};
use serde::Serialize;

use crate::CliError;

/// An output directory; every file written through it is listed for the
/// final report.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn file(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| {
                CliError::Runtime(format!("cannot create {}: {e}", parent.display()))
            })?;
        }
        let file = File::create(&path)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut f = self.file(name)?;
        f.write_all(body.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| CliError::Runtime(format!("cannot write {name}: {e}")))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let body =
            serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.text(name, &(body + "\n"))
    }

    pub fn schema(&mut self, tables: &[&TableSchema]) -> Result<(), CliError> {
        self.text("schema.md", &schema_markdown(tables))
    }

    /// Writes rows of serializable tuples under a header.
    pub fn csv<R: Serialize>(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = R>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(self.file(name)?);
        let io = |e: csv::Error| CliError::Runtime(format!("{name}: {e}"));
        w.write_record(header).map_err(io)?;
        for row in rows {
            w.serialize(row).map_err(io)?;
        }
        w.flush()
            .map_err(|e| CliError::Runtime(format!("{name}: {e}")))
    }
}
