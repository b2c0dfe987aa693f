//! CSV tables and JSON documents in the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use qsd_core::State;

use crate::error::{io_error, CliError, CliResult};

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(io_error(root))?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn writer(&self, name: &str) -> CliResult<csv::Writer<fs::File>> {
        let path = self.path(name);
        csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))
    }

    /// Columns `n_1..n_r` and `column`, rows in the given (lexicographic) order.
    pub fn distribution<'a>(
        &self,
        name: &str,
        dim: usize,
        column: &str,
        rows: impl IntoIterator<Item = (&'a State, f64)>,
    ) -> CliResult<()> {
        let path = self.path(name);
        let mut w = self.writer(name)?;
        let mut header: Vec<String> = (1..=dim).map(|i| format!("n_{i}")).collect();
        header.push(column.to_string());
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        for (s, v) in rows {
            let mut rec: Vec<String> = s.coords().iter().map(u64::to_string).collect();
            rec.push(v.to_string());
            w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(io_error(&path))
    }

    /// Columns `t, value` or `t, value, initial`.
    pub fn curve<'a>(
        &self,
        name: &str,
        rows: impl IntoIterator<Item = (f64, f64, Option<&'a State>)>,
    ) -> CliResult<()> {
        let path = self.path(name);
        let mut w = self.writer(name)?;
        let mut rows = rows.into_iter().peekable();
        let labelled = rows.peek().is_some_and(|r| r.2.is_some());
        let header: &[&str] = if labelled {
            &["t", "value", "initial"]
        } else {
            &["t", "value"]
        };
        w.write_record(header).map_err(|e| csv_error(&path, e))?;
        for (t, v, x) in rows {
            let mut rec = vec![t.to_string(), v.to_string()];
            if let Some(x) = x {
                rec.push(x.to_string());
            }
            w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(io_error(&path))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("serializable document");
        text.push('\n');
        fs::write(&path, text).map_err(io_error(&path))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}
