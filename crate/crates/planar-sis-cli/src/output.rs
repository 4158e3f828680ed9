//! Output directory handling: atomic writes, CSV/JSON helpers and the failure list.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// One unit of work that did not converge, was censored, or was rejected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub unit: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub reason: String,
}

impl Failure {
    pub fn new(unit: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            unit: unit.into(),
            field: None,
            reason: reason.into(),
        }
    }
}

/// Bad input detected before any work ran.
#[derive(Debug)]
pub struct UsageError {
    pub field: Option<String>,
    pub reason: String,
}

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.field {
            Some(field) => write!(f, "invalid `{field}`: {}", self.reason),
            None => f.write_str(&self.reason),
        }
    }
}

impl std::error::Error for UsageError {}

pub fn usage(field: &str, reason: impl Into<String>) -> anyhow::Error {
    UsageError {
        field: Some(field.into()),
        reason: reason.into(),
    }
    .into()
}

/// Map library parameter errors to usage errors carrying the field name.
pub fn lib_err(e: planar_sis::error::Error) -> anyhow::Error {
    use planar_sis::error::Error;
    match e {
        Error::InvalidParam { field, reason } => usage(field, reason),
        Error::UnknownSpec(code) => usage("spec", format!("unknown closure code `{code}`")),
        other => UsageError {
            field: None,
            reason: other.to_string(),
        }
        .into(),
    }
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Write through a temporary sibling and rename, so readers never see partial files.
    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let dst = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp{}", std::process::id()));
        fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
        fs::rename(&tmp, &dst).with_context(|| format!("renaming to {}", dst.display()))?;
        Ok(dst)
    }

    pub fn json<T: Serialize + ?Sized>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    /// CSV with an explicit header, for files that may have no rows.
    pub fn csv_with_header<T: Serialize>(&self, name: &str, header: &[&str], rows: &[T]) -> Result<PathBuf> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.serialize(r)?;
        }
        self.write(name, &w.into_inner()?)
    }
}
