//! Artifact rendering and atomic output.
//!
//! Every artifact opens with a header block naming the tool version, the
//! configuration hash and the seed: `#` comment lines in CSV files and a
//! `header` object in JSON files. Nothing time- or host-dependent is
//! recorded, so a rerun with the same configuration and seed is
//! byte-identical.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, CliResult, Stage};

pub const TOOL: &str = "pdpclust";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Header {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            config_hash,
            seed,
        }
    }

    fn comment_block(&self) -> String {
        format!(
            "# tool: {} {}\n# config_hash: {}\n# seed: {}\n",
            self.tool, self.version, self.config_hash, self.seed
        )
    }
}

/// A rendered output file, relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: PathBuf,
    pub contents: Vec<u8>,
}

/// CSV with the header block, a column row and one line per row.
pub fn csv(name: impl Into<PathBuf>, header: &Header, columns: &[&str], rows: impl IntoIterator<Item = String>) -> Artifact {
    let mut text = header.comment_block();
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        text.push_str(&row);
        text.push('\n');
    }
    Artifact {
        name: name.into(),
        contents: text.into_bytes(),
    }
}

#[derive(Serialize)]
struct WithHeader<'a, T: Serialize> {
    header: &'a Header,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty-printed JSON object whose first key is `header`.
pub fn json<T: Serialize>(name: impl Into<PathBuf>, header: &Header, body: &T) -> CliResult<Artifact> {
    let mut contents = serde_json::to_vec_pretty(&WithHeader { header, body })
        .map_err(|e| CliError::input(Stage::Emit, format!("cannot serialize: {e}")))?;
    contents.push(b'\n');
    Ok(Artifact {
        name: name.into(),
        contents,
    })
}

/// Plain text with the header block as `#` lines.
pub fn text(name: impl Into<PathBuf>, header: &Header, body: &str) -> Artifact {
    let mut s = header.comment_block();
    s.push_str(body);
    Artifact {
        name: name.into(),
        contents: s.into_bytes(),
    }
}

/// Shortest round-trip form of a float, in exponent notation when very
/// small or very large.
#[derive(Debug, Clone, Copy)]
pub struct Num(pub f64);

impl std::fmt::Display for Num {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let a = self.0.abs();
        if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
            write!(f, "{:e}", self.0)
        } else {
            write!(f, "{}", self.0)
        }
    }
}

/// Joins already formatted fields into a CSV row.
pub fn row(fields: &[&dyn std::fmt::Display]) -> String {
    let mut s = String::new();
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        write!(s, "{f}").expect("writing to a String");
    }
    s
}

/// Writes every artifact into `dir`. Each file is first written in full to a
/// temporary file in its destination directory; renames happen only after
/// all of them succeeded, so an error leaves no partial output behind.
pub fn write_all(dir: &Path, artifacts: &[Artifact]) -> CliResult<Vec<PathBuf>> {
    let mut staged = Vec::with_capacity(artifacts.len());
    for a in artifacts {
        let dest = dir.join(&a.name);
        let parent = dest.parent().unwrap_or(dir).to_path_buf();
        std::fs::create_dir_all(&parent).map_err(|e| CliError::io(Stage::Emit, &parent, e))?;
        let mut tmp = tempfile::Builder::new()
            .prefix(".pdpclust-")
            .suffix(".tmp")
            .tempfile_in(&parent)
            .map_err(|e| CliError::io(Stage::Emit, &parent, e))?;
        tmp.write_all(&a.contents)
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| CliError::io(Stage::Emit, &dest, e))?;
        staged.push((tmp, dest));
    }
    let mut written = Vec::with_capacity(staged.len());
    for (tmp, dest) in staged {
        tmp.persist(&dest).map_err(|e| CliError::io(Stage::Emit, &dest, e.error))?;
        written.push(dest);
    }
    Ok(written)
}
