//! Deterministic output plumbing: fixed-precision decimal formatting and
//! atomic file writes (temp file + rename).

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Plain-decimal rendering with 12 significant digits. Integer-valued
/// columns are printed exactly elsewhere; this is for real-valued ones.
pub fn sig12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (11 - mag).clamp(0, 40) as usize;
    format!("{x:.decimals$}")
}

/// Where a command's primary artifact goes.
pub enum Sink {
    Stdout,
    File(PathBuf),
}

impl Sink {
    pub fn from_opt(path: Option<PathBuf>) -> Self {
        match path {
            Some(p) => Sink::File(p),
            None => Sink::Stdout,
        }
    }

    pub fn is_stdout(&self) -> bool {
        matches!(self, Sink::Stdout)
    }

    pub fn write(&self, content: &str) -> std::io::Result<()> {
        match self {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(content.as_bytes())?;
                out.flush()
            }
            Sink::File(path) => write_atomic(path, content.as_bytes()),
        }
    }
}

/// Writes through a sibling temp file and renames over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    let tmp = path.with_file_name(name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}
