//! Columnar text artifacts with a self-describing header.
//!
//! Header lines start with `#`. Lines starting with `# timing` carry wall
//! times and are the only lines that differ between identical runs.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use sha2::{Digest, Sha256};

use faddeev::units::ConstantsRecord;

use crate::CliError;

/// Run-wide metadata shared by every artifact of one invocation.
#[derive(Debug, Clone)]
pub struct RunHeader {
    pub subcommand: String,
    pub config_hash: String,
    pub notes: Vec<(String, String)>,
    pub timings: Vec<(String, Duration)>,
}

pub fn config_hash(echo: &str) -> String {
    let digest = Sha256::digest(echo.as_bytes());
    digest.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

impl RunHeader {
    pub fn new(subcommand: &str, echo: &str) -> Self {
        Self { subcommand: subcommand.into(), config_hash: config_hash(echo), notes: Vec::new(), timings: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push((key.into(), value.to_string()));
    }

    pub fn time(&mut self, stage: &str, d: Duration) {
        self.timings.push((stage.into(), d));
    }

    fn render(&self, title: &str, columns: &[&str]) -> String {
        let c = ConstantsRecord::current();
        let mut s = String::new();
        let _ = writeln!(s, "# {title}");
        let _ = writeln!(s, "# program: faddeev {} ({})", env!("CARGO_PKG_VERSION"), self.subcommand);
        let _ = writeln!(s, "# config_sha256: {}", self.config_hash);
        let _ = writeln!(
            s,
            "# constants: {} hbar={:e} J s, k_B={:e} J/K, Da={:e} kg, a0={:e} m, hbar^2/(Da a0^2 k_B)={:.10} K",
            c.revision, c.hbar_j_s, c.boltzmann_j_per_k, c.dalton_kg, c.bohr_m, c.kappa_kelvin
        );
        for (k, v) in &self.notes {
            let _ = writeln!(s, "# {k}: {v}");
        }
        for (k, d) in &self.timings {
            let _ = writeln!(s, "# timing {k}: {:.3} s", d.as_secs_f64());
        }
        let _ = writeln!(s, "# columns: {}", columns.join(" "));
        s
    }
}

/// One table: column names carry units in brackets, e.g. `energy[K]`.
pub struct Table {
    pub title: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub extra: Vec<(String, String)>,
}

impl Table {
    pub fn new(title: &str, columns: &[&'static str]) -> Self {
        Self { title: title.into(), columns: columns.to_vec(), rows: Vec::new(), extra: Vec::new() }
    }

    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.extra.push((key.into(), value.to_string()));
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write(&self, dir: &Path, file: &str, header: &RunHeader) -> Result<PathBuf, CliError> {
        let mut text = header.render(&self.title, &self.columns);
        // table-specific notes sit just above the column line
        if !self.extra.is_empty() {
            let cut = text.rfind("# columns:").unwrap_or(text.len());
            let mut notes = String::new();
            for (k, v) in &self.extra {
                let _ = writeln!(notes, "# {k}: {v}");
            }
            text.insert_str(cut, &notes);
        }
        for row in &self.rows {
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        let path = dir.join(file);
        std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Fixed-format float for tables.
pub fn f(x: f64) -> String {
    format!("{x:.10e}")
}

pub fn i(x: impl std::fmt::Display) -> String {
    x.to_string()
}
