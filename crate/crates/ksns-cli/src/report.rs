use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::CliError;

/// Floats in every output file: 17 significant digits, so values round-trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One measured quantity against its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance condition, e.g. `<= 1e-8`.
    pub limit: String,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit: format!("<= {limit:e}"), pass: value <= limit }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit: format!(">= {limit:e}"), pass: value >= limit }
    }

    pub fn below(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), value, limit: format!("< {limit:e}"), pass: value < limit }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit: format!("{target} +/- {tol:e}"),
            pass: (value - target).abs() <= tol,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self { name: name.into(), value: if ok { 1.0 } else { 0.0 }, limit: "== 1".into(), pass: ok }
    }
}

/// A titled list of checks with free-form notes.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub seconds: f64,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), ..Self::default() }
    }

    pub fn push(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn extend(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.notes.extend(other.notes);
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "== {} ==", self.title);
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag}  {:<w$}  {:>24}  {}", c.name, fmt_f64(c.value), c.limit);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "time: {:.3} s", self.seconds);
        s
    }
}

/// Times a report-producing closure.
pub fn timed(f: impl FnOnce() -> Result<Report, CliError>) -> Result<Report, CliError> {
    let start = Instant::now();
    let mut r = f()?;
    r.seconds = start.elapsed().as_secs_f64();
    Ok(r)
}

pub fn write_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let mut out = String::with_capacity(4096);
    out.push_str(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| CliError::Io(path.display().to_string(), e))
}

/// Appends rows, writing the header first if the file is new or empty.
pub fn append_csv(path: &Path, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), CliError> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::Io(path.display().to_string(), e))?;
    let mut out = String::new();
    if fresh {
        out.push_str(header);
        out.push('\n');
    }
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    f.write_all(out.as_bytes()).map_err(|e| CliError::Io(path.display().to_string(), e))
}

pub fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// `manifest.txt`: config hash, tool version, wall times and the check summary.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    pub config_sha256: String,
    pub started: f64,
    pub finished: f64,
    pub reports: Vec<Report>,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = ksns {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(s, "command = {}", self.command);
        let _ = writeln!(s, "config_sha256 = {}", self.config_sha256);
        let _ = writeln!(s, "started_unix = {:.3}", self.started);
        let _ = writeln!(s, "finished_unix = {:.3}", self.finished);
        let _ = writeln!(s, "wall_seconds = {:.3}", self.finished - self.started);
        for r in &self.reports {
            let _ = writeln!(s, "[{}]", r.title);
            let _ = writeln!(s, "status = {}", if r.passed() { "pass" } else { "fail" });
            let _ = writeln!(s, "seconds = {:.3}", r.seconds);
            for c in &r.checks {
                let _ = writeln!(s, "{} = {} {} {}", c.name, if c.pass { "pass" } else { "fail" }, fmt_f64(c.value), c.limit);
            }
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let p = dir.join("manifest.txt");
        std::fs::write(&p, self.render()).map_err(|e| CliError::Io(p.display().to_string(), e))
    }
}
