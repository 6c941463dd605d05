//! Run reports and their CSV/summary emission.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone)]
pub struct CsvTable {
    pub name: String,
    pub header: String,
    pub rows: Vec<String>,
}

/// Everything one scenario run produced: metrics, per-criterion outcomes and
/// CSV tables, stamped with config hash and seed for reproducibility.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: String,
    pub config_hash: u64,
    pub seed: u64,
    pub metrics: Vec<(String, f64)>,
    pub criteria: Vec<CriterionResult>,
    pub tables: Vec<CsvTable>,
}

impl RunReport {
    pub fn new(scenario: impl Into<String>, config_hash: u64, seed: u64) -> Self {
        Self {
            scenario: scenario.into(),
            config_hash,
            seed,
            metrics: Vec::new(),
            criteria: Vec::new(),
            tables: Vec::new(),
        }
    }

    pub fn add_metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push((name.into(), value));
    }

    /// Record a pass/fail criterion where lower is better.
    pub fn add_criterion_max(&mut self, name: impl Into<String>, value: f64, threshold: f64) {
        self.criteria.push(CriterionResult {
            name: name.into(),
            passed: value <= threshold,
            value,
            threshold,
        });
    }

    /// Record a boolean criterion.
    pub fn add_criterion_flag(&mut self, name: impl Into<String>, ok: bool) {
        self.criteria.push(CriterionResult {
            name: name.into(),
            passed: ok,
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
        });
    }

    pub fn add_table(&mut self, name: impl Into<String>, header: impl Into<String>, rows: Vec<String>) {
        self.tables.push(CsvTable { name: name.into(), header: header.into(), rows });
    }

    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    /// First failed criterion, if any.
    pub fn first_failure(&self) -> Option<&CriterionResult> {
        self.criteria.iter().find(|c| !c.passed)
    }
}

/// Write the report as a CSV set plus a key=value summary. Returns the paths
/// written. Output is byte-reproducible for identical runs apart from the
/// version-stamp line.
pub fn emit_outputs(report: &RunReport, out_dir: &Path) -> io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let version = env!("CARGO_PKG_VERSION");
    let mut written = Vec::new();
    for table in &report.tables {
        let path = out_dir.join(format!("{}_{}.csv", report.scenario, table.name));
        let mut f = std::fs::File::create(&path)?;
        writeln!(f, "# version={version}")?;
        writeln!(f, "{}", table.header)?;
        for row in &table.rows {
            writeln!(f, "{row}")?;
        }
        written.push(path);
    }
    let path = out_dir.join(format!("{}_summary.txt", report.scenario));
    let mut f = std::fs::File::create(&path)?;
    writeln!(f, "# version={version}")?;
    writeln!(f, "scenario = {}", report.scenario)?;
    writeln!(f, "config_hash = {:016x}", report.config_hash)?;
    writeln!(f, "seed = {}", report.seed)?;
    writeln!(f, "passed = {}", report.passed())?;
    if let Some(fail) = report.first_failure() {
        writeln!(f, "first_failure = {}", fail.name)?;
    }
    for (name, value) in &report.metrics {
        writeln!(f, "metric.{name} = {value:.12e}")?;
    }
    for c in &report.criteria {
        writeln!(
            f,
            "criterion.{} = {} (value {:.6e}, threshold {:.6e})",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.value,
            c.threshold
        )?;
    }
    written.push(path);
    Ok(written)
}
