//! JSON run report.
//!
//! Schema (`format_version` 1):
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "config":      <validated configuration echo, without the output path>,
//!   "statistics":  [ { "index", "name", "verdict", "replicas", "failures",
//!                      "summary", "files", "error" } ... ],
//!   "verdict":     "pass" | "fail" | "error",
//!   "exit_code":   0 | 2 | 1,
//!   "runtime":     { "started_unix_ms", "elapsed_ms", "threads", "output_dir" }
//! }
//! ```
//!
//! Everything except `runtime` is a deterministic function of the config and seed.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::error::Result;

pub const FORMAT_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::Error => 1,
        }
    }

    pub fn from_pass(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticOutcome {
    pub index: usize,
    pub name: String,
    pub verdict: Verdict,
    pub replicas: usize,
    pub failures: usize,
    pub summary: serde_json::Value,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Runtime {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub threads: usize,
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub statistics: Vec<StatisticOutcome>,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub runtime: Runtime,
}

impl Report {
    pub fn new(config: &ExperimentConfig, statistics: Vec<StatisticOutcome>, runtime: Runtime) -> Result<Self> {
        // errors outrank failures, failures outrank passes
        let verdict = statistics.iter().map(|s| s.verdict).max().unwrap_or(Verdict::Pass);
        Ok(Self {
            format_version: FORMAT_VERSION,
            config: serde_json::to_value(config)?,
            statistics,
            verdict,
            exit_code: verdict.exit_code(),
            runtime,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(REPORT_FILE), text)?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(REPORT_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// The report as JSON with `runtime` removed, for reproducibility checks.
    pub fn deterministic_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("runtime");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Plain-text table of the verdicts.
    pub fn render(&self) -> String {
        let mut s = format!(
            "report format {} | seed {} | overall {:?} (exit {})\n",
            self.format_version,
            self.config.get("seed").map_or("?".into(), |v| v.to_string()),
            self.verdict,
            self.exit_code
        );
        for st in &self.statistics {
            s.push_str(&format!(
                "  [{:>2}] {:<22} {:<6} replicas {:>6}  failures {:>3}",
                st.index,
                st.name,
                format!("{:?}", st.verdict).to_lowercase(),
                st.replicas,
                st.failures
            ));
            if let Some(e) = &st.error {
                s.push_str(&format!("  error: {e}"));
            }
            s.push('\n');
            for f in &st.files {
                s.push_str(&format!("         {f}\n"));
            }
        }
        s
    }
}
