//! Compile, run and coverage adapters, plus deterministic source fixes for
//! model-written tests.

mod fixes;
pub(crate) mod jdk;
mod parse;
pub(crate) mod process;
mod simulated;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use fixes::{apply_lightweight_fixes, declared_test_methods, ImportTable};
pub use jdk::{JdkConfig, JdkToolchain};
pub use parse::{parse_jacoco_xml, parse_javac_output, parse_junit_output, signature_from_descriptor};
pub use simulated::SimulatedToolchain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticKind {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: usize,
    pub message: String,
    pub kind: DiagnosticKind,
    /// Continuation lines such as `symbol:` and `location:`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub detail: Vec<String>,
}

impl Diagnostic {
    pub fn error(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Self { file: file.into(), line, message: message.into(), kind: DiagnosticKind::Error, detail: vec![] }
    }

    pub fn header(&self) -> String {
        let kind = match self.kind {
            DiagnosticKind::Error => "error",
            DiagnosticKind::Warning => "warning",
        };
        format!("{}:{}: {kind}: {}", self.file, self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompileResult {
    pub success: bool,
    pub diagnostics: Vec<Diagnostic>,
}

impl CompileResult {
    /// Success is defined by the absence of error diagnostics.
    pub fn from_diagnostics(diagnostics: Vec<Diagnostic>) -> Self {
        let success = !diagnostics.iter().any(|d| d.kind == DiagnosticKind::Error);
        Self { success, diagnostics }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(|d| d.kind == DiagnosticKind::Error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestOutcome {
    Passed,
    AssertionFailure,
    RuntimeException,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestFailure {
    pub test_name: String,
    pub exception_type: String,
    pub message: String,
    pub first_frame: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TestRunResult {
    pub outcomes: BTreeMap<String, TestOutcome>,
    pub failures: Vec<TestFailure>,
}

impl TestRunResult {
    pub fn all_passed(&self) -> bool {
        !self.outcomes.is_empty() && self.outcomes.values().all(|o| *o == TestOutcome::Passed)
    }

    pub fn passed_count(&self) -> usize {
        self.outcomes.values().filter(|o| **o == TestOutcome::Passed).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MethodCoverage {
    pub branches_covered: u32,
    pub branches_total: u32,
    pub lines_covered: u32,
    pub lines_total: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CoverageReport {
    pub methods: BTreeMap<String, MethodCoverage>,
    /// Requested signatures with no entry in the report; they carry zeroes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unmatched: Vec<String>,
}

impl CoverageReport {
    /// Restricts a full report to the requested signatures.
    pub fn select(all: &BTreeMap<String, MethodCoverage>, signatures: &[String]) -> Self {
        let mut report = Self::default();
        for sig in signatures {
            match all.get(sig) {
                Some(c) => {
                    report.methods.insert(sig.clone(), *c);
                }
                None => {
                    log::warn!("no coverage entry for {sig}");
                    report.methods.insert(sig.clone(), MethodCoverage::default());
                    report.unmatched.push(sig.clone());
                }
            }
        }
        report
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ToolchainError {
    #[error("toolchain component missing: {0}")]
    ToolchainMissing(String),
    #[error("compilation exceeded {0:?}")]
    CompileTimeout(Duration),
    #[error("test run exceeded {0:?}")]
    RunTimeout(Duration),
    #[error("test runner crashed: {0}")]
    RunnerCrash(String),
    #[error("coverage agent missing: {0}")]
    AgentMissing(String),
    #[error("malformed coverage report: {0}")]
    MalformedReport(String),
    #[error("workspace i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for ToolchainError {
    fn from(e: std::io::Error) -> Self {
        ToolchainError::Io(e.to_string())
    }
}

/// A generated test class, written to `<class_name>.java`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestUnit {
    pub class_name: String,
    pub package: Option<String>,
    pub source: String,
}

impl TestUnit {
    pub fn qualified_name(&self) -> String {
        match &self.package {
            Some(p) => format!("{p}.{}", self.class_name),
            None => self.class_name.clone(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}.java", self.class_name)
    }
}

/// Per-session scratch directory. Sources and classes of generated tests
/// live here, never in the project under test.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord<'a> {
    pub stage: &'a str,
    pub test_class: &'a str,
    pub ok: bool,
    pub summary: String,
    pub elapsed_ms: u128,
}

impl Workspace {
    pub fn create(root: &Path, session_id: &str) -> Result<Self, ToolchainError> {
        let dir = root.join(session_id);
        std::fs::create_dir_all(dir.join("src"))?;
        std::fs::create_dir_all(dir.join("classes"))?;
        Ok(Self { dir })
    }

    pub fn src_dir(&self) -> PathBuf {
        self.dir.join("src")
    }

    pub fn classes_dir(&self) -> PathBuf {
        self.dir.join("classes")
    }

    /// Writes the unit under `src/<package path>/` and returns the path.
    pub fn write_source(&self, unit: &TestUnit) -> Result<PathBuf, ToolchainError> {
        let mut dir = self.src_dir();
        if let Some(p) = &unit.package {
            dir.extend(p.split('.'));
        }
        std::fs::create_dir_all(&dir)?;
        let path = dir.join(unit.file_name());
        std::fs::write(&path, &unit.source)?;
        Ok(path)
    }

    /// Appends one record to `runs.ndjson`.
    pub fn log(&self, record: &RunRecord<'_>) -> Result<(), ToolchainError> {
        let mut f = std::fs::OpenOptions::new().create(true).append(true).open(self.dir.join("runs.ndjson"))?;
        let line = serde_json::to_string(record).map_err(|e| ToolchainError::Io(e.to_string()))?;
        writeln!(f, "{line}")?;
        Ok(())
    }
}

pub trait Toolchain: Send + Sync {
    fn compile(&self, unit: &TestUnit, ws: &Workspace) -> Result<CompileResult, ToolchainError>;

    fn run_tests(&self, unit: &TestUnit, ws: &Workspace) -> Result<TestRunResult, ToolchainError>;

    /// Runs the tests under the coverage agent and reports the given
    /// canonical signatures.
    fn measure_coverage(
        &self,
        unit: &TestUnit,
        focal_signatures: &[String],
        ws: &Workspace,
    ) -> Result<CoverageReport, ToolchainError>;
}

impl<T: Toolchain + ?Sized> Toolchain for std::sync::Arc<T> {
    fn compile(&self, unit: &TestUnit, ws: &Workspace) -> Result<CompileResult, ToolchainError> {
        (**self).compile(unit, ws)
    }
    fn run_tests(&self, unit: &TestUnit, ws: &Workspace) -> Result<TestRunResult, ToolchainError> {
        (**self).run_tests(unit, ws)
    }
    fn measure_coverage(
        &self,
        unit: &TestUnit,
        sigs: &[String],
        ws: &Workspace,
    ) -> Result<CoverageReport, ToolchainError> {
        (**self).measure_coverage(unit, sigs, ws)
    }
}

pub const MAX_PROMPT_ERRORS: usize = 5;
pub const MAX_PROMPT_CHARS: usize = 2000;

/// Renders at most five error records within 2000 characters. A record that
/// does not fit whole keeps its `file:line` header when that alone fits.
pub fn format_diagnostics(diagnostics: &[Diagnostic]) -> String {
    let blocks: Vec<(String, String)> = diagnostics
        .iter()
        .filter(|d| d.kind == DiagnosticKind::Error)
        .take(MAX_PROMPT_ERRORS)
        .map(|d| {
            let mut body = String::new();
            for line in &d.detail {
                body.push('\n');
                body.push_str(line);
            }
            (d.header(), body)
        })
        .collect();
    pack_blocks(&blocks)
}

/// Runtime failures in the same bounded shape as compiler diagnostics.
pub fn format_failures(failures: &[TestFailure]) -> String {
    let blocks: Vec<(String, String)> = failures
        .iter()
        .take(MAX_PROMPT_ERRORS)
        .map(|f| {
            let head = format!("{}: {}", f.test_name, f.exception_type);
            let mut body = String::new();
            if !f.message.is_empty() {
                body.push_str(&format!("\n  message: {}", f.message));
            }
            if let Some(frame) = &f.first_frame {
                body.push_str(&format!("\n  at {frame}"));
            }
            (head, body)
        })
        .collect();
    pack_blocks(&blocks)
}

fn pack_blocks(blocks: &[(String, String)]) -> String {
    let mut out = String::new();
    for (header, body) in blocks {
        let sep = usize::from(!out.is_empty());
        let room = MAX_PROMPT_CHARS.saturating_sub(out.chars().count() + sep);
        let whole = header.chars().count() + body.chars().count();
        if whole <= room {
            if sep == 1 {
                out.push('\n');
            }
            out.push_str(header);
            out.push_str(body);
        } else {
            if room > 0 {
                if sep == 1 {
                    out.push('\n');
                }
                let mut text = header.clone();
                text.push_str(body);
                out.extend(text.chars().take(room));
            }
            break;
        }
    }
    out
}

/// `<FocalClass>_<method>_Test`, or `<FocalClass>_<method>_<n>_Test` for the
/// n-th later method with the same class and name.
pub fn test_class_name(focal_class: &str, method: &str, ordinal: usize) -> String {
    let class = focal_class.replace('$', "_");
    if ordinal == 0 {
        format!("{class}_{method}_Test")
    } else {
        format!("{class}_{method}_{ordinal}_Test")
    }
}
