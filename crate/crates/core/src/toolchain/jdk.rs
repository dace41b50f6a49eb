//! javac + JUnitCore + JaCoCo, driven as subprocesses.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::parse::{parse_jacoco_xml, parse_javac_output, parse_junit_output};
use super::process::{run_with_timeout, RunError};
use super::{
    declared_test_methods, CompileResult, CoverageReport, RunRecord, TestRunResult, TestUnit, Toolchain,
    ToolchainError, Workspace,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JdkConfig {
    /// Falls back to `JAVA_HOME`, then to `PATH`.
    pub java_home: Option<PathBuf>,
    /// JUnit 4 and Hamcrest jars.
    pub junit_classpath: Vec<PathBuf>,
    pub jacoco_agent: Option<PathBuf>,
    pub jacoco_cli: Option<PathBuf>,
    /// Compiled project classes and their dependencies.
    pub project_classpath: Vec<PathBuf>,
    /// Class files handed to the coverage report; defaults to the first
    /// directory on the project classpath.
    pub project_classes: Option<PathBuf>,
    /// Passed as `-source`/`-target`; empty to use the compiler default.
    pub release: String,
    pub compile_timeout_secs: u64,
    pub run_timeout_secs: u64,
}

impl Default for JdkConfig {
    fn default() -> Self {
        Self {
            java_home: None,
            junit_classpath: vec![],
            jacoco_agent: None,
            jacoco_cli: None,
            project_classpath: vec![],
            project_classes: None,
            release: "8".into(),
            compile_timeout_secs: 60,
            run_timeout_secs: 120,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JdkToolchain {
    cfg: JdkConfig,
    javac: Option<PathBuf>,
    java: Option<PathBuf>,
    compile_budget: Duration,
    run_budget: Duration,
}

fn find_on_path(exe: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|d| d.join(exe)).find(|p| p.is_file())
}

pub(crate) fn locate(home: Option<&Path>, exe: &str) -> Option<PathBuf> {
    match home {
        Some(h) => Some(h.join("bin").join(exe)).filter(|p| p.is_file()),
        None => find_on_path(exe),
    }
}

impl JdkToolchain {
    /// Resolves tool paths without requiring them; missing tools surface
    /// as `ToolchainMissing` when first used.
    pub fn new(cfg: JdkConfig) -> Self {
        let home = cfg.java_home.clone().or_else(|| std::env::var_os("JAVA_HOME").map(PathBuf::from));
        Self {
            compile_budget: Duration::from_secs(cfg.compile_timeout_secs),
            run_budget: Duration::from_secs(cfg.run_timeout_secs),
            javac: locate(home.as_deref(), "javac"),
            java: locate(home.as_deref(), "java"),
            cfg,
        }
    }

    /// Like [`JdkToolchain::new`] but fails unless javac, java and the
    /// JUnit jars are all present.
    pub fn discover(cfg: JdkConfig) -> Result<Self, ToolchainError> {
        let tc = Self::new(cfg);
        tc.javac()?;
        tc.java_bin()?;
        if tc.cfg.junit_classpath.is_empty() {
            return Err(ToolchainError::ToolchainMissing("JUnit 4 jar not configured".into()));
        }
        if let Some(missing) = tc.cfg.junit_classpath.iter().find(|p| !p.exists()) {
            return Err(ToolchainError::ToolchainMissing(missing.display().to_string()));
        }
        Ok(tc)
    }

    fn javac(&self) -> Result<&Path, ToolchainError> {
        self.javac.as_deref().ok_or_else(|| ToolchainError::ToolchainMissing("javac".into()))
    }

    fn java_bin(&self) -> Result<&Path, ToolchainError> {
        self.java.as_deref().ok_or_else(|| ToolchainError::ToolchainMissing("java".into()))
    }

    pub fn with_compile_budget(mut self, budget: Duration) -> Self {
        self.compile_budget = budget;
        self
    }

    pub fn config(&self) -> &JdkConfig {
        &self.cfg
    }

    fn classpath(&self, ws: Option<&Workspace>) -> OsString {
        let entries = ws
            .map(Workspace::classes_dir)
            .into_iter()
            .chain(self.cfg.project_classpath.iter().cloned())
            .chain(self.cfg.junit_classpath.iter().cloned());
        std::env::join_paths(entries).unwrap_or_default()
    }

    fn junit_command(&self, unit: &TestUnit, ws: &Workspace, agent: Option<String>) -> Result<Command, ToolchainError> {
        let mut cmd = Command::new(self.java_bin()?);
        if let Some(a) = agent {
            cmd.arg(a);
        }
        cmd.arg("-cp")
            .arg(self.classpath(Some(ws)))
            .arg("org.junit.runner.JUnitCore")
            .arg(unit.qualified_name())
            .current_dir(&ws.dir);
        Ok(cmd)
    }

    fn run_junit(&self, cmd: Command) -> Result<String, ToolchainError> {
        match run_with_timeout(cmd, self.run_budget) {
            Ok(c) => Ok(c.stdout),
            Err(RunError::TimedOut) => Err(ToolchainError::RunTimeout(self.run_budget)),
            Err(RunError::Spawn(e)) => Err(ToolchainError::ToolchainMissing(format!("java: {e}"))),
        }
    }
}

impl Toolchain for JdkToolchain {
    fn compile(&self, unit: &TestUnit, ws: &Workspace) -> Result<CompileResult, ToolchainError> {
        if self.compile_budget.is_zero() {
            return Err(ToolchainError::CompileTimeout(self.compile_budget));
        }
        let started = Instant::now();
        let path = ws.write_source(unit)?;
        let mut cmd = Command::new(self.javac()?);
        cmd.arg("-d").arg(ws.classes_dir()).arg("-cp").arg(self.classpath(Some(ws))).args([
            "-encoding",
            "UTF-8",
            "-nowarn",
        ]);
        if !self.cfg.release.is_empty() {
            cmd.args(["-source", &self.cfg.release, "-target", &self.cfg.release]);
        }
        cmd.arg(&path).current_dir(&ws.dir);
        let out = match run_with_timeout(cmd, self.compile_budget) {
            Ok(c) => c,
            Err(RunError::TimedOut) => return Err(ToolchainError::CompileTimeout(self.compile_budget)),
            Err(RunError::Spawn(e)) => return Err(ToolchainError::ToolchainMissing(format!("javac: {e}"))),
        };
        let mut result = CompileResult::from_diagnostics(parse_javac_output(&out.stderr));
        if result.success && out.status != Some(0) {
            // javac failed without a parseable record, e.g. a bad flag.
            let msg = out.stderr.lines().next().unwrap_or("javac failed").to_string();
            result = CompileResult::from_diagnostics(vec![super::Diagnostic::error(unit.file_name(), 0, msg)]);
        }
        ws.log(&RunRecord {
            stage: "compile",
            test_class: &unit.class_name,
            ok: result.success,
            summary: format!("{} error(s)", result.errors().count()),
            elapsed_ms: started.elapsed().as_millis(),
        })?;
        Ok(result)
    }

    fn run_tests(&self, unit: &TestUnit, ws: &Workspace) -> Result<TestRunResult, ToolchainError> {
        let started = Instant::now();
        let stdout = self.run_junit(self.junit_command(unit, ws, None)?)?;
        let result = parse_junit_output(&stdout, &declared_test_methods(&unit.source))?;
        ws.log(&RunRecord {
            stage: "run",
            test_class: &unit.class_name,
            ok: result.all_passed(),
            summary: format!("{}/{} passed", result.passed_count(), result.outcomes.len()),
            elapsed_ms: started.elapsed().as_millis(),
        })?;
        Ok(result)
    }

    fn measure_coverage(
        &self,
        unit: &TestUnit,
        focal_signatures: &[String],
        ws: &Workspace,
    ) -> Result<CoverageReport, ToolchainError> {
        let agent = self
            .cfg
            .jacoco_agent
            .as_ref()
            .filter(|p| p.is_file())
            .ok_or_else(|| ToolchainError::AgentMissing("jacoco agent jar".into()))?;
        let cli = self
            .cfg
            .jacoco_cli
            .as_ref()
            .filter(|p| p.is_file())
            .ok_or_else(|| ToolchainError::AgentMissing("jacoco cli jar".into()))?;
        let classes = self
            .cfg
            .project_classes
            .clone()
            .or_else(|| self.cfg.project_classpath.iter().find(|p| p.is_dir()).cloned())
            .ok_or_else(|| ToolchainError::ToolchainMissing("project class directory".into()))?;
        let started = Instant::now();
        let exec = ws.dir.join("jacoco.exec");
        let xml = ws.dir.join("jacoco.xml");
        let _ = std::fs::remove_file(&exec);
        let _ = std::fs::remove_file(&xml);

        let mut owners: Vec<&str> = focal_signatures.iter().filter_map(|s| s.split_once('#').map(|(c, _)| c)).collect();
        owners.sort_unstable();
        owners.dedup();
        let agent_arg =
            format!("-javaagent:{}=destfile={},includes={}", agent.display(), exec.display(), owners.join(":"));
        self.run_junit(self.junit_command(unit, ws, Some(agent_arg))?)?;

        let mut report = Command::new(self.java_bin()?);
        report
            .arg("-jar")
            .arg(cli)
            .arg("report")
            .arg(&exec)
            .arg("--classfiles")
            .arg(&classes)
            .arg("--xml")
            .arg(&xml)
            .current_dir(&ws.dir);
        match run_with_timeout(report, self.run_budget) {
            Ok(c) if c.status == Some(0) => {}
            Ok(c) => {
                return Err(ToolchainError::MalformedReport(c.stderr.lines().take(3).collect::<Vec<_>>().join(" ")))
            }
            Err(RunError::TimedOut) => return Err(ToolchainError::RunTimeout(self.run_budget)),
            Err(RunError::Spawn(e)) => return Err(ToolchainError::ToolchainMissing(format!("java: {e}"))),
        }
        let text = std::fs::read_to_string(&xml)?;
        let selected = CoverageReport::select(&parse_jacoco_xml(&text)?, focal_signatures);
        ws.log(&RunRecord {
            stage: "coverage",
            test_class: &unit.class_name,
            ok: selected.unmatched.is_empty(),
            summary: format!("{} method(s)", selected.methods.len()),
            elapsed_ms: started.elapsed().as_millis(),
        })?;
        Ok(selected)
    }
}
