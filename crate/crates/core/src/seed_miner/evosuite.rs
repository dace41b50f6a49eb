//! EvoSuite runs and ingestion of the tests it writes.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::code_model::{parse_compilation_unit, ClassKind, FieldDecl, MethodInfo, ParseError, SourceClass};
use crate::java;
use crate::toolchain::jdk::locate;
use crate::toolchain::process::{run_with_timeout, RunError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvoSuiteTestClass {
    pub name: String,
    pub kind: ClassKind,
    pub content: String,
    pub fields: Vec<FieldDecl>,
    pub test_methods: Vec<MethodInfo>,
    pub path: PathBuf,
}

impl EvoSuiteTestClass {
    /// Keeps the `@Test` methods of a parsed test class.
    pub fn from_source_class(cls: SourceClass) -> Self {
        let test_methods = cls.methods.into_iter().filter(|m| m.has_annotation("Test")).collect();
        Self { name: cls.name, kind: cls.kind, content: cls.content, fields: cls.fields, test_methods, path: cls.path }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoSuiteConfig {
    pub jar: Option<PathBuf>,
    pub search_budget_secs: u64,
    /// Generated tests land here, one directory per target class.
    pub output_dir: PathBuf,
    /// JDK 8 home; falls back to `JAVA_HOME`, then `PATH`.
    pub java_home: Option<PathBuf>,
    pub project_classpath: Vec<PathBuf>,
    /// Wall-clock allowance on top of the search budget.
    pub overhead_secs: u64,
}

impl Default for EvoSuiteConfig {
    fn default() -> Self {
        Self {
            jar: None,
            search_budget_secs: 60,
            output_dir: PathBuf::from("evosuite-tests"),
            java_home: None,
            project_classpath: vec![],
            overhead_secs: 120,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvoSuiteError {
    #[error("EvoSuite is not available: {0}")]
    ToolMissing(String),
    #[error("EvoSuite exceeded its {0:?} budget")]
    GenerationTimeout(Duration),
    #[error("EvoSuite failed: {0}")]
    GenerationFailure(String),
    #[error("cannot read generated tests: {0}")]
    Io(#[from] std::io::Error),
}

fn excerpt(text: &str) -> String {
    let text = text.trim();
    let cut = text.char_indices().rev().nth(1999).map(|(i, _)| i).unwrap_or(0);
    text[cut..].to_string()
}

/// Generates tests for `target` and parses them.
///
/// Configuration is checked before anything is spawned. Interfaces and
/// abstract classes cannot be instantiated by the generator and yield an
/// empty result without a run.
pub fn run_evosuite(target: &SourceClass, cfg: &EvoSuiteConfig) -> Result<Vec<EvoSuiteTestClass>, EvoSuiteError> {
    let jar = cfg.jar.as_ref().ok_or_else(|| EvoSuiteError::ToolMissing("no EvoSuite jar configured".into()))?;
    if !jar.is_file() {
        return Err(EvoSuiteError::ToolMissing(jar.display().to_string()));
    }
    let home = cfg.java_home.clone().or_else(|| std::env::var_os("JAVA_HOME").map(PathBuf::from));
    let java = locate(home.as_deref(), "java").ok_or_else(|| EvoSuiteError::ToolMissing("java".into()))?;
    if matches!(target.kind, ClassKind::Interface | ClassKind::Abstract) {
        log::info!("skipping EvoSuite for non-instantiable {}", target.qualified_name());
        return Ok(Vec::new());
    }

    let out_dir = cfg.output_dir.join(target.qualified_name().replace('$', "_"));
    std::fs::create_dir_all(&out_dir)?;
    let cp =
        std::env::join_paths(&cfg.project_classpath).map_err(|e| EvoSuiteError::GenerationFailure(e.to_string()))?;
    let binary = match &target.package {
        Some(p) => format!("{p}.{}", target.binary_name),
        None => target.binary_name.clone(),
    };
    let mut cmd = Command::new(java);
    cmd.arg("-jar")
        .arg(jar)
        .arg("-class")
        .arg(&binary)
        .arg("-projectCP")
        .arg(cp)
        .arg(format!("-Dsearch_budget={}", cfg.search_budget_secs))
        .arg(format!("-Dtest_dir={}", out_dir.display()))
        .arg(format!("-Dreport_dir={}", out_dir.join("report").display()))
        .arg("-Dshow_progress=false");
    let budget = Duration::from_secs(cfg.search_budget_secs + cfg.overhead_secs);
    let done = match run_with_timeout(cmd, budget) {
        Ok(c) => c,
        Err(RunError::TimedOut) => return Err(EvoSuiteError::GenerationTimeout(budget)),
        Err(RunError::Spawn(e)) => return Err(EvoSuiteError::ToolMissing(e.to_string())),
    };
    if done.status != Some(0) {
        return Err(EvoSuiteError::GenerationFailure(excerpt(&format!("{}\n{}", done.stdout, done.stderr))));
    }
    Ok(ingest_dir(&out_dir)?)
}

/// Parses every `*_ESTest.java` under `dir`, in path order, after removing
/// the EvoSuite runtime scaffolding. Paths are kept relative to `dir`.
/// Files that do not parse are logged and skipped.
pub fn ingest_dir(dir: &Path) -> std::io::Result<Vec<EvoSuiteTestClass>> {
    let mut files: Vec<PathBuf> = walkdir::WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .map(|e| e.into_path())
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with("_ESTest.java")))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(&path)?;
        let rel = path.strip_prefix(dir).unwrap_or(&path);
        match ingest_source(&text, rel) {
            Ok(classes) => out.extend(classes),
            Err(e) => log::warn!("{}: {}", path.display(), e.message),
        }
    }
    Ok(out)
}

pub fn ingest_source(text: &str, path: &Path) -> Result<Vec<EvoSuiteTestClass>, ParseError> {
    let cleaned = strip_scaffolding(text);
    Ok(parse_compilation_unit(&cleaned, path)?
        .into_iter()
        .filter(|c| c.is_top_level)
        .map(EvoSuiteTestClass::from_source_class)
        .collect())
}

/// Removal range for `node`; the whole line when nothing else is on it.
fn removal(src: &str, node: Node<'_>) -> std::ops::Range<usize> {
    let line_start = src[..node.start_byte()].rfind('\n').map(|i| i + 1).unwrap_or(0);
    let line_end = src[node.end_byte()..].find('\n').map(|i| node.end_byte() + i + 1).unwrap_or(src.len());
    let before = &src[line_start..node.start_byte()];
    let after = &src[node.end_byte()..line_end];
    if before.trim().is_empty() && after.trim().is_empty() {
        line_start..line_end
    } else {
        node.byte_range()
    }
}

fn is_runtime_annotation(node: Node<'_>, src: &str) -> bool {
    let Some(name) = node.child_by_field_name("name") else { return false };
    match java::text(name, src) {
        "EvoRunnerParameters" => true,
        "RunWith" => java::text(node, src).contains("EvoRunner"),
        _ => false,
    }
}

/// Removes what ties a generated test to the EvoSuite runtime: the runner
/// annotations, `org.evosuite` imports, the `extends *_scaffolding` clause
/// and `verifyException` calls.
pub fn strip_scaffolding(source: &str) -> String {
    let tree = java::parse(source);
    let mut cuts: Vec<std::ops::Range<usize>> = Vec::new();
    for node in java::descendants(tree.root_node()) {
        match node.kind() {
            "import_declaration" if java::text(node, source).contains("org.evosuite") => {
                cuts.push(removal(source, node));
            }
            "marker_annotation" | "annotation" if is_runtime_annotation(node, source) => {
                cuts.push(removal(source, node));
            }
            "superclass" if java::text(node, source).ends_with("_scaffolding") => {
                let start = source[..node.start_byte()].trim_end().len();
                cuts.push(start..node.end_byte());
            }
            "expression_statement" => {
                let verify = java::named_children(node).first().is_some_and(|e| {
                    e.kind() == "method_invocation"
                        && e.child_by_field_name("object").is_none()
                        && e.child_by_field_name("name").is_some_and(|n| java::text(n, source) == "verifyException")
                });
                if verify {
                    cuts.push(removal(source, node));
                }
            }
            _ => {}
        }
    }
    cuts.sort_by_key(|r| std::cmp::Reverse(r.start));
    let mut out = source.to_string();
    for r in cuts {
        out.replace_range(r, "");
    }
    out
}
