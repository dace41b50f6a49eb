//! A JDK-free toolchain for tests, examples and offline replay.
//!
//! Compilation checks syntax and unresolved type names (the subset of
//! `cannot find symbol` that needs no type checking). Test runs pass
//! unless a test method carries a directive comment:
//!
//! - `// sim:compile-error <message>` fails compilation at that line
//! - `// sim:assertion-failure <message>` fails the enclosing test with
//!   `java.lang.AssertionError`
//! - `// sim:runtime-exception <Type>[: <message>]` fails the enclosing test
//!   with that exception
//! - `// sim:crash` makes the runner and the coverage step crash
//! - `// sim:coverage <bc>/<bt> <lc>/<lt>` fixes the reported coverage
//!
//! Without a coverage directive, each focal method gets `2 * (CCN - 1)`
//! branches and one line per non-brace body line. Lines count as covered
//! when some test calls the method; one branch is covered per such test.
//! These numbers are a stand-in, not a measurement.

use std::sync::Arc;
use std::time::{Duration, Instant};

use tree_sitter::Node;

use super::fixes::{declared_test_methods, unresolved_symbols};
use super::{
    CompileResult, CoverageReport, Diagnostic, ImportTable, MethodCoverage, RunRecord, TestFailure, TestOutcome,
    TestRunResult, TestUnit, Toolchain, ToolchainError, Workspace,
};
use crate::code_model::{Corpus, MethodInfo};
use crate::complexity::cyclomatic_complexity;
use crate::java;

const DIRECTIVE: &str = "// sim:";

pub struct SimulatedToolchain {
    corpus: Arc<Corpus>,
    imports: ImportTable,
    compile_budget: Duration,
}

impl SimulatedToolchain {
    pub fn new(corpus: Arc<Corpus>) -> Self {
        let imports = ImportTable::from_corpus(&corpus);
        Self { corpus, imports, compile_budget: Duration::from_secs(60) }
    }

    pub fn with_compile_budget(mut self, budget: Duration) -> Self {
        self.compile_budget = budget;
        self
    }

    fn focal(&self, signature: &str) -> Option<&MethodInfo> {
        let (owner, _) = signature.split_once('#')?;
        self.corpus.class_by_qualified_name(owner)?.method_by_signature(signature)
    }
}

/// `(zero-based row, directive name, argument)` for every directive.
fn directives(source: &str) -> Vec<(usize, &str, &str)> {
    source
        .lines()
        .enumerate()
        .filter_map(|(row, line)| {
            let at = line.find(DIRECTIVE)?;
            let rest = line[at + DIRECTIVE.len()..].trim();
            let (name, arg) = rest.split_once(' ').unwrap_or((rest, ""));
            Some((row, name, arg.trim()))
        })
        .collect()
}

fn test_methods<'t>(root: Node<'t>, source: &str) -> Vec<(String, Node<'t>)> {
    let names = declared_test_methods(source);
    java::descendants(root)
        .into_iter()
        .filter(|n| n.kind() == "method_declaration")
        .filter_map(|m| {
            let name = java::text(m.child_by_field_name("name")?, source).to_string();
            names.contains(&name).then_some((name, m))
        })
        .collect()
}

fn parse_ratio(s: &str) -> Option<(u32, u32)> {
    let (a, b) = s.split_once('/')?;
    let (a, b) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
    (a <= b).then_some((a, b))
}

fn executable_lines(m: &MethodInfo) -> u32 {
    m.content.lines().skip(1).filter(|l| !l.trim().chars().all(|c| c == '{' || c == '}')).count() as u32
}

impl Toolchain for SimulatedToolchain {
    fn compile(&self, unit: &TestUnit, ws: &Workspace) -> Result<CompileResult, ToolchainError> {
        if self.compile_budget.is_zero() {
            return Err(ToolchainError::CompileTimeout(self.compile_budget));
        }
        let started = Instant::now();
        ws.write_source(unit)?;
        let file = unit.file_name();
        let tree = java::parse(&unit.source);
        let mut diags = Vec::new();
        if let Some(err) = java::first_error(tree.root_node()) {
            let near: String = java::text(err, &unit.source).chars().take(40).collect();
            let msg = if err.is_missing() {
                format!("'{}' expected", err.kind())
            } else {
                format!("illegal start of expression near `{}`", near.trim())
            };
            diags.push(Diagnostic::error(&file, err.start_position().row + 1, msg));
        } else {
            for u in unresolved_symbols(&unit.source, unit.package.as_deref(), &self.imports) {
                let kind = if u.is_method { "method" } else { "class" };
                let mut d = Diagnostic::error(&file, u.row + 1, "cannot find symbol");
                d.detail =
                    vec![format!("  symbol: {kind} {}", u.name), format!("  location: class {}", unit.class_name)];
                diags.push(d);
            }
        }
        for (row, name, arg) in directives(&unit.source) {
            if name == "compile-error" {
                diags.push(Diagnostic::error(&file, row + 1, arg));
            }
        }
        diags.sort_by_key(|d| d.line);
        let result = CompileResult::from_diagnostics(diags);
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
        if directives(&unit.source).iter().any(|(_, n, _)| *n == "crash") {
            return Err(ToolchainError::RunnerCrash("simulated runner crash".into()));
        }
        let tree = java::parse(&unit.source);
        let mut result = TestRunResult::default();
        for (name, node) in test_methods(tree.root_node(), &unit.source) {
            let body = java::text(node, &unit.source);
            let first_row = node.start_position().row;
            let failure = directives(body).into_iter().find_map(|(row, kind, arg)| {
                let frame =
                    Some(format!("{}.{name}({}:{})", unit.qualified_name(), unit.file_name(), first_row + row + 1));
                match kind {
                    "assertion-failure" => Some((
                        TestOutcome::AssertionFailure,
                        TestFailure {
                            test_name: name.clone(),
                            exception_type: "java.lang.AssertionError".into(),
                            message: arg.to_string(),
                            first_frame: frame,
                        },
                    )),
                    "runtime-exception" => {
                        let (ty, msg) = arg.split_once(": ").unwrap_or((arg, ""));
                        Some((
                            TestOutcome::RuntimeException,
                            TestFailure {
                                test_name: name.clone(),
                                exception_type: ty.trim().to_string(),
                                message: msg.to_string(),
                                first_frame: frame,
                            },
                        ))
                    }
                    _ => None,
                }
            });
            match failure {
                Some((outcome, f)) => {
                    result.outcomes.insert(name, outcome);
                    result.failures.push(f);
                }
                None => {
                    result.outcomes.insert(name, TestOutcome::Passed);
                }
            }
        }
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
        let started = Instant::now();
        let dirs = directives(&unit.source);
        if dirs.iter().any(|(_, n, _)| *n == "crash") {
            return Err(ToolchainError::RunnerCrash("simulated agent crash".into()));
        }
        let fixed = dirs.iter().find(|(_, n, _)| *n == "coverage").and_then(|(_, _, arg)| {
            let mut parts = arg.split_whitespace();
            let (bc, bt) = parse_ratio(parts.next()?)?;
            let (lc, lt) = parse_ratio(parts.next()?)?;
            Some(MethodCoverage { branches_covered: bc, branches_total: bt, lines_covered: lc, lines_total: lt })
        });
        let tree = java::parse(&unit.source);
        let tests = test_methods(tree.root_node(), &unit.source);
        let mut all = std::collections::BTreeMap::new();
        for sig in focal_signatures {
            let Some(m) = self.focal(sig) else { continue };
            let cov = fixed.unwrap_or_else(|| {
                let call = format!("{}(", m.name);
                let callers = tests.iter().filter(|(_, n)| java::text(*n, &unit.source).contains(&call)).count() as u32;
                let branches_total = 2 * (cyclomatic_complexity(m).value() - 1);
                let lines_total = executable_lines(m);
                MethodCoverage {
                    branches_covered: callers.min(branches_total),
                    branches_total,
                    lines_covered: if callers > 0 { lines_total } else { 0 },
                    lines_total,
                }
            });
            all.insert(sig.clone(), cov);
        }
        let report = CoverageReport::select(&all, focal_signatures);
        ws.log(&RunRecord {
            stage: "coverage",
            test_class: &unit.class_name,
            ok: report.unmatched.is_empty(),
            summary: format!("{} method(s)", report.methods.len()),
            elapsed_ms: started.elapsed().as_millis(),
        })?;
        Ok(report)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code_model::parse_compilation_unit;
    use std::path::Path;

    fn setup() -> (SimulatedToolchain, Workspace, tempfile::TempDir) {
        let src = "package com.x;\npublic class Foo {\n  public int size(int n) {\n    if (n > 0) {\n      return n;\n    }\n    return 0;\n  }\n}\n";
        let classes = parse_compilation_unit(src, Path::new("Foo.java")).unwrap();
        let tc = SimulatedToolchain::new(Arc::new(Corpus::from_classes("/p", classes)));
        let dir = tempfile::tempdir().unwrap();
        let ws = Workspace::create(dir.path(), "s1").unwrap();
        (tc, ws, dir)
    }

    fn unit(body: &str) -> TestUnit {
        let source = format!(
            "package com.x;\nimport org.junit.Test;\nimport static org.junit.Assert.*;\npublic class Foo_size_Test {{\n{body}\n}}\n"
        );
        TestUnit { class_name: "Foo_size_Test".into(), package: Some("com.x".into()), source }
    }

    #[test]
    fn compiles_clean_and_reports_unknown_types() {
        let (tc, ws, _d) = setup();
        let ok = unit("  @Test public void t() { assertEquals(1, new Foo().size(1)); }");
        assert!(tc.compile(&ok, &ws).unwrap().success);
        let bad = unit("  @Test public void t() {\n    Widget w = new Widget();\n  }");
        let r = tc.compile(&bad, &ws).unwrap();
        assert!(!r.success);
        assert_eq!(r.diagnostics[0].line, 6);
        assert_eq!(r.diagnostics[0].message, "cannot find symbol");
        assert_eq!(r.diagnostics[0].detail[0], "  symbol: class Widget");
        let syntax = unit("  @Test public void t() { int x = ; }");
        assert!(!tc.compile(&syntax, &ws).unwrap().success);
        assert!(std::fs::read_to_string(ws.dir.join("runs.ndjson")).unwrap().lines().count() == 3);
    }

    #[test]
    fn directives_drive_outcomes() {
        let (tc, ws, _d) = setup();
        let u = unit(
            "  @Test public void a() { new Foo().size(1); }\n  @Test public void b() {\n    // sim:assertion-failure expected:<1> but was:<0>\n  }\n  @Test public void c() {\n    // sim:runtime-exception java.lang.NullPointerException\n  }",
        );
        let r = tc.run_tests(&u, &ws).unwrap();
        assert_eq!(r.outcomes["a"], TestOutcome::Passed);
        assert_eq!(r.outcomes["b"], TestOutcome::AssertionFailure);
        assert_eq!(r.outcomes["c"], TestOutcome::RuntimeException);
        assert_eq!(r.failures[0].message, "expected:<1> but was:<0>");
        assert_eq!(r.failures[1].exception_type, "java.lang.NullPointerException");
    }

    #[test]
    fn coverage_defaults_and_override() {
        let (tc, ws, _d) = setup();
        let sig = "com.x.Foo#size(int)".to_string();
        let u = unit("  @Test public void a() { new Foo().size(1); }");
        let c = tc.measure_coverage(&u, std::slice::from_ref(&sig), &ws).unwrap();
        assert_eq!(
            c.methods[&sig],
            MethodCoverage { branches_covered: 1, branches_total: 2, lines_covered: 3, lines_total: 3 }
        );
        let u = unit("  // sim:coverage 3/4 10/12\n  @Test public void a() {}");
        let c = tc.measure_coverage(&u, &[sig.clone(), "com.x.Foo#gone()".into()], &ws).unwrap();
        assert_eq!(c.methods[&sig].lines_total, 12);
        assert_eq!(c.unmatched, ["com.x.Foo#gone()"]);
    }
}
