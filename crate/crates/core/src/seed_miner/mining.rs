//! Invocation exemplars mined from project source and generated tests.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use super::evosuite::EvoSuiteTestClass;
use super::strip::{strip_assertions, AssertionNames};
use crate::code_model::{Corpus, MethodInfo, SourceClass};
use crate::java::{self, Fragment};

/// EvoSuite supplement when the source already calls the focal method.
pub const PATH1_EVOSUITE_CAP: usize = 3;
/// EvoSuite fallback when it does not.
pub const PATH2_EVOSUITE_CAP: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    SourceClass,
    Evosuite,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub file: String,
    pub method: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSnippet {
    pub origin: Origin,
    /// Setup statements followed by the statement holding the focal call.
    pub code: String,
    pub focal_signature: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiningPath {
    Path1,
    Path2,
}

pub fn select_path(source_exemplars: &[ExemplarSnippet]) -> MiningPath {
    if source_exemplars.is_empty() {
        MiningPath::Path2
    } else {
        MiningPath::Path1
    }
}

fn is_focal_call(node: Node<'_>, src: &str, focal: &MethodInfo) -> bool {
    node.kind() == "method_invocation"
        && node.child_by_field_name("name").is_some_and(|n| java::text(n, src) == focal.name)
        && node.child_by_field_name("arguments").is_some_and(|a| java::arg_count(a) == focal.params.len())
}

/// Calls to `focal` (by name and arity) inside `code`.
pub fn count_focal_calls(code: &str, focal: &MethodInfo) -> usize {
    let frag = Fragment::best_effort(code);
    java::descendants(frag.root()).into_iter().filter(|n| is_focal_call(*n, &frag.source, focal)).count()
}

fn is_statement(node: Node<'_>) -> bool {
    node.parent().is_some_and(|p| matches!(p.kind(), "block" | "constructor_body" | "switch_block_statement_group"))
        || node.kind().ends_with("_statement")
        || node.kind() == "local_variable_declaration"
}

/// Variable names read by `node`: identifiers that are not method or field
/// selectors.
pub(crate) fn referenced_names(node: Node<'_>, src: &str, into: &mut BTreeSet<String>) {
    for n in java::descendants(node) {
        if n.kind() != "identifier" {
            continue;
        }
        let selector = n.parent().is_some_and(|p| {
            (p.kind() == "method_invocation" && p.child_by_field_name("name") == Some(n))
                || (p.kind() == "field_access" && p.child_by_field_name("field") == Some(n))
        });
        if !selector {
            into.insert(java::text(n, src).to_string());
        }
    }
}

fn declared_names(decl: Node<'_>, src: &str) -> Vec<String> {
    java::named_children(decl)
        .into_iter()
        .filter(|c| c.kind() == "variable_declarator")
        .filter_map(|d| d.child_by_field_name("name"))
        .map(|n| java::text(n, src).to_string())
        .collect()
}

/// Leftmost identifier of a receiver chain: `a` in `a.b().c`.
fn receiver_root<'t>(mut node: Node<'t>) -> Option<Node<'t>> {
    loop {
        match node.kind() {
            "identifier" => return Some(node),
            "method_invocation" | "field_access" => node = node.child_by_field_name("object")?,
            "parenthesized_expression" => node = *java::named_children(node).first()?,
            _ => return None,
        }
    }
}

/// Decides whether an earlier statement feeds one of `needed`, and if so
/// which further names it reads.
fn slice_step(stmt: Node<'_>, src: &str, needed: &BTreeSet<String>) -> Option<BTreeSet<String>> {
    let mut reads = BTreeSet::new();
    match stmt.kind() {
        "local_variable_declaration" => {
            if !declared_names(stmt, src).iter().any(|d| needed.contains(d)) {
                return None;
            }
            for d in java::named_children(stmt).into_iter().filter(|c| c.kind() == "variable_declarator") {
                if let Some(v) = d.child_by_field_name("value") {
                    referenced_names(v, src, &mut reads);
                }
            }
        }
        "expression_statement" => {
            let expr = *java::named_children(stmt).first()?;
            let target = match expr.kind() {
                "assignment_expression" => expr.child_by_field_name("left"),
                "method_invocation" => expr.child_by_field_name("object"),
                "update_expression" => java::named_children(expr).first().copied(),
                _ => None,
            }?;
            let root = receiver_root(target)?;
            if !needed.contains(java::text(root, src)) {
                return None;
            }
            referenced_names(expr, src, &mut reads);
        }
        _ => return None,
    }
    Some(reads)
}

/// Backward slice, by variable name, of the first call to `focal` inside
/// the method or test method `member`.
///
/// The result holds the local declarations, assignments and receiver
/// mutations that feed the call's receiver and arguments, in source order,
/// then the statement containing the call. Earlier statements that also
/// call `focal` are left out so the snippet has exactly one focal call.
pub fn slice_invocation(member: &MethodInfo, focal: &MethodInfo) -> Option<String> {
    let frag = Fragment::member(&member.content, (0, 0));
    if frag.has_error() {
        return None;
    }
    let src = frag.source.as_str();
    let decl = frag
        .content_nodes()
        .into_iter()
        .find(|n| matches!(n.kind(), "method_declaration" | "constructor_declaration"))?;
    let body = decl.child_by_field_name("body")?;
    let call = java::descendants_pruned(body, java::is_nested_type_scope)
        .into_iter()
        .find(|n| is_focal_call(*n, src, focal))?;

    let mut stmt = call;
    while !is_statement(stmt) {
        stmt = stmt.parent()?;
    }
    let call_text = match stmt.kind() {
        "expression_statement" | "local_variable_declaration" => java::text(stmt, src).to_string(),
        _ => format!("{};", java::text(call, src)),
    };

    // Statements before the call's statement, innermost scope first.
    let mut earlier: Vec<Node<'_>> = Vec::new();
    let mut cursor = stmt;
    while cursor.id() != body.id() {
        let parent = cursor.parent()?;
        if matches!(parent.kind(), "block" | "constructor_body" | "switch_block_statement_group") {
            let siblings = java::named_children(parent);
            let idx = siblings.iter().position(|s| s.id() == cursor.id())?;
            earlier.extend(siblings[..idx].iter().rev().copied());
        }
        cursor = parent;
    }

    let mut needed = BTreeSet::new();
    if stmt.kind() == "expression_statement" || stmt.kind() == "local_variable_declaration" {
        referenced_names(stmt, src, &mut needed);
        for d in declared_names(stmt, src) {
            needed.remove(&d);
        }
    } else {
        referenced_names(call, src, &mut needed);
    }

    let mut kept = Vec::new();
    for s in earlier {
        let calls_focal = java::descendants(s).into_iter().any(|n| is_focal_call(n, src, focal));
        if calls_focal {
            continue;
        }
        if let Some(reads) = slice_step(s, src, &needed) {
            needed.extend(reads);
            kept.push(java::text(s, src).to_string());
        }
    }
    kept.reverse();
    kept.push(call_text);
    Some(kept.join("\n"))
}

/// Simple type name a receiver must have for a call in another class to
/// count as a call of `cls`'s method.
fn receiver_matches_class(member: &MethodInfo, receiver: &str, cls: &SourceClass) -> bool {
    let receiver = receiver.trim();
    if receiver == cls.name || receiver.starts_with(&format!("new {}", cls.name)) {
        return true;
    }
    let local_type = |name: &str| -> Option<String> {
        if let Some(p) = member.params.iter().find(|p| p.name == name) {
            return Some(p.declared_type.clone());
        }
        let frag = Fragment::member(&member.content, (0, 0));
        java::descendants(frag.root())
            .into_iter()
            .find(|n| match n.kind() {
                "local_variable_declaration" => declared_names(*n, &frag.source).iter().any(|d| d == name),
                "enhanced_for_statement" => n.child_by_field_name("name").is_some_and(|v| frag.text(v) == name),
                _ => false,
            })
            .and_then(|n| n.child_by_field_name("type"))
            .map(|t| frag.text(t).to_string())
    };
    let simple = |t: &str| -> String {
        let t = t.split('<').next().unwrap_or(t);
        t.rsplit('.').next().unwrap_or(t).trim().to_string()
    };
    local_type(receiver).is_some_and(|t| simple(&t) == cls.name)
}

/// Path 1: one snippet per method that calls `focal`, first from its own
/// class and then from other corpus classes, in source order.
///
/// Calls from other classes count only when the receiver is visibly an
/// instance of the focal class (a typed local, loop variable or parameter, a `new`
/// expression, or the class name for static calls). The focal method's own
/// recursive calls are not exemplars.
pub fn mine_source_exemplars(cls: &SourceClass, corpus: &Corpus, focal: &MethodInfo) -> Vec<ExemplarSnippet> {
    let mut out = Vec::new();
    let mut visit = |owner: &SourceClass, own: bool| {
        for m in &owner.methods {
            if own && m.signature == focal.signature {
                continue;
            }
            let calls = m.invocations.iter().filter(|i| i.targets(focal));
            let hit = if own {
                calls.count() > 0
            } else {
                calls.into_iter().any(|i| receiver_matches_class(m, &i.receiver_text, cls))
            };
            if !hit {
                continue;
            }
            if let Some(code) = slice_invocation(m, focal) {
                out.push(ExemplarSnippet {
                    origin: Origin::SourceClass,
                    code,
                    focal_signature: focal.signature.clone(),
                    provenance: Provenance { file: owner.path.display().to_string(), method: m.name.clone() },
                });
            }
        }
    };
    visit(cls, true);
    for other in &corpus.classes {
        if other.qualified_name() == cls.qualified_name() || !other.content.contains(cls.name.as_str()) {
            continue;
        }
        visit(other, false);
    }
    out
}

/// At most `cap` snippets from generated test methods that call `focal`,
/// in source order, with assertions removed.
pub fn mine_evosuite_exemplars(tests: &[EvoSuiteTestClass], focal: &MethodInfo, cap: usize) -> Vec<ExemplarSnippet> {
    let names = AssertionNames::default();
    let mut out = Vec::new();
    for class in tests {
        for m in &class.test_methods {
            if out.len() >= cap {
                return out;
            }
            if !m.invocations.iter().any(|i| i.targets(focal)) {
                continue;
            }
            let Some(code) = slice_invocation(m, focal) else { continue };
            let code = match strip_assertions(&code, &names) {
                Ok((stripped, _)) => stripped,
                Err(_) => continue,
            };
            out.push(ExemplarSnippet {
                origin: Origin::Evosuite,
                code,
                focal_signature: focal.signature.clone(),
                provenance: Provenance { file: class.path.display().to_string(), method: m.name.clone() },
            });
        }
    }
    out
}

/// Drops snippets whose whitespace-collapsed code was already seen.
pub fn dedup(snippets: Vec<ExemplarSnippet>) -> Vec<ExemplarSnippet> {
    let mut seen = BTreeSet::new();
    snippets.into_iter().filter(|s| seen.insert(s.code.split_whitespace().collect::<Vec<_>>().join(" "))).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub path: MiningPath,
    pub source: Vec<ExemplarSnippet>,
    pub evosuite: Vec<ExemplarSnippet>,
}

impl ExemplarSet {
    /// Source exemplars first, then the EvoSuite ones.
    pub fn all(&self) -> Vec<ExemplarSnippet> {
        self.source.iter().chain(&self.evosuite).cloned().collect()
    }
}

/// Runs both mining paths and applies the per-path EvoSuite cap.
pub fn collect_exemplars(
    cls: &SourceClass,
    corpus: &Corpus,
    focal: &MethodInfo,
    tests: &[EvoSuiteTestClass],
) -> ExemplarSet {
    let source = dedup(mine_source_exemplars(cls, corpus, focal));
    let path = select_path(&source);
    let cap = match path {
        MiningPath::Path1 => PATH1_EVOSUITE_CAP,
        MiningPath::Path2 => PATH2_EVOSUITE_CAP,
    };
    // Dedup against the source snippets before capping so duplicates do
    // not use up the cap.
    let known: BTreeSet<String> =
        source.iter().map(|s| s.code.split_whitespace().collect::<Vec<_>>().join(" ")).collect();
    let evosuite: Vec<ExemplarSnippet> = dedup(mine_evosuite_exemplars(tests, focal, usize::MAX))
        .into_iter()
        .filter(|s| !known.contains(&s.code.split_whitespace().collect::<Vec<_>>().join(" ")))
        .take(cap)
        .collect();
    ExemplarSet { path, source, evosuite }
}
