//! Assertion removal for test prefixes.

use std::collections::BTreeSet;

use tree_sitter::Node;

use crate::java::{self, Fragment};

/// The comment left where an assertion statement was removed.
pub const MARKER: &str = "// TODO: assert here";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot strip assertions: syntax error at line {line}")]
pub struct StripError {
    pub line: usize,
}

/// Which callee names count as assertions.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct AssertionNames {
    /// Any callee whose simple name starts with one of these.
    pub prefixes: Vec<String>,
    pub exact: BTreeSet<String>,
}

impl Default for AssertionNames {
    fn default() -> Self {
        Self {
            prefixes: vec!["assert".into()],
            exact: ["fail", "assertThrows"].into_iter().map(String::from).collect(),
        }
    }
}

impl AssertionNames {
    pub fn matches(&self, name: &str) -> bool {
        self.exact.contains(name) || self.prefixes.iter().any(|p| name.starts_with(p.as_str()))
    }
}

/// Receivers that make a call "static-qualified": `Assert`, `org.junit.Assert`.
fn is_static_qualifier(text: &str) -> bool {
    text.rsplit('.').next().and_then(|last| last.chars().next()).is_some_and(|c| c.is_ascii_uppercase())
}

/// True for a call such as `assertEquals(..)`, `Assert.fail(..)` or the
/// fluent form `assertThat(x).isEqualTo(y)`.
fn is_assertion_call(call: Node<'_>, src: &str, names: &AssertionNames) -> bool {
    let Some(name) = call.child_by_field_name("name") else { return false };
    let object = call.child_by_field_name("object");
    if names.matches(java::text(name, src)) {
        return match object {
            None => true,
            Some(o) => {
                matches!(o.kind(), "identifier" | "field_access" | "scoped_identifier")
                    && is_static_qualifier(java::text(o, src))
            }
        };
    }
    match object {
        Some(o) if o.kind() == "method_invocation" => is_assertion_call(o, src, names),
        _ => false,
    }
}

fn is_assertion_statement(stmt: Node<'_>, src: &str, names: &AssertionNames) -> bool {
    match stmt.kind() {
        "assert_statement" => true,
        "expression_statement" => java::named_children(stmt)
            .first()
            .is_some_and(|e| e.kind() == "method_invocation" && is_assertion_call(*e, src, names)),
        _ => false,
    }
}

/// Statement positions where a bare comment would change meaning, e.g. the
/// body of an unbraced `if`.
fn needs_braces(stmt: Node<'_>) -> bool {
    !stmt
        .parent()
        .is_some_and(|p| matches!(p.kind(), "block" | "switch_block_statement_group" | "program" | "constructor_body"))
}

/// Replaces every assertion statement with [`MARKER`] and returns the new
/// text with the number of replacements.
///
/// Everything else is kept byte for byte. A removed statement's line breaks
/// are kept after the marker so later lines keep their numbers.
pub fn strip_assertions(code: &str, names: &AssertionNames) -> Result<(String, usize), StripError> {
    let frag = Fragment::best_effort(code);
    if let Some(bad) = java::first_error(frag.root()) {
        return Err(StripError { line: frag.map_position(bad.start_position()).0 + 1 });
    }
    let range = frag.user_range();
    let src = &frag.source;
    let mut edits: Vec<(std::ops::Range<usize>, String)> = Vec::new();
    for node in java::descendants(frag.root()) {
        if !is_assertion_statement(node, src, names) {
            continue;
        }
        if edits.iter().any(|(r, _)| r.start <= node.start_byte() && node.end_byte() <= r.end) {
            continue;
        }
        let (start, end) = (node.start_byte() - range.start, node.end_byte() - range.start);
        let removed = &code[start..end];
        let mut text = if needs_braces(node) { format!("{{ }} {MARKER}") } else { MARKER.to_string() };
        text.extend(std::iter::repeat_n('\n', removed.matches('\n').count()));
        let rest_of_line = code[end..].split('\n').next().unwrap_or("");
        if !rest_of_line.trim().is_empty() && !removed.contains('\n') {
            let line_start = code[..start].rfind('\n').map(|i| i + 1).unwrap_or(0);
            let indent: String = code[line_start..start].chars().take_while(|c| c.is_whitespace()).collect();
            text.push('\n');
            text.push_str(&indent);
        }
        edits.push((start..end, text));
    }
    let count = edits.len();
    let mut out = code.to_string();
    for (r, text) in edits.into_iter().rev() {
        out.replace_range(r, &text);
    }
    Ok((out, count))
}

/// Number of marker comments in `code`.
pub fn marker_count(code: &str) -> usize {
    code.matches(MARKER).count()
}

/// Assertion statements left in `code`, or `None` when it does not parse.
pub fn assertion_count(code: &str, names: &AssertionNames) -> Option<usize> {
    let frag = Fragment::best_effort(code);
    if frag.has_error() {
        return None;
    }
    Some(java::descendants(frag.root()).into_iter().filter(|n| is_assertion_statement(*n, &frag.source, names)).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strip(code: &str) -> (String, usize) {
        strip_assertions(code, &AssertionNames::default()).unwrap()
    }

    #[test]
    fn single_assertion_becomes_marker() {
        let (out, n) = strip("int a = f();\nassertEquals(a, 2);\n");
        assert_eq!(n, 1);
        assert_eq!(out, "int a = f();\n// TODO: assert here\n");
    }

    #[test]
    fn no_assertions_is_identity() {
        let code = "class T {\n  @Test public void t() {\n    Foo f = new Foo();\n    f.run();\n  }\n}\n";
        assert_eq!(strip(code), (code.to_string(), 0));
    }

    #[test]
    fn qualified_fluent_and_keyword_forms() {
        let code = "Assert.assertNull(x);\norg.junit.Assert.fail();\nassertThat(x).isEqualTo(3);\nassert x != null;\nhelper.assertValid();\n";
        let (out, n) = strip(code);
        assert_eq!(n, 4);
        assert!(out.ends_with("helper.assertValid();\n"));
    }

    #[test]
    fn multi_line_assertion_keeps_line_count() {
        let code = "a();\nassertEquals(1,\n    2);\nb();\n";
        let (out, _) = strip(code);
        assert_eq!(out.lines().count(), code.lines().count());
        assert_eq!(out, "a();\n// TODO: assert here\n\nb();\n");
    }

    #[test]
    fn trailing_code_moves_to_next_line() {
        let (out, n) = strip("  assertTrue(ok); f();\n");
        assert_eq!(n, 1);
        assert_eq!(out, "  // TODO: assert here\n   f();\n");
        assert_eq!(strip(&out), (out.clone(), 0));
    }

    #[test]
    fn unbraced_body_stays_a_body() {
        let (out, _) = strip("if (x) assertTrue(y);\nz();\n");
        assert_eq!(out, "if (x) { } // TODO: assert here\nz();\n");
        assert!(!Fragment::best_effort(&out).has_error());
    }

    #[test]
    fn syntax_error_is_reported() {
        assert!(strip_assertions("class { void", &AssertionNames::default()).is_err());
    }
}
