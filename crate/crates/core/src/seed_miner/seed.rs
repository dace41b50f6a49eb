//! Seed prompt, refinement loop and the exemplar-only fallback template.

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use super::mining::{count_focal_calls, ExemplarSnippet, Origin};
use super::strip::{marker_count, strip_assertions, AssertionNames, MARKER};
use crate::code_model::{MethodInfo, SourceClass};
use crate::java::{self, Fragment};
use crate::llm_gateway::{GatewayError, Purpose};
use crate::prompts::{class_context, extract_code, LlmEnv, Prompt, PromptError, TemplateName};
use crate::toolchain::{
    apply_lightweight_fixes, format_diagnostics, Diagnostic, ImportTable, TestUnit, Toolchain, ToolchainError,
    Workspace,
};

pub const MAX_SEED_ROUNDS: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompileStatus {
    Unverified,
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPrefix {
    pub code: String,
    pub focal_signature: String,
    pub todo_marker_count: usize,
    pub compile_status: CompileStatus,
    pub repair_rounds_used: u32,
    /// Errors from the last compile when it failed.
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, thiserror::Error)]
pub enum SeedError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Toolchain(#[from] ToolchainError),
}

fn render_exemplars(exemplars: &[ExemplarSnippet]) -> String {
    if exemplars.is_empty() {
        return "(none found; rely on the class outline)".to_string();
    }
    exemplars
        .iter()
        .enumerate()
        .map(|(i, e)| {
            format!(
                "### Example {} ({}, method `{}`)\n```java\n{}\n```",
                i + 1,
                e.provenance.file.rsplit('/').next().unwrap_or(&e.provenance.file),
                e.provenance.method,
                e.code.trim_end()
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Seed prompt for `focal`, with as many exemplars as fit the budget.
///
/// Exemplars are dropped from the end first, then the class outline. The
/// returned count is the number of exemplars kept.
pub fn build_seed_prompt(
    llm: &LlmEnv<'_>,
    focal: &MethodInfo,
    cls: &SourceClass,
    exemplars: &[ExemplarSnippet],
    test_class_name: &str,
) -> Result<(Prompt, usize), PromptError> {
    let context = class_context(cls);
    let package = cls.package.clone().unwrap_or_default();
    let render = |n: usize, context: &str| {
        llm.prompt(
            TemplateName::Seed,
            &[
                ("focal_signature", &focal.signature),
                ("focal_body", &focal.content),
                ("class_context", context),
                ("exemplars", &render_exemplars(&exemplars[..n])),
                ("test_class_name", test_class_name),
                ("package", &package),
            ],
        )
    };
    for n in (0..=exemplars.len()).rev() {
        let p = render(n, &context)?;
        if p.tokens() <= llm.prompt_budget {
            return Ok((p, n));
        }
    }
    let p = render(0, "(omitted)")?;
    if p.tokens() <= llm.prompt_budget {
        return Ok((p, 0));
    }
    Err(PromptError::PromptOverflow { needed: p.tokens(), budget: llm.prompt_budget })
}

fn indent_of(src: &str, byte: usize) -> String {
    let line_start = src[..byte].rfind('\n').map(|i| i + 1).unwrap_or(0);
    src[line_start..byte].chars().take_while(|c| c.is_whitespace()).collect()
}

/// Adds one marker when `code` has none: after the statement holding the
/// first focal call, else at the end of the first method body.
pub fn ensure_marker(code: &str, focal: &MethodInfo) -> String {
    if marker_count(code) > 0 {
        return code.to_string();
    }
    let frag = Fragment::best_effort(code);
    let offset = frag.user_range().start;
    let src = frag.source.as_str();
    let nodes = java::descendants(frag.root());
    let call = nodes.iter().find(|n| {
        n.kind() == "method_invocation"
            && n.child_by_field_name("name").is_some_and(|x| java::text(x, src) == focal.name)
            && n.child_by_field_name("arguments").is_some_and(|a| java::arg_count(a) == focal.params.len())
    });
    let in_block = |n: &Node<'_>| n.parent().is_some_and(|p| p.kind() == "block");
    let statement = call.and_then(|c| {
        let mut s = *c;
        while !in_block(&s) {
            s = s.parent()?;
        }
        Some(s)
    });
    let insert = match statement {
        Some(s) => {
            let at = s.end_byte();
            Some((at, format!("\n{}{MARKER}", indent_of(src, s.start_byte()))))
        }
        None => {
            nodes.iter().find(|n| n.kind() == "method_declaration").and_then(|m| m.child_by_field_name("body")).map(
                |b| {
                    let close = b.end_byte() - 1;
                    (close, format!("    {MARKER}\n{}", indent_of(src, close)))
                },
            )
        }
    };
    match insert {
        Some((at, text)) if at >= offset && at - offset <= code.len() => {
            let at = at - offset;
            let mut out = code.to_string();
            out.insert_str(at, &text);
            out
        }
        _ => code.to_string(),
    }
}

/// Handles and limits for one refinement session.
pub struct SeedContext<'a> {
    pub llm: &'a LlmEnv<'a>,
    pub toolchain: &'a dyn Toolchain,
    pub workspace: &'a Workspace,
    pub imports: &'a ImportTable,
    pub cls: &'a SourceClass,
    pub focal: &'a MethodInfo,
    pub test_class_name: &'a str,
    pub assertion_names: &'a AssertionNames,
    pub max_rounds: u32,
}

impl SeedContext<'_> {
    /// Lightweight fixes, assertion removal, then a marker if none is left.
    pub fn prepare(&self, raw: &str) -> String {
        let fixed = apply_lightweight_fixes(raw, self.test_class_name, self.cls, self.imports);
        let stripped = match strip_assertions(&fixed, self.assertion_names) {
            Ok((s, _)) => s,
            Err(_) => fixed,
        };
        ensure_marker(&stripped, self.focal)
    }

    fn unit(&self, code: &str) -> TestUnit {
        TestUnit {
            class_name: self.test_class_name.to_string(),
            package: self.cls.package.clone(),
            source: code.to_string(),
        }
    }

    fn prefix(&self, code: String, status: CompileStatus, rounds: u32, diagnostics: Vec<Diagnostic>) -> SeedPrefix {
        SeedPrefix {
            todo_marker_count: marker_count(&code),
            code,
            focal_signature: self.focal.signature.clone(),
            compile_status: status,
            repair_rounds_used: rounds,
            diagnostics,
        }
    }
}

/// Compiles `candidate` and asks for repairs until it compiles or the round
/// budget is spent. A prefix that compiles but never calls the focal method
/// counts as failing.
pub fn refine_seed(candidate: &str, ctx: &SeedContext<'_>) -> Result<SeedPrefix, SeedError> {
    let mut code = ctx.prepare(candidate);
    let mut rounds = 0;
    loop {
        let result = ctx.toolchain.compile(&ctx.unit(&code), ctx.workspace)?;
        let mut diagnostics: Vec<Diagnostic> = result.errors().cloned().collect();
        if count_focal_calls(&code, ctx.focal) == 0 {
            diagnostics.push(Diagnostic::error(
                ctx.unit(&code).file_name(),
                1,
                format!("the test never calls {}", ctx.focal.signature),
            ));
        }
        if diagnostics.is_empty() {
            return Ok(ctx.prefix(code, CompileStatus::Passed, rounds, Vec::new()));
        }
        if rounds >= ctx.max_rounds {
            return Ok(ctx.prefix(code, CompileStatus::Failed, rounds, diagnostics));
        }
        rounds += 1;
        let prompt = ctx.llm.prompt(
            TemplateName::SeedRepair,
            &[
                ("attempt", &rounds.to_string()),
                ("focal_signature", &ctx.focal.signature),
                ("diagnostics", &format_diagnostics(&diagnostics)),
                ("code", code.trim_end()),
            ],
        )?;
        let reply = ctx.llm.ask(&prompt, Purpose::SeedRepair)?;
        code = ctx.prepare(&extract_code(&reply));
    }
}

/// The whole seed step: prompt with exemplars, then refinement.
pub fn generate_seed(ctx: &SeedContext<'_>, exemplars: &[ExemplarSnippet]) -> Result<SeedPrefix, SeedError> {
    let (prompt, _) = build_seed_prompt(ctx.llm, ctx.focal, ctx.cls, exemplars, ctx.test_class_name)?;
    let reply = ctx.llm.ask(&prompt, Purpose::SeedGenerate)?;
    refine_seed(&extract_code(&reply), ctx)
}

fn default_value(declared: &str, type_vars: &[&str]) -> String {
    let t = declared.trim();
    if let Some(elem) = t.strip_suffix("...") {
        return format!("({elem}[]) null");
    }
    match t {
        "int" => "0".into(),
        "long" => "0L".into(),
        "short" => "(short) 0".into(),
        "byte" => "(byte) 0".into(),
        "float" => "0.0F".into(),
        "double" => "0.0".into(),
        "char" => "'a'".into(),
        "boolean" => "false".into(),
        "String" | "java.lang.String" => "\"\"".into(),
        _ if type_vars.contains(&t) => "null".into(),
        _ => format!("({t}) null"),
    }
}

fn indent_block(code: &str, indent: &str) -> String {
    code.lines()
        .map(|l| if l.trim().is_empty() { String::new() } else { format!("{indent}{}", l.trim_end()) })
        .collect::<Vec<_>>()
        .join("\n")
}

fn upper_first(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Test class built from the exemplars alone, used when seed refinement
/// fails.
///
/// The first test calls the focal method on a default-constructed receiver
/// with default arguments; each EvoSuite exemplar becomes a further test.
/// Source exemplars, which may rely on the enclosing class, are included
/// as a comment.
pub fn template_prefix(
    focal: &MethodInfo,
    cls: &SourceClass,
    exemplars: &[ExemplarSnippet],
    test_class_name: &str,
) -> SeedPrefix {
    let mut vars: Vec<&str> = cls.type_params.iter().map(|t| t.name.as_str()).collect();
    vars.extend(focal.type_params.iter().map(|t| t.name.as_str()));
    let args = |params: &[crate::code_model::Param]| {
        params.iter().map(|p| default_value(&p.declared_type, &vars)).collect::<Vec<_>>().join(", ")
    };
    let mut setup = Vec::new();
    let call_args = args(&focal.params);
    let call = if focal.is_static() {
        format!("{}.{}({call_args});", cls.name, focal.name)
    } else {
        let ctor = cls.constructors().filter(|c| c.is_public()).min_by_key(|c| c.params.len());
        let ctor_args = ctor.map(|c| args(&c.params)).unwrap_or_default();
        setup.push(format!("{0} target = new {0}({ctor_args});", cls.name));
        format!("target.{}({call_args});", focal.name)
    };
    setup.push(call);
    setup.push(MARKER.to_string());

    let method = upper_first(&focal.name);
    let mut body = String::new();
    let sources: Vec<&ExemplarSnippet> = exemplars.iter().filter(|e| e.origin == Origin::SourceClass).collect();
    if !sources.is_empty() {
        body.push_str("    /*\n     * Invocation examples from the project:\n");
        for e in sources {
            body.push_str("     *\n");
            for l in e.code.replace("*/", "* /").lines() {
                body.push_str(&format!("     *   {}\n", l.trim_end()));
            }
        }
        body.push_str("     */\n\n");
    }
    let mut tests = vec![setup.join("\n")];
    for e in exemplars.iter().filter(|e| e.origin == Origin::Evosuite) {
        let mut code = e.code.trim_end().to_string();
        if marker_count(&code) == 0 {
            code.push('\n');
            code.push_str(MARKER);
        }
        tests.push(code);
    }
    let methods: Vec<String> = tests
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let suffix = if i == 0 { String::new() } else { i.to_string() };
            format!(
                "    @Test\n    public void test{method}{suffix}() throws Exception {{\n{}\n    }}\n",
                indent_block(t, "        ")
            )
        })
        .collect();
    body.push_str(&methods.join("\n"));

    let mut code = String::new();
    if let Some(p) = &cls.package {
        code.push_str(&format!("package {p};\n\n"));
    }
    code.push_str("import org.junit.Test;\n\n");
    code.push_str(&format!("public class {test_class_name} {{\n\n{body}}}\n"));
    SeedPrefix {
        todo_marker_count: marker_count(&code),
        code,
        focal_signature: focal.signature.clone(),
        compile_status: CompileStatus::Unverified,
        repair_rounds_used: 0,
        diagnostics: Vec::new(),
    }
}
