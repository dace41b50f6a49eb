//! Branch points, branch and function intentions, and the steer prompt.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use tree_sitter::Node;

use crate::code_model::{Location, MethodInfo, SourceClass};
use crate::java::{self, Fragment};
use crate::llm_gateway::{GatewayError, Purpose};
use crate::prompts::{class_context, LlmEnv, Prompt, PromptError, TemplateName};
use crate::seed_miner::mining::referenced_names;
use crate::seed_miner::SeedPrefix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Conditional,
    Loop,
    Exception,
}

impl BranchKind {
    fn label(self) -> &'static str {
        match self {
            BranchKind::Conditional => "conditional",
            BranchKind::Loop => "loop",
            BranchKind::Exception => "exception",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub kind: BranchKind,
    pub condition_text: String,
    /// Position of the construct in the focal method's file.
    pub location: Location,
    pub enclosing_signature: String,
    /// The condition mentions a parameter of the focal method.
    pub input_dependent: bool,
}

impl BranchPoint {
    /// `if (x > 0)`, `case RED`, `catch (IOException)` and so on.
    pub fn describe(&self) -> String {
        self.condition_text.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchIntention {
    pub branch: BranchPoint,
    pub description: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionIntention {
    pub purpose: String,
    pub io_behavior: String,
    pub side_effects: String,
    pub corner_cases: String,
}

impl FunctionIntention {
    pub fn render(&self) -> String {
        [
            ("Purpose", &self.purpose),
            ("Input/Output", &self.io_behavior),
            ("Side effects", &self.side_effects),
            ("Corner cases", &self.corner_cases),
        ]
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(k, v)| format!("{k}: {v}"))
        .collect::<Vec<_>>()
        .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteerPrompt {
    pub prefix: SeedPrefix,
    /// The intentions that fit the budget.
    pub branch_intentions: Vec<BranchIntention>,
    pub function_intention: FunctionIntention,
    pub dropped_intentions: usize,
    pub system: String,
    pub rendered: String,
}

impl SteerPrompt {
    pub fn prompt(&self) -> Prompt {
        Prompt { system: self.system.clone(), user: self.rendered.clone() }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SteerError {
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

fn inner_condition<'t>(node: Node<'t>) -> Node<'t> {
    if node.kind() == "parenthesized_expression" {
        if let Some(inner) = java::named_children(node).first() {
            return *inner;
        }
    }
    node
}

fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Every branch point of `focal`'s body in source order.
///
/// One point per `if` (an `else if` is its own `if`), per `case` label, per
/// loop header, per `catch` clause and per `throw`. `default` labels and
/// plain `else` arms get no point of their own. Bodies of anonymous and
/// local classes are skipped; lambdas are not.
pub fn extract_branch_points(focal: &MethodInfo) -> Vec<BranchPoint> {
    let frag = Fragment::member(&focal.content, focal.start.to_zero_based());
    let src = frag.source.as_str();
    let Some(decl) =
        frag.content_nodes().into_iter().find(|n| matches!(n.kind(), "method_declaration" | "constructor_declaration"))
    else {
        return Vec::new();
    };
    let Some(body) = decl.child_by_field_name("body") else { return Vec::new() };
    let params: BTreeSet<String> = focal.params.iter().map(|p| p.name.clone()).collect();

    let mut points = Vec::new();
    let mut push = |kind: BranchKind, at: Node<'_>, text: String, reads: Option<Node<'_>>| {
        let mut names = BTreeSet::new();
        if let Some(r) = reads {
            referenced_names(r, src, &mut names);
        }
        points.push(BranchPoint {
            kind,
            condition_text: text,
            location: Location::from_zero_based(frag.map_position(at.start_position())),
            enclosing_signature: focal.signature.clone(),
            input_dependent: !names.is_disjoint(&params),
        });
    };
    for node in java::descendants_pruned(body, java::is_nested_type_scope) {
        match node.kind() {
            "if_statement" => {
                if let Some(c) = node.child_by_field_name("condition") {
                    let c = inner_condition(c);
                    push(BranchKind::Conditional, node, format!("if ({})", one_line(java::text(c, src))), Some(c));
                }
            }
            "switch_label" => {
                let values: Vec<Node<'_>> = java::named_children(node);
                if values.is_empty() {
                    continue;
                }
                let subject = node
                    .parent()
                    .and_then(|p| p.parent())
                    .filter(|p| p.kind() == "switch_block")
                    .and_then(|b| b.parent())
                    .and_then(|s| s.child_by_field_name("condition"))
                    .map(inner_condition);
                let labels: Vec<String> = values.iter().map(|v| one_line(java::text(*v, src))).collect();
                let text = match subject {
                    Some(s) => format!("switch ({}) case {}", one_line(java::text(s, src)), labels.join(", ")),
                    None => format!("case {}", labels.join(", ")),
                };
                push(BranchKind::Conditional, node, text, subject);
            }
            "for_statement" => {
                let c = node.child_by_field_name("condition");
                let text = match c {
                    Some(c) => format!("for (...; {}; ...)", one_line(java::text(c, src))),
                    None => "for (;;)".to_string(),
                };
                push(BranchKind::Loop, node, text, c);
            }
            "enhanced_for_statement" => {
                let value = node.child_by_field_name("value");
                let name = node.child_by_field_name("name").map(|n| java::text(n, src)).unwrap_or("_");
                let over = value.map(|v| one_line(java::text(v, src))).unwrap_or_default();
                push(BranchKind::Loop, node, format!("for ({name} : {over})"), value);
            }
            "while_statement" | "do_statement" => {
                if let Some(c) = node.child_by_field_name("condition") {
                    let c = inner_condition(c);
                    let kw = if node.kind() == "while_statement" { "while" } else { "do ... while" };
                    push(BranchKind::Loop, node, format!("{kw} ({})", one_line(java::text(c, src))), Some(c));
                }
            }
            "catch_clause" => {
                let ty = java::descendants(node)
                    .into_iter()
                    .find(|n| n.kind() == "catch_type")
                    .map(|t| one_line(java::text(t, src)))
                    .unwrap_or_default();
                push(BranchKind::Exception, node, format!("catch ({ty})"), None);
            }
            "throw_statement" => {
                let e = java::named_children(node).first().copied();
                let thrown = e.map(|e| one_line(java::text(e, src))).unwrap_or_default();
                push(BranchKind::Exception, node, format!("throw {thrown}"), e);
            }
            _ => {}
        }
    }
    points.sort_by_key(|p| p.location);
    points
}

/// Fallback description used when no model answer is available.
pub fn mechanical_intention(point: &BranchPoint) -> String {
    let text = &point.condition_text;
    match point.kind {
        BranchKind::Conditional if text.starts_with("case ") => format!("an input that selects `{text}`"),
        BranchKind::Conditional => format!("inputs that make `{text}` true and inputs that make it false"),
        BranchKind::Loop => format!("inputs that skip `{text}` and inputs that iterate it more than once"),
        BranchKind::Exception => format!("an input that reaches `{text}`"),
    }
}

fn render_points(points: &[BranchPoint]) -> String {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| format!("{}. [{}, line {}] {}", i + 1, p.kind.label(), p.location.line, p.describe()))
        .collect::<Vec<_>>()
        .join("\n")
}

/// `N. text` lines of a reply; the first answer for each number wins.
fn numbered_answers(reply: &str) -> BTreeMap<usize, String> {
    let mut out = BTreeMap::new();
    for line in reply.lines() {
        let t = line.trim().trim_start_matches(['-', '*']).trim();
        let digits: String = t.chars().take_while(|c| c.is_ascii_digit()).collect();
        let Ok(n) = digits.parse::<usize>() else { continue };
        let rest = t[digits.len()..].trim_start();
        let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')).or_else(|| rest.strip_prefix(':'))
        else {
            continue;
        };
        let text = rest.trim();
        if !text.is_empty() {
            out.entry(n).or_insert_with(|| text.to_string());
        }
    }
    out
}

/// Asks for all of `focal`'s branch points in one call. Points the reply
/// does not describe get [`mechanical_intention`].
pub fn infer_branch_intentions(
    llm: &LlmEnv<'_>,
    focal: &MethodInfo,
    points: &[BranchPoint],
) -> Result<Vec<BranchIntention>, SteerError> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let prompt = llm.prompt(
        TemplateName::BranchIntentions,
        &[("focal_body", &focal.content), ("branch_points", &render_points(points))],
    )?;
    let reply = llm.ask(&prompt, Purpose::BranchIntention)?;
    let answers = numbered_answers(&reply);
    Ok(points
        .iter()
        .enumerate()
        .map(|(i, p)| BranchIntention {
            branch: p.clone(),
            description: answers.get(&(i + 1)).cloned().unwrap_or_else(|| mechanical_intention(p)),
        })
        .collect())
}

#[derive(Clone, Copy)]
enum Section {
    Purpose,
    Io,
    SideEffects,
    CornerCases,
}

fn section_label(line: &str) -> Option<(Section, &str)> {
    let t = line.trim().trim_start_matches(['-', '*', '#', ' ']);
    let (label, rest) = t.split_once(':')?;
    let label = label.trim().trim_matches('*').trim().to_ascii_lowercase();
    let section = match label.as_str() {
        "purpose" => Section::Purpose,
        "input/output" | "input-output behavior" | "input/output behavior" | "i/o" | "io behavior" => Section::Io,
        "side effects" | "side-effects" => Section::SideEffects,
        "corner cases" | "edge cases" => Section::CornerCases,
        _ => return None,
    };
    Some((section, rest.trim_start_matches('*').trim()))
}

/// Splits a labeled reply into the four fields. Unlabeled text before the
/// first label is ignored; an empty purpose falls back to the declaration.
pub fn parse_function_intention(reply: &str, focal: &MethodInfo) -> FunctionIntention {
    let mut fi = FunctionIntention::default();
    let mut current: Option<Section> = None;
    for line in reply.lines() {
        let (section, text) = match section_label(line) {
            Some((s, rest)) => {
                current = Some(s);
                (s, rest)
            }
            None => match current {
                Some(s) => (s, line.trim()),
                None => continue,
            },
        };
        if text.is_empty() {
            continue;
        }
        let field = match section {
            Section::Purpose => &mut fi.purpose,
            Section::Io => &mut fi.io_behavior,
            Section::SideEffects => &mut fi.side_effects,
            Section::CornerCases => &mut fi.corner_cases,
        };
        if !field.is_empty() {
            field.push(' ');
        }
        field.push_str(text);
    }
    if fi.purpose.is_empty() {
        fi.purpose = format!("Implements `{}`.", focal.header());
    }
    fi
}

pub fn summarize_function_intention(
    llm: &LlmEnv<'_>,
    focal: &MethodInfo,
    cls: &SourceClass,
) -> Result<FunctionIntention, SteerError> {
    let prompt = llm.prompt(
        TemplateName::FunctionIntention,
        &[
            ("focal_signature", &focal.signature),
            ("focal_body", &focal.content),
            ("class_context", &class_context(cls)),
        ],
    )?;
    let reply = llm.ask(&prompt, Purpose::FunctionIntention)?;
    Ok(parse_function_intention(&reply, focal))
}

fn render_intentions(intentions: &[BranchIntention]) -> String {
    if intentions.is_empty() {
        return "(the method has no branch points)".to_string();
    }
    intentions
        .iter()
        .enumerate()
        .map(|(i, b)| {
            format!("{}. `{}` (line {}): {}", i + 1, b.branch.describe(), b.branch.location.line, b.description)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

/// Steer prompt from the prefix and intentions, dropping intentions from
/// the end until it fits the budget. The prefix is never shortened.
pub fn assemble_steer_prompt(
    llm: &LlmEnv<'_>,
    focal: &MethodInfo,
    prefix: &SeedPrefix,
    intentions: &[BranchIntention],
    func: &FunctionIntention,
    test_class_name: &str,
) -> Result<SteerPrompt, PromptError> {
    let func_text = func.render();
    let prefix_code = prefix.code.trim_end();
    for n in (0..=intentions.len()).rev() {
        let p = llm.prompt(
            TemplateName::Steer,
            &[
                ("focal_body", &focal.content),
                ("prefix", prefix_code),
                ("branch_intentions", &render_intentions(&intentions[..n])),
                ("function_intention", &func_text),
                ("test_class_name", test_class_name),
            ],
        )?;
        if p.tokens() <= llm.prompt_budget {
            return Ok(SteerPrompt {
                prefix: prefix.clone(),
                branch_intentions: intentions[..n].to_vec(),
                function_intention: func.clone(),
                dropped_intentions: intentions.len() - n,
                system: p.system,
                rendered: p.user,
            });
        }
        if n == 0 {
            return Err(PromptError::PromptOverflow { needed: p.tokens(), budget: llm.prompt_budget });
        }
    }
    unreachable!("the loop returns at n = 0")
}

#[cfg(test)]
mod tests {
    use std::path::Path;

    use super::*;
    use crate::code_model::parse_compilation_unit;
    use crate::llm_gateway::StubGateway;
    use crate::prompts::Templates;
    use crate::seed_miner::{template_prefix, MARKER};

    fn method(body: &str) -> (SourceClass, MethodInfo) {
        let src = format!("package p;\npublic class C {{\n{body}\n}}\n");
        let cls = parse_compilation_unit(&src, Path::new("C.java")).unwrap().remove(0);
        let m = cls.methods[0].clone();
        (cls, m)
    }

    #[test]
    fn straight_line_has_no_points() {
        let (_, m) = method("public int f(int a) { int b = a + 1; return b * 2; }");
        assert!(extract_branch_points(&m).is_empty());
    }

    #[test]
    fn compound_condition_is_one_point() {
        let (_, m) = method("public void f(int a, Object b) {\n  if (a > 0 && b == null) { g(); } else { h(); }\n}");
        let pts = extract_branch_points(&m);
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].kind, BranchKind::Conditional);
        assert_eq!(pts[0].condition_text, "if (a > 0 && b == null)");
        assert!(pts[0].input_dependent);
        assert_eq!(pts[0].location, Location { line: 4, column: 3 });
    }

    #[test]
    fn switch_labels_loops_and_lambdas() {
        let (_, m) = method(
            "public int f(String s, java.util.List<Integer> xs) {\n  switch (s) { case \"a\": case \"b\": return 1; default: break; }\n  int t = 0;\n  while (t < 3) t++;\n  do { t--; } while (t > 0);\n  xs.forEach(x -> { if (x > 0) { } });\n  new Runnable() { public void run() { if (true) {} } };\n  return t;\n}",
        );
        let pts = extract_branch_points(&m);
        let texts: Vec<&str> = pts.iter().map(|p| p.condition_text.as_str()).collect();
        assert_eq!(
            texts,
            ["switch (s) case \"a\"", "switch (s) case \"b\"", "while (t < 3)", "do ... while (t > 0)", "if (x > 0)"]
        );
        assert!(pts[0].input_dependent && !pts[2].input_dependent);
    }

    #[test]
    fn pure_function_of_text() {
        let (_, m) = method(
            "public void f(int a) { for (int i = 0; i < a; i++) { if (i == 2) throw new IllegalStateException(); } }",
        );
        assert_eq!(extract_branch_points(&m), extract_branch_points(&m));
        assert_eq!(extract_branch_points(&m).len(), 3);
    }

    fn env<'a>(stub: &'a StubGateway, templates: &'a Templates) -> LlmEnv<'a> {
        LlmEnv { gateway: stub, model_id: "m", templates, prompt_budget: 12_000, max_tokens: 512 }
    }

    #[test]
    fn intentions_from_reply_with_fallback() {
        let (_, m) = method("public void f(int a, Object b) { if (a > 0) {} while (b != null) { b = null; } }");
        let pts = extract_branch_points(&m);
        let t = Templates::default();
        let stub = StubGateway::sequence(["1. The first argument is positive.\nnothing else"]);
        let got = infer_branch_intentions(&env(&stub, &t), &m, &pts).unwrap();
        assert_eq!(got[0].description, "The first argument is positive.");
        assert_eq!(
            got[1].description,
            "inputs that skip `while (b != null)` and inputs that iterate it more than once"
        );
        assert!(stub.calls()[0].user_text().contains("2. [loop, line 3] while (b != null)"));

        let none = StubGateway::sequence(Vec::<String>::new());
        assert!(infer_branch_intentions(&env(&none, &t), &m, &[]).unwrap().is_empty());
        assert_eq!(none.call_count(), 0);
    }

    #[test]
    fn function_intention_sections() {
        let (cls, m) = method("public int f(int a) { return a; }");
        let t = Templates::default();
        let stub = StubGateway::sequence([
            "**Purpose:** Returns its argument.\nInput/Output: identity\n  on ints.\nSide effects: none\nCorner cases: negative numbers",
            "",
        ]);
        let fi = summarize_function_intention(&env(&stub, &t), &m, &cls).unwrap();
        assert_eq!(fi.purpose, "Returns its argument.");
        assert_eq!(fi.io_behavior, "identity on ints.");
        assert_eq!(fi.side_effects, "none");
        assert_eq!(fi.corner_cases, "negative numbers");
        let fi = summarize_function_intention(&env(&stub, &t), &m, &cls).unwrap();
        assert_eq!(fi.purpose, "Implements `public int f(int a)`.");
        assert!(fi.io_behavior.is_empty() && fi.side_effects.is_empty() && fi.corner_cases.is_empty());
    }

    #[test]
    fn steer_prompt_trims_intentions_not_prefix() {
        let (cls, m) = method("public void f(int a) { if (a > 0) {} }");
        let prefix = template_prefix(&m, &cls, &[], "C_f_Test");
        let point = extract_branch_points(&m).remove(0);
        let intentions: Vec<BranchIntention> = (0..30)
            .map(|i| BranchIntention {
                branch: point.clone(),
                description: format!("intention number {i} {}", "x".repeat(80)),
            })
            .collect();
        let t = Templates::default();
        let stub = StubGateway::sequence(Vec::<String>::new());
        let mut llm = env(&stub, &t);
        let fi = FunctionIntention { purpose: "p".into(), ..Default::default() };
        let full = assemble_steer_prompt(&llm, &m, &prefix, &intentions, &fi, "C_f_Test").unwrap();
        assert_eq!(full.dropped_intentions, 0);
        assert!(full.rendered.contains(prefix.code.trim_end()));
        assert!(full.rendered.contains(MARKER));
        llm.prompt_budget = full.prompt().tokens() - 200;
        let cut = assemble_steer_prompt(&llm, &m, &prefix, &intentions, &fi, "C_f_Test").unwrap();
        assert!(cut.dropped_intentions > 0);
        assert!(cut.rendered.contains("intention number 0 ") && !cut.rendered.contains("intention number 29"));
        assert!(cut.rendered.contains(prefix.code.trim_end()));
        llm.prompt_budget = 50;
        assert!(assemble_steer_prompt(&llm, &m, &prefix, &intentions, &fi, "C_f_Test").is_err());
    }
}
