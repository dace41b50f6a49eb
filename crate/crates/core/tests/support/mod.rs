//! Shared helpers for integration tests: the shop fixture project, the
//! scripted author behind its golden transcript, and a replay harness.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use jvm_testgen::code_model::Corpus;
use jvm_testgen::llm_gateway::{Gateway, Purpose, Role, StubGateway};
use jvm_testgen::pipeline::{
    aggregate, analyze_corpus, plan_tasks, read_records, run_corpus, EvoSuiteMode, EvoSuiteSource, OutputLayout,
    Services, SessionConfig,
};
use jvm_testgen::prompts::{fenced_blocks, LlmEnv, Templates, DEFAULT_PROMPT_BUDGET};
use jvm_testgen::seed_miner::{template_prefix, AssertionNames, MARKER};
use jvm_testgen::toolchain::{ImportTable, SimulatedToolchain};

pub const MODEL: &str = "scripted-author";

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn shop_root() -> PathBuf {
    fixtures().join("shop")
}

pub fn golden_dir() -> PathBuf {
    fixtures().join("shop_golden")
}

pub fn shop_corpus() -> Arc<Corpus> {
    Arc::new(Corpus::scan(&shop_root(), &[]).expect("shop fixture parses"))
}

fn user_text(req: &jvm_testgen::llm_gateway::CompletionRequest) -> String {
    req.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.clone()).unwrap_or_default()
}

fn test_block(text: &str, heading: &str) -> String {
    let at = text.find(heading).map(|i| i + heading.len()).unwrap_or(0);
    fenced_blocks(&text[at..]).into_iter().map(|(_, b)| b).next().unwrap_or_default()
}

fn between<'t>(text: &'t str, start: &str, end: &str) -> Option<&'t str> {
    let from = text.find(start)? + start.len();
    let to = text[from..].find(end)? + from;
    Some(&text[from..to])
}

fn strip_directives(code: &str) -> String {
    code.lines().filter(|l| !l.contains("// sim:")).map(|l| format!("{l}\n")).collect()
}

fn java(code: &str) -> String {
    format!("```java\n{code}```\n")
}

/// Plays a model over the shop fixture. Seeds come from the template
/// prefix; a few methods are given scripted trouble:
///
/// - `times`: the first seed does not compile
/// - `count`: the first test fails an assertion, the repair fixes it
/// - `isEmpty`: compile errors until repair attempt 2
/// - `price`: the test always throws, so the session ends partial
pub fn author(corpus: Arc<Corpus>) -> StubGateway {
    StubGateway::from_fn(move |req, _| {
        let text = user_text(req);
        match req.purpose {
            Purpose::SeedGenerate => {
                let sig = between(&text, "Signature: ", "\n").unwrap_or_default();
                let name = between(&text, "declares `public class ", "`").unwrap_or_default();
                let (owner, _) = sig.split_once('#').unwrap_or_default();
                let cls = corpus.class_by_qualified_name(owner).expect("known class");
                let focal = cls.method_by_signature(sig).expect("known focal");
                let mut code = template_prefix(focal, cls, &[], name).code;
                if focal.name == "times" {
                    code = code.replace(MARKER, &format!("{MARKER}\n        // sim:compile-error cannot find symbol"));
                }
                java(&code)
            }
            Purpose::SeedRepair => java(&strip_directives(&test_block(&text, "## Current code"))),
            Purpose::BranchIntention => {
                let list = text.split("## Branch points").nth(1).unwrap_or_default();
                list.lines()
                    .filter_map(|l| l.split_once(". [").map(|(n, _)| n.trim().to_string()))
                    .filter(|n| n.parse::<u32>().is_ok())
                    .map(|n| format!("{n}. exercised by input case {n}"))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
            Purpose::FunctionIntention => {
                "Purpose: computes a value for the shop domain\nInput/Output: depends on the receiver state\nSide effects: none\nCorner cases: negative and empty inputs".into()
            }
            Purpose::TestGenerate => {
                let prefix = test_block(&text, "## Test prefix");
                let mut code = prefix.replace(MARKER, "org.junit.Assert.assertNotNull(target);");
                let class = between(&code, "public class ", " ").unwrap_or_default().to_string();
                let directive = if class.contains("_count_") {
                    Some("// sim:assertion-failure expected:<1> but was:<0>")
                } else if class.contains("_isEmpty_") {
                    Some("// sim:compile-error incompatible types")
                } else if class.contains("_price_") {
                    Some("// sim:runtime-exception java.lang.NullPointerException")
                } else {
                    None
                };
                if let Some(d) = directive {
                    code = code.replacen("org.junit.Assert.assertNotNull(target);", &format!("{d}\n        org.junit.Assert.assertNotNull(target);"), 1);
                }
                java(&code)
            }
            Purpose::TestRepair => {
                let code = test_block(&text, "## Current test");
                let keep = (code.contains("_isEmpty_") && text.contains("repair attempt 1)")) || code.contains("_price_");
                java(&if keep { code } else { strip_directives(&code) })
            }
            Purpose::Other => String::new(),
        }
    })
}

/// Everything a replay produces, as bytes keyed by output-relative path.
pub type Outputs = std::collections::BTreeMap<String, Vec<u8>>;

pub fn collect_outputs(root: &Path) -> Outputs {
    let mut out = Outputs::new();
    for e in walkdir::WalkDir::new(root).sort_by_file_name() {
        let e = e.unwrap();
        let rel = e.path().strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
        if e.file_type().is_file() && !rel.starts_with("work/") {
            out.insert(rel, std::fs::read(e.path()).unwrap());
        }
    }
    out
}

/// Runs the shop fixture end to end into `out` and writes the aggregate
/// report next to the records.
pub fn run_shop(gateway: &dyn Gateway, out: &Path) -> Outputs {
    let corpus = shop_corpus();
    let templates = Templates::default();
    let tc = SimulatedToolchain::new(corpus.clone());
    let evo = EvoSuiteSource::new(EvoSuiteMode::Pregenerated(fixtures().join("shop_evosuite")));
    let imports = ImportTable::from_corpus(&corpus);
    let names = AssertionNames::default();
    let layout = OutputLayout::new(out);
    let work = layout.work_dir();
    let svc = Services {
        llm: LlmEnv {
            gateway,
            model_id: MODEL,
            templates: &templates,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            max_tokens: 2048,
        },
        toolchain: &tc,
        corpus: &corpus,
        imports: &imports,
        evosuite: &evo,
        work_root: &work,
        assertion_names: &names,
    };
    let report = analyze_corpus(&corpus, &evo, Default::default());
    let tasks = plan_tasks(&corpus, Some(&report), |_, _| true);
    run_corpus(&tasks, &SessionConfig::default(), &svc, &layout).unwrap();
    let records = read_records(&[layout.sessions()]).unwrap().records;
    let agg = aggregate(&records);
    std::fs::write(out.join("aggregate.json"), serde_json::to_string_pretty(&agg).unwrap() + "\n").unwrap();
    std::fs::write(out.join("report.md"), agg.to_markdown("jvm-testgen")).unwrap();
    collect_outputs(out)
}
