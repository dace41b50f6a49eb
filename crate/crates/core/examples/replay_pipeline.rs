//! Runs the whole pipeline over the shop fixture from a recorded
//! transcript, with the simulated toolchain, and prints the summary.
//!
//!     cargo run --example replay_pipeline -- [out-dir]

use std::path::PathBuf;
use std::sync::Arc;

use jvm_testgen::code_model::Corpus;
use jvm_testgen::complexity::ComplexityWeights;
use jvm_testgen::llm_gateway::ReplayGateway;
use jvm_testgen::pipeline::{
    aggregate, analyze_corpus, plan_tasks, read_records, run_corpus, EvoSuiteMode, EvoSuiteSource, OutputLayout,
    Services, SessionConfig,
};
use jvm_testgen::prompts::{LlmEnv, Templates, DEFAULT_PROMPT_BUDGET};
use jvm_testgen::seed_miner::AssertionNames;
use jvm_testgen::toolchain::{ImportTable, SimulatedToolchain};

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("jtg-replay"));
    if out.exists() {
        std::fs::remove_dir_all(&out)?;
    }

    let corpus = Arc::new(Corpus::scan(&fixtures.join("shop"), &[])?);
    let replay = ReplayGateway::load(&fixtures.join("shop_transcript.json"))?;
    let model = replay.transcript().meta.model_id.clone();
    let templates = Templates::default();
    let evo = EvoSuiteSource::new(EvoSuiteMode::Pregenerated(fixtures.join("shop_evosuite")));
    let toolchain = SimulatedToolchain::new(corpus.clone());
    let imports = ImportTable::from_corpus(&corpus);
    let names = AssertionNames::default();
    let layout = OutputLayout::new(&out);
    let svc = Services {
        llm: LlmEnv {
            gateway: &replay,
            model_id: &model,
            templates: &templates,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            max_tokens: 2048,
        },
        toolchain: &toolchain,
        corpus: &corpus,
        imports: &imports,
        evosuite: &evo,
        work_root: &layout.work_dir(),
        assertion_names: &names,
    };

    let report = analyze_corpus(&corpus, &evo, ComplexityWeights::default());
    let tasks = plan_tasks(&corpus, Some(&report), |_, _| true);
    let summary = run_corpus(&tasks, &SessionConfig::default(), &svc, &layout)?;
    println!("{summary:?}");

    let records = read_records(&[layout.sessions()])?.records;
    for r in &records {
        println!(
            "{:<28} compiled={:<5} passed={:<5} seed_rounds={} repairs={}",
            r.focal_signature,
            r.outcome.compiled,
            r.outcome.tests_passed,
            r.counters.seed_rounds,
            r.counters.repair_attempts
        );
    }
    println!("\n{}", aggregate(&records).effectiveness_markdown("replay"));
    println!("tests written under {}", out.join("tests").display());
    Ok(())
}
