//! Initialization complexity and CCN for every focal method, as CSV.
//!
//!     cargo run --example complexity_report -- path/to/src [evosuite-tests]

use std::path::PathBuf;

use jvm_testgen::code_model::Corpus;
use jvm_testgen::complexity::ComplexityWeights;
use jvm_testgen::pipeline::{analyze_corpus, EvoSuiteMode, EvoSuiteSource};

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args = std::env::args().skip(1);
    let root = args.next().map(PathBuf::from).unwrap_or_else(|| fixtures.join("shop"));
    let evo = match args.next() {
        Some(dir) => EvoSuiteSource::new(EvoSuiteMode::Pregenerated(dir.into())),
        None if root == fixtures.join("shop") => {
            EvoSuiteSource::new(EvoSuiteMode::Pregenerated(fixtures.join("shop_evosuite")))
        }
        None => EvoSuiteSource::disabled(),
    };
    let corpus = Corpus::scan(&root, &[])?;
    let report = analyze_corpus(&corpus, &evo, ComplexityWeights::default());
    if let Some(stats) = &report.stats {
        eprintln!("normalization: {}", serde_json::to_string(stats)?);
    }
    print!("{}", report.to_csv()?);
    Ok(())
}
