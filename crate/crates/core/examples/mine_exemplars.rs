//! Invocation exemplars for each focal method: which mining path applies
//! and the snippets kept from the source tree and from EvoSuite tests.

use std::path::PathBuf;

use jvm_testgen::code_model::Corpus;
use jvm_testgen::pipeline::{EvoSuiteMode, EvoSuiteSource};
use jvm_testgen::seed_miner::collect_exemplars;

fn main() -> anyhow::Result<()> {
    let fixtures = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let corpus = Corpus::scan(&fixtures.join("shop"), &[])?;
    let evo = EvoSuiteSource::new(EvoSuiteMode::Pregenerated(fixtures.join("shop_evosuite")));
    for (cls, focal) in corpus.focal_methods() {
        let (tests, err) = evo.tests_for(cls);
        if let Some(e) = err {
            eprintln!("{}: {e}", cls.qualified_name());
        }
        let set = collect_exemplars(cls, &corpus, focal, &tests);
        println!("== {} [{:?}]", focal.signature, set.path);
        for s in set.all() {
            println!("-- {:?} from {}#{}", s.origin, s.provenance.file, s.provenance.method);
            println!("{}", s.code);
        }
    }
    Ok(())
}
