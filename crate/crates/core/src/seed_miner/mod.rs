//! Compilable, assertion-free test prefixes for focal methods.

mod evosuite;
pub(crate) mod mining;
mod seed;
mod strip;

pub use evosuite::{
    ingest_dir, ingest_source, run_evosuite, strip_scaffolding, EvoSuiteConfig, EvoSuiteError, EvoSuiteTestClass,
};
pub use mining::{
    collect_exemplars, count_focal_calls, dedup, mine_evosuite_exemplars, mine_source_exemplars, select_path,
    slice_invocation, ExemplarSet, ExemplarSnippet, MiningPath, Origin, Provenance, PATH1_EVOSUITE_CAP,
    PATH2_EVOSUITE_CAP,
};
pub use seed::{
    build_seed_prompt, ensure_marker, generate_seed, refine_seed, template_prefix, CompileStatus, SeedContext,
    SeedError, SeedPrefix, MAX_SEED_ROUNDS,
};
pub use strip::{assertion_count, marker_count, strip_assertions, AssertionNames, StripError, MARKER};

/// File name for a seed prefix written on its own.
pub fn seed_file_name(focal_class: &str, method: &str) -> String {
    format!("{}_{method}_SeedTest.java", focal_class.replace('$', "_"))
}
