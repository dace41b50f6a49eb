//! Scans a Java source tree and lists its focal methods.
//!
//!     cargo run --example parse_project -- path/to/src

use std::path::PathBuf;

use jvm_testgen::code_model::{partition_methods, Corpus};

fn main() -> anyhow::Result<()> {
    let root = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/shop"));
    let corpus = Corpus::scan(&root, &[])?;
    println!("project `{}`: {} classes", corpus.project_name(), corpus.classes.len());
    for f in &corpus.failures {
        println!("  skipped {}: {}", f.path.display(), f.message);
    }
    for cls in &corpus.classes {
        let (focal, other) = partition_methods(cls);
        println!("{} ({:?}, {} focal, {} other)", cls.qualified_name(), cls.kind, focal.len(), other.len());
        for m in focal {
            let calls: Vec<&str> = m.invocations.iter().map(|i| i.callee_name.as_str()).collect();
            println!("  {}  calls {:?}", m.signature, calls);
        }
    }
    Ok(())
}
