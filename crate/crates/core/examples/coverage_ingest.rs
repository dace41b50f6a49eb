//! Reads a JaCoCo XML report and picks out the focal methods of a source
//! file, matching overloads by erased parameter types.
//!
//!     cargo run --example coverage_ingest -- jacoco.xml Source.java

use std::path::PathBuf;

use jvm_testgen::code_model::parse_compilation_unit;
use jvm_testgen::toolchain::{parse_jacoco_xml, CoverageReport};

fn main() -> anyhow::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/coverage");
    let mut args = std::env::args().skip(1).map(PathBuf::from);
    let xml = args.next().unwrap_or_else(|| dir.join("jacoco.xml"));
    let src = args.next().unwrap_or_else(|| dir.join("Reader.java"));

    let all = parse_jacoco_xml(&std::fs::read_to_string(&xml)?)?;
    let classes = parse_compilation_unit(&std::fs::read_to_string(&src)?, &src)?;
    let wanted: Vec<String> =
        classes.iter().flat_map(|c| &c.methods).filter(|m| !m.is_constructor).map(|m| m.signature.clone()).collect();
    let report = CoverageReport::select(&all, &wanted);
    for (sig, c) in &report.methods {
        println!(
            "{sig}: branches {}/{}, lines {}/{}",
            c.branches_covered, c.branches_total, c.lines_covered, c.lines_total
        );
    }
    for sig in &report.unmatched {
        println!("{sig}: not in the report");
    }
    Ok(())
}
