//! Aggregates session records into the effectiveness and binned tables.
//!
//!     cargo run --example aggregate_report -- out/sessions.ndjson

use std::path::PathBuf;

use jvm_testgen::pipeline::{aggregate, read_records};

fn main() -> anyhow::Result<()> {
    let paths: Vec<PathBuf> = std::env::args().skip(1).map(PathBuf::from).collect();
    let paths = if paths.is_empty() {
        vec![PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/shop_golden/sessions.ndjson")]
    } else {
        paths
    };
    let read = read_records(&paths)?;
    if read.malformed > 0 {
        eprintln!("skipped {} malformed line(s)", read.malformed);
    }
    let report = aggregate(&read.records);
    println!("{}", report.to_markdown("jvm-testgen"));
    print!("{}", report.binned_csv()?);
    Ok(())
}
