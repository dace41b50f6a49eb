use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SessionRecord;

/// CCN group labels in display order: one per value up to 14, then the tail.
pub const CCN_GROUPS: [&str; 15] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11", "12", "13", "14", ">14"];

pub fn ccn_group(ccn: u32) -> &'static str {
    CCN_GROUPS[(ccn.max(1) as usize - 1).min(14)]
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn pct(r: f64) -> String {
    format!("{:.2}%", r * 100.0)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub focal_methods: usize,
    pub compiled: usize,
    pub passed: usize,
    pub partial_valid: usize,
    pub compile_pass_rate: f64,
    /// Passed over all focal methods.
    pub test_pass_rate: f64,
    /// Passed over compiled focal methods.
    pub test_pass_rate_compiled: f64,
    /// Sessions feeding each coverage mean.
    pub branch_sessions: usize,
    pub line_sessions: usize,
    pub branch_coverage: f64,
    pub line_coverage: f64,
}

impl Rates {
    pub fn of<'r>(records: impl IntoIterator<Item = &'r SessionRecord>) -> Self {
        let mut r = Rates::default();
        let (mut branch_sum, mut line_sum) = (0.0, 0.0);
        for rec in records {
            let o = &rec.outcome;
            r.focal_methods += 1;
            r.compiled += o.compiled as usize;
            r.passed += o.tests_passed as usize;
            r.partial_valid += o.partial_valid as usize;
            if let Some(c) = o.coverage {
                if c.branches_total > 0 {
                    r.branch_sessions += 1;
                    branch_sum += c.branches_covered as f64 / c.branches_total as f64;
                }
                if c.lines_total > 0 {
                    r.line_sessions += 1;
                    line_sum += c.lines_covered as f64 / c.lines_total as f64;
                }
            }
        }
        r.compile_pass_rate = ratio(r.compiled, r.focal_methods);
        r.test_pass_rate = ratio(r.passed, r.focal_methods);
        r.test_pass_rate_compiled = ratio(r.passed, r.compiled);
        r.branch_coverage = if r.branch_sessions == 0 { 0.0 } else { branch_sum / r.branch_sessions as f64 };
        r.line_coverage = if r.line_sessions == 0 { 0.0 } else { line_sum / r.line_sessions as f64 };
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRow {
    pub label: String,
    #[serde(flatten)]
    pub rates: Rates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub overall: Rates,
    pub per_project: BTreeMap<String, Rates>,
    /// Initialization-complexity bins 0 to 9, then `n/a` for methods
    /// without a score.
    pub by_init_bin: Vec<BinnedRow>,
    pub by_ccn: Vec<BinnedRow>,
    /// Malformed record lines skipped on input.
    pub skipped_records: usize,
}

pub fn aggregate(records: &[SessionRecord]) -> AggregateReport {
    let mut projects: BTreeMap<String, Vec<&SessionRecord>> = BTreeMap::new();
    for r in records {
        projects.entry(r.project.clone()).or_default().push(r);
    }
    let per_project = projects.into_iter().map(|(p, rs)| (p, Rates::of(rs))).collect();

    let bin_label = |r: &SessionRecord| match r.init_complexity {
        Some(s) => s.bin.to_string(),
        None => "n/a".to_string(),
    };
    let by_init_bin = (0..10)
        .map(|b| b.to_string())
        .chain(["n/a".to_string()])
        .map(|label| {
            let rates = Rates::of(records.iter().filter(|r| bin_label(r) == label));
            BinnedRow { label, rates }
        })
        .collect();
    let by_ccn = CCN_GROUPS
        .iter()
        .map(|g| BinnedRow {
            label: g.to_string(),
            rates: Rates::of(records.iter().filter(|r| ccn_group(r.ccn) == *g)),
        })
        .collect();
    AggregateReport { overall: Rates::of(records), per_project, by_init_bin, by_ccn, skipped_records: 0 }
}

const EFFECTIVENESS_HEADER: [&str; 7] = [
    "Method",
    "Projects",
    "Focal methods",
    "Compile passed Rate",
    "Test Passed Rate",
    "Branch Coverage",
    "Line Coverage",
];

const BINNED_HEADER: [&str; 6] =
    ["Focal methods", "Compiled", "Passed", "Compile passed Rate", "Test Passed Rate", "Test Passed Rate (compiled)"];

fn md_row(out: &mut String, cells: &[String]) {
    let _ = writeln!(out, "| {} |", cells.join(" | "));
}

fn md_header(out: &mut String, cells: &[&str]) {
    let _ = writeln!(out, "| {} |", cells.join(" | "));
    let _ = writeln!(out, "|{}", "---|".repeat(cells.len()));
}

impl AggregateReport {
    fn effectiveness_rows(&self, method: &str) -> Vec<Vec<String>> {
        let row = |project: &str, r: &Rates| {
            vec![
                method.to_string(),
                project.to_string(),
                r.focal_methods.to_string(),
                pct(r.compile_pass_rate),
                pct(r.test_pass_rate),
                pct(r.branch_coverage),
                pct(r.line_coverage),
            ]
        };
        let mut rows: Vec<_> = self.per_project.iter().map(|(p, r)| row(p, r)).collect();
        rows.push(row("Total", &self.overall));
        rows
    }

    fn binned_rows(rows: &[BinnedRow]) -> Vec<Vec<String>> {
        rows.iter()
            .map(|b| {
                let r = &b.rates;
                vec![
                    b.label.clone(),
                    r.focal_methods.to_string(),
                    r.compiled.to_string(),
                    r.passed.to_string(),
                    pct(r.compile_pass_rate),
                    pct(r.test_pass_rate),
                    pct(r.test_pass_rate_compiled),
                ]
            })
            .collect()
    }

    /// Effectiveness table, one row per project plus a total, labelled
    /// with `method` in the first column.
    pub fn effectiveness_markdown(&self, method: &str) -> String {
        let mut out = String::new();
        md_header(&mut out, &EFFECTIVENESS_HEADER);
        for r in self.effectiveness_rows(method) {
            md_row(&mut out, &r);
        }
        out
    }

    pub fn effectiveness_csv(&self, method: &str) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(EFFECTIVENESS_HEADER)?;
        for r in self.effectiveness_rows(method) {
            w.write_record(&r)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }

    /// Full human-readable report: the effectiveness table followed by the
    /// initialization-complexity and CCN breakdowns.
    pub fn to_markdown(&self, method: &str) -> String {
        let mut out = String::from("## Effectiveness\n\n");
        out.push_str(&self.effectiveness_markdown(method));
        let _ = writeln!(
            out,
            "\nTest Passed Rate over compiled focal methods: {}. Partially valid tests: {}.",
            pct(self.overall.test_pass_rate_compiled),
            self.overall.partial_valid
        );
        for (title, first, rows) in [
            ("Pass rate by initialization complexity", "Init bin", &self.by_init_bin),
            ("Pass rate by cyclomatic complexity", "CCN", &self.by_ccn),
        ] {
            let _ = writeln!(out, "\n## {title}\n");
            let header: Vec<&str> = [first].into_iter().chain(BINNED_HEADER).collect();
            md_header(&mut out, &header);
            for r in Self::binned_rows(rows) {
                md_row(&mut out, &r);
            }
        }
        let _ = writeln!(out, "\nSkipped malformed records: {}", self.skipped_records);
        out
    }

    /// Both breakdowns in one CSV, tagged by a `grouping` column.
    pub fn binned_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = ["grouping", "label"].into_iter().chain(BINNED_HEADER).collect();
        w.write_record(&header)?;
        for (grouping, rows) in [("init_bin", &self.by_init_bin), ("ccn", &self.by_ccn)] {
            for r in Self::binned_rows(rows) {
                w.write_record([grouping.to_string()].iter().chain(&r))?;
            }
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is utf-8"))
    }
}
