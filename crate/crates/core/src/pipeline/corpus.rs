use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evosource::EvoSuiteSource;
use super::session::{run_focal, FocalTask, Services};
use super::{SessionConfig, SessionRecord};
use crate::branch_steer::{
    assemble_steer_prompt, extract_branch_points, mechanical_intention, parse_function_intention, BranchIntention,
};
use crate::code_model::{Corpus, MethodInfo, SourceClass};
use crate::complexity::{count_init_features, cyclomatic_complexity, ComplexityReport, ComplexityWeights, MethodEntry};
use crate::prompts::{Prompt, PromptError};
use crate::seed_miner::{
    build_seed_prompt, collect_exemplars, dedup, mine_evosuite_exemplars, mine_source_exemplars, template_prefix,
};
use crate::toolchain::test_class_name;

/// Scores every focal method. Contexts are all minable invocation snippets,
/// from the project source first and then from EvoSuite tests, labelled
/// `file#method`.
pub fn analyze_corpus(corpus: &Corpus, evosuite: &EvoSuiteSource, weights: ComplexityWeights) -> ComplexityReport {
    let entries: Vec<MethodEntry> = corpus
        .focal_methods()
        .into_iter()
        .map(|(cls, focal)| {
            let (tests, _) = evosuite.tests_for(cls);
            let snippets = dedup(
                mine_source_exemplars(cls, corpus, focal)
                    .into_iter()
                    .chain(mine_evosuite_exemplars(&tests, focal, usize::MAX))
                    .collect(),
            );
            let contexts = snippets
                .iter()
                .filter_map(|s| {
                    let f = count_init_features(&s.code, focal).ok()?;
                    Some((format!("{}#{}", s.provenance.file, s.provenance.method), f))
                })
                .collect();
            MethodEntry {
                signature: focal.signature.clone(),
                arity: focal.params.len() as u32,
                ccn: cyclomatic_complexity(focal),
                contexts,
            }
        })
        .collect();
    ComplexityReport::build(&entries, weights)
}

/// One task per focal method accepted by `filter`, in corpus order. Test
/// class ordinals count earlier methods of the same class and name, whether
/// filtered or not, so names do not depend on the filter.
pub fn plan_tasks<'c>(
    corpus: &'c Corpus,
    report: Option<&ComplexityReport>,
    filter: impl Fn(&SourceClass, &MethodInfo) -> bool,
) -> Vec<FocalTask<'c>> {
    let scores: BTreeMap<&str, _> = report
        .map(|r| r.per_focal_method.iter().map(|row| (row.signature.as_str(), row.score)).collect())
        .unwrap_or_default();
    let mut seen: BTreeMap<(String, String), usize> = BTreeMap::new();
    let mut tasks = Vec::new();
    for (cls, focal) in corpus.focal_methods() {
        let ordinal = seen.entry((cls.qualified_name(), focal.name.clone())).or_default();
        let name = test_class_name(&cls.binary_name, &focal.name, *ordinal);
        *ordinal += 1;
        if !filter(cls, focal) {
            continue;
        }
        tasks.push(FocalTask {
            cls,
            focal,
            test_class_name: name,
            init_complexity: scores.get(focal.signature.as_str()).copied(),
            ccn: cyclomatic_complexity(focal).value(),
        });
    }
    tasks
}

/// File locations under an output root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputLayout {
    pub root: PathBuf,
}

impl OutputLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn sessions(&self) -> PathBuf {
        self.root.join("sessions.ndjson")
    }

    pub fn work_dir(&self) -> PathBuf {
        self.root.join("work")
    }

    pub fn transcript(&self) -> PathBuf {
        self.root.join("transcript.json")
    }

    /// Output-relative path of a kept test.
    pub fn test_file(package: Option<&str>, test_class: &str) -> String {
        let mut parts = vec!["tests".to_string()];
        if let Some(p) = package {
            parts.extend(p.split('.').map(str::to_string));
        }
        parts.push(format!("{test_class}.java"));
        parts.join("/")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub planned: usize,
    /// Tasks whose record was already present from an earlier run.
    pub resumed: usize,
    pub started: usize,
    pub compiled: usize,
    pub passed: usize,
    /// Fresh sessions that ended on a gateway error.
    pub gateway_failures: usize,
}

#[derive(Debug, Default)]
pub struct ReadRecords {
    pub records: Vec<SessionRecord>,
    /// Lines that did not parse as a record.
    pub malformed: usize,
}

/// Reads one or more NDJSON record files. Blank lines are ignored, bad
/// lines are logged and counted.
pub fn read_records(paths: &[PathBuf]) -> std::io::Result<ReadRecords> {
    let mut out = ReadRecords::default();
    for path in paths {
        let file = File::open(path)?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line) {
                Ok(r) => out.records.push(r),
                Err(e) => {
                    log::warn!("{}:{}: skipping malformed record: {e}", path.display(), i + 1);
                    out.malformed += 1;
                }
            }
        }
    }
    Ok(out)
}

fn write_sorted(path: &Path, mut records: Vec<SessionRecord>) -> std::io::Result<()> {
    records.sort_by(|a, b| a.focal_signature.cmp(&b.focal_signature));
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).map_err(std::io::Error::other)?);
        text.push('\n');
    }
    std::fs::write(path, text)
}

/// Runs every task on up to `cfg.worker_cap` threads. Each record is
/// appended to `sessions.ndjson` as soon as its session ends; tasks already
/// recorded there are skipped. When all sessions are done the file is
/// rewritten sorted by focal signature.
pub fn run_corpus(
    tasks: &[FocalTask<'_>],
    cfg: &SessionConfig,
    svc: &Services<'_>,
    layout: &OutputLayout,
) -> std::io::Result<RunSummary> {
    std::fs::create_dir_all(&layout.root)?;
    let existing = if layout.sessions().exists() { read_records(&[layout.sessions()])?.records } else { Vec::new() };
    let done: BTreeSet<&str> = existing.iter().map(|r| r.focal_signature.as_str()).collect();
    let todo: Vec<&FocalTask<'_>> = tasks.iter().filter(|t| !done.contains(t.focal.signature.as_str())).collect();
    let mut summary = RunSummary { planned: tasks.len(), resumed: tasks.len() - todo.len(), ..Default::default() };

    let sink = Mutex::new(OpenOptions::new().create(true).append(true).open(layout.sessions())?);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.worker_cap.max(1)).build().map_err(std::io::Error::other)?;
    let fresh: Vec<SessionRecord> = pool.install(|| {
        todo.par_iter()
            .map(|task| -> std::io::Result<SessionRecord> {
                let (mut record, code) = run_focal(task, cfg, svc);
                if let Some(code) = code {
                    let rel = OutputLayout::test_file(task.cls.package.as_deref(), &task.test_class_name);
                    let path = layout.root.join(&rel);
                    std::fs::create_dir_all(path.parent().expect("test path has a parent"))?;
                    std::fs::write(&path, code)?;
                    record.test_file = Some(rel);
                }
                let line = serde_json::to_string(&record).map_err(std::io::Error::other)?;
                let mut f = sink.lock().expect("record sink poisoned");
                writeln!(f, "{line}")?;
                f.flush()?;
                Ok(record)
            })
            .collect::<std::io::Result<Vec<_>>>()
    })?;
    drop(sink);

    summary.started = fresh.len();
    summary.compiled = fresh.iter().filter(|r| r.outcome.compiled).count();
    summary.passed = fresh.iter().filter(|r| r.outcome.tests_passed).count();
    summary.gateway_failures =
        fresh.iter().filter(|r| r.outcome.failure_class == Some(super::FailureClass::GatewayError)).count();
    let all: Vec<SessionRecord> = existing.into_iter().chain(fresh).collect();
    write_sorted(&layout.sessions(), all)?;
    Ok(summary)
}

/// The prompts a session would open with, built without any gateway call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DryRunPrompts {
    pub focal_signature: String,
    pub test_class_name: String,
    pub seed: Prompt,
    pub exemplars_kept: usize,
    /// Steer prompt over the template prefix with mechanical intentions.
    pub steer: Prompt,
}

pub fn dry_run(task: &FocalTask<'_>, svc: &Services<'_>) -> Result<DryRunPrompts, PromptError> {
    let (tests, _) = svc.evosuite.tests_for(task.cls);
    let exemplars = collect_exemplars(task.cls, svc.corpus, task.focal, &tests).all();
    let (seed, exemplars_kept) = build_seed_prompt(&svc.llm, task.focal, task.cls, &exemplars, &task.test_class_name)?;
    let prefix = template_prefix(task.focal, task.cls, &exemplars, &task.test_class_name);
    let intentions: Vec<BranchIntention> = extract_branch_points(task.focal)
        .into_iter()
        .map(|p| BranchIntention { description: mechanical_intention(&p), branch: p })
        .collect();
    let func = parse_function_intention("", task.focal);
    let steer = assemble_steer_prompt(&svc.llm, task.focal, &prefix, &intentions, &func, &task.test_class_name)?;
    Ok(DryRunPrompts {
        focal_signature: task.focal.signature.clone(),
        test_class_name: task.test_class_name.clone(),
        seed,
        exemplars_kept,
        steer: steer.prompt(),
    })
}
