//! The `jvm-testgen` command line.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::Serialize;

pub use config::{
    BackendConfig, BackendKind, ConfigError, EvoSuiteModeKind, EvoSuiteSection, RunConfig, ToolchainConfig,
    ToolchainKind,
};

use crate::code_model::{Corpus, MethodInfo, ScanError, SourceClass};
use crate::complexity::ComplexityReport;
use crate::llm_gateway::{Gateway, GatewayError, LiveGateway, Recorder, ReplayGateway, Role, StubGateway, Transcript};
use crate::pipeline::{
    aggregate, analyze_corpus, ccn_group, dry_run, plan_tasks, read_records, run_corpus, EvoSuiteMode, EvoSuiteSource,
    FocalTask, OutputLayout, Services, CCN_GROUPS,
};
use crate::prompts::{fenced_blocks, LlmEnv, Templates};
use crate::seed_miner::{collect_exemplars, generate_seed, seed_file_name, ExemplarSet, SeedContext, SeedPrefix};
use crate::toolchain::{ImportTable, JdkToolchain, SimulatedToolchain, Toolchain, ToolchainError, Workspace};

#[derive(Debug, Parser)]
#[command(name = "jvm-testgen", version, about = "Generate JUnit tests for Java focal methods")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Project root; overrides the configuration.
    #[arg(long, global = true)]
    pub project: Option<PathBuf>,
    /// Output root; overrides the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Selection {
    /// Glob over `<package>.<Class>#<method>` or the full signature;
    /// repeatable, any match selects.
    #[arg(long)]
    pub filter: Vec<String>,
    #[arg(long)]
    pub backend: Option<BackendKind>,
    #[arg(long)]
    pub toolchain: Option<ToolchainKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every focal method and write the complexity report.
    Analyze,
    /// Mine invocation exemplars and refine seed prefixes.
    MineSeeds {
        #[command(flatten)]
        select: Selection,
        /// Stop after mining; no gateway or toolchain is used.
        #[arg(long)]
        exemplars_only: bool,
    },
    /// Run the full pipeline and write tests plus session records.
    Generate {
        #[command(flatten)]
        select: Selection,
        #[arg(long)]
        workers: Option<usize>,
        /// Write the opening prompts of each session without calling the
        /// gateway.
        #[arg(long)]
        dry_run: bool,
    },
    /// Aggregate session records into tables.
    Report {
        /// Record files; defaults to `<out>/sessions.ndjson`.
        records: Vec<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("toolchain missing: {0}")]
    ToolchainMissing(String),
    #[error("gateway unreachable: {0}")]
    GatewayUnreachable(String),
    #[error("{0}")]
    ZeroWork(String),
    #[error(transparent)]
    Other(#[from] anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Other(_) => 1,
            CliError::Config(_) => 2,
            CliError::ToolchainMissing(_) => 3,
            CliError::GatewayUnreachable(_) => 4,
            CliError::ZeroWork(_) => 5,
        }
    }
}

impl From<ToolchainError> for CliError {
    fn from(e: ToolchainError) -> Self {
        match e {
            ToolchainError::ToolchainMissing(m) | ToolchainError::AgentMissing(m) => CliError::ToolchainMissing(m),
            ToolchainError::Io(m) => CliError::Io(std::io::Error::other(m)),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<ScanError> for CliError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::BadGlob(..) => CliError::Config(ConfigError::Invalid(e.to_string())),
            other => CliError::Io(std::io::Error::other(other.to_string())),
        }
    }
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

pub fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.project {
        cfg.project_root = p.clone();
    }
    if let Some(o) = &cli.out {
        cfg.output_root = o.clone();
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Analyze => {
            cfg.validate()?;
            cmd_analyze(&cfg)
        }
        Command::MineSeeds { select, exemplars_only } => {
            select.apply(&mut cfg);
            cfg.validate()?;
            cmd_mine_seeds(&cfg, &select.filter, exemplars_only)
        }
        Command::Generate { select, workers, dry_run } => {
            select.apply(&mut cfg);
            if let Some(w) = workers {
                cfg.session.worker_cap = w;
            }
            cfg.validate()?;
            cmd_generate(&cfg, &select.filter, dry_run)
        }
        Command::Report { records } => {
            let records =
                if records.is_empty() { vec![OutputLayout::new(&cfg.output_root).sessions()] } else { records };
            cmd_report(&records, &cfg.output_root.join("report"), &cfg.method_label)
        }
    }
}

impl Selection {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(b) = self.backend {
            cfg.backend.kind = b;
        }
        if let Some(t) = self.toolchain {
            cfg.toolchain.kind = t;
        }
    }
}

fn write(path: &Path, text: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value).map_err(anyhow::Error::from)? + "\n")
}

fn scan(cfg: &RunConfig) -> Result<Arc<Corpus>, CliError> {
    let corpus = Corpus::scan(&cfg.project_root, &cfg.exclude)?;
    for f in &corpus.failures {
        log::warn!("{}: {}", f.path.display(), f.message);
    }
    Ok(Arc::new(corpus))
}

fn evosuite_source(cfg: &RunConfig) -> EvoSuiteSource {
    EvoSuiteSource::new(match cfg.evosuite.mode {
        EvoSuiteModeKind::Disabled => EvoSuiteMode::Disabled,
        EvoSuiteModeKind::Pregenerated => {
            EvoSuiteMode::Pregenerated(cfg.evosuite.dir.clone().expect("validated: pregenerated dir set"))
        }
        EvoSuiteModeKind::Run => EvoSuiteMode::Run(cfg.evosuite.run.clone()),
    })
}

fn focal_filter(patterns: &[String]) -> Result<Option<GlobSet>, CliError> {
    if patterns.is_empty() {
        return Ok(None);
    }
    let mut b = GlobSetBuilder::new();
    for p in patterns {
        b.add(Glob::new(p).map_err(|e| ConfigError::Invalid(format!("bad filter `{p}`: {e}")))?);
    }
    Ok(Some(b.build().map_err(|e| ConfigError::Invalid(e.to_string()))?))
}

fn selected_tasks<'c>(
    corpus: &'c Corpus,
    report: Option<&ComplexityReport>,
    patterns: &[String],
) -> Result<Vec<FocalTask<'c>>, CliError> {
    let filter = focal_filter(patterns)?;
    let accept = |cls: &SourceClass, m: &MethodInfo| match &filter {
        None => true,
        Some(set) => set.is_match(format!("{}#{}", cls.qualified_name(), m.name)) || set.is_match(&m.signature),
    };
    let tasks = plan_tasks(corpus, report, accept);
    if tasks.is_empty() {
        println!("0 sessions: no focal method matches");
        return Err(CliError::ZeroWork("no focal method selected".into()));
    }
    Ok(tasks)
}

fn build_toolchain(cfg: &RunConfig, corpus: &Arc<Corpus>) -> Result<Box<dyn Toolchain>, CliError> {
    Ok(match cfg.toolchain.kind {
        ToolchainKind::Simulated => Box::new(SimulatedToolchain::new(corpus.clone())),
        ToolchainKind::Jdk => Box::new(JdkToolchain::discover(cfg.toolchain.jdk.clone())?),
    })
}

/// Replies with the last fenced block of the user prompt that holds a test
/// method, or nothing. Deterministic and offline.
pub fn echo_stub() -> StubGateway {
    StubGateway::from_fn(|req, _| {
        let user = req.messages.iter().rev().find(|m| m.role == Role::User).map(|m| m.content.as_str());
        fenced_blocks(user.unwrap_or(""))
            .into_iter()
            .rev()
            .find(|(_, b)| b.contains("@Test"))
            .map(|(_, b)| format!("```java\n{b}```\n"))
            .unwrap_or_default()
    })
}

enum Backend {
    Plain(Box<dyn Gateway>),
    Recording(Box<Recorder<LiveGateway>>, PathBuf),
}

impl Backend {
    fn gateway(&self) -> &dyn Gateway {
        match self {
            Backend::Plain(g) => g.as_ref(),
            Backend::Recording(r, _) => r.as_ref(),
        }
    }

    fn finish(&self) -> Result<(), CliError> {
        if let Backend::Recording(r, path) = self {
            r.save(path).map_err(|e| CliError::Other(e.into()))?;
        }
        Ok(())
    }
}

fn build_backend(cfg: &RunConfig, templates: &Templates) -> Result<Backend, CliError> {
    let b = &cfg.backend;
    Ok(match b.kind {
        BackendKind::Stub => Backend::Plain(Box::new(echo_stub())),
        BackendKind::Replay => {
            let path = b.transcript.as_ref().expect("validated: replay transcript set");
            let replay =
                ReplayGateway::load(path).map_err(|e| ConfigError::Invalid(format!("{}: {e}", path.display())))?;
            Backend::Plain(Box::new(replay))
        }
        BackendKind::Live => {
            let live = LiveGateway::new(b.live.clone()).map_err(|e| CliError::GatewayUnreachable(e.to_string()))?;
            match &b.transcript {
                Some(path) => Backend::Recording(
                    Box::new(Recorder::new(live, Transcript::new(&b.model_id, templates.version()))),
                    path.clone(),
                ),
                None => Backend::Plain(Box::new(live)),
            }
        }
    })
}

/// A gateway for steps that must not reach any backend.
fn offline_gateway() -> StubGateway {
    StubGateway::try_from_fn(|_, _| Err(GatewayError::InvalidRequest("no gateway in this mode".into())))
}

fn llm_env<'a>(cfg: &'a RunConfig, gateway: &'a dyn Gateway, templates: &'a Templates) -> LlmEnv<'a> {
    LlmEnv {
        gateway,
        model_id: &cfg.backend.model_id,
        templates,
        prompt_budget: cfg.backend.prompt_budget,
        max_tokens: cfg.backend.max_tokens,
    }
}

fn complexity_markdown(report: &ComplexityReport) -> String {
    let mut out = String::from(
        "## Focal methods by initialization complexity bin\n\n| Bin | Focal methods | Contexts |\n|---|---|---|\n",
    );
    for bin in 0..10u8 {
        let methods = report.per_focal_method.iter().filter(|r| r.score.bin == bin).count();
        let contexts = report.per_context.iter().filter(|r| r.score.bin == bin).count();
        out.push_str(&format!("| {bin} | {methods} | {contexts} |\n"));
    }
    out.push_str("\n## Focal methods by cyclomatic complexity\n\n| CCN | Focal methods |\n|---|---|\n");
    for g in CCN_GROUPS {
        let n = report.per_focal_method.iter().filter(|r| ccn_group(r.ccn.value()) == g).count();
        out.push_str(&format!("| {g} | {n} |\n"));
    }
    out
}

pub fn cmd_analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let corpus = scan(cfg)?;
    let evo = evosuite_source(cfg);
    let report = analyze_corpus(&corpus, &evo, cfg.weights);
    let dir = &cfg.output_root;
    write(&dir.join("complexity.json"), json(&report)?)?;
    write(&dir.join("complexity.csv"), report.to_csv().map_err(anyhow::Error::from)?)?;
    write(&dir.join("complexity.md"), complexity_markdown(&report))?;
    println!(
        "{} focal method(s), {} context(s); report in {}",
        report.per_focal_method.len(),
        report.per_context.len(),
        dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MinedSeed<'a> {
    focal_signature: &'a str,
    exemplars: &'a ExemplarSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<SeedSummary>,
}

#[derive(Serialize)]
struct SeedSummary {
    file: Option<String>,
    compile_status: crate::seed_miner::CompileStatus,
    repair_rounds_used: u32,
    todo_marker_count: usize,
    error: Option<String>,
}

pub fn cmd_mine_seeds(cfg: &RunConfig, filter: &[String], exemplars_only: bool) -> Result<(), CliError> {
    let corpus = scan(cfg)?;
    let tasks = selected_tasks(&corpus, None, filter)?;
    let evo = evosuite_source(cfg);
    let templates = Templates::load(cfg.templates_dir.as_deref()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let (backend, toolchain) = if exemplars_only {
        (Backend::Plain(Box::new(offline_gateway())), None)
    } else {
        (build_backend(cfg, &templates)?, Some(build_toolchain(cfg, &corpus)?))
    };
    let llm = llm_env(cfg, backend.gateway(), &templates);
    let imports = ImportTable::from_corpus(&corpus);
    let seeds_dir = cfg.output_root.join("seeds");
    let mut rows = Vec::new();
    let mut sets = Vec::new();
    for task in &tasks {
        let (tests, _) = evo.tests_for(task.cls);
        sets.push(collect_exemplars(task.cls, &corpus, task.focal, &tests));
    }
    for (task, set) in tasks.iter().zip(&sets) {
        let seed = match &toolchain {
            None => None,
            Some(tc) => {
                let file_name = seed_file_name(&task.cls.binary_name.replace('$', "_"), &task.focal.name);
                let class_name = file_name.trim_end_matches(".java").to_string();
                let ws = Workspace::create(&cfg.output_root.join("work").join("seeds"), &class_name)?;
                let ctx = SeedContext {
                    llm: &llm,
                    toolchain: tc.as_ref(),
                    workspace: &ws,
                    imports: &imports,
                    cls: task.cls,
                    focal: task.focal,
                    test_class_name: &class_name,
                    assertion_names: &cfg.assertions,
                    max_rounds: cfg.session.max_seed_rounds,
                };
                Some(match generate_seed(&ctx, &set.all()) {
                    Ok(prefix) => {
                        let rel =
                            OutputLayout::test_file(task.cls.package.as_deref(), &class_name).replacen("tests/", "", 1);
                        write(&seeds_dir.join(&rel), &prefix.code)?;
                        seed_summary(&prefix, rel)
                    }
                    Err(e) => SeedSummary {
                        file: None,
                        compile_status: crate::seed_miner::CompileStatus::Failed,
                        repair_rounds_used: 0,
                        todo_marker_count: 0,
                        error: Some(e.to_string()),
                    },
                })
            }
        };
        rows.push(MinedSeed { focal_signature: &task.focal.signature, exemplars: set, seed });
    }
    backend.finish()?;
    write(&seeds_dir.join("exemplars.json"), json(&rows)?)?;
    let passed = rows
        .iter()
        .filter(|r| r.seed.as_ref().is_some_and(|s| s.compile_status == crate::seed_miner::CompileStatus::Passed))
        .count();
    println!("{} focal method(s) mined; {passed} seed(s) compiled; output in {}", rows.len(), seeds_dir.display());
    Ok(())
}

fn seed_summary(p: &SeedPrefix, file: String) -> SeedSummary {
    SeedSummary {
        file: Some(file),
        compile_status: p.compile_status,
        repair_rounds_used: p.repair_rounds_used,
        todo_marker_count: p.todo_marker_count,
        error: None,
    }
}

pub fn cmd_generate(cfg: &RunConfig, filter: &[String], dry: bool) -> Result<(), CliError> {
    let corpus = scan(cfg)?;
    let evo = evosuite_source(cfg);
    let report = analyze_corpus(&corpus, &evo, cfg.weights);
    let tasks = selected_tasks(&corpus, Some(&report), filter)?;
    let templates = Templates::load(cfg.templates_dir.as_deref()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
    let imports = ImportTable::from_corpus(&corpus);
    let layout = OutputLayout::new(&cfg.output_root);
    let work = layout.work_dir();

    if dry {
        let gw = offline_gateway();
        let tc = SimulatedToolchain::new(corpus.clone());
        let svc = Services {
            llm: llm_env(cfg, &gw, &templates),
            toolchain: &tc,
            corpus: &corpus,
            imports: &imports,
            evosuite: &evo,
            work_root: &work,
            assertion_names: &cfg.assertions,
        };
        let dir = cfg.output_root.join("dry-run");
        for task in &tasks {
            match dry_run(task, &svc) {
                Ok(p) => {
                    let text = format!(
                        "# {}\n\n## System\n\n{}\n\n## Seed prompt ({} exemplar(s))\n\n{}\n\n## Steer prompt\n\n{}\n",
                        p.focal_signature, p.seed.system, p.exemplars_kept, p.seed.user, p.steer.user
                    );
                    write(&dir.join(format!("{}.md", p.test_class_name)), text)?;
                }
                Err(e) => log::warn!("{}: {e}", task.focal.signature),
            }
        }
        println!("{} prompt file(s) written to {}", tasks.len(), dir.display());
        return Ok(());
    }

    let toolchain = build_toolchain(cfg, &corpus)?;
    let backend = build_backend(cfg, &templates)?;
    let svc = Services {
        llm: llm_env(cfg, backend.gateway(), &templates),
        toolchain: toolchain.as_ref(),
        corpus: &corpus,
        imports: &imports,
        evosuite: &evo,
        work_root: &work,
        assertion_names: &cfg.assertions,
    };
    let summary = run_corpus(&tasks, &cfg.session, &svc, &layout)?;
    backend.finish()?;
    println!(
        "{} session(s) run, {} resumed; {} compiled, {} passed; records in {}",
        summary.started,
        summary.resumed,
        summary.compiled,
        summary.passed,
        layout.sessions().display()
    );
    if summary.started > 0 && summary.gateway_failures == summary.started {
        return Err(CliError::GatewayUnreachable("every session failed on the gateway".into()));
    }
    Ok(())
}

pub fn cmd_report(records: &[PathBuf], out_dir: &Path, method: &str) -> Result<(), CliError> {
    let read = read_records(records)?;
    if read.records.is_empty() && read.malformed == 0 {
        return Err(CliError::ZeroWork("no session records".into()));
    }
    let mut report = aggregate(&read.records);
    report.skipped_records = read.malformed;
    let md = report.to_markdown(method);
    write(&out_dir.join("aggregate.json"), json(&report)?)?;
    write(&out_dir.join("effectiveness.md"), report.effectiveness_markdown(method))?;
    write(&out_dir.join("effectiveness.csv"), report.effectiveness_csv(method).map_err(anyhow::Error::from)?)?;
    write(&out_dir.join("binned.csv"), report.binned_csv().map_err(anyhow::Error::from)?)?;
    write(&out_dir.join("report.md"), &md)?;
    print!("{md}");
    Ok(())
}
