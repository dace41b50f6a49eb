use std::path::Path;

use super::evosource::EvoSuiteSource;
use super::{Counters, FailureClass, MiningSummary, Outcome, SessionConfig, SessionRecord, Stage, StageEntry};
use crate::branch_steer::{
    assemble_steer_prompt, extract_branch_points, infer_branch_intentions, mechanical_intention,
    parse_function_intention, summarize_function_intention, BranchIntention, FunctionIntention, SteerPrompt,
};
use crate::code_model::{Corpus, MethodInfo, SourceClass};
use crate::complexity::ComplexityScore;
use crate::llm_gateway::Purpose;
use crate::prompts::{extract_code, LlmEnv, TemplateName};
use crate::seed_miner::{
    collect_exemplars, generate_seed, template_prefix, AssertionNames, CompileStatus, ExemplarSnippet, SeedContext,
    SeedError, SeedPrefix,
};
use crate::toolchain::{
    apply_lightweight_fixes, format_diagnostics, format_failures, CompileResult, ImportTable, MethodCoverage,
    TestFailure, TestOutcome, TestRunResult, TestUnit, Toolchain, ToolchainError, Workspace,
};

/// Everything a session needs besides its focal method.
pub struct Services<'a> {
    pub llm: LlmEnv<'a>,
    pub toolchain: &'a dyn Toolchain,
    pub corpus: &'a Corpus,
    pub imports: &'a ImportTable,
    pub evosuite: &'a EvoSuiteSource,
    /// Per-session workspaces are created below this directory.
    pub work_root: &'a Path,
    pub assertion_names: &'a AssertionNames,
}

#[derive(Debug, Clone)]
pub struct FocalTask<'c> {
    pub cls: &'c SourceClass,
    pub focal: &'c MethodInfo,
    pub test_class_name: String,
    pub init_complexity: Option<ComplexityScore>,
    pub ccn: u32,
}

/// Result of compiling and running one candidate.
#[derive(Debug, Clone, PartialEq)]
pub enum Evaluation {
    Passed,
    Compile(CompileResult),
    Runtime(TestRunResult),
    /// A recoverable toolchain failure such as a compile timeout.
    Tool(String),
}

impl Evaluation {
    fn error_kind(&self) -> &'static str {
        match self {
            Evaluation::Passed => "no",
            Evaluation::Compile(_) => "compilation",
            Evaluation::Runtime(_) => "runtime",
            Evaluation::Tool(_) => "toolchain",
        }
    }

    fn diagnostics(&self) -> String {
        match self {
            Evaluation::Passed => String::new(),
            Evaluation::Compile(c) => format_diagnostics(&c.diagnostics),
            Evaluation::Runtime(r) => format_failures(&r.failures),
            Evaluation::Tool(msg) => msg.clone(),
        }
    }
}

/// Errors that end a session at once.
fn is_unrecoverable(e: &ToolchainError) -> bool {
    matches!(e, ToolchainError::ToolchainMissing(_) | ToolchainError::AgentMissing(_) | ToolchainError::Io(_))
}

/// Handles for compiling, running and repairing one test class.
pub struct RepairEnv<'a> {
    pub llm: &'a LlmEnv<'a>,
    pub toolchain: &'a dyn Toolchain,
    pub workspace: &'a Workspace,
    pub imports: &'a ImportTable,
    pub cls: &'a SourceClass,
    pub focal: &'a MethodInfo,
    pub test_class_name: &'a str,
}

impl RepairEnv<'_> {
    fn unit(&self, code: &str) -> TestUnit {
        TestUnit {
            class_name: self.test_class_name.to_string(),
            package: self.cls.package.clone(),
            source: code.to_string(),
        }
    }

    fn prepare(&self, reply: &str) -> String {
        apply_lightweight_fixes(&extract_code(reply), self.test_class_name, self.cls, self.imports)
    }
}

/// Compiles and runs `code`. A runner crash or timeout counts as a runtime
/// failure of a compiled test.
pub fn evaluate(env: &RepairEnv<'_>, code: &str) -> Result<Evaluation, ToolchainError> {
    let unit = env.unit(code);
    let compiled = match env.toolchain.compile(&unit, env.workspace) {
        Ok(c) => c,
        Err(e) if is_unrecoverable(&e) => return Err(e),
        Err(e) => return Ok(Evaluation::Tool(e.to_string())),
    };
    if !compiled.success {
        return Ok(Evaluation::Compile(compiled));
    }
    let run = match env.toolchain.run_tests(&unit, env.workspace) {
        Ok(r) => r,
        Err(e) if is_unrecoverable(&e) => return Err(e),
        Err(e) => {
            let mut r = TestRunResult::default();
            r.outcomes.insert("<runner>".into(), TestOutcome::RuntimeException);
            r.failures.push(TestFailure {
                test_name: "<runner>".into(),
                exception_type: "RunnerError".into(),
                message: e.to_string(),
                first_frame: None,
            });
            return Ok(Evaluation::Runtime(r));
        }
    };
    if run.all_passed() {
        return Ok(Evaluation::Passed);
    }
    if run.outcomes.is_empty() {
        let mut r = run;
        r.outcomes.insert("<class>".into(), TestOutcome::RuntimeException);
        r.failures.push(TestFailure {
            test_name: "<class>".into(),
            exception_type: "java.lang.Exception".into(),
            message: "No runnable methods".into(),
            first_frame: None,
        });
        return Ok(Evaluation::Runtime(r));
    }
    Ok(Evaluation::Runtime(run))
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixResult {
    /// A fully passing test.
    Fixed(String),
    /// The last candidate that compiled but kept failing at run time.
    Partial(String, TestRunResult),
    Bottom,
}

/// Up to `delta` rounds of repair prompt, lightweight fixes and
/// re-evaluation. Gateway errors use up a round and are pushed to `errors`.
pub fn fix(
    env: &RepairEnv<'_>,
    test: &str,
    evaluation: Evaluation,
    delta: u32,
    counters: &mut Counters,
    errors: &mut Vec<String>,
) -> Result<FixResult, ToolchainError> {
    let mut code = test.to_string();
    let mut last = evaluation;
    let mut compilable = match &last {
        Evaluation::Runtime(r) => Some((code.clone(), r.clone())),
        _ => None,
    };
    for attempt in 1..=delta {
        counters.repair_attempts += 1;
        let prompt = match env.llm.prompt(
            TemplateName::TestRepair,
            &[
                ("error_kind", last.error_kind()),
                ("attempt", &attempt.to_string()),
                ("focal_body", &env.focal.content),
                ("diagnostics", &last.diagnostics()),
                ("code", code.trim_end()),
            ],
        ) {
            Ok(p) => p,
            Err(e) => {
                errors.push(format!("repair prompt: {e}"));
                continue;
            }
        };
        let reply = match env.llm.ask(&prompt, Purpose::TestRepair) {
            Ok(r) => r,
            Err(e) => {
                errors.push(format!("repair {attempt}: {e}"));
                continue;
            }
        };
        code = env.prepare(&reply);
        last = evaluate(env, &code)?;
        match &last {
            Evaluation::Passed => return Ok(FixResult::Fixed(code)),
            Evaluation::Runtime(r) => compilable = Some((code.clone(), r.clone())),
            _ => {}
        }
    }
    Ok(match compilable {
        Some((c, r)) => FixResult::Partial(c, r),
        None => FixResult::Bottom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cause {
    Compile,
    Gateway,
    Toolchain,
}

enum Terminal {
    Passed(String),
    Partial(String),
}

struct Session<'s, 'a> {
    task: &'s FocalTask<'s>,
    cfg: &'s SessionConfig,
    svc: &'s Services<'a>,
    record: SessionRecord,
    cause: Cause,
    intentions: Option<(Vec<BranchIntention>, FunctionIntention)>,
}

impl<'s, 'a> Session<'s, 'a> {
    fn enter(&mut self, stage: Stage) {
        let entry = StageEntry { stage, fallback: self.record.used_fallback };
        if self.record.stages.last() != Some(&entry) {
            self.record.stages.push(entry);
        }
    }

    fn env<'e>(&'e self, ws: &'e Workspace) -> RepairEnv<'e> {
        RepairEnv {
            llm: &self.svc.llm,
            toolchain: self.svc.toolchain,
            workspace: ws,
            imports: self.svc.imports,
            cls: self.task.cls,
            focal: self.task.focal,
            test_class_name: &self.task.test_class_name,
        }
    }

    /// Branch and function intentions, computed once. Gateway failures fall
    /// back to mechanical descriptions.
    fn intentions(&mut self) -> (Vec<BranchIntention>, FunctionIntention) {
        if let Some(i) = &self.intentions {
            return i.clone();
        }
        let llm = &self.svc.llm;
        let focal = self.task.focal;
        let points = extract_branch_points(focal);
        let branches = infer_branch_intentions(llm, focal, &points).unwrap_or_else(|e| {
            self.record.errors.push(format!("branch intentions: {e}"));
            points.iter().map(|p| BranchIntention { branch: p.clone(), description: mechanical_intention(p) }).collect()
        });
        let func = summarize_function_intention(llm, focal, self.task.cls).unwrap_or_else(|e| {
            self.record.errors.push(format!("function intention: {e}"));
            parse_function_intention("", focal)
        });
        self.intentions = Some((branches, func));
        self.intentions.clone().expect("just set")
    }

    fn steer(&mut self, prefix: &SeedPrefix) -> Option<SteerPrompt> {
        self.enter(Stage::Steering);
        let (branches, func) = self.intentions();
        match assemble_steer_prompt(
            &self.svc.llm,
            self.task.focal,
            prefix,
            &branches,
            &func,
            &self.task.test_class_name,
        ) {
            Ok(p) => Some(p),
            Err(e) => {
                self.record.errors.push(format!("steer prompt: {e}"));
                self.cause = Cause::Gateway;
                None
            }
        }
    }

    /// Runs up to `n` generate-then-fix iterations.
    fn iterate(&mut self, ws: &Workspace, steer: &SteerPrompt, n: u32) -> Result<Option<Terminal>, ToolchainError> {
        for _ in 0..n {
            self.record.counters.iterations += 1;
            self.enter(Stage::Generating);
            let reply = match self.svc.llm.ask(&steer.prompt(), Purpose::TestGenerate) {
                Ok(r) => r,
                Err(e) => {
                    self.record.errors.push(format!("generate: {e}"));
                    self.cause = Cause::Gateway;
                    continue;
                }
            };
            let env = self.env(ws);
            let code = env.prepare(&reply);
            let first = evaluate(&env, &code)?;
            if first == Evaluation::Passed {
                return Ok(Some(Terminal::Passed(code)));
            }
            self.enter(Stage::Repairing);
            let mut counters = std::mem::take(&mut self.record.counters);
            let mut errors = std::mem::take(&mut self.record.errors);
            let had_tool_error = matches!(first, Evaluation::Tool(_));
            let result = fix(&self.env(ws), &code, first, self.cfg.delta, &mut counters, &mut errors);
            self.record.counters = counters;
            self.record.errors = errors;
            match result? {
                FixResult::Fixed(c) => return Ok(Some(Terminal::Passed(c))),
                FixResult::Partial(c, _) => return Ok(Some(Terminal::Partial(c))),
                FixResult::Bottom => {
                    self.cause = if had_tool_error { Cause::Toolchain } else { Cause::Compile };
                }
            }
        }
        Ok(None)
    }

    fn coverage(&mut self, ws: &Workspace, code: &str) -> Option<MethodCoverage> {
        let unit = self.env(ws).unit(code);
        match self.svc.toolchain.measure_coverage(&unit, std::slice::from_ref(&self.task.focal.signature), ws) {
            Ok(report) => Some(report.methods.get(&self.task.focal.signature).copied().unwrap_or_default()),
            Err(e) => {
                self.record.errors.push(format!("coverage: {e}"));
                None
            }
        }
    }

    fn seed(&mut self, ws: &Workspace, exemplars: &[ExemplarSnippet]) -> Result<Option<SeedPrefix>, ToolchainError> {
        self.enter(Stage::Seeding);
        let ctx = SeedContext {
            llm: &self.svc.llm,
            toolchain: self.svc.toolchain,
            workspace: ws,
            imports: self.svc.imports,
            cls: self.task.cls,
            focal: self.task.focal,
            test_class_name: &self.task.test_class_name,
            assertion_names: self.svc.assertion_names,
            max_rounds: self.cfg.max_seed_rounds,
        };
        match generate_seed(&ctx, exemplars) {
            Ok(prefix) => {
                self.record.seed_status = Some(prefix.compile_status);
                self.record.counters.seed_rounds = prefix.repair_rounds_used;
                Ok((prefix.compile_status == CompileStatus::Passed).then_some(prefix))
            }
            Err(SeedError::Toolchain(e)) if is_unrecoverable(&e) => Err(e),
            Err(e) => {
                self.record.errors.push(format!("seed: {e}"));
                self.record.seed_status = Some(CompileStatus::Failed);
                self.cause = match e {
                    SeedError::Toolchain(_) => Cause::Toolchain,
                    _ => Cause::Gateway,
                };
                Ok(None)
            }
        }
    }

    fn run(&mut self, ws: &Workspace) -> Result<Option<Terminal>, ToolchainError> {
        let (tests, evo_error) = self.svc.evosuite.tests_for(self.task.cls);
        if let Some(e) = evo_error {
            self.record.errors.push(format!("evosuite: {e}"));
        }
        let set = collect_exemplars(self.task.cls, self.svc.corpus, self.task.focal, &tests);
        self.record.mining = Some(MiningSummary {
            path: set.path,
            source_exemplars: set.source.len(),
            evosuite_exemplars: set.evosuite.len(),
        });
        let exemplars = set.all();

        let (three_stage, reserved) = self.cfg.iteration_split();
        let mut used = 0;
        if let Some(prefix) = self.seed(ws, &exemplars)? {
            if let Some(steer) = self.steer(&prefix) {
                if let Some(t) = self.iterate(ws, &steer, three_stage)? {
                    return Ok(Some(t));
                }
                used = three_stage;
            }
        }
        if !self.cfg.fallback_enabled {
            return Ok(None);
        }
        let remaining = if used == 0 { self.cfg.max_iterations } else { reserved };
        if remaining == 0 {
            return Ok(None);
        }
        self.record.used_fallback = true;
        let template = template_prefix(self.task.focal, self.task.cls, &exemplars, &self.task.test_class_name);
        match self.steer(&template) {
            Some(steer) => self.iterate(ws, &steer, remaining),
            None => Ok(None),
        }
    }
}

/// Runs one focal method to a terminal state. Never fails: every error ends
/// up in the returned record, together with the kept test, if any.
pub fn run_focal(task: &FocalTask<'_>, cfg: &SessionConfig, svc: &Services<'_>) -> (SessionRecord, Option<String>) {
    let record = SessionRecord {
        project: svc.corpus.project_name(),
        focal_signature: task.focal.signature.clone(),
        focal_class: task.cls.qualified_name(),
        focal_method: task.focal.name.clone(),
        test_class: task.test_class_name.clone(),
        init_complexity: task.init_complexity,
        ccn: task.ccn,
        outcome: Outcome::default(),
        counters: Counters::default(),
        stages: Vec::new(),
        mining: None,
        seed_status: None,
        used_fallback: false,
        test_file: None,
        errors: Vec::new(),
    };
    let mut s = Session { task, cfg, svc, record, cause: Cause::Compile, intentions: None };
    let id = format!("{}-{}", s.record.focal_class, task.test_class_name);
    let result = Workspace::create(svc.work_root, &id).and_then(|ws| s.run(&ws).map(|t| (ws, t)));
    let kept = match result {
        Ok((ws, Some(Terminal::Passed(code)))) => {
            s.record.outcome = Outcome {
                compiled: true,
                tests_passed: true,
                partial_valid: false,
                coverage: s.coverage(&ws, &code),
                failure_class: None,
            };
            s.enter(Stage::Done);
            Some(code)
        }
        Ok((ws, Some(Terminal::Partial(code)))) => {
            let coverage = s.coverage(&ws, &code);
            s.record.outcome = Outcome {
                compiled: true,
                tests_passed: false,
                partial_valid: coverage.is_some(),
                coverage,
                failure_class: Some(FailureClass::RuntimeExhausted),
            };
            s.enter(Stage::Done);
            Some(code)
        }
        Ok((_, None)) => {
            s.record.outcome.failure_class = Some(match s.cause {
                Cause::Compile => FailureClass::CompileExhausted,
                Cause::Gateway => FailureClass::GatewayError,
                Cause::Toolchain => FailureClass::ToolchainError,
            });
            s.enter(Stage::Failed);
            None
        }
        Err(e) => {
            s.record.errors.push(format!("toolchain: {e}"));
            s.record.outcome.failure_class = Some(FailureClass::ToolchainError);
            s.enter(Stage::Failed);
            None
        }
    };
    (s.record, kept)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::code_model::parse_compilation_unit;
    use crate::llm_gateway::{CompletionResponse, GatewayError, StubGateway};
    use crate::prompts::Templates;
    use crate::toolchain::SimulatedToolchain;

    const SRC: &str = "package p;\npublic class Counter {\n  private int n;\n  public int add(int k) {\n    if (k < 0) {\n      throw new IllegalArgumentException();\n    }\n    n += k;\n    return n;\n  }\n}\n";

    fn test_src(marker: &str) -> String {
        format!(
            "```java\npackage p;\nimport org.junit.Test;\npublic class Counter_add_Test {{\n  @Test public void t() {{\n    Counter c = new Counter();\n    c.add(1);\n    {marker}\n  }}\n}}\n```"
        )
    }

    const COMPILE_ERR: &str = "// sim:compile-error boom";
    const RUNTIME_ERR: &str = "// sim:runtime-exception java.lang.IllegalStateException";

    struct Kit {
        corpus: Arc<Corpus>,
        tc: SimulatedToolchain,
        imports: ImportTable,
        templates: Templates,
        evo: EvoSuiteSource,
        names: AssertionNames,
        dir: tempfile::TempDir,
    }

    fn kit() -> Kit {
        let classes = parse_compilation_unit(SRC, Path::new("p/Counter.java")).unwrap();
        let corpus = Arc::new(Corpus::from_classes("/proj", classes));
        Kit {
            tc: SimulatedToolchain::new(corpus.clone()),
            imports: ImportTable::from_corpus(&corpus),
            corpus,
            templates: Templates::default(),
            evo: EvoSuiteSource::disabled(),
            names: AssertionNames::default(),
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn run(k: &Kit, gw: &StubGateway, cfg: &SessionConfig) -> (SessionRecord, Option<String>) {
        let svc = Services {
            llm: LlmEnv { gateway: gw, model_id: "m", templates: &k.templates, prompt_budget: 12_000, max_tokens: 512 },
            toolchain: &k.tc,
            corpus: &k.corpus,
            imports: &k.imports,
            evosuite: &k.evo,
            work_root: k.dir.path(),
            assertion_names: &k.names,
        };
        let cls = &k.corpus.classes[0];
        let focal = &cls.methods[0];
        let task = FocalTask { cls, focal, test_class_name: "Counter_add_Test".into(), init_complexity: None, ccn: 2 };
        run_focal(&task, cfg, &svc)
    }

    /// Seeds compile when `seed_ok`; generation and repairs follow `reply`.
    fn stub(seed_ok: bool, reply: impl Fn(Purpose, usize) -> String + Send + Sync + 'static) -> StubGateway {
        StubGateway::from_fn(move |req, n| match req.purpose {
            Purpose::SeedGenerate | Purpose::SeedRepair => test_src(if seed_ok { "" } else { COMPILE_ERR }),
            Purpose::BranchIntention => "1. rejects negative amounts".into(),
            Purpose::FunctionIntention => "Purpose: adds k to the running total".into(),
            p => reply(p, n),
        })
    }

    fn assert_monotone(r: &SessionRecord) {
        let mut restarts = 0;
        for w in r.stages.windows(2) {
            if w[1].stage.level() < w[0].stage.level() {
                assert!(w[1].fallback && !w[0].fallback, "regression {:?}", r.stages);
                restarts += 1;
            }
        }
        assert!(restarts <= 1);
        assert!(matches!(r.stages.last().unwrap().stage, Stage::Done | Stage::Failed));
    }

    #[test]
    fn passes_first_try() {
        let k = kit();
        let gw = stub(true, |_, _| test_src(""));
        let (r, code) = run(&k, &gw, &SessionConfig::default());
        assert!(r.outcome.compiled && r.outcome.tests_passed);
        assert_eq!(r.outcome.failure_class, None);
        assert_eq!(r.counters, Counters { seed_rounds: 0, repair_attempts: 0, iterations: 1 });
        assert!(r.outcome.coverage.is_some());
        assert!(code.unwrap().contains("class Counter_add_Test"));
        assert_eq!(gw.count(Purpose::TestRepair), 0);
        assert_monotone(&r);
    }

    #[test]
    fn runtime_failures_end_partial() {
        let k = kit();
        let gw = stub(true, |_, _| test_src(RUNTIME_ERR));
        let (r, code) = run(&k, &gw, &SessionConfig::default());
        assert!(r.outcome.compiled && !r.outcome.tests_passed && r.outcome.partial_valid);
        assert!(r.outcome.coverage.is_some());
        assert_eq!(r.outcome.failure_class, Some(FailureClass::RuntimeExhausted));
        assert_eq!(gw.count(Purpose::TestRepair), 5);
        assert_eq!(r.counters.iterations, 1);
        assert!(code.is_some());
        assert_monotone(&r);
    }

    #[test]
    fn never_compiling_exhausts_every_budget() {
        let k = kit();
        let gw = stub(false, |_, _| test_src(COMPILE_ERR));
        let (r, code) = run(&k, &gw, &SessionConfig::default());
        assert!(r.outcome.is_bottom());
        assert_eq!(r.outcome.failure_class, Some(FailureClass::CompileExhausted));
        assert_eq!(gw.count(Purpose::SeedRepair), 5);
        assert_eq!(gw.count(Purpose::TestGenerate), 5);
        assert_eq!(gw.count(Purpose::TestRepair), 25);
        assert_eq!(r.counters, Counters { seed_rounds: 5, repair_attempts: 25, iterations: 5 });
        assert!(r.used_fallback);
        assert!(code.is_none());
        assert_monotone(&r);
    }

    #[test]
    fn seeded_path_keeps_one_iteration_for_fallback() {
        let k = kit();
        let gw = stub(true, |_, _| test_src(COMPILE_ERR));
        let (r, _) = run(&k, &gw, &SessionConfig::default());
        assert_eq!(r.counters.iterations, 5);
        assert_eq!(gw.count(Purpose::TestRepair), 25);
        assert_eq!(r.stages.iter().filter(|s| s.fallback && s.stage == Stage::Generating).count(), 1);
        assert_monotone(&r);
    }

    #[test]
    fn fixed_on_attempt_k() {
        for k_fix in [1usize, 3, 5] {
            let k = kit();
            let gw = stub(true, move |p, n| match p {
                Purpose::TestRepair if n + 1 == k_fix => test_src(""),
                _ => test_src(COMPILE_ERR),
            });
            let (r, _) = run(&k, &gw, &SessionConfig::default());
            assert!(r.outcome.tests_passed, "k={k_fix}");
            assert_eq!(gw.count(Purpose::TestRepair), k_fix);
            assert_eq!(r.counters.repair_attempts as usize, k_fix);
        }
    }

    #[test]
    fn fallback_disabled_stops_after_seed() {
        let k = kit();
        let gw = stub(false, |_, _| test_src(""));
        let cfg = SessionConfig { fallback_enabled: false, ..Default::default() };
        let (r, _) = run(&k, &gw, &cfg);
        assert_eq!(r.outcome.failure_class, Some(FailureClass::CompileExhausted));
        assert_eq!(r.counters.iterations, 0);
        assert_eq!(gw.count(Purpose::TestGenerate), 0);
    }

    #[test]
    fn gateway_errors_are_recorded() {
        let k = kit();
        let gw = StubGateway::try_from_fn(|req, _| match req.purpose {
            Purpose::SeedGenerate | Purpose::SeedRepair => Ok(CompletionResponse::text(test_src(""))),
            _ => Err(GatewayError::Transport("down".into())),
        });
        let (r, _) = run(&k, &gw, &SessionConfig::default());
        assert_eq!(r.outcome.failure_class, Some(FailureClass::GatewayError));
        assert_eq!(gw.count(Purpose::TestGenerate), 5);
        assert!(r.errors.iter().any(|e| e.contains("branch intentions")));
        assert_monotone(&r);
    }

    #[test]
    fn fix_returns_bottom_after_delta_calls() {
        let k = kit();
        let gw = stub(true, |_, _| test_src(COMPILE_ERR));
        let llm =
            LlmEnv { gateway: &gw, model_id: "m", templates: &k.templates, prompt_budget: 12_000, max_tokens: 512 };
        let ws = Workspace::create(k.dir.path(), "w").unwrap();
        let cls = &k.corpus.classes[0];
        let env = RepairEnv {
            llm: &llm,
            toolchain: &k.tc,
            workspace: &ws,
            imports: &k.imports,
            cls,
            focal: &cls.methods[0],
            test_class_name: "Counter_add_Test",
        };
        let code = env.prepare(&test_src(COMPILE_ERR));
        let first = evaluate(&env, &code).unwrap();
        assert!(matches!(first, Evaluation::Compile(_)));
        let (mut c, mut e) = (Counters::default(), vec![]);
        assert_eq!(fix(&env, &code, first, 3, &mut c, &mut e).unwrap(), FixResult::Bottom);
        assert_eq!(gw.count(Purpose::TestRepair), 3);
        let last = gw.calls().pop().unwrap();
        assert!(last.messages.iter().any(|m| m.content.contains("boom")));
    }
}
