//! Seed, steer and generate/repair per focal method, plus corpus runs and
//! aggregate reporting.

mod aggregate;
mod corpus;
mod evosource;
mod session;

use serde::{Deserialize, Serialize};

use crate::complexity::ComplexityScore;
use crate::seed_miner::{CompileStatus, MiningPath};
use crate::toolchain::MethodCoverage;

pub use aggregate::{aggregate, ccn_group, AggregateReport, BinnedRow, Rates, CCN_GROUPS};
pub use corpus::{
    analyze_corpus, dry_run, plan_tasks, read_records, run_corpus, DryRunPrompts, OutputLayout, ReadRecords, RunSummary,
};
pub use evosource::{EvoSuiteMode, EvoSuiteSource};
pub use session::{evaluate, fix, run_focal, Evaluation, FixResult, FocalTask, RepairEnv, Services};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Repair attempts per fix loop.
    pub delta: u32,
    pub max_seed_rounds: u32,
    /// Generate-then-fix iterations, shared with the fallback.
    pub max_iterations: u32,
    pub fallback_enabled: bool,
    pub worker_cap: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self { delta: 5, max_seed_rounds: 5, max_iterations: 5, fallback_enabled: true, worker_cap: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("session budget `{0}` must be at least 1")]
pub struct InvalidSessionConfig(pub &'static str);

impl SessionConfig {
    pub fn validate(&self) -> Result<(), InvalidSessionConfig> {
        for (name, v) in [
            ("delta", self.delta as usize),
            ("max_seed_rounds", self.max_seed_rounds as usize),
            ("max_iterations", self.max_iterations as usize),
            ("worker_cap", self.worker_cap),
        ] {
            if v == 0 {
                return Err(InvalidSessionConfig(name));
            }
        }
        Ok(())
    }

    /// Iterations for the three-stage path and for the fallback. One
    /// iteration is held back for the fallback when it is enabled and the
    /// budget allows.
    pub fn iteration_split(&self) -> (u32, u32) {
        if self.fallback_enabled && self.max_iterations > 1 {
            (self.max_iterations - 1, 1)
        } else {
            (self.max_iterations, 0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Seeding,
    Steering,
    Generating,
    Repairing,
    Done,
    Failed,
}

impl Stage {
    /// Generating and repairing alternate within one level.
    pub fn level(self) -> u8 {
        match self {
            Stage::Seeding => 0,
            Stage::Steering => 1,
            Stage::Generating | Stage::Repairing => 2,
            Stage::Done | Stage::Failed => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageEntry {
    pub stage: Stage,
    /// Entered during the two-stage fallback.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureClass {
    CompileExhausted,
    RuntimeExhausted,
    GatewayError,
    ToolchainError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub compiled: bool,
    pub tests_passed: bool,
    pub partial_valid: bool,
    pub coverage: Option<MethodCoverage>,
    pub failure_class: Option<FailureClass>,
}

impl Outcome {
    pub fn is_bottom(&self) -> bool {
        !self.compiled
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub seed_rounds: u32,
    /// Test-repair gateway calls over all fix loops.
    pub repair_attempts: u32,
    pub iterations: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningSummary {
    pub path: MiningPath,
    pub source_exemplars: usize,
    pub evosuite_exemplars: usize,
}

/// One line of `sessions.ndjson`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub project: String,
    pub focal_signature: String,
    pub focal_class: String,
    pub focal_method: String,
    pub test_class: String,
    pub init_complexity: Option<ComplexityScore>,
    pub ccn: u32,
    pub outcome: Outcome,
    pub counters: Counters,
    pub stages: Vec<StageEntry>,
    pub mining: Option<MiningSummary>,
    pub seed_status: Option<CompileStatus>,
    pub used_fallback: bool,
    /// Output-relative path of the kept test, if any.
    pub test_file: Option<String>,
    /// Gateway and toolchain errors met along the way.
    pub errors: Vec<String>,
}
