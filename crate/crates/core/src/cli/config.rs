//! `RunConfig`: one TOML file with `${VAR}` interpolation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::complexity::ComplexityWeights;
use crate::llm_gateway::LiveConfig;
use crate::pipeline::SessionConfig;
use crate::prompts::DEFAULT_PROMPT_BUDGET;
use crate::seed_miner::{AssertionNames, EvoSuiteConfig};
use crate::toolchain::JdkConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {0}: {1}")]
    Read(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Interpolate(PathBuf, String),
    #[error("{0}: {1}")]
    Parse(PathBuf, toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Live,
    Replay,
    /// Echoes the last test class found in each prompt. For smoke runs.
    #[default]
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub model_id: String,
    /// Replay source, or where a live run records its transcript.
    pub transcript: Option<PathBuf>,
    pub prompt_budget: usize,
    pub max_tokens: u32,
    pub live: LiveConfig,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            kind: BackendKind::default(),
            model_id: "gpt-4o-mini".into(),
            transcript: None,
            prompt_budget: DEFAULT_PROMPT_BUDGET,
            max_tokens: 2048,
            live: LiveConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ToolchainKind {
    Jdk,
    /// In-process stand-in; no JDK needed, coverage is synthetic.
    #[default]
    Simulated,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ToolchainConfig {
    pub kind: ToolchainKind,
    pub jdk: JdkConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvoSuiteModeKind {
    #[default]
    Disabled,
    Pregenerated,
    Run,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoSuiteSection {
    pub mode: EvoSuiteModeKind,
    /// Directory of `*_ESTest.java` files for `pregenerated`.
    pub dir: Option<PathBuf>,
    #[serde(flatten)]
    pub run: EvoSuiteConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub project_root: PathBuf,
    pub output_root: PathBuf,
    /// Globs, relative to the project root, of sources to skip.
    pub exclude: Vec<String>,
    pub templates_dir: Option<PathBuf>,
    /// Label for the first column of the effectiveness table.
    pub method_label: String,
    pub weights: ComplexityWeights,
    pub backend: BackendConfig,
    pub toolchain: ToolchainConfig,
    pub evosuite: EvoSuiteSection,
    pub session: SessionConfig,
    pub assertions: AssertionNames,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            project_root: PathBuf::from("."),
            output_root: PathBuf::from("out"),
            exclude: vec![],
            templates_dir: None,
            method_label: "jvm-testgen".into(),
            weights: ComplexityWeights::default(),
            backend: BackendConfig::default(),
            toolchain: ToolchainConfig::default(),
            evosuite: EvoSuiteSection::default(),
            session: SessionConfig::default(),
            assertions: AssertionNames::default(),
        }
    }
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    /// Parses TOML after expanding `$VAR` and `${VAR}`. An unset variable
    /// is an error.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let expanded =
            shellexpand::env(text).map_err(|e| ConfigError::Interpolate(origin.to_path_buf(), e.to_string()))?;
        toml::from_str(&expanded).map_err(|e| ConfigError::Parse(origin.to_path_buf(), e))
    }

    /// Loads a file; relative paths inside resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read(path.to_path_buf(), e))?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        rebase(base, &mut self.project_root);
        rebase(base, &mut self.output_root);
        for p in
            self.templates_dir.iter_mut().chain(self.backend.transcript.iter_mut()).chain(self.evosuite.dir.iter_mut())
        {
            rebase(base, p);
        }
    }

    /// Checks what can be checked before any work starts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !self.project_root.is_dir() {
            return invalid(format!("project root {} is not a directory", self.project_root.display()));
        }
        if let Some(t) = &self.templates_dir {
            if !t.is_dir() {
                return invalid(format!("template directory {} does not exist", t.display()));
            }
        }
        if self.backend.kind == BackendKind::Replay {
            match &self.backend.transcript {
                Some(t) if t.is_file() => {}
                Some(t) => return invalid(format!("replay transcript {} does not exist", t.display())),
                None => return invalid("replay backend needs `backend.transcript`".into()),
            }
        }
        if self.evosuite.mode == EvoSuiteModeKind::Pregenerated {
            match &self.evosuite.dir {
                Some(d) if d.is_dir() => {}
                _ => return invalid("pregenerated EvoSuite mode needs an existing `evosuite.dir`".into()),
            }
        }
        if self.backend.prompt_budget == 0 {
            return invalid("`backend.prompt_budget` must be positive".into());
        }
        self.session.validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}
