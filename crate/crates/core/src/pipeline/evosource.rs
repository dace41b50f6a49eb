use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};

use crate::code_model::SourceClass;
use crate::seed_miner::{ingest_dir, run_evosuite, EvoSuiteConfig, EvoSuiteTestClass};

/// Where EvoSuite tests come from.
#[derive(Debug, Clone, PartialEq)]
pub enum EvoSuiteMode {
    Disabled,
    /// Previously generated `*_ESTest.java` files under a directory.
    Pregenerated(PathBuf),
    Run(EvoSuiteConfig),
}

type Entry = (Arc<Vec<EvoSuiteTestClass>>, Option<String>);

/// EvoSuite tests per focal class, produced at most once per class.
pub struct EvoSuiteSource {
    mode: EvoSuiteMode,
    pregenerated: OnceLock<Result<Vec<EvoSuiteTestClass>, String>>,
    per_class: Mutex<HashMap<String, Arc<OnceLock<Entry>>>>,
}

impl EvoSuiteSource {
    pub fn new(mode: EvoSuiteMode) -> Self {
        Self { mode, pregenerated: OnceLock::new(), per_class: Mutex::default() }
    }

    pub fn disabled() -> Self {
        Self::new(EvoSuiteMode::Disabled)
    }

    pub fn mode(&self) -> &EvoSuiteMode {
        &self.mode
    }

    /// Tests for `cls`, plus the error that left them empty, if any.
    /// Failures never abort a session; they only shrink the exemplar pool.
    pub fn tests_for(&self, cls: &SourceClass) -> (Arc<Vec<EvoSuiteTestClass>>, Option<String>) {
        let slot = {
            let mut map = self.per_class.lock().expect("evosuite cache poisoned");
            map.entry(cls.qualified_name()).or_default().clone()
        };
        slot.get_or_init(|| self.produce(cls)).clone()
    }

    fn produce(&self, cls: &SourceClass) -> Entry {
        match &self.mode {
            EvoSuiteMode::Disabled => (Arc::default(), None),
            EvoSuiteMode::Pregenerated(dir) => {
                let all =
                    self.pregenerated.get_or_init(|| ingest_dir(dir).map_err(|e| format!("{}: {e}", dir.display())));
                match all {
                    Ok(all) => {
                        let wanted = format!("{}_ESTest", cls.name);
                        (Arc::new(all.iter().filter(|t| t.name == wanted).cloned().collect()), None)
                    }
                    Err(e) => (Arc::default(), Some(e.clone())),
                }
            }
            EvoSuiteMode::Run(cfg) => match run_evosuite(cls, cfg) {
                Ok(tests) => (Arc::new(tests), None),
                Err(e) => {
                    log::warn!("EvoSuite for {}: {e}", cls.qualified_name());
                    (Arc::default(), Some(e.to_string()))
                }
            },
        }
    }
}
