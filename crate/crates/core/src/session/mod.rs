//! Journaled runs: configuration, the append-only journal, resume by
//! re-execution, run monitoring and the operator HTTP service.
//!
//! A run lives in one directory:
//!
//! ```text
//! <output_dir>/<run_id>/
//!   journal.ndjson        one event per line, header first
//!   A/<index>.stl         prototypes for hardware runs
//!   B/<index>.stl
//!   report/               CSV written when the run completes
//! ```

pub mod config;
pub mod journal;
pub mod monitor;
pub mod service;

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

pub use config::{Backend, RunConfig, ServiceConfig};
pub use journal::{Journal, JournalContents, JOURNAL_FILE, JOURNAL_FORMAT};
pub use monitor::{HistoryRow, RunMonitor, RunSnapshot, RunStatus};
pub use service::{serve, ServiceHandle, ServiceState};

use crate::analysis::{self, AnalysisError};
use crate::coevolution::{Engine, EngineError, Event, RunResult};
use crate::fitness::{Evaluator, HardwareEvaluator, Hub, SyntheticEvaluator};

pub const REPORT_DIR: &str = "report";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}: no such journal")]
    Missing(PathBuf),
    #[error("{0} already exists; resume it or choose another run_id")]
    JournalExists(PathBuf),
    #[error("{0} holds no run-config header")]
    NoConfig(PathBuf),
    #[error("journal line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("report: {0}")]
    Analysis(#[from] AnalysisError),
}

impl SessionError {
    /// The run stopped in a state that `resume` can continue.
    pub fn is_suspension(&self) -> bool {
        matches!(self, SessionError::Engine(e) if e.is_suspension())
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub result: RunResult,
    pub journal: PathBuf,
    pub report_dir: PathBuf,
    /// Events written by this invocation.
    pub appended: u64,
}

pub struct Session {
    config: RunConfig,
    run_dir: PathBuf,
    journal: Journal,
    monitor: Arc<Mutex<RunMonitor>>,
    hub: Arc<Hub>,
}

impl Session {
    /// Validates `config` and starts a fresh journal in its run directory.
    pub fn create(config: &RunConfig) -> Result<Self, SessionError> {
        config.validate()?;
        let run_dir = config.run_dir();
        let config = config.resolved();
        let header = serde_json::to_value(&config).expect("run config serializes");
        let mut journal = Journal::create(&run_dir.join(JOURNAL_FILE), header.clone())?;
        let monitor = Arc::new(Mutex::new(RunMonitor::new()));
        monitor
            .lock()
            .expect("fresh lock")
            .observe(&Event::RunConfig {
                format: JOURNAL_FORMAT,
                config: header,
            });
        journal.observe(monitor.clone());
        Ok(Self {
            config,
            run_dir,
            journal,
            monitor,
            hub: Arc::new(Hub::new()),
        })
    }

    /// Opens a journal for continuation. The run directory is the
    /// journal's own directory.
    pub fn resume(path: &Path) -> Result<Self, SessionError> {
        if !path.is_file() {
            return Err(SessionError::Missing(path.to_path_buf()));
        }
        let (mut journal, contents) = Journal::open(path)?;
        let Some(header) = contents.header() else {
            return Err(SessionError::NoConfig(path.to_path_buf()));
        };
        let config: RunConfig =
            serde_json::from_value(header.clone()).map_err(|e| SessionError::Corrupt {
                line: 1,
                reason: format!("run-config: {e}"),
            })?;
        config.validate()?;
        let hub = Arc::new(Hub::new());
        hub.mark_answered(contents.events.iter().filter_map(|e| match e {
            Event::Measurement { request, .. } => Some(*request),
            _ => None,
        }));
        let monitor = Arc::new(Mutex::new(RunMonitor::new()));
        monitor
            .lock()
            .expect("fresh lock")
            .observe(&contents.events[0]);
        journal.observe(monitor.clone());
        let run_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            config,
            run_dir,
            journal,
            monitor,
            hub,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn journal_path(&self) -> &Path {
        self.journal.path()
    }

    pub fn hub(&self) -> Arc<Hub> {
        self.hub.clone()
    }

    pub fn monitor(&self) -> Arc<Mutex<RunMonitor>> {
        self.monitor.clone()
    }

    pub fn service_state(&self) -> ServiceState {
        ServiceState {
            hub: self.hub(),
            monitor: self.monitor(),
        }
    }

    /// The evaluator for a hardware run: prototypes go under the run
    /// directory and measurements arrive through [`Session::hub`].
    pub fn hardware_evaluator(&self) -> HardwareEvaluator {
        HardwareEvaluator::new(&self.run_dir, self.hub())
            .with_smooth_steps(self.config.smooth_steps)
    }

    /// Runs to completion with the configured synthetic landscape.
    pub fn run_synthetic(&mut self) -> Result<Outcome, SessionError> {
        let mut evaluator = SyntheticEvaluator::new(self.config.synthetic.clone());
        self.run_with(&mut evaluator)
    }

    /// Replays the journal, continues until the budget is spent and writes
    /// the report.
    pub fn run_with(&mut self, evaluator: &mut dyn Evaluator) -> Result<Outcome, SessionError> {
        let start = self.journal.len();
        let mut engine = Engine::new(self.config.strategy.clone(), self.config.run_id())?;
        let result = match engine.run(&self.config.seeds, evaluator, &mut self.journal) {
            Ok(r) => r,
            Err(e) => {
                self.monitor
                    .lock()
                    .unwrap_or_else(|p| p.into_inner())
                    .suspend(e.to_string());
                return Err(e.into());
            }
        };
        if self.journal.replay_remaining() > 0 {
            return Err(SessionError::Corrupt {
                line: (self.journal.len() - self.journal.replay_remaining() as u64) as usize + 1,
                reason: "events recorded after run-complete".into(),
            });
        }
        let contents = journal::read_journal(self.journal.path())?;
        let report_dir = self.run_dir.join(REPORT_DIR);
        analysis::report(&contents.events)?.write_dir(&report_dir)?;
        Ok(Outcome {
            result,
            journal: self.journal.path().to_path_buf(),
            report_dir,
            appended: self.journal.len() - start,
        })
    }
}
