//! Run configuration file (TOML).
//!
//! Every key is optional. A complete file:
//!
//! ```toml
//! run_id = "els-demo"          # default "<mode>-seed<seed>"
//! backend = "synthetic"        # or "hardware"
//! output_dir = "runs"          # default $VAWT_MINE_OUT, else "runs"
//! smooth_steps = 50            # Laplacian steps for printed STL files
//!
//! [strategy]
//! mode = "scga-els"            # cga | scga | scga-20t | scga-els | cga-2 | cga-cross
//! population = 20
//! budget = 160
//! els_offspring = 1000
//! seed = 7
//!
//! [strategy.variation]
//! mutation_rate = 0.25
//! max_step = 10
//! crossover_rate = 0.0
//! tournament_size = 3
//!
//! [strategy.surrogate]
//! learning_rate = 0.3
//! initial_bias = 0.0
//! momentum = 0.0
//! hidden_units = 10
//! epochs = 1000
//! epoch_unit = "pass"          # or "record"
//! window = "all"               # or a record count
//!
//! [synthetic]
//! target_a = [4, 8, 12, 16, 20, 24, 28, 32, 36, 40]
//! target_b = [30, 28, 26, 24, 22, 20, 18, 16, 14, 12]
//! alpha = 1200.0
//! gamma = 200.0
//! delta = 100.0
//! sigma = 50.0
//! noise_seed = 0
//!
//! [seeds]                      # both lists or neither
//! a = [[2, 2, 3, 4, 5, 8, 13, 20, 34, 40, 2, -5, 10, 3, -2, 0]]
//! b = [[5, 8, 2, 4, 9, 12, 20, 30, 38, 41, 0, 0, 0, 0, 0, 1]]
//!
//! [service]
//! bind = "127.0.0.1:8787"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SessionError;
use crate::coevolution::{SeedGenomes, StrategyConfig};
use crate::fitness::SyntheticLandscapeConfig;
use crate::mesh::DEFAULT_SMOOTH_STEPS;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "VAWT_MINE_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "runs";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    #[default]
    Synthetic,
    Hardware,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "synthetic" => Ok(Backend::Synthetic),
            "hardware" => Ok(Backend::Hardware),
            _ => Err(format!(
                "unknown backend {s:?}; expected synthetic or hardware"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1:8787".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub backend: Backend,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub smooth_steps: usize,
    pub strategy: StrategyConfig,
    pub synthetic: SyntheticLandscapeConfig,
    pub seeds: SeedGenomes,
    pub service: ServiceConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_id: None,
            backend: Backend::Synthetic,
            output_dir: None,
            smooth_steps: DEFAULT_SMOOTH_STEPS,
            strategy: StrategyConfig::default(),
            synthetic: SyntheticLandscapeConfig::default(),
            seeds: SeedGenomes::default(),
            service: ServiceConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SessionError> {
        toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SessionError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SessionError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn run_id(&self) -> String {
        self.run_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.strategy.mode, self.strategy.seed))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir
            .clone()
            .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir().join(self.run_id())
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        let bad = |m: String| Err(SessionError::Config(m));
        let id = self.run_id();
        if id.is_empty()
            || !id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
            || id.starts_with('.')
        {
            return bad(format!(
                "run_id {id:?} must be non-empty and use only [A-Za-z0-9._-]"
            ));
        }
        self.strategy
            .validate()
            .map_err(|e| SessionError::Config(e.to_string()))?;
        self.seeds
            .validate()
            .map_err(|e| SessionError::Config(e.to_string()))?;
        self.synthetic.validate().map_err(SessionError::Config)?;
        if self.backend == Backend::Hardware
            && self.service.bind.parse::<std::net::SocketAddr>().is_err()
        {
            return bad(format!(
                "service.bind {:?} is not an address",
                self.service.bind
            ));
        }
        Ok(())
    }

    /// A copy with the run id fixed and no output directory, as stored in
    /// the journal header. A journal's run directory is wherever it lies.
    pub fn resolved(&self) -> Self {
        Self {
            run_id: Some(self.run_id()),
            output_dir: None,
            ..self.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coevolution::Mode;
    use crate::surrogate::Window;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.run_id(), "cga-seed0");
        cfg.validate().unwrap();
    }

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("config.rs");
        let example: String = doc
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").strip_prefix(' ').unwrap_or(""))
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::from_toml_str(&example).unwrap();
        assert_eq!(cfg.strategy.mode, Mode::ScgaEls);
        assert_eq!(cfg.strategy.seed, 7);
        assert_eq!(cfg.strategy.surrogate.window, Window::All);
        assert_eq!(cfg.seeds.a.len(), 1);
        assert_eq!(cfg.run_id(), "els-demo");
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml_str("budgte = 3").is_err());
        assert!(RunConfig::from_toml_str("[strategy]\nmode = \"ga\"").is_err());
        let cfg = RunConfig::from_toml_str("[strategy]\nbudget = 10").unwrap();
        assert!(matches!(cfg.validate(), Err(SessionError::Config(_))));
        let cfg = RunConfig::from_toml_str("run_id = \"../up\"").unwrap();
        assert!(cfg.validate().is_err());
        let cfg =
            RunConfig::from_toml_str("[seeds]\na = [[1,1,1,1,1,1,1,1,1,1,0,0,0,0,0,0]]").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::from_toml_str("[synthetic]\nsigma = -1.0").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.strategy.surrogate.window = Window::Recent(20);
        cfg.run_id = Some("x".into());
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn output_dir_precedence() {
        let cfg = RunConfig {
            output_dir: Some("here".into()),
            ..RunConfig::default()
        };
        assert_eq!(cfg.output_dir(), PathBuf::from("here"));
        assert_eq!(cfg.run_dir(), PathBuf::from("here/cga-seed0"));
        assert_eq!(cfg.resolved().output_dir, None);
    }
}
