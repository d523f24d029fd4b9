//! Evaluators: the synthetic landscape and the operator-measured rig.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{Genome, PROFILE_LEN, PROFILE_MAX, PROFILE_MIN};
use crate::mesh::{genome_to_stl, MeshError, DEFAULT_SMOOTH_STEPS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Species {
    A,
    B,
}

impl Species {
    pub const BOTH: [Species; 2] = [Species::A, Species::B];

    pub fn other(self) -> Self {
        match self {
            Species::A => Species::B,
            Species::B => Species::A,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Species::A => 0,
            Species::B => 1,
        }
    }
}

impl std::fmt::Display for Species {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Species::A => "A",
            Species::B => "B",
        })
    }
}

impl std::str::FromStr for Species {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "A" | "a" => Ok(Species::A),
            "B" | "b" => Ok(Species::B),
            _ => Err(format!("unknown species {s:?}")),
        }
    }
}

/// Rig centre-to-centre spacing.
pub const TURBINE_SPACING_MM: f64 = 33.0;

fn spin(g: &Genome) -> &'static str {
    if g.rotation() {
        "counter-clockwise"
    } else {
        "clockwise"
    }
}

/// Which genome stands in which rig position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arrangement {
    pub position_a: Genome,
    pub position_b: Genome,
    pub text: String,
}

impl Arrangement {
    pub fn new(position_a: Genome, position_b: Genome) -> Self {
        let text = format!(
            "position A: {} ({}); position B: {} ({}); {} mm apart, same fan distance",
            position_a,
            spin(&position_a),
            position_b,
            spin(&position_b),
            TURBINE_SPACING_MM
        );
        Self {
            position_a,
            position_b,
            text,
        }
    }

    pub fn at(&self, position: Species) -> &Genome {
        match position {
            Species::A => &self.position_a,
            Species::B => &self.position_b,
        }
    }
}

/// A pairing to fabricate and measure. `species` owns `genome`; the
/// arrangement normally puts it in its own species' position, except for
/// cross evaluations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRequest {
    pub run_id: String,
    pub index: u64,
    pub species: Species,
    pub genome: Genome,
    pub partner: Genome,
    pub arrangement: Arrangement,
}

impl EvaluationRequest {
    pub fn new(
        run_id: &str,
        index: u64,
        species: Species,
        genome: Genome,
        partner: Genome,
        crossed: bool,
    ) -> Self {
        let position = if crossed { species.other() } else { species };
        let arrangement = match position {
            Species::A => Arrangement::new(genome, partner),
            Species::B => Arrangement::new(partner, genome),
        };
        Self {
            run_id: run_id.to_string(),
            index,
            species,
            genome,
            partner,
            arrangement,
        }
    }

    /// Rig position the evaluated genome occupies.
    pub fn position(&self) -> Species {
        if self.arrangement.position_a == self.genome && self.arrangement.position_b == self.partner
        {
            Species::A
        } else {
            Species::B
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Measurement {
    pub rpm: f64,
    /// Wall-clock milliseconds; only physical measurements carry one.
    pub timestamp_ms: Option<u64>,
}

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("operator aborted the session")]
    Aborted,
    #[error("writing prototype files: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

pub trait Evaluator {
    fn evaluate(&mut self, req: &EvaluationRequest) -> Result<Measurement, EvaluationError>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticLandscapeConfig {
    pub target_a: [i32; PROFILE_LEN],
    pub target_b: [i32; PROFILE_LEN],
    /// Separable weight per turbine, rpm.
    pub alpha: f64,
    /// Cross-species similarity weight, rpm.
    pub gamma: f64,
    /// Co-rotation bonus, rpm.
    pub delta: f64,
    /// Measurement noise SD, rpm.
    pub sigma: f64,
    pub noise_seed: u64,
}

impl Default for SyntheticLandscapeConfig {
    fn default() -> Self {
        Self {
            target_a: [4, 8, 12, 16, 20, 24, 28, 32, 36, 40],
            target_b: [30, 28, 26, 24, 22, 20, 18, 16, 14, 12],
            alpha: 1200.0,
            gamma: 200.0,
            delta: 100.0,
            sigma: 50.0,
            noise_seed: 0,
        }
    }
}

impl SyntheticLandscapeConfig {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("sigma", self.sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        for t in self.target_a.iter().chain(&self.target_b) {
            if !(PROFILE_MIN..=PROFILE_MAX).contains(t) {
                return Err(format!(
                    "target allele {t} outside [{PROFILE_MIN},{PROFILE_MAX}]"
                ));
            }
        }
        Ok(())
    }

    pub fn target(&self, position: Species) -> &[i32; PROFILE_LEN] {
        match position {
            Species::A => &self.target_a,
            Species::B => &self.target_b,
        }
    }

    fn mean_distance(a: &[i32; PROFILE_LEN], b: &[i32; PROFILE_LEN]) -> f64 {
        let total: i32 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
        f64::from(total) / PROFILE_LEN as f64 / f64::from(PROFILE_MAX - PROFILE_MIN)
    }

    /// One turbine's separable contribution in `position`.
    pub fn separable(&self, g: &Genome, position: Species) -> f64 {
        self.alpha * (1.0 - Self::mean_distance(g.profile(), self.target(position)))
    }

    /// Noise-free combined score of an arrangement.
    pub fn expected(&self, position_a: &Genome, position_b: &Genome) -> f64 {
        let interaction =
            self.gamma * (1.0 - Self::mean_distance(position_a.profile(), position_b.profile()));
        let co_rotation = if position_a.rotation() == position_b.rotation() {
            self.delta
        } else {
            0.0
        };
        self.separable(position_a, Species::A)
            + self.separable(position_b, Species::B)
            + interaction
            + co_rotation
    }

    /// Measurement noise for fabrication `index`, from its own stream.
    pub fn noise(&self, index: u64) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.noise_seed);
        rng.set_stream(index);
        Normal::new(0.0, self.sigma)
            .expect("sigma validated")
            .sample(&mut rng)
    }

    pub fn score(&self, req: &EvaluationRequest) -> f64 {
        let a = &req.arrangement;
        (self.expected(&a.position_a, &a.position_b) + self.noise(req.index)).max(0.0)
    }
}

/// Desk-scale stand-in for the fan rig.
#[derive(Clone, Debug, Default)]
pub struct SyntheticEvaluator {
    pub landscape: SyntheticLandscapeConfig,
}

impl SyntheticEvaluator {
    pub fn new(landscape: SyntheticLandscapeConfig) -> Self {
        Self { landscape }
    }
}

impl Evaluator for SyntheticEvaluator {
    fn evaluate(&mut self, req: &EvaluationRequest) -> Result<Measurement, EvaluationError> {
        Ok(Measurement {
            rpm: self.landscape.score(req),
            timestamp_ms: None,
        })
    }
}

/// A published request with its printable files.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PendingRequest {
    pub request_id: u64,
    pub run_id: String,
    pub species: Species,
    pub request: EvaluationRequest,
    pub instructions: String,
    pub stl_a: PathBuf,
    pub stl_b: PathBuf,
    pub stl_urls: [String; 2],
}

impl PendingRequest {
    pub fn stl_path(&self, position: Species) -> &Path {
        match position {
            Species::A => &self.stl_a,
            Species::B => &self.stl_b,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SubmitError {
    #[error("invalid rpm: {0}")]
    InvalidRpm(String),
    #[error("no pending request {0}")]
    UnknownRequest(u64),
    #[error("request {0} already has a measurement")]
    Duplicate(u64),
}

pub fn validate_rpm(rpm: f64) -> Result<f64, SubmitError> {
    if !rpm.is_finite() {
        return Err(SubmitError::InvalidRpm(format!(
            "rpm must be a finite number, got {rpm}"
        )));
    }
    if rpm < 0.0 {
        return Err(SubmitError::InvalidRpm(format!(
            "rpm must be >= 0, got {rpm}"
        )));
    }
    Ok(rpm)
}

#[derive(Default)]
struct HubState {
    pending: Option<PendingRequest>,
    submitted: Option<(u64, f64)>,
    answered: BTreeSet<u64>,
    aborted: bool,
}

/// Single-slot hand-off between the blocked engine and whoever types the
/// measurement in (stdin or HTTP).
#[derive(Default)]
pub struct Hub {
    state: Mutex<HubState>,
    changed: Condvar,
}

impl Hub {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, HubState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Request ids that already hold a measurement, e.g. after a resume.
    pub fn mark_answered(&self, ids: impl IntoIterator<Item = u64>) {
        self.lock().answered.extend(ids);
    }

    pub fn publish(&self, p: PendingRequest) {
        let mut s = self.lock();
        s.pending = Some(p);
        s.submitted = None;
        self.changed.notify_all();
    }

    pub fn pending(&self) -> Option<PendingRequest> {
        self.lock().pending.clone()
    }

    pub fn submit(&self, request_id: u64, rpm: f64) -> Result<(), SubmitError> {
        let rpm = validate_rpm(rpm)?;
        let mut s = self.lock();
        if s.answered.contains(&request_id) {
            return Err(SubmitError::Duplicate(request_id));
        }
        match &s.pending {
            Some(p) if p.request_id == request_id => {}
            _ => return Err(SubmitError::UnknownRequest(request_id)),
        }
        s.answered.insert(request_id);
        s.submitted = Some((request_id, rpm));
        self.changed.notify_all();
        Ok(())
    }

    pub fn abort(&self) {
        self.lock().aborted = true;
        self.changed.notify_all();
    }

    pub fn is_aborted(&self) -> bool {
        self.lock().aborted
    }

    /// Blocks until `request_id` is answered or the session is aborted.
    pub fn wait(&self, request_id: u64) -> Result<f64, EvaluationError> {
        let mut s = self.lock();
        loop {
            if let Some((id, rpm)) = s.submitted {
                if id == request_id {
                    s.submitted = None;
                    s.pending = None;
                    return Ok(rpm);
                }
            }
            if s.aborted {
                s.pending = None;
                return Err(EvaluationError::Aborted);
            }
            s = self.changed.wait(s).unwrap_or_else(|e| e.into_inner());
        }
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

type PublishHook = Box<dyn Fn(&PendingRequest) + Send>;

/// Writes both prototypes, publishes the request and waits for the operator.
pub struct HardwareEvaluator {
    run_dir: PathBuf,
    hub: Arc<Hub>,
    smooth_steps: usize,
    on_publish: Option<PublishHook>,
}

impl HardwareEvaluator {
    pub fn new(run_dir: impl Into<PathBuf>, hub: Arc<Hub>) -> Self {
        Self {
            run_dir: run_dir.into(),
            hub,
            smooth_steps: DEFAULT_SMOOTH_STEPS,
            on_publish: None,
        }
    }

    pub fn with_smooth_steps(mut self, steps: usize) -> Self {
        self.smooth_steps = steps;
        self
    }

    /// Called after files are written and the request is visible.
    pub fn on_publish(mut self, f: impl Fn(&PendingRequest) + Send + 'static) -> Self {
        self.on_publish = Some(Box::new(f));
        self
    }

    pub fn stl_path(&self, position: Species, index: u64) -> PathBuf {
        self.run_dir
            .join(position.to_string())
            .join(format!("{index}.stl"))
    }

    fn write_prototype(&self, g: &Genome, path: &Path) -> Result<(), EvaluationError> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let bytes = genome_to_stl(g, self.smooth_steps)?;
        let mut f = std::fs::File::create(path)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        Ok(())
    }
}

impl Evaluator for HardwareEvaluator {
    fn evaluate(&mut self, req: &EvaluationRequest) -> Result<Measurement, EvaluationError> {
        if self.hub.is_aborted() {
            return Err(EvaluationError::Aborted);
        }
        let stl_a = self.stl_path(Species::A, req.index);
        let stl_b = self.stl_path(Species::B, req.index);
        self.write_prototype(&req.arrangement.position_a, &stl_a)?;
        self.write_prototype(&req.arrangement.position_b, &stl_b)?;
        let pending = PendingRequest {
            request_id: req.index,
            run_id: req.run_id.clone(),
            species: req.species,
            instructions: format!(
                "print both files, mount {}; run the fan for 1 minute and enter the maximum combined rpm",
                req.arrangement.text
            ),
            request: req.clone(),
            stl_a,
            stl_b,
            stl_urls: ["/api/pending/A.stl".into(), "/api/pending/B.stl".into()],
        };
        self.hub.publish(pending.clone());
        if let Some(f) = &self.on_publish {
            f(&pending);
        }
        let rpm = self.hub.wait(req.index)?;
        Ok(Measurement {
            rpm,
            timestamp_ms: Some(now_ms()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet() -> SyntheticLandscapeConfig {
        SyntheticLandscapeConfig {
            sigma: 0.0,
            ..SyntheticLandscapeConfig::default()
        }
    }

    fn on_target(cfg: &SyntheticLandscapeConfig, s: Species, rotation: bool) -> Genome {
        Genome::new(*cfg.target(s), [0; 5], rotation).unwrap()
    }

    fn request(a: Genome, b: Genome, index: u64) -> EvaluationRequest {
        EvaluationRequest::new("t", index, Species::A, a, b, false)
    }

    #[test]
    fn species_helpers() {
        assert_eq!(Species::A.other(), Species::B);
        assert_eq!(Species::B.index(), 1);
        assert_eq!("b".parse::<Species>().unwrap(), Species::B);
        assert!("C".parse::<Species>().is_err());
        assert_eq!(serde_json::to_string(&Species::A).unwrap(), "\"A\"");
    }

    #[test]
    fn arrangement_positions() {
        let cfg = quiet();
        let a = on_target(&cfg, Species::A, false);
        let b = on_target(&cfg, Species::B, true);
        let own = EvaluationRequest::new("r", 3, Species::B, b, a, false);
        assert_eq!(own.arrangement.position_a, a);
        assert_eq!(own.position(), Species::B);
        let crossed = EvaluationRequest::new("r", 4, Species::B, b, a, true);
        assert_eq!(crossed.arrangement.position_a, b);
        assert_eq!(crossed.position(), Species::A);
        assert!(own.arrangement.text.contains("counter-clockwise"));
    }

    #[test]
    fn perfect_pair_scores_2700() {
        let cfg = quiet();
        let shared_profile = [20; 10];
        let cfg = SyntheticLandscapeConfig {
            target_a: shared_profile,
            target_b: shared_profile,
            ..cfg
        };
        let a = on_target(&cfg, Species::A, true);
        let b = on_target(&cfg, Species::B, true);
        assert_eq!(cfg.score(&request(a, b, 0)), 2.0 * 1200.0 + 200.0 + 100.0);
    }

    #[test]
    fn separable_when_uncoupled() {
        let cfg = SyntheticLandscapeConfig {
            gamma: 0.0,
            delta: 0.0,
            ..quiet()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let fixed = Genome::random(&mut rng);
        for _ in 0..50 {
            let g = Genome::random(&mut rng);
            let total = cfg.score(&request(g, fixed, 0));
            let parts = cfg.separable(&g, Species::A) + cfg.separable(&fixed, Species::B);
            assert!((total - parts).abs() < 1e-9);
        }
    }

    #[test]
    fn rotation_flip_changes_by_delta() {
        let cfg = quiet();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let a = Genome::random(&mut rng);
            let b = Genome::random(&mut rng);
            let diff = cfg.score(&request(a, b, 0)) - cfg.score(&request(a.flipped(), b, 0));
            assert!((diff.abs() - cfg.delta).abs() < 1e-9);
        }
    }

    #[test]
    fn moving_toward_target_never_hurts() {
        let cfg = SyntheticLandscapeConfig {
            gamma: 0.0,
            ..quiet()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let a = Genome::random(&mut rng);
            let b = Genome::random(&mut rng);
            let mut genes = a.to_genes();
            let i = rand::Rng::random_range(&mut rng, 0..PROFILE_LEN);
            let t = cfg.target_a[i];
            if genes[i] == t {
                continue;
            }
            genes[i] += (t - genes[i]).signum();
            let closer = Genome::from_genes(&genes).unwrap();
            assert!(cfg.score(&request(closer, b, 0)) >= cfg.score(&request(a, b, 0)));
        }
    }

    #[test]
    fn noise_is_per_request_and_reproducible() {
        let cfg = SyntheticLandscapeConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let (a, b) = (Genome::random(&mut rng), Genome::random(&mut rng));
        let r5 = request(a, b, 5);
        assert_eq!(cfg.score(&r5), cfg.score(&r5));
        assert_ne!(cfg.noise(5), cfg.noise(6));
        let other_seed = SyntheticLandscapeConfig {
            noise_seed: 1,
            ..cfg.clone()
        };
        assert_ne!(cfg.noise(5), other_seed.noise(5));
        let n: Vec<f64> = (0..4000).map(|i| cfg.noise(i)).collect();
        let mean = n.iter().sum::<f64>() / n.len() as f64;
        let sd = (n.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n.len() - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 && (sd - 50.0).abs() < 3.0, "{mean} {sd}");
    }

    #[test]
    fn score_clamped_at_zero() {
        let cfg = SyntheticLandscapeConfig {
            alpha: 0.0,
            gamma: 0.0,
            delta: 0.0,
            sigma: 1000.0,
            ..SyntheticLandscapeConfig::default()
        };
        let g = Genome::new([1; 10], [0; 5], false).unwrap();
        assert!((0..200).all(|i| cfg.score(&request(g, g, i)) >= 0.0));
        assert!((0..200).any(|i| cfg.score(&request(g, g, i)) == 0.0));
    }

    #[test]
    fn landscape_validation() {
        assert!(SyntheticLandscapeConfig::default().validate().is_ok());
        let neg = SyntheticLandscapeConfig {
            sigma: -1.0,
            ..SyntheticLandscapeConfig::default()
        };
        assert!(neg.validate().is_err());
        let mut bad_target = SyntheticLandscapeConfig::default();
        bad_target.target_b[3] = 43;
        assert!(bad_target.validate().is_err());
    }

    fn pending(id: u64) -> PendingRequest {
        let g = Genome::new([5; 10], [0; 5], false).unwrap();
        PendingRequest {
            request_id: id,
            run_id: "t".into(),
            species: Species::A,
            instructions: String::new(),
            request: request(g, g, id),
            stl_a: "a.stl".into(),
            stl_b: "b.stl".into(),
            stl_urls: Default::default(),
        }
    }

    #[test]
    fn hub_submission_rules() {
        let hub = Hub::new();
        assert_eq!(hub.submit(0, 10.0), Err(SubmitError::UnknownRequest(0)));
        hub.publish(pending(7));
        assert!(matches!(
            hub.submit(7, -1.0),
            Err(SubmitError::InvalidRpm(_))
        ));
        assert!(matches!(
            hub.submit(7, f64::NAN),
            Err(SubmitError::InvalidRpm(_))
        ));
        assert_eq!(hub.submit(8, 10.0), Err(SubmitError::UnknownRequest(8)));
        assert_eq!(hub.submit(7, 0.0), Ok(()));
        assert_eq!(hub.submit(7, 5.0), Err(SubmitError::Duplicate(7)));
        assert_eq!(hub.wait(7).unwrap(), 0.0);
        assert!(hub.pending().is_none());
        assert_eq!(hub.submit(7, 5.0), Err(SubmitError::Duplicate(7)));
    }

    #[test]
    fn hub_hands_over_across_threads() {
        let hub = Arc::new(Hub::new());
        hub.publish(pending(3));
        let h = hub.clone();
        let t = std::thread::spawn(move || h.wait(3));
        std::thread::sleep(std::time::Duration::from_millis(20));
        hub.submit(3, 2429.0).unwrap();
        assert_eq!(t.join().unwrap().unwrap(), 2429.0);
    }

    #[test]
    fn hub_abort_unblocks() {
        let hub = Arc::new(Hub::new());
        hub.publish(pending(1));
        let h = hub.clone();
        let t = std::thread::spawn(move || h.wait(1));
        hub.abort();
        assert!(matches!(t.join().unwrap(), Err(EvaluationError::Aborted)));
    }

    #[test]
    fn hardware_writes_files_and_passes_value_through() {
        let dir = tempfile::tempdir().unwrap();
        let hub = Arc::new(Hub::new());
        let h = hub.clone();
        let mut eval = HardwareEvaluator::new(dir.path(), hub.clone())
            .with_smooth_steps(0)
            .on_publish(move |p| h.submit(p.request_id, 2429.0).unwrap());
        let g = Genome::new([5; 10], [0; 5], false).unwrap();
        let m = eval.evaluate(&request(g, g.flipped(), 12)).unwrap();
        assert_eq!(m.rpm, 2429.0);
        assert!(m.timestamp_ms.is_some());
        for s in Species::BOTH {
            let p = dir.path().join(s.to_string()).join("12.stl");
            let bytes = std::fs::read(&p).unwrap();
            assert_eq!((bytes.len() - 84) % 50, 0);
        }
    }
}
