//! Per-species fitness approximation.
//!
//! The model maps a genome (normalized to [0,1]^16) to a combined rpm. The
//! main model is a 16-H-1 sigmoid network trained by plain stochastic
//! backpropagation; a least-squares linear model is kept for comparisons.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::Species;
use crate::genome::{
    Genome, GENE_COUNT, PROFILE_LEN, PROFILE_MAX, PROFILE_MIN, ZSHIFT_LEN, ZSHIFT_MAX, ZSHIFT_MIN,
};

pub const INPUT_DIM: usize = GENE_COUNT;

#[derive(Debug, Error, PartialEq)]
pub enum SurrogateError {
    #[error("no training records")]
    NoRecords,
    #[error("need at least {need} records, have {have}")]
    TooFewRecords { need: usize, have: usize },
    #[error("invalid surrogate config: {0}")]
    InvalidConfig(String),
}

/// Affine map of every gene onto [0,1].
pub fn normalize(g: &Genome) -> [f64; INPUT_DIM] {
    let mut x = [0.0; INPUT_DIM];
    let span = |v: i32, lo: i32, hi: i32| f64::from(v - lo) / f64::from(hi - lo);
    for (i, &v) in g.profile().iter().enumerate() {
        x[i] = span(v, PROFILE_MIN, PROFILE_MAX);
    }
    for (i, &v) in g.zshift().iter().enumerate() {
        x[PROFILE_LEN + i] = span(v, ZSHIFT_MIN, ZSHIFT_MAX);
    }
    x[PROFILE_LEN + ZSHIFT_LEN] = if g.rotation() { 1.0 } else { 0.0 };
    x
}

/// One measured pairing, as seen by the evaluated genome's species.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub species: Species,
    pub genome: Genome,
    pub partner: Genome,
    /// Combined rpm.
    pub fitness: f64,
    /// Fabrication index.
    pub index: u64,
}

/// Training window: every record, or only the most recent `n`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Window {
    #[default]
    All,
    Recent(usize),
}

impl Window {
    /// Slice of a `len`-record history used for training.
    pub fn range(&self, len: usize) -> Range<usize> {
        match *self {
            Window::All => 0..len,
            Window::Recent(n) => len.saturating_sub(n)..len,
        }
    }
}

impl std::fmt::Display for Window {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Window::All => f.write_str("all"),
            Window::Recent(n) => write!(f, "{n}"),
        }
    }
}

impl std::str::FromStr for Window {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(Window::All);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Window::Recent(n)),
            _ => Err(SurrogateError::InvalidConfig(format!(
                "window must be \"all\" or a positive integer, got {s:?}"
            ))),
        }
    }
}

impl Serialize for Window {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Window::All => s.serialize_str("all"),
            Window::Recent(n) => s.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for Window {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Size(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Size(n) => format!("{n}").parse().map_err(serde::de::Error::custom),
            Raw::Name(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// What one training epoch consists of.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpochUnit {
    /// Every windowed record once, in freshly shuffled order.
    #[default]
    Pass,
    /// A single record drawn without replacement.
    Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub learning_rate: f64,
    pub initial_bias: f64,
    pub momentum: f64,
    pub hidden_units: usize,
    pub epochs: usize,
    pub epoch_unit: EpochUnit,
    pub window: Window,
    /// Seed for [`MlpModel::fit`]; the engine supplies its own streams.
    pub weight_init_seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.3,
            initial_bias: 0.0,
            momentum: 0.0,
            hidden_units: 10,
            epochs: 1000,
            epoch_unit: EpochUnit::Pass,
            window: Window::All,
            weight_init_seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        let bad = |m: String| Err(SurrogateError::InvalidConfig(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !self.momentum.is_finite() || self.momentum < 0.0 {
            return bad(format!("momentum must be >= 0, got {}", self.momentum));
        }
        if !self.initial_bias.is_finite() {
            return bad("initial_bias must be finite".into());
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be >= 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.window == Window::Recent(0) {
            return bad("window must be >= 1".into());
        }
        Ok(())
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Anything that approximates a genome's combined rpm.
pub trait FitnessModel: Send + Sync {
    fn predict(&self, g: &Genome) -> f64;
}

/// Builds a fresh model from a species' evaluated list.
pub trait ModelTrainer: Send + Sync {
    fn train(
        &self,
        records: &[EvaluationRecord],
        init_rng: &mut dyn RngCore,
        shuffle_rng: &mut dyn RngCore,
    ) -> Result<Box<dyn FitnessModel>, SurrogateError>;

    /// Records the trainer will look at out of a history of `len`.
    fn window(&self, len: usize) -> Range<usize>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    /// Hidden-layer weights, one row of `INPUT_DIM` per unit.
    w_hidden: Vec<[f64; INPUT_DIM]>,
    b_hidden: Vec<f64>,
    w_out: Vec<f64>,
    b_out: f64,
    fitness_scale: f64,
    training: Range<usize>,
}

impl MlpModel {
    /// Trains with init and shuffle streams derived from
    /// `cfg.weight_init_seed`.
    pub fn fit(records: &[EvaluationRecord], cfg: &MlpConfig) -> Result<Self, SurrogateError> {
        let mut init = ChaCha8Rng::seed_from_u64(cfg.weight_init_seed);
        let mut shuffle = ChaCha8Rng::seed_from_u64(cfg.weight_init_seed);
        shuffle.set_stream(1);
        train(records, cfg, &mut init, &mut shuffle)
    }

    /// Positions in the record list the model was trained on.
    pub fn training_indices(&self) -> Range<usize> {
        self.training.clone()
    }

    pub fn fitness_scale(&self) -> f64 {
        self.fitness_scale
    }

    pub fn hidden_units(&self) -> usize {
        self.b_hidden.len()
    }

    /// Network output in (0,1) for a normalized input.
    pub fn forward(&self, x: &[f64; INPUT_DIM]) -> f64 {
        let mut acc = self.b_out;
        for ((w, b), v) in self.w_hidden.iter().zip(&self.b_hidden).zip(&self.w_out) {
            let z: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b;
            acc += v * sigmoid(z);
        }
        sigmoid(acc)
    }

    pub fn predict(&self, g: &Genome) -> f64 {
        self.forward(&normalize(g)) * self.fitness_scale
    }
}

impl FitnessModel for MlpModel {
    fn predict(&self, g: &Genome) -> f64 {
        MlpModel::predict(self, g)
    }
}

/// Fresh weights, then per-record backpropagation updates over the windowed
/// records, drawn without replacement and reshuffled once exhausted. The
/// number of updates is `cfg.epochs` times the epoch length.
pub fn train(
    records: &[EvaluationRecord],
    cfg: &MlpConfig,
    init_rng: &mut dyn RngCore,
    shuffle_rng: &mut dyn RngCore,
) -> Result<MlpModel, SurrogateError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(SurrogateError::NoRecords);
    }
    let training = cfg.window.range(records.len());
    let set = &records[training.clone()];
    let max = set
        .iter()
        .map(|r| r.fitness)
        .fold(f64::NEG_INFINITY, f64::max);
    let fitness_scale = if max > 0.0 { max } else { 1.0 };
    let inputs: Vec<[f64; INPUT_DIM]> = set.iter().map(|r| normalize(&r.genome)).collect();
    let targets: Vec<f64> = set.iter().map(|r| r.fitness / fitness_scale).collect();

    let h = cfg.hidden_units;
    let mut m = MlpModel {
        w_hidden: Vec::with_capacity(h),
        b_hidden: vec![cfg.initial_bias; h],
        w_out: Vec::with_capacity(h),
        b_out: cfg.initial_bias,
        fitness_scale,
        training,
    };
    for _ in 0..h {
        let mut row = [0.0; INPUT_DIM];
        for w in &mut row {
            *w = init_rng.random_range(-0.5..=0.5);
        }
        m.w_hidden.push(row);
    }
    for _ in 0..h {
        m.w_out.push(init_rng.random_range(-0.5..=0.5));
    }

    let (beta, mu) = (cfg.learning_rate, cfg.momentum);
    let mut dw_hidden = vec![[0.0; INPUT_DIM]; h];
    let mut db_hidden = vec![0.0; h];
    let mut dw_out = vec![0.0; h];
    let mut db_out = 0.0;
    let mut hidden = vec![0.0; h];

    let mut order: Vec<usize> = (0..set.len()).collect();
    let mut next = order.len();
    let updates = match cfg.epoch_unit {
        EpochUnit::Pass => cfg.epochs * set.len(),
        EpochUnit::Record => cfg.epochs,
    };
    for _ in 0..updates {
        if next == order.len() {
            order.shuffle(shuffle_rng);
            next = 0;
        }
        let k = order[next];
        next += 1;
        let x = &inputs[k];

        let mut acc = m.b_out;
        for j in 0..h {
            let z: f64 =
                m.w_hidden[j].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + m.b_hidden[j];
            hidden[j] = sigmoid(z);
            acc += m.w_out[j] * hidden[j];
        }
        let y = sigmoid(acc);
        let delta_out = (targets[k] - y) * y * (1.0 - y);

        for j in 0..h {
            let delta_h = hidden[j] * (1.0 - hidden[j]) * m.w_out[j] * delta_out;
            dw_out[j] = beta * delta_out * hidden[j] + mu * dw_out[j];
            m.w_out[j] += dw_out[j];
            for i in 0..INPUT_DIM {
                dw_hidden[j][i] = beta * delta_h * x[i] + mu * dw_hidden[j][i];
                m.w_hidden[j][i] += dw_hidden[j][i];
            }
            db_hidden[j] = beta * delta_h + mu * db_hidden[j];
            m.b_hidden[j] += db_hidden[j];
        }
        db_out = beta * delta_out + mu * db_out;
        m.b_out += db_out;
    }
    Ok(m)
}

impl ModelTrainer for MlpConfig {
    fn train(
        &self,
        records: &[EvaluationRecord],
        init_rng: &mut dyn RngCore,
        shuffle_rng: &mut dyn RngCore,
    ) -> Result<Box<dyn FitnessModel>, SurrogateError> {
        Ok(Box::new(train(records, self, init_rng, shuffle_rng)?))
    }

    fn window(&self, len: usize) -> Range<usize> {
        self.window.range(len)
    }
}

/// Least-squares hyperplane over normalized genes.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coefficients: [f64; INPUT_DIM],
}

impl LinearModel {
    pub fn predict(&self, g: &Genome) -> f64 {
        let x = normalize(g);
        self.intercept
            + self
                .coefficients
                .iter()
                .zip(&x)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

impl FitnessModel for LinearModel {
    fn predict(&self, g: &Genome) -> f64 {
        LinearModel::predict(self, g)
    }
}

const RIDGE: f64 = 1e-8;

/// Ordinary least squares on centered inputs. A singular normal system is
/// retried with a 1e-8 ridge term.
pub fn linear_baseline_train(
    records: &[EvaluationRecord],
    window: Window,
) -> Result<LinearModel, SurrogateError> {
    let set = &records[window.range(records.len())];
    if set.len() < 2 {
        return Err(SurrogateError::TooFewRecords {
            need: 2,
            have: set.len(),
        });
    }
    let n = set.len() as f64;
    let xs: Vec<[f64; INPUT_DIM]> = set.iter().map(|r| normalize(&r.genome)).collect();
    let mut x_mean = [0.0; INPUT_DIM];
    for x in &xs {
        for i in 0..INPUT_DIM {
            x_mean[i] += x[i] / n;
        }
    }
    let y_mean = set.iter().map(|r| r.fitness).sum::<f64>() / n;

    let design = DMatrix::from_fn(set.len(), INPUT_DIM, |r, c| xs[r][c] - x_mean[c]);
    let y = DVector::from_iterator(set.len(), set.iter().map(|r| r.fitness - y_mean));
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * y;

    let well_posed = |chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
        let d = chol.l_dirty().diagonal();
        let (lo, hi) = (d.min(), d.max());
        hi > 0.0 && lo / hi > 1e-7
    };
    let beta = match gram.clone().cholesky().filter(well_posed) {
        Some(chol) => chol.solve(&rhs),
        None => {
            let ridged = gram + DMatrix::identity(INPUT_DIM, INPUT_DIM) * RIDGE;
            match ridged.cholesky() {
                Some(chol) => chol.solve(&rhs),
                None => DVector::zeros(INPUT_DIM),
            }
        }
    };
    let mut coefficients = [0.0; INPUT_DIM];
    for (c, b) in coefficients.iter_mut().zip(beta.iter()) {
        *c = *b;
    }
    let intercept = y_mean
        - coefficients
            .iter()
            .zip(&x_mean)
            .map(|(a, b)| a * b)
            .sum::<f64>();
    Ok(LinearModel {
        intercept,
        coefficients,
    })
}

/// [`ModelTrainer`] for the linear baseline.
#[derive(Clone, Copy, Debug, Default)]
pub struct LinearTrainer {
    pub window: Window,
}

impl ModelTrainer for LinearTrainer {
    fn train(
        &self,
        records: &[EvaluationRecord],
        _init_rng: &mut dyn RngCore,
        _shuffle_rng: &mut dyn RngCore,
    ) -> Result<Box<dyn FitnessModel>, SurrogateError> {
        Ok(Box::new(linear_baseline_train(records, self.window)?))
    }

    fn window(&self, len: usize) -> Range<usize> {
        self.window.range(len)
    }
}
