//! Statistics for comparing runs and surrogates: MAE, k-fold cross-validation,
//! two-tailed Mann-Whitney U, windowing studies and journal reports.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::coevolution::{
    Engine, EngineError, Event, MemorySink, Mode, Origin, Purpose, SeedGenomes, StrategyConfig,
};
use crate::fitness::{Species, SyntheticEvaluator, SyntheticLandscapeConfig};
use crate::genome::Genome;
use crate::surrogate::{
    normalize, EvaluationRecord, ModelTrainer, SurrogateError, Window, INPUT_DIM,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("length mismatch: {0} predictions vs {1} actuals")]
    LengthMismatch(usize, usize),
    #[error("empty sample")]
    Empty,
    #[error("need at least {need} records, have {have}")]
    TooFewRecords { need: usize, have: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64, AnalysisError> {
    if predicted.len() != actual.len() {
        return Err(AnalysisError::LengthMismatch(predicted.len(), actual.len()));
    }
    if predicted.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a).abs())
        .sum();
    Ok(total / predicted.len() as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApproximation,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MannWhitneyResult {
    /// Statistic of the first sample: its rank sum minus n(n+1)/2.
    pub u: f64,
    pub p: f64,
    pub method: Method,
}

/// Largest combined size the exact distribution is enumerated for.
pub const EXACT_LIMIT: usize = 16;

/// Midranks (1-based) of `values`, plus the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of rank splits giving each U value, for sizes n and m.
fn exact_counts(n: usize, m: usize) -> Vec<f64> {
    // counts[i][j][u]: ways for i first-sample and j second-sample items.
    let max_u = n * m;
    let mut prev: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; m + 1];
    for row in prev.iter_mut() {
        row[0] = 1.0;
    }
    for i in 1..=n {
        let mut cur: Vec<Vec<f64>> = vec![vec![0.0; max_u + 1]; m + 1];
        cur[0][0] = 1.0;
        for j in 1..=m {
            for u in 0..=i * j {
                // Largest item belongs to the first sample (beats all j) or the second.
                let from_first = if u >= j { prev[j][u - j] } else { 0.0 };
                cur[j][u] = from_first + cur[j - 1][u];
            }
        }
        prev = cur;
    }
    prev.swap_remove(m)
}

/// Two-tailed Mann-Whitney U test.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<MannWhitneyResult, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::Empty);
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(AnalysisError::Invalid("sample contains NaN".into()));
    }
    let (n, m) = (a.len(), b.len());
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&all);
    let rank_sum: f64 = ranks[..n].iter().sum();
    let u = rank_sum - (n * (n + 1)) as f64 / 2.0;
    let tied = ties.iter().any(|&t| t > 1);

    if n + m <= EXACT_LIMIT && !tied {
        let counts = exact_counts(n, m);
        let total: f64 = counts.iter().sum();
        let k = u.round() as usize;
        let lower: f64 = counts[..=k].iter().sum::<f64>() / total;
        let upper: f64 = counts[k..].iter().sum::<f64>() / total;
        let p = (2.0 * lower.min(upper)).min(1.0);
        return Ok(MannWhitneyResult {
            u,
            p,
            method: Method::Exact,
        });
    }

    let (nf, mf) = (n as f64, m as f64);
    let total = nf + mf;
    let tie_term: f64 = ties
        .iter()
        .map(|&t| (t as f64).powi(3) - t as f64)
        .sum::<f64>();
    let var = nf * mf / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p = if var <= 0.0 {
        1.0
    } else {
        let z = ((u - nf * mf / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
        let tail = Normal::standard().sf(z);
        (2.0 * tail).clamp(f64::MIN_POSITIVE, 1.0)
    };
    Ok(MannWhitneyResult {
        u,
        p,
        method: Method::NormalApproximation,
    })
}

/// Splits `0..len` over `k` folds of near-equal size (the first `len % k`
/// folds hold one extra item) after shuffling.
pub fn kfold_partition<R: Rng + ?Sized>(len: usize, k: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let (base, extra) = (len / k, len % k);
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    folds
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CvResult {
    pub mean: f64,
    pub sd: f64,
    /// Fold-averaged MAE of every run.
    pub runs: Vec<f64>,
}

/// Repeated k-fold cross-validation of a surrogate trainer.
pub fn kfold_cv(
    records: &[EvaluationRecord],
    k: usize,
    runs: usize,
    trainer: &dyn ModelTrainer,
    seed: u64,
) -> Result<CvResult, AnalysisError> {
    if k < 2 {
        return Err(AnalysisError::Invalid(format!("k must be >= 2, got {k}")));
    }
    if runs == 0 {
        return Err(AnalysisError::Invalid("runs must be >= 1".into()));
    }
    if records.len() < k {
        return Err(AnalysisError::TooFewRecords {
            need: k,
            have: records.len(),
        });
    }
    let per_run: Result<Vec<f64>, AnalysisError> = (0..runs)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let folds = kfold_partition(records.len(), k, &mut rng);
            let mut total = 0.0;
            for (f, held) in folds.iter().enumerate() {
                let train: Vec<EvaluationRecord> = folds
                    .iter()
                    .enumerate()
                    .filter(|&(g, _)| g != f)
                    .flat_map(|(_, idx)| idx.iter().map(|&i| records[i].clone()))
                    .collect();
                let mut init = ChaCha8Rng::seed_from_u64(rng.random());
                let mut shuffle = ChaCha8Rng::seed_from_u64(rng.random());
                let model = trainer.train(&train, &mut init, &mut shuffle)?;
                let preds: Vec<f64> = held
                    .iter()
                    .map(|&i| model.predict(&records[i].genome))
                    .collect();
                let actual: Vec<f64> = held.iter().map(|&i| records[i].fitness).collect();
                total += mae(&preds, &actual)?;
            }
            Ok(total / k as f64)
        })
        .collect();
    let runs = per_run?;
    Ok(CvResult {
        mean: mean(&runs),
        sd: sample_sd(&runs),
        runs,
    })
}

/// Records held out at the end of the stream by [`windowing_study`].
pub const HOLDOUT: usize = 2;

/// For each window, trains on that many of the most recent records before
/// the final [`HOLDOUT`] and scores MAE on the held-out pair. A window longer
/// than the available history uses all of it.
pub fn windowing_study(
    records: &[EvaluationRecord],
    windows: &[Window],
    trainer: &dyn ModelTrainer,
    seed: u64,
) -> Result<Vec<(Window, f64)>, AnalysisError> {
    if records.len() <= HOLDOUT {
        return Err(AnalysisError::TooFewRecords {
            need: HOLDOUT + 1,
            have: records.len(),
        });
    }
    let (history, held) = records.split_at(records.len() - HOLDOUT);
    let actual: Vec<f64> = held.iter().map(|r| r.fitness).collect();
    windows
        .par_iter()
        .map(|&w| {
            let train = &history[w.range(history.len())];
            let mut init = ChaCha8Rng::seed_from_u64(seed);
            let mut shuffle = ChaCha8Rng::seed_from_u64(seed);
            shuffle.set_stream(1);
            let model = trainer.train(train, &mut init, &mut shuffle)?;
            let preds: Vec<f64> = held.iter().map(|r| model.predict(&r.genome)).collect();
            Ok((w, mae(&preds, &actual)?))
        })
        .collect()
}

fn random_weights(rng: &mut ChaCha8Rng) -> [f64; INPUT_DIM] {
    let mut w = [0.0; INPUT_DIM];
    for x in &mut w {
        *x = rng.random_range(0.0..100.0);
    }
    w
}

fn linear_value(w: &[f64; INPUT_DIM], g: &Genome) -> f64 {
    normalize(g).iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
}

const BASE_RPM: f64 = 200.0;
/// Level shift at the switch, as when the partner elite changes.
const DRIFT_RPM: f64 = 400.0;

fn synthetic_records(n: usize, seed: u64, switch_at: Option<usize>) -> Vec<EvaluationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let before = random_weights(&mut rng);
    let after = random_weights(&mut rng);
    (0..n)
        .map(|i| {
            let g = Genome::random(&mut rng);
            let (offset, w) = match switch_at {
                Some(s) if i >= s => (BASE_RPM + DRIFT_RPM, &after),
                _ => (BASE_RPM, &before),
            };
            EvaluationRecord {
                species: Species::A,
                genome: g,
                partner: g,
                fitness: offset + linear_value(w, &g),
                index: i as u64,
            }
        })
        .collect()
}

/// Noise-free records whose fitness is 200 plus a random non-negative
/// linear function of the normalized genome.
pub fn linear_records(n: usize, seed: u64) -> Vec<EvaluationRecord> {
    synthetic_records(n, seed, None)
}

/// Like [`linear_records`], but halfway through the weights are redrawn and
/// every score rises by a fixed 400 rpm.
pub fn drifting_records(n: usize, seed: u64) -> Vec<EvaluationRecord> {
    synthetic_records(n, seed, Some(n / 2))
}

/// Measured pairings as surrogate training records, in journal order.
pub fn records_from_events(events: &[Event]) -> Vec<EvaluationRecord> {
    let mut requests = BTreeMap::new();
    let mut out = Vec::new();
    for e in events {
        match e {
            Event::EvaluationRequest { request, .. } => {
                requests.insert(request.index, request);
            }
            Event::Measurement { request, rpm, .. } => {
                if let Some(req) = requests.get(request) {
                    out.push(EvaluationRecord {
                        species: req.species,
                        genome: req.genome,
                        partner: req.partner,
                        fitness: *rpm,
                        index: req.index,
                    });
                }
            }
            _ => {}
        }
    }
    out
}

/// Final best-so-far of one synthetic run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StrategyRun {
    pub mode: Mode,
    pub seed: u64,
    pub evaluations: usize,
    pub best_rpm: f64,
}

/// Runs every mode once per seed on the synthetic landscape. Seed `s` sets
/// both the strategy seed and the landscape noise seed.
pub fn strategy_study(
    modes: &[Mode],
    seeds: &[u64],
    base: &StrategyConfig,
    landscape: &SyntheticLandscapeConfig,
) -> Result<Vec<StrategyRun>, EngineError> {
    let jobs: Vec<(Mode, u64)> = modes
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    jobs.par_iter()
        .map(|&(mode, seed)| {
            let cfg = StrategyConfig {
                mode,
                seed,
                ..base.clone()
            };
            let mut engine = Engine::new(cfg, format!("{mode}-seed{seed}"))?;
            let mut evaluator = SyntheticEvaluator::new(SyntheticLandscapeConfig {
                noise_seed: seed,
                ..landscape.clone()
            });
            let result = engine.run(
                &SeedGenomes::default(),
                &mut evaluator,
                &mut MemorySink::default(),
            )?;
            Ok(StrategyRun {
                mode,
                seed,
                evaluations: result.fabrications.len(),
                best_rpm: *result.best_so_far.last().expect("a run measures something"),
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvaluationRow {
    pub index: u64,
    pub species: Species,
    pub purpose: Purpose,
    pub genome: String,
    pub partner: String,
    pub position_a: String,
    pub position_b: String,
    pub rpm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestRow {
    pub fabrications: usize,
    pub best_rpm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub evaluations: usize,
    pub fittest_index: u64,
    pub fittest_rpm: f64,
    pub fittest_a: String,
    pub fittest_b: String,
    /// Measured offspring fitness over the last 40 steady-state insertions.
    pub final_n: usize,
    pub final_mean: f64,
    pub final_sd: f64,
}

/// Number of trailing offspring the summary statistics cover.
pub const FINAL_OFFSPRING: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub best_so_far: Vec<BestRow>,
    pub evaluations: Vec<EvaluationRow>,
    pub summary: Summary,
}

/// Measured fitness of offspring and fabricated insertions, in journal order.
pub fn offspring_fitness(events: &[Event]) -> Vec<f64> {
    events
        .iter()
        .filter_map(|e| match e {
            Event::Insertion {
                fitness,
                origin: Origin::Offspring | Origin::Fabricated,
                ..
            } => fitness.measured(),
            _ => None,
        })
        .collect()
}

pub fn report(events: &[Event]) -> Result<Report, AnalysisError> {
    let mut requests = BTreeMap::new();
    let mut evaluations = Vec::new();
    for e in events {
        match e {
            Event::EvaluationRequest {
                purpose, request, ..
            } => {
                requests.insert(request.index, (*purpose, request.clone()));
            }
            Event::Measurement { request, rpm, .. } => {
                let Some((purpose, req)) = requests.get(request) else {
                    return Err(AnalysisError::Invalid(format!(
                        "measurement for unknown request {request}"
                    )));
                };
                evaluations.push(EvaluationRow {
                    index: req.index,
                    species: req.species,
                    purpose: *purpose,
                    genome: req.genome.to_string(),
                    partner: req.partner.to_string(),
                    position_a: req.arrangement.position_a.to_string(),
                    position_b: req.arrangement.position_b.to_string(),
                    rpm: *rpm,
                });
            }
            _ => {}
        }
    }
    if evaluations.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut best_so_far = Vec::with_capacity(evaluations.len());
    let mut fittest = &evaluations[0];
    for (k, row) in evaluations.iter().enumerate() {
        if row.rpm > fittest.rpm {
            fittest = row;
        }
        best_so_far.push(BestRow {
            fabrications: k + 1,
            best_rpm: fittest.rpm,
        });
    }
    let offspring = offspring_fitness(events);
    let tail = &offspring[offspring.len().saturating_sub(FINAL_OFFSPRING)..];
    let summary = Summary {
        evaluations: evaluations.len(),
        fittest_index: fittest.index,
        fittest_rpm: fittest.rpm,
        fittest_a: fittest.position_a.clone(),
        fittest_b: fittest.position_b.clone(),
        final_n: tail.len(),
        final_mean: if tail.is_empty() { 0.0 } else { mean(tail) },
        final_sd: sample_sd(tail),
    };
    Ok(Report {
        best_so_far,
        evaluations,
        summary,
    })
}

/// Serializes rows as CSV with a header row.
pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

impl Report {
    /// Writes `best_so_far.csv`, `evaluations_A.csv`, `evaluations_B.csv`
    /// and `summary.csv` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), AnalysisError> {
        std::fs::create_dir_all(dir)?;
        let file = |name: &str| std::fs::File::create(dir.join(name));
        write_csv(&self.best_so_far, file("best_so_far.csv")?)?;
        for s in Species::BOTH {
            let rows: Vec<&EvaluationRow> =
                self.evaluations.iter().filter(|r| r.species == s).collect();
            write_csv(&rows, file(&format!("evaluations_{s}.csv"))?)?;
        }
        write_csv(std::slice::from_ref(&self.summary), file("summary.csv")?)?;
        Ok(())
    }
}
