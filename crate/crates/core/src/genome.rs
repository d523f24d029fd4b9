//! Heritable turbine representation and the variation and selection
//! operators shared by every strategy.
//!
//! A [`Genome`] carries 16 genes: ten blade-profile heights, five per-section
//! z-shifts and a rotation-direction flag. On disk it is a flat array of 16
//! integers with the flag encoded as 0/1.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROFILE_LEN: usize = 10;
pub const ZSHIFT_LEN: usize = 5;
pub const GENE_COUNT: usize = PROFILE_LEN + ZSHIFT_LEN + 1;

pub const PROFILE_MIN: i32 = 1;
pub const PROFILE_MAX: i32 = 42;
pub const ZSHIFT_MIN: i32 = -42;
pub const ZSHIFT_MAX: i32 = 42;

#[derive(Debug, Error, PartialEq)]
pub enum GenomeError {
    #[error("profile allele {index} = {value} outside [{PROFILE_MIN},{PROFILE_MAX}]")]
    Profile { index: usize, value: i32 },
    #[error("z-shift allele {index} = {value} outside [{ZSHIFT_MIN},{ZSHIFT_MAX}]")]
    ZShift { index: usize, value: i32 },
    #[error("rotation gene must be 0 or 1, got {0}")]
    Rotation(i32),
    #[error("expected {GENE_COUNT} genes, got {0}")]
    Length(usize),
    #[error("invalid variation config: {0}")]
    Config(String),
    #[error("selection from an empty population")]
    EmptyPopulation,
    #[error("tournament size {k} invalid for population of {n}")]
    TournamentSize { k: usize, n: usize },
}

/// One turbine design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[i32; GENE_COUNT]", try_from = "[i32; GENE_COUNT]")]
pub struct Genome {
    profile: [i32; PROFILE_LEN],
    zshift: [i32; ZSHIFT_LEN],
    rotation: bool,
}

impl Genome {
    pub fn new(
        profile: [i32; PROFILE_LEN],
        zshift: [i32; ZSHIFT_LEN],
        rotation: bool,
    ) -> Result<Self, GenomeError> {
        for (index, &value) in profile.iter().enumerate() {
            if !(PROFILE_MIN..=PROFILE_MAX).contains(&value) {
                return Err(GenomeError::Profile { index, value });
            }
        }
        for (index, &value) in zshift.iter().enumerate() {
            if !(ZSHIFT_MIN..=ZSHIFT_MAX).contains(&value) {
                return Err(GenomeError::ZShift { index, value });
            }
        }
        Ok(Self {
            profile,
            zshift,
            rotation,
        })
    }

    /// Uniformly random genome over the legal allele ranges.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut profile = [0; PROFILE_LEN];
        for allele in &mut profile {
            *allele = rng.random_range(PROFILE_MIN..=PROFILE_MAX);
        }
        let mut zshift = [0; ZSHIFT_LEN];
        for allele in &mut zshift {
            *allele = rng.random_range(ZSHIFT_MIN..=ZSHIFT_MAX);
        }
        let rotation = rng.random_bool(0.5);
        Self {
            profile,
            zshift,
            rotation,
        }
    }

    pub fn profile(&self) -> &[i32; PROFILE_LEN] {
        &self.profile
    }

    pub fn zshift(&self) -> &[i32; ZSHIFT_LEN] {
        &self.zshift
    }

    pub fn rotation(&self) -> bool {
        self.rotation
    }

    /// Same geometry, opposite spin.
    pub fn flipped(&self) -> Self {
        Self {
            rotation: !self.rotation,
            ..*self
        }
    }

    pub fn to_genes(&self) -> [i32; GENE_COUNT] {
        let mut genes = [0; GENE_COUNT];
        genes[..PROFILE_LEN].copy_from_slice(&self.profile);
        genes[PROFILE_LEN..PROFILE_LEN + ZSHIFT_LEN].copy_from_slice(&self.zshift);
        genes[GENE_COUNT - 1] = i32::from(self.rotation);
        genes
    }

    pub fn from_genes(genes: &[i32]) -> Result<Self, GenomeError> {
        if genes.len() != GENE_COUNT {
            return Err(GenomeError::Length(genes.len()));
        }
        let mut profile = [0; PROFILE_LEN];
        profile.copy_from_slice(&genes[..PROFILE_LEN]);
        let mut zshift = [0; ZSHIFT_LEN];
        zshift.copy_from_slice(&genes[PROFILE_LEN..PROFILE_LEN + ZSHIFT_LEN]);
        let rotation = match genes[GENE_COUNT - 1] {
            0 => false,
            1 => true,
            other => return Err(GenomeError::Rotation(other)),
        };
        Self::new(profile, zshift, rotation)
    }
}

impl From<Genome> for [i32; GENE_COUNT] {
    fn from(g: Genome) -> Self {
        g.to_genes()
    }
}

impl TryFrom<[i32; GENE_COUNT]> for Genome {
    type Error = GenomeError;

    fn try_from(genes: [i32; GENE_COUNT]) -> Result<Self, Self::Error> {
        Genome::from_genes(&genes)
    }
}

impl std::fmt::Display for Genome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let genes = self.to_genes().map(|g| g.to_string());
        write!(f, "[{}]", genes.join(","))
    }
}

impl std::str::FromStr for Genome {
    type Err = GenomeError;

    /// Parses 16 comma- or whitespace-separated integers, optionally bracketed.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim().trim_start_matches('[').trim_end_matches(']');
        let genes = trimmed
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<i32>().map_err(|_| GenomeError::Length(0)))
            .collect::<Result<Vec<_>, _>>()?;
        Genome::from_genes(&genes)
    }
}

/// Mutation, crossover and tournament parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationConfig {
    pub mutation_rate: f64,
    pub max_step: i32,
    pub crossover_rate: f64,
    pub tournament_size: usize,
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            mutation_rate: 0.25,
            max_step: 10,
            crossover_rate: 0.0,
            tournament_size: 3,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<(), GenomeError> {
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(GenomeError::Config(format!(
                "mutation_rate {} not in [0,1]",
                self.mutation_rate
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) {
            return Err(GenomeError::Config(format!(
                "crossover_rate {} not in [0,1]",
                self.crossover_rate
            )));
        }
        if self.max_step < 1 {
            return Err(GenomeError::Config("max_step must be >= 1".into()));
        }
        if self.tournament_size < 1 {
            return Err(GenomeError::Config("tournament_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Adds `step` to `allele` and clamps into `[min, max]`.
pub fn shift_allele(allele: i32, step: i32, min: i32, max: i32) -> i32 {
    (allele + step).clamp(min, max)
}

/// Nonzero step uniform over `[-max_step, -1] ∪ [1, max_step]`.
fn draw_step<R: Rng + ?Sized>(rng: &mut R, max_step: i32) -> i32 {
    let k = rng.random_range(0..2 * max_step);
    if k < max_step {
        k - max_step
    } else {
        k - max_step + 1
    }
}

/// Per-allele creep mutation with clamping; the rotation flag flips at the
/// same per-gene rate. Expects a config that passed [`VariationConfig::validate`].
pub fn mutate<R: Rng + ?Sized>(parent: &Genome, cfg: &VariationConfig, rng: &mut R) -> Genome {
    let mut child = *parent;
    for allele in &mut child.profile {
        if rng.random_bool(cfg.mutation_rate) {
            let step = draw_step(rng, cfg.max_step);
            *allele = shift_allele(*allele, step, PROFILE_MIN, PROFILE_MAX);
        }
    }
    for allele in &mut child.zshift {
        if rng.random_bool(cfg.mutation_rate) {
            let step = draw_step(rng, cfg.max_step);
            *allele = shift_allele(*allele, step, ZSHIFT_MIN, ZSHIFT_MAX);
        }
    }
    if rng.random_bool(cfg.mutation_rate) {
        child.rotation = !child.rotation;
    }
    child
}

/// Uniform crossover: each gene taken from either parent with equal odds.
pub fn uniform_crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, rng: &mut R) -> Genome {
    let ga = a.to_genes();
    let gb = b.to_genes();
    let mut genes = [0; GENE_COUNT];
    for i in 0..GENE_COUNT {
        genes[i] = if rng.random_bool(0.5) { ga[i] } else { gb[i] };
    }
    Genome::from_genes(&genes).expect("crossover of valid parents is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TournamentMode {
    /// Fittest of the sample; used for parent selection.
    Best,
    /// Least fit of the sample; used to pick the member to replace.
    Worst,
}

/// Samples `k` distinct members uniformly and returns the index of the
/// fittest (or least fit). Ties go to the earliest-sampled candidate.
pub fn tournament_select<R: Rng + ?Sized>(
    fitness: &[f64],
    k: usize,
    mode: TournamentMode,
    rng: &mut R,
) -> Result<usize, GenomeError> {
    let n = fitness.len();
    if n == 0 {
        return Err(GenomeError::EmptyPopulation);
    }
    if k == 0 || k > n {
        return Err(GenomeError::TournamentSize { k, n });
    }
    let mut sampled = index::sample(rng, n, k).into_iter();
    let mut winner = sampled.next().expect("k >= 1");
    for candidate in sampled {
        let better = match mode {
            TournamentMode::Best => fitness[candidate] > fitness[winner],
            TournamentMode::Worst => fitness[candidate] < fitness[winner],
        };
        if better {
            winner = candidate;
        }
    }
    Ok(winner)
}

/// Fitness-proportionate draw. Falls back to a uniform draw when the total
/// weight is zero.
pub fn roulette_select<R: Rng + ?Sized>(
    weights: &[f64],
    rng: &mut R,
) -> Result<usize, GenomeError> {
    if weights.is_empty() {
        return Err(GenomeError::EmptyPopulation);
    }
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    if total <= 0.0 {
        return Ok(rng.random_range(0..weights.len()));
    }
    let mut spin = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        let w = w.max(0.0);
        if spin < w {
            return Ok(i);
        }
        spin -= w;
    }
    // Rounding can leave the spin just past the last positive slot.
    Ok(weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("total > 0 implies a positive weight"))
}
