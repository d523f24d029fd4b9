//! Two-species cooperative coevolution with optional surrogate assistance.
//!
//! Every mode shares one state machine: initialise both populations, then
//! alternate species, one step at a time, until the fabrication budget is
//! spent. Every evaluation goes through an [`EventSink`] before its result is
//! used, which is what makes runs replayable.

mod events;
mod streams;

pub use events::{
    Event, EventSink, FitnessState, InitSource, MemorySink, Origin, Pairing, Purpose, SinkError,
};
pub use streams::{CountingRng, DrawCounts, Streams};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitness::{EvaluationError, EvaluationRequest, Evaluator, Species};
use crate::genome::{
    mutate, roulette_select, tournament_select, uniform_crossover, Genome, GenomeError,
    TournamentMode, VariationConfig,
};
use crate::surrogate::{
    EvaluationRecord, FitnessModel, MlpConfig, ModelTrainer, SurrogateError, Window,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "cga")]
    Cga,
    #[serde(rename = "scga")]
    Scga,
    /// SCGA with the surrogate trained on the 20 most recent records.
    #[serde(rename = "scga-20t")]
    Scga20t,
    #[serde(rename = "scga-els")]
    ScgaEls,
    #[serde(rename = "cga-2")]
    Cga2,
    #[serde(rename = "cga-cross")]
    CgaCross,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Cga,
        Mode::Scga,
        Mode::Scga20t,
        Mode::ScgaEls,
        Mode::Cga2,
        Mode::CgaCross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Cga => "cga",
            Mode::Scga => "scga",
            Mode::Scga20t => "scga-20t",
            Mode::ScgaEls => "scga-els",
            Mode::Cga2 => "cga-2",
            Mode::CgaCross => "cga-cross",
        }
    }

    pub fn uses_surrogate(self) -> bool {
        matches!(self, Mode::Scga | Mode::Scga20t | Mode::ScgaEls)
    }

    /// Evaluations each initial member costs.
    pub fn init_evaluations(self) -> usize {
        if self == Mode::Cga2 {
            2
        } else {
            1
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        Mode::ALL
            .into_iter()
            .find(|m| {
                m.name() == lower || m.name().replace('-', "") == lower.replace(['-', '_'], "")
            })
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub mode: Mode,
    pub population: usize,
    pub budget: usize,
    /// Offspring scored per enhanced-local-search step.
    pub els_offspring: usize,
    pub seed: u64,
    pub variation: VariationConfig,
    pub surrogate: MlpConfig,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Cga,
            population: 20,
            budget: 160,
            els_offspring: 1000,
            seed: 0,
            variation: VariationConfig::default(),
            surrogate: MlpConfig::default(),
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        self.variation
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        self.surrogate
            .validate()
            .map_err(|e| EngineError::Config(e.to_string()))?;
        if self.population < 2 {
            return bad(format!("population must be >= 2, got {}", self.population));
        }
        if self.variation.tournament_size >= self.population {
            return bad(format!(
                "tournament_size {} must be below the population size {}",
                self.variation.tournament_size, self.population
            ));
        }
        let init = 2 * self.population * self.mode.init_evaluations();
        if self.budget < init {
            return bad(format!(
                "budget {} is below the {} evaluations initialisation needs",
                self.budget, init
            ));
        }
        if self.els_offspring == 0 {
            return bad("els_offspring must be >= 1".into());
        }
        Ok(())
    }

    /// The surrogate config with the mode's window applied.
    pub fn effective_surrogate(&self) -> MlpConfig {
        let mut cfg = self.surrogate.clone();
        if self.mode == Mode::Scga20t {
            cfg.window = Window::Recent(20);
        }
        cfg
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid strategy config: {0}")]
    Config(String),
    #[error("evaluation failed: {0}")]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Sink(#[from] SinkError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Selection(#[from] GenomeError),
    #[error("fabrication budget exhausted")]
    BudgetExhausted,
}

impl EngineError {
    /// Failures that leave a journal worth resuming.
    pub fn is_suspension(&self) -> bool {
        matches!(
            self,
            EngineError::Evaluation(_) | EngineError::Sink(SinkError::Io(_))
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub genome: Genome,
    pub fitness: FitnessState,
    /// Fabrication index of the measurement behind `fitness`.
    pub measured_at: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesPopulation {
    pub species: Species,
    pub members: Vec<Member>,
    pub evaluated: Vec<EvaluationRecord>,
}

impl SpeciesPopulation {
    fn values(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.fitness.value()).collect()
    }

    /// Best measured member; ties go to the earliest fabrication.
    pub fn elite(&self) -> Option<usize> {
        let mut best: Option<(usize, f64, u64)> = None;
        for (i, m) in self.members.iter().enumerate() {
            let (Some(f), Some(at)) = (m.fitness.measured(), m.measured_at) else {
                continue;
            };
            let better = match best {
                None => true,
                Some((_, bf, bat)) => f > bf || (f == bf && at < bat),
            };
            if better {
                best = Some((i, f, at));
            }
        }
        best.map(|(i, _, _)| i)
    }

    pub fn best_measured(&self) -> Option<f64> {
        self.elite()
            .and_then(|i| self.members[i].fitness.measured())
    }

    /// Lowest measured fitness; ties go to the lowest slot.
    fn worst_measured(&self) -> Option<usize> {
        let mut worst: Option<(usize, f64)> = None;
        for (i, m) in self.members.iter().enumerate() {
            if let Some(f) = m.fitness.measured() {
                if worst.is_none_or(|(_, w)| f < w) {
                    worst = Some((i, f));
                }
            }
        }
        worst.map(|(i, _)| i)
    }

    fn unevaluated(&self) -> Vec<usize> {
        (0..self.members.len())
            .filter(|&i| self.members[i].fitness.measured().is_none())
            .collect()
    }
}

/// One journaled evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fabrication {
    pub index: u64,
    pub species: Species,
    pub purpose: Purpose,
    pub genome: Genome,
    pub partner: Genome,
    pub position_a: Genome,
    pub position_b: Genome,
    pub rpm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub fabrications: Vec<Fabrication>,
    /// Entry k is the best rpm over the first k + 1 fabrications.
    pub best_so_far: Vec<f64>,
    pub fittest: Pairing,
}

/// User-supplied starting genomes per species.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedGenomes {
    pub a: Vec<Genome>,
    pub b: Vec<Genome>,
}

impl SeedGenomes {
    pub fn is_empty(&self) -> bool {
        self.a.is_empty() && self.b.is_empty()
    }

    pub fn get(&self, s: Species) -> &[Genome] {
        match s {
            Species::A => &self.a,
            Species::B => &self.b,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !self.is_empty() && (self.a.is_empty() || self.b.is_empty()) {
            return Err(EngineError::Config(
                "seed genomes need at least one per species".into(),
            ));
        }
        Ok(())
    }
}

/// The population sequence: each seed followed by its rotation-flipped twin,
/// truncated to `p`, padded with random genomes.
pub fn seeded_population<R: Rng + ?Sized>(
    seeds: &[Genome],
    p: usize,
    rng: &mut R,
) -> Vec<(Genome, InitSource)> {
    let mut out = Vec::with_capacity(p);
    for g in seeds {
        out.push((*g, InitSource::Seed));
        out.push((g.flipped(), InitSource::SeedFlipped));
    }
    out.truncate(p);
    while out.len() < p {
        out.push((Genome::random(rng), InitSource::Random));
    }
    out
}

/// Highest-scoring candidate; ties go to the earliest.
pub fn argmax_earliest(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub struct Engine {
    cfg: StrategyConfig,
    run_id: String,
    trainer: Box<dyn ModelTrainer>,
    streams: Streams,
    pops: [SpeciesPopulation; 2],
    active: Species,
    next_index: u64,
    fabrications: Vec<Fabrication>,
    best_so_far: Vec<f64>,
    fittest: Option<Pairing>,
    initialised: bool,
}

impl Engine {
    pub fn new(cfg: StrategyConfig, run_id: impl Into<String>) -> Result<Self, EngineError> {
        cfg.validate()?;
        let trainer: Box<dyn ModelTrainer> = Box::new(cfg.effective_surrogate());
        let streams = Streams::new(cfg.seed);
        let empty = |species| SpeciesPopulation {
            species,
            members: Vec::new(),
            evaluated: Vec::new(),
        };
        Ok(Self {
            cfg,
            run_id: run_id.into(),
            trainer,
            streams,
            pops: [empty(Species::A), empty(Species::B)],
            active: Species::A,
            next_index: 0,
            fabrications: Vec::new(),
            best_so_far: Vec::new(),
            fittest: None,
            initialised: false,
        })
    }

    /// Swaps in another surrogate, e.g. a stub in tests or the linear model.
    pub fn with_trainer(mut self, trainer: Box<dyn ModelTrainer>) -> Self {
        self.trainer = trainer;
        self
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.cfg
    }

    pub fn population(&self, s: Species) -> &SpeciesPopulation {
        &self.pops[s.index()]
    }

    pub fn active(&self) -> Species {
        self.active
    }

    pub fn evaluations(&self) -> usize {
        self.fabrications.len()
    }

    pub fn remaining(&self) -> usize {
        self.cfg.budget - self.fabrications.len()
    }

    pub fn draw_counts(&self) -> DrawCounts {
        self.streams.counts()
    }

    pub fn result(&self) -> Option<RunResult> {
        Some(RunResult {
            fabrications: self.fabrications.clone(),
            best_so_far: self.best_so_far.clone(),
            fittest: self.fittest.clone()?,
        })
    }

    /// Initialise, step until the budget is spent, then emit run-complete.
    pub fn run(
        &mut self,
        seeds: &SeedGenomes,
        evaluator: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<RunResult, EngineError> {
        if !self.initialised {
            self.initialise(seeds, evaluator, sink)?;
        }
        while self.remaining() > 0 {
            self.step(evaluator, sink)?;
        }
        let result = self.result().expect("initialisation measured something");
        sink.emit(Event::RunComplete {
            evaluations: result.fabrications.len(),
            fittest: result.fittest.clone(),
        })?;
        Ok(result)
    }

    fn measure(
        &mut self,
        species: Species,
        genome: Genome,
        partner: Genome,
        purpose: Purpose,
        evaluator: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(u64, f64), EngineError> {
        if self.remaining() == 0 {
            return Err(EngineError::BudgetExhausted);
        }
        let index = self.next_index;
        let crossed = purpose == Purpose::Cross;
        let req = EvaluationRequest::new(&self.run_id, index, species, genome, partner, crossed);
        sink.emit(Event::EvaluationRequest {
            purpose,
            request: req.clone(),
            rng: self.streams.counts(),
        })?;
        let rpm = match sink.recorded_measurement(index)? {
            Some(m) => m.rpm,
            None => {
                let m = evaluator.evaluate(&req)?;
                sink.emit(Event::Measurement {
                    request: index,
                    rpm: m.rpm,
                    ts: m.timestamp_ms,
                })?;
                m.rpm
            }
        };
        self.next_index += 1;
        let owner = if crossed { species.other() } else { species };
        self.pops[owner.index()].evaluated.push(EvaluationRecord {
            species: owner,
            genome,
            partner,
            fitness: rpm,
            index,
        });
        let a = req.arrangement;
        self.fabrications.push(Fabrication {
            index,
            species,
            purpose,
            genome,
            partner,
            position_a: a.position_a,
            position_b: a.position_b,
            rpm,
        });
        let better = self.fittest.as_ref().is_none_or(|f| rpm > f.rpm);
        if better {
            self.fittest = Some(Pairing {
                index,
                position_a: a.position_a,
                position_b: a.position_b,
                rpm,
            });
        }
        self.best_so_far
            .push(self.fittest.as_ref().expect("set above").rpm);
        Ok((index, rpm))
    }

    fn set_member(
        &mut self,
        species: Species,
        slot: usize,
        member: Member,
        origin: Origin,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        sink.emit(Event::Insertion {
            species,
            slot,
            genome: member.genome,
            fitness: member.fitness,
            origin,
        })?;
        self.pops[species.index()].members[slot] = member;
        Ok(())
    }

    fn elite_genome(&self, s: Species) -> Genome {
        let pop = &self.pops[s.index()];
        let i = pop.elite().expect("every species keeps a measured elite");
        pop.members[i].genome
    }

    /// Builds both populations and measures every member.
    pub fn initialise(
        &mut self,
        seeds: &SeedGenomes,
        evaluator: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        seeds.validate()?;
        let p = self.cfg.population;
        for s in Species::BOTH {
            let members = seeded_population(seeds.get(s), p, &mut self.streams.variation);
            for (slot, &(genome, source)) in members.iter().enumerate() {
                sink.emit(Event::InitMember {
                    species: s,
                    slot,
                    genome,
                    source,
                })?;
            }
            self.pops[s.index()].members = members
                .into_iter()
                .map(|(genome, _)| Member {
                    genome,
                    fitness: FitnessState::Unevaluated,
                    measured_at: None,
                })
                .collect();
        }
        // One random representative per species partners the other
        // species' whole initial population.
        let rep_b = self.streams.partner_choice.random_range(0..p);
        let rep_a = self.streams.partner_choice.random_range(0..p);
        for (s, rep) in [(Species::A, rep_b), (Species::B, rep_a)] {
            for slot in 0..p {
                let genome = self.pops[s.index()].members[slot].genome;
                let other = &self.pops[s.other().index()].members;
                let partner = other[rep].genome;
                let (index, mut rpm) =
                    self.measure(s, genome, partner, Purpose::Init, evaluator, sink)?;
                if self.cfg.mode == Mode::Cga2 {
                    let mut second = self.streams.partner_choice.random_range(0..p - 1);
                    if second >= rep {
                        second += 1;
                    }
                    let partner2 = self.pops[s.other().index()].members[second].genome;
                    let (_, rpm2) = self.measure(
                        s,
                        genome,
                        partner2,
                        Purpose::InitSecondPartner,
                        evaluator,
                        sink,
                    )?;
                    rpm = rpm.max(rpm2);
                }
                let member = Member {
                    genome,
                    fitness: FitnessState::Measured(rpm),
                    measured_at: Some(index),
                };
                self.set_member(s, slot, member, Origin::Init, sink)?;
            }
        }
        self.active = Species::A;
        self.initialised = true;
        Ok(())
    }

    fn offspring(&mut self, s: Species, values: &[f64]) -> Result<Genome, EngineError> {
        let pop = &self.pops[s.index()];
        let var = &self.cfg.variation;
        let rng = &mut self.streams.variation;
        let first = tournament_select(values, var.tournament_size, TournamentMode::Best, rng)?;
        let mut parent = pop.members[first].genome;
        if var.crossover_rate > 0.0 && rng.random_bool(var.crossover_rate) {
            let second = tournament_select(values, var.tournament_size, TournamentMode::Best, rng)?;
            parent = uniform_crossover(&parent, &pop.members[second].genome, rng);
        }
        Ok(mutate(&parent, var, rng))
    }

    /// Replacement tournament over every member except the elite.
    fn replacement_slot(&mut self, s: Species) -> Result<usize, EngineError> {
        let pop = &self.pops[s.index()];
        let elite = pop.elite();
        let slots: Vec<usize> = (0..pop.members.len())
            .filter(|&i| Some(i) != elite)
            .collect();
        let values: Vec<f64> = slots
            .iter()
            .map(|&i| pop.members[i].fitness.value())
            .collect();
        let k = self.cfg.variation.tournament_size.min(slots.len());
        let pick = tournament_select(
            &values,
            k,
            TournamentMode::Worst,
            &mut self.streams.variation,
        )?;
        Ok(slots[pick])
    }

    fn train(
        &mut self,
        s: Species,
        sink: &mut dyn EventSink,
    ) -> Result<Box<dyn FitnessModel>, EngineError> {
        let records = &self.pops[s.index()].evaluated;
        let window = self.trainer.window(records.len());
        sink.emit(Event::ModelTrainingMarker {
            species: s,
            window_start: window.start,
            window_end: window.end,
        })?;
        Ok(self.trainer.train(
            records,
            &mut self.streams.surrogate_init,
            &mut self.streams.surrogate_shuffle,
        )?)
    }

    /// One step of the configured mode for the active species.
    pub fn step(
        &mut self,
        evaluator: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        if !self.initialised {
            return Err(EngineError::Config("engine not initialised".into()));
        }
        if self.remaining() == 0 {
            return Err(EngineError::BudgetExhausted);
        }
        let s = self.active;
        match self.cfg.mode {
            Mode::Cga => self.step_cga(s, evaluator, sink)?,
            Mode::Scga | Mode::Scga20t => self.step_scga(s, evaluator, sink)?,
            Mode::ScgaEls => self.step_scga_els(s, evaluator, sink)?,
            Mode::Cga2 => self.step_cga2(s, evaluator, sink)?,
            Mode::CgaCross => self.step_cga_cross(s, evaluator, sink)?,
        }
        self.active = s.other();
        Ok(())
    }

    fn insert_measured(
        &mut self,
        s: Species,
        genome: Genome,
        rpm: f64,
        index: u64,
        sink: &mut dyn EventSink,
    ) -> Result<usize, EngineError> {
        let slot = self.replacement_slot(s)?;
        let member = Member {
            genome,
            fitness: FitnessState::Measured(rpm),
            measured_at: Some(index),
        };
        self.set_member(s, slot, member, Origin::Offspring, sink)?;
        Ok(slot)
    }

    fn step_cga(
        &mut self,
        s: Species,
        ev: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        let values = self.pops[s.index()].values();
        let child = self.offspring(s, &values)?;
        let partner = self.elite_genome(s.other());
        let (index, rpm) = self.measure(s, child, partner, Purpose::Offspring, ev, sink)?;
        self.insert_measured(s, child, rpm, index, sink)?;
        Ok(())
    }

    fn step_scga(
        &mut self,
        s: Species,
        ev: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        let model = self.train(s, sink)?;
        for m in &mut self.pops[s.index()].members {
            if m.fitness.measured().is_none() {
                m.fitness = FitnessState::Approximated(model.predict(&m.genome));
            }
        }
        for _ in 0..self.cfg.population {
            let values = self.pops[s.index()].values();
            let child = self.offspring(s, &values)?;
            let approx = model.predict(&child);
            let slot = self.replacement_slot(s)?;
            let member = Member {
                genome: child,
                fitness: FitnessState::Approximated(approx),
                measured_at: None,
            };
            self.set_member(s, slot, member, Origin::Offspring, sink)?;
        }

        let partner = self.elite_genome(s.other());
        let candidates = self.pops[s.index()].unevaluated();
        let approx: Vec<f64> = candidates
            .iter()
            .map(|&i| self.pops[s.index()].members[i].fitness.value())
            .collect();
        let Some(best) = argmax_earliest(&approx).map(|k| candidates[k]) else {
            sink.emit(Event::Note {
                text: format!("species {s}: no unevaluated member to fabricate"),
            })?;
            return Ok(());
        };
        self.fabricate(s, best, partner, Purpose::FabricateBest, ev, sink)?;

        if self.remaining() == 0 {
            sink.emit(Event::Note {
                text: format!("species {s}: budget allows only the best approximated member"),
            })?;
            return Ok(());
        }
        let rest = self.pops[s.index()].unevaluated();
        if rest.is_empty() {
            sink.emit(Event::Note {
                text: format!(
                    "species {s}: no second unevaluated member; one fabrication this visit"
                ),
            })?;
            return Ok(());
        }
        let pick = rest[self.streams.variation.random_range(0..rest.len())];
        self.fabricate(s, pick, partner, Purpose::FabricateRandom, ev, sink)?;
        Ok(())
    }

    fn fabricate(
        &mut self,
        s: Species,
        slot: usize,
        partner: Genome,
        purpose: Purpose,
        ev: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        let genome = self.pops[s.index()].members[slot].genome;
        let (index, rpm) = self.measure(s, genome, partner, purpose, ev, sink)?;
        let member = Member {
            genome,
            fitness: FitnessState::Measured(rpm),
            measured_at: Some(index),
        };
        self.set_member(s, slot, member, Origin::Fabricated, sink)
    }

    fn step_scga_els(
        &mut self,
        s: Species,
        ev: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        let model = self.train(s, sink)?;
        let pop = &self.pops[s.index()];
        // Parents come from measured fitness only.
        let measured: Vec<f64> = pop
            .members
            .iter()
            .map(|m| m.fitness.measured().unwrap_or(f64::NEG_INFINITY))
            .collect();
        let k = self.cfg.variation.tournament_size;
        let first = tournament_select(
            &measured,
            k,
            TournamentMode::Best,
            &mut self.streams.variation,
        )?;
        let parent = pop.members[first].genome;
        let var = self.cfg.variation.clone();
        let batch: Vec<Genome> = (0..self.cfg.els_offspring)
            .map(|_| mutate(&parent, &var, &mut self.streams.variation))
            .collect();
        let scores: Vec<f64> = batch.par_iter().map(|g| model.predict(g)).collect();
        let child = batch[argmax_earliest(&scores).expect("m >= 1")];
        let partner = self.elite_genome(s.other());
        let (index, rpm) = self.measure(s, child, partner, Purpose::Offspring, ev, sink)?;
        self.insert_measured(s, child, rpm, index, sink)?;
        Ok(())
    }

    fn step_cga2(
        &mut self,
        s: Species,
        ev: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        let values = self.pops[s.index()].values();
        let child = self.offspring(s, &values)?;
        let other = &self.pops[s.other().index()];
        let elite = other.elite().expect("measured elite");
        let elite_genome = other.members[elite].genome;
        let (index, mut rpm) =
            self.measure(s, child, elite_genome, Purpose::Offspring, ev, sink)?;
        if self.remaining() == 0 {
            sink.emit(Event::Note {
                text: format!("species {s}: last evaluation of the budget, elite partner only"),
            })?;
        } else {
            let other = &self.pops[s.other().index()];
            let weights: Vec<f64> = other.members.iter().map(|m| m.fitness.value()).collect();
            let pick = roulette_select(&weights, &mut self.streams.partner_choice)?;
            if pick != elite {
                let partner = self.pops[s.other().index()].members[pick].genome;
                let (_, rpm2) =
                    self.measure(s, child, partner, Purpose::RoulettePartner, ev, sink)?;
                rpm = rpm.max(rpm2);
            }
        }
        self.insert_measured(s, child, rpm, index, sink)?;
        Ok(())
    }

    fn step_cga_cross(
        &mut self,
        s: Species,
        ev: &mut dyn Evaluator,
        sink: &mut dyn EventSink,
    ) -> Result<(), EngineError> {
        let values = self.pops[s.index()].values();
        let child = self.offspring(s, &values)?;
        let partner = self.elite_genome(s.other());
        let (index, rpm) = self.measure(s, child, partner, Purpose::Offspring, ev, sink)?;
        self.insert_measured(s, child, rpm, index, sink)?;
        if self.remaining() == 0 {
            sink.emit(Event::Note {
                text: format!("species {s}: last evaluation of the budget, no cross evaluation"),
            })?;
            return Ok(());
        }
        let own_elite = self.elite_genome(s);
        let (cross_index, cross) = self.measure(s, child, own_elite, Purpose::Cross, ev, sink)?;
        let other = s.other();
        let best = self.pops[other.index()]
            .best_measured()
            .expect("measured elite");
        if cross > best {
            let slot = self.pops[other.index()]
                .worst_measured()
                .expect("measured members");
            let member = Member {
                genome: child,
                fitness: FitnessState::Measured(cross),
                measured_at: Some(cross_index),
            };
            self.set_member(other, slot, member, Origin::Cross, sink)?;
        }
        Ok(())
    }
}
