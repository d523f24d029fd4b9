//! Journal event payloads and the sink the engine writes through.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::streams::DrawCounts;
use crate::fitness::{EvaluationRequest, Measurement, Species};
use crate::genome::Genome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitSource {
    Seed,
    SeedFlipped,
    Random,
}

/// Why an evaluation was requested.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Purpose {
    /// Initial member with the species representative.
    Init,
    /// Initial member with its second random partner (two-partner mode).
    InitSecondPartner,
    /// Offspring with the other species' elite.
    Offspring,
    /// Offspring with a fitness-proportionate partner.
    RoulettePartner,
    /// Offspring in the other species' position with its own elite.
    Cross,
    /// Best approximated member.
    FabricateBest,
    /// Random unevaluated member.
    FabricateRandom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Origin {
    Init,
    Offspring,
    Fabricated,
    Cross,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessState {
    Measured(f64),
    Approximated(f64),
    Unevaluated,
}

impl FitnessState {
    pub fn measured(&self) -> Option<f64> {
        match *self {
            FitnessState::Measured(v) => Some(v),
            _ => None,
        }
    }

    /// Value used by tournaments: measured or approximated, else 0.
    pub fn value(&self) -> f64 {
        match *self {
            FitnessState::Measured(v) | FitnessState::Approximated(v) => v,
            FitnessState::Unevaluated => 0.0,
        }
    }
}

/// Highest combined score actually measured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub index: u64,
    pub position_a: Genome,
    pub position_b: Genome,
    pub rpm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    RunConfig {
        format: u32,
        config: serde_json::Value,
    },
    InitMember {
        species: Species,
        slot: usize,
        genome: Genome,
        source: InitSource,
    },
    EvaluationRequest {
        purpose: Purpose,
        request: EvaluationRequest,
        rng: DrawCounts,
    },
    Measurement {
        request: u64,
        rpm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ts: Option<u64>,
    },
    ModelTrainingMarker {
        species: Species,
        window_start: usize,
        window_end: usize,
    },
    Insertion {
        species: Species,
        slot: usize,
        genome: Genome,
        fitness: FitnessState,
        origin: Origin,
    },
    Note {
        text: String,
    },
    RunComplete {
        evaluations: usize,
        fittest: Pairing,
    },
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::RunConfig { .. } => "run-config",
            Event::InitMember { .. } => "init-member",
            Event::EvaluationRequest { .. } => "evaluation-request",
            Event::Measurement { .. } => "measurement",
            Event::ModelTrainingMarker { .. } => "model-training-marker",
            Event::Insertion { .. } => "insertion",
            Event::Note { .. } => "note",
            Event::RunComplete { .. } => "run-complete",
        }
    }
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("journal write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("replay diverged at seq {seq}: journal has {recorded}, engine produced {produced}")]
    Divergence {
        seq: u64,
        recorded: String,
        produced: String,
    },
    #[error("{0}")]
    Format(String),
}

/// Where the engine records what it does. In replay, a sink checks each
/// event against the recorded one and hands back recorded measurements.
pub trait EventSink {
    fn emit(&mut self, event: Event) -> Result<(), SinkError>;

    /// A recorded measurement for `request`, consumed if present.
    fn recorded_measurement(&mut self, request: u64) -> Result<Option<Measurement>, SinkError>;
}

/// In-memory sink for tests and studies.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    pub events: Vec<Event>,
}

impl EventSink for MemorySink {
    fn emit(&mut self, event: Event) -> Result<(), SinkError> {
        self.events.push(event);
        Ok(())
    }

    fn recorded_measurement(&mut self, _request: u64) -> Result<Option<Measurement>, SinkError> {
        Ok(None)
    }
}
