//! Run state folded from journal events, as served over HTTP.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coevolution::{Event, Pairing, Purpose};
use crate::fitness::{EvaluationRequest, Species};
use crate::genome::Genome;

/// One measured evaluation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistoryRow {
    pub index: u64,
    pub species: Species,
    pub purpose: Purpose,
    pub genome: Genome,
    pub partner: Genome,
    pub position_a: Genome,
    pub position_b: Genome,
    pub rpm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ts: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Suspended,
    Complete,
}

#[derive(Clone, Debug, Default)]
pub struct RunMonitor {
    config: Option<serde_json::Value>,
    requests: BTreeMap<u64, (Purpose, EvaluationRequest)>,
    history: Vec<HistoryRow>,
    best_so_far: Vec<f64>,
    fittest: Option<Pairing>,
    complete: bool,
    suspended: Option<String>,
    events: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSnapshot {
    pub run_id: Option<String>,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub config: Option<serde_json::Value>,
    pub events: u64,
    pub evaluations: usize,
    pub budget: Option<u64>,
    pub best_so_far: Vec<f64>,
    pub fittest: Option<Pairing>,
}

impl RunMonitor {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, event: &Event) {
        self.events += 1;
        match event {
            Event::RunConfig { config, .. } => self.config = Some(config.clone()),
            Event::EvaluationRequest {
                purpose, request, ..
            } => {
                self.requests
                    .insert(request.index, (*purpose, request.clone()));
            }
            Event::Measurement { request, rpm, ts } => {
                let Some((purpose, req)) = self.requests.remove(request) else {
                    return;
                };
                let best = self.best_so_far.last().map_or(*rpm, |b| b.max(*rpm));
                self.best_so_far.push(best);
                if self.fittest.as_ref().is_none_or(|f| *rpm > f.rpm) {
                    self.fittest = Some(Pairing {
                        index: *request,
                        position_a: req.arrangement.position_a,
                        position_b: req.arrangement.position_b,
                        rpm: *rpm,
                    });
                }
                self.history.push(HistoryRow {
                    index: *request,
                    species: req.species,
                    purpose,
                    genome: req.genome,
                    partner: req.partner,
                    position_a: req.arrangement.position_a,
                    position_b: req.arrangement.position_b,
                    rpm: *rpm,
                    ts: *ts,
                });
            }
            Event::RunComplete { fittest, .. } => {
                self.complete = true;
                self.fittest = Some(fittest.clone());
            }
            _ => {}
        }
    }

    pub fn suspend(&mut self, reason: impl Into<String>) {
        self.suspended = Some(reason.into());
    }

    pub fn history(&self) -> &[HistoryRow] {
        &self.history
    }

    pub fn best_so_far(&self) -> &[f64] {
        &self.best_so_far
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn status(&self) -> RunStatus {
        if self.complete {
            RunStatus::Complete
        } else if self.suspended.is_some() {
            RunStatus::Suspended
        } else {
            RunStatus::Running
        }
    }

    pub fn snapshot(&self) -> RunSnapshot {
        let field = |k: &str| self.config.as_ref().and_then(|c| c.get(k).cloned());
        RunSnapshot {
            run_id: field("run_id").and_then(|v| v.as_str().map(str::to_string)),
            status: self.status(),
            reason: self.suspended.clone(),
            config: self.config.clone(),
            events: self.events,
            evaluations: self.history.len(),
            budget: field("strategy").and_then(|s| s.get("budget")?.as_u64()),
            best_so_far: self.best_so_far.clone(),
            fittest: self.fittest.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coevolution::{Engine, MemorySink, SeedGenomes, StrategyConfig};
    use crate::fitness::{SyntheticEvaluator, SyntheticLandscapeConfig};

    #[test]
    fn folds_a_run() {
        let cfg = StrategyConfig {
            budget: 60,
            ..StrategyConfig::default()
        };
        let mut engine = Engine::new(cfg, "m").unwrap();
        let mut eval = SyntheticEvaluator::new(SyntheticLandscapeConfig::default());
        let mut sink = MemorySink::default();
        let result = engine
            .run(&SeedGenomes::default(), &mut eval, &mut sink)
            .unwrap();
        let mut m = RunMonitor::new();
        m.observe(&Event::RunConfig {
            format: 1,
            config: serde_json::json!({"run_id": "m", "strategy": {"budget": 60}}),
        });
        for e in &sink.events {
            m.observe(e);
        }
        let snap = m.snapshot();
        assert_eq!(snap.status, RunStatus::Complete);
        assert_eq!(snap.run_id.as_deref(), Some("m"));
        assert_eq!(snap.budget, Some(60));
        assert_eq!(snap.evaluations, 60);
        assert_eq!(snap.best_so_far, result.best_so_far);
        assert_eq!(snap.fittest, Some(result.fittest));
        let indices: Vec<u64> = m.history().iter().map(|r| r.index).collect();
        assert_eq!(indices, (0..60).collect::<Vec<_>>());
    }

    #[test]
    fn suspension_shows_in_status() {
        let mut m = RunMonitor::new();
        assert_eq!(m.status(), RunStatus::Running);
        m.suspend("aborted");
        assert_eq!(m.snapshot().reason.as_deref(), Some("aborted"));
        assert_eq!(m.status(), RunStatus::Suspended);
    }
}
