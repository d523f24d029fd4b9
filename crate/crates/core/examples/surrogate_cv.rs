//! Ten-fold cross-validated error of the MLP and the linear baseline on the
//! evaluations of one synthetic CGA run, per species.

use vawt_mine::analysis::{kfold_cv, mann_whitney, records_from_events};
use vawt_mine::coevolution::{Engine, MemorySink, SeedGenomes, StrategyConfig};
use vawt_mine::fitness::{Species, SyntheticEvaluator, SyntheticLandscapeConfig};
use vawt_mine::surrogate::{LinearTrainer, MlpConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut engine = Engine::new(StrategyConfig::default(), "cv")?;
    let mut sink = MemorySink::default();
    let mut eval = SyntheticEvaluator::new(SyntheticLandscapeConfig::default());
    engine.run(&SeedGenomes::default(), &mut eval, &mut sink)?;
    let records = records_from_events(&sink.events);

    for s in Species::BOTH {
        let own: Vec<_> = records.iter().filter(|r| r.species == s).cloned().collect();
        let mlp = kfold_cv(&own, 10, 10, &MlpConfig::default(), 1)?;
        let lin = kfold_cv(&own, 10, 10, &LinearTrainer::default(), 1)?;
        let t = mann_whitney(&mlp.runs, &lin.runs)?;
        println!(
            "species {s} ({} records): mlp MAE {:.1} (sd {:.1}), linear {:.1} (sd {:.1}), U {} p {:.3}",
            own.len(),
            mlp.mean,
            mlp.sd,
            lin.mean,
            lin.sd,
            t.u,
            t.p
        );
    }
    Ok(())
}
