//! Final best-so-far of several modes over a handful of seeds, with a
//! Mann-Whitney comparison against plain CGA.
//!
//! ```text
//! cargo run --release --example strategy_comparison -- 8
//! ```

use vawt_mine::analysis::{mann_whitney, mean, sample_sd, strategy_study};
use vawt_mine::coevolution::{Mode, StrategyConfig};
use vawt_mine::fitness::SyntheticLandscapeConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: u64 = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(8);
    let seeds: Vec<u64> = (0..n).collect();
    let modes = [Mode::Cga, Mode::Cga2, Mode::Scga, Mode::ScgaEls];
    let runs = strategy_study(
        &modes,
        &seeds,
        &StrategyConfig::default(),
        &SyntheticLandscapeConfig::default(),
    )?;

    let finals = |m: Mode| -> Vec<f64> {
        runs.iter()
            .filter(|r| r.mode == m)
            .map(|r| r.best_rpm)
            .collect()
    };
    let cga = finals(Mode::Cga);
    println!("cga       mean {:.1} sd {:.1}", mean(&cga), sample_sd(&cga));
    for m in &modes[1..] {
        let x = finals(*m);
        let vs = mann_whitney(&x, &cga)?;
        println!(
            "{:<9} mean {:.1} sd {:.1}   vs cga: U {:.1} p {:.3} ({:?})",
            m.name(),
            mean(&x),
            sample_sd(&x),
            vs.u,
            vs.p,
            vs.method
        );
    }
    Ok(())
}
