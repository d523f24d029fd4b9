//! A complete journaled run against the synthetic landscape.
//!
//! ```text
//! cargo run --release --example synthetic_run -- scga-els 7
//! ```

use vawt_mine::coevolution::Mode;
use vawt_mine::session::{RunConfig, Session};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let mode: Mode = args.next().as_deref().unwrap_or("cga").parse()?;
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(0);

    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig {
        output_dir: Some(dir.path().to_path_buf()),
        ..RunConfig::default()
    };
    cfg.strategy.mode = mode;
    cfg.strategy.seed = seed;
    cfg.synthetic.noise_seed = seed;

    let mut session = Session::create(&cfg)?;
    let outcome = session.run_synthetic()?;
    let best = &outcome.result.best_so_far;
    println!("{mode} seed {seed}: {} evaluations", best.len());
    for k in (0..best.len()).step_by(20).chain([best.len() - 1]) {
        println!("  after {:>3}: best {:.1} rpm", k + 1, best[k]);
    }
    println!("fittest pairing: {:?}", outcome.result.fittest);
    println!("journal had {} events", outcome.appended);
    Ok(())
}
