//! Interrupt a run partway, then resume it from the journal and check
//! that the result is identical to an uninterrupted run.

use vawt_mine::fitness::{
    EvaluationError, EvaluationRequest, Evaluator, Measurement, SyntheticEvaluator,
};
use vawt_mine::session::{RunConfig, Session};

struct Flaky {
    inner: SyntheticEvaluator,
    left: usize,
}

impl Evaluator for Flaky {
    fn evaluate(&mut self, req: &EvaluationRequest) -> Result<Measurement, EvaluationError> {
        if self.left == 0 {
            return Err(EvaluationError::Aborted);
        }
        self.left -= 1;
        self.inner.evaluate(req)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = RunConfig {
        run_id: Some("demo".into()),
        output_dir: Some(dir.path().join("interrupted")),
        ..RunConfig::default()
    };

    let mut session = Session::create(&cfg)?;
    let mut eval = Flaky {
        inner: SyntheticEvaluator::new(cfg.synthetic.clone()),
        left: 57,
    };
    let err = session.run_with(&mut eval).unwrap_err();
    println!("stopped: {err} (resumable: {})", err.is_suspension());
    let journal = session.journal_path().to_path_buf();
    drop(session);

    let outcome = Session::resume(&journal)?.run_synthetic()?;
    println!("resumed: {} events appended", outcome.appended);

    cfg.output_dir = Some(dir.path().join("straight"));
    let reference = Session::create(&cfg)?.run_synthetic()?;
    let same = std::fs::read(&journal)? == std::fs::read(&reference.journal)?;
    println!("journal identical to an uninterrupted run: {same}");
    Ok(())
}
