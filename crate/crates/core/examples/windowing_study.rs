//! Training-window length against held-out error on a drifting history.

use vawt_mine::analysis::{drifting_records, mann_whitney, mean, windowing_study};
use vawt_mine::surrogate::{MlpConfig, Window};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let windows = [
        Window::Recent(10),
        Window::Recent(20),
        Window::Recent(40),
        Window::All,
    ];
    let mut maes = vec![Vec::new(); windows.len()];
    for seed in 0..20 {
        let records = drifting_records(80, seed);
        for (k, (_, e)) in windowing_study(&records, &windows, &MlpConfig::default(), seed)?
            .into_iter()
            .enumerate()
        {
            maes[k].push(e);
        }
    }
    for (w, m) in windows.iter().zip(&maes) {
        println!("{w:?}: mean MAE {:.1}", mean(m));
    }
    let t = mann_whitney(&maes[1], &maes[3])?;
    println!("Recent(20) vs All: U {} p {:.2e}", t.u, t.p);
    Ok(())
}
