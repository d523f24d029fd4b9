//! Mann-Whitney U on two samples read from the command line.
//!
//! ```text
//! cargo run --example mann_whitney -- 1,4,2,8 5,9,7,6,10
//! ```

use vawt_mine::analysis::mann_whitney;

fn sample(s: Option<String>, fallback: &[f64]) -> Vec<f64> {
    match s {
        Some(s) => s
            .split(',')
            .map(|x| x.trim().parse().expect("numeric sample"))
            .collect(),
        None => fallback.to_vec(),
    }
}

fn main() {
    let mut args = std::env::args().skip(1);
    let a = sample(args.next(), &[2240.0, 2310.0, 2275.0, 2198.0, 2302.0]);
    let b = sample(
        args.next(),
        &[2150.0, 2204.0, 2181.0, 2230.0, 2166.0, 2190.0],
    );
    match mann_whitney(&a, &b) {
        Ok(r) => println!("U = {}, two-tailed p = {:.5} ({:?})", r.u, r.p, r.method),
        Err(e) => eprintln!("{e}"),
    }
}
