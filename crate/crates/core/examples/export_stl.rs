//! Write a printable binary STL for a genome and report mesh quality.
//!
//! ```text
//! cargo run --release --example export_stl -- out.stl 50
//! ```

use rand::SeedableRng;
use vawt_mine::genome::Genome;
use vawt_mine::mesh::{extract_surface, laplacian_smooth, write_stl};
use vawt_mine::phenotype::rasterize;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "turbine.stl".into());
    let steps: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(50);
    let genome = Genome::random(&mut rand_chacha::ChaCha8Rng::seed_from_u64(1));

    let raw = extract_surface(&rasterize(&genome));
    let mesh = laplacian_smooth(&raw, steps);
    let bytes = write_stl(&mesh)?;
    std::fs::write(&out, &bytes)?;

    let r = mesh.feature_report();
    println!("genome {genome}");
    println!(
        "{out}: {} triangles, {} bytes",
        mesh.triangles.len(),
        bytes.len()
    );
    println!(
        "volume {:.1} mm3 raw, {:.1} mm3 after {steps} smoothing steps",
        raw.volume(),
        mesh.volume()
    );
    println!(
        "shells {}, min edge {:.3} mm, degenerate triangles {}",
        r.shells, r.min_edge_mm, r.degenerate_triangles
    );
    Ok(())
}
