//! Decode a genome into its three blade sections and print the layer masks.
//!
//! ```text
//! cargo run --example decode_genome -- "[2,2,3,4,5,8,13,20,34,40,2,-5,10,3,-2,0]"
//! ```

use vawt_mine::genome::Genome;
use vawt_mine::phenotype::{rasterize, rasterize_layer, section_profiles};

fn main() {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "[2,2,3,4,5,8,13,20,34,40,2,-5,10,3,-2,0]".into());
    let genome: Genome = match text.parse() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{text}: {e}");
            std::process::exit(2);
        }
    };
    for (k, profile) in section_profiles(&genome).iter().enumerate() {
        let layer = rasterize_layer(profile);
        println!(
            "section {k}: heights {:?}, {} cells per layer",
            profile.heights(),
            layer.count()
        );
    }
    // Top view of the lowest section; the ring and hub are shared by all.
    println!(
        "{}",
        rasterize_layer(&section_profiles(&genome)[0]).to_ascii()
    );
    let grid = rasterize(&genome);
    println!("solid voxels: {}", grid.count());
}
