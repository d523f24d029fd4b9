pub mod analysis;
pub mod cli;
pub mod coevolution;
pub mod fitness;
pub mod genome;
pub mod mesh;
pub mod phenotype;
pub mod session;
pub mod surrogate;
