pub mod cluster;
pub mod error;
pub mod estimate;
pub mod process;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod limit;
pub mod stats;
pub mod oracles;
pub mod diagnostics;
pub mod harness;
