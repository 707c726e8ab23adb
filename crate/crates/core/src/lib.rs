//! Pauli algebra, Clifford tableaux, sparse Pauli dynamics, circuit
//! construction and dense reference simulators.

pub mod circuit;
pub mod clifford;
pub mod error;
pub mod oracle;
pub mod pauli;
pub mod spd;

pub use circuit::{heavy_hex, kicked_ising, lightcone_prune, load_lattice, Circuit, Gate, Lattice, Layer};
pub use clifford::{recompile, CliffordTableau, RecompiledCircuit, Rotation};
pub use error::{Error, Result};
pub use pauli::{Letter, PauliWord, Phase, PhasedWord};
pub use spd::{run_spd, PauliSum, SpdResult};
