//! Labeled tensors, belief propagation and lazy PEPS/PEPO simulation.

pub mod bp;
pub mod error;
pub mod evolve;
pub mod exact;
pub mod tensor;

pub use bp::{bp_iterate, compress_bond, l1bp_value, BpMode, BpOptions, LogValue, MessageSet, SiteNetwork};
pub use error::{Error, Result};
pub use evolve::{run_tn, sandwich, EvolvingState, Method, StateKind, TnOptions, TnResult};
pub use exact::{exact_contract, exact_network_value};
pub use tensor::{contract, eigh_psd, truncated_svd, Label, Tensor};
