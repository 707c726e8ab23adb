//! Exact contraction of whole networks under a work budget.

use crate::bp::SiteNetwork;
use crate::error::{Error, Result};
use crate::tensor::{contract_with_path, greedy_path, Tensor, C64};

/// Default budget of multiply-adds for [`exact_contract`].
pub const DEFAULT_BUDGET: f64 = 1e10;

/// Contracts a closed network to a scalar. Fails with [`Error::Budget`]
/// when the greedy path needs more than `budget` multiply-adds.
pub fn exact_contract(tensors: &[&Tensor], budget: f64) -> Result<C64> {
    let (path, cost) = greedy_path(tensors, &[])?;
    if cost.flops > budget {
        return Err(Error::Budget {
            work: cost.flops,
            budget,
            bottleneck: cost.bottleneck.map(|l| l.to_string()).unwrap_or_default(),
        });
    }
    contract_with_path(tensors, &[], &path)?.scalar_value()
}

pub fn exact_network_value(sn: &SiteNetwork, budget: f64) -> Result<C64> {
    exact_contract(&sn.all_tensors(), budget)
}
