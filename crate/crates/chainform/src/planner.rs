//! Welfare-maximizing benchmark for the symmetric instance and the price of
//! stability of the equilibrium against it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameParams, Network};
use crate::numeric::{floor_snapped, fract_snapped};
use crate::pricing::homogeneous_price_equilibrium;

/// Planner benchmark: link count, welfare, and a witness network.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlannerSolution {
    /// Unconstrained optimum of the relaxed link count.
    pub y: f64,
    /// Optimal integer link count.
    pub k_opt: usize,
    /// Welfare at the optimum.
    pub welfare: f64,
    /// A witness network attaining it: `k_opt` single-link pairs.
    pub network: Network,
}

/// Welfare-maximizing outcome under symmetric moments. The planner ignores
/// prices (they are transfers) and pays the link cost `k` times, so the
/// optimum is a matter of one scalar count.
pub fn planner_optimum(p: &GameParams) -> Result<PlannerSolution> {
    if !p.is_homogeneous() {
        return Err(Error::ShapeMismatch {
            detail: "planner closed forms need identical moments across suppliers".into(),
        });
    }
    if p.mu.is_empty() || !(p.mu[0] > 0.0 && p.mu[0].is_finite()) || !(p.c > 0.0) {
        return Err(Error::InvalidParams {
            detail: "planner needs a positive mean and link cost".into(),
        });
    }
    let mu = p.mu[0];
    let s2 = p.sigma2[0];
    let y = p.delta / mu - s2 / (2.0 * mu * mu) - p.c / (mu * mu);
    if y < 0.0 {
        // even one link destroys value: the empty market is optimal
        return Ok(PlannerSolution {
            y,
            k_opt: 0,
            welfare: 0.0,
            network: Network::empty(p.n, p.m),
        });
    }
    let k_opt = floor_snapped(y).max(0.0) as usize;
    let available = p.n.min(p.m);
    if k_opt > available {
        return Err(Error::BoundaryOptimum { k_opt, available });
    }
    let fy = fract_snapped(y);
    let a = p.delta * mu - 0.5 * s2 - p.c;
    let welfare = (a * a - (mu * mu * fy).powi(2)) / (2.0 * mu * mu);
    let pairs: Vec<(usize, usize)> = (0..k_opt).map(|j| (j, j)).collect();
    let network = Network::new(p.n, p.m, &pairs)?;
    Ok(PlannerSolution {
        y,
        k_opt,
        welfare,
        network,
    })
}

/// Ratio of the best equilibrium welfare to the planner's welfare; at most 1,
/// and the gap is the cost of decentralized link formation.
pub fn price_of_stability(p: &GameParams) -> Result<f64> {
    let eq = homogeneous_price_equilibrium(p)?;
    let opt = planner_optimum(p)?;
    if !(opt.welfare > 0.0) {
        return Err(Error::InvalidParams {
            detail: format!("planner welfare {} must be positive for the ratio", opt.welfare),
        });
    }
    Ok(eq.welfare / opt.welfare)
}
