//! Expected and realized payoffs plus the welfare decomposition.
//!
//! Expected quantities here are the closed forms used by the equilibrium
//! analysis; the Monte Carlo module re-derives the realized quantities along
//! an independent route and checks the two against each other.

use serde::Serialize;

use crate::model::{GameParams, Network, PriceVector, SupplyRealization};

/// Value of one active supplier given the active set's mean mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SupplierValue {
    pub supplier: usize,
    pub value: f64,
}

/// Value (delta - M) mu_j - sigma2_j of supplier `j` when the active means
/// sum to `active_mean_sum`.
pub fn supplier_value_at(p: &GameParams, active_mean_sum: f64, j: usize) -> f64 {
    (p.delta - active_mean_sum) * p.mu[j] - p.sigma2[j]
}

/// v(K) for a symmetric instance with `k` active suppliers. Callers ensure
/// homogeneity; the first supplier's moments stand for all.
pub fn homogeneous_value(p: &GameParams, k: usize) -> f64 {
    p.mu[0] * (p.delta - p.mu[0] * k as f64) - p.sigma2[0]
}

/// Sum of means over the active suppliers of `g`.
pub fn active_mean_sum(p: &GameParams, g: &Network) -> f64 {
    g.active_suppliers().iter().map(|&j| p.mu[j]).sum()
}

/// Values of all active suppliers in `g`.
pub fn supplier_values(p: &GameParams, g: &Network) -> Vec<SupplierValue> {
    let m_sum = active_mean_sum(p, g);
    g.active_suppliers()
        .into_iter()
        .map(|j| SupplierValue {
            supplier: j,
            value: supplier_value_at(p, m_sum, j),
        })
        .collect()
}

/// Expected payoff of retailer `i`: each link contributes its supplier's
/// value net of the expected wholesale payment, split across the supplier's
/// degree, minus the link cost.
pub fn retailer_expected_payoff(p: &GameParams, g: &Network, w: &PriceVector, i: usize) -> f64 {
    let m_sum = active_mean_sum(p, g);
    let degrees = g.degrees();
    g.retailer_links(i)
        .into_iter()
        .map(|j| {
            (supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j)) / degrees[j] as f64 - p.c
        })
        .sum()
}

/// Realized payoff of retailer `i` for one supply draw: per link, the margin
/// over the realized market price on the retailer's share of the supplier's
/// output, minus the link cost.
pub fn retailer_realized_payoff(
    p: &GameParams,
    g: &Network,
    w: &PriceVector,
    s: &SupplyRealization,
    i: usize,
) -> f64 {
    let t = s.total_active(g);
    let degrees = g.degrees();
    g.retailer_links(i)
        .into_iter()
        .map(|j| (p.delta - t - w.value(j)) * s.s[j] / degrees[j] as f64 - p.c)
        .sum()
}

/// Expected payoff of supplier `j` given its activation likelihood.
pub fn supplier_expected_payoff(p: &GameParams, w: &PriceVector, j: usize, likelihood: f64) -> f64 {
    likelihood * p.mu[j] * w.value(j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareKind {
    Expected,
    Realized,
}

/// Welfare split into the three market sides plus their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareBreakdown {
    pub retailer: f64,
    pub supplier: f64,
    pub consumer: f64,
    pub total: f64,
    pub kind: WelfareKind,
}

/// Expected welfare of a network at given prices.
pub fn expected_welfare(p: &GameParams, g: &Network, w: &PriceVector) -> WelfareBreakdown {
    let active = g.active_suppliers();
    let degrees = g.degrees();
    let m_sum: f64 = active.iter().map(|&j| p.mu[j]).sum();
    let mut retailer = 0.0;
    let mut supplier = 0.0;
    let mut var_sum = 0.0;
    for &j in &active {
        let v = supplier_value_at(p, m_sum, j);
        retailer += v - p.mu[j] * w.value(j) - p.c * degrees[j] as f64;
        supplier += p.mu[j] * w.value(j);
        var_sum += p.sigma2[j];
    }
    let consumer = 0.5 * (m_sum * m_sum + var_sum);
    WelfareBreakdown {
        retailer,
        supplier,
        consumer,
        total: retailer + supplier + consumer,
        kind: WelfareKind::Expected,
    }
}

/// Realized welfare of a network for one supply draw.
pub fn realized_welfare(
    p: &GameParams,
    g: &Network,
    w: &PriceVector,
    s: &SupplyRealization,
) -> WelfareBreakdown {
    let t = s.total_active(g);
    let degrees = g.degrees();
    let mut retailer = 0.0;
    for (i, j) in g.links() {
        let _ = i;
        retailer += (p.delta - t - w.value(j)) * s.s[j] / degrees[j] as f64;
    }
    retailer -= p.c * g.link_count() as f64;
    let supplier: f64 = g.active_suppliers().iter().map(|&j| s.s[j] * w.value(j)).sum();
    let consumer = 0.5 * t * t;
    WelfareBreakdown {
        retailer,
        supplier,
        consumer,
        total: retailer + supplier + consumer,
        kind: WelfareKind::Realized,
    }
}
