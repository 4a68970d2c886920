//! Equilibrium construction, counting, verification, and selection for the
//! link-formation stage at fixed wholesale prices.
//!
//! The central quantity is a supplier's activation key: variance plus
//! expected price, `sigma2_j + mu_j w_j`. With equal means, suppliers
//! activate in ascending key order until the next one's value at the grown
//! active set can no longer cover its key and the link cost. With unequal
//! means there is no static ranking, and the active set comes from the
//! best-set machinery in [`crate::pricing`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameParams, Network, PriceVector};
use crate::numeric::{floor_snapped, snap_margin, REL_TOL};
use crate::payoff::{active_mean_sum, supplier_value_at};
use crate::pricing;

/// Exhaustive subset enumeration is capped at this many suppliers.
pub const EXHAUSTIVE_SUPPLIER_LIMIT: usize = 20;

/// Equilibrium active-supplier count plus the knife-edge marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ActiveCount {
    /// Largest equilibrium active count.
    pub k_star: usize,
    /// True when the marginal supplier's value exactly meets its key plus
    /// link cost, so `k_star - 1` is also an equilibrium count.
    pub may_drop_one: bool,
}

/// Activation key of supplier `j`: variance plus expected price. Smaller
/// keys activate first; the left-limit mark breaks exact ties.
fn activation_key(p: &GameParams, w: &PriceVector, j: usize) -> f64 {
    p.sigma2[j] + p.mu[j] * w.value(j)
}

/// Supplier order used by the greedy construction: ascending key, left-limit
/// marks first among equal keys, then index.
fn activation_order(p: &GameParams, w: &PriceVector) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.m).collect();
    order.sort_by(|&a, &b| {
        activation_key(p, w, a)
            .partial_cmp(&activation_key(p, w, b))
            .unwrap()
            .then_with(|| w.is_left_limit(b).cmp(&w.is_left_limit(a)))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Number of active suppliers in the selected equilibria at prices `w`.
///
/// With equal means this scans suppliers in key order; the count stops right
/// before the first supplier whose value at the enlarged active set cannot
/// cover its key plus the link cost. With unequal means the count is the
/// largest size at which an optimal feasible supplier set exists, which can
/// require subset enumeration (errors with `SizeLimit` past the cap when the
/// instance has no structured shape).
pub fn active_supplier_count(p: &GameParams, w: &PriceVector) -> Result<ActiveCount> {
    if p.means_equal() {
        let scale = p.snap_scale();
        let order = activation_order(p, w);
        let mu = p.mu[0];
        let mut k = 0usize;
        while k < p.m {
            let j = order[k];
            let margin = supplier_value_at(p, mu * (k + 1) as f64, j) - p.mu[j] * w.value(j) - p.c;
            if snap_margin(margin, scale) < 0.0 {
                break;
            }
            k += 1;
        }
        let may_drop_one = k > 0 && {
            let j = order[k - 1];
            let margin = supplier_value_at(p, mu * k as f64, j) - p.mu[j] * w.value(j) - p.c;
            snap_margin(margin, scale) == 0.0
        };
        Ok(ActiveCount {
            k_star: k,
            may_drop_one,
        })
    } else {
        let k = pricing::k_max(p, w)?;
        let may_drop_one = if k == 0 {
            false
        } else {
            let set = pricing::representative_best_set(p, w, k)?;
            let m_sum: f64 = set.iter().map(|&j| p.mu[j]).sum();
            let scale = p.snap_scale();
            set.iter().any(|&j| {
                let margin = supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j) - p.c;
                snap_margin(margin, scale) == 0.0
            })
        };
        Ok(ActiveCount {
            k_star: k,
            may_drop_one,
        })
    }
}

/// Equilibrium degrees for `k` active suppliers: each active supplier `j`
/// carries `floor((v_j - mu_j w_j) / c)` links. Returns (supplier, degree)
/// pairs in ascending supplier order.
pub fn equilibrium_degrees(p: &GameParams, w: &PriceVector, k: usize) -> Result<Vec<(usize, usize)>> {
    let mut chosen = if p.means_equal() {
        activation_order(p, w)[..k.min(p.m)].to_vec()
    } else {
        pricing::representative_best_set(p, w, k)?
    };
    chosen.sort_unstable();
    let m_sum: f64 = chosen.iter().map(|&j| p.mu[j]).sum();
    Ok(chosen
        .into_iter()
        .map(|j| {
            let net = supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j);
            let d = floor_snapped(net / p.c).max(0.0) as usize;
            (j, d)
        })
        .collect())
}

/// How greedy construction maps links onto retailers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkMode {
    /// A fresh retailer per link (default): every retailer ends up with at
    /// most one link, which is the structure the closed forms describe.
    Fresh,
    /// Reuse retailers across suppliers: supplier `j` links retailers
    /// `0..d(j)`. Same counts, degrees, and welfare with fewer retailers.
    Packed,
}

/// One constructed equilibrium with its summary facts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSummary {
    pub network: Network,
    /// Active supplier count.
    pub k: usize,
    /// (supplier, degree) pairs for the active suppliers, ascending.
    pub degrees: Vec<(usize, usize)>,
    /// Activation likelihood per supplier at these prices.
    pub likelihoods: Vec<f64>,
    /// Whether the network survives the equilibrium selection filter.
    pub selected: bool,
    /// Loop steps taken; bounded by n*m + 2m.
    pub steps: usize,
}

/// Greedily build an equilibrium network at prices `w`.
///
/// Phase 1 activates suppliers while the next activation margin is
/// nonnegative, one fresh retailer each; phase 2 grows each active
/// supplier's degree while one more link still pays for itself.
pub fn greedy_equilibrium(p: &GameParams, w: &PriceVector, mode: LinkMode) -> Result<EquilibriumSummary> {
    let scale = p.snap_scale();
    let mut steps = 0usize;

    // phase 1: the active set
    let actives: Vec<usize> = if p.means_equal() {
        let order = activation_order(p, w);
        let mu = p.mu[0];
        let mut taken = Vec::new();
        for (pos, &j) in order.iter().enumerate() {
            steps += 1;
            let margin =
                supplier_value_at(p, mu * (pos + 1) as f64, j) - p.mu[j] * w.value(j) - p.c;
            if snap_margin(margin, scale) < 0.0 {
                break;
            }
            taken.push(j);
        }
        taken
    } else {
        let k = pricing::k_max(p, w)?;
        steps += k;
        pricing::representative_best_set(p, w, k)?
    };

    let k = actives.len();
    let m_sum: f64 = actives.iter().map(|&j| p.mu[j]).sum();

    // phase 2: grow degrees while one more link still pays for itself
    let mut profile: Vec<(usize, usize)> = Vec::with_capacity(k);
    for &j in &actives {
        let net = supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j);
        let mut d = 1usize;
        loop {
            steps += 1;
            let margin = net / (d + 1) as f64 - p.c;
            if snap_margin(margin, scale) < 0.0 {
                break;
            }
            d += 1;
        }
        debug_assert_eq!(
            d,
            floor_snapped(net / p.c).max(0.0) as usize,
            "loop degree must agree with the closed form"
        );
        profile.push((j, d));
    }
    profile.sort_unstable();

    let total_links: usize = profile.iter().map(|&(_, d)| d).sum();
    let network = match mode {
        LinkMode::Fresh => {
            if total_links > p.n {
                return Err(Error::InsufficientRetailers {
                    needed: total_links,
                    available: p.n,
                });
            }
            Network::from_degree_profile(p.n, p.m, &profile)?
        }
        LinkMode::Packed => {
            let max_d = profile.iter().map(|&(_, d)| d).max().unwrap_or(0);
            if max_d > p.n {
                return Err(Error::InsufficientRetailers {
                    needed: max_d,
                    available: p.n,
                });
            }
            let mut g = Network::empty(p.n, p.m);
            for &(j, d) in &profile {
                for i in 0..d {
                    g = g.add_link(i, j)?;
                }
            }
            g
        }
    };

    let likelihoods = activation_likelihoods(p, w)?;
    let selected = selection_filter(p, &network, w);
    Ok(EquilibriumSummary {
        network,
        k,
        degrees: profile,
        likelihoods,
        selected,
        steps,
    })
}

/// How to check retailer optimality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    /// Ground truth: every retailer against every link subset (2^m each).
    Exhaustive,
    /// Closed-form conditions: active count, per-supplier degrees, and
    /// vacant-supplier margins. Sound for networks where each retailer holds
    /// at most one link; exhaustive mode is the arbiter otherwise.
    Characterized,
}

/// A deviation found for one retailer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetailerCheck {
    pub retailer: usize,
    pub current: f64,
    pub best: f64,
    pub best_links: Vec<usize>,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    RetailerDeviation {
        retailer: usize,
        current: f64,
        best: f64,
        best_links: Vec<usize>,
        gain: f64,
    },
    ActiveCount {
        found: usize,
        expected: usize,
        may_drop_one: bool,
    },
    Degree {
        supplier: usize,
        found: usize,
        expected: usize,
    },
    VacantProfitable {
        supplier: usize,
        margin: f64,
    },
}

/// Outcome of a retailer-optimality check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub mode: VerifyMode,
    pub certified: bool,
    pub violations: Vec<Violation>,
}

/// Check that no retailer can improve by rewiring its own links.
pub fn verify_retailer_nash(
    p: &GameParams,
    g: &Network,
    w: &PriceVector,
    mode: VerifyMode,
) -> Result<VerificationReport> {
    match mode {
        VerifyMode::Exhaustive => verify_exhaustive(p, g, w),
        VerifyMode::Characterized => verify_characterized(p, g, w),
    }
}

/// Expected payoff of retailer `i` holding exactly the suppliers in `mask`,
/// on top of the rest of the network described by `d_wo` (degrees with `i`'s
/// links removed) and `m_wo` (mean mass of suppliers active without `i`).
fn payoff_of_mask(p: &GameParams, w: &PriceVector, d_wo: &[usize], m_wo: f64, mask: usize) -> f64 {
    let mut m_new = m_wo;
    let mut bits = mask;
    while bits != 0 {
        let j = bits.trailing_zeros() as usize;
        if d_wo[j] == 0 {
            m_new += p.mu[j];
        }
        bits &= bits - 1;
    }
    let mut pay = 0.0;
    let mut bits = mask;
    while bits != 0 {
        let j = bits.trailing_zeros() as usize;
        pay += (supplier_value_at(p, m_new, j) - p.mu[j] * w.value(j)) / (d_wo[j] + 1) as f64 - p.c;
        bits &= bits - 1;
    }
    pay
}

fn verify_exhaustive(p: &GameParams, g: &Network, w: &PriceVector) -> Result<VerificationReport> {
    if p.m > EXHAUSTIVE_SUPPLIER_LIMIT {
        return Err(Error::SizeLimit {
            m: p.m,
            limit: EXHAUSTIVE_SUPPLIER_LIMIT,
        });
    }
    let degrees = g.degrees();
    let mut violations = Vec::new();
    for i in 0..p.n {
        let own = g.retailer_links(i);
        let own_mask: usize = own.iter().map(|&j| 1usize << j).sum();
        let mut d_wo = degrees.clone();
        for &j in &own {
            d_wo[j] -= 1;
        }
        let m_wo: f64 = (0..p.m).filter(|&j| d_wo[j] > 0).map(|j| p.mu[j]).sum();
        let current = payoff_of_mask(p, w, &d_wo, m_wo, own_mask);
        let mut best = current;
        let mut best_mask = own_mask;
        for mask in 0..(1usize << p.m) {
            let pay = payoff_of_mask(p, w, &d_wo, m_wo, mask);
            if pay > best {
                best = pay;
                best_mask = mask;
            }
        }
        let gain = best - current;
        if gain > REL_TOL * current.abs().max(1.0) {
            let best_links: Vec<usize> = (0..p.m).filter(|&j| best_mask >> j & 1 == 1).collect();
            violations.push(Violation::RetailerDeviation {
                retailer: i,
                current,
                best,
                best_links,
                gain,
            });
        }
    }
    Ok(VerificationReport {
        mode: VerifyMode::Exhaustive,
        certified: violations.is_empty(),
        violations,
    })
}

fn verify_characterized(p: &GameParams, g: &Network, w: &PriceVector) -> Result<VerificationReport> {
    let scale = p.snap_scale();
    let ac = active_supplier_count(p, w)?;
    let mut violations = Vec::new();

    let k_found = g.active_count();
    let k_ok = k_found == ac.k_star || (ac.may_drop_one && k_found + 1 == ac.k_star);
    if !k_ok {
        violations.push(Violation::ActiveCount {
            found: k_found,
            expected: ac.k_star,
            may_drop_one: ac.may_drop_one,
        });
    }

    let m_sum = active_mean_sum(p, g);
    let degrees = g.degrees();
    for j in g.active_suppliers() {
        let net = supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j);
        let x = net / p.c;
        let expected = floor_snapped(x).max(0.0) as usize;
        let exact_split = snap_margin(x - expected as f64, 1.0) == 0.0 && expected > 0;
        let ok = degrees[j] == expected || (exact_split && degrees[j] + 1 == expected);
        if !ok {
            violations.push(Violation::Degree {
                supplier: j,
                found: degrees[j],
                expected,
            });
        }
    }

    for j in g.vacant_suppliers() {
        let margin =
            supplier_value_at(p, m_sum + p.mu[j], j) - p.mu[j] * w.value(j) - p.c;
        let margin = snap_margin(margin, scale);
        if margin > 0.0 {
            violations.push(Violation::VacantProfitable {
                supplier: j,
                margin,
            });
        }
    }

    Ok(VerificationReport {
        mode: VerifyMode::Characterized,
        certified: violations.is_empty(),
        violations,
    })
}

/// Equilibrium selection: keep `g` only when no vacant supplier offers
/// retailers strictly more net value than some active supplier does.
///
/// Net value is the supplier's value at the current active mean mass minus
/// its expected price; a left-limit price mark raises the supplier's net
/// value by a vanishing amount, which only matters on exact ties.
pub fn selection_filter(p: &GameParams, g: &Network, w: &PriceVector) -> bool {
    let actives = g.active_suppliers();
    let vacants = g.vacant_suppliers();
    if actives.is_empty() || vacants.is_empty() {
        return true;
    }
    let scale = p.snap_scale();
    let m_sum: f64 = actives.iter().map(|&j| p.mu[j]).sum();
    let net = |j: usize| supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j);
    for &v in &vacants {
        for &a in &actives {
            let diff = snap_margin(net(v) - net(a), scale);
            let strictly_better =
                diff > 0.0 || (diff == 0.0 && w.is_left_limit(v) && !w.is_left_limit(a));
            if strictly_better {
                return false;
            }
        }
    }
    true
}

/// Activation likelihood per supplier: the probability of being active when
/// one of the selected equilibria is drawn uniformly.
///
/// With equal means the `k` cheapest keys activate; ties at the boundary
/// split the remaining slots evenly. With unequal means the likelihood is
/// each supplier's membership fraction across the optimal feasible sets.
pub fn activation_likelihoods(p: &GameParams, w: &PriceVector) -> Result<Vec<f64>> {
    let k = active_supplier_count(p, w)?.k_star;
    if k == 0 {
        return Ok(vec![0.0; p.m]);
    }
    if !p.means_equal() {
        return pricing::membership_fractions(p, w, k);
    }
    if k >= p.m {
        return Ok(vec![1.0; p.m]);
    }
    let scale = p.snap_scale();
    let order = activation_order(p, w);
    let thr = order[k - 1];
    let thr_key = activation_key(p, w, thr);
    let thr_mark = w.is_left_limit(thr);
    // -1 below the threshold group, 0 inside it, +1 above it
    let side = |j: usize| -> i32 {
        let d = snap_margin(activation_key(p, w, j) - thr_key, scale);
        if d < 0.0 {
            return -1;
        }
        if d > 0.0 {
            return 1;
        }
        match (w.is_left_limit(j), thr_mark) {
            (true, false) => -1,
            (false, true) => 1,
            _ => 0,
        }
    };
    let below = (0..p.m).filter(|&j| side(j) == -1).count();
    let ties = (0..p.m).filter(|&j| side(j) == 0).count();
    let share = (k - below) as f64 / ties as f64;
    Ok((0..p.m)
        .map(|j| match side(j) {
            -1 => 1.0,
            0 => share,
            _ => 0.0,
        })
        .collect())
}
