//! Wholesale price competition: closed-form price equilibria for the
//! symmetric case and for one-supplier improvements (smaller variance or
//! larger mean), optimal supplier-set machinery, welfare deltas against the
//! symmetric baseline, and a grid search certifying supplier prices.
//!
//! Left-limit price marks are evaluated at their limit value in every
//! aggregate and welfare computation here; the marks only break exact ties
//! in activation-key and selection comparisons.

use serde::Serialize;

use crate::equilibrium::{activation_likelihoods, EXHAUSTIVE_SUPPLIER_LIMIT};
use crate::error::{Error, Result};
use crate::model::{validate_params, GameParams, PriceVector};
use crate::numeric::{ceil_snapped, floor_snapped, fract_snapped, snap_margin, REL_TOL};
use crate::payoff::supplier_value_at;

/// Largest number of tied optimal sets materialized into `BestSupplierSets`.
pub const SET_MATERIALIZE_CAP: usize = 4096;

// === symmetric price equilibrium ===

/// Closed-form price equilibrium of the symmetric instance: competition
/// drives every wholesale price to zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneousEquilibrium {
    pub w_star: PriceVector,
    /// Activation capacity z; the active count is its floor.
    pub z: f64,
    pub k_star: usize,
    /// True when the marginal supplier's value exactly equals the link
    /// cost, so `k_star - 1` actives is an equilibrium count too.
    pub boundary: bool,
    /// Links per active supplier at `k_star` actives.
    pub degree: usize,
    /// Degree if one supplier drops out (boundary instances only).
    pub degree_if_drop: Option<usize>,
    pub links: usize,
    /// Expected welfare of the selected equilibrium.
    pub welfare: f64,
}

/// Symmetric-instance price equilibrium: zero prices, floor(z) active
/// suppliers with equal degrees, and the closed-form welfare.
pub fn homogeneous_price_equilibrium(p: &GameParams) -> Result<HomogeneousEquilibrium> {
    if !p.is_homogeneous() {
        return Err(Error::ShapeMismatch {
            detail: "symmetric closed forms need identical moments across suppliers".into(),
        });
    }
    let report = validate_params(p);
    if !report.ok() {
        return Err(Error::InvalidParams {
            detail: format!("{:?}", report.violations),
        });
    }
    let mu = p.mu[0];
    let s2 = p.sigma2[0];
    let z = p.delta / mu - s2 / (mu * mu) - p.c / (mu * mu);
    let k_star = floor_snapped(z).max(0.0) as usize;
    if p.m < k_star + 1 {
        // price competition needs at least one vacant supplier to undercut
        return Err(Error::InsufficientSuppliers {
            needed: k_star + 1,
            available: p.m,
        });
    }
    let fz = fract_snapped(z);
    let boundary = fz == 0.0;
    let degree = floor_snapped(1.0 + mu * mu * fz / p.c) as usize;
    let degree_if_drop = if boundary {
        Some(floor_snapped(1.0 + mu * mu * (1.0 + fz) / p.c) as usize)
    } else {
        None
    };
    let links = k_star * degree;
    if p.n < links {
        return Err(Error::InsufficientRetailers {
            needed: links,
            available: p.n,
        });
    }
    let a = p.delta * mu - p.c - mu * mu * fz - s2;
    let b = p.delta * mu - p.c - mu * mu * fz + 2.0 * p.c * fract_snapped(mu * mu * fz / p.c);
    let welfare = a * b / (2.0 * mu * mu);
    Ok(HomogeneousEquilibrium {
        w_star: PriceVector::zeros(p.m),
        z,
        k_star,
        boundary,
        degree,
        degree_if_drop,
        links,
        welfare,
    })
}

// === one-supplier improvements ===

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceCase {
    Homogeneous,
    HeteroVariance,
    HeteroMean,
}

/// Welfare change against the symmetric baseline, by market side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelfareDelta {
    pub supplier: f64,
    pub retailer: f64,
    pub consumer: f64,
    pub total: f64,
    /// Exact leftover in the retailer component when link-cost divisibility
    /// fails; the headline retailer delta treats it as zero.
    pub retailer_residual: Option<f64>,
}

/// Price equilibrium for an instance with one improved supplier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceEquilibrium {
    pub case: PriceCase,
    pub w_star: PriceVector,
    /// Active-count reference: the symmetric baseline count for a variance
    /// improvement, the largest optimal-set size for a mean improvement.
    pub k_ref: usize,
    pub welfare_delta: Option<WelfareDelta>,
    /// The stated price formula went negative and was clamped to zero.
    pub negative_price_clamped: bool,
    /// With a single active supplier the others' prices are only pinned to
    /// an interval, reported here.
    pub others_price_interval: Option<(f64, f64)>,
}

/// Moment shape with at most one special supplier: everyone else shares
/// (mu, sigma2) exactly. Returns (special index, common mu, common sigma2).
fn one_off_shape(p: &GameParams) -> Option<(Option<usize>, f64, f64)> {
    if p.m == 0 || p.mu.len() != p.m || p.sigma2.len() != p.m {
        return None;
    }
    let pair = |j: usize| (p.mu[j], p.sigma2[j]);
    let diff: Vec<usize> = (1..p.m).filter(|&j| pair(j) != pair(0)).collect();
    match diff.len() {
        0 => Some((None, p.mu[0], p.sigma2[0])),
        1 => {
            let h = diff[0];
            Some((Some(h), p.mu[0], p.sigma2[0]))
        }
        d if d == p.m - 1 => {
            // supplier 0 is the odd one out; the rest must agree
            if (2..p.m).all(|j| pair(j) == pair(1)) {
                Some((Some(0), p.mu[1], p.sigma2[1]))
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Variance-improvement shape: equal means, exactly one supplier with a
/// strictly smaller variance. `Ok(None)` when the instance is symmetric.
pub(crate) fn variance_gap_shape(p: &GameParams) -> Result<Option<(usize, f64, f64)>> {
    match one_off_shape(p) {
        Some((None, _, _)) => Ok(None),
        Some((Some(h), mu, s2)) if p.mu[h] == mu && p.sigma2[h] < s2 => {
            Ok(Some((h, p.sigma2[h], s2)))
        }
        _ => Err(Error::ShapeMismatch {
            detail: "need equal means and exactly one supplier with a smaller variance".into(),
        }),
    }
}

/// Mean-improvement shape: equal variances, exactly one supplier with a
/// strictly larger mean. `Ok(None)` when the instance is symmetric.
pub(crate) fn mean_shift_shape(p: &GameParams) -> Result<Option<(usize, f64, f64)>> {
    match one_off_shape(p) {
        Some((None, _, _)) => Ok(None),
        Some((Some(h), mu, s2)) if p.sigma2[h] == s2 && p.mu[h] > mu => {
            Ok(Some((h, mu, p.mu[h] - mu)))
        }
        _ => Err(Error::ShapeMismatch {
            detail: "need equal variances and exactly one supplier with a larger mean".into(),
        }),
    }
}

/// Price equilibrium when one supplier carries a smaller variance: the
/// improved supplier prices just below the point where its variance
/// advantage is exhausted, everyone else at zero. Active count and degrees
/// match the symmetric baseline built from the larger variance.
pub fn hetero_variance_prices(p: &GameParams) -> Result<PriceEquilibrium> {
    let shape = variance_gap_shape(p)?;
    let (h, lo, hi) = match shape {
        None => {
            // no gap to price on: the symmetric solution applies
            let base = homogeneous_price_equilibrium(p)?;
            return Ok(PriceEquilibrium {
                case: PriceCase::Homogeneous,
                w_star: base.w_star,
                k_ref: base.k_star,
                welfare_delta: Some(WelfareDelta {
                    supplier: 0.0,
                    retailer: 0.0,
                    consumer: 0.0,
                    total: 0.0,
                    retailer_residual: None,
                }),
                negative_price_clamped: false,
                others_price_interval: None,
            });
        }
        Some(t) => t,
    };
    let mu = p.mu[h];
    let mut base = p.clone();
    base.sigma2 = vec![hi; p.m];
    let sym = homogeneous_price_equilibrium(&base)?;
    let gap = hi - lo;
    let mut w = vec![0.0; p.m];
    w[h] = gap / mu;
    let w_star = PriceVector::with_left_limits(w, &[h])?;
    Ok(PriceEquilibrium {
        case: PriceCase::HeteroVariance,
        w_star,
        k_ref: sym.k_star,
        welfare_delta: Some(hetero_variance_welfare_delta(p)?),
        negative_price_clamped: false,
        others_price_interval: None,
    })
}

/// Welfare deltas of the variance-improvement equilibrium against the
/// symmetric baseline at the larger variance. All four are exact.
pub fn hetero_variance_welfare_delta(p: &GameParams) -> Result<WelfareDelta> {
    let gap = match variance_gap_shape(p)? {
        None => 0.0,
        Some((_, lo, hi)) => hi - lo,
    };
    Ok(WelfareDelta {
        supplier: gap,
        retailer: 0.0,
        consumer: -0.5 * gap,
        total: 0.5 * gap,
        retailer_residual: None,
    })
}

// === optimal supplier sets ===

/// Route used to look for optimal supplier sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSearch {
    /// Structured shapes take the two-composition fast path, anything else
    /// falls back to enumeration under the size cap.
    Auto,
    /// Force subset enumeration (m capped).
    Exhaustive,
    /// Force the fast path (errors unless the shape is structured).
    Structured,
}

/// The optimal feasible supplier sets of one size.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestSupplierSets {
    pub k: usize,
    /// Best size-k aggregate value (at limit prices).
    pub aggregate: f64,
    /// Feasible aggregate-maximal sets, ascending lexicographic order;
    /// truncated when the tie count exceeds the materialization cap.
    pub sets: Vec<Vec<usize>>,
    /// Exact number of such sets (may exceed `sets.len()` when truncated).
    pub count: f64,
    pub truncated: bool,
}

impl BestSupplierSets {
    pub fn is_empty(&self) -> bool {
        self.count == 0.0
    }
}

fn for_each_k_subset(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    if k == 0 {
        f(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == m - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for t in i..k {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn binom_f64(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Aggregate value of a supplier set: total net value retailers can extract,
/// sum of (delta - M - w_j) mu_j over members.
fn set_aggregate(p: &GameParams, w: &PriceVector, set: &[usize]) -> f64 {
    let m_sum: f64 = set.iter().map(|&j| p.mu[j]).sum();
    set.iter()
        .map(|&j| (p.delta - m_sum - w.value(j)) * p.mu[j])
        .sum()
}

/// Every member must cover its expected price and the link cost.
fn set_feasible(p: &GameParams, w: &PriceVector, set: &[usize], scale: f64) -> bool {
    let m_sum: f64 = set.iter().map(|&j| p.mu[j]).sum();
    set.iter().all(|&j| {
        let margin = supplier_value_at(p, m_sum, j) - p.mu[j] * w.value(j) - p.c;
        snap_margin(margin, scale) >= 0.0
    })
}

fn best_sets_exhaustive(p: &GameParams, w: &PriceVector, k: usize) -> Result<BestSupplierSets> {
    if p.m > EXHAUSTIVE_SUPPLIER_LIMIT {
        return Err(Error::SizeLimit {
            m: p.m,
            limit: EXHAUSTIVE_SUPPLIER_LIMIT,
        });
    }
    let scale = p.snap_scale() * k.max(1) as f64;
    let mut best = f64::NEG_INFINITY;
    let mut arg: Vec<Vec<usize>> = Vec::new();
    for_each_k_subset(p.m, k, |set| {
        let a = set_aggregate(p, w, set);
        if arg.is_empty() || snap_margin(a - best, scale) > 0.0 {
            best = a;
            arg.clear();
            arg.push(set.to_vec());
        } else if snap_margin(a - best, scale) == 0.0 {
            arg.push(set.to_vec());
        }
    });
    let sets: Vec<Vec<usize>> = arg
        .into_iter()
        .filter(|s| set_feasible(p, w, s, scale))
        .collect();
    Ok(BestSupplierSets {
        k,
        aggregate: best,
        count: sets.len() as f64,
        truncated: false,
        sets,
    })
}

/// One candidate composition on a structured instance: `q` cheapest regular
/// suppliers, plus the special one when `with_special` is set.
struct Composition {
    with_special: bool,
    /// Regular members taken from the price-sorted order.
    q: usize,
    aggregate: f64,
    feasible: bool,
}

/// Price-sorted regular suppliers with prefix sums and snapped tie groups.
struct RegularOrder {
    idx: Vec<usize>,
    prefix_w: Vec<f64>,
    /// group id per sorted position; equal ids mean snapped-equal prices
    group: Vec<usize>,
}

fn regular_order(p: &GameParams, w: &PriceVector, special: Option<usize>) -> RegularOrder {
    let scale = p.snap_scale();
    let mut idx: Vec<usize> = (0..p.m).filter(|&j| Some(j) != special).collect();
    idx.sort_by(|&a, &b| {
        w.value(a)
            .partial_cmp(&w.value(b))
            .unwrap()
            .then_with(|| a.cmp(&b))
    });
    let mut prefix_w = Vec::with_capacity(idx.len() + 1);
    prefix_w.push(0.0);
    for &j in &idx {
        prefix_w.push(prefix_w.last().unwrap() + w.value(j));
    }
    let mut group = Vec::with_capacity(idx.len());
    let mut gid = 0usize;
    for t in 0..idx.len() {
        if t > 0 && snap_margin(w.value(idx[t]) - w.value(idx[t - 1]), scale) != 0.0 {
            gid += 1;
        }
        group.push(gid);
    }
    RegularOrder {
        idx,
        prefix_w,
        group,
    }
}

fn composition(
    p: &GameParams,
    w: &PriceVector,
    reg: &RegularOrder,
    special: Option<usize>,
    k: usize,
    with_special: bool,
) -> Option<Composition> {
    let q = if with_special {
        if special.is_none() || k == 0 {
            return None;
        }
        k - 1
    } else {
        k
    };
    if q > reg.idx.len() {
        return None;
    }
    let scale = p.snap_scale() * k.max(1) as f64;
    let (mu_s, w_s, s2_s) = match (with_special, special) {
        (true, Some(h)) => (p.mu[h], w.value(h), p.sigma2[h]),
        _ => (0.0, 0.0, 0.0),
    };
    let mu_r = if reg.idx.is_empty() { 0.0 } else { p.mu[reg.idx[0]] };
    let s2_r = if reg.idx.is_empty() { 0.0 } else { p.sigma2[reg.idx[0]] };
    let m_sum = mu_r * q as f64 + if with_special { mu_s } else { 0.0 };
    let w_sum = reg.prefix_w[q];
    let mut aggregate = (p.delta - m_sum) * m_sum - mu_r * w_sum;
    if with_special {
        aggregate -= mu_s * w_s;
    }
    // feasibility binds at the most expensive chosen regular supplier
    let mut feasible = true;
    if q > 0 {
        let w_last = w.value(reg.idx[q - 1]);
        let margin = (p.delta - m_sum) * mu_r - s2_r - mu_r * w_last - p.c;
        feasible &= snap_margin(margin, scale) >= 0.0;
    }
    if with_special {
        let margin = (p.delta - m_sum) * mu_s - s2_s - mu_s * w_s - p.c;
        feasible &= snap_margin(margin, scale) >= 0.0;
    }
    Some(Composition {
        with_special,
        q,
        aggregate,
        feasible,
    })
}

/// Argmax-and-feasible compositions of size `k`, best aggregate first.
fn best_compositions(
    p: &GameParams,
    w: &PriceVector,
    reg: &RegularOrder,
    special: Option<usize>,
    k: usize,
) -> (f64, Vec<Composition>) {
    let scale = p.snap_scale() * k.max(1) as f64;
    let mut comps: Vec<Composition> = [false, true]
        .iter()
        .filter_map(|&ws| composition(p, w, reg, special, k, ws))
        .collect();
    if comps.is_empty() {
        return (f64::NEG_INFINITY, Vec::new());
    }
    let best = comps
        .iter()
        .map(|c| c.aggregate)
        .fold(f64::NEG_INFINITY, f64::max);
    comps.retain(|c| snap_margin(c.aggregate - best, scale) == 0.0 && c.feasible);
    (best, comps)
}

/// Members of a composition with the smallest indices: whole tie groups
/// below the cut, then the smallest indices inside the cut group.
fn composition_representative(
    reg: &RegularOrder,
    special: Option<usize>,
    comp: &Composition,
) -> Vec<usize> {
    let mut members = Vec::with_capacity(comp.q + 1);
    if comp.q > 0 {
        let cut_group = reg.group[comp.q - 1];
        let mut forced: Vec<usize> = Vec::new();
        let mut tied: Vec<usize> = Vec::new();
        for t in 0..reg.idx.len() {
            if reg.group[t] < cut_group {
                forced.push(reg.idx[t]);
            } else if reg.group[t] == cut_group {
                tied.push(reg.idx[t]);
            }
        }
        tied.sort_unstable();
        let need = comp.q - forced.len();
        forced.extend(tied.into_iter().take(need));
        members = forced;
    }
    if comp.with_special {
        members.push(special.expect("with_special composition has a special supplier"));
    }
    members.sort_unstable();
    members
}

/// Number of index sets realizing a composition, and the per-supplier
/// membership profile (1 below the cut group, a share inside it).
fn composition_count_and_membership(
    p: &GameParams,
    reg: &RegularOrder,
    special: Option<usize>,
    comp: &Composition,
) -> (f64, Vec<f64>) {
    let mut member = vec![0.0; p.m];
    let mut count = 1.0;
    if comp.q > 0 {
        let cut_group = reg.group[comp.q - 1];
        let forced: Vec<usize> = (0..reg.idx.len())
            .filter(|&t| reg.group[t] < cut_group)
            .map(|t| reg.idx[t])
            .collect();
        let tied: Vec<usize> = (0..reg.idx.len())
            .filter(|&t| reg.group[t] == cut_group)
            .map(|t| reg.idx[t])
            .collect();
        let r = comp.q - forced.len();
        count = binom_f64(tied.len(), r);
        for j in forced {
            member[j] = 1.0;
        }
        let share = r as f64 / tied.len() as f64;
        for j in tied {
            member[j] = share;
        }
    }
    if comp.with_special {
        member[special.expect("special supplier present")] = 1.0;
    }
    (count, member)
}

/// Materialize every index set realizing a composition (caller caps size).
fn composition_sets(
    reg: &RegularOrder,
    special: Option<usize>,
    comp: &Composition,
) -> Vec<Vec<usize>> {
    let mut base: Vec<usize> = Vec::new();
    let mut tied: Vec<usize> = Vec::new();
    if comp.q > 0 {
        let cut_group = reg.group[comp.q - 1];
        for t in 0..reg.idx.len() {
            if reg.group[t] < cut_group {
                base.push(reg.idx[t]);
            } else if reg.group[t] == cut_group {
                tied.push(reg.idx[t]);
            }
        }
    }
    tied.sort_unstable();
    let r = comp.q - base.len();
    let mut out = Vec::new();
    for_each_k_subset(tied.len(), r, |pick| {
        let mut s = base.clone();
        s.extend(pick.iter().map(|&t| tied[t]));
        if comp.with_special {
            s.push(special.expect("special supplier present"));
        }
        s.sort_unstable();
        out.push(s);
    });
    out
}

fn best_sets_structured(p: &GameParams, w: &PriceVector, k: usize) -> Result<BestSupplierSets> {
    let (special, _, _) = one_off_shape(p).ok_or_else(|| Error::ShapeMismatch {
        detail: "fast path needs at most one supplier with different moments".into(),
    })?;
    let reg = regular_order(p, w, special);
    let (aggregate, comps) = best_compositions(p, w, &reg, special, k);
    let mut count = 0.0;
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut truncated = false;
    for comp in &comps {
        let (c, _) = composition_count_and_membership(p, &reg, special, comp);
        count += c;
    }
    if count <= SET_MATERIALIZE_CAP as f64 {
        for comp in &comps {
            sets.extend(composition_sets(&reg, special, comp));
        }
        sets.sort_unstable();
        sets.dedup();
    } else {
        truncated = true;
        for comp in &comps {
            sets.push(composition_representative(&reg, special, comp));
        }
        sets.sort_unstable();
        sets.dedup();
    }
    Ok(BestSupplierSets {
        k,
        aggregate,
        sets,
        count,
        truncated,
    })
}

/// The feasible supplier sets of size `k` maximizing the aggregate value.
///
/// Feasibility never relaxes the argmax: when every maximal set has an
/// infeasible member the result is empty even if lesser feasible sets exist.
pub fn best_supplier_sets(p: &GameParams, w: &PriceVector, k: usize) -> Result<BestSupplierSets> {
    best_supplier_sets_with(p, w, k, SetSearch::Auto)
}

pub fn best_supplier_sets_with(
    p: &GameParams,
    w: &PriceVector,
    k: usize,
    route: SetSearch,
) -> Result<BestSupplierSets> {
    match route {
        SetSearch::Exhaustive => best_sets_exhaustive(p, w, k),
        SetSearch::Structured => best_sets_structured(p, w, k),
        SetSearch::Auto => {
            if one_off_shape(p).is_some() {
                best_sets_structured(p, w, k)
            } else {
                best_sets_exhaustive(p, w, k)
            }
        }
    }
}

/// Largest set size at which an optimal feasible supplier set exists
/// (0 when even a single supplier cannot cover its price and link cost).
pub fn k_max(p: &GameParams, w: &PriceVector) -> Result<usize> {
    k_max_with(p, w, SetSearch::Auto)
}

pub fn k_max_with(p: &GameParams, w: &PriceVector, route: SetSearch) -> Result<usize> {
    for k in (1..=p.m).rev() {
        if !best_supplier_sets_with(p, w, k, route)?.is_empty() {
            return Ok(k);
        }
    }
    Ok(0)
}

/// Lexicographically smallest optimal feasible set of size `k`.
pub(crate) fn representative_best_set(p: &GameParams, w: &PriceVector, k: usize) -> Result<Vec<usize>> {
    let best = best_supplier_sets(p, w, k)?;
    best.sets.first().cloned().ok_or_else(|| Error::InvalidParams {
        detail: format!("no feasible optimal supplier set of size {}", k),
    })
}

/// Per-supplier membership fraction across the optimal feasible sets of
/// size `k`; zero everywhere when there are none.
pub(crate) fn membership_fractions(p: &GameParams, w: &PriceVector, k: usize) -> Result<Vec<f64>> {
    if let Some((special, _, _)) = one_off_shape(p) {
        let reg = regular_order(p, w, special);
        let (_, comps) = best_compositions(p, w, &reg, special, k);
        let mut total = 0.0;
        let mut acc = vec![0.0; p.m];
        for comp in &comps {
            let (c, member) = composition_count_and_membership(p, &reg, special, comp);
            total += c;
            for j in 0..p.m {
                acc[j] += c * member[j];
            }
        }
        if total == 0.0 {
            return Ok(vec![0.0; p.m]);
        }
        return Ok(acc.into_iter().map(|x| x / total).collect());
    }
    let best = best_sets_exhaustive(p, w, k)?;
    if best.sets.is_empty() {
        return Ok(vec![0.0; p.m]);
    }
    let mut acc = vec![0.0; p.m];
    for s in &best.sets {
        for &j in s {
            acc[j] += 1.0;
        }
    }
    let total = best.sets.len() as f64;
    Ok(acc.into_iter().map(|x| x / total).collect())
}

// === mean-improved supplier ===

/// Price equilibrium when one supplier carries a larger mean: the improved
/// supplier prices its mean advantage down to indifference, everyone else
/// at zero. The formula can go negative on spread-out instances; the price
/// is then clamped to zero and flagged.
pub fn hetero_mean_prices(p: &GameParams) -> Result<PriceEquilibrium> {
    let shape = mean_shift_shape(p)?;
    let (h, mu, shift) = match shape {
        None => {
            let base = homogeneous_price_equilibrium(p)?;
            return Ok(PriceEquilibrium {
                case: PriceCase::Homogeneous,
                w_star: base.w_star,
                k_ref: base.k_star,
                welfare_delta: Some(WelfareDelta {
                    supplier: 0.0,
                    retailer: 0.0,
                    consumer: 0.0,
                    total: 0.0,
                    retailer_residual: None,
                }),
                negative_price_clamped: false,
                others_price_interval: None,
            });
        }
        Some(t) => t,
    };
    let k_ref = k_max(p, &PriceVector::zeros(p.m))?;
    if p.m < k_ref + 1 {
        return Err(Error::InsufficientSuppliers {
            needed: k_ref + 1,
            available: p.m,
        });
    }
    let raw = shift * ((p.delta - mu * k_ref as f64) / (mu + shift) - 1.0);
    let raw = snap_margin(raw, p.snap_scale());
    let (w_star, clamped) = if raw < 0.0 {
        (PriceVector::zeros(p.m), true)
    } else {
        let mut w = vec![0.0; p.m];
        w[h] = raw;
        (PriceVector::with_left_limits(w, &[h])?, false)
    };
    let others_price_interval = if k_ref == 1 {
        let other = (0..p.m).find(|&j| j != h).ok_or_else(|| Error::InsufficientSuppliers {
            needed: 2,
            available: p.m,
        })?;
        Some((0.0, p.price_bound(other)))
    } else {
        None
    };
    Ok(PriceEquilibrium {
        case: PriceCase::HeteroMean,
        w_star,
        k_ref,
        welfare_delta: Some(hetero_mean_welfare_delta(p)?),
        negative_price_clamped: clamped,
        others_price_interval,
    })
}

/// Welfare deltas of the mean-improvement equilibrium against the symmetric
/// baseline at the common mean. Supplier and consumer deltas are exact; the
/// retailer delta is zero up to a link-cost divisibility leftover, reported
/// exactly in `retailer_residual`.
pub fn hetero_mean_welfare_delta(p: &GameParams) -> Result<WelfareDelta> {
    let (_, mu, shift) = match mean_shift_shape(p)? {
        None => {
            return Ok(WelfareDelta {
                supplier: 0.0,
                retailer: 0.0,
                consumer: 0.0,
                total: 0.0,
                retailer_residual: Some(0.0),
            })
        }
        Some(t) => t,
    };
    let mut base = p.clone();
    base.mu = vec![mu; p.m];
    let sym = homogeneous_price_equilibrium(&base)?;
    let k_star = sym.k_star;
    let k_big = k_max(p, &PriceVector::zeros(p.m))?;
    let supplier = shift * (p.delta - mu * (k_big + 1) as f64 - shift);
    let consumer = shift * (mu * k_star as f64 + 0.5 * shift);
    let q = (k_big + 1).saturating_sub(k_star) as f64;
    let ratio = shift * mu / p.c;
    let residual = shift * mu * q - p.c * floor_snapped(ratio * q)
        + (k_star as f64 - 1.0) * (p.c * ceil_snapped(ratio) - shift * mu);
    Ok(WelfareDelta {
        supplier,
        retailer: 0.0,
        consumer,
        total: supplier + consumer,
        retailer_residual: Some(residual),
    })
}

// === price grid certification ===

/// Best grid deviation found for one supplier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupplierDeviation {
    pub supplier: usize,
    pub equilibrium_payoff: f64,
    pub best_price: f64,
    pub best_payoff: f64,
    pub gain: f64,
}

/// Outcome of the price-grid deviation search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub certified: bool,
    pub grid_points: usize,
    pub checks: Vec<SupplierDeviation>,
}

/// Check each supplier's price against a grid of unilateral deviations over
/// [0, price bound]. `resolution` is the grid step as a fraction of the
/// bound (1e-3 gives 1001 points). A deviation counts when the resulting
/// activation likelihood times price beats the equilibrium payoff.
pub fn supplier_price_deviation_check(
    p: &GameParams,
    w_star: &PriceVector,
    resolution: f64,
) -> Result<DeviationReport> {
    if !(resolution.is_finite() && resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::InvalidParams {
            detail: format!("grid resolution must lie in (0, 1], got {}", resolution),
        });
    }
    let steps = (1.0 / resolution).round().max(1.0) as usize;
    let base = activation_likelihoods(p, w_star)?;
    let mut checks = Vec::with_capacity(p.m);
    let mut certified = true;
    for j in 0..p.m {
        let eq_payoff = base[j] * p.mu[j] * w_star.value(j);
        let bound = p.price_bound(j).max(0.0);
        let mut best_price = w_star.value(j);
        let mut best_payoff = eq_payoff;
        for t in 0..=steps {
            let price = bound * t as f64 / steps as f64;
            let trial = w_star.with_price(j, price)?;
            let a = activation_likelihoods(p, &trial)?[j];
            let payoff = a * p.mu[j] * price;
            if payoff > best_payoff {
                best_payoff = payoff;
                best_price = price;
            }
        }
        let gain = best_payoff - eq_payoff;
        if gain > REL_TOL * eq_payoff.abs().max(1.0) {
            certified = false;
        }
        checks.push(SupplierDeviation {
            supplier: j,
            equilibrium_payoff: eq_payoff,
            best_price,
            best_payoff,
            gain,
        });
    }
    Ok(DeviationReport {
        certified,
        grid_points: steps + 1,
        checks,
    })
}
