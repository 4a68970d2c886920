//! Market primitives: instance parameters, wholesale prices, link networks,
//! and realized supply vectors.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::snap_margin;

/// Primitive parameters of one market instance.
///
/// Moments are stored per supplier; a homogeneous instance simply repeats the
/// same value. `delta` is the demand intercept, `c` the cost a retailer pays
/// per link, and `s_max` the hard capacity bound of the supply support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    /// Number of retailers.
    pub n: usize,
    /// Number of suppliers.
    pub m: usize,
    /// Upper end of the supply support.
    pub s_max: f64,
    /// Demand intercept.
    pub delta: f64,
    /// Mean supply per supplier, length m.
    pub mu: Vec<f64>,
    /// Supply variance per supplier, length m.
    pub sigma2: Vec<f64>,
    /// Link cost paid by retailers.
    pub c: f64,
}

impl GameParams {
    pub fn new(
        n: usize,
        m: usize,
        s_max: f64,
        delta: f64,
        mu: Vec<f64>,
        sigma2: Vec<f64>,
        c: f64,
    ) -> Self {
        GameParams {
            n,
            m,
            s_max,
            delta,
            mu,
            sigma2,
            c,
        }
    }

    /// Instance where every supplier shares the same moments.
    pub fn homogeneous(n: usize, m: usize, s_max: f64, delta: f64, mu: f64, sigma2: f64, c: f64) -> Self {
        GameParams {
            n,
            m,
            s_max,
            delta,
            mu: vec![mu; m],
            sigma2: vec![sigma2; m],
            c,
        }
    }

    /// Demand intercept used when none is configured explicitly.
    pub fn default_delta(m: usize, s_max: f64) -> f64 {
        m as f64 * s_max
    }

    pub fn means_equal(&self) -> bool {
        self.mu.windows(2).all(|p| p[0] == p[1])
    }

    pub fn variances_equal(&self) -> bool {
        self.sigma2.windows(2).all(|p| p[0] == p[1])
    }

    /// Exact-equality homogeneity test; the symmetric closed forms are only
    /// selected when this holds.
    pub fn is_homogeneous(&self) -> bool {
        self.means_equal() && self.variances_equal()
    }

    /// Highest price at which supplier `j` could ever be worth linking to.
    pub fn price_bound(&self, j: usize) -> f64 {
        self.delta - self.mu[j] - (self.sigma2[j] + self.c) / self.mu[j]
    }

    /// Magnitude used for relative-tolerance snapping on this instance.
    pub fn snap_scale(&self) -> f64 {
        let mu_max = self.mu.iter().cloned().fold(0.0, f64::max);
        (self.delta.abs() * mu_max).max(1.0)
    }
}

/// One violated parameter bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundViolation {
    /// Sizes, vector lengths, or moment domains are off.
    Shape { detail: String },
    /// The link cost exceeds what a single zero-price link is worth:
    /// c must lie in (0, (delta - mu_j) mu_j - sigma2_j].
    LinkCost { supplier: usize, v1: f64, c: f64 },
    /// Price above the level at which the supplier could attract any link.
    Price { supplier: usize, price: f64, bound: f64 },
    /// Variance too large to moment-match a distribution on [0, s_max].
    Moments { supplier: usize, sigma2: f64, bound: f64 },
}

/// Outcome of checking an instance (and optionally prices) against the
/// maintained bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Hard violations: closed forms are not trusted while any is present.
    pub violations: Vec<BoundViolation>,
    /// Moment-matching problems; these only affect sampling, not the
    /// closed-form analysis.
    pub sampling_violations: Vec<BoundViolation>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn sampling_ok(&self) -> bool {
        self.sampling_violations.is_empty()
    }
}

/// Check parameter bounds: domains, link cost against single-link value, and
/// moment feasibility for bounded sampling.
pub fn validate_params(p: &GameParams) -> ValidationReport {
    validate(p, None)
}

/// Same as [`validate_params`] but also checks each price against its bound.
pub fn validate_params_with_prices(p: &GameParams, w: &PriceVector) -> ValidationReport {
    validate(p, Some(w))
}

fn validate(p: &GameParams, w: Option<&PriceVector>) -> ValidationReport {
    let mut violations = Vec::new();
    let mut sampling = Vec::new();
    let mut shape = |detail: String| violations.push(BoundViolation::Shape { detail });

    if p.n == 0 {
        shape("need at least one retailer".into());
    }
    if p.m == 0 {
        shape("need at least one supplier".into());
    }
    if p.mu.len() != p.m {
        shape(format!("mu has length {}, expected m = {}", p.mu.len(), p.m));
    }
    if p.sigma2.len() != p.m {
        shape(format!("sigma2 has length {}, expected m = {}", p.sigma2.len(), p.m));
    }
    if !(p.s_max.is_finite() && p.s_max > 0.0) {
        shape(format!("s_max must be positive and finite, got {}", p.s_max));
    }
    if !p.delta.is_finite() {
        shape(format!("delta must be finite, got {}", p.delta));
    }
    if !(p.c.is_finite() && p.c > 0.0) {
        shape(format!("link cost c must be positive and finite, got {}", p.c));
    }
    if let Some(w) = w {
        if w.len() != p.m {
            shape(format!("price vector has length {}, expected m = {}", w.len(), p.m));
        }
    }
    if !violations.is_empty() {
        return ValidationReport {
            violations,
            sampling_violations: sampling,
        };
    }

    let scale = p.snap_scale();
    for j in 0..p.m {
        let mu = p.mu[j];
        let s2 = p.sigma2[j];
        if !(mu.is_finite() && mu > 0.0 && mu <= p.s_max) {
            violations.push(BoundViolation::Shape {
                detail: format!("mu[{}] = {} must lie in (0, s_max = {}]", j, mu, p.s_max),
            });
            continue;
        }
        if !(s2.is_finite() && s2 >= 0.0) {
            violations.push(BoundViolation::Shape {
                detail: format!("sigma2[{}] = {} must be finite and nonnegative", j, s2),
            });
            continue;
        }
        // a zero-price link to supplier j must be worth its cost
        let v1 = (p.delta - mu) * mu - s2;
        if snap_margin(v1 - p.c, scale) < 0.0 {
            violations.push(BoundViolation::LinkCost {
                supplier: j,
                v1,
                c: p.c,
            });
        }
        if let Some(w) = w {
            let bound = p.price_bound(j);
            if snap_margin(bound - w.value(j), scale) < 0.0 {
                violations.push(BoundViolation::Price {
                    supplier: j,
                    price: w.value(j),
                    bound,
                });
            }
        }
        let moment_bound = mu * (p.s_max - mu);
        if snap_margin(moment_bound - s2, scale) < 0.0 {
            sampling.push(BoundViolation::Moments {
                supplier: j,
                sigma2: s2,
                bound: moment_bound,
            });
        }
    }

    ValidationReport {
        violations,
        sampling_violations: sampling,
    }
}

/// Wholesale prices, one per supplier, with optional left-limit marks.
///
/// A marked entry stands for "this value minus a vanishing epsilon":
/// arithmetic uses the stored value, while tie-breaking comparisons treat the
/// marked price as strictly smaller than an unmarked equal one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector {
    w: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    left_limit: Vec<bool>,
}

impl PriceVector {
    /// Prices must be finite and nonnegative.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        for (j, &x) in w.iter().enumerate() {
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::NegativePrice { supplier: j, price: x });
            }
        }
        Ok(PriceVector {
            w,
            left_limit: Vec::new(),
        })
    }

    /// Prices with left-limit marks on the suppliers listed in `marked`.
    pub fn with_left_limits(w: Vec<f64>, marked: &[usize]) -> Result<Self> {
        let mut v = PriceVector::new(w)?;
        let mut flags = vec![false; v.w.len()];
        for &j in marked {
            if j >= flags.len() {
                return Err(Error::IndexOutOfRange {
                    detail: format!("left-limit mark on supplier {} of {}", j, flags.len()),
                });
            }
            flags[j] = true;
        }
        v.left_limit = flags;
        Ok(v)
    }

    pub fn zeros(m: usize) -> Self {
        PriceVector {
            w: vec![0.0; m],
            left_limit: Vec::new(),
        }
    }

    /// Every supplier at the same price.
    pub fn constant(m: usize, price: f64) -> Result<Self> {
        PriceVector::new(vec![price; m])
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Numeric value used in all arithmetic (the left limit evaluates to the
    /// stored value).
    pub fn value(&self, j: usize) -> f64 {
        self.w[j]
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    pub fn is_left_limit(&self, j: usize) -> bool {
        self.left_limit.get(j).copied().unwrap_or(false)
    }

    /// Copy with supplier `j` repriced to a plain (unmarked) value.
    pub fn with_price(&self, j: usize, price: f64) -> Result<Self> {
        if j >= self.w.len() {
            return Err(Error::IndexOutOfRange {
                detail: format!("price index {} of {}", j, self.w.len()),
            });
        }
        if !(price.is_finite() && price >= 0.0) {
            return Err(Error::NegativePrice { supplier: j, price });
        }
        let mut w = self.w.clone();
        w[j] = price;
        let mut flags = self.left_limit.clone();
        if !flags.is_empty() {
            flags[j] = false;
        }
        Ok(PriceVector {
            w,
            left_limit: flags,
        })
    }
}

/// Bipartite link structure between `n` retailers and `m` suppliers.
///
/// Mutations return updated copies, so a network value can serve as a key in
/// search procedures without aliasing surprises. Links are kept in a sorted
/// set; every view is derived from it, which keeps serialization canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Network {
    pub n: usize,
    pub m: usize,
    links: BTreeSet<(usize, usize)>,
}

impl Network {
    pub fn empty(n: usize, m: usize) -> Self {
        Network {
            n,
            m,
            links: BTreeSet::new(),
        }
    }

    /// Build from explicit (retailer, supplier) pairs.
    pub fn new(n: usize, m: usize, links: &[(usize, usize)]) -> Result<Self> {
        let mut g = Network::empty(n, m);
        for &(i, j) in links {
            g = g.add_link(i, j)?;
        }
        Ok(g)
    }

    fn check_ids(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                detail: format!("retailer {} of {}", i, self.n),
            });
        }
        if j >= self.m {
            return Err(Error::IndexOutOfRange {
                detail: format!("supplier {} of {}", j, self.m),
            });
        }
        Ok(())
    }

    pub fn add_link(&self, i: usize, j: usize) -> Result<Self> {
        self.check_ids(i, j)?;
        if self.links.contains(&(i, j)) {
            return Err(Error::DuplicateLink {
                retailer: i,
                supplier: j,
            });
        }
        let mut g = self.clone();
        g.links.insert((i, j));
        Ok(g)
    }

    pub fn remove_link(&self, i: usize, j: usize) -> Result<Self> {
        self.check_ids(i, j)?;
        if !self.links.contains(&(i, j)) {
            return Err(Error::MissingLink {
                retailer: i,
                supplier: j,
            });
        }
        let mut g = self.clone();
        g.links.remove(&(i, j));
        Ok(g)
    }

    /// Copy with retailer `i`'s link set replaced wholesale.
    pub fn with_retailer_links(&self, i: usize, suppliers: &[usize]) -> Result<Self> {
        self.check_ids(i, 0.min(self.m.saturating_sub(1)))?;
        let mut g = self.clone();
        g.links.retain(|&(r, _)| r != i);
        for &j in suppliers {
            g.check_ids(i, j)?;
            if !g.links.insert((i, j)) {
                return Err(Error::DuplicateLink {
                    retailer: i,
                    supplier: j,
                });
            }
        }
        Ok(g)
    }

    /// Network realizing a per-supplier degree profile, assigning a fresh
    /// retailer to every link in supplier order.
    pub fn from_degree_profile(n: usize, m: usize, profile: &[(usize, usize)]) -> Result<Self> {
        let needed: usize = profile.iter().map(|&(_, d)| d).sum();
        if needed > n {
            return Err(Error::InsufficientRetailers {
                needed,
                available: n,
            });
        }
        let mut g = Network::empty(n, m);
        let mut next = 0usize;
        for &(j, d) in profile {
            for _ in 0..d {
                g = g.add_link(next, j)?;
                next += 1;
            }
        }
        Ok(g)
    }

    pub fn has_link(&self, i: usize, j: usize) -> bool {
        self.links.contains(&(i, j))
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.links.iter().copied()
    }

    /// Suppliers retailer `i` links to, ascending.
    pub fn retailer_links(&self, i: usize) -> Vec<usize> {
        self.links
            .range((i, 0)..=(i, usize::MAX))
            .map(|&(_, j)| j)
            .collect()
    }

    pub fn supplier_degree(&self, j: usize) -> usize {
        self.links.iter().filter(|&&(_, l)| l == j).count()
    }

    /// Degrees of all suppliers, indexed by supplier id.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.m];
        for &(_, j) in &self.links {
            d[j] += 1;
        }
        d
    }

    /// Suppliers with at least one link, ascending.
    pub fn active_suppliers(&self) -> Vec<usize> {
        self.degrees()
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d > 0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Suppliers with no links, ascending.
    pub fn vacant_suppliers(&self) -> Vec<usize> {
        self.degrees()
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d == 0)
            .map(|(j, _)| j)
            .collect()
    }

    /// Number of active suppliers.
    pub fn active_count(&self) -> usize {
        self.degrees().iter().filter(|&&d| d > 0).count()
    }
}

/// One draw of per-supplier output quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupplyRealization {
    pub s: Vec<f64>,
}

impl SupplyRealization {
    pub fn new(s: Vec<f64>) -> Self {
        SupplyRealization { s }
    }

    /// Total quantity reaching the market: only active suppliers sell.
    pub fn total_active(&self, g: &Network) -> f64 {
        g.active_suppliers().iter().map(|&j| self.s[j]).sum()
    }
}
