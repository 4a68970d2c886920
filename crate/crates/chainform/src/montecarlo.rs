//! Monte Carlo validation of the closed forms: moment-matched supply
//! distributions on [0, s_max], deterministic counter-based substreams, an
//! independent per-draw market evaluator, and z-score summaries.
//!
//! Draw (j, t) depends only on (seed, j, t), never on thread count or
//! evaluation order, so paired designs line up draw for draw across two
//! parameterizations of the same seed.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{GameParams, Network, PriceVector, SupplyRealization};
use crate::numeric::{pairwise_sum, snap_margin, REL_TOL};
use crate::payoff::{expected_welfare, retailer_expected_payoff, retailer_realized_payoff};
use crate::pricing::{
    hetero_mean_welfare_delta, hetero_variance_prices, hetero_variance_welfare_delta,
    homogeneous_price_equilibrium, mean_shift_shape, variance_gap_shape,
};
use crate::equilibrium::{greedy_equilibrium, LinkMode};

/// Supported supply distribution families; all are moment-matched to
/// (mu_j, sigma2_j) on the bounded support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Beta on [0, s_max], rescaled.
    ScaledBeta,
    /// Uniform on a symmetric interval around the mean.
    Uniform,
    /// Mass at 0 and at one high point.
    TwoPoint,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::ScaledBeta => "scaled_beta",
            Family::Uniform => "uniform",
            Family::TwoPoint => "two_point",
        }
    }
}

#[derive(Debug, Clone)]
enum Marginal {
    Point { value: f64 },
    ScaledBeta { dist: Beta<f64>, s_max: f64 },
    Uniform { lo: f64, hi: f64 },
    TwoPoint { hi: f64, p_hi: f64 },
}

/// Per-supplier moment-matched marginals with a fixed master seed.
#[derive(Debug, Clone)]
pub struct SupplyDistribution {
    pub family: Family,
    pub seed: u64,
    mu: Vec<f64>,
    sigma2: Vec<f64>,
    marginals: Vec<Marginal>,
}

fn infeasible(j: usize, family: Family, detail: String) -> Error {
    Error::InfeasibleMoments {
        supplier: j,
        family: family.name().to_string(),
        detail,
    }
}

impl SupplyDistribution {
    /// Moment-match `family` to every supplier of `p`. Zero variance always
    /// collapses to a point mass at the mean.
    pub fn new(family: Family, p: &GameParams, seed: u64) -> Result<Self> {
        let mut marginals = Vec::with_capacity(p.m);
        for j in 0..p.m {
            let mu = p.mu[j];
            let s2 = p.sigma2[j];
            if !(mu > 0.0 && mu <= p.s_max) {
                return Err(infeasible(
                    j,
                    family,
                    format!("mean {} outside (0, s_max = {}]", mu, p.s_max),
                ));
            }
            if s2 == 0.0 {
                marginals.push(Marginal::Point { value: mu });
                continue;
            }
            let marginal = match family {
                Family::ScaledBeta => {
                    // matching on [0, s_max] needs s2 < mu (s_max - mu)
                    let cap = mu * (p.s_max - mu);
                    if s2 >= cap {
                        return Err(infeasible(
                            j,
                            family,
                            format!("variance {} must be below mu (s_max - mu) = {}", s2, cap),
                        ));
                    }
                    let nu = cap / s2 - 1.0;
                    let alpha = (mu / p.s_max) * nu;
                    let beta = (1.0 - mu / p.s_max) * nu;
                    let dist = Beta::new(alpha, beta).map_err(|e| {
                        infeasible(j, family, format!("beta({}, {}): {}", alpha, beta, e))
                    })?;
                    Marginal::ScaledBeta {
                        dist,
                        s_max: p.s_max,
                    }
                }
                Family::Uniform => {
                    let half = (3.0 * s2).sqrt();
                    let lo = mu - half;
                    let hi = mu + half;
                    if snap_margin(lo, p.s_max) < 0.0 || snap_margin(p.s_max - hi, p.s_max) < 0.0 {
                        return Err(infeasible(
                            j,
                            family,
                            format!("interval [{}, {}] leaves [0, {}]", lo, hi, p.s_max),
                        ));
                    }
                    Marginal::Uniform {
                        lo: lo.max(0.0),
                        hi: hi.min(p.s_max),
                    }
                }
                Family::TwoPoint => {
                    let hi = mu + s2 / mu;
                    if snap_margin(p.s_max - hi, p.s_max) < 0.0 {
                        return Err(infeasible(
                            j,
                            family,
                            format!("high point {} exceeds s_max = {}", hi, p.s_max),
                        ));
                    }
                    Marginal::TwoPoint {
                        hi: hi.min(p.s_max),
                        p_hi: mu * mu / (mu * mu + s2),
                    }
                }
            };
            marginals.push(marginal);
        }
        Ok(SupplyDistribution {
            family,
            seed,
            mu: p.mu.clone(),
            sigma2: p.sigma2.clone(),
            marginals,
        })
    }

    pub fn suppliers(&self) -> usize {
        self.marginals.len()
    }

    /// Mean the marginal was matched to.
    pub fn matched_mean(&self, j: usize) -> f64 {
        self.mu[j]
    }

    /// Variance the marginal was matched to.
    pub fn matched_variance(&self, j: usize) -> f64 {
        self.sigma2[j]
    }

    /// Supply of supplier `j` on draw `t`.
    pub fn draw_supplier(&self, j: usize, t: u64) -> f64 {
        let mut rng = substream(self.seed, j as u64, t);
        match &self.marginals[j] {
            Marginal::Point { value } => *value,
            Marginal::ScaledBeta { dist, s_max } => dist.sample(&mut rng) * s_max,
            Marginal::Uniform { lo, hi } => {
                let u: f64 = rng.gen();
                lo + (hi - lo) * u
            }
            Marginal::TwoPoint { hi, p_hi } => {
                let u: f64 = rng.gen();
                if u < *p_hi {
                    *hi
                } else {
                    0.0
                }
            }
        }
    }

    /// Joint draw `t`: independent across suppliers.
    pub fn realization(&self, t: u64) -> SupplyRealization {
        SupplyRealization::new(
            (0..self.marginals.len())
                .map(|j| self.draw_supplier(j, t))
                .collect(),
        )
    }
}

fn splitmix64(x: &mut u64) -> u64 {
    *x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based substream: a fresh generator keyed by (seed, supplier,
/// draw). No state is shared between draws, so any subset can be generated
/// in any order on any number of threads.
fn substream(seed: u64, j: u64, t: u64) -> ChaCha8Rng {
    let mut x = seed
        .wrapping_add((j.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add((t.wrapping_add(1)).wrapping_mul(0xD1B5_4A32_D192_ED03));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut x).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Draw `draws` joint realizations in parallel, in deterministic order.
pub fn sample_supply(dist: &SupplyDistribution, draws: usize) -> Vec<SupplyRealization> {
    (0..draws as u64)
        .into_par_iter()
        .map(|t| dist.realization(t))
        .collect()
}

/// Market outcome of one draw, computed from first principles: the clearing
/// price, per-link output shares, and the gross-surplus integral. This
/// deliberately repeats none of the algebra in [`crate::payoff`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DrawOutcome {
    pub retailer: f64,
    pub supplier: f64,
    pub consumer: f64,
    pub total: f64,
}

pub fn evaluate_draw(
    p: &GameParams,
    g: &Network,
    w: &PriceVector,
    s: &SupplyRealization,
) -> DrawOutcome {
    let actives = g.active_suppliers();
    let quantity: f64 = actives.iter().map(|&j| s.s[j]).sum();
    let price = p.delta - quantity;
    let degrees = g.degrees();
    let mut retailer = 0.0;
    for (_, j) in g.links() {
        let share = s.s[j] / degrees[j] as f64;
        retailer += (price - w.value(j)) * share - p.c;
    }
    let supplier: f64 = actives.iter().map(|&j| w.value(j) * s.s[j]).sum();
    // gross utility of consuming `quantity`, minus spending at the price
    let gross = p.delta * quantity - 0.5 * quantity * quantity;
    let consumer = gross - price * quantity;
    DrawOutcome {
        retailer,
        supplier,
        consumer,
        total: retailer + supplier + consumer,
    }
}

/// One closed-form value against its Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatReport {
    pub target: String,
    pub closed_form: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub draws: usize,
    /// |z| <= 3, or an exact match when the sample has no spread.
    pub pass: bool,
}

/// Compare the sample mean of `samples` against `closed_form`.
pub fn summarize(target: impl Into<String>, closed_form: f64, samples: &[f64]) -> StatReport {
    let n = samples.len();
    let mean = pairwise_sum(samples) / n as f64;
    let sq: Vec<f64> = samples.iter().map(|&x| (x - mean) * (x - mean)).collect();
    let var = if n > 1 {
        pairwise_sum(&sq) / (n - 1) as f64
    } else {
        0.0
    };
    let se = (var / n as f64).sqrt();
    let diff = mean - closed_form;
    let (z, pass) = if se == 0.0 {
        if diff.abs() <= REL_TOL * closed_form.abs().max(1.0) {
            (0.0, true)
        } else {
            (f64::INFINITY * diff.signum(), false)
        }
    } else {
        let z = diff / se;
        (z, z.abs() <= 3.0)
    };
    StatReport {
        target: target.into(),
        closed_form,
        estimate: mean,
        std_error: se,
        z_score: z,
        draws: n,
        pass,
    }
}

/// What to validate against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationTarget {
    /// Realized payoff of one retailer against its expected payoff.
    RetailerPayoff { retailer: usize },
    /// Realized revenue of one supplier against likelihood times mu w.
    SupplierRevenue { supplier: usize },
    /// All four welfare components, estimated by the independent evaluator.
    Welfare,
    /// Sample mean and variance of one supplier's marginal.
    Moments { supplier: usize },
}

/// Monte Carlo validation of closed forms on a fixed network and prices.
pub fn validate_closed_form(
    p: &GameParams,
    g: &Network,
    w: &PriceVector,
    dist: &SupplyDistribution,
    draws: usize,
    target: ValidationTarget,
) -> Result<Vec<StatReport>> {
    if draws == 0 {
        return Err(Error::InvalidParams {
            detail: "need at least one draw".into(),
        });
    }
    match target {
        ValidationTarget::RetailerPayoff { retailer } => {
            if retailer >= p.n {
                return Err(Error::IndexOutOfRange {
                    detail: format!("retailer {} of {}", retailer, p.n),
                });
            }
            let closed = retailer_expected_payoff(p, g, w, retailer);
            let samples: Vec<f64> = (0..draws as u64)
                .into_par_iter()
                .map(|t| retailer_realized_payoff(p, g, w, &dist.realization(t), retailer))
                .collect();
            Ok(vec![summarize(
                format!("retailer_{}_payoff", retailer),
                closed,
                &samples,
            )])
        }
        ValidationTarget::SupplierRevenue { supplier } => {
            if supplier >= p.m {
                return Err(Error::IndexOutOfRange {
                    detail: format!("supplier {} of {}", supplier, p.m),
                });
            }
            let active = g.supplier_degree(supplier) > 0;
            let closed = if active {
                p.mu[supplier] * w.value(supplier)
            } else {
                0.0
            };
            let samples: Vec<f64> = (0..draws as u64)
                .into_par_iter()
                .map(|t| {
                    if active {
                        w.value(supplier) * dist.draw_supplier(supplier, t)
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(vec![summarize(
                format!("supplier_{}_revenue", supplier),
                closed,
                &samples,
            )])
        }
        ValidationTarget::Welfare => {
            let closed = expected_welfare(p, g, w);
            let outcomes: Vec<DrawOutcome> = (0..draws as u64)
                .into_par_iter()
                .map(|t| evaluate_draw(p, g, w, &dist.realization(t)))
                .collect();
            let pick = |f: fn(&DrawOutcome) -> f64| -> Vec<f64> { outcomes.iter().map(f).collect() };
            Ok(vec![
                summarize("welfare_retailer", closed.retailer, &pick(|o| o.retailer)),
                summarize("welfare_supplier", closed.supplier, &pick(|o| o.supplier)),
                summarize("welfare_consumer", closed.consumer, &pick(|o| o.consumer)),
                summarize("welfare_total", closed.total, &pick(|o| o.total)),
            ])
        }
        ValidationTarget::Moments { supplier } => {
            if supplier >= p.m {
                return Err(Error::IndexOutOfRange {
                    detail: format!("supplier {} of {}", supplier, p.m),
                });
            }
            let samples: Vec<f64> = (0..draws as u64)
                .into_par_iter()
                .map(|t| dist.draw_supplier(supplier, t))
                .collect();
            let mean_report = summarize(
                format!("supplier_{}_mean", supplier),
                dist.matched_mean(supplier),
                &samples,
            );
            // the variance estimate needs its own standard error, from the
            // fourth central moment
            let n = samples.len() as f64;
            let mean = mean_report.estimate;
            let sq: Vec<f64> = samples.iter().map(|&x| (x - mean) * (x - mean)).collect();
            let var = pairwise_sum(&sq) / (n - 1.0);
            let m4 = pairwise_sum(&sq.iter().map(|&q| q * q).collect::<Vec<f64>>()) / n;
            let se = ((m4 - var * var).max(0.0) / n).sqrt();
            let closed = dist.matched_variance(supplier);
            let diff = var - closed;
            let (z, pass) = if se == 0.0 {
                if diff.abs() <= REL_TOL * closed.abs().max(1.0) {
                    (0.0, true)
                } else {
                    (f64::INFINITY * diff.signum(), false)
                }
            } else {
                let z = diff / se;
                (z, z.abs() <= 3.0)
            };
            Ok(vec![
                mean_report,
                StatReport {
                    target: format!("supplier_{}_variance", supplier),
                    closed_form: closed,
                    estimate: var,
                    std_error: se,
                    z_score: z,
                    draws: samples.len(),
                    pass,
                },
            ])
        }
    }
}

/// Paired Monte Carlo check of the variance-improvement welfare deltas:
/// the instance with one lower-variance supplier against the symmetric
/// baseline at the larger variance, on common random numbers.
pub fn validate_variance_gap_deltas(
    p: &GameParams,
    family: Family,
    seed: u64,
    draws: usize,
) -> Result<Vec<StatReport>> {
    let (_, _, hi) = variance_gap_shape(p)?.ok_or_else(|| Error::ShapeMismatch {
        detail: "instance is already symmetric: no variance gap to validate".into(),
    })?;
    let pe = hetero_variance_prices(p)?;
    let closed = hetero_variance_welfare_delta(p)?;
    let w_imp = pe.w_star.clone();
    let g_imp = greedy_equilibrium(p, &w_imp, LinkMode::Fresh)?.network;

    let mut base = p.clone();
    base.sigma2 = vec![hi; p.m];
    let w0 = PriceVector::zeros(p.m);
    let g_base = greedy_equilibrium(&base, &w0, LinkMode::Fresh)?.network;

    let d_imp = SupplyDistribution::new(family, p, seed)?;
    let d_base = SupplyDistribution::new(family, &base, seed)?;

    let deltas: Vec<DrawOutcome> = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let oi = evaluate_draw(p, &g_imp, &w_imp, &d_imp.realization(t));
            let ob = evaluate_draw(&base, &g_base, &w0, &d_base.realization(t));
            DrawOutcome {
                retailer: oi.retailer - ob.retailer,
                supplier: oi.supplier - ob.supplier,
                consumer: oi.consumer - ob.consumer,
                total: oi.total - ob.total,
            }
        })
        .collect();
    let pick = |f: fn(&DrawOutcome) -> f64| -> Vec<f64> { deltas.iter().map(f).collect() };
    Ok(vec![
        summarize("delta_supplier", closed.supplier, &pick(|o| o.supplier)),
        summarize("delta_retailer", closed.retailer, &pick(|o| o.retailer)),
        summarize("delta_consumer", closed.consumer, &pick(|o| o.consumer)),
        summarize("delta_total", closed.total, &pick(|o| o.total)),
    ])
}

/// Paired Monte Carlo check of the mean-improvement consumer delta: total
/// output with the improved supplier in place of one baseline supplier,
/// against the symmetric baseline, on common random numbers.
pub fn validate_mean_shift_consumer_delta(
    p: &GameParams,
    family: Family,
    seed: u64,
    draws: usize,
) -> Result<StatReport> {
    let (h, mu, _) = mean_shift_shape(p)?.ok_or_else(|| Error::ShapeMismatch {
        detail: "instance is already symmetric: no mean shift to validate".into(),
    })?;
    let closed = hetero_mean_welfare_delta(p)?.consumer;
    let mut base = p.clone();
    base.mu = vec![mu; p.m];
    let k_star = homogeneous_price_equilibrium(&base)?.k_star;
    if k_star == 0 {
        return Err(Error::InvalidParams {
            detail: "baseline equilibrium has no active suppliers".into(),
        });
    }
    let actives_base: Vec<usize> = (0..k_star).collect();
    let mut actives_imp: Vec<usize> = vec![h];
    actives_imp.extend((0..p.m).filter(|&j| j != h).take(k_star - 1));
    actives_imp.sort_unstable();

    let d_imp = SupplyDistribution::new(family, p, seed)?;
    let d_base = SupplyDistribution::new(family, &base, seed)?;
    let samples: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let si = d_imp.realization(t);
            let sb = d_base.realization(t);
            let ti: f64 = actives_imp.iter().map(|&j| si.s[j]).sum();
            let tb: f64 = actives_base.iter().map(|&j| sb.s[j]).sum();
            // consumer surplus is half the squared quantity at linear demand
            0.5 * (ti * ti - tb * tb)
        })
        .collect();
    Ok(summarize("delta_consumer", closed, &samples))
}
