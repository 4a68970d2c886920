//! Randomized invariants over the public API: closed forms against
//! mechanical evaluation, greedy output against the exhaustive oracle, and
//! the structured fast path against plain enumeration.

use std::collections::BTreeSet;

use proptest::prelude::*;

use chainform::equilibrium::{
    activation_likelihoods, active_supplier_count, equilibrium_degrees, greedy_equilibrium,
    selection_filter, verify_retailer_nash, LinkMode, VerifyMode, Violation,
};
use chainform::montecarlo::evaluate_draw;
use chainform::numeric::close_rel;
use chainform::payoff::{expected_welfare, realized_welfare, retailer_expected_payoff};
use chainform::planner::{planner_optimum, price_of_stability};
use chainform::pricing::{
    best_supplier_sets_with, hetero_mean_welfare_delta, hetero_variance_welfare_delta,
    homogeneous_price_equilibrium, k_max, k_max_with, SetSearch,
};
use chainform::{GameParams, Network, PriceVector, SupplyRealization};

/// Scalars of a symmetric instance with a comfortably positive single-link
/// value; `None` when the draw is too tight to admit a link cost.
fn sym_params(mu: f64, s2: f64, dm: f64, cf: f64, n: usize, m: usize) -> Option<GameParams> {
    let delta = mu * dm;
    let v1 = (delta - mu) * mu - s2;
    if v1 < 0.3 {
        return None;
    }
    let c = cf * v1;
    Some(GameParams::homogeneous(n, m, 4.0, delta, mu, s2, c))
}

fn sym_scalars() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (0.7f64..3.2, 0.0f64..1.2, 3.5f64..9.0, 0.15f64..0.95)
}

proptest! {
    /// The symmetric closed-form welfare must equal the mechanical component
    /// sum over the constructed equilibrium network.
    #[test]
    fn closed_form_welfare_matches_constructed_network(
        (mu, s2, dm, cf) in sym_scalars(),
    ) {
        let p = sym_params(mu, s2, dm, cf, 40_000, 12);
        prop_assume!(p.is_some());
        let p = p.unwrap();
        let eq = homogeneous_price_equilibrium(&p);
        prop_assume!(eq.is_ok());
        let eq = eq.unwrap();
        let w = PriceVector::zeros(p.m);
        let built = greedy_equilibrium(&p, &w, LinkMode::Fresh).unwrap();
        prop_assert_eq!(built.k, eq.k_star);
        let wb = expected_welfare(&p, &built.network, &w);
        prop_assert!(
            close_rel(wb.total, eq.welfare, 1e-9),
            "closed form {} vs mechanical {}", eq.welfare, wb.total
        );
        // equal degrees everywhere at zero prices
        prop_assert!(built.degrees.iter().all(|&(_, d)| d == eq.degree));
        prop_assert_eq!(built.network.link_count(), eq.links);
    }

    /// The planner never loses to the equilibrium, and the stability ratio
    /// hits one exactly when the two closed forms coincide.
    #[test]
    fn planner_dominates_equilibrium(
        (mu, s2, dm, cf) in sym_scalars(),
    ) {
        let p = sym_params(mu, s2, dm, cf, 40_000, 12);
        prop_assume!(p.is_some());
        let p = p.unwrap();
        let eq = homogeneous_price_equilibrium(&p);
        prop_assume!(eq.is_ok());
        let eq = eq.unwrap();
        let opt = planner_optimum(&p).unwrap();
        prop_assert!(eq.k_star <= opt.k_opt, "k* {} > k_opt {}", eq.k_star, opt.k_opt);
        prop_assert!(opt.welfare >= eq.welfare - 1e-9 * opt.welfare.abs().max(1.0));
        let pos = price_of_stability(&p).unwrap();
        prop_assert!(pos <= 1.0 + 1e-12, "ratio {}", pos);
        // the ratio hits one exactly when the welfare gap vanishes
        let welfare_equal = (opt.welfare - eq.welfare).abs() <= 1e-9 * opt.welfare;
        let ratio_one = pos >= 1.0 - 1e-9;
        prop_assert_eq!(welfare_equal, ratio_one);
    }

    /// Likelihoods are probabilities and sum to the active count under any
    /// admissible prices with equal means.
    #[test]
    fn likelihoods_sum_to_active_count(
        (mu, s2, dm, cf) in sym_scalars(),
        fracs in prop::collection::vec(0.0f64..0.95, 8),
    ) {
        let p = sym_params(mu, s2, dm, cf, 500, 8);
        prop_assume!(p.is_some());
        let p = p.unwrap();
        let bound = p.price_bound(0).max(0.0);
        let w = PriceVector::new(fracs.iter().map(|f| f * bound).collect()).unwrap();
        let k = active_supplier_count(&p, &w).unwrap().k_star;
        let a = activation_likelihoods(&p, &w).unwrap();
        prop_assert!(a.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        let total: f64 = a.iter().sum();
        prop_assert!((total - k as f64).abs() < 1e-9, "sum {} vs k {}", total, k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Greedy output always satisfies the counting and degree formulas and
    /// the characterized check. The exhaustive oracle can still refute it,
    /// but only through one deviation family: the sole retailer of a
    /// degree-one supplier abandons it, the active count drops, and every
    /// surviving margin rises. Any violation outside that family is a bug.
    #[test]
    fn greedy_violations_confined_to_sole_retailer_drops(
        (mu, s2, dm, cf) in sym_scalars(),
        m in 2usize..=6,
        fracs in prop::collection::vec(0.0f64..0.95, 6),
    ) {
        let p = sym_params(mu, s2, dm, cf, 100, m);
        prop_assume!(p.is_some());
        let p = p.unwrap();
        let bound = p.price_bound(0).max(0.0);
        let w = PriceVector::new(fracs[..m].iter().map(|f| f * bound).collect()).unwrap();
        let built = greedy_equilibrium(&p, &w, LinkMode::Fresh);
        prop_assume!(built.is_ok());
        let built = built.unwrap();
        prop_assert!(built.steps <= p.n * p.m + 2 * p.m);

        let characterized =
            verify_retailer_nash(&p, &built.network, &w, VerifyMode::Characterized).unwrap();
        prop_assert!(characterized.certified, "violations: {:?}", characterized.violations);

        let exhaustive = verify_retailer_nash(&p, &built.network, &w, VerifyMode::Exhaustive).unwrap();
        for v in &exhaustive.violations {
            match v {
                Violation::RetailerDeviation { retailer, best_links, .. } => {
                    let cur = built.network.retailer_links(*retailer);
                    prop_assert_eq!(cur.len(), 1, "deviator must hold a single link");
                    prop_assert_eq!(
                        built.network.supplier_degree(cur[0]), 1,
                        "deviator must be its supplier's only retailer"
                    );
                    prop_assert!(
                        !best_links.contains(&cur[0]),
                        "the improving move must abandon the current supplier"
                    );
                }
                other => prop_assert!(false, "unexpected violation kind: {:?}", other),
            }
        }

        let ac = active_supplier_count(&p, &w).unwrap();
        prop_assert_eq!(built.k, ac.k_star);
        let expect = equilibrium_degrees(&p, &w, built.k).unwrap();
        prop_assert_eq!(built.degrees.clone(), expect);
        // selection keeps the key-ordered active set
        prop_assert!(selection_filter(&p, &built.network, &w));
    }

    /// The structured fast path agrees with subset enumeration on optimal
    /// sets of every size, on instances with one mean-improved supplier.
    #[test]
    fn structured_sets_match_enumeration(
        (mu, s2, dm, cf) in sym_scalars(),
        shift in 0.02f64..0.8,
        m in 2usize..=9,
        fracs in prop::collection::vec(0.0f64..0.9, 9),
    ) {
        let p0 = sym_params(mu, s2, dm, cf, 100, m);
        prop_assume!(p0.is_some());
        let mut p = p0.unwrap();
        p.mu[0] = mu + shift;
        let bounds: Vec<f64> = (0..m).map(|j| p.price_bound(j).max(0.0)).collect();
        let w = PriceVector::new(
            fracs[..m].iter().zip(&bounds).map(|(f, b)| f * b).collect(),
        ).unwrap();

        let ke = k_max_with(&p, &w, SetSearch::Exhaustive).unwrap();
        let ks = k_max_with(&p, &w, SetSearch::Structured).unwrap();
        prop_assert_eq!(ke, ks, "k_max exhaustive {} vs structured {}", ke, ks);

        for k in 1..=m {
            let ex = best_supplier_sets_with(&p, &w, k, SetSearch::Exhaustive).unwrap();
            let st = best_supplier_sets_with(&p, &w, k, SetSearch::Structured).unwrap();
            prop_assert!(!st.truncated);
            prop_assert_eq!(ex.count, st.count, "set counts at k = {}", k);
            prop_assert_eq!(ex.sets.clone(), st.sets.clone(), "sets at k = {}", k);
            if !ex.sets.is_empty() {
                prop_assert!(
                    close_rel(ex.aggregate, st.aggregate, 1e-9),
                    "aggregate at k = {}: {} vs {}", k, ex.aggregate, st.aggregate
                );
            }
        }
    }

    /// Improvement deltas: components always sum to the stated totals.
    #[test]
    fn improvement_deltas_are_consistent(
        (mu, s2, dm, cf) in sym_scalars(),
        shift in 0.02f64..0.6,
        gap_frac in 0.05f64..0.95,
    ) {
        // variance improvement: total is half the gap
        let pv = sym_params(mu, s2.max(0.05), dm, cf, 40_000, 12);
        prop_assume!(pv.is_some());
        let mut pv = pv.unwrap();
        let gap = gap_frac * pv.sigma2[0];
        pv.sigma2[0] -= gap;
        let dv = hetero_variance_welfare_delta(&pv).unwrap();
        prop_assert!(close_rel(dv.supplier, gap, 1e-12));
        prop_assert_eq!(dv.retailer, 0.0);
        prop_assert!(close_rel(dv.consumer, -0.5 * gap, 1e-12));
        prop_assert!(close_rel(dv.total, 0.5 * gap, 1e-12));
        prop_assert!((dv.supplier + dv.retailer + dv.consumer - dv.total).abs() < 1e-12);

        // mean improvement: component sum equals the stated total formula
        let pm0 = sym_params(mu, s2, dm, cf, 40_000, 14);
        prop_assume!(pm0.is_some());
        let mut pm = pm0.unwrap();
        pm.mu[0] = mu + shift;
        let base = GameParams::homogeneous(pm.n, pm.m, pm.s_max, pm.delta, mu, s2, pm.c);
        let k_star = match homogeneous_price_equilibrium(&base) {
            Ok(eq) => eq.k_star,
            Err(_) => return Ok(()),
        };
        let k_big = k_max(&pm, &PriceVector::zeros(pm.m)).unwrap();
        let dm_ = hetero_mean_welfare_delta(&pm).unwrap();
        // supplier and consumer pieces collapse to shift (delta - mu q - shift/2)
        let q = (k_big + 1 - k_star) as f64;
        let stated = shift * (pm.delta - mu * q - 0.5 * shift);
        let direct = shift * (pm.delta - mu * (k_big + 1) as f64 - shift)
            + shift * (mu * k_star as f64 + 0.5 * shift);
        prop_assert!(close_rel(dm_.total, direct, 1e-9), "{} vs {}", dm_.total, direct);
        prop_assert!(close_rel(stated, direct, 1e-9), "stated {} vs direct {}", stated, direct);
        prop_assert!((dm_.supplier + dm_.retailer + dm_.consumer - dm_.total).abs() < 1e-12);
    }

    /// The first-principles draw evaluator and the payoff algebra agree on
    /// every welfare component for arbitrary networks, prices, and draws.
    #[test]
    fn draw_evaluator_matches_payoff_algebra(
        raw_links in prop::collection::vec((0usize..5, 0usize..4), 0..14),
        wf in prop::collection::vec(0.0f64..3.0, 4),
        sf in prop::collection::vec(0.0f64..4.0, 4),
    ) {
        let p = GameParams::homogeneous(5, 4, 4.0, 18.0, 2.0, 1.0, 0.5);
        let links: Vec<(usize, usize)> =
            raw_links.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let g = Network::new(5, 4, &links).unwrap();
        let w = PriceVector::new(wf).unwrap();
        let s = SupplyRealization::new(sf);
        let a = evaluate_draw(&p, &g, &w, &s);
        let b = realized_welfare(&p, &g, &w, &s);
        prop_assert!((a.retailer - b.retailer).abs() < 1e-9);
        prop_assert!((a.supplier - b.supplier).abs() < 1e-9);
        prop_assert!((a.consumer - b.consumer).abs() < 1e-9);
        prop_assert!((a.total - b.total).abs() < 1e-9);
    }

    /// Consumer surplus depends on the active set only, never on prices, in
    /// both the expected and the realized accounting.
    #[test]
    fn consumer_surplus_ignores_prices(
        raw_links in prop::collection::vec((0usize..5, 0usize..4), 0..14),
        wf1 in prop::collection::vec(0.0f64..3.0, 4),
        wf2 in prop::collection::vec(0.0f64..3.0, 4),
        sf in prop::collection::vec(0.0f64..4.0, 4),
    ) {
        let p = GameParams::homogeneous(5, 4, 4.0, 18.0, 2.0, 1.0, 0.5);
        let links: Vec<(usize, usize)> =
            raw_links.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let g = Network::new(5, 4, &links).unwrap();
        let w1 = PriceVector::new(wf1).unwrap();
        let w2 = PriceVector::new(wf2).unwrap();
        let e1 = expected_welfare(&p, &g, &w1);
        let e2 = expected_welfare(&p, &g, &w2);
        prop_assert_eq!(e1.consumer, e2.consumer);
        let s = SupplyRealization::new(sf);
        let r1 = realized_welfare(&p, &g, &w1, &s);
        let r2 = realized_welfare(&p, &g, &w2, &s);
        prop_assert_eq!(r1.consumer, r2.consumer);
    }

    /// Expected retailer payoffs decompose the expected retailer welfare
    /// component: summing the per-retailer closed form over all retailers
    /// reproduces the aggregate.
    #[test]
    fn retailer_payoffs_decompose_welfare(
        raw_links in prop::collection::vec((0usize..6, 0usize..4), 0..16),
        wf in prop::collection::vec(0.0f64..3.0, 4),
    ) {
        let p = GameParams::homogeneous(6, 4, 4.0, 18.0, 2.0, 1.0, 0.5);
        let links: Vec<(usize, usize)> =
            raw_links.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let g = Network::new(6, 4, &links).unwrap();
        let w = PriceVector::new(wf).unwrap();
        let total: f64 = (0..6).map(|i| retailer_expected_payoff(&p, &g, &w, i)).sum();
        let wb = expected_welfare(&p, &g, &w);
        prop_assert!((total - wb.retailer).abs() < 1e-9, "{} vs {}", total, wb.retailer);
    }
}
