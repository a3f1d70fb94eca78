//! Library results against brute-force enumeration of the draw space.

mod common;

use common::{oracle_moments, oracle_weights, proportional_allocation, random_pool, rng, Design, DESIGNS};
use rand::Rng;
use sis_monitor::{
    allocate_proportional, build_proposal, draw_plan, exact_estimator_mean, stratum_diagnostics, theorem_report,
    DesignKind, DesignSpec, Exact, Pool, Proposal, Scalar, ScoreTransform, Stratification,
};

fn kind(d: Design) -> DesignKind {
    match d {
        Design::Rs => DesignKind::Random,
        Design::Srs => DesignKind::Stratified,
        Design::Is => DesignKind::Importance,
        Design::Sis => DesignKind::StratifiedImportance,
    }
}

fn library_moments<T: Scalar>(design: Design, pool: &Pool, strat: &Stratification, alpha: f64, n: usize) -> (T, T) {
    let prop: Proposal<T> = build_proposal(pool, &ScoreTransform::default(), alpha).unwrap();
    let spec = DesignSpec::new(kind(design), n, Some(strat), Some(&prop));
    let mean = exact_estimator_mean(&spec, pool).unwrap();
    let diag = stratum_diagnostics(pool, strat, &prop).unwrap();
    let alloc = allocate_proportional(strat, n).unwrap();
    let rep = theorem_report(&diag, &alloc, n).unwrap();
    let var = match design {
        Design::Rs => rep.var_rs,
        Design::Srs => rep.var_srs,
        Design::Is => rep.var_is,
        Design::Sis => rep.var_sis,
    };
    (mean, var)
}

#[test]
fn t1_hand_values() {
    let pool = common::t1(true);
    let strat = common::t1_strata();
    let a = strat.assignment().to_vec();

    let w = oracle_weights::<Exact>(Design::Sis, &pool, &a, 1.0);
    assert_eq!(w[0], Exact::new(7, 18));
    assert_eq!(w[4], Exact::new(3, 4));

    let sis = oracle_moments::<Exact>(Design::Sis, &pool, &a, 1.0, 3);
    assert_eq!(sis.mean, Exact::new(1, 3));
    assert_eq!(sis.var, Exact::new(14, 648));
    let srs = oracle_moments::<Exact>(Design::Srs, &pool, &a, 1.0, 3);
    assert_eq!(srs.var, Exact::new(5, 72));

    for d in DESIGNS {
        let expected = oracle_moments::<Exact>(d, &pool, &a, 1.0, 3);
        let (mean, var) = library_moments::<Exact>(d, &pool, &strat, 1.0, 3);
        assert_eq!(mean, expected.mean, "{d:?}");
        assert_eq!(var, expected.var, "{d:?}");
    }
}

#[test]
fn exact_moments_match_enumeration_on_random_pools() {
    let mut r = rng(2024);
    for case in 0..40 {
        let size = r.gen_range(2..=8);
        let p = r.gen_range(1..=size.min(3));
        let n = r.gen_range(p..=3);
        let (pool, strat) = random_pool(&mut r, size, p);
        let alpha = [0.0, 1.0, 2.0][case % 3];
        let eps = common::true_rate::<Exact>(&pool);
        for d in DESIGNS {
            let expected = oracle_moments::<Exact>(d, &pool, strat.assignment(), alpha, n);
            assert_eq!(expected.mean, eps, "oracle self-check, case {case} {d:?}");
            let (mean, var) = library_moments::<Exact>(d, &pool, &strat, alpha, n);
            assert_eq!(mean, expected.mean, "case {case} {d:?} alpha {alpha}");
            assert_eq!(var, expected.var, "case {case} {d:?} alpha {alpha}");
        }
    }
}

#[test]
fn float_moments_match_enumeration_for_fractional_alpha() {
    let mut r = rng(77);
    for case in 0..30 {
        let size = r.gen_range(2..=8);
        let p = r.gen_range(1..=size.min(3));
        let n = r.gen_range(p..=3);
        let (pool, strat) = random_pool(&mut r, size, p);
        let alpha = [0.5, 1.5, 0.25][case % 3];
        for d in DESIGNS {
            let expected = oracle_moments::<f64>(d, &pool, strat.assignment(), alpha, n);
            let (mean, var) = library_moments::<f64>(d, &pool, &strat, alpha, n);
            assert!((mean - expected.mean).abs() <= 1e-12, "case {case} {d:?}");
            assert!((var - expected.var).abs() <= 1e-12, "case {case} {d:?}: {var} vs {}", expected.var);
        }
    }
}

#[test]
fn plan_weights_match_oracle_weights() {
    let mut r = rng(5);
    for case in 0..20 {
        let size = r.gen_range(3..=30);
        let p = r.gen_range(1..=size.min(4));
        let (pool, strat) = random_pool(&mut r, size, p);
        let alpha = [0.5, 1.0, 2.0, 0.0][case % 4];
        let prop: Proposal<f64> = build_proposal(&pool, &ScoreTransform::default(), alpha).unwrap();
        for d in DESIGNS {
            let w = oracle_weights::<f64>(d, &pool, strat.assignment(), alpha);
            let spec = DesignSpec::new(kind(d), 2 * p, Some(&strat), Some(&prop));
            let plan = draw_plan(&spec, &pool, case as u64).unwrap();
            for draw in &plan.draws {
                let pos = pool.position(draw.id).unwrap();
                assert!((draw.weight - w[pos]).abs() <= 1e-12 * w[pos].max(1.0), "case {case} {d:?}");
                if let Some(j) = draw.stratum {
                    assert_eq!(j, strat.stratum_of(pos));
                }
            }
        }
    }
}

#[test]
fn allocation_matches_reference_rule() {
    let mut r = rng(9);
    for _ in 0..500 {
        let p = r.gen_range(1..=6);
        let sizes: Vec<usize> = (0..p).map(|_| r.gen_range(1..=40)).collect();
        let n = r.gen_range(p..=60);
        let assignment: Vec<usize> = sizes.iter().enumerate().flat_map(|(j, &s)| std::iter::repeat_n(j, s)).collect();
        let strat = Stratification::from_assignment(assignment, (0..p).map(|j| j.to_string()).collect()).unwrap();
        let got = allocate_proportional(&strat, n).unwrap();
        assert_eq!(got.per_stratum, proportional_allocation(&sizes, n), "sizes {sizes:?} n {n}");
    }
}
