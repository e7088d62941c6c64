mod common;

use owgp::lang::{den_prob, eval_expr, DenotingExpr, Term};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn evaluator_agrees_with_truth_table_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    while checked < 1000 {
        let n = rng.random_range(1..=4);
        let (b, objs, table) = common::random_belief(&mut rng, n);
        let depth = rng.random_range(1..=4);
        let e = common::random_expr(&mut rng, depth, &mut Vec::new(), &objs, table);
        if common::atom_count(&e, &b) > 14 {
            continue;
        }
        let got = eval_expr(&e, &b).unwrap();
        let oracle = common::brute_force_prob(&e, &b);
        assert!((got - oracle).abs() < 1e-12, "{e}: {got} vs {oracle}");
        checked += 1;
    }
}

#[test]
fn leaf_probabilities_match_sampling() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (b, objs, table) = common::random_belief(&mut rng, 4);
    let samples = 1_000_000;
    for &o in &objs {
        for rel in common::RELS {
            let args = if rel == "on" { vec![o, table] } else { vec![o] };
            let exact = b.prob_ground_relation(rel, &args).unwrap();
            let (mean, se) = common::monte_carlo_leaf(&b, rel, &args, samples, &mut rng);
            let tol = 3.0 * se.max(1.0 / samples as f64);
            assert!((exact - mean).abs() <= tol, "{rel}({o}): exact {exact}, sampled {mean} +- {se}");
        }
    }
}

#[test]
fn den_prob_is_the_substituted_body() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (b, objs, table) = common::random_belief(&mut rng, 3);
    let body = DenotingExpr::and(
        DenotingExpr::rel("can", vec![Term::var("x")]),
        DenotingExpr::rel("on", vec![Term::var("x"), Term::Const(table)]),
    );
    let lam = DenotingExpr::Lambda("x".into(), Box::new(body));
    for &o in &objs {
        let direct = b.prob_ground_relation("can", &[o]).unwrap() * b.prob_ground_relation("on", &[o, table]).unwrap();
        assert!((den_prob(&lam, o, &b).unwrap() - direct).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn evaluation_stays_in_the_unit_interval(seed in any::<u64>(), depth in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=4);
        let (b, objs, table) = common::random_belief(&mut rng, n);
        let e = common::random_expr(&mut rng, depth, &mut Vec::new(), &objs, table);
        let p = eval_expr(&e, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn conjunction_never_exceeds_either_side(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (b, objs, table) = common::random_belief(&mut rng, 3);
        let x = common::random_expr(&mut rng, 2, &mut Vec::new(), &objs, table);
        let y = common::random_expr(&mut rng, 2, &mut Vec::new(), &objs, table);
        let (px, py) = (eval_expr(&x, &b).unwrap(), eval_expr(&y, &b).unwrap());
        let pand = eval_expr(&DenotingExpr::and(x.clone(), y.clone()), &b).unwrap();
        let por = eval_expr(&DenotingExpr::or(x, y), &b).unwrap();
        prop_assert!(pand <= px.min(py) + 1e-12);
        prop_assert!(por + 1e-12 >= px.max(py));
    }
}
