//! Independent oracles shared by the property suites and the acceptance run.
#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use owgp::belief::{
    Anchor, BeliefState, ColorDistribution, PoseDistribution, RelationSet, TypeDistribution, WeightDistribution,
};
use owgp::cli::Scenario;
use owgp::lang::{DenotingExpr, Term};
use owgp::planner::strips::{GroundAction, StripsProblem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::load(&scenario_path(name)).expect("bundled scenario loads")
}

// ---------------------------------------------------------------- normals

/// Standard normal mass over [a, b] by composite Simpson quadrature.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    let (a, b) = (a.max(-40.0), b.min(40.0));
    if b <= a {
        return 0.0;
    }
    let n = 400_000;
    let h = (b - a) / n as f64;
    let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// P(X >= threshold) for ln X ~ N(mu, sigma^2).
pub fn lognormal_above(mu: f64, sigma: f64, threshold: f64) -> f64 {
    normal_mass((threshold.ln() - mu) / sigma, f64::INFINITY)
}

// ---------------------------------------------------------------- Kalman

/// One scalar Kalman step: (posterior mean, posterior variance).
pub fn scalar_kalman(mean: f64, var: f64, obs: f64, obs_var: f64) -> (f64, f64) {
    let k = var / (var + obs_var);
    (mean + k * (obs - mean), var * obs_var / (var + obs_var))
}

// ---------------------------------------------------------------- beliefs

pub const TYPES: [&str; 3] = ["can", "box", "bottle"];
pub const RELS: [&str; 6] = ["can", "box", "green", "red", "heavy", "on"];

/// A belief over `n` random objects and one region, `table`.
pub fn random_belief(rng: &mut ChaCha8Rng, n: usize) -> (BeliefState, Vec<Anchor>, Anchor) {
    let rel = RelationSet::with_defaults(TYPES.iter().map(|s| s.to_string()).collect());
    let mut b = BeliefState::new(Arc::new(rel));
    let mut objs = Vec::new();
    for _ in 0..n {
        let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..1.0)).collect();
        let z: f64 = raw.iter().sum();
        let probs = TYPES.iter().zip(&raw).map(|(t, p)| (t.to_string(), p / z)).collect();
        let pose = PoseDistribution::new(
            [rng.random_range(0.6..1.4), rng.random_range(-0.4..0.4), 0.75, 0.0],
            [rng.random_range(0.02..0.3), rng.random_range(0.02..0.3), 0.01, 0.1],
        );
        let color = ColorDistribution::new(
            [rng.random_range(0.0..1.0), rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)],
            [rng.random_range(0.01..0.2), rng.random_range(0.01..0.3), rng.random_range(0.01..0.3)],
        );
        let weight = WeightDistribution::from_grams(rng.random_range(100.0..900.0), rng.random_range(0.05..1.0));
        let dw = if rng.random_bool(0.5) { 1.0 } else { rng.random_range(0.5..1.0) };
        objs.push(b.add_object(None, TypeDistribution { probs }, pose, color, weight, dw));
    }
    let table = b.add_region(Some("table"), [0.8, -0.3, 0.0], [1.3, 0.3, 0.75], 0.0, 0.0);
    (b, objs, table)
}

// ---------------------------------------------------------------- expressions

/// Random closed expression of depth at most `depth` over `objs`.
pub fn random_expr(rng: &mut ChaCha8Rng, depth: usize, scope: &mut Vec<String>, objs: &[Anchor], table: Anchor) -> DenotingExpr {
    if depth == 0 || rng.random_bool(0.3) {
        let name = RELS[rng.random_range(0..RELS.len())];
        let subject = if !scope.is_empty() && rng.random_bool(0.7) {
            Term::Var(scope[rng.random_range(0..scope.len())].clone())
        } else {
            Term::Const(objs[rng.random_range(0..objs.len())])
        };
        let mut args = vec![subject];
        if name == "on" {
            args.push(Term::Const(table));
        }
        return DenotingExpr::rel(name, args);
    }
    match rng.random_range(0..3) {
        0 => DenotingExpr::and(
            random_expr(rng, depth - 1, scope, objs, table),
            random_expr(rng, depth - 1, scope, objs, table),
        ),
        1 => DenotingExpr::or(
            random_expr(rng, depth - 1, scope, objs, table),
            random_expr(rng, depth - 1, scope, objs, table),
        ),
        _ => {
            let v = format!("v{}", scope.len());
            scope.push(v.clone());
            let body = random_expr(rng, depth - 1, scope, objs, table);
            scope.pop();
            DenotingExpr::exists(&v, body)
        }
    }
}

enum Formula {
    Atom(usize),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

fn resolve(t: &Term, env: &[(String, Anchor)]) -> Anchor {
    match t {
        Term::Const(a) => *a,
        Term::Var(v) => env.iter().rev().find(|(n, _)| n == v).expect("closed expression").1,
        Term::Skolem(_) => panic!("no placeholders in generated expressions"),
    }
}

/// Every relation occurrence (after expanding quantifiers over the objects)
/// becomes its own independent atom.
fn expand(e: &DenotingExpr, b: &BeliefState, env: &mut Vec<(String, Anchor)>, atoms: &mut Vec<f64>) -> Formula {
    match e {
        DenotingExpr::Rel { name, args } => {
            let anchors: Vec<Anchor> = args.iter().map(|t| resolve(t, env)).collect();
            atoms.push(b.prob_ground_relation(name, &anchors).expect("declared relation"));
            Formula::Atom(atoms.len() - 1)
        }
        DenotingExpr::And(x, y) => Formula::And(Box::new(expand(x, b, env, atoms)), Box::new(expand(y, b, env, atoms))),
        DenotingExpr::Or(x, y) => Formula::Or(Box::new(expand(x, b, env, atoms)), Box::new(expand(y, b, env, atoms))),
        DenotingExpr::Exists(v, body) => {
            let objs: Vec<Anchor> = b.object_anchors().collect();
            let mut acc: Option<Formula> = None;
            for o in objs {
                env.push((v.clone(), o));
                let f = expand(body, b, env, atoms);
                env.pop();
                acc = Some(match acc {
                    None => f,
                    Some(a) => Formula::Or(Box::new(a), Box::new(f)),
                });
            }
            acc.expect("at least one object")
        }
        DenotingExpr::Lambda(..) => panic!("closed bodies only"),
    }
}

fn truth(f: &Formula, world: u64) -> bool {
    match f {
        Formula::Atom(i) => world >> i & 1 == 1,
        Formula::And(a, b) => truth(a, world) && truth(b, world),
        Formula::Or(a, b) => truth(a, world) || truth(b, world),
    }
}

/// Number of independent atoms `brute_force_prob` would enumerate.
pub fn atom_count(e: &DenotingExpr, b: &BeliefState) -> usize {
    let mut atoms = Vec::new();
    expand(e, b, &mut Vec::new(), &mut atoms);
    atoms.len()
}

/// Sums the probability of every truth assignment to the atoms that makes
/// the expression true.
pub fn brute_force_prob(e: &DenotingExpr, b: &BeliefState) -> f64 {
    let mut atoms = Vec::new();
    let f = expand(e, b, &mut Vec::new(), &mut atoms);
    assert!(atoms.len() <= 20, "too many atoms to enumerate");
    let mut total = 0.0;
    for world in 0..(1u64 << atoms.len()) {
        if truth(&f, world) {
            let mut w = 1.0;
            for (i, p) in atoms.iter().enumerate() {
                w *= if world >> i & 1 == 1 { *p } else { 1.0 - p };
            }
            total += w;
        }
    }
    total
}

// ---------------------------------------------------------------- Monte Carlo

fn unit_truncated(rng: &mut ChaCha8Rng, mu: f64, sd: f64) -> f64 {
    if sd <= 0.0 {
        return mu;
    }
    let n = Normal::new(mu, sd).unwrap();
    loop {
        let x = n.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
}

/// Sampled estimate of a ground relation leaf: (mean, standard error).
pub fn monte_carlo_leaf(b: &BeliefState, rel: &str, args: &[Anchor], n: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let o = b.object(args[0]).unwrap();
    let rs = &b.relations;
    let mut hits = 0usize;
    for _ in 0..n {
        if !rng.random_bool(o.detection_weight) {
            continue;
        }
        let ok = match rel {
            t if rs.types.iter().any(|x| x == t) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut drawn = None;
                for (ty, p) in &o.type_d.probs {
                    acc += p;
                    if u < acc {
                        drawn = Some(ty.as_str());
                        break;
                    }
                }
                drawn.unwrap_or_else(|| o.type_d.probs.keys().last().unwrap()) == t
            }
            c if rs.colors.contains_key(c) => {
                let m = &o.color_d.mean;
                let cov = &o.color_d.cov;
                let h = Normal::new(m[0], cov[(0, 0)].sqrt()).unwrap().sample(rng).rem_euclid(1.0);
                let s = unit_truncated(rng, m[1], cov[(1, 1)].sqrt());
                let v = unit_truncated(rng, m[2], cov[(2, 2)].sqrt());
                rs.colors[c].contains([h, s, v])
            }
            w if rs.weights.contains_key(w) => {
                let iv = &rs.weights[w];
                let g = Normal::new(o.weight_d.mu, o.weight_d.sigma).unwrap().sample(rng).exp();
                g >= iv.min_grams && g <= iv.max_grams
            }
            "on" | "in" => {
                let r = b.region(args[1]).unwrap();
                let m = &o.pose_d.mean;
                let cov = &o.pose_d.cov;
                let x = Normal::new(m[0], cov[(0, 0)].sqrt()).unwrap().sample(rng);
                let y = Normal::new(m[1], cov[(1, 1)].sqrt()).unwrap().sample(rng);
                r.contains_xy(x, y)
            }
            other => panic!("no sampler for {other}"),
        };
        hits += ok as usize;
    }
    let p = hits as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

// ---------------------------------------------------------------- STRIPS

/// Random ground domain over at most 10 facts (ground atoms of up to four
/// objects) with at most six actions and dyadic costs, so sums are exact.
pub fn random_domain(rng: &mut ChaCha8Rng) -> StripsProblem {
    let facts = rng.random_range(4..=10u32);
    let pick = |k: usize, rng: &mut ChaCha8Rng| -> std::collections::BTreeSet<u32> {
        (0..k).map(|_| rng.random_range(0..facts)).collect()
    };
    let n_actions = rng.random_range(2..=6);
    let actions = (0..n_actions)
        .map(|i| {
            let pre = pick(rng.random_range(0..=2), rng);
            let add = pick(rng.random_range(1..=2), rng);
            let del = pick(rng.random_range(0..=2), rng);
            GroundAction {
                name: format!("a{i}"),
                pre,
                add,
                del,
                cost: rng.random_range(1..=8) as f64 / 4.0,
            }
        })
        .collect();
    let init = pick(rng.random_range(1..=3), rng);
    let goal = pick(rng.random_range(1..=3), rng);
    StripsProblem { init, goal, actions }
}

fn mask(s: &std::collections::BTreeSet<u32>) -> u32 {
    s.iter().fold(0, |m, f| m | 1 << f)
}

/// Minimum cost over every action sequence of length at most `max_len`
/// whose forward execution reaches the goal.
pub fn enumerate_min_cost(p: &StripsProblem, max_len: usize) -> Option<f64> {
    let acts: Vec<(u32, u32, u32, f64)> =
        p.actions.iter().map(|a| (mask(&a.pre), mask(&a.add), mask(&a.del), a.cost)).collect();
    let goal = mask(&p.goal);
    fn go(state: u32, cost: f64, left: usize, acts: &[(u32, u32, u32, f64)], goal: u32, best: &mut Option<f64>) {
        if state & goal == goal {
            *best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
        if left == 0 {
            return;
        }
        for &(pre, add, del, c) in acts {
            if state & pre == pre {
                go((state & !del) | add, cost + c, left - 1, acts, goal, best);
            }
        }
    }
    let mut best = None;
    go(mask(&p.init), 0.0, max_len, &acts, goal, &mut best);
    best
}
