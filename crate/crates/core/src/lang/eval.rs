//! Probabilistic evaluation of denoting expressions and goal fluents.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::ast::{substitute, DenotingExpr, Fluent, Phi, QuantityKind, Substitution, Term};
use crate::belief::{
    exists_in_region_prob, holds_cont_fluent, Anchor, BeliefError, BeliefQuantity, BeliefState,
    PropertyDim,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error("free variable `{0}`")]
    FreeVariable(String),
    #[error("expected a lambda expression")]
    NotLambda,
    #[error("lambda is only allowed at the root of an expression")]
    NestedLambda,
    #[error("unsupported expression shape: {0}")]
    UnsupportedShape(String),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// Probability that a closed expression body is true, assuming every
/// relation instance is independent.
pub fn eval_expr(expr: &DenotingExpr, belief: &BeliefState) -> Result<f64> {
    match expr {
        DenotingExpr::Rel { name, args } => {
            let mut anchors = Vec::with_capacity(args.len());
            for t in args {
                match t {
                    Term::Const(a) => anchors.push(*a),
                    Term::Var(v) => return Err(EvalError::FreeVariable(v.clone())),
                    // nothing is known about an undiscovered object
                    Term::Skolem(_) => return Ok(0.0),
                }
            }
            Ok(belief.prob_ground_relation(name, &anchors)?)
        }
        DenotingExpr::And(a, b) => Ok(eval_expr(a, belief)? * eval_expr(b, belief)?),
        DenotingExpr::Or(a, b) => {
            let (pa, pb) = (eval_expr(a, belief)?, eval_expr(b, belief)?);
            Ok(pa + pb - pa * pb)
        }
        DenotingExpr::Exists(v, body) => {
            let mut acc = 0.0;
            for o in belief.object_anchors() {
                let p = eval_expr(&substitute(body, &Substitution::single(v, Term::Const(o))), belief)?;
                acc = acc + p - acc * p;
            }
            Ok(acc)
        }
        DenotingExpr::Lambda(..) => Err(EvalError::NestedLambda),
    }
}

/// Probability that `obj` can be denoted by the lambda expression `expr`.
pub fn den_prob(expr: &DenotingExpr, obj: Anchor, belief: &BeliefState) -> Result<f64> {
    let (v, body) = expr.as_lambda().ok_or(EvalError::NotLambda)?;
    belief.object(obj)?;
    eval_expr(&substitute(body, &Substitution::single(v, Term::Const(obj))), belief)
}

/// `(dimension, relation)` pairs worth observing to decide a denotation.
pub type PropSet = BTreeSet<(PropertyDim, String)>;

/// Properties mentioned by a lambda whose body is a conjunction of unary
/// relations on the lambda variable.
pub fn props_for(expr: &DenotingExpr, belief: &BeliefState) -> Result<PropSet> {
    let (v, body) = expr.as_lambda().ok_or(EvalError::NotLambda)?;
    let mut out = PropSet::new();
    collect_props(v, body, belief, &mut out)?;
    let dims: BTreeSet<_> = out.iter().map(|(d, _)| *d).collect();
    if dims.len() != out.len() {
        return Err(EvalError::UnsupportedShape(
            "two relations on one property dimension".into(),
        ));
    }
    Ok(out)
}

fn collect_props(v: &str, e: &DenotingExpr, belief: &BeliefState, out: &mut PropSet) -> Result<()> {
    match e {
        DenotingExpr::And(a, b) => {
            collect_props(v, a, belief, out)?;
            collect_props(v, b, belief, out)
        }
        DenotingExpr::Rel { name, args } if args.len() == 1 && args[0] == Term::var(v) => {
            let kind = belief
                .relations
                .lookup(name)
                .ok_or_else(|| BeliefError::UnknownRelation(name.clone()))?;
            match kind.dim() {
                PropertyDim::Existence => Ok(()),
                dim @ (PropertyDim::Type | PropertyDim::Color | PropertyDim::Weight) => {
                    out.insert((dim, name.clone()));
                    Ok(())
                }
                PropertyDim::Pose => Err(EvalError::UnsupportedShape(format!("spatial relation `{name}`"))),
            }
        }
        other => Err(EvalError::UnsupportedShape(other.to_string())),
    }
}

/// Whether `term` is a rigid designator: an anchor or named constant.
pub fn krd(term: &Term) -> bool {
    matches!(term, Term::Const(_))
}

/// `P_b(φ)`.
pub fn phi_prob(phi: &Phi, belief: &BeliefState) -> Result<f64> {
    match phi {
        Phi::Den(e, Term::Const(a)) => den_prob(e, *a, belief),
        Phi::Den(_, Term::Skolem(_)) => Ok(0.0),
        Phi::Den(_, Term::Var(v)) => Err(EvalError::FreeVariable(v.clone())),
        Phi::Rel(name, args) => eval_expr(
            &DenotingExpr::Rel {
                name: name.clone(),
                args: args.clone(),
            },
            belief,
        ),
    }
}

/// `B_b(φ, p)`: the agent believes φ with probability at least `p`.
pub fn holds_bool_fluent(belief: &BeliefState, phi: &Phi, p: f64) -> Result<bool> {
    Ok(phi_prob(phi, belief)? >= p)
}

fn region_of(t: &Term) -> Result<Anchor> {
    match t {
        Term::Const(a) => Ok(*a),
        Term::Var(v) => Err(EvalError::FreeVariable(v.clone())),
        Term::Skolem(id) => Err(EvalError::FreeVariable(format!("Sk{id}"))),
    }
}

/// Truth of a ground goal fluent in `belief`.
pub fn holds(fluent: &Fluent, belief: &BeliefState) -> Result<bool> {
    match fluent {
        Fluent::BBool { phi, p } => holds_bool_fluent(belief, phi, *p),
        Fluent::Krd(t) => Ok(krd(t)),
        Fluent::BContents { region, p } => {
            let r = region_of(region)?;
            belief.region(r)?;
            Ok(belief.confidence(r) >= *p)
        }
        Fluent::ExistsIn { region, p, .. } => {
            Ok(exists_in_region_prob(belief, region_of(region)?)? >= *p)
        }
        Fluent::BCont {
            quantity,
            term,
            mu,
            sigma,
            delta,
            p,
        } => {
            let a = region_of(term)?;
            let q = match quantity {
                QuantityKind::Pose => BeliefQuantity::Pose(a),
                QuantityKind::Color => BeliefQuantity::Color(a),
                QuantityKind::Weight => BeliefQuantity::Weight(a),
            };
            let n = mu.len();
            let sig = DMatrix::from_fn(n, n, |i, j| sigma.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0));
            Ok(holds_cont_fluent(
                belief,
                q,
                &DVector::from_column_slice(mu),
                &sig,
                &DVector::from_column_slice(delta),
                *p,
            )?)
        }
    }
}
