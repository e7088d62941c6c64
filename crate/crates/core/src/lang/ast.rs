use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::belief::Anchor;

/// Argument of a relation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(Anchor),
    /// Placeholder for an object that has not been discovered yet.
    Skolem(u32),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(name.to_string())
    }

    pub fn as_const(&self) -> Option<Anchor> {
        match self {
            Term::Const(a) => Some(*a),
            _ => None,
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(a) => write!(f, "{a}"),
            Term::Skolem(id) => write!(f, "Sk{id}"),
        }
    }
}

/// Indefinite description of objects by their properties.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DenotingExpr {
    Rel { name: String, args: Vec<Term> },
    And(Box<DenotingExpr>, Box<DenotingExpr>),
    Or(Box<DenotingExpr>, Box<DenotingExpr>),
    Exists(String, Box<DenotingExpr>),
    Lambda(String, Box<DenotingExpr>),
}

impl DenotingExpr {
    pub fn rel(name: &str, args: Vec<Term>) -> Self {
        DenotingExpr::Rel {
            name: name.to_lowercase(),
            args,
        }
    }

    pub fn and(a: DenotingExpr, b: DenotingExpr) -> Self {
        DenotingExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: DenotingExpr, b: DenotingExpr) -> Self {
        DenotingExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn exists(v: &str, body: DenotingExpr) -> Self {
        DenotingExpr::Exists(v.to_string(), Box::new(body))
    }

    pub fn lambda(v: &str, body: DenotingExpr) -> Self {
        DenotingExpr::Lambda(v.to_string(), Box::new(body))
    }

    pub fn as_lambda(&self) -> Option<(&str, &DenotingExpr)> {
        match self {
            DenotingExpr::Lambda(v, b) => Some((v, b)),
            _ => None,
        }
    }

    /// Variables occurring free.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            DenotingExpr::Rel { args, .. } => {
                for t in args {
                    if let Term::Var(v) = t {
                        if !bound.contains(v) {
                            out.insert(v.clone());
                        }
                    }
                }
            }
            DenotingExpr::And(a, b) | DenotingExpr::Or(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            DenotingExpr::Exists(v, e) | DenotingExpr::Lambda(v, e) => {
                bound.push(v.clone());
                e.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }
}

impl fmt::Display for DenotingExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DenotingExpr::Rel { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            DenotingExpr::And(a, b) => write!(f, "and({a}, {b})"),
            DenotingExpr::Or(a, b) => write!(f, "or({a}, {b})"),
            DenotingExpr::Exists(v, e) => write!(f, "exists({v}, {e})"),
            DenotingExpr::Lambda(v, e) => write!(f, "lambda {v}. {e}"),
        }
    }
}

/// Maps variable names to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    pub bindings: BTreeMap<String, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(var: &str, term: Term) -> Self {
        let mut s = Self::new();
        s.bindings.insert(var.to_string(), term);
        s
    }

    pub fn apply_term(&self, t: &Term) -> Term {
        match t {
            Term::Var(v) => self.bindings.get(v).cloned().unwrap_or_else(|| t.clone()),
            _ => t.clone(),
        }
    }
}

/// Replaces free occurrences of the substitution's variables.
pub fn substitute(expr: &DenotingExpr, sigma: &Substitution) -> DenotingExpr {
    if sigma.bindings.is_empty() {
        return expr.clone();
    }
    match expr {
        DenotingExpr::Rel { name, args } => DenotingExpr::Rel {
            name: name.clone(),
            args: args.iter().map(|t| sigma.apply_term(t)).collect(),
        },
        DenotingExpr::And(a, b) => DenotingExpr::and(substitute(a, sigma), substitute(b, sigma)),
        DenotingExpr::Or(a, b) => DenotingExpr::or(substitute(a, sigma), substitute(b, sigma)),
        DenotingExpr::Exists(v, e) | DenotingExpr::Lambda(v, e) => {
            let inner = if sigma.bindings.contains_key(v) {
                let mut s = sigma.clone();
                s.bindings.remove(v);
                substitute(e, &s)
            } else {
                substitute(e, sigma)
            };
            match expr {
                DenotingExpr::Exists(..) => DenotingExpr::exists(v, inner),
                _ => DenotingExpr::lambda(v, inner),
            }
        }
    }
}

/// Boolean random fluent inside a `B(·, p)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phi {
    Den(Arc<DenotingExpr>, Term),
    Rel(String, Vec<Term>),
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Den(e, t) => write!(f, "den({e}, {t})"),
            Phi::Rel(name, args) => write!(
                f,
                "{}",
                DenotingExpr::Rel {
                    name: name.clone(),
                    args: args.clone()
                }
            ),
        }
    }
}

/// Which Gaussian-believed quantity a continuous fluent talks about.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuantityKind {
    Pose,
    Color,
    Weight,
}

/// Goal vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub enum Fluent {
    /// `B(φ, p)`.
    BBool { phi: Phi, p: f64 },
    /// `B(φ, μ, Σ, Δ, p)` on a continuous quantity of `term`.
    BCont {
        quantity: QuantityKind,
        term: Term,
        mu: Vec<f64>,
        sigma: Vec<Vec<f64>>,
        delta: Vec<f64>,
        p: f64,
    },
    Krd(Term),
    BContents { region: Term, p: f64 },
    ExistsIn {
        expr: Arc<DenotingExpr>,
        region: Term,
        p: f64,
    },
}

impl fmt::Display for Fluent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fluent::BBool { phi, p } => write!(f, "B({phi}, {p})"),
            Fluent::BCont {
                quantity, term, p, ..
            } => write!(f, "B({quantity:?}({term}), ..., {p})"),
            Fluent::Krd(t) => write!(f, "KRD({t})"),
            Fluent::BContents { region, p } => write!(f, "BContents({region}, {p})"),
            Fluent::ExistsIn { expr, region, p } => {
                write!(f, "B(ExistsIn({expr}, {region}), {p})")
            }
        }
    }
}

/// Conjunction of fluents under optional leading existentials.
#[derive(Clone, Debug, PartialEq)]
pub struct GoalFormula {
    pub vars: Vec<String>,
    pub fluents: Vec<Fluent>,
}

impl fmt::Display for GoalFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.vars.is_empty() {
            write!(f, "exists {}. ", self.vars.join(", "))?;
        }
        for (i, fl) in self.fluents.iter().enumerate() {
            if i > 0 {
                f.write_str(" & ")?;
            }
            write!(f, "{fl}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitution_examples() {
        let green_x = DenotingExpr::rel("Green", vec![Term::var("X")]);
        let sigma = Substitution::single("X", Term::Const(Anchor::object(2)));
        assert_eq!(
            substitute(&green_x, &sigma),
            DenotingExpr::rel("green", vec![Term::Const(Anchor::object(2))])
        );
        assert_eq!(substitute(&green_x, &Substitution::new()), green_x);

        let bound = DenotingExpr::exists("X", DenotingExpr::rel("red", vec![Term::var("X")]));
        let s1 = Substitution::single("X", Term::Const(Anchor::object(1)));
        assert_eq!(substitute(&bound, &s1), bound);
    }

    #[test]
    fn free_variables() {
        let e = DenotingExpr::lambda(
            "x",
            DenotingExpr::and(
                DenotingExpr::rel("green", vec![Term::var("x")]),
                DenotingExpr::rel("on", vec![Term::var("x"), Term::var("y")]),
            ),
        );
        assert_eq!(e.free_vars().into_iter().collect::<Vec<_>>(), vec!["y".to_string()]);
    }
}
