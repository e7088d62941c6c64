//! Planner fluents, ground rule instances, and regression through them.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, SymmetricEigen};
use ordered_float::OrderedFloat;

use crate::belief::{exists_in_region_prob, Anchor, BeliefState, PropertyDim};
use crate::geometry::Base;
use crate::lang::{den_prob, holds, DenotingExpr, Fluent, Substitution, Term};

use super::{PlanError, PlannerConfig};

pub type Prob = OrderedFloat<f64>;

pub fn prob(p: f64) -> Prob {
    OrderedFloat(p)
}

/// Everything a subgoal can mention.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cond {
    /// `B(Den(expr, obj), p)`.
    Den { expr: Arc<DenotingExpr>, obj: Term, p: Prob },
    /// `B(name(args), p)`.
    Rel { name: String, args: Vec<Term>, p: Prob },
    Krd(Term),
    BContents { region: Term, p: Prob },
    /// Static: only the world can make it true.
    ExistsIn { expr: Arc<DenotingExpr>, region: Term, p: Prob },
    /// Static: the object still denotes with at least this probability.
    Plausible { expr: Arc<DenotingExpr>, obj: Term, p: Prob },
    Holding(Term),
    HandEmpty,
    /// The base is placed so that the target is in view and in reach.
    BaseNear(Term),
    /// The belief along one dimension is concentrated enough that looking
    /// or weighing again would not change it much.
    Sharp { obj: Term, dim: PropertyDim },
    /// `blocker` does not crowd `obj` from the robot's side.
    Clear { obj: Term, blocker: Term },
    /// Static: the goal fluent at this index of the plan's `given` list.
    Given(usize),
}

impl Cond {
    pub fn is_static(&self) -> bool {
        matches!(self, Cond::ExistsIn { .. } | Cond::Plausible { .. } | Cond::Given(_))
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Cond::Den { obj, .. } | Cond::Plausible { obj, .. } | Cond::Sharp { obj, .. } => vec![obj],
            Cond::Rel { args, .. } => args.iter().collect(),
            Cond::Krd(t) | Cond::Holding(t) | Cond::BaseNear(t) => vec![t],
            Cond::Clear { obj, blocker } => vec![obj, blocker],
            Cond::BContents { region, .. } | Cond::ExistsIn { region, .. } => vec![region],
            Cond::HandEmpty | Cond::Given(_) => vec![],
        }
    }

    pub fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Cond {
        match self {
            Cond::Den { expr, obj, p } => Cond::Den {
                expr: expr.clone(),
                obj: f(obj),
                p: *p,
            },
            Cond::Rel { name, args, p } => Cond::Rel {
                name: name.clone(),
                args: args.iter().map(f).collect(),
                p: *p,
            },
            Cond::Krd(t) => Cond::Krd(f(t)),
            Cond::BContents { region, p } => Cond::BContents { region: f(region), p: *p },
            Cond::ExistsIn { expr, region, p } => Cond::ExistsIn {
                expr: expr.clone(),
                region: f(region),
                p: *p,
            },
            Cond::Plausible { expr, obj, p } => Cond::Plausible {
                expr: expr.clone(),
                obj: f(obj),
                p: *p,
            },
            Cond::Holding(t) => Cond::Holding(f(t)),
            Cond::HandEmpty => Cond::HandEmpty,
            Cond::BaseNear(t) => Cond::BaseNear(f(t)),
            Cond::Sharp { obj, dim } => Cond::Sharp { obj: f(obj), dim: *dim },
            Cond::Clear { obj, blocker } => Cond::Clear {
                obj: f(obj),
                blocker: f(blocker),
            },
            Cond::Given(i) => Cond::Given(*i),
        }
    }

    pub fn substitute(&self, sigma: &Substitution) -> Cond {
        self.map_terms(&|t| sigma.apply_term(t))
    }

    /// Converts a goal fluent; shapes the planner cannot achieve become
    /// [`Cond::Given`] entries appended to `given`.
    pub fn from_fluent(f: &Fluent, given: &mut Vec<Fluent>) -> Cond {
        use crate::lang::Phi;
        match f {
            Fluent::BBool { phi: Phi::Den(e, t), p } => Cond::Den {
                expr: e.clone(),
                obj: t.clone(),
                p: prob(*p),
            },
            Fluent::BBool { phi: Phi::Rel(name, args), p } => Cond::Rel {
                name: name.clone(),
                args: args.clone(),
                p: prob(*p),
            },
            Fluent::Krd(t) => Cond::Krd(t.clone()),
            Fluent::BContents { region, p } => Cond::BContents {
                region: region.clone(),
                p: prob(*p),
            },
            Fluent::ExistsIn { expr, region, p } => Cond::ExistsIn {
                expr: expr.clone(),
                region: region.clone(),
                p: prob(*p),
            },
            Fluent::BCont { .. } => {
                given.push(f.clone());
                Cond::Given(given.len() - 1)
            }
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Den { expr, obj, p } => write!(f, "B(Den({expr}, {obj}), {p})"),
            Cond::Rel { name, args, p } => {
                let a: Vec<String> = args.iter().map(|t| t.to_string()).collect();
                write!(f, "B({name}({}), {p})", a.join(", "))
            }
            Cond::Krd(t) => write!(f, "KRD({t})"),
            Cond::BContents { region, p } => write!(f, "BContents({region}, {p})"),
            Cond::ExistsIn { expr, region, p } => write!(f, "B(ExistsIn({expr}, {region}), {p})"),
            Cond::Plausible { expr, obj, p } => write!(f, "Plausible({expr}, {obj}, {p:.4})"),
            Cond::Holding(t) => write!(f, "Holding({t})"),
            Cond::HandEmpty => f.write_str("HandEmpty"),
            Cond::BaseNear(t) => write!(f, "BaseNear({t})"),
            Cond::Sharp { obj, dim } => write!(f, "Sharp({obj}, {dim:?})"),
            Cond::Clear { obj, blocker } => write!(f, "Clear({obj}, {blocker})"),
            Cond::Given(i) => write!(f, "Given({i})"),
        }
    }
}

/// `result` makes `goal` true.
pub fn entails(result: &Cond, goal: &Cond) -> bool {
    match (result, goal) {
        (Cond::Den { expr: e1, obj: o1, p: p1 }, Cond::Den { expr: e2, obj: o2, p: p2 }) => {
            e1 == e2 && o1 == o2 && p1 >= p2
        }
        (Cond::Rel { name: n1, args: a1, p: p1 }, Cond::Rel { name: n2, args: a2, p: p2 }) => {
            n1 == n2 && a1 == a2 && p1 >= p2
        }
        (Cond::BContents { region: r1, p: p1 }, Cond::BContents { region: r2, p: p2 }) => r1 == r2 && p1 >= p2,
        _ => result == goal,
    }
}

fn is_spatial(name: &str) -> bool {
    matches!(name, "in" | "on")
}

#[derive(Clone, Debug, PartialEq)]
pub enum Operator {
    ExamineObj { expr: Arc<DenotingExpr>, obj: Term, pr: Prob },
    FindObj { expr: Arc<DenotingExpr>, region: Anchor, obj: Term, pr: Prob },
    /// Reads a symbolic relation off a concentrated property belief.
    Link { rel: String, obj: Term, q: Prob },
    MoveBase { target: Anchor, near: BTreeSet<Anchor> },
    Look { obj: Term },
    LookAtRegion { region: Anchor },
    Pick { obj: Term },
    Weigh { obj: Term },
    Place { obj: Term, region: Anchor, spot: [f64; 2] },
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::ExamineObj { .. } => "ExamineObj",
            Operator::FindObj { .. } => "FindObj",
            Operator::Link { .. } => "Link",
            Operator::MoveBase { .. } => "MoveBase",
            Operator::Look { .. } => "Look",
            Operator::LookAtRegion { .. } => "LookAtRegion",
            Operator::Pick { .. } => "Pick",
            Operator::Weigh { .. } => "Weigh",
            Operator::Place { .. } => "Place",
        }
    }

    pub fn is_inference(&self) -> bool {
        matches!(
            self,
            Operator::ExamineObj { .. } | Operator::FindObj { .. } | Operator::Link { .. }
        )
    }

    fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Operator {
        match self {
            Operator::ExamineObj { expr, obj, pr } => Operator::ExamineObj {
                expr: expr.clone(),
                obj: f(obj),
                pr: *pr,
            },
            Operator::FindObj { expr, region, obj, pr } => Operator::FindObj {
                expr: expr.clone(),
                region: *region,
                obj: f(obj),
                pr: *pr,
            },
            Operator::Link { rel, obj, q } => Operator::Link {
                rel: rel.clone(),
                obj: f(obj),
                q: *q,
            },
            Operator::Look { obj } => Operator::Look { obj: f(obj) },
            Operator::Pick { obj } => Operator::Pick { obj: f(obj) },
            Operator::Weigh { obj } => Operator::Weigh { obj: f(obj) },
            Operator::Place { obj, region, spot } => Operator::Place {
                obj: f(obj),
                region: *region,
                spot: *spot,
            },
            other => other.clone(),
        }
    }

    /// Whether executing this makes `c` false.
    pub fn clobbers(&self, c: &Cond) -> bool {
        match (self, c) {
            (Operator::Pick { .. }, Cond::HandEmpty) => true,
            (Operator::Pick { obj }, Cond::Rel { name, args, .. }) => is_spatial(name) && args.first() == Some(obj),
            (Operator::Pick { obj }, Cond::Holding(t)) => t != obj,
            (Operator::Place { obj, .. }, Cond::Holding(t)) => t == obj,
            (Operator::MoveBase { near, .. }, Cond::BaseNear(t)) => match t {
                Term::Const(a) => !near.contains(a),
                _ => true,
            },
            _ => false,
        }
    }

    pub fn label(&self, belief: &BeliefState) -> String {
        let t = |t: &Term| match t {
            Term::Const(a) => belief.label(*a),
            other => other.to_string(),
        };
        match self {
            Operator::ExamineObj { obj, .. } => format!("ExamineObj({})", t(obj)),
            Operator::FindObj { region, obj, .. } => format!("FindObj({}, {})", belief.label(*region), t(obj)),
            Operator::Link { rel, obj, .. } => format!("Link({rel}, {})", t(obj)),
            Operator::MoveBase { target, .. } => format!("MoveBase({})", belief.label(*target)),
            Operator::Look { obj } => format!("Look({})", t(obj)),
            Operator::LookAtRegion { region } => format!("LookAtRegion({})", belief.label(*region)),
            Operator::Pick { obj } => format!("Pick({})", t(obj)),
            Operator::Weigh { obj } => format!("Weigh({})", t(obj)),
            Operator::Place { obj, region, .. } => format!("Place({}, {})", t(obj), belief.label(*region)),
        }
    }
}

/// A fully instantiated rule.
#[derive(Clone, Debug, PartialEq)]
pub struct Step {
    pub op: Operator,
    pub results: Vec<Cond>,
    /// Preconditions with the abstraction level at which they appear.
    pub preconds: Vec<(Cond, u8)>,
    pub cost: f64,
    /// Goal variable fixed by choosing this instance.
    pub bind: Option<(String, Term)>,
}

impl Step {
    pub fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Step {
        Step {
            op: self.op.map_terms(f),
            results: self.results.iter().map(|c| c.map_terms(f)).collect(),
            preconds: self.preconds.iter().map(|(c, l)| (c.map_terms(f), *l)).collect(),
            cost: self.cost,
            bind: self.bind.as_ref().map(|(v, t)| (v.clone(), f(t))),
        }
    }

    pub fn substitute(&self, sigma: &Substitution) -> Step {
        self.map_terms(&|t| sigma.apply_term(t))
    }

    pub fn is_inference(&self) -> bool {
        self.op.is_inference()
    }
}

/// Subgoal that must hold before `step` for `subgoal` to hold after it, with
/// preconditions above `level` postponed.
pub fn regress(subgoal: &BTreeSet<Cond>, step: &Step, level: u8) -> Result<BTreeSet<Cond>, PlanError> {
    let bound: BTreeSet<Cond> = match &step.bind {
        Some((v, t)) => {
            let s = Substitution::single(v, t.clone());
            subgoal.iter().map(|c| c.substitute(&s)).collect()
        }
        None => subgoal.clone(),
    };
    let mut out = BTreeSet::new();
    let mut relevant = false;
    for c in &bound {
        if step.results.iter().any(|r| entails(r, c)) {
            relevant = true;
        } else if step.op.clobbers(c) {
            return Err(PlanError::Clobbered(c.to_string()));
        } else {
            out.insert(c.clone());
        }
    }
    if !relevant {
        return Err(PlanError::NotRelevant);
    }
    out.extend(step.preconds.iter().filter(|(_, l)| *l <= level).map(|(c, _)| c.clone()));
    Ok(out)
}

/// Truth of planner fluents in one belief.
pub struct Judge<'a> {
    pub belief: &'a BeliefState,
    pub config: &'a PlannerConfig,
    pub given: &'a [Fluent],
}

fn max_eig2(m: Matrix2<f64>) -> f64 {
    SymmetricEigen::new(m).eigenvalues.max()
}

impl Judge<'_> {
    pub fn base(&self) -> Base {
        let m = self.belief.robot_pose.mean;
        Base {
            x: m[0],
            y: m[1],
            theta: m[3],
        }
    }

    pub fn holds(&self, c: &Cond) -> bool {
        let b = self.belief;
        let rules = &self.config.rules;
        match c {
            Cond::Den { expr, obj: Term::Const(a), p } => den_prob(expr, *a, b).is_ok_and(|v| v >= p.0),
            Cond::Rel { name, args, p } => {
                let anchors: Option<Vec<Anchor>> = args.iter().map(Term::as_const).collect();
                anchors.is_some_and(|a| b.prob_ground_relation(name, &a).is_ok_and(|v| v >= p.0))
            }
            Cond::Krd(t) => matches!(t, Term::Const(_)),
            Cond::BContents { region: Term::Const(r), p } => b.regions.contains_key(r) && b.confidence(*r) >= p.0,
            Cond::ExistsIn { region: Term::Const(r), p, .. } => exists_in_region_prob(b, *r).is_ok_and(|v| v >= p.0),
            Cond::Plausible { expr, obj: Term::Const(a), p } => den_prob(expr, *a, b).is_ok_and(|v| v >= p.0),
            Cond::Holding(Term::Const(a)) => b.held == Some(*a),
            Cond::HandEmpty => b.held.is_none(),
            Cond::BaseNear(Term::Const(a)) => base_near(b, self.config, &self.base(), *a),
            Cond::Sharp { obj: Term::Const(a), dim } => {
                let Ok(o) = b.object(*a) else { return false };
                if o.detection_weight < rules.existence_confidence {
                    return false;
                }
                match dim {
                    PropertyDim::Pose => {
                        b.held == Some(*a)
                            || max_eig2(o.pose_d.cov.fixed_view::<2, 2>(0, 0).into_owned()) <= rules.pose_std.powi(2)
                    }
                    PropertyDim::Color => SymmetricEigen::new(o.color_d.cov).eigenvalues.max() <= rules.color_std.powi(2),
                    PropertyDim::Weight => o.weight_d.sigma <= rules.weight_sigma,
                    PropertyDim::Type => o.type_d.map_type().is_some_and(|(_, p)| p >= rules.type_confidence),
                    PropertyDim::Existence => true,
                }
            }
            Cond::Clear {
                obj: Term::Const(a),
                blocker: Term::Const(x),
            } => b.held == Some(*a) || !blockers(b, *a, rules.clearance).contains(x),
            Cond::Given(i) => self.given.get(*i).is_some_and(|f| holds(f, b).unwrap_or(false)),
            _ => false,
        }
    }

    /// An assignment of object anchors to the free variables of `set`
    /// making every fluent hold.
    pub fn satisfying_assignment(&self, set: &BTreeSet<Cond>) -> Option<Substitution> {
        let vars: Vec<String> = set
            .iter()
            .flat_map(|c| c.terms())
            .filter_map(|t| match t {
                Term::Var(v) => Some(v.clone()),
                _ => None,
            })
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let candidates: Vec<Anchor> = self.belief.object_anchors().collect();
        let mut sigma = Substitution::new();
        self.assign(set, &vars, &candidates, &mut sigma).then_some(sigma)
    }

    fn assign(&self, set: &BTreeSet<Cond>, vars: &[String], cands: &[Anchor], sigma: &mut Substitution) -> bool {
        let Some((v, rest)) = vars.split_first() else {
            return set.iter().all(|c| self.holds(&c.substitute(sigma)));
        };
        for a in cands {
            sigma.bindings.insert(v.clone(), Term::Const(*a));
            if self.assign(set, rest, cands, sigma) {
                return true;
            }
        }
        sigma.bindings.remove(v);
        false
    }
}

/// Whether the target is in view and within reach from `base`.
pub fn base_near(b: &BeliefState, config: &PlannerConfig, base: &Base, target: Anchor) -> bool {
    let g = &config.geometry;
    if target.is_object() {
        if b.held == Some(target) {
            return true;
        }
        let Ok(o) = b.object(target) else { return false };
        let (x, y) = o.pose_d.xy();
        g.in_view(base, x, y) && g.reachable(base, x, y)
    } else {
        let Ok(r) = b.region(target) else { return false };
        let c = r.center();
        g.in_view(base, c[0], c[1]) && g.reachable(base, c[0], c[1])
    }
}

/// Unheld objects within `clearance` of `target` and nearer the workspace
/// origin than it.
pub fn blockers(b: &BeliefState, target: Anchor, clearance: f64) -> Vec<Anchor> {
    let Ok(t) = b.object(target) else { return vec![] };
    let (tx, ty) = t.pose_d.xy();
    let td = tx.hypot(ty);
    b.objects
        .iter()
        .filter(|(a, _)| **a != target && b.held != Some(**a))
        .filter(|(_, o)| {
            let (x, y) = o.pose_d.xy();
            (x - tx).hypot(y - ty) < clearance && x.hypot(y) < td
        })
        .map(|(a, _)| *a)
        .collect()
}
