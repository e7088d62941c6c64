//! The rule library instantiated against a belief.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::belief::{exists_in_region_prob, Anchor, BeliefState, PropertyDim};
use crate::geometry::Base;
use crate::lang::{den_prob, props_for, DenotingExpr, Fluent, Term};

use super::cond::{base_near, blockers, prob, regress, Cond, Judge, Operator, Prob, Step};
use super::search::{Edge, RegressionDomain};
use super::PlannerConfig;

/// `-ln p`, infinite for `p <= 0`.
pub fn neg_log(p: f64) -> f64 {
    if p <= 0.0 {
        f64::INFINITY
    } else {
        -p.min(1.0).ln()
    }
}

/// Regression view of one belief at one abstraction level.
pub struct BeliefDomain<'a> {
    pub belief: &'a BeliefState,
    pub config: &'a PlannerConfig,
    pub given: &'a [Fluent],
    pub level: u8,
    /// Goal variables; the `i`th one gets Skolem `skolem_base + i`.
    pub vars: &'a [String],
    pub skolem_base: u32,
}

impl<'a> BeliefDomain<'a> {
    pub fn judge(&self) -> Judge<'a> {
        Judge {
            belief: self.belief,
            config: self.config,
            given: self.given,
        }
    }

    fn rel_dim(&self, name: &str) -> Option<PropertyDim> {
        self.belief.relations.lookup(name).map(|k| k.dim())
    }

    pub fn approach(&self, target: Anchor) -> Option<Base> {
        let g = &self.config.geometry;
        if target.is_object() {
            if self.belief.held == Some(target) {
                return None;
            }
            let (x, y) = self.belief.object(target).ok()?.pose_d.xy();
            Some(g.approach_object(x, y))
        } else {
            Some(g.approach_region(self.belief.region(target).ok()?))
        }
    }

    /// Anchors for which `BaseNear` would hold from `base`.
    pub fn near_set(&self, base: &Base) -> BTreeSet<Anchor> {
        self.belief
            .object_anchors()
            .chain(self.belief.regions.keys().copied())
            .filter(|a| base_near(self.belief, self.config, base, *a))
            .collect()
    }

    /// A free point in `region`, reachable and visible from the region's
    /// approach pose, kept clear of every other unheld object.
    pub fn placement_spot(&self, obj: Option<Anchor>, region: Anchor) -> Option<[f64; 2]> {
        placement_spot(self.belief, self.config, obj, region)
    }

    fn examine(&self, expr: &Arc<DenotingExpr>, a: Anchor, pr: Prob, bind: Option<&String>) -> Option<Step> {
        let pp = den_prob(expr, a, self.belief).ok()?;
        if pp <= 0.0 {
            return None;
        }
        let props = props_for(expr, self.belief).ok()?;
        let q = if props.is_empty() {
            pr
        } else {
            prob(pr.0.powf(1.0 / props.len() as f64))
        };
        let judge = self.judge();
        let settled_against = props.iter().any(|(dim, name)| {
            judge.holds(&Cond::Sharp {
                obj: Term::Const(a),
                dim: *dim,
            }) && self.belief.prob_ground_relation(name, &[a]).is_ok_and(|p| p < q.0)
        });
        if settled_against {
            return None;
        }
        let obj = Term::Const(a);
        let mut preconds = vec![(
            Cond::Plausible {
                expr: expr.clone(),
                obj: obj.clone(),
                p: prob(self.config.rules.plausibility_ratio * pp),
            },
            0,
        )];
        preconds.extend(props.iter().map(|(_, name)| {
            (
                Cond::Rel {
                    name: name.clone(),
                    args: vec![obj.clone()],
                    p: q,
                },
                1,
            )
        }));
        Some(Step {
            op: Operator::ExamineObj {
                expr: expr.clone(),
                obj: obj.clone(),
                pr,
            },
            results: vec![
                Cond::Den {
                    expr: expr.clone(),
                    obj: obj.clone(),
                    p: pr,
                },
                Cond::Krd(obj),
            ],
            preconds,
            cost: neg_log(pp),
            bind: bind.map(|v| (v.clone(), Term::Const(a))),
        })
    }

    /// `target` is either the goal variable to bind or an existing placeholder.
    fn find_obj(&self, expr: &Arc<DenotingExpr>, region: Anchor, pr: Prob, target: &Term) -> Option<Step> {
        let pe = exists_in_region_prob(self.belief, region).ok()?;
        if pe <= 0.0 {
            return None;
        }
        let (sk, var) = match target {
            Term::Var(v) => {
                let idx = self.vars.iter().position(|x| x == v)? as u32;
                (Term::Skolem(self.skolem_base + idx), Some(v))
            }
            Term::Skolem(_) => (target.clone(), None),
            Term::Const(_) => return None,
        };
        let r = Term::Const(region);
        Some(Step {
            op: Operator::FindObj {
                expr: expr.clone(),
                region,
                obj: sk.clone(),
                pr,
            },
            results: vec![
                Cond::Den {
                    expr: expr.clone(),
                    obj: sk.clone(),
                    p: pr,
                },
                Cond::Krd(sk.clone()),
            ],
            preconds: vec![
                (
                    Cond::ExistsIn {
                        expr: expr.clone(),
                        region: r.clone(),
                        p: prob(self.config.rules.plausibility_ratio * pe),
                    },
                    0,
                ),
                (Cond::BContents { region: r, p: pr }, 1),
            ],
            cost: neg_log(pe),
            bind: var.map(|v| (v.clone(), sk)),
        })
    }

    fn link(&self, name: &str, a: Anchor, q: Prob, dim: PropertyDim) -> Option<Step> {
        let obj = Term::Const(a);
        let sharp = Cond::Sharp { obj: obj.clone(), dim };
        // already settled the other way: looking again will not help
        if self.judge().holds(&sharp) && self.belief.prob_ground_relation(name, &[a]).ok()? < q.0 {
            return None;
        }
        Some(Step {
            op: Operator::Link {
                rel: name.to_string(),
                obj: obj.clone(),
                q,
            },
            results: vec![Cond::Rel {
                name: name.to_string(),
                args: vec![obj.clone()],
                p: q,
            }],
            preconds: vec![(Cond::Krd(obj), 0), (sharp, 1)],
            cost: 0.0,
            bind: None,
        })
    }

    fn physical(&self, op: Operator, results: Vec<Cond>, preconds: Vec<(Cond, u8)>, reliability: f64) -> Step {
        Step {
            op,
            results,
            preconds,
            cost: neg_log(reliability),
            bind: None,
        }
    }

    fn look(&self, a: Anchor) -> Option<Step> {
        if self.belief.held == Some(a) || self.belief.object(a).is_err() {
            return None;
        }
        let obj = Term::Const(a);
        let sharp = |dim| Cond::Sharp { obj: obj.clone(), dim };
        Some(self.physical(
            Operator::Look { obj: obj.clone() },
            vec![sharp(PropertyDim::Pose), sharp(PropertyDim::Type), sharp(PropertyDim::Color)],
            vec![(Cond::Krd(obj.clone()), 0), (Cond::BaseNear(obj.clone()), 1)],
            self.config.rules.reliability.look,
        ))
    }

    fn look_at_region(&self, r: Anchor) -> Step {
        let region = Term::Const(r);
        self.physical(
            Operator::LookAtRegion { region: r },
            vec![Cond::BContents {
                region: region.clone(),
                p: prob(1.0),
            }],
            vec![(Cond::BaseNear(region), 1)],
            self.config.rules.reliability.look_at_region,
        )
    }

    fn pick(&self, a: Anchor) -> Option<Step> {
        if self.belief.object(a).is_err() {
            return None;
        }
        let obj = Term::Const(a);
        Some(self.physical(
            Operator::Pick { obj: obj.clone() },
            vec![
                Cond::Holding(obj.clone()),
                Cond::Sharp {
                    obj: obj.clone(),
                    dim: PropertyDim::Weight,
                },
            ],
            vec![
                (Cond::Krd(obj.clone()), 0),
                (Cond::HandEmpty, 1),
                (
                    Cond::Sharp {
                        obj: obj.clone(),
                        dim: PropertyDim::Pose,
                    },
                    1,
                ),
                (Cond::BaseNear(obj.clone()), 1),
            ]
            .into_iter()
            .chain(blockers(self.belief, a, self.config.rules.clearance).into_iter().map(|x| {
                (
                    Cond::Clear {
                        obj: obj.clone(),
                        blocker: Term::Const(x),
                    },
                    1,
                )
            }))
            .collect(),
            self.config.rules.reliability.pick,
        ))
    }

    fn weigh(&self, a: Anchor) -> Step {
        let obj = Term::Const(a);
        self.physical(
            Operator::Weigh { obj: obj.clone() },
            vec![Cond::Sharp {
                obj: obj.clone(),
                dim: PropertyDim::Weight,
            }],
            vec![(Cond::Holding(obj), 1)],
            self.config.rules.reliability.weigh,
        )
    }

    fn place(&self, obj: &Term, region: Anchor, subgoal: &BTreeSet<Cond>) -> Option<Step> {
        let anchor = obj.as_const();
        let spot = self.placement_spot(anchor, region)?;
        let r = Term::Const(region);
        let mut results = vec![Cond::HandEmpty];
        results.extend(subgoal.iter().filter(|c| {
            matches!(c, Cond::Rel { name, args, .. }
                if matches!(self.rel_dim(name), Some(PropertyDim::Pose))
                    && args.len() == 2 && &args[0] == obj && args[1] == r)
        }).map(|c| match c {
            Cond::Rel { name, args, .. } => Cond::Rel {
                name: name.clone(),
                args: args.clone(),
                p: prob(1.0),
            },
            _ => unreachable!(),
        }));
        if let Some(a) = anchor {
            for t in self.belief.object_anchors() {
                if blockers(self.belief, t, self.config.rules.clearance).contains(&a) {
                    results.push(Cond::Clear {
                        obj: Term::Const(t),
                        blocker: obj.clone(),
                    });
                }
            }
        }
        Some(self.physical(
            Operator::Place {
                obj: obj.clone(),
                region,
                spot,
            },
            results,
            vec![
                (Cond::Krd(obj.clone()), 0),
                (Cond::Holding(obj.clone()), 1),
                (Cond::BaseNear(r), 1),
            ],
            self.config.rules.reliability.place,
        ))
    }

    fn move_base(&self, target: Anchor) -> Option<Step> {
        let base = self.approach(target)?;
        let near = self.near_set(&base);
        let results = near.iter().map(|a| Cond::BaseNear(Term::Const(*a))).collect();
        Some(self.physical(
            Operator::MoveBase { target, near },
            results,
            vec![],
            self.config.rules.reliability.move_base,
        ))
    }

    /// Rule instances with a result relevant to some fluent of `subgoal`.
    pub fn instances(&self, subgoal: &BTreeSet<Cond>) -> Vec<Step> {
        let b = self.belief;
        let regions: Vec<Anchor> = b.regions.keys().copied().collect();
        let mut out = Vec::new();
        for c in subgoal {
            match c {
                Cond::Den { expr, obj, p } => match obj {
                    Term::Const(a) => out.extend(self.examine(expr, *a, *p, None)),
                    Term::Var(v) => {
                        for a in b.object_anchors() {
                            out.extend(self.examine(expr, a, *p, Some(v)));
                        }
                        for r in &regions {
                            out.extend(self.find_obj(expr, *r, *p, obj));
                        }
                    }
                    Term::Skolem(_) => {
                        for r in &regions {
                            out.extend(self.find_obj(expr, *r, *p, obj));
                        }
                    }
                },
                Cond::Rel { name, args, p } => match (self.rel_dim(name), args.as_slice()) {
                    (Some(dim @ (PropertyDim::Type | PropertyDim::Color | PropertyDim::Weight)), [Term::Const(a)]) => {
                        out.extend(self.link(name, *a, *p, dim));
                    }
                    (Some(PropertyDim::Pose), [o, Term::Const(r)]) if !r.is_object() => {
                        out.extend(self.place(o, *r, subgoal));
                    }
                    _ => {}
                },
                Cond::BContents { region: Term::Const(r), .. } if b.regions.contains_key(r) => {
                    out.push(self.look_at_region(*r));
                }
                Cond::Sharp { obj: Term::Const(a), dim } => match dim {
                    PropertyDim::Pose | PropertyDim::Type | PropertyDim::Color => out.extend(self.look(*a)),
                    PropertyDim::Weight => {
                        out.extend(self.pick(*a));
                        out.push(self.weigh(*a));
                    }
                    PropertyDim::Existence => {}
                },
                Cond::Holding(Term::Const(a)) => out.extend(self.pick(*a)),
                Cond::HandEmpty => {
                    let mut held: BTreeSet<Term> = subgoal
                        .iter()
                        .filter_map(|c| match c {
                            Cond::Holding(t) => Some(t.clone()),
                            _ => None,
                        })
                        .collect();
                    held.extend(b.held.map(Term::Const));
                    for o in held {
                        for r in &regions {
                            out.extend(self.place(&o, *r, subgoal));
                        }
                    }
                }
                Cond::BaseNear(Term::Const(x)) => {
                    for t in b.object_anchors().chain(regions.iter().copied()) {
                        if let Some(base) = self.approach(t) {
                            if base_near(b, self.config, &base, *x) {
                                out.extend(self.move_base(t));
                            }
                        }
                    }
                }
                Cond::Clear { blocker, .. } => {
                    for r in &regions {
                        out.extend(self.place(blocker, *r, subgoal));
                    }
                }
                _ => {}
            }
        }
        out
    }

    /// Rejects subgoals that can never be reached from this belief.
    pub fn admissible(&self, s: &BTreeSet<Cond>) -> bool {
        let judge = self.judge();
        if s.iter().any(|c| c.is_static() && !judge.holds(c)) {
            return false;
        }
        let held: BTreeSet<&Term> = s
            .iter()
            .filter_map(|c| match c {
                Cond::Holding(t) => Some(t),
                _ => None,
            })
            .collect();
        !(held.len() > 1 || (!held.is_empty() && s.contains(&Cond::HandEmpty)))
    }
}

impl RegressionDomain for BeliefDomain<'_> {
    type Fluent = Cond;
    type Step = Step;

    fn satisfied(&self, subgoal: &BTreeSet<Cond>) -> bool {
        self.judge().satisfying_assignment(subgoal).is_some()
    }

    fn predecessors(&self, subgoal: &BTreeSet<Cond>) -> Vec<Edge<Cond, Step>> {
        let mut seen = BTreeMap::new();
        for step in self.instances(subgoal) {
            let Ok(prev) = regress(subgoal, &step, self.level) else { continue };
            if !self.admissible(&prev) {
                continue;
            }
            let label = step.op.label(self.belief);
            seen.entry((label, prev.clone())).or_insert((step, prev));
        }
        seen.into_iter()
            .map(|((label, _), (step, prev))| Edge {
                cost: step.cost,
                step,
                label,
                subgoal: prev,
            })
            .collect()
    }
}

/// A free point in `region` for `obj`, reachable and visible from the
/// region's approach pose and at least the clearance plus a margin away from
/// every other unheld object. Candidates nearer the region center first.
pub fn placement_spot(b: &BeliefState, config: &PlannerConfig, obj: Option<Anchor>, region: Anchor) -> Option<[f64; 2]> {
    let r = b.region(region).ok()?;
    let g = &config.geometry;
    let base = g.approach_region(r);
    let c = r.center();
    let margin = 0.05;
    const N: usize = 7;
    let mut cands = Vec::with_capacity(N * N);
    for i in 0..N {
        for j in 0..N {
            let x = r.min[0] + margin + (r.max[0] - r.min[0] - 2.0 * margin) * i as f64 / (N - 1) as f64;
            let y = r.min[1] + margin + (r.max[1] - r.min[1] - 2.0 * margin) * j as f64 / (N - 1) as f64;
            cands.push([x, y]);
        }
    }
    cands.sort_by(|p, q| {
        let dp = (p[0] - c[0]).hypot(p[1] - c[1]);
        let dq = (q[0] - c[0]).hypot(q[1] - c[1]);
        dp.total_cmp(&dq)
    });
    let min_gap = config.rules.clearance + margin;
    cands.into_iter().find(|p| {
        g.reachable(&base, p[0], p[1])
            && g.in_view(&base, p[0], p[1])
            && b.objects.iter().all(|(a, o)| {
                if Some(*a) == obj || b.held == Some(*a) {
                    return true;
                }
                let (x, y) = o.pose_d.xy();
                (x - p[0]).hypot(y - p[1]) >= min_gap
            })
    })
}
