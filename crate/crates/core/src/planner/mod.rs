//! Hierarchical regression planning over belief fluents.
//!
//! Every rule instance costs `-ln p` for its success probability, so the
//! cheapest plan is the one most likely to work when each observation is
//! assumed to come out as expected. Level 0 plans ignore geometric and
//! grasp preconditions; each level-0 step is later refined into a level-1
//! plan for its own results.

mod cond;
mod rules;
pub mod search;
pub mod strips;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{exists_in_region_prob, BeliefState};
use crate::geometry::SensorGeometry;
use crate::lang::{den_prob, Fluent, GoalFormula, Substitution, Term};

pub use cond::{base_near, blockers, entails, prob, regress, Cond, Judge, Operator, Prob, Step};
pub use rules::{neg_log, placement_spot, BeliefDomain};
pub use search::{uniform_cost_search, SearchError, SearchLimits};

/// Highest abstraction level; steps at this level are executed directly.
pub const CONCRETE: u8 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Reliability {
    pub move_base: f64,
    pub look: f64,
    pub look_at_region: f64,
    pub pick: f64,
    pub place: f64,
    pub weigh: f64,
}

impl Default for Reliability {
    fn default() -> Self {
        Reliability {
            move_base: 0.99,
            look: 0.99,
            look_at_region: 0.99,
            pick: 0.99,
            place: 0.99,
            weigh: 0.99,
        }
    }
}

/// Operator reliabilities and the thresholds used inside the rules.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub reliability: Reliability,
    /// Fraction of the planning-time probability below which an examined
    /// candidate or a searched region is abandoned.
    pub plausibility_ratio: f64,
    /// Largest position standard deviation (m) for grasping.
    pub pose_std: f64,
    pub color_std: f64,
    /// Largest log-weight standard deviation for a settled weight.
    pub weight_sigma: f64,
    /// MAP type probability for a settled type.
    pub type_confidence: f64,
    /// Detection weight needed before any property counts as settled.
    pub existence_confidence: f64,
    /// Objects nearer than this (m) get in the way of a grasp.
    pub clearance: f64,
    pub max_expansions: usize,
}

impl Default for RuleConfig {
    fn default() -> Self {
        RuleConfig {
            reliability: Reliability::default(),
            plausibility_ratio: 0.5,
            pose_std: 0.05,
            color_std: 0.05,
            weight_sigma: 0.1,
            type_confidence: 0.99,
            existence_confidence: 0.99,
            clearance: 0.2,
            max_expansions: 50_000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub rules: RuleConfig,
    pub geometry: SensorGeometry,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("no result of the rule matches the subgoal")]
    NotRelevant,
    #[error("rule would undo `{0}`")]
    Clobbered(String),
    #[error(transparent)]
    Search(#[from] SearchError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub steps: Vec<Step>,
    /// `preimages[i]` must hold before `steps[i]`; the last entry is the goal.
    pub preimages: Vec<BTreeSet<Cond>>,
    pub goal: BTreeSet<Cond>,
    /// Goal fluents referenced by [`Cond::Given`].
    pub given: Vec<Fluent>,
    pub level: u8,
    pub cost: f64,
}

impl Plan {
    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn render(&self, belief: &BeliefState) -> String {
        let s: Vec<String> = self.steps.iter().map(|s| s.op.label(belief)).collect();
        format!("[{}]", s.join(", "))
    }
}

/// Planner-side form of a goal formula.
pub fn goal_conds(goal: &GoalFormula) -> (BTreeSet<Cond>, Vec<Fluent>) {
    let mut given = Vec::new();
    let set = goal.fluents.iter().map(|f| Cond::from_fluent(f, &mut given)).collect();
    (set, given)
}

/// Cost of one rule instance in `belief`.
pub fn action_cost(op: &Operator, belief: &BeliefState, config: &PlannerConfig) -> f64 {
    let r = &config.rules.reliability;
    match op {
        Operator::ExamineObj { expr, obj, .. } => match obj {
            Term::Const(a) => neg_log(den_prob(expr, *a, belief).unwrap_or(0.0)),
            _ => f64::INFINITY,
        },
        Operator::FindObj { region, .. } => neg_log(exists_in_region_prob(belief, *region).unwrap_or(0.0)),
        Operator::Link { .. } => 0.0,
        Operator::MoveBase { .. } => neg_log(r.move_base),
        Operator::Look { .. } => neg_log(r.look),
        Operator::LookAtRegion { .. } => neg_log(r.look_at_region),
        Operator::Pick { .. } => neg_log(r.pick),
        Operator::Weigh { .. } => neg_log(r.weigh),
        Operator::Place { .. } => neg_log(r.place),
    }
}

/// Inputs of one search beyond the belief.
#[derive(Clone, Debug)]
pub struct PlanRequest<'a> {
    pub goal: BTreeSet<Cond>,
    pub vars: &'a [String],
    pub given: &'a [Fluent],
    pub level: u8,
    pub skolem_base: u32,
}

/// Cheapest plan for a goal formula at `level`.
pub fn plan(belief: &BeliefState, goal: &GoalFormula, level: u8, config: &PlannerConfig) -> Result<Plan, PlanError> {
    let (set, given) = goal_conds(goal);
    plan_for(
        belief,
        PlanRequest {
            goal: set,
            vars: &goal.vars,
            given: &given,
            level,
            skolem_base: 1,
        },
        config,
    )
}

pub fn plan_for(belief: &BeliefState, req: PlanRequest<'_>, config: &PlannerConfig) -> Result<Plan, PlanError> {
    let domain = BeliefDomain {
        belief,
        config,
        given: req.given,
        level: req.level,
        vars: req.vars,
        skolem_base: req.skolem_base,
    };
    let limits = SearchLimits {
        max_expansions: config.rules.max_expansions,
        max_depth: None,
    };
    let out = uniform_cost_search(&domain, req.goal.clone(), limits)?;
    log::debug!("plan at level {} after {} expansions, cost {:.4}", req.level, out.expansions, out.cost);

    let mut sigma = Substitution::new();
    sigma.bindings.extend(out.steps.iter().filter_map(|s| s.bind.clone()));
    let first: BTreeSet<Cond> = out.subgoals[0].iter().map(|c| c.substitute(&sigma)).collect();
    if let Some(rest) = domain.judge().satisfying_assignment(&first) {
        sigma.bindings.extend(rest.bindings);
    }
    let subst_set = |s: &BTreeSet<Cond>| s.iter().map(|c| c.substitute(&sigma)).collect::<BTreeSet<_>>();
    let preimages: Vec<BTreeSet<Cond>> = out.subgoals.iter().map(subst_set).collect();
    Ok(Plan {
        steps: out.steps.iter().map(|s| s.substitute(&sigma)).collect(),
        goal: preimages.last().cloned().unwrap_or_default(),
        preimages,
        given: req.given.to_vec(),
        level: req.level,
        cost: out.cost,
    })
}

/// Plans the results of `step` one level down. A concrete step is returned
/// as a plan of itself.
pub fn refine(step: &Step, parent: &Plan, belief: &BeliefState, config: &PlannerConfig, skolem_base: u32) -> Result<Plan, PlanError> {
    let goal: BTreeSet<Cond> = step.results.iter().cloned().collect();
    if parent.level >= CONCRETE {
        let pre = regress(&goal, step, parent.level)?;
        return Ok(Plan {
            steps: vec![step.clone()],
            preimages: vec![pre, goal.clone()],
            goal,
            given: parent.given.clone(),
            level: parent.level,
            cost: step.cost,
        });
    }
    plan_for(
        belief,
        PlanRequest {
            goal,
            vars: &[],
            given: &parent.given,
            level: parent.level + 1,
            skolem_base,
        },
        config,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::{update_weight, Anchor, ObservationNoiseModel, PropertyDim};
    use crate::testing::{goal, tabletop};
    use std::sync::Arc;

    fn o(i: u32) -> Term {
        Term::Const(Anchor::object(i))
    }

    fn noise() -> ObservationNoiseModel {
        ObservationNoiseModel::with_diagonal_confusion(
            vec!["can".into(), "box".into(), "bottle".into()],
            0.9,
            [0.03, 0.03, 0.03, 0.05],
            [0.02; 3],
            0.05,
            0.0,
        )
    }

    fn names(p: &Plan, b: &BeliefState) -> Vec<String> {
        p.steps.iter().map(|s| s.op.label(b)).collect()
    }

    fn check_preimages(p: &Plan) {
        assert_eq!(p.preimages.len(), p.steps.len() + 1);
        for (i, s) in p.steps.iter().enumerate() {
            let r = regress(&p.preimages[i + 1], s, p.level).unwrap();
            assert_eq!(r, p.preimages[i], "step {i}");
        }
    }

    #[test]
    fn root_plan_examines_likeliest_then_places() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let p = plan(&b, &goal(&b), 0, &cfg).unwrap();
        assert_eq!(names(&p, &b), vec!["ExamineObj(_o2_)", "Place(_o2_, desk)"]);
        check_preimages(&p);
        let judge = Judge {
            belief: &b,
            config: &cfg,
            given: &p.given,
        };
        assert!(p.preimages[0].iter().all(|c| judge.holds(c)));
    }

    #[test]
    fn light_can_sends_the_plan_searching() {
        let b = tabletop();
        let mut b = update_weight(&b, Anchor::object(2), 100.0, &noise()).unwrap();
        b.held = Some(Anchor::object(2));
        let p = plan(&b, &goal(&b), 0, &PlannerConfig::default()).unwrap();
        assert_eq!(p.steps.len(), 2);
        assert!(matches!(p.steps[0].op, Operator::FindObj { obj: Term::Skolem(_), .. }));
        assert!(matches!(&p.steps[1].op, Operator::Place { obj: Term::Skolem(_), .. }));
        check_preimages(&p);
    }

    #[test]
    fn refinement_moves_the_blocker_and_picks() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let root = plan(&b, &goal(&b), 0, &cfg).unwrap();
        let sub = refine(&root.steps[0], &root, &b, &cfg, 10).unwrap();
        let expr = match &root.steps[0].op {
            Operator::ExamineObj { expr, .. } => expr.clone(),
            _ => unreachable!(),
        };
        let want: BTreeSet<Cond> = [
            Cond::Den {
                expr,
                obj: o(2),
                p: prob(0.9),
            },
            Cond::Krd(o(2)),
        ]
        .into();
        assert_eq!(sub.goal, want);
        assert_eq!(sub.level, 1);
        let n = names(&sub, &b);
        let place_box = n.iter().position(|s| s.starts_with("Place(_o1_")).expect("box moved");
        let pick_can = n.iter().position(|s| s == "Pick(_o2_)").expect("can picked");
        assert!(n.iter().position(|s| s == "Pick(_o1_)").unwrap() < place_box);
        assert!(place_box < pick_can);
        assert!(n.iter().any(|s| s == "Look(_o2_)"));
        assert_eq!(n.last().unwrap(), "ExamineObj(_o2_)");
        check_preimages(&sub);
    }

    #[test]
    fn concrete_step_refines_to_itself() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let root = plan(&b, &goal(&b), 0, &cfg).unwrap();
        let sub = refine(&root.steps[0], &root, &b, &cfg, 10).unwrap();
        let again = refine(&sub.steps[0], &sub, &b, &cfg, 10).unwrap();
        assert_eq!(again.steps, vec![sub.steps[0].clone()]);
    }

    #[test]
    fn place_regression_postpones_holding_at_level_zero() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let desk = Anchor::region(1);
        let g: BTreeSet<Cond> = [Cond::Rel {
            name: "on".into(),
            args: vec![o(4), Term::Const(desk)],
            p: prob(0.9),
        }]
        .into();
        let domain = BeliefDomain {
            belief: &b,
            config: &cfg,
            given: &[],
            level: 1,
            vars: &[],
            skolem_base: 1,
        };
        let place = domain
            .instances(&g)
            .into_iter()
            .find(|s| matches!(s.op, Operator::Place { .. }))
            .unwrap();
        let full = regress(&g, &place, 1).unwrap();
        assert!(full.contains(&Cond::Holding(o(4))));
        assert!(full.contains(&Cond::Krd(o(4))));
        let abs = regress(&g, &place, 0).unwrap();
        assert!(abs.contains(&Cond::Krd(o(4))));
        assert!(!abs.contains(&Cond::Holding(o(4))));
        assert!(abs.is_subset(&full));

        let look = Step {
            op: Operator::Look { obj: o(4) },
            results: vec![Cond::Sharp {
                obj: o(4),
                dim: PropertyDim::Pose,
            }],
            preconds: vec![],
            cost: 0.0,
            bind: None,
        };
        assert_eq!(regress(&g, &look, 1), Err(PlanError::NotRelevant));
    }

    #[test]
    fn pick_geometry_postponed_at_level_zero() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let g: BTreeSet<Cond> = [Cond::Holding(o(2))].into();
        let domain = BeliefDomain {
            belief: &b,
            config: &cfg,
            given: &[],
            level: 1,
            vars: &[],
            skolem_base: 1,
        };
        let pick = domain.instances(&g).remove(0);
        let sharp = Cond::Sharp {
            obj: o(2),
            dim: PropertyDim::Pose,
        };
        assert!(regress(&g, &pick, 1).unwrap().contains(&sharp));
        assert!(!regress(&g, &pick, 0).unwrap().contains(&sharp));
    }

    #[test]
    fn levels_are_monotone_for_every_instance() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let (g, given) = goal_conds(&goal(&b));
        let vars = vec!["o".to_string()];
        let domain = BeliefDomain {
            belief: &b,
            config: &cfg,
            given: &given,
            level: 1,
            vars: &vars,
            skolem_base: 1,
        };
        let mut frontier = vec![g];
        for _ in 0..3 {
            let mut next = Vec::new();
            for s in &frontier {
                for step in domain.instances(s) {
                    if let (Ok(a), Ok(c)) = (regress(s, &step, 0), regress(s, &step, 1)) {
                        assert!(a.is_subset(&c), "{}", step.op.label(&b));
                        next.push(c);
                    }
                }
            }
            next.truncate(40);
            frontier = next;
        }
    }

    #[test]
    fn goal_already_true_gives_empty_plan() {
        let b = tabletop();
        let g = crate::lang::parse_goal("B(can(_o2_), 0.5) & KRD(_o2_)", &b).unwrap();
        let p = plan(&b, &g, 0, &PlannerConfig::default()).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.cost, 0.0);
        assert_eq!(p.preimages.len(), 1);
    }

    #[test]
    fn region_priors_set_find_costs() {
        let mut b = tabletop();
        let far = b.add_region(None, [-0.25, -1.5, 0.0], [0.25, -1.0, 0.75], 0.01, 0.0);
        let cfg = PlannerConfig::default();
        let expr = Arc::new(crate::lang::parse_expr("lambda x. green(x)", &b).unwrap());
        let find = |r| Operator::FindObj {
            expr: expr.clone(),
            region: r,
            obj: Term::Skolem(1),
            pr: prob(0.9),
        };
        let c1 = action_cost(&find(Anchor::region(2)), &b, &cfg);
        let c2 = action_cost(&find(far), &b, &cfg);
        assert!((c2 - c1 - 10f64.ln()).abs() < 1e-12);
        assert_eq!(action_cost(&Operator::Weigh { obj: o(1) }, &b, &PlannerConfig {
            rules: RuleConfig {
                reliability: Reliability { weigh: 1.0, ..Reliability::default() },
                ..RuleConfig::default()
            },
            ..PlannerConfig::default()
        }), 0.0);
    }

    #[test]
    fn likelier_candidate_is_cheaper() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let expr = Arc::new(crate::lang::parse_expr("lambda x. and(can(x), green(x))", &b).unwrap());
        let ex = |i| Operator::ExamineObj {
            expr: expr.clone(),
            obj: o(i),
            pr: prob(0.9),
        };
        let p2 = den_prob(&expr, Anchor::object(2), &b).unwrap();
        let p3 = den_prob(&expr, Anchor::object(3), &b).unwrap();
        assert!(p2 > 0.3 && p3 < 0.01);
        assert!(action_cost(&ex(2), &b, &cfg) < action_cost(&ex(3), &b, &cfg));
        assert!((action_cost(&ex(2), &b, &cfg) + p2.ln()).abs() < 1e-12);
    }

    #[test]
    fn raising_the_chosen_candidate_keeps_it_and_lowers_cost() {
        let b = tabletop();
        let cfg = PlannerConfig::default();
        let g = goal(&b);
        let before = plan(&b, &g, 0, &cfg).unwrap();
        let mut better = b.clone();
        better.object_mut(Anchor::object(2)).unwrap().type_d = crate::testing::types(0.95, 0.03);
        let after = plan(&better, &g, 0, &cfg).unwrap();
        assert!(after.cost <= before.cost);
        assert_eq!(after.steps[0].op.label(&b), before.steps[0].op.label(&b));
    }
}
