//! The plan / execute / observe / replan loop.
//!
//! The stack holds one plan per abstraction level. Each iteration first
//! checks the user goal, then pops every frame whose current pre-image no
//! longer holds, then either plans at the root, refines the top frame's
//! current step, steps over an inference, or executes a primitive and folds
//! its observation into the belief.

use std::collections::BTreeSet;

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::belief::{
    associate_detection, look_region_confidence, update_weight, Anchor, BeliefState, ObservationNoiseModel,
    PoseDistribution,
};
use crate::lang::{GoalFormula, Term};
use crate::planner::{
    goal_conds, placement_spot, plan_for, refine, Cond, Judge, Operator, Plan, PlanRequest, PlannerConfig, Step,
    CONCRETE,
};
use crate::sim::{Action, Observation, WorldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Limits {
    pub max_primitives: usize,
    pub max_replans: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_primitives: 200,
            max_replans: 25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Success,
    PlanningFailure,
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Action,
    Observation,
    Push,
    Pop,
    Replan,
    Bind,
    Done,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSummary {
    pub anchor: String,
    pub map_type: String,
    pub pose: [f64; 4],
    pub color: String,
    pub weight_g: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub seed: u64,
    pub step: usize,
    pub kind: RecordKind,
    pub payload: Value,
    pub belief: Vec<ObjectSummary>,
    pub stack_depth: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub records: Vec<TraceRecord>,
}

impl ExecutionTrace {
    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub primitives: usize,
    pub replans: usize,
    pub belief: BeliefState,
    pub trace: ExecutionTrace,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub plan: Plan,
    pub cursor: usize,
}

#[derive(Clone, Debug, Default)]
pub struct PlanStack {
    pub frames: Vec<Frame>,
}

/// Everything the loop needs besides the belief and the world.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub planner: PlannerConfig,
    pub noise: ObservationNoiseModel,
    pub limits: Limits,
    /// Mahalanobis gate for matching detections to known objects.
    pub gate: f64,
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

pub fn summarize(b: &BeliefState) -> Vec<ObjectSummary> {
    b.objects
        .iter()
        .map(|(a, o)| {
            let color = b
                .relations
                .colors
                .keys()
                .map(|c| (c, b.prob_ground_relation(c, &[*a]).unwrap_or(0.0)))
                .fold(None::<(&String, f64)>, |best, (c, p)| match best {
                    Some((_, bp)) if bp >= p => best,
                    _ => Some((c, p)),
                })
                .map(|(c, _)| c.clone())
                .unwrap_or_default();
            ObjectSummary {
                anchor: b.label(*a),
                map_type: o.type_d.map_type().map(|(t, _)| t.to_string()).unwrap_or_default(),
                pose: [0, 1, 2, 3].map(|i| round4(o.pose_d.mean[i])),
                color,
                weight_g: round4(o.weight_d.median_grams()),
            }
        })
        .collect()
}

/// Index of the deepest frame such that it and every frame below it still
/// have their current pre-image true; `None` when even the root fails.
pub fn preimage_valid(stack: &PlanStack, belief: &BeliefState, config: &PlannerConfig) -> Option<usize> {
    let mut deepest = None;
    for (i, f) in stack.frames.iter().enumerate() {
        let judge = Judge {
            belief,
            config,
            given: &f.plan.given,
        };
        let idx = f.cursor.min(f.plan.preimages.len() - 1);
        if judge.satisfying_assignment(&f.plan.preimages[idx]).is_none() {
            break;
        }
        deepest = Some(i);
    }
    deepest
}

/// Forwards a ground action to the world.
pub fn execute_primitive(action: &Action, world: &mut WorldState) -> Observation {
    world.step(action)
}

/// Root plans are only made on an empty stack, so placeholder ids never
/// collide with a live frame.
const SKOLEM_BASE: u32 = 1;

struct Runner<'a> {
    belief: BeliefState,
    stack: PlanStack,
    trace: ExecutionTrace,
    config: &'a RunConfig,
    seed: u64,
    primitives: usize,
    replans: usize,
    /// Root plans that could not be refined since the last primitive.
    stalled: BTreeSet<String>,
}

enum Fault {
    NotGround(String),
}

impl Runner<'_> {
    fn record(&mut self, kind: RecordKind, payload: Value) {
        let step = self.trace.records.len();
        self.trace.records.push(TraceRecord {
            seed: self.seed,
            step,
            kind,
            payload,
            belief: summarize(&self.belief),
            stack_depth: self.stack.frames.len(),
        });
    }

    fn label(&self, t: &Term) -> String {
        match t {
            Term::Const(a) => self.belief.label(*a),
            other => other.to_string(),
        }
    }

    fn push(&mut self, plan: Plan) {
        let payload = json!({
            "level": plan.level,
            "plan": plan.render(&self.belief),
            "cost": round4(plan.cost),
            "goal": plan.goal.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        });
        self.stack.frames.push(Frame { plan, cursor: 0 });
        self.record(RecordKind::Push, payload);
    }

    fn pop(&mut self, keep: usize, reason: &str) {
        let n = self.stack.frames.len() - keep;
        self.stack.frames.truncate(keep);
        self.record(RecordKind::Pop, json!({ "frames": n, "reason": reason }));
    }

    fn replan(&mut self) {
        self.replans += 1;
        self.record(RecordKind::Replan, json!({ "count": self.replans }));
    }

    fn anchor_of(t: &Term) -> Result<Anchor, Fault> {
        t.as_const().ok_or_else(|| Fault::NotGround(t.to_string()))
    }

    fn ground_action(&self, step: &Step) -> Result<Action, Fault> {
        let g = &self.config.planner.geometry;
        let b = &self.belief;
        Ok(match &step.op {
            Operator::MoveBase { target, .. } => {
                let base = if target.is_object() {
                    let (x, y) = b.object(*target).map_err(|e| Fault::NotGround(e.to_string()))?.pose_d.xy();
                    g.approach_object(x, y)
                } else {
                    g.approach_region(b.region(*target).map_err(|e| Fault::NotGround(e.to_string()))?)
                };
                Action::MoveBase { base }
            }
            Operator::Look { obj } => {
                Self::anchor_of(obj)?;
                Action::Look
            }
            Operator::LookAtRegion { .. } => Action::LookAtRegion,
            Operator::Pick { obj } => {
                let a = Self::anchor_of(obj)?;
                let (x, y) = b.object(a).map_err(|e| Fault::NotGround(e.to_string()))?.pose_d.xy();
                Action::Pick { x, y }
            }
            Operator::Weigh { obj } => {
                Self::anchor_of(obj)?;
                Action::Weigh
            }
            Operator::Place { obj, region, spot } => {
                let a = Self::anchor_of(obj)?;
                let s = placement_spot(b, &self.config.planner, Some(a), *region).unwrap_or(*spot);
                Action::Place { x: s[0], y: s[1] }
            }
            other => return Err(Fault::NotGround(format!("{} is not a physical step", other.name()))),
        })
    }

    fn inflate_pose(&mut self, a: Anchor) {
        if self.belief.held == Some(a) {
            return;
        }
        if let Ok(o) = self.belief.object_mut(a) {
            o.pose_d.cov *= 4.0;
        }
    }

    /// Folds an observation into the belief; returns anchors created.
    fn fold(&mut self, step: &Step, action: &Action, obs: &Observation) -> (Value, Vec<Anchor>) {
        let noise = &self.config.noise;
        let mut created = Vec::new();
        let payload = match (&step.op, obs) {
            (Operator::MoveBase { .. }, Observation::Null) => {
                if let Action::MoveBase { base } = action {
                    self.belief.robot_pose = PoseDistribution::exact([base.x, base.y, 0.0, base.theta]);
                }
                json!({ "kind": "null" })
            }
            (Operator::Look { .. } | Operator::LookAtRegion { .. }, Observation::Detections { detections }) => {
                let mut seen = Vec::new();
                let mut dets = Vec::new();
                for d in detections {
                    match associate_detection(&self.belief, d, noise, self.config.gate) {
                        Ok(assoc) => {
                            self.belief = assoc.belief;
                            seen.push(assoc.anchor);
                            if assoc.is_new {
                                created.push(assoc.anchor);
                            }
                            dets.push(json!({
                                "anchor": self.belief.label(assoc.anchor),
                                "new": assoc.is_new,
                                "type": d.type_name,
                                "pose": d.pose.map(round4),
                                "hsv": d.hsv.map(round4),
                            }));
                        }
                        Err(e) => log::warn!("dropped detection: {e}"),
                    }
                }
                if let Operator::Look { obj: Term::Const(a) } = &step.op {
                    if !seen.contains(a) {
                        self.inflate_pose(*a);
                    }
                }
                if let Operator::LookAtRegion { region } = &step.op {
                    let m = self.belief.robot_pose.mean;
                    let base = crate::geometry::Base {
                        x: m[0],
                        y: m[1],
                        theta: m[3],
                    };
                    if let Ok(r) = self.belief.region(*region) {
                        let cov = self.config.planner.geometry.region_coverage(&base, r);
                        let c = look_region_confidence(self.belief.confidence(*region), cov);
                        self.belief.region_confidence.insert(*region, c);
                    }
                }
                json!({
                    "kind": "detections",
                    "detections": dets,
                    "new_anchors": created.iter().map(|a| self.belief.label(*a)).collect::<Vec<_>>(),
                })
            }
            (Operator::Pick { obj: Term::Const(a) }, Observation::Weight { grams }) => {
                if let Ok(b) = update_weight(&self.belief, *a, *grams, noise) {
                    self.belief = b;
                }
                self.belief.held = Some(*a);
                if let Ok(o) = self.belief.object_mut(*a) {
                    o.detection_weight = 1.0;
                }
                json!({ "kind": "weight", "anchor": self.belief.label(*a), "grams": round4(*grams) })
            }
            (Operator::Weigh { obj: Term::Const(a) }, Observation::Weight { grams }) => {
                if let Ok(b) = update_weight(&self.belief, *a, *grams, noise) {
                    self.belief = b;
                }
                if let Ok(o) = self.belief.object_mut(*a) {
                    o.detection_weight = 1.0;
                }
                json!({ "kind": "weight", "anchor": self.belief.label(*a), "grams": round4(*grams) })
            }
            (Operator::Place { obj: Term::Const(a), region, .. }, Observation::Null) => {
                let z = self.belief.region(*region).map(|r| r.max[2]).unwrap_or(0.0);
                if let (Action::Place { x, y }, Ok(o)) = (action, self.belief.object_mut(*a)) {
                    let theta = o.pose_d.mean[3];
                    o.pose_d.mean = [*x, *y, z, theta].into();
                    o.pose_d.cov = Matrix4::identity() * 1e-6;
                }
                self.belief.held = None;
                json!({ "kind": "null", "anchor": self.belief.label(*a), "region": self.belief.label(*region) })
            }
            (Operator::Pick { obj: Term::Const(a) }, Observation::ActionFailed { reason }) => {
                self.inflate_pose(*a);
                json!({ "kind": "failed", "reason": reason })
            }
            (_, Observation::ActionFailed { reason }) => json!({ "kind": "failed", "reason": reason }),
            (_, other) => json!({ "kind": "unexpected", "observation": format!("{other:?}") }),
        };
        (payload, created)
    }

    /// Binds open Skolem placeholders to a newly created anchor that the
    /// search description plausibly denotes.
    fn bind_skolems(&mut self, created: &[Anchor]) {
        for &a in created {
            let mut target = None;
            'frames: for f in &self.stack.frames {
                for s in &f.plan.steps {
                    if let Operator::FindObj { expr, obj: Term::Skolem(k), .. } = &s.op {
                        let threshold = s
                            .preconds
                            .iter()
                            .find_map(|(c, _)| match c {
                                Cond::ExistsIn { p, .. } => Some(p.0),
                                _ => None,
                            })
                            .unwrap_or(0.0);
                        if crate::lang::den_prob(expr, a, &self.belief).is_ok_and(|p| p >= threshold) {
                            target = Some(*k);
                            break 'frames;
                        }
                    }
                }
            }
            let Some(k) = target else { continue };
            let f = |t: &Term| if *t == Term::Skolem(k) { Term::Const(a) } else { t.clone() };
            for fr in &mut self.stack.frames {
                let p = &mut fr.plan;
                p.steps = p.steps.iter().map(|s| s.map_terms(&f)).collect();
                p.preimages = p
                    .preimages
                    .iter()
                    .map(|s| s.iter().map(|c| c.map_terms(&f)).collect::<BTreeSet<_>>())
                    .collect();
                p.goal = p.goal.iter().map(|c| c.map_terms(&f)).collect();
            }
            let label = self.belief.label(a);
            self.record(RecordKind::Bind, json!({ "skolem": format!("Sk{k}"), "anchor": label }));
        }
    }
}

/// Runs the loop until the goal holds in the belief or a budget runs out.
pub fn run(belief: BeliefState, goal: &GoalFormula, world: &mut WorldState, config: &RunConfig, seed: u64) -> Outcome {
    let (goal_set, given) = goal_conds(goal);
    let mut r = Runner {
        belief,
        stack: PlanStack::default(),
        trace: ExecutionTrace::default(),
        config,
        seed,
        primitives: 0,
        replans: 0,
        stalled: BTreeSet::new(),
    };
    let pc = &config.planner;
    let finish = |mut r: Runner<'_>, status: Status, diagnostic: Option<String>| {
        let mut payload = json!({ "status": status, "primitives": r.primitives, "replans": r.replans });
        if let Some(d) = &diagnostic {
            payload["diagnostic"] = json!(d);
        }
        r.record(RecordKind::Done, payload);
        Outcome {
            status,
            primitives: r.primitives,
            replans: r.replans,
            belief: r.belief,
            trace: r.trace,
            diagnostic,
        }
    };

    loop {
        let judge = Judge {
            belief: &r.belief,
            config: pc,
            given: &given,
        };
        if judge.satisfying_assignment(&goal_set).is_some() {
            return finish(r, Status::Success, None);
        }

        if !r.stack.frames.is_empty() {
            let keep = preimage_valid(&r.stack, &r.belief, pc).map_or(0, |k| k + 1);
            if keep < r.stack.frames.len() {
                r.pop(keep, "preimage");
                r.replan();
                if r.replans > config.limits.max_replans {
                    return finish(r, Status::BudgetExhausted, Some("replan budget spent".into()));
                }
                continue;
            }
        }

        if r.stack.frames.is_empty() {
            let req = PlanRequest {
                goal: goal_set.clone(),
                vars: &goal.vars,
                given: &given,
                level: 0,
                skolem_base: SKOLEM_BASE,
            };
            match plan_for(&r.belief, req, pc) {
                Ok(p) if r.stalled.contains(&p.render(&r.belief)) => {
                    let msg = format!("no refinable plan: {}", p.render(&r.belief));
                    return finish(r, Status::PlanningFailure, Some(msg));
                }
                Ok(p) => r.push(p),
                Err(e) => return finish(r, Status::PlanningFailure, Some(e.to_string())),
            }
            continue;
        }

        let top = r.stack.frames.len() - 1;
        let frame = &r.stack.frames[top];
        if frame.cursor >= frame.plan.steps.len() {
            let judge = Judge {
                belief: &r.belief,
                config: pc,
                given: &frame.plan.given,
            };
            let reached = judge.satisfying_assignment(&frame.plan.goal).is_some();
            r.pop(top, if reached { "complete" } else { "incomplete" });
            if reached {
                if let Some(parent) = r.stack.frames.last_mut() {
                    parent.cursor += 1;
                }
            } else {
                r.replan();
                if r.replans > config.limits.max_replans {
                    return finish(r, Status::BudgetExhausted, Some("replan budget spent".into()));
                }
            }
            continue;
        }

        let step = frame.plan.steps[frame.cursor].clone();
        if frame.plan.level < CONCRETE {
            match refine(&step, &frame.plan, &r.belief, pc, SKOLEM_BASE) {
                Ok(p) => r.push(p),
                Err(e) => {
                    log::debug!("refinement failed: {e}");
                    if top == 0 {
                        let rendered = r.stack.frames[0].plan.render(&r.belief);
                        r.stalled.insert(rendered);
                    }
                    r.pop(top, "refine-failed");
                    r.replan();
                    if r.replans > config.limits.max_replans {
                        return finish(r, Status::BudgetExhausted, Some("replan budget spent".into()));
                    }
                }
            }
            continue;
        }

        if step.is_inference() {
            r.stack.frames[top].cursor += 1;
            continue;
        }

        if r.primitives >= config.limits.max_primitives {
            return finish(r, Status::BudgetExhausted, Some("primitive budget spent".into()));
        }
        let action = match r.ground_action(&step) {
            Ok(a) => a,
            Err(Fault::NotGround(what)) => {
                log::error!("planner produced a non-ground action: {what}");
                return finish(r, Status::BudgetExhausted, Some(format!("non-ground action: {what}")));
            }
        };
        let target = match &step.op {
            Operator::Look { obj } | Operator::Pick { obj } | Operator::Weigh { obj } | Operator::Place { obj, .. } => {
                Some(r.label(obj))
            }
            Operator::MoveBase { target, .. } => Some(r.belief.label(*target)),
            Operator::LookAtRegion { region } => Some(r.belief.label(*region)),
            _ => None,
        };
        let mut payload = json!({ "op": step.op.name(), "label": step.op.label(&r.belief), "action": action });
        if let Operator::Place { region, .. } = &step.op {
            payload["region"] = json!(r.belief.label(*region));
        }
        payload["target"] = json!(target);
        r.record(RecordKind::Action, payload);
        let obs = execute_primitive(&action, world);
        r.primitives += 1;
        r.stalled.clear();
        let (payload, created) = r.fold(&step, &action, &obs);
        r.record(RecordKind::Observation, payload);
        r.stack.frames[top].cursor += 1;
        r.bind_skolems(&created);
    }
}
