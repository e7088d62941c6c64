//! Uniform-cost search backwards from a goal over sets of fluents.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashSet};
use std::fmt::Debug;
use std::hash::Hash;

use ordered_float::OrderedFloat;

/// A planning problem seen through regression.
pub trait RegressionDomain {
    type Fluent: Clone + Ord + Hash + Debug;
    type Step: Clone + Debug;

    /// Whether the subgoal already holds in the initial state.
    fn satisfied(&self, subgoal: &BTreeSet<Self::Fluent>) -> bool;

    /// Every step whose results are relevant to `subgoal`, with the subgoal
    /// that must hold before it.
    fn predecessors(&self, subgoal: &BTreeSet<Self::Fluent>) -> Vec<Edge<Self::Fluent, Self::Step>>;
}

#[derive(Clone, Debug)]
pub struct Edge<F, S> {
    pub step: S,
    /// Used to order equal-cost plans.
    pub label: String,
    pub subgoal: BTreeSet<F>,
    pub cost: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchLimits {
    pub max_expansions: usize,
    pub max_depth: Option<usize>,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_expansions: 50_000,
            max_depth: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SearchNode<F, S> {
    pub subgoal: BTreeSet<F>,
    pub g: f64,
    pub depth: usize,
    pub parent: Option<usize>,
    pub step: Option<S>,
}

/// Steps in execution order; `subgoals[i]` must hold before `steps[i]` and
/// the last entry is the goal.
#[derive(Clone, Debug)]
pub struct SearchOutcome<F, S> {
    pub steps: Vec<S>,
    pub subgoals: Vec<BTreeSet<F>>,
    pub cost: f64,
    pub expansions: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("no plan within {0} expansions")]
    ExpansionLimit(usize),
    #[error("search space exhausted without a plan")]
    Exhausted,
}

type Key = (OrderedFloat<f64>, usize, Vec<String>, usize);

/// Minimum-cost regression search. Equal-cost plans are ordered by length,
/// then by their step labels in execution order.
pub fn uniform_cost_search<D: RegressionDomain>(
    domain: &D,
    goal: BTreeSet<D::Fluent>,
    limits: SearchLimits,
) -> Result<SearchOutcome<D::Fluent, D::Step>, SearchError> {
    let mut nodes = vec![SearchNode {
        subgoal: goal,
        g: 0.0,
        depth: 0,
        parent: None,
        step: None,
    }];
    let mut labels: Vec<Vec<String>> = vec![Vec::new()];
    let mut open: BinaryHeap<Reverse<Key>> = BinaryHeap::new();
    open.push(Reverse((OrderedFloat(0.0), 0, Vec::new(), 0)));
    let mut closed: HashSet<(BTreeSet<D::Fluent>, usize)> = HashSet::new();
    let mut expansions = 0;

    while let Some(Reverse((_, _, _, idx))) = open.pop() {
        let depth_key = if limits.max_depth.is_some() { nodes[idx].depth } else { 0 };
        if !closed.insert((nodes[idx].subgoal.clone(), depth_key)) {
            continue;
        }
        if domain.satisfied(&nodes[idx].subgoal) {
            return Ok(extract(&nodes, idx, expansions));
        }
        if limits.max_depth.is_some_and(|d| nodes[idx].depth >= d) {
            continue;
        }
        if expansions >= limits.max_expansions {
            return Err(SearchError::ExpansionLimit(limits.max_expansions));
        }
        expansions += 1;
        for edge in domain.predecessors(&nodes[idx].subgoal) {
            if !edge.cost.is_finite() || edge.cost < 0.0 {
                continue;
            }
            let depth = nodes[idx].depth + 1;
            let dk = if limits.max_depth.is_some() { depth } else { 0 };
            if closed.contains(&(edge.subgoal.clone(), dk)) {
                continue;
            }
            let g = nodes[idx].g + edge.cost;
            let mut lab = Vec::with_capacity(labels[idx].len() + 1);
            lab.push(edge.label);
            lab.extend(labels[idx].iter().cloned());
            let child = nodes.len();
            nodes.push(SearchNode {
                subgoal: edge.subgoal,
                g,
                depth,
                parent: Some(idx),
                step: Some(edge.step),
            });
            open.push(Reverse((OrderedFloat(g), depth, lab.clone(), child)));
            labels.push(lab);
        }
    }
    Err(SearchError::Exhausted)
}

fn extract<F: Clone, S: Clone>(nodes: &[SearchNode<F, S>], start: usize, expansions: usize) -> SearchOutcome<F, S> {
    let mut steps = Vec::new();
    let mut subgoals = vec![nodes[start].subgoal.clone()];
    let mut cur = start;
    while let Some(p) = nodes[cur].parent {
        steps.push(nodes[cur].step.clone().expect("non-root node has a step"));
        subgoals.push(nodes[p].subgoal.clone());
        cur = p;
    }
    SearchOutcome {
        steps,
        subgoals,
        cost: nodes[start].g,
        expansions,
    }
}
