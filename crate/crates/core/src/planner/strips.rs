//! Ground STRIPS problems over integer facts.

use std::collections::BTreeSet;

use super::search::{uniform_cost_search, Edge, RegressionDomain, SearchError, SearchLimits, SearchOutcome};

pub type Fact = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundAction {
    pub name: String,
    pub pre: BTreeSet<Fact>,
    pub add: BTreeSet<Fact>,
    pub del: BTreeSet<Fact>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StripsProblem {
    pub init: BTreeSet<Fact>,
    pub goal: BTreeSet<Fact>,
    pub actions: Vec<GroundAction>,
}

impl GroundAction {
    /// Forward application; `None` when a precondition is missing.
    pub fn apply(&self, state: &BTreeSet<Fact>) -> Option<BTreeSet<Fact>> {
        if !self.pre.is_subset(state) {
            return None;
        }
        let mut next: BTreeSet<Fact> = state.difference(&self.del).copied().collect();
        next.extend(self.add.iter().copied());
        Some(next)
    }

    /// Regression of `subgoal`; `None` when the action adds nothing in it
    /// or deletes something it still needs.
    pub fn regress(&self, subgoal: &BTreeSet<Fact>) -> Option<BTreeSet<Fact>> {
        if self.add.is_disjoint(subgoal) {
            return None;
        }
        if subgoal.iter().any(|f| self.del.contains(f) && !self.add.contains(f)) {
            return None;
        }
        let mut prev: BTreeSet<Fact> = subgoal.difference(&self.add).copied().collect();
        prev.extend(self.pre.iter().copied());
        Some(prev)
    }
}

impl RegressionDomain for StripsProblem {
    type Fluent = Fact;
    type Step = usize;

    fn satisfied(&self, subgoal: &BTreeSet<Fact>) -> bool {
        subgoal.is_subset(&self.init)
    }

    fn predecessors(&self, subgoal: &BTreeSet<Fact>) -> Vec<Edge<Fact, usize>> {
        self.actions
            .iter()
            .enumerate()
            .filter_map(|(i, a)| {
                a.regress(subgoal).map(|s| Edge {
                    step: i,
                    label: a.name.clone(),
                    subgoal: s,
                    cost: a.cost,
                })
            })
            .collect()
    }
}

/// Cheapest plan of at most `max_len` steps, as action indices.
pub fn plan_strips(problem: &StripsProblem, max_len: usize) -> Result<SearchOutcome<Fact, usize>, SearchError> {
    uniform_cost_search(
        problem,
        problem.goal.clone(),
        SearchLimits {
            max_expansions: 1_000_000,
            max_depth: Some(max_len),
        },
    )
}
