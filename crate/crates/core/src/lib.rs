//! Belief-space goal specification, interpretation and achievement for an
//! open-world tabletop manipulation agent.
//!
//! * [`belief`]: object-centric probabilistic state and its updates.
//! * [`lang`]: denoting expressions, goal formulas, and their evaluation.
//! * [`planner`]: hierarchical regression planning with `-ln p` costs.
//! * [`executive`]: the plan / execute / observe / replan loop.
//! * [`sim`]: a seeded tabletop world standing in for the robot.
//! * [`cli`]: scenario files, traces, and batch runs.

pub mod belief;
pub mod cli;
pub mod executive;
pub mod geometry;
pub mod lang;
pub mod planner;
pub mod sim;

#[cfg(test)]
pub(crate) mod testing;
