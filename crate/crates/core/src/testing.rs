//! Shared fixtures for unit tests.

use std::sync::Arc;

use crate::belief::{
    BeliefState, ColorDistribution, PoseDistribution, RelationSet, TypeDistribution, WeightDistribution,
};
use crate::lang::{parse_goal, GoalFormula};

pub const GOAL: &str =
    "exists o. B(den(lambda x. and(can(x), and(green(x), heavy(x))), o), 0.9) & B(on(o, desk), 0.9)";

pub fn types(can: f64, bx: f64) -> TypeDistribution {
    TypeDistribution {
        probs: [
            ("can".to_string(), can),
            ("box".to_string(), bx),
            ("bottle".to_string(), 1.0 - can - bx),
        ]
        .into(),
    }
}

/// Box `_o1_` crowding can `_o2_` on a table ahead of the robot, a blue can
/// `_o3_`, the desk `_reg1_`, an unexplored region `_reg2_` behind the robot
/// and the table `_reg3_`.
pub fn tabletop() -> BeliefState {
    let names = vec!["can".to_string(), "box".to_string(), "bottle".to_string()];
    let mut b = BeliefState::new(Arc::new(RelationSet::with_defaults(names)));
    let pose = |x: f64, y: f64| PoseDistribution::new([x, y, 0.75, 0.0], [0.1, 0.1, 0.01, 0.1]);
    let green = ColorDistribution::new([0.33, 0.8, 0.7], [0.03; 3]);
    let blue = ColorDistribution::new([0.62, 0.8, 0.7], [0.03; 3]);
    let w = WeightDistribution::default();
    b.add_object(None, types(0.04, 0.92), pose(1.12, 0.07), green.clone(), w, 1.0);
    b.add_object(None, types(0.80, 0.15), pose(1.25, 0.0), green, w, 1.0);
    b.add_object(None, types(0.87, 0.08), pose(1.10, -0.15), blue, w, 1.0);
    b.add_region(Some("desk"), [-0.25, 1.0, 0.0], [0.25, 1.5, 0.75], 0.0, 0.0);
    b.add_region(None, [-1.5, -0.3, 0.0], [-0.9, 0.3, 0.75], 0.1, 0.0);
    b.add_region(Some("table"), [0.9, -0.3, 0.0], [1.5, 0.3, 0.75], 0.0, 1.0);
    b
}

pub fn goal(b: &BeliefState) -> GoalFormula {
    parse_goal(GOAL, b).expect("fixture goal parses")
}

pub fn noise() -> crate::belief::ObservationNoiseModel {
    crate::belief::ObservationNoiseModel::with_diagonal_confusion(
        vec!["can".into(), "box".into(), "bottle".into()],
        0.9,
        [0.01, 0.01, 0.005, 0.05],
        [0.02; 3],
        0.05,
        0.05,
    )
}

/// The world behind [`tabletop`]: the visible green can is light and the
/// heavy green can sits unseen in `_reg2_`.
pub fn tabletop_world(seed: u64) -> crate::sim::WorldState {
    use crate::sim::{Table, WorldObject};
    let obj = |name: &str, t: &str, x: f64, y: f64, hsv: [f64; 3], grams: f64, surface: &str| WorldObject {
        name: name.into(),
        true_type: t.into(),
        pose: [x, y, 0.75, 0.0],
        hsv,
        grams,
        surface: Some(surface.into()),
    };
    let table = |name: &str, min: [f64; 3], max: [f64; 3]| Table {
        name: name.into(),
        min,
        max,
    };
    crate::sim::WorldState::new(
        vec![
            obj("box", "box", 1.12, 0.07, [0.1, 0.5, 0.6], 300.0, "table"),
            obj("light", "can", 1.25, 0.0, [0.33, 0.8, 0.7], 100.0, "table"),
            obj("blue", "can", 1.10, -0.15, [0.62, 0.8, 0.7], 150.0, "table"),
            obj("heavy", "can", -1.2, 0.0, [0.34, 0.8, 0.7], 500.0, "back"),
        ],
        vec![
            table("desk", [-0.25, 1.0, 0.0], [0.25, 1.5, 0.75]),
            table("back", [-1.5, -0.3, 0.0], [-0.9, 0.3, 0.75]),
            table("table", [0.9, -0.3, 0.0], [1.5, 0.3, 0.75]),
        ],
        crate::geometry::Base { x: 0.0, y: 0.0, theta: 0.0 },
        noise(),
        crate::geometry::SensorGeometry::default(),
        seed,
    )
}
