//! Declared relations and their probabilities under a belief.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::gauss::{circular_interval_prob, interval_prob};
use super::{Anchor, BeliefError, BeliefState, Result};

/// Axis-aligned HSV volume naming a color. `hue.0 > hue.1` wraps through 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HsvBox {
    pub hue: (f64, f64),
    pub sat: (f64, f64),
    pub val: (f64, f64),
}

impl HsvBox {
    pub fn contains(&self, hsv: [f64; 3]) -> bool {
        let (hl, hh) = self.hue;
        let h_ok = if hl <= hh {
            hsv[0] >= hl && hsv[0] <= hh
        } else {
            hsv[0] >= hl || hsv[0] <= hh
        };
        h_ok && hsv[1] >= self.sat.0
            && hsv[1] <= self.sat.1
            && hsv[2] >= self.val.0
            && hsv[2] <= self.val.1
    }
}

/// Interval in grams; `max` may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightInterval {
    pub min_grams: f64,
    #[serde(default = "infinite")]
    pub max_grams: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyDim {
    Type,
    Color,
    Weight,
    Pose,
    Existence,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Spatial {
    On,
    In,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RelationKind<'a> {
    Type(&'a str),
    Color(&'a HsvBox),
    Weight(&'a WeightInterval),
    Spatial(Spatial),
    /// Holds of every existing object.
    True,
}

impl RelationKind<'_> {
    pub fn arity(&self) -> usize {
        match self {
            RelationKind::Spatial(_) => 2,
            _ => 1,
        }
    }

    pub fn dim(&self) -> PropertyDim {
        match self {
            RelationKind::Type(_) => PropertyDim::Type,
            RelationKind::Color(_) => PropertyDim::Color,
            RelationKind::Weight(_) => PropertyDim::Weight,
            RelationKind::Spatial(_) => PropertyDim::Pose,
            RelationKind::True => PropertyDim::Existence,
        }
    }
}

/// The vocabulary of ground relations: type names, color names, weight
/// classes, and the spatial `on`/`in`. Names are lowercase.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationSet {
    pub types: Vec<String>,
    pub colors: BTreeMap<String, HsvBox>,
    pub weights: BTreeMap<String, WeightInterval>,
}

impl RelationSet {
    /// Color boxes and the 400 g `heavy` class used unless a scenario
    /// overrides them.
    pub fn with_defaults(types: Vec<String>) -> Self {
        let sv = |hue| HsvBox {
            hue,
            sat: (0.3, 1.0),
            val: (0.2, 1.0),
        };
        let colors = [
            ("green", sv((0.22, 0.45))),
            ("red", sv((0.95, 0.05))),
            ("blue", sv((0.55, 0.70))),
        ]
        .into_iter()
        .map(|(n, b)| (n.to_string(), b))
        .collect();
        let weights = [(
            "heavy".to_string(),
            WeightInterval {
                min_grams: 400.0,
                max_grams: f64::INFINITY,
            },
        )]
        .into_iter()
        .collect();
        RelationSet {
            types: types.into_iter().map(|t| t.to_lowercase()).collect(),
            colors,
            weights,
        }
    }

    pub fn lookup(&self, name: &str) -> Option<RelationKind<'_>> {
        let lname = name.to_lowercase();
        if let Some(t) = self.types.iter().find(|t| **t == lname) {
            return Some(RelationKind::Type(t));
        }
        if let Some(c) = self.colors.get(&lname) {
            return Some(RelationKind::Color(c));
        }
        if let Some(w) = self.weights.get(&lname) {
            return Some(RelationKind::Weight(w));
        }
        match lname.as_str() {
            "on" => Some(RelationKind::Spatial(Spatial::On)),
            "in" => Some(RelationKind::Spatial(Spatial::In)),
            "true" => Some(RelationKind::True),
            _ => None,
        }
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.lookup(name).is_some()
    }
}

pub(super) fn prob_ground_relation(b: &BeliefState, rel: &str, args: &[Anchor]) -> Result<f64> {
    let kind = b
        .relations
        .lookup(rel)
        .ok_or_else(|| BeliefError::UnknownRelation(rel.to_string()))?;
    if kind.arity() != args.len() {
        return Err(BeliefError::Arity {
            name: rel.to_string(),
            expected: kind.arity(),
            got: args.len(),
        });
    }
    let o = b.object(args[0])?;
    let p = match kind {
        RelationKind::True => 1.0,
        RelationKind::Type(t) => o.type_d.prob(t),
        RelationKind::Color(bx) => {
            let m = &o.color_d.mean;
            let c = &o.color_d.cov;
            let hue = circular_interval_prob(m[0], c[(0, 0)].sqrt(), bx.hue.0, bx.hue.1);
            let sat = truncated_unit_prob(m[1], c[(1, 1)].sqrt(), bx.sat);
            let val = truncated_unit_prob(m[2], c[(2, 2)].sqrt(), bx.val);
            hue * sat * val
        }
        RelationKind::Weight(w) => {
            interval_prob(o.weight_d.mu, o.weight_d.sigma, w.min_grams.ln(), w.max_grams.ln())
        }
        RelationKind::Spatial(_) => {
            let region = b
                .regions
                .get(&args[1])
                .ok_or(BeliefError::NotARegion(args[1], rel.to_string()))?;
            if b.held == Some(args[0]) {
                0.0
            } else {
                let m = &o.pose_d.mean;
                let c = &o.pose_d.cov;
                interval_prob(m[0], c[(0, 0)].sqrt(), region.min[0], region.max[0])
                    * interval_prob(m[1], c[(1, 1)].sqrt(), region.min[1], region.max[1])
            }
        }
    };
    Ok((p * o.detection_weight).clamp(0.0, 1.0))
}

/// Mass over `[lo, hi]` of a normal truncated to `[0, 1]`.
fn truncated_unit_prob(mu: f64, sigma: f64, (lo, hi): (f64, f64)) -> f64 {
    let z = interval_prob(mu, sigma, 0.0, 1.0);
    if z <= 0.0 {
        return 0.0;
    }
    (interval_prob(mu, sigma, lo.max(0.0), hi.min(1.0)) / z).clamp(0.0, 1.0)
}
