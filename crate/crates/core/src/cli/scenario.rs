//! Scenario files: the world, the robot's initial belief, the goal, and
//! every tunable constant, in one TOML document.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::belief::{
    BeliefState, ColorDistribution, HsvBox, ObservationNoiseModel, PoseDistribution, RelationSet,
    TypeDistribution, WeightDistribution, WeightInterval, DEFAULT_GATE,
};
use crate::executive::{Limits, RunConfig};
use crate::geometry::{Base, SensorGeometry};
use crate::lang::{parse_goal, GoalFormula};
use crate::planner::{PlannerConfig, RuleConfig};
use crate::sim::{Table, WorldObject, WorldState};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("goal: {0}")]
    Goal(String),
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        field: field.into(),
        message: message.into(),
    }
}

/// A table or other support surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Whether goals may refer to the region by name; otherwise the robot
    /// only knows it by anchor.
    #[serde(default = "yes")]
    pub constant: bool,
    /// Prior that an object matching a goal description is somewhere here.
    #[serde(default)]
    pub exists_prior: f64,
    /// Fraction already explored.
    #[serde(default)]
    pub confidence: f64,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightPrior {
    pub grams: f64,
    pub sigma: f64,
}

/// What the robot believes about an object before the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeliefSpec {
    pub types: BTreeMap<String, f64>,
    /// Believed pose; the true pose when absent.
    #[serde(default)]
    pub pose: Option<[f64; 4]>,
    #[serde(default = "default_pose_std")]
    pub pose_std: [f64; 4],
    pub hsv: [f64; 3],
    #[serde(default = "default_hsv_std")]
    pub hsv_std: [f64; 3],
    #[serde(default)]
    pub weight: Option<WeightPrior>,
    #[serde(default = "one")]
    pub detection_weight: f64,
}

fn default_pose_std() -> [f64; 4] {
    [0.1, 0.1, 0.01, 0.1]
}

fn default_hsv_std() -> [f64; 3] {
    [0.03; 3]
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub true_type: String,
    pub surface: String,
    pub xy: [f64; 2],
    #[serde(default)]
    pub theta: f64,
    pub hsv: [f64; 3],
    pub grams: f64,
    /// Absent for objects the robot has never seen.
    #[serde(default)]
    pub belief: Option<BeliefSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub type_diagonal: f64,
    pub pose_std: [f64; 4],
    pub color_std: [f64; 3],
    pub weight_sigma: f64,
    pub false_negative_rate: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            type_diagonal: 0.9,
            pose_std: [0.03, 0.03, 0.03, 0.05],
            color_std: [0.02; 3],
            weight_sigma: 0.05,
            false_negative_rate: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub goal: String,
    pub types: Vec<String>,
    /// Added to, or replacing, the default color boxes.
    #[serde(default)]
    pub colors: BTreeMap<String, HsvBox>,
    /// Added to, or replacing, the default `heavy` class.
    #[serde(default)]
    pub weights: BTreeMap<String, WeightInterval>,
    #[serde(default = "origin")]
    pub robot: Base,
    pub regions: Vec<RegionSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub rules: RuleConfig,
    #[serde(default)]
    pub geometry: SensorGeometry,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "default_gate")]
    pub gate: f64,
}

fn origin() -> Base {
    Base {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    }
}

fn default_gate() -> f64 {
    DEFAULT_GATE
}

/// Everything one seeded run needs.
#[derive(Clone, Debug)]
pub struct RunInputs {
    pub world: WorldState,
    pub belief: BeliefState,
    pub goal: GoalFormula,
    pub config: RunConfig,
}

fn check_prob(field: String, p: f64) -> Result<(), ScenarioError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(field, format!("probability {p} outside [0, 1]")))
    }
}

fn check_std<const N: usize>(field: String, v: &[f64; N]) -> Result<(), ScenarioError> {
    match v.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
        Some(s) => Err(invalid(field, format!("standard deviation {s} must be finite and non-negative"))),
        None => Ok(()),
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let s: Scenario = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario fields are all representable in TOML")
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn relations(&self) -> RelationSet {
        let mut rel = RelationSet::with_defaults(self.types.clone());
        rel.colors.extend(self.colors.iter().map(|(k, v)| (k.to_lowercase(), v.clone())));
        rel.weights.extend(self.weights.iter().map(|(k, v)| (k.to_lowercase(), v.clone())));
        rel
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.types.is_empty() {
            return Err(invalid("types", "at least one type is required"));
        }
        for (i, r) in self.regions.iter().enumerate() {
            check_prob(format!("regions[{i}].exists_prior"), r.exists_prior)?;
            check_prob(format!("regions[{i}].confidence"), r.confidence)?;
            if (0..3).any(|k| r.min[k] > r.max[k]) {
                return Err(invalid(format!("regions[{i}]"), "min exceeds max"));
            }
            if self.regions[..i].iter().any(|o| o.name == r.name) {
                return Err(invalid(format!("regions[{i}].name"), format!("duplicate region `{}`", r.name)));
            }
        }
        for (i, o) in self.objects.iter().enumerate() {
            let at = |f: &str| format!("objects[{i}].{f}");
            if !self.types.contains(&o.true_type) {
                return Err(invalid(at("true_type"), format!("`{}` is not a declared type", o.true_type)));
            }
            if !self.regions.iter().any(|r| r.name == o.surface) {
                return Err(invalid(at("surface"), format!("no region named `{}`", o.surface)));
            }
            if !(o.grams > 0.0) {
                return Err(invalid(at("grams"), "weight must be positive"));
            }
            if let Some(b) = &o.belief {
                let mut total = 0.0;
                for (t, p) in &b.types {
                    if !self.types.contains(t) {
                        return Err(invalid(at(&format!("belief.types.{t}")), "not a declared type"));
                    }
                    check_prob(at(&format!("belief.types.{t}")), *p)?;
                    total += p;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(invalid(at("belief.types"), format!("probabilities sum to {total}, not 1")));
                }
                check_std(at("belief.pose_std"), &b.pose_std)?;
                check_std(at("belief.hsv_std"), &b.hsv_std)?;
                check_prob(at("belief.detection_weight"), b.detection_weight)?;
                if let Some(w) = &b.weight {
                    if !(w.grams > 0.0) || !(w.sigma > 0.0) {
                        return Err(invalid(at("belief.weight"), "grams and sigma must be positive"));
                    }
                }
            }
        }
        check_prob("noise.type_diagonal".into(), self.noise.type_diagonal)?;
        check_prob("noise.false_negative_rate".into(), self.noise.false_negative_rate)?;
        check_std("noise.pose_std".into(), &self.noise.pose_std)?;
        check_std("noise.color_std".into(), &self.noise.color_std)?;
        if !(self.noise.weight_sigma > 0.0) {
            return Err(invalid("noise.weight_sigma", "must be positive"));
        }
        let rel = &self.rules.reliability;
        for (f, p) in [
            ("move_base", rel.move_base),
            ("look", rel.look),
            ("look_at_region", rel.look_at_region),
            ("pick", rel.pick),
            ("place", rel.place),
            ("weigh", rel.weigh),
        ] {
            check_prob(format!("rules.reliability.{f}"), p)?;
        }
        check_prob("rules.plausibility_ratio".into(), self.rules.plausibility_ratio)?;
        check_prob("rules.type_confidence".into(), self.rules.type_confidence)?;
        check_prob("rules.existence_confidence".into(), self.rules.existence_confidence)?;
        if !(self.gate > 0.0) {
            return Err(invalid("gate", "must be positive"));
        }
        let belief = self.belief();
        parse_goal(&self.goal, &belief).map_err(|e| ScenarioError::Goal(e.to_string()))?;
        Ok(())
    }

    fn belief(&self) -> BeliefState {
        let mut b = BeliefState::new(Arc::new(self.relations()));
        b.robot_pose = PoseDistribution::exact([self.robot.x, self.robot.y, 0.0, self.robot.theta]);
        for o in &self.objects {
            let Some(init) = &o.belief else { continue };
            let z = self.surface_height(&o.surface);
            let pose = init.pose.unwrap_or([o.xy[0], o.xy[1], z, o.theta]);
            let weight = init
                .weight
                .as_ref()
                .map(|w| WeightDistribution::from_grams(w.grams, w.sigma))
                .unwrap_or_default();
            let mut probs: BTreeMap<String, f64> = self.types.iter().map(|t| (t.to_lowercase(), 0.0)).collect();
            probs.extend(init.types.iter().map(|(t, p)| (t.to_lowercase(), *p)));
            b.add_object(
                None,
                TypeDistribution { probs },
                PoseDistribution::new(pose, init.pose_std),
                ColorDistribution::new(init.hsv, init.hsv_std),
                weight,
                init.detection_weight,
            );
        }
        for r in &self.regions {
            let name = r.constant.then_some(r.name.as_str());
            b.add_region(name, r.min, r.max, r.exists_prior, r.confidence);
        }
        b
    }

    fn surface_height(&self, name: &str) -> f64 {
        self.regions.iter().find(|r| r.name == name).map_or(0.0, |r| r.max[2])
    }

    pub fn noise_model(&self) -> ObservationNoiseModel {
        let n = &self.noise;
        ObservationNoiseModel::with_diagonal_confusion(
            self.types.clone(),
            n.type_diagonal,
            n.pose_std,
            n.color_std,
            n.weight_sigma,
            n.false_negative_rate,
        )
    }

    pub fn world(&self, seed: u64) -> WorldState {
        let objects = self
            .objects
            .iter()
            .map(|o| WorldObject {
                name: o.name.clone(),
                true_type: o.true_type.clone(),
                pose: [o.xy[0], o.xy[1], self.surface_height(&o.surface), o.theta],
                hsv: o.hsv,
                grams: o.grams,
                surface: Some(o.surface.clone()),
            })
            .collect();
        let tables = self
            .regions
            .iter()
            .map(|r| Table {
                name: r.name.clone(),
                min: r.min,
                max: r.max,
            })
            .collect();
        WorldState::new(objects, tables, self.robot, self.noise_model(), self.geometry.clone(), seed)
    }

    /// Builds the world, belief, goal and configuration for one seed.
    pub fn inputs(&self, seed: u64) -> Result<RunInputs, ScenarioError> {
        let belief = self.belief();
        let goal = parse_goal(&self.goal, &belief).map_err(|e| ScenarioError::Goal(e.to_string()))?;
        Ok(RunInputs {
            world: self.world(seed),
            goal,
            config: RunConfig {
                planner: PlannerConfig {
                    rules: self.rules.clone(),
                    geometry: self.geometry.clone(),
                },
                noise: self.noise_model(),
                limits: self.limits,
                gate: self.gate,
            },
            belief,
        })
    }
}

/// Loads a scenario and builds the inputs for `seed`.
pub fn load_scenario(path: &Path, seed: u64) -> Result<RunInputs, ScenarioError> {
    Scenario::load(path)?.inputs(seed)
}

/// Reads a rule-library file: a bare [`RuleConfig`] document.
pub fn load_rules(path: &Path) -> Result<RuleConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| ScenarioError::Syntax(e.to_string()))
}
