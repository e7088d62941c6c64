//! Object-centric probabilistic belief state.
//!
//! Every object the agent knows about is an [`ObjectBelief`]: independent
//! distributions over its type, 4-DOF pose, HSV color and log-weight, plus a
//! detection weight giving the probability that it exists at all. Updates are
//! pure: they take a `&BeliefState` and hand back a new one.

mod assoc;
pub mod gauss;
mod relations;
mod update;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assoc::{associate_detection, Association, Detection, DEFAULT_GATE};
pub use gauss::{cov_dominates, normal_cdf, wrap_angle, wrap_unit};
pub use relations::{HsvBox, PropertyDim, RelationKind, RelationSet, Spatial, WeightInterval};
pub use update::{
    exists_in_region_prob, holds_cont_fluent, look_region_confidence, update_color, update_pose,
    update_type, update_weight, BeliefQuantity,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeliefError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown anchor {0}")]
    UnknownAnchor(Anchor),
    #[error("relation `{name}` takes {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("covariance dimension mismatch ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("singular innovation covariance")]
    SingularInnovation,
    #[error("weight observation must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("argument {0} of relation `{1}` must be a region")]
    NotARegion(Anchor, String),
}

pub type Result<T> = std::result::Result<T, BeliefError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorKind {
    Object,
    Region,
}

/// Internal name for something the agent believes exists. Carries no
/// external meaning; named constants get a label in [`BeliefState::names`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Anchor {
    pub kind: AnchorKind,
    pub id: u32,
}

impl Anchor {
    pub const fn object(id: u32) -> Self {
        Anchor {
            kind: AnchorKind::Object,
            id,
        }
    }

    pub const fn region(id: u32) -> Self {
        Anchor {
            kind: AnchorKind::Region,
            id,
        }
    }

    pub fn is_object(&self) -> bool {
        self.kind == AnchorKind::Object
    }

    /// Parses the rendered `_oN_` / `_regN_` form.
    pub fn parse_internal(s: &str) -> Option<Anchor> {
        let inner = s.strip_prefix('_')?.strip_suffix('_')?;
        if let Some(n) = inner.strip_prefix("reg") {
            return n.parse().ok().map(Anchor::region);
        }
        inner.strip_prefix('o')?.parse().ok().map(Anchor::object)
    }
}

impl fmt::Display for Anchor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AnchorKind::Object => write!(f, "_o{}_", self.id),
            AnchorKind::Region => write!(f, "_reg{}_", self.id),
        }
    }
}

/// Multinoulli distribution over the scenario's fixed type set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    pub probs: BTreeMap<String, f64>,
}

impl TypeDistribution {
    pub fn uniform(types: &[String]) -> Self {
        let p = 1.0 / types.len() as f64;
        TypeDistribution {
            probs: types.iter().map(|t| (t.clone(), p)).collect(),
        }
    }

    pub fn prob(&self, ty: &str) -> f64 {
        self.probs.get(ty).copied().unwrap_or(0.0)
    }

    /// Most probable type; ties resolve to the lexicographically first name.
    pub fn map_type(&self) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for (t, &p) in &self.probs {
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((t.as_str(), p));
            }
        }
        best
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }
}

/// Gaussian over (x, y, z, θ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseDistribution {
    pub mean: Vector4<f64>,
    pub cov: Matrix4<f64>,
}

impl PoseDistribution {
    pub fn new(mean: [f64; 4], std: [f64; 4]) -> Self {
        let mut m = Vector4::from(mean);
        m[3] = wrap_angle(m[3]);
        PoseDistribution {
            mean: m,
            cov: Matrix4::from_diagonal(&Vector4::from(std.map(|s| s * s))),
        }
    }

    pub fn exact(mean: [f64; 4]) -> Self {
        Self::new(mean, [0.0; 4])
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.mean[0], self.mean[1])
    }

    pub fn max_position_std(&self) -> f64 {
        (0..3).map(|i| self.cov[(i, i)]).fold(0.0, f64::max).sqrt()
    }
}

/// Gaussian in HSV space truncated to the unit box; hue is circular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColorDistribution {
    pub mean: Vector3<f64>,
    pub cov: Matrix3<f64>,
}

impl ColorDistribution {
    pub fn new(mean: [f64; 3], std: [f64; 3]) -> Self {
        let mut m = Vector3::from(mean);
        m[0] = wrap_unit(m[0]);
        m[1] = m[1].clamp(0.0, 1.0);
        m[2] = m[2].clamp(0.0, 1.0);
        ColorDistribution {
            mean: m,
            cov: Matrix3::from_diagonal(&Vector3::from(std.map(|s| s * s))),
        }
    }
}

/// Gaussian over ln(grams).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightDistribution {
    pub mu: f64,
    pub sigma: f64,
}

impl WeightDistribution {
    pub fn from_grams(grams: f64, sigma: f64) -> Self {
        WeightDistribution {
            mu: grams.ln(),
            sigma,
        }
    }

    pub fn median_grams(&self) -> f64 {
        self.mu.exp()
    }
}

impl Default for WeightDistribution {
    /// Prior for an arbitrary object: median 250 g, log-std 1.
    fn default() -> Self {
        WeightDistribution::from_grams(250.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectBelief {
    pub anchor: Anchor,
    pub type_d: TypeDistribution,
    pub pose_d: PoseDistribution,
    pub color_d: ColorDistribution,
    pub weight_d: WeightDistribution,
    pub detection_weight: f64,
}

/// Axis-aligned box in the world frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub anchor: Anchor,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Region {
    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| 0.5 * (self.min[i] + self.max[i]))
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

/// Sensor noise assumed by the estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservationNoiseModel {
    pub types: Vec<String>,
    /// `type_confusion[true][observed]`, indices into `types`.
    pub type_confusion: Vec<Vec<f64>>,
    pub pose_obs_cov: Matrix4<f64>,
    pub color_obs_cov: Matrix3<f64>,
    pub weight_obs_sigma: f64,
    pub false_negative_rate: f64,
}

impl ObservationNoiseModel {
    /// Diagonal confusion `diag` with the remainder spread evenly.
    pub fn with_diagonal_confusion(
        types: Vec<String>,
        diag: f64,
        pose_std: [f64; 4],
        color_std: [f64; 3],
        weight_obs_sigma: f64,
        false_negative_rate: f64,
    ) -> Self {
        let n = types.len();
        let off = if n > 1 { (1.0 - diag) / (n - 1) as f64 } else { 0.0 };
        let type_confusion = (0..n)
            .map(|i| (0..n).map(|j| if i == j { diag } else { off }).collect())
            .collect();
        ObservationNoiseModel {
            types,
            type_confusion,
            pose_obs_cov: Matrix4::from_diagonal(&Vector4::from(pose_std.map(|s| s * s))),
            color_obs_cov: Matrix3::from_diagonal(&Vector3::from(color_std.map(|s| s * s))),
            weight_obs_sigma,
            false_negative_rate,
        }
    }

    pub fn type_index(&self, ty: &str) -> Option<usize> {
        self.types.iter().position(|t| t == ty)
    }
}

/// The agent's whole belief.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    pub objects: BTreeMap<Anchor, ObjectBelief>,
    pub robot_pose: PoseDistribution,
    pub held: Option<Anchor>,
    pub region_confidence: BTreeMap<Anchor, f64>,
    pub regions: BTreeMap<Anchor, Region>,
    /// Prior that an object matching a goal description lies in each region.
    pub region_priors: BTreeMap<Anchor, f64>,
    /// Labels for named constants declared at initialization time.
    pub names: BTreeMap<Anchor, String>,
    pub relations: Arc<RelationSet>,
    pub weight_prior: WeightDistribution,
    next_object: u32,
    next_region: u32,
}

impl BeliefState {
    pub fn new(relations: Arc<RelationSet>) -> Self {
        BeliefState {
            objects: BTreeMap::new(),
            robot_pose: PoseDistribution::exact([0.0; 4]),
            held: None,
            region_confidence: BTreeMap::new(),
            regions: BTreeMap::new(),
            region_priors: BTreeMap::new(),
            names: BTreeMap::new(),
            relations,
            weight_prior: WeightDistribution::default(),
            next_object: 1,
            next_region: 1,
        }
    }

    pub fn fresh_object_anchor(&mut self) -> Anchor {
        let a = Anchor::object(self.next_object);
        self.next_object += 1;
        a
    }

    pub fn fresh_region_anchor(&mut self) -> Anchor {
        let a = Anchor::region(self.next_region);
        self.next_region += 1;
        a
    }

    pub fn add_region(
        &mut self,
        name: Option<&str>,
        min: [f64; 3],
        max: [f64; 3],
        prior: f64,
        confidence: f64,
    ) -> Anchor {
        let anchor = self.fresh_region_anchor();
        self.regions.insert(anchor, Region { anchor, min, max });
        self.region_priors.insert(anchor, prior);
        self.region_confidence.insert(anchor, confidence);
        if let Some(n) = name {
            self.names.insert(anchor, n.to_string());
        }
        anchor
    }

    /// Inserts an object under a freshly assigned anchor.
    pub fn add_object(
        &mut self,
        name: Option<&str>,
        type_d: TypeDistribution,
        pose_d: PoseDistribution,
        color_d: ColorDistribution,
        weight_d: WeightDistribution,
        detection_weight: f64,
    ) -> Anchor {
        let anchor = self.fresh_object_anchor();
        self.objects.insert(
            anchor,
            ObjectBelief {
                anchor,
                type_d,
                pose_d,
                color_d,
                weight_d,
                detection_weight,
            },
        );
        if let Some(n) = name {
            self.names.insert(anchor, n.to_string());
        }
        anchor
    }

    pub fn object(&self, a: Anchor) -> Result<&ObjectBelief> {
        self.objects.get(&a).ok_or(BeliefError::UnknownAnchor(a))
    }

    pub fn object_mut(&mut self, a: Anchor) -> Result<&mut ObjectBelief> {
        self.objects.get_mut(&a).ok_or(BeliefError::UnknownAnchor(a))
    }

    pub fn region(&self, a: Anchor) -> Result<&Region> {
        self.regions.get(&a).ok_or(BeliefError::UnknownAnchor(a))
    }

    pub fn label(&self, a: Anchor) -> String {
        self.names.get(&a).cloned().unwrap_or_else(|| a.to_string())
    }

    /// Resolves a named constant or a rendered internal anchor.
    pub fn resolve(&self, name: &str) -> Option<Anchor> {
        if let Some((a, _)) = self.names.iter().find(|(_, n)| n.as_str() == name) {
            return Some(*a);
        }
        let a = Anchor::parse_internal(name)?;
        (self.objects.contains_key(&a) || self.regions.contains_key(&a)).then_some(a)
    }

    pub fn object_anchors(&self) -> impl Iterator<Item = Anchor> + '_ {
        self.objects.keys().copied()
    }

    pub fn confidence(&self, region: Anchor) -> f64 {
        self.region_confidence.get(&region).copied().unwrap_or(0.0)
    }

    /// Computes `b(R(args))`.
    pub fn prob_ground_relation(&self, rel: &str, args: &[Anchor]) -> Result<f64> {
        relations::prob_ground_relation(self, rel, args)
    }
}
