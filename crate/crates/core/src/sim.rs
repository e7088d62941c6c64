//! Seeded ground-truth tabletop world.
//!
//! Stands in for the robot and its sensors. Actions are abstract: base
//! motion, looking along the base heading, picking at a point, placing at a
//! point, and weighing the held object.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::belief::{wrap_angle, wrap_unit, Detection, ObservationNoiseModel};
use crate::geometry::{Base, SensorGeometry};

/// Pick targets further than this from any object miss.
pub const GRASP_TOLERANCE: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub name: String,
    pub true_type: String,
    /// (x, y, z, θ)
    pub pose: [f64; 4],
    pub hsv: [f64; 3],
    pub grams: f64,
    pub surface: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Table {
    fn contains_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Action {
    MoveBase { base: Base },
    Look,
    LookAtRegion,
    Pick { x: f64, y: f64 },
    Place { x: f64, y: f64 },
    Weigh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    Detections { detections: Vec<Detection> },
    Weight { grams: f64 },
    ActionFailed { reason: String },
    Null,
}

#[derive(Clone, Debug)]
pub struct WorldState {
    pub objects: Vec<WorldObject>,
    pub robot: Base,
    pub held: Option<usize>,
    pub tables: Vec<Table>,
    pub noise: ObservationNoiseModel,
    pub geometry: SensorGeometry,
    rng: ChaCha8Rng,
}

impl WorldState {
    pub fn new(
        objects: Vec<WorldObject>,
        tables: Vec<Table>,
        robot: Base,
        noise: ObservationNoiseModel,
        geometry: SensorGeometry,
        seed: u64,
    ) -> Self {
        WorldState {
            objects,
            robot,
            held: None,
            tables,
            noise,
            geometry,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn object_named(&self, name: &str) -> Option<&WorldObject> {
        self.objects.iter().find(|o| o.name == name)
    }

    /// Advances the world by one action.
    pub fn step(&mut self, action: &Action) -> Observation {
        match action {
            Action::MoveBase { base } => {
                self.robot = Base {
                    theta: wrap_angle(base.theta),
                    ..*base
                };
                if let Some(h) = self.held {
                    let o = &mut self.objects[h];
                    o.pose[0] = self.robot.x;
                    o.pose[1] = self.robot.y;
                }
                Observation::Null
            }
            Action::Look | Action::LookAtRegion => Observation::Detections {
                detections: self.observe_look(),
            },
            Action::Pick { x, y } => self.pick(*x, *y),
            Action::Place { x, y } => self.place(*x, *y),
            Action::Weigh => match self.held {
                Some(h) => Observation::Weight {
                    grams: self.noisy_weight(h),
                },
                None => Observation::ActionFailed {
                    reason: "nothing held".into(),
                },
            },
        }
    }

    fn noisy_weight(&mut self, idx: usize) -> f64 {
        let z: f64 = self.rng.sample(StandardNormal);
        self.objects[idx].grams * (self.noise.weight_obs_sigma * z).exp()
    }

    fn pick(&mut self, x: f64, y: f64) -> Observation {
        if self.held.is_some() {
            return Observation::ActionFailed {
                reason: "hand not empty".into(),
            };
        }
        let target = self
            .objects
            .iter()
            .enumerate()
            .map(|(i, o)| (i, (o.pose[0] - x).hypot(o.pose[1] - y)))
            .filter(|(_, d)| *d <= GRASP_TOLERANCE)
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i);
        let Some(i) = target else {
            return Observation::ActionFailed {
                reason: "no object at grasp point".into(),
            };
        };
        let (ox, oy) = (self.objects[i].pose[0], self.objects[i].pose[1]);
        if !self.geometry.reachable(&self.robot, ox, oy) || !self.geometry.in_view(&self.robot, ox, oy) {
            return Observation::ActionFailed {
                reason: "object out of reach or view".into(),
            };
        }
        self.held = Some(i);
        self.objects[i].surface = None;
        Observation::Weight {
            grams: self.noisy_weight(i),
        }
    }

    fn place(&mut self, x: f64, y: f64) -> Observation {
        let Some(h) = self.held else {
            return Observation::ActionFailed {
                reason: "nothing held".into(),
            };
        };
        if !self.geometry.reachable(&self.robot, x, y) {
            return Observation::ActionFailed {
                reason: "placement out of reach".into(),
            };
        }
        let Some(table) = self.tables.iter().find(|t| t.contains_xy(x, y)).cloned() else {
            return Observation::ActionFailed {
                reason: "no support surface".into(),
            };
        };
        let o = &mut self.objects[h];
        o.pose = [x, y, table.max[2], o.pose[3]];
        o.surface = Some(table.name);
        self.held = None;
        Observation::Null
    }

    /// Noisy detections of every unheld, unoccluded object in the current
    /// field of view.
    pub fn observe_look(&mut self) -> Vec<Detection> {
        let base = self.robot;
        let visible: Vec<usize> = (0..self.objects.len())
            .filter(|&i| Some(i) != self.held)
            .filter(|&i| {
                let p = self.objects[i].pose;
                self.geometry.in_view(&base, p[0], p[1])
                    && !self.objects.iter().enumerate().any(|(j, other)| {
                        j != i
                            && Some(j) != self.held
                            && self.geometry.occludes(&base, (p[0], p[1]), (other.pose[0], other.pose[1]))
                    })
            })
            .collect();
        let mut out = Vec::new();
        for i in visible {
            let missed = self.rng.random::<f64>() < self.noise.false_negative_rate;
            if missed {
                continue;
            }
            out.push(self.noisy_detection(i));
        }
        out
    }

    fn noisy_detection(&mut self, i: usize) -> Detection {
        let o = &self.objects[i];
        let row = self.noise.type_index(&o.true_type).map(|r| self.noise.type_confusion[r].clone());
        let true_type = o.true_type.clone();
        let (pose, hsv) = (o.pose, o.hsv);
        let type_name = match row {
            Some(row) => {
                let u: f64 = self.rng.random();
                let mut acc = 0.0;
                let mut pick = self.noise.types.len() - 1;
                for (j, p) in row.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = j;
                        break;
                    }
                }
                self.noise.types[pick].clone()
            }
            None => true_type,
        };
        let mut noisy_pose = pose;
        for (k, v) in noisy_pose.iter_mut().enumerate() {
            *v += self.gauss(self.noise.pose_obs_cov[(k, k)].sqrt());
        }
        noisy_pose[3] = wrap_angle(noisy_pose[3]);
        let mut noisy_hsv = hsv;
        for (k, v) in noisy_hsv.iter_mut().enumerate() {
            *v += self.gauss(self.noise.color_obs_cov[(k, k)].sqrt());
        }
        noisy_hsv[0] = wrap_unit(noisy_hsv[0]);
        noisy_hsv[1] = noisy_hsv[1].clamp(0.0, 1.0);
        noisy_hsv[2] = noisy_hsv[2].clamp(0.0, 1.0);
        Detection {
            type_name,
            pose: noisy_pose,
            hsv: noisy_hsv,
        }
    }

    fn gauss(&mut self, std: f64) -> f64 {
        if std <= 0.0 {
            return 0.0;
        }
        Normal::new(0.0, std).map(|n| n.sample(&mut self.rng)).unwrap_or(0.0)
    }
}

/// Functional form of [`WorldState::step`].
pub fn step(world: &WorldState, action: &Action) -> (WorldState, Observation) {
    let mut w = world.clone();
    let obs = w.step(action);
    (w, obs)
}
