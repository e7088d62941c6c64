//! Data association of detections to object beliefs.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::update::{update_color, update_pose, update_type};
use super::{
    Anchor, BeliefState, ColorDistribution, ObservationNoiseModel, PoseDistribution, Result,
    TypeDistribution,
};

/// Mahalanobis gate on (x, y, z).
pub const DEFAULT_GATE: f64 = 3.0;
/// Detection weight of an object seen once.
pub const NEW_DETECTION_WEIGHT: f64 = 0.95;
/// Fraction of the remaining doubt about existence kept after a re-detection.
pub const REDETECTION_RETAIN: f64 = 0.1;

/// One typed, colored pose detection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "type")]
    pub type_name: String,
    pub pose: [f64; 4],
    pub hsv: [f64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct Association {
    pub belief: BeliefState,
    pub anchor: Anchor,
    pub is_new: bool,
}

fn position_mahalanobis(pose: &PoseDistribution, obs: &[f64; 4], noise: &ObservationNoiseModel) -> f64 {
    let p: Matrix3<f64> = pose.cov.fixed_view::<3, 3>(0, 0).into_owned();
    let r: Matrix3<f64> = noise.pose_obs_cov.fixed_view::<3, 3>(0, 0).into_owned();
    let d = Vector3::new(obs[0], obs[1], obs[2]) - pose.mean.fixed_rows::<3>(0);
    match (p + r).try_inverse() {
        Some(inv) => (d.transpose() * inv * d)[(0, 0)].max(0.0).sqrt(),
        None => f64::INFINITY,
    }
}

/// Gates `detection` against every unheld object belief. Inside the gate the
/// nearest object (ties by anchor order) is updated; otherwise a new anchor
/// is created from the detection.
pub fn associate_detection(
    belief: &BeliefState,
    detection: &Detection,
    noise: &ObservationNoiseModel,
    gate: f64,
) -> Result<Association> {
    let mut best: Option<(Anchor, f64)> = None;
    for (a, o) in &belief.objects {
        if belief.held == Some(*a) {
            continue;
        }
        let d = position_mahalanobis(&o.pose_d, &detection.pose, noise);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((*a, d));
        }
    }

    if let Some((anchor, d)) = best.filter(|(_, d)| *d <= gate) {
        log::debug!("detection associated with {anchor} at distance {d:.3}");
        let b = update_type(belief, anchor, &detection.type_name, noise)?;
        let b = update_pose(&b, anchor, detection.pose, noise)?;
        let mut b = update_color(&b, anchor, detection.hsv, noise)?;
        let o = b.object_mut(anchor)?;
        o.detection_weight = 1.0 - (1.0 - o.detection_weight) * REDETECTION_RETAIN;
        return Ok(Association {
            belief: b,
            anchor,
            is_new: false,
        });
    }

    let mut b = belief.clone();
    let anchor = b.fresh_object_anchor();
    let types = TypeDistribution::uniform(&noise.types);
    let pose_d = PoseDistribution {
        mean: PoseDistribution::exact(detection.pose).mean,
        cov: noise.pose_obs_cov,
    };
    let mut color_d = ColorDistribution::new(detection.hsv, [0.0; 3]);
    color_d.cov = noise.color_obs_cov;
    b.objects.insert(
        anchor,
        super::ObjectBelief {
            anchor,
            type_d: types,
            pose_d,
            color_d,
            weight_d: b.weight_prior,
            detection_weight: NEW_DETECTION_WEIGHT,
        },
    );
    let b = update_type(&b, anchor, &detection.type_name, noise)?;
    log::debug!("new anchor {anchor} from detection");
    Ok(Association {
        belief: b,
        anchor,
        is_new: true,
    })
}
