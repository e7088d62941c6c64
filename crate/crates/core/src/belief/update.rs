//! Measurement updates and belief-fluent tests on continuous quantities.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};

use super::gauss::{cov_dominates, unit_circle_diff, wrap_angle, wrap_unit};
use super::{Anchor, BeliefError, BeliefState, ObservationNoiseModel, Result};

/// A Gaussian-believed quantity of one anchor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BeliefQuantity {
    Pose(Anchor),
    Color(Anchor),
    Weight(Anchor),
}

/// Bayes update of the type distribution with the confusion-matrix
/// likelihood `confusion[true][observed]`.
pub fn update_type(
    belief: &BeliefState,
    anchor: Anchor,
    observed_type: &str,
    noise: &ObservationNoiseModel,
) -> Result<BeliefState> {
    let col = noise
        .type_index(observed_type)
        .ok_or_else(|| BeliefError::UnknownType(observed_type.to_string()))?;
    let mut out = belief.clone();
    let obj = out.object_mut(anchor)?;
    let mut total = 0.0;
    let mut post = obj.type_d.probs.clone();
    for (ty, p) in post.iter_mut() {
        let row = noise
            .type_index(ty)
            .ok_or_else(|| BeliefError::UnknownType(ty.clone()))?;
        *p *= noise.type_confusion[row][col];
        total += *p;
    }
    if total > 0.0 {
        for p in post.values_mut() {
            *p /= total;
        }
        obj.type_d.probs = post;
    }
    Ok(out)
}

fn kalman<const N: usize>(
    mean: &nalgebra::SVector<f64, N>,
    cov: &nalgebra::SMatrix<f64, N, N>,
    innovation: &nalgebra::SVector<f64, N>,
    obs_cov: &nalgebra::SMatrix<f64, N, N>,
) -> Result<(nalgebra::SVector<f64, N>, nalgebra::SMatrix<f64, N, N>)> {
    let s = cov + obs_cov;
    let s_inv = s.try_inverse().ok_or(BeliefError::SingularInnovation)?;
    if s_inv.iter().any(|v| !v.is_finite()) {
        return Err(BeliefError::SingularInnovation);
    }
    let k = cov * s_inv;
    let i_k = nalgebra::SMatrix::<f64, N, N>::identity() - k;
    // Joseph form keeps the result symmetric PSD.
    let p = i_k * cov * i_k.transpose() + k * obs_cov * k.transpose();
    let p = (p + p.transpose()) * 0.5;
    Ok((mean + k * innovation, p))
}

/// Kalman update of the pose belief with an identity measurement model.
pub fn update_pose(
    belief: &BeliefState,
    anchor: Anchor,
    observed: [f64; 4],
    noise: &ObservationNoiseModel,
) -> Result<BeliefState> {
    let mut out = belief.clone();
    let obj = out.object_mut(anchor)?;
    let pd = &mut obj.pose_d;
    let mut innov = Vector4::from(observed) - pd.mean;
    innov[3] = wrap_angle(innov[3]);
    let (mut m, p): (Vector4<f64>, Matrix4<f64>) =
        kalman(&pd.mean, &pd.cov, &innov, &noise.pose_obs_cov)?;
    m[3] = wrap_angle(m[3]);
    pd.mean = m;
    pd.cov = p;
    Ok(out)
}

/// Kalman update of the HSV belief; hue innovation on the circle, posterior
/// mean kept inside the unit box.
pub fn update_color(
    belief: &BeliefState,
    anchor: Anchor,
    observed_hsv: [f64; 3],
    noise: &ObservationNoiseModel,
) -> Result<BeliefState> {
    let mut out = belief.clone();
    let obj = out.object_mut(anchor)?;
    let cd = &mut obj.color_d;
    let mut innov = Vector3::from(observed_hsv) - cd.mean;
    innov[0] = unit_circle_diff(observed_hsv[0], cd.mean[0]);
    let (mut m, p): (Vector3<f64>, Matrix3<f64>) =
        kalman(&cd.mean, &cd.cov, &innov, &noise.color_obs_cov)?;
    m[0] = wrap_unit(m[0]);
    m[1] = m[1].clamp(0.0, 1.0);
    m[2] = m[2].clamp(0.0, 1.0);
    cd.mean = m;
    cd.cov = p;
    Ok(out)
}

/// Scalar Kalman update in log-weight space.
pub fn update_weight(
    belief: &BeliefState,
    anchor: Anchor,
    observed_grams: f64,
    noise: &ObservationNoiseModel,
) -> Result<BeliefState> {
    if !(observed_grams > 0.0) {
        return Err(BeliefError::NonPositiveWeight(observed_grams));
    }
    let mut out = belief.clone();
    let w = &mut out.object_mut(anchor)?.weight_d;
    let prior_var = w.sigma * w.sigma;
    let r = noise.weight_obs_sigma * noise.weight_obs_sigma;
    if prior_var + r <= 0.0 {
        return Err(BeliefError::SingularInnovation);
    }
    let k = prior_var / (prior_var + r);
    w.mu += k * (observed_grams.ln() - w.mu);
    w.sigma = ((1.0 - k) * prior_var).sqrt().max(1e-12);
    Ok(out)
}

/// Probability that an object matching a description is still to be found
/// in `region`: the configured prior discounted by explored volume.
pub fn exists_in_region_prob(belief: &BeliefState, region: Anchor) -> Result<f64> {
    belief.region(region)?;
    let prior = belief.region_priors.get(&region).copied().unwrap_or(0.0);
    Ok((prior * (1.0 - belief.confidence(region))).clamp(0.0, 1.0))
}

/// Confidence after a look covering `coverage` of the region volume.
pub fn look_region_confidence(confidence: f64, coverage: f64) -> f64 {
    (1.0 - (1.0 - confidence) * (1.0 - coverage.clamp(0.0, 1.0))).clamp(0.0, 1.0)
}

/// `B(φ, μ, Σ, Δ, p)`: mean within `delta` componentwise, belief covariance
/// dominated by `sigma`, and `p` at least the detection weight.
pub fn holds_cont_fluent(
    belief: &BeliefState,
    phi: BeliefQuantity,
    mu: &DVector<f64>,
    sigma: &DMatrix<f64>,
    delta: &DVector<f64>,
    p: f64,
) -> Result<bool> {
    let (anchor, mean, cov, circular): (Anchor, DVector<f64>, DMatrix<f64>, Option<(usize, f64)>) =
        match phi {
            BeliefQuantity::Pose(a) => {
                let o = belief.object(a)?;
                (
                    a,
                    DVector::from_column_slice(o.pose_d.mean.as_slice()),
                    DMatrix::from_column_slice(4, 4, o.pose_d.cov.as_slice()),
                    Some((3, std::f64::consts::TAU)),
                )
            }
            BeliefQuantity::Color(a) => {
                let o = belief.object(a)?;
                (
                    a,
                    DVector::from_column_slice(o.color_d.mean.as_slice()),
                    DMatrix::from_column_slice(3, 3, o.color_d.cov.as_slice()),
                    Some((0, 1.0)),
                )
            }
            BeliefQuantity::Weight(a) => {
                let o = belief.object(a)?;
                (
                    a,
                    DVector::from_element(1, o.weight_d.mu),
                    DMatrix::from_element(1, 1, o.weight_d.sigma * o.weight_d.sigma),
                    None,
                )
            }
        };
    let n = mean.len();
    if mu.len() != n || delta.len() != n {
        return Err(BeliefError::Dimension(n, mu.len().max(delta.len())));
    }
    let close = (0..n).all(|i| {
        let mut d = mu[i] - mean[i];
        if let Some((ci, period)) = circular {
            if ci == i {
                d = d.rem_euclid(period);
                if d > period / 2.0 {
                    d -= period;
                }
            }
        }
        d.abs() <= delta[i]
    });
    let weight = belief.object(anchor)?.detection_weight;
    Ok(close && cov_dominates(&cov, sigma)? && p >= weight)
}
