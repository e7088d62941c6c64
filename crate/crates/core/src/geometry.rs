//! Planar robot geometry shared by the simulator and the planner: field of
//! view, reach, approach poses, region coverage, and line of sight.

use serde::{Deserialize, Serialize};

use crate::belief::{wrap_angle, Region};

/// Robot base pose in the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Base {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorGeometry {
    /// Full horizontal field-of-view angle, degrees.
    pub fov_deg: f64,
    /// Maximum sensing range, meters.
    pub range: f64,
    /// Maximum distance from base to a graspable or placeable point.
    pub reach: f64,
    /// Base-to-object distance chosen when approaching an object.
    pub object_standoff: f64,
    /// Base-to-center distance chosen when approaching a region.
    pub region_standoff: f64,
    /// Radius of every object's circular footprint.
    pub footprint_radius: f64,
}

impl Default for SensorGeometry {
    fn default() -> Self {
        SensorGeometry {
            fov_deg: 60.0,
            range: 2.5,
            reach: 0.9,
            object_standoff: 0.6,
            region_standoff: 0.75,
            footprint_radius: 0.04,
        }
    }
}

impl SensorGeometry {
    pub fn in_view(&self, base: &Base, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - base.x, y - base.y);
        let d = dx.hypot(dy);
        if d > self.range {
            return false;
        }
        if d < 1e-9 {
            return true;
        }
        let bearing = wrap_angle(dy.atan2(dx) - base.theta);
        bearing.abs() <= 0.5 * self.fov_deg.to_radians() + 1e-12
    }

    pub fn reachable(&self, base: &Base, x: f64, y: f64) -> bool {
        (x - base.x).hypot(y - base.y) <= self.reach + 1e-12
    }

    /// Base pose `dist` meters from the target, on the side facing the
    /// workspace origin, looking at the target.
    pub fn approach(&self, x: f64, y: f64, dist: f64) -> Base {
        let norm = x.hypot(y);
        let (ux, uy) = if norm < 1e-9 { (-1.0, 0.0) } else { (-x / norm, -y / norm) };
        let bx = x + ux * dist;
        let by = y + uy * dist;
        Base {
            x: bx,
            y: by,
            theta: (y - by).atan2(x - bx),
        }
    }

    pub fn approach_object(&self, x: f64, y: f64) -> Base {
        self.approach(x, y, self.object_standoff)
    }

    pub fn approach_region(&self, r: &Region) -> Base {
        let c = r.center();
        self.approach(c[0], c[1], self.region_standoff)
    }

    /// Fraction of the region's footprint inside the field of view, on a
    /// 10 x 10 grid of cell centers.
    pub fn region_coverage(&self, base: &Base, r: &Region) -> f64 {
        const N: usize = 10;
        let mut inside = 0;
        for i in 0..N {
            for j in 0..N {
                let x = r.min[0] + (i as f64 + 0.5) / N as f64 * (r.max[0] - r.min[0]);
                let y = r.min[1] + (j as f64 + 0.5) / N as f64 * (r.max[1] - r.min[1]);
                if self.in_view(base, x, y) {
                    inside += 1;
                }
            }
        }
        inside as f64 / (N * N) as f64
    }

    /// Whether the disc at `blocker` cuts the segment from the base to
    /// `target` before reaching the target.
    pub fn occludes(&self, base: &Base, target: (f64, f64), blocker: (f64, f64)) -> bool {
        let (tx, ty) = (target.0 - base.x, target.1 - base.y);
        let (bx, by) = (blocker.0 - base.x, blocker.1 - base.y);
        let len2 = tx * tx + ty * ty;
        if len2 < 1e-12 {
            return false;
        }
        let t = (bx * tx + by * ty) / len2;
        // blockers behind the base or beyond the target do not occlude
        if t <= 0.0 || t >= 1.0 {
            return false;
        }
        let (px, py) = (t * tx - bx, t * ty - by);
        let dist_to_target = (blocker.0 - target.0).hypot(blocker.1 - target.1);
        px.hypot(py) <= self.footprint_radius && dist_to_target > self.footprint_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Anchor;

    #[test]
    fn approach_faces_target_within_reach() {
        let g = SensorGeometry::default();
        let b = g.approach_object(2.0, 1.0);
        assert!(g.in_view(&b, 2.0, 1.0));
        assert!(g.reachable(&b, 2.0, 1.0));
        assert!(!g.in_view(&b, -2.0, -1.0));
    }

    #[test]
    fn region_fully_covered_from_approach() {
        let g = SensorGeometry::default();
        let r = Region {
            anchor: Anchor::region(1),
            min: [1.75, -0.25, 0.0],
            max: [2.25, 0.25, 0.75],
        };
        let b = g.approach_region(&r);
        assert_eq!(g.region_coverage(&b, &r), 1.0);
        let away = Base { theta: std::f64::consts::PI, ..b };
        assert_eq!(g.region_coverage(&away, &r), 0.0);
    }

    #[test]
    fn collinear_far_object_is_occluded() {
        let g = SensorGeometry::default();
        let base = Base { x: 0.0, y: 0.0, theta: 0.0 };
        assert!(g.occludes(&base, (2.0, 0.0), (1.5, 0.0)));
        assert!(!g.occludes(&base, (1.5, 0.0), (2.0, 0.0)));
        assert!(!g.occludes(&base, (2.0, 0.0), (1.5, 0.3)));
    }
}
