//! Two-anchor 2D positioning: each anchor contributes an aggregated bearing,
//! and the target is the intersection of the two bearing lines in the world
//! frame. A linear two-element array cannot tell front from back, so each
//! anchor declares the half-plane that contains the playground.

use crate::airsim::ArrayGeometry;
use crate::dfrx::{aggregate_channels, AoaMeasurement};
use crate::error::{AoaError, Result};

/// Threshold on |sin(angle between bearings)| below which the intersection
/// is rejected as ill-conditioned.
pub const PARALLEL_SIN_THRESHOLD: f64 = 1e-3;

/// A fixed receiver with known pose.
#[derive(Debug, Clone)]
pub struct AnchorConfig {
    /// Array center, meters.
    pub position: [f64; 2],
    /// Unit vector along the array axis.
    pub array_axis: [f64; 2],
    /// Unit vector pointing from the array into the playground half-plane,
    /// resolving the cone ambiguity.
    pub playground_side: [f64; 2],
    pub geometry: ArrayGeometry,
    /// Calibrated inter-chain phase offset, radians.
    pub chain_offset: f64,
}

impl AnchorConfig {
    pub fn new(position: [f64; 2], array_axis: [f64; 2], playground_side: [f64; 2]) -> Self {
        let array_axis = unit(array_axis);
        AnchorConfig {
            position,
            array_axis,
            playground_side: unit(playground_side),
            geometry: ArrayGeometry::two_element(position, array_axis, 0.06),
            chain_offset: 0.0,
        }
    }

    /// True bearing of a target, degrees from the array axis.
    pub fn true_theta(&self, target: [f64; 2]) -> f64 {
        let dx = target[0] - self.position[0];
        let dy = target[1] - self.position[1];
        let r = (dx * dx + dy * dy).sqrt();
        (((dx * self.array_axis[0] + dy * self.array_axis[1]) / r).clamp(-1.0, 1.0))
            .acos()
            .to_degrees()
    }
}

fn unit(v: [f64; 2]) -> [f64; 2] {
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    [v[0] / n, v[1] / n]
}

fn rotate(v: [f64; 2], angle_rad: f64) -> [f64; 2] {
    let (s, c) = angle_rad.sin_cos();
    [v[0] * c - v[1] * s, v[0] * s + v[1] * c]
}

/// A bearing half-line: point plus unit direction.
#[derive(Debug, Clone, Copy)]
pub struct BearingLine {
    pub point: [f64; 2],
    pub direction: [f64; 2],
}

/// Fused position estimate.
#[derive(Debug, Clone, Copy)]
pub struct PositionFix {
    pub xy: [f64; 2],
    pub theta_pair: (f64, f64),
    /// 1 / |sin(angle between the bearing directions)|.
    pub condition_number: f64,
    pub valid: bool,
}

/// The locus of positions at angle `theta` from the anchor's array axis,
/// restricted to the configured playground half-plane.
pub fn bearing_line(anchor: &AnchorConfig, theta_deg: f64) -> BearingLine {
    let t = theta_deg.to_radians();
    let plus = rotate(anchor.array_axis, t);
    let minus = rotate(anchor.array_axis, -t);
    let side = anchor.playground_side;
    let dir = if plus[0] * side[0] + plus[1] * side[1] >= minus[0] * side[0] + minus[1] * side[1] {
        plus
    } else {
        minus
    };
    BearingLine {
        point: anchor.position,
        direction: dir,
    }
}

/// Intersect two bearing lines. Near-parallel bearings are an error.
pub fn intersect_bearings(l1: &BearingLine, l2: &BearingLine) -> Result<PositionFix> {
    let cross = l1.direction[0] * l2.direction[1] - l1.direction[1] * l2.direction[0];
    if cross.abs() < PARALLEL_SIN_THRESHOLD {
        return Err(AoaError::ParallelBearings);
    }
    // p1 + t*d1 = p2 + u*d2
    let rx = l2.point[0] - l1.point[0];
    let ry = l2.point[1] - l1.point[1];
    let t = (rx * l2.direction[1] - ry * l2.direction[0]) / cross;
    let xy = [
        l1.point[0] + t * l1.direction[0],
        l1.point[1] + t * l1.direction[1],
    ];
    Ok(PositionFix {
        xy,
        theta_pair: (0.0, 0.0),
        condition_number: 1.0 / cross.abs(),
        valid: true,
    })
}

/// Aggregate each anchor's measurements into a bearing and intersect.
pub fn locate_target(
    anchors: (&AnchorConfig, &AnchorConfig),
    measurements: (&[AoaMeasurement], &[AoaMeasurement]),
    channel_set: &[u8],
) -> Result<PositionFix> {
    let theta1 = aggregate_channels(measurements.0, channel_set)?;
    let theta2 = aggregate_channels(measurements.1, channel_set)?;
    locate_from_bearings(anchors, (theta1, theta2))
}

pub fn locate_from_bearings(
    anchors: (&AnchorConfig, &AnchorConfig),
    thetas: (f64, f64),
) -> Result<PositionFix> {
    let l1 = bearing_line(anchors.0, thetas.0);
    let l2 = bearing_line(anchors.1, thetas.1);
    let mut fix = intersect_bearings(&l1, &l2)?;
    fix.theta_pair = thetas;
    Ok(fix)
}

/// Least-squares extension for more than two anchors: minimizes the summed
/// squared perpendicular distance to every bearing line. Provided as a hook;
/// the shipped experiments use exactly two anchors.
pub fn locate_least_squares(lines: &[BearingLine]) -> Result<PositionFix> {
    if lines.len() < 2 {
        return Err(AoaError::InsufficientData(
            "least-squares fix needs at least 2 bearings".into(),
        ));
    }
    // sum over lines of (I - d d^T) (x - p) = 0
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for l in lines {
        let [dx, dy] = l.direction;
        let m11 = 1.0 - dx * dx;
        let m12 = -dx * dy;
        let m22 = 1.0 - dy * dy;
        a11 += m11;
        a12 += m12;
        a22 += m22;
        b1 += m11 * l.point[0] + m12 * l.point[1];
        b2 += m12 * l.point[0] + m22 * l.point[1];
    }
    let det = a11 * a22 - a12 * a12;
    if det.abs() < 1e-9 {
        return Err(AoaError::ParallelBearings);
    }
    let xy = [(b1 * a22 - b2 * a12) / det, (b2 * a11 - b1 * a12) / det];
    Ok(PositionFix {
        xy,
        theta_pair: (0.0, 0.0),
        condition_number: 1.0 / det.abs().sqrt(),
        valid: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn anchor(position: [f64; 2], axis: [f64; 2], side: [f64; 2]) -> AnchorConfig {
        AnchorConfig::new(position, axis, side)
    }

    #[test]
    fn broadside_bearing_is_along_plus_y() {
        let a = anchor([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let l = bearing_line(&a, 90.0);
        assert_abs_diff_eq!(l.direction[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(l.direction[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn forty_five_degree_bearing() {
        let a = anchor([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let l = bearing_line(&a, 45.0);
        assert_abs_diff_eq!(l.direction[0], (45f64).to_radians().cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(l.direction[1], (45f64).to_radians().sin(), epsilon = 1e-12);
    }

    #[test]
    fn constructed_intersection_at_one_one() {
        let a1 = anchor([0.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let a2 = anchor([2.0, 0.0], [0.0, 1.0], [-1.0, 0.0]);
        let l1 = bearing_line(&a1, 45.0);
        let l2 = bearing_line(&a2, 45.0);
        let fix = intersect_bearings(&l1, &l2).unwrap();
        assert_abs_diff_eq!(fix.xy[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fix.xy[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identical_lines_are_parallel_error() {
        let l = BearingLine {
            point: [0.0, 0.0],
            direction: [1.0, 0.0],
        };
        assert!(matches!(
            intersect_bearings(&l, &l),
            Err(AoaError::ParallelBearings)
        ));
    }

    #[test]
    fn swapping_anchor_labels_leaves_fix_unchanged() {
        let a1 = anchor([2.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let a2 = anchor([0.0, 1.35], [0.0, 1.0], [1.0, 0.0]);
        let target = [1.7, 2.1];
        let t1 = a1.true_theta(target);
        let t2 = a2.true_theta(target);
        let f = locate_from_bearings((&a1, &a2), (t1, t2)).unwrap();
        let g = locate_from_bearings((&a2, &a1), (t2, t1)).unwrap();
        assert_abs_diff_eq!(f.xy[0], g.xy[0], epsilon = 1e-9);
        assert_abs_diff_eq!(f.xy[1], g.xy[1], epsilon = 1e-9);
        assert_abs_diff_eq!(f.xy[0], target[0], epsilon = 1e-9);
        assert_abs_diff_eq!(f.xy[1], target[1], epsilon = 1e-9);
    }

    #[test]
    fn rigid_transform_equivariance() {
        let a1 = anchor([2.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let a2 = anchor([0.0, 1.35], [0.0, 1.0], [1.0, 0.0]);
        let target = [1.2, 1.8];
        let f = locate_from_bearings(
            (&a1, &a2),
            (a1.true_theta(target), a2.true_theta(target)),
        )
        .unwrap();

        // rotate everything by 37 degrees and translate by (5, -3)
        let ang = (37f64).to_radians();
        let tf = |p: [f64; 2]| -> [f64; 2] {
            let r = rotate(p, ang);
            [r[0] + 5.0, r[1] - 3.0]
        };
        let tfd = |d: [f64; 2]| rotate(d, ang);
        let b1 = anchor(tf(a1.position), tfd(a1.array_axis), tfd(a1.playground_side));
        let b2 = anchor(tf(a2.position), tfd(a2.array_axis), tfd(a2.playground_side));
        let tt = tf(target);
        let g = locate_from_bearings(
            (&b1, &b2),
            (b1.true_theta(tt), b2.true_theta(tt)),
        )
        .unwrap();
        let expected = tf(f.xy);
        assert_abs_diff_eq!(g.xy[0], expected[0], epsilon = 1e-9);
        assert_abs_diff_eq!(g.xy[1], expected[1], epsilon = 1e-9);
    }

    #[test]
    fn condition_number_tracks_noise_amplification() {
        // fixed geometry, growing angular noise: positional error must grow
        let a1 = anchor([2.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let a2 = anchor([0.0, 1.35], [0.0, 1.0], [1.0, 0.0]);
        let target = [1.0, 2.0];
        let t1 = a1.true_theta(target);
        let t2 = a2.true_theta(target);
        let mut last = 0.0;
        for noise_deg in [0.1, 0.5, 1.0, 2.0] {
            let f = locate_from_bearings((&a1, &a2), (t1 + noise_deg, t2 - noise_deg)).unwrap();
            let err = ((f.xy[0] - target[0]).powi(2) + (f.xy[1] - target[1]).powi(2)).sqrt();
            assert!(err > last, "error not monotone at {noise_deg} deg");
            last = err;
        }
    }

    #[test]
    fn least_squares_matches_pairwise_intersection() {
        let a1 = anchor([2.0, 0.0], [1.0, 0.0], [0.0, 1.0]);
        let a2 = anchor([0.0, 1.35], [0.0, 1.0], [1.0, 0.0]);
        let target = [2.5, 1.5];
        let l1 = bearing_line(&a1, a1.true_theta(target));
        let l2 = bearing_line(&a2, a2.true_theta(target));
        let fix = locate_least_squares(&[l1, l2]).unwrap();
        assert_abs_diff_eq!(fix.xy[0], target[0], epsilon = 1e-9);
        assert_abs_diff_eq!(fix.xy[1], target[1], epsilon = 1e-9);
    }
}
