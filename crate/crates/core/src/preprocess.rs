//! Geometric normalization, derived shank joints, knee angles, and the
//! SD-based outlier screen.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::pose::{KeypointName, Pose, PoseSequence, KEYPOINT_COUNT};

/// 2D point in the normalized body frame (y up, walking direction +x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Walking direction in image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WalkDirection {
    /// Image-rightward (+1).
    Rightward,
    /// Image-leftward (−1).
    Leftward,
}

impl WalkDirection {
    pub fn sign(self) -> f64 {
        match self {
            WalkDirection::Rightward => 1.0,
            WalkDirection::Leftward => -1.0,
        }
    }
}

/// Sign of the mean frame-to-frame nose x displacement.
pub fn walking_direction(seq: &PoseSequence) -> Result<WalkDirection> {
    let first = seq.frames.first().unwrap().get(KeypointName::Nose).x;
    let last = seq.frames.last().unwrap().get(KeypointName::Nose).x;
    let net = last - first;
    if net > 0.0 {
        Ok(WalkDirection::Rightward)
    } else if net < 0.0 {
        Ok(WalkDirection::Leftward)
    } else {
        Err(Error::AmbiguousDirection)
    }
}

pub const DERIVED_COUNT: usize = 2;
pub const NORMALIZED_POINT_COUNT: usize = KEYPOINT_COUNT + DERIVED_COUNT;

/// One frame in the normalized body frame: the 17 keypoints plus the two
/// derived shank midpoints. Origin at the nose, nose-to-mid-hip distance
/// 1, y up, x along the walking direction.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFrame {
    points: [Point; NORMALIZED_POINT_COUNT],
}

impl NormalizedFrame {
    pub fn keypoint(&self, name: KeypointName) -> Point {
        self.points[name.index()]
    }

    pub fn l_shank(&self) -> Point {
        self.points[KEYPOINT_COUNT]
    }

    pub fn r_shank(&self) -> Point {
        self.points[KEYPOINT_COUNT + 1]
    }
}

/// Component-wise midpoint of the knee and ankle.
pub fn shank_point(knee: Point, ankle: Point) -> Point {
    Point::new((knee.x + ankle.x) / 2.0, (knee.y + ankle.y) / 2.0)
}

/// Maps a pose into the normalized body frame:
/// `p' = M (p − nose) / L` with `L = ‖mid-hip − nose‖`, where `M` flips
/// y (image-down to up) and flips x for leftward walkers.
pub fn normalize_pose(pose: &Pose, direction: WalkDirection) -> Result<NormalizedFrame> {
    let nose = pose.get(KeypointName::Nose);
    let l_hip = pose.get(KeypointName::LHip);
    let r_hip = pose.get(KeypointName::RHip);
    let mid_hip_x = (l_hip.x + r_hip.x) / 2.0;
    let mid_hip_y = (l_hip.y + r_hip.y) / 2.0;
    let scale = libm::hypot(mid_hip_x - nose.x, mid_hip_y - nose.y);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::DegenerateFrame);
    }
    let sx = direction.sign();
    let mut points = [Point::new(0.0, 0.0); NORMALIZED_POINT_COUNT];
    for name in KeypointName::ALL {
        let kp = pose.get(name);
        let p = Point::new(sx * (kp.x - nose.x) / scale, -(kp.y - nose.y) / scale);
        if !p.is_finite() {
            return Err(Error::DegenerateFrame);
        }
        points[name.index()] = p;
    }
    points[KEYPOINT_COUNT] = shank_point(
        points[KeypointName::LKnee.index()],
        points[KeypointName::LAnkle.index()],
    );
    points[KEYPOINT_COUNT + 1] = shank_point(
        points[KeypointName::RKnee.index()],
        points[KeypointName::RAnkle.index()],
    );
    Ok(NormalizedFrame { points })
}

/// Counterclockwise angle in degrees from the thigh vector (hip − knee)
/// to the calf vector (ankle − knee), mapped to (0, 360]. Full extension
/// is 180; flexion (ankle trailing) gives values below 180.
pub fn knee_angle(hip: Point, knee: Point, ankle: Point) -> Result<f64> {
    let u = Point::new(hip.x - knee.x, hip.y - knee.y);
    let w = Point::new(ankle.x - knee.x, ankle.y - knee.y);
    if (u.x == 0.0 && u.y == 0.0) || (w.x == 0.0 && w.y == 0.0) {
        return Err(Error::DegenerateLimb);
    }
    if !u.is_finite() || !w.is_finite() {
        return Err(Error::NonFinite("knee angle input"));
    }
    let cross = u.x * w.y - u.y * w.x;
    let dot = u.x * w.x + u.y * w.y;
    let mut deg = libm::atan2(cross, dot) * (180.0 / core::f64::consts::PI);
    if deg <= 0.0 {
        deg += 360.0;
    }
    Ok(deg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Per-frame knee angle series for one side.
#[derive(Debug, Clone, PartialEq)]
pub struct KneeAngleSeries {
    pub side: Side,
    pub theta: Vec<f64>,
}

pub fn knee_angle_series(frames: &[NormalizedFrame], side: Side) -> Result<KneeAngleSeries> {
    let (hip, knee, ankle) = match side {
        Side::Left => (
            KeypointName::LHip,
            KeypointName::LKnee,
            KeypointName::LAnkle,
        ),
        Side::Right => (
            KeypointName::RHip,
            KeypointName::RKnee,
            KeypointName::RAnkle,
        ),
    };
    let theta = frames
        .iter()
        .map(|f| knee_angle(f.keypoint(hip), f.keypoint(knee), f.keypoint(ankle)))
        .collect::<Result<Vec<_>>>()?;
    Ok(KneeAngleSeries { side, theta })
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutlierScreenReport {
    /// Standard deviation of the pooled frame-to-frame angle changes.
    pub pooled_sigma: f64,
    pub multiplier: f64,
    pub removed: Vec<String>,
    pub kept: Vec<String>,
}

/// Pools the frame-to-frame changes of the right knee angle across all
/// videos, takes their standard deviation, and removes every video that
/// contains a change larger than `k` sigma in magnitude.
///
/// A pooled sigma of zero screens nothing.
pub fn reject_outliers(
    series: &[(String, KneeAngleSeries)],
    k: f64,
) -> Result<OutlierScreenReport> {
    if series.is_empty() {
        return Err(Error::EmptyInput("knee angle series"));
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidParameter("outlier multiplier must be > 0"));
    }
    let mut diffs = Vec::new();
    for (_, s) in series {
        if s.theta.len() < 2 {
            return Err(Error::TooFewFrames {
                required: 2,
                got: s.theta.len(),
            });
        }
        diffs.extend(s.theta.windows(2).map(|w| w[1] - w[0]));
    }
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n;
    let sigma = libm::sqrt(var);

    let mut removed = Vec::new();
    let mut kept = Vec::new();
    for (id, s) in series {
        let bad = sigma > 0.0
            && s.theta
                .windows(2)
                .any(|w| libm::fabs(w[1] - w[0]) > k * sigma);
        if bad {
            removed.push(id.clone());
        } else {
            kept.push(id.clone());
        }
    }
    Ok(OutlierScreenReport {
        pooled_sigma: sigma,
        multiplier: k,
        removed,
        kept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::Keypoint;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn pose_with(points: &[(KeypointName, f64, f64)]) -> Pose {
        let mut kps = [Keypoint::new(0.0, 0.0, 1.0).unwrap(); KEYPOINT_COUNT];
        for (name, x, y) in points {
            kps[name.index()] = Keypoint::new(*x, *y, 1.0).unwrap();
        }
        Pose::new(kps)
    }

    #[test]
    fn direction_from_nose_displacement() {
        let mk = |xs: &[f64]| {
            let frames = xs
                .iter()
                .map(|&x| pose_with(&[(KeypointName::Nose, x, 0.0)]))
                .collect();
            PoseSequence::new("v".to_string(), "w".to_string(), 60.0, frames).unwrap()
        };
        assert_eq!(
            walking_direction(&mk(&[0.0, 1.0, 2.0])).unwrap(),
            WalkDirection::Rightward
        );
        assert_eq!(
            walking_direction(&mk(&[2.0, 1.0, 0.0])).unwrap(),
            WalkDirection::Leftward
        );
        assert_eq!(
            walking_direction(&mk(&[1.0, 1.0])),
            Err(Error::AmbiguousDirection)
        );
    }

    #[test]
    fn normalize_hand_computed() {
        // nose (100,50), hips around (100,150): L = 100.
        let pose = pose_with(&[
            (KeypointName::Nose, 100.0, 50.0),
            (KeypointName::LHip, 95.0, 150.0),
            (KeypointName::RHip, 105.0, 150.0),
            (KeypointName::RAnkle, 160.0, 170.0),
        ]);
        let f = normalize_pose(&pose, WalkDirection::Rightward).unwrap();
        let nose = f.keypoint(KeypointName::Nose);
        assert_eq!((nose.x, nose.y), (0.0, 0.0));
        let l_hip = f.keypoint(KeypointName::LHip);
        let r_hip = f.keypoint(KeypointName::RHip);
        let mid = Point::new((l_hip.x + r_hip.x) / 2.0, (l_hip.y + r_hip.y) / 2.0);
        assert!((mid.x - 0.0).abs() < 1e-9 && (mid.y + 1.0).abs() < 1e-9);
        let ankle = f.keypoint(KeypointName::RAnkle);
        assert!((ankle.x - 0.6).abs() < 1e-9 && (ankle.y + 1.2).abs() < 1e-9);

        // Mirror: leftward direction negates x only.
        let g = normalize_pose(&pose, WalkDirection::Leftward).unwrap();
        let ankle_m = g.keypoint(KeypointName::RAnkle);
        assert!((ankle_m.x + 0.6).abs() < 1e-9 && (ankle_m.y + 1.2).abs() < 1e-9);
    }

    #[test]
    fn normalize_rejects_degenerate_scale() {
        let pose = pose_with(&[
            (KeypointName::Nose, 10.0, 10.0),
            (KeypointName::LHip, 10.0, 10.0),
            (KeypointName::RHip, 10.0, 10.0),
        ]);
        assert_eq!(
            normalize_pose(&pose, WalkDirection::Rightward),
            Err(Error::DegenerateFrame)
        );
    }

    #[test]
    fn shank_midpoint() {
        let p = shank_point(Point::new(0.1, -1.0), Point::new(0.3, -1.8));
        assert!((p.x - 0.2).abs() < 1e-12 && (p.y + 1.4).abs() < 1e-12);
        let q = Point::new(0.5, -0.5);
        assert_eq!(shank_point(q, q), q);
        assert_eq!(
            shank_point(Point::new(0.0, 0.0), Point::new(2.0, -2.0)),
            Point::new(1.0, -1.0)
        );
    }

    #[test]
    fn knee_angle_fixtures() {
        let hip = Point::new(0.0, 1.0);
        let knee = Point::new(0.0, 0.0);
        assert!((knee_angle(hip, knee, Point::new(0.0, -1.0)).unwrap() - 180.0).abs() < 1e-9);
        assert!((knee_angle(hip, knee, Point::new(-1.0, 0.0)).unwrap() - 90.0).abs() < 1e-9);
        assert!((knee_angle(hip, knee, Point::new(1.0, 0.0)).unwrap() - 270.0).abs() < 1e-9);
        assert_eq!(knee_angle(knee, knee, hip), Err(Error::DegenerateLimb));
    }

    #[test]
    fn knee_angle_rotation_invariant() {
        let hip = Point::new(0.2, 1.1);
        let knee = Point::new(0.1, 0.05);
        let ankle = Point::new(-0.4, -0.9);
        let base = knee_angle(hip, knee, ankle).unwrap();
        for i in 0..36 {
            let a = i as f64 * 10.0_f64.to_radians();
            let rot = |p: Point| {
                Point::new(
                    p.x * libm::cos(a) - p.y * libm::sin(a),
                    p.x * libm::sin(a) + p.y * libm::cos(a),
                )
            };
            let r = knee_angle(rot(hip), rot(knee), rot(ankle)).unwrap();
            assert!((r - base).abs() < 1e-9, "rotation {i}: {r} vs {base}");
        }
    }

    fn series(id: &str, theta: Vec<f64>) -> (String, KneeAngleSeries) {
        (
            id.to_string(),
            KneeAngleSeries {
                side: Side::Right,
                theta,
            },
        )
    }

    #[test]
    fn outlier_screen_constant_series_is_vacuous() {
        let input = vec![series("a", vec![180.0; 10]), series("b", vec![90.0; 10])];
        let rep = reject_outliers(&input, 3.0).unwrap();
        assert_eq!(rep.pooled_sigma, 0.0);
        assert!(rep.removed.is_empty());
        assert_eq!(rep.kept.len(), 2);
    }

    #[test]
    fn outlier_screen_removes_jump_video() {
        // Many small alternating diffs plus one 150-degree jump; verify
        // sigma by direct computation in the test, then the removal.
        let mut input = Vec::new();
        for i in 0..20 {
            let mut theta = vec![160.0];
            for t in 0..50 {
                let delta = if t % 2 == 0 { 6.0 } else { -6.0 };
                theta.push(theta[t] + delta);
            }
            input.push(series(&alloc::format!("v{i}"), theta));
        }
        let mut jumpy = vec![160.0; 30];
        jumpy.push(310.0);
        jumpy.extend(vec![310.0; 10]);
        input.push(series("jumpy", jumpy));

        // Independent sigma recount.
        let mut diffs = Vec::new();
        for (_, s) in &input {
            diffs.extend(s.theta.windows(2).map(|w| w[1] - w[0]));
        }
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let sigma =
            libm::sqrt(diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / n);

        let rep = reject_outliers(&input, 3.0).unwrap();
        assert!((rep.pooled_sigma - sigma).abs() < 1e-12);
        assert!(150.0 > 3.0 * sigma && 6.0 + mean.abs() < 3.0 * sigma);
        assert_eq!(rep.removed, vec!["jumpy".to_string()]);
        assert_eq!(rep.kept.len(), 20);
    }

    #[test]
    fn outlier_screen_monotone_in_k() {
        let input = vec![
            series("a", vec![100.0, 110.0, 100.0, 112.0]),
            series("b", vec![100.0, 101.0, 102.0, 103.0]),
            series("c", vec![100.0, 130.0, 100.0, 100.0]),
        ];
        let mut prev: Option<usize> = None;
        for k in [0.5, 1.0, 2.0, 4.0, 1e9] {
            let rep = reject_outliers(&input, k).unwrap();
            if let Some(p) = prev {
                assert!(rep.removed.len() <= p);
            }
            prev = Some(rep.removed.len());
        }
        assert_eq!(prev, Some(0)); // k -> infinity removes nothing
    }

    proptest! {
        // Translation and positive uniform scaling of the raw pixels do
        // not change the normalized frame.
        #[test]
        fn normalization_similarity_invariant(
            tx in -500.0f64..500.0, ty in -500.0f64..500.0, c in 0.1f64..10.0,
            ax in -2.0f64..2.0, ay in -2.0f64..2.0,
        ) {
            let pose = pose_with(&[
                (KeypointName::Nose, 100.0, 50.0),
                (KeypointName::LHip, 95.0, 150.0),
                (KeypointName::RHip, 105.0, 150.0),
                (KeypointName::RKnee, 120.0, 200.0),
                (KeypointName::RAnkle, 100.0 + ax * 50.0, 150.0 + ay * 50.0),
            ]);
            let mut kps = *pose.keypoints();
            for kp in kps.iter_mut() {
                *kp = Keypoint::new(c * kp.x + tx, c * kp.y + ty, kp.confidence).unwrap();
            }
            let moved = Pose::new(kps);
            let a = normalize_pose(&pose, WalkDirection::Rightward).unwrap();
            let b = normalize_pose(&moved, WalkDirection::Rightward).unwrap();
            for name in KeypointName::ALL {
                let (p, q) = (a.keypoint(name), b.keypoint(name));
                prop_assert!((p.x - q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
            }
        }

        // Mirrored walker with flipped direction flag: same knee angle.
        #[test]
        fn mirrored_walker_same_angle(
            hx in -2.0f64..2.0, hy in 0.5f64..2.0,
            axx in -2.0f64..2.0, ayy in -2.0f64..-0.1,
        ) {
            let pose = pose_with(&[
                (KeypointName::Nose, 100.0, 50.0),
                (KeypointName::LHip, 95.0, 150.0),
                (KeypointName::RHip, 105.0, 150.0),
                (KeypointName::RKnee, 100.0 + hx * 20.0, 150.0 + hy * 30.0),
                (KeypointName::RAnkle, 100.0 + axx * 20.0, 150.0 - ayy * 60.0),
            ]);
            let mut kps = *pose.keypoints();
            for kp in kps.iter_mut() {
                *kp = Keypoint::new(200.0 - kp.x, kp.y, kp.confidence).unwrap();
            }
            let mirrored = Pose::new(kps);
            let fa = normalize_pose(&pose, WalkDirection::Rightward).unwrap();
            let fb = normalize_pose(&mirrored, WalkDirection::Leftward).unwrap();
            let angle = |f: &NormalizedFrame| knee_angle(
                f.keypoint(KeypointName::RHip),
                f.keypoint(KeypointName::RKnee),
                f.keypoint(KeypointName::RAnkle),
            );
            match (angle(&fa), angle(&fb)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }
}
