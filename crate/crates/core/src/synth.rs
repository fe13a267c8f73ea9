//! Parametric synthetic race-walk generator used as the end-to-end test
//! oracle. The kinematics are a layered template (translating body,
//! ankle trajectories with ground contact, knee placed to hit an exact
//! target knee angle), not a physics simulation; the point is
//! controllable BK / LC signatures.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::pose::{FaultLabel, Keypoint, LabelRecord, Pose, PoseSequence, KEYPOINT_COUNT};

/// Peak swing-phase knee flexion in degrees (knee angle 180 - flexion).
const SWING_FLEXION: f64 = 45.0;
/// Slow per-sample stride-length modulation (fraction of half stride).
const STRIDE_MOD: f64 = 0.08;
/// Image y of the ground line.
const GROUND_Y: f64 = 2000.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaitParams {
    pub n_frames: usize,
    pub fps: f64,
    /// Frames per two-step cycle.
    pub cycle_frames: usize,
    /// Body lengths (nose to mid-hip) per frame.
    pub forward_speed: f64,
    pub fault: FaultLabel,
    /// Degrees of support-phase extension deficit for BK; body lengths
    /// of flight-phase lift for LC; ignored for Normal.
    pub severity: f64,
    /// Gaussian pixel noise added to every coordinate.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for GaitParams {
    fn default() -> Self {
        GaitParams {
            n_frames: 120,
            fps: 60.0,
            cycle_frames: 40,
            forward_speed: 0.02,
            fault: FaultLabel::Normal,
            severity: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl GaitParams {
    pub fn validate(&self) -> Result<()> {
        if self.cycle_frames < 20 {
            return Err(Error::InvalidParameter("cycle_frames must be >= 20"));
        }
        if self.n_frames < 2 * self.cycle_frames {
            return Err(Error::InvalidParameter(
                "n_frames must cover at least two cycles",
            ));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidParameter("fps must be > 0"));
        }
        if !(self.severity >= 0.0 && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter(
                "severity and noise_sigma must be >= 0",
            ));
        }
        if !(self.forward_speed.is_finite() && self.forward_speed >= 0.0) {
            return Err(Error::InvalidParameter("forward_speed must be >= 0"));
        }
        Ok(())
    }
}

/// Per-walker anthropometrics, in body-length units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyShape {
    /// Pixels per body length (camera distance / walker size).
    pub px_per_unit: f64,
    /// Mid-hip height above the ground line.
    pub hip_height: f64,
    /// Half the stride length.
    pub half_stride: f64,
    /// Peak swing-ankle lift.
    pub swing_lift: f64,
    /// Sagittal half-offset between the two hip keypoints.
    pub hip_offset: f64,
}

impl Default for BodyShape {
    fn default() -> Self {
        BodyShape {
            px_per_unit: 800.0,
            hip_height: 1.5,
            half_stride: 0.55,
            swing_lift: 0.22,
            hip_offset: 0.03,
        }
    }
}

impl BodyShape {
    /// Limb-length perturbations of about +-10 percent drawn from `rng`.
    pub fn perturbed(rng: &mut impl Rng) -> Self {
        let base = BodyShape::default();
        let mut mult = || 1.0 + rng.gen_range(-0.1..=0.1);
        BodyShape {
            px_per_unit: base.px_per_unit * mult(),
            hip_height: base.hip_height * mult(),
            half_stride: base.half_stride * mult(),
            swing_lift: base.swing_lift * mult(),
            hip_offset: base.hip_offset,
        }
    }
}

/// Per-frame phase annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameEvents {
    pub left_support: bool,
    pub right_support: bool,
    /// LC flight: both feet off the ground.
    pub flight: bool,
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub sequence: PoseSequence,
    pub label: FaultLabel,
    pub events: Vec<FrameEvents>,
    /// Image y of the ground line (y grows downward).
    pub ground_y: f64,
    /// Pixels per body length, for converting severities.
    pub px_per_unit: f64,
}

fn fract(x: f64) -> f64 {
    x - libm::floor(x)
}

/// Ankle trajectory and target flexion for one leg at phase `u` in
/// [0, 1): support during [0, 0.5), swing after. Returns
/// (x relative to the body, height above ground, flexion degrees).
fn leg_state(u: f64, half_stride: f64, swing_lift: f64, base_flexion: f64) -> (f64, f64, f64) {
    if u < 0.5 {
        (half_stride * (1.0 - 4.0 * u), 0.0, base_flexion)
    } else {
        let v = 2.0 * (u - 0.5);
        let smooth = 3.0 * v * v - 2.0 * v * v * v;
        let lift = libm::sin(core::f64::consts::PI * v);
        (
            half_stride * (-1.0 + 2.0 * smooth),
            swing_lift * lift * lift,
            base_flexion + (SWING_FLEXION - base_flexion) * lift * lift,
        )
    }
}

/// Knee position achieving exactly the knee angle 180 - flexion: the
/// hip-ankle midpoint offset forward along the perpendicular by
/// (|hip - ankle| / 2) tan(flexion / 2).
fn place_knee(hip: (f64, f64), ankle: (f64, f64), flexion_deg: f64) -> (f64, f64) {
    let dx = ankle.0 - hip.0;
    let dy = ankle.1 - hip.1;
    let dist = libm::hypot(dx, dy);
    let offset = dist / 2.0 * libm::tan(flexion_deg.to_radians() / 2.0);
    // Perpendicular pointing forward (+x) since the ankle is below the hip.
    let nx = -dy / dist;
    let ny = dx / dist;
    (
        (hip.0 + ankle.0) / 2.0 + offset * nx,
        (hip.1 + ankle.1) / 2.0 + offset * ny,
    )
}

/// Deterministic sample generation for one video.
pub fn generate_sequence(
    params: &GaitParams,
    video_id: &str,
    walker_id: &str,
    shape: &BodyShape,
) -> Result<SynthSample> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let stride_phase = rng.gen_range(0.0..core::f64::consts::TAU);
    let noise = Normal::new(0.0, params.noise_sigma)
        .map_err(|_| Error::InvalidParameter("noise_sigma"))?;

    let base_flexion = if params.fault == FaultLabel::Bk {
        params.severity
    } else {
        0.0
    };
    let n = params.n_frames;
    let cycle = params.cycle_frames as f64;
    let mut frames = Vec::with_capacity(n);
    let mut events = Vec::with_capacity(n);
    for t in 0..n {
        let tf = t as f64;
        let u_r = fract(tf / cycle);
        let u_l = fract(u_r + 0.5);
        let body_x = 0.5 + params.forward_speed * tf;
        let stride = shape.half_stride
            * (1.0 + STRIDE_MOD * libm::sin(core::f64::consts::TAU * tf / n as f64 + stride_phase));

        // LC flight bump around each step transition.
        let m = fract(2.0 * u_r + 0.1);
        let bump = if params.fault == FaultLabel::Lc && m < 0.2 {
            let w = libm::sin(core::f64::consts::PI * m / 0.2);
            2.0 * params.severity * w * w
        } else {
            0.0
        };

        let h = shape.hip_height;
        let l_hip = (body_x - shape.hip_offset, h);
        let r_hip = (body_x + shape.hip_offset, h);
        let (rx, ry, rf) = leg_state(u_r, stride, shape.swing_lift, base_flexion);
        let (lx, ly, lf) = leg_state(u_l, stride, shape.swing_lift, base_flexion);
        let r_ankle = (body_x + rx, ry + bump);
        let l_ankle = (body_x + lx, ly + bump);
        let r_knee = place_knee(r_hip, r_ankle, rf);
        let l_knee = place_knee(l_hip, l_ankle, lf);

        // Upper body: head fixed relative to the hips, arms swinging
        // opposite to the legs.
        let nose = (body_x + 0.05, h + 1.0);
        let l_eye = (body_x + 0.09, h + 1.06);
        let r_eye = (body_x + 0.11, h + 1.06);
        let l_ear = (body_x + 0.01, h + 1.04);
        let r_ear = (body_x + 0.03, h + 1.04);
        let l_shoulder = (body_x - 0.01, h + 0.62);
        let r_shoulder = (body_x + 0.01, h + 0.62);
        let arm = |shoulder: (f64, f64), u: f64| {
            let phi = 0.7 * libm::sin(core::f64::consts::TAU * u);
            let elbow = (
                shoulder.0 + 0.33 * libm::sin(phi),
                shoulder.1 - 0.33 * libm::cos(phi),
            );
            let phi2 = phi + 0.9;
            let wrist = (
                elbow.0 + 0.28 * libm::sin(phi2),
                elbow.1 - 0.28 * libm::cos(phi2),
            );
            (elbow, wrist)
        };
        // Right arm swings with the left leg and vice versa.
        let (r_elbow, r_wrist) = arm(r_shoulder, u_l);
        let (l_elbow, l_wrist) = arm(l_shoulder, u_r);

        let world: [(f64, f64); KEYPOINT_COUNT] = [
            nose, l_eye, r_eye, l_ear, r_ear, l_shoulder, r_shoulder, l_elbow, r_elbow, l_wrist,
            r_wrist, l_hip, r_hip, l_knee, r_knee, l_ankle, r_ankle,
        ];
        let mut kps = [Keypoint { x: 0.0, y: 0.0, confidence: 1.0 }; KEYPOINT_COUNT];
        for (i, (wx, wy)) in world.iter().enumerate() {
            let x = wx * shape.px_per_unit + noise.sample(&mut rng);
            let y = GROUND_Y - wy * shape.px_per_unit + noise.sample(&mut rng);
            kps[i] = Keypoint::new(x, y, 1.0)?;
        }
        frames.push(Pose::new(kps));
        events.push(FrameEvents {
            right_support: u_r < 0.5 && bump == 0.0,
            left_support: u_l < 0.5 && bump == 0.0,
            flight: bump > 0.0,
        });
    }
    let sequence = PoseSequence::new(
        String::from(video_id),
        String::from(walker_id),
        params.fps,
        frames,
    )?;
    Ok(SynthSample {
        sequence,
        label: params.fault,
        events,
        ground_y: GROUND_Y,
        px_per_unit: shape.px_per_unit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetParams {
    pub n_walkers: usize,
    pub samples_per_class: usize,
    pub bk_severity: f64,
    pub lc_lift: f64,
    pub base: GaitParams,
}

impl Default for DatasetParams {
    fn default() -> Self {
        DatasetParams {
            n_walkers: 4,
            samples_per_class: 10,
            bk_severity: 15.0,
            lc_lift: 0.1,
            base: GaitParams {
                noise_sigma: 1.5,
                ..GaitParams::default()
            },
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn walker_name(index: usize) -> String {
    if index < 26 {
        String::from(char::from(b'A' + index as u8))
    } else {
        format!("W{index}")
    }
}

/// Generates `n_walkers` x `samples_per_class` x 3 classes of samples
/// with per-walker anthropometric perturbations and per-sample seeds.
/// All three referee columns of each label record carry the generated
/// label.
pub fn generate_dataset(params: &DatasetParams) -> Result<(Vec<SynthSample>, Vec<LabelRecord>)> {
    if params.n_walkers < 2 {
        return Err(Error::TooFewWalkers);
    }
    params.base.validate()?;
    let classes = [FaultLabel::Normal, FaultLabel::Bk, FaultLabel::Lc];
    let mut samples = Vec::new();
    let mut records = Vec::new();
    for w in 0..params.n_walkers {
        let walker = walker_name(w);
        let mut shape_rng =
            ChaCha8Rng::seed_from_u64(splitmix64(params.base.seed ^ (w as u64 + 1)));
        let shape = BodyShape::perturbed(&mut shape_rng);
        for (ci, &class) in classes.iter().enumerate() {
            for i in 0..params.samples_per_class {
                let severity = match class {
                    FaultLabel::Normal => 0.0,
                    FaultLabel::Bk => params.bk_severity,
                    FaultLabel::Lc => params.lc_lift,
                };
                let seed = splitmix64(
                    params.base.seed
                        ^ splitmix64((w as u64) << 40 | (ci as u64) << 32 | i as u64 + 1),
                );
                let sample_params = GaitParams {
                    fault: class,
                    severity,
                    seed,
                    ..params.base
                };
                let video_id = format!("{walker}_{}_{i:03}", class.as_str());
                let sample = generate_sequence(&sample_params, &video_id, &walker, &shape)?;
                records.push(LabelRecord::new(video_id, [class, class, class]));
                samples.push(sample);
            }
        }
    }
    Ok((samples, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gait;
    use crate::pose::KeypointName;
    use crate::preprocess::{self, Side};

    fn normalized_right_theta(sample: &SynthSample) -> Vec<f64> {
        let dir = preprocess::walking_direction(&sample.sequence).unwrap();
        let frames: Vec<_> = sample
            .sequence
            .frames
            .iter()
            .map(|p| preprocess::normalize_pose(p, dir).unwrap())
            .collect();
        preprocess::knee_angle_series(&frames, Side::Right)
            .unwrap()
            .theta
    }

    #[test]
    fn same_seed_bit_identical() {
        let params = GaitParams {
            noise_sigma: 1.5,
            seed: 7,
            ..GaitParams::default()
        };
        let a = generate_sequence(&params, "v", "w", &BodyShape::default()).unwrap();
        let b = generate_sequence(&params, "v", "w", &BodyShape::default()).unwrap();
        assert_eq!(a.sequence, b.sequence);
    }

    #[test]
    fn zero_noise_matches_the_exact_template() {
        // With sigma 0 the Gaussian step adds exactly nothing: fixed
        // body points land on their template positions bit-exactly.
        let params = GaitParams {
            forward_speed: 0.0,
            ..GaitParams::default()
        };
        let shape = BodyShape::default();
        let s = generate_sequence(&params, "v", "w", &shape).unwrap();
        for pose in &s.sequence.frames {
            let hip_y = GROUND_Y - shape.hip_height * shape.px_per_unit;
            assert_eq!(pose.get(KeypointName::LHip).y, hip_y);
            assert_eq!(pose.get(KeypointName::RHip).y, hip_y);
            assert_eq!(
                pose.get(KeypointName::Nose).y,
                GROUND_Y - (shape.hip_height + 1.0) * shape.px_per_unit
            );
        }
    }

    #[test]
    fn normal_walk_satisfies_the_rules() {
        let params = GaitParams::default();
        let s = generate_sequence(&params, "v", "w", &BodyShape::default()).unwrap();
        // One ankle exactly at ground height in every frame.
        for pose in &s.sequence.frames {
            let ly = pose.get(KeypointName::LAnkle).y;
            let ry = pose.get(KeypointName::RAnkle).y;
            let min_height = (s.ground_y - ly).min(s.ground_y - ry).abs();
            assert!(min_height < 1e-9);
        }
        // Support-phase knee angle reaches full extension.
        let theta = normalized_right_theta(&s);
        let support_max = theta
            .iter()
            .zip(&s.events)
            .filter(|(_, e)| e.right_support)
            .map(|(t, _)| *t)
            .fold(0.0f64, f64::max);
        assert!((support_max - 180.0).abs() < 2.0);
    }

    #[test]
    fn bk_caps_support_knee_angle() {
        let params = GaitParams {
            fault: FaultLabel::Bk,
            severity: 15.0,
            ..GaitParams::default()
        };
        let s = generate_sequence(&params, "v", "w", &BodyShape::default()).unwrap();
        let theta = normalized_right_theta(&s);
        let support_max = theta
            .iter()
            .zip(&s.events)
            .filter(|(_, e)| e.right_support)
            .map(|(t, _)| *t)
            .fold(0.0f64, f64::max);
        assert!(support_max <= 165.0 + 1e-6, "support max {support_max}");
    }

    #[test]
    fn lc_produces_flight_frames() {
        let params = GaitParams {
            fault: FaultLabel::Lc,
            severity: 0.1,
            ..GaitParams::default()
        };
        let s = generate_sequence(&params, "v", "w", &BodyShape::default()).unwrap();
        let lift_px = 0.1 * s.px_per_unit;
        let flying = s.sequence.frames.iter().any(|pose| {
            let ly = s.ground_y - pose.get(KeypointName::LAnkle).y;
            let ry = s.ground_y - pose.get(KeypointName::RAnkle).y;
            ly.min(ry) >= lift_px
        });
        assert!(flying);
        assert!(s.events.iter().any(|e| e.flight));
    }

    #[test]
    fn qualifying_minima_count_matches_cycles() {
        for fault in [FaultLabel::Normal, FaultLabel::Bk, FaultLabel::Lc] {
            let params = GaitParams {
                n_frames: 160,
                cycle_frames: 40,
                fault,
                severity: if fault == FaultLabel::Bk { 15.0 } else { 0.1 },
                ..GaitParams::default()
            };
            let s = generate_sequence(&params, "v", "w", &BodyShape::default()).unwrap();
            let theta = normalized_right_theta(&s);
            // Qualifying minima under the default detect_cycle
            // settings; expected floor(160/40) = 4.
            let minima = gait::qualifying_minima(&theta, 20.0, 30);
            assert_eq!(minima.len(), 4, "{fault:?}: {minima:?}");
            let w = gait::detect_cycle(&theta, 20.0, 30).unwrap();
            assert_eq!(w.end - w.start, 40);
        }
    }

    #[test]
    fn dataset_counts_and_labels() {
        let params = DatasetParams {
            n_walkers: 4,
            samples_per_class: 10,
            ..DatasetParams::default()
        };
        let (samples, records) = generate_dataset(&params).unwrap();
        assert_eq!(samples.len(), 120);
        assert_eq!(records.len(), 120);
        for (s, r) in samples.iter().zip(&records) {
            assert_eq!(s.sequence.video_id, r.video_id);
            assert_eq!(
                r.resolved,
                crate::pose::ResolvedLabel::Label(s.label)
            );
        }
        assert!(generate_dataset(&DatasetParams {
            n_walkers: 1,
            ..params
        })
        .is_err());
    }

    #[test]
    fn clean_dataset_passes_outlier_screen() {
        let params = DatasetParams {
            n_walkers: 3,
            samples_per_class: 4,
            ..DatasetParams::default()
        };
        let (samples, _) = generate_dataset(&params).unwrap();
        let series: Vec<_> = samples
            .iter()
            .map(|s| {
                let theta = normalized_right_theta(s);
                (
                    s.sequence.video_id.clone(),
                    preprocess::KneeAngleSeries {
                        side: Side::Right,
                        theta,
                    },
                )
            })
            .collect();
        let report = preprocess::reject_outliers(&series, 3.0).unwrap();
        assert!(report.removed.is_empty(), "removed: {:?}", report.removed);
    }
}
