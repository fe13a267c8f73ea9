//! Keypoint sequences, referee labels, and dataset assembly.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

pub const KEYPOINT_COUNT: usize = 17;

/// Fixed 17-keypoint index order. Index values are part of the file
/// schema and must never change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(usize)]
pub enum KeypointName {
    Nose = 0,
    LEye = 1,
    REye = 2,
    LEar = 3,
    REar = 4,
    LShoulder = 5,
    RShoulder = 6,
    LElbow = 7,
    RElbow = 8,
    LWrist = 9,
    RWrist = 10,
    LHip = 11,
    RHip = 12,
    LKnee = 13,
    RKnee = 14,
    LAnkle = 15,
    RAnkle = 16,
}

impl KeypointName {
    pub const ALL: [KeypointName; KEYPOINT_COUNT] = [
        KeypointName::Nose,
        KeypointName::LEye,
        KeypointName::REye,
        KeypointName::LEar,
        KeypointName::REar,
        KeypointName::LShoulder,
        KeypointName::RShoulder,
        KeypointName::LElbow,
        KeypointName::RElbow,
        KeypointName::LWrist,
        KeypointName::RWrist,
        KeypointName::LHip,
        KeypointName::RHip,
        KeypointName::LKnee,
        KeypointName::RKnee,
        KeypointName::LAnkle,
        KeypointName::RAnkle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KeypointName::Nose => "nose",
            KeypointName::LEye => "l_eye",
            KeypointName::REye => "r_eye",
            KeypointName::LEar => "l_ear",
            KeypointName::REar => "r_ear",
            KeypointName::LShoulder => "l_shoulder",
            KeypointName::RShoulder => "r_shoulder",
            KeypointName::LElbow => "l_elbow",
            KeypointName::RElbow => "r_elbow",
            KeypointName::LWrist => "l_wrist",
            KeypointName::RWrist => "r_wrist",
            KeypointName::LHip => "l_hip",
            KeypointName::RHip => "r_hip",
            KeypointName::LKnee => "l_knee",
            KeypointName::RKnee => "r_knee",
            KeypointName::LAnkle => "l_ankle",
            KeypointName::RAnkle => "r_ankle",
        }
    }
}

/// One estimated joint location in image coordinates (y grows downward).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(x: f64, y: f64, confidence: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("keypoint coordinates"));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::InvalidConfidence(confidence));
        }
        Ok(Keypoint { x, y, confidence })
    }
}

/// A single frame: exactly 17 keypoints in the fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct Pose {
    keypoints: [Keypoint; KEYPOINT_COUNT],
}

impl Pose {
    pub fn new(keypoints: [Keypoint; KEYPOINT_COUNT]) -> Self {
        Pose { keypoints }
    }

    pub fn from_slice(keypoints: &[Keypoint]) -> Result<Self> {
        let arr: [Keypoint; KEYPOINT_COUNT] =
            keypoints.try_into().map_err(|_| Error::KeypointCount {
                expected: KEYPOINT_COUNT,
                got: keypoints.len(),
            })?;
        Ok(Pose { keypoints: arr })
    }

    pub fn get(&self, name: KeypointName) -> Keypoint {
        self.keypoints[name.index()]
    }

    pub fn keypoints(&self) -> &[Keypoint; KEYPOINT_COUNT] {
        &self.keypoints
    }
}

/// Per-video time series of poses with walker identity and frame rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub video_id: String,
    pub walker_id: String,
    pub fps: f64,
    pub frames: Vec<Pose>,
}

impl PoseSequence {
    pub fn new(video_id: String, walker_id: String, fps: f64, frames: Vec<Pose>) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidFps(fps));
        }
        if frames.len() < 2 {
            return Err(Error::TooFewFrames {
                required: 2,
                got: frames.len(),
            });
        }
        Ok(PoseSequence {
            video_id,
            walker_id,
            fps,
            frames,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaultLabel {
    Normal,
    Bk,
    Lc,
}

impl FaultLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            FaultLabel::Normal => "normal",
            FaultLabel::Bk => "bk",
            FaultLabel::Lc => "lc",
        }
    }

    /// Case-insensitive parse of the labels-CSV vocabulary.
    pub fn parse(s: &str) -> Option<Self> {
        if s.eq_ignore_ascii_case("normal") {
            Some(FaultLabel::Normal)
        } else if s.eq_ignore_ascii_case("bk") {
            Some(FaultLabel::Bk)
        } else if s.eq_ignore_ascii_case("lc") {
            Some(FaultLabel::Lc)
        } else {
            None
        }
    }
}

/// Majority-vote outcome over the three referee judgments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolvedLabel {
    Label(FaultLabel),
    /// All three referees disagreed.
    Unresolved,
}

/// Strict majority of three referee judgments; `Unresolved` on a
/// three-way split. Symmetric in the order of judgments.
pub fn resolve_labels(judgments: [FaultLabel; 3]) -> ResolvedLabel {
    let [a, b, c] = judgments;
    if a == b || a == c {
        ResolvedLabel::Label(a)
    } else if b == c {
        ResolvedLabel::Label(b)
    } else {
        ResolvedLabel::Unresolved
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    pub video_id: String,
    pub referee_judgments: [FaultLabel; 3],
    pub resolved: ResolvedLabel,
}

impl LabelRecord {
    pub fn new(video_id: String, referee_judgments: [FaultLabel; 3]) -> Self {
        let resolved = resolve_labels(referee_judgments);
        LabelRecord {
            video_id,
            referee_judgments,
            resolved,
        }
    }
}

/// Sequences joined with their resolved labels. Every sequence in a
/// dataset has a resolved (non-Unresolved) label.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sequences: Vec<PoseSequence>,
    pub labels: BTreeMap<String, FaultLabel>,
}

impl Dataset {
    pub fn label_of(&self, video_id: &str) -> Option<FaultLabel> {
        self.labels.get(video_id).copied()
    }
}

/// Joins sequences with label records, dropping videos whose referee
/// vote was unresolved. Returns the dataset and the excluded video ids.
pub fn assemble_dataset(
    sequences: Vec<PoseSequence>,
    records: &[LabelRecord],
) -> Result<(Dataset, Vec<String>)> {
    let mut by_id: BTreeMap<String, PoseSequence> = BTreeMap::new();
    for seq in sequences {
        if by_id.contains_key(&seq.video_id) {
            return Err(Error::DuplicateVideoId(seq.video_id));
        }
        by_id.insert(seq.video_id.clone(), seq);
    }
    let mut labels = BTreeMap::new();
    let mut excluded = Vec::new();
    for rec in records {
        if !by_id.contains_key(&rec.video_id) {
            return Err(Error::UnknownVideoId(rec.video_id.clone()));
        }
        match rec.resolved {
            ResolvedLabel::Label(l) => {
                if labels.insert(rec.video_id.clone(), l).is_some() {
                    return Err(Error::DuplicateVideoId(rec.video_id.clone()));
                }
            }
            ResolvedLabel::Unresolved => excluded.push(rec.video_id.clone()),
        }
    }
    let sequences = by_id
        .into_values()
        .filter(|s| labels.contains_key(&s.video_id))
        .collect();
    Ok((Dataset { sequences, labels }, excluded))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn zero_pose() -> Pose {
        Pose::new([Keypoint::new(0.0, 0.0, 1.0).unwrap(); KEYPOINT_COUNT])
    }

    fn seq(video: &str, walker: &str) -> PoseSequence {
        PoseSequence::new(
            video.to_string(),
            walker.to_string(),
            60.0,
            alloc::vec![zero_pose(), zero_pose()],
        )
        .unwrap()
    }

    #[test]
    fn majority_vote() {
        use FaultLabel::*;
        assert_eq!(resolve_labels([Bk, Bk, Normal]), ResolvedLabel::Label(Bk));
        assert_eq!(resolve_labels([Lc, Lc, Lc]), ResolvedLabel::Label(Lc));
        assert_eq!(resolve_labels([Bk, Lc, Normal]), ResolvedLabel::Unresolved);
    }

    #[test]
    fn keypoint_validation() {
        assert!(Keypoint::new(f64::NAN, 0.0, 1.0).is_err());
        assert!(Keypoint::new(0.0, 0.0, 1.5).is_err());
        assert!(Pose::from_slice(&[Keypoint::new(0.0, 0.0, 1.0).unwrap(); 16]).is_err());
    }

    #[test]
    fn assemble_excludes_unresolved() {
        use FaultLabel::*;
        let sequences = alloc::vec![seq("v1", "A"), seq("v2", "A"), seq("v3", "B")];
        let records = alloc::vec![
            LabelRecord::new("v1".to_string(), [Normal, Normal, Normal]),
            LabelRecord::new("v2".to_string(), [Bk, Lc, Normal]),
            LabelRecord::new("v3".to_string(), [Lc, Lc, Normal]),
        ];
        let (ds, excluded) = assemble_dataset(sequences, &records).unwrap();
        assert_eq!(ds.sequences.len(), 2);
        assert_eq!(excluded, alloc::vec!["v2".to_string()]);
        assert_eq!(ds.label_of("v3"), Some(Lc));
        for s in &ds.sequences {
            assert!(ds.label_of(&s.video_id).is_some());
        }
    }

    #[test]
    fn assemble_rejects_unknown_and_duplicate_ids() {
        use FaultLabel::*;
        let records = alloc::vec![LabelRecord::new(
            "ghost".to_string(),
            [Normal, Normal, Normal]
        )];
        assert_eq!(
            assemble_dataset(alloc::vec![seq("v1", "A")], &records),
            Err(Error::UnknownVideoId("ghost".to_string()))
        );
        let dup = alloc::vec![seq("v1", "A"), seq("v1", "A")];
        assert!(matches!(
            assemble_dataset(dup, &[]),
            Err(Error::DuplicateVideoId(_))
        ));
    }

    #[test]
    fn keypoint_index_mapping_is_fixed() {
        for (i, name) in KeypointName::ALL.iter().enumerate() {
            assert_eq!(name.index(), i);
            assert_eq!(KeypointName::from_index(i), Some(*name));
        }
        assert_eq!(KeypointName::from_index(17), None);
        assert_eq!(format!("{}", KeypointName::RAnkle.as_str()), "r_ankle");
    }

    proptest! {
        #[test]
        fn resolve_is_permutation_symmetric(a in 0usize..3, b in 0usize..3, c in 0usize..3) {
            use FaultLabel::*;
            let labels = [Normal, Bk, Lc];
            let j = [labels[a], labels[b], labels[c]];
            let base = resolve_labels(j);
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            for p in perms {
                prop_assert_eq!(resolve_labels([j[p[0]], j[p[1]], j[p[2]]]), base);
            }
        }
    }
}
