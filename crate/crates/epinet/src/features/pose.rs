//! 3D pose sequences: fixed-length resampling and rotational augmentation.
//!
//! A sequence is `T` frames of `J` joints, each an `[x, y, z]` coordinate.
//! On disk a sequence is a CSV with one row per frame and columns
//! `joint_0_x, joint_0_y, joint_0_z, joint_1_x, ...`.

use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default frame count sequences are standardized to. A processing choice,
/// not a property of any capture device.
pub const DEFAULT_POSE_FRAMES: usize = 150;

/// A time-ordered series of 3D joint coordinates (`T` frames x `J` joints).
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    frames: Vec<Vec<[f64; 3]>>,
}

impl PoseSequence {
    /// Validates that the sequence is non-empty, every frame has the same
    /// positive number of joints, and all coordinates are finite.
    pub fn new(frames: Vec<Vec<[f64; 3]>>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::EmptyInput("pose sequence has no frames".into()));
        }
        let joints = frames[0].len();
        if joints == 0 {
            return Err(Error::EmptyInput("pose frames have no joints".into()));
        }
        for (t, frame) in frames.iter().enumerate() {
            if frame.len() != joints {
                return Err(Error::DimensionMismatch(format!(
                    "frame {t} has {} joints, expected {joints}",
                    frame.len()
                )));
            }
            for (j, coord) in frame.iter().enumerate() {
                if coord.iter().any(|c| !c.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "frame {t}, joint {j}: non-finite coordinate"
                    )));
                }
            }
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Vec<[f64; 3]>] {
        &self.frames
    }

    /// Number of frames `T`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of joints `J` per frame.
    pub fn joints(&self) -> usize {
        self.frames[0].len()
    }

    /// Reads a pose CSV (`joint_k_x, joint_k_y, joint_k_z` columns, one row
    /// per frame).
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new().from_reader(reader);
        let header = csv.headers()?.clone();
        if header.is_empty() || header.len() % 3 != 0 {
            return Err(Error::Format(format!(
                "pose CSV header must contain joint_k_x/y/z triplets, found {} columns",
                header.len()
            )));
        }
        let joints = header.len() / 3;
        for j in 0..joints {
            for (a, axis) in ["x", "y", "z"].iter().enumerate() {
                let want = format!("joint_{j}_{axis}");
                let got = header.get(3 * j + a).unwrap();
                if got != want {
                    return Err(Error::Format(format!(
                        "pose CSV column {} is `{got}`, expected `{want}`",
                        3 * j + a
                    )));
                }
            }
        }
        let mut frames = Vec::new();
        for (idx, record) in csv.records().enumerate() {
            let record = record?;
            let row = idx + 1;
            if record.len() != header.len() {
                return Err(Error::InvalidValue {
                    row,
                    message: format!(
                        "expected {} fields, found {}",
                        header.len(),
                        record.len()
                    ),
                });
            }
            let mut frame = Vec::with_capacity(joints);
            for j in 0..joints {
                let mut coord = [0.0; 3];
                for (a, slot) in coord.iter_mut().enumerate() {
                    let cell = record.get(3 * j + a).unwrap().trim();
                    *slot = cell.parse::<f64>().map_err(|_| Error::InvalidValue {
                        row,
                        message: format!("`{cell}` is not a number"),
                    })?;
                }
                frame.push(coord);
            }
            frames.push(frame);
        }
        Self::new(frames)
    }

    pub fn from_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes the sequence in the same CSV layout `from_csv_reader` accepts.
    /// Coordinates are written with shortest round-trip formatting, so a
    /// write/read cycle reproduces the sequence exactly.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = Vec::with_capacity(self.joints() * 3);
        for j in 0..self.joints() {
            for axis in ["x", "y", "z"] {
                header.push(format!("joint_{j}_{axis}"));
            }
        }
        csv.write_record(&header)?;
        for frame in &self.frames {
            let row: Vec<String> = frame
                .iter()
                .flat_map(|coord| coord.iter().map(|c| c.to_string()))
                .collect();
            csv.write_record(&row)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Axis of rotation for [`rotate_pose`]. The vertical (y) axis is the
/// default since camera-view variation is horizontal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RotationAxis {
    X,
    #[default]
    Y,
    Z,
}

impl FromStr for RotationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Ok(Self::X),
            "y" => Ok(Self::Y),
            "z" => Ok(Self::Z),
            other => Err(Error::InvalidParameter(format!(
                "unknown rotation axis `{other}` (expected x, y, or z)"
            ))),
        }
    }
}

/// Resamples a sequence to `target_len` frames by per-joint, per-axis linear
/// interpolation on `target_len` equally spaced time points spanning the
/// first and last input frames. Endpoints are preserved exactly, and a
/// sequence already at the target length passes through unchanged.
pub fn standardize_pose(seq: &PoseSequence, target_len: usize) -> Result<PoseSequence> {
    if seq.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "pose standardization needs at least 2 frames, got {}",
            seq.len()
        )));
    }
    if target_len < 2 {
        return Err(Error::InvalidParameter(format!(
            "target length must be at least 2, got {target_len}"
        )));
    }
    let t_max = (seq.len() - 1) as f64;
    let frames = (0..target_len)
        .map(|i| {
            if i == 0 {
                return seq.frames[0].clone();
            }
            if i == target_len - 1 {
                return seq.frames[seq.len() - 1].clone();
            }
            let t = i as f64 * t_max / (target_len - 1) as f64;
            let lo = (t.floor() as usize).min(seq.len() - 2);
            let frac = t - lo as f64;
            if frac == 0.0 {
                return seq.frames[lo].clone();
            }
            let (a, b) = (&seq.frames[lo], &seq.frames[lo + 1]);
            a.iter()
                .zip(b)
                .map(|(pa, pb)| {
                    [
                        pa[0] + frac * (pb[0] - pa[0]),
                        pa[1] + frac * (pb[1] - pa[1]),
                        pa[2] + frac * (pb[2] - pa[2]),
                    ]
                })
                .collect()
        })
        .collect();
    PoseSequence::new(frames)
}

/// Rotates every frame about the chosen axis through that frame's root-joint
/// position. The root joint itself is unmoved, so rotating by `theta` and
/// then `-theta` about the same root recovers the original sequence.
pub fn rotate_pose(
    seq: &PoseSequence,
    degrees: f64,
    axis: RotationAxis,
    root_joint: usize,
) -> Result<PoseSequence> {
    if !degrees.is_finite() {
        return Err(Error::InvalidParameter(
            "rotation angle must be finite".into(),
        ));
    }
    if root_joint >= seq.joints() {
        return Err(Error::InvalidParameter(format!(
            "root joint {root_joint} out of range for {} joints",
            seq.joints()
        )));
    }
    if degrees == 0.0 {
        return Ok(seq.clone());
    }
    let theta = degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let rotate = |p: [f64; 3]| -> [f64; 3] {
        match axis {
            RotationAxis::X => [p[0], cos * p[1] - sin * p[2], sin * p[1] + cos * p[2]],
            RotationAxis::Y => [cos * p[0] + sin * p[2], p[1], -sin * p[0] + cos * p[2]],
            RotationAxis::Z => [cos * p[0] - sin * p[1], sin * p[0] + cos * p[1], p[2]],
        }
    };
    let frames = seq
        .frames
        .iter()
        .map(|frame| {
            let root = frame[root_joint];
            frame
                .iter()
                .map(|p| {
                    let rel = [p[0] - root[0], p[1] - root[1], p[2] - root[2]];
                    let r = rotate(rel);
                    [r[0] + root[0], r[1] + root[1], r[2] + root[2]]
                })
                .collect()
        })
        .collect();
    PoseSequence::new(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_seq(values: &[f64]) -> PoseSequence {
        PoseSequence::new(values.iter().map(|&v| vec![[v, 0.0, 0.0]]).collect()).unwrap()
    }

    fn demo_seq() -> PoseSequence {
        let frames = (0..7)
            .map(|t| {
                (0..4)
                    .map(|j| {
                        [
                            (t as f64).sin() + j as f64,
                            0.5 * t as f64 - j as f64,
                            (j as f64 * 1.3 + t as f64 * 0.2).cos(),
                        ]
                    })
                    .collect()
            })
            .collect();
        PoseSequence::new(frames).unwrap()
    }

    #[test]
    fn standardize_at_current_length_is_identity() {
        let seq = demo_seq();
        let out = standardize_pose(&seq, seq.len()).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn standardize_is_idempotent_at_target_length() {
        let seq = demo_seq();
        let once = standardize_pose(&seq, 25).unwrap();
        let twice = standardize_pose(&once, 25).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn constant_sequence_stays_constant() {
        let frames = vec![vec![[1.0, -2.0, 3.5], [0.0, 0.0, 1.0]]; 9];
        let seq = PoseSequence::new(frames).unwrap();
        let out = standardize_pose(&seq, 31).unwrap();
        assert_eq!(out.len(), 31);
        for frame in out.frames() {
            assert_eq!(frame, &seq.frames()[0]);
        }
    }

    #[test]
    fn ramp_over_11_frames_resampled_to_5() {
        let values: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let out = standardize_pose(&scalar_seq(&values), 5).unwrap();
        let got: Vec<f64> = out.frames().iter().map(|f| f[0][0]).collect();
        let want = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "{got:?}");
        }
    }

    #[test]
    fn endpoints_are_preserved_exactly() {
        let seq = demo_seq();
        for target in [2, 5, 150, 307] {
            let out = standardize_pose(&seq, target).unwrap();
            assert_eq!(out.len(), target);
            assert_eq!(out.frames()[0], seq.frames()[0]);
            assert_eq!(out.frames()[target - 1], seq.frames()[seq.len() - 1]);
        }
    }

    #[test]
    fn standardize_rejects_short_inputs() {
        let seq = PoseSequence::new(vec![vec![[0.0, 0.0, 0.0]]]).unwrap();
        assert!(standardize_pose(&seq, 10).is_err());
        assert!(standardize_pose(&demo_seq(), 1).is_err());
    }

    #[test]
    fn zero_degree_rotation_is_identity() {
        let seq = demo_seq();
        let out = rotate_pose(&seq, 0.0, RotationAxis::Y, 0).unwrap();
        assert_eq!(out, seq);
    }

    #[test]
    fn rotation_followed_by_inverse_restores_input() {
        let seq = demo_seq();
        for axis in [RotationAxis::X, RotationAxis::Y, RotationAxis::Z] {
            let there = rotate_pose(&seq, 23.0, axis, 1).unwrap();
            let back = rotate_pose(&there, -23.0, axis, 1).unwrap();
            for (fa, fb) in seq.frames().iter().zip(back.frames()) {
                for (pa, pb) in fa.iter().zip(fb) {
                    for (a, b) in pa.iter().zip(pb) {
                        assert!((a - b).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rotation_preserves_pairwise_distances() {
        let seq = demo_seq();
        for degrees in [5.0, 10.0] {
            let out = rotate_pose(&seq, degrees, RotationAxis::Y, 0).unwrap();
            for (fa, fb) in seq.frames().iter().zip(out.frames()) {
                for i in 0..fa.len() {
                    for j in (i + 1)..fa.len() {
                        let da = dist(fa[i], fa[j]);
                        let db = dist(fb[i], fb[j]);
                        assert!((da - db).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn root_joint_is_fixed_by_rotation() {
        let seq = demo_seq();
        let out = rotate_pose(&seq, 45.0, RotationAxis::Y, 2).unwrap();
        for (fa, fb) in seq.frames().iter().zip(out.frames()) {
            assert_eq!(fa[2], fb[2]);
        }
    }

    #[test]
    fn rotation_rejects_out_of_range_root() {
        assert!(rotate_pose(&demo_seq(), 5.0, RotationAxis::Y, 4).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let seq = demo_seq();
        let mut buf = Vec::new();
        seq.write_csv(&mut buf).unwrap();
        let back = PoseSequence::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, seq);
    }

    #[test]
    fn csv_reader_rejects_bad_headers_and_cells() {
        let bad_header = "joint_0_x,joint_0_y\n1,2\n";
        assert!(PoseSequence::from_csv_reader(bad_header.as_bytes()).is_err());
        let wrong_name = "joint_0_x,joint_0_z,joint_0_y\n1,2,3\n";
        assert!(PoseSequence::from_csv_reader(wrong_name.as_bytes()).is_err());
        let bad_cell = "joint_0_x,joint_0_y,joint_0_z\n1,two,3\n";
        let err = PoseSequence::from_csv_reader(bad_cell.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn validation_rejects_ragged_and_non_finite_frames() {
        assert!(PoseSequence::new(vec![]).is_err());
        assert!(PoseSequence::new(vec![vec![]]).is_err());
        let ragged = vec![
            vec![[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]],
            vec![[0.0, 0.0, 0.0]],
        ];
        assert!(PoseSequence::new(ragged).is_err());
        let nan = vec![vec![[f64::NAN, 0.0, 0.0]]];
        assert!(PoseSequence::new(nan).is_err());
    }

    fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}
