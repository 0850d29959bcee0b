//! Feature front-end for multimodal inputs.
//!
//! Two independent sub-pipelines live here: MFCC extraction from PCM audio
//! ([`audio`]) and 3D pose-sequence standardization/augmentation ([`pose`]).
//! Both are pure and deterministic, so per-file parallelism is safe.

pub mod audio;
pub mod pose;

pub use audio::{mel_energies, mel_filter_centers, mel_filterbank, mfcc, AudioBuffer, MfccConfig};
pub use pose::{rotate_pose, standardize_pose, PoseSequence, RotationAxis, DEFAULT_POSE_FRAMES};
