//! Epistemic network analysis for coded conversation data.
//!
//! The crate turns coded multimodal transcripts into comparable network
//! models: utterance lines are grouped into stanzas, code co-occurrences are
//! counted per stanza and accumulated per unit of analysis, the resulting
//! vectors are normalized and projected into a low-dimensional space, and
//! group networks are compared statistically and rendered as SVG plots.
//! A pattern-based autocoder with inter-rater reliability checks and
//! audio/pose feature extraction round out the front end.

pub mod accumulation;
pub mod autocoder;
pub mod corpus;
pub mod error;
pub mod features;
mod linalg;
pub mod networks;
pub mod projection;
pub mod render;
pub mod stats;

pub use error::{Error, Result};
