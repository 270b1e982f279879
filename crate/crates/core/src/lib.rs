//! Affective correspondence learning between music and images.
//!
//! The crate extracts a 193-dimensional acoustic descriptor from music,
//! builds weakly labeled image/music correspondence datasets, and trains a
//! two-branch network with a fusion classifier that predicts whether an
//! image and a music segment carry the same broad emotion.

pub mod acpnet;
pub mod audio;
pub mod dataset;
pub mod error;
pub mod io;
pub mod neural;
pub mod pipeline;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
