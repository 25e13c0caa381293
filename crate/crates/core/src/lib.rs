//! Scale- and rotation-robust template matching built on diversity
//! similarity measures, plus the statistical and benchmark harnesses
//! that validate them.
//!
//! The main entry point is [`matcher::match_template`], which slides
//! multi-scale candidate windows over a target image and scores each
//! one with the configured measure — scalable diversity similarity
//! (SDS) by default, or one of the BBS / DIS / DDIS / SSD / SAD
//! baselines. `statlab` reproduces the Monte-Carlo analyses of the
//! measures on synthetic Gaussian point sets; `eval` runs success-curve
//! benchmarks over annotated or generated image pairs.

pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod image;
pub mod io;
pub mod matcher;
pub mod measures;
pub mod nn;
pub mod statlab;
pub mod window;

pub use config::{DistanceMode, MatchConfig, Measure};
pub use error::{Error, Result};
pub use features::{patchify, rank_map, PatchSet};
pub use image::{Field, Image};
pub use matcher::{match_template, MatchResult};
pub use window::{ScaleGrid, Window};
