//! Synthetic visible-spectrum imaging bench.
//!
//! A physics-based simulator renders seeded, reproducible 150×150×3
//! spectrum frames for configurable samples (Beer–Lambert absorption,
//! luminescent re-emission, scattering, sensor response, acquisition
//! noise), and from-scratch models — logistic regression, linear SVM,
//! linear regression, and a three-stage CNN — classify authenticity,
//! detect contamination, and regress dilution from the raw pixels. The
//! `metrics` module carries the full figure-of-merit set and `svg` renders
//! the standard plots.
//!
//! Everything is deterministic from seeds: the random source is pinned in
//! [`rng`], datasets and model files serialize byte-reproducibly, and
//! parallel execution reduces in fixed order so thread count never changes
//! a result.

pub mod error;
pub mod metrics;
pub mod models;
pub mod ppm;
pub mod preprocess;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod svg;

pub use error::{Error, Result};
