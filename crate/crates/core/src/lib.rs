//! Tooling for mapping electrical substation components from aerial imagery.
//!
//! The crate covers the pipeline around a detector rather than the detector
//! itself: YOLO TXT datasets and splits ([`model`]), letterboxing and
//! orientation ([`preprocess`]), rotation and hue augmentation
//! ([`augment`]), detection metrics ([`eval`]), supervised training runs
//! with early stopping ([`harness`]), imagery tile acquisition
//! ([`geotile`]) and component counting ([`census`]).
//!
//! Training and inference are delegated to external adapters that speak
//! small line-oriented protocols, documented in [`harness`] and [`census`].

pub mod augment;
pub mod census;
pub mod eval;
pub mod geotile;
pub mod harness;
pub mod model;
pub mod preprocess;
pub mod raster;

mod error;

pub use error::{Error, ExitCode};
