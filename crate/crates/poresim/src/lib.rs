//! Short-term facial-pore simulation pipeline.
//!
//! The library covers the full chain from raw inputs to a simulated image:
//!
//! 1. [`imagecore`] — raster containers, Gaussian/DoG filtering, CIELAB
//!    conversion, and bilinear sampling with border clamping.
//! 2. [`poreseg`] — classical pore detection (DoG response threshold,
//!    morphology, connected components, shape filters) plus per-image pore
//!    statistics and mask metrics.
//! 3. [`datapipe`] — clinical index series handling: per-subject
//!    normalization, daily aggregation, n-day sliding-window outlier
//!    removal, time-window assignment, and trend analysis.
//! 4. [`rfregress`] — a from-scratch random-forest regressor mapping time
//!    windows to predicted pore-area ratios.
//! 5. [`deform`] — the warp engine: per-pore local scaling circles, flow
//!    field construction, and bilinear resampling that leaves non-pore
//!    pixels bit-identical.
//! 6. [`synth`] — deterministic synthetic data generators (pore sheets and
//!    clinical cohorts) with exact ground truth for testing and evaluation.

pub mod datapipe;
pub mod deform;
mod error;
pub mod imagecore;
pub mod poreseg;
pub mod rfregress;
pub mod synth;

pub use datapipe::{CleanConfig, DayWindow, IndexSample, Session, TimeWindow};
pub use deform::{FlowField, SimulationPlan, WarpCircle};
pub use error::{Error, Result};
pub use imagecore::{LabPixel, Raster};
pub use poreseg::{DetectionConfig, Mask, PoreComponent, PoreStats};
pub use rfregress::{ForestConfig, RandomForest, RegressionSample};
pub use synth::{CohortSpec, SheetSpec};
