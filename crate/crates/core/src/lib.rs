//! Metapopulation (multipatch) vector-host epidemic simulation and calibration.
//!
//! The crate couples per-patch SEI (vector) / SEIR (host) compartmental dynamics
//! through an inter-patch visit matrix, builds such matrices from a gravity model
//! of population and distance, and calibrates transmission and gravity parameters
//! against weekly case-count data by seeded random search.
//!
//! Modules map onto the pipeline stages:
//!
//! - [`model`] — compartmental state, seasonal transmission forcing, RK4 integration
//! - [`gravity`] — coupling matrices (gravity, uniform, identity) and distance kernels
//! - [`synthetic`] — the driver/follower city experiments and synchrony analyses
//! - [`fitting`] — goodness-of-fit statistics and the random-search harness
//! - [`climate`] — sinusoidal minimum-temperature regression
//! - [`data`] — province/case/climate CSV ingestion and patch aggregation
//! - [`fixtures`] — deterministic synthetic datasets standing in for the
//!   non-redistributable surveillance data
//!
//! All randomized paths take explicit integer seeds and produce identical results
//! across runs and worker counts. With the `parallel` feature (default) the fit
//! and sweep loops fan out over rayon; without it they run sequentially.

pub mod climate;
pub mod data;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod fixtures;
pub mod gravity;
pub mod model;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
pub use gravity::{CouplingMatrix, DistanceMode, GravityParams};
pub use model::{
    DiseaseParams, EpidemicSeries, MetapopModel, PatchGeometry, PatchState, Provenance,
    SeasonalBeta, Trajectory,
};
