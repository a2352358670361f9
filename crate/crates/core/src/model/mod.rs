//! Per-patch SEI (vector) / SEIR (host) compartmental model: state and
//! parameter types, the coupled right-hand side, and fixed-step RK4
//! integration with conservative demographic turnover.

mod dynamics;
mod params;
mod series;

pub use dynamics::{MetapopModel, Trajectory};
pub use params::{
    patch_index, DiseaseParams, PatchGeometry, PatchState, SeasonalBeta, COMPARTMENTS,
    DAYS_PER_YEAR,
};
pub use series::{
    weekly_incidence, weekly_incidence_with_ids, EpidemicSeries, Provenance, DAYS_PER_WEEK,
};
