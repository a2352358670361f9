//! The synthetic driver/follower experiments: one large central city driving
//! epidemics in many small cities, under uniform or gravity-predicted links,
//! with synchrony analyses (correlation vs distance, peak delays, sweeps).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::gravity::{gravity_matrix, CouplingMatrix, DistanceMode, GravityParams};
use crate::model::{
    patch_index, DiseaseParams, MetapopModel, PatchGeometry, PatchState, SeasonalBeta, Trajectory,
};
use crate::stats;

pub const DRIVER_POPULATION: f64 = 8_000_000.0;
pub const FOLLOWER_POPULATION: f64 = 100_000.0;
/// Cities are placed in a square with coordinates in [-100, 100].
pub const COORDINATE_RANGE: f64 = 100.0;
/// Resampling floor on pairwise separation.
pub const MIN_SEPARATION: f64 = 1e-6;
/// Long enough for the weakest standard link setting (1e-5) to peak.
pub const DEFAULT_HORIZON_DAYS: f64 = 2000.0;
/// Gravity weights are rescaled so the largest off-diagonal entry equals
/// this cap; raw gravity values with city-scale populations far exceed 1.
pub const DEFAULT_WEIGHT_CAP: f64 = 0.01;

/// The driver city plus randomly placed follower cities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub geoms: Vec<PatchGeometry>,
    /// Index of the seeded (driver) city.
    pub seed_patch: usize,
    /// Initially infectious hosts in the seeded city.
    pub seed_count: f64,
    pub rng_seed: u64,
}

impl SyntheticScenario {
    pub fn driver_id(&self) -> &str {
        &self.geoms[self.seed_patch].id
    }

    pub fn patch_count(&self) -> usize {
        self.geoms.len()
    }
}

/// Place the driver (population 8 million) at the origin and `n_followers`
/// cities of 100 000 uniformly at random on the square, resampling any draw
/// closer than [`MIN_SEPARATION`] to an existing city.
pub fn generate_scenario(n_followers: usize, rng_seed: u64) -> Result<SyntheticScenario> {
    if n_followers == 0 {
        return Err(Error::EmptyInput("scenario needs at least one follower"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut geoms = vec![PatchGeometry::new("city_1", DRIVER_POPULATION, 0.0, 0.0)];
    for k in 0..n_followers {
        loop {
            let x = rng.random_range(-COORDINATE_RANGE..COORDINATE_RANGE);
            let y = rng.random_range(-COORDINATE_RANGE..COORDINATE_RANGE);
            let separated = geoms
                .iter()
                .all(|g| (g.x - x).hypot(g.y - y) >= MIN_SEPARATION);
            if separated {
                geoms.push(PatchGeometry::new(
                    format!("city_{}", k + 2),
                    FOLLOWER_POPULATION,
                    x,
                    y,
                ));
                break;
            }
        }
    }
    Ok(SyntheticScenario {
        geoms,
        seed_patch: 0,
        seed_count: 1.0,
        rng_seed,
    })
}

/// Gravity coupling for a scenario, rescaled so the largest off-diagonal
/// entry equals `cap` (when given). Returns the matrix and the scale factor
/// actually applied on top of `params.theta`.
pub fn gravity_coupling(
    scenario: &SyntheticScenario,
    params: &GravityParams,
    cap: Option<f64>,
) -> Result<(CouplingMatrix, f64)> {
    let raw = gravity_matrix(&scenario.geoms, params, DistanceMode::Euclidean, 1.0)?;
    match cap {
        Some(c) => raw.scaled_to_max_offdiagonal(c),
        None => Ok((raw, 1.0)),
    }
}

/// Run the non-seasonal model over the scenario: constant `beta_v`, baseline
/// rates otherwise, one seeded city, daily sampling.
pub fn run_synthetic(
    scenario: &SyntheticScenario,
    coupling: &CouplingMatrix,
    beta_v: f64,
    horizon_days: f64,
    dt: f64,
) -> Result<Trajectory> {
    if coupling.len() != scenario.geoms.len() {
        return Err(Error::DimensionMismatch {
            context: "coupling vs scenario cities",
            expected: scenario.geoms.len(),
            actual: coupling.len(),
        });
    }
    let params: Vec<DiseaseParams> = scenario
        .geoms
        .iter()
        .map(|_| DiseaseParams {
            beta_v: SeasonalBeta::constant(beta_v),
            ..DiseaseParams::default()
        })
        .collect();
    let initial: Vec<PatchState> = scenario
        .geoms
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let n_h = g.population;
            let n_v = params[i].vector_ratio * n_h;
            if i == scenario.seed_patch {
                PatchState::seeded(n_h, n_v, scenario.seed_count)
            } else {
                PatchState::disease_free(n_h, n_v)
            }
        })
        .collect();
    let model = MetapopModel::new(params, coupling.clone(), false)?;
    model.integrate(&initial, (0.0, horizon_days), dt, 1.0)
}

/// One city's epidemic-curve correlation with the reference city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationPoint {
    pub patch_id: String,
    pub distance: f64,
    /// `None` when the city's curve has zero variance (never reported as 0).
    pub correlation: Option<f64>,
}

/// Pearson correlation of each non-reference city's infectious-host curve
/// with the reference city's, against the pair distance, sorted by distance.
pub fn correlation_vs_distance(
    trajectory: &Trajectory,
    geoms: &[PatchGeometry],
    reference: &str,
) -> Result<Vec<CorrelationPoint>> {
    if trajectory.patch_count() != geoms.len() {
        return Err(Error::DimensionMismatch {
            context: "trajectory vs geometries",
            expected: geoms.len(),
            actual: trajectory.patch_count(),
        });
    }
    if trajectory.len() < 2 {
        return Err(Error::InsufficientData(
            "correlation needs at least two time points".into(),
        ));
    }
    let r = patch_index(geoms, reference)?;
    let ref_series = trajectory.prevalence(r);
    let mut out = Vec::with_capacity(geoms.len() - 1);
    for (i, g) in geoms.iter().enumerate() {
        if i == r {
            continue;
        }
        let series = trajectory.prevalence(i);
        out.push(CorrelationPoint {
            patch_id: g.id.clone(),
            distance: crate::gravity::distance(&geoms[r], g, DistanceMode::Euclidean)?,
            correlation: stats::pearson_correlation(&series, &ref_series),
        });
    }
    out.sort_by(|a, b| a.distance.partial_cmp(&b.distance).expect("finite"));
    Ok(out)
}

/// One city's peak timing relative to the reference city.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakDelay {
    pub patch_id: String,
    /// `argmax I_h(city) - argmax I_h(reference)` in days, ties broken by the
    /// earliest time; `None` for a flat all-zero curve.
    pub delay_days: Option<f64>,
}

/// Peak delay of every city (including the reference itself, at 0).
pub fn peak_delay(
    trajectory: &Trajectory,
    geoms: &[PatchGeometry],
    reference: &str,
) -> Result<Vec<PeakDelay>> {
    if trajectory.patch_count() != geoms.len() {
        return Err(Error::DimensionMismatch {
            context: "trajectory vs geometries",
            expected: geoms.len(),
            actual: trajectory.patch_count(),
        });
    }
    let r = patch_index(geoms, reference)?;
    let peak_time = |patch: usize| -> Option<f64> {
        let series = trajectory.prevalence(patch);
        if series.iter().all(|&v| v == 0.0) {
            return None;
        }
        stats::argmax(&series).map(|k| trajectory.times()[k])
    };
    let ref_peak = peak_time(r).ok_or_else(|| {
        Error::InsufficientData(format!("reference '{reference}' has a flat zero curve"))
    })?;
    Ok(geoms
        .iter()
        .enumerate()
        .map(|(i, g)| PeakDelay {
            patch_id: g.id.clone(),
            delay_days: peak_time(i).map(|t| t - ref_peak),
        })
        .collect())
}

/// Mean of the defined correlations.
pub fn mean_correlation(points: &[CorrelationPoint]) -> Option<f64> {
    let defined: Vec<f64> = points.iter().filter_map(|p| p.correlation).collect();
    stats::mean(&defined)
}

/// Mean delay over cities with a defined peak, excluding the reference.
pub fn mean_delay(delays: &[PeakDelay], reference: &str) -> Option<f64> {
    let defined: Vec<f64> = delays
        .iter()
        .filter(|d| d.patch_id != reference)
        .filter_map(|d| d.delay_days)
        .collect();
    stats::mean(&defined)
}

/// Distance-decay steepness of a correlation curve: mean correlation of the
/// nearer half minus the farther half (points already sorted by distance).
pub fn decay_steepness(points: &[CorrelationPoint]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let mid = points.len() / 2;
    let near = mean_correlation(&points[..mid])?;
    let far = mean_correlation(&points[mid..])?;
    Some(near - far)
}

/// Spearman rank correlation between distance and epidemic-curve correlation,
/// over the defined points.
pub fn distance_correlation_trend(points: &[CorrelationPoint]) -> Option<f64> {
    let (d, c): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.correlation.map(|c| (p.distance, c)))
        .unzip();
    stats::spearman_correlation(&d, &c)
}

/// Which gravity parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Alpha,
    Gamma,
    Theta,
}

impl SweepParam {
    pub fn apply(&self, base: &GravityParams, value: f64) -> GravityParams {
        let mut p = *base;
        match self {
            SweepParam::Alpha => p.alpha = value,
            SweepParam::Gamma => p.gamma = value,
            SweepParam::Theta => p.theta = value,
        }
        p
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepParam::Alpha => "alpha",
            SweepParam::Gamma => "gamma",
            SweepParam::Theta => "theta",
        }
    }
}

/// One sweep value's correlation-vs-distance curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub value: f64,
    /// Off-diagonal scale factor shared by the whole family.
    pub scale: f64,
    pub points: Vec<CorrelationPoint>,
}

/// Run the scenario once per sweep value and collect each run's
/// correlation-vs-distance curve against the driver.
///
/// The whole family shares one off-diagonal scale factor (chosen so the
/// family's largest raw off-diagonal weight equals `cap`): raw weights at
/// city-scale populations are far too large for a fixed-step integrator,
/// while per-value rescaling would erase exactly the cross-value scale
/// differences the sweep is about.
pub fn parameter_sweep(
    scenario: &SyntheticScenario,
    sweep: SweepParam,
    values: &[f64],
    fixed: &GravityParams,
    cap: f64,
    horizon_days: f64,
    dt: f64,
) -> Result<Vec<SweepCurve>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("sweep needs at least one value"));
    }
    let mut raw = Vec::with_capacity(values.len());
    for &v in values {
        let params = sweep.apply(fixed, v);
        raw.push(gravity_matrix(
            &scenario.geoms,
            &params,
            DistanceMode::Euclidean,
            1.0,
        )?);
    }
    let family_max = raw
        .iter()
        .map(CouplingMatrix::max_offdiagonal)
        .fold(0.0, f64::max);
    if family_max <= 0.0 {
        return Err(Error::Config(
            "sweep family has no positive off-diagonal weight".into(),
        ));
    }
    let scale = cap / family_max;

    let jobs: Vec<(f64, CouplingMatrix)> = values.iter().copied().zip(raw).collect();
    let runs = exec::map_slice(&jobs, |(value, matrix)| -> Result<SweepCurve> {
        let scaled = matrix.scale_offdiagonals(scale)?;
        let traj = run_synthetic(scenario, &scaled, 0.3, horizon_days, dt)?;
        let points = correlation_vs_distance(&traj, &scenario.geoms, scenario.driver_id())?;
        Ok(SweepCurve {
            value: *value,
            scale,
            points,
        })
    });
    runs.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_scenario() -> SyntheticScenario {
        generate_scenario(12, 424242).unwrap()
    }

    #[test]
    fn scenario_layout_matches_construction() {
        let sc = generate_scenario(99, 7).unwrap();
        assert_eq!(sc.geoms.len(), 100);
        assert_eq!(sc.geoms[0].id, "city_1");
        assert_eq!(sc.geoms[0].population, DRIVER_POPULATION);
        assert_eq!((sc.geoms[0].x, sc.geoms[0].y), (0.0, 0.0));
        for g in &sc.geoms[1..] {
            assert_eq!(g.population, FOLLOWER_POPULATION);
            assert!(g.x.abs() <= COORDINATE_RANGE && g.y.abs() <= COORDINATE_RANGE);
        }
    }

    #[test]
    fn scenario_is_deterministic_in_seed() {
        let a = generate_scenario(50, 99).unwrap();
        let b = generate_scenario(50, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_scenario(50, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_city_scenario_for_decoupling() {
        let sc = generate_scenario(1, 3).unwrap();
        assert_eq!(sc.geoms.len(), 2);
    }

    #[test]
    fn zero_weight_leaves_followers_uninfected() {
        let sc = small_scenario();
        let coupling = CouplingMatrix::uniform(sc.patch_count(), 0.0, 1.0).unwrap();
        let traj = run_synthetic(&sc, &coupling, 0.3, 600.0, 0.25).unwrap();
        for i in 1..sc.patch_count() {
            assert!(traj.prevalence(i).iter().all(|&v| v == 0.0));
        }
        // and the correlation of a flat follower is undefined, not zero
        let pts = correlation_vs_distance(&traj, &sc.geoms, "city_1").unwrap();
        assert!(pts.iter().all(|p| p.correlation.is_none()));
    }

    #[test]
    fn uniform_links_synchronize_followers() {
        let sc = small_scenario();
        let coupling = CouplingMatrix::uniform(sc.patch_count(), 0.01, 1.0).unwrap();
        let traj = run_synthetic(&sc, &coupling, 0.3, 1200.0, 0.25).unwrap();
        // follower curves are permutation-symmetric up to rounding
        let follower: Vec<Vec<f64>> = (1..sc.patch_count()).map(|i| traj.prevalence(i)).collect();
        for other in follower.iter().skip(1) {
            let r = stats::pearson_correlation(&follower[0], other).unwrap();
            assert!(r >= 1.0 - 1e-9, "pairwise follower correlation {r}");
        }
        // and the waves nearly coincide with the driver's
        let delays = peak_delay(&traj, &sc.geoms, "city_1").unwrap();
        let mean = mean_delay(&delays, "city_1").unwrap();
        assert!(mean.abs() < 60.0, "mean delay {mean}");
    }

    #[test]
    fn weaker_links_delay_followers_more() {
        let sc = small_scenario();
        let mut means = Vec::new();
        for w in [1e-2, 1e-3, 1e-5] {
            let coupling = CouplingMatrix::uniform(sc.patch_count(), w, 1.0).unwrap();
            let traj = run_synthetic(&sc, &coupling, 0.3, 2000.0, 0.25).unwrap();
            let delays = peak_delay(&traj, &sc.geoms, "city_1").unwrap();
            means.push(mean_delay(&delays, "city_1").unwrap());
        }
        assert!(
            means[0] < means[1] && means[1] < means[2],
            "delays not increasing: {means:?}"
        );
    }

    #[test]
    fn reference_delay_is_zero() {
        let sc = small_scenario();
        let coupling = CouplingMatrix::uniform(sc.patch_count(), 0.01, 1.0).unwrap();
        let traj = run_synthetic(&sc, &coupling, 0.3, 900.0, 0.25).unwrap();
        let delays = peak_delay(&traj, &sc.geoms, "city_1").unwrap();
        let d0 = delays.iter().find(|d| d.patch_id == "city_1").unwrap();
        assert_eq!(d0.delay_days, Some(0.0));
    }

    #[test]
    fn gravity_links_stagger_peaks_and_correlation_falls_with_distance() {
        let sc = small_scenario();
        let (coupling, _) = gravity_coupling(
            &sc,
            &GravityParams::new(1.0, 1.0, 2.0, 1.0),
            Some(DEFAULT_WEIGHT_CAP),
        )
        .unwrap();
        let traj = run_synthetic(&sc, &coupling, 0.3, 2000.0, 0.25).unwrap();

        let delays = peak_delay(&traj, &sc.geoms, "city_1").unwrap();
        let follower_delays: Vec<f64> = delays
            .iter()
            .skip(1)
            .filter_map(|d| d.delay_days)
            .collect();
        assert!(follower_delays.len() > 2);
        let all_equal = follower_delays
            .iter()
            .all(|d| (d - follower_delays[0]).abs() < 1e-9);
        assert!(!all_equal, "gravity peaks should spread out");

        let pts = correlation_vs_distance(&traj, &sc.geoms, "city_1").unwrap();
        let trend = distance_correlation_trend(&pts).unwrap();
        assert!(trend < 0.0, "correlation should fall with distance: {trend}");

        // delay grows (weakly) with distance
        let by_id = |id: &str| {
            delays
                .iter()
                .find(|d| d.patch_id == id)
                .and_then(|d| d.delay_days)
        };
        let (dist, del): (Vec<f64>, Vec<f64>) = pts
            .iter()
            .filter_map(|p| by_id(&p.patch_id).map(|d| (p.distance, d)))
            .unzip();
        let delay_trend = stats::spearman_correlation(&dist, &del).unwrap();
        assert!(delay_trend >= 0.0, "delay trend {delay_trend}");
    }

    #[test]
    fn identical_series_correlate_perfectly() {
        // hand-built trajectory with the follower tracing the driver exactly
        let sc = generate_scenario(1, 5).unwrap();
        let times: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let mut states = Vec::new();
        for k in 0..10 {
            let wave = (-((k as f64 - 5.0).powi(2))).exp() * 100.0;
            let s = PatchState {
                i_h: wave,
                s_h: 1e5 - wave,
                s_v: 3e5,
                ..PatchState::default()
            };
            states.push(s);
            states.push(s);
        }
        let traj = Trajectory::from_samples(2, 1.0, times, states).unwrap();
        let pts = correlation_vs_distance(&traj, &sc.geoms, "city_1").unwrap();
        assert_eq!(pts.len(), 1);
        let r = pts[0].correlation.unwrap();
        assert!((r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_deterministic_and_shares_scale() {
        let sc = generate_scenario(8, 11).unwrap();
        let base = GravityParams::new(0.5, 1.0, 0.5, 0.5);
        let a = parameter_sweep(
            &sc,
            SweepParam::Theta,
            &[0.5, 2.0],
            &base,
            DEFAULT_WEIGHT_CAP,
            800.0,
            0.5,
        )
        .unwrap();
        let b = parameter_sweep(
            &sc,
            SweepParam::Theta,
            &[0.5, 2.0],
            &base,
            DEFAULT_WEIGHT_CAP,
            800.0,
            0.5,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0].scale, a[1].scale);
        assert!(parameter_sweep(
            &sc,
            SweepParam::Alpha,
            &[],
            &base,
            DEFAULT_WEIGHT_CAP,
            800.0,
            0.5
        )
        .is_err());
    }
}
