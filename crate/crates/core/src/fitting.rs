//! Goodness-of-fit statistics and the seeded random-search calibration
//! harness for transmission and gravity parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::gravity::{gravity_matrix, CouplingMatrix, DistanceMode, GravityParams};
use crate::model::{
    weekly_incidence_with_ids, DiseaseParams, EpidemicSeries, MetapopModel, PatchGeometry,
    PatchState, DAYS_PER_WEEK,
};

/// Divisor floor guarding the chi-squared statistic against disease-free
/// model weeks.
pub const CHI2_FLOOR: f64 = 1e-6;

/// Sum of squared point-by-point distances between model and data.
pub fn least_squares(model: &[f64], data: &[f64]) -> Result<f64> {
    check_aligned(model, data)?;
    Ok(model
        .iter()
        .zip(data)
        .map(|(m, d)| (m - d) * (m - d))
        .sum())
}

/// Pearson chi-squared statistic `sum (M - D)^2 / max(M, floor)`, weighting
/// each distance by the model's predicted level.
pub fn pearson_chi2(model: &[f64], data: &[f64]) -> Result<f64> {
    check_aligned(model, data)?;
    Ok(model
        .iter()
        .zip(data)
        .map(|(m, d)| (m - d) * (m - d) / m.max(CHI2_FLOOR))
        .sum())
}

fn check_aligned(model: &[f64], data: &[f64]) -> Result<()> {
    if model.len() != data.len() {
        return Err(Error::DimensionMismatch {
            context: "model vs data series",
            expected: data.len(),
            actual: model.len(),
        });
    }
    if model.is_empty() {
        return Err(Error::EmptyInput("objective needs at least one point"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    LeastSquares,
    PearsonChi2,
}

impl Objective {
    pub fn score(&self, model: &[f64], data: &[f64]) -> Result<f64> {
        match self {
            Objective::LeastSquares => least_squares(model, data),
            Objective::PearsonChi2 => pearson_chi2(model, data),
        }
    }
}

/// How a free parameter is drawn each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum Sampler {
    /// Uniform on `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Uniform day offset on the 365-day circle, `[0, 365)`.
    Circular,
    /// A uniform (0, 1] mantissa times a decade drawn from
    /// `{1e-10, 1e-9, ..., 1}`: spreads draws over the parameter space with
    /// a focus on small values.
    LogDecade,
    /// Degenerate sampler pinned at one value.
    Fixed { value: f64 },
}

impl Sampler {
    pub fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Uniform { lo, hi } => lo + rng.random::<f64>() * (hi - lo),
            Sampler::Circular => rng.random::<f64>() * 365.0,
            Sampler::LogDecade => {
                // 1 - u maps [0,1) onto (0,1]
                let mantissa = 1.0 - rng.random::<f64>();
                let exponent = rng.random_range(0..=10u32);
                mantissa * 10f64.powi(-(exponent as i32))
            }
            Sampler::Fixed { value } => *value,
        }
    }
}

/// A named parameter with its sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParam {
    pub name: String,
    #[serde(flatten)]
    pub sampler: Sampler,
}

impl FreeParam {
    pub fn new(name: impl Into<String>, sampler: Sampler) -> Self {
        Self {
            name: name.into(),
            sampler,
        }
    }
}

/// How the iteration's coupling matrix is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CouplingSpec {
    /// No transport between patches.
    Identity,
    /// Equal off-diagonal weights.
    Uniform { weight: f64, diagonal: f64 },
    /// Gravity weights from the patch geometries; `alpha`/`beta`/`gamma`/
    /// `theta` overrides apply here. `cap`, when set, rescales off-diagonals
    /// so the largest equals it.
    Gravity {
        params: GravityParams,
        distance: DistanceMode,
        diagonal: f64,
        cap: Option<f64>,
    },
    /// A matrix supplied as-is.
    Fixed(CouplingMatrix),
}

/// Everything needed to simulate one candidate parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub geoms: Vec<PatchGeometry>,
    /// Per-patch baseline rates; sampled transmission values override the
    /// corresponding fields in every patch.
    pub base: Vec<DiseaseParams>,
    pub seasonal: bool,
    pub coupling: CouplingSpec,
    /// Integration step [days].
    pub dt: f64,
    /// Explicit initially infectious hosts per patch. When absent, each
    /// patch starts from its first observed weekly count.
    pub seed_infected: Option<Vec<f64>>,
}

/// Recognized override names: transmission (`beta0`, `eps`, `phi`, `beta_h`,
/// shared across patches) and gravity (`alpha`, `beta`, `gamma`, `theta`).
pub const PARAM_NAMES: [&str; 8] = [
    "beta0", "eps", "phi", "beta_h", "alpha", "beta", "gamma", "theta",
];

impl ModelConfig {
    /// Apply named overrides and build the per-patch rates and the coupling
    /// matrix for one candidate.
    pub fn resolve(
        &self,
        overrides: &[(String, f64)],
    ) -> Result<(Vec<DiseaseParams>, CouplingMatrix)> {
        let mut params = self.base.clone();
        let mut gravity = match &self.coupling {
            CouplingSpec::Gravity { params, .. } => *params,
            _ => GravityParams::new(1.0, 1.0, 1.0, 1.0),
        };
        for (name, value) in overrides {
            match name.as_str() {
                "beta0" => params.iter_mut().for_each(|p| p.beta_v.beta0 = *value),
                "eps" => params.iter_mut().for_each(|p| p.beta_v.eps = *value),
                "phi" => params
                    .iter_mut()
                    .for_each(|p| p.beta_v.phi = value.rem_euclid(365.0)),
                "beta_h" => params.iter_mut().for_each(|p| p.beta_h = *value),
                "alpha" => gravity.alpha = *value,
                "beta" => gravity.beta = *value,
                "gamma" => gravity.gamma = *value,
                "theta" => gravity.theta = *value,
                other => {
                    return Err(Error::Config(format!(
                        "unknown parameter '{other}' (expected one of {PARAM_NAMES:?})"
                    )))
                }
            }
        }
        let coupling = match &self.coupling {
            CouplingSpec::Identity => CouplingMatrix::identity(self.geoms.len()),
            CouplingSpec::Uniform { weight, diagonal } => {
                CouplingMatrix::uniform(self.geoms.len(), *weight, *diagonal)?
            }
            CouplingSpec::Gravity {
                distance,
                diagonal,
                cap,
                ..
            } => {
                let raw = gravity_matrix(&self.geoms, &gravity, *distance, *diagonal)?;
                match cap {
                    Some(c) if raw.max_offdiagonal() > *c => {
                        raw.scaled_to_max_offdiagonal(*c)?.0
                    }
                    _ => raw,
                }
            }
            CouplingSpec::Fixed(m) => {
                if m.len() != self.geoms.len() {
                    return Err(Error::DimensionMismatch {
                        context: "fixed coupling vs geometries",
                        expected: self.geoms.len(),
                        actual: m.len(),
                    });
                }
                m.clone()
            }
        };
        Ok((params, coupling))
    }

    /// Initial compartments: the infectious pool starts at the explicit
    /// per-patch seeds when given, otherwise at each patch's first observed
    /// weekly count; the rest of the patch is susceptible and vectors are
    /// fully susceptible. Should every derived seed be zero, one infectious
    /// host is placed in the most populous patch so an epidemic can start
    /// at all.
    pub fn initial_conditions(&self, observed: &EpidemicSeries) -> Result<Vec<PatchState>> {
        let mut seeds: Vec<f64> = match &self.seed_infected {
            Some(s) => {
                if s.len() != self.geoms.len() {
                    return Err(Error::DimensionMismatch {
                        context: "seed_infected vs geometries",
                        expected: self.geoms.len(),
                        actual: s.len(),
                    });
                }
                s.clone()
            }
            None => (0..self.geoms.len())
                .map(|i| observed.values[i][0])
                .collect(),
        };
        if self.seed_infected.is_none() && seeds.iter().all(|&s| s == 0.0) {
            let biggest = (0..self.geoms.len())
                .max_by(|&a, &b| {
                    self.geoms[a]
                        .population
                        .partial_cmp(&self.geoms[b].population)
                        .expect("finite population")
                })
                .expect("nonempty geoms");
            seeds[biggest] = 1.0;
        }
        self.geoms
            .iter()
            .zip(&self.base)
            .zip(&seeds)
            .map(|((g, p), &seed)| {
                if seed >= g.population {
                    return Err(Error::Config(format!(
                        "initial count {seed} exceeds population of patch '{}'",
                        g.id
                    )));
                }
                Ok(PatchState::seeded(
                    g.population,
                    p.vector_ratio * g.population,
                    seed,
                ))
            })
            .collect()
    }

    /// Simulate one candidate over the observation window and return its
    /// weekly incidence per patch.
    pub fn simulate_weekly(
        &self,
        overrides: &[(String, f64)],
        observed: &EpidemicSeries,
    ) -> Result<EpidemicSeries> {
        let (params, coupling) = self.resolve(overrides)?;
        let initial = self.initial_conditions(observed)?;
        let model = MetapopModel::new(params, coupling, self.seasonal)?;
        let horizon = observed.weeks() as f64 * DAYS_PER_WEEK;
        let traj = model.integrate(&initial, (0.0, horizon), self.dt, 1.0)?;
        let mut series =
            weekly_incidence_with_ids(&traj, model.params(), &observed.patch_ids)?;
        series.start_week = observed.start_week;
        Ok(series)
    }
}

/// A calibration problem: observations, model shape, free parameters,
/// iteration budget, objective, and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProblem {
    pub observed: EpidemicSeries,
    pub config: ModelConfig,
    pub free: Vec<FreeParam>,
    /// Named values pinned for every iteration (applied before the draws).
    pub fixed: Vec<(String, f64)>,
    pub iterations: usize,
    pub objective: Objective,
    /// Score the week-by-week country aggregate instead of summing per-patch
    /// scores.
    pub aggregate: bool,
    pub rng_seed: u64,
    /// How many ranked candidates to keep (the reporting style of the
    /// "top 5 coefficients" tables).
    pub top_k: usize,
}

impl FitProblem {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.free.is_empty() {
            return Err(Error::EmptyInput("fit needs at least one free parameter"));
        }
        if self.observed.weeks() == 0 {
            return Err(Error::EmptyInput("observed series is empty"));
        }
        let ids: Vec<&String> = self.config.geoms.iter().map(|g| &g.id).collect();
        let obs_ids: Vec<&String> = self.observed.patch_ids.iter().collect();
        if ids != obs_ids {
            return Err(Error::Config(format!(
                "observed patches {obs_ids:?} do not match model patches {ids:?}"
            )));
        }
        if self.config.base.len() != self.config.geoms.len() {
            return Err(Error::DimensionMismatch {
                context: "base params vs geometries",
                expected: self.config.geoms.len(),
                actual: self.config.base.len(),
            });
        }
        for row in &self.observed.values {
            for &v in row {
                if v < 0.0 {
                    return Err(Error::NegativeValue {
                        context: "observed count".into(),
                        value: v,
                    });
                }
            }
        }
        Ok(())
    }

    /// Fixed values plus one draw per free parameter, in declaration order.
    fn draw(&self, iteration: u64) -> Vec<(String, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        rng.set_stream(iteration);
        let mut out = self.fixed.clone();
        for fp in &self.free {
            out.push((fp.name.clone(), fp.sampler.draw(&mut rng)));
        }
        out
    }

    fn score(&self, model: &EpidemicSeries) -> Result<f64> {
        if self.aggregate {
            self.objective.score(&model.total(), &self.observed.total())
        } else {
            let mut total = 0.0;
            for (m, d) in model.values.iter().zip(&self.observed.values) {
                total += self.objective.score(m, d)?;
            }
            Ok(total)
        }
    }
}

/// One evaluated candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSample {
    pub iteration: u64,
    /// Every override applied this iteration: the pinned values first, then
    /// the draws, in declaration order.
    pub params: Vec<(String, f64)>,
    pub score: f64,
}

impl FitSample {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.params
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Shape diagnostics of the best fit against the country-aggregate curve.
/// The raw score alone hides peak-position and size errors, so both are
/// always reported next to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// Model peak week minus data peak week.
    pub peak_week_error: i64,
    /// Model peak height over data peak height.
    pub peak_magnitude_ratio: f64,
}

/// Ranked random-search outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Best candidates, ascending score.
    pub top: Vec<FitSample>,
    pub evaluations: usize,
    pub failures: usize,
    /// Weekly incidence of the best candidate.
    pub best_series: EpidemicSeries,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    pub fn best(&self) -> &FitSample {
        &self.top[0]
    }

    /// Smallest and largest value of one parameter across the kept
    /// candidates (the ranges-of-top-5 reporting).
    pub fn param_range(&self, name: &str) -> Option<(f64, f64)> {
        let values: Vec<f64> = self.top.iter().filter_map(|s| s.get(name)).collect();
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            None
        } else {
            Some((lo, hi))
        }
    }
}

/// Random-search calibration: draw, simulate, score, keep the best.
///
/// Iterations use independent RNG substreams derived from the master seed,
/// so the result is identical whatever the worker count or completion
/// order. Iterations that blow up numerically are skipped and counted.
pub fn fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let evaluated = exec::map_range(problem.iterations, |iter| {
        let iteration = iter as u64;
        let params = problem.draw(iteration);
        let outcome = problem
            .config
            .simulate_weekly(&params, &problem.observed)
            .and_then(|series| problem.score(&series))
            .and_then(|score| {
                if score.is_finite() {
                    Ok(score)
                } else {
                    Err(Error::NumericalBlowup {
                        time: f64::NAN,
                        detail: format!("non-finite score {score}"),
                    })
                }
            });
        (iteration, params, outcome)
    });

    let mut samples = Vec::with_capacity(problem.iterations);
    let mut failures = 0usize;
    let mut first_failure: Option<String> = None;
    for (iteration, params, outcome) in evaluated {
        match outcome {
            Ok(score) => samples.push(FitSample {
                iteration,
                params,
                score,
            }),
            Err(e) => {
                failures += 1;
                first_failure.get_or_insert_with(|| e.to_string());
            }
        }
    }
    if samples.is_empty() {
        return Err(Error::AllIterationsFailed {
            attempted: problem.iterations,
            first_failure: first_failure.unwrap_or_else(|| "no iterations ran".into()),
        });
    }
    // deterministic order: score, then iteration index
    samples.sort_by(|a, b| {
        a.score
            .partial_cmp(&b.score)
            .expect("finite scores")
            .then(a.iteration.cmp(&b.iteration))
    });
    let evaluations = samples.len();
    samples.truncate(problem.top_k.max(1));

    let best_series = problem
        .config
        .simulate_weekly(&samples[0].params, &problem.observed)?;
    let diagnostics = diagnostics(&best_series, &problem.observed);

    Ok(FitResult {
        top: samples,
        evaluations,
        failures,
        best_series,
        diagnostics,
    })
}

fn diagnostics(model: &EpidemicSeries, data: &EpidemicSeries) -> FitDiagnostics {
    let m = model.total();
    let d = data.total();
    let mp = crate::stats::argmax(&m).unwrap_or(0);
    let dp = crate::stats::argmax(&d).unwrap_or(0);
    FitDiagnostics {
        peak_week_error: mp as i64 - dp as i64,
        peak_magnitude_ratio: m[mp] / d[dp],
    }
}

/// The two-stage gravity schedule: stage 1 pins `alpha = gamma = 1` and fits
/// `beta` and `theta`; stage 2 pins `beta` and `theta` at stage 1's best and
/// fits `alpha` and `gamma`. Stage 2 draws from `rng_seed + 1`.
///
/// The template's free list must sample all four gravity parameters; any
/// transmission parameters it frees stay free in both stages.
pub fn two_stage_gravity_fit(template: &FitProblem) -> Result<(FitResult, FitResult)> {
    for required in ["alpha", "beta", "gamma", "theta"] {
        if !template.free.iter().any(|f| f.name == required) {
            return Err(Error::Config(format!(
                "two-stage fit requires a sampler for '{required}'"
            )));
        }
    }
    let mut stage1 = template.clone();
    stage1.free.retain(|f| f.name != "alpha" && f.name != "gamma");
    stage1.fixed.push(("alpha".into(), 1.0));
    stage1.fixed.push(("gamma".into(), 1.0));
    let first = fit(&stage1)?;

    let best_beta = first.best().get("beta").expect("beta was free in stage 1");
    let best_theta = first.best().get("theta").expect("theta was free in stage 1");

    let mut stage2 = template.clone();
    stage2.free.retain(|f| f.name != "beta" && f.name != "theta");
    stage2.fixed.push(("beta".into(), best_beta));
    stage2.fixed.push(("theta".into(), best_theta));
    stage2.rng_seed = template.rng_seed.wrapping_add(1);
    let second = fit(&stage2)?;

    Ok((first, second))
}

/// Shortest arc on the 365-day circle containing all given day offsets,
/// reported as `(start, end)`; `end < start` denotes a wrap through 365/0.
pub fn circular_range(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput("circular range of no values"));
    }
    for &v in values {
        if !(0.0..365.0).contains(&v) {
            return Err(Error::Config(format!(
                "day offset {v} outside [0, 365)"
            )));
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    if sorted.len() == 1 {
        return Ok((sorted[0], sorted[0]));
    }
    // the largest gap's complement is the tightest covering arc
    let mut best_gap = 365.0 - sorted[sorted.len() - 1] + sorted[0];
    let mut arc = (sorted[0], sorted[sorted.len() - 1]);
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap > best_gap {
            best_gap = gap;
            arc = (w[1], w[0]);
        }
    }
    Ok(arc)
}
