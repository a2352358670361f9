//! Domain types: compartment state, transmission forcing, rates, geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compartments per patch: `[S_v, E_v, I_v, S_h, E_h, I_h, R_h]`.
pub const COMPARTMENTS: usize = 7;

/// The seven compartment values of one patch at one time.
///
/// Vector compartments are mosquito counts, host compartments are people.
/// Vectors do not recover; hosts pass through an exposed stage before
/// becoming infectious and then immune.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PatchState {
    pub s_v: f64,
    pub e_v: f64,
    pub i_v: f64,
    pub s_h: f64,
    pub e_h: f64,
    pub i_h: f64,
    pub r_h: f64,
}

impl PatchState {
    /// Disease-free state: all vectors and hosts susceptible.
    pub fn disease_free(n_h: f64, n_v: f64) -> Self {
        Self {
            s_v: n_v,
            s_h: n_h,
            ..Self::default()
        }
    }

    /// Disease-free state with `seed` infectious hosts moved out of S.
    pub fn seeded(n_h: f64, n_v: f64, seed: f64) -> Self {
        Self {
            s_v: n_v,
            s_h: n_h - seed,
            i_h: seed,
            ..Self::default()
        }
    }

    pub fn host_total(&self) -> f64 {
        self.s_h + self.e_h + self.i_h + self.r_h
    }

    pub fn vector_total(&self) -> f64 {
        self.s_v + self.e_v + self.i_v
    }

    pub fn as_array(&self) -> [f64; COMPARTMENTS] {
        [
            self.s_v, self.e_v, self.i_v, self.s_h, self.e_h, self.i_h, self.r_h,
        ]
    }

    pub fn from_slice(values: &[f64]) -> Self {
        Self {
            s_v: values[0],
            e_v: values[1],
            i_v: values[2],
            s_h: values[3],
            e_h: values[4],
            i_h: values[5],
            r_h: values[6],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("s_v", self.s_v),
            ("e_v", self.e_v),
            ("i_v", self.i_v),
            ("s_h", self.s_h),
            ("e_h", self.e_h),
            ("i_h", self.i_h),
            ("r_h", self.r_h),
        ] {
            if v < 0.0 {
                return Err(Error::NegativeValue {
                    context: format!("compartment {name}"),
                    value: v,
                });
            }
        }
        Ok(())
    }
}

/// Seasonally forced host-to-vector transmission rate,
/// `beta_v(t) = beta0 + eps * sin(2*pi*(t + phi) / 365)`.
///
/// `phi` is a day offset on the 365-day circle. The rate is clamped at zero:
/// fitted draws may have `eps > beta0`, and transmission stops entirely in
/// the cold part of such a year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeasonalBeta {
    /// Base transmission rate [1/day].
    pub beta0: f64,
    /// Seasonal amplitude [1/day].
    pub eps: f64,
    /// Phase offset [days], treated modulo 365.
    pub phi: f64,
}

/// Days per year used by the seasonal forcing and the climate regression.
pub const DAYS_PER_YEAR: f64 = 365.0;

impl SeasonalBeta {
    pub fn new(beta0: f64, eps: f64, phi: f64) -> Self {
        Self { beta0, eps, phi }
    }

    /// Constant rate: zero amplitude, zero offset.
    pub fn constant(beta0: f64) -> Self {
        Self {
            beta0,
            eps: 0.0,
            phi: 0.0,
        }
    }

    /// Rate at time `t` days. With `seasonal = false` the forcing is ignored
    /// and the base rate is returned unchanged.
    #[inline]
    pub fn at(&self, t: f64, seasonal: bool) -> f64 {
        if !seasonal {
            return self.beta0;
        }
        let s = (2.0 * std::f64::consts::PI * (t + self.phi) / DAYS_PER_YEAR).sin();
        (self.beta0 + self.eps * s).max(0.0)
    }
}

/// Per-patch epidemiological rates. All rates are per day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    /// Host-to-vector transmission rate (possibly seasonal).
    pub beta_v: SeasonalBeta,
    /// Vector-to-host transmission rate.
    pub beta_h: f64,
    /// Host progression rate E -> I.
    pub lambda: f64,
    /// Host recovery rate I -> R.
    pub delta: f64,
    /// Vector progression rate E -> I.
    pub kappa: f64,
    /// Vector per-capita birth/death rate.
    pub mu_v: f64,
    /// Host per-capita birth/death rate.
    pub mu_h: f64,
    /// Vectors per host, N_v = vector_ratio * N_h.
    pub vector_ratio: f64,
}

impl Default for DiseaseParams {
    /// Baseline rates: 5.5-day host incubation, 4-day infectious period,
    /// 5.5-day vector incubation, 10.5-day vector lifespan, 3 vectors per
    /// host, 70-year host lifespan, both transmission rates 0.3/day.
    fn default() -> Self {
        Self {
            beta_v: SeasonalBeta::constant(0.3),
            beta_h: 0.3,
            lambda: 1.0 / 5.5,
            delta: 1.0 / 4.0,
            kappa: 1.0 / 5.5,
            mu_v: 1.0 / 10.5,
            mu_h: 1.0 / (70.0 * 365.0),
            vector_ratio: 3.0,
        }
    }
}

impl DiseaseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("beta_v.beta0", self.beta_v.beta0),
            ("beta_v.eps", self.beta_v.eps),
            ("beta_h", self.beta_h),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("kappa", self.kappa),
            ("mu_v", self.mu_v),
            ("mu_h", self.mu_h),
        ] {
            if v < 0.0 {
                return Err(Error::NegativeValue {
                    context: format!("rate {name}"),
                    value: v,
                });
            }
        }
        if self.vector_ratio <= 0.0 {
            return Err(Error::NegativeValue {
                context: "vector_ratio".into(),
                value: self.vector_ratio,
            });
        }
        Ok(())
    }
}

/// A patch's identity, host population, and location.
///
/// Coordinates are abstract grid units in synthetic mode and degrees
/// latitude (`y`) / longitude (`x`) in geographic mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchGeometry {
    pub id: String,
    pub population: f64,
    pub x: f64,
    pub y: f64,
}

impl PatchGeometry {
    pub fn new(id: impl Into<String>, population: f64, x: f64, y: f64) -> Self {
        Self {
            id: id.into(),
            population,
            x,
            y,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population <= 0.0 {
            return Err(Error::NegativeValue {
                context: format!("population of patch '{}'", self.id),
                value: self.population,
            });
        }
        Ok(())
    }
}

/// Position of `id` within a geometry list.
pub fn patch_index(geoms: &[PatchGeometry], id: &str) -> Result<usize> {
    geoms
        .iter()
        .position(|g| g.id == id)
        .ok_or_else(|| Error::UnknownPatch(id.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn seasonal_beta_with_zero_amplitude_equals_constant() {
        let b = SeasonalBeta::new(0.3, 0.0, 120.0);
        for t in [0.0, 10.0, 182.5, 364.0] {
            assert_eq!(b.at(t, true).to_bits(), 0.3f64.to_bits());
        }
    }

    #[test]
    fn seasonal_beta_respects_day_offset() {
        // peak at t + phi = 365/4
        let b = SeasonalBeta::new(0.3, 0.1, 0.0);
        assert_relative_eq!(b.at(365.0 / 4.0, true), 0.4, epsilon = 1e-12);
        let shifted = SeasonalBeta::new(0.3, 0.1, 365.0 / 4.0);
        assert_relative_eq!(shifted.at(0.0, true), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn seasonal_beta_clamps_at_zero() {
        let b = SeasonalBeta::new(0.1, 0.5, 0.0);
        let trough = b.at(3.0 * 365.0 / 4.0, true);
        assert_eq!(trough, 0.0);
    }

    #[test]
    fn non_seasonal_ignores_forcing() {
        let b = SeasonalBeta::new(0.3, 0.2, 100.0);
        assert_eq!(b.at(17.0, false), 0.3);
    }

    #[test]
    fn state_totals() {
        let s = PatchState {
            s_v: 1.0,
            e_v: 2.0,
            i_v: 3.0,
            s_h: 4.0,
            e_h: 5.0,
            i_h: 6.0,
            r_h: 7.0,
        };
        assert_eq!(s.vector_total(), 6.0);
        assert_eq!(s.host_total(), 22.0);
        assert_eq!(PatchState::from_slice(&s.as_array()), s);
    }

    #[test]
    fn negative_state_rejected() {
        let s = PatchState {
            i_h: -1.0,
            ..PatchState::default()
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn default_rates_match_baseline() {
        let p = DiseaseParams::default();
        assert_relative_eq!(p.lambda, 1.0 / 5.5);
        assert_relative_eq!(p.delta, 0.25);
        assert_relative_eq!(p.kappa, 1.0 / 5.5);
        assert_relative_eq!(p.mu_v, 1.0 / 10.5);
        assert_relative_eq!(p.vector_ratio, 3.0);
        assert!(p.validate().is_ok());
    }
}
