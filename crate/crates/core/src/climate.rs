//! Sinusoidal minimum-temperature regression: fits
//! `T(t) = T0 + eps * sin(2*pi*t/365)` to a daily series and reports the
//! amplitude-to-mean variation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DAYS_PER_YEAR;

/// Fire a coverage warning below this many samples per fitted year.
pub const SPARSE_COVERAGE_THRESHOLD: usize = 200;

/// A station or patch's daily minimum temperatures, in Fahrenheit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemperatureSeries {
    pub label: String,
    /// Day index from the start of the series' first year; strictly
    /// increasing. Missing days are simply absent.
    pub days: Vec<f64>,
    pub tmin_f: Vec<f64>,
}

impl TemperatureSeries {
    pub fn new(label: impl Into<String>, days: Vec<f64>, tmin_f: Vec<f64>) -> Result<Self> {
        if days.len() != tmin_f.len() {
            return Err(Error::DimensionMismatch {
                context: "temperature days vs values",
                expected: days.len(),
                actual: tmin_f.len(),
            });
        }
        for w in days.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(format!(
                    "day indices must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        for (&d, &v) in days.iter().zip(&tmin_f) {
            if !d.is_finite() || !v.is_finite() {
                return Err(Error::Config(format!(
                    "non-finite temperature sample ({d}, {v})"
                )));
            }
        }
        Ok(Self {
            label: label.into(),
            days,
            tmin_f,
        })
    }

    pub fn len(&self) -> usize {
        self.days.len()
    }

    pub fn is_empty(&self) -> bool {
        self.days.is_empty()
    }
}

/// Least-squares estimates for the fixed-phase sinusoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidFit {
    /// Mean level [F].
    pub t0: f64,
    /// Coefficient on the sine basis [F]; sign preserved, `amplitude()` is
    /// its magnitude.
    pub eps: f64,
    /// `100 * |eps| / t0` [%]; NaN when `t0 <= 0`.
    pub pct_variation: f64,
    pub residual_sse: f64,
    pub n_samples: usize,
}

impl SinusoidFit {
    pub fn amplitude(&self) -> f64 {
        self.eps.abs()
    }

    /// Fewer samples than the coverage threshold per year.
    pub fn is_sparse(&self) -> bool {
        self.n_samples < SPARSE_COVERAGE_THRESHOLD
    }
}

/// Linear regression of the series on the basis `{1, sin(2*pi*t/365)}`.
pub fn fit_sinusoid(series: &TemperatureSeries) -> Result<SinusoidFit> {
    let n = series.len();
    if n < 3 {
        return Err(Error::IllConditioned(format!(
            "{} samples in '{}', need at least 3",
            n, series.label
        )));
    }
    let s: Vec<f64> = series
        .days
        .iter()
        .map(|&t| (2.0 * std::f64::consts::PI * t / DAYS_PER_YEAR).sin())
        .collect();
    let nf = n as f64;
    let sum_s: f64 = s.iter().sum();
    let sum_ss: f64 = s.iter().map(|v| v * v).sum();
    let sum_y: f64 = series.tmin_f.iter().sum();
    let sum_sy: f64 = s.iter().zip(&series.tmin_f).map(|(a, b)| a * b).sum();

    let det = nf * sum_ss - sum_s * sum_s;
    // collinear basis on the sampled days (e.g. all samples at sin ~ 0)
    if det.abs() <= 1e-9 * nf * nf {
        return Err(Error::IllConditioned(format!(
            "sine basis is degenerate on the sampled days of '{}'",
            series.label
        )));
    }
    let t0 = (sum_ss * sum_y - sum_s * sum_sy) / det;
    let eps = (nf * sum_sy - sum_s * sum_y) / det;

    let residual_sse = s
        .iter()
        .zip(&series.tmin_f)
        .map(|(&si, &yi)| {
            let r = yi - t0 - eps * si;
            r * r
        })
        .sum();
    let pct = if t0 > 0.0 {
        100.0 * eps.abs() / t0
    } else {
        f64::NAN
    };
    Ok(SinusoidFit {
        t0,
        eps,
        pct_variation: pct,
        residual_sse,
        n_samples: n,
    })
}

/// Amplitude-to-mean variation `100 * eps / T0` in percent.
pub fn pct_variation(t0: f64, eps: f64) -> Result<f64> {
    if t0 <= 0.0 {
        return Err(Error::Config(format!(
            "percent variation needs a positive mean level, got {t0}"
        )));
    }
    Ok(100.0 * eps.abs() / t0)
}

/// The fitted curve evaluated on the series' days (for overlay plots).
pub fn fitted_curve(series: &TemperatureSeries, fit: &SinusoidFit) -> Vec<(f64, f64)> {
    series
        .days
        .iter()
        .map(|&t| {
            let s = (2.0 * std::f64::consts::PI * t / DAYS_PER_YEAR).sin();
            (t, fit.t0 + fit.eps * s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn year_series(label: &str, t0: f64, eps: f64) -> TemperatureSeries {
        let days: Vec<f64> = (0..365).map(|d| d as f64).collect();
        let tmin: Vec<f64> = days
            .iter()
            .map(|&t| t0 + eps * (2.0 * std::f64::consts::PI * t / 365.0).sin())
            .collect();
        TemperatureSeries::new(label, days, tmin).unwrap()
    }

    #[test]
    fn exact_recovery_on_noise_free_sinusoid() {
        let series = year_series("coast", 70.0, 5.0);
        let fit = fit_sinusoid(&series).unwrap();
        assert_relative_eq!(fit.t0, 70.0, epsilon = 1e-9);
        assert_relative_eq!(fit.eps, 5.0, epsilon = 1e-9);
        assert!(fit.residual_sse < 1e-9);
        assert!(!fit.is_sparse());
    }

    #[test]
    fn flat_series_has_zero_amplitude() {
        let series = year_series("jungle", 74.4, 0.0);
        let fit = fit_sinusoid(&series).unwrap();
        assert_relative_eq!(fit.t0, 74.4, epsilon = 1e-9);
        assert!(fit.amplitude() < 1e-9);
    }

    #[test]
    fn reference_parameter_recovery() {
        // the three published patch fits, regenerated and refit exactly
        for (label, t0, eps) in [
            ("coast_n", 63.5454, 3.5680),
            ("coast_c", 65.3771, 4.5169),
            ("jungle", 74.3880, 0.1353),
        ] {
            let fit = fit_sinusoid(&year_series(label, t0, eps)).unwrap();
            assert_relative_eq!(fit.t0, t0, max_relative = 1e-9);
            assert_relative_eq!(fit.eps, eps, max_relative = 1e-9);
        }
    }

    #[test]
    fn pct_variation_formula() {
        // printed table value is 0.18 for the jungle row
        let pct = pct_variation(74.3880, 0.1353).unwrap();
        assert_relative_eq!(pct, 100.0 * 0.1353 / 74.3880, epsilon = 1e-12);
        assert_relative_eq!(pct, 0.1819, epsilon = 5e-5);
        // the coast-north row computes to 5.61 by this formula
        let coast = pct_variation(63.5454, 3.5680).unwrap();
        assert_relative_eq!(coast, 5.6149, epsilon = 5e-5);
        assert_eq!(pct_variation(70.0, 0.0).unwrap(), 0.0);
        assert!(pct_variation(0.0, 1.0).is_err());
        assert!(pct_variation(-5.0, 1.0).is_err());
    }

    #[test]
    fn shift_covariance() {
        let a = fit_sinusoid(&year_series("x", 60.0, 4.0)).unwrap();
        let mut shifted = year_series("x", 60.0, 4.0);
        for v in &mut shifted.tmin_f {
            *v += 7.5;
        }
        let b = fit_sinusoid(&shifted).unwrap();
        assert_relative_eq!(b.t0, a.t0 + 7.5, epsilon = 1e-9);
        assert_relative_eq!(b.eps, a.eps, epsilon = 1e-9);
    }

    #[test]
    fn unbiased_under_symmetric_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut t0_sum = 0.0;
        for _ in 0..100 {
            let mut series = year_series("noisy", 65.0, 4.0);
            for v in &mut series.tmin_f {
                *v += noise.sample(&mut rng);
            }
            t0_sum += fit_sinusoid(&series).unwrap().t0;
        }
        let mean_t0 = t0_sum / 100.0;
        assert!((mean_t0 - 65.0).abs() < 0.1, "mean T0 {mean_t0}");
    }

    #[test]
    fn degenerate_days_are_ill_conditioned() {
        // all samples sit where the sine basis vanishes
        let series =
            TemperatureSeries::new("degenerate", vec![0.0, 365.0, 730.0], vec![60.0, 61.0, 62.0])
                .unwrap();
        assert!(matches!(
            fit_sinusoid(&series),
            Err(Error::IllConditioned(_))
        ));
        let tiny = TemperatureSeries::new("tiny", vec![0.0, 1.0], vec![60.0, 61.0]).unwrap();
        assert!(fit_sinusoid(&tiny).is_err());
    }

    #[test]
    fn series_construction_validates() {
        assert!(TemperatureSeries::new("bad", vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TemperatureSeries::new("bad", vec![0.0], vec![1.0, 2.0]).is_err());
        assert!(TemperatureSeries::new("bad", vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn sparse_series_flagged() {
        let days: Vec<f64> = (0..120).map(|d| (d * 3) as f64).collect();
        let tmin: Vec<f64> = days
            .iter()
            .map(|&t| 65.0 + 4.0 * (2.0 * std::f64::consts::PI * t / 365.0).sin())
            .collect();
        let series = TemperatureSeries::new("sparse", days, tmin).unwrap();
        let fit = fit_sinusoid(&series).unwrap();
        assert!(fit.is_sparse());
        assert_relative_eq!(fit.t0, 65.0, max_relative = 1e-6);
    }
}
