//! Coupled multipatch dynamics and fixed-step RK4 integration.

use crate::error::{Error, Result};
use crate::gravity::CouplingMatrix;

use super::params::{DiseaseParams, PatchState, COMPARTMENTS};

/// Compartments may undershoot zero by at most this much per step; anything
/// lower is treated as integration failure rather than rounding noise.
const NEGATIVE_TOLERANCE: f64 = -1e-12;

/// The n-patch vector-host model: per-patch rates plus the inter-patch visit
/// matrix.
///
/// For patch `i` with visit weights `P` (row `i` = destinations of residents
/// of `i`), current totals `N_v = S_v+E_v+I_v` and `N_h = S_h+E_h+I_h+R_h`:
///
/// ```text
/// S_v' = mu_v*N_v - beta_v(t) * (sum_j P_ij * I_hj/N_hj) * S_v - mu_v*S_v
/// E_v' = beta_v(t) * (sum_j P_ij * I_hj/N_hj) * S_v - (mu_v + kappa)*E_v
/// I_v' = kappa*E_v - mu_v*I_v
/// S_h' = mu_h*N_h - beta_h * P_ii * I_v/N_v * S_h - mu_h*S_h
/// E_h' = beta_h * P_ii * I_v/N_v * S_h - (lambda + mu_h)*E_h
/// I_h' = lambda*E_h - (delta + mu_h)*I_h
/// R_h' = delta*I_h - mu_h*R_h
/// ```
///
/// Hosts infect vectors across patches through travel; vectors infect only
/// the hosts mixing locally (the `P_ii` term). Births balance deaths against
/// the *current* totals, so each patch's host and vector populations are
/// conserved identically by the right-hand side.
#[derive(Debug, Clone)]
pub struct MetapopModel {
    params: Vec<DiseaseParams>,
    coupling: CouplingMatrix,
    seasonal: bool,
}

impl MetapopModel {
    pub fn new(
        params: Vec<DiseaseParams>,
        coupling: CouplingMatrix,
        seasonal: bool,
    ) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::EmptyInput("model needs at least one patch"));
        }
        if coupling.len() != params.len() {
            return Err(Error::DimensionMismatch {
                context: "coupling matrix vs patch params",
                expected: params.len(),
                actual: coupling.len(),
            });
        }
        for p in &params {
            p.validate()?;
        }
        Ok(Self {
            params,
            coupling,
            seasonal,
        })
    }

    pub fn patch_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[DiseaseParams] {
        &self.params
    }

    pub fn coupling(&self) -> &CouplingMatrix {
        &self.coupling
    }

    pub fn seasonal(&self) -> bool {
        self.seasonal
    }

    /// Evaluate the right-hand side at time `t` for the given per-patch states.
    ///
    /// Validates dimensions and nonnegativity; the integrator uses the
    /// unchecked path internally so RK4 stage values may dip below zero by
    /// rounding without tripping the guard.
    pub fn rhs(&self, t: f64, states: &[PatchState]) -> Result<Vec<PatchState>> {
        if states.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                context: "states vs patch params",
                expected: self.params.len(),
                actual: states.len(),
            });
        }
        for s in states {
            s.validate()?;
        }
        let n = states.len();
        let mut flat = vec![0.0; n * COMPARTMENTS];
        for (i, s) in states.iter().enumerate() {
            flat[i * COMPARTMENTS..(i + 1) * COMPARTMENTS].copy_from_slice(&s.as_array());
        }
        let mut deriv = vec![0.0; n * COMPARTMENTS];
        let mut host_prevalence = vec![0.0; n];
        self.rhs_flat(t, &flat, &mut deriv, &mut host_prevalence);
        Ok((0..n)
            .map(|i| PatchState::from_slice(&deriv[i * COMPARTMENTS..(i + 1) * COMPARTMENTS]))
            .collect())
    }

    /// Hot path: flat state layout `[patch0: S_v..R_h, patch1: ...]`.
    fn rhs_flat(&self, t: f64, state: &[f64], deriv: &mut [f64], host_prevalence: &mut [f64]) {
        let n = self.params.len();
        for j in 0..n {
            let b = j * COMPARTMENTS;
            let n_h = state[b + 3] + state[b + 4] + state[b + 5] + state[b + 6];
            host_prevalence[j] = state[b + 5] / n_h;
        }
        for i in 0..n {
            let p = &self.params[i];
            let b = i * COMPARTMENTS;
            let (s_v, e_v, i_v) = (state[b], state[b + 1], state[b + 2]);
            let (s_h, e_h, i_h, r_h) = (state[b + 3], state[b + 4], state[b + 5], state[b + 6]);
            let n_v = s_v + e_v + i_v;
            let n_h = s_h + e_h + i_h + r_h;

            let row = self.coupling.row(i);
            let mut travel_sum = 0.0;
            for (w, q) in row.iter().zip(host_prevalence.iter()) {
                travel_sum += w * q;
            }
            let vector_force = p.beta_v.at(t, self.seasonal) * travel_sum * s_v;
            let host_force = p.beta_h * self.coupling.get(i, i) * (i_v / n_v) * s_h;

            deriv[b] = p.mu_v * n_v - vector_force - p.mu_v * s_v;
            deriv[b + 1] = vector_force - (p.mu_v + p.kappa) * e_v;
            deriv[b + 2] = p.kappa * e_v - p.mu_v * i_v;
            deriv[b + 3] = p.mu_h * n_h - host_force - p.mu_h * s_h;
            deriv[b + 4] = host_force - (p.lambda + p.mu_h) * e_h;
            deriv[b + 5] = p.lambda * e_h - (p.delta + p.mu_h) * i_h;
            deriv[b + 6] = p.delta * i_h - p.mu_h * r_h;
        }
    }

    /// Integrate from `initial` over `[t0, t1]` with fixed step `dt`,
    /// sampling every `stride` days (both endpoints included).
    ///
    /// `stride` and the span must be whole multiples of `dt`. Sampled values
    /// have tiny negative rounding (down to -1e-12) clamped to zero; larger
    /// negatives or non-finite values abort with the failure time.
    pub fn integrate(
        &self,
        initial: &[PatchState],
        t_span: (f64, f64),
        dt: f64,
        stride: f64,
    ) -> Result<Trajectory> {
        let (t0, t1) = t_span;
        if dt <= 0.0 {
            return Err(Error::Config(format!("dt must be positive, got {dt}")));
        }
        if t1 <= t0 {
            return Err(Error::Config(format!(
                "time span must be increasing, got [{t0}, {t1}]"
            )));
        }
        if initial.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                context: "initial states vs patch params",
                expected: self.params.len(),
                actual: initial.len(),
            });
        }
        for s in initial {
            s.validate()?;
        }
        let steps = ((t1 - t0) / dt).round();
        if steps < 1.0 || ((t1 - t0) - steps * dt).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "span {} is not a whole multiple of dt {dt}",
                t1 - t0
            )));
        }
        let steps = steps as usize;
        let sample_every = (stride / dt).round();
        if sample_every < 1.0 || (stride - sample_every * dt).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "stride {stride} is not a whole multiple of dt {dt}"
            )));
        }
        let sample_every = sample_every as usize;

        let n = self.params.len();
        let len = n * COMPARTMENTS;
        let mut state = vec![0.0; len];
        for (i, s) in initial.iter().enumerate() {
            state[i * COMPARTMENTS..(i + 1) * COMPARTMENTS].copy_from_slice(&s.as_array());
        }

        let mut k1 = vec![0.0; len];
        let mut k2 = vec![0.0; len];
        let mut k3 = vec![0.0; len];
        let mut k4 = vec![0.0; len];
        let mut stage = vec![0.0; len];
        let mut prevalence = vec![0.0; n];

        let mut times = Vec::with_capacity(steps / sample_every + 2);
        let mut samples: Vec<PatchState> = Vec::with_capacity((steps / sample_every + 2) * n);
        push_sample(&mut times, &mut samples, t0, &state, n);

        for step in 0..steps {
            let t = t0 + step as f64 * dt;
            self.rhs_flat(t, &state, &mut k1, &mut prevalence);
            for i in 0..len {
                stage[i] = state[i] + 0.5 * dt * k1[i];
            }
            self.rhs_flat(t + 0.5 * dt, &stage, &mut k2, &mut prevalence);
            for i in 0..len {
                stage[i] = state[i] + 0.5 * dt * k2[i];
            }
            self.rhs_flat(t + 0.5 * dt, &stage, &mut k3, &mut prevalence);
            for i in 0..len {
                stage[i] = state[i] + dt * k3[i];
            }
            self.rhs_flat(t + dt, &stage, &mut k4, &mut prevalence);
            for i in 0..len {
                state[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }

            let t_next = t0 + (step + 1) as f64 * dt;
            for (i, &v) in state.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NumericalBlowup {
                        time: t_next,
                        detail: format!("non-finite compartment in patch {}", i / COMPARTMENTS),
                    });
                }
                if v < NEGATIVE_TOLERANCE {
                    return Err(Error::NumericalBlowup {
                        time: t_next,
                        detail: format!(
                            "compartment in patch {} went negative ({v:e})",
                            i / COMPARTMENTS
                        ),
                    });
                }
            }
            if (step + 1) % sample_every == 0 {
                push_sample(&mut times, &mut samples, t_next, &state, n);
            }
        }

        Ok(Trajectory {
            patch_count: n,
            stride_days: stride,
            times,
            states: samples,
        })
    }
}

fn push_sample(
    times: &mut Vec<f64>,
    samples: &mut Vec<PatchState>,
    t: f64,
    state: &[f64],
    n: usize,
) {
    times.push(t);
    for i in 0..n {
        let mut s = PatchState::from_slice(&state[i * COMPARTMENTS..(i + 1) * COMPARTMENTS]);
        // tiny negative rounding is clamped on output only
        for v in [
            &mut s.s_v, &mut s.e_v, &mut s.i_v, &mut s.s_h, &mut s.e_h, &mut s.i_h, &mut s.r_h,
        ] {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        samples.push(s);
    }
}

/// Sampled multipatch trajectory: all compartments at a regular stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    patch_count: usize,
    stride_days: f64,
    times: Vec<f64>,
    /// Time-major: sample `k` holds `patch_count` consecutive states.
    states: Vec<PatchState>,
}

impl Trajectory {
    pub fn patch_count(&self) -> usize {
        self.patch_count
    }

    pub fn stride_days(&self) -> f64 {
        self.stride_days
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// State of `patch` at sample index `k`.
    pub fn state(&self, k: usize, patch: usize) -> &PatchState {
        &self.states[k * self.patch_count + patch]
    }

    /// All patch states at sample index `k`.
    pub fn states_at(&self, k: usize) -> &[PatchState] {
        &self.states[k * self.patch_count..(k + 1) * self.patch_count]
    }

    /// One compartment of one patch over time.
    pub fn series<F: Fn(&PatchState) -> f64>(&self, patch: usize, extract: F) -> Vec<f64> {
        (0..self.len())
            .map(|k| extract(self.state(k, patch)))
            .collect()
    }

    /// Infectious-host counts of one patch over time.
    pub fn prevalence(&self, patch: usize) -> Vec<f64> {
        self.series(patch, |s| s.i_h)
    }

    /// Build a trajectory directly from samples (for analyses over
    /// externally produced series). `states` is time-major.
    pub fn from_samples(
        patch_count: usize,
        stride_days: f64,
        times: Vec<f64>,
        states: Vec<PatchState>,
    ) -> Result<Self> {
        if times.len() * patch_count != states.len() {
            return Err(Error::DimensionMismatch {
                context: "trajectory samples",
                expected: times.len() * patch_count,
                actual: states.len(),
            });
        }
        Ok(Self {
            patch_count,
            stride_days,
            times,
            states,
        })
    }
}
