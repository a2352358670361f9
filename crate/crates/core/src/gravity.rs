//! Inter-patch coupling matrices: gravity-model weights, uniform weights,
//! identity (no transport), distance kernels, and matrix analyzers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::PatchGeometry;

pub const EARTH_RADIUS_KM: f64 = 6371.0;

/// Exponents and scale of the gravity interaction
/// `P_ij = theta * n_i^alpha * n_j^beta / d_ij^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityParams {
    /// Source-population exponent.
    pub alpha: f64,
    /// Destination-population exponent.
    pub beta: f64,
    /// Distance-decay exponent.
    pub gamma: f64,
    /// Global scaling factor.
    pub theta: f64,
}

impl GravityParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, theta: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            theta,
        }
    }
}

/// How pairwise distances are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    /// Straight-line distance in grid units (synthetic scenarios).
    Euclidean,
    /// Great-circle distance in km; `y` is latitude, `x` is longitude.
    Haversine,
}

/// Distance between two patches under the given mode.
pub fn distance(a: &PatchGeometry, b: &PatchGeometry, mode: DistanceMode) -> Result<f64> {
    match mode {
        DistanceMode::Euclidean => {
            let dx = a.x - b.x;
            let dy = a.y - b.y;
            Ok((dx * dx + dy * dy).sqrt())
        }
        DistanceMode::Haversine => {
            for g in [a, b] {
                if !(-90.0..=90.0).contains(&g.y) || !(-180.0..=180.0).contains(&g.x) {
                    return Err(Error::CoordinateRange(format!(
                        "patch '{}' at (lat {}, lon {})",
                        g.id, g.y, g.x
                    )));
                }
            }
            let lat1 = a.y.to_radians();
            let lat2 = b.y.to_radians();
            let dlat = (a.y - b.y).to_radians();
            let dlon = (a.x - b.x).to_radians();
            let h = (dlat / 2.0).sin().powi(2)
                + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
            Ok(EARTH_RADIUS_KM * 2.0 * h.sqrt().atan2((1.0 - h).sqrt()))
        }
    }
}

/// n x n nonnegative inter-patch visit weights. Row `i` holds the weights of
/// patch `i` residents toward each destination; the diagonal (within-patch
/// mixing) must stay positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CouplingMatrix {
    pub fn from_entries(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyInput("coupling matrix needs at least one patch"));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                context: "coupling matrix entries",
                expected: n * n,
                actual: entries.len(),
            });
        }
        for (idx, &v) in entries.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::NegativeValue {
                    context: format!("coupling entry ({}, {})", idx / n, idx % n),
                    value: v,
                });
            }
        }
        for i in 0..n {
            if entries[i * n + i] <= 0.0 {
                return Err(Error::NegativeValue {
                    context: format!("diagonal entry ({i}, {i}) must be positive"),
                    value: entries[i * n + i],
                });
            }
        }
        Ok(Self { n, entries })
    }

    /// No transport: within-patch mixing only.
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { n, entries }
    }

    /// All off-diagonal entries equal to `weight`.
    pub fn uniform(n: usize, weight: f64, diagonal: f64) -> Result<Self> {
        if weight < 0.0 {
            return Err(Error::NegativeValue {
                context: "uniform weight".into(),
                value: weight,
            });
        }
        let mut entries = vec![weight; n * n];
        for i in 0..n {
            entries[i * n + i] = diagonal;
        }
        Self::from_entries(n, entries)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn max_offdiagonal(&self) -> f64 {
        let mut best = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.get(i, j) > best {
                    best = self.get(i, j);
                }
            }
        }
        best
    }

    pub fn mean_offdiagonal(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    sum += self.get(i, j);
                }
            }
        }
        sum / (self.n * (self.n - 1)) as f64
    }

    /// Multiply every off-diagonal entry by `factor`, leaving the diagonal
    /// (within-patch mixing) untouched.
    pub fn scale_offdiagonals(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(Error::Config(format!("scale factor {factor} invalid")));
        }
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    out.entries[i * self.n + j] *= factor;
                }
            }
        }
        Ok(out)
    }

    /// Rescale off-diagonals so the largest equals `cap`; returns the matrix
    /// and the factor that was applied.
    pub fn scaled_to_max_offdiagonal(&self, cap: f64) -> Result<(Self, f64)> {
        let max = self.max_offdiagonal();
        if max <= 0.0 {
            return Err(Error::Config(
                "matrix has no positive off-diagonal entry to rescale".into(),
            ));
        }
        let factor = cap / max;
        Ok((self.scale_offdiagonals(factor)?, factor))
    }

    /// Each row scaled to sum to one. Off by default everywhere; available
    /// for experiments.
    pub fn row_normalized(&self) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..self.n {
            let sum: f64 = self.row(i).iter().sum();
            if sum <= 0.0 {
                return Err(Error::Config(format!("row {i} sums to {sum}")));
            }
            for j in 0..self.n {
                out.entries[i * self.n + j] /= sum;
            }
        }
        Ok(out)
    }
}

/// Build the gravity coupling matrix over the given geometries.
///
/// Off-diagonal `P_ij = theta * n_i^alpha * n_j^beta / d_ij^gamma`; the
/// power part is assembled in log space before exponentiating, so the result
/// stays exactly linear in `theta` and overflow shows up as a clean error
/// naming the pair. The diagonal is set to `diagonal` (1 keeps the
/// single-patch host force intact).
pub fn gravity_matrix(
    geoms: &[PatchGeometry],
    params: &GravityParams,
    mode: DistanceMode,
    diagonal: f64,
) -> Result<CouplingMatrix> {
    if geoms.is_empty() {
        return Err(Error::EmptyInput("gravity matrix needs at least one patch"));
    }
    for g in geoms {
        g.validate()?;
    }
    let n = geoms.len();
    let log_pop: Vec<f64> = geoms.iter().map(|g| g.population.ln()).collect();
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                entries[i * n + i] = diagonal;
                continue;
            }
            let d = distance(&geoms[i], &geoms[j], mode)?;
            if d <= 0.0 {
                return Err(Error::DegenerateDistance {
                    a: geoms[i].id.clone(),
                    b: geoms[j].id.clone(),
                });
            }
            let log_w = params.alpha * log_pop[i] + params.beta * log_pop[j]
                - params.gamma * d.ln();
            let w = params.theta * log_w.exp();
            if !w.is_finite() {
                return Err(Error::WeightOverflow {
                    a: geoms[i].id.clone(),
                    b: geoms[j].id.clone(),
                });
            }
            entries[i * n + j] = w;
        }
    }
    CouplingMatrix::from_entries(n, entries)
}

/// A coupling weight seen from a focal patch, with the pair distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightAtDistance {
    pub patch_id: String,
    pub distance: f64,
    pub weight: f64,
}

/// The focal patch's outgoing weights against distance, covering every other
/// patch, sorted by distance.
pub fn weight_vs_distance(
    matrix: &CouplingMatrix,
    geoms: &[PatchGeometry],
    focal: &str,
    mode: DistanceMode,
) -> Result<Vec<WeightAtDistance>> {
    if matrix.len() != geoms.len() {
        return Err(Error::DimensionMismatch {
            context: "matrix vs geometries",
            expected: geoms.len(),
            actual: matrix.len(),
        });
    }
    let f = crate::model::patch_index(geoms, focal)?;
    let mut out = Vec::with_capacity(geoms.len() - 1);
    for (j, g) in geoms.iter().enumerate() {
        if j == f {
            continue;
        }
        out.push(WeightAtDistance {
            patch_id: g.id.clone(),
            distance: distance(&geoms[f], g, mode)?,
            weight: matrix.get(f, j),
        });
    }
    out.sort_by(|a, b| a.distance.partial_cmp(&b.distance).expect("finite"));
    Ok(out)
}

/// Every ordered pair's distance and weight (scatter data for the
/// gravity-prediction figures).
pub fn pair_scatter(
    matrix: &CouplingMatrix,
    geoms: &[PatchGeometry],
    mode: DistanceMode,
) -> Result<Vec<(String, String, f64, f64)>> {
    let mut out = Vec::new();
    for i in 0..geoms.len() {
        for j in 0..geoms.len() {
            if i == j {
                continue;
            }
            out.push((
                geoms[i].id.clone(),
                geoms[j].id.clone(),
                distance(&geoms[i], &geoms[j], mode)?,
                matrix.get(i, j),
            ));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom(id: &str, pop: f64, x: f64, y: f64) -> PatchGeometry {
        PatchGeometry::new(id, pop, x, y)
    }

    #[test]
    fn gravity_formula_direct_evaluation() {
        let geoms = vec![geom("a", 1e5, 0.0, 0.0), geom("b", 1e5, 10.0, 0.0)];
        let params = GravityParams::new(1.0, 1.0, 2.0, 1.0);
        let m = gravity_matrix(&geoms, &params, DistanceMode::Euclidean, 1.0).unwrap();
        assert_relative_eq!(m.get(0, 1), 1e8, max_relative = 1e-12);
        assert_relative_eq!(m.get(1, 0), 1e8, max_relative = 1e-12);
        assert_eq!(m.get(0, 0), 1.0);
    }

    #[test]
    fn zero_exponents_annihilate_geometry() {
        let geoms = vec![
            geom("a", 123.0, 0.0, 0.0),
            geom("b", 9.9e7, 55.0, -3.0),
            geom("c", 1.0, -20.0, 40.0),
        ];
        let params = GravityParams::new(0.0, 0.0, 0.0, 1.0);
        let m = gravity_matrix(&geoms, &params, DistanceMode::Euclidean, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(m.get(i, j), 1.0);
                }
            }
        }
    }

    #[test]
    fn doubling_theta_doubles_offdiagonals_exactly() {
        let geoms = vec![
            geom("a", 8e6, 0.0, 0.0),
            geom("b", 1e5, 30.0, 40.0),
            geom("c", 2e5, -70.0, 10.0),
        ];
        let one = gravity_matrix(
            &geoms,
            &GravityParams::new(0.7, 1.0, 1.3, 0.4),
            DistanceMode::Euclidean,
            1.0,
        )
        .unwrap();
        let two = gravity_matrix(
            &geoms,
            &GravityParams::new(0.7, 1.0, 1.3, 0.8),
            DistanceMode::Euclidean,
            1.0,
        )
        .unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!((2.0 * one.get(i, j)).to_bits(), two.get(i, j).to_bits());
                }
            }
        }
    }

    #[test]
    fn duplicate_coordinates_are_rejected() {
        let geoms = vec![geom("a", 1e5, 5.0, 5.0), geom("b", 1e5, 5.0, 5.0)];
        let params = GravityParams::new(1.0, 1.0, 2.0, 1.0);
        match gravity_matrix(&geoms, &params, DistanceMode::Euclidean, 1.0) {
            Err(Error::DegenerateDistance { a, b }) => {
                assert_eq!(a, "a");
                assert_eq!(b, "b");
            }
            other => panic!("expected degenerate distance, got {other:?}"),
        }
    }

    #[test]
    fn overflow_names_the_pair() {
        let geoms = vec![geom("a", 1e300, 0.0, 0.0), geom("b", 1e300, 1e-3, 0.0)];
        let params = GravityParams::new(2.0, 2.0, 0.0, 1.0);
        match gravity_matrix(&geoms, &params, DistanceMode::Euclidean, 1.0) {
            Err(Error::WeightOverflow { a, b }) => {
                assert_eq!(a, "a");
                assert_eq!(b, "b");
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn uniform_matrix_examples() {
        let m = CouplingMatrix::uniform(3, 0.001, 1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.001 };
                assert_eq!(m.get(i, j), want);
            }
        }
        assert!(CouplingMatrix::uniform(0, 0.1, 1.0).is_err());
        assert!(CouplingMatrix::uniform(2, -0.1, 1.0).is_err());

        let decoupled = CouplingMatrix::uniform(4, 0.0, 1.0).unwrap();
        assert_eq!(decoupled, CouplingMatrix::identity(4));
    }

    #[test]
    fn euclidean_distance_345() {
        let a = geom("a", 1.0, 0.0, 0.0);
        let b = geom("b", 1.0, 3.0, 4.0);
        assert_eq!(distance(&a, &b, DistanceMode::Euclidean).unwrap(), 5.0);
    }

    #[test]
    fn haversine_identical_points_is_zero() {
        let a = geom("a", 1.0, -77.0, -12.0);
        assert_eq!(distance(&a, &a, DistanceMode::Haversine).unwrap(), 0.0);
    }

    #[test]
    fn haversine_quarter_circumference() {
        let a = geom("a", 1.0, 0.0, 0.0);
        let b = geom("b", 1.0, 90.0, 0.0);
        let d = distance(&a, &b, DistanceMode::Haversine).unwrap();
        assert_relative_eq!(
            d,
            EARTH_RADIUS_KM * std::f64::consts::FRAC_PI_2,
            max_relative = 1e-12
        );
    }

    #[test]
    fn haversine_rejects_out_of_range_coordinates() {
        let a = geom("a", 1.0, 0.0, 95.0);
        let b = geom("b", 1.0, 0.0, 0.0);
        assert!(matches!(
            distance(&a, &b, DistanceMode::Haversine),
            Err(Error::CoordinateRange(_))
        ));
    }

    #[test]
    fn weight_vs_distance_is_sorted_and_complete() {
        let geoms = vec![
            geom("hub", 8e6, 0.0, 0.0),
            geom("far", 1e5, 90.0, 0.0),
            geom("near", 1e5, 10.0, 0.0),
            geom("mid", 1e5, 0.0, 50.0),
        ];
        let m = gravity_matrix(
            &geoms,
            &GravityParams::new(1.0, 1.0, 2.0, 1.0),
            DistanceMode::Euclidean,
            1.0,
        )
        .unwrap();
        let pts = weight_vs_distance(&m, &geoms, "hub", DistanceMode::Euclidean).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0].patch_id, "near");
        assert_eq!(pts[2].patch_id, "far");
        // equal follower populations and gamma > 0: strictly decreasing
        assert!(pts[0].weight > pts[1].weight && pts[1].weight > pts[2].weight);
    }

    #[test]
    fn uniform_weights_are_flat_across_distance() {
        let geoms = vec![
            geom("hub", 1e5, 0.0, 0.0),
            geom("a", 1e5, 10.0, 0.0),
            geom("b", 1e5, 80.0, 0.0),
        ];
        let m = CouplingMatrix::uniform(3, 0.01, 1.0).unwrap();
        let pts = weight_vs_distance(&m, &geoms, "hub", DistanceMode::Euclidean).unwrap();
        assert!(pts.iter().all(|p| p.weight == 0.01));
    }

    #[test]
    fn larger_population_exponents_favor_the_populous_patch() {
        // heterogeneous populations: the big patch's share of each row grows
        // with the population exponents
        let geoms = vec![
            geom("lima", 7e6, -77.0, -12.0),
            geom("small_1", 2e5, -80.0, -5.0),
            geom("small_2", 3e5, -73.0, -13.0),
            geom("small_3", 1e5, -76.0, -16.0),
        ];
        let share_of_big = |exp: f64| -> f64 {
            let m = gravity_matrix(
                &geoms,
                &GravityParams::new(exp, exp, 2.0, 1.0),
                DistanceMode::Haversine,
                1.0,
            )
            .unwrap();
            // row 1 (a small patch): weight toward lima over all outgoing
            let row: f64 = (0..4).filter(|&j| j != 1).map(|j| m.get(1, j)).sum();
            m.get(1, 0) / row
        };
        assert!(share_of_big(1.0) > share_of_big(0.5));
        assert!(share_of_big(1.5) > share_of_big(1.0));
    }

    #[test]
    fn scaled_to_cap_sets_max_offdiagonal() {
        let geoms = vec![
            geom("a", 8e6, 0.0, 0.0),
            geom("b", 1e5, 10.0, 0.0),
            geom("c", 1e5, 50.0, 0.0),
        ];
        let m = gravity_matrix(
            &geoms,
            &GravityParams::new(1.0, 1.0, 2.0, 1.0),
            DistanceMode::Euclidean,
            1.0,
        )
        .unwrap();
        let (scaled, factor) = m.scaled_to_max_offdiagonal(0.01).unwrap();
        assert_relative_eq!(scaled.max_offdiagonal(), 0.01, max_relative = 1e-12);
        assert!(factor > 0.0 && factor < 1.0);
        assert_eq!(scaled.get(0, 0), 1.0);
    }

    #[test]
    fn row_normalized_rows_sum_to_one() {
        let m = CouplingMatrix::uniform(3, 0.5, 1.0).unwrap();
        let nm = m.row_normalized().unwrap();
        for i in 0..3 {
            assert_relative_eq!(nm.row(i).iter().sum::<f64>(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn diagonal_must_be_positive() {
        assert!(CouplingMatrix::uniform(2, 0.1, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_when_alpha_equals_beta(
            exp in 0.0f64..2.0,
            gamma in 0.0f64..3.0,
            theta in 0.01f64..2.0,
            pops in proptest::collection::vec(1e3f64..1e7, 3..6),
        ) {
            let geoms: Vec<PatchGeometry> = pops
                .iter()
                .enumerate()
                .map(|(i, &p)| geom(&format!("p{i}"), p, (i as f64) * 13.7, (i as f64) * -3.1))
                .collect();
            let m = gravity_matrix(
                &geoms,
                &GravityParams::new(exp, exp, gamma, theta),
                DistanceMode::Euclidean,
                1.0,
            )
            .unwrap();
            for i in 0..geoms.len() {
                for j in 0..geoms.len() {
                    prop_assert_eq!(m.get(i, j).to_bits(), m.get(j, i).to_bits());
                }
            }
        }

        #[test]
        fn theta_scales_offdiagonals_exactly(c in 0.01f64..100.0) {
            let geoms = vec![
                geom("a", 8e6, 0.0, 0.0),
                geom("b", 1e5, 30.0, 40.0),
                geom("c", 2e5, -70.0, 10.0),
            ];
            let base = gravity_matrix(
                &geoms,
                &GravityParams::new(0.6, 1.1, 1.7, 1.0),
                DistanceMode::Euclidean,
                1.0,
            )
            .unwrap();
            let scaled = gravity_matrix(
                &geoms,
                &GravityParams::new(0.6, 1.1, 1.7, c),
                DistanceMode::Euclidean,
                1.0,
            )
            .unwrap();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        prop_assert_eq!(
                            (c * base.get(i, j)).to_bits(),
                            scaled.get(i, j).to_bits()
                        );
                    }
                }
            }
        }

        #[test]
        fn weight_monotone_in_distance_and_population(
            d1 in 1.0f64..50.0,
            extra in 1.0f64..50.0,
            p1 in 1e4f64..1e6,
            factor in 1.1f64..10.0,
        ) {
            let params = GravityParams::new(0.8, 0.9, 1.5, 1.0);
            let w = |pop: f64, d: f64| {
                let geoms = vec![geom("a", 1e5, 0.0, 0.0), geom("b", pop, d, 0.0)];
                gravity_matrix(&geoms, &params, DistanceMode::Euclidean, 1.0)
                    .unwrap()
                    .get(0, 1)
            };
            // gamma > 0: strictly decreasing in distance
            prop_assert!(w(p1, d1) > w(p1, d1 + extra));
            // beta > 0: strictly increasing in destination population
            prop_assert!(w(p1 * factor, d1) > w(p1, d1));
        }
    }
}
