//! Deterministic synthetic datasets shaped like the Peruvian surveillance
//! data (which is not redistributable): a 79-province census with climate
//! classes, a 780-week case table carrying one countrywide epidemic in weeks
//! 350-400 plus seasonal coastal epidemics from week 417 on, and
//! per-patch daily minimum temperatures. Every pipeline stage is testable
//! against these files.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::data::{
    build_patches, write_cases, write_climate, write_provinces, CaseSeries, ClimateRecord,
    PatchScheme, ProvinceRecord, RegionClass,
};
use crate::error::Result;
use crate::fitting::{CouplingSpec, ModelConfig};
use crate::gravity::{DistanceMode, GravityParams};
use crate::model::{DiseaseParams, EpidemicSeries, Provenance, SeasonalBeta};

/// Default master seed for the shipped fixture set.
pub const FIXTURE_SEED: u64 = 20080704;

/// Reference sinusoid parameters (T0, eps in Fahrenheit) behind the climate
/// fixture, one row per patch.
pub const CLIMATE_REFERENCE: [(&str, f64, f64); 3] = [
    ("north_coast", 63.5454, 3.5680),
    ("central_coast", 65.3771, 4.5169),
    ("jungle", 74.3880, 0.1353),
];

/// Patch population totals the census fixture reproduces exactly
/// (north coast, central coast, jungle).
pub const THREE_PATCH_POPULATIONS: [u64; 3] = [7_600_000, 10_500_000, 2_800_000];

const EPIDEMIC_START_WEEK: u32 = 350;
const EPIDEMIC_END_WEEK: u32 = 400;
const SEASONAL_START_WEEK: u32 = 417;
const TOTAL_WEEKS: u32 = 780;

/// 79 provinces over the seven climate classes. Group populations sum
/// exactly to [`THREE_PATCH_POPULATIONS`]; one central-coast province is
/// capital-sized. Coordinates sit in class-specific bands.
pub fn peru_provinces(seed: u64) -> Vec<ProvinceRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (class, count, anchor lat, anchor lon)
    let groups: [(RegionClass, usize, f64, f64); 7] = [
        (RegionClass::CoastN, 12, -5.2, -80.6),
        (RegionClass::MountainN, 8, -6.3, -78.6),
        (RegionClass::CoastC, 18, -12.0, -76.8),
        (RegionClass::MountainC, 12, -11.2, -75.2),
        (RegionClass::CoastS, 2, -16.4, -71.6),
        (RegionClass::Jungle, 20, -6.8, -74.8),
        (RegionClass::MountainS, 7, -14.9, -70.7),
    ];
    let mut out = Vec::with_capacity(79);
    let mut weights = Vec::with_capacity(79);
    let mut serial = 0usize;
    for (class, count, lat0, lon0) in groups {
        for k in 0..count {
            serial += 1;
            // the capital dominates the central coast
            let capital = class == RegionClass::CoastC && k == 0;
            weights.push(if capital {
                12.0
            } else {
                rng.random_range(0.5..1.5)
            });
            out.push(ProvinceRecord {
                id: format!("p{serial:03}"),
                name: format!("Province {serial:03}"),
                region_class: class,
                population: 0, // group totals assigned below
                lat: lat0 + rng.random_range(-1.4..1.4),
                lon: lon0 + rng.random_range(-1.1..1.1),
            });
        }
    }
    // assign populations so each three-patch group hits its target exactly
    let group_of = |class: RegionClass| -> usize {
        match class {
            RegionClass::CoastN | RegionClass::MountainN => 0,
            RegionClass::CoastC | RegionClass::MountainC | RegionClass::CoastS => 1,
            RegionClass::Jungle => 2,
            RegionClass::MountainS => 3,
        }
    };
    let targets = [
        THREE_PATCH_POPULATIONS[0],
        THREE_PATCH_POPULATIONS[1],
        THREE_PATCH_POPULATIONS[2],
        1_150_000, // southern mountains, outside every patch
    ];
    for (group, &target) in targets.iter().enumerate() {
        let idx: Vec<usize> = (0..out.len())
            .filter(|&i| group_of(out[i].region_class) == group)
            .collect();
        let group_weights: Vec<f64> = idx.iter().map(|&i| weights[i]).collect();
        let shares = apportion_u64(target, &group_weights);
        for (&i, share) in idx.iter().zip(shares) {
            out[i].population = share;
        }
    }
    out
}

/// Split `total` over `weights` with integer shares summing exactly to
/// `total` (largest-remainder apportionment, ties to the earliest index).
fn apportion_u64(total: u64, weights: &[f64]) -> Vec<u64> {
    let w_sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| total as f64 * w / w_sum).collect();
    let mut shares: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
    let assigned: u64 = shares.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.partial_cmp(&ra).expect("finite").then(a.cmp(&b))
    });
    for k in 0..(total - assigned) as usize {
        shares[order[k % order.len()]] += 1;
    }
    shares
}

fn apportion_u32(total: u32, weights: &[f64]) -> Vec<u32> {
    apportion_u64(total as u64, weights)
        .into_iter()
        .map(|v| v as u32)
        .collect()
}

/// Transmission settings behind the seasonal block of the case fixture,
/// patch order north/central/jungle: the coasts swing seasonally, the
/// jungle stays near its baseline year round.
pub fn seasonal_generator_params() -> Vec<DiseaseParams> {
    let betas = [
        SeasonalBeta::new(0.28, 0.12, 0.0),
        SeasonalBeta::new(0.30, 0.14, 10.0),
        SeasonalBeta::new(0.33, 0.03, 0.0),
    ];
    betas
        .iter()
        .map(|&beta_v| DiseaseParams {
            beta_v,
            ..DiseaseParams::default()
        })
        .collect()
}

/// The provinces carrying the 2000-2001 epidemic wave: the jungle, the
/// northern coast, and all but one central-coast province (49 in all).
pub fn epidemic_provinces(provinces: &[ProvinceRecord]) -> Vec<String> {
    let mut out = Vec::with_capacity(49);
    let mut coast_c_left = 17;
    for p in provinces {
        match p.region_class {
            RegionClass::Jungle | RegionClass::CoastN => out.push(p.id.clone()),
            RegionClass::CoastC if coast_c_left > 0 => {
                coast_c_left -= 1;
                out.push(p.id.clone());
            }
            _ => {}
        }
    }
    out
}

/// 780 weeks of per-province counts: endemic jungle background, a
/// 49-province single-wave epidemic in weeks 350-400 generated by a
/// non-seasonal per-province gravity run, and yearly coastal epidemics from
/// week 417 on generated by the seasonal three-patch model.
pub fn peru_cases(provinces: &[ProvinceRecord], seed: u64) -> Result<CaseSeries> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let ids: Vec<String> = provinces.iter().map(|p| p.id.clone()).collect();
    let weeks = TOTAL_WEEKS as usize;
    let mut counts = vec![vec![0u32; weeks]; ids.len()];
    let index_of = |id: &str| ids.iter().position(|x| x == id).expect("known id");

    // endemic background in the jungle, all fifteen years
    let background = Poisson::new(1.2).expect("valid mean");
    for (i, p) in provinces.iter().enumerate() {
        if p.region_class == RegionClass::Jungle {
            for w in 0..weeks {
                counts[i][w] += background.sample(&mut rng) as u32;
            }
        }
    }

    // the 2000-2001 wave over 49 per-province patches
    let wave_ids = epidemic_provinces(provinces);
    let wave_records: Vec<&ProvinceRecord> = wave_ids
        .iter()
        .map(|id| &provinces[index_of(id)])
        .collect();
    let geoms: Vec<crate::model::PatchGeometry> = wave_records
        .iter()
        .map(|p| crate::model::PatchGeometry::new(&p.id, p.population as f64, p.lon, p.lat))
        .collect();
    let seed_idx = wave_records
        .iter()
        .enumerate()
        .filter(|(_, p)| p.region_class == RegionClass::Jungle)
        .max_by_key(|(_, p)| p.population)
        .map(|(i, _)| i)
        .expect("jungle province exists");
    let mut seeds = vec![0.0; geoms.len()];
    seeds[seed_idx] = 20.0;
    let config = ModelConfig {
        geoms,
        base: wave_records
            .iter()
            .map(|_| DiseaseParams {
                beta_v: SeasonalBeta::constant(0.5),
                beta_h: 0.5,
                ..DiseaseParams::default()
            })
            .collect(),
        seasonal: false,
        coupling: CouplingSpec::Gravity {
            params: GravityParams::new(1.0, 1.0, 1.0, 1.0),
            distance: DistanceMode::Haversine,
            diagonal: 1.0,
            cap: Some(0.005),
        },
        dt: 0.25,
        seed_infected: Some(seeds),
    };
    let window_weeks = (EPIDEMIC_END_WEEK - EPIDEMIC_START_WEEK + 1) as usize;
    let horizon = EpidemicSeries::new(
        Provenance::Data,
        wave_ids.clone(),
        1,
        vec![vec![0.0; window_weeks]; wave_ids.len()],
    )?;
    let wave = config.simulate_weekly(&[], &horizon)?;
    let raw_total: f64 = wave.total().iter().sum();
    let scale = 20_000.0 / raw_total;
    for (k, id) in wave_ids.iter().enumerate() {
        let i = index_of(id);
        let mut any = false;
        for (w, &v) in wave.values[k].iter().enumerate() {
            let c = (v * scale).round() as u32;
            if c > 0 {
                any = true;
            }
            counts[i][(EPIDEMIC_START_WEEK - 1) as usize + w] += c;
        }
        if !any {
            // every wave province reports at least once inside the window
            let peak = crate::stats::argmax(&wave.values[k]).unwrap_or(window_weeks / 2);
            counts[i][(EPIDEMIC_START_WEEK - 1) as usize + peak] += 1;
        }
    }

    // seasonal years 2002-2008 over the three climate patches
    let patch_set = build_patches(provinces, &PatchScheme::ThreePatch)?;
    let seasonal_weeks = (TOTAL_WEEKS - SEASONAL_START_WEEK + 1) as usize;
    let config = ModelConfig {
        geoms: patch_set.geometries(),
        base: seasonal_generator_params(),
        seasonal: true,
        coupling: CouplingSpec::Gravity {
            params: GravityParams::new(1.0, 1.0, 1.0, 1.0),
            distance: DistanceMode::Haversine,
            diagonal: 1.0,
            cap: Some(0.001),
        },
        dt: 0.25,
        seed_infected: Some(vec![20.0, 20.0, 300.0]),
    };
    let horizon = EpidemicSeries::new(
        Provenance::Data,
        patch_set.patches.iter().map(|p| p.id.clone()).collect(),
        1,
        vec![vec![0.0; seasonal_weeks]; 3],
    )?;
    let seasonal = config.simulate_weekly(&[], &horizon)?;
    let seasonal_total: f64 = seasonal.total().iter().sum();
    let scale = 9_000.0 / seasonal_total;
    for (p, patch) in patch_set.patches.iter().enumerate() {
        let member_weights: Vec<f64> = patch
            .members
            .iter()
            .map(|m| provinces[index_of(m)].population as f64)
            .collect();
        for (w, &v) in seasonal.values[p].iter().enumerate() {
            let patch_count = (v * scale).round() as u32;
            if patch_count == 0 {
                continue;
            }
            let shares = apportion_u32(patch_count, &member_weights);
            for (m, share) in patch.members.iter().zip(shares) {
                counts[index_of(m)][(SEASONAL_START_WEEK - 1) as usize + w] += share;
            }
        }
    }

    Ok(CaseSeries {
        first_week: 1,
        provinces: ids,
        counts,
    })
}

/// One calendar year (2006) of daily minimum temperature per patch:
/// the reference sinusoids plus unit-variance Gaussian noise.
pub fn climate_records(seed: u64) -> Vec<ClimateRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    let noise = Normal::new(0.0, 1.0).expect("valid sigma");
    let start = NaiveDate::from_ymd_opt(2006, 1, 1).expect("valid date");
    let mut out = Vec::with_capacity(3 * 365);
    for (patch, t0, eps) in CLIMATE_REFERENCE {
        for d in 0..365i64 {
            let t = d as f64;
            let value = t0
                + eps * (2.0 * std::f64::consts::PI * t / 365.0).sin()
                + noise.sample(&mut rng);
            out.push(ClimateRecord {
                date: start + chrono::Days::new(d as u64),
                patch_id: patch.to_string(),
                // two decimals, like station exports
                tmin_f: (value * 100.0).round() / 100.0,
            });
        }
    }
    out
}

/// The files written by [`write_fixture_set`].
#[derive(Debug, Clone)]
pub struct FixturePaths {
    pub provinces: PathBuf,
    pub cases: PathBuf,
    pub climate: PathBuf,
}

/// Generate and write the full fixture set into `dir`.
pub fn write_fixture_set(dir: impl AsRef<Path>, seed: u64) -> Result<FixturePaths> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let provinces = peru_provinces(seed);
    let cases = peru_cases(&provinces, seed)?;
    let climate = climate_records(seed);
    let paths = FixturePaths {
        provinces: dir.join("provinces.csv"),
        cases: dir.join("cases.csv"),
        climate: dir.join("climate.csv"),
    };
    write_provinces(&paths.provinces, &provinces)?;
    write_cases(&paths.cases, &cases)?;
    write_climate(&paths.climate, &climate)?;
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{aggregate_cases, select_window, Window};

    #[test]
    fn census_hits_patch_totals_exactly() {
        let provinces = peru_provinces(FIXTURE_SEED);
        assert_eq!(provinces.len(), 79);
        let set = build_patches(&provinces, &PatchScheme::ThreePatch).unwrap();
        assert_eq!(set.patches[0].population, THREE_PATCH_POPULATIONS[0]);
        assert_eq!(set.patches[1].population, THREE_PATCH_POPULATIONS[1]);
        assert_eq!(set.patches[2].population, THREE_PATCH_POPULATIONS[2]);
        assert_eq!(set.dropped.len(), 7);
    }

    #[test]
    fn census_is_deterministic() {
        assert_eq!(peru_provinces(1), peru_provinces(1));
        assert_ne!(peru_provinces(1), peru_provinces(2));
    }

    #[test]
    fn exactly_49_provinces_carry_the_epidemic() {
        let provinces = peru_provinces(FIXTURE_SEED);
        let cases = peru_cases(&provinces, FIXTURE_SEED).unwrap();
        assert_eq!(cases.weeks(), 780);
        let with_cases = cases.provinces_with_cases(350, 400);
        assert_eq!(with_cases.len(), 49);
        assert_eq!(
            with_cases,
            epidemic_provinces(&provinces),
            "wave provinces are exactly the designated 49"
        );
    }

    #[test]
    fn aggregation_pipeline_runs_on_the_fixture() {
        let provinces = peru_provinces(FIXTURE_SEED);
        let cases = peru_cases(&provinces, FIXTURE_SEED).unwrap();
        let set = build_patches(&provinces, &PatchScheme::ThreePatch).unwrap();
        let agg = aggregate_cases(&cases, &set.patches, &set.dropped).unwrap();
        let window = select_window(&agg, Window::Epidemic2000To2001).unwrap();
        assert_eq!(window.weeks(), 51);
        let total: f64 = window.total().iter().sum();
        assert!(total > 10_000.0, "epidemic block holds most cases: {total}");
        // country total equals province total, exactly
        let country: f64 = agg.total().iter().sum();
        assert_eq!(country, cases.total_cases() as f64);
    }

    #[test]
    fn apportionment_conserves_totals() {
        let shares = apportion_u64(1000, &[1.0, 2.0, 3.0, 0.5]);
        assert_eq!(shares.iter().sum::<u64>(), 1000);
        let shares = apportion_u32(7, &[1.0, 1.0, 1.0]);
        assert_eq!(shares.iter().sum::<u32>(), 7);
    }

    #[test]
    fn climate_fixture_covers_three_patches() {
        let records = climate_records(FIXTURE_SEED);
        assert_eq!(records.len(), 3 * 365);
        let series = crate::data::climate_series(&records).unwrap();
        assert_eq!(series.len(), 3);
        for s in &series {
            assert_eq!(s.len(), 365);
        }
    }
}
