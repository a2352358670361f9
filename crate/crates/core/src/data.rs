//! Province metadata, weekly case counts, and temperature ingestion;
//! aggregation of provinces into patches; analysis-window selection.
//!
//! File schemas (CSV, UTF-8, LF, mandatory header row):
//!
//! - `provinces.csv`: `province_id,name,region_class,population,lat,lon`
//! - `cases.csv`: `week,province_id,count` (long format, 1-based weeks)
//! - `climate.csv`: `date,patch_id,tmin_f` (ISO-8601 dates)
//! - `patches.csv` (output): `patch_id,province_id`
//! - `centers.csv` (output): `patch_id,lat,lon,population`

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::climate::TemperatureSeries;
use crate::error::{Error, Result};
use crate::gravity::CouplingMatrix;
use crate::model::{EpidemicSeries, PatchGeometry, Provenance};

/// Climate classification of a province. Mountains and coast carry a
/// north/central/south sub-tag; the jungle does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionClass {
    CoastN,
    CoastC,
    CoastS,
    MountainN,
    MountainC,
    MountainS,
    Jungle,
}

impl RegionClass {
    pub const ALL: [RegionClass; 7] = [
        RegionClass::CoastN,
        RegionClass::CoastC,
        RegionClass::CoastS,
        RegionClass::MountainN,
        RegionClass::MountainC,
        RegionClass::MountainS,
        RegionClass::Jungle,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RegionClass::CoastN => "coast_n",
            RegionClass::CoastC => "coast_c",
            RegionClass::CoastS => "coast_s",
            RegionClass::MountainN => "mountain_n",
            RegionClass::MountainC => "mountain_c",
            RegionClass::MountainS => "mountain_s",
            RegionClass::Jungle => "jungle",
        }
    }
}

impl FromStr for RegionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RegionClass::ALL
            .iter()
            .find(|c| c.as_str() == s)
            .copied()
            .ok_or_else(|| Error::RegionClass(s.to_string()))
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One province's metadata row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvinceRecord {
    pub id: String,
    pub name: String,
    pub region_class: RegionClass,
    pub population: u64,
    pub lat: f64,
    pub lon: f64,
}

/// A patch assembled from provinces: center at the members' mean coordinates,
/// population their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchDefinition {
    pub id: String,
    pub members: Vec<String>,
    pub center_lat: f64,
    pub center_lon: f64,
    pub population: u64,
}

/// Patch definitions plus the provinces left out of every patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub patches: Vec<PatchDefinition>,
    pub dropped: Vec<String>,
}

impl PatchSet {
    /// Geometries for the gravity/model layer: `x` = longitude, `y` =
    /// latitude.
    pub fn geometries(&self) -> Vec<PatchGeometry> {
        self.patches
            .iter()
            .map(|p| PatchGeometry::new(&p.id, p.population as f64, p.center_lon, p.center_lat))
            .collect()
    }
}

/// How provinces map onto patches.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchScheme {
    /// Northern coast + northern mountain; central coast + central mountain
    /// + southern coast; jungle. Southern-mountain provinces (no recorded
    /// dengue) are dropped with a warning in the returned set.
    ThreePatch,
    /// One patch per province.
    PerProvince,
    /// Explicit `province -> patch` assignments; unlisted provinces are
    /// dropped.
    Custom(Vec<(String, String)>),
}

/// The three-patch scheme's patch ids, in patch order 1..3.
pub const THREE_PATCH_IDS: [&str; 3] = ["north_coast", "central_coast", "jungle"];

fn three_patch_target(class: RegionClass) -> Option<&'static str> {
    match class {
        RegionClass::CoastN | RegionClass::MountainN => Some("north_coast"),
        RegionClass::CoastC | RegionClass::MountainC | RegionClass::CoastS => {
            Some("central_coast")
        }
        RegionClass::Jungle => Some("jungle"),
        RegionClass::MountainS => None,
    }
}

/// Group provinces into patches under the given scheme.
pub fn build_patches(provinces: &[ProvinceRecord], scheme: &PatchScheme) -> Result<PatchSet> {
    if provinces.is_empty() {
        return Err(Error::EmptyInput("no provinces to group"));
    }
    let assignments: Vec<(String, Option<String>)> = match scheme {
        PatchScheme::ThreePatch => provinces
            .iter()
            .map(|p| {
                (
                    p.id.clone(),
                    three_patch_target(p.region_class).map(String::from),
                )
            })
            .collect(),
        PatchScheme::PerProvince => provinces
            .iter()
            .map(|p| (p.id.clone(), Some(p.id.clone())))
            .collect(),
        PatchScheme::Custom(map) => {
            let lookup: BTreeMap<&str, &str> = map
                .iter()
                .map(|(prov, patch)| (prov.as_str(), patch.as_str()))
                .collect();
            for (prov, _) in map {
                if !provinces.iter().any(|p| &p.id == prov) {
                    return Err(Error::UnknownPatch(format!(
                        "mapping references unknown province '{prov}'"
                    )));
                }
            }
            provinces
                .iter()
                .map(|p| {
                    (
                        p.id.clone(),
                        lookup.get(p.id.as_str()).map(|s| s.to_string()),
                    )
                })
                .collect()
        }
    };

    // patch order: scheme-declared for three-patch, first appearance otherwise
    let mut patch_order: Vec<String> = match scheme {
        PatchScheme::ThreePatch => THREE_PATCH_IDS.iter().map(|s| s.to_string()).collect(),
        _ => {
            let mut order = Vec::new();
            for (_, target) in &assignments {
                if let Some(t) = target {
                    if !order.contains(t) {
                        order.push(t.clone());
                    }
                }
            }
            order
        }
    };
    patch_order.dedup();

    let mut dropped = Vec::new();
    let mut members: BTreeMap<String, Vec<&ProvinceRecord>> = BTreeMap::new();
    for (province, target) in &assignments {
        let record = provinces.iter().find(|p| &p.id == province).expect("built");
        match target {
            Some(t) => members.entry(t.clone()).or_default().push(record),
            None => dropped.push(province.clone()),
        }
    }

    let mut patches = Vec::with_capacity(patch_order.len());
    for patch_id in patch_order {
        let group = members.get(&patch_id).map(Vec::as_slice).unwrap_or(&[]);
        if group.is_empty() {
            return Err(Error::EmptyInput("a patch ended up with no provinces"));
        }
        let n = group.len() as f64;
        patches.push(PatchDefinition {
            id: patch_id,
            members: group.iter().map(|p| p.id.clone()).collect(),
            center_lat: group.iter().map(|p| p.lat).sum::<f64>() / n,
            center_lon: group.iter().map(|p| p.lon).sum::<f64>() / n,
            population: group.iter().map(|p| p.population).sum(),
        });
    }
    Ok(PatchSet { patches, dropped })
}

/// Weekly case counts per province over a contiguous week range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseSeries {
    pub first_week: u32,
    pub provinces: Vec<String>,
    /// Province-major aligned counts: `counts[province][week - first_week]`.
    pub counts: Vec<Vec<u32>>,
}

impl CaseSeries {
    pub fn weeks(&self) -> usize {
        self.counts.first().map(Vec::len).unwrap_or(0)
    }

    pub fn last_week(&self) -> u32 {
        self.first_week + self.weeks() as u32 - 1
    }

    pub fn total_cases(&self) -> u64 {
        self.counts
            .iter()
            .flat_map(|row| row.iter().map(|&c| c as u64))
            .sum()
    }

    /// Provinces with at least one case inside the given absolute week range.
    pub fn provinces_with_cases(&self, start: u32, end: u32) -> Vec<String> {
        let lo = start.saturating_sub(self.first_week) as usize;
        let hi = (end.saturating_sub(self.first_week) as usize).min(self.weeks() - 1);
        self.provinces
            .iter()
            .zip(&self.counts)
            .filter(|(_, row)| row[lo..=hi].iter().any(|&c| c > 0))
            .map(|(id, _)| id.clone())
            .collect()
    }

    /// Keep only the named provinces, in the given order.
    pub fn restricted_to(&self, keep: &[String]) -> Result<CaseSeries> {
        let mut counts = Vec::with_capacity(keep.len());
        for id in keep {
            let idx = self
                .provinces
                .iter()
                .position(|p| p == id)
                .ok_or_else(|| Error::UnknownPatch(id.clone()))?;
            counts.push(self.counts[idx].clone());
        }
        Ok(CaseSeries {
            first_week: self.first_week,
            provinces: keep.to_vec(),
            counts,
        })
    }
}

/// Patch-level weekly counts: each patch week is the sum of its member
/// provinces. Provinces carrying cases must belong to a patch or appear in
/// `dropped`; anything else is an error rather than a silent omission.
pub fn aggregate_cases(
    cases: &CaseSeries,
    patches: &[PatchDefinition],
    dropped: &[String],
) -> Result<EpidemicSeries> {
    let mut values = vec![vec![0.0; cases.weeks()]; patches.len()];
    'province: for (idx, province) in cases.provinces.iter().enumerate() {
        for (p, patch) in patches.iter().enumerate() {
            if patch.members.contains(province) {
                for (acc, &c) in values[p].iter_mut().zip(&cases.counts[idx]) {
                    *acc += c as f64;
                }
                continue 'province;
            }
        }
        if dropped.contains(province) {
            continue;
        }
        if cases.counts[idx].iter().any(|&c| c > 0) {
            return Err(Error::UnmappedProvince(province.clone()));
        }
    }
    EpidemicSeries::new(
        Provenance::Data,
        patches.iter().map(|p| p.id.clone()).collect(),
        cases.first_week,
        values,
    )
}

/// Named or explicit analysis windows over the weekly dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    /// The yearly-epidemic period, weeks 417-780 (2002 through 2008).
    Seasonal2002To2008,
    /// The countrywide epidemic, weeks 350-400.
    Epidemic2000To2001,
    Weeks {
        start: u32,
        end: u32,
    },
}

impl Window {
    pub fn bounds(&self) -> (u32, u32) {
        match self {
            Window::Seasonal2002To2008 => (417, 780),
            Window::Epidemic2000To2001 => (350, 400),
            Window::Weeks { start, end } => (*start, *end),
        }
    }
}

/// Contiguous sub-series over the window's absolute weeks, inclusive.
pub fn select_window(series: &EpidemicSeries, window: Window) -> Result<EpidemicSeries> {
    let (start, end) = window.bounds();
    if end < start {
        return Err(Error::WindowBounds(format!(
            "window end {end} before start {start}"
        )));
    }
    let first = series.start_week;
    let last = first + series.weeks() as u32 - 1;
    if start < first || end > last {
        return Err(Error::WindowBounds(format!(
            "weeks {start}-{end} outside series {first}-{last}"
        )));
    }
    let lo = (start - first) as usize;
    let hi = (end - first) as usize;
    EpidemicSeries::new(
        series.provenance,
        series.patch_ids.clone(),
        start,
        series.values.iter().map(|row| row[lo..=hi].to_vec()).collect(),
    )
}

// ---------------------------------------------------------------------------
// CSV input/output
// ---------------------------------------------------------------------------

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?)
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, want: &[&str]) -> Result<()> {
    let got = reader.headers()?;
    let fields: Vec<&str> = got.iter().collect();
    if fields != want {
        return Err(Error::Parse {
            path: path.display().to_string(),
            line: 1,
            msg: format!("header {fields:?} does not match schema {want:?}"),
        });
    }
    Ok(())
}

fn parse_error(path: &Path, record: &csv::StringRecord, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: record.position().map(|p| p.line()).unwrap_or(0),
        msg: msg.into(),
    }
}

fn field<'r>(
    path: &Path,
    record: &'r csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<&'r str> {
    record
        .get(idx)
        .ok_or_else(|| parse_error(path, record, format!("missing field '{name}'")))
}

fn parse_field<T: FromStr>(
    path: &Path,
    record: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> Result<T>
where
    T::Err: fmt::Display,
{
    let raw = field(path, record, idx, name)?;
    raw.parse::<T>().map_err(|e| {
        parse_error(path, record, format!("field '{name}' = '{raw}': {e}"))
    })
}

/// Load and validate `provinces.csv`.
pub fn load_provinces(path: impl AsRef<Path>) -> Result<Vec<ProvinceRecord>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(
        path,
        &mut reader,
        &["province_id", "name", "region_class", "population", "lat", "lon"],
    )?;
    let mut out: Vec<ProvinceRecord> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let id = field(path, &record, 0, "province_id")?.to_string();
        if out.iter().any(|p| p.id == id) {
            return Err(Error::DuplicateProvince(id));
        }
        let name = field(path, &record, 1, "name")?.to_string();
        let region_class: RegionClass = field(path, &record, 2, "region_class")?.parse()?;
        let population: i64 = parse_field(path, &record, 3, "population")?;
        if population <= 0 {
            return Err(parse_error(
                path,
                &record,
                format!("population must be positive, got {population}"),
            ));
        }
        let lat: f64 = parse_field(path, &record, 4, "lat")?;
        let lon: f64 = parse_field(path, &record, 5, "lon")?;
        out.push(ProvinceRecord {
            id,
            name,
            region_class,
            population: population as u64,
            lat,
            lon,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("provinces file has no rows"));
    }
    Ok(out)
}

pub fn write_provinces(path: impl AsRef<Path>, provinces: &[ProvinceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["province_id", "name", "region_class", "population", "lat", "lon"])?;
    for p in provinces {
        w.write_record([
            p.id.as_str(),
            p.name.as_str(),
            p.region_class.as_str(),
            &p.population.to_string(),
            &p.lat.to_string(),
            &p.lon.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Load `cases.csv` (long format) into an aligned week-by-province table.
/// Weeks absent from the file count as zero.
pub fn load_cases(path: impl AsRef<Path>) -> Result<CaseSeries> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["week", "province_id", "count"])?;
    let mut provinces: Vec<String> = Vec::new();
    let mut rows: Vec<BTreeMap<u32, u32>> = Vec::new();
    let mut week_range: Option<(u32, u32)> = None;
    for record in reader.records() {
        let record = record?;
        let week: u32 = parse_field(path, &record, 0, "week")?;
        if week == 0 {
            return Err(parse_error(path, &record, "weeks are 1-based"));
        }
        let id = field(path, &record, 1, "province_id")?.to_string();
        let count: u32 = parse_field(path, &record, 2, "count")?;
        let idx = match provinces.iter().position(|p| p == &id) {
            Some(i) => i,
            None => {
                provinces.push(id);
                rows.push(BTreeMap::new());
                rows.len() - 1
            }
        };
        if rows[idx].insert(week, count).is_some() {
            return Err(parse_error(
                path,
                &record,
                format!("duplicate entry for week {week}, province '{}'", provinces[idx]),
            ));
        }
        week_range = Some(match week_range {
            None => (week, week),
            Some((lo, hi)) => (lo.min(week), hi.max(week)),
        });
    }
    let (first_week, last_week) =
        week_range.ok_or(Error::EmptyInput("cases file has no rows"))?;
    let weeks = (last_week - first_week + 1) as usize;
    let counts = rows
        .into_iter()
        .map(|sparse| {
            let mut row = vec![0u32; weeks];
            for (week, count) in sparse {
                row[(week - first_week) as usize] = count;
            }
            row
        })
        .collect();
    Ok(CaseSeries {
        first_week,
        provinces,
        counts,
    })
}

/// Write a case table in the long format, omitting zero weeks.
pub fn write_cases(path: impl AsRef<Path>, cases: &CaseSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["week", "province_id", "count"])?;
    for (province, row) in cases.provinces.iter().zip(&cases.counts) {
        for (k, &count) in row.iter().enumerate() {
            if count > 0 {
                let week = cases.first_week + k as u32;
                w.write_record([&week.to_string(), province, &count.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One daily minimum-temperature observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimateRecord {
    pub date: NaiveDate,
    pub patch_id: String,
    pub tmin_f: f64,
}

/// Load `climate.csv` rows.
pub fn load_climate(path: impl AsRef<Path>) -> Result<Vec<ClimateRecord>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &["date", "patch_id", "tmin_f"])?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        let raw_date = field(path, &record, 0, "date")?;
        let date = NaiveDate::parse_from_str(raw_date, "%Y-%m-%d").map_err(|e| {
            parse_error(path, &record, format!("date '{raw_date}': {e}"))
        })?;
        let patch_id = field(path, &record, 1, "patch_id")?.to_string();
        let tmin_f: f64 = parse_field(path, &record, 2, "tmin_f")?;
        out.push(ClimateRecord {
            date,
            patch_id,
            tmin_f,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("climate file has no rows"));
    }
    Ok(out)
}

pub fn write_climate(path: impl AsRef<Path>, records: &[ClimateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["date", "patch_id", "tmin_f"])?;
    for r in records {
        w.write_record([
            &r.date.format("%Y-%m-%d").to_string(),
            &r.patch_id,
            &r.tmin_f.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Group climate records into per-patch series. Day indices count from
/// January 1 of each patch's first observed year, so a calendar-year series
/// lines up with the fixed-phase sine basis.
pub fn climate_series(records: &[ClimateRecord]) -> Result<Vec<TemperatureSeries>> {
    let mut grouped: Vec<(String, Vec<(NaiveDate, f64)>)> = Vec::new();
    for r in records {
        match grouped.iter_mut().find(|(id, _)| id == &r.patch_id) {
            Some((_, rows)) => rows.push((r.date, r.tmin_f)),
            None => grouped.push((r.patch_id.clone(), vec![(r.date, r.tmin_f)])),
        }
    }
    let mut out = Vec::with_capacity(grouped.len());
    for (patch_id, mut rows) in grouped {
        rows.sort_by_key(|(date, _)| *date);
        for w in rows.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Config(format!(
                    "duplicate climate date {} for patch '{patch_id}'",
                    w[0].0
                )));
            }
        }
        let epoch = NaiveDate::from_ymd_opt(rows[0].0.year(), 1, 1).expect("valid year start");
        let days: Vec<f64> = rows
            .iter()
            .map(|(date, _)| (*date - epoch).num_days() as f64)
            .collect();
        let tmin: Vec<f64> = rows.iter().map(|(_, v)| *v).collect();
        out.push(TemperatureSeries::new(patch_id, days, tmin)?);
    }
    Ok(out)
}

/// Write the `patch_id,province_id` membership table.
pub fn write_patch_members(path: impl AsRef<Path>, set: &PatchSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["patch_id", "province_id"])?;
    for patch in &set.patches {
        for member in &patch.members {
            w.write_record([&patch.id, member])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write patch centers and populations.
pub fn write_patch_centers(path: impl AsRef<Path>, set: &PatchSet) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["patch_id", "lat", "lon", "population"])?;
    for patch in &set.patches {
        w.write_record([
            patch.id.as_str(),
            &patch.center_lat.to_string(),
            &patch.center_lon.to_string(),
            &patch.population.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Write a coupling matrix row-major with a header row of patch ids.
pub fn write_coupling_matrix(
    path: impl AsRef<Path>,
    matrix: &CouplingMatrix,
    ids: &[String],
) -> Result<()> {
    if ids.len() != matrix.len() {
        return Err(Error::DimensionMismatch {
            context: "matrix ids",
            expected: matrix.len(),
            actual: ids.len(),
        });
    }
    let mut w = csv::Writer::from_path(path.as_ref())?;
    let mut header = vec!["from_id".to_string()];
    header.extend(ids.iter().cloned());
    w.write_record(&header)?;
    for i in 0..matrix.len() {
        let mut row = vec![ids[i].clone()];
        row.extend(matrix.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Write a weekly series long-format: `week,patch_id,value`.
pub fn write_series(path: impl AsRef<Path>, series: &EpidemicSeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["week", "patch_id", "value"])?;
    for (patch, row) in series.patch_ids.iter().zip(&series.values) {
        for (k, v) in row.iter().enumerate() {
            let week = series.start_week + k as u32;
            w.write_record([&week.to_string(), patch, &v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}
