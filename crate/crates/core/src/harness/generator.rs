use std::collections::{BTreeMap, BTreeSet};

use chrono::{Days, NaiveDate};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::columns::*;
use crate::dataset::CleaningConfig;
use crate::error::{Error, Result};
use crate::rng::{domain, substream, Rng};

/// Proportions of the four credibility codes. C and D rows are planted as
/// a fixed count, `round((c + d) · n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityMix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub n_records: usize,
    pub seed: u64,
    /// Half-width of the uniform multiplicative noise on the defect count.
    pub noise: f64,
    pub size_median: f64,
    pub size_sigma: f64,
    pub density_median: f64,
    pub density_sigma: f64,
    pub effort_median: f64,
    pub effort_sigma: f64,
    /// Correlation of log effort with log size.
    pub size_effort_log_corr: f64,
    /// Log-scale spread of the redundant near-copies of effort and size.
    pub redundant_sigma: f64,
    /// Values for the five freely drawn categorical columns.
    pub vocabularies: BTreeMap<String, Vec<String>>,
    /// Relative size codes, smallest first.
    pub relative_size_labels: Vec<String>,
    /// Size boundaries between consecutive codes.
    pub relative_size_bounds: Vec<f64>,
    /// Missing-cell rate per raw column, applied to rows that are neither
    /// blank-target nor low-quality.
    pub missingness: BTreeMap<String, f64>,
    /// Extra integer columns outside the schema, with their missing rate.
    pub extra_columns: BTreeMap<String, f64>,
    pub blank_target_rate: f64,
    pub quality_mix: QualityMix,
    pub date_start: String,
    pub date_end: String,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_records: 1254,
            seed: 0,
            noise: 0.1,
            size_median: 300.0,
            size_sigma: 0.5,
            density_median: 15.0,
            density_sigma: 0.8,
            effort_median: 2400.0,
            effort_sigma: 0.7,
            size_effort_log_corr: 0.5,
            redundant_sigma: 0.1,
            vocabularies: BTreeMap::from([
                (
                    INDUSTRY_SECTOR.to_string(),
                    strings(&[
                        "Banking",
                        "Communication",
                        "Government",
                        "Insurance",
                        "Manufacturing",
                        "Medical & Health Care",
                        "Service Industry",
                        "Wholesale & Retail",
                    ]),
                ),
                (
                    DEVELOPMENT_TYPE.to_string(),
                    strings(&["Enhancement", "New Development", "Re-development"]),
                ),
                (
                    PRIMARY_LANGUAGE.to_string(),
                    strings(&["Java", "C#", "COBOL", "PL/I", "C++", "JavaScript", "ABAP", "SQL", "Visual Basic"]),
                ),
                (
                    COUNT_APPROACH.to_string(),
                    strings(&["IFPUG 4+", "NESMA", "COSMIC", "FiSMA", "Mark II"]),
                ),
                (FIRST_LANGUAGE.to_string(), strings(&["3GL", "4GL", "ApG", "2GL"])),
            ]),
            relative_size_labels: strings(&["XXS", "XS", "S", "M1", "M2", "L", "XL"]),
            relative_size_bounds: vec![50.0, 100.0, 200.0, 400.0, 800.0, 1600.0],
            missingness: BTreeMap::from([(PRIMARY_LANGUAGE.to_string(), 0.05)]),
            extra_columns: BTreeMap::new(),
            blank_target_rate: 0.0,
            quality_mix: QualityMix { a: 0.7, b: 0.3, c: 0.0, d: 0.0 },
            date_start: "2000-01-01".to_string(),
            date_end: "2020-12-31".to_string(),
        }
    }
}

/// Columns that may carry planted missing cells.
const MISSABLE: [&str; 11] = [
    INDUSTRY_SECTOR,
    DEVELOPMENT_TYPE,
    PRIMARY_LANGUAGE,
    COUNT_APPROACH,
    FUNCTIONAL_SIZE,
    RELATIVE_SIZE,
    NORMALISED_EFFORT,
    SUMMARISED_EFFORT,
    ADJUSTED_FP,
    DEFECT_DENSITY,
    FIRST_LANGUAGE,
];

const DRAWN: [&str; 5] = [INDUSTRY_SECTOR, DEVELOPMENT_TYPE, PRIMARY_LANGUAGE, COUNT_APPROACH, FIRST_LANGUAGE];

fn rate_ok(name: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} {r} not in [0, 1]")))
    }
}

fn parse_day(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| Error::Config(format!("`{s}` is not a YYYY-MM-DD date")))
}

fn planted_count(rate: f64, n: usize) -> usize {
    (rate * n as f64).round() as usize
}

impl GeneratorConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: GeneratorConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = crate::io::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Config("config is not UTF-8".into()).in_file(path))?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_records == 0 {
            return Err(Error::Config("n_records must be at least 1".into()));
        }
        rate_ok("noise", self.noise)?;
        rate_ok("blank_target_rate", self.blank_target_rate)?;
        let q = &self.quality_mix;
        for (name, v) in [("quality_mix.a", q.a), ("quality_mix.b", q.b), ("quality_mix.c", q.c), ("quality_mix.d", q.d)] {
            rate_ok(name, v)?;
        }
        if q.a + q.b <= 0.0 || (q.a + q.b + q.c + q.d - 1.0).abs() > 1e-9 {
            return Err(Error::Config("quality_mix must sum to 1 with a + b > 0".into()));
        }
        for (name, v) in [
            ("size_median", self.size_median),
            ("density_median", self.density_median),
            ("effort_median", self.effort_median),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("size_sigma", self.size_sigma),
            ("density_sigma", self.density_sigma),
            ("effort_sigma", self.effort_sigma),
            ("redundant_sigma", self.redundant_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!("{name} must be nonnegative")));
            }
        }
        if !(-1.0..=1.0).contains(&self.size_effort_log_corr) {
            return Err(Error::Config("size_effort_log_corr not in [-1, 1]".into()));
        }
        for col in DRAWN {
            match self.vocabularies.get(col) {
                Some(v) if !v.is_empty() => {}
                _ => return Err(Error::Config(format!("vocabulary for `{col}` is empty"))),
            }
        }
        if let Some(extra) = self.vocabularies.keys().find(|k| !DRAWN.contains(&k.as_str())) {
            return Err(Error::Config(format!("no drawn categorical column `{extra}`")));
        }
        if self.relative_size_labels.len() != self.relative_size_bounds.len() + 1 {
            return Err(Error::Config("relative_size_labels needs one more entry than relative_size_bounds".into()));
        }
        if self.relative_size_bounds.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("relative_size_bounds must increase".into()));
        }
        for (col, &r) in &self.missingness {
            if !MISSABLE.contains(&col.as_str()) {
                return Err(Error::Config(format!("missingness cannot be planted in `{col}`")));
            }
            rate_ok(&format!("missingness of `{col}`"), r)?;
        }
        for (col, &r) in &self.extra_columns {
            if RAW_COLUMNS.contains(&col.as_str()) {
                return Err(Error::Config(format!("extra column `{col}` clashes with a raw column")));
            }
            rate_ok(&format!("missingness of `{col}`"), r)?;
        }
        let start = parse_day(&self.date_start)?;
        let end = parse_day(&self.date_end)?;
        if start > end {
            return Err(Error::Config("date_start is after date_end".into()));
        }
        if self.blanks() + self.low_quality() > self.n_records {
            return Err(Error::Config("blank-target and low-quality rows exceed n_records".into()));
        }
        Ok(())
    }

    fn blanks(&self) -> usize {
        planted_count(self.blank_target_rate, self.n_records)
    }

    fn low_quality(&self) -> usize {
        planted_count(self.quality_mix.c + self.quality_mix.d, self.n_records)
    }

    fn relative_size(&self, size: f64) -> &str {
        let k = self.relative_size_bounds.iter().take_while(|&&b| size >= b).count();
        &self.relative_size_labels[k]
    }
}

/// Raw export layout written by the generator, before any extra columns.
const RAW_COLUMNS: [&str; 16] = [
    PROJECT_ID,
    INDUSTRY_SECTOR,
    DEVELOPMENT_TYPE,
    PRIMARY_LANGUAGE,
    COUNT_APPROACH,
    FUNCTIONAL_SIZE,
    RELATIVE_SIZE,
    NORMALISED_EFFORT,
    SUMMARISED_EFFORT,
    ADJUSTED_FP,
    DEFECT_DENSITY,
    FIRST_LANGUAGE,
    IMPLEMENTATION_DATE,
    DATA_QUALITY_RATING,
    UFP_RATING,
    TOTAL_DEFECTS,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Planted {
    pub blank_targets: usize,
    /// Rows with a C or D in at least one rating column.
    pub low_quality_rows: usize,
    /// Missing cells per column, all on otherwise clean rows.
    pub missing_cells: BTreeMap<String, usize>,
    /// Near-copies of other numeric columns.
    pub redundant_columns: Vec<String>,
}

/// What the default cleaning configuration should observe on this file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedCleaning {
    pub rows_after_target: usize,
    pub rows_after_quality: usize,
    pub filled_cells: BTreeMap<String, usize>,
    pub sparse_columns: Vec<String>,
    /// Distinct rows dropped for missing cells.
    pub rows_with_missing: usize,
    pub clean_rows: usize,
}

/// Population correlations implied by the generating distributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticCorrelations {
    pub density_defects: f64,
    pub size_defects: f64,
    pub size_effort: f64,
    /// Half-width of the acceptance band for a sample correlation.
    pub band_half_width: f64,
}

impl AnalyticCorrelations {
    pub fn contains(&self, expected: f64, observed: f64) -> bool {
        (observed - expected).abs() <= self.band_half_width
    }
}

/// Sidecar written next to a generated file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub n_records: usize,
    pub seed: u64,
    pub columns: Vec<String>,
    pub planted: Planted,
    pub expected: ExpectedCleaning,
    pub analytic: AnalyticCorrelations,
    pub config: GeneratorConfig,
}

impl GroundTruth {
    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut b = serde_json::to_vec_pretty(self)?;
        b.push(b'\n');
        Ok(b)
    }
}

pub struct Generated {
    pub csv: Vec<u8>,
    pub truth: GroundTruth,
}

impl Generated {
    /// Sidecar location for a data file: `data.csv` → `data.truth.json`.
    pub fn sidecar_path(csv_path: &std::path::Path) -> std::path::PathBuf {
        let stem = csv_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        csv_path.with_file_name(format!("{stem}.truth.json"))
    }

    /// Writes the CSV and its sidecar; returns the sidecar path.
    pub fn save(&self, csv_path: &std::path::Path) -> Result<std::path::PathBuf> {
        let sidecar = Self::sidecar_path(csv_path);
        crate::io::write_atomic(csv_path, &self.csv)?;
        crate::io::write_atomic(&sidecar, &self.truth.to_json()?)?;
        Ok(sidecar)
    }
}

fn analytic(config: &GeneratorConfig) -> AnalyticCorrelations {
    let a = config.density_sigma.powi(2).exp();
    let b = config.size_sigma.powi(2).exp();
    let c = 1.0 + config.noise * config.noise / 3.0;
    let denom = a * b * c - 1.0;
    let corr = |num: f64| if denom > 0.0 { (num / denom).sqrt() } else { 0.0 };
    let cov_se = (config.size_effort_log_corr * config.size_sigma * config.effort_sigma).exp() - 1.0;
    let var_se = (b - 1.0) * (config.effort_sigma.powi(2).exp() - 1.0);
    AnalyticCorrelations {
        density_defects: corr(a - 1.0),
        size_defects: corr(b - 1.0),
        size_effort: if var_se > 0.0 { cov_se / var_se.sqrt() } else { 0.0 },
        // heavy log-normal tails: about four standard errors at n = 5000
        band_half_width: 4.5 / (config.n_records as f64).sqrt(),
    }
}

fn normal(rng: &mut Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn round_to(v: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (v * s).round() / s
}

fn fmt_num(v: f64) -> String {
    v.to_string()
}

fn distinct_rows(rng: &mut Rng, pool: &[usize], k: usize) -> Vec<usize> {
    pool.choose_multiple(rng, k).copied().collect()
}

/// Builds a raw project table with planted defects and its ground truth.
pub fn generate_dataset(config: &GeneratorConfig) -> Result<Generated> {
    config.validate()?;
    let n = config.n_records;
    let start = parse_day(&config.date_start)?;
    let span = (parse_day(&config.date_end)? - start).num_days() as u64;
    let mut rng = substream(config.seed, domain::GENERATOR, 0);

    let mut columns: Vec<String> = RAW_COLUMNS[..RAW_COLUMNS.len() - 1].iter().map(|s| s.to_string()).collect();
    columns.extend(config.extra_columns.keys().cloned());
    columns.push(TOTAL_DEFECTS.to_string());
    let col = |name: &str| columns.iter().position(|c| c == name).unwrap();

    let rho = config.size_effort_log_corr;
    let mut rows: Vec<Vec<Option<String>>> = Vec::with_capacity(n);
    for i in 0..n {
        let zs = normal(&mut rng);
        let zd = normal(&mut rng);
        let ze = normal(&mut rng);
        let size = (config.size_median.ln() + config.size_sigma * zs).exp().round().max(1.0);
        let density = round_to((config.density_median.ln() + config.density_sigma * zd).exp(), 2);
        let log_effort = config.effort_median.ln() + config.effort_sigma * (rho * zs + (1.0 - rho * rho).sqrt() * ze);
        let effort = log_effort.exp().round().max(1.0);
        let summarised = (effort * (config.redundant_sigma * normal(&mut rng)).exp()).round().max(1.0);
        let adjusted = (size * (config.redundant_sigma * normal(&mut rng)).exp()).round().max(1.0);
        let eps = if config.noise > 0.0 { rng.random_range(-config.noise..=config.noise) } else { 0.0 };
        let defects = (density * size / 1000.0 * (1.0 + eps)).round();
        let date = start + Days::new(rng.random_range(0..=span));

        let mut row = vec![None; columns.len()];
        row[col(PROJECT_ID)] = Some(format!("P{:05}", i + 1));
        for name in DRAWN {
            row[col(name)] = config.vocabularies[name].choose(&mut rng).cloned();
        }
        row[col(FUNCTIONAL_SIZE)] = Some(fmt_num(size));
        row[col(RELATIVE_SIZE)] = Some(config.relative_size(size).to_string());
        row[col(NORMALISED_EFFORT)] = Some(fmt_num(effort));
        row[col(SUMMARISED_EFFORT)] = Some(fmt_num(summarised));
        row[col(ADJUSTED_FP)] = Some(fmt_num(adjusted));
        row[col(DEFECT_DENSITY)] = Some(fmt_num(density));
        row[col(IMPLEMENTATION_DATE)] = Some(date.format("%Y-%m-%d").to_string());
        for name in config.extra_columns.keys() {
            row[col(name)] = Some(rng.random_range(1..=40u32).to_string());
        }
        row[col(TOTAL_DEFECTS)] = Some(fmt_num(defects));
        rows.push(row);
    }

    // planting: blank targets, low-quality rows and missing cells sit on
    // disjoint rows so every count survives cleaning unchanged
    let mut plant = substream(config.seed, domain::GENERATOR, 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut plant);
    let n_blank = config.blanks();
    let n_low = config.low_quality();
    let (blank, rest) = order.split_at(n_blank);
    let (low, clean) = rest.split_at(n_low);
    let low_set: BTreeSet<usize> = low.iter().copied().collect();
    let mut clean_pool = clean.to_vec();
    clean_pool.sort_unstable();

    let q = &config.quality_mix;
    let (dq, ufp) = (col(DATA_QUALITY_RATING), col(UFP_RATING));
    for (i, row) in rows.iter_mut().enumerate() {
        let mut good = || if q.b > 0.0 && plant.random::<f64>() * (q.a + q.b) >= q.a { "B" } else { "A" };
        let (r1, r2) = (good(), good());
        row[dq] = Some(r1.to_string());
        row[ufp] = Some(r2.to_string());
        if low_set.contains(&i) {
            let bad = if plant.random::<f64>() * (q.c + q.d) < q.c { "C" } else { "D" };
            match plant.random_range(0..3u8) {
                0 => row[dq] = Some(bad.to_string()),
                1 => row[ufp] = Some(bad.to_string()),
                _ => {
                    row[dq] = Some(bad.to_string());
                    row[ufp] = Some(bad.to_string());
                }
            }
        }
    }
    let target = col(TOTAL_DEFECTS);
    for &i in blank {
        rows[i][target] = None;
    }

    let cleaning = CleaningConfig::default();
    let n_clean = clean_pool.len();
    let mut missing_cells = BTreeMap::new();
    let mut filled_cells = BTreeMap::new();
    let mut sparse_columns = Vec::new();
    let mut dropped_rows = BTreeSet::new();
    let rates = config.missingness.iter().chain(&config.extra_columns);
    for (name, &rate) in rates {
        let k = planted_count(rate, n_clean);
        if k == 0 {
            continue;
        }
        let j = col(name);
        let hit = distinct_rows(&mut plant, &clean_pool, k);
        for &i in &hit {
            rows[i][j] = None;
        }
        missing_cells.insert(name.clone(), k);
        if cleaning.fill_values.contains_key(name) {
            filled_cells.insert(name.clone(), k);
        } else if k as f64 / n_clean as f64 > cleaning.sparse_threshold {
            sparse_columns.push(name.clone());
        } else {
            dropped_rows.extend(hit);
        }
    }
    for fill in cleaning.fill_values.keys() {
        filled_cells.entry(fill.clone()).or_insert(0);
    }

    let mut w = crate::io::csv_writer();
    w.write_record(&columns)?;
    for row in &rows {
        w.write_record(row.iter().map(|c| c.as_deref().unwrap_or("")))?;
    }
    let csv = crate::io::csv_finish(w)?;

    let truth = GroundTruth {
        n_records: n,
        seed: config.seed,
        columns,
        planted: Planted {
            blank_targets: n_blank,
            low_quality_rows: n_low,
            missing_cells,
            redundant_columns: vec![SUMMARISED_EFFORT.to_string(), ADJUSTED_FP.to_string()],
        },
        expected: ExpectedCleaning {
            rows_after_target: n - n_blank,
            rows_after_quality: n_clean,
            filled_cells,
            sparse_columns,
            rows_with_missing: dropped_rows.len(),
            clean_rows: n_clean - dropped_rows.len(),
        },
        analytic: analytic(config),
        config: config.clone(),
    };
    Ok(Generated { csv, truth })
}
