//! Null chunk moments `(mu_J, sigma2_J)` of the KS distance.
//!
//! The null law of the chunk distance does not depend on the (continuous) null
//! model, so every calibration is done against `Uniform(0,1)` samples.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{CaksError, Result};
use crate::ksdist::ks_uniform_trusted;
use crate::sim::SimRng;

/// Published scaled moments `(J, sqrt(J) * mu_J, J * sigma2_J)`, each from 10^6
/// Monte Carlo replicates.
const TABLE: [(usize, f64, f64); 13] = [
    (100, 0.8525199, 0.06734524),
    (200, 0.8567999, 0.06759134),
    (500, 0.8613619, 0.06758775),
    (1_000, 0.8638072, 0.06768931),
    (2_000, 0.8649057, 0.06747976),
    (5_000, 0.8661168, 0.06769269),
    (10_000, 0.8670493, 0.06772049),
    (20_000, 0.8674296, 0.06777601),
    (50_000, 0.8679541, 0.06782049),
    (100_000, 0.8683573, 0.06788714),
    (200_000, 0.8684477, 0.06780899),
    (500_000, 0.8685257, 0.06765810),
    (1_000_000, 0.8685212, 0.06787872),
];

const TABLE_REPLICATES: u64 = 1_000_000;

/// Limits of `sqrt(J) * mu_J` and `J * sigma2_J` as `J -> inf`; numerically
/// `sqrt(pi/2) ln 2` and `pi^2/12 - (pi/2) (ln 2)^2`.
pub const ASYMPTOTIC_SCALED_MEAN: f64 = 0.8687312;
pub const ASYMPTOTIC_SCALED_VARIANCE: f64 = 0.0677732;

pub const CSV_HEADER: &str = "J,mu_J,sigma2_J,replicates,seed";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    #[serde(rename = "J")]
    pub j: usize,
    #[serde(rename = "mu_J")]
    pub mu_j: f64,
    #[serde(rename = "sigma2_J")]
    pub sigma2_j: f64,
    /// 0 marks analytic or interpolated entries.
    pub replicates: u64,
    pub seed: Option<u64>,
}

impl Calibration {
    pub fn scaled_mean(&self) -> f64 {
        (self.j as f64).sqrt() * self.mu_j
    }

    pub fn scaled_variance(&self) -> f64 {
        self.j as f64 * self.sigma2_j
    }

    fn from_scaled(j: usize, scaled_mean: f64, scaled_variance: f64, replicates: u64) -> Self {
        Calibration {
            j,
            mu_j: scaled_mean / (j as f64).sqrt(),
            sigma2_j: scaled_variance / j as f64,
            replicates,
            seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let lo = 0.5 / self.j.max(1) as f64;
        if self.j == 0 || !(self.mu_j > lo && self.mu_j < 1.0) || !(self.sigma2_j > 0.0) {
            return Err(CaksError::CalibrationFile(format!(
                "invalid calibration row J={}, mu_J={}, sigma2_J={}",
                self.j, self.mu_j, self.sigma2_j
            )));
        }
        Ok(())
    }
}

/// Monte Carlo moments of the chunk KS distance for `replicates` uniform samples
/// of size `j`. Replicate `r` draws from its own generator seeded from
/// `(seed, r)`, and the moments are accumulated in replicate order, so the
/// result is a pure function of the arguments.
pub fn calibrate(j: usize, replicates: u64, seed: u64) -> Result<Calibration> {
    if j == 0 {
        return Err(CaksError::InvalidParameter("chunk size must be at least 1".into()));
    }
    if replicates < 2 {
        return Err(CaksError::InvalidParameter(format!(
            "calibration needs at least 2 replicates, got {replicates}"
        )));
    }
    let mut sample = vec![0.0; j];
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for r in 0..replicates {
        let mut rng = SimRng::for_replicate(seed, r);
        for u in sample.iter_mut() {
            *u = rng.uniform01();
        }
        sample.sort_unstable_by(f64::total_cmp);
        let k = ks_uniform_trusted(&sample).value();
        // Welford
        let n = (r + 1) as f64;
        let delta = k - mean;
        mean += delta / n;
        m2 += delta * (k - mean);
    }
    Ok(Calibration {
        j,
        mu_j: mean,
        sigma2_j: m2 / (replicates - 1) as f64,
        replicates,
        seed: Some(seed),
    })
}

/// The 13 tabulated finite-`J` rows, increasing in `J`.
pub fn builtin_table() -> Vec<Calibration> {
    TABLE
        .iter()
        .map(|&(j, m, v)| Calibration::from_scaled(j, m, v, TABLE_REPLICATES))
        .collect()
}

pub fn asymptotic_moments() -> (f64, f64) {
    (ASYMPTOTIC_SCALED_MEAN, ASYMPTOTIC_SCALED_VARIANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LookupPolicy {
    ExactOnly,
    /// Run [`calibrate`] on a miss and cache the result in the table.
    CalibrateOnMiss { replicates: u64, seed: u64 },
    /// Approximate: linear in `1/sqrt(J)` for the scaled mean and in `1/J` for
    /// the scaled variance between bracketing rows, with the asymptotic limits
    /// standing in for `J = inf`. Exploratory use only.
    Interpolate,
}

/// A set of calibrations keyed by `J`, kept sorted.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CalibrationTable {
    entries: Vec<Calibration>,
}

impl CalibrationTable {
    pub fn new(mut entries: Vec<Calibration>) -> Self {
        entries.sort_by_key(|c| c.j);
        entries.dedup_by_key(|c| c.j);
        CalibrationTable { entries }
    }

    pub fn builtin() -> Self {
        CalibrationTable::new(builtin_table())
    }

    pub fn entries(&self) -> &[Calibration] {
        &self.entries
    }

    pub fn get(&self, j: usize) -> Option<&Calibration> {
        self.entries
            .binary_search_by_key(&j, |c| c.j)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn insert(&mut self, cal: Calibration) {
        match self.entries.binary_search_by_key(&cal.j, |c| c.j) {
            Ok(i) => self.entries[i] = cal,
            Err(i) => self.entries.insert(i, cal),
        }
    }

    pub fn lookup(&mut self, j: usize, policy: LookupPolicy) -> Result<Calibration> {
        if j == 0 {
            return Err(CaksError::InvalidParameter("chunk size must be at least 1".into()));
        }
        if let Some(c) = self.get(j) {
            return Ok(c.clone());
        }
        match policy {
            LookupPolicy::ExactOnly => Err(CaksError::NoCalibration(j)),
            LookupPolicy::CalibrateOnMiss { replicates, seed } => {
                let cal = calibrate(j, replicates, seed)?;
                self.insert(cal.clone());
                Ok(cal)
            }
            LookupPolicy::Interpolate => self.interpolate(j),
        }
    }

    fn interpolate(&self, j: usize) -> Result<Calibration> {
        let i = self.entries.partition_point(|c| c.j < j);
        if i == 0 {
            return Err(CaksError::NoCalibration(j));
        }
        let (lo, hi) = (&self.entries[i - 1], self.entries.get(i));
        let x = |j: usize| 1.0 / (j as f64).sqrt();
        let (hi_x_mean, hi_mean, hi_x_var, hi_var) = match hi {
            Some(h) => (x(h.j), h.scaled_mean(), 1.0 / h.j as f64, h.scaled_variance()),
            None => (0.0, ASYMPTOTIC_SCALED_MEAN, 0.0, ASYMPTOTIC_SCALED_VARIANCE),
        };
        let lerp = |x0: f64, y0: f64, x1: f64, y1: f64, at: f64| y0 + (y1 - y0) * (at - x0) / (x1 - x0);
        let mean = lerp(x(lo.j), lo.scaled_mean(), hi_x_mean, hi_mean, x(j));
        let var = lerp(1.0 / lo.j as f64, lo.scaled_variance(), hi_x_var, hi_var, 1.0 / j as f64);
        Ok(Calibration::from_scaled(j, mean, var, 0))
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes calibrations as CSV under [`CSV_HEADER`], 17 significant digits.
pub fn write_csv<W: Write>(out: W, rows: &[Calibration]) -> Result<()> {
    let io = |e: csv::Error| CaksError::CalibrationFile(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for c in rows {
        w.write_record([
            c.j.to_string(),
            fmt_f64(c.mu_j),
            fmt_f64(c.sigma2_j),
            c.replicates.to_string(),
            c.seed.map(|s| s.to_string()).unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| CaksError::CalibrationFile(e.to_string()))
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<Calibration>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| CaksError::CalibrationFile(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER.split(',').collect::<Vec<_>>() {
        return Err(CaksError::CalibrationFile(format!(
            "expected header `{CSV_HEADER}`"
        )));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<Calibration>() {
        let cal = rec.map_err(|e| CaksError::CalibrationFile(e.to_string()))?;
        cal.validate()?;
        rows.push(cal);
    }
    Ok(rows)
}
