//! Random variates, the S1-S3 scenario harness and the CAKS-vs-batch benchmark.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::calib::{CalibrationTable, LookupPolicy};
use crate::decide::{check_alpha, ks_asymptotic_tail};
use crate::error::{CaksError, Result};
use crate::ksdist::ks_statistic;
use crate::nulls::NullModel;
use crate::stream::CaksState;

/// Seeded generator. Replicate `r` of a run with master seed `s` uses ChaCha
/// stream `r` under key `s`, so replicates are independent and reproducible in
/// any execution order.
#[derive(Debug, Clone)]
pub struct SimRng {
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        SimRng { rng: ChaCha8Rng::seed_from_u64(seed), spare_normal: None }
    }

    pub fn for_replicate(master_seed: u64, replicate: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(replicate);
        SimRng { rng, spare_normal: None }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform01(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Marsaglia polar method; the second variate of each accepted pair is kept
    /// for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform01() - 1.0;
            let v = 2.0 * self.uniform01() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare_normal = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn normal(&mut self, mean: f64, sd: f64) -> Result<f64> {
        if !(sd > 0.0 && sd.is_finite()) || !mean.is_finite() {
            return Err(CaksError::InvalidParameter(format!(
                "normal variate needs finite mean and sd > 0, got mean={mean}, sd={sd}"
            )));
        }
        Ok(mean + sd * self.standard_normal())
    }
}

impl rand::RngCore for SimRng {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Law that simulated observations are drawn from.
#[derive(Debug, Clone)]
pub enum DataLaw {
    Uniform01,
    Normal { mean: f64, sd: f64 },
    StudentT(rand_distr::StudentT<f64>),
}

impl DataLaw {
    pub fn from_null(null: &NullModel) -> Result<Self> {
        null.validate()?;
        Ok(match *null {
            NullModel::Uniform01 => DataLaw::Uniform01,
            NullModel::Normal { mean, sd } => DataLaw::Normal { mean, sd },
            NullModel::StudentT { df } => DataLaw::StudentT(
                rand_distr::StudentT::new(df)
                    .map_err(|e| CaksError::InvalidParameter(e.to_string()))?,
            ),
        })
    }

    #[inline]
    pub fn draw(&self, rng: &mut SimRng) -> f64 {
        match self {
            DataLaw::Uniform01 => rng.uniform01(),
            DataLaw::Normal { mean, sd } => mean + sd * rng.standard_normal(),
            DataLaw::StudentT(t) => t.sample(rng),
        }
    }

    pub fn fill(&self, rng: &mut SimRng, out: &mut [f64]) {
        for x in out {
            *x = self.draw(rng);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Mean shift: data `N(mu, 1)` against null `N(0, 1)`.
    S1,
    /// Scale change: data `N(0, sigma^2)` against null `N(0, 1)`.
    S2,
    /// Shape: data `N(0, 1)` against null `t(df)` (forward) or data `t(df)`
    /// against null `N(0, 1)` (reversed).
    S3,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
        })
    }
}

impl FromStr for Scenario {
    type Err = CaksError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s1" => Ok(Scenario::S1),
            "s2" => Ok(Scenario::S2),
            "s3" => Ok(Scenario::S3),
            _ => Err(CaksError::InvalidParameter(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Direction {
    #[default]
    Forward,
    Reversed,
}

impl FromStr for Direction {
    type Err = CaksError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Direction::Forward),
            "reversed" => Ok(Direction::Reversed),
            _ => Err(CaksError::InvalidParameter(format!("unknown direction `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    /// `mu` for S1, `sigma` for S2, `df` for S3.
    pub effect: f64,
    pub t: u64,
    pub j: usize,
    pub replicates: u64,
    pub alpha: f64,
    pub master_seed: u64,
    pub direction: Direction,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, effect: f64, t: u64, j: usize, replicates: u64, master_seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            effect,
            t,
            j,
            replicates,
            alpha: 0.1,
            master_seed,
            direction: Direction::Forward,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 || self.j == 0 || self.replicates == 0 {
            return Err(CaksError::InvalidParameter(
                "T, J and replicates must all be at least 1".into(),
            ));
        }
        check_alpha(self.alpha)?;
        self.laws().map(|_| ())
    }

    /// Data-generating law and null model for this scenario.
    pub fn laws(&self) -> Result<(DataLaw, NullModel)> {
        let e = self.effect;
        let bad = |what: &str| {
            CaksError::InvalidParameter(format!("{} effect must be {what}, got {e}", self.scenario))
        };
        let n01 = NullModel::standard_normal();
        match self.scenario {
            Scenario::S1 if e.is_finite() => Ok((DataLaw::Normal { mean: e, sd: 1.0 }, n01)),
            Scenario::S1 => Err(bad("finite")),
            Scenario::S2 if e > 0.0 && e.is_finite() => Ok((DataLaw::Normal { mean: 0.0, sd: e }, n01)),
            Scenario::S2 => Err(bad("a positive standard deviation")),
            Scenario::S3 if e > 0.0 && e.is_finite() => {
                let t = NullModel::student_t(e)?;
                Ok(match self.direction {
                    Direction::Forward => (DataLaw::Normal { mean: 0.0, sd: 1.0 }, t),
                    Direction::Reversed => (DataLaw::from_null(&t)?, n01),
                })
            }
            Scenario::S3 => Err(bad("positive degrees of freedom")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub spec: ScenarioSpec,
    pub rejections: u64,
    /// Mean per-replicate wall time of the streaming test (ingestion and
    /// report), excluding data generation.
    pub avg_time_seconds: f64,
}

pub const SCENARIO_CSV_HEADER: &str = "scenario,effect,T,J,replicates,alpha,rejections,avg_time_s,seed";

impl ScenarioResult {
    pub fn to_csv_record(&self) -> String {
        let s = &self.spec;
        format!(
            "{},{},{},{},{},{},{},{:.6e},{}",
            s.scenario, s.effect, s.t, s.j, s.replicates, s.alpha, self.rejections,
            self.avg_time_seconds, s.master_seed
        )
    }
}

/// Runs `spec.replicates` independent CAKS tests and counts rejections.
/// Replicates run sequentially so that timings are not distorted by contention.
pub fn run_scenario(
    spec: &ScenarioSpec,
    table: &mut CalibrationTable,
    policy: LookupPolicy,
) -> Result<ScenarioResult> {
    spec.validate()?;
    let (law, null) = spec.laws()?;
    let cal = table.lookup(spec.j, policy)?;
    let mut chunk = vec![0.0; spec.j];
    let mut rejections = 0;
    let mut total = 0.0;
    for r in 0..spec.replicates {
        let mut rng = SimRng::for_replicate(spec.master_seed, r);
        let mut state = CaksState::new(spec.j, null)?;
        for _ in 0..spec.t {
            law.fill(&mut rng, &mut chunk);
            let start = Instant::now();
            state.push(&chunk)?;
            total += start.elapsed().as_secs_f64();
        }
        let start = Instant::now();
        let report = state.report(&cal, spec.alpha)?;
        total += start.elapsed().as_secs_f64();
        if report.reject {
            rejections += 1;
        }
    }
    Ok(ScenarioResult {
        spec: spec.clone(),
        rejections,
        avg_time_seconds: total / spec.replicates as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchResult {
    pub n: usize,
    pub j: usize,
    pub caks_seconds: f64,
    /// Whole-sample KS distance (copy, sort, transform).
    pub batch_stat_seconds: f64,
    /// Asymptotic p-value of the whole-sample statistic.
    pub batch_pvalue_seconds: f64,
    /// Largest CAKS state footprint observed during the pass.
    pub caks_peak_bytes: usize,
}

pub const BENCH_CSV_HEADER: &str = "n,J,caks_s,batch_stat_s,batch_pvalue_s";

impl BenchResult {
    pub fn to_csv_record(&self) -> String {
        format!(
            "{},{},{:.6e},{:.6e},{:.6e}",
            self.n, self.j, self.caks_seconds, self.batch_stat_seconds, self.batch_pvalue_seconds
        )
    }
}

/// Wall time of one streaming pass over `data`, fed in slices of `j`, and the
/// largest state footprint seen along the way.
pub fn time_caks_pass(data: &[f64], j: usize, null: &NullModel) -> Result<(f64, usize)> {
    let mut state = CaksState::new(j, *null)?;
    let mut peak = state.memory_footprint();
    let start = Instant::now();
    for piece in data.chunks(j) {
        state.push(piece)?;
        peak = peak.max(state.memory_footprint());
    }
    let elapsed = start.elapsed().as_secs_f64();
    std::hint::black_box(state.running_mean());
    Ok((elapsed, peak))
}

/// Times CAKS and the batch KS test on the same `n` observations drawn from the
/// null itself.
pub fn benchmark(n: usize, j: usize, null: &NullModel, seed: u64) -> Result<BenchResult> {
    if j == 0 {
        return Err(CaksError::InvalidParameter("chunk size must be at least 1".into()));
    }
    if n < j {
        return Err(CaksError::InvalidParameter(format!(
            "benchmark needs N >= J, got N={n}, J={j}"
        )));
    }
    let law = DataLaw::from_null(null)?;
    let mut rng = SimRng::new(seed);
    let mut data = vec![0.0; n];
    law.fill(&mut rng, &mut data);

    let (caks_seconds, caks_peak_bytes) = time_caks_pass(&data, j, null)?;

    let start = Instant::now();
    let k = ks_statistic(&data, null)?.value();
    let batch_stat_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let p = ks_asymptotic_tail((n as f64).sqrt() * k)?;
    let batch_pvalue_seconds = start.elapsed().as_secs_f64();
    std::hint::black_box(p);

    Ok(BenchResult {
        n,
        j,
        caks_seconds,
        batch_stat_seconds,
        batch_pvalue_seconds,
        caks_peak_bytes,
    })
}
