//! Decision layer: the CAKS Z statistic and p-value, the batch KS reference
//! test, and the shared report type.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::calib::Calibration;
use crate::error::{CaksError, Result};
use crate::ksdist::ks_statistic;
use crate::nulls::{std_normal_cdf, NullModel};

const TAIL_TERM_EPS: f64 = 1e-12;
const TAIL_MAX_TERMS: usize = 1000;
// Below this the alternating series needs many terms; the theta-function dual
// form converges in a handful.
const TAIL_DUAL_BELOW: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CAKS")]
    Caks,
    #[serde(rename = "BatchKS")]
    BatchKs,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Caks => "CAKS",
            Method::BatchKs => "BatchKS",
        })
    }
}

/// Outcome of a goodness-of-fit test.
///
/// `statistic` is the Z score for CAKS and `sqrt(N) * K` for the batch test.
/// `reject` always equals `!(p_value > alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub method: Method,
    pub statistic: f64,
    pub p_value: f64,
    pub alpha: f64,
    pub reject: bool,
    #[serde(rename = "T")]
    pub t: Option<u64>,
    #[serde(rename = "J")]
    pub j: Option<usize>,
    pub n_used: u64,
    pub n_discarded: u64,
    pub warnings: Vec<String>,
}

pub const CSV_HEADER: &str = "method,statistic,p_value,alpha,reject,T,J,n_used,n_discarded,warnings";

impl TestReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    /// One CSV record matching [`CSV_HEADER`]; warnings are `;`-joined.
    pub fn to_csv_record(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let warnings = self.warnings.join("; ").replace('"', "'");
        format!(
            "{},{},{},{},{},{},{},{},{},\"{}\"",
            self.method,
            self.statistic,
            self.p_value,
            self.alpha,
            self.reject,
            opt(self.t.map(|t| t.to_string())),
            opt(self.j.map(|j| j.to_string())),
            self.n_used,
            self.n_discarded,
            warnings
        )
    }
}

impl fmt::Display for TestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self.method {
            Method::Caks => "z",
            Method::BatchKs => "sqrt(N)*K",
        };
        writeln!(f, "method:      {}", self.method)?;
        writeln!(f, "{:<12} {}", format!("{label}:"), self.statistic)?;
        writeln!(f, "p_value:     {}", self.p_value)?;
        writeln!(f, "alpha:       {}", self.alpha)?;
        let decision = if self.reject { "reject H0" } else { "fail to reject H0" };
        writeln!(f, "decision:    {decision}")?;
        if let Some(t) = self.t {
            writeln!(f, "T:           {t}")?;
        }
        if let Some(j) = self.j {
            writeln!(f, "J:           {j}")?;
        }
        writeln!(f, "n_used:      {}", self.n_used)?;
        write!(f, "n_discarded: {}", self.n_discarded)?;
        for w in &self.warnings {
            write!(f, "\nwarning:     {w}")?;
        }
        Ok(())
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CaksError::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// Rejects unless `p_value > alpha`; a p-value equal to alpha rejects.
#[inline]
pub fn rejects(p_value: f64, alpha: f64) -> bool {
    !(p_value > alpha)
}

/// `sqrt(T) * (theta_bar - mu_J) / sigma_J`.
pub fn caks_z(theta_bar: f64, t: u64, cal: &Calibration) -> Result<f64> {
    if t == 0 {
        return Err(CaksError::NoCompleteChunk);
    }
    if !(cal.sigma2_j > 0.0) {
        return Err(CaksError::InvalidParameter(format!(
            "calibration variance must be positive, got {}",
            cal.sigma2_j
        )));
    }
    Ok((t as f64).sqrt() * (theta_bar - cal.mu_j) / cal.sigma2_j.sqrt())
}

/// One-sided upper-tail p-value `1 - Phi(z)`.
pub fn caks_pvalue(z: f64) -> Result<f64> {
    std_normal_cdf(-z)
}

/// Asymptotic Kolmogorov tail `P(sqrt(N) K > k) = 2 sum_{j>=1} (-1)^{j+1} exp(-2 j^2 k^2)`.
///
/// The alternating series is truncated once the next term drops below 1e-12 (at
/// most 1000 terms). For `k < 0.2` the equivalent dual series
/// `1 - sqrt(2 pi)/k sum exp(-(2j-1)^2 pi^2 / (8 k^2))` is used instead. The
/// result is clamped to `[0, 1]`. This is the limiting law only; finite-N
/// accuracy is poor for small samples.
pub fn ks_asymptotic_tail(k: f64) -> Result<f64> {
    if !(k > 0.0) {
        return Err(CaksError::InvalidParameter(format!(
            "Kolmogorov tail needs k > 0, got {k}"
        )));
    }
    if k.is_infinite() {
        return Ok(0.0);
    }
    let p = if k < TAIL_DUAL_BELOW {
        let c = std::f64::consts::PI.powi(2) / (8.0 * k * k);
        let mut sum = 0.0;
        for j in 1..=TAIL_MAX_TERMS {
            let m = (2 * j - 1) as f64;
            let term = (-m * m * c).exp();
            sum += term;
            if term < TAIL_TERM_EPS * sum.max(f64::MIN_POSITIVE) {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / k * sum
    } else {
        let mut sum = 0.0;
        for j in 1..=TAIL_MAX_TERMS {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * k * k).exp();
            sum += if j % 2 == 1 { term } else { -term };
            let next = (-2.0 * (jf + 1.0) * (jf + 1.0) * k * k).exp();
            if next < TAIL_TERM_EPS {
                break;
            }
        }
        2.0 * sum
    };
    Ok(p.clamp(0.0, 1.0))
}

/// Classical one-sample KS test on the whole sample, with the asymptotic p-value.
pub fn batch_ks_test(data: &[f64], null: &NullModel, alpha: f64) -> Result<TestReport> {
    check_alpha(alpha)?;
    let k = ks_statistic(data, null)?.value();
    let n = data.len();
    let statistic = (n as f64).sqrt() * k;
    let p_value = ks_asymptotic_tail(statistic)?;
    Ok(TestReport {
        method: Method::BatchKs,
        statistic,
        p_value,
        alpha,
        reject: rejects(p_value, alpha),
        t: None,
        j: None,
        n_used: n as u64,
        n_discarded: 0,
        warnings: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cal(mu: f64, s2: f64) -> Calibration {
        Calibration { j: 100, mu_j: mu, sigma2_j: s2, replicates: 0, seed: None }
    }

    #[test]
    fn z_examples() {
        assert_eq!(caks_z(0.3, 10, &cal(0.3, 0.01)).unwrap(), 0.0);
        assert!((caks_z(0.6, 4, &cal(0.5, 0.01)).unwrap() - 2.0).abs() < 1e-12);
        let table = cal(0.8525199 / 10.0, 0.06734524 / 100.0);
        assert_eq!(caks_z(table.mu_j, 100, &table).unwrap(), 0.0);
        assert!(caks_z(0.5, 4, &cal(0.5, 0.0)).is_err());
        assert!(caks_z(0.5, 0, &cal(0.5, 0.1)).is_err());
    }

    #[test]
    fn pvalue_examples() {
        assert_eq!(caks_pvalue(0.0).unwrap(), 0.5);
        assert!((caks_pvalue(2.0).unwrap() - 0.0227501319481792).abs() < 1e-12);
        assert!((caks_pvalue(-3.0).unwrap() - 0.9986501019683699).abs() < 1e-12);
        for i in 0..100 {
            let z = i as f64 * 0.1;
            let s = caks_pvalue(z).unwrap() + caks_pvalue(-z).unwrap();
            assert!((s - 1.0).abs() <= 1e-12);
        }
    }

    // Plain partial sums of the alternating series, carried far past convergence.
    fn tail_oracle(k: f64) -> f64 {
        (1..=200)
            .map(|j| {
                let s = if j % 2 == 1 { 1.0 } else { -1.0 };
                s * 2.0 * (-2.0 * (j * j) as f64 * k * k).exp()
            })
            .sum()
    }

    #[test]
    fn tail_examples() {
        assert!(ks_asymptotic_tail(10.0).unwrap() < 1e-80);
        assert!((ks_asymptotic_tail(1.3581).unwrap() - 0.05).abs() < 5e-4);
        assert!((ks_asymptotic_tail(0.5).unwrap() - 0.96395).abs() < 1e-4);
        for k in [0.3, 0.5, 0.8, 1.0, 1.36, 2.0] {
            assert!((ks_asymptotic_tail(k).unwrap() - tail_oracle(k)).abs() < 1e-11, "k={k}");
        }
        assert!(ks_asymptotic_tail(0.0).is_err());
        assert!(ks_asymptotic_tail(-1.0).is_err());
        assert!(ks_asymptotic_tail(f64::NAN).is_err());
    }

    #[test]
    fn tail_forms_agree_at_switch() {
        // both representations evaluated around the switch point
        for k in [0.15, 0.19, 0.21, 0.25] {
            let dual = {
                let c = std::f64::consts::PI.powi(2) / (8.0 * k * k);
                let s: f64 = (1..50).map(|j| (-((2 * j - 1) as f64).powi(2) * c).exp()).sum();
                1.0 - (2.0 * std::f64::consts::PI).sqrt() / k * s
            };
            assert!((dual - tail_oracle(k)).abs() < 1e-10, "k={k}");
            assert!((ks_asymptotic_tail(k).unwrap() - dual).abs() < 1e-10);
        }
        assert_eq!(ks_asymptotic_tail(1e-3).unwrap(), 1.0);
    }

    #[test]
    fn tail_monotone() {
        let mut prev = 1.0;
        for i in 0..=2700 {
            let k = 0.3 + i as f64 * 0.001;
            let p = ks_asymptotic_tail(k).unwrap();
            assert!(p < prev, "k={k}");
            prev = p;
        }
    }

    #[test]
    fn decision_boundary() {
        assert!(rejects(0.1, 0.1));
        assert!(rejects(0.05, 0.1));
        assert!(!rejects(0.1000000001, 0.1));
        assert!(rejects(f64::NAN, 0.1));
    }

    #[test]
    fn batch_single_point() {
        let r = batch_ks_test(&[0.5], &NullModel::Uniform01, 0.1).unwrap();
        assert_eq!(r.statistic, 0.5);
        assert!((r.p_value - 0.96395).abs() < 1e-4);
        assert!(!r.reject);
        assert_eq!(r.method, Method::BatchKs);
        assert!(batch_ks_test(&[], &NullModel::Uniform01, 0.1).is_err());
        assert!(batch_ks_test(&[0.5], &NullModel::Uniform01, 1.0).is_err());
    }

    #[test]
    fn report_serialization() {
        let r = TestReport {
            method: Method::Caks,
            statistic: 2.0,
            p_value: 0.02,
            alpha: 0.1,
            reject: true,
            t: Some(4),
            j: Some(100),
            n_used: 400,
            n_discarded: 3,
            warnings: vec!["x".into()],
        };
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        for key in CSV_HEADER.split(',') {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["method"], "CAKS");
        assert_eq!(v["T"], 4);
        let back: TestReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert_eq!(r.to_csv_record(), "CAKS,2,0.02,0.1,true,4,100,400,3,\"x\"");
        assert!(r.to_string().contains("reject H0"));
    }
}
