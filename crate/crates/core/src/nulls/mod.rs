//! Null distribution models.

mod special;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CaksError, Result};

pub use special::{regularized_incomplete_beta, std_normal_cdf, student_t_cdf};

/// Hypothesized continuous distribution `F`.
///
/// Text syntax: `uniform`, `normal:<mean>,<sd>`, `t:<df>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NullModel {
    Uniform01,
    Normal { mean: f64, sd: f64 },
    StudentT { df: f64 },
}

impl NullModel {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !(sd > 0.0 && sd.is_finite()) {
            return Err(CaksError::InvalidParameter(format!(
                "normal null needs finite mean and sd > 0, got mean={mean}, sd={sd}"
            )));
        }
        Ok(NullModel::Normal { mean, sd })
    }

    pub fn standard_normal() -> Self {
        NullModel::Normal { mean: 0.0, sd: 1.0 }
    }

    pub fn student_t(df: f64) -> Result<Self> {
        if !(df > 0.0 && df.is_finite()) {
            return Err(CaksError::InvalidParameter(format!(
                "Student-t null needs df > 0, got {df}"
            )));
        }
        Ok(NullModel::StudentT { df })
    }

    /// Checks the parameter invariants of a model built by hand.
    pub fn validate(&self) -> Result<()> {
        match *self {
            NullModel::Uniform01 => Ok(()),
            NullModel::Normal { mean, sd } => NullModel::normal(mean, sd).map(|_| ()),
            NullModel::StudentT { df } => NullModel::student_t(df).map(|_| ()),
        }
    }

    /// `F(x)`. Errors on non-finite `x`.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(CaksError::NonFinite { index: 0, value: x });
        }
        self.cdf_finite(x)
    }

    /// `F(x)` for an `x` already known to be finite.
    #[inline]
    pub(crate) fn cdf_finite(&self, x: f64) -> Result<f64> {
        match *self {
            NullModel::Uniform01 => Ok(x.clamp(0.0, 1.0)),
            NullModel::Normal { mean, sd } => Ok(special::std_normal_cdf_raw((x - mean) / sd)),
            NullModel::StudentT { df } => special::student_t_cdf_raw(x, df),
        }
    }
}

impl fmt::Display for NullModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NullModel::Uniform01 => write!(f, "uniform"),
            NullModel::Normal { mean, sd } => write!(f, "normal:{mean},{sd}"),
            NullModel::StudentT { df } => write!(f, "t:{df}"),
        }
    }
}

impl FromStr for NullModel {
    type Err = CaksError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || CaksError::InvalidParameter(format!("unrecognized null model `{s}`"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("uniform") => Ok(NullModel::Uniform01),
            Some((kind, params)) if kind.eq_ignore_ascii_case("normal") => {
                let (mean, sd) = params.split_once(',').ok_or_else(bad)?;
                NullModel::normal(num(mean)?, num(sd)?)
            }
            Some((kind, df)) if kind.eq_ignore_ascii_case("t") => NullModel::student_t(num(df)?),
            _ => Err(bad()),
        }
    }
}
