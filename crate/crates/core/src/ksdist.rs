//! Kolmogorov distance between a chunk's empirical CDF and a continuous null.
//!
//! Under the probability-integral transform the distance only depends on the
//! sorted values `u_(i) = F(x_(i))`:
//!
//! ```text
//! K = max_i max{ u_(i) - (i-1)/J, i/J - u_(i) }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{CaksError, Result};
use crate::nulls::NullModel;

/// Supremum distance `sup_x |F_hat(x) - F(x)|`, always in `[1/(2J), 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct KsDistance(f64);

impl KsDistance {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<KsDistance> for f64 {
    fn from(d: KsDistance) -> f64 {
        d.0
    }
}

/// Distance of an ascending uniform sample to `Uniform(0,1)`, with the sort and
/// range preconditions checked.
pub fn ks_uniform(sorted_u: &[f64]) -> Result<KsDistance> {
    if sorted_u.is_empty() {
        return Err(CaksError::EmptyChunk);
    }
    for (i, &u) in sorted_u.iter().enumerate() {
        if !(0.0..=1.0).contains(&u) {
            return Err(CaksError::InvalidUniformSample(format!(
                "value {u} at index {i} is outside [0, 1]"
            )));
        }
        if i > 0 && sorted_u[i - 1] > u {
            return Err(CaksError::InvalidUniformSample(format!(
                "not ascending at index {i}"
            )));
        }
    }
    Ok(ks_uniform_trusted(sorted_u))
}

/// As [`ks_uniform`] but trusts the caller on ordering and range. Hot-path entry
/// point; an empty slice yields `0.0` rather than an error.
#[inline]
pub fn ks_uniform_trusted(sorted_u: &[f64]) -> KsDistance {
    let n = sorted_u.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &u) in sorted_u.iter().enumerate() {
        let below = i as f64 / n;
        let above = (i + 1) as f64 / n;
        d = d.max(u - below).max(above - u);
    }
    KsDistance(d)
}

/// Kolmogorov distance between the chunk's EDF and the null CDF. The chunk is
/// left untouched; a scratch copy is sorted.
pub fn ks_statistic(chunk: &[f64], null: &NullModel) -> Result<KsDistance> {
    if chunk.is_empty() {
        return Err(CaksError::EmptyChunk);
    }
    if let Some((index, &value)) = chunk.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(CaksError::NonFinite { index, value });
    }
    let mut scratch = chunk.to_vec();
    ks_statistic_in_place(&mut scratch, null)
}

/// Sorts `chunk` and overwrites it with the transformed values `F(x_(i))` before
/// evaluating the distance. Values must be finite.
pub fn ks_statistic_in_place(chunk: &mut [f64], null: &NullModel) -> Result<KsDistance> {
    if chunk.is_empty() {
        return Err(CaksError::EmptyChunk);
    }
    chunk.sort_unstable_by(f64::total_cmp);
    for x in chunk.iter_mut() {
        *x = null.cdf_finite(*x)?;
    }
    Ok(ks_uniform_trusted(chunk))
}
