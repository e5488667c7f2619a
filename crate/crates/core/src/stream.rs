//! Fixed-memory streaming CAKS state.
//!
//! Observations are buffered until a chunk of `J` values is complete; the chunk's
//! KS distance is then folded into the running mean with
//! `theta_t = ((t - 1) * theta_{t-1} + theta_hat_t) / t` and the buffer is reused.
//! Nothing else is retained per chunk.

use crate::calib::Calibration;
use crate::decide::{caks_pvalue, caks_z, check_alpha, rejects, Method, TestReport};
use crate::error::{CaksError, Result};
use crate::ksdist::ks_statistic_in_place;
use crate::nulls::NullModel;

/// Below this many chunks the normal approximation is flagged in reports.
pub const SMALL_T_WARNING: u64 = 30;

/// What to do with NaN or infinite observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InvalidPolicy {
    #[default]
    Strict,
    /// Count and drop.
    Skip,
}

#[derive(Debug, Clone)]
pub struct CaksState {
    chunk_size: usize,
    null: NullModel,
    chunks_done: u64,
    running_mean: f64,
    buffer: Vec<f64>,
    observations_seen: u64,
    invalid_skipped: u64,
    policy: InvalidPolicy,
}

impl CaksState {
    pub fn new(chunk_size: usize, null: NullModel) -> Result<Self> {
        if chunk_size == 0 {
            return Err(CaksError::InvalidParameter("chunk size must be at least 1".into()));
        }
        null.validate()?;
        Ok(CaksState {
            chunk_size,
            null,
            chunks_done: 0,
            running_mean: 0.0,
            buffer: Vec::with_capacity(chunk_size),
            observations_seen: 0,
            invalid_skipped: 0,
            policy: InvalidPolicy::Strict,
        })
    }

    pub fn with_policy(mut self, policy: InvalidPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn chunk_size(&self) -> usize {
        self.chunk_size
    }

    pub fn null(&self) -> &NullModel {
        &self.null
    }

    pub fn chunks_done(&self) -> u64 {
        self.chunks_done
    }

    pub fn running_mean(&self) -> f64 {
        self.running_mean
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn observations_seen(&self) -> u64 {
        self.observations_seen
    }

    pub fn invalid_skipped(&self) -> u64 {
        self.invalid_skipped
    }

    /// Bytes held by the state, including the chunk buffer's allocation.
    pub fn memory_footprint(&self) -> usize {
        std::mem::size_of::<Self>() + self.buffer.capacity() * std::mem::size_of::<f64>()
    }

    /// Feeds observations in stream order. Under the strict policy a non-finite
    /// value fails the whole call before any state changes; the error carries
    /// its index within `values`.
    pub fn push(&mut self, values: &[f64]) -> Result<()> {
        if self.policy == InvalidPolicy::Strict {
            if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite())
            {
                return Err(CaksError::NonFinite { index, value });
            }
        }
        for &x in values {
            self.observations_seen += 1;
            if !x.is_finite() {
                self.invalid_skipped += 1;
                continue;
            }
            self.buffer.push(x);
            if self.buffer.len() == self.chunk_size {
                self.close_chunk()?;
            }
        }
        Ok(())
    }

    fn close_chunk(&mut self) -> Result<()> {
        let theta_hat = ks_statistic_in_place(&mut self.buffer, &self.null)?.value();
        self.buffer.clear();
        self.chunks_done += 1;
        let t = self.chunks_done as f64;
        self.running_mean = ((t - 1.0) * self.running_mean + theta_hat) / t;
        Ok(())
    }

    /// Combines states built from consecutive, disjoint parts of one stream.
    /// At most one of them may hold a partial chunk.
    pub fn merge(self, other: CaksState) -> Result<CaksState> {
        if self.chunk_size != other.chunk_size {
            return Err(CaksError::ConfigMismatch(format!(
                "chunk sizes {} and {}",
                self.chunk_size, other.chunk_size
            )));
        }
        if self.null != other.null {
            return Err(CaksError::ConfigMismatch(format!(
                "null models {} and {}",
                self.null, other.null
            )));
        }
        if !self.buffer.is_empty() && !other.buffer.is_empty() {
            return Err(CaksError::AmbiguousChunkBoundary);
        }
        let (ta, tb) = (self.chunks_done, other.chunks_done);
        let running_mean = match (ta, tb) {
            (0, 0) => 0.0,
            (0, _) => other.running_mean,
            (_, 0) => self.running_mean,
            _ => {
                (ta as f64 * self.running_mean + tb as f64 * other.running_mean)
                    / (ta + tb) as f64
            }
        };
        let buffer = if self.buffer.is_empty() { other.buffer } else { self.buffer };
        let mut merged = CaksState {
            chunk_size: self.chunk_size,
            null: self.null,
            chunks_done: ta + tb,
            running_mean,
            buffer,
            observations_seen: self.observations_seen + other.observations_seen,
            invalid_skipped: self.invalid_skipped + other.invalid_skipped,
            policy: self.policy,
        };
        merged.buffer.reserve_exact(merged.chunk_size.saturating_sub(merged.buffer.len()));
        Ok(merged)
    }

    /// One-sided Z test on the running mean. Buffered observations of an
    /// incomplete trailing chunk are reported as discarded.
    pub fn report(&self, cal: &Calibration, alpha: f64) -> Result<TestReport> {
        check_alpha(alpha)?;
        if self.chunks_done == 0 {
            return Err(CaksError::NoCompleteChunk);
        }
        if cal.j != self.chunk_size {
            return Err(CaksError::CalibrationMismatch {
                state: self.chunk_size,
                calibration: cal.j,
            });
        }
        let z = caks_z(self.running_mean, self.chunks_done, cal)?;
        let p_value = caks_pvalue(z)?;
        let mut warnings = Vec::new();
        if self.chunks_done < SMALL_T_WARNING {
            warnings.push(format!(
                "normal approximation unreliable: only {} complete chunks (T < {SMALL_T_WARNING})",
                self.chunks_done
            ));
        }
        if self.invalid_skipped > 0 {
            warnings.push(format!("{} non-finite observations skipped", self.invalid_skipped));
        }
        Ok(TestReport {
            method: Method::Caks,
            statistic: z,
            p_value,
            alpha,
            reject: rejects(p_value, alpha),
            t: Some(self.chunks_done),
            j: Some(self.chunk_size),
            n_used: self.chunks_done * self.chunk_size as u64,
            n_discarded: self.buffer.len() as u64,
            warnings,
        })
    }
}
