//! Over-separation penalties on the estimated sources.
//!
//! The two sparsity losses act on the activity vector `r` (the smoothed RMS of
//! each source). The covariance loss acts on the sources themselves.

use crate::error::{MixkitError, Result};
use crate::signal::{self, check_len, rms, SourceSet};

/// Per-source activity `r_m = rms(ŝ_m)`, always at least `sqrt(EPS_RMS)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivityVector(Vec<f64>);

impl ActivityVector {
    pub fn from_sources(s: &SourceSet) -> Self {
        Self(s.rows().iter().map(|r| rms(r)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn l2(&self) -> f64 {
        self.0.iter().map(|r| r * r).sum::<f64>().sqrt()
    }
}

/// Penalty selector for [`regularizer_value`] and [`regularizer_gradients`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    SparsityL1,
    SparsityL1L2,
    Covariance,
}

fn mixture_rms(mix: &[f64]) -> Result<f64> {
    if mix.iter().all(|&v| v == 0.0) {
        return Err(MixkitError::DegenerateMixture);
    }
    Ok(rms(mix))
}

/// `(1/M)·‖r‖₁ / rms(mix)`.
pub fn sparsity_l1(s: &SourceSet, mix: &[f64]) -> Result<f64> {
    check_len(s.len(), mix.len())?;
    let denom = mixture_rms(mix)?;
    let r = ActivityVector::from_sources(s);
    Ok(r.l1() / (s.num_sources() as f64 * denom))
}

/// `(1/M)·‖r‖₁ / ‖r‖₂`, between `1/M` (one active source) and `1/√M`
/// (equal activities). Invariant to rescaling all sources.
pub fn sparsity_l1_l2(s: &SourceSet) -> f64 {
    l1_l2_of_activities(ActivityVector::from_sources(s).values())
}

/// `(1/M)·‖r‖₁ / ‖r‖₂` for an activity vector given directly.
pub fn l1_l2_of_activities(r: &[f64]) -> f64 {
    let l1: f64 = r.iter().sum();
    let l2 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    l1 / (r.len() as f64 * l2)
}

fn centered(s: &SourceSet) -> Vec<Vec<f64>> {
    s.rows()
        .iter()
        .map(|row| {
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            row.iter().map(|v| v - mean).collect()
        })
        .collect()
}

/// Population covariance matrix (means removed, divided by `T`).
pub fn covariance_matrix(s: &SourceSet) -> Vec<Vec<f64>> {
    let c = centered(s);
    let m = s.num_sources();
    let t = s.len() as f64;
    let mut cov = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let v = signal::dot(&c[i], &c[j]) / t;
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    cov
}

/// `Σ_{m≠m'} |cov(ŝ_m, ŝ_m')|`, each unordered pair counted twice.
pub fn covariance_loss(s: &SourceSet) -> Result<f64> {
    let m = s.num_sources();
    if m < 2 {
        return Err(MixkitError::TooFewSources { needed: 2, got: m });
    }
    let cov = covariance_matrix(s);
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            total += 2.0 * cov[i][j].abs();
        }
    }
    Ok(total)
}

pub fn regularizer_value(s: &SourceSet, mix: &[f64], which: Regularizer) -> Result<f64> {
    match which {
        Regularizer::SparsityL1 => sparsity_l1(s, mix),
        Regularizer::SparsityL1L2 => Ok(sparsity_l1_l2(s)),
        Regularizer::Covariance => covariance_loss(s),
    }
}

/// Chains `∂C/∂r_m` through `r_m = rms(ŝ_m)`.
fn activity_chain(s: &SourceSet, r: &[f64], dr: impl Fn(usize) -> f64) -> Vec<Vec<f64>> {
    let t = s.len() as f64;
    s.rows()
        .iter()
        .enumerate()
        .map(|(m, row)| {
            let c = dr(m) / (t * r[m]);
            row.iter().map(|v| c * v).collect()
        })
        .collect()
}

/// Analytic gradient of the selected penalty with respect to every source.
///
/// The mixture is a constant input; the absolute value in the covariance
/// loss contributes a zero subgradient at zero covariance.
pub fn regularizer_gradients(s: &SourceSet, mix: &[f64], which: Regularizer) -> Result<Vec<Vec<f64>>> {
    check_len(s.len(), mix.len())?;
    let m = s.num_sources();
    match which {
        Regularizer::SparsityL1 => {
            let denom = mixture_rms(mix)?;
            let r = ActivityVector::from_sources(s);
            let scale = 1.0 / (m as f64 * denom);
            Ok(activity_chain(s, r.values(), |_| scale))
        }
        Regularizer::SparsityL1L2 => {
            let r = ActivityVector::from_sources(s);
            let (l1, l2) = (r.l1(), r.l2());
            let mf = m as f64;
            let vals = r.values();
            Ok(activity_chain(s, vals, |i| (1.0 / l2 - l1 * vals[i] / (l2 * l2 * l2)) / mf))
        }
        Regularizer::Covariance => {
            if m < 2 {
                return Err(MixkitError::TooFewSources { needed: 2, got: m });
            }
            let c = centered(s);
            let cov = covariance_matrix(s);
            let t = s.len() as f64;
            let mut grad = vec![vec![0.0; s.len()]; m];
            for i in 0..m {
                for j in 0..m {
                    if i == j || cov[i][j] == 0.0 {
                        continue;
                    }
                    let coef = 2.0 * cov[i][j].signum() / t;
                    for (g, v) in grad[i].iter_mut().zip(&c[j]) {
                        *g += coef * v;
                    }
                }
            }
            Ok(grad)
        }
    }
}
