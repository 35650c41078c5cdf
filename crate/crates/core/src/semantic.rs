//! Classification-based separation losses.
//!
//! Per-source class posteriors are aggregated into one mixture-level
//! prediction (soft OR or soft XOR) and scored against weak mixture labels
//! with a cross entropy. A pairwise cosine term pushes posteriors of
//! different outputs apart. [`classifier`] provides a deterministic
//! band-energy classifier to produce the posteriors from waveforms.

pub mod classifier;

pub use classifier::{Band, ToyClassifier};

use crate::error::{MixkitError, Result};

/// Clamp applied to the aggregate inside the cross-entropy logarithms.
pub const EPS_CE: f64 = 1e-7;

/// Floor on the norm product of the cosine term.
pub const EPS_COS: f64 = 1e-12;

/// `M` posterior vectors over `K` classes plus the mixture's binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorMatrix {
    posteriors: Vec<Vec<f64>>,
    labels: Vec<u8>,
}

impl PosteriorMatrix {
    pub fn new(posteriors: Vec<Vec<f64>>, labels: Vec<u8>) -> Result<Self> {
        let k = labels.len();
        if posteriors.is_empty() {
            return Err(MixkitError::TooFewSources { needed: 1, got: 0 });
        }
        if k == 0 {
            return Err(MixkitError::InvalidArgument("posteriors need at least one class".into()));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(MixkitError::InvalidArgument("labels must be 0 or 1".into()));
        }
        for p in &posteriors {
            if p.len() != k {
                return Err(MixkitError::LengthMismatch { expected: k, got: p.len() });
            }
            if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(MixkitError::InvalidArgument("posterior entries must lie in [0, 1]".into()));
            }
        }
        Ok(Self { posteriors, labels })
    }

    pub fn num_sources(&self) -> usize {
        self.posteriors.len()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn posteriors(&self) -> &[Vec<f64>] {
        &self.posteriors
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    fn column(&self, k: usize) -> Vec<f64> {
        self.posteriors.iter().map(|p| p[k]).collect()
    }
}

/// Mixture-level aggregation of per-source posteriors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregator {
    #[default]
    Or,
    Xor,
}

impl std::str::FromStr for Aggregator {
    type Err = MixkitError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "or" => Ok(Self::Or),
            "xor" => Ok(Self::Xor),
            other => Err(MixkitError::InvalidArgument(format!("unknown aggregator {other:?}"))),
        }
    }
}

impl std::fmt::Display for Aggregator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Or => "or",
            Self::Xor => "xor",
        })
    }
}

fn product_except(p: &[f64], skip: &[usize]) -> f64 {
    p.iter()
        .enumerate()
        .filter(|(i, _)| !skip.contains(i))
        .map(|(_, v)| 1.0 - v)
        .product()
}

fn soft_or(p: &[f64]) -> f64 {
    1.0 - p.iter().map(|v| 1.0 - v).product::<f64>()
}

fn soft_xor(p: &[f64]) -> f64 {
    (0..p.len()).map(|m| p[m] * product_except(p, &[m])).sum()
}

/// `∂A/∂p_j` for a single class column.
fn aggregate_partials(p: &[f64], aggregator: Aggregator) -> Vec<f64> {
    (0..p.len())
        .map(|j| match aggregator {
            Aggregator::Or => product_except(p, &[j]),
            Aggregator::Xor => {
                let mut d = product_except(p, &[j]);
                for m in 0..p.len() {
                    if m != j {
                        d -= p[m] * product_except(p, &[m, j]);
                    }
                }
                d
            }
        })
        .collect()
}

/// Soft logical OR per class: `1 − Π_m (1 − p_m[k])`.
pub fn aggregate_or(p: &PosteriorMatrix) -> Vec<f64> {
    (0..p.num_classes()).map(|k| soft_or(&p.column(k))).collect()
}

/// Soft one-hot XOR per class: `Σ_m p_m[k] Π_{m'≠m} (1 − p_m'[k])`.
pub fn aggregate_xor(p: &PosteriorMatrix) -> Vec<f64> {
    (0..p.num_classes()).map(|k| soft_xor(&p.column(k))).collect()
}

pub fn aggregate(p: &PosteriorMatrix, aggregator: Aggregator) -> Vec<f64> {
    match aggregator {
        Aggregator::Or => aggregate_or(p),
        Aggregator::Xor => aggregate_xor(p),
    }
}

/// Weak-label binary cross entropy (natural log) of the aggregate, with the
/// aggregate clamped to `[EPS_CE, 1 − EPS_CE]`.
pub fn ce_loss(p: &PosteriorMatrix, aggregator: Aggregator) -> f64 {
    aggregate(p, aggregator)
        .iter()
        .zip(p.labels())
        .map(|(&a, &l)| {
            let a = a.clamp(EPS_CE, 1.0 - EPS_CE);
            if l == 1 {
                -a.ln()
            } else {
                -(1.0 - a).ln()
            }
        })
        .sum()
}

/// Gradient of [`ce_loss`] with respect to every posterior entry; zero where
/// the clamp is active.
pub fn ce_loss_grad(p: &PosteriorMatrix, aggregator: Aggregator) -> Vec<Vec<f64>> {
    let m = p.num_sources();
    let mut grad = vec![vec![0.0; p.num_classes()]; m];
    for k in 0..p.num_classes() {
        let col = p.column(k);
        let a = match aggregator {
            Aggregator::Or => soft_or(&col),
            Aggregator::Xor => soft_xor(&col),
        };
        if !(EPS_CE..=1.0 - EPS_CE).contains(&a) {
            continue;
        }
        let dl_da = if p.labels()[k] == 1 { -1.0 / a } else { 1.0 / (1.0 - a) };
        for (j, d) in aggregate_partials(&col, aggregator).into_iter().enumerate() {
            grad[j][k] = dl_da * d;
        }
    }
    grad
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean over source pairs of `1 + cos(p_m, p_m')`.
///
/// The norm product is floored at [`EPS_COS`]; pairs involving an all-zero
/// posterior contribute a cosine of zero.
pub fn cosine_loss(p: &PosteriorMatrix) -> Result<f64> {
    let m = p.num_sources();
    if m < 2 {
        return Err(MixkitError::TooFewSources { needed: 2, got: m });
    }
    let post = p.posteriors();
    let mut total = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let a = dot(&post[i], &post[i]);
            let b = dot(&post[j], &post[j]);
            total += 1.0 + dot(&post[i], &post[j]) / (a * b).sqrt().max(EPS_COS);
        }
    }
    Ok(2.0 * total / (m * (m - 1)) as f64)
}

/// Gradient of [`cosine_loss`] with respect to every posterior entry.
pub fn cosine_loss_grad(p: &PosteriorMatrix) -> Result<Vec<Vec<f64>>> {
    let m = p.num_sources();
    if m < 2 {
        return Err(MixkitError::TooFewSources { needed: 2, got: m });
    }
    let post = p.posteriors();
    let scale = 2.0 / (m * (m - 1)) as f64;
    let norms: Vec<f64> = post.iter().map(|v| norm(v)).collect();
    let mut grad = vec![vec![0.0; p.num_classes()]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            let nn = norms[i] * norms[j];
            if nn <= EPS_COS {
                // Floored denominator: only the numerator varies.
                for k in 0..p.num_classes() {
                    grad[i][k] += scale * post[j][k] / EPS_COS;
                    grad[j][k] += scale * post[i][k] / EPS_COS;
                }
                continue;
            }
            let cos = dot(&post[i], &post[j]) / nn;
            for k in 0..p.num_classes() {
                grad[i][k] += scale * (post[j][k] / nn - cos * post[i][k] / (norms[i] * norms[i]));
                grad[j][k] += scale * (post[i][k] / nn - cos * post[j][k] / (norms[j] * norms[j]));
            }
        }
    }
    Ok(grad)
}
