//! Waveform primitives shared by every loss and metric.

use crate::error::{MixkitError, Result};

/// Smoothing constant added under the square root of [`rms`].
///
/// Keeps the activity of a silent source strictly positive so that the
/// sparsity penalties stay differentiable there.
pub const EPS_RMS: f64 = 1e-8;

/// Residual energies at or below this fraction of the target energy are
/// rounding noise, and SI-SNR reports them as an exact match.
const SI_SNR_EXACT_RATIO: f64 = 1e-28;

/// A finite, non-empty mono signal at a fixed sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(MixkitError::EmptySignal);
        }
        if sample_rate == 0 {
            return Err(MixkitError::InvalidArgument("sample rate must be positive".into()));
        }
        check_finite(&samples)?;
        Ok(Self { samples, sample_rate })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn rms(&self) -> f64 {
        rms(&self.samples)
    }
}

impl AsRef<[f64]> for Waveform {
    fn as_ref(&self) -> &[f64] {
        &self.samples
    }
}

/// `M` estimated sources of identical length and sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    rows: Vec<Vec<f64>>,
    sample_rate: u32,
}

impl SourceSet {
    pub fn new(rows: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        let first = rows.first().ok_or(MixkitError::TooFewSources { needed: 1, got: 0 })?;
        let len = first.len();
        if len == 0 {
            return Err(MixkitError::EmptySignal);
        }
        if sample_rate == 0 {
            return Err(MixkitError::InvalidArgument("sample rate must be positive".into()));
        }
        for row in &rows {
            if row.len() != len {
                return Err(MixkitError::LengthMismatch { expected: len, got: row.len() });
            }
            check_finite(row)?;
        }
        Ok(Self { rows, sample_rate })
    }

    pub fn from_waveforms(sources: Vec<Waveform>) -> Result<Self> {
        let sample_rate = sources.first().map(Waveform::sample_rate).unwrap_or(1);
        for w in &sources {
            if w.sample_rate() != sample_rate {
                return Err(MixkitError::SampleRateMismatch { expected: sample_rate, got: w.sample_rate() });
            }
        }
        Self::new(sources.into_iter().map(Waveform::into_samples).collect(), sample_rate)
    }

    pub fn zeros(m: usize, len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![vec![0.0; len]; m], sample_rate)
    }

    /// Number of sources `M`.
    pub fn num_sources(&self) -> usize {
        self.rows.len()
    }

    /// Common length `T`.
    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn source(&self, m: usize) -> &[f64] {
        &self.rows[m]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<f64>> {
        self.rows
    }

    pub fn waveform(&self, m: usize) -> Waveform {
        Waveform { samples: self.rows[m].clone(), sample_rate: self.sample_rate }
    }

    /// Elementwise sum of all sources.
    pub fn sum(&self) -> Vec<f64> {
        sum_rows(&self.rows)
    }

    /// Multiplies every sample by `c`.
    pub fn scaled(&self, c: f64) -> SourceSet {
        SourceSet {
            rows: self.rows.iter().map(|r| r.iter().map(|v| v * c).collect()).collect(),
            sample_rate: self.sample_rate,
        }
    }

    /// Reorders sources so that output `i` is input `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> SourceSet {
        SourceSet {
            rows: perm.iter().map(|&p| self.rows[p].clone()).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// `N` reference mixtures together with their sum, the mixture of mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureBatch {
    references: Vec<Waveform>,
    mom: Waveform,
}

impl MixtureBatch {
    /// Builds the batch, summing the references in index order.
    pub fn from_references(references: Vec<Waveform>) -> Result<Self> {
        let first = references.first().ok_or(MixkitError::InvalidArgument(
            "a mixture batch needs at least one reference".into(),
        ))?;
        let len = first.len();
        let sample_rate = first.sample_rate();
        for r in &references {
            if r.len() != len {
                return Err(MixkitError::LengthMismatch { expected: len, got: r.len() });
            }
            if r.sample_rate() != sample_rate {
                return Err(MixkitError::SampleRateMismatch { expected: sample_rate, got: r.sample_rate() });
            }
        }
        let mut mom = vec![0.0; len];
        for r in &references {
            for (acc, v) in mom.iter_mut().zip(r.samples()) {
                *acc += v;
            }
        }
        let mom = Waveform::new(mom, sample_rate)?;
        Ok(Self { references, mom })
    }

    pub fn references(&self) -> &[Waveform] {
        &self.references
    }

    pub fn reference(&self, n: usize) -> &[f64] {
        self.references[n].samples()
    }

    pub fn mom(&self) -> &Waveform {
        &self.mom
    }

    /// Number of reference mixtures `N`.
    pub fn num_references(&self) -> usize {
        self.references.len()
    }

    pub fn len(&self) -> usize {
        self.mom.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> u32 {
        self.mom.sample_rate()
    }
}

pub(crate) fn check_finite(samples: &[f64]) -> Result<()> {
    match samples.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(MixkitError::NonFinite { index }),
        None => Ok(()),
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(MixkitError::LengthMismatch { expected, got })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn energy(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

pub(crate) fn sum_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; rows.first().map_or(0, Vec::len)];
    for row in rows {
        for (acc, v) in out.iter_mut().zip(row) {
            *acc += v;
        }
    }
    out
}

/// Smoothed root-mean-square level: `sqrt(mean(w²) + EPS_RMS)`.
pub fn rms(w: &[f64]) -> f64 {
    let t = w.len().max(1) as f64;
    (energy(w) / t + EPS_RMS).sqrt()
}

/// `τ = 10^(−snr_max/10)`.
pub fn snr_threshold(snr_max_db: f64) -> f64 {
    10f64.powf(-snr_max_db / 10.0)
}

/// Negative thresholded SNR between a reference `y` and estimate `yhat`.
///
/// `−10·log10(‖y‖² / (‖y − ŷ‖² + τ‖y‖²))` with `τ = 10^(−snr_max_db/10)`.
/// The value never drops below `−snr_max_db`.
pub fn thresholded_snr_loss(y: &[f64], yhat: &[f64], snr_max_db: f64) -> Result<f64> {
    check_len(y.len(), yhat.len())?;
    let ref_energy = energy(y);
    if ref_energy == 0.0 {
        return Err(MixkitError::UndefinedReference);
    }
    let err_energy: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(loss_from_energies(ref_energy, err_energy, snr_threshold(snr_max_db)))
}

pub(crate) fn loss_from_energies(ref_energy: f64, err_energy: f64, tau: f64) -> f64 {
    -10.0 * (ref_energy / (err_energy.max(0.0) + tau * ref_energy)).log10()
}

/// Gradient of [`thresholded_snr_loss`] with respect to `yhat`.
pub fn thresholded_snr_loss_grad(y: &[f64], yhat: &[f64], snr_max_db: f64) -> Result<Vec<f64>> {
    check_len(y.len(), yhat.len())?;
    let ref_energy = energy(y);
    if ref_energy == 0.0 {
        return Err(MixkitError::UndefinedReference);
    }
    let err_energy: f64 = y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum();
    let denom = err_energy + snr_threshold(snr_max_db) * ref_energy;
    // d/dŷ 10·log10(‖y−ŷ‖² + τ‖y‖²)
    let c = -20.0 / (std::f64::consts::LN_10 * denom);
    Ok(y.iter().zip(yhat).map(|(a, b)| c * (a - b)).collect())
}

/// Scale-invariant SNR in dB, scaling the reference onto the estimate.
///
/// Returns `f64::INFINITY` when the estimate is an exact positive or negative
/// multiple of the reference, and `f64::NEG_INFINITY` when the estimate has
/// no component along the reference (including an all-zero estimate).
pub fn si_snr(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_len(reference.len(), estimate.len())?;
    let ref_energy = energy(reference);
    if ref_energy == 0.0 {
        return Err(MixkitError::UndefinedReference);
    }
    let alpha = dot(estimate, reference) / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    if target_energy == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let residual: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(e, r)| {
            let d = e - alpha * r;
            d * d
        })
        .sum();
    if residual <= SI_SNR_EXACT_RATIO * target_energy {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (target_energy / residual).log10())
}

/// Projects sources onto the set summing to `mix`, splitting the residual
/// uniformly: `s'_m = s_m + (mix − Σ s)/M`.
pub fn mixture_consistency_project(s: &SourceSet, mix: &[f64]) -> Result<SourceSet> {
    check_len(s.len(), mix.len())?;
    let mut rows = s.rows.clone();
    project_rows(&mut rows, mix);
    Ok(SourceSet { rows, sample_rate: s.sample_rate })
}

/// In-place form of [`mixture_consistency_project`]; lengths must agree.
pub(crate) fn project_rows(rows: &mut [Vec<f64>], mix: &[f64]) {
    let m = rows.len() as f64;
    let total = sum_rows(rows);
    for (t, (&x, &sum)) in mix.iter().zip(&total).enumerate() {
        let share = (x - sum) / m;
        for row in rows.iter_mut() {
            row[t] += share;
        }
    }
}
