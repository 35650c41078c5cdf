//! Deterministic band-energy classifier.
//!
//! Each class owns a frequency band. The score of class `k` is a sigmoid of
//! the Hann-windowed band power in dB, with a per-band bias calibrated so a
//! band-centred tone at the reference amplitude scores 0.99.

use std::f64::consts::{LN_10, PI};
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{MixkitError, Result};
use crate::signal::check_len;

/// Calibration margin: a reference tone sits this many dB above the bias.
pub const CALIBRATION_MARGIN_DB: f64 = 20.0;

/// Added to band power before taking dB so silence maps to −120 dB.
const LEVEL_FLOOR: f64 = 1e-12;

/// Half-open frequency interval `[lo_hz, hi_hz)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo_hz: f64,
    pub hi_hz: f64,
}

impl Band {
    pub fn new(lo_hz: f64, hi_hz: f64) -> Self {
        Self { lo_hz, hi_hz }
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo_hz + self.hi_hz)
    }

    pub fn contains(&self, hz: f64) -> bool {
        hz >= self.lo_hz && hz < self.hi_hz
    }
}

/// Checks that bands are non-empty, lie below Nyquist and do not overlap.
pub fn validate_bands(bands: &[Band], sample_rate: u32) -> Result<()> {
    if bands.is_empty() {
        return Err(MixkitError::InvalidBand("at least one band is required".into()));
    }
    let nyquist = sample_rate as f64 / 2.0;
    for b in bands {
        if !(b.lo_hz.is_finite() && b.hi_hz.is_finite()) || b.lo_hz < 0.0 || b.lo_hz >= b.hi_hz {
            return Err(MixkitError::InvalidBand(format!("[{}, {}) is empty or negative", b.lo_hz, b.hi_hz)));
        }
        if b.hi_hz > nyquist {
            return Err(MixkitError::InvalidBand(format!("[{}, {}) exceeds Nyquist {nyquist}", b.lo_hz, b.hi_hz)));
        }
    }
    let mut sorted = bands.to_vec();
    sorted.sort_by(|a, b| a.lo_hz.total_cmp(&b.lo_hz));
    for pair in sorted.windows(2) {
        if pair[1].lo_hz < pair[0].hi_hz {
            return Err(MixkitError::InvalidBand(format!(
                "[{}, {}) overlaps [{}, {})",
                pair[0].lo_hz, pair[0].hi_hz, pair[1].lo_hz, pair[1].hi_hz
            )));
        }
    }
    Ok(())
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ClassifierTrace {
    spectrum: Vec<Complex<f64>>,
    pub band_power: Vec<f64>,
    pub posteriors: Vec<f64>,
}

#[derive(Clone)]
pub struct ToyClassifier {
    bands: Vec<Band>,
    sample_rate: u32,
    len: usize,
    slope: f64,
    bias_db: Vec<f64>,
    window: Vec<f64>,
    /// `bins[k]` lists the DFT bins (both signs) whose frequency lies in band `k`.
    bins: Vec<Vec<usize>>,
    power_scale: f64,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for ToyClassifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToyClassifier")
            .field("bands", &self.bands)
            .field("sample_rate", &self.sample_rate)
            .field("len", &self.len)
            .field("slope", &self.slope)
            .field("bias_db", &self.bias_db)
            .finish()
    }
}

impl ToyClassifier {
    /// Builds the classifier for signals of `len` samples and fits each
    /// band's bias on a band-centred tone of `reference_amplitude`.
    pub fn calibrate(bands: &[Band], sample_rate: u32, len: usize, reference_amplitude: f64) -> Result<Self> {
        validate_bands(bands, sample_rate)?;
        if len < 2 {
            return Err(MixkitError::InvalidArgument("classifier needs at least two samples".into()));
        }
        if !(reference_amplitude > 0.0) {
            return Err(MixkitError::InvalidArgument("reference amplitude must be positive".into()));
        }
        let window: Vec<f64> = (0..len).map(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / len as f64).cos()).collect();
        let mean_sq = window.iter().map(|w| w * w).sum::<f64>() / len as f64;
        let bin_hz = sample_rate as f64 / len as f64;
        let bins: Vec<Vec<usize>> = bands
            .iter()
            .map(|b| {
                (0..len)
                    .filter(|&f| {
                        let k = if f <= len / 2 { f } else { len - f };
                        b.contains(k as f64 * bin_hz)
                    })
                    .collect()
            })
            .collect();
        if let Some(k) = bins.iter().position(Vec::is_empty) {
            return Err(MixkitError::InvalidBand(format!(
                "band {k} is narrower than the {bin_hz} Hz frequency resolution"
            )));
        }
        let mut planner = FftPlanner::new();
        let mut clf = Self {
            bands: bands.to_vec(),
            sample_rate,
            len,
            slope: 99f64.ln() / CALIBRATION_MARGIN_DB,
            bias_db: vec![0.0; bands.len()],
            window,
            bins,
            power_scale: 1.0 / (len as f64 * len as f64 * mean_sq),
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        };
        for k in 0..bands.len() {
            let f0 = bands[k].center();
            let tone: Vec<f64> = (0..len)
                .map(|t| reference_amplitude * (2.0 * PI * f0 * t as f64 / sample_rate as f64).sin())
                .collect();
            let level = clf.level_db(clf.band_power(&clf.spectrum(&tone))[k]);
            clf.bias_db[k] = level - CALIBRATION_MARGIN_DB;
        }
        Ok(clf)
    }

    pub fn bands(&self) -> &[Band] {
        &self.bands
    }

    pub fn num_classes(&self) -> usize {
        self.bands.len()
    }

    pub fn slope(&self) -> f64 {
        self.slope
    }

    pub fn bias_db(&self) -> &[f64] {
        &self.bias_db
    }

    fn spectrum(&self, w: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = w.iter().zip(&self.window).map(|(v, h)| Complex::new(v * h, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    fn band_power(&self, spectrum: &[Complex<f64>]) -> Vec<f64> {
        self.bins
            .iter()
            .map(|bins| self.power_scale * bins.iter().map(|&f| spectrum[f].norm_sqr()).sum::<f64>())
            .collect()
    }

    fn level_db(&self, power: f64) -> f64 {
        10.0 * (power + LEVEL_FLOOR).log10()
    }

    pub fn forward(&self, w: &[f64]) -> Result<ClassifierTrace> {
        check_len(self.len, w.len())?;
        let spectrum = self.spectrum(w);
        let band_power = self.band_power(&spectrum);
        let posteriors = band_power
            .iter()
            .zip(&self.bias_db)
            .map(|(&p, &b)| sigmoid(self.slope * (self.level_db(p) - b)))
            .collect();
        Ok(ClassifierTrace { spectrum, band_power, posteriors })
    }

    /// Per-class scores in `[0, 1]`.
    pub fn classify(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(w)?.posteriors)
    }

    /// Pulls `∂L/∂p` back to `∂L/∂w` through the band powers.
    pub fn backward(&self, trace: &ClassifierTrace, dl_dp: &[f64]) -> Vec<f64> {
        let mut masked = vec![Complex::new(0.0, 0.0); self.len];
        for k in 0..self.bands.len() {
            let p = trace.posteriors[k];
            let dl_dpower = dl_dp[k] * self.slope * p * (1.0 - p) * 10.0
                / (LN_10 * (trace.band_power[k] + LEVEL_FLOOR));
            if dl_dpower == 0.0 {
                continue;
            }
            for &f in &self.bins[k] {
                masked[f] += trace.spectrum[f] * dl_dpower;
            }
        }
        self.inverse.process(&mut masked);
        masked
            .iter()
            .zip(&self.window)
            .map(|(g, h)| 2.0 * self.power_scale * h * g.re)
            .collect()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
