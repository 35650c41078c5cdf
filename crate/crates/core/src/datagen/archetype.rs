//! Synthetic source archetypes.

use std::f64::consts::PI;
use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::rng::DataRng;
use super::wav::quantize;
use crate::error::{MixkitError, Result};
use crate::semantic::classifier::Band;
use crate::signal::{energy, Waveform};

/// Raised-cosine ramp applied where a source starts or stops inside the clip.
const FADE_SECONDS: f64 = 0.005;
const MIN_RMS: f64 = 0.01;
const MAX_RMS: f64 = 1.0;

/// Archetype family without parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArchetypeTag {
    Tone,
    Chirp,
    AmNoise,
    ImpulseTrain,
}

impl ArchetypeTag {
    pub const ALL: [ArchetypeTag; 4] = [Self::Tone, Self::Chirp, Self::AmNoise, Self::ImpulseTrain];

    pub fn name(self) -> &'static str {
        match self {
            Self::Tone => "tone",
            Self::Chirp => "chirp",
            Self::AmNoise => "am_noise",
            Self::ImpulseTrain => "impulse_train",
        }
    }

    /// Whether band power is a faithful class cue for this family.
    pub fn is_tonal(self) -> bool {
        matches!(self, Self::Tone | Self::Chirp)
    }
}

impl FromStr for ArchetypeTag {
    type Err = MixkitError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MixkitError::Format(format!("unknown archetype kind {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ArchetypeKind {
    Tone { freq_hz: f64, phase: f64 },
    /// Linear frequency sweep.
    Chirp { start_hz: f64, end_hz: f64, phase: f64 },
    /// Band-limited Gaussian noise under a sinusoidal envelope.
    AmNoise { band: Band, mod_hz: f64, depth: f64, noise_seed: u64 },
    /// Unit impulses of height `amplitude` every `period` samples.
    ImpulseTrain { period: usize },
}

impl ArchetypeKind {
    pub fn tag(&self) -> ArchetypeTag {
        match self {
            Self::Tone { .. } => ArchetypeTag::Tone,
            Self::Chirp { .. } => ArchetypeTag::Chirp,
            Self::AmNoise { .. } => ArchetypeTag::AmNoise,
            Self::ImpulseTrain { .. } => ArchetypeTag::ImpulseTrain,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceArchetype {
    pub kind: ArchetypeKind,
    pub class_id: usize,
    pub amplitude: f64,
    pub onset_s: f64,
    pub offset_s: f64,
}

impl SourceArchetype {
    /// Draws an archetype of family `tag` whose spectrum sits inside `band`.
    pub fn draw(
        rng: &mut DataRng,
        tag: ArchetypeTag,
        class_id: usize,
        band: Band,
        amplitude_range: (f64, f64),
        sample_rate: u32,
        clip_samples: usize,
    ) -> Self {
        let clip_s = clip_samples as f64 / sample_rate as f64;
        let width = band.hi_hz - band.lo_hz;
        let (lo, hi) = (band.lo_hz + 0.1 * width, band.hi_hz - 0.1 * width);
        let amplitude = rng.range(amplitude_range.0, amplitude_range.1);
        let (onset_s, offset_s) = if rng.uniform() < 0.5 {
            (0.0, clip_s)
        } else {
            let onset = rng.range(0.0, 0.4 * clip_s);
            (onset, rng.range(onset + 0.5 * clip_s, clip_s))
        };
        let kind = match tag {
            ArchetypeTag::Tone => ArchetypeKind::Tone { freq_hz: rng.range(lo, hi), phase: rng.range(0.0, 2.0 * PI) },
            ArchetypeTag::Chirp => ArchetypeKind::Chirp {
                start_hz: rng.range(lo, hi),
                end_hz: rng.range(lo, hi),
                phase: rng.range(0.0, 2.0 * PI),
            },
            ArchetypeTag::AmNoise => ArchetypeKind::AmNoise {
                band: Band::new(lo, hi),
                mod_hz: rng.range(2.0, 8.0),
                depth: rng.range(0.3, 0.9),
                noise_seed: rng.next_u64(),
            },
            ArchetypeTag::ImpulseTrain => {
                let f0 = rng.range(lo, hi);
                ArchetypeKind::ImpulseTrain { period: ((sample_rate as f64 / f0).round() as usize).max(1) }
            }
        };
        Self { kind, class_id, amplitude, onset_s, offset_s }
    }

    fn validate(&self, sample_rate: u32, len: usize) -> Result<()> {
        let invalid = |m: &str| Err(MixkitError::InvalidArgument(format!("archetype: {m}")));
        let nyquist = sample_rate as f64 / 2.0;
        let clip_s = len as f64 / sample_rate as f64;
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return invalid("amplitude must be positive");
        }
        if !(self.onset_s >= 0.0 && self.onset_s < self.offset_s && self.offset_s <= clip_s + 1e-12) {
            return invalid("need 0 <= onset < offset <= clip length");
        }
        let below_nyquist = |f: f64| f > 0.0 && f < nyquist;
        match &self.kind {
            ArchetypeKind::Tone { freq_hz, .. } if !below_nyquist(*freq_hz) => invalid("tone frequency out of range"),
            ArchetypeKind::Chirp { start_hz, end_hz, .. } if !(below_nyquist(*start_hz) && below_nyquist(*end_hz)) => {
                invalid("chirp frequency out of range")
            }
            ArchetypeKind::AmNoise { band, depth, .. }
                if !(band.lo_hz >= 0.0 && band.lo_hz < band.hi_hz && band.hi_hz <= nyquist && (0.0..=1.0).contains(depth)) =>
            {
                invalid("noise band or depth out of range")
            }
            ArchetypeKind::ImpulseTrain { period: 0 } => invalid("impulse period must be positive"),
            _ => Ok(()),
        }
    }
}

fn support(a: &SourceArchetype, sample_rate: u32, len: usize) -> (usize, usize) {
    let start = (a.onset_s * sample_rate as f64).round() as usize;
    let end = ((a.offset_s * sample_rate as f64).round() as usize).min(len);
    (start.min(len), end)
}

fn band_limited_noise(band: Band, seed: u64, sample_rate: u32, len: usize) -> Vec<f64> {
    let mut rng = DataRng::new(seed);
    let mut buf: Vec<Complex<f64>> = (0..len).map(|_| Complex::new(rng.gaussian(), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(len).process(&mut buf);
    let bin_hz = sample_rate as f64 / len as f64;
    for (f, c) in buf.iter_mut().enumerate() {
        let k = if f <= len / 2 { f } else { len - f };
        if !band.contains(k as f64 * bin_hz) {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Renders an archetype. Samples are rounded to `f32` precision so the
/// waveform survives a WAV round trip unchanged.
pub fn synth_source(a: &SourceArchetype, sample_rate: u32, len: usize) -> Result<Waveform> {
    a.validate(sample_rate, len)?;
    let fs = sample_rate as f64;
    let (start, end) = support(a, sample_rate, len);
    if start >= end {
        return Err(MixkitError::InvalidArgument("archetype: empty support".into()));
    }
    let mut out = vec![0.0; len];
    match &a.kind {
        ArchetypeKind::Tone { freq_hz, phase } => {
            for (t, v) in out.iter_mut().enumerate().take(end).skip(start) {
                *v = a.amplitude * (2.0 * PI * freq_hz * t as f64 / fs + phase).sin();
            }
        }
        ArchetypeKind::Chirp { start_hz, end_hz, phase } => {
            let dur = (end - start) as f64 / fs;
            let rate = (end_hz - start_hz) / dur;
            for (t, v) in out.iter_mut().enumerate().take(end).skip(start) {
                let tau = (t - start) as f64 / fs;
                *v = a.amplitude * (2.0 * PI * (start_hz * tau + 0.5 * rate * tau * tau) + phase).sin();
            }
        }
        ArchetypeKind::AmNoise { band, mod_hz, depth, noise_seed } => {
            let noise = band_limited_noise(*band, *noise_seed, sample_rate, len);
            let noise_rms = (energy(&noise) / len as f64).sqrt();
            if noise_rms == 0.0 {
                return Err(MixkitError::InvalidArgument("archetype: noise band holds no frequency bins".into()));
            }
            // Envelope normalised to unit mean square.
            let env_norm = (1.0 + 0.5 * depth * depth).sqrt();
            let gain = a.amplitude / (2f64.sqrt() * noise_rms * env_norm);
            for (t, v) in out.iter_mut().enumerate().take(end).skip(start) {
                let env = 1.0 + depth * (2.0 * PI * mod_hz * t as f64 / fs).sin();
                *v = gain * env * noise[t];
            }
        }
        ArchetypeKind::ImpulseTrain { period } => {
            let first = start.div_ceil(*period) * period;
            for t in (first..end).step_by(*period) {
                out[t] = a.amplitude;
            }
        }
    }
    if !matches!(a.kind, ArchetypeKind::ImpulseTrain { .. }) {
        let fade = ((FADE_SECONDS * fs) as usize).min((end - start) / 2);
        for i in 0..fade {
            let g = 0.5 - 0.5 * (PI * i as f64 / fade as f64).cos();
            if start > 0 {
                out[start + i] *= g;
            }
            if end < len {
                out[end - 1 - i] *= g;
            }
        }
    }
    quantize(&mut out);
    let rms = (energy(&out) / len as f64).sqrt();
    if !(MIN_RMS..=MAX_RMS).contains(&rms) {
        return Err(MixkitError::InvalidArgument(format!(
            "archetype: rendered RMS {rms:.4} outside [{MIN_RMS}, {MAX_RMS}]"
        )));
    }
    Waveform::new(out, sample_rate)
}
