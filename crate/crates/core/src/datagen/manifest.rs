//! Dataset manifest: a `key = value` text document with a version line.
//!
//! The canonical serialization lists every key in a fixed order with Rust's
//! shortest round-trip float formatting; its SHA-256 is the manifest hash.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use super::archetype::ArchetypeTag;
use super::rng::RNG_ALGORITHM;
use crate::error::{MixkitError, Result};
use crate::semantic::classifier::{validate_bands, Band, CALIBRATION_MARGIN_DB};

pub const MANIFEST_VERSION: u32 = 1;
const VERSION_KEY: &str = "mixkit_manifest_version";

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub seed: u64,
    pub sample_rate: u32,
    pub clip_samples: usize,
    pub eval_examples: usize,
    pub mom_examples: usize,
    pub min_sources: usize,
    pub max_sources: usize,
    /// Reference mixtures per mixture of mixtures.
    pub mom_references: usize,
    /// Sources per constituent of a MoM example; 0 draws from
    /// `min_sources..=max_sources` like the eval split.
    pub mom_sources_per_reference: usize,
    pub amplitude_min: f64,
    pub amplitude_max: f64,
    /// Tone amplitude the classifier is calibrated on.
    pub reference_amplitude: f64,
    pub bands: Vec<Band>,
    pub kinds: Vec<ArchetypeTag>,
}

impl Default for DatasetManifest {
    fn default() -> Self {
        Self {
            seed: 0,
            sample_rate: 8000,
            clip_samples: 8000,
            eval_examples: 32,
            mom_examples: 16,
            min_sources: 1,
            max_sources: 4,
            mom_references: 2,
            mom_sources_per_reference: 0,
            amplitude_min: 0.2,
            amplitude_max: 0.8,
            reference_amplitude: 0.5,
            bands: vec![
                Band::new(100.0, 400.0),
                Band::new(500.0, 1000.0),
                Band::new(1200.0, 2000.0),
                Band::new(2400.0, 3600.0),
            ],
            kinds: ArchetypeTag::ALL.to_vec(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| MixkitError::Format(format!("manifest: cannot parse {key} = {value:?}")))
}

impl DatasetManifest {
    pub fn num_classes(&self) -> usize {
        self.bands.len()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(MixkitError::InvalidArgument(format!("manifest: {m}")));
        validate_bands(&self.bands, self.sample_rate)?;
        if self.clip_samples < 16 {
            return invalid("clip_samples must be at least 16".into());
        }
        if self.min_sources == 0 || self.min_sources > self.max_sources {
            return invalid("need 1 <= min_sources <= max_sources".into());
        }
        if self.max_sources > self.num_classes() {
            return invalid(format!(
                "max_sources {} exceeds the {} classes available for distinct labels",
                self.max_sources,
                self.num_classes()
            ));
        }
        if self.mom_sources_per_reference > self.num_classes() {
            return invalid("mom_sources_per_reference exceeds the number of classes".into());
        }
        if self.mom_references == 0 {
            return invalid("mom_references must be positive".into());
        }
        if !(self.amplitude_min > 0.0 && self.amplitude_min <= self.amplitude_max && self.amplitude_max <= 1.0) {
            return invalid("need 0 < amplitude_min <= amplitude_max <= 1".into());
        }
        if !(self.reference_amplitude > 0.0) {
            return invalid("reference_amplitude must be positive".into());
        }
        if self.kinds.is_empty() {
            return invalid("at least one archetype kind is required".into());
        }
        Ok(())
    }

    /// The canonical text form; also what [`Self::parse`] reads.
    pub fn to_canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{VERSION_KEY} = {MANIFEST_VERSION}");
        let _ = writeln!(s, "rng = {RNG_ALGORITHM}");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "sample_rate = {}", self.sample_rate);
        let _ = writeln!(s, "clip_samples = {}", self.clip_samples);
        let _ = writeln!(s, "eval_examples = {}", self.eval_examples);
        let _ = writeln!(s, "mom_examples = {}", self.mom_examples);
        let _ = writeln!(s, "min_sources = {}", self.min_sources);
        let _ = writeln!(s, "max_sources = {}", self.max_sources);
        let _ = writeln!(s, "mom_references = {}", self.mom_references);
        let _ = writeln!(s, "mom_sources_per_reference = {}", self.mom_sources_per_reference);
        let _ = writeln!(s, "amplitude_min = {:?}", self.amplitude_min);
        let _ = writeln!(s, "amplitude_max = {:?}", self.amplitude_max);
        let _ = writeln!(s, "reference_amplitude = {:?}", self.reference_amplitude);
        let _ = writeln!(s, "calibration_margin_db = {CALIBRATION_MARGIN_DB:?}");
        let bands: Vec<String> = self.bands.iter().map(|b| format!("{:?}-{:?}", b.lo_hz, b.hi_hz)).collect();
        let _ = writeln!(s, "bands = {}", bands.join(","));
        let kinds: Vec<&str> = self.kinds.iter().map(|k| k.name()).collect();
        let _ = writeln!(s, "kinds = {}", kinds.join(","));
        s
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_canonical_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses a manifest. The version line is mandatory; omitted keys take
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| MixkitError::Format(format!("manifest line {}: expected key = value", lineno + 1)))?;
            entries.insert(k.trim().to_string(), v.trim().to_string());
        }
        match entries.remove(VERSION_KEY) {
            None => return Err(MixkitError::Format(format!("manifest: missing {VERSION_KEY} line"))),
            Some(v) if v != MANIFEST_VERSION.to_string() => {
                return Err(MixkitError::VersionMismatch { expected: MANIFEST_VERSION, found: v })
            }
            Some(_) => {}
        }
        let mut m = Self::default();
        for (key, value) in &entries {
            let v = value.as_str();
            match key.as_str() {
                "rng" if v != RNG_ALGORITHM => {
                    return Err(MixkitError::Format(format!("manifest: unsupported rng {v:?}")))
                }
                "rng" => {}
                "calibration_margin_db" => {
                    let margin: f64 = parse(key, v)?;
                    if margin != CALIBRATION_MARGIN_DB {
                        return Err(MixkitError::Format(format!(
                            "manifest: calibration margin {margin} differs from {CALIBRATION_MARGIN_DB}"
                        )));
                    }
                }
                "seed" => m.seed = parse(key, v)?,
                "sample_rate" => m.sample_rate = parse(key, v)?,
                "clip_samples" => m.clip_samples = parse(key, v)?,
                "eval_examples" => m.eval_examples = parse(key, v)?,
                "mom_examples" => m.mom_examples = parse(key, v)?,
                "min_sources" => m.min_sources = parse(key, v)?,
                "max_sources" => m.max_sources = parse(key, v)?,
                "mom_references" => m.mom_references = parse(key, v)?,
                "mom_sources_per_reference" => m.mom_sources_per_reference = parse(key, v)?,
                "amplitude_min" => m.amplitude_min = parse(key, v)?,
                "amplitude_max" => m.amplitude_max = parse(key, v)?,
                "reference_amplitude" => m.reference_amplitude = parse(key, v)?,
                "bands" => {
                    m.bands = v
                        .split(',')
                        .map(|b| {
                            let (lo, hi) = b
                                .trim()
                                .split_once('-')
                                .ok_or_else(|| MixkitError::Format(format!("manifest: bad band {b:?}")))?;
                            Ok(Band::new(parse("bands", lo.trim())?, parse("bands", hi.trim())?))
                        })
                        .collect::<Result<_>>()?
                }
                "kinds" => m.kinds = v.split(',').map(|k| k.trim().parse()).collect::<Result<_>>()?,
                other => return Err(MixkitError::Format(format!("manifest: unknown key {other:?}"))),
            }
        }
        m.validate()?;
        Ok(m)
    }
}
