//! Seeded synthetic corpus.
//!
//! Two splits are produced from a [`DatasetManifest`]:
//!
//! - `eval`: mixtures of one to four class-distinct archetypal sources, with
//!   the isolated sources kept for supervised metrics;
//! - `mom`: mixtures of mixtures, each built from independent eval-style
//!   examples used as reference mixtures.
//!
//! Every example draws from its own stream keyed by `(seed, split, index)`,
//! so examples can be generated in parallel and in any order.

pub mod archetype;
pub mod manifest;
pub mod rng;
pub mod wav;

use std::fs;
use std::path::Path;

use rayon::prelude::*;

pub use archetype::{synth_source, ArchetypeKind, ArchetypeTag, SourceArchetype};
pub use manifest::DatasetManifest;
pub use rng::DataRng;

use crate::error::{MixkitError, Result};
use crate::metrics::EvalExample;
use crate::semantic::ToyClassifier;
use crate::signal::{MixtureBatch, SourceSet, Waveform};

const EVAL_STREAM: u64 = 1;
const MOM_STREAM: u64 = 2;
const MAX_DRAW_ATTEMPTS: usize = 16;

pub const EVAL_SPLIT: &str = "eval";
pub const MOM_SPLIT: &str = "mom";

/// A mixture of isolated sources with its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticExample {
    pub id: String,
    pub sources: Vec<Waveform>,
    pub classes: Vec<usize>,
    pub kinds: Vec<ArchetypeTag>,
    pub mixture: Waveform,
    pub labels: Vec<u8>,
}

impl SyntheticExample {
    fn assemble(
        id: String,
        sources: Vec<Waveform>,
        classes: Vec<usize>,
        kinds: Vec<ArchetypeTag>,
        num_classes: usize,
    ) -> Result<Self> {
        let mixture = sum_quantized(&sources)?;
        let mut labels = vec![0u8; num_classes];
        for &c in &classes {
            labels[c] = 1;
        }
        Ok(Self { id, sources, classes, kinds, mixture, labels })
    }

    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    /// Pairs the example with a separator's estimates for evaluation.
    pub fn to_eval(&self, estimates: SourceSet) -> Result<EvalExample> {
        let mut ex = EvalExample::new(self.sources.clone(), self.mixture.clone(), estimates)?;
        ex.label_vector = Some(self.labels.clone());
        Ok(ex)
    }
}

/// Mixture of mixtures with the examples it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MomExample {
    pub id: String,
    pub constituents: Vec<SyntheticExample>,
    pub batch: MixtureBatch,
    /// Elementwise OR of the constituents' labels.
    pub labels: Vec<u8>,
}

impl MomExample {
    fn assemble(id: String, constituents: Vec<SyntheticExample>) -> Result<Self> {
        let batch = MixtureBatch::from_references(constituents.iter().map(|c| c.mixture.clone()).collect())?;
        let labels = union_labels(constituents.iter().map(|c| c.labels.as_slice()));
        Ok(Self { id, constituents, batch, labels })
    }

    /// All underlying isolated sources, constituent by constituent.
    pub fn sources(&self) -> Vec<Waveform> {
        self.constituents.iter().flat_map(|c| c.sources.iter().cloned()).collect()
    }

    pub fn kinds(&self) -> Vec<ArchetypeTag> {
        self.constituents.iter().flat_map(|c| c.kinds.iter().copied()).collect()
    }

    /// Treats the mixture of mixtures as the input of a supervised example.
    pub fn to_eval(&self, estimates: SourceSet) -> Result<EvalExample> {
        let mut ex = EvalExample::new(self.sources(), self.batch.mom().clone(), estimates)?;
        ex.label_vector = Some(self.labels.clone());
        Ok(ex)
    }
}

/// Elementwise OR of binary label vectors.
pub fn union_labels<'a>(labels: impl Iterator<Item = &'a [u8]>) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::new();
    for l in labels {
        if out.is_empty() {
            out = vec![0; l.len()];
        }
        for (o, &v) in out.iter_mut().zip(l) {
            *o |= v;
        }
    }
    out
}

fn sum_quantized(sources: &[Waveform]) -> Result<Waveform> {
    let first = sources.first().ok_or(MixkitError::TooFewSources { needed: 1, got: 0 })?;
    let mut mix = vec![0.0; first.len()];
    for s in sources {
        for (acc, v) in mix.iter_mut().zip(s.samples()) {
            *acc += v;
        }
    }
    wav::quantize(&mut mix);
    Waveform::new(mix, first.sample_rate())
}

/// Draws one example with exactly `count` class-distinct sources.
pub fn make_example_with_count(
    rng: &mut DataRng,
    manifest: &DatasetManifest,
    count: usize,
    id: String,
) -> Result<SyntheticExample> {
    let k = manifest.num_classes();
    if count == 0 || count > k {
        return Err(MixkitError::InvalidArgument(format!("cannot draw {count} distinct classes out of {k}")));
    }
    let classes: Vec<usize> = rng.permutation(k).into_iter().take(count).collect();
    let mut sources = Vec::with_capacity(count);
    let mut kinds = Vec::with_capacity(count);
    for &class_id in &classes {
        let mut last_err = None;
        let mut rendered = None;
        for _ in 0..MAX_DRAW_ATTEMPTS {
            let tag = manifest.kinds[rng.below(manifest.kinds.len())];
            let a = SourceArchetype::draw(
                rng,
                tag,
                class_id,
                manifest.bands[class_id],
                (manifest.amplitude_min, manifest.amplitude_max),
                manifest.sample_rate,
                manifest.clip_samples,
            );
            match synth_source(&a, manifest.sample_rate, manifest.clip_samples) {
                Ok(w) => {
                    rendered = Some((tag, w));
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        let (tag, w) = match rendered {
            Some(r) => r,
            None => return Err(last_err.expect("at least one draw attempted")),
        };
        kinds.push(tag);
        sources.push(w);
    }
    SyntheticExample::assemble(id, sources, classes, kinds, k)
}

/// Draws an example whose source count is uniform over
/// `min_sources..=max_sources`.
pub fn make_eval_example(rng: &mut DataRng, manifest: &DatasetManifest, id: String) -> Result<SyntheticExample> {
    let span = manifest.max_sources - manifest.min_sources + 1;
    let count = manifest.min_sources + rng.below(span);
    make_example_with_count(rng, manifest, count, id)
}

/// Draws `mom_references` independent examples and mixes them.
pub fn make_mom_example(rng: &mut DataRng, manifest: &DatasetManifest, id: String) -> Result<MomExample> {
    let constituents = (0..manifest.mom_references)
        .map(|n| {
            let sub = format!("{id}.{n}");
            if manifest.mom_sources_per_reference > 0 {
                make_example_with_count(rng, manifest, manifest.mom_sources_per_reference, sub)
            } else {
                make_eval_example(rng, manifest, sub)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    MomExample::assemble(id, constituents)
}

pub fn example_id(index: usize) -> String {
    format!("{index:05}")
}

pub fn eval_example_at(manifest: &DatasetManifest, index: usize) -> Result<SyntheticExample> {
    let mut rng = DataRng::derived(manifest.seed, EVAL_STREAM, index as u64);
    make_eval_example(&mut rng, manifest, example_id(index))
}

pub fn mom_example_at(manifest: &DatasetManifest, index: usize) -> Result<MomExample> {
    let mut rng = DataRng::derived(manifest.seed, MOM_STREAM, index as u64);
    make_mom_example(&mut rng, manifest, example_id(index))
}

/// An in-memory corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub eval: Vec<SyntheticExample>,
    pub mom: Vec<MomExample>,
}

impl Dataset {
    pub fn classifier(&self) -> Result<ToyClassifier> {
        ToyClassifier::calibrate(
            &self.manifest.bands,
            self.manifest.sample_rate,
            self.manifest.clip_samples,
            self.manifest.reference_amplitude,
        )
    }
}

pub fn generate_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    manifest.validate()?;
    let eval = (0..manifest.eval_examples)
        .into_par_iter()
        .map(|i| eval_example_at(manifest, i))
        .collect::<Result<Vec<_>>>()?;
    let mom = (0..manifest.mom_examples)
        .into_par_iter()
        .map(|i| mom_example_at(manifest, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { manifest: manifest.clone(), eval, mom })
}

const MANIFEST_FILE: &str = "manifest.cfg";
const HASH_FILE: &str = "manifest.sha256";
const LABELS_FILE: &str = "labels.txt";

fn join_nums<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn write_example_dir(dir: &Path, mixture: &Waveform, sources: &[Waveform], labels_text: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    wav::write_wav(&dir.join("mixture.wav"), mixture)?;
    for (i, s) in sources.iter().enumerate() {
        wav::write_wav(&dir.join(format!("source_{i}.wav")), s)?;
    }
    fs::write(dir.join(LABELS_FILE), labels_text)?;
    Ok(())
}

fn labels_text(ex: &SyntheticExample) -> String {
    let kinds: Vec<&str> = ex.kinds.iter().map(|k| k.name()).collect();
    format!(
        "labels = {}\nclasses = {}\nkinds = {}\n",
        join_nums(&ex.labels),
        join_nums(&ex.classes),
        kinds.join(" ")
    )
}

/// Writes `<dir>/<split>/<id>/{mixture.wav, source_i.wav, labels.txt}` plus
/// the canonical manifest and its hash.
pub fn write_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MANIFEST_FILE), dataset.manifest.to_canonical_string())?;
    fs::write(dir.join(HASH_FILE), format!("{}\n", dataset.manifest.hash()))?;
    for ex in &dataset.eval {
        write_example_dir(&dir.join(EVAL_SPLIT).join(&ex.id), &ex.mixture, &ex.sources, &labels_text(ex))?;
    }
    for ex in &dataset.mom {
        let groups: Vec<usize> =
            ex.constituents.iter().enumerate().flat_map(|(n, c)| std::iter::repeat_n(n, c.num_sources())).collect();
        let classes: Vec<usize> = ex.constituents.iter().flat_map(|c| c.classes.iter().copied()).collect();
        let kinds: Vec<&str> = ex.kinds().iter().map(|k| k.name()).collect();
        let text = format!(
            "labels = {}\nclasses = {}\nkinds = {}\ngroups = {}\n",
            join_nums(&ex.labels),
            join_nums(&classes),
            kinds.join(" "),
            join_nums(&groups)
        );
        write_example_dir(&dir.join(MOM_SPLIT).join(&ex.id), ex.batch.mom(), &ex.sources(), &text)?;
    }
    Ok(())
}

struct LabelsFile {
    classes: Vec<usize>,
    kinds: Vec<ArchetypeTag>,
    groups: Option<Vec<usize>>,
}

fn parse_labels(text: &str, num_classes: usize) -> Result<LabelsFile> {
    let bad = |m: String| MixkitError::Format(format!("labels.txt: {m}"));
    let mut classes = None;
    let mut kinds = None;
    let mut groups = None;
    let mut labels = None;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("bad line {line:?}")))?;
        let nums = || -> Result<Vec<usize>> {
            v.split_whitespace().map(|x| x.parse().map_err(|_| bad(format!("bad number {x:?}")))).collect()
        };
        match k.trim() {
            "labels" => labels = Some(nums()?),
            "classes" => classes = Some(nums()?),
            "groups" => groups = Some(nums()?),
            "kinds" => kinds = Some(v.split_whitespace().map(str::parse).collect::<Result<Vec<ArchetypeTag>>>()?),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    let classes = classes.ok_or_else(|| bad("missing classes".into()))?;
    let kinds = kinds.ok_or_else(|| bad("missing kinds".into()))?;
    let labels = labels.ok_or_else(|| bad("missing labels".into()))?;
    if labels.len() != num_classes || classes.iter().any(|&c| c >= num_classes) || kinds.len() != classes.len() {
        return Err(bad("inconsistent label, class and kind counts".into()));
    }
    Ok(LabelsFile { classes, kinds, groups })
}

fn read_sources(dir: &Path, count: usize, manifest: &DatasetManifest) -> Result<Vec<Waveform>> {
    (0..count)
        .map(|i| {
            let w = wav::read_wav(&dir.join(format!("source_{i}.wav")))?;
            if w.len() != manifest.clip_samples || w.sample_rate() != manifest.sample_rate {
                return Err(MixkitError::Format(format!("{}: source {i} has the wrong shape", dir.display())));
            }
            Ok(w)
        })
        .collect()
}

/// Reads a corpus written by [`write_dataset`], verifying that its stored
/// manifest hash matches `manifest`.
pub fn read_dataset(dir: &Path, manifest: &DatasetManifest) -> Result<Dataset> {
    let stored_text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let stored = DatasetManifest::parse(&stored_text)?;
    let stored_hash = fs::read_to_string(dir.join(HASH_FILE))?.trim().to_string();
    if stored.hash() != stored_hash {
        return Err(MixkitError::HashMismatch { expected: stored_hash, found: stored.hash() });
    }
    if manifest.hash() != stored_hash {
        return Err(MixkitError::HashMismatch { expected: manifest.hash(), found: stored_hash });
    }
    let k = manifest.num_classes();
    let mut eval = Vec::with_capacity(manifest.eval_examples);
    for i in 0..manifest.eval_examples {
        let id = example_id(i);
        let ex_dir = dir.join(EVAL_SPLIT).join(&id);
        let labels = parse_labels(&fs::read_to_string(ex_dir.join(LABELS_FILE))?, k)?;
        let sources = read_sources(&ex_dir, labels.classes.len(), manifest)?;
        eval.push(SyntheticExample::assemble(id, sources, labels.classes, labels.kinds, k)?);
    }
    let mut mom = Vec::with_capacity(manifest.mom_examples);
    for i in 0..manifest.mom_examples {
        let id = example_id(i);
        let ex_dir = dir.join(MOM_SPLIT).join(&id);
        let labels = parse_labels(&fs::read_to_string(ex_dir.join(LABELS_FILE))?, k)?;
        let groups = labels.groups.ok_or_else(|| MixkitError::Format("labels.txt: missing groups".into()))?;
        if groups.len() != labels.classes.len() {
            return Err(MixkitError::Format("labels.txt: group count differs from source count".into()));
        }
        let sources = read_sources(&ex_dir, groups.len(), manifest)?;
        let n_refs = groups.iter().max().map_or(0, |g| g + 1);
        let mut constituents = Vec::with_capacity(n_refs);
        for n in 0..n_refs {
            let members: Vec<usize> = (0..groups.len()).filter(|&j| groups[j] == n).collect();
            constituents.push(SyntheticExample::assemble(
                format!("{id}.{n}"),
                members.iter().map(|&j| sources[j].clone()).collect(),
                members.iter().map(|&j| labels.classes[j]).collect(),
                members.iter().map(|&j| labels.kinds[j]).collect(),
                k,
            )?);
        }
        mom.push(MomExample::assemble(id, constituents)?);
    }
    Ok(Dataset { manifest: manifest.clone(), eval, mom })
}
