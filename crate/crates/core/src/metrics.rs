//! Separation metrics: MSi (multi-source SI-SNR improvement), 1S
//! (single-source reconstruction), MoMi (mixture-of-mixtures improvement)
//! and active-source counting, plus their aggregation into a report.

pub mod hungarian;

pub use hungarian::{assignment_cost, hungarian_assign};


use crate::error::{MixkitError, Result};
use crate::mixit::{self, MixitSearch};
use crate::signal::{check_len, energy, si_snr, MixtureBatch, SourceSet, Waveform};

/// Magnitude that replaces infinite SI-SNR values in assignment costs.
pub const INFINITE_COST_SURROGATE: f64 = 1e9;

/// Reported metric values are clamped to `±REPORT_CAP_DB`.
pub const REPORT_CAP_DB: f64 = 100.0;

/// A reference is active when its RMS exceeds this fraction of the input
/// mixture's RMS.
pub const ACTIVE_REFERENCE_RATIO: f64 = 1e-4;

/// Default threshold of [`active_source_count`], relative to the remix.
pub const DEFAULT_ACTIVE_THRESHOLD_DB: f64 = -30.0;

/// One evaluation unit: ground-truth sources, their mixture and the
/// separator's estimates.
#[derive(Debug, Clone)]
pub struct EvalExample {
    pub references: Vec<Waveform>,
    pub input_mixture: Waveform,
    pub estimates: SourceSet,
    pub label_vector: Option<Vec<u8>>,
}

impl EvalExample {
    pub fn new(references: Vec<Waveform>, input_mixture: Waveform, estimates: SourceSet) -> Result<Self> {
        for r in &references {
            check_len(input_mixture.len(), r.len())?;
        }
        check_len(input_mixture.len(), estimates.len())?;
        Ok(Self { references, input_mixture, estimates, label_vector: None })
    }

    /// References whose RMS exceeds `1e-4 ×` the input mixture RMS.
    pub fn active_references(&self) -> Vec<&Waveform> {
        let threshold = ACTIVE_REFERENCE_RATIO * raw_rms(self.input_mixture.samples());
        self.references.iter().filter(|r| raw_rms(r.samples()) > threshold).collect()
    }
}

/// Clamps a metric to the report range, mapping the infinite sentinels to
/// the cap.
pub fn cap_db(v: f64) -> f64 {
    v.clamp(-REPORT_CAP_DB, REPORT_CAP_DB)
}

fn raw_rms(w: &[f64]) -> f64 {
    (energy(w) / w.len().max(1) as f64).sqrt()
}

fn si_snr_cost(v: f64) -> f64 {
    if v == f64::INFINITY {
        -INFINITE_COST_SURROGATE
    } else if v == f64::NEG_INFINITY {
        INFINITE_COST_SURROGATE
    } else {
        -v
    }
}

/// Mean SI-SNR improvement over Hungarian-aligned reference/estimate pairs.
///
/// Returns `Ok(None)` for examples with fewer than two active references.
/// Perfect pairs propagate `+∞`.
pub fn msi(example: &EvalExample) -> Result<Option<f64>> {
    let active = example.active_references();
    if active.is_empty() {
        return Err(MixkitError::NoActiveReferences);
    }
    if active.len() < 2 {
        return Ok(None);
    }
    let est = example.estimates.rows();
    let scores: Vec<Vec<f64>> = active
        .iter()
        .map(|r| est.iter().map(|e| si_snr(r.samples(), e)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = if active.len() <= est.len() {
        let cost: Vec<Vec<f64>> = scores.iter().map(|row| row.iter().map(|&v| si_snr_cost(v)).collect()).collect();
        hungarian_assign(&cost)?.into_iter().enumerate().collect()
    } else {
        // More active references than outputs: align every output instead.
        let cost: Vec<Vec<f64>> =
            (0..est.len()).map(|j| scores.iter().map(|row| si_snr_cost(row[j])).collect()).collect();
        hungarian_assign(&cost)?.into_iter().enumerate().map(|(j, i)| (i, j)).collect()
    };
    let mut total = 0.0;
    for &(i, j) in &pairs {
        let baseline = si_snr(active[i].samples(), example.input_mixture.samples())?;
        total += scores[i][j] - baseline;
    }
    Ok(Some(total / pairs.len() as f64))
}

/// Best single-output SI-SNR on an example with exactly one active reference.
pub fn one_s(example: &EvalExample) -> Result<f64> {
    let active = example.active_references();
    match active.len() {
        0 => Err(MixkitError::NoActiveReferences),
        1 => {
            let mut best = f64::NEG_INFINITY;
            for e in example.estimates.rows() {
                best = best.max(si_snr(active[0].samples(), e)?);
            }
            Ok(best)
        }
        n => Err(MixkitError::NotSingleSource { active: n }),
    }
}

/// SI-SNR improvement of the reference mixtures rebuilt through the optimal
/// binary mixing matrix, averaged over references.
pub fn momi(batch: &MixtureBatch, s: &SourceSet, search: MixitSearch, cap: u64, snr_max_db: f64) -> Result<f64> {
    if batch.num_references() < 2 {
        return Err(MixkitError::InvalidArgument("MoMi needs at least two reference mixtures".into()));
    }
    let best = mixit::mixit(batch, s, snr_max_db, search, cap)?;
    let remixed = best.assignment.remix(s);
    let mut total = 0.0;
    for (n, est) in remixed.iter().enumerate() {
        let x = batch.reference(n);
        total += si_snr(x, est)? - si_snr(x, batch.mom().samples())?;
    }
    Ok(total / batch.num_references() as f64)
}

/// Number of sources whose RMS is at least `10^(threshold_db/20)` times the
/// RMS of the sum of all sources. Silent sources never count.
pub fn active_source_count(s: &SourceSet, threshold_db: f64) -> usize {
    let total = raw_rms(&s.sum());
    let threshold = total * 10f64.powf(threshold_db / 20.0);
    s.rows()
        .iter()
        .filter(|r| {
            let v = raw_rms(r);
            v > 0.0 && v >= threshold
        })
        .count()
}

/// Per-example metric row. Metric values are already clamped for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleMetrics {
    pub id: String,
    pub true_sources: usize,
    pub active_estimates: usize,
    pub msi_db: Option<f64>,
    pub one_s_db: Option<f64>,
    pub momi_db: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CategoryCounts {
    pub multi_source: usize,
    pub single_source: usize,
    pub mom: usize,
}

/// Aggregate of [`ExampleMetrics`] rows; `NaN` marks an empty category.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub msi_db: f64,
    pub one_s_db: f64,
    pub momi_db: f64,
    pub mean_active_estimates: f64,
    pub counts: CategoryCounts,
    pub selection_score: f64,
}

/// `3 · MSi + 1S`.
pub fn selection_score(msi_db: f64, one_s_db: f64) -> f64 {
    3.0 * msi_db + one_s_db
}

/// Scores one example: MSi when at least two references are active, 1S when
/// exactly one is, and MoMi when the reference mixtures are supplied.
pub fn score_example(
    id: &str,
    example: &EvalExample,
    mom: Option<&MixtureBatch>,
    search: MixitSearch,
    cap: u64,
    snr_max_db: f64,
) -> Result<ExampleMetrics> {
    let active = example.active_references().len();
    let momi_db = match mom {
        Some(batch) if batch.num_references() >= 2 => {
            Some(cap_db(momi(batch, &example.estimates, search, cap, snr_max_db)?))
        }
        _ => None,
    };
    Ok(ExampleMetrics {
        id: id.to_string(),
        true_sources: active,
        active_estimates: active_source_count(&example.estimates, DEFAULT_ACTIVE_THRESHOLD_DB),
        msi_db: msi(example)?.map(cap_db),
        one_s_db: if active == 1 { Some(cap_db(one_s(example)?)) } else { None },
        momi_db,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        (f64::NAN, 0)
    } else {
        (sum / n as f64, n)
    }
}

impl MetricsReport {
    pub fn from_rows(rows: &[ExampleMetrics]) -> Self {
        let (msi_db, multi_source) = mean(rows.iter().filter_map(|r| r.msi_db));
        let (one_s_db, single_source) = mean(rows.iter().filter_map(|r| r.one_s_db));
        let (momi_db, mom) = mean(rows.iter().filter_map(|r| r.momi_db));
        let (mean_active_estimates, _) = mean(rows.iter().map(|r| r.active_estimates as f64));
        Self {
            msi_db,
            one_s_db,
            momi_db,
            mean_active_estimates,
            counts: CategoryCounts { multi_source, single_source, mom },
            selection_score: selection_score(msi_db, one_s_db),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wf(v: Vec<f64>) -> Waveform {
        Waveform::new(v, 8000).unwrap()
    }

    fn sig(len: usize, f: f64, phase: f64) -> Vec<f64> {
        (0..len).map(|t| (f * t as f64 + phase).sin()).collect()
    }

    #[test]
    fn perfect_and_copy_estimates() {
        let a = sig(200, 0.3, 0.0);
        let b = sig(200, 0.71, 1.0);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let perfect = SourceSet::new(vec![a.clone(), b.clone(), vec![0.0; 200]], 8000).unwrap();
        let ex = EvalExample::new(vec![wf(a.clone()), wf(b.clone())], wf(mix.clone()), perfect).unwrap();
        assert_eq!(msi(&ex).unwrap(), Some(f64::INFINITY));

        let copies = SourceSet::new(vec![mix.clone(); 3], 8000).unwrap();
        let ex = EvalExample::new(vec![wf(a), wf(b)], wf(mix), copies).unwrap();
        assert!(msi(&ex).unwrap().unwrap().abs() < 1e-9);
    }

    #[test]
    fn single_source_paths() {
        let a = sig(100, 0.3, 0.0);
        let est = SourceSet::new(vec![a.clone(), vec![0.0; 100]], 8000).unwrap();
        let ex = EvalExample::new(vec![wf(a.clone()), wf(vec![0.0; 100])], wf(a.clone()), est).unwrap();
        assert_eq!(msi(&ex).unwrap(), None);
        assert_eq!(one_s(&ex).unwrap(), f64::INFINITY);

        let b = sig(100, 0.9, 0.2);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let est = SourceSet::new(vec![a.clone(), b.clone()], 8000).unwrap();
        let ex = EvalExample::new(vec![wf(a), wf(b)], wf(mix), est).unwrap();
        assert!(matches!(one_s(&ex), Err(MixkitError::NotSingleSource { active: 2 })));
    }

    #[test]
    fn no_active_reference_is_an_error() {
        let est = SourceSet::new(vec![vec![1.0; 4]], 8000).unwrap();
        let ex = EvalExample::new(vec![wf(vec![0.0; 4])], wf(vec![1.0; 4]), est).unwrap();
        assert!(matches!(msi(&ex), Err(MixkitError::NoActiveReferences)));
    }

    #[test]
    fn active_count_examples() {
        let a = sig(400, 0.3, 0.0);
        let z = vec![0.0; 400];
        let one = SourceSet::new(vec![a.clone(), z.clone(), z.clone()], 8000).unwrap();
        assert_eq!(active_source_count(&one, -30.0), 1);
        let quarter: Vec<f64> = a.iter().map(|v| v / 4.0).collect();
        let even = SourceSet::new(vec![quarter; 4], 8000).unwrap();
        assert_eq!(active_source_count(&even, -30.0), 4);
        let quiet: Vec<f64> = sig(400, 1.1, 0.4).iter().map(|v| v * 0.01).collect();
        let split = SourceSet::new(vec![a, quiet], 8000).unwrap();
        assert_eq!(active_source_count(&split, -30.0), 1);
    }

    #[test]
    fn report_aggregates_rows() {
        let rows = vec![
            ExampleMetrics { id: "a".into(), true_sources: 2, active_estimates: 2, msi_db: Some(10.0), one_s_db: None, momi_db: Some(4.0) },
            ExampleMetrics { id: "b".into(), true_sources: 3, active_estimates: 4, msi_db: Some(20.0), one_s_db: None, momi_db: None },
            ExampleMetrics { id: "c".into(), true_sources: 1, active_estimates: 1, msi_db: None, one_s_db: Some(30.0), momi_db: None },
        ];
        let r = MetricsReport::from_rows(&rows);
        assert_eq!(r.msi_db, 15.0);
        assert_eq!(r.one_s_db, 30.0);
        assert_eq!(r.momi_db, 4.0);
        assert_eq!(r.selection_score, 75.0);
        assert_eq!(r.counts, CategoryCounts { multi_source: 2, single_source: 1, mom: 1 });
        assert!((r.mean_active_estimates - 7.0 / 3.0).abs() < 1e-15);
    }
}
