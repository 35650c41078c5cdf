//! Exhaustive versus least-squares assignment benchmark.

use std::time::Instant;

use crate::datagen::rng::{derive_seed, DataRng};
use crate::error::Result;
use crate::mixit::{self, exhaustive_feasible, MixitResult};
use crate::report::Table;
use crate::signal::{MixtureBatch, SourceSet, Waveform};

const INSTANCE_STREAM: u64 = 21;
const BENCH_SAMPLE_RATE: u32 = 8000;

/// How benchmark instances are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// References and estimates are independent Gaussian noise.
    Random,
    /// Estimates are the true sources plus noise at +20 dB, and each
    /// reference is the sum of a random nonempty subset of them.
    Separable,
}

/// Estimate noise level of separable instances.
pub const SEPARABLE_SNR_DB: f64 = 20.0;

/// A seeded problem instance.
pub fn random_instance(
    seed: u64,
    n: usize,
    m: usize,
    len: usize,
    kind: InstanceKind,
) -> Result<(MixtureBatch, SourceSet)> {
    let mut rng = DataRng::new(seed);
    let noise = |len: usize, rng: &mut DataRng| -> Vec<f64> { (0..len).map(|_| rng.gaussian()).collect() };
    match kind {
        InstanceKind::Random => {
            let refs = (0..n)
                .map(|_| Waveform::new(noise(len, &mut rng), BENCH_SAMPLE_RATE))
                .collect::<Result<Vec<_>>>()?;
            let est: Vec<Vec<f64>> = (0..m).map(|_| noise(len, &mut rng)).collect();
            Ok((MixtureBatch::from_references(refs)?, SourceSet::new(est, BENCH_SAMPLE_RATE)?))
        }
        InstanceKind::Separable => {
            // Every reference owns at least one source when m >= n.
            let mut owners: Vec<usize> = (0..m).map(|j| if j < n { j } else { rng.below(n) }).collect();
            let perm = rng.permutation(m);
            owners = perm.iter().map(|&p| owners[p]).collect();
            let sources: Vec<Vec<f64>> = (0..m)
                .map(|_| {
                    let gain = rng.range(0.2, 1.0);
                    noise(len, &mut rng).into_iter().map(|v| gain * v).collect()
                })
                .collect();
            let mut refs = vec![vec![0.0; len]; n];
            for (j, src) in sources.iter().enumerate() {
                for (acc, v) in refs[owners[j]].iter_mut().zip(src) {
                    *acc += v;
                }
            }
            let noise_gain = 10f64.powf(-SEPARABLE_SNR_DB / 20.0);
            let est: Vec<Vec<f64>> = sources
                .iter()
                .map(|src| {
                    let r = (src.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
                    src.iter().map(|v| v + noise_gain * r * rng.gaussian()).collect()
                })
                .collect();
            let refs = refs.into_iter().map(|r| Waveform::new(r, BENCH_SAMPLE_RATE)).collect::<Result<Vec<_>>>()?;
            Ok((MixtureBatch::from_references(refs)?, SourceSet::new(est, BENCH_SAMPLE_RATE)?))
        }
    }
}

/// Benchmark parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sources: Vec<usize>,
    pub references: usize,
    pub trials: usize,
    pub len: usize,
    pub seed: u64,
    pub cap: u64,
    pub kind: InstanceKind,
    pub snr_max_db: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sources: vec![2, 4, 8, 12, 16],
            references: 2,
            trials: 100,
            len: 1000,
            seed: 0,
            cap: mixit::DEFAULT_EXHAUSTIVE_CAP,
            kind: InstanceKind::Separable,
            snr_max_db: crate::DEFAULT_SNR_MAX_DB,
        }
    }
}

/// Timings and agreement for one `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub exhaustive_feasible: bool,
    pub exhaustive_mean_s: Option<f64>,
    pub exhaustive_median_s: Option<f64>,
    pub efficient_mean_s: f64,
    pub efficient_median_s: f64,
    /// Fraction of trials where both searches return the same assignment.
    pub agreement_rate: Option<f64>,
    /// Mean of `efficient − exhaustive` total loss, in dB.
    pub mean_loss_gap_db: Option<f64>,
    pub min_loss_gap_db: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len() / 2;
    if s.len() % 2 == 1 {
        s[k]
    } else {
        0.5 * (s[k - 1] + s[k])
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Per-trial outcome, exposed for tests that need every instance.
#[derive(Debug, Clone)]
pub struct TrialResult {
    pub efficient: MixitResult,
    pub exhaustive: Option<MixitResult>,
    pub efficient_s: f64,
    pub exhaustive_s: Option<f64>,
}

/// Runs both searches on the seeded instance `trial` for `m` sources.
/// Exhaustive search is skipped when `N^M` exceeds `cap`.
pub fn run_trial(cfg: &BenchConfig, m: usize, trial: usize) -> Result<TrialResult> {
    let seed = derive_seed(cfg.seed, INSTANCE_STREAM, ((m as u64) << 32) | trial as u64);
    let (batch, s) = random_instance(seed, cfg.references, m, cfg.len, cfg.kind)?;
    let (efficient, efficient_s) = timed(|| mixit::efficient_mixit(&batch, &s, cfg.snr_max_db));
    let efficient = efficient?;
    if !exhaustive_feasible(cfg.references, m, cfg.cap) {
        return Ok(TrialResult { efficient, exhaustive: None, efficient_s, exhaustive_s: None });
    }
    let (exhaustive, exhaustive_s) =
        timed(|| mixit::exhaustive_mixit_with_cap(&batch, &s, cfg.snr_max_db, cfg.cap));
    Ok(TrialResult { efficient, exhaustive: Some(exhaustive?), efficient_s, exhaustive_s: Some(exhaustive_s) })
}

/// One row per entry of `cfg.sources`. Trials run sequentially so timings
/// are not distorted by contention.
pub fn bench_mixit(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    cfg.sources
        .iter()
        .map(|&m| {
            let trials = (0..cfg.trials).map(|t| run_trial(cfg, m, t)).collect::<Result<Vec<_>>>()?;
            let eff: Vec<f64> = trials.iter().map(|t| t.efficient_s).collect();
            let feasible = exhaustive_feasible(cfg.references, m, cfg.cap);
            let mut row = BenchRow {
                m,
                n: cfg.references,
                trials: cfg.trials,
                exhaustive_feasible: feasible,
                exhaustive_mean_s: None,
                exhaustive_median_s: None,
                efficient_mean_s: mean(&eff),
                efficient_median_s: median(&eff),
                agreement_rate: None,
                mean_loss_gap_db: None,
                min_loss_gap_db: None,
            };
            if feasible && !trials.is_empty() {
                let exh: Vec<f64> = trials.iter().filter_map(|t| t.exhaustive_s).collect();
                let gaps: Vec<f64> = trials
                    .iter()
                    .filter_map(|t| t.exhaustive.as_ref().map(|e| t.efficient.total_loss - e.total_loss))
                    .collect();
                let agree = trials
                    .iter()
                    .filter(|t| t.exhaustive.as_ref().is_some_and(|e| e.assignment == t.efficient.assignment))
                    .count();
                row.exhaustive_mean_s = Some(mean(&exh));
                row.exhaustive_median_s = Some(median(&exh));
                row.agreement_rate = Some(agree as f64 / trials.len() as f64);
                row.mean_loss_gap_db = Some(mean(&gaps));
                row.min_loss_gap_db = Some(gaps.iter().copied().fold(f64::INFINITY, f64::min));
            }
            Ok(row)
        })
        .collect()
}

pub fn bench_table(rows: &[BenchRow]) -> Table {
    let mut t = Table::new(&[
        "m",
        "n",
        "trials",
        "exhaustive_feasible",
        "exhaustive_mean_s",
        "exhaustive_median_s",
        "efficient_mean_s",
        "efficient_median_s",
        "agreement_rate",
        "mean_loss_gap_db",
        "min_loss_gap_db",
    ]);
    for r in rows {
        t.push(vec![
            r.m.into(),
            r.n.into(),
            r.trials.into(),
            r.exhaustive_feasible.into(),
            r.exhaustive_mean_s.into(),
            r.exhaustive_median_s.into(),
            r.efficient_mean_s.into(),
            r.efficient_median_s.into(),
            r.agreement_rate.into(),
            r.mean_loss_gap_db.into(),
            r.min_loss_gap_db.into(),
        ]);
    }
    t
}
