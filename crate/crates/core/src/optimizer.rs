//! Direct minimization of the composite separation loss over the source
//! estimates.
//!
//! There is no separation network here: the estimates themselves are the
//! free variables. Each step re-solves the MixIT assignment, takes an Adam
//! step on the gradient with that assignment held fixed, and projects the
//! result back onto the mixture-consistent set.

use rayon::prelude::*;

use crate::datagen::rng::{derive_seed, DataRng};
use crate::datagen::{ArchetypeTag, Dataset};
use crate::error::{MixkitError, Result};
use crate::metrics::{self, ExampleMetrics, MetricsReport};
use crate::mixit::{self, BinaryMixingMatrix, MixitSearch, DEFAULT_EXHAUSTIVE_CAP};
use crate::regularizers::{regularizer_gradients, regularizer_value, Regularizer};
use crate::semantic::{self, Aggregator, PosteriorMatrix, ToyClassifier};
use crate::signal::{self, project_rows, MixtureBatch, SourceSet};

/// Initial noise level relative to the mixture RMS, in dB.
pub const INIT_NOISE_DB: f64 = -40.0;

const RUN_STREAM: u64 = 11;
const PROBE_STREAM: u64 = 12;

/// Weights and settings of the composite loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LossConfig {
    pub snr_max_db: f64,
    pub weight_l1: f64,
    pub weight_l1l2: f64,
    pub weight_cov: f64,
    pub weight_ce: f64,
    pub weight_cos: f64,
    pub aggregator: Aggregator,
    /// Number of estimated sources.
    pub num_sources: usize,
    pub search: MixitSearch,
    pub exhaustive_cap: u64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            snr_max_db: crate::DEFAULT_SNR_MAX_DB,
            weight_l1: 0.0,
            weight_l1l2: 0.0,
            weight_cov: 0.0,
            weight_ce: 0.0,
            weight_cos: 0.0,
            aggregator: Aggregator::Or,
            num_sources: 4,
            search: MixitSearch::Auto,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.weight_l1, self.weight_l1l2, self.weight_cov, self.weight_ce, self.weight_cos];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(MixkitError::InvalidArgument("loss weights must be finite and non-negative".into()));
        }
        if !(self.snr_max_db > 0.0 && self.snr_max_db.is_finite()) {
            return Err(MixkitError::InvalidArgument("snr_max_db must be positive".into()));
        }
        if self.num_sources == 0 {
            return Err(MixkitError::InvalidArgument("need at least one estimated source".into()));
        }
        Ok(())
    }

    pub fn uses_semantic(&self) -> bool {
        self.weight_ce > 0.0 || self.weight_cos > 0.0
    }
}

/// Weak labels plus the differentiable classifier producing posteriors.
#[derive(Debug, Clone, Copy)]
pub struct SemanticInput<'a> {
    pub classifier: &'a ToyClassifier,
    pub labels: &'a [u8],
}

/// Rejects semantic losses on inputs containing non-tonal archetypes, for
/// which the band-power classifier is not a meaningful stand-in.
pub fn check_semantic_kinds(cfg: &LossConfig, kinds: &[ArchetypeTag]) -> Result<()> {
    if cfg.uses_semantic() {
        if let Some(k) = kinds.iter().find(|k| !k.is_tonal()) {
            return Err(MixkitError::Unsupported(format!(
                "semantic losses need tone or chirp sources; got {}",
                k.name()
            )));
        }
    }
    Ok(())
}

/// Value of each loss term, unweighted.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossBreakdown {
    pub mixit: f64,
    pub l1: f64,
    pub l1l2: f64,
    pub cov: f64,
    pub ce: f64,
    pub cos: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct LossEval {
    pub breakdown: LossBreakdown,
    pub assignment: BinaryMixingMatrix,
    pub gradient: Vec<Vec<f64>>,
}

fn add_scaled(grad: &mut [Vec<f64>], part: &[Vec<f64>], w: f64) {
    for (g, p) in grad.iter_mut().zip(part) {
        for (a, b) in g.iter_mut().zip(p) {
            *a += w * b;
        }
    }
}

/// Composite loss value and its gradient with the MixIT assignment held at
/// the optimum for `s`.
pub fn total_loss_and_grad(
    batch: &MixtureBatch,
    s: &SourceSet,
    cfg: &LossConfig,
    semantic: Option<SemanticInput<'_>>,
) -> Result<LossEval> {
    cfg.validate()?;
    let best = mixit::mixit(batch, s, cfg.snr_max_db, cfg.search, cfg.exhaustive_cap)?;
    let mut gradient = mixit::mixit_loss_gradient(batch, s, cfg.snr_max_db, &best.assignment)?;
    let mut b = LossBreakdown { mixit: best.total_loss, ..Default::default() };
    let mix = batch.mom().samples();
    let terms = [
        (cfg.weight_l1, Regularizer::SparsityL1),
        (cfg.weight_l1l2, Regularizer::SparsityL1L2),
        (cfg.weight_cov, Regularizer::Covariance),
    ];
    for (w, which) in terms {
        if w == 0.0 {
            continue;
        }
        let v = regularizer_value(s, mix, which)?;
        match which {
            Regularizer::SparsityL1 => b.l1 = v,
            Regularizer::SparsityL1L2 => b.l1l2 = v,
            Regularizer::Covariance => b.cov = v,
        }
        add_scaled(&mut gradient, &regularizer_gradients(s, mix, which)?, w);
    }
    if cfg.uses_semantic() {
        let sem = semantic.ok_or_else(|| {
            MixkitError::InvalidArgument("semantic loss weights need labels and a classifier".into())
        })?;
        let traces = s.rows().iter().map(|r| sem.classifier.forward(r)).collect::<Result<Vec<_>>>()?;
        let post = PosteriorMatrix::new(traces.iter().map(|t| t.posteriors.clone()).collect(), sem.labels.to_vec())?;
        let mut dl_dp = vec![vec![0.0; post.num_classes()]; post.num_sources()];
        if cfg.weight_ce > 0.0 {
            b.ce = semantic::ce_loss(&post, cfg.aggregator);
            add_scaled(&mut dl_dp, &semantic::ce_loss_grad(&post, cfg.aggregator), cfg.weight_ce);
        }
        if cfg.weight_cos > 0.0 {
            b.cos = semantic::cosine_loss(&post)?;
            add_scaled(&mut dl_dp, &semantic::cosine_loss_grad(&post)?, cfg.weight_cos);
        }
        for (m, trace) in traces.iter().enumerate() {
            let g = sem.classifier.backward(trace, &dl_dp[m]);
            for (a, v) in gradient[m].iter_mut().zip(g) {
                *a += v;
            }
        }
    }
    b.total = b.mixit
        + cfg.weight_l1 * b.l1
        + cfg.weight_l1l2 * b.l1l2
        + cfg.weight_cov * b.cov
        + cfg.weight_ce * b.ce
        + cfg.weight_cos * b.cos;
    Ok(LossEval { breakdown: b, assignment: best.assignment, gradient })
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub steps: usize,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { step_size: 1e-2, beta1: 0.9, beta2: 0.999, epsilon: 1e-8, steps: 2000 }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(MixkitError::InvalidArgument("steps must be at least 1".into()));
        }
        if !(self.step_size > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(MixkitError::InvalidArgument("invalid Adam hyperparameters".into()));
        }
        Ok(())
    }
}

/// Estimates and Adam moments.
#[derive(Debug, Clone)]
pub struct OptimState {
    pub estimates: SourceSet,
    pub step: usize,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    pub step_size: f64,
}

impl OptimState {
    /// `x̄/M` plus seeded Gaussian noise at [`INIT_NOISE_DB`] relative to the
    /// mixture RMS, projected to be mixture consistent.
    pub fn init(batch: &MixtureBatch, num_sources: usize, step_size: f64, seed: u64) -> Result<Self> {
        if num_sources == 0 {
            return Err(MixkitError::InvalidArgument("need at least one estimated source".into()));
        }
        let mix = batch.mom().samples();
        let sigma = signal::rms(mix) * 10f64.powf(INIT_NOISE_DB / 20.0);
        let mut rng = DataRng::new(seed);
        let mut rows: Vec<Vec<f64>> = (0..num_sources)
            .map(|_| mix.iter().map(|&x| x / num_sources as f64 + sigma * rng.gaussian()).collect())
            .collect();
        project_rows(&mut rows, mix);
        Ok(Self::from_estimates(SourceSet::new(rows, batch.sample_rate())?, step_size))
    }

    pub fn from_estimates(estimates: SourceSet, step_size: f64) -> Self {
        let zeros = vec![vec![0.0; estimates.len()]; estimates.num_sources()];
        Self { estimates, step: 0, first: zeros.clone(), second: zeros, step_size }
    }

    /// One Adam update followed by the mixture-consistency projection.
    /// Returns the loss evaluated before the update.
    pub fn step(
        &mut self,
        batch: &MixtureBatch,
        cfg: &LossConfig,
        adam: &AdamConfig,
        semantic: Option<SemanticInput<'_>>,
    ) -> Result<LossBreakdown> {
        let eval = total_loss_and_grad(batch, &self.estimates, cfg, semantic)?;
        if !eval.breakdown.total.is_finite() || eval.gradient.iter().flatten().any(|g| !g.is_finite()) {
            return Err(MixkitError::Divergence { step: self.step });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - adam.beta1.powi(t);
        let c2 = 1.0 - adam.beta2.powi(t);
        let mut rows = self.estimates.rows().to_vec();
        for m in 0..rows.len() {
            let (row, g, m1, m2) = (&mut rows[m], &eval.gradient[m], &mut self.first[m], &mut self.second[m]);
            for i in 0..row.len() {
                m1[i] = adam.beta1 * m1[i] + (1.0 - adam.beta1) * g[i];
                m2[i] = adam.beta2 * m2[i] + (1.0 - adam.beta2) * g[i] * g[i];
                row[i] -= self.step_size * (m1[i] / c1) / ((m2[i] / c2).sqrt() + adam.epsilon);
            }
        }
        project_rows(&mut rows, batch.mom().samples());
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(MixkitError::Divergence { step: self.step });
        }
        self.estimates = SourceSet::new(rows, batch.sample_rate())?;
        Ok(eval.breakdown)
    }
}

#[derive(Debug, Clone)]
pub struct OptimOutcome {
    pub estimates: SourceSet,
    /// Composite loss before each step.
    pub trace: Vec<f64>,
    /// Composite loss at the final estimates.
    pub final_loss: LossBreakdown,
}

/// Runs `adam.steps` updates from the seeded initialization.
pub fn optimize_estimates(
    batch: &MixtureBatch,
    cfg: &LossConfig,
    adam: &AdamConfig,
    seed: u64,
    semantic: Option<SemanticInput<'_>>,
) -> Result<OptimOutcome> {
    let state = OptimState::init(batch, cfg.num_sources, adam.step_size, seed)?;
    optimize_from(batch, cfg, adam, state, semantic)
}

/// Same as [`optimize_estimates`] from an explicit starting state.
pub fn optimize_from(
    batch: &MixtureBatch,
    cfg: &LossConfig,
    adam: &AdamConfig,
    mut state: OptimState,
    semantic: Option<SemanticInput<'_>>,
) -> Result<OptimOutcome> {
    cfg.validate()?;
    adam.validate()?;
    let mut trace = Vec::with_capacity(adam.steps);
    for _ in 0..adam.steps {
        trace.push(state.step(batch, cfg, adam, semantic)?.total);
    }
    let final_loss = total_loss_and_grad(batch, &state.estimates, cfg, semantic)?.breakdown;
    Ok(OptimOutcome { estimates: state.estimates, trace, final_loss })
}

/// Soft monotonicity: the mean of every `window`-step block of the trace is
/// at most the previous block's mean plus `tolerance`.
pub fn trace_is_soft_monotone(trace: &[f64], window: usize, tolerance: f64) -> bool {
    let means: Vec<f64> = trace.chunks_exact(window.max(1)).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
    means.windows(2).all(|w| w[1] <= w[0] + tolerance)
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Name of the swept loss family, for reporting.
    pub family: String,
    pub lambda: f64,
    pub config: LossConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub point: SweepPoint,
    pub report: MetricsReport,
    pub best: bool,
}

/// Index of the highest selection score; ties go to the lowest index and
/// NaN scores never win.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_nan() {
            continue;
        }
        if best.map_or(true, |b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

fn tonal_only(kinds: &[ArchetypeTag]) -> bool {
    kinds.iter().all(|k| k.is_tonal())
}

/// Optimizes one config over the dataset and scores the estimates.
///
/// MoM examples provide MSi (against all underlying sources, with the MoM as
/// input), MoMi and the active-estimate count. Single-source eval examples
/// are optimized as one-reference problems and provide 1S.
pub fn evaluate_config(
    point: &SweepPoint,
    dataset: &Dataset,
    classifier: Option<&ToyClassifier>,
    adam: &AdamConfig,
    seed: u64,
) -> Result<(Vec<ExampleMetrics>, MetricsReport)> {
    let cfg = &point.config;
    cfg.validate()?;
    if cfg.uses_semantic() {
        for ex in &dataset.mom {
            check_semantic_kinds(cfg, &ex.kinds())?;
        }
        if classifier.is_none() {
            return Err(MixkitError::InvalidArgument("semantic loss weights need a classifier".into()));
        }
    }
    let probes: Vec<_> = dataset.eval.iter().enumerate().filter(|(_, e)| e.num_sources() == 1).collect();
    let mom_rows = dataset
        .mom
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let sem = classifier.map(|c| SemanticInput { classifier: c, labels: &ex.labels });
            let out = optimize_estimates(&ex.batch, cfg, adam, derive_seed(seed, RUN_STREAM, i as u64), sem)?;
            let eval = ex.to_eval(out.estimates)?;
            let id = format!("mom/{}", ex.id);
            metrics::score_example(&id, &eval, Some(&ex.batch), cfg.search, cfg.exhaustive_cap, cfg.snr_max_db)
        })
        .collect::<Result<Vec<_>>>()?;
    let probe_rows = probes
        .par_iter()
        .map(|&(i, ex)| {
            let batch = MixtureBatch::from_references(vec![ex.mixture.clone()])?;
            // Semantic terms are skipped on probes with non-tonal content.
            let sem = classifier
                .filter(|_| tonal_only(&ex.kinds))
                .map(|c| SemanticInput { classifier: c, labels: &ex.labels });
            let probe_cfg = if sem.is_none() { LossConfig { weight_ce: 0.0, weight_cos: 0.0, ..cfg.clone() } } else { cfg.clone() };
            let out = optimize_estimates(&batch, &probe_cfg, adam, derive_seed(seed, PROBE_STREAM, i as u64), sem)?;
            let eval = ex.to_eval(out.estimates)?;
            let id = format!("eval/{}", ex.id);
            metrics::score_example(&id, &eval, None, cfg.search, cfg.exhaustive_cap, cfg.snr_max_db)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = MetricsReport::from_rows(&mom_rows);
    let probe_report = MetricsReport::from_rows(&probe_rows);
    report.one_s_db = probe_report.one_s_db;
    report.counts.single_source = probe_report.counts.single_source;
    report.selection_score = metrics::selection_score(report.msi_db, report.one_s_db);
    let mut rows = mom_rows;
    rows.extend(probe_rows);
    Ok((rows, report))
}

/// Evaluates every point and flags the best selection score.
pub fn sweep(points: &[SweepPoint], dataset: &Dataset, adam: &AdamConfig, seed: u64) -> Result<Vec<SweepRow>> {
    if points.is_empty() {
        return Err(MixkitError::InvalidArgument("sweep needs at least one configuration".into()));
    }
    if dataset.mom.is_empty() && dataset.eval.is_empty() {
        return Err(MixkitError::InvalidArgument("sweep needs a nonempty dataset".into()));
    }
    let classifier = if points.iter().any(|p| p.config.uses_semantic()) { Some(dataset.classifier()?) } else { None };
    let mut rows = Vec::with_capacity(points.len());
    for (index, point) in points.iter().enumerate() {
        let (_, report) = evaluate_config(point, dataset, classifier.as_ref(), adam, seed)?;
        rows.push(SweepRow { index, point: point.clone(), report, best: false });
    }
    let scores: Vec<f64> = rows.iter().map(|r| r.report.selection_score).collect();
    if let Some(b) = select_best(&scores) {
        rows[b].best = true;
    }
    Ok(rows)
}
