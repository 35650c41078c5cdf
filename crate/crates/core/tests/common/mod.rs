//! Central finite-difference gradient checks shared by the gradient and
//! acceptance suites.

#![allow(dead_code)]

use mixkit::datagen::rng::DataRng;
use mixkit::mixit;
use mixkit::optimizer::{total_loss_and_grad, LossConfig, SemanticInput};
use mixkit::regularizers::{regularizer_gradients, regularizer_value, Regularizer};
use mixkit::semantic::{self, Aggregator, Band, PosteriorMatrix, ToyClassifier, EPS_CE};
use mixkit::{MixtureBatch, SourceSet, Waveform};

pub const FS: u32 = 8000;
pub const FD_STEP: f64 = 1e-5;

pub fn random_rows(rng: &mut DataRng, m: usize, len: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..len).map(|_| scale * rng.gaussian()).collect()).collect()
}

pub fn set(rows: &[Vec<f64>]) -> SourceSet {
    SourceSet::new(rows.to_vec(), FS).unwrap()
}

pub fn batch_of(rows: &[Vec<f64>]) -> MixtureBatch {
    MixtureBatch::from_references(rows.iter().map(|r| Waveform::new(r.clone(), FS).unwrap()).collect()).unwrap()
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Norm-wise relative error between two gradients.
pub fn rel_err(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let diff = norm(a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| x - y));
    let scale = norm(a.iter().flatten().copied()).max(norm(b.iter().flatten().copied())).max(1e-12);
    diff / scale
}

/// Central differences of `f` at every entry of `x`.
pub fn fd_grad(f: &dyn Fn(&[Vec<f64>]) -> f64, x: &[Vec<f64>], h: f64) -> Vec<Vec<f64>> {
    let mut work = x.to_vec();
    let mut g = vec![vec![0.0; x.first().map_or(0, Vec::len)]; x.len()];
    for i in 0..x.len() {
        for j in 0..x[i].len() {
            let orig = work[i][j];
            work[i][j] = orig + h;
            let up = f(&work);
            work[i][j] = orig - h;
            let down = f(&work);
            work[i][j] = orig;
            g[i][j] = (up - down) / (2.0 * h);
        }
    }
    g
}

/// Outcome of checking one loss at many random points.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub name: &'static str,
    pub checked: usize,
    pub skipped: usize,
    pub max_rel_err: f64,
}

impl GradCheck {
    fn new(name: &'static str) -> Self {
        Self { name, checked: 0, skipped: 0, max_rel_err: 0.0 }
    }

    fn record(&mut self, err: f64) {
        self.checked += 1;
        self.max_rel_err = self.max_rel_err.max(err);
    }
}

/// MixIT loss with the assignment held at the optimum of the base point.
/// Points where a perturbation would change the optimum are skipped.
pub fn check_mixit(points: usize, seed: u64) -> GradCheck {
    let mut out = GradCheck::new("mixit_envelope");
    let mut rng = DataRng::new(seed);
    let (m, len) = (4, 24);
    while out.checked < points {
        let refs = random_rows(&mut rng, 2, len, 1.0);
        let s = random_rows(&mut rng, m, len, 0.7);
        let b = batch_of(&refs);
        let best = mixit::exhaustive_mixit(&b, &set(&s), 30.0).unwrap();
        let f = |x: &[Vec<f64>]| mixit::exhaustive_mixit(&b, &set(x), 30.0).unwrap();
        // Kink check: the optimum must not change within the probe radius.
        let stable = (0..m).all(|i| {
            (0..len).step_by(5).all(|j| {
                let mut x = s.clone();
                x[i][j] += FD_STEP;
                let up = f(&x).assignment == best.assignment;
                x[i][j] -= 2.0 * FD_STEP;
                up && f(&x).assignment == best.assignment
            })
        });
        if !stable {
            out.skipped += 1;
            continue;
        }
        let analytic = mixit::mixit_loss_gradient(&b, &set(&s), 30.0, &best.assignment).unwrap();
        let fixed = |x: &[Vec<f64>]| mixit::evaluate_assignment(&b, &set(x), &best.assignment, 30.0).unwrap().total_loss;
        let numeric = fd_grad(&fixed, &s, FD_STEP);
        // The envelope value agrees with the full minimization at the base point.
        assert!((fixed(&s) - best.total_loss).abs() < 1e-12);
        out.record(rel_err(&analytic, &numeric));
    }
    out
}

pub fn check_regularizer(which: Regularizer, points: usize, seed: u64) -> GradCheck {
    let name = match which {
        Regularizer::SparsityL1 => "sparsity_l1",
        Regularizer::SparsityL1L2 => "sparsity_l1_l2",
        Regularizer::Covariance => "covariance",
    };
    let mut out = GradCheck::new(name);
    let mut rng = DataRng::new(seed);
    while out.checked < points {
        let s = random_rows(&mut rng, 4, 24, 0.5);
        let mix: Vec<f64> = (0..24).map(|t| s.iter().map(|r| r[t]).sum::<f64>() + 0.1 * rng.gaussian()).collect();
        if which == Regularizer::Covariance {
            // |cov| has a kink at zero; keep every pair away from it.
            let c = mixkit::regularizers::covariance_matrix(&set(&s));
            if c.iter().enumerate().any(|(i, row)| row.iter().enumerate().any(|(j, v)| i != j && v.abs() < 1e-3)) {
                out.skipped += 1;
                continue;
            }
        }
        let analytic = regularizer_gradients(&set(&s), &mix, which).unwrap();
        let f = |x: &[Vec<f64>]| regularizer_value(&set(x), &mix, which).unwrap();
        out.record(rel_err(&analytic, &fd_grad(&f, &s, FD_STEP)));
    }
    out
}

fn random_posteriors(rng: &mut DataRng, m: usize, k: usize) -> Vec<Vec<f64>> {
    (0..m).map(|_| (0..k).map(|_| rng.range(0.05, 0.95)).collect()).collect()
}

pub fn check_ce(aggregator: Aggregator, points: usize, seed: u64) -> GradCheck {
    let mut out = GradCheck::new(match aggregator {
        Aggregator::Or => "ce_or",
        Aggregator::Xor => "ce_xor",
    });
    let mut rng = DataRng::new(seed);
    while out.checked < points {
        let p = random_posteriors(&mut rng, 4, 3);
        let labels: Vec<u8> = (0..3).map(|_| rng.below(2) as u8).collect();
        let pm = PosteriorMatrix::new(p.clone(), labels.clone()).unwrap();
        let agg = semantic::aggregate(&pm, aggregator);
        if agg.iter().any(|&a| a < 10.0 * EPS_CE || a > 1.0 - 10.0 * EPS_CE) {
            out.skipped += 1;
            continue;
        }
        let analytic = semantic::ce_loss_grad(&pm, aggregator);
        let f = |x: &[Vec<f64>]| semantic::ce_loss(&PosteriorMatrix::new(x.to_vec(), labels.clone()).unwrap(), aggregator);
        out.record(rel_err(&analytic, &fd_grad(&f, &p, 1e-6)));
    }
    out
}

pub fn check_cosine(points: usize, seed: u64) -> GradCheck {
    let mut out = GradCheck::new("cosine");
    let mut rng = DataRng::new(seed);
    while out.checked < points {
        let p = random_posteriors(&mut rng, 4, 3);
        let pm = PosteriorMatrix::new(p.clone(), vec![0; 3]).unwrap();
        let analytic = semantic::cosine_loss_grad(&pm).unwrap();
        let f = |x: &[Vec<f64>]| semantic::cosine_loss(&PosteriorMatrix::new(x.to_vec(), vec![0; 3]).unwrap()).unwrap();
        out.record(rel_err(&analytic, &fd_grad(&f, &p, 1e-6)));
    }
    out
}

pub fn default_bands() -> Vec<Band> {
    vec![Band::new(100.0, 400.0), Band::new(500.0, 1000.0), Band::new(1200.0, 2000.0), Band::new(2400.0, 3600.0)]
}

/// Composite loss with every weight set to one, semantic terms flowing
/// through the band-power classifier.
pub fn check_composite(points: usize, seed: u64) -> GradCheck {
    let mut out = GradCheck::new("composite_all_weights_1");
    let mut rng = DataRng::new(seed);
    let len = 64;
    let clf = ToyClassifier::calibrate(&default_bands(), FS, len, 0.5).unwrap();
    let cfg = LossConfig {
        weight_l1: 1.0,
        weight_l1l2: 1.0,
        weight_cov: 1.0,
        weight_ce: 1.0,
        weight_cos: 1.0,
        num_sources: 3,
        ..Default::default()
    };
    while out.checked < points {
        let refs = random_rows(&mut rng, 2, len, 0.5);
        let s = random_rows(&mut rng, 3, len, 0.3);
        let labels: Vec<u8> = (0..4).map(|_| rng.below(2) as u8).collect();
        let b = batch_of(&refs);
        let sem = SemanticInput { classifier: &clf, labels: &labels };
        let base = total_loss_and_grad(&b, &set(&s), &cfg, Some(sem)).unwrap();
        let post: Vec<Vec<f64>> = s.iter().map(|r| clf.classify(r).unwrap()).collect();
        let pm = PosteriorMatrix::new(post, labels.clone()).unwrap();
        let agg = semantic::aggregate(&pm, cfg.aggregator);
        let cov = mixkit::regularizers::covariance_matrix(&set(&s));
        let near_kink = cov.iter().enumerate().any(|(i, r)| r.iter().enumerate().any(|(j, v)| i != j && v.abs() < 1e-4));
        if near_kink || agg.iter().any(|&a| a < 10.0 * EPS_CE || a > 1.0 - 10.0 * EPS_CE) {
            out.skipped += 1;
            continue;
        }
        let fixed = |x: &[Vec<f64>]| {
            let xs = set(x);
            let mixit_part =
                mixit::evaluate_assignment(&b, &xs, &base.assignment, cfg.snr_max_db).unwrap().total_loss;
            let e = total_loss_and_grad(&b, &xs, &cfg, Some(sem)).unwrap();
            e.breakdown.total - e.breakdown.mixit + mixit_part
        };
        out.record(rel_err(&base.gradient, &fd_grad(&fixed, &s, FD_STEP)));
    }
    out
}

/// Every gradient check at `points` random points each.
pub fn gradient_suite(points: usize, seed: u64) -> Vec<GradCheck> {
    vec![
        check_mixit(points, seed),
        check_regularizer(Regularizer::SparsityL1, points, seed + 1),
        check_regularizer(Regularizer::SparsityL1L2, points, seed + 2),
        check_regularizer(Regularizer::Covariance, points, seed + 3),
        check_ce(Aggregator::Or, points, seed + 4),
        check_ce(Aggregator::Xor, points, seed + 5),
        check_cosine(points, seed + 6),
        check_composite(points, seed + 7),
    ]
}
