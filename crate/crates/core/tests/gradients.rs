mod common;

use common::*;
use mixkit::datagen::rng::DataRng;
use mixkit::optimizer::{total_loss_and_grad, LossConfig, OptimState};
use mixkit::regularizers::Regularizer;
use mixkit::semantic::{Aggregator, ToyClassifier};
use mixkit::signal::thresholded_snr_loss_grad;
use mixkit::signal::thresholded_snr_loss;

const TOL: f64 = 1e-4;

fn assert_check(c: GradCheck) {
    assert!(c.max_rel_err < TOL, "{}: max relative error {:.3e}", c.name, c.max_rel_err);
    assert!(c.skipped < c.checked, "{}: too many points skipped ({})", c.name, c.skipped);
}

#[test]
fn thresholded_loss_gradient() {
    let mut rng = DataRng::new(3);
    for _ in 0..50 {
        let y = random_rows(&mut rng, 1, 20, 1.0);
        let yhat = random_rows(&mut rng, 1, 20, 1.0);
        let g = thresholded_snr_loss_grad(&y[0], &yhat[0], 30.0).unwrap();
        let f = |x: &[Vec<f64>]| thresholded_snr_loss(&y[0], &x[0], 30.0).unwrap();
        assert!(rel_err(&[g], &fd_grad(&f, &yhat, FD_STEP)) < TOL);
    }
}

#[test]
fn mixit_envelope_gradient() {
    assert_check(check_mixit(30, 10));
}

#[test]
fn regularizer_gradients() {
    for (i, r) in [Regularizer::SparsityL1, Regularizer::SparsityL1L2, Regularizer::Covariance].into_iter().enumerate() {
        assert_check(check_regularizer(r, 30, 20 + i as u64));
    }
}

#[test]
fn semantic_gradients() {
    assert_check(check_ce(Aggregator::Or, 30, 30));
    assert_check(check_ce(Aggregator::Xor, 30, 31));
    assert_check(check_cosine(30, 32));
}

#[test]
fn composite_gradient() {
    assert_check(check_composite(15, 40));
}

#[test]
fn classifier_chain_gradient() {
    let clf = ToyClassifier::calibrate(&default_bands(), FS, 64, 0.5).unwrap();
    let mut rng = DataRng::new(50);
    for _ in 0..20 {
        let w = random_rows(&mut rng, 1, 64, 0.3);
        let weights: Vec<f64> = (0..4).map(|_| rng.gaussian()).collect();
        let trace = clf.forward(&w[0]).unwrap();
        let g = clf.backward(&trace, &weights);
        let f = |x: &[Vec<f64>]| clf.classify(&x[0]).unwrap().iter().zip(&weights).map(|(p, c)| p * c).sum::<f64>();
        assert!(rel_err(&[g], &fd_grad(&f, &w, 1e-6)) < TOL);
    }
}

#[test]
fn envelope_step_is_a_descent_direction() {
    let mut rng = DataRng::new(60);
    let cfg = LossConfig { weight_l1l2: 2.0, weight_cov: 0.5, num_sources: 4, ..Default::default() };
    let mut descents = 0;
    for seed in 0..20 {
        let refs = random_rows(&mut rng, 2, 48, 0.5);
        let b = batch_of(&refs);
        let st = OptimState::init(&b, 4, 1e-2, seed).unwrap();
        let base = total_loss_and_grad(&b, &st.estimates, &cfg, None).unwrap();
        let norm: f64 = base.gradient.iter().flatten().map(|g| g * g).sum::<f64>().sqrt();
        let stepped: Vec<Vec<f64>> = st
            .estimates
            .rows()
            .iter()
            .zip(&base.gradient)
            .map(|(r, g)| r.iter().zip(g).map(|(x, d)| x - 1e-6 / norm * d).collect())
            .collect();
        let after = total_loss_and_grad(&b, &set(&stepped), &cfg, None).unwrap();
        assert!(after.breakdown.total <= base.breakdown.total, "seed {seed}");
        descents += 1;
    }
    assert_eq!(descents, 20);
}
