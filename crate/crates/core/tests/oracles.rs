mod common;

use common::*;
use mixkit::datagen::rng::DataRng;
use mixkit::mixit::{self, BinaryMixingMatrix};
use mixkit::signal::thresholded_snr_loss;
use nalgebra::{DMatrix, SymmetricEigen};

/// `X Ŝᵀ G⁺` with the pseudoinverse of the Gram matrix built from its
/// eigendecomposition, dropping eigenvalues below a relative floor.
fn pinv_mixing(refs: &[Vec<f64>], s: &[Vec<f64>]) -> DMatrix<f64> {
    let len = s[0].len();
    let sm = DMatrix::from_fn(s.len(), len, |i, j| s[i][j]);
    let xm = DMatrix::from_fn(refs.len(), len, |i, j| refs[i][j]);
    let gram = &sm * sm.transpose();
    let eig = SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let inv = eig.eigenvalues.map(|l| if l.abs() > 1e-10 * top { 1.0 / l } else { 0.0 });
    let pinv = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    xm * sm.transpose() * pinv
}

#[test]
fn least_squares_matches_pseudoinverse_with_duplicated_rows() {
    let mut rng = DataRng::new(77);
    for _ in 0..50 {
        let refs = random_rows(&mut rng, 2, 64, 1.0);
        let mut s = random_rows(&mut rng, 3, 64, 1.0);
        s.push(s[1].clone());
        let got = mixit::least_squares_mixing(&batch_of(&refs), &set(&s)).unwrap();
        let want = pinv_mixing(&refs, &s);
        for (n, row) in got.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                assert!(v.is_finite());
                assert!((v - want[(n, m)]).abs() < 1e-4, "({n},{m}): {v} vs {}", want[(n, m)]);
            }
        }
    }
}

#[test]
fn least_squares_matches_pseudoinverse_when_full_rank() {
    let mut rng = DataRng::new(78);
    for _ in 0..50 {
        let refs = random_rows(&mut rng, 3, 64, 1.0);
        let s = random_rows(&mut rng, 4, 64, 1.0);
        let got = mixit::least_squares_mixing(&batch_of(&refs), &set(&s)).unwrap();
        let want = pinv_mixing(&refs, &s);
        for (n, row) in got.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                assert!((v - want[(n, m)]).abs() < 1e-4);
            }
        }
    }
}

/// Scores every one of the `N^M` assignments directly.
fn brute_force(refs: &[Vec<f64>], s: &[Vec<f64>], snr_max_db: f64) -> (f64, Vec<Vec<usize>>) {
    let (n, m) = (refs.len(), s.len());
    let mut best = f64::INFINITY;
    let mut winners = Vec::new();
    for code in 0..n.pow(m as u32) {
        let owners: Vec<usize> = (0..m).map(|j| code / n.pow(j as u32) % n).collect();
        let loss: f64 = (0..n)
            .map(|r| {
                let remix: Vec<f64> = (0..refs[r].len())
                    .map(|t| (0..m).filter(|&j| owners[j] == r).map(|j| s[j][t]).sum())
                    .collect();
                thresholded_snr_loss(&refs[r], &remix, snr_max_db).unwrap()
            })
            .sum();
        if loss < best - 1e-9 {
            best = loss;
            winners.clear();
        }
        if loss <= best + 1e-9 {
            winners.push(owners);
        }
    }
    (best, winners)
}

#[test]
fn exhaustive_search_matches_brute_force() {
    let mut rng = DataRng::new(79);
    for trial in 0..200 {
        let refs = random_rows(&mut rng, 2, 32, 1.0);
        let s = random_rows(&mut rng, 4, 32, 0.6);
        let got = mixit::exhaustive_mixit(&batch_of(&refs), &set(&s), 30.0).unwrap();
        let (best, winners) = brute_force(&refs, &s, 30.0);
        assert!((got.total_loss - best).abs() < 1e-9, "trial {trial}");
        assert!(winners.iter().any(|w| w.as_slice() == got.assignment.owners()));
    }
}

#[test]
fn exhaustive_ties_pick_the_smallest_assignment() {
    // Two identical references make every swap of rows an equal-loss tie.
    let mut rng = DataRng::new(80);
    let r = random_rows(&mut rng, 1, 32, 1.0).remove(0);
    let refs = vec![r.clone(), r];
    let s = random_rows(&mut rng, 3, 32, 0.5);
    let got = mixit::exhaustive_mixit(&batch_of(&refs), &set(&s), 30.0).unwrap();
    let (_, winners) = brute_force(&refs, &s, 30.0);
    // Order is over owner vectors, the enumeration order of the search.
    let smallest = winners.iter().min().unwrap();
    assert_eq!(got.assignment.owners(), smallest.as_slice());
    assert!(BinaryMixingMatrix::from_owners(2, smallest.clone()).is_ok());
}
