//! Mixing-matrix search for the mixture invariant training loss.
//!
//! Every estimated source is assigned to exactly one reference mixture. The
//! loss is the sum over references of the thresholded SNR loss between each
//! reference and the sum of the sources assigned to it, minimised over all
//! `N^M` assignments. Two searches are provided: exhaustive enumeration, and a
//! least-squares relaxation projected back onto binary assignments.

use crate::error::{MixkitError, Result};
use crate::linalg::{cholesky, cholesky_solve, SymMatrix};
use crate::signal::{self, check_len, dot, energy, loss_from_energies, snr_threshold, MixtureBatch, SourceSet};

/// Default upper bound on `N^M` for exhaustive enumeration. Two references
/// and sixteen sources (65536 assignments) is the first common configuration
/// that falls outside it.
pub const DEFAULT_EXHAUSTIVE_CAP: u64 = 1 << 15;

/// Relative ridge applied to the source Gram matrix: `ρ = RIDGE · trace/M`.
pub const LEAST_SQUARES_RIDGE: f64 = 1e-6;

/// Candidates whose Gram-expanded loss lies this close to the running
/// minimum are re-scored on the waveforms before the winner is chosen.
const RESCORE_WINDOW_DB: f64 = 1e-9;

/// An `N × M` zero/one matrix with exactly one 1 per column.
///
/// Stored as the owning row of every column.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMixingMatrix {
    rows: usize,
    owners: Vec<usize>,
}

impl BinaryMixingMatrix {
    /// `owners[m]` is the reference mixture that source `m` is assigned to.
    pub fn from_owners(rows: usize, owners: Vec<usize>) -> Result<Self> {
        if rows == 0 {
            return Err(MixkitError::InvalidAssignment("matrix needs at least one row".into()));
        }
        if owners.is_empty() {
            return Err(MixkitError::InvalidAssignment("matrix needs at least one column".into()));
        }
        if let Some(bad) = owners.iter().find(|&&o| o >= rows) {
            return Err(MixkitError::InvalidAssignment(format!("row {bad} out of range for {rows} rows")));
        }
        Ok(Self { rows, owners })
    }

    /// Validates a dense 0/1 matrix given as rows.
    pub fn from_entries(entries: &[Vec<u8>]) -> Result<Self> {
        let rows = entries.len();
        let cols = entries.first().map_or(0, Vec::len);
        let mut owners = Vec::with_capacity(cols);
        for m in 0..cols {
            let mut owner = None;
            for (n, row) in entries.iter().enumerate() {
                check_len(cols, row.len())?;
                match row[m] {
                    0 => {}
                    1 if owner.is_none() => owner = Some(n),
                    _ => {
                        return Err(MixkitError::InvalidAssignment(format!(
                            "column {m} must hold exactly one 1"
                        )))
                    }
                }
            }
            owners.push(owner.ok_or_else(|| {
                MixkitError::InvalidAssignment(format!("column {m} must hold exactly one 1"))
            })?);
        }
        Self::from_owners(rows, owners)
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_cols(&self) -> usize {
        self.owners.len()
    }

    pub fn owners(&self) -> &[usize] {
        &self.owners
    }

    pub fn owner(&self, m: usize) -> usize {
        self.owners[m]
    }

    pub fn get(&self, n: usize, m: usize) -> u8 {
        u8::from(self.owners[m] == n)
    }

    pub fn entries(&self) -> Vec<Vec<u8>> {
        (0..self.rows).map(|n| (0..self.num_cols()).map(|m| self.get(n, m)).collect()).collect()
    }

    /// Column `m` of the result is column `perm[m]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Self {
        Self { rows: self.rows, owners: perm.iter().map(|&p| self.owners[p]).collect() }
    }

    /// `[A ŝ]_n` for every row.
    pub fn remix(&self, s: &SourceSet) -> Vec<Vec<f64>> {
        remix_rows(self, s.rows())
    }
}

impl std::fmt::Display for BinaryMixingMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (i, o) in self.owners.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{o}")?;
        }
        Ok(())
    }
}

/// Assignment together with the loss it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct MixitResult {
    pub assignment: BinaryMixingMatrix,
    pub total_loss: f64,
    pub per_reference_loss: Vec<f64>,
}

/// Which search produces the mixing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixitSearch {
    Exhaustive,
    Efficient,
    /// Exhaustive when `N^M` fits under the cap, efficient otherwise.
    Auto,
}

pub(crate) fn remix_rows(a: &BinaryMixingMatrix, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let len = rows.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; len]; a.num_rows()];
    for (m, row) in rows.iter().enumerate() {
        let target = &mut out[a.owner(m)];
        for (acc, v) in target.iter_mut().zip(row) {
            *acc += v;
        }
    }
    out
}

fn check_shapes(batch: &MixtureBatch, s: &SourceSet) -> Result<()> {
    check_len(batch.len(), s.len())
}

/// Evaluates the summed thresholded SNR loss at a fixed assignment.
pub fn evaluate_assignment(
    batch: &MixtureBatch,
    s: &SourceSet,
    assignment: &BinaryMixingMatrix,
    snr_max_db: f64,
) -> Result<MixitResult> {
    check_shapes(batch, s)?;
    if assignment.num_rows() != batch.num_references() || assignment.num_cols() != s.num_sources() {
        return Err(MixkitError::InvalidAssignment(format!(
            "assignment is {}x{}, problem is {}x{}",
            assignment.num_rows(),
            assignment.num_cols(),
            batch.num_references(),
            s.num_sources()
        )));
    }
    let remixed = assignment.remix(s);
    let per_reference_loss = remixed
        .iter()
        .enumerate()
        .map(|(n, est)| signal::thresholded_snr_loss(batch.reference(n), est, snr_max_db))
        .collect::<Result<Vec<_>>>()?;
    Ok(MixitResult {
        assignment: assignment.clone(),
        total_loss: per_reference_loss.iter().sum(),
        per_reference_loss,
    })
}

/// Inner products needed to score any assignment without touching the
/// waveforms again.
pub(crate) struct MixitStats {
    pub ref_energy: Vec<f64>,
    /// `cross[n][m] = ⟨x_n, ŝ_m⟩`
    pub cross: Vec<Vec<f64>>,
    pub gram: SymMatrix,
}

impl MixitStats {
    pub fn new(batch: &MixtureBatch, s: &SourceSet) -> Result<Self> {
        let stats = Self::new_unchecked(batch, s)?;
        if stats.ref_energy.contains(&0.0) {
            return Err(MixkitError::UndefinedReference);
        }
        Ok(stats)
    }

    fn new_unchecked(batch: &MixtureBatch, s: &SourceSet) -> Result<Self> {
        check_shapes(batch, s)?;
        let ref_energy = batch.references().iter().map(|r| energy(r.samples())).collect();
        let cross = batch
            .references()
            .iter()
            .map(|r| s.rows().iter().map(|src| dot(r.samples(), src)).collect())
            .collect();
        let m = s.num_sources();
        let mut gram = SymMatrix::zeros(m);
        for i in 0..m {
            for j in i..m {
                let v = dot(s.source(i), s.source(j));
                gram.set(i, j, v);
                gram.set(j, i, v);
            }
        }
        Ok(Self { ref_energy, cross, gram })
    }
}

fn assignment_count(n: usize, m: usize, cap: u64) -> Option<u64> {
    let mut count: u64 = 1;
    for _ in 0..m {
        count = count.checked_mul(n as u64)?;
        if count > cap {
            return None;
        }
    }
    Some(count)
}

/// Whether `N^M` assignments fit under `cap`.
pub fn exhaustive_feasible(n: usize, m: usize, cap: u64) -> bool {
    assignment_count(n, m, cap).is_some()
}

/// Exhaustive search with the default cap of `2^15` assignments.
pub fn exhaustive_mixit(batch: &MixtureBatch, s: &SourceSet, snr_max_db: f64) -> Result<MixitResult> {
    exhaustive_mixit_with_cap(batch, s, snr_max_db, DEFAULT_EXHAUSTIVE_CAP)
}

/// Enumerates every binary mixing matrix and returns the minimiser.
///
/// Assignments are visited in lexicographic order of their owner vectors and
/// the first minimum is kept, so ties resolve to the lexicographically
/// smallest assignment.
pub fn exhaustive_mixit_with_cap(
    batch: &MixtureBatch,
    s: &SourceSet,
    snr_max_db: f64,
    cap: u64,
) -> Result<MixitResult> {
    let (n, m) = (batch.num_references(), s.num_sources());
    if assignment_count(n, m, cap).is_none() {
        return Err(MixkitError::ExhaustiveInfeasible { n, m, cap });
    }
    let stats = MixitStats::new(batch, s)?;
    exhaustive_with_stats(batch, s, &stats, snr_max_db)
}

pub(crate) fn exhaustive_with_stats(
    batch: &MixtureBatch,
    s: &SourceSet,
    stats: &MixitStats,
    snr_max_db: f64,
) -> Result<MixitResult> {
    let n = batch.num_references();
    let m = s.num_sources();
    let mut search = Enumeration {
        stats,
        tau: snr_threshold(snr_max_db),
        owners: vec![0; m],
        err: stats.ref_energy.clone(),
        best: f64::INFINITY,
        candidates: Vec::new(),
    };
    search.descend(0, n);

    let mut best: Option<MixitResult> = None;
    for owners in search.candidates {
        let a = BinaryMixingMatrix::from_owners(n, owners)?;
        let r = evaluate_assignment(batch, s, &a, snr_max_db)?;
        if best.as_ref().map_or(true, |b| r.total_loss < b.total_loss) {
            best = Some(r);
        }
    }
    best.ok_or_else(|| MixkitError::InvalidArgument("no assignment evaluated".into()))
}

struct Enumeration<'a> {
    stats: &'a MixitStats,
    tau: f64,
    owners: Vec<usize>,
    /// Residual energy `‖x_n − [Aŝ]_n‖²` of the partial assignment.
    err: Vec<f64>,
    best: f64,
    candidates: Vec<Vec<usize>>,
}

impl Enumeration<'_> {
    fn descend(&mut self, col: usize, rows: usize) {
        if col == self.owners.len() {
            let loss: f64 = self
                .stats
                .ref_energy
                .iter()
                .zip(&self.err)
                .map(|(&e, &r)| loss_from_energies(e, r, self.tau))
                .sum();
            if loss < self.best - RESCORE_WINDOW_DB {
                self.candidates.clear();
            }
            if loss <= self.best + RESCORE_WINDOW_DB {
                self.candidates.push(self.owners.clone());
            }
            if loss < self.best {
                self.best = loss;
            }
            return;
        }
        let gram = &self.stats.gram;
        for row in 0..rows {
            // Expanding ‖x_n − Σ ŝ‖² when column `col` joins row `row`.
            let mut delta = gram.get(col, col) - 2.0 * self.stats.cross[row][col];
            for prev in 0..col {
                if self.owners[prev] == row {
                    delta += 2.0 * gram.get(prev, col);
                }
            }
            self.owners[col] = row;
            self.err[row] += delta;
            self.descend(col + 1, rows);
            self.err[row] -= delta;
        }
    }
}

/// Real-valued `N × M` least-squares mixing matrix
/// `A = X Ŝᵀ (Ŝ Ŝᵀ + ρI)⁻¹` with `ρ = 1e-6 · trace(Ŝ Ŝᵀ)/M`.
pub fn least_squares_mixing(batch: &MixtureBatch, s: &SourceSet) -> Result<Vec<Vec<f64>>> {
    // Silent references still have a well-defined least-squares fit.
    let stats = MixitStats::new_unchecked(batch, s)?;
    Ok(least_squares_with_stats(&stats))
}

pub(crate) fn least_squares_with_stats(stats: &MixitStats) -> Vec<Vec<f64>> {
    let m = stats.gram.n;
    let n = stats.cross.len();
    let trace = stats.gram.trace();
    if trace == 0.0 {
        return vec![vec![0.0; m]; n];
    }
    let mut regularized = stats.gram.clone();
    let mut ridge = LEAST_SQUARES_RIDGE * trace / m as f64;
    let factor = loop {
        for i in 0..m {
            regularized.set(i, i, stats.gram.get(i, i) + ridge);
        }
        if let Some(l) = cholesky(&regularized) {
            break l;
        }
        // Only reachable when rounding defeats the ridge on a near-singular Gram.
        ridge *= 10.0;
    };
    stats
        .cross
        .iter()
        .map(|row| {
            let mut x = row.clone();
            cholesky_solve(&factor, &mut x);
            x
        })
        .collect()
}

/// Sets the largest entry of every column to 1 and the rest to 0; ties go
/// to the lowest row index.
pub fn project_to_binary(a: &[Vec<f64>]) -> Result<BinaryMixingMatrix> {
    let rows = a.len();
    let cols = a.first().map_or(0, Vec::len);
    for row in a {
        check_len(cols, row.len())?;
    }
    let owners = (0..cols)
        .map(|m| {
            let mut best = 0;
            for n in 1..rows {
                if a[n][m] > a[best][m] {
                    best = n;
                }
            }
            best
        })
        .collect();
    BinaryMixingMatrix::from_owners(rows, owners)
}

/// Least-squares mixing matrix projected to the nearest binary assignment,
/// scored with the same objective as [`exhaustive_mixit`].
pub fn efficient_mixit(batch: &MixtureBatch, s: &SourceSet, snr_max_db: f64) -> Result<MixitResult> {
    let stats = MixitStats::new(batch, s)?;
    efficient_with_stats(batch, s, &stats, snr_max_db)
}

pub(crate) fn efficient_with_stats(
    batch: &MixtureBatch,
    s: &SourceSet,
    stats: &MixitStats,
    snr_max_db: f64,
) -> Result<MixitResult> {
    let a = project_to_binary(&least_squares_with_stats(stats))?;
    evaluate_assignment(batch, s, &a, snr_max_db)
}

/// Runs the requested search.
pub fn mixit(
    batch: &MixtureBatch,
    s: &SourceSet,
    snr_max_db: f64,
    search: MixitSearch,
    cap: u64,
) -> Result<MixitResult> {
    let stats = MixitStats::new(batch, s)?;
    let (n, m) = (batch.num_references(), s.num_sources());
    match search {
        MixitSearch::Exhaustive => {
            if !exhaustive_feasible(n, m, cap) {
                return Err(MixkitError::ExhaustiveInfeasible { n, m, cap });
            }
            exhaustive_with_stats(batch, s, &stats, snr_max_db)
        }
        MixitSearch::Efficient => efficient_with_stats(batch, s, &stats, snr_max_db),
        MixitSearch::Auto if exhaustive_feasible(n, m, cap) => exhaustive_with_stats(batch, s, &stats, snr_max_db),
        MixitSearch::Auto => efficient_with_stats(batch, s, &stats, snr_max_db),
    }
}

/// Gradient of the loss for reference `n` alone, holding the assignment fixed.
pub fn mixit_reference_gradient(
    batch: &MixtureBatch,
    s: &SourceSet,
    snr_max_db: f64,
    assignment: &BinaryMixingMatrix,
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(batch, s)?;
    let remixed = assignment.remix(s);
    let g = signal::thresholded_snr_loss_grad(batch.reference(n), &remixed[n], snr_max_db)?;
    Ok((0..s.num_sources())
        .map(|m| if assignment.owner(m) == n { g.clone() } else { vec![0.0; s.len()] })
        .collect())
}

/// Gradient with respect to every source of `Σ_n L(x_n, [Aŝ]_n)` at a fixed
/// assignment `A`. Each source receives the gradient of the reference it is
/// assigned to.
pub fn mixit_loss_gradient(
    batch: &MixtureBatch,
    s: &SourceSet,
    snr_max_db: f64,
    assignment: &BinaryMixingMatrix,
) -> Result<Vec<Vec<f64>>> {
    check_shapes(batch, s)?;
    if assignment.num_rows() != batch.num_references() || assignment.num_cols() != s.num_sources() {
        return Err(MixkitError::InvalidAssignment("assignment shape does not match the problem".into()));
    }
    let remixed = assignment.remix(s);
    let per_ref = remixed
        .iter()
        .enumerate()
        .map(|(n, est)| signal::thresholded_snr_loss_grad(batch.reference(n), est, snr_max_db))
        .collect::<Result<Vec<_>>>()?;
    Ok((0..s.num_sources()).map(|m| per_ref[assignment.owner(m)].clone()).collect())
}
