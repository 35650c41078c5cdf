//! Small dense symmetric solves for the mixing-matrix least squares.

/// Row-major square matrix of order `n`.
#[derive(Debug, Clone)]
pub(crate) struct SymMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Lower-triangular Cholesky factor, or `None` if the matrix is not
/// numerically positive definite.
pub(crate) fn cholesky(a: &SymMatrix) -> Option<SymMatrix> {
    let n = a.n;
    let mut l = SymMatrix::zeros(n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        l.set(j, j, d);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / d);
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place.
pub(crate) fn cholesky_solve(l: &SymMatrix, b: &mut [f64]) {
    let n = l.n;
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l.get(i, k) * b[k];
        }
        b[i] = v / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l.get(k, i) * b[k];
        }
        b[i] = v / l.get(i, i);
    }
}
