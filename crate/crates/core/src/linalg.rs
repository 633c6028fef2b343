//! Small dense and tridiagonal kernels used by the spectral solver.

use nalgebra::{Complex, DMatrix, DVector};

/// Symmetric tridiagonal matrix stored by diagonal and first off-diagonal.
#[derive(Debug, Clone)]
pub(crate) struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `v^T T` (equal to `T v` by symmetry).
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.off[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn norm_inf(&self) -> f64 {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i].abs();
                if i > 0 {
                    s += self.off[i - 1].abs();
                }
                if i + 1 < n {
                    s += self.off[i].abs();
                }
                s
            })
            .fold(0.0, f64::max)
    }
}

/// LU factorization of a general tridiagonal matrix with partial pivoting.
///
/// Layout follows LAPACK `gttrf`: `U` gets a second superdiagonal from row swaps.
#[derive(Debug, Clone)]
pub(crate) struct TridiagonalLu {
    l: Vec<f64>,
    d: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagonalLu {
    /// Factors the matrix with subdiagonal `sub`, diagonal `diag`, superdiagonal `sup`.
    /// Exactly zero pivots are replaced by `tiny`, which is what inverse iteration wants.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64], tiny: f64) -> Self {
        let n = diag.len();
        let mut d = diag.to_vec();
        let mut u1 = sup.to_vec();
        let mut u2 = vec![0.0; n.saturating_sub(2)];
        let mut l = vec![0.0; n.saturating_sub(1)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        let mut sub = sub.to_vec();

        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= sub[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = sub[i] / d[i];
                l[i] = f;
                d[i + 1] -= f * u1[i];
            } else {
                // swap rows i and i + 1
                let f = d[i] / sub[i];
                d[i] = sub[i];
                l[i] = f;
                let tmp = u1[i];
                u1[i] = d[i + 1];
                d[i + 1] = tmp - f * d[i + 1];
                if i + 2 < n {
                    u2[i] = u1[i + 1];
                    u1[i + 1] *= -f;
                }
                swapped[i] = true;
            }
            sub[i] = 0.0;
        }
        if let Some(last) = d.last_mut() {
            if *last == 0.0 {
                *last = tiny;
            }
        }
        Self {
            l,
            d,
            u1,
            u2,
            swapped,
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut x = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                x.swap(i, i + 1);
            }
            x[i + 1] -= self.l[i] * x[i];
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            if i + 1 < n {
                acc -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                acc -= self.u2[i] * x[i + 2];
            }
            x[i] = acc / self.d[i];
        }
        x
    }
}

fn scale_to_unit_max(v: &mut [f64]) -> f64 {
    let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m > 0.0 && m.is_finite() {
        v.iter_mut().for_each(|x| *x /= m);
    }
    m
}

/// Null vector of the symmetric pencil `A - z J` (`J = diag(signs)`) near the
/// approximate eigenvalue `z`, with one Rayleigh-quotient refinement of `z`.
///
/// Returns the refined eigenvalue and a vector scaled to unit max-abs entry.
pub(crate) fn pencil_eigenvector(a: &SymTridiagonal, signs: &[f64], z: f64) -> (f64, Vec<f64>) {
    let n = a.dim();
    let tiny = f64::EPSILON * a.norm_inf().max(1.0);
    let factor = |shift: f64| {
        let diag: Vec<f64> = (0..n).map(|i| a.diag[i] - shift * signs[i]).collect();
        TridiagonalLu::factor(&a.off, &diag, &a.off, tiny)
    };

    // Fixed pseudo-random start so results are reproducible.
    let mut v: Vec<f64> = (0..n)
        .map(|i| 0.5 + ((i as f64 + 1.0) * 0.618_033_988_749_894_9).fract())
        .collect();

    let lu = factor(z);
    for _ in 0..3 {
        v = lu.solve(&v);
        scale_to_unit_max(&mut v);
    }

    let av = a.mul(&v);
    let num: f64 = v.iter().zip(&av).map(|(x, y)| x * y).sum();
    let den: f64 = v.iter().zip(signs).map(|(x, s)| x * x * s).sum();
    let mut refined = z;
    if den != 0.0 {
        let rq = num / den;
        if rq.is_finite() && (rq - z).abs() <= 1e-6 * z.abs().max(1.0) {
            refined = rq;
        }
    }
    if refined != z {
        v = factor(refined).solve(&v);
        scale_to_unit_max(&mut v);
    }
    (refined, v)
}

/// All eigenvalues of a dense real matrix given row-major.
pub(crate) fn dense_eigenvalues(n: usize, row_major: &[f64]) -> Vec<Complex<f64>> {
    DMatrix::from_row_slice(n, n, row_major)
        .complex_eigenvalues()
        .iter()
        .copied()
        .collect()
}

/// Solves a square dense system and returns the solution with a 1-norm
/// condition estimate, or `None` when the matrix is numerically singular.
pub(crate) fn solve_dense(n: usize, row_major: &[f64], rhs: &[f64]) -> Option<(Vec<f64>, f64)> {
    let m = DMatrix::from_row_slice(n, n, row_major);
    let norm1 = (0..n)
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu = m.lu();
    let x = lu.solve(&DVector::from_column_slice(rhs))?;
    let inv = lu.try_inverse()?;
    let inv_norm1 = (0..n)
        .map(|j| inv.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let cond = norm1 * inv_norm1;
    if !cond.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((x.iter().copied().collect(), cond))
}
