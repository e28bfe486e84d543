//! Small dense complex matrices and the two exponential propagators.

use nalgebra::DMatrix;
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major square complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    /// `out = self * v`.
    #[inline]
    pub fn apply_into(&self, v: &[Complex64], out: &mut [Complex64]) {
        let n = self.dim;
        debug_assert_eq!(v.len(), n);
        debug_assert_eq!(out.len(), n);
        for (row, o) in self.data.chunks_exact(n).zip(out.iter_mut()) {
            let mut re = 0.0;
            let mut im = 0.0;
            for (a, b) in row.iter().zip(v) {
                re += a.re * b.re - a.im * b.im;
                im += a.re * b.im + a.im * b.re;
            }
            *o = Complex64::new(re, im);
        }
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.dim];
        self.apply_into(v, &mut out);
        out
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Maximum row sum of `|re| + |im|`; bounds the spectral norm from above.
    pub fn inf_norm(&self) -> f64 {
        self.data
            .chunks_exact(self.dim)
            .map(|row| row.iter().map(|z| z.re.abs() + z.im.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max |(U U†)_{ij} - δ_ij|`.
    pub fn unitarity_residual(&self) -> f64 {
        self.matmul(&self.adjoint())
            .max_abs_diff(&Self::identity(self.dim))
    }

    fn to_nalgebra(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Eigen-decomposition of a Hermitian matrix; eigenvectors are the columns.
pub fn hermitian_eigen(h: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = h.to_nalgebra().symmetric_eigen();
    let n = h.dim();
    let vectors = CMatrix::from_fn(n, |i, j| eig.eigenvectors[(i, j)]);
    (eig.eigenvalues.iter().copied().collect(), vectors)
}

/// `exp(i t H)` for Hermitian `H`, assembled from its spectral decomposition.
pub fn exp_i_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(h);
    let n = h.dim();
    let phases: Vec<Complex64> = values
        .iter()
        .map(|&v| Complex64::from_polar(1.0, t * v))
        .collect();
    let mut out = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += vectors[(i, k)] * phases[k] * vectors[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    out
}

/// Remainder bound below which the series action is truncated.
const SERIES_TOLERANCE: f64 = 1e-17;

/// Replaces `psi` by `exp(i eps H) psi` using a Taylor series on the vector.
///
/// The series is split into substeps with `eps * ||H||_inf <= 1`, and each
/// substep is truncated once the geometric tail bound drops below 1e-17.
/// `scratch` must hold at least `2 * dim` entries.
pub fn series_exp_action(h: &CMatrix, eps: f64, psi: &mut [Complex64], scratch: &mut Vec<Complex64>) {
    let n = h.dim();
    scratch.resize(2 * n, ZERO);
    let norm_bound = eps.abs() * h.inf_norm();
    let substeps = norm_bound.ceil().max(1.0) as usize;
    let t = eps / substeps as f64;
    let theta = norm_bound / substeps as f64;
    let (term, next) = scratch.split_at_mut(n);
    for _ in 0..substeps {
        term.copy_from_slice(psi);
        let mut k = 1usize;
        loop {
            h.apply_into(term, next);
            let factor = Complex64::new(0.0, t / k as f64);
            let mut size = 0.0;
            for (dst, (nx, acc)) in term.iter_mut().zip(next.iter().zip(psi.iter_mut())) {
                *dst = nx * factor;
                *acc += *dst;
                size += dst.norm_sqr();
            }
            let size = size.sqrt();
            // tail after term k is bounded by size * r / (1 - r), r = theta / (k + 1)
            let ratio = theta / (k + 1) as f64;
            if size * ratio / (1.0 - ratio) < SERIES_TOLERANCE || k > 60 {
                break;
            }
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pauli_y() -> CMatrix {
        let mut m = CMatrix::zeros(2);
        m[(0, 1)] = Complex64::new(0.0, -1.0);
        m[(1, 0)] = Complex64::new(0.0, 1.0);
        m
    }

    #[test]
    fn exponential_of_pauli_is_rotation() {
        let t = 0.7;
        let u = exp_i_hermitian(&pauli_y(), t);
        // exp(i t Y) = cos t + i sin t Y
        let expected = CMatrix::identity(2)
            .scale(Complex64::new(t.cos(), 0.0))
            .add(&pauli_y().scale(Complex64::new(0.0, t.sin())));
        assert!(u.max_abs_diff(&expected) < 1e-14);
        assert!(u.unitarity_residual() < 1e-14);
    }

    #[test]
    fn series_matches_spectral() {
        let h = CMatrix::from_fn(3, |i, j| {
            let base = Complex64::new((i + 2 * j) as f64 * 0.3, (i as f64 - j as f64) * 0.2);
            if i == j { Complex64::new(base.re, 0.0) } else { base }
        });
        let h = h.add(&h.adjoint()).scale(Complex64::new(0.5, 0.0));
        for &eps in &[0.01, 0.3, 2.5] {
            let psi0 = vec![
                Complex64::new(0.6, 0.0),
                Complex64::new(0.0, 0.8),
                Complex64::new(0.0, 0.0),
            ];
            let expected = exp_i_hermitian(&h, eps).apply(&psi0);
            let mut psi = psi0.clone();
            let mut scratch = Vec::new();
            series_exp_action(&h, eps, &mut psi, &mut scratch);
            for (a, b) in psi.iter().zip(&expected) {
                assert!((a - b).norm() < 1e-13, "eps={eps}");
            }
        }
    }
}
