//! Complex linear algebra and special functions shared by the other modules.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{}x{} matrix needs {} entries, got {}",
                rows,
                cols,
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|e| !e.re.is_finite() || !e.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut entries = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                entries.push(f(r, c));
            }
        }
        Self { rows, cols, entries }
    }

    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::ZERO {
                    continue;
                }
                for c in 0..other.cols {
                    out[(r, c)] += a * other[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::Shape("subtraction of unequal shapes".into()));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            entries,
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in 0..self.cols {
                if (self[(r, c)] - self[(c, r)].conj()).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    fn to_na(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self[(r, c)])
    }

    fn from_na(m: &DMatrix<Complex64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.entries[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.entries[r * self.cols + c]
    }
}

/// Thin SVD of a matrix: `a = U diag(s) V^H`.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

pub fn svd(a: &ComplexMatrix) -> Result<SvdFactors> {
    let na = a.to_na();
    let svd = nalgebra::linalg::SVD::try_new(na, true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge within the iteration limit".into()))?;
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^H");
    Ok(SvdFactors {
        u: ComplexMatrix::from_na(&u),
        singular_values: svd.singular_values.iter().copied().collect(),
        v: ComplexMatrix::from_na(&vt.adjoint()),
    })
}

/// First-order Bessel function of the first kind.
///
/// Power series below |x| = 12; above that, the integral
/// J1(x) = (1/pi) int_0^pi cos(t - x sin t) dt via the trapezoid rule,
/// which converges super-algebraically here because every odd derivative
/// of the integrand vanishes at both endpoints.
pub fn bessel_j1(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("bessel_j1 input must be finite, got {x}")));
    }
    let ax = x.abs();
    if ax <= 12.0 {
        let half = x / 2.0;
        let mut term = half;
        let mut sum = term;
        for k in 1..60 {
            term *= -half * half / (k as f64 * (k + 1) as f64);
            sum += term;
            if term.abs() < 1e-18 * sum.abs().max(1e-30) {
                break;
            }
        }
        Ok(sum)
    } else {
        let n = 512usize;
        let h = std::f64::consts::PI / n as f64;
        let f = |t: f64| (t - ax * t.sin()).cos();
        let mut acc = 0.5 * (f(0.0) + f(std::f64::consts::PI));
        for i in 1..n {
            acc += f(i as f64 * h);
        }
        let val = acc * h / std::f64::consts::PI;
        Ok(if x < 0.0 { -val } else { val })
    }
}

/// Moore-Penrose pseudo-inverse via SVD with singular-value truncation.
///
/// `rank_tol <= 0` selects the default 1e-10 * sigma_max.
pub fn pseudo_inverse(a: &ComplexMatrix, rank_tol: f64) -> Result<ComplexMatrix> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::Shape("pseudo_inverse of an empty matrix".into()));
    }
    let f = svd(a)?;
    let sigma_max = f.singular_values.first().copied().unwrap_or(0.0);
    let tol = if rank_tol > 0.0 { rank_tol } else { 1e-10 * sigma_max };
    // A+ = V diag(1/s) U^H over singular values above tol.
    let k = f.singular_values.len();
    let mut inv_s = ComplexMatrix::zeros(k, k);
    for i in 0..k {
        if f.singular_values[i] > tol {
            inv_s[(i, i)] = Complex64::new(1.0 / f.singular_values[i], 0.0);
        }
    }
    f.v.mul(&inv_s)?.mul(&f.u.adjoint())
}

/// Hermitian PSD square root: returns S with S S^H = r.
///
/// Eigenvalues in [-clamp_tol, 0) are clamped to zero so degenerate
/// (rank-deficient) correlation matrices factor without error.
pub fn psd_sqrt(r: &ComplexMatrix, clamp_tol: f64) -> Result<ComplexMatrix> {
    if !r.is_hermitian(1e-10) {
        return Err(Error::Domain("psd_sqrt requires a Hermitian matrix".into()));
    }
    let eig = nalgebra::linalg::SymmetricEigen::new(r.to_na());
    let n = r.rows;
    let mut sqrt_vals = Vec::with_capacity(n);
    for &ev in eig.eigenvalues.iter() {
        if ev < -clamp_tol {
            return Err(Error::NotPsd(ev));
        }
        sqrt_vals.push(ev.max(0.0).sqrt());
    }
    let q = ComplexMatrix::from_na(&eig.eigenvectors);
    let mut d = ComplexMatrix::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = Complex64::new(sqrt_vals[i], 0.0);
    }
    q.mul(&d)
}

/// Minimum-norm least-squares solution of a X = c.
pub fn least_squares_min_norm(a: &ComplexMatrix, c: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.rows != c.rows {
        return Err(Error::Shape(format!(
            "lhs has {} rows but rhs has {}",
            a.rows, c.rows
        )));
    }
    pseudo_inverse(a, 0.0)?.mul(c)
}
