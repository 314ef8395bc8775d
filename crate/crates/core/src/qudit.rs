//! Dense complex algebra for single-photon qudits spread over a handful of
//! optical modes: state vectors, small matrices, and two-mode gates.
//!
//! Dimensions here are tiny (d <= 8 in practice), so everything is stored
//! row-major in a flat `Vec` and multiplied naively.

use num_complex::Complex;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{QaeError, Result};
use crate::scalar::Real;

/// A normalized amplitude vector over `dim` optical modes.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState<T> {
    amps: Vec<Complex<T>>,
}

impl<T: Real> PureState<T> {
    /// Scales `v` to unit norm, keeping its direction.
    pub fn normalize(v: Vec<Complex<T>>) -> Result<Self> {
        if v.len() < 2 {
            return Err(QaeError::DimensionMismatch {
                expected: 2,
                found: v.len(),
            });
        }
        let norm = norm(&v);
        if norm == T::zero() || !norm.is_finite() {
            return Err(QaeError::ZeroVector);
        }
        Ok(Self {
            amps: v.into_iter().map(|a| a / norm).collect(),
        })
    }

    /// Convenience constructor from real amplitudes.
    pub fn from_real(v: &[f64]) -> Result<Self> {
        Self::normalize(v.iter().map(|&x| Complex::new(T::lit(x), T::zero())).collect())
    }

    /// Computational basis state |k> in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(QaeError::DimensionMismatch {
                expected: dim,
                found: k + 1,
            });
        }
        let mut v = vec![Complex::new(T::zero(), T::zero()); dim];
        v[k] = Complex::new(T::one(), T::zero());
        Self::normalize(v)
    }

    /// Wraps amplitudes that are already normalized by construction
    /// (outputs of unitary maps). No check is made.
    pub(crate) fn from_normalized(amps: Vec<Complex<T>>) -> Self {
        Self { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[Complex<T>] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> T {
        self.amps.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr())
    }

    /// `<self|other>`, conjugating the left argument.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        check_dim(self.dim(), other.dim())?;
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b))
    }

    /// Squared overlap modulus `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Self) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr())
    }
}

/// Free-function form of [`PureState::inner`].
pub fn inner_product<T: Real>(a: &PureState<T>, b: &PureState<T>) -> Result<Complex<T>> {
    a.inner(b)
}

fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt()
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(QaeError::DimensionMismatch { expected, found })
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m[(k, k)] = Complex::new(T::one(), T::zero());
        }
        m
    }

    /// Builds a matrix from row vectors; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<Complex<T>>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            check_dim(ncols, row.len())?;
            data.extend(row);
        }
        Ok(Self {
            rows: nrows,
            cols: ncols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<Complex<T>> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn row(&self, r: usize) -> &[Complex<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        check_dim(self.cols, rhs.rows)?;
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        check_dim(self.cols, v.len())?;
        Ok((0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect())
    }

    /// `max |(M^dagger M - I)_{ij}|`: zero iff the columns are orthonormal.
    pub fn isometry_defect(&self) -> T {
        let gram = self.adjoint().matmul(self).expect("adjoint shapes always agree");
        let id = Self::identity(self.cols);
        gram.max_abs_diff(&id)
    }

    /// Entrywise `max |a_ij - b_ij|`; infinite on shape mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        if self.rows != other.rows || self.cols != other.cols {
            return T::infinity();
        }
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc.max((a - b).norm()))
    }

    /// Left-multiplies rows `(lo, hi)` by a 2x2 block in place.
    pub(crate) fn apply_block_rows(&mut self, lo: usize, hi: usize, block: &[[Complex<T>; 2]; 2]) {
        for c in 0..self.cols {
            let a = self[(lo, c)];
            let b = self[(hi, c)];
            self[(lo, c)] = block[0][0] * a + block[0][1] * b;
            self[(hi, c)] = block[1][0] * a + block[1][1] * b;
        }
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = Complex<T>;

    fn index(&self, (r, c): (usize, usize)) -> &Complex<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex<T> {
        &mut self.data[r * self.cols + c]
    }
}

/// A square matrix acting on the optical modes.
///
/// Matrices built inside this crate are unitary to `Real::unitary_tol()`.
/// Matrices read from external data (printed to three decimals, say) go
/// through [`UnitaryMatrix::from_matrix_unchecked`] and may deviate.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix<T> {
    m: Matrix<T>,
}

impl<T: Real> UnitaryMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            m: Matrix::identity(dim),
        }
    }

    /// Accepts `m` if it is square and unitary within `tol`.
    pub fn new(m: Matrix<T>, tol: T) -> Result<Self> {
        check_dim(m.rows, m.cols)?;
        let deviation = m.isometry_defect();
        if deviation > tol {
            return Err(QaeError::NotUnitary {
                deviation: deviation.as_f64(),
            });
        }
        Ok(Self { m })
    }

    /// Wraps a square matrix without checking unitarity.
    pub fn from_matrix_unchecked(m: Matrix<T>) -> Result<Self> {
        check_dim(m.rows, m.cols)?;
        Ok(Self { m })
    }

    pub fn dim(&self) -> usize {
        self.m.rows
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.m
    }

    pub fn into_matrix(self) -> Matrix<T> {
        self.m
    }

    pub fn entry(&self, r: usize, c: usize) -> Complex<T> {
        self.m[(r, c)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// `self * rhs`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        Ok(Self {
            m: self.m.matmul(&rhs.m)?,
        })
    }

    /// `max |(U^dagger U - I)_{ij}|`.
    pub fn unitarity_defect(&self) -> T {
        self.m.isometry_defect()
    }

    pub fn apply(&self, s: &PureState<T>) -> Result<PureState<T>> {
        Ok(PureState::from_normalized(self.m.mul_vec(s.amps())?))
    }

    pub(crate) fn apply_gate_left(&mut self, gate: &TwoModeGate<T>) {
        self.m.apply_block_rows(gate.lo, gate.hi, &gate.block);
    }
}

/// Free-function form of [`UnitaryMatrix::apply`].
pub fn apply_unitary<T: Real>(u: &UnitaryMatrix<T>, s: &PureState<T>) -> Result<PureState<T>> {
    u.apply(s)
}

/// A 2x2 unitary acting on modes `lo < hi` and identity elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeGate<T> {
    lo: usize,
    hi: usize,
    block: [[Complex<T>; 2]; 2],
}

impl<T: Real> TwoModeGate<T> {
    pub fn new(lo: usize, hi: usize, block: [[Complex<T>; 2]; 2]) -> Result<Self> {
        if lo >= hi {
            return Err(QaeError::ModeOutOfRange { lo, hi, dim: hi });
        }
        Ok(Self { lo, hi, block })
    }

    pub fn modes(&self) -> (usize, usize) {
        (self.lo, self.hi)
    }

    pub fn block(&self) -> &[[Complex<T>; 2]; 2] {
        &self.block
    }

    /// The full `dim x dim` matrix: identity except for the block at
    /// rows/columns `(lo, hi)`.
    pub fn embed(&self, dim: usize) -> Result<UnitaryMatrix<T>> {
        if self.hi >= dim {
            return Err(QaeError::ModeOutOfRange {
                lo: self.lo,
                hi: self.hi,
                dim,
            });
        }
        let mut m = Matrix::identity(dim);
        m[(self.lo, self.lo)] = self.block[0][0];
        m[(self.lo, self.hi)] = self.block[0][1];
        m[(self.hi, self.lo)] = self.block[1][0];
        m[(self.hi, self.hi)] = self.block[1][1];
        Ok(UnitaryMatrix { m })
    }
}

/// Free-function form of [`TwoModeGate::embed`].
pub fn embed_two_mode<T: Real>(g: &TwoModeGate<T>, dim: usize) -> Result<UnitaryMatrix<T>> {
    g.embed(dim)
}

/// Draws a `d x n` matrix with Haar-distributed orthonormal columns.
///
/// Columns of i.i.d. standard complex Gaussians are orthonormalized by
/// Gram-Schmidt, which is a QR factorization with positive diagonal and so
/// yields the Haar measure on the Stiefel manifold.
pub fn haar_random_isometry<T: Real>(d: usize, n: usize, seed: u64) -> Result<Matrix<T>> {
    if n == 0 || n >= d {
        return Err(QaeError::InvalidDimensions { d, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(haar_columns(d, n, &mut rng))
}

/// A Haar-random `d x d` unitary from the caller's RNG stream.
pub fn haar_random_unitary<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitaryMatrix<T> {
    UnitaryMatrix {
        m: haar_columns(d, d, rng),
    }
}

/// A Haar-random unit vector in dimension `d`.
///
/// # Panics
/// If `d < 2`; a [`PureState`] has at least two modes.
pub fn haar_random_state<T: Real, R: Rng + ?Sized>(d: usize, rng: &mut R) -> PureState<T> {
    assert!(d >= 2, "a pure state needs at least two modes, got {d}");
    loop {
        let v: Vec<Complex<T>> = (0..d).map(|_| gaussian(rng)).collect();
        if let Ok(s) = PureState::normalize(v) {
            return s;
        }
    }
}

fn gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Complex::new(T::lit(re * s), T::lit(im * s))
}

fn haar_columns<T: Real, R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Matrix<T> {
    let mut cols: Vec<Vec<Complex<T>>> = Vec::with_capacity(n);
    while cols.len() < n {
        let mut v: Vec<Complex<T>> = (0..d).map(|_| gaussian(rng)).collect();
        // two passes of modified Gram-Schmidt keep orthogonality at machine precision
        for _ in 0..2 {
            for q in &cols {
                let proj = q
                    .iter()
                    .zip(&v)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (a, b)| acc + a.conj() * b);
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv > T::lit(1e-6) {
            cols.push(v.into_iter().map(|a| a / nv).collect());
        }
    }
    let mut m = Matrix::zeros(d, n);
    for (c, col) in cols.iter().enumerate() {
        for (r, a) in col.iter().enumerate() {
            m[(r, c)] = *a;
        }
    }
    m
}
