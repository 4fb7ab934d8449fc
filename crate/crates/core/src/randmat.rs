//! Haar-distributed random objects and the small amount of dense complex
//! linear algebra the simulator needs.
//!
//! Everything here is deterministic given an [`RngStream`]. Distinct streams
//! may be driven from distinct threads; a single stream must not be shared.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const UNITARITY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;

/// Dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!("{rows}x{cols} matrix")));
        }
        Ok(Self { rows, cols, data: vec![C64::new(0.0, 0.0); rows * cols] })
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut m = Self::zeros(n, n)?;
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        Ok(m)
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::InvalidDimension(format!(
                "{rows}x{cols} matrix from {} entries",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a diagonal matrix from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Result<Self> {
        let mut m = Self::zeros(diag.len(), diag.len())?;
        for (i, &x) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(x, 0.0);
        }
        Ok(m)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn row(&self, r: usize) -> &[C64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self { rows: self.cols, cols: self.rows, data: vec![C64::default(); self.data.len()] };
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::InvalidArgument(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols)?;
        for r in 0..self.rows {
            let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == C64::default() {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[C64]) -> Result<Vec<C64>> {
        if v.len() != self.cols {
            return Err(Error::InvalidArgument(format!(
                "matrix with {} columns applied to vector of length {}",
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.check_same_shape(rhs)?;
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Squared Frobenius norm, `Tr(A^dagger A)`.
    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, rhs: &Self) -> Result<f64> {
        self.check_same_shape(rhs)?;
        Ok(self.data.iter().zip(&rhs.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_residual(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in r..n {
                worst = worst.max((self[(r, c)] - self[(c, r)].conj()).norm());
            }
        }
        worst
    }

    fn check_same_shape(&self, rhs: &Self) -> Result<()> {
        if self.rows != rhs.rows || self.cols != rhs.cols {
            return Err(Error::InvalidArgument(format!(
                "shape mismatch {}x{} vs {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = C64;

    fn index(&self, (r, c): (usize, usize)) -> &C64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C64 {
        &mut self.data[r * self.cols + c]
    }
}

impl fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(r) {
                write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

/// A square matrix known to be unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    /// Accepts `m` if `max |m^dagger m - I| <= tol`.
    pub fn new(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDimension(format!("{}x{} is not square", m.rows, m.cols)));
        }
        let res = unitarity_residual(&m);
        if res > tol {
            return Err(Error::InvalidArgument(format!("unitarity residual {res:.3e} exceeds {tol:.1e}")));
        }
        Ok(Self(m))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Ok(Self(ComplexMatrix::identity(dim)?))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.0
    }

    pub fn residual(&self) -> f64 {
        unitarity_residual(&self.0)
    }
}

/// `max |U^dagger U - I|` entrywise.
pub fn unitarity_residual(m: &ComplexMatrix) -> f64 {
    let n = m.cols;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let mut acc = C64::default();
            for r in 0..m.rows {
                acc += m[(r, i)].conj() * m[(r, j)];
            }
            if i == j {
                acc -= 1.0;
            }
            worst = worst.max(acc.norm());
        }
    }
    worst
}

/// Reproducible random stream: a ChaCha8 generator keyed by a master seed,
/// with the stream id selecting an independent counter-based substream.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self { seed, stream_id, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Standard complex Gaussian: real and imaginary parts i.i.d. N(0, 1/2).
    pub fn complex_normal(&mut self) -> C64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    pub fn fill_complex_normal(&mut self, out: &mut [C64]) {
        out.iter_mut().for_each(|z| *z = self.complex_normal());
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Haar-random unitary on `C^dim`.
pub fn haar_unitary(dim: usize, rng: &mut RngStream) -> Result<UnitaryMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("haar_unitary with dim = 0".into()));
    }
    let cols = haar_columns(dim, dim, rng);
    let mut m = ComplexMatrix::zeros(dim, dim)?;
    for (c, col) in cols.iter().enumerate() {
        for (r, &z) in col.iter().enumerate() {
            m[(r, c)] = z;
        }
    }
    Ok(UnitaryMatrix(m))
}

/// Haar-random unit vector in `C^dim`.
pub fn haar_state(dim: usize, rng: &mut RngStream) -> Result<Vec<C64>> {
    if dim == 0 {
        return Err(Error::InvalidDimension("haar_state with dim = 0".into()));
    }
    let mut v = vec![C64::default(); dim];
    loop {
        rng.fill_complex_normal(&mut v);
        let norm = norm(&v);
        if norm > 0.0 {
            v.iter_mut().for_each(|z| *z /= norm);
            return Ok(v);
        }
    }
}

/// `r` orthonormal vectors spanning a Haar-random `r`-plane of `C^dim`,
/// i.e. the first `r` columns of a Haar unitary.
pub fn haar_frame(r: usize, dim: usize, rng: &mut RngStream) -> Result<Vec<Vec<C64>>> {
    if r == 0 || r > dim {
        return Err(Error::InvalidDimension(format!("haar_frame with r = {r}, dim = {dim}")));
    }
    Ok(haar_columns(r, dim, rng))
}

fn haar_columns(r: usize, dim: usize, rng: &mut RngStream) -> Vec<Vec<C64>> {
    let mut cols: Vec<Vec<C64>> = (0..r)
        .map(|_| {
            let mut v = vec![C64::default(); dim];
            rng.fill_complex_normal(&mut v);
            v
        })
        .collect();
    householder_q_phase_fixed(&mut cols);
    cols
}

/// Replaces the columns of a tall `dim x r` matrix `A` by the first `r`
/// columns of `Q` in `A = QR`, with `Q` rescaled so that `R` has a positive
/// real diagonal. Without the rescaling, Householder QR leaves the column
/// phases of `Q` correlated with the input and the result is not Haar.
fn householder_q_phase_fixed(cols: &mut [Vec<C64>]) {
    let r = cols.len();
    let dim = cols[0].len();
    let mut reflectors: Vec<Vec<C64>> = Vec::with_capacity(r);
    let mut diag_phase = Vec::with_capacity(r);

    for j in 0..r {
        let x = &cols[j][j..];
        let xnorm = norm(x);
        let x0 = x[0];
        let phase0 = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        // R_jj = alpha = -phase(x0) * |x|
        let alpha = -phase0 * xnorm;
        let mut v: Vec<C64> = x.to_vec();
        v[0] -= alpha;
        let vnorm = norm(&v);
        if vnorm > 0.0 {
            v.iter_mut().for_each(|z| *z /= vnorm);
        }
        for col in cols[j..].iter_mut() {
            apply_reflector(&v, &mut col[j..]);
        }
        diag_phase.push(if alpha.norm() > 0.0 { alpha / alpha.norm() } else { C64::new(1.0, 0.0) });
        reflectors.push(v);
    }

    // Q e_j = H_0 H_1 ... H_{r-1} e_j
    for (j, col) in cols.iter_mut().enumerate() {
        col.iter_mut().for_each(|z| *z = C64::default());
        col[j] = C64::new(1.0, 0.0);
        for (i, v) in reflectors.iter().enumerate().rev() {
            apply_reflector(v, &mut col[i..]);
        }
        let ph = diag_phase[j];
        col.iter_mut().for_each(|z| *z *= ph);
    }
    debug_assert!(cols.iter().all(|c| c.len() == dim));
}

/// `y <- (I - 2 v v^dagger) y` for unit `v`.
#[inline]
fn apply_reflector(v: &[C64], y: &mut [C64]) {
    let dot: C64 = v.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum();
    let s = dot * 2.0;
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi -= vi * s;
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `<a|b>` (conjugate-linear in `a`).
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
