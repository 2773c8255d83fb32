//! Dense complex matrices, quantum states and the subsystem operations
//! (Kronecker products, partial trace, partial transpose) everything else is
//! built from.
//!
//! All multi-subsystem routines take a list of subsystem dimensions with the
//! first entry as the most significant tensor factor, matching
//! [`NodePartition`].

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::partition::NodePartition;

pub type C64 = Complex64;

/// Hermiticity and unit-trace tolerance.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Tolerance on the most negative eigenvalue of a density matrix.
pub const PSD_TOL: f64 = 1e-10;
/// Norm tolerance for pure states.
pub const NORM_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A dense complex matrix with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                actual: entries.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_row_slice(rows, cols, &entries))
    }

    pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        Self::from_row_major(
            rows,
            cols,
            entries.iter().map(|&x| C64::new(x, 0.0)).collect(),
        )
    }

    pub fn from_dmatrix(m: DMatrix<C64>) -> Result<Self> {
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(m))
    }

    /// Wraps a matrix produced by arithmetic on already-validated inputs.
    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let v = DVector::from_iterator(diag.len(), diag.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&v))
    }

    /// `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self(DMatrix::from_fn(a.len(), b.len(), |i, j| {
            a[i] * b[j].conj()
        }))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn as_dmatrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_dmatrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        (0..self.rows())
            .flat_map(|i| (0..self.cols()).map(move |j| (i, j)))
            .map(|(i, j)| self.0[(i, j)])
            .collect()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * C64::new(factor, 0.0))
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(self.0.kronecker(&other.0))
    }

    pub fn diagonal_real(&self) -> Vec<f64> {
        (0..self.rows().min(self.cols()))
            .map(|i| self.0[(i, i)].re)
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// `A · v`.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let x = DVector::from_column_slice(v);
        (&self.0 * x).iter().copied().collect()
    }

    fn require_square(&self) -> Result<()> {
        if self.is_square() {
            Ok(())
        } else {
            Err(Error::NotSquare {
                rows: self.rows(),
                cols: self.cols(),
            })
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

/// A unit-norm state vector.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    amplitudes: Vec<C64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Empty("state vector"));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Rescales `amplitudes` to unit norm.
    pub fn normalized(mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NotNormalized { norm });
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Ok(Self { amplitudes })
    }

    /// Computational basis vector `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; dim];
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn projector(&self) -> ComplexMatrix {
        ComplexMatrix::outer(&self.amplitudes, &self.amplitudes)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        Self { amplitudes }
    }
}

/// A Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        matrix.require_square()?;
        let defect = matrix.hermiticity_defect();
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian { defect });
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > HERMITIAN_TOL || tr.im.abs() > HERMITIAN_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr}")));
        }
        let min_eig = eigh(&matrix)?.values.last().copied().unwrap_or(0.0);
        if min_eig < -PSD_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "minimum eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// Skips the eigenvalue check; callers guarantee positivity by construction.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.is_hermitian(1e-8));
        Self { matrix }
    }

    pub fn from_pure(state: &PureState) -> Self {
        Self {
            matrix: state.projector(),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            matrix: ComplexMatrix::identity(dim).scale(1.0 / dim as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        // Hermiticity was validated on construction.
        eigh(&self.matrix).map(|e| e.values).unwrap_or_default()
    }

    /// Number of eigenvalues strictly above `tol`.
    pub fn rank(&self, tol: f64) -> usize {
        self.eigenvalues().iter().filter(|&&v| v > tol).count()
    }
}

/// Kronecker product of `factors` in list order.
pub fn kron_list(factors: &[ComplexMatrix]) -> Result<ComplexMatrix> {
    let (first, rest) = factors
        .split_first()
        .ok_or(Error::Empty("kron factor list"))?;
    for f in factors {
        f.require_square()?;
    }
    Ok(rest.iter().fold(first.clone(), |acc, f| acc.kron(f)))
}

/// Eigen-decomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Eigh {
    /// Eigenvalues in descending order.
    pub values: Vec<f64>,
    /// Matching eigenvectors as columns.
    pub vectors: ComplexMatrix,
}

impl Eigh {
    /// `V diag(values) V†`.
    pub fn reconstruct_with(&self, values: &[f64]) -> ComplexMatrix {
        let v = self.vectors.as_dmatrix();
        let mut scaled = v.clone();
        for (j, &lambda) in values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(lambda);
        }
        ComplexMatrix(scaled * v.adjoint())
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(&self.values)
    }
}

pub fn eigh(a: &ComplexMatrix) -> Result<Eigh> {
    a.require_square()?;
    let defect = a.hermiticity_defect();
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian { defect });
    }
    let sym = a.hermitian_part().0;
    let dec = SymmetricEigen::try_new(sym, f64::EPSILON, 0).ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..dec.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| dec.eigenvalues[j].total_cmp(&dec.eigenvalues[i]));
    let values = order.iter().map(|&i| dec.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.rows(), a.rows(), |r, c| dec.eigenvectors[(r, order[c])]);
    Ok(Eigh {
        values,
        vectors: ComplexMatrix(vectors),
    })
}

/// Sum of singular values.
pub fn trace_norm(a: &ComplexMatrix) -> Result<f64> {
    a.require_square()?;
    if a.is_hermitian(HERMITIAN_TOL) {
        return Ok(eigh(a)?.values.iter().map(|v| v.abs()).sum());
    }
    Ok(a.0.clone().singular_values().iter().sum())
}

/// Largest singular value.
pub fn operator_norm(a: &ComplexMatrix) -> Result<f64> {
    a.require_square()?;
    if a.is_hermitian(HERMITIAN_TOL) {
        let values = eigh(a)?.values;
        return Ok(values.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    Ok(a.0.clone().singular_values().max())
}

fn check_subsystems(mat: &ComplexMatrix, dims: &[usize], selected: &[usize]) -> Result<()> {
    mat.require_square()?;
    let total: usize = dims.iter().product();
    if total != mat.rows() {
        return Err(Error::DimensionMismatch {
            expected: total,
            actual: mat.rows(),
        });
    }
    if let Some(&index) = selected.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::SubsystemOutOfRange {
            index,
            count: dims.len(),
        });
    }
    Ok(())
}

/// Mixed-radix digits of `index`, most significant first.
fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Partial trace over every subsystem not listed in `keep`.
pub fn partial_trace_dims(
    rho: &ComplexMatrix,
    dims: &[usize],
    keep: &[usize],
) -> Result<ComplexMatrix> {
    check_subsystems(rho, dims, keep)?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !kept.contains(k)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&k| dims[k]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&k| dims[k]).collect();
    let dk: usize = kept_dims.iter().product();
    let dt: usize = traced_dims.iter().product();

    // full[a * dt + t] = full index with kept digits a and traced digits t
    let mut full = vec![0usize; dk * dt];
    let mut dg = vec![0usize; dims.len()];
    let mut kd = vec![0usize; kept.len()];
    let mut td = vec![0usize; traced.len()];
    for a in 0..dk {
        digits(a, &kept_dims, &mut kd);
        for t in 0..dt {
            digits(t, &traced_dims, &mut td);
            for (slot, &k) in kept.iter().enumerate() {
                dg[k] = kd[slot];
            }
            for (slot, &k) in traced.iter().enumerate() {
                dg[k] = td[slot];
            }
            full[a * dt + t] = compose(&dg, dims);
        }
    }

    let src = rho.as_dmatrix();
    let out = DMatrix::from_fn(dk, dk, |a, b| {
        (0..dt)
            .map(|t| src[(full[a * dt + t], full[b * dt + t])])
            .sum::<C64>()
    });
    Ok(ComplexMatrix(out))
}

/// Transposes the listed subsystems.
pub fn partial_transpose_dims(
    rho: &ComplexMatrix,
    dims: &[usize],
    transposed: &[usize],
) -> Result<ComplexMatrix> {
    check_subsystems(rho, dims, transposed)?;
    let d = rho.rows();
    let src = rho.as_dmatrix();
    let mut di = vec![0usize; dims.len()];
    let mut dj = vec![0usize; dims.len()];
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            digits(i, dims, &mut di);
            digits(j, dims, &mut dj);
            for &k in transposed {
                std::mem::swap(&mut di[k], &mut dj[k]);
            }
            out[(i, j)] = src[(compose(&di, dims), compose(&dj, dims))];
        }
    }
    Ok(ComplexMatrix(out))
}

/// Reduced state on the nodes listed in `keep` (0-based node indices).
pub fn partial_trace(
    rho: &ComplexMatrix,
    partition: &NodePartition,
    keep: &[usize],
) -> Result<ComplexMatrix> {
    partial_trace_dims(rho, &partition.dims(), keep)
}

/// Partial transpose on the nodes listed in `transposed` (0-based).
pub fn partial_transpose(
    rho: &ComplexMatrix,
    partition: &NodePartition,
    transposed: &[usize],
) -> Result<ComplexMatrix> {
    partial_transpose_dims(rho, &partition.dims(), transposed)
}

/// `(I ⊗ op ⊗ I) · mat` with `op` acting on subsystem `k`.
pub fn apply_local_left(
    mat: &ComplexMatrix,
    dims: &[usize],
    k: usize,
    op: &ComplexMatrix,
) -> ComplexMatrix {
    let d = mat.rows();
    let dk = dims[k];
    let inner: usize = dims[k + 1..].iter().product();
    let outer = d / (dk * inner);
    let src = mat.as_dmatrix();
    let o = op.as_dmatrix();
    let mut out = DMatrix::zeros(d, mat.cols());
    for c in 0..mat.cols() {
        for hi in 0..outer {
            for lo in 0..inner {
                let base = hi * dk * inner + lo;
                for s_out in 0..dk {
                    let mut acc = ZERO;
                    for s_in in 0..dk {
                        acc += o[(s_out, s_in)] * src[(base + s_in * inner, c)];
                    }
                    out[(base + s_out * inner, c)] = acc;
                }
            }
        }
    }
    ComplexMatrix(out)
}

/// `mat · (I ⊗ op ⊗ I)` with `op` acting on subsystem `k`.
pub fn apply_local_right(
    mat: &ComplexMatrix,
    dims: &[usize],
    k: usize,
    op: &ComplexMatrix,
) -> ComplexMatrix {
    apply_local_left(&mat.adjoint(), dims, k, &op.adjoint()).adjoint()
}

/// `U† ρ U` for `U = ⊗_k local[k]`.
pub fn conjugate_by_product(
    rho: &ComplexMatrix,
    dims: &[usize],
    local: &[&ComplexMatrix],
) -> ComplexMatrix {
    let mut out = rho.clone();
    for (k, u) in local.iter().enumerate() {
        out = apply_local_left(&out, dims, k, &u.adjoint());
        out = apply_local_right(&out, dims, k, u);
    }
    out
}
