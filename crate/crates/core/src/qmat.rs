//! Dense complex linear algebra for qubit-sized operators.
//!
//! Everything here works on `nalgebra` dynamic matrices of `Complex<f64>`.
//! Dimensions never exceed 28 (the real embedding of the moment matrix), so
//! no effort is spent on sparsity or blocking.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

pub type C64 = Complex<f64>;
pub type Mat = DMatrix<C64>;
pub type Ket = DVector<C64>;

/// Absolute tolerance for `h[i][j] == conj(h[j][i])`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default slack for positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-9;
/// Allowed deviation of a density matrix trace from one.
pub const TRACE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QmatError {
    #[error("matrix is not Hermitian (max |h - h^dagger| = {0:.3e})")]
    NotHermitian(f64),
    #[error("matrix is not square ({0}x{1})")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("trace {0} differs from 1")]
    TraceNotOne(f64),
    #[error("non-finite entry")]
    NonFinite,
}

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn r(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

pub fn identity(n: usize) -> Mat {
    Mat::identity(n, n)
}

pub fn zeros(n: usize) -> Mat {
    Mat::zeros(n, n)
}

pub fn pauli_x() -> Mat {
    Mat::from_row_slice(2, 2, &[r(0.0), r(1.0), r(1.0), r(0.0)])
}

pub fn pauli_y() -> Mat {
    Mat::from_row_slice(2, 2, &[r(0.0), c(0.0, -1.0), c(0.0, 1.0), r(0.0)])
}

pub fn pauli_z() -> Mat {
    Mat::from_row_slice(2, 2, &[r(1.0), r(0.0), r(0.0), r(-1.0)])
}

/// Real-coefficient combination `x X + y Y + z Z`.
pub fn bloch_operator(n: [f64; 3]) -> Mat {
    pauli_x() * r(n[0]) + pauli_y() * r(n[1]) + pauli_z() * r(n[2])
}

/// Computational basis vector `|index>` in dimension `dim`.
pub fn basis(dim: usize, index: usize) -> Ket {
    let mut v = Ket::zeros(dim);
    v[index] = r(1.0);
    v
}

pub fn ket(amplitudes: &[C64]) -> Ket {
    Ket::from_column_slice(amplitudes)
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

pub fn kron_ket(a: &Ket, b: &Ket) -> Ket {
    let mut out = Ket::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            out[i * b.len() + j] = ai * bj;
        }
    }
    out
}

/// `|psi><psi|`.
pub fn projector(psi: &Ket) -> Mat {
    psi * psi.adjoint()
}

/// `Tr(rho op)`.
pub fn expectation(op: &Mat, rho: &Mat) -> C64 {
    (rho * op).trace()
}

/// `<psi| op |psi>`.
pub fn braket(psi: &Ket, op: &Mat) -> C64 {
    psi.dotc(&(op * psi))
}

pub fn frobenius(m: &Mat) -> f64 {
    m.norm()
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermitian_defect(h: &Mat) -> f64 {
    let n = h.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((h[(i, j)] - h[(j, i)].conj()).norm());
        }
    }
    worst
}

fn check_square_finite(h: &Mat) -> Result<(), QmatError> {
    if h.nrows() != h.ncols() {
        return Err(QmatError::NotSquare(h.nrows(), h.ncols()));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(QmatError::NonFinite);
    }
    Ok(())
}

pub fn check_hermitian(h: &Mat) -> Result<(), QmatError> {
    check_square_finite(h)?;
    let d = hermitian_defect(h);
    if d > HERMITIAN_TOL {
        return Err(QmatError::NotHermitian(d));
    }
    Ok(())
}

/// `(h + h^dagger) / 2`; removes rounding asymmetry before a symmetric solver.
pub fn hermitian_part(h: &Mat) -> Mat {
    (h + h.adjoint()) * r(0.5)
}

#[derive(Debug, Clone)]
pub struct Eigen {
    /// Sorted descending.
    pub values: Vec<f64>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: Mat,
}

impl Eigen {
    pub fn vector(&self, k: usize) -> Ket {
        self.vectors.column(k).into_owned()
    }

    pub fn reconstruct(&self) -> Mat {
        let n = self.values.len();
        let mut out = zeros(n);
        for k in 0..n {
            let v = self.vector(k);
            out += projector(&v) * r(self.values[k]);
        }
        out
    }
}

pub fn eig_hermitian(h: &Mat) -> Result<Eigen, QmatError> {
    check_hermitian(h)?;
    Ok(eig_unchecked(h))
}

fn eig_unchecked(h: &Mat) -> Eigen {
    let n = h.nrows();
    let se = SymmetricEigen::new(hermitian_part(h));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
    let values = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Eigen { values, vectors }
}

/// Smallest eigenvalue of the Hermitian part of `h`.
pub fn min_eigenvalue(h: &Mat) -> f64 {
    SymmetricEigen::new(hermitian_part(h))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(h: &Mat) -> f64 {
    SymmetricEigen::new(hermitian_part(h))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdReport {
    pub psd: bool,
    pub min_eigenvalue: f64,
}

pub fn is_psd(h: &Mat, tol: f64) -> Result<PsdReport, QmatError> {
    check_hermitian(h)?;
    let m = min_eigenvalue(h);
    Ok(PsdReport { psd: m >= -tol, min_eigenvalue: m })
}

/// `<psi| rho |psi>` for a unit-trace `rho`.
pub fn fidelity_pure(rho: &Mat, psi: &Ket) -> Result<f64, QmatError> {
    check_hermitian(rho)?;
    if rho.nrows() != psi.len() {
        return Err(QmatError::Dimension(format!(
            "state of dimension {} against operator of dimension {}",
            psi.len(),
            rho.nrows()
        )));
    }
    let tr = rho.trace().re;
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(QmatError::TraceNotOne(tr));
    }
    Ok(braket(psi, rho).re.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Partial trace of a two-qubit operator.
pub fn partial_trace(rho: &Mat, keep: Keep) -> Mat {
    partial_trace_dims(rho, 2, 2, keep)
}

/// Partial trace on `C^da (x) C^db`, keeping the named factor.
pub fn partial_trace_dims(rho: &Mat, da: usize, db: usize, keep: Keep) -> Mat {
    assert_eq!(rho.nrows(), da * db, "operator dimension must equal da*db");
    match keep {
        Keep::First => Mat::from_fn(da, da, |i, j| {
            (0..db).map(|k| rho[(i * db + k, j * db + k)]).sum()
        }),
        Keep::Second => Mat::from_fn(db, db, |i, j| {
            (0..da).map(|k| rho[(k * db + i, k * db + j)]).sum()
        }),
    }
}
