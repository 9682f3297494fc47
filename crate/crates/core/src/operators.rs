//! Dense complex-matrix algebra and the bosonic/qubit operators the model is
//! built from.
//!
//! Composite cavity⊗qubit states use the Kronecker ordering `index = 2n + q`
//! with the qubit basis `(|↑⟩, |↓⟩)`, i.e. `q = 0` is `|↑⟩`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type StateVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Eigen-decomposition of a Hermitian matrix.
///
/// `values` are ascending; column `k` of `vectors` is the normalized eigenvector
/// for `values[k]`, with its largest-magnitude component made real and positive.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> StateVector {
        self.vectors.column(k).into_owned()
    }

    /// `V diag(values) V†`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let mut scaled = self.vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= Complex64::from(self.values[k]);
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Which Pauli-type qubit operator to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Z,
    /// Lowering operator `σ_−`, mapping `|↑⟩` to `|↓⟩`.
    Minus,
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Truncated annihilation operator with `⟨n−1|a|n⟩ = √n`.
pub fn fock_annihilation(cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock cutoff must be at least 2, got {cutoff}"
        )));
    }
    let mut a = ComplexMatrix::zeros(cutoff, cutoff);
    for n in 1..cutoff {
        a[(n - 1, n)] = Complex64::from((n as f64).sqrt());
    }
    Ok(a)
}

pub fn pauli(which: Pauli) -> ComplexMatrix {
    let entries = match which {
        Pauli::X => [ZERO, ONE, ONE, ZERO],
        Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        Pauli::Minus => [ZERO, ZERO, ONE, ZERO],
    };
    ComplexMatrix::from_row_slice(2, 2, &entries)
}

pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// Largest entry modulus.
pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// `max|M − M†|`.
pub fn hermiticity_residual(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `exp(m)` by Padé scaling-and-squaring.
pub fn matrix_exponential(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::InvalidDimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m.exp())
}

fn squeeze_generator(cutoff: usize) -> Result<ComplexMatrix> {
    let a = fock_annihilation(cutoff)?;
    let ad = a.adjoint();
    Ok((&ad * &ad - &a * &a) * Complex64::from(0.5))
}

fn check_squeeze_guard(r: f64, cutoff: usize) -> Result<()> {
    let limit = 0.25 * (cutoff as f64).ln();
    if r.abs() > limit {
        return Err(Error::TruncationRisk(format!(
            "squeeze |r| = {:.4} exceeds 0.25 ln(N_F) = {limit:.4} for cutoff {cutoff}",
            r.abs()
        )));
    }
    Ok(())
}

/// Minimum Fock cutoff accepted for a displacement by `alpha`.
pub fn displacement_min_cutoff(alpha: f64) -> f64 {
    let a = alpha.abs();
    a * a + 6.0 * a + 10.0
}

fn check_displacement_guard(alpha: f64, cutoff: usize) -> Result<()> {
    let need = displacement_min_cutoff(alpha);
    if (cutoff as f64) < need {
        return Err(Error::TruncationRisk(format!(
            "displacement α = {alpha:.4} needs cutoff ≥ {need:.1}, got {cutoff}"
        )));
    }
    Ok(())
}

/// `S(r) = exp[r/2 (a†² − a²)]` on the truncated Fock space.
pub fn squeeze_operator(r: f64, cutoff: usize) -> Result<ComplexMatrix> {
    check_squeeze_guard(r, cutoff)?;
    let k = squeeze_generator(cutoff)?;
    matrix_exponential(&(k * Complex64::from(r)))
}

/// `D(α) = exp[α (a† − a)]` for real `α`.
pub fn displacement_operator(alpha: f64, cutoff: usize) -> Result<ComplexMatrix> {
    if cutoff < 2 {
        return Err(Error::InvalidDimension(format!(
            "Fock cutoff must be at least 2, got {cutoff}"
        )));
    }
    check_displacement_guard(alpha, cutoff)?;
    let a = fock_annihilation(cutoff)?;
    let gen = (a.adjoint() - a) * Complex64::from(alpha);
    matrix_exponential(&gen)
}

/// Applies `exp(A)` to `v` for a sparse `A` given as a mat-vec closure with
/// a bound on its 1-norm. Taylor series with `s` sub-steps so each step has
/// norm at most 1.
pub fn expm_multiply<F>(apply: F, norm_bound: f64, v: &StateVector) -> StateVector
where
    F: Fn(&StateVector) -> StateVector,
{
    let steps = norm_bound.ceil().max(1.0) as usize;
    let scale = Complex64::from(1.0 / steps as f64);
    let mut out = v.clone();
    for _ in 0..steps {
        let mut term = out.clone();
        let mut acc = out.clone();
        for k in 1..=60 {
            term = apply(&term) * (scale / Complex64::from(k as f64));
            acc += &term;
            if term.norm() <= 1e-17 * acc.norm() {
                break;
            }
        }
        out = acc;
    }
    out
}

fn apply_squeeze_generator(v: &StateVector) -> StateVector {
    // (a†² − a²)/2
    let n = v.len();
    let mut out = StateVector::zeros(n);
    for m in 0..n {
        let amp = v[m];
        if amp == ZERO {
            continue;
        }
        if m + 2 < n {
            out[m + 2] += amp * (((m + 1) * (m + 2)) as f64).sqrt() * 0.5;
        }
        if m >= 2 {
            out[m - 2] -= amp * ((m * (m - 1)) as f64).sqrt() * 0.5;
        }
    }
    out
}

fn apply_displacement_generator(v: &StateVector) -> StateVector {
    // a† − a
    let n = v.len();
    let mut out = StateVector::zeros(n);
    for m in 0..n {
        let amp = v[m];
        if amp == ZERO {
            continue;
        }
        if m + 1 < n {
            out[m + 1] += amp * ((m + 1) as f64).sqrt();
        }
        if m >= 1 {
            out[m - 1] -= amp * (m as f64).sqrt();
        }
    }
    out
}

/// `S(r) v` without forming the dense operator.
pub fn apply_squeeze(r: f64, v: &StateVector) -> Result<StateVector> {
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidDimension(format!("Fock cutoff {n} < 2")));
    }
    check_squeeze_guard(r, n)?;
    let bound = r.abs() * n as f64;
    Ok(expm_multiply(
        |x| apply_squeeze_generator(x) * Complex64::from(r),
        bound,
        v,
    ))
}

/// `D(α) v` without forming the dense operator.
pub fn apply_displacement(alpha: f64, v: &StateVector) -> Result<StateVector> {
    let n = v.len();
    if n < 2 {
        return Err(Error::InvalidDimension(format!("Fock cutoff {n} < 2")));
    }
    check_displacement_guard(alpha, n)?;
    let bound = 2.0 * alpha.abs() * (n as f64).sqrt();
    Ok(expm_multiply(
        |x| apply_displacement_generator(x) * Complex64::from(alpha),
        bound,
        v,
    ))
}

/// Modulus of the last Fock amplitude, used to certify that a state fits in
/// its truncated space.
pub fn fock_tail(v: &StateVector) -> f64 {
    v.iter().rev().take(2).fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Multiplies `v` by a global phase so its largest-magnitude component is real
/// and positive. Ties go to the lowest index.
pub fn fix_phase(v: &mut StateVector) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (k, z) in v.iter().enumerate() {
        let nz = z.norm();
        if nz > best_norm * (1.0 + 1e-12) {
            best = k;
            best_norm = nz;
        }
    }
    if best_norm > 0.0 {
        let phase = v[best].conj() / best_norm;
        *v *= phase;
        v[best] = Complex64::from(v[best].re);
    }
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues and a
/// deterministic phase per eigenvector.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::InvalidDimension(format!(
            "eigensolver needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(f64::MIN_POSITIVE);
    let residual = hermiticity_residual(m);
    if residual > 1e-12 * scale {
        return Err(Error::NotHermitian { residual });
    }
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..m.nrows()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let n = m.nrows();
    let mut vectors = ComplexMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut v: StateVector = eig.eigenvectors.column(src).into_owned();
        fix_phase(&mut v);
        vectors.set_column(dst, &v);
    }
    Ok(HermitianEigen { values, vectors })
}

/// `|u⟩⟨v|`
pub fn outer(u: &StateVector, v: &StateVector) -> ComplexMatrix {
    u * v.adjoint()
}

/// `|k⟩⟨l|` in dimension `dim`.
pub fn basis_transition(dim: usize, k: usize, l: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    m[(k, l)] = ONE;
    m
}
