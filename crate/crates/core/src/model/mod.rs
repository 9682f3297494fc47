//! The quantum Rabi model, its effective normal/superradiant Hamiltonians and
//! the analytic quantities that control the critical point.

mod spectrum;
mod tridiag;

pub use spectrum::{
    critical_point_estimate, critical_point_estimate_with, labeled_spectrum, labeled_spectrum_with,
    ladder_gap, sector_levels, CriticalSearch, LabeledSpectrum, Parity, SpectrumOptions,
    StateLabel,
};

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{
    apply_displacement, apply_squeeze, displacement_min_cutoff, fock_annihilation, fock_tail,
    hermitian_eig, identity, kron, pauli, ComplexMatrix, Pauli, StateVector,
};

/// Model constants. `g` is the normalized coupling `2λ/√(Ω_q ω_c)` and `ratio`
/// is `Ω_q/ω_c`; λ is always derived. Rates share the unit of `omega_c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub omega_c: f64,
    pub ratio: f64,
    pub g: f64,
    pub n_fock: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa_c_phi: f64,
    pub kappa_q_phi: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            omega_c: 1.0,
            ratio: 1000.0,
            g: 0.5,
            n_fock: 100,
            gamma1: 0.05,
            gamma2: 0.01,
            kappa_c_phi: 0.05,
            kappa_q_phi: 0.05,
        }
    }
}

impl SystemParams {
    pub fn new(g: f64, ratio: f64, n_fock: usize) -> Self {
        Self {
            g,
            ratio,
            n_fock,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn bad(name: &'static str, reason: String) -> Error {
            Error::InvalidParameter { name, reason }
        }
        if !(self.omega_c > 0.0 && self.omega_c.is_finite()) {
            return Err(bad("omega_c", format!("must be > 0, got {}", self.omega_c)));
        }
        if !(self.ratio > 0.0 && self.ratio.is_finite()) {
            return Err(bad("ratio", format!("must be > 0, got {}", self.ratio)));
        }
        if !(self.g >= 0.0 && self.g.is_finite()) {
            return Err(bad("g", format!("must be ≥ 0, got {}", self.g)));
        }
        if self.n_fock < 2 {
            return Err(bad("n_fock", format!("must be ≥ 2, got {}", self.n_fock)));
        }
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("kappa_c_phi", self.kappa_c_phi),
            ("kappa_q_phi", self.kappa_q_phi),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(bad(name, format!("rates must be ≥ 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn omega_q(&self) -> f64 {
        self.ratio * self.omega_c
    }

    pub fn lambda(&self) -> f64 {
        lambda_from_g(self)
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn dim(&self) -> usize {
        2 * self.n_fock
    }
}

/// `λ = g √(Ω_q ω_c) / 2`.
pub fn lambda_from_g(params: &SystemParams) -> f64 {
    params.g * (params.omega_q() * params.omega_c).sqrt() / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Normal,
    Superradiant,
}

impl Phase {
    pub fn of(g: f64) -> Result<Self> {
        if g < 1.0 {
            Ok(Phase::Normal)
        } else if g > 1.0 {
            Ok(Phase::Superradiant)
        } else {
            Err(Error::CriticalSingularity)
        }
    }
}

/// Superradiant branch label `l = ±`, i.e. the sign of the displacement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    /// Position of the branch inside a doublet of the canonical SP ordering.
    pub fn offset(self) -> usize {
        match self {
            Branch::Plus => 0,
            Branch::Minus => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Branch::Plus => '+',
            Branch::Minus => '-',
        }
    }
}

/// Analytic quantities of one phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseQuantities {
    pub phase: Phase,
    /// `r_N` in the normal phase, `r_S` in the superradiant phase.
    pub squeeze: f64,
    /// Displacement α (zero in the normal phase).
    pub alpha: f64,
    /// Level spacing `ω_c e^{−2r}`.
    pub gap: f64,
    /// λ in units of ω_c.
    pub lambda: f64,
}

impl PhaseQuantities {
    pub fn cosh_2r(&self) -> f64 {
        (2.0 * self.squeeze).cosh()
    }
}

pub fn phase_quantities(params: &SystemParams) -> Result<PhaseQuantities> {
    params.validate()?;
    let g = params.g;
    let phase = Phase::of(g)?;
    let lambda = params.lambda() / params.omega_c;
    let (arg, alpha) = match phase {
        Phase::Normal => (1.0 - g * g, 0.0),
        Phase::Superradiant => {
            let s = 1.0 - g.powi(-4);
            (s, (lambda * lambda * s).sqrt())
        }
    };
    let squeeze = -0.25 * arg.ln();
    Ok(PhaseQuantities {
        phase,
        squeeze,
        alpha,
        gap: params.omega_c * arg.sqrt(),
        lambda,
    })
}

/// `ω_c a†a ⊗ I + (Ω_q/2) I ⊗ σ_z − λ (a + a†) ⊗ σ_x`.
pub fn build_h_rabi(params: &SystemParams) -> Result<ComplexMatrix> {
    params.validate()?;
    let a = fock_annihilation(params.n_fock)?;
    let x = &a + a.adjoint();
    let number = a.adjoint() * &a;
    let wc = Complex64::from(params.omega_c);
    let half_q = Complex64::from(params.omega_q() / 2.0);
    let lam = Complex64::from(params.lambda());
    Ok(
        kron(&number, &identity(2)) * wc
            + kron(&identity(params.n_fock), &pauli(Pauli::Z)) * half_q
            - kron(&x, &pauli(Pauli::X)) * lam,
    )
}

/// Normal-phase effective Hamiltonian
/// `ω_c a†a + (Ω_q/2)σ_z + (λ²/Ω_q)(a + a†)² σ_z`.
///
/// Projected onto `|↓⟩` this is an oscillator of frequency `ω_c √(1 − g²)`.
pub fn build_h_np(params: &SystemParams) -> Result<ComplexMatrix> {
    params.validate()?;
    if params.g >= 1.0 {
        return Err(Error::WrongPhase {
            expected: "normal",
            g: params.g,
        });
    }
    let a = fock_annihilation(params.n_fock)?;
    let x = &a + a.adjoint();
    let number = a.adjoint() * &a;
    let z = pauli(Pauli::Z);
    let lam = params.lambda();
    Ok(
        kron(&number, &identity(2)) * Complex64::from(params.omega_c)
            + kron(&identity(params.n_fock), &z) * Complex64::from(params.omega_q() / 2.0)
            + kron(&(&x * &x), &z) * Complex64::from(lam * lam / params.omega_q()),
    )
}

/// Rescaled qubit operator for branch `l`,
/// `(1/2g²) σ_z − l (2λα/Ω̃_q) σ_x` with `Ω̃_q = g² Ω_q`. Its eigenvalues are ±1/2.
pub fn rescaled_sigma_z(params: &SystemParams, branch: Branch) -> Result<ComplexMatrix> {
    let pq = phase_quantities(params)?;
    if pq.phase != Phase::Superradiant {
        return Err(Error::WrongPhase {
            expected: "superradiant",
            g: params.g,
        });
    }
    let g2 = params.g * params.g;
    let omega_t = g2 * params.omega_q();
    let coeff_x = 2.0 * params.lambda() * pq.alpha / omega_t;
    Ok(pauli(Pauli::Z) * Complex64::from(1.0 / (2.0 * g2))
        - pauli(Pauli::X) * Complex64::from(branch.sign() * coeff_x))
}

/// Superradiant effective Hamiltonian for branch `l`,
/// `ω_c a†a + (Ω̃_q/2) σ̃_z + (ω_c/2g⁴)(a + a†)² σ̃_z + ω_c α²`.
pub fn build_h_sp(params: &SystemParams, branch: Branch) -> Result<ComplexMatrix> {
    let pq = phase_quantities(params)?;
    let sz = rescaled_sigma_z(params, branch)?;
    let a = fock_annihilation(params.n_fock)?;
    let x = &a + a.adjoint();
    let number = a.adjoint() * &a;
    let g2 = params.g * params.g;
    let wc = params.omega_c;
    let dim = params.dim();
    Ok(kron(&number, &identity(2)) * Complex64::from(wc)
        + kron(&identity(params.n_fock), &sz) * Complex64::from(g2 * params.omega_q() / 2.0)
        + kron(&(&x * &x), &sz) * Complex64::from(wc / (2.0 * g2 * g2))
        + identity(dim) * Complex64::from(wc * pq.alpha * pq.alpha))
}

/// Ground state of `σ̃_z^l` (the qubit factor `|↓^l⟩` of the SP ansatz).
pub fn branch_qubit_state(params: &SystemParams, branch: Branch) -> Result<StateVector> {
    let sz = rescaled_sigma_z(params, branch)?;
    Ok(hermitian_eig(&sz)?.vector(0))
}

/// Ansatz eigenstate `S(r_N)|n⟩|↓⟩` (normal phase, `branch = None`) or
/// `D(lα) S(r_S)|n⟩|↓^l⟩` (superradiant phase).
pub fn ansatz_state(
    params: &SystemParams,
    n: usize,
    branch: Option<Branch>,
) -> Result<StateVector> {
    let pq = phase_quantities(params)?;
    let cutoff = params.n_fock;
    if n >= cutoff {
        return Err(Error::InvalidDimension(format!(
            "level {n} outside Fock cutoff {cutoff}"
        )));
    }
    let mut fock = StateVector::zeros(cutoff);
    fock[n] = Complex64::from(1.0);
    let squeezed = apply_squeeze(pq.squeeze, &fock)?;

    let (cavity, qubit) = match (pq.phase, branch) {
        (Phase::Normal, None) => {
            let down = StateVector::from_vec(vec![Complex64::from(0.0), Complex64::from(1.0)]);
            (squeezed, down)
        }
        (Phase::Superradiant, Some(l)) => {
            if (cutoff as f64) < displacement_min_cutoff(pq.alpha) {
                return Err(Error::TruncationRisk(format!(
                    "displacement α = {:.3} needs cutoff ≥ {:.1}, got {cutoff}",
                    pq.alpha,
                    displacement_min_cutoff(pq.alpha)
                )));
            }
            let displaced = apply_displacement(l.sign() * pq.alpha, &squeezed)?;
            (displaced, branch_qubit_state(params, l)?)
        }
        (Phase::Normal, Some(_)) => {
            return Err(Error::WrongPhase {
                expected: "superradiant",
                g: params.g,
            })
        }
        (Phase::Superradiant, None) => {
            return Err(Error::WrongPhase {
                expected: "normal",
                g: params.g,
            })
        }
    };
    if fock_tail(&cavity) > 1e-8 {
        return Err(Error::TruncationRisk(format!(
            "ansatz level {n} reaches the Fock cutoff {cutoff} (tail {:.2e})",
            fock_tail(&cavity)
        )));
    }
    let mut state = cavity.kronecker(&qubit);
    let norm = state.norm();
    state /= Complex64::from(norm);
    Ok(state)
}

/// `⟨ψ|a†a ⊗ I|ψ⟩` on the composite space.
pub fn photon_number(state: &StateVector) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(idx, z)| (idx / 2) as f64 * z.norm_sqr())
        .sum()
}

/// `(a + a†) ⊗ I` applied to a composite vector.
pub fn apply_cavity_quadrature(v: &StateVector) -> StateVector {
    let dim = v.len();
    let mut out = DVector::zeros(dim);
    for idx in 0..dim {
        let amp = v[idx];
        let (n, q) = (idx / 2, idx % 2);
        if n >= 1 {
            out[2 * (n - 1) + q] += amp * (n as f64).sqrt();
        }
        if 2 * (n + 1) + q < dim {
            out[2 * (n + 1) + q] += amp * ((n + 1) as f64).sqrt();
        }
    }
    out
}

/// `I ⊗ σ_x` applied to a composite vector.
pub fn apply_qubit_flip(v: &StateVector) -> StateVector {
    let mut out = v.clone();
    for n in 0..v.len() / 2 {
        out.swap_rows(2 * n, 2 * n + 1);
    }
    out
}
