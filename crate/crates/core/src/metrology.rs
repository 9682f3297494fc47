//! Phase estimation with a dephased oscillator probe: the purification bound
//! `C_Q`, its optimal parameter, the exact QFI and the precision bound.
//!
//! Probes live on the normal-phase ladder `|E_n⟩`; the superradiant phase is
//! not covered.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{apply_squeeze, fock_tail, hermitian_eig, ComplexMatrix, StateVector};

const NULL_CUTOFF: f64 = 1e-12;

/// `|ψ⟩ = Σ_n C_n |E_n⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeState {
    coefficients: Vec<Complex64>,
}

impl ProbeState {
    /// Requires `Σ|C_n|² = 1` to 1e-12.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        let norm_sq: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "probe",
                reason: format!("Σ|C_n|² = {norm_sq}, expected 1"),
            });
        }
        Ok(Self { coefficients })
    }

    /// Rescales arbitrary non-zero coefficients to unit norm.
    pub fn normalized(mut coefficients: Vec<Complex64>) -> Result<Self> {
        let norm = coefficients
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "probe",
                reason: "coefficients have zero norm".into(),
            });
        }
        coefficients.iter_mut().for_each(|c| *c /= norm);
        Self::new(coefficients)
    }

    /// `(|E_a⟩ + |E_b⟩)/√2`.
    pub fn two_component(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::InvalidParameter {
                name: "probe",
                reason: format!("components must differ, got {a} twice"),
            });
        }
        let mut c = vec![Complex64::from(0.0); a.max(b) + 1];
        c[a] = Complex64::from(1.0);
        c[b] = Complex64::from(1.0);
        Self::normalized(c)
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn dim(&self) -> usize {
        self.coefficients.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BetaSource {
    Direct,
    FromDynamics {
        kappa_c_phi: f64,
        squeeze: f64,
        t: f64,
    },
}

/// Coherence envelope parameter: `ρ_mn` is damped by `e^{−β²(m−n)²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasingStrength {
    pub beta: f64,
    pub source: BetaSource,
}

impl DephasingStrength {
    pub fn direct(beta: f64) -> Result<Self> {
        non_negative("beta", beta)?;
        Ok(Self {
            beta,
            source: BetaSource::Direct,
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<()> {
    if !(value >= 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and ≥ 0, got {value}"),
        });
    }
    Ok(())
}

/// `β = cosh(2r) √(κ t) / 2`, which makes `e^{−β²(m−n)²}` the coherence
/// envelope produced by the ladder dephasing generator after time `t`.
pub fn beta_from_dynamics(kappa_c_phi: f64, r: f64, t: f64) -> Result<DephasingStrength> {
    non_negative("kappa_c_phi", kappa_c_phi)?;
    non_negative("r", r)?;
    non_negative("t", t)?;
    Ok(DephasingStrength {
        beta: (2.0 * r).cosh() * (kappa_c_phi * t).sqrt() / 2.0,
        source: BetaSource::FromDynamics {
            kappa_c_phi,
            squeeze: r,
            t,
        },
    })
}

/// `ρ_mn = C_m C_n* e^{−iΦ(m−n) − β²(m−n)²}`.
pub fn dephased_probe(probe: &ProbeState, phi: f64, beta: f64) -> ComplexMatrix {
    let c = probe.coefficients();
    ComplexMatrix::from_fn(c.len(), c.len(), |m, n| {
        let d = m as f64 - n as f64;
        let factor = Complex64::from_polar((-beta * beta * d * d).exp(), -phi * d);
        c[m] * c[n].conj() * factor
    })
}

/// Variance of the ladder index in the probe.
pub fn number_variance(probe: &ProbeState) -> f64 {
    let (mut mean, mut second) = (0.0, 0.0);
    for (n, c) in probe.coefficients().iter().enumerate() {
        let p = c.norm_sqr();
        mean += p * n as f64;
        second += p * (n * n) as f64;
    }
    second - mean * mean
}

/// Variance of the bare photon number `a†a` in `Σ C_n S(r)|n⟩`, on a Fock
/// space of size `cutoff`.
pub fn photon_number_variance(probe: &ProbeState, r: f64, cutoff: usize) -> Result<f64> {
    if cutoff < probe.dim() + 2 {
        return Err(Error::InvalidDimension(format!(
            "cutoff {cutoff} too small for a probe over {} levels",
            probe.dim()
        )));
    }
    let mut fock = StateVector::zeros(cutoff);
    for (n, c) in probe.coefficients().iter().enumerate() {
        fock[n] = *c;
    }
    let psi = apply_squeeze(r, &fock)?;
    if fock_tail(&psi) > 1e-8 {
        return Err(Error::TruncationRisk(format!(
            "squeezed probe reaches the cutoff {cutoff}"
        )));
    }
    let (mut mean, mut second) = (0.0, 0.0);
    for (n, z) in psi.iter().enumerate() {
        let p = z.norm_sqr();
        mean += p * n as f64;
        second += p * (n * n) as f64;
    }
    Ok(second - mean * mean)
}

/// `C_Q(ζ) = (1 − ζ)² 4Δn² + ζ²/(2β²)`.
pub fn cq_bound(delta_n_sq: f64, beta: f64, zeta: f64) -> Result<f64> {
    non_negative("delta_n_sq", delta_n_sq)?;
    non_negative("beta", beta)?;
    if !(0.0..=1.0).contains(&zeta) {
        return Err(Error::InvalidParameter {
            name: "zeta",
            reason: format!("must lie in [0, 1], got {zeta}"),
        });
    }
    let pure = (1.0 - zeta).powi(2) * 4.0 * delta_n_sq;
    if zeta == 0.0 {
        return Ok(pure);
    }
    if beta == 0.0 {
        return Err(Error::SingularTerm(
            "ζ²/(2β²) diverges at β = 0; use ζ = 0".into(),
        ));
    }
    Ok(pure + zeta * zeta / (2.0 * beta * beta))
}

/// `ζ* = 8Δn²β² / (1 + 8Δn²β²)`.
pub fn optimal_zeta(delta_n_sq: f64, beta: f64) -> f64 {
    let x = 8.0 * delta_n_sq * beta * beta;
    if x.is_infinite() {
        1.0
    } else {
        x / (1.0 + x)
    }
}

/// `C_Q(ζ*) = 4Δn² / (1 + 8Δn²β²)`.
pub fn cq_min(delta_n_sq: f64, beta: f64) -> f64 {
    4.0 * delta_n_sq / (1.0 + 8.0 * delta_n_sq * beta * beta)
}

/// Minimizes `cq_bound` over ζ by golden-section search, independently of
/// the closed form.
pub fn cq_min_numeric(delta_n_sq: f64, beta: f64) -> Result<(f64, f64)> {
    if beta == 0.0 {
        return Ok((0.0, cq_bound(delta_n_sq, 0.0, 0.0)?));
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |z: f64| cq_bound(delta_n_sq, beta, z);
    let (mut a, mut b) = (0.0, 1.0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let z = 0.5 * (a + b);
    Ok((z, f(z)?))
}

/// `δΦ = √(1/(4νΔn²) + 2β²/ν)`.
pub fn phase_bound(nu: f64, delta_n_sq: f64, beta: f64) -> Result<f64> {
    if !(nu >= 1.0 && nu.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "nu",
            reason: format!("must be ≥ 1, got {nu}"),
        });
    }
    if !(delta_n_sq > 0.0 && delta_n_sq.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "delta_n_sq",
            reason: format!("must be > 0, got {delta_n_sq}"),
        });
    }
    non_negative("beta", beta)?;
    Ok((1.0 / (4.0 * nu * delta_n_sq) + 2.0 * beta * beta / nu).sqrt())
}

/// Quantum Fisher information for the phase generated by the ladder index
/// `N = diag(0, 1, …)`, from the spectral form of the symmetric logarithmic
/// derivative.
pub fn qfi_exact(rho: &ComplexMatrix) -> Result<f64> {
    let eig = hermitian_eig(rho)?;
    let dim = rho.nrows();
    // ∂ρ = −i[N, ρ]
    let d_rho = ComplexMatrix::from_fn(dim, dim, |i, j| {
        rho[(i, j)] * Complex64::new(0.0, -(i as f64 - j as f64))
    });
    let v = &eig.vectors;
    let d_eig = v.adjoint() * d_rho * v;
    let mut fq = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            let s = eig.values[i] + eig.values[j];
            if s > NULL_CUTOFF {
                fq += 2.0 * d_eig[(i, j)].norm_sqr() / s;
            }
        }
    }
    Ok(fq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetrologyReport {
    pub delta_n_sq: f64,
    pub beta: f64,
    pub zeta_star: f64,
    pub cq: f64,
    pub fq_exact: f64,
    pub delta_phi: f64,
    pub nu: f64,
}

impl MetrologyReport {
    /// Bounds for `probe` after dephasing `beta` and phase `phi`. `delta_n_sq`
    /// overrides the ladder variance, e.g. with the bare photon-number
    /// variance of the dressed probe.
    pub fn compute(
        probe: &ProbeState,
        beta: f64,
        phi: f64,
        nu: f64,
        delta_n_sq: Option<f64>,
    ) -> Result<Self> {
        non_negative("beta", beta)?;
        let delta_n_sq = delta_n_sq.unwrap_or_else(|| number_variance(probe));
        let cq = cq_min(delta_n_sq, beta);
        Ok(Self {
            delta_n_sq,
            beta,
            zeta_star: optimal_zeta(delta_n_sq, beta),
            cq,
            fq_exact: qfi_exact(&dephased_probe(probe, phi, beta))?,
            delta_phi: phase_bound(nu, delta_n_sq, beta)?,
            nu,
        })
    }
}
