//! Bath rates, dressed jump operators and the generators built from them.
//!
//! Every generator acts on density matrices expressed in a retained eigenbasis
//! of `m_keep` states. The effective normal-phase generators index that basis
//! by the ladder number `n`; the superradiant ones use `2n + b` with `b = 0`
//! for the `+` branch and `b = 1` for the `−` branch.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::PhaseQuantities;
use crate::model::{phase_quantities, Branch, LabeledSpectrum, Phase, SystemParams};
use crate::operators::{
    basis_transition, displacement_operator, fock_annihilation, identity, squeeze_operator,
    ComplexMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BathChannel {
    /// Couples through `a + a†`.
    Cavity,
    /// Couples through `σ_− + σ_+`.
    Qubit,
}

impl fmt::Display for BathChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BathChannel::Cavity => "cavity",
            BathChannel::Qubit => "qubit",
        })
    }
}

/// Bath spectral density `s(ν) = g(ν)|α(ν)|²`. The relaxation rate at
/// frequency `ω` is `2π s(ω)`.
pub trait SpectralDensity: Send + Sync {
    fn density(&self, nu: f64) -> f64;

    /// `lim_{ν→0} s(ν)`.
    fn zero_limit(&self) -> Result<f64>;

    fn rate(&self, omega: f64) -> Result<f64> {
        if !(omega >= 0.0) {
            return Err(Error::Domain(format!(
                "rates are defined for ω ≥ 0, got {omega}"
            )));
        }
        Ok(2.0 * PI * self.density(omega))
    }
}

/// Ohmic bath with `Γ(ω) = γ ω / f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OhmicBath {
    pub channel: BathChannel,
    pub gamma: f64,
    /// Reference frequency: `ω_c` for the cavity, `Ω_q` for the qubit.
    pub f: f64,
}

impl OhmicBath {
    pub fn new(channel: BathChannel, gamma: f64, f: f64) -> Result<Self> {
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must be ≥ 0, got {gamma}"),
            });
        }
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "f",
                reason: format!("must be > 0, got {f}"),
            });
        }
        Ok(Self { channel, gamma, f })
    }

    pub fn cavity(params: &SystemParams) -> Result<Self> {
        Self::new(BathChannel::Cavity, params.gamma1, params.omega_c)
    }

    pub fn qubit(params: &SystemParams) -> Result<Self> {
        Self::new(BathChannel::Qubit, params.gamma2, params.omega_q())
    }
}

impl SpectralDensity for OhmicBath {
    fn density(&self, nu: f64) -> f64 {
        self.gamma * nu / (2.0 * PI * self.f)
    }

    fn zero_limit(&self) -> Result<f64> {
        Ok(0.0)
    }

    fn rate(&self, omega: f64) -> Result<f64> {
        ohmic_rate(self, omega)
    }
}

/// `Γ(ω) = γ ω / f`; zero at `ω = 0` exactly.
pub fn ohmic_rate(bath: &OhmicBath, omega: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!(
            "rates are defined for ω ≥ 0, got {omega}"
        )));
    }
    Ok(bath.gamma * omega / bath.f)
}

/// `s(ν) = s0 (ν/ν_ref)^exponent`: white for exponent 0, sub-Ohmic below 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawDensity {
    pub s0: f64,
    pub exponent: f64,
    pub nu_ref: f64,
}

impl SpectralDensity for PowerLawDensity {
    fn density(&self, nu: f64) -> f64 {
        if self.exponent == 0.0 {
            self.s0
        } else {
            self.s0 * (nu / self.nu_ref).powf(self.exponent)
        }
    }

    fn zero_limit(&self) -> Result<f64> {
        if self.exponent > 0.0 {
            Ok(0.0)
        } else if self.exponent == 0.0 {
            Ok(self.s0)
        } else {
            Err(Error::Domain(format!(
                "density ν^{} diverges at ν → 0",
                self.exponent
            )))
        }
    }
}

/// Pure-dephasing rate `2π lim_{ν→0} s(ν)` generated by the zero-frequency
/// part of the coupling.
pub fn zero_frequency_dephasing(density: &dyn SpectralDensity) -> Result<f64> {
    Ok(2.0 * PI * density.zero_limit()?)
}

/// Frequency component `L(ω) = Σ ⟨E_n|o|E_m⟩ |E_n⟩⟨E_m|` over pairs with
/// `E_m − E_n ≈ ω ≥ 0`. The `−ω` partner is the adjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub channel: BathChannel,
    pub omega: f64,
    pub matrix: ComplexMatrix,
}

struct Element {
    omega: f64,
    row: usize,
    col: usize,
    value: Complex64,
}

/// Groups the dressed matrix elements of the channel coupling into frequency
/// bins of absolute width `bin_tol · ω_c`.
///
/// Elements closer than the tolerance to zero frequency (diagonal and
/// degenerate pairs, in both orders) form the `ω = 0` operator, which is
/// always first when present.
pub fn dressed_jump_operators(
    spectrum: &LabeledSpectrum,
    channel: BathChannel,
    bin_tol: f64,
) -> Result<Vec<JumpOperator>> {
    if !(bin_tol > 0.0) {
        return Err(Error::Binning(format!(
            "bin_tol must be > 0, got {bin_tol}"
        )));
    }
    let coupling = match channel {
        BathChannel::Cavity => spectrum.cavity_elements(),
        BathChannel::Qubit => spectrum.qubit_elements(),
    };
    let dim = spectrum.n_kept;
    let energies = spectrum.relative_energies();
    let tol = bin_tol * spectrum.params.omega_c;
    let floor = 1e-13
        * coupling
            .iter()
            .fold(0.0f64, |m, z| m.max(z.norm()))
            .max(1e-300);

    let mut zero = ComplexMatrix::zeros(dim, dim);
    let mut zero_used = false;
    let mut elements = Vec::new();
    for n in 0..dim {
        for m in 0..dim {
            let value = coupling[(n, m)];
            if value.norm() <= floor {
                continue;
            }
            let omega = energies[m] - energies[n];
            if omega.abs() < tol {
                zero[(n, m)] = value;
                zero_used = true;
            } else if omega > 0.0 {
                elements.push(Element {
                    omega,
                    row: n,
                    col: m,
                    value,
                });
            }
        }
    }
    elements.sort_by(|a, b| {
        a.omega
            .total_cmp(&b.omega)
            .then(a.row.cmp(&b.row))
            .then(a.col.cmp(&b.col))
    });

    // single-linkage clusters
    let mut bins: Vec<Vec<&Element>> = Vec::new();
    for el in &elements {
        match bins.last_mut() {
            Some(bin) if el.omega - bin.last().map_or(f64::NEG_INFINITY, |e| e.omega) < tol => {
                bin.push(el)
            }
            _ => bins.push(vec![el]),
        }
    }

    let mut out = Vec::with_capacity(bins.len() + 1);
    if zero_used {
        out.push(JumpOperator {
            channel,
            omega: 0.0,
            matrix: zero,
        });
    }
    let mut spans = Vec::with_capacity(bins.len());
    for bin in &bins {
        let mut matrix = ComplexMatrix::zeros(dim, dim);
        let mut weight = 0.0;
        let mut weighted = 0.0;
        for el in bin {
            matrix[(el.row, el.col)] = el.value;
            let w = el.value.norm_sqr();
            weight += w;
            weighted += w * el.omega;
        }
        let width = bin.last().unwrap().omega - bin[0].omega;
        let omega = weighted / weight;
        spans.push((omega, width));
        out.push(JumpOperator {
            channel,
            omega,
            matrix,
        });
    }
    let mut centers: Vec<f64> = spans.iter().map(|s| s.0).collect();
    if zero_used {
        centers.insert(0, 0.0);
    }
    let min_sep = centers
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    if let Some((omega, width)) = spans.iter().find(|s| s.1 > 0.5 * min_sep) {
        return Err(Error::Binning(format!(
            "bin at ω = {omega:.6} has width {width:.3e}, more than half the smallest bin spacing {min_sep:.3e}"
        )));
    }
    Ok(out)
}

/// Dressed cavity amplitude `⟨n|S†(r_S) D†(lα) (a + a†) D(l′α) S(r_S)|m⟩`,
/// evaluated with dense operators on a Fock space of size `cutoff`.
pub fn sp_transition_amplitude(
    n: usize,
    m: usize,
    l: Branch,
    l_prime: Branch,
    quantities: &PhaseQuantities,
    cutoff: usize,
) -> Result<Complex64> {
    if quantities.phase != Phase::Superradiant {
        return Err(Error::WrongPhase {
            expected: "superradiant",
            g: f64::NAN,
        });
    }
    if n >= cutoff || m >= cutoff {
        return Err(Error::InvalidDimension(format!(
            "levels ({n}, {m}) outside Fock cutoff {cutoff}"
        )));
    }
    let s = squeeze_operator(quantities.squeeze, cutoff)?;
    let d_left = displacement_operator(l.sign() * quantities.alpha, cutoff)?;
    let d_right = displacement_operator(l_prime.sign() * quantities.alpha, cutoff)?;
    let a = fock_annihilation(cutoff)?;
    let x = &a + a.adjoint();
    let left = &d_left * &s;
    let right = &d_right * &s;
    let bra = left.column(n).into_owned();
    let ket = &x * right.column(m);
    Ok(bra.dotc(&ket))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    FullNonsecular,
    RwaNp,
    RwaSp,
    DephasingNp,
    DephasingSp,
    Composite,
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorKind::FullNonsecular => "full_nonsecular",
            GeneratorKind::RwaNp => "rwa_np",
            GeneratorKind::RwaSp => "rwa_sp",
            GeneratorKind::DephasingNp => "dephasing_np",
            GeneratorKind::DephasingSp => "dephasing_sp",
            GeneratorKind::Composite => "composite",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonsecularOptions {
    /// Drop `(ω, ω′)` cross terms with `|ω − ω′|` above this value.
    /// `None` keeps the full double sum.
    pub secular_cutoff: Option<f64>,
    pub bin_tol: f64,
}

impl Default for NonsecularOptions {
    fn default() -> Self {
        Self {
            secular_cutoff: None,
            bin_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
struct RatedJump {
    rate: f64,
    omega: f64,
    op: ComplexMatrix,
}

#[derive(Debug, Clone)]
enum Body {
    /// Per channel: `A = Σ L(ω)` and `A_Γ = Σ Γ(ω) L(ω)`.
    Factorized(Vec<(ComplexMatrix, ComplexMatrix)>),
    /// Explicit double sum restricted to `|ω − ω′| ≤ cutoff`, per channel.
    PartialSecular {
        channels: Vec<Vec<RatedJump>>,
        cutoff: f64,
    },
    /// `Σ rate · D[op]`.
    Lindblad(Vec<(f64, ComplexMatrix)>),
    Composite(Vec<Generator>),
}

/// A linear superoperator on `dim × dim` density matrices.
#[derive(Debug, Clone)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub dim: usize,
    body: Body,
}

/// `D[o]ρ = oρo† − ½{o†o, ρ}`.
fn lindblad_term(op: &ComplexMatrix, rho: &ComplexMatrix) -> ComplexMatrix {
    let op_dag = op.adjoint();
    let n = &op_dag * op;
    op * rho * &op_dag - (&n * rho + rho * &n) * Complex64::from(0.5)
}

impl Generator {
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        if rho.nrows() != self.dim || rho.ncols() != self.dim {
            return Err(Error::Composition(format!(
                "{} generator has dimension {}, state is {}x{}",
                self.kind,
                self.dim,
                rho.nrows(),
                rho.ncols()
            )));
        }
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        self.accumulate(rho, &mut out);
        Ok(out)
    }

    fn accumulate(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        let half = Complex64::from(0.5);
        match &self.body {
            Body::Factorized(channels) => {
                for (a, a_gamma) in channels {
                    let a_dag = a.adjoint();
                    let ag_dag = a_gamma.adjoint();
                    let term = a_gamma * rho * &a_dag + a * rho * &ag_dag
                        - &a_dag * a_gamma * rho
                        - rho * &ag_dag * a;
                    *out += term * half;
                }
            }
            Body::PartialSecular { channels, cutoff } => {
                for jumps in channels {
                    for j in jumps {
                        for k in jumps {
                            if (j.omega - k.omega).abs() > *cutoff {
                                continue;
                            }
                            let k_dag = k.op.adjoint();
                            let sandwich = &j.op * rho * &k_dag;
                            let left = &k_dag * &j.op * rho;
                            let right = rho * &k_dag * &j.op;
                            *out += (&sandwich - left) * Complex64::from(0.5 * j.rate)
                                + (sandwich - right) * Complex64::from(0.5 * k.rate);
                        }
                    }
                }
            }
            Body::Lindblad(terms) => {
                for (rate, op) in terms {
                    *out += lindblad_term(op, rho) * Complex64::from(*rate);
                }
            }
            Body::Composite(parts) => {
                for part in parts {
                    part.accumulate(rho, out);
                }
            }
        }
    }

    /// Lindblad `(rate, operator)` pairs, empty for non-Lindblad bodies.
    pub fn lindblad_terms(&self) -> &[(f64, ComplexMatrix)] {
        match &self.body {
            Body::Lindblad(terms) => terms,
            _ => &[],
        }
    }

    /// Sum of generators acting on the same basis.
    pub fn composite(parts: Vec<Generator>) -> Result<Generator> {
        let dim = parts
            .first()
            .map(|p| p.dim)
            .ok_or_else(|| Error::Composition("empty composite generator".into()))?;
        if let Some(bad) = parts.iter().find(|p| p.dim != dim) {
            return Err(Error::Composition(format!(
                "cannot combine dimensions {dim} and {} ({})",
                bad.dim, bad.kind
            )));
        }
        Ok(Generator {
            kind: GeneratorKind::Composite,
            dim,
            body: Body::Composite(parts),
        })
    }

    /// Lindblad generator from explicit `(rate, operator)` terms.
    pub fn lindblad(
        kind: GeneratorKind,
        dim: usize,
        terms: Vec<(f64, ComplexMatrix)>,
    ) -> Result<Generator> {
        if let Some((_, op)) = terms
            .iter()
            .find(|(_, op)| op.nrows() != dim || op.ncols() != dim)
        {
            return Err(Error::Composition(format!(
                "operator of shape {}x{} in a generator of dimension {dim}",
                op.nrows(),
                op.ncols()
            )));
        }
        Ok(Generator {
            kind,
            dim,
            body: Body::Lindblad(terms),
        })
    }
}

/// Non-secular generator summed over all ordered pairs `(ω, ω′)` of each
/// channel:
/// `Σ Γ(ω)/2 [L(ω)ρL(ω′)† − L(ω′)†L(ω)ρ] + Γ(ω′)/2 [L(ω)ρL(ω′)† − ρL(ω′)†L(ω)]`.
///
/// `baths` supplies the spectral density of every channel that appears in
/// `jumps`.
pub fn generalized_liouvillian(
    jumps: &[JumpOperator],
    baths: &[(BathChannel, &dyn SpectralDensity)],
    opts: NonsecularOptions,
) -> Result<Generator> {
    let dim = jumps
        .first()
        .map(|j| j.matrix.nrows())
        .ok_or_else(|| Error::Composition("no jump operators".into()))?;
    let mut channels: Vec<BathChannel> = jumps.iter().map(|j| j.channel).collect();
    channels.sort();
    channels.dedup();

    let mut rated: Vec<Vec<RatedJump>> = Vec::with_capacity(channels.len());
    for channel in &channels {
        let density = baths
            .iter()
            .find(|(c, _)| c == channel)
            .map(|(_, d)| *d)
            .ok_or_else(|| {
                Error::Composition(format!("no bath given for the {channel} channel"))
            })?;
        let mut list = Vec::new();
        for j in jumps.iter().filter(|j| j.channel == *channel) {
            if j.matrix.nrows() != dim || j.matrix.ncols() != dim {
                return Err(Error::Composition(format!(
                    "jump at ω = {} has shape {}x{}, expected {dim}x{dim}",
                    j.omega,
                    j.matrix.nrows(),
                    j.matrix.ncols()
                )));
            }
            list.push(RatedJump {
                rate: density.rate(j.omega)?,
                omega: j.omega,
                op: j.matrix.clone(),
            });
        }
        rated.push(list);
    }

    let body = match opts.secular_cutoff {
        Some(cutoff) => Body::PartialSecular {
            channels: rated,
            cutoff,
        },
        None => Body::Factorized(
            rated
                .iter()
                .map(|list| {
                    let mut a = ComplexMatrix::zeros(dim, dim);
                    let mut a_gamma = ComplexMatrix::zeros(dim, dim);
                    for j in list {
                        a += &j.op;
                        a_gamma += &j.op * Complex64::from(j.rate);
                    }
                    (a, a_gamma)
                })
                .collect(),
        ),
    };
    Ok(Generator {
        kind: GeneratorKind::FullNonsecular,
        dim,
        body,
    })
}

/// Full non-secular generator for both Ohmic channels of `spectrum`.
pub fn nonsecular_generator(
    spectrum: &LabeledSpectrum,
    opts: NonsecularOptions,
) -> Result<Generator> {
    let params = &spectrum.params;
    let cavity = OhmicBath::cavity(params)?;
    let qubit = OhmicBath::qubit(params)?;
    let mut jumps = dressed_jump_operators(spectrum, BathChannel::Cavity, opts.bin_tol)?;
    jumps.extend(dressed_jump_operators(
        spectrum,
        BathChannel::Qubit,
        opts.bin_tol,
    )?);
    generalized_liouvillian(
        &jumps,
        &[
            (BathChannel::Cavity, &cavity as &dyn SpectralDensity),
            (BathChannel::Qubit, &qubit as &dyn SpectralDensity),
        ],
        opts,
    )
}

fn require_phase(params: &SystemParams, phase: Phase) -> Result<PhaseQuantities> {
    params.validate()?;
    let wrong = || Error::WrongPhase {
        expected: match phase {
            Phase::Normal => "normal",
            Phase::Superradiant => "superradiant",
        },
        g: params.g,
    };
    match phase_quantities(params) {
        Ok(pq) if pq.phase == phase => Ok(pq),
        Ok(_) | Err(Error::CriticalSingularity) => Err(wrong()),
        Err(e) => Err(e),
    }
}

fn require_dim(m_keep: usize) -> Result<()> {
    if m_keep < 2 {
        return Err(Error::InvalidDimension(format!(
            "m_keep must be ≥ 2, got {m_keep}"
        )));
    }
    Ok(())
}

/// `Σ_n γ₁(1 − g²)(n + 1) D[|n⟩⟨n+1|]` on the normal-phase ladder.
pub fn rwa_lindblad_np(params: &SystemParams, m_keep: usize) -> Result<Generator> {
    require_phase(params, Phase::Normal)?;
    require_dim(m_keep)?;
    let base = params.gamma1 * (1.0 - params.g * params.g);
    let terms = (0..m_keep - 1)
        .map(|n| (base * (n + 1) as f64, basis_transition(m_keep, n, n + 1)))
        .collect();
    Generator::lindblad(GeneratorKind::RwaNp, m_keep, terms)
}

/// One ladder per branch with rates `γ₁(1 − g⁻⁴)(n + 1)` and no cross-branch
/// terms.
pub fn rwa_lindblad_sp(params: &SystemParams, m_keep: usize) -> Result<Generator> {
    require_phase(params, Phase::Superradiant)?;
    require_dim(m_keep)?;
    let base = params.gamma1 * (1.0 - params.g.powi(-4));
    let mut terms = Vec::new();
    for branch in [Branch::Plus, Branch::Minus] {
        let b = branch.offset();
        let mut n = 0;
        while 2 * (n + 1) + b < m_keep {
            terms.push((
                base * (n + 1) as f64,
                basis_transition(m_keep, 2 * n + b, 2 * (n + 1) + b),
            ));
            n += 1;
        }
    }
    Generator::lindblad(GeneratorKind::RwaSp, m_keep, terms)
}

fn diagonal(values: impl Iterator<Item = f64>, dim: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (k, v) in values.take(dim).enumerate() {
        m[(k, k)] = Complex64::from(v);
    }
    m
}

/// Normal-phase pure dephasing
/// `(κ_c/2) D[Σ ⟨a†a⟩_n |n⟩⟨n|] + (κ_q/2) D[Σ ⟨σ_z⟩_n |n⟩⟨n|]`
/// with `⟨a†a⟩_n = n cosh 2r_N + sinh² r_N` and `⟨σ_z⟩_n = −1`.
pub fn dephasing_generator_np(params: &SystemParams, m_keep: usize) -> Result<Generator> {
    let pq = require_phase(params, Phase::Normal)?;
    require_dim(m_keep)?;
    let (c2r, s2) = (pq.cosh_2r(), pq.squeeze.sinh().powi(2));
    let cavity = diagonal((0..m_keep).map(|n| n as f64 * c2r + s2), m_keep);
    let qubit = identity(m_keep) * Complex64::from(-1.0);
    Generator::lindblad(
        GeneratorKind::DephasingNp,
        m_keep,
        vec![
            (params.kappa_c_phi / 2.0, cavity),
            (params.kappa_q_phi / 2.0, qubit),
        ],
    )
}

/// Superradiant pure dephasing with weights
/// `⟨a†a⟩ = n cosh 2r_S + sinh² r_S + α²` on both branches and
/// `⟨σ_z⟩ = −1/g²`.
pub fn dephasing_generator_sp(params: &SystemParams, m_keep: usize) -> Result<Generator> {
    let pq = require_phase(params, Phase::Superradiant)?;
    require_dim(m_keep)?;
    let (c2r, s2) = (pq.cosh_2r(), pq.squeeze.sinh().powi(2));
    let offset = s2 + pq.alpha * pq.alpha;
    let cavity = diagonal((0..m_keep).map(|k| (k / 2) as f64 * c2r + offset), m_keep);
    let qubit = identity(m_keep) * Complex64::from(-1.0 / (params.g * params.g));
    Generator::lindblad(
        GeneratorKind::DephasingSp,
        m_keep,
        vec![
            (params.kappa_c_phi / 2.0, cavity),
            (params.kappa_q_phi / 2.0, qubit),
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{labeled_spectrum, StateLabel};
    use crate::operators::max_abs;

    fn c(x: f64) -> Complex64 {
        Complex64::from(x)
    }

    fn random_hermitian(dim: usize, seed: u64) -> ComplexMatrix {
        let mut s = seed;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = ComplexMatrix::from_fn(dim, dim, |_, _| Complex64::new(next(), next()));
        (&m + m.adjoint()) * c(0.5)
    }

    #[test]
    fn ohmic_rate_examples() {
        let p = SystemParams::new(0.9, 1e4, 10);
        let cav = OhmicBath::cavity(&p).unwrap();
        let qub = OhmicBath::qubit(&p).unwrap();
        assert_eq!(ohmic_rate(&cav, 0.0).unwrap(), 0.0);
        let gap = phase_quantities(&p).unwrap().gap;
        assert!((ohmic_rate(&cav, gap).unwrap() - 0.435890 * 0.05).abs() < 1e-7);
        assert!((ohmic_rate(&qub, gap).unwrap() - 4.35890e-5 * 0.01).abs() < 1e-11);
        assert!(matches!(ohmic_rate(&cav, -1.0), Err(Error::Domain(_))));
        assert!(OhmicBath::new(BathChannel::Cavity, -0.1, 1.0).is_err());
        // the trait route uses 2π s(ω)
        assert!((SpectralDensity::rate(&cav, 0.7).unwrap() - 0.035).abs() < 1e-15);
    }

    #[test]
    fn zero_frequency_rule() {
        let ohmic = OhmicBath::new(BathChannel::Cavity, 0.05, 1.0).unwrap();
        assert_eq!(zero_frequency_dephasing(&ohmic).unwrap(), 0.0);
        let flat = PowerLawDensity {
            s0: 0.3,
            exponent: 0.0,
            nu_ref: 1.0,
        };
        assert!((zero_frequency_dephasing(&flat).unwrap() - 2.0 * PI * 0.3).abs() < 1e-15);
        let sub = PowerLawDensity {
            s0: 0.3,
            exponent: 0.5,
            nu_ref: 1.0,
        };
        assert_eq!(zero_frequency_dephasing(&sub).unwrap(), 0.0);
        let bad = PowerLawDensity {
            s0: 0.3,
            exponent: -0.5,
            nu_ref: 1.0,
        };
        assert!(zero_frequency_dephasing(&bad).is_err());
    }

    #[test]
    fn bare_ladder_jumps() {
        let p = SystemParams::new(0.0, 30.0, 20);
        let s = labeled_spectrum(&p, 5).unwrap();
        let jumps = dressed_jump_operators(&s, BathChannel::Cavity, 1e-6).unwrap();
        assert_eq!(jumps.len(), 1);
        assert!((jumps[0].omega - 1.0).abs() < 1e-9);
        let mut want = ComplexMatrix::zeros(5, 5);
        for n in 0..4 {
            want[(n, n + 1)] = c(((n + 1) as f64).sqrt());
        }
        assert!(max_abs(&(&jumps[0].matrix - want)) < 1e-10);
    }

    #[test]
    fn dressed_amplitude_follows_antisqueezing() {
        let p = SystemParams::new(0.9, 1000.0, 100);
        let s = labeled_spectrum(&p, 6).unwrap();
        let r = phase_quantities(&p).unwrap().squeeze;
        let x = s.cavity_elements();
        for n in 0..4 {
            let amp = x[(n, n + 1)].norm();
            let want = r.exp() * ((n + 1) as f64).sqrt();
            assert!((amp / want - 1.0).abs() < 0.02, "n={n}: {amp} vs {want}");
        }
        assert_eq!(s.labels[1], StateLabel::Normal { n: 1 });
    }

    #[test]
    fn sp_amplitude_examples() {
        let p = SystemParams::new(1.1, 1e4, 10);
        let pq = phase_quantities(&p).unwrap();
        let small = PhaseQuantities { alpha: 3.0, ..pq };
        let intra = sp_transition_amplitude(0, 1, Branch::Plus, Branch::Plus, &small, 80).unwrap();
        assert!((intra.norm() - pq.squeeze.exp()).abs() < 1e-8);
        let diag = sp_transition_amplitude(2, 2, Branch::Minus, Branch::Minus, &small, 80).unwrap();
        assert!((diag.re + 6.0).abs() < 1e-8);
        let cross = sp_transition_amplitude(0, 1, Branch::Plus, Branch::Minus, &small, 80).unwrap();
        assert!(cross.norm() < 1e-4 * intra.norm(), "{}", cross.norm());
        let np = phase_quantities(&SystemParams::new(0.5, 10.0, 10)).unwrap();
        assert!(sp_transition_amplitude(0, 1, Branch::Plus, Branch::Plus, &np, 40).is_err());
    }

    #[test]
    fn single_frequency_collapses_to_lindblad() {
        let dim = 4;
        let op = ComplexMatrix::from_fn(dim, dim, |i, j| if j == i + 1 { c(1.3) } else { c(0.0) });
        let bath = OhmicBath::new(BathChannel::Cavity, 0.2, 1.0).unwrap();
        let jumps = vec![JumpOperator {
            channel: BathChannel::Cavity,
            omega: 0.8,
            matrix: op.clone(),
        }];
        let gen = generalized_liouvillian(
            &jumps,
            &[(BathChannel::Cavity, &bath as &dyn SpectralDensity)],
            NonsecularOptions::default(),
        )
        .unwrap();
        let rho = random_hermitian(dim, 3);
        let want = lindblad_term(&op, &rho) * c(0.16);
        assert!(max_abs(&(gen.apply(&rho).unwrap() - want)) < 1e-14);
    }

    #[test]
    fn factorized_matches_double_sum() {
        let p = SystemParams::new(0.8, 50.0, 60);
        let s = labeled_spectrum(&p, 6).unwrap();
        let fast = nonsecular_generator(&s, NonsecularOptions::default()).unwrap();
        let slow = nonsecular_generator(
            &s,
            NonsecularOptions {
                secular_cutoff: Some(f64::INFINITY),
                ..Default::default()
            },
        )
        .unwrap();
        let rho = random_hermitian(6, 11);
        let diff = fast.apply(&rho).unwrap() - slow.apply(&rho).unwrap();
        assert!(max_abs(&diff) < 1e-12);
    }

    #[test]
    fn bare_decay_oracle() {
        let p = SystemParams {
            gamma1: 0.05,
            ..SystemParams::new(0.0, 30.0, 20)
        };
        let s = labeled_spectrum(&p, 4).unwrap();
        let gen = nonsecular_generator(&s, NonsecularOptions::default()).unwrap();
        let rho = basis_transition(4, 1, 1);
        let drho = gen.apply(&rho).unwrap();
        assert!((drho[(0, 0)].re - 0.05).abs() < 1e-12);
    }

    #[test]
    fn effective_rates() {
        let p = SystemParams {
            gamma1: 1.0,
            ..SystemParams::new(0.9, 1000.0, 10)
        };
        let g = rwa_lindblad_np(&p, 5).unwrap();
        assert!((g.lindblad_terms()[0].0 - 0.19).abs() < 1e-12);
        let g0 = rwa_lindblad_np(&p.with_g(0.0), 5).unwrap();
        assert!((g0.lindblad_terms()[2].0 - 3.0).abs() < 1e-15);
        let sp = rwa_lindblad_sp(&p.with_g(1.1), 6).unwrap();
        assert_eq!(sp.lindblad_terms().len(), 4);
        assert!((sp.lindblad_terms()[0].0 - 0.316987).abs() < 1e-6);
        assert!(rwa_lindblad_np(&p.with_g(1.1), 5).is_err());
        assert!(rwa_lindblad_sp(&p, 5).is_err());
        assert!(rwa_lindblad_np(&p.with_g(1.0), 5).is_err());
    }

    #[test]
    fn dephasing_rates() {
        let p = SystemParams::new(0.9, 1000.0, 10);
        let gen = dephasing_generator_np(&p, 5).unwrap();
        // qubit term alone vanishes
        let (rate, op) = &gen.lindblad_terms()[1];
        let rho = random_hermitian(5, 5);
        assert!(max_abs(&(lindblad_term(op, &rho) * c(*rate))) < 1e-15);

        let coh = basis_transition(5, 2, 0);
        let out = gen.apply(&coh).unwrap();
        let s = 0.19f64.sqrt();
        let cosh2 = ((1.0 / s + s) / 2.0).powi(2);
        let want = 0.05 / 4.0 * cosh2 * 4.0;
        assert!((out[(2, 0)].re + want).abs() < 1e-12);
        assert!((want - 0.093166).abs() < 2e-5);

        let bare = dephasing_generator_np(&p.with_g(0.0), 5).unwrap();
        let out = bare.apply(&basis_transition(5, 3, 0)).unwrap();
        assert!((out[(3, 0)].re + 0.05 * 9.0 / 4.0).abs() < 1e-14);
    }

    #[test]
    fn sp_dephasing_structure() {
        let p = SystemParams::new(1.1, 100.0, 10);
        let gen = dephasing_generator_sp(&p, 6).unwrap();
        let pq = phase_quantities(&p).unwrap();
        let s = 1.0 - 1.1f64.powi(-4);
        let closed = ((s.powf(-0.5) + s.sqrt()) / 2.0).powi(2);
        assert!((pq.cosh_2r().powi(2) - closed).abs() < 1e-12);

        // |E0+⟩⟨E0−| lies in a degenerate block: untouched
        let out = gen.apply(&basis_transition(6, 0, 1)).unwrap();
        assert!(max_abs(&out) < 1e-12);
        // shifting the dephasing operator by a constant changes nothing
        let (rate, op) = gen.lindblad_terms()[0].clone();
        let shifted = &op + identity(6) * c(7.5);
        let rho = random_hermitian(6, 9);
        let diff = lindblad_term(&op, &rho) - lindblad_term(&shifted, &rho);
        assert!(max_abs(&diff) * rate < 1e-12);
    }

    #[test]
    fn composite_checks_dimensions() {
        let p = SystemParams::new(0.5, 100.0, 10);
        let a = rwa_lindblad_np(&p, 4).unwrap();
        let b = dephasing_generator_np(&p, 5).unwrap();
        assert!(matches!(
            Generator::composite(vec![a.clone(), b]),
            Err(Error::Composition(_))
        ));
        assert!(a.apply(&identity(5)).is_err());
    }
}
