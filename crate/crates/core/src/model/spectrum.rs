use std::collections::HashSet;
use std::fmt;

use num_complex::Complex64;

use super::tridiag::SymTridiagonal;
use super::{ansatz_state, apply_cavity_quadrature, apply_qubit_flip, Branch, Phase, SystemParams};
use crate::error::{Error, Result};
use crate::operators::{fix_phase, ComplexMatrix, StateVector};

/// Eigenvalue of the parity operator `e^{iπ a†a} (−σ_z)`. The even sector
/// contains `|0,↓⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    /// Composite index of the `n`-th element of the sector chain.
    fn chain_index(self, n: usize) -> usize {
        // qubit index: 0 = ↑, 1 = ↓
        let down = match self {
            Parity::Even => n.is_multiple_of(2),
            Parity::Odd => n % 2 == 1,
        };
        2 * n + usize::from(down)
    }

    fn chain(self, params: &SystemParams) -> SymTridiagonal {
        let half_q = params.omega_q() / 2.0;
        let lambda = params.lambda();
        let diag = (0..params.n_fock)
            .map(|n| {
                let s = if self.chain_index(n) % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                params.omega_c * n as f64 + half_q * s
            })
            .collect();
        let off = (0..params.n_fock - 1)
            .map(|n| -lambda * ((n + 1) as f64).sqrt())
            .collect();
        SymTridiagonal { diag, off }
    }

    fn symbol(self) -> char {
        match self {
            Parity::Even => 'e',
            Parity::Odd => 'o',
        }
    }
}

/// Lowest `k` eigenvalues of `H_R` inside one parity sector. Fails when the
/// highest of them reaches the Fock cutoff.
pub fn sector_levels(params: &SystemParams, parity: Parity, k: usize) -> Result<Vec<f64>> {
    params.validate()?;
    let chain = parity.chain(params);
    let levels = chain.lowest_eigenvalues(k);
    if let Some(&top) = levels.last() {
        let v = chain.eigenvector(top);
        let tail = v
            .iter()
            .rev()
            .take(2)
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        if tail > 1e-8 {
            return Err(Error::TruncationRisk(format!(
                "sector level {} reaches the Fock cutoff {} (tail {tail:.2e})",
                levels.len() - 1,
                params.n_fock
            )));
        }
    }
    Ok(levels)
}

/// Label of a retained eigenstate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StateLabel {
    /// `S(r_N)|n⟩|↓⟩`.
    Normal {
        n: usize,
    },
    /// `D(lα)S(r_S)|n⟩|↓^l⟩`, obtained by rotating a degenerate parity doublet.
    Superradiant {
        n: usize,
        branch: Branch,
    },
    /// Parity eigenstate `∝ |E_n^+⟩ ± |E_n^−⟩` of a resolved (non-degenerate) doublet.
    Doublet {
        n: usize,
        parity: Parity,
    },
    Unassigned,
}

impl fmt::Display for StateLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StateLabel::Normal { n } => write!(f, "NP:{n}"),
            StateLabel::Superradiant { n, branch } => write!(f, "SP:{n}:{}", branch.symbol()),
            StateLabel::Doublet { n, parity } => write!(f, "SP:{n}:{}", parity.symbol()),
            StateLabel::Unassigned => write!(f, "unassigned"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumOptions {
    pub m_keep: usize,
    /// Doublets split by less than this (in units of `omega_c`) are rotated
    /// into branch states.
    pub degeneracy_tol: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            m_keep: 10,
            degeneracy_tol: 1e-6,
        }
    }
}

/// Lowest eigenpairs of `H_R`, labeled against the analytic ansatz states.
#[derive(Debug, Clone)]
pub struct LabeledSpectrum {
    pub params: SystemParams,
    pub phase: Option<Phase>,
    pub energies: Vec<f64>,
    pub states: Vec<StateVector>,
    pub labels: Vec<StateLabel>,
    /// `|⟨ansatz|state⟩|²` for the assigned label (0 when unassigned).
    pub overlaps: Vec<f64>,
    pub n_kept: usize,
}

impl LabeledSpectrum {
    pub fn ground_energy(&self) -> f64 {
        self.energies.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Energies measured from the lowest retained level.
    pub fn relative_energies(&self) -> Vec<f64> {
        let e0 = self.ground_energy();
        self.energies.iter().map(|e| e - e0).collect()
    }

    /// Coherent part `diag(E_n − E_0)` in the retained basis.
    pub fn hamiltonian(&self) -> ComplexMatrix {
        let rel = self.relative_energies();
        ComplexMatrix::from_fn(self.n_kept, self.n_kept, |i, j| {
            if i == j {
                Complex64::from(rel[i])
            } else {
                Complex64::from(0.0)
            }
        })
    }

    pub fn index_of(&self, label: StateLabel) -> Option<usize> {
        self.labels.iter().position(|&l| l == label)
    }

    /// `⟨E_i|O|E_j⟩` for an operator given as a composite-space mat-vec.
    pub fn matrix_elements<F>(&self, apply: F) -> ComplexMatrix
    where
        F: Fn(&StateVector) -> StateVector,
    {
        let images: Vec<StateVector> = self.states.iter().map(&apply).collect();
        ComplexMatrix::from_fn(self.n_kept, self.n_kept, |i, j| {
            self.states[i].dotc(&images[j])
        })
    }

    pub fn cavity_elements(&self) -> ComplexMatrix {
        self.matrix_elements(apply_cavity_quadrature)
    }

    pub fn qubit_elements(&self) -> ComplexMatrix {
        self.matrix_elements(apply_qubit_flip)
    }
}

struct SectorState {
    energy: f64,
    parity: Parity,
    vector: StateVector,
}

fn lowest_states(params: &SystemParams, m_keep: usize) -> Vec<SectorState> {
    let mut all = Vec::with_capacity(2 * m_keep);
    for parity in [Parity::Even, Parity::Odd] {
        let chain = parity.chain(params);
        for energy in chain.lowest_eigenvalues(m_keep) {
            all.push((energy, parity, chain.clone()));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(m_keep);
    all.into_iter()
        .map(|(energy, parity, chain)| {
            let coeffs = chain.eigenvector(energy);
            let mut vector = StateVector::zeros(params.dim());
            for (n, c) in coeffs.into_iter().enumerate() {
                vector[parity.chain_index(n)] = Complex64::from(c);
            }
            fix_phase(&mut vector);
            SectorState {
                energy,
                parity,
                vector,
            }
        })
        .collect()
}

fn overlap(a: &StateVector, b: &StateVector) -> f64 {
    a.dotc(b).norm_sqr()
}

/// Ansatz states `S(r)|n⟩...` for increasing `n`, stopping at the first level
/// that no longer fits the Fock cutoff.
fn ansatz_family(
    params: &SystemParams,
    count: usize,
    branch: Option<Branch>,
) -> Result<Vec<StateVector>> {
    let mut out = Vec::new();
    for n in 0..count.min(params.n_fock) {
        match ansatz_state(params, n, branch) {
            Ok(v) => out.push(v),
            Err(Error::TruncationRisk(_)) if n > 0 => break,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

pub fn labeled_spectrum(params: &SystemParams, m_keep: usize) -> Result<LabeledSpectrum> {
    labeled_spectrum_with(
        params,
        SpectrumOptions {
            m_keep,
            ..SpectrumOptions::default()
        },
    )
}

pub fn labeled_spectrum_with(
    params: &SystemParams,
    opts: SpectrumOptions,
) -> Result<LabeledSpectrum> {
    params.validate()?;
    let m_keep = opts.m_keep;
    if m_keep == 0 || m_keep > params.dim() {
        return Err(Error::InvalidDimension(format!(
            "m_keep = {m_keep} must lie in 1..={}",
            params.dim()
        )));
    }
    let numeric = lowest_states(params, m_keep);
    let phase = match Phase::of(params.g) {
        Ok(p) => Some(p),
        Err(Error::CriticalSingularity) => None,
        Err(e) => return Err(e),
    };
    let mut spectrum = LabeledSpectrum {
        params: *params,
        phase,
        energies: numeric.iter().map(|s| s.energy).collect(),
        states: numeric.iter().map(|s| s.vector.clone()).collect(),
        labels: vec![StateLabel::Unassigned; m_keep],
        overlaps: vec![0.0; m_keep],
        n_kept: m_keep,
    };
    match phase {
        None => {}
        Some(Phase::Normal) => label_normal(&mut spectrum)?,
        Some(Phase::Superradiant) => {
            label_superradiant(&mut spectrum, &numeric, opts.degeneracy_tol)?
        }
    }
    check_unique(&spectrum.labels)?;
    Ok(spectrum)
}

fn check_unique(labels: &[StateLabel]) -> Result<()> {
    let mut seen = HashSet::new();
    for label in labels {
        if *label != StateLabel::Unassigned && !seen.insert(*label) {
            return Err(Error::Labeling(format!(
                "ansatz state {label} claims more than one numeric eigenstate"
            )));
        }
    }
    Ok(())
}

fn label_normal(spectrum: &mut LabeledSpectrum) -> Result<()> {
    let family = ansatz_family(&spectrum.params, spectrum.n_kept + 2, None)?;
    for (k, state) in spectrum.states.iter().enumerate() {
        let best = family
            .iter()
            .enumerate()
            .map(|(n, a)| (n, overlap(a, state)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((n, ov)) = best {
            if ov >= 0.5 {
                spectrum.labels[k] = StateLabel::Normal { n };
                spectrum.overlaps[k] = ov;
            }
        }
    }
    Ok(())
}

fn normalized(v: StateVector) -> StateVector {
    let n = v.norm();
    v / Complex64::from(n)
}

fn label_superradiant(
    spectrum: &mut LabeledSpectrum,
    numeric: &[SectorState],
    degeneracy_tol: f64,
) -> Result<()> {
    let params = spectrum.params;
    let count = spectrum.n_kept / 2 + 2;
    let plus = ansatz_family(&params, count, Some(Branch::Plus))?;
    let minus = ansatz_family(&params, count, Some(Branch::Minus))?;
    let doublets = plus.len().min(minus.len());
    let combos: Vec<[StateVector; 2]> = (0..doublets)
        .map(|n| {
            [
                normalized(&plus[n] + &minus[n]),
                normalized(&plus[n] - &minus[n]),
            ]
        })
        .collect();
    let tol = degeneracy_tol * params.omega_c;

    let best_doublet = |v: &StateVector| -> Option<(usize, f64)> {
        combos
            .iter()
            .enumerate()
            .map(|(n, pair)| (n, overlap(&pair[0], v).max(overlap(&pair[1], v))))
            .max_by(|a, b| a.1.total_cmp(&b.1))
    };

    let mut k = 0;
    while k < numeric.len() {
        let lower = &numeric[k];
        let paired = k + 1 < numeric.len()
            && numeric[k + 1].energy - lower.energy < tol
            && numeric[k + 1].parity != lower.parity;
        if paired {
            let upper = &numeric[k + 1];
            let n = best_doublet(&lower.vector).map(|(n, _)| n);
            if let Some(n) = n {
                let basis = [&lower.vector, &upper.vector];
                let amps: Vec<Complex64> = basis.iter().map(|b| b.dotc(&plus[n])).collect();
                let weight = (amps[0].norm_sqr() + amps[1].norm_sqr()).sqrt();
                if weight * weight >= 0.5 {
                    // v+ = projection of the + ansatz, v− its orthogonal partner in the doublet
                    let c = [amps[0] / weight, amps[1] / weight];
                    let mut v_plus = lower.vector.clone() * c[0] + upper.vector.clone() * c[1];
                    let mut v_minus =
                        lower.vector.clone() * (-c[1].conj()) + upper.vector.clone() * c[0].conj();
                    fix_phase(&mut v_plus);
                    fix_phase(&mut v_minus);
                    let e_plus = c[0].norm_sqr() * lower.energy + c[1].norm_sqr() * upper.energy;
                    let e_minus = c[1].norm_sqr() * lower.energy + c[0].norm_sqr() * upper.energy;
                    spectrum.overlaps[k] = overlap(&plus[n], &v_plus);
                    spectrum.overlaps[k + 1] = overlap(&minus[n], &v_minus);
                    spectrum.states[k] = v_plus;
                    spectrum.states[k + 1] = v_minus;
                    spectrum.energies[k] = e_plus;
                    spectrum.energies[k + 1] = e_minus;
                    spectrum.labels[k] = StateLabel::Superradiant {
                        n,
                        branch: Branch::Plus,
                    };
                    spectrum.labels[k + 1] = StateLabel::Superradiant {
                        n,
                        branch: Branch::Minus,
                    };
                    k += 2;
                    continue;
                }
            }
        }
        if let Some((n, ov)) = best_doublet(&lower.vector) {
            if ov >= 0.5 {
                spectrum.labels[k] = StateLabel::Doublet {
                    n,
                    parity: lower.parity,
                };
                spectrum.overlaps[k] = ov;
            }
        }
        k += 1;
    }
    Ok(())
}

/// Excitation gap inside the parity sector of the ground state: the ladder
/// spacing `2ω_c e^{−2r_N}` in the normal phase and `ω_c e^{−2r_S}` between
/// doublets in the superradiant phase.
pub fn ladder_gap(params: &SystemParams) -> Result<f64> {
    let even = sector_levels(params, Parity::Even, 2)?;
    let odd = sector_levels(params, Parity::Odd, 2)?;
    let sector = if even[0] <= odd[0] { even } else { odd };
    Ok(sector[1] - sector[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// Coarse samples used to certify a single interior minimum.
    pub grid: usize,
    /// Fock cutoff; chosen from the largest displacement in the bracket when `None`.
    pub n_fock: Option<usize>,
}

impl Default for CriticalSearch {
    fn default() -> Self {
        Self {
            lo: 0.95,
            hi: 1.06,
            tol: 1e-4,
            grid: 23,
            n_fock: None,
        }
    }
}

fn search_cutoff(ratio: f64, g_hi: f64) -> usize {
    let alpha_sq = if g_hi > 1.0 {
        g_hi * g_hi * ratio / 4.0 * (1.0 - g_hi.powi(-4))
    } else {
        0.0
    };
    let alpha = alpha_sq.sqrt();
    (alpha_sq + 8.0 * alpha + 80.0).ceil() as usize
}

/// Finite-ratio critical coupling: the `g` that minimizes [`ladder_gap`].
pub fn critical_point_estimate(ratio: f64) -> Result<f64> {
    critical_point_estimate_with(ratio, CriticalSearch::default())
}

pub fn critical_point_estimate_with(ratio: f64, search: CriticalSearch) -> Result<f64> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            reason: format!("must be finite and > 0, got {ratio}"),
        });
    }
    if !(search.lo < search.hi) || search.grid < 3 || search.tol <= 0.0 {
        return Err(Error::Search(format!("invalid bracket {search:?}")));
    }
    match search.n_fock {
        Some(n_fock) => golden_search(ratio, &search, n_fock),
        None => {
            // near g = 1 the squeezed sector levels can outgrow the estimate
            let mut n_fock = search_cutoff(ratio, search.hi);
            for _ in 0..4 {
                match golden_search(ratio, &search, n_fock) {
                    Err(Error::TruncationRisk(_)) => n_fock *= 2,
                    other => return other,
                }
            }
            golden_search(ratio, &search, n_fock)
        }
    }
}

fn golden_search(ratio: f64, search: &CriticalSearch, n_fock: usize) -> Result<f64> {
    let base = SystemParams::new(search.lo, ratio, n_fock);
    let gap = |g: f64| ladder_gap(&base.with_g(g));

    let step = (search.hi - search.lo) / (search.grid - 1) as f64;
    let samples = (0..search.grid)
        .map(|i| {
            let g = search.lo + step * i as f64;
            gap(g).map(|v| (g, v))
        })
        .collect::<Result<Vec<_>>>()?;
    let (imin, _) = samples
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("grid has at least three points");
    if imin == 0 || imin == samples.len() - 1 {
        return Err(Error::Search(format!(
            "gap minimum sits on the bracket edge g = {}",
            samples[imin].0
        )));
    }
    let descending = samples[..=imin].windows(2).all(|w| w[1].1 < w[0].1);
    let ascending = samples[imin..].windows(2).all(|w| w[1].1 > w[0].1);
    if !(descending && ascending) {
        return Err(Error::Search(
            "gap is not unimodal on the bracket".to_string(),
        ));
    }

    // golden-section on the neighbouring cells
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (samples[imin - 1].0, samples[imin + 1].0);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = gap(c)?;
    let mut fd = gap(d)?;
    while (b - a).abs() > search.tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = gap(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = gap(d)?;
        }
    }
    Ok(0.5 * (a + b))
}
