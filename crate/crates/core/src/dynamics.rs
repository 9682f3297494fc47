//! Time evolution `ρ̇ = −i[H, ρ] + Gρ` in the retained eigenbasis and decay
//! fitting.

use log::{debug, warn};
use num_complex::Complex64;

use crate::dissipators::Generator;
use crate::error::{Error, Result};
use crate::operators::{hermitian_eig, max_abs, outer, ComplexMatrix, StateVector};

const TRACE_LIMIT: f64 = 1e-6;
const NEGATIVITY_LIMIT: f64 = -1e-7;

/// Hermitian, unit-trace density matrix on the retained basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates trace (1e-9) and Hermiticity (1e-10).
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "density matrix must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let trace = matrix.trace();
        if (trace - Complex64::from(1.0)).norm() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "rho0",
                reason: format!("trace is {trace}, expected 1"),
            });
        }
        let residual = max_abs(&(&matrix - matrix.adjoint()));
        if residual > 1e-10 {
            return Err(Error::NotHermitian { residual });
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a normalized `ψ`.
    pub fn pure(state: &StateVector) -> Result<Self> {
        Self::new(outer(state, state))
    }

    /// `|k⟩⟨k|` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::InvalidDimension(format!(
                "basis state {k} outside dimension {dim}"
            )));
        }
        let mut v = StateVector::zeros(dim);
        v[k] = Complex64::from(1.0);
        Self::pure(&v)
    }

    /// Normalized superposition `Σ c_k |n_k⟩`.
    pub fn superposition(dim: usize, terms: &[(Complex64, usize)]) -> Result<Self> {
        let mut v = StateVector::zeros(dim);
        for &(coeff, n) in terms {
            if n >= dim {
                return Err(Error::InvalidDimension(format!(
                    "basis state {n} outside dimension {dim}"
                )));
            }
            v[n] += coeff;
        }
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::InvalidParameter {
                name: "rho0",
                reason: "superposition has zero norm".into(),
            });
        }
        Self::pure(&(v / Complex64::from(norm)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.matrix)
    }
}

fn min_eigenvalue(m: &ComplexMatrix) -> f64 {
    let sym = (m + m.adjoint()) * Complex64::from(0.5);
    hermitian_eig(&sym).map_or(f64::NAN, |e| e.values[0])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    FixedRk4 {
        dt: f64,
    },
    /// Runge-Kutta-Fehlberg 4(5) with per-entry mixed tolerance.
    AdaptiveRkf45 {
        abs_tol: f64,
        rel_tol: f64,
    },
}

impl Default for Method {
    fn default() -> Self {
        Method::AdaptiveRkf45 {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_end: f64,
    /// Number of recorded times, including `t = 0` and `t_end`.
    pub samples: usize,
    /// Steps between `ρ ← (ρ + ρ†)/2`.
    pub resym_every: usize,
}

impl IntegratorConfig {
    pub fn new(method: Method, t_end: f64, samples: usize) -> Self {
        Self {
            method,
            t_end,
            samples,
            resym_every: 10,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad =
            |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        match self.method {
            Method::FixedRk4 { dt } if !(dt > 0.0 && dt.is_finite()) => {
                return bad("dt", format!("must be > 0, got {dt}"))
            }
            Method::AdaptiveRkf45 { abs_tol, rel_tol } if !(abs_tol > 0.0 && rel_tol > 0.0) => {
                return bad("tolerance", format!("must be > 0, got {abs_tol}/{rel_tol}"))
            }
            _ => {}
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end", format!("must be ≥ 0, got {}", self.t_end));
        }
        if self.samples < 2 {
            return bad("samples", format!("need at least 2, got {}", self.samples));
        }
        if self.resym_every == 0 {
            return bad("resym_every", "must be ≥ 1".into());
        }
        Ok(())
    }
}

/// Coherence pairs `(i, j)` whose moduli `|⟨E_i|ρ|E_j⟩|` are recorded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableRequest {
    pub coherences: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `populations[t][k]`.
    pub populations: Vec<Vec<f64>>,
    pub coherence_pairs: Vec<(usize, usize)>,
    /// `coherences[t][p]` for pair `p`.
    pub coherences: Vec<Vec<f64>>,
    pub trace_drift: Vec<f64>,
    pub min_eig: Vec<f64>,
    pub hermiticity: Vec<f64>,
    pub warnings: Vec<String>,
    pub final_state: ComplexMatrix,
}

impl Trajectory {
    /// Population of basis state `k` over time.
    pub fn population(&self, k: usize) -> Vec<f64> {
        self.populations.iter().map(|row| row[k]).collect()
    }
}

/// Time series `|⟨E_i|ρ(t)|E_j⟩|` for a pair requested at evolve time.
pub fn coherence_element(traj: &Trajectory, i: usize, j: usize) -> Result<Vec<f64>> {
    let p = traj
        .coherence_pairs
        .iter()
        .position(|&(a, b)| (a, b) == (i, j) || (a, b) == (j, i))
        .ok_or_else(|| Error::Domain(format!("coherence ({i}, {j}) was not recorded")))?;
    Ok(traj.coherences.iter().map(|row| row[p]).collect())
}

struct Rhs<'a> {
    h: Option<&'a ComplexMatrix>,
    generator: &'a Generator,
}

impl Rhs<'_> {
    fn eval(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let mut out = self.generator.apply(rho)?;
        if let Some(h) = self.h {
            let comm = h * rho - rho * h;
            out += comm * Complex64::new(0.0, -1.0);
        }
        Ok(out)
    }
}

fn rk4_step(rhs: &Rhs, rho: &ComplexMatrix, dt: f64) -> Result<ComplexMatrix> {
    let h = Complex64::from(dt);
    let half = Complex64::from(dt / 2.0);
    let k1 = rhs.eval(rho)?;
    let k2 = rhs.eval(&(rho + &k1 * half))?;
    let k3 = rhs.eval(&(rho + &k2 * half))?;
    let k4 = rhs.eval(&(rho + &k3 * h))?;
    Ok(rho + (k1 + (k2 + k3) * Complex64::from(2.0) + k4) * Complex64::from(dt / 6.0))
}

/// One Fehlberg step: fifth-order solution and the error estimate.
fn rkf45_step(rhs: &Rhs, rho: &ComplexMatrix, dt: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let c = |x: f64| Complex64::from(x * dt);
    let k1 = rhs.eval(rho)?;
    let k2 = rhs.eval(&(rho + &k1 * c(1.0 / 4.0)))?;
    let k3 = rhs.eval(&(rho + &k1 * c(3.0 / 32.0) + &k2 * c(9.0 / 32.0)))?;
    let k4 = rhs.eval(
        &(rho + &k1 * c(1932.0 / 2197.0) - &k2 * c(7200.0 / 2197.0) + &k3 * c(7296.0 / 2197.0)),
    )?;
    let k5 = rhs.eval(
        &(rho + &k1 * c(439.0 / 216.0) - &k2 * c(8.0) + &k3 * c(3680.0 / 513.0)
            - &k4 * c(845.0 / 4104.0)),
    )?;
    let k6 = rhs.eval(
        &(rho - &k1 * c(8.0 / 27.0) + &k2 * c(2.0) - &k3 * c(3544.0 / 2565.0)
            + &k4 * c(1859.0 / 4104.0)
            - &k5 * c(11.0 / 40.0)),
    )?;
    let fifth =
        rho + &k1 * c(16.0 / 135.0) + &k3 * c(6656.0 / 12825.0) + &k4 * c(28561.0 / 56430.0)
            - &k5 * c(9.0 / 50.0)
            + &k6 * c(2.0 / 55.0);
    let err = &k1 * c(1.0 / 360.0) - &k3 * c(128.0 / 4275.0) - &k4 * c(2197.0 / 75240.0)
        + &k5 * c(1.0 / 50.0)
        + &k6 * c(2.0 / 55.0);
    Ok((fifth, err))
}

fn resymmetrize(rho: &mut ComplexMatrix) {
    *rho = (&*rho + rho.adjoint()) * Complex64::from(0.5);
}

struct Recorder<'a> {
    pairs: &'a [(usize, usize)],
    traj: Trajectory,
}

impl Recorder<'_> {
    fn record(&mut self, t: f64, rho: &ComplexMatrix) -> Result<()> {
        let trace = rho.trace();
        let drift = (trace - Complex64::from(1.0)).norm();
        if drift > TRACE_LIMIT {
            return Err(Error::IntegrationFailure {
                time: t,
                reason: format!("trace drifted to {trace}"),
            });
        }
        let min_eig = min_eigenvalue(rho);
        if min_eig < NEGATIVITY_LIMIT {
            let msg =
                format!("t = {t}: minimum eigenvalue {min_eig:.3e} below {NEGATIVITY_LIMIT:e}");
            // every sample is kept in the trajectory, the log gets the first
            if self.traj.warnings.is_empty() {
                warn!("{msg}");
            } else {
                debug!("{msg}");
            }
            self.traj.warnings.push(msg);
        }
        let dim = rho.nrows();
        self.traj.times.push(t);
        self.traj
            .populations
            .push((0..dim).map(|k| rho[(k, k)].re).collect());
        self.traj.coherences.push(
            self.pairs
                .iter()
                .map(|&(i, j)| rho[(i, j)].norm())
                .collect(),
        );
        self.traj.trace_drift.push(trace.re - 1.0);
        self.traj.min_eig.push(min_eig);
        self.traj.hermiticity.push(max_abs(&(rho - rho.adjoint())));
        Ok(())
    }
}

/// Integrates from `rho0` to `config.t_end`, recording `config.samples`
/// equally spaced times. `h` is the coherent part in the same basis (usually
/// `diag(E_n − E_0)`); `None` drops it.
pub fn evolve(
    h: Option<&ComplexMatrix>,
    generator: &Generator,
    rho0: &DensityMatrix,
    config: &IntegratorConfig,
    observables: &ObservableRequest,
) -> Result<Trajectory> {
    config.validate()?;
    let dim = rho0.dim();
    if generator.dim != dim {
        return Err(Error::Composition(format!(
            "generator dimension {} does not match state dimension {dim}",
            generator.dim
        )));
    }
    if let Some(h) = h {
        if h.nrows() != dim || h.ncols() != dim {
            return Err(Error::Composition(format!(
                "Hamiltonian is {}x{}, state dimension {dim}",
                h.nrows(),
                h.ncols()
            )));
        }
    }
    if let Some(&(i, j)) = observables
        .coherences
        .iter()
        .find(|&&(i, j)| i >= dim || j >= dim)
    {
        return Err(Error::InvalidDimension(format!(
            "coherence ({i}, {j}) outside dimension {dim}"
        )));
    }

    let rhs = Rhs { h, generator };
    let mut rec = Recorder {
        pairs: &observables.coherences,
        traj: Trajectory {
            times: Vec::with_capacity(config.samples),
            populations: Vec::with_capacity(config.samples),
            coherence_pairs: observables.coherences.clone(),
            coherences: Vec::with_capacity(config.samples),
            trace_drift: Vec::with_capacity(config.samples),
            min_eig: Vec::with_capacity(config.samples),
            hermiticity: Vec::with_capacity(config.samples),
            warnings: Vec::new(),
            final_state: ComplexMatrix::zeros(0, 0),
        },
    };
    let mut rho = rho0.matrix().clone();
    rec.record(0.0, &rho)?;

    let interval = config.t_end / (config.samples - 1) as f64;
    let mut steps_taken = 0usize;
    let mut t = 0.0;
    let mut dt_adaptive = interval.min(0.1).max(f64::MIN_POSITIVE);
    for k in 1..config.samples {
        let target = if k == config.samples - 1 {
            config.t_end
        } else {
            interval * k as f64
        };
        match config.method {
            Method::FixedRk4 { dt } => {
                let span = target - t;
                let n = (span / dt).ceil().max(1.0) as usize;
                let h = span / n as f64;
                for _ in 0..n {
                    rho = rk4_step(&rhs, &rho, h)?;
                    steps_taken += 1;
                    if steps_taken.is_multiple_of(config.resym_every) {
                        resymmetrize(&mut rho);
                    }
                }
            }
            Method::AdaptiveRkf45 { abs_tol, rel_tol } => {
                let floor = 1e-14 * config.t_end.max(1.0);
                while t < target {
                    let remaining = target - t;
                    let h = dt_adaptive.min(remaining);
                    let (next, err) = rkf45_step(&rhs, &rho, h)?;
                    let ratio = err
                        .iter()
                        .zip(next.iter())
                        .map(|(e, y)| e.norm() / (abs_tol + rel_tol * y.norm()))
                        .fold(0.0f64, f64::max);
                    if ratio <= 1.0 {
                        t = if h == remaining { target } else { t + h };
                        rho = next;
                        steps_taken += 1;
                        if steps_taken.is_multiple_of(config.resym_every) {
                            resymmetrize(&mut rho);
                        }
                    }
                    let factor = if ratio == 0.0 {
                        5.0
                    } else {
                        (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
                    };
                    // keep the grown step if it was only clipped by the sample time
                    let base = if h == remaining && ratio <= 1.0 {
                        dt_adaptive.max(h)
                    } else {
                        h
                    };
                    dt_adaptive = base * factor;
                    if dt_adaptive < floor {
                        return Err(Error::Stiffness {
                            time: t,
                            dt: dt_adaptive,
                        });
                    }
                }
            }
        }
        t = target;
        rec.record(t, &rho)?;
    }
    rec.traj.final_state = rho;
    Ok(rec.traj)
}

/// `max |G(|s⟩⟨s|)|`; zero certifies a stationary state.
pub fn stationarity_check(generator: &Generator, state: &StateVector) -> Result<f64> {
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter {
            name: "state",
            reason: format!("must be normalized, norm is {norm}"),
        });
    }
    Ok(max_abs(&generator.apply(&outer(state, state))?))
}

/// Single-exponential fit `y = A e^{−rate t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub stderr: f64,
    pub amplitude: f64,
    /// Set when the relative standard error exceeds 1%.
    pub poor_fit: bool,
}

/// Least-squares fit of `ln y` against `t`. Needs at least 20 positive,
/// non-increasing points spanning two e-foldings.
pub fn fit_decay_rate(times: &[f64], series: &[f64]) -> Result<DecayFit> {
    if times.len() != series.len() {
        return Err(Error::Fit(format!(
            "{} times for {} values",
            times.len(),
            series.len()
        )));
    }
    let n = series.len();
    if n < 20 {
        return Err(Error::Fit(format!("need at least 20 points, got {n}")));
    }
    if let Some(bad) = series.iter().find(|&&y| !(y > 0.0 && y.is_finite())) {
        return Err(Error::Fit(format!("series must be positive, found {bad}")));
    }
    if series.windows(2).any(|w| w[1] > w[0] * (1.0 + 1e-12)) {
        return Err(Error::Fit("series is not monotonically decreasing".into()));
    }
    let span = (series[0] / series[n - 1]).ln();
    if span < 2.0 {
        return Err(Error::Fit(format!(
            "series covers {span:.2} e-foldings, need at least 2"
        )));
    }
    let logs: Vec<f64> = series.iter().map(|y| y.ln()).collect();
    let nf = n as f64;
    let t_mean = times.iter().sum::<f64>() / nf;
    let y_mean = logs.iter().sum::<f64>() / nf;
    let sxx: f64 = times.iter().map(|t| (t - t_mean).powi(2)).sum();
    let sxy: f64 = times
        .iter()
        .zip(&logs)
        .map(|(t, y)| (t - t_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ssr: f64 = times
        .iter()
        .zip(&logs)
        .map(|(t, y)| (y - intercept - slope * t).powi(2))
        .sum();
    let stderr = (ssr / (nf - 2.0) / sxx).sqrt();
    let rate = -slope;
    Ok(DecayFit {
        rate,
        stderr,
        amplitude: intercept.exp(),
        poor_fit: stderr > 1e-2 * rate.abs(),
    })
}
