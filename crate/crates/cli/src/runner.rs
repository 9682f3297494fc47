//! Subcommand orchestration: turns a validated configuration into result
//! tables.

use std::fmt;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use rabicrit_core::dissipators::{
    dephasing_generator_np, dephasing_generator_sp, nonsecular_generator, rwa_lindblad_np,
    rwa_lindblad_sp, Generator, NonsecularOptions,
};
use rabicrit_core::dynamics::{
    evolve, fit_decay_rate, DensityMatrix, IntegratorConfig, Method, ObservableRequest, Trajectory,
};
use rabicrit_core::metrology::{
    beta_from_dynamics, number_variance, photon_number_variance, MetrologyReport, ProbeState,
};
use rabicrit_core::model::{
    labeled_spectrum, ladder_gap, sector_levels, LabeledSpectrum, Parity, StateLabel,
};
use rabicrit_core::{phase_quantities, Complex64, ComplexMatrix, Error, Phase, SystemParams};

use crate::bundle::{Bundle, Cell, Metadata, Table};
use crate::config::{GeneratorChoice, InitialState, MethodChoice, RunConfig, VarianceChoice};
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Spectrum,
    Dynamics,
    Dephasing,
    Metrology,
    Sweep,
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subcommand::Spectrum => "spectrum",
            Subcommand::Dynamics => "dynamics",
            Subcommand::Dephasing => "dephasing",
            Subcommand::Metrology => "metrology",
            Subcommand::Sweep => "sweep",
        })
    }
}

type Outcome<T> = Result<T, CliError>;

/// Maps `f` over `items` on at most `jobs` threads, keeping input order.
fn par_map<T, R, F>(jobs: usize, items: &[T], f: F) -> Outcome<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Outcome<R> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| items.par_iter().map(&f).collect())
}

fn at_g(g: f64) -> String {
    format!("g = {g}")
}

pub fn run_subcommand(cmd: Subcommand, cfg: &RunConfig, jobs: usize) -> Outcome<Bundle> {
    let start = Instant::now();
    info!(
        "{cmd}: {} coupling value(s), {jobs} job(s)",
        cfg.system.g.len()
    );
    let tables = match cmd {
        Subcommand::Spectrum => spectrum(cfg, jobs)?,
        Subcommand::Dynamics => dynamics(cfg, jobs, false)?,
        Subcommand::Dephasing => dynamics(cfg, jobs, true)?,
        Subcommand::Metrology => metrology(cfg, jobs)?,
        Subcommand::Sweep => sweep(cfg, jobs)?,
    };
    Ok(Bundle {
        metadata: Metadata {
            subcommand: cmd.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.to_toml(),
            wall_time_s: (!cfg.output.deterministic).then(|| start.elapsed().as_secs_f64()),
        },
        tables,
    })
}

fn analytic_gap(p: &SystemParams) -> f64 {
    phase_quantities(p).map_or(f64::NAN, |q| q.gap)
}

fn spectrum(cfg: &RunConfig, jobs: usize) -> Outcome<Vec<Table>> {
    let m_keep = cfg.run.m_keep;
    let spectra = par_map(jobs, &cfg.system.runs(), |p| {
        labeled_spectrum(p, m_keep).map_err(CliError::numerical(at_g(p.g)))
    })?;
    let mut levels = Table::with_columns(
        "spectrum",
        &[
            "g",
            "index",
            "label",
            "energy",
            "rel_energy",
            "gap_to_next",
            "overlap",
        ],
    );
    let mut gaps = Table::with_columns("gaps", &["g", "e1_minus_e0", "ladder_gap", "analytic_gap"]);
    for s in &spectra {
        let g = s.params.g;
        let rel = s.relative_energies();
        // branch-rotated states are listed in label order, not strict energy order
        let mut order: Vec<usize> = (0..s.n_kept).collect();
        order.sort_by(|&a, &b| s.energies[a].total_cmp(&s.energies[b]).then(a.cmp(&b)));
        for (pos, &k) in order.iter().enumerate() {
            let next = order
                .get(pos + 1)
                .map_or(f64::NAN, |&n| s.energies[n] - s.energies[k]);
            levels.push(vec![
                g.into(),
                k.into(),
                s.labels[k].to_string().into(),
                s.energies[k].into(),
                rel[k].into(),
                next.into(),
                s.overlaps[k].into(),
            ]);
        }
        let mut sorted = s.energies.clone();
        sorted.sort_by(f64::total_cmp);
        let e10 = if sorted.len() > 1 {
            sorted[1] - sorted[0]
        } else {
            f64::NAN
        };
        let ladder = ladder_gap(&s.params).map_err(CliError::numerical(at_g(g)))?;
        gaps.push(vec![
            g.into(),
            e10.into(),
            ladder.into(),
            analytic_gap(&s.params).into(),
        ]);
    }
    Ok(vec![levels, gaps])
}

/// Generator, coherent part and basis bookkeeping of one run.
struct Prepared {
    kind: GeneratorChoice,
    generator: Generator,
    hamiltonian: ComplexMatrix,
    spectrum: Option<LabeledSpectrum>,
}

fn resolve_kind(
    choice: GeneratorChoice,
    p: &SystemParams,
    dephasing: bool,
) -> Result<GeneratorChoice, Error> {
    if choice != GeneratorChoice::Auto {
        return Ok(choice);
    }
    Ok(match (Phase::of(p.g)?, dephasing) {
        (Phase::Normal, false) => GeneratorChoice::RwaNp,
        (Phase::Superradiant, false) => GeneratorChoice::RwaSp,
        (Phase::Normal, true) => GeneratorChoice::DephasingNp,
        (Phase::Superradiant, true) => GeneratorChoice::DephasingSp,
    })
}

fn ladder_hamiltonian(
    p: &SystemParams,
    m_keep: usize,
    per_level: usize,
) -> Result<ComplexMatrix, Error> {
    let gap = phase_quantities(p)?.gap;
    let mut h = ComplexMatrix::zeros(m_keep, m_keep);
    for k in 0..m_keep {
        h[(k, k)] = Complex64::from((k / per_level) as f64 * gap);
    }
    Ok(h)
}

fn prepare(cfg: &RunConfig, p: &SystemParams, dephasing: bool) -> Result<Prepared, Error> {
    let m = cfg.run.m_keep;
    let kind = resolve_kind(cfg.run.generator, p, dephasing)?;
    let (generator, hamiltonian, spectrum) = match kind {
        GeneratorChoice::FullNonsecular => {
            let s = labeled_spectrum(p, m)?;
            let opts = NonsecularOptions {
                secular_cutoff: cfg.run.secular_cutoff,
                bin_tol: cfg.run.bin_tol,
            };
            (nonsecular_generator(&s, opts)?, s.hamiltonian(), Some(s))
        }
        GeneratorChoice::RwaNp => (rwa_lindblad_np(p, m)?, ladder_hamiltonian(p, m, 1)?, None),
        GeneratorChoice::RwaSp => (rwa_lindblad_sp(p, m)?, ladder_hamiltonian(p, m, 2)?, None),
        GeneratorChoice::DephasingNp => (
            dephasing_generator_np(p, m)?,
            ladder_hamiltonian(p, m, 1)?,
            None,
        ),
        GeneratorChoice::DephasingSp => (
            dephasing_generator_sp(p, m)?,
            ladder_hamiltonian(p, m, 2)?,
            None,
        ),
        GeneratorChoice::Auto => unreachable!("resolved above"),
    };
    Ok(Prepared {
        kind,
        generator,
        hamiltonian,
        spectrum,
    })
}

fn initial_density(
    state: &InitialState,
    prep: &Prepared,
    dim: usize,
) -> Result<DensityMatrix, Error> {
    match state {
        InitialState::Eigenstate(n) => DensityMatrix::basis(dim, *n),
        InitialState::Branch(n, branch) => {
            let idx = match (&prep.spectrum, prep.kind) {
                (Some(s), _) => s
                    .index_of(StateLabel::Superradiant {
                        n: *n,
                        branch: *branch,
                    })
                    .ok_or_else(|| {
                        Error::Labeling(format!(
                            "no retained state carries the label SP:{n}:{}",
                            branch.symbol()
                        ))
                    })?,
                (None, GeneratorChoice::RwaSp | GeneratorChoice::DephasingSp) => {
                    2 * n + branch.offset()
                }
                _ => {
                    return Err(Error::Labeling(
                        "eigenstate_sp needs a superradiant basis".into(),
                    ))
                }
            };
            DensityMatrix::basis(dim, idx)
        }
        InitialState::Superpose(terms) => {
            let terms: Vec<(Complex64, usize)> = terms
                .iter()
                .map(|&(c, n)| (Complex64::from(c), n))
                .collect();
            DensityMatrix::superposition(dim, &terms)
        }
    }
}

fn integrator(cfg: &RunConfig) -> IntegratorConfig {
    let method = match cfg.run.method {
        MethodChoice::Rk4 => Method::FixedRk4 { dt: cfg.run.dt },
        MethodChoice::Rkf45 => Method::AdaptiveRkf45 {
            abs_tol: cfg.run.abs_tol,
            rel_tol: cfg.run.rel_tol,
        },
    };
    IntegratorConfig::new(method, cfg.run.t_end, cfg.run.samples)
}

struct RunPoint {
    params: SystemParams,
    state_text: String,
    state: InitialState,
}

struct RunResult {
    kind: GeneratorChoice,
    coherent: bool,
    rho0: ComplexMatrix,
    rates: Vec<f64>,
    trajectory: Trajectory,
}

/// Analytic decay rate of `ρ_ij` under a diagonal Lindblad generator.
fn diagonal_dephasing_rate(generator: &Generator, i: usize, j: usize) -> f64 {
    generator
        .lindblad_terms()
        .iter()
        .map(|(rate, op)| 0.5 * rate * (op[(i, i)] - op[(j, j)]).norm_sqr())
        .sum()
}

fn dynamics(cfg: &RunConfig, jobs: usize, dephasing: bool) -> Outcome<Vec<Table>> {
    let default_state = if dephasing {
        "superpose(1, 0; 1, 2)"
    } else {
        "eigenstate(1)"
    };
    let states: Vec<String> = cfg
        .run
        .initial_state
        .clone()
        .unwrap_or_else(|| vec![default_state.to_string()]);
    let pairs: Vec<(usize, usize)> = cfg
        .run
        .coherences
        .clone()
        .unwrap_or_else(|| if dephasing { vec![[2, 0]] } else { vec![] })
        .into_iter()
        .map(|[i, j]| (i, j))
        .collect();
    let mut points = Vec::new();
    for params in cfg.system.runs() {
        for text in &states {
            points.push(RunPoint {
                params,
                state_text: text.clone(),
                state: InitialState::parse(text).expect("validated at parse time"),
            });
        }
    }
    let integ = integrator(cfg);
    let obs = ObservableRequest {
        coherences: pairs.clone(),
    };
    let results = par_map(jobs, &points, |pt| {
        let context = format!("{}, initial state {}", at_g(pt.params.g), pt.state_text);
        let run = || -> Result<RunResult, Error> {
            let prep = prepare(cfg, &pt.params, dephasing)?;
            let coherent = cfg
                .run
                .coherent
                .unwrap_or(prep.kind == GeneratorChoice::FullNonsecular);
            let rho0 = initial_density(&pt.state, &prep, cfg.run.m_keep)?;
            let h = coherent.then_some(&prep.hamiltonian);
            let trajectory = evolve(h, &prep.generator, &rho0, &integ, &obs)?;
            if let Some(first) = trajectory.warnings.first() {
                warn!(
                    "{context}: {} sample(s) lost positivity, first at {first}",
                    trajectory.warnings.len()
                );
            }
            let rates = pairs
                .iter()
                .map(|&(i, j)| diagonal_dephasing_rate(&prep.generator, i, j))
                .collect();
            Ok(RunResult {
                kind: prep.kind,
                coherent,
                rho0: rho0.into_matrix(),
                rates,
                trajectory,
            })
        };
        run().map_err(CliError::numerical(context))
    })?;

    let mut runs = Table::with_columns(
        "runs",
        &[
            "run",
            "g",
            "generator",
            "initial_state",
            "coherent",
            "warnings",
        ],
    );
    let mut tables = Vec::new();
    let mut coherence = Table::with_columns(
        "coherence",
        &["g", "run", "i", "j", "t", "n_e", "n_e_analytic"],
    );
    let mut rates = Table::with_columns(
        "dephasing_rates",
        &[
            "g",
            "run",
            "i",
            "j",
            "rate_analytic",
            "rate_fit",
            "rate_fit_stderr",
        ],
    );
    for (k, (pt, res)) in points.iter().zip(&results).enumerate() {
        let traj = &res.trajectory;
        runs.push(vec![
            k.into(),
            pt.params.g.into(),
            res.kind.name().into(),
            pt.state_text.as_str().into(),
            if res.coherent { "true" } else { "false" }.into(),
            traj.warnings.len().into(),
        ]);

        let dim = cfg.run.m_keep;
        let mut columns: Vec<String> = vec!["t".into()];
        columns.extend((0..dim).map(|i| format!("pop_{i}")));
        columns.extend(pairs.iter().map(|(i, j)| format!("coh_{i}_{j}")));
        columns.push("trace_drift".into());
        columns.push("min_eig".into());
        let mut table = Table::new(format!("trajectory_{k}"), columns);
        for (ti, &t) in traj.times.iter().enumerate() {
            let mut row: Vec<Cell> = vec![t.into()];
            row.extend(traj.populations[ti].iter().map(|&x| Cell::from(x)));
            row.extend(traj.coherences[ti].iter().map(|&x| Cell::from(x)));
            row.push(traj.trace_drift[ti].into());
            row.push(traj.min_eig[ti].into());
            table.push(row);
        }
        tables.push(table);

        if dephasing {
            for (p, &(i, j)) in pairs.iter().enumerate() {
                let initial = res.rho0[(i, j)].norm();
                let series: Vec<f64> = traj.coherences.iter().map(|row| row[p]).collect();
                for (ti, &t) in traj.times.iter().enumerate() {
                    coherence.push(vec![
                        pt.params.g.into(),
                        k.into(),
                        i.into(),
                        j.into(),
                        t.into(),
                        series[ti].into(),
                        (initial * (-res.rates[p] * t).exp()).into(),
                    ]);
                }
                let (fit, stderr) = fit_decay_rate(&traj.times, &series)
                    .map_or((f64::NAN, f64::NAN), |f| (f.rate, f.stderr));
                rates.push(vec![
                    pt.params.g.into(),
                    k.into(),
                    i.into(),
                    j.into(),
                    res.rates[p].into(),
                    fit.into(),
                    stderr.into(),
                ]);
            }
        }
    }
    let mut out = vec![runs];
    if dephasing {
        out.push(coherence);
        out.push(rates);
    }
    out.extend(tables);
    Ok(out)
}

/// Fock space large enough for a probe squeezed by `r`.
fn probe_cutoff(r: f64, probe: &ProbeState) -> usize {
    let need = (4.0 * r + 1.0).exp() + 10.0 * probe.dim() as f64 + 40.0;
    need.ceil().max(200.0) as usize
}

fn probe_state(text: &str) -> Result<ProbeState, Error> {
    match InitialState::parse(text) {
        Ok(InitialState::Eigenstate(n)) => {
            let mut c = vec![Complex64::from(0.0); n + 1];
            c[n] = Complex64::from(1.0);
            ProbeState::new(c)
        }
        Ok(InitialState::Superpose(terms)) => {
            let dim = terms.iter().map(|t| t.1).max().unwrap_or(0) + 1;
            let mut c = vec![Complex64::from(0.0); dim];
            for (coeff, n) in terms {
                c[n] += Complex64::from(coeff);
            }
            ProbeState::normalized(c)
        }
        _ => Err(Error::InvalidParameter {
            name: "probe",
            reason: format!("`{text}` is not a normal-phase probe"),
        }),
    }
}

fn metrology(cfg: &RunConfig, jobs: usize) -> Outcome<Vec<Table>> {
    let run = &cfg.run;
    let probe = probe_state(&run.probe).map_err(CliError::numerical("probe"))?;
    let kappas = run
        .kappa_grid
        .clone()
        .unwrap_or_else(|| vec![cfg.system.kappa_c_phi]);
    let rows = par_map(jobs, &cfg.system.runs(), |p| {
        let body = || -> Result<Vec<Vec<Cell>>, Error> {
            let pq = phase_quantities(p)?;
            if pq.phase != Phase::Normal {
                return Err(Error::WrongPhase {
                    expected: "normal (metrology is defined for normal-phase probes)",
                    g: p.g,
                });
            }
            let delta_n_sq = match run.delta_n {
                VarianceChoice::Ladder => number_variance(&probe),
                VarianceChoice::Photon => {
                    photon_number_variance(&probe, pq.squeeze, probe_cutoff(pq.squeeze, &probe))?
                }
            };
            let mut settings: Vec<(f64, f64, f64)> = Vec::new();
            match &run.beta_grid {
                Some(grid) => settings.extend(grid.iter().map(|&b| (f64::NAN, f64::NAN, b))),
                None => {
                    for &kappa in &kappas {
                        let beta = beta_from_dynamics(kappa, pq.squeeze, run.t_probe)?.beta;
                        settings.push((kappa, run.t_probe, beta));
                    }
                }
            }
            let mut rows = Vec::new();
            for (kappa, t, beta) in settings {
                let r = MetrologyReport::compute(&probe, beta, run.phi, run.nu, Some(delta_n_sq))?;
                rows.push(vec![
                    p.g.into(),
                    kappa.into(),
                    t.into(),
                    r.beta.into(),
                    r.delta_n_sq.into(),
                    r.zeta_star.into(),
                    r.cq.into(),
                    (4.0 * r.delta_n_sq).into(),
                    r.fq_exact.into(),
                    r.delta_phi.into(),
                    r.nu.into(),
                ]);
            }
            Ok(rows)
        };
        body().map_err(CliError::numerical(at_g(p.g)))
    })?;
    let mut table = Table::with_columns(
        "metrology",
        &[
            "g",
            "kappa_c_phi",
            "t",
            "beta",
            "delta_n_sq",
            "zeta_star",
            "cq",
            "cq_pure",
            "fq_exact",
            "delta_phi",
            "nu",
        ],
    );
    for row in rows.into_iter().flatten() {
        table.push(row);
    }
    Ok(vec![table])
}

/// Raises the Fock cutoff to fit the superradiant displacement.
fn with_cutoff(p: &SystemParams) -> SystemParams {
    let need = match phase_quantities(p) {
        Ok(q) if q.phase == Phase::Superradiant => {
            (q.alpha * q.alpha + 8.0 * q.alpha + 80.0).ceil() as usize
        }
        _ => 0,
    };
    SystemParams {
        n_fock: p.n_fock.max(need),
        ..*p
    }
}

/// Single-quantum excitation gap: `E₁ − E₀` in the normal phase, the spacing
/// between the two lowest doublets otherwise.
fn excitation_gap(p: &SystemParams) -> Result<f64, Error> {
    if !matches!(Phase::of(p.g), Ok(Phase::Normal)) {
        return ladder_gap(p);
    }
    let mut levels = sector_levels(p, Parity::Even, 2)?;
    levels.extend(sector_levels(p, Parity::Odd, 2)?);
    levels.sort_by(f64::total_cmp);
    Ok(levels[1] - levels[0])
}

/// [`excitation_gap`] with the cutoff doubled while truncation is detected.
fn grown_excitation_gap(p: &SystemParams) -> Result<(f64, SystemParams), Error> {
    let mut p = with_cutoff(p);
    let mut attempt = 0;
    loop {
        match excitation_gap(&p) {
            Err(Error::TruncationRisk(_)) if attempt < 5 => {
                p.n_fock *= 2;
                attempt += 1;
            }
            other => return other.map(|gap| (gap, p)),
        }
    }
}

fn sweep(cfg: &RunConfig, jobs: usize) -> Outcome<Vec<Table>> {
    let s = &cfg.system;
    let grid = &cfg.sweep;
    let gs = grid.g.clone().unwrap_or_else(|| s.g.clone());
    let ratios = grid.ratio.clone().unwrap_or_else(|| vec![s.ratio]);
    let gammas = grid.gamma1.clone().unwrap_or_else(|| vec![s.gamma1]);
    let kappas = grid
        .kappa_c_phi
        .clone()
        .unwrap_or_else(|| vec![s.kappa_c_phi]);
    let mut points = Vec::new();
    for &g in &gs {
        for &ratio in &ratios {
            for &gamma1 in &gammas {
                for &kappa_c_phi in &kappas {
                    points.push(SystemParams {
                        ratio,
                        gamma1,
                        kappa_c_phi,
                        ..s.params(g)
                    });
                }
            }
        }
    }
    let probe = probe_state(&cfg.run.probe).map_err(CliError::numerical("probe"))?;
    let delta_n_sq = number_variance(&probe);
    let rows = par_map(jobs, &points, |p| {
        let context = format!("{}, ratio = {}", at_g(p.g), p.ratio);
        let body = || -> Result<Vec<Cell>, Error> {
            let (gap, p) = &grown_excitation_gap(p)?;
            let gap = *gap;
            let pq = phase_quantities(p).ok();
            let (analytic, rwa_rate, dephasing_rate, beta, cq) = match pq {
                Some(q) => {
                    let factor = match q.phase {
                        Phase::Normal => 1.0 - p.g * p.g,
                        Phase::Superradiant => 1.0 - p.g.powi(-4),
                    };
                    let beta = beta_from_dynamics(p.kappa_c_phi, q.squeeze, cfg.run.t_probe)?.beta;
                    let cq = if q.phase == Phase::Normal {
                        rabicrit_core::cq_min(delta_n_sq, beta)
                    } else {
                        f64::NAN
                    };
                    (
                        q.gap,
                        p.gamma1 * factor,
                        p.kappa_c_phi * q.cosh_2r().powi(2),
                        beta,
                        cq,
                    )
                }
                None => (f64::NAN, 0.0, f64::NAN, f64::NAN, f64::NAN),
            };
            Ok(vec![
                p.g.into(),
                p.ratio.into(),
                p.gamma1.into(),
                p.kappa_c_phi.into(),
                p.n_fock.into(),
                gap.into(),
                analytic.into(),
                rwa_rate.into(),
                dephasing_rate.into(),
                beta.into(),
                cq.into(),
            ])
        };
        body().map_err(CliError::numerical(context))
    })?;
    let mut table = Table::with_columns(
        "sweep",
        &[
            "g",
            "ratio",
            "gamma1",
            "kappa_c_phi",
            "n_fock",
            "excitation_gap",
            "analytic_gap",
            "rwa_rate",
            "dephasing_rate_20",
            "beta",
            "cq",
        ],
    );
    for row in rows {
        table.push(row);
    }
    Ok(vec![table])
}
