//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rabicrit_cli::{execute, parse_config, run_subcommand, Format, RunConfig, Subcommand};
use rabicrit_core::model::{
    critical_point_estimate, labeled_spectrum, labeled_spectrum_with, sector_levels,
    LabeledSpectrum, Parity, SpectrumOptions,
};
use rabicrit_core::operators::{max_abs, StateVector};
use rabicrit_core::{
    beta_from_dynamics, cq_min, dephased_probe, dephasing_generator_np, dephasing_generator_sp,
    evolve, fit_decay_rate, nonsecular_generator, optimal_zeta, phase_bound, phase_quantities,
    qfi_exact, rwa_lindblad_np, rwa_lindblad_sp, sp_transition_amplitude, stationarity_check,
    zero_frequency_dephasing, BathChannel, Branch, Complex64, ComplexMatrix, DensityMatrix,
    Generator, IntegratorConfig, Method, NonsecularOptions, ObservableRequest, OhmicBath,
    PowerLawDensity, ProbeState, StateLabel, SystemParams,
};

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

fn adaptive(t_end: f64, samples: usize) -> IntegratorConfig {
    IntegratorConfig::new(
        Method::AdaptiveRkf45 {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
        },
        t_end,
        samples,
    )
}

/// Decay rate fitted on the leading part of `series` that stays above
/// `1e-8` of its first value.
fn fitted_rate(times: &[f64], series: &[f64]) -> Result<f64, String> {
    let floor = 1e-8 * series[0];
    let n = series.iter().take_while(|&&y| y > floor).count();
    fit_decay_rate(&times[..n], &series[..n])
        .map(|f| f.rate)
        .map_err(fail)
}

fn spectrum_gap() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for g in [0.5, 0.7, 0.9] {
        let start = Instant::now();
        let s = labeled_spectrum(&SystemParams::new(g, 1e3, 100), 4).map_err(fail)?;
        let elapsed = start.elapsed();
        let mut e = s.energies.clone();
        e.sort_by(f64::total_cmp);
        let gap = e[1] - e[0];
        let analytic = (1.0 - g * g).sqrt();
        let rel = (gap / analytic - 1.0).abs();
        ok &= rel < 0.01 && elapsed < Duration::from_secs(10);
        parts.push(format!(
            "g={g}: rel err {rel:.2e} in {:.2}s",
            elapsed.as_secs_f64()
        ));
    }
    Ok((ok, parts.join(", ")))
}

fn sp_index(s: &LabeledSpectrum, n: usize, branch: Branch) -> Result<usize, String> {
    s.index_of(StateLabel::Superradiant { n, branch })
        .ok_or_else(|| format!("no state labeled SP:{n}:{}", branch.symbol()))
}

fn sp_degeneracy() -> Outcome {
    let start = Instant::now();
    let p = SystemParams::new(1.1, 100.0, 100);
    let even = sector_levels(&p, Parity::Even, 1).map_err(fail)?;
    let odd = sector_levels(&p, Parity::Odd, 1).map_err(fail)?;
    let split = (even[0] - odd[0]).abs();
    // branch-resolve the doublets even when they are not degenerate to 1e-6
    let opts = SpectrumOptions {
        m_keep: 8,
        degeneracy_tol: 1e-1,
    };
    let s = labeled_spectrum_with(&p, opts).map_err(fail)?;

    let q = phase_quantities(&p).map_err(fail)?;
    let amp = |n, m, l| {
        sp_transition_amplitude(n, m, Branch::Plus, l, &q, 200)
            .map(|z| z.norm())
            .map_err(fail)
    };
    let mut cross: f64 = 0.0;
    for n in 0..3 {
        for m in 0..3 {
            cross = cross.max(amp(n, m, Branch::Minus)?);
        }
    }
    let ratio = cross / amp(0, 1, Branch::Plus)?;

    let gen = nonsecular_generator(&s, NonsecularOptions::default()).map_err(fail)?;
    let minus = sp_index(&s, 0, Branch::Minus)?;
    let mut v = StateVector::zeros(s.n_kept);
    v[minus] = Complex64::from(1.0);
    let residual = stationarity_check(&gen, &v).map_err(fail)?;
    let elapsed = start.elapsed();

    let ok = split < 1e-6
        && ratio < 1e-4
        && residual < 1e-4 * p.gamma1
        && elapsed < Duration::from_secs(60);
    Ok((
        ok,
        format!(
            "splitting {split:.3e} (< 1e-6), cross/intra {ratio:.3e} (< 1e-4), \
             stationarity residual {:.3e} gamma1 (< 1e-4), {:.1}s",
            residual / p.gamma1,
            elapsed.as_secs_f64()
        ),
    ))
}

fn critical_suppression() -> Outcome {
    let start = Instant::now();
    let gamma1 = 0.05;
    let gs = [0.5, 0.7, 0.9, 0.95];
    let mut full_ok = true;
    let mut rwa_ok = true;
    let mut full_rates = Vec::new();
    let mut parts = Vec::new();
    for g in gs {
        let p = SystemParams {
            gamma1,
            ..SystemParams::new(g, 1e3, 100)
        };
        let expected = gamma1 * (1.0 - g * g);
        let obs = ObservableRequest::default();

        let s = labeled_spectrum(&p, 8).map_err(fail)?;
        let gen = nonsecular_generator(&s, NonsecularOptions::default()).map_err(fail)?;
        let rho0 = DensityMatrix::basis(s.n_kept, 1).map_err(fail)?;
        let traj = evolve(
            Some(&s.hamiltonian()),
            &gen,
            &rho0,
            &adaptive(8.0 / expected, 801),
            &obs,
        )
        .map_err(fail)?;
        let full = fitted_rate(&traj.times, &traj.population(1))?;
        full_ok &= within(full, expected, 0.15);
        full_rates.push(full);

        let gen = rwa_lindblad_np(&p, 6).map_err(fail)?;
        let rho0 = DensityMatrix::basis(6, 1).map_err(fail)?;
        let traj = evolve(None, &gen, &rho0, &adaptive(5.0 / expected, 201), &obs).map_err(fail)?;
        let rwa = fitted_rate(&traj.times, &traj.population(1))?;
        rwa_ok &= within(rwa, expected, 0.02);
        parts.push(format!(
            "g={g}: full {:.3} rwa {:.4} x gamma1(1-g^2)",
            full / expected,
            rwa / expected
        ));
    }
    let monotone = full_rates.windows(2).all(|w| w[1] < w[0]);
    let elapsed = start.elapsed();
    let ok = full_ok && monotone && rwa_ok && elapsed < Duration::from_secs(300);
    Ok((
        ok,
        format!(
            "full within 15%: {full_ok}, full monotone: {monotone}, rwa within 2%: {rwa_ok}; {}; {:.1}s",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    ))
}

fn critical_point() -> Outcome {
    let start = Instant::now();
    let gc = critical_point_estimate(1e4).map_err(fail)?;
    let elapsed = start.elapsed();
    let ok = (gc - 1.0047).abs() <= 1e-3 && elapsed < Duration::from_secs(120);
    Ok((
        ok,
        format!(
            "estimate {gc:.5} (target 1.0047 +- 0.001), {:.1}s",
            elapsed.as_secs_f64()
        ),
    ))
}

/// `|ρ_20|` and the populations under `dephasing_np` from `(|0⟩ + |2⟩)/√2`.
fn dephasing_run(g: f64, t_end: f64, samples: usize) -> Result<(Vec<f64>, Vec<f64>, f64), String> {
    let p = SystemParams {
        kappa_c_phi: 0.05,
        ..SystemParams::new(g, 1e3, 100)
    };
    let gen = dephasing_generator_np(&p, 4).map_err(fail)?;
    let one = Complex64::from(1.0);
    let rho0 = DensityMatrix::superposition(4, &[(one, 0), (one, 2)]).map_err(fail)?;
    let obs = ObservableRequest {
        coherences: vec![(2, 0)],
    };
    let traj = evolve(None, &gen, &rho0, &adaptive(t_end, samples), &obs).map_err(fail)?;
    let drift = traj
        .populations
        .iter()
        .flat_map(|row| {
            row.iter()
                .zip(&traj.populations[0])
                .map(|(a, b)| (a - b).abs())
        })
        .fold(0.0, f64::max);
    let ne = traj.coherences.iter().map(|row| row[0]).collect();
    Ok((traj.times, ne, drift))
}

fn dephasing_divergence() -> Outcome {
    let start = Instant::now();
    let (t, ne, drift_a) = dephasing_run(0.9, 40.0, 81)?;
    let rate_a = fitted_rate(&t, &ne)?;
    let (t, ne, drift_b) = dephasing_run(0.99, 10.0, 81)?;
    let rate_b = fitted_rate(&t, &ne)?;
    let ratio = rate_b / rate_a;
    let drift = drift_a.max(drift_b);
    let elapsed = start.elapsed();
    let ok = within(rate_a, 0.093166, 0.02)
        && within(ratio, 7.01, 0.02)
        && drift < 1e-10
        && elapsed < Duration::from_secs(30);
    Ok((
        ok,
        format!(
            "rate(0.9) {rate_a:.6}, rate(0.99)/rate(0.9) {ratio:.4}, population drift {drift:.1e}, {:.1}s",
            elapsed.as_secs_f64()
        ),
    ))
}

fn ohmic_zero_rule() -> Outcome {
    let p = SystemParams::default();
    let ohmic = zero_frequency_dephasing(&OhmicBath::cavity(&p).map_err(fail)?).map_err(fail)?;
    let qubit = OhmicBath::new(BathChannel::Qubit, 0.01, 1.0).map_err(fail)?;
    let ohmic_q = zero_frequency_dephasing(&qubit).map_err(fail)?;
    let s0 = 0.37;
    let flat = zero_frequency_dephasing(&PowerLawDensity {
        s0,
        exponent: 0.0,
        nu_ref: 1.0,
    })
    .map_err(fail)?;
    let ok = ohmic == 0.0 && ohmic_q == 0.0 && flat == 2.0 * std::f64::consts::PI * s0;
    Ok((
        ok,
        format!("ohmic {ohmic}, {ohmic_q}; flat {flat} vs 2 pi s0"),
    ))
}

fn random_density(rng: &mut ChaCha8Rng, dim: usize) -> ComplexMatrix {
    let a = ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    rho / tr
}

fn generator_sanity() -> Outcome {
    let np = SystemParams::new(0.9, 1e3, 100);
    let sp = SystemParams::new(1.2, 100.0, 100);
    let m = 8;
    let spectrum = labeled_spectrum(&np, m).map_err(fail)?;
    let gens: Vec<(&str, Generator)> = vec![
        (
            "full_nonsecular",
            nonsecular_generator(&spectrum, NonsecularOptions::default()).map_err(fail)?,
        ),
        ("rwa_np", rwa_lindblad_np(&np, m).map_err(fail)?),
        ("rwa_sp", rwa_lindblad_sp(&sp, m).map_err(fail)?),
        (
            "dephasing_np",
            dephasing_generator_np(&np, m).map_err(fail)?,
        ),
        (
            "dephasing_sp",
            dephasing_generator_sp(&sp, m).map_err(fail)?,
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst_trace, mut worst_herm, mut worst_stat): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..50 {
        let rho = random_density(&mut rng, m);
        for (_, gen) in &gens {
            let out = gen.apply(&rho).map_err(fail)?;
            worst_trace = worst_trace.max(out.trace().norm());
            worst_herm = worst_herm.max(max_abs(&(&out - out.adjoint())));
        }
    }
    let mut ground = StateVector::zeros(m);
    ground[0] = Complex64::from(1.0);
    for (_, gen) in &gens {
        worst_stat = worst_stat.max(stationarity_check(gen, &ground).map_err(fail)?);
    }
    let names: Vec<_> = gens.iter().map(|g| g.0).collect();
    let ok = worst_trace < 1e-12 && worst_herm < 1e-12 && worst_stat < 1e-12;
    Ok((
        ok,
        format!(
            "{}: max |Tr G rho| {worst_trace:.1e}, max hermiticity {worst_herm:.1e}, \
             max |G(E0)| {worst_stat:.1e}",
            names.join("/")
        ),
    ))
}

fn metrology_closed_forms() -> Outcome {
    let start = Instant::now();
    let zeta = optimal_zeta(1.0, 0.5);
    let cq = cq_min(1.0, 0.5);
    let closed = (zeta - 2.0 / 3.0).abs() < 1e-12 && (cq - 4.0 / 3.0).abs() < 1e-12;

    let probes: Vec<ProbeState> = [(0, 1), (0, 2), (0, 3), (1, 4)]
        .iter()
        .map(|&(a, b)| ProbeState::two_component(a, b))
        .chain(std::iter::once(ProbeState::normalized(vec![
            Complex64::from(1.0),
            Complex64::new(0.5, 0.2),
            Complex64::from(0.7),
        ])))
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    let mut margin = f64::INFINITY;
    for probe in &probes {
        let dn2 = rabicrit_core::number_variance(probe);
        for k in 0..=20 {
            let beta = 0.05 * k as f64;
            let fq = qfi_exact(&dephased_probe(probe, 0.3, beta)).map_err(fail)?;
            margin = margin.min(cq_min(dn2, beta) - fq);
        }
    }
    let bounded = margin >= -1e-10;

    let two = ProbeState::two_component(0, 2).map_err(fail)?;
    let mut two_err: f64 = 0.0;
    for k in 0..=10 {
        let beta = 0.1 * k as f64;
        let fq = qfi_exact(&dephased_probe(&two, 0.7, beta)).map_err(fail)?;
        two_err = two_err.max((fq - 4.0 * (-8.0 * beta * beta).exp()).abs());
    }

    let dphi = phase_bound(1.0, 1.0, 0.0).map_err(fail)?;
    let mut identity: f64 = 0.0;
    for (nu, dn2, beta) in [(1.0, 1.0, 0.0), (10.0, 2.5, 0.3), (3.0, 0.25, 1.2)] {
        let d = phase_bound(nu, dn2, beta).map_err(fail)?;
        identity = identity.max((d * d * nu * cq_min(dn2, beta) - 1.0).abs());
    }

    // trends through the metrology subcommand
    let cfg = parse_config(
        "[system]\ng = [0.3, 0.6, 0.8, 0.9, 0.95, 0.99, 0.999]\nratio = 1000\n\
         [run]\nprobe = \"superpose(1, 0; 1, 2)\"\nkappa_grid = [0.0, 0.01, 0.05]\nt_probe = 10.0\n",
    )
    .map_err(fail)?;
    let table = run_subcommand(Subcommand::Metrology, &cfg, 4)
        .map_err(fail)?
        .table("metrology")
        .cloned()
        .ok_or("metrology table missing")?;
    let kappa = table.floats("kappa_c_phi").unwrap();
    let cqs = table.floats("cq").unwrap();
    let curve = |k: f64| -> Vec<f64> {
        kappa
            .iter()
            .zip(&cqs)
            .filter(|(&kk, _)| kk == k)
            .map(|(_, &c)| c)
            .collect()
    };
    let pure = curve(0.0);
    let pure_up = pure.windows(2).all(|w| w[1] > w[0]);
    let mut dephased_down = true;
    let mut tails = Vec::new();
    for k in [0.01, 0.05] {
        let c = curve(k);
        let peak = c.iter().cloned().fold(0.0, f64::max);
        let tail = *c.last().unwrap();
        let falls = c.windows(2).rev().take(3).all(|w| w[1] < w[0]);
        dephased_down &= falls && tail < 0.05 * peak;
        tails.push(format!("kappa {k}: tail/peak {:.3}", tail / peak));
    }
    let elapsed = start.elapsed();
    let ok = closed
        && bounded
        && two_err < 1e-9
        && (dphi - 0.5).abs() < 1e-12
        && identity < 1e-12
        && pure_up
        && dephased_down
        && elapsed < Duration::from_secs(10);
    Ok((
        ok,
        format!(
            "zeta* {zeta:.6}, C_Q {cq:.6}, min margin C_Q-F_Q {margin:.3e}, two-component err {two_err:.1e}, \
             dphi {dphi}, identity err {identity:.1e}, beta=0 increasing {pure_up}, \
             dephased decreasing {dephased_down} ({}), {:.1}s",
            tails.join(", "),
            elapsed.as_secs_f64()
        ),
    ))
}

fn beta_consistency() -> Outcome {
    let g = 0.9;
    let (t, ne, _) = dephasing_run(g, 30.0, 61)?;
    let r = phase_quantities(&SystemParams::new(g, 1e3, 100))
        .map_err(fail)?
        .squeeze;
    let mut worst: f64 = 0.0;
    for (&ti, &n) in t.iter().zip(&ne) {
        let beta = beta_from_dynamics(0.05, r, ti).map_err(fail)?.beta;
        let predicted = 0.5 * (-4.0 * beta * beta).exp();
        worst = worst.max((n / predicted - 1.0).abs());
    }
    Ok((
        worst < 0.02,
        format!("max relative deviation {worst:.2e} over t in [0, 30]"),
    ))
}

const FULL_CONFIG: &str = r#"
[system]
g = [0.5, 0.9, 1.2]
ratio = 100.0
n_fock = 100
gamma1 = 0.05
kappa_c_phi = 0.05

[run]
m_keep = 6
t_end = 20.0
samples = 41
probe = "superpose(1, 0; 1, 2)"

[sweep]
g = [0.5, 0.9]
ratio = [100.0, 1000.0]
"#;

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let cfg: RunConfig = parse_config(FULL_CONFIG).map_err(fail)?;
    let metro: RunConfig = parse_config(&FULL_CONFIG.replace("1.2]", "0.95]")).map_err(fail)?;
    let root = tempfile::tempdir().map_err(fail)?;
    let mut compared = 0;
    for (cmd, cfg) in [
        (Subcommand::Spectrum, &cfg),
        (Subcommand::Dynamics, &cfg),
        (Subcommand::Dephasing, &cfg),
        (Subcommand::Metrology, &metro),
        (Subcommand::Sweep, &cfg),
    ] {
        for format in [Format::Csv, Format::Json] {
            let mut shots = Vec::new();
            for (run, jobs) in [(0, 1), (1, 3)] {
                let dir = root.path().join(format!("{cmd}_{format}_{run}"));
                execute(cmd, cfg, Some(&dir), Some(format), jobs).map_err(fail)?;
                shots.push(snapshot(&dir));
            }
            if shots[0] != shots[1] {
                return Ok((false, format!("{cmd} ({format}) differs between runs")));
            }
            compared += shots[0].len();
        }
    }
    Ok((
        true,
        format!("{compared} files byte-identical across two runs"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("spectrum vs analytic gap", spectrum_gap),
        ("SP degeneracy and parity", sp_degeneracy),
        ("critical suppression of relaxation", critical_suppression),
        ("critical point location", critical_point),
        ("dephasing divergence", dephasing_divergence),
        ("Ohmic zero-frequency rule", ohmic_zero_rule),
        ("generator sanity suite", generator_sanity),
        ("metrology closed forms", metrology_closed_forms),
        ("cross-module beta consistency", beta_consistency),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let (pass, detail) = match check() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} of {} criteria passed",
        criteria.len() - failures,
        criteria.len()
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
