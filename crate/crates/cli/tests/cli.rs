use std::fs;
use std::path::Path;
use std::process::Command;

use rabicrit_cli::{
    execute, parse_config, run_subcommand, CliError, Format, RunConfig, Subcommand,
};

fn config(text: &str) -> RunConfig {
    parse_config(text).unwrap_or_else(|e| panic!("{e}"))
}

const POPULATION_GRID: &str = r#"
[system]
ratio = 1e4
gamma1 = 0.05
gamma2 = 0.01
g = [0.9, 1.0047, 1.1]
n_fock = 120

[run]
m_keep = 6
generator = "full_nonsecular"
t_end = 50.0
samples = 11
"#;

#[test]
fn population_grid_config_gives_one_run_per_coupling() {
    let cfg = config(POPULATION_GRID);
    let runs = cfg.system.runs();
    assert_eq!(runs.len(), 3);
    assert_eq!(runs[1].g, 1.0047);
    assert!(runs.iter().all(|p| p.ratio == 1e4 && p.gamma1 == 0.05));
}

#[test]
fn three_faults_are_reported_together() {
    let text = "[system]\ng = -1\nratio = 0\n\n[run]\nmethod = \"euler\"\n";
    match parse_config(text) {
        Err(CliError::Config(list)) => {
            let paths: Vec<_> = list.iter().map(|i| i.path.as_str()).collect();
            assert_eq!(paths.len(), 3, "{list:?}");
            assert!(paths.contains(&"system.g"));
            assert!(paths.contains(&"system.ratio"));
            assert!(paths.contains(&"run.method"));
            let method = list.iter().find(|i| i.path == "run.method").unwrap();
            assert_eq!(method.line, Some(6));
        }
        other => panic!("expected config errors, got {other:?}"),
    }
}

#[test]
fn echo_parses_back_to_the_same_config() {
    let cfg = config(POPULATION_GRID);
    assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    let defaults = config("");
    assert_eq!(parse_config(&defaults.to_toml()).unwrap(), defaults);
}

#[test]
fn decoupled_spectrum_is_an_even_ladder() {
    let cfg = config("[system]\ng = 0.0\nratio = 1000\nn_fock = 40\n[run]\nm_keep = 6\n");
    let bundle = run_subcommand(Subcommand::Spectrum, &cfg, 1).unwrap();
    let gaps = bundle.table("gaps").unwrap();
    assert_eq!(gaps.floats("e1_minus_e0").unwrap(), vec![1.0]);
    // same-parity neighbour of the vacuum is two photons up
    assert!((gaps.floats("ladder_gap").unwrap()[0] - 2.0).abs() < 1e-12);
    let levels = bundle.table("spectrum").unwrap();
    let rel = levels.floats("rel_energy").unwrap();
    let mut sorted = rel.clone();
    sorted.sort_by(f64::total_cmp);
    for (k, e) in sorted.iter().enumerate() {
        assert!((e - k as f64).abs() < 1e-10, "level {k}: {e}");
    }
}

#[test]
fn rwa_relaxation_reaches_the_ground_state() {
    let gamma1 = 0.05;
    let rate = gamma1 * (1.0 - 0.81);
    let t_end = 40.0 / rate;
    let cfg = config(&format!(
        "[system]\ng = 0.9\nratio = 1000\ngamma1 = {gamma1}\n\
         [run]\nm_keep = 6\ngenerator = \"rwa_np\"\ninitial_state = \"eigenstate(1)\"\n\
         t_end = {t_end}\nsamples = 41\n"
    ));
    let bundle = run_subcommand(Subcommand::Dynamics, &cfg, 1).unwrap();
    let traj = bundle.table("trajectory_0").unwrap();
    let p0 = traj.floats("pop_0").unwrap();
    assert!(*p0.last().unwrap() > 0.999, "{:?}", p0.last());
    let runs = bundle.table("runs").unwrap();
    assert_eq!(runs.columns[0], "run");
    assert_eq!(runs.columns[1], "g");
    assert_eq!(runs.floats("g").unwrap(), vec![0.9]);
}

#[test]
fn dephasing_fit_matches_the_analytic_rate() {
    let cfg = config(
        "[system]\ng = 0.9\nratio = 1000\nkappa_c_phi = 0.05\n\
         [run]\nm_keep = 4\nt_end = 40.0\nsamples = 81\n",
    );
    let bundle = run_subcommand(Subcommand::Dephasing, &cfg, 1).unwrap();
    let rates = bundle.table("dephasing_rates").unwrap();
    let analytic = rates.floats("rate_analytic").unwrap()[0];
    let fit = rates.floats("rate_fit").unwrap()[0];
    assert!((analytic - 0.0931645).abs() < 1e-6, "{analytic}");
    assert!((fit / analytic - 1.0).abs() < 1e-4, "{fit} vs {analytic}");
}

#[test]
fn metrology_rejects_the_superradiant_phase() {
    let cfg = config("[system]\ng = 1.1\nratio = 100\n");
    let err = run_subcommand(Subcommand::Metrology, &cfg, 1).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn undephased_bound_grows_toward_the_critical_point() {
    let cfg = config(
        "[system]\ng = [0.3, 0.6, 0.9, 0.95]\nratio = 1000\n\
         [run]\nbeta_grid = [0.0]\n",
    );
    let bundle = run_subcommand(Subcommand::Metrology, &cfg, 2).unwrap();
    let cq = bundle.table("metrology").unwrap().floats("cq").unwrap();
    assert!(cq.windows(2).all(|w| w[1] > w[0]), "{cq:?}");
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
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

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = config(
        "[system]\ng = [0.5, 0.9]\nratio = 1000\n\
         [run]\nm_keep = 4\nt_end = 20.0\nsamples = 21\n",
    );
    let dir = tempfile::tempdir().unwrap();
    for format in [Format::Csv, Format::Json] {
        let a = dir.path().join(format!("a_{format}"));
        let b = dir.path().join(format!("b_{format}"));
        execute(Subcommand::Dynamics, &cfg, Some(&a), Some(format), 1).unwrap();
        execute(Subcommand::Dynamics, &cfg, Some(&b), Some(format), 2).unwrap();
        assert_eq!(read_dir_sorted(&a), read_dir_sorted(&b));
    }
}

#[test]
fn csv_layout() {
    let cfg = config("[system]\ng = 0.5\nratio = 1000\n[run]\nm_keep = 3\n");
    let dir = tempfile::tempdir().unwrap();
    execute(Subcommand::Spectrum, &cfg, Some(dir.path()), None, 1).unwrap();
    let text = fs::read_to_string(dir.path().join("gaps.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# units: omega_c=1"));
    assert_eq!(lines.next(), Some("g,e1_minus_e0,ladder_gap,analytic_gap"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("metadata.json")).unwrap())
            .unwrap();
    assert_eq!(meta["subcommand"], "spectrum");
    assert!(meta.get("wall_time_s").is_none());
}

fn binary(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_rabicrit"))
        .args(args)
        .output()
        .unwrap()
        .status
        .code()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    fs::write(
        &good,
        "[system]\ng = 0.5\nratio = 1000\n[run]\nm_keep = 3\n",
    )
    .unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[system]\ng = -0.5\n").unwrap();
    let sp = dir.path().join("sp.toml");
    fs::write(&sp, "[system]\ng = 1.1\nratio = 100\n").unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let g = good.to_str().unwrap();
    assert_eq!(binary(&["spectrum", "--config", g, "--out", out]), 0);
    assert!(Path::new(out).join("spectrum.csv").exists());
    assert_eq!(binary(&["spectrum", "--config", bad.to_str().unwrap()]), 1);
    assert_eq!(
        binary(&["metrology", "--config", sp.to_str().unwrap(), "--out", out]),
        2
    );
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        binary(&["spectrum", "--config", missing.to_str().unwrap()]),
        3
    );
    // a regular file where the output directory should be
    assert_eq!(
        binary(&["spectrum", "--config", g, "--out", good.to_str().unwrap()]),
        3
    );
}
