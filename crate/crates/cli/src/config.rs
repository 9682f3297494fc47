//! Run configuration: a TOML document with `[system]`, `[run]`, `[sweep]` and
//! `[output]` tables. Parsing is strict and reports every fault it finds.

use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml::{Table, Value};

use rabicrit_core::SystemParams;

use crate::error::{CliError, ConfigIssue};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSection {
    pub omega_c: f64,
    pub ratio: f64,
    /// One run per value.
    pub g: Vec<f64>,
    pub n_fock: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub kappa_c_phi: f64,
    pub kappa_q_phi: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        Self {
            omega_c: p.omega_c,
            ratio: p.ratio,
            g: vec![p.g],
            n_fock: p.n_fock,
            gamma1: p.gamma1,
            gamma2: p.gamma2,
            kappa_c_phi: p.kappa_c_phi,
            kappa_q_phi: p.kappa_q_phi,
        }
    }
}

impl SystemSection {
    pub fn params(&self, g: f64) -> SystemParams {
        SystemParams {
            omega_c: self.omega_c,
            ratio: self.ratio,
            g,
            n_fock: self.n_fock,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            kappa_c_phi: self.kappa_c_phi,
            kappa_q_phi: self.kappa_q_phi,
        }
    }

    /// Parameter sets of the individual runs.
    pub fn runs(&self) -> Vec<SystemParams> {
        self.g.iter().map(|&g| self.params(g)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorChoice {
    /// Effective ladder generator of the phase of each run.
    Auto,
    FullNonsecular,
    RwaNp,
    RwaSp,
    DephasingNp,
    DephasingSp,
}

impl GeneratorChoice {
    const NAMES: [(&'static str, GeneratorChoice); 6] = [
        ("auto", GeneratorChoice::Auto),
        ("full_nonsecular", GeneratorChoice::FullNonsecular),
        ("rwa_np", GeneratorChoice::RwaNp),
        ("rwa_sp", GeneratorChoice::RwaSp),
        ("dephasing_np", GeneratorChoice::DephasingNp),
        ("dephasing_sp", GeneratorChoice::DephasingSp),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, c)| *c == self).unwrap().0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    Rk4,
    Rkf45,
}

/// Which variance enters the metrology bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceChoice {
    /// Variance of the ladder index.
    Ladder,
    /// Variance of the bare photon number of the squeezed probe.
    Photon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Initial-state mini-language.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// `eigenstate(n)`: the `n`-th retained state.
    Eigenstate(usize),
    /// `eigenstate_sp(n, ±)`: superradiant branch state.
    Branch(usize, rabicrit_core::Branch),
    /// `superpose(c, n; c, n; …)` over retained states.
    Superpose(Vec<(f64, usize)>),
}

impl InitialState {
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        let (head, args) = text
            .strip_suffix(')')
            .and_then(|t| t.split_once('('))
            .ok_or_else(|| format!("expected `name(args)`, got `{text}`"))?;
        let index = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{}` is not a level index", s.trim()))
        };
        match head.trim() {
            "eigenstate" => Ok(InitialState::Eigenstate(index(args)?)),
            "eigenstate_sp" => {
                let (n, l) = args
                    .split_once(',')
                    .ok_or_else(|| "eigenstate_sp needs `n, ±`".to_string())?;
                let branch = match l.trim() {
                    "+" => rabicrit_core::Branch::Plus,
                    "-" | "−" => rabicrit_core::Branch::Minus,
                    other => return Err(format!("branch must be + or -, got `{other}`")),
                };
                Ok(InitialState::Branch(index(n)?, branch))
            }
            "superpose" => {
                let mut terms = Vec::new();
                for part in args.split(';') {
                    let (c, n) = part.split_once(',').ok_or_else(|| {
                        format!("superpose term `{}` needs `coeff, n`", part.trim())
                    })?;
                    let c: f64 = c
                        .trim()
                        .parse()
                        .map_err(|_| format!("`{}` is not a coefficient", c.trim()))?;
                    terms.push((c, index(n)?));
                }
                if terms.iter().all(|(c, _)| *c == 0.0) {
                    return Err("superposition has zero norm".into());
                }
                Ok(InitialState::Superpose(terms))
            }
            other => Err(format!(
                "unknown state `{other}`; use eigenstate, eigenstate_sp or superpose"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub m_keep: usize,
    pub generator: GeneratorChoice,
    /// One run per state and coupling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<Vec<String>>,
    pub t_end: f64,
    pub samples: usize,
    pub method: MethodChoice,
    pub dt: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherent: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherences: Option<Vec<[usize; 2]>>,
    pub bin_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub secular_cutoff: Option<f64>,
    pub probe: String,
    pub phi: f64,
    pub nu: f64,
    pub t_probe: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta_grid: Option<Vec<f64>>,
    pub delta_n: VarianceChoice,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            m_keep: 10,
            generator: GeneratorChoice::Auto,
            initial_state: None,
            t_end: 100.0,
            samples: 201,
            method: MethodChoice::Rkf45,
            dt: 0.01,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            coherent: None,
            coherences: None,
            bin_tol: 1e-6,
            secular_cutoff: None,
            probe: "superpose(1, 0; 1, 2)".into(),
            phi: std::f64::consts::FRAC_PI_4,
            nu: 1.0,
            t_probe: 10.0,
            kappa_grid: None,
            beta_grid: None,
            delta_n: VarianceChoice::Photon,
        }
    }
}

/// Grids of the `sweep` subcommand. Absent grids fall back to the
/// `[system]` values.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma1: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_c_phi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
    /// Omit wall-clock metadata so repeated runs are byte-identical.
    pub deterministic: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            format: Format::Csv,
            deterministic: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemSection,
    pub run: RunSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

impl RunConfig {
    /// TOML text that parses back to an equal configuration.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable in TOML")
    }
}

struct Reader<'a> {
    text: &'a str,
    issues: Vec<ConfigIssue>,
}

impl<'a> Reader<'a> {
    /// 1-based line of `key` inside `[section]` (or of the header itself).
    fn line_of(&self, section: &str, key: Option<&str>) -> Option<usize> {
        let mut current = String::new();
        for (idx, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(header) = line.strip_prefix('[') {
                current = header.trim_end_matches(']').trim().to_string();
                if key.is_none() && current == section {
                    return Some(idx + 1);
                }
                continue;
            }
            if let Some(key) = key {
                if current == section {
                    if let Some(rest) = line.strip_prefix(key) {
                        if rest.trim_start().starts_with('=') {
                            return Some(idx + 1);
                        }
                    }
                }
            }
        }
        None
    }

    fn issue(&mut self, section: &str, key: Option<&str>, message: impl Into<String>) {
        let path = match key {
            Some(k) if section.is_empty() => k.to_string(),
            Some(k) => format!("{section}.{k}"),
            None => section.to_string(),
        };
        let line = self.line_of(section, key);
        self.issues.push(ConfigIssue {
            path,
            line,
            message: message.into(),
        });
    }

    fn section(&mut self, root: &Table, name: &str) -> Table {
        match root.get(name) {
            None => Table::new(),
            Some(Value::Table(t)) => t.clone(),
            Some(other) => {
                self.issue(
                    "",
                    Some(name),
                    format!("expected a table, found {}", other.type_str()),
                );
                Table::new()
            }
        }
    }

    fn reject_unknown(&mut self, section: &str, table: &Table, known: &[&str]) {
        for key in table.keys() {
            if !known.contains(&key.as_str()) {
                self.issue(
                    section,
                    Some(key),
                    format!("unknown key; expected one of {}", known.join(", ")),
                );
            }
        }
    }

    fn as_f64(value: &Value) -> Option<f64> {
        match value {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn float<F>(&mut self, section: &str, t: &Table, key: &str, default: f64, check: F) -> f64
    where
        F: Fn(f64) -> Option<String>,
    {
        let Some(value) = t.get(key) else {
            return default;
        };
        match Self::as_f64(value) {
            Some(x) => match check(x) {
                None => x,
                Some(msg) => {
                    self.issue(section, Some(key), msg);
                    default
                }
            },
            None => {
                self.issue(
                    section,
                    Some(key),
                    format!("expected a number, found {}", value.type_str()),
                );
                default
            }
        }
    }

    fn opt_float<F>(&mut self, section: &str, t: &Table, key: &str, check: F) -> Option<f64>
    where
        F: Fn(f64) -> Option<String>,
    {
        t.contains_key(key)
            .then(|| self.float(section, t, key, f64::NAN, check))
            .filter(|x| !x.is_nan())
    }

    fn count(&mut self, section: &str, t: &Table, key: &str, default: usize, min: usize) -> usize {
        let Some(value) = t.get(key) else {
            return default;
        };
        match value {
            Value::Integer(i) if *i >= min as i64 => *i as usize,
            Value::Integer(i) => {
                self.issue(section, Some(key), format!("must be ≥ {min}, got {i}"));
                default
            }
            other => {
                self.issue(
                    section,
                    Some(key),
                    format!("expected an integer, found {}", other.type_str()),
                );
                default
            }
        }
    }

    fn boolean(&mut self, section: &str, t: &Table, key: &str) -> Option<bool> {
        match t.get(key)? {
            Value::Boolean(b) => Some(*b),
            other => {
                self.issue(
                    section,
                    Some(key),
                    format!("expected a boolean, found {}", other.type_str()),
                );
                None
            }
        }
    }

    fn string(&mut self, section: &str, t: &Table, key: &str) -> Option<String> {
        match t.get(key)? {
            Value::String(s) => Some(s.clone()),
            other => {
                self.issue(
                    section,
                    Some(key),
                    format!("expected a string, found {}", other.type_str()),
                );
                None
            }
        }
    }

    /// A string or an array of strings.
    fn strings(&mut self, section: &str, t: &Table, key: &str) -> Option<Vec<String>> {
        let value = t.get(key)?;
        let items: Vec<&Value> = match value {
            Value::Array(a) => a.iter().collect(),
            v => vec![v],
        };
        let out: Option<Vec<String>> = items
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect();
        match out {
            Some(list) if !list.is_empty() => Some(list),
            _ => {
                self.issue(
                    section,
                    Some(key),
                    "expected a string or a non-empty array of strings",
                );
                None
            }
        }
    }

    fn choice<T: Copy>(
        &mut self,
        section: &str,
        t: &Table,
        key: &str,
        options: &[(&str, T)],
        default: T,
    ) -> T {
        let Some(s) = self.string(section, t, key) else {
            return default;
        };
        match options.iter().find(|(name, _)| *name == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                self.issue(
                    section,
                    Some(key),
                    format!("`{s}` is not one of {}", names.join(", ")),
                );
                default
            }
        }
    }

    /// A number or an array of numbers, each passing `check`.
    fn float_list<F>(&mut self, section: &str, t: &Table, key: &str, check: F) -> Option<Vec<f64>>
    where
        F: Fn(f64) -> Option<String>,
    {
        let value = t.get(key)?;
        let items: Vec<&Value> = match value {
            Value::Array(a) => a.iter().collect(),
            v => vec![v],
        };
        if items.is_empty() {
            self.issue(section, Some(key), "list must not be empty");
            return None;
        }
        let mut out = Vec::with_capacity(items.len());
        for item in items {
            match Self::as_f64(item) {
                Some(x) => {
                    if let Some(msg) = check(x) {
                        self.issue(section, Some(key), msg);
                        return None;
                    }
                    out.push(x);
                }
                None => {
                    self.issue(
                        section,
                        Some(key),
                        format!("expected numbers, found {}", item.type_str()),
                    );
                    return None;
                }
            }
        }
        Some(out)
    }

    fn pairs(&mut self, section: &str, t: &Table, key: &str) -> Option<Vec<[usize; 2]>> {
        let value = t.get(key)?;
        let parsed = value.as_array().and_then(|outer| {
            outer
                .iter()
                .map(|p| match p.as_array().map(|a| a.as_slice()) {
                    Some([Value::Integer(i), Value::Integer(j)]) if *i >= 0 && *j >= 0 => {
                        Some([*i as usize, *j as usize])
                    }
                    _ => None,
                })
                .collect::<Option<Vec<_>>>()
        });
        if parsed.is_none() {
            self.issue(
                section,
                Some(key),
                "expected an array of [i, j] pairs of non-negative integers",
            );
        }
        parsed
    }
}

fn positive(x: f64) -> Option<String> {
    (!(x > 0.0 && x.is_finite())).then(|| format!("must be > 0, got {x}"))
}

fn non_negative(x: f64) -> Option<String> {
    (!(x >= 0.0 && x.is_finite())).then(|| format!("must be ≥ 0, got {x}"))
}

fn any_finite(x: f64) -> Option<String> {
    (!x.is_finite()).then(|| format!("must be finite, got {x}"))
}

const SYSTEM_KEYS: &[&str] = &[
    "omega_c",
    "ratio",
    "g",
    "n_fock",
    "gamma1",
    "gamma2",
    "kappa_c_phi",
    "kappa_q_phi",
];

const RUN_KEYS: &[&str] = &[
    "m_keep",
    "generator",
    "initial_state",
    "t_end",
    "samples",
    "method",
    "dt",
    "abs_tol",
    "rel_tol",
    "coherent",
    "coherences",
    "bin_tol",
    "secular_cutoff",
    "probe",
    "phi",
    "nu",
    "t_probe",
    "kappa_grid",
    "beta_grid",
    "delta_n",
];

const SWEEP_KEYS: &[&str] = &["g", "ratio", "gamma1", "kappa_c_phi"];
const OUTPUT_KEYS: &[&str] = &["dir", "format", "deterministic"];

/// Parses and validates a configuration document, collecting every fault.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let root: Table = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|span| text[..span.start.min(text.len())].matches('\n').count() + 1);
        CliError::Config(vec![ConfigIssue {
            path: "<document>".into(),
            line,
            message: e.message().trim().to_string(),
        }])
    })?;

    let mut r = Reader {
        text,
        issues: Vec::new(),
    };
    for key in root.keys() {
        if !["system", "run", "sweep", "output"].contains(&key.as_str()) {
            let line = r.line_of(key, None);
            r.issues.push(ConfigIssue {
                path: key.clone(),
                line: line.or_else(|| r.line_of("", Some(key))),
                message: "unknown section; expected system, run, sweep or output".into(),
            });
        }
    }

    let d = SystemSection::default();
    let t = r.section(&root, "system");
    r.reject_unknown("system", &t, SYSTEM_KEYS);
    let s = "system";
    let system = SystemSection {
        omega_c: r.float(s, &t, "omega_c", d.omega_c, positive),
        ratio: r.float(s, &t, "ratio", d.ratio, positive),
        g: r.float_list(s, &t, "g", non_negative).unwrap_or(d.g),
        n_fock: r.count(s, &t, "n_fock", d.n_fock, 2),
        gamma1: r.float(s, &t, "gamma1", d.gamma1, non_negative),
        gamma2: r.float(s, &t, "gamma2", d.gamma2, non_negative),
        kappa_c_phi: r.float(s, &t, "kappa_c_phi", d.kappa_c_phi, non_negative),
        kappa_q_phi: r.float(s, &t, "kappa_q_phi", d.kappa_q_phi, non_negative),
    };

    let d = RunSection::default();
    let t = r.section(&root, "run");
    r.reject_unknown("run", &t, RUN_KEYS);
    let s = "run";
    let initial_state = r.strings(s, &t, "initial_state");
    for text in initial_state.iter().flatten() {
        if let Err(msg) = InitialState::parse(text) {
            r.issue(s, Some("initial_state"), msg);
        }
    }
    let probe = r.string(s, &t, "probe").unwrap_or(d.probe);
    if let Err(msg) = InitialState::parse(&probe).and_then(|p| match p {
        InitialState::Branch(..) => Err("probes live on the normal-phase ladder".to_string()),
        _ => Ok(()),
    }) {
        r.issue(s, Some("probe"), msg);
    }
    let run = RunSection {
        m_keep: r.count(s, &t, "m_keep", d.m_keep, 2),
        generator: r.choice(s, &t, "generator", &GeneratorChoice::NAMES, d.generator),
        initial_state,
        t_end: r.float(s, &t, "t_end", d.t_end, non_negative),
        samples: r.count(s, &t, "samples", d.samples, 2),
        method: r.choice(
            s,
            &t,
            "method",
            &[("rk4", MethodChoice::Rk4), ("rkf45", MethodChoice::Rkf45)],
            d.method,
        ),
        dt: r.float(s, &t, "dt", d.dt, positive),
        abs_tol: r.float(s, &t, "abs_tol", d.abs_tol, positive),
        rel_tol: r.float(s, &t, "rel_tol", d.rel_tol, positive),
        coherent: r.boolean(s, &t, "coherent"),
        coherences: r.pairs(s, &t, "coherences"),
        bin_tol: r.float(s, &t, "bin_tol", d.bin_tol, positive),
        secular_cutoff: r.opt_float(s, &t, "secular_cutoff", non_negative),
        probe,
        phi: r.float(s, &t, "phi", d.phi, any_finite),
        nu: r.float(s, &t, "nu", d.nu, |x| {
            (!(x >= 1.0 && x.is_finite())).then(|| format!("must be ≥ 1, got {x}"))
        }),
        t_probe: r.float(s, &t, "t_probe", d.t_probe, non_negative),
        kappa_grid: r.float_list(s, &t, "kappa_grid", non_negative),
        beta_grid: r.float_list(s, &t, "beta_grid", non_negative),
        delta_n: r.choice(
            s,
            &t,
            "delta_n",
            &[
                ("ladder", VarianceChoice::Ladder),
                ("photon", VarianceChoice::Photon),
            ],
            d.delta_n,
        ),
    };

    let t = r.section(&root, "sweep");
    r.reject_unknown("sweep", &t, SWEEP_KEYS);
    let s = "sweep";
    let sweep = SweepSection {
        g: r.float_list(s, &t, "g", non_negative),
        ratio: r.float_list(s, &t, "ratio", positive),
        gamma1: r.float_list(s, &t, "gamma1", non_negative),
        kappa_c_phi: r.float_list(s, &t, "kappa_c_phi", non_negative),
    };

    let d = OutputSection::default();
    let t = r.section(&root, "output");
    r.reject_unknown("output", &t, OUTPUT_KEYS);
    let s = "output";
    let output = OutputSection {
        dir: r.string(s, &t, "dir").map(PathBuf::from).unwrap_or(d.dir),
        format: r.choice(
            s,
            &t,
            "format",
            &[("csv", Format::Csv), ("json", Format::Json)],
            d.format,
        ),
        deterministic: r.boolean(s, &t, "deterministic").unwrap_or(d.deterministic),
    };

    if r.issues.is_empty() {
        Ok(RunConfig {
            system,
            run,
            sweep,
            output,
        })
    } else {
        Err(CliError::Config(r.issues))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(CliError::Config(list)) => list,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_document_fills_defaults() {
        let cfg = parse_config("[system]\ng = 0.9\nratio = 1000\n").unwrap();
        assert_eq!(cfg.system.g, vec![0.9]);
        assert_eq!(cfg.system.ratio, 1000.0);
        assert_eq!(cfg.run, RunSection::default());
        assert_eq!(cfg.output, OutputSection::default());
    }

    #[test]
    fn range_error_names_the_key() {
        let list = issues("[system]\ng = -0.1\n");
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].path, "system.g");
        assert_eq!(list[0].line, Some(2));
    }

    #[test]
    fn initial_state_language() {
        assert_eq!(
            InitialState::parse("eigenstate(3)").unwrap(),
            InitialState::Eigenstate(3)
        );
        assert_eq!(
            InitialState::parse("eigenstate_sp(0, -)").unwrap(),
            InitialState::Branch(0, rabicrit_core::Branch::Minus)
        );
        assert_eq!(
            InitialState::parse("superpose(1, 0; 1, 2)").unwrap(),
            InitialState::Superpose(vec![(1.0, 0), (1.0, 2)])
        );
        assert!(InitialState::parse("eigenstate(x)").is_err());
        assert!(InitialState::parse("thermal(2)").is_err());
        assert!(InitialState::parse("superpose(0, 1)").is_err());
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let list = issues("[system]\ng = = 1\n");
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].line, Some(2));
    }

    #[test]
    fn unknown_section_is_reported() {
        let list = issues("[bath]\nx = 1\n");
        assert_eq!(list[0].path, "bath");
        assert_eq!(list[0].line, Some(1));
    }
}
