//! TOML run configuration.
//!
//! ```toml
//! [model]
//! alpha = 1.5          # dissipation exponent, (1, 2]
//! mu = 1.0             # resistivity
//! r = 1.0              # cutoff threshold on ‖B‖_{W^{1,∞}}
//! s = 3.1              # Sobolev index of the diagnostics
//! cutoff_enabled = true
//! hall = true
//!
//! [noise]
//! modes = 4            # number of coefficient fields K
//! gamma = 6.0          # amplitude decay θ_j ∝ |m_j|^{-γ}
//! scale = 0.5
//! polarization_seed = 0
//! seed = 0             # Brownian paths are keyed by (seed, path_id, step)
//!
//! [numerics]
//! n = 8                # truncation radius |k| ≤ n
//! dt = 0.001
//! t_final = 0.1
//! scheme = "exponential-em"   # or "stratonovich-heun"
//! ladder = [10.0, 100.0, 1000.0]
//!
//! [initial]
//! family = "random"    # zero | single-mode | beltrami | random | checkpoint
//! amplitude = 0.02
//! seed = 1
//!
//! [output]
//! dir = "out"
//! interval = 10        # steps between diagnostics records
//! deterministic = true # omit wall-clock data from outputs
//!
//! [ensemble]
//! paths = 1
//! workers = 1
//! p = 2.0
//! ```
//!
//! Every key is optional. Unknown keys, wrong types and out-of-range values
//! are all collected before the configuration is rejected.

use std::path::PathBuf;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::integrator::{InitialData, Scheme, SolverConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub output_dir: PathBuf,
    pub paths: usize,
    pub workers: usize,
    pub deterministic: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            solver: SolverConfig::default(),
            output_dir: PathBuf::from("out"),
            paths: 1,
            workers: 1,
            deterministic: true,
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("model", &["alpha", "mu", "r", "s", "cutoff_enabled", "hall"]),
    ("noise", &["modes", "gamma", "scale", "polarization_seed", "seed"]),
    ("numerics", &["n", "dt", "t_final", "scheme", "ladder"]),
    ("initial", &["family", "amplitude", "seed", "decay", "mode", "path"]),
    ("output", &["dir", "interval", "deterministic"]),
    ("ensemble", &["paths", "workers", "p"]),
];

struct Reader<'a> {
    table: &'a Table,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn get(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.table.get(section)?.as_table()?.get(key)
    }

    fn float(&mut self, section: &str, key: &str, default: f64) -> f64 {
        match self.get(section, key) {
            None => default,
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected a number, found {}", v.type_str()));
                default
            }
        }
    }

    fn opt_float(&mut self, section: &str, key: &str) -> Option<f64> {
        self.get(section, key)?;
        Some(self.float(section, key, f64::NAN))
    }

    fn uint(&mut self, section: &str, key: &str, default: u64) -> u64 {
        match self.get(section, key) {
            None => default,
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected a non-negative integer, found {v}"));
                default
            }
        }
    }

    fn boolean(&mut self, section: &str, key: &str, default: bool) -> bool {
        match self.get(section, key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected true or false, found {v}"));
                default
            }
        }
    }

    fn string(&mut self, section: &str, key: &str) -> Option<String> {
        match self.get(section, key)? {
            Value::String(s) => Some(s.clone()),
            v => {
                self.errors.push(format!("{section}.{key}: expected a string, found {v}"));
                None
            }
        }
    }

    fn floats(&mut self, section: &str, key: &str, default: Vec<f64>) -> Vec<f64> {
        let Some(v) = self.get(section, key) else { return default };
        let parsed: Option<Vec<f64>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect()
        });
        parsed.unwrap_or_else(|| {
            self.errors.push(format!("{section}.{key}: expected an array of numbers, found {v}"));
            default
        })
    }

    fn mode(&mut self, section: &str, key: &str) -> Option<[i32; 3]> {
        let v = self.get(section, key)?;
        let parsed = v.as_array().filter(|a| a.len() == 3).and_then(|a| {
            let xs: Option<Vec<i32>> = a.iter().map(|x| x.as_integer().and_then(|i| i32::try_from(i).ok())).collect();
            xs.map(|xs| [xs[0], xs[1], xs[2]])
        });
        if parsed.is_none() {
            self.errors.push(format!("{section}.{key}: expected three integers, found {v}"));
        }
        parsed
    }

    fn unknown_keys(&mut self) {
        for (name, value) in self.table {
            let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| s == name) else {
                self.errors.push(format!("{name}: unknown section"));
                continue;
            };
            match value.as_table() {
                Some(t) => {
                    for k in t.keys().filter(|k| !keys.contains(&k.as_str())) {
                        self.errors.push(format!("{name}.{k}: unknown key"));
                    }
                }
                None => self.errors.push(format!("{name}: expected a table")),
            }
        }
    }
}

fn initial_from(r: &mut Reader, default: &InitialData) -> InitialData {
    let family = r.string("initial", "family");
    let allowed: &[&str] = match family.as_deref() {
        None => return default.clone(),
        Some("zero") => &["family"],
        Some("single-mode") => &["family", "mode", "amplitude"],
        Some("beltrami") => &["family", "amplitude"],
        Some("random") => &["family", "amplitude", "seed", "decay"],
        Some("checkpoint") => &["family", "path"],
        Some(other) => {
            r.errors.push(format!(
                "initial.family = {other:?}: expected one of zero, single-mode, beltrami, random, checkpoint"
            ));
            return default.clone();
        }
    };
    let family = family.unwrap_or_default();
    if let Some(t) = r.table.get("initial").and_then(Value::as_table) {
        for k in t.keys().filter(|k| !allowed.contains(&k.as_str())) {
            r.errors.push(format!("initial.{k}: not a parameter of the {family} family"));
        }
    }
    match family.as_str() {
        "zero" => InitialData::Zero,
        "single-mode" => {
            let mode = r.mode("initial", "mode").unwrap_or_else(|| {
                if r.get("initial", "mode").is_none() {
                    r.errors.push("initial.mode: required for the single-mode family".into());
                }
                [1, 0, 0]
            });
            InitialData::SingleMode { mode, amplitude: r.float("initial", "amplitude", 1.0) }
        }
        "beltrami" => InitialData::Beltrami { amplitude: r.float("initial", "amplitude", 1.0) },
        "random" => InitialData::Random {
            amplitude: r.float("initial", "amplitude", 0.02),
            seed: r.uint("initial", "seed", 1),
            decay: r.opt_float("initial", "decay"),
        },
        _ => match r.string("initial", "path") {
            Some(p) => InitialData::Checkpoint { path: PathBuf::from(p) },
            None => {
                r.errors.push("initial.path: required for the checkpoint family".into());
                default.clone()
            }
        },
    }
}

fn from_table(table: &Table) -> (RunConfig, Vec<String>) {
    let d = RunConfig::default();
    let ds = &d.solver;
    let mut r = Reader { table, errors: Vec::new() };
    r.unknown_keys();
    let scheme = match r.string("numerics", "scheme") {
        None => ds.scheme,
        Some(s) => Scheme::parse(&s).unwrap_or_else(|| {
            r.errors.push(format!("numerics.scheme = {s:?}: expected exponential-em or stratonovich-heun"));
            ds.scheme
        }),
    };
    let solver = SolverConfig {
        n: r.uint("numerics", "n", ds.n as u64) as usize,
        alpha: r.float("model", "alpha", ds.alpha),
        mu: r.float("model", "mu", ds.mu),
        r: r.float("model", "r", ds.r),
        s: r.float("model", "s", ds.s),
        noise_modes: r.uint("noise", "modes", ds.noise_modes as u64) as usize,
        noise_gamma: r.float("noise", "gamma", ds.noise_gamma),
        noise_scale: r.float("noise", "scale", ds.noise_scale),
        noise_seed: r.uint("noise", "polarization_seed", ds.noise_seed),
        dt: r.float("numerics", "dt", ds.dt),
        t_final: r.float("numerics", "t_final", ds.t_final),
        seed: r.uint("noise", "seed", ds.seed),
        scheme,
        cutoff_enabled: r.boolean("model", "cutoff_enabled", ds.cutoff_enabled),
        hall: r.boolean("model", "hall", ds.hall),
        ladder: r.floats("numerics", "ladder", ds.ladder.clone()),
        initial: initial_from(&mut r, &ds.initial),
        diagnostics_interval: r.uint("output", "interval", ds.diagnostics_interval as u64) as usize,
        moment_p: r.float("ensemble", "p", ds.moment_p),
    };
    let cfg = RunConfig {
        solver,
        output_dir: r.string("output", "dir").map(PathBuf::from).unwrap_or(d.output_dir),
        paths: r.uint("ensemble", "paths", d.paths as u64) as usize,
        workers: r.uint("ensemble", "workers", d.workers as u64) as usize,
        deterministic: r.boolean("output", "deterministic", d.deterministic),
    };
    let mut errors = r.errors;
    errors.extend(cfg.validate());
    (cfg, errors)
}

impl RunConfig {
    /// Constraint violations, including those of the solver settings.
    pub fn validate(&self) -> Vec<String> {
        let mut e = self.solver.validate();
        if self.paths == 0 {
            e.push("ensemble.paths: must be at least 1".into());
        }
        if self.workers == 0 {
            e.push("ensemble.workers: must be at least 1".into());
        }
        e
    }

    /// The canonical TOML form; parsing it gives back `self`.
    pub fn to_toml(&self) -> String {
        let s = &self.solver;
        let mut model = Table::new();
        model.insert("alpha".into(), s.alpha.into());
        model.insert("mu".into(), s.mu.into());
        model.insert("r".into(), s.r.into());
        model.insert("s".into(), s.s.into());
        model.insert("cutoff_enabled".into(), s.cutoff_enabled.into());
        model.insert("hall".into(), s.hall.into());
        let mut noise = Table::new();
        noise.insert("modes".into(), (s.noise_modes as i64).into());
        noise.insert("gamma".into(), s.noise_gamma.into());
        noise.insert("scale".into(), s.noise_scale.into());
        noise.insert("polarization_seed".into(), int(s.noise_seed));
        noise.insert("seed".into(), int(s.seed));
        let mut numerics = Table::new();
        numerics.insert("n".into(), (s.n as i64).into());
        numerics.insert("dt".into(), s.dt.into());
        numerics.insert("t_final".into(), s.t_final.into());
        numerics.insert("scheme".into(), s.scheme.name().into());
        numerics.insert("ladder".into(), Value::Array(s.ladder.iter().map(|&x| x.into()).collect()));
        let mut initial = Table::new();
        initial.insert("family".into(), s.initial.family().into());
        match &s.initial {
            InitialData::Zero => {}
            InitialData::SingleMode { mode, amplitude } => {
                initial.insert("mode".into(), Value::Array(mode.iter().map(|&c| i64::from(c).into()).collect()));
                initial.insert("amplitude".into(), (*amplitude).into());
            }
            InitialData::Beltrami { amplitude } => {
                initial.insert("amplitude".into(), (*amplitude).into());
            }
            InitialData::Random { amplitude, seed, decay } => {
                initial.insert("amplitude".into(), (*amplitude).into());
                initial.insert("seed".into(), int(*seed));
                if let Some(d) = decay {
                    initial.insert("decay".into(), (*d).into());
                }
            }
            InitialData::Checkpoint { path } => {
                initial.insert("path".into(), path.to_string_lossy().into_owned().into());
            }
        }
        let mut output = Table::new();
        output.insert("dir".into(), self.output_dir.to_string_lossy().into_owned().into());
        output.insert("interval".into(), (s.diagnostics_interval as i64).into());
        output.insert("deterministic".into(), self.deterministic.into());
        let mut ensemble = Table::new();
        ensemble.insert("paths".into(), (self.paths as i64).into());
        ensemble.insert("workers".into(), (self.workers as i64).into());
        ensemble.insert("p".into(), s.moment_p.into());
        let mut root = Table::new();
        for (name, t) in [
            ("model", model),
            ("noise", noise),
            ("numerics", numerics),
            ("initial", initial),
            ("output", output),
            ("ensemble", ensemble),
        ] {
            root.insert(name.into(), Value::Table(t));
        }
        toml::to_string(&root).expect("a table of plain values always serializes")
    }
}

fn int(x: u64) -> Value {
    Value::Integer(x as i64)
}

fn parse_table(text: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Config(vec![format!("syntax: {}", e.message())]))
}

/// Parse and validate; on failure every problem found is reported.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

/// Like [`parse_config`], with `section.key=value` overrides applied on top
/// of the file. Values are read as TOML, falling back to a bare string.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut table = parse_table(text)?;
    let mut errors = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut table, o) {
            errors.push(e);
        }
    }
    let (cfg, more) = from_table(&table);
    errors.extend(more);
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(errors))
    }
}

fn apply_override(table: &mut Table, spec: &str) -> std::result::Result<(), String> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| format!("{spec}: overrides take the form section.key=value"))?;
    let (section, key) = path
        .trim()
        .split_once('.')
        .ok_or_else(|| format!("{spec}: the key must be qualified by its section, e.g. model.alpha"))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    let entry = table.entry(section.to_string()).or_insert_with(|| Value::Table(Table::new()));
    match entry.as_table_mut() {
        Some(t) => {
            t.insert(key.to_string(), value);
            Ok(())
        }
        None => Err(format!("{section}: expected a table")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors(text: &str) -> Vec<String> {
        match parse_config(text) {
            Err(Error::Config(e)) => e,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_text_gives_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.solver.mu, 1.0);
        assert_eq!(cfg.solver.alpha, 1.5);
        assert_eq!(cfg.solver.s, 3.1);
        assert_eq!(cfg.solver.scheme, Scheme::ExponentialEm);
        assert!(cfg.solver.cutoff_enabled);
    }

    #[test]
    fn alpha_out_of_range_names_the_constraint() {
        let e = errors("[model]\nalpha = 3\n");
        assert_eq!(e.len(), 1);
        assert!(e[0].starts_with("model.alpha"));
        assert!(e[0].contains("(1, 2]"));
    }

    #[test]
    fn every_problem_is_listed() {
        let e = errors("[model]\nalpha = 2.5\nbogus = 1\n[numerics]\ndt = \"fast\"\nn = 0\n[extra]\nx = 1\n");
        for needle in ["model.alpha", "model.bogus", "numerics.dt", "numerics.n", "extra"] {
            assert!(e.iter().any(|m| m.starts_with(needle)), "{needle} missing from {e:?}");
        }
    }

    #[test]
    fn canonical_form_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.solver.initial = InitialData::SingleMode { mode: [1, -2, 0], amplitude: 0.25 };
        cfg.solver.scheme = Scheme::StratonovichHeun;
        cfg.solver.ladder = vec![0.5, 7.0];
        cfg.paths = 12;
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
        let cfg = RunConfig::default();
        assert_eq!(parse_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn overrides_beat_the_file() {
        let cfg = parse_config_with(
            "[model]\nalpha = 1.2\n",
            &["model.alpha=1.8".into(), "initial.family=zero".into(), "numerics.scheme=stratonovich-heun".into()],
        )
        .unwrap();
        assert_eq!(cfg.solver.alpha, 1.8);
        assert_eq!(cfg.solver.initial, InitialData::Zero);
        assert_eq!(cfg.solver.scheme, Scheme::StratonovichHeun);
        assert!(parse_config_with("", &["alpha=2".into()]).is_err());
    }

    #[test]
    fn family_parameters_are_checked() {
        let e = errors("[initial]\nfamily = \"zero\"\namplitude = 1.0\n");
        assert!(e[0].starts_with("initial.amplitude"));
        let e = errors("[initial]\nfamily = \"single-mode\"\n");
        assert!(e[0].starts_with("initial.mode"));
    }
}
