//! Flat `key = value` run configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Every key has a default, so
//! an empty file is a valid configuration. Parsing collects every problem
//! before failing.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::potentials::{Parameters, PotentialSpec};
use crate::snapshot::fmt_f64;
use crate::solver::{Profile, SchemeConfig};
use crate::spectral::{Grid, MAX_DIM, MIN_NODES};

/// All recognized keys, in echo order.
pub const KEYS: [&str; 31] = [
    "dim",
    "n",
    "length",
    "sigma",
    "c",
    "theta_u",
    "theta0_u",
    "theta_v",
    "theta0_v",
    "eps_u",
    "eps_v",
    "coupling_a",
    "coupling_b",
    "coupling_c",
    "alpha_visc",
    "cutoff_delta",
    "tau",
    "t_end",
    "newton_tol",
    "newton_max_iter",
    "safeguard_margin",
    "adaptive",
    "strict_h0",
    "init_kind",
    "seed",
    "amplitude",
    "mean_u",
    "mean_v",
    "snapshot_stride",
    "csv_stride",
    "out_dir",
];

#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    ConstantPlusNoise,
    /// `loaded_snapshot:<path>`; the file holds a `u` and a `v` block.
    LoadedSnapshot(PathBuf),
    /// `function_spec:<profile>`.
    Function(Profile),
}

impl InitSpec {
    fn parse(raw: &str) -> std::result::Result<InitSpec, String> {
        match raw.split_once(':') {
            None if raw == "constant_plus_noise" => Ok(InitSpec::ConstantPlusNoise),
            Some(("loaded_snapshot", path)) if !path.is_empty() => Ok(InitSpec::LoadedSnapshot(PathBuf::from(path))),
            Some(("function_spec", name)) => name.parse::<Profile>().map(InitSpec::Function).map_err(|e| e.to_string()),
            _ => Err(format!(
                "expected constant_plus_noise, loaded_snapshot:<path> or function_spec:<cosine|stripe>, got `{raw}`"
            )),
        }
    }

    fn echo(&self) -> String {
        match self {
            InitSpec::ConstantPlusNoise => "constant_plus_noise".into(),
            InitSpec::LoadedSnapshot(path) => format!("loaded_snapshot:{}", path.display()),
            InitSpec::Function(Profile::Cosine) => "function_spec:cosine".into(),
            InitSpec::Function(Profile::Stripe) => "function_spec:stripe".into(),
        }
    }
}

/// A fully validated run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub n: Vec<usize>,
    pub length: Vec<f64>,
    pub params: Parameters,
    /// `viscous` follows `alpha_visc > 0`.
    pub scheme: SchemeConfig,
    pub t_end: f64,
    pub strict_h0: bool,
    pub init: InitSpec,
    pub seed: u64,
    pub amplitude: f64,
    pub mean_u: f64,
    pub mean_v: f64,
    /// Steps between snapshots; zero writes only the final one.
    pub snapshot_stride: u64,
    /// Steps between CSV rows.
    pub csv_stride: u64,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n: vec![64, 64],
            length: vec![1.0, 1.0],
            params: Parameters::default(),
            scheme: SchemeConfig::default(),
            t_end: 1.0,
            strict_h0: true,
            init: InitSpec::ConstantPlusNoise,
            seed: 0,
            amplitude: 0.05,
            mean_u: 0.0,
            mean_v: 0.0,
            snapshot_stride: 100,
            csv_stride: 1,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.n, &self.length)
    }

    pub fn potential(&self) -> Result<PotentialSpec> {
        self.scheme.potential(self.params.clone())
    }

    /// Every key with its effective value, one `key = value` line each.
    pub fn echo(&self) -> String {
        let p = &self.params;
        let s = &self.scheme;
        let list = |v: Vec<String>| v.join(",");
        let values: Vec<String> = vec![
            self.n.len().to_string(),
            list(self.n.iter().map(|k| k.to_string()).collect()),
            list(self.length.iter().map(|&l| fmt_f64(l)).collect()),
            fmt_f64(p.sigma),
            fmt_f64(p.c),
            fmt_f64(p.theta_u),
            fmt_f64(p.theta0_u),
            fmt_f64(p.theta_v),
            fmt_f64(p.theta0_v),
            fmt_f64(p.eps_u),
            fmt_f64(p.eps_v),
            fmt_f64(p.coupling_a),
            fmt_f64(p.coupling_b),
            fmt_f64(p.coupling_c),
            fmt_f64(p.alpha_visc),
            s.cutoff_delta.map(fmt_f64).unwrap_or_else(|| "none".into()),
            fmt_f64(s.tau),
            fmt_f64(self.t_end),
            fmt_f64(s.newton_tol),
            s.newton_max_iter.to_string(),
            fmt_f64(s.safeguard_margin),
            s.adaptive.to_string(),
            self.strict_h0.to_string(),
            self.init.echo(),
            self.seed.to_string(),
            fmt_f64(self.amplitude),
            fmt_f64(self.mean_u),
            fmt_f64(self.mean_v),
            self.snapshot_stride.to_string(),
            self.csv_stride.to_string(),
            self.out_dir.display().to_string(),
        ];
        KEYS.iter().zip(values).map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

/// Result of parsing: the configuration and any warnings.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<String>,
}

pub fn load_config(path: &Path, strict: bool) -> Result<Parsed> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, strict)
}

/// Parses a configuration. With `strict`, unknown keys are errors rather
/// than warnings.
pub fn parse_config(text: &str, strict: bool) -> Result<Parsed> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut entries: Vec<(usize, String, String)> = Vec::new();
    let mut seen = BTreeSet::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("line {}: expected `key = value`", lineno + 1));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            let msg = format!("line {}: unknown key `{key}`", lineno + 1);
            if strict {
                errors.push(msg);
            } else {
                warnings.push(msg);
            }
            continue;
        }
        if !seen.insert(key.to_string()) {
            errors.push(format!("line {}: duplicate key `{key}`", lineno + 1));
            continue;
        }
        if value.is_empty() {
            errors.push(format!("line {}: missing value for `{key}`", lineno + 1));
            continue;
        }
        entries.push((lineno + 1, key.to_string(), value.to_string()));
    }

    let mut cfg = RunConfig::default();
    let mut dim: Option<usize> = None;
    let mut n_raw: Option<Vec<usize>> = None;
    let mut length_raw: Option<Vec<f64>> = None;

    for (line, key, value) in &entries {
        let bad = |what: &str| format!("line {line}: invalid value for `{key}`: {what}, got `{value}`");
        let float = || value.parse::<f64>().ok().filter(|x| x.is_finite());
        let int = || value.parse::<u64>().ok();
        let boolean = || match value.as_str() {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            _ => None,
        };
        macro_rules! set_f64 {
            ($target:expr) => {
                match float() {
                    Some(x) => $target = x,
                    None => errors.push(bad("expected a finite number")),
                }
            };
        }
        match key.as_str() {
            "dim" => match int() {
                Some(d) if (1..=MAX_DIM as u64).contains(&d) => dim = Some(d as usize),
                _ => errors.push(bad(&format!("expected 1..={MAX_DIM}"))),
            },
            "n" => match value.split(',').map(|x| x.trim().parse::<usize>()).collect::<std::result::Result<Vec<_>, _>>() {
                Ok(list) => n_raw = Some(list),
                Err(_) => errors.push(bad("expected a comma-separated list of node counts")),
            },
            "length" => match value.split(',').map(|x| x.trim().parse::<f64>()).collect::<std::result::Result<Vec<_>, _>>() {
                Ok(list) => length_raw = Some(list),
                Err(_) => errors.push(bad("expected a comma-separated list of lengths")),
            },
            "sigma" => set_f64!(cfg.params.sigma),
            "c" => set_f64!(cfg.params.c),
            "theta_u" => set_f64!(cfg.params.theta_u),
            "theta0_u" => set_f64!(cfg.params.theta0_u),
            "theta_v" => set_f64!(cfg.params.theta_v),
            "theta0_v" => set_f64!(cfg.params.theta0_v),
            "eps_u" => set_f64!(cfg.params.eps_u),
            "eps_v" => set_f64!(cfg.params.eps_v),
            "coupling_a" => set_f64!(cfg.params.coupling_a),
            "coupling_b" => set_f64!(cfg.params.coupling_b),
            "coupling_c" => set_f64!(cfg.params.coupling_c),
            "alpha_visc" => set_f64!(cfg.params.alpha_visc),
            "cutoff_delta" => {
                if value == "none" {
                    cfg.scheme.cutoff_delta = None;
                } else {
                    match float() {
                        Some(x) => cfg.scheme.cutoff_delta = Some(x),
                        None => errors.push(bad("expected a number or `none`")),
                    }
                }
            }
            "tau" => set_f64!(cfg.scheme.tau),
            "t_end" => set_f64!(cfg.t_end),
            "newton_tol" => set_f64!(cfg.scheme.newton_tol),
            "newton_max_iter" => match int() {
                Some(k) => cfg.scheme.newton_max_iter = k as usize,
                None => errors.push(bad("expected a nonnegative integer")),
            },
            "safeguard_margin" => set_f64!(cfg.scheme.safeguard_margin),
            "adaptive" => match boolean() {
                Some(b) => cfg.scheme.adaptive = b,
                None => errors.push(bad("expected true or false")),
            },
            "strict_h0" => match boolean() {
                Some(b) => cfg.strict_h0 = b,
                None => errors.push(bad("expected true or false")),
            },
            "init_kind" => match InitSpec::parse(value) {
                Ok(init) => cfg.init = init,
                Err(e) => errors.push(format!("line {line}: invalid value for `init_kind`: {e}")),
            },
            "seed" => match int() {
                Some(s) => cfg.seed = s,
                None => errors.push(bad("expected a nonnegative integer")),
            },
            "amplitude" => set_f64!(cfg.amplitude),
            "mean_u" => set_f64!(cfg.mean_u),
            "mean_v" => set_f64!(cfg.mean_v),
            "snapshot_stride" => match int() {
                Some(s) => cfg.snapshot_stride = s,
                None => errors.push(bad("expected a nonnegative integer")),
            },
            "csv_stride" => match int() {
                Some(s) => cfg.csv_stride = s,
                None => errors.push(bad("expected a nonnegative integer")),
            },
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            _ => unreachable!("key list is checked above"),
        }
    }

    // Grid shape: lists of length dim, or one value broadcast to every axis.
    let dim = dim.unwrap_or_else(|| n_raw.as_ref().filter(|l| l.len() > 1).map(|l| l.len()).unwrap_or(cfg.n.len()));
    if let Some(n) = broadcast(n_raw, cfg.n[0], dim, "n", &mut errors) {
        if let Some(&k) = n.iter().find(|&&k| k < MIN_NODES) {
            errors.push(format!("invalid value for `n`: need at least {MIN_NODES} nodes per axis, got {k}"));
        }
        cfg.n = n;
    }
    if let Some(length) = broadcast(length_raw, cfg.length[0], dim, "length", &mut errors) {
        if let Some(&l) = length.iter().find(|&&l| !(l.is_finite() && l > 0.0)) {
            errors.push(format!("invalid value for `length`: must be positive, got {l}"));
        }
        cfg.length = length;
    }

    cfg.scheme.viscous = cfg.params.alpha_visc > 0.0;
    let (param_errors, param_warnings) = cfg.params.violations(cfg.strict_h0);
    errors.extend(param_errors.iter().map(|e| cite(e, ": ")));
    warnings.extend(param_warnings);
    errors.extend(cfg.scheme.violations().iter().map(|e| cite(e, " ")));
    if !(cfg.t_end >= 0.0) {
        errors.push(format!("invalid value for `t_end`: must be nonnegative, got {}", cfg.t_end));
    }
    if !(cfg.amplitude >= 0.0) {
        errors.push(format!("invalid value for `amplitude`: must be nonnegative, got {}", cfg.amplitude));
    }
    for (key, m) in [("mean_u", cfg.mean_u), ("mean_v", cfg.mean_v)] {
        if !(m.abs() < 1.0) {
            errors.push(format!("invalid value for `{key}`: |{key}| < 1 required, got {m}"));
        }
    }
    if cfg.csv_stride == 0 {
        errors.push("invalid value for `csv_stride`: must be at least 1".into());
    }

    if errors.is_empty() {
        Ok(Parsed { config: cfg, warnings })
    } else {
        Err(Error::Config(errors))
    }
}

/// Rewrites `key<sep>reason` as an invalid-value message naming the key.
fn cite(message: &str, sep: &str) -> String {
    match message.split_once(sep) {
        Some((key, reason)) => format!("invalid value for `{key}`: {reason}"),
        None => format!("invalid value: {message}"),
    }
}

fn broadcast<T: Copy>(list: Option<Vec<T>>, default: T, dim: usize, key: &str, errors: &mut Vec<String>) -> Option<Vec<T>> {
    match list {
        None => Some(vec![default; dim]),
        Some(l) if l.len() == 1 => Some(vec![l[0]; dim]),
        Some(l) if l.len() == dim => Some(l),
        Some(l) => {
            errors.push(format!("invalid value for `{key}`: {} entries for dim = {dim}", l.len()));
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn errors_of(text: &str, strict: bool) -> Vec<String> {
        match parse_config(text, strict) {
            Err(Error::Config(list)) => list,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let parsed = parse_config("# nothing\n\n", false).unwrap();
        assert_eq!(parsed.config, RunConfig::default());
        assert!(parsed.warnings.is_empty());
        let echo = parsed.config.echo();
        assert_eq!(echo.lines().count(), KEYS.len());
        assert!(echo.contains("theta0_u = 1.0\n"));
    }

    #[test]
    fn echo_round_trips() {
        let text = "dim = 1\nn = 48\nlength = 2.5\nsigma = 0.7\nc = -0.1\ncutoff_delta = 0.05\ninit_kind = function_spec:stripe\nalpha_visc = 0.01\ntau = 1e-4\nseed = 42\nout_dir = runs/a b\n";
        let cfg = parse_config(text, true).unwrap().config;
        assert!(cfg.scheme.viscous);
        assert_eq!(cfg.n, vec![48]);
        let again = parse_config(&cfg.echo(), true).unwrap().config;
        assert_eq!(again, cfg);
    }

    #[test]
    fn reports_every_violation() {
        let errors = errors_of("c = 1.5\ntau = -1\nmean_u = 2\nbogus = 3\nn = 4\n", true);
        assert!(errors.iter().any(|e| e.contains("|c| < 1")), "{errors:?}");
        assert!(errors.iter().any(|e| e.contains("tau")));
        assert!(errors.iter().any(|e| e.contains("mean_u")));
        assert!(errors.iter().any(|e| e.contains("unknown key `bogus`")));
        assert!(errors.iter().any(|e| e.contains("`n`")));
        assert_eq!(errors.len(), 5);
    }

    #[test]
    fn unknown_key_is_a_warning_when_relaxed() {
        let parsed = parse_config("bogus = 3\n", false).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn h0_strict_and_relaxed() {
        let errors = errors_of("theta_u = 2\ntheta0_u = 1\n", false);
        assert!(errors.iter().any(|e| e.contains("0 < theta < theta0")), "{errors:?}");
        let parsed = parse_config("theta_u = 2\ntheta0_u = 1\nstrict_h0 = false\n", false).unwrap();
        assert_eq!(parsed.warnings.len(), 1);
    }

    #[test]
    fn grid_lists() {
        let cfg = parse_config("n = 16,32\nlength = 1,2\n", true).unwrap().config;
        assert_eq!((cfg.n, cfg.length), (vec![16, 32], vec![1.0, 2.0]));
        let errors = errors_of("dim = 3\nn = 16,32\n", true);
        assert!(errors[0].contains("2 entries for dim = 3"));
        assert!(!errors_of("init_kind = function_spec:spiral\n", true).is_empty());
        let cfg = parse_config("init_kind = loaded_snapshot:/tmp/x.chf\n", true).unwrap().config;
        assert_eq!(cfg.init, InitSpec::LoadedSnapshot(PathBuf::from("/tmp/x.chf")));
    }
}
