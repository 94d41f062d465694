//! Flat `key = value` run configuration, experiment runners and CSV output.
//!
//! A config file holds one `key = value` (or `key: value`) pair per line;
//! `#` starts a comment. Overrides given on the command line win over the
//! file. Unknown keys are rejected and every default that is applied is logged.

mod checks;
mod csv;
mod run;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use checks::{run_checks, CheckResult};
pub use csv::{format_number, format_with, gamma_sweep_header, h_sweep_header, DEFAULT_PRECISION};
pub use run::{h_sweep, run, run_gamma_sweep, run_h_sweep, run_solve, run_validate, HSweepRow, Outcome};

use crate::error::{Error, Result};
use crate::ocp::{ControlBounds, DesiredState, MultiplierShift, ProblemConfig, Samples, Schedule};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const CHECK_FAILED: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
}

/// Exit code for an error escaping a runner.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => exit::CONFIG,
        Error::NotConverged(_) => exit::NOT_CONVERGED,
        _ => exit::FAILURE,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Solve,
    GammaSweep,
    HSweep,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "validate" => Ok(Self::Validate),
            "solve" => Ok(Self::Solve),
            "gamma-sweep" => Ok(Self::GammaSweep),
            "h-sweep" => Ok(Self::HSweep),
            other => Err(Error::Config(format!(
                "unknown command '{other}' (expected validate, solve, gamma-sweep or h-sweep)"
            ))),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Validate => "validate",
            Self::Solve => "solve",
            Self::GammaSweep => "gamma-sweep",
            Self::HSweep => "h-sweep",
        })
    }
}

/// Everything a run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub a: f64,
    pub b: f64,
    /// Cells of the (coarsest) mesh.
    pub n: usize,
    /// Number of meshes in an h-sweep, each refining the previous one.
    pub levels: usize,
    /// Cells of the h-sweep reference mesh.
    pub ref_n: usize,
    pub problem: ProblemConfig,
    pub schedule: Schedule,
    /// Fixed γ for `solve` and `h-sweep`; `solve` follows the schedule without it.
    pub gamma: Option<f64>,
    pub out: Option<PathBuf>,
    pub dump_matrices: bool,
    pub workers: Option<usize>,
    /// Re-run the h-sweep against a reference with twice the resolution.
    pub check_reference: bool,
    /// Test mode: perturb one stiffness entry before the validation checks.
    pub fault_injection: bool,
    /// Digits after the decimal point in CSV output.
    pub precision: usize,
}

pub const KEYS: &[&str] = &[
    "command",
    "a",
    "b",
    "n",
    "levels",
    "ref_n",
    "s",
    "alpha",
    "u_d",
    "u_b",
    "mu_hat",
    "z_lo",
    "z_hi",
    "opt_tol",
    "max_iter",
    "method",
    "gamma",
    "gamma0",
    "factor",
    "count",
    "out",
    "dump_matrices",
    "workers",
    "check_reference",
    "fault_injection",
    "precision",
];

fn defaults() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("a", "-0.5"),
        ("b", "0.5"),
        ("n", "256"),
        ("levels", "5"),
        ("ref_n", "4096"),
        ("s", "0.4"),
        ("alpha", "1e-2"),
        ("u_d", "getoor"),
        ("u_b", "0.1"),
        ("mu_hat", "0"),
        ("opt_tol", "1e-8"),
        ("max_iter", "500"),
        ("method", "newton"),
        ("gamma0", "0.1"),
        ("factor", "4"),
        ("count", "13"),
        ("dump_matrices", "false"),
        ("check_reference", "false"),
        ("fault_injection", "false"),
        ("precision", "16"),
    ])
}

/// Splits `key = value` / `key: value` lines.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let pos = line
            .find(['=', ':'])
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1)))?;
        let key = line[..pos].trim();
        let value = line[pos + 1..].trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

/// Parses a `key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) =
        s.split_once('=').ok_or_else(|| Error::Config(format!("override '{s}' is not of the form key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Reads a config file and applies overrides.
pub fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_in(&text, overrides, path.parent())
}

/// Parses config text; relative data-file paths resolve against the working directory.
pub fn parse_config(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    parse_config_in(text, overrides, None)
}

fn parse_config_in(text: &str, overrides: &[(String, String)], base: Option<&Path>) -> Result<RunConfig> {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in parse_pairs(text)?.into_iter().chain(overrides.iter().cloned()) {
        if !KEYS.contains(&k.as_str()) {
            return Err(Error::Config(format!("unknown key '{k}'")));
        }
        map.insert(k, v);
    }
    for (k, v) in defaults() {
        if !map.contains_key(k) {
            log::info!("default: {k} = {v}");
            map.insert(k.to_string(), v.to_string());
        }
    }
    let get = |k: &str| map.get(k).map(String::as_str);
    let num = |k: &str| -> Result<f64> {
        let v = get(k).ok_or_else(|| Error::Config(format!("missing key '{k}'")))?;
        let x: f64 = v.parse().map_err(|_| Error::Config(format!("{k}: '{v}' is not a number")))?;
        if !x.is_finite() {
            return Err(Error::Config(format!("{k}: '{v}' is not finite")));
        }
        Ok(x)
    };
    let int = |k: &str| -> Result<usize> {
        let v = get(k).ok_or_else(|| Error::Config(format!("missing key '{k}'")))?;
        v.parse().map_err(|_| Error::Config(format!("{k}: '{v}' is not a nonnegative integer")))
    };
    let flag = |k: &str| -> Result<bool> {
        match get(k) {
            Some("true" | "1" | "yes") => Ok(true),
            Some("false" | "0" | "no") | None => Ok(false),
            Some(v) => Err(Error::Config(format!("{k}: '{v}' is not a boolean"))),
        }
    };

    let command: Command = get("command").ok_or_else(|| Error::Config("missing key 'command'".into()))?.parse()?;

    let bounds = match (get("z_lo"), get("z_hi")) {
        (None, None) => None,
        (Some(_), Some(_)) => Some(ControlBounds::new(num("z_lo")?, num("z_hi")?)?),
        _ => return Err(Error::Config("z_lo and z_hi must be given together".into())),
    };
    let problem = ProblemConfig {
        s: num("s")?,
        alpha: num("alpha")?,
        desired: parse_desired(get("u_d").unwrap_or("getoor"), base)?,
        u_b: num("u_b")?,
        mu_hat: parse_shift(get("mu_hat").unwrap_or("0"), base)?,
        control_bounds: bounds,
        opt_tol: num("opt_tol")?,
        max_iter: int("max_iter")?,
        method: get("method").unwrap_or("newton").parse()?,
    };
    problem.validate()?;

    let schedule = Schedule { gamma0: num("gamma0")?, factor: num("factor")?, count: int("count")? };
    schedule.validate()?;

    let gamma = match get("gamma") {
        Some(_) => {
            let g = num("gamma")?;
            if !(g > 0.0) {
                return Err(Error::Config(format!("gamma must be positive, got {g}")));
            }
            Some(g)
        }
        None => None,
    };
    let workers = match get("workers") {
        Some(_) => {
            let w = int("workers")?;
            if w == 0 {
                return Err(Error::Config("workers must be at least 1".into()));
            }
            Some(w)
        }
        None => None,
    };

    let cfg = RunConfig {
        command,
        a: num("a")?,
        b: num("b")?,
        n: int("n")?,
        levels: int("levels")?,
        ref_n: int("ref_n")?,
        problem,
        schedule,
        gamma,
        out: get("out").map(PathBuf::from),
        dump_matrices: flag("dump_matrices")?,
        workers,
        check_reference: flag("check_reference")?,
        fault_injection: flag("fault_injection")?,
        precision: int("precision")?,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < self.b) {
            return Err(Error::Config(format!("need a < b, got a = {}, b = {}", self.a, self.b)));
        }
        if !(1..=17).contains(&self.precision) {
            return Err(Error::Config(format!("precision must lie in 1..=17, got {}", self.precision)));
        }
        if self.n < 2 {
            return Err(Error::Config(format!("n must be at least 2, got {}", self.n)));
        }
        if self.command == Command::HSweep {
            if self.gamma.is_none() {
                return Err(Error::Config("h-sweep needs a fixed 'gamma'".into()));
            }
            if self.levels < 3 {
                return Err(Error::Config(format!("h-sweep needs levels >= 3, got {}", self.levels)));
            }
            let finest = self.finest_level();
            if self.ref_n <= finest || self.ref_n % finest != 0 || !(self.ref_n / finest).is_power_of_two() {
                return Err(Error::Config(format!(
                    "ref_n = {} must be a power-of-two multiple of the finest level {finest}",
                    self.ref_n
                )));
            }
        }
        Ok(())
    }

    /// Cells on the finest h-sweep level.
    pub fn finest_level(&self) -> usize {
        self.n << (self.levels.max(1) - 1)
    }
}

fn read_samples(spec: &str, base: Option<&Path>) -> Result<Samples> {
    let path = PathBuf::from(spec);
    let path = match base {
        Some(b) if path.is_relative() => b.join(path),
        _ => path,
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| Error::Config(format!("cannot read data file {}: {e}", path.display())))?;
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()).collect();
        let parsed: Option<(f64, f64)> = match cols.as_slice() {
            [x, v] => x.parse().ok().zip(v.parse().ok()),
            _ => None,
        };
        match parsed {
            Some(p) => pts.push(p),
            None if i == 0 => continue, // header
            None => return Err(Error::Config(format!("{}: line {}: expected 'x value'", path.display(), i + 1))),
        }
    }
    Samples::new(pts)
}

/// `getoor`, a constant, or `@file` with `x value` rows.
fn parse_desired(v: &str, base: Option<&Path>) -> Result<DesiredState> {
    if v == "getoor" {
        return Ok(DesiredState::Getoor);
    }
    if let Some(file) = v.strip_prefix('@') {
        return Ok(DesiredState::Samples(read_samples(file, base)?));
    }
    v.parse()
        .map(DesiredState::Constant)
        .map_err(|_| Error::Config(format!("u_d: expected 'getoor', a number or '@file', got '{v}'")))
}

fn parse_shift(v: &str, base: Option<&Path>) -> Result<MultiplierShift> {
    if let Some(file) = v.strip_prefix('@') {
        return Ok(MultiplierShift::Samples(read_samples(file, base)?));
    }
    let c: f64 = v.parse().map_err(|_| Error::Config(format!("mu_hat: expected a number or '@file', got '{v}'")))?;
    Ok(if c == 0.0 { MultiplierShift::Zero } else { MultiplierShift::Constant(c) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_is_defaulted() {
        let cfg = parse_config("command: solve\ns: 0.4\nn: 256\n", &[]).unwrap();
        assert_eq!(cfg.command, Command::Solve);
        assert_eq!(cfg.n, 256);
        assert_eq!((cfg.a, cfg.b), (-0.5, 0.5));
        assert_eq!(cfg.problem.u_b, 0.1);
        assert_eq!(cfg.problem.alpha, 1e-2);
        assert_eq!(cfg.problem.mu_hat, MultiplierShift::Zero);
        assert_eq!(cfg.problem.desired, DesiredState::Getoor);
        assert_eq!(cfg.schedule, Schedule { gamma0: 0.1, factor: 4.0, count: 13 });
        assert!(cfg.problem.control_bounds.is_none());
    }

    #[test]
    fn rejects_bad_input() {
        let e = parse_config("command = solve\ns = 0.2\n", &[]).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("N/4"));
        assert!(parse_config("command = solve\nfoo = 1\n", &[]).is_err());
        assert!(parse_config("command = solve\nz_lo = 0\n", &[]).is_err());
        assert!(parse_config("command = fly\n", &[]).is_err());
        assert!(parse_config("s = 0.5\n", &[]).is_err());
        assert!(parse_config("command = h-sweep\n", &[]).is_err());
    }

    #[test]
    fn overrides_win() {
        let cfg = parse_config(
            "command = solve # comment\nn = 64\n",
            &[parse_override("n=32").unwrap(), ("z_lo".into(), "0".into()), ("z_hi".into(), "10".into())],
        )
        .unwrap();
        assert_eq!(cfg.n, 32);
        assert_eq!(cfg.problem.control_bounds, Some(ControlBounds { lo: 0.0, hi: 10.0 }));
    }

    #[test]
    fn h_sweep_reference_must_nest() {
        let base = "command = h-sweep\ngamma = 1e4\nn = 32\nlevels = 5\n";
        assert!(parse_config(base, &[]).is_ok());
        assert!(parse_config(base, &[("ref_n".into(), "1000".into())]).is_err());
        assert!(parse_config(base, &[("ref_n".into(), "512".into())]).is_err());
    }
}
