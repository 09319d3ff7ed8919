//! Run configuration: flat `key = value` files with repeated keys forming
//! grids, overridden by command-line flags. Unknown keys are errors, not
//! warnings, and every run is fully determined by its config (no wall-clock
//! seeding).

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Kernel,
    FreeEnergy,
    PhaseScan,
    CriticalCurve,
    SamplePaths,
    Observables,
    Verify,
}

impl Command {
    pub fn parse(name: &str) -> Option<Command> {
        match name {
            "kernel" => Some(Command::Kernel),
            "free-energy" => Some(Command::FreeEnergy),
            "phase-scan" => Some(Command::PhaseScan),
            "critical-curve" => Some(Command::CriticalCurve),
            "sample-paths" => Some(Command::SamplePaths),
            "observables" => Some(Command::Observables),
            "verify" => Some(Command::Verify),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel => "kernel",
            Command::FreeEnergy => "free-energy",
            Command::PhaseScan => "phase-scan",
            Command::CriticalCurve => "critical-curve",
            Command::SamplePaths => "sample-paths",
            Command::Observables => "observables",
            Command::Verify => "verify",
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Every accepted key, with its expected shape.
const KEYS: &[&str] = &[
    "lambda", "h", "p", "d", "n", "replicas", "samples", "base-seed", "workers", "out", "tol",
    "kappa", "n-max", "n-list", "mode",
];

/// Raw key/value multimap prior to typing. Values keep insertion order.
#[derive(Debug, Default, Clone)]
struct RawConfig {
    values: BTreeMap<String, Vec<String>>,
}

impl RawConfig {
    fn push(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError(format!("unknown key `{key}`")));
        }
        self.values
            .entry(key.to_string())
            .or_default()
            .push(value.to_string());
        Ok(())
    }

    /// Flags override file values wholesale per key.
    fn override_with(&mut self, other: RawConfig) {
        for (k, v) in other.values {
            self.values.insert(k, v);
        }
    }
}

fn parse_file(text: &str) -> Result<RawConfig, ConfigError> {
    let mut raw = RawConfig::default();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", lineno + 1)))?;
        raw.push(key.trim(), value.trim())?;
    }
    Ok(raw)
}

fn parse_flags(args: &[String]) -> Result<(Option<PathBuf>, RawConfig), ConfigError> {
    let mut raw = RawConfig::default();
    let mut config_path = None;
    let mut i = 0;
    while i < args.len() {
        let arg = &args[i];
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| ConfigError(format!("expected a `--key` flag, got `{arg}`")))?;
        let value = args
            .get(i + 1)
            .ok_or_else(|| ConfigError(format!("flag `--{key}` is missing its value")))?;
        if key == "config" {
            config_path = Some(PathBuf::from(value));
        } else {
            raw.push(key, value)?;
        }
        i += 2;
    }
    Ok((config_path, raw))
}

/// Fully typed run configuration.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub lambda: Vec<f64>,
    pub h: Vec<f64>,
    pub p: f64,
    pub d: u32,
    pub n: usize,
    pub replicas: usize,
    pub samples: usize,
    pub base_seed: u64,
    pub workers: usize,
    pub out: PathBuf,
    pub tol: f64,
    pub kappa: f64,
    pub n_max: usize,
    pub n_list: Vec<usize>,
    pub mode: String,
}

fn take_f64_list(raw: &RawConfig, key: &str) -> Result<Vec<f64>, ConfigError> {
    raw.values
        .get(key)
        .map(|vals| {
            vals.iter()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| ConfigError(format!("key `{key}`: `{v}` is not a number")))
                })
                .collect()
        })
        .unwrap_or_else(|| Ok(Vec::new()))
}

fn take_scalar<T: std::str::FromStr>(
    raw: &RawConfig,
    key: &str,
    default: T,
) -> Result<T, ConfigError> {
    match raw.values.get(key) {
        None => Ok(default),
        Some(vals) => {
            if vals.len() != 1 {
                return Err(ConfigError(format!(
                    "key `{key}` given {} times but takes a single value",
                    vals.len()
                )));
            }
            vals[0]
                .parse::<T>()
                .map_err(|_| ConfigError(format!("key `{key}`: `{}` is invalid", vals[0])))
        }
    }
}

impl RunConfig {
    /// Parse `<command> [--config FILE] [--key value ...]`; flag values
    /// override file values.
    pub fn parse(args: &[String]) -> Result<RunConfig, ConfigError> {
        let command_name = args
            .first()
            .ok_or_else(|| ConfigError("missing command".into()))?;
        let command = Command::parse(command_name).ok_or_else(|| {
            ConfigError(format!(
                "unknown command `{command_name}` (expected kernel | free-energy | phase-scan | critical-curve | sample-paths | observables | verify)"
            ))
        })?;
        let (config_path, flag_raw) = parse_flags(&args[1..])?;
        let mut raw = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    ConfigError(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_file(&text)?
            }
            None => RawConfig::default(),
        };
        raw.override_with(flag_raw);
        RunConfig::from_raw(command, raw)
    }

    fn from_raw(command: Command, raw: RawConfig) -> Result<RunConfig, ConfigError> {
        let lambda = take_f64_list(&raw, "lambda")?;
        let h = take_f64_list(&raw, "h")?;
        let n_list = raw
            .values
            .get("n-list")
            .map(|vals| {
                let mut out = Vec::new();
                for v in vals {
                    for part in v.split(',') {
                        let part = part.trim();
                        if part.is_empty() {
                            continue;
                        }
                        out.push(part.parse::<usize>().map_err(|_| {
                            ConfigError(format!("key `n-list`: `{part}` is not an integer"))
                        })?);
                    }
                }
                Ok::<_, ConfigError>(out)
            })
            .transpose()?
            .unwrap_or_default();

        let config = RunConfig {
            command,
            lambda,
            h,
            p: take_scalar(&raw, "p", 1.0)?,
            d: take_scalar(&raw, "d", 1)?,
            n: take_scalar(&raw, "n", 1000)?,
            replicas: take_scalar(&raw, "replicas", 100)?,
            samples: take_scalar(&raw, "samples", 10_000)?,
            base_seed: take_scalar(&raw, "base-seed", u64::MAX)?,
            workers: take_scalar(&raw, "workers", 0)?,
            out: PathBuf::from(take_scalar(&raw, "out", String::new())?),
            tol: take_scalar(&raw, "tol", 0.1)?,
            kappa: take_scalar(&raw, "kappa", dropoly::phase::DEFAULT_KAPPA)?,
            n_max: take_scalar(&raw, "n-max", 0)?,
            n_list,
            mode: take_scalar(&raw, "mode", "quenched".to_string())?,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.base_seed == u64::MAX {
            return Err(ConfigError(
                "base-seed is mandatory (runs never seed from the clock)".into(),
            ));
        }
        if self.out.as_os_str().is_empty() {
            return Err(ConfigError("out (output directory) is required".into()));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(ConfigError(format!("p must be in [0,1], got {}", self.p)));
        }
        if self.d < 1 {
            return Err(ConfigError("d must be >= 1".into()));
        }
        if self.mode != "quenched" && self.mode != "annealed" {
            return Err(ConfigError(format!(
                "mode must be `quenched` or `annealed`, got `{}`",
                self.mode
            )));
        }
        let needs_params = !matches!(self.command, Command::Kernel | Command::Verify);
        if needs_params {
            if self.lambda.is_empty() {
                return Err(ConfigError("lambda is required for this command".into()));
            }
            if self.h.is_empty() && !matches!(self.command, Command::CriticalCurve) {
                return Err(ConfigError("h is required for this command".into()));
            }
            for &l in &self.lambda {
                if l < 0.0 {
                    return Err(ConfigError(format!("lambda must be >= 0, got {l}")));
                }
            }
        }
        let single_point = matches!(
            self.command,
            Command::FreeEnergy | Command::SamplePaths | Command::Observables
        );
        if single_point && (self.lambda.len() != 1 || self.h.len() != 1) {
            return Err(ConfigError(format!(
                "{} takes single lambda and h values, not grids",
                self.command.name()
            )));
        }
        if self.command == Command::Kernel && self.n_max == 0 {
            return Err(ConfigError("kernel requires n-max".into()));
        }
        Ok(())
    }

    /// Worker threads: explicit key, else environment override, else all
    /// available cores.
    pub fn effective_workers(&self) -> usize {
        if self.workers > 0 {
            return self.workers;
        }
        if let Ok(env) = std::env::var("DROPOLY_WORKERS") {
            if let Ok(w) = env.parse::<usize>() {
                if w > 0 {
                    return w;
                }
            }
        }
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> Vec<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn file_only_config() {
        let dir = std::env::temp_dir().join("dropoly-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("a.conf");
        std::fs::write(
            &path,
            "# grid\nlambda = 0.5\nlambda = 1.0\nh = 0.1\nbase-seed = 7\nout = /tmp/x\nn = 100\n",
        )
        .unwrap();
        let cfg = RunConfig::parse(&args(&[
            "phase-scan",
            "--config",
            path.to_str().unwrap(),
        ]))
        .unwrap();
        assert_eq!(cfg.lambda, vec![0.5, 1.0]);
        assert_eq!(cfg.h, vec![0.1]);
        assert_eq!(cfg.base_seed, 7);
        assert_eq!(cfg.n, 100);
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join("dropoly-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("b.conf");
        std::fs::write(&path, "h = 0.1\nlambda = 1.0\nbase-seed = 7\nout = /tmp/x\n").unwrap();
        let cfg = RunConfig::parse(&args(&[
            "free-energy",
            "--config",
            path.to_str().unwrap(),
            "--h",
            "0.5",
        ]))
        .unwrap();
        assert_eq!(cfg.h, vec![0.5]);
        assert_eq!(cfg.lambda, vec![1.0]);
    }

    #[test]
    fn unknown_key_is_an_error_naming_it() {
        let dir = std::env::temp_dir().join("dropoly-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("c.conf");
        std::fs::write(&path, "lamda = 1.0\n").unwrap();
        let err = RunConfig::parse(&args(&["free-energy", "--config", path.to_str().unwrap()]))
            .unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn base_seed_is_mandatory() {
        let err = RunConfig::parse(&args(&[
            "free-energy",
            "--lambda",
            "1",
            "--h",
            "0",
            "--out",
            "/tmp/x",
        ]))
        .unwrap_err();
        assert!(err.to_string().contains("base-seed"), "{err}");
    }

    #[test]
    fn grids_by_repeated_flags() {
        let cfg = RunConfig::parse(&args(&[
            "phase-scan",
            "--lambda",
            "0.5",
            "--lambda",
            "1.5",
            "--h",
            "0.0",
            "--h",
            "0.9",
            "--base-seed",
            "1",
            "--out",
            "/tmp/x",
        ]))
        .unwrap();
        assert_eq!(cfg.lambda.len(), 2);
        assert_eq!(cfg.h.len(), 2);
    }

    #[test]
    fn single_point_commands_reject_grids() {
        let err = RunConfig::parse(&args(&[
            "free-energy",
            "--lambda",
            "0.5",
            "--lambda",
            "1.5",
            "--h",
            "0.0",
            "--base-seed",
            "1",
            "--out",
            "/tmp/x",
        ]))
        .unwrap_err();
        assert!(err.to_string().contains("single lambda"));
    }
}
