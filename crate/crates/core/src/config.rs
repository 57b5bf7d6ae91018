//! Run configuration from command-line flags and flat `key = value` files.
//!
//! Precedence: command line, then config file, then scenario defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Parser;

use crate::error::{M1Error, Result};
use crate::scenarios::{Scenario, ScenarioKind, SourceKind};
use crate::time_loop::Scheme;

pub const OUTPUT_ENV: &str = "M1_OUTPUT_DIR";
pub const DEFAULT_NODES: usize = 64;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_STEPS: usize = 200_000;

/// Run keys accepted in config files, besides scenario parameters.
pub const RUN_KEYS: [&str; 12] = [
    "scenario", "source", "nodes", "cfl", "t_final", "steady", "tol", "max_steps", "scheme", "output", "every",
    "profile",
];

/// Scenario parameter keys across all scenarios.
pub const PARAM_KEYS: [&str; 12] = [
    "x_min", "x_max", "y_min", "y_max", "steady_cfl", "sigma_a", "sigma_s", "source_strength", "radius", "theta",
    "floor", "flux_ratio",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Profile {
    /// Angular averages over annuli of width h around the domain centre.
    Radial,
    /// Nodal values along the horizontal grid line through the centre.
    Axis,
}

impl FromStr for Profile {
    type Err = M1Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "radial" => Ok(Profile::Radial),
            "axis" => Ok(Profile::Axis),
            other => Err(M1Error::Config(format!("unknown profile '{other}' (expected radial or axis)"))),
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Radial => "radial",
            Profile::Axis => "axis",
        })
    }
}

#[derive(Parser, Debug, Clone, Default)]
#[command(name = "m1mcl", version, about = "Realizability-preserving M1 radiative transfer solver")]
pub struct Cli {
    /// Benchmark to run
    #[arg(long, value_parser = ScenarioKind::NAMES)]
    pub scenario: Option<String>,
    /// Lattice source variant
    #[arg(long, value_parser = ["isotropic", "anisotropic"])]
    pub source: Option<String>,
    /// Nodes per axis
    #[arg(long)]
    pub nodes: Option<usize>,
    #[arg(long)]
    pub cfl: Option<f64>,
    #[arg(long = "t-final", conflicts_with = "steady")]
    pub t_final: Option<f64>,
    /// Pseudo-time iteration to a steady state
    #[arg(long)]
    pub steady: bool,
    /// Steady residual tolerance
    #[arg(long)]
    pub tol: Option<f64>,
    /// Cap on pseudo-time steps
    #[arg(long = "max-steps")]
    pub max_steps: Option<usize>,
    #[arg(long, value_parser = ["low", "mcl"])]
    pub scheme: Option<String>,
    /// Output directory (default: $M1_OUTPUT_DIR or ./output)
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Write a VTK frame every k steps (0: final state only)
    #[arg(long)]
    pub every: Option<usize>,
    /// Line-outs to write, comma separated: radial, axis
    #[arg(long, value_delimiter = ',')]
    pub profile: Vec<String>,
    /// Flat key = value configuration file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scenario parameter override, e.g. --set sigma_a=5
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Suppress progress lines
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub nodes: usize,
    pub cfl: f64,
    pub t_final: f64,
    pub steady: bool,
    pub tol: f64,
    pub max_steps: usize,
    pub scheme: Scheme,
    pub output_dir: PathBuf,
    /// Frame cadence in steps; 0 writes the final state only.
    pub every: usize,
    pub profiles: Vec<Profile>,
    pub quiet: bool,
}

/// Parsed config file: key to raw value, in key order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    pub entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| M1Error::Config(format!("cannot read config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Grammar: one `key = value` per line; `#` starts a comment; blank
    /// lines are ignored; keys may appear once.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| M1Error::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !RUN_KEYS.contains(&key) && !PARAM_KEYS.contains(&key) {
                return Err(M1Error::Config(format!(
                    "line {}: unknown key '{key}' (valid: {}, {})",
                    n + 1,
                    RUN_KEYS.join(", "),
                    PARAM_KEYS.join(", ")
                )));
            }
            if value.is_empty() {
                return Err(M1Error::Config(format!("line {}: empty value for '{key}'", n + 1)));
            }
            if entries.insert(key.to_string(), value.to_string()).is_some() {
                return Err(M1Error::Config(format!("line {}: duplicate key '{key}'", n + 1)));
            }
        }
        Ok(Self { entries })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| M1Error::Config(format!("config key '{key}': {e}"))))
            .transpose()
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(M1Error::Config(format!("config key '{key}': expected true or false, got '{v}'"))),
    }
}

fn parse_override(s: &str) -> Result<(String, f64)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| M1Error::Config(format!("--set expects KEY=VALUE, got '{s}'")))?;
    let v = v
        .trim()
        .parse::<f64>()
        .map_err(|e| M1Error::Config(format!("--set {}: {e}", k.trim())))?;
    Ok((k.trim().to_string(), v))
}

/// Parses `argv` (including the program name) and the optional config file.
pub fn parse_cli_and_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| M1Error::Config(e.to_string()))?;
    RunConfig::resolve(&cli, std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
}

impl RunConfig {
    /// Merges flags, the config file named by `--config` and defaults.
    /// `env_output` is the value of `M1_OUTPUT_DIR`, if set.
    pub fn resolve(cli: &Cli, env_output: Option<PathBuf>) -> Result<Self> {
        let file = match &cli.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        Self::merge(cli, &file, env_output)
    }

    pub fn merge(cli: &Cli, file: &ConfigFile, env_output: Option<PathBuf>) -> Result<Self> {
        let source = match cli.source.as_deref().or(file.get("source")) {
            Some(s) => s.parse::<SourceKind>()?,
            None => SourceKind::default(),
        };
        let name = cli.scenario.as_deref().or(file.get("scenario")).unwrap_or("line_source");
        let mut scenario = Scenario::from_kind(ScenarioKind::parse(name, source)?);

        for (key, value) in &file.entries {
            if PARAM_KEYS.contains(&key.as_str()) {
                let v = value
                    .parse::<f64>()
                    .map_err(|e| M1Error::Config(format!("config key '{key}': {e}")))?;
                scenario.set_param(key, v)?;
            }
        }
        for s in &cli.set {
            let (k, v) = parse_override(s)?;
            if !PARAM_KEYS.contains(&k.as_str()) {
                return Err(M1Error::Config(format!(
                    "--set: unknown parameter '{k}' (valid: {})",
                    PARAM_KEYS.join(", ")
                )));
            }
            scenario.set_param(&k, v)?;
        }

        let steady = if cli.steady {
            true
        } else {
            match file.get("steady") {
                Some(v) => parse_bool("steady", v)?,
                None => false,
            }
        };
        let t_final_given = cli.t_final.or(file.parsed::<f64>("t_final")?);
        if steady && t_final_given.is_some() {
            return Err(M1Error::Config("steady runs take no final time; drop --t-final or steady".into()));
        }
        if steady && !scenario.has_forcing() {
            return Err(M1Error::Config(format!(
                "scenario {} has no source; steady runs need one",
                scenario.name()
            )));
        }

        let nodes = cli.nodes.or(file.parsed("nodes")?).unwrap_or(DEFAULT_NODES);
        if nodes < 3 {
            return Err(M1Error::Config(format!("need at least 3 nodes per axis, got {nodes}")));
        }
        let default_cfl = if steady { scenario.steady_cfl } else { scenario.cfl };
        let cfl = cli.cfl.or(file.parsed("cfl")?).unwrap_or(default_cfl);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(M1Error::Config(format!("CFL number must lie in (0, 1], got {cfl}")));
        }
        let t_final = t_final_given.unwrap_or(scenario.t_final);
        if !(t_final > 0.0) {
            return Err(M1Error::Config(format!("final time must be positive, got {t_final}")));
        }
        let tol = cli.tol.or(file.parsed("tol")?).unwrap_or(DEFAULT_TOL);
        if !(tol > 0.0) {
            return Err(M1Error::Config(format!("tolerance must be positive, got {tol}")));
        }
        let max_steps = cli.max_steps.or(file.parsed("max_steps")?).unwrap_or(DEFAULT_MAX_STEPS);
        let scheme = match cli.scheme.as_deref().or(file.get("scheme")) {
            Some(s) => s.parse()?,
            None => Scheme::Mcl,
        };
        let output_dir = cli
            .output
            .clone()
            .or_else(|| file.get("output").map(PathBuf::from))
            .or(env_output)
            .unwrap_or_else(|| PathBuf::from("output"));
        let every = cli.every.or(file.parsed("every")?).unwrap_or(0);
        let mut profiles = if !cli.profile.is_empty() {
            cli.profile.iter().map(|p| p.parse()).collect::<Result<Vec<Profile>>>()?
        } else if let Some(v) = file.get("profile") {
            v.split(',').filter(|p| !p.trim().is_empty()).map(str::parse).collect::<Result<Vec<Profile>>>()?
        } else {
            Vec::new()
        };
        profiles.sort();
        profiles.dedup();

        Ok(Self {
            scenario,
            nodes,
            cfl,
            t_final,
            steady,
            tol,
            max_steps,
            scheme,
            output_dir,
            every,
            profiles,
            quiet: cli.quiet,
        })
    }
}
