//! Configuration resolution. Settings come from three layers: per-scenario
//! defaults, an optional flat key-value JSON file, and command-line flags,
//! each overriding the one before.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use qmarch::lattice::BoundaryKind;
use qmarch::lcu::{RunMode, ShotConfig};
use qmarch::scenarios::{heat_wall_1d, taylor_green, ExperimentOptions, Scenario};

pub const EXIT_NUMERICAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

/// Failures split along the exit-code contract: bad input exits 2, a run
/// that went wrong exits 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Run(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Run(msg) => write!(f, "run failed: {msg}"),
        }
    }
}

impl From<qmarch::Error> for CliError {
    fn from(e: qmarch::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Values taken from command-line flags; `None` falls through to the
/// config file and then the scenario default.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub scenario: Option<String>,
    pub nx: Option<usize>,
    pub nt: Option<usize>,
    pub ra: Option<f64>,
    pub rh: Option<f64>,
    pub dims: Option<usize>,
    pub bc: Option<String>,
    pub mode: Option<String>,
    pub snapshots: Option<String>,
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub shots: Option<String>,
}

/// A fully resolved run: the scenario to march and everything the artifact
/// writers need.
#[derive(Clone, Debug)]
pub struct RunPlan {
    pub scenario: Scenario,
    pub opts: ExperimentOptions,
    pub out: PathBuf,
    pub seed: u64,
    pub shots: Option<u64>,
}

const KNOWN_KEYS: [&str; 13] = [
    "scenario", "nx", "nt", "ra", "rh", "dims", "bc", "mode", "snapshots", "out", "tol",
    "seed", "shots",
];

struct FileConfig(BTreeMap<String, serde_json::Value>);

impl FileConfig {
    fn empty() -> Self {
        FileConfig(BTreeMap::new())
    }

    fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        let serde_json::Value::Object(map) = value else {
            return Err(usage(format!(
                "config {} must be a flat JSON object",
                path.display()
            )));
        };
        let mut out = BTreeMap::new();
        for (key, value) in map {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(format!(
                    "unknown config key {key:?}; known keys: {}",
                    KNOWN_KEYS.join(", ")
                )));
            }
            if value.is_object() || value.is_array() || value.is_null() {
                return Err(usage(format!("config key {key:?} must be a scalar")));
            }
            out.insert(key, value);
        }
        Ok(FileConfig(out))
    }

    fn string(&self, key: &str) -> Result<Option<String>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
            Some(serde_json::Value::Number(n)) => Ok(Some(n.to_string())),
            Some(v) => Err(usage(format!("config key {key:?} has unusable value {v}"))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(serde_json::Value::Number(n)) => Ok(n.as_f64()),
            Some(serde_json::Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key {key:?} is not a number: {s:?}"))),
            Some(v) => Err(usage(format!("config key {key:?} is not a number: {v}"))),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.0.get(key) {
            None => Ok(None),
            Some(serde_json::Value::Number(n)) => n
                .as_u64()
                .map(Some)
                .ok_or_else(|| usage(format!("config key {key:?} is not a whole number: {n}"))),
            Some(serde_json::Value::String(s)) => s
                .parse()
                .map(Some)
                .map_err(|_| usage(format!("config key {key:?} is not a whole number: {s:?}"))),
            Some(v) => Err(usage(format!("config key {key:?} is not a whole number: {v}"))),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        Ok(self.u64(key)?.map(|n| n as usize))
    }
}

pub fn resolve(config: Option<&Path>, flags: &Overrides) -> Result<RunPlan, CliError> {
    let file = match config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::empty(),
    };

    let scenario_name = flags
        .scenario
        .clone()
        .or(file.string("scenario")?)
        .ok_or_else(|| {
            usage("no scenario given; pass --scenario or a config file with a \"scenario\" key")
        })?;
    let nx = flags.nx.or(file.usize("nx")?);
    let nt = flags.nt.or(file.usize("nt")?);
    let ra = flags.ra.or(file.f64("ra")?);
    let rh = flags.rh.or(file.f64("rh")?);
    let dims = flags.dims.or(file.usize("dims")?);
    let bc = flags.bc.clone().or(file.string("bc")?);
    let mode = parse_mode(flags.mode.clone().or(file.string("mode")?).as_deref().unwrap_or("both"))?;
    let snapshots = flags.snapshots.clone().or(file.string("snapshots")?);
    let out = flags
        .out
        .clone()
        .or(file.string("out")?.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("artifacts"));
    let tol = flags.tol.or(file.f64("tol")?).unwrap_or(1e-10);
    if !tol.is_finite() || tol <= 0.0 {
        return Err(usage(format!("tolerance must be positive, got {tol}")));
    }
    let seed = flags.seed.or(file.u64("seed")?).unwrap_or(7);
    let shots =
        parse_shots(flags.shots.clone().or(file.string("shots")?).as_deref().unwrap_or("off"))?;

    let scenario = build_scenario(&scenario_name, nx, ra, rh, dims, bc.as_deref())?;
    let steps = nt.unwrap_or(scenario.default_steps);

    let mut opts = ExperimentOptions::new(steps);
    opts.mode = mode;
    opts.tol = tol;
    if let Some(list) = snapshots {
        opts.snapshot_fracs = parse_fracs(&list)?;
    }
    opts.shots = shots.map(|count| ShotConfig { count, seed });

    Ok(RunPlan { scenario, opts, out, seed, shots })
}

fn build_scenario(
    name: &str,
    nx: Option<usize>,
    ra: Option<f64>,
    rh: Option<f64>,
    dims: Option<usize>,
    bc: Option<&str>,
) -> Result<Scenario, CliError> {
    match name {
        "taylor-green" => {
            if let Some(d) = dims {
                if d != 2 {
                    return Err(usage(format!("taylor-green is 2-dimensional, got --dims {d}")));
                }
            }
            if let Some(list) = bc {
                for kind in parse_bc(list, 2)? {
                    if kind != BoundaryKind::Periodic {
                        return Err(usage("taylor-green runs on a fully periodic box"));
                    }
                }
            }
            taylor_green(nx.unwrap_or(32), ra.unwrap_or(0.1), rh.unwrap_or(0.1))
                .map_err(|e| usage(e.to_string()))
        }
        "heat-1d" => {
            if let Some(d) = dims {
                if d != 1 {
                    return Err(usage(format!("heat-1d is 1-dimensional, got --dims {d}")));
                }
            }
            if ra.is_some() {
                return Err(usage("heat-1d has no velocity; --ra does not apply"));
            }
            let kinds = parse_bc(bc.unwrap_or("neumann"), 1)?;
            heat_wall_1d(nx.unwrap_or(64), kinds[0], rh.unwrap_or(0.2))
                .map_err(|e| usage(e.to_string()))
        }
        other => Err(usage(format!(
            "unknown scenario {other:?}; expected taylor-green or heat-1d"
        ))),
    }
}

fn parse_mode(s: &str) -> Result<RunMode, CliError> {
    match s {
        "quantum" => Ok(RunMode::Quantum),
        "classical" => Ok(RunMode::Classical),
        "both" => Ok(RunMode::Both),
        other => Err(usage(format!(
            "mode must be quantum, classical, or both, got {other:?}"
        ))),
    }
}

fn parse_bc(list: &str, dims: usize) -> Result<Vec<BoundaryKind>, CliError> {
    let kinds: Vec<BoundaryKind> = list
        .split(',')
        .map(|token| match token.trim() {
            "periodic" => Ok(BoundaryKind::Periodic),
            "neumann" => Ok(BoundaryKind::NeumannReflect),
            "dirichlet" => Ok(BoundaryKind::DirichletReflect),
            other => Err(usage(format!(
                "boundary must be periodic, neumann, or dirichlet, got {other:?}"
            ))),
        })
        .collect::<Result<_, _>>()?;
    match kinds.len() {
        1 => Ok(vec![kinds[0]; dims]),
        n if n == dims => Ok(kinds),
        n => Err(usage(format!("{n} boundary kinds for {dims} dimensions"))),
    }
}

fn parse_fracs(list: &str) -> Result<Vec<f64>, CliError> {
    let fracs: Vec<f64> = list
        .split(',')
        .map(|token| {
            let token = token.trim();
            token
                .parse::<f64>()
                .map_err(|_| usage(format!("snapshot fraction {token:?} is not a number")))
        })
        .collect::<Result<_, _>>()?;
    for f in &fracs {
        if !f.is_finite() || *f < 0.0 || *f > 1.0 {
            return Err(usage(format!("snapshot fraction {f} outside [0, 1]")));
        }
    }
    if fracs.is_empty() {
        return Err(usage("snapshot list is empty"));
    }
    Ok(fracs)
}

fn parse_shots(s: &str) -> Result<Option<u64>, CliError> {
    if s == "off" {
        return Ok(None);
    }
    match s.parse::<u64>() {
        Ok(0) => Err(usage("shot count must be positive (or \"off\")")),
        Ok(n) => Ok(Some(n)),
        Err(_) => Err(usage(format!("shots must be \"off\" or a count, got {s:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(contents: &str) -> PathBuf {
        let path = std::env::temp_dir().join(format!(
            "qmarch-config-{}-{:?}.json",
            std::process::id(),
            std::thread::current().id()
        ));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        path
    }

    #[test]
    fn flags_override_file() {
        let path = write_config(
            r#"{"scenario": "taylor-green", "nx": 8, "nt": 5, "seed": 3, "out": "from-file"}"#,
        );
        let flags = Overrides { nx: Some(16), ..Overrides::default() };
        let plan = resolve(Some(&path), &flags).unwrap();
        assert_eq!(plan.scenario.grid.size(0), 16);
        assert_eq!(plan.opts.steps, 5);
        assert_eq!(plan.seed, 3);
        assert_eq!(plan.out, PathBuf::from("from-file"));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn missing_scenario_is_usage() {
        let err = resolve(None, &Overrides::default()).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_USAGE);
    }

    #[test]
    fn unknown_key_rejected() {
        let path = write_config(r#"{"scenario": "taylor-green", "gamma": 1}"#);
        let err = resolve(Some(&path), &Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("gamma"), "{err}");
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn scenario_validation() {
        let base = Overrides {
            scenario: Some("taylor-green".into()),
            ..Overrides::default()
        };
        assert!(resolve(None, &base).is_ok());

        let bad_dims = Overrides { dims: Some(3), ..base.clone() };
        assert_eq!(resolve(None, &bad_dims).unwrap_err().exit_code(), EXIT_USAGE);

        let walled = Overrides { bc: Some("neumann".into()), ..base.clone() };
        assert!(resolve(None, &walled).is_err());

        let heat = Overrides {
            scenario: Some("heat-1d".into()),
            bc: Some("dirichlet".into()),
            nx: Some(16),
            ..Overrides::default()
        };
        let plan = resolve(None, &heat).unwrap();
        assert_eq!(plan.scenario.grid.boundary(0), BoundaryKind::DirichletReflect);

        let heat_ra = Overrides { ra: Some(0.1), ..heat };
        assert_eq!(resolve(None, &heat_ra).unwrap_err().exit_code(), EXIT_USAGE);
    }

    #[test]
    fn shots_and_fracs_parsing() {
        assert_eq!(parse_shots("off").unwrap(), None);
        assert_eq!(parse_shots("4096").unwrap(), Some(4096));
        assert!(parse_shots("0").is_err());
        assert!(parse_shots("many").is_err());
        assert_eq!(parse_fracs("0, 0.5 ,1").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_fracs("1.5").is_err());
        assert!(parse_fracs("x").is_err());
    }
}
