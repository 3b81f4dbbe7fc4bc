//! Instance files, versioned reports and the append-only experiment log.
//!
//! Masses are written as `"num/den"` strings so that files round-trip
//! exactly. Tolerances resolve in the order command-line flag, instance
//! file, environment variable, built-in default.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::currents::{AtomDoc, Boundary, CurrentDoc};
use crate::error::{Error, Result};
use crate::solver::SolverConfig;

pub const SCHEMA_VERSION: &str = "1";

/// Prefix of the environment variables read by [`SolverOverrides::from_env`].
pub const ENV_PREFIX: &str = "BRANCHFLOW_";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distinct_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_terminals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_grad: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_collapse: Option<f64>,
}

impl SolverOverrides {
    /// Reads `BRANCHFLOW_VALUE_TOL`, `BRANCHFLOW_DISTINCT_TOL`,
    /// `BRANCHFLOW_MAX_TERMINALS`, `BRANCHFLOW_TOL_GRAD` and
    /// `BRANCHFLOW_TOL_COLLAPSE` through `lookup`.
    pub fn from_env(lookup: impl Fn(&str) -> Option<String>) -> Result<SolverOverrides> {
        fn get<T: std::str::FromStr>(lookup: &impl Fn(&str) -> Option<String>, key: &str) -> Result<Option<T>> {
            let name = format!("{ENV_PREFIX}{key}");
            lookup(&name)
                .map(|v| v.trim().parse().map_err(|_| Error::Config(format!("cannot parse {name}={v:?}"))))
                .transpose()
        }
        Ok(SolverOverrides {
            value_tol: get(&lookup, "VALUE_TOL")?,
            distinct_tol: get(&lookup, "DISTINCT_TOL")?,
            max_terminals: get(&lookup, "MAX_TERMINALS")?,
            tol_grad: get(&lookup, "TOL_GRAD")?,
            tol_collapse: get(&lookup, "TOL_COLLAPSE")?,
        })
    }

    /// `self` with unset fields taken from `lower`.
    pub fn or(&self, lower: &SolverOverrides) -> SolverOverrides {
        SolverOverrides {
            value_tol: self.value_tol.or(lower.value_tol),
            distinct_tol: self.distinct_tol.or(lower.distinct_tol),
            max_terminals: self.max_terminals.or(lower.max_terminals),
            tol_grad: self.tol_grad.or(lower.tol_grad),
            tol_collapse: self.tol_collapse.or(lower.tol_collapse),
        }
    }

    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.value_tol {
            cfg.value_tol = v;
        }
        if let Some(v) = self.distinct_tol {
            cfg.distinct_tol = v;
        }
        if let Some(v) = self.max_terminals {
            cfg.max_terminals = v;
        }
        if let Some(v) = self.tol_grad {
            cfg.optimize.tol_grad = v;
        }
        if let Some(v) = self.tol_collapse {
            cfg.optimize.tol_collapse = v;
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub dim: usize,
    pub alpha: f64,
    pub atoms: Vec<AtomDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl InstanceFile {
    pub fn new(b: &Boundary, alpha: f64) -> InstanceFile {
        let doc = CurrentDoc::from_boundary(b);
        InstanceFile { dim: doc.dim, alpha, atoms: doc.atoms, solver: None, perturbation: None, seed: None }
    }

    /// Parses and validates: the atoms must form a boundary and `alpha` must
    /// lie in `(0, 1]`.
    pub fn parse(text: &str) -> Result<InstanceFile> {
        let f: InstanceFile = serde_json::from_str(text)?;
        f.boundary()?;
        if !(f.alpha > 0.0 && f.alpha <= 1.0) {
            return Err(Error::BadAlpha(f.alpha));
        }
        Ok(f)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<InstanceFile> {
        InstanceFile::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn boundary(&self) -> Result<Boundary> {
        CurrentDoc { dim: self.dim, atoms: self.atoms.clone(), segments: Vec::new() }.to_boundary()
    }

    /// Solver configuration after layering `flags` over the file over `env`.
    pub fn solver_config(&self, flags: &SolverOverrides, env: &SolverOverrides) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.alpha);
        let file = self.solver.clone().unwrap_or_default();
        flags.or(&file).or(env).apply(&mut cfg);
        cfg
    }
}

/// Reads the `dim` and `atoms` of any JSON document carrying them: an
/// instance file, a current document or a report body.
pub fn load_boundary(path: impl AsRef<Path>) -> Result<Boundary> {
    #[derive(Deserialize)]
    struct Loose {
        dim: usize,
        atoms: Vec<AtomDoc>,
    }
    let l: Loose = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    CurrentDoc { dim: l.dim, atoms: l.atoms, segments: Vec::new() }.to_boundary()
}

/// Short content hash of a serializable value.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    let digest = Sha256::digest(&bytes);
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report<T> {
    pub schema: String,
    pub command: String,
    pub instance_hash: String,
    pub config_hash: String,
    pub body: T,
}

impl<T: Serialize> Report<T> {
    pub fn new<I: Serialize + ?Sized, C: Serialize + ?Sized>(command: &str, instance: &I, config: &C, body: T) -> Self {
        Report {
            schema: SCHEMA_VERSION.to_string(),
            command: command.to_string(),
            instance_hash: content_hash(instance),
            config_hash: content_hash(config),
            body,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogRecord {
    pub command: String,
    pub instance_hash: String,
    pub config_hash: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub result: serde_json::Value,
}

/// Append-only JSON-lines log.
pub struct ExperimentLog {
    file: File,
}

impl ExperimentLog {
    pub fn open(path: impl AsRef<Path>) -> Result<ExperimentLog> {
        Ok(ExperimentLog { file: OpenOptions::new().create(true).append(true).open(path)? })
    }

    pub fn append<T: Serialize>(&mut self, report: &Report<T>) -> Result<()> {
        let record = LogRecord {
            command: report.command.clone(),
            instance_hash: report.instance_hash.clone(),
            config_hash: report.config_hash.clone(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            result: serde_json::to_value(&report.body)?,
        };
        writeln!(self.file, "{}", serde_json::to_string(&record)?)?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Vec<LogRecord>> {
        std::fs::read_to_string(path)?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    const SQUARE: &str = r#"{
        "dim": 2,
        "alpha": 0.95,
        "atoms": [
            {"p": [0, 0], "m": "-1"},
            {"p": [1, 1], "m": "-1"},
            {"p": [1, 0], "m": "1"},
            {"p": [0, 1], "m": "1"}
        ],
        "solver": {"value_tol": 1e-6}
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let f = InstanceFile::parse(SQUARE).unwrap();
        assert_eq!(f.boundary().unwrap().len(), 4);
        let again = InstanceFile::parse(&f.to_json()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(InstanceFile::parse("{"), Err(Error::Json(_))));
        let zero = SQUARE.replacen(r#""m": "1"}"#, r#""m": "0"}"#, 1);
        assert!(matches!(InstanceFile::parse(&zero), Err(Error::ZeroAtom)));
        let alpha = SQUARE.replace("0.95", "1.5");
        assert!(matches!(InstanceFile::parse(&alpha), Err(Error::BadAlpha(_))));
        let extra = SQUARE.replace(r#""dim": 2,"#, r#""dim": 2, "color": "red","#);
        assert!(InstanceFile::parse(&extra).is_err());
    }

    #[test]
    fn precedence() {
        let f = InstanceFile::parse(SQUARE).unwrap();
        let env = SolverOverrides::from_env(|k| match k {
            "BRANCHFLOW_VALUE_TOL" => Some("1e-3".into()),
            "BRANCHFLOW_DISTINCT_TOL" => Some("1e-4".into()),
            _ => None,
        })
        .unwrap();
        let cfg = f.solver_config(&SolverOverrides::default(), &env);
        assert_eq!(cfg.value_tol, 1e-6);
        assert_eq!(cfg.distinct_tol, 1e-4);
        let flags = SolverOverrides { value_tol: Some(1e-9), ..Default::default() };
        assert_eq!(f.solver_config(&flags, &env).value_tol, 1e-9);
        assert!(SolverOverrides::from_env(|_| Some("x".into())).is_err());
    }

    #[test]
    fn hashes_are_stable() {
        let b = Boundary::planar(&[(0.0, 0.0, int(-1)), (1.0, 0.0, int(1))]).unwrap();
        let f = InstanceFile::new(&b, 0.5);
        assert_eq!(content_hash(&f), content_hash(&f.clone()));
        assert_eq!(content_hash(&f).len(), 16);
        assert_ne!(content_hash(&f), content_hash(&InstanceFile::new(&b, 0.6)));
    }
}
