//! Run configuration: a plain-text `key = value` file merged with
//! command-line overrides, later entries winning.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qg_core::surface::Profile;

use crate::error::{CliError, Result};

pub const KEYS: &[&str] = &[
    "kind", "r", "R", "a", "b", "c", "eps", "delta", "profile", "input", "grid-nu", "grid-nv", "u-min", "u-max", "v-min",
    "v-max", "tolerance", "seed", "out", "lambda-re", "lambda-im", "suite", "steps", "step-size", "levels", "transforms",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceKind {
    Torus { r: f64, big_r: f64 },
    Ellipsoid { a: f64, b: f64, c: f64 },
    Sphere { r: f64 },
    QuadricGraph,
    PerturbedGraph { eps: f64, delta: f64 },
    Revolution(Profile),
}

impl SurfaceKind {
    pub fn name(&self) -> &'static str {
        match self {
            SurfaceKind::Torus { .. } => "torus",
            SurfaceKind::Ellipsoid { .. } => "ellipsoid",
            SurfaceKind::Sphere { .. } => "sphere",
            SurfaceKind::QuadricGraph => "quadric_graph",
            SurfaceKind::PerturbedGraph { .. } => "perturbed_graph",
            SurfaceKind::Revolution(_) => "revolution",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub nu: usize,
    pub nv: usize,
    pub u: Option<(f64, f64)>,
    pub v: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: String,
    /// `None` lets the command or suite pick its default surface.
    pub kind: Option<SurfaceKind>,
    pub input: Option<PathBuf>,
    pub grid: GridSpec,
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub lambda: Option<(f64, f64)>,
    pub suite: Option<String>,
    pub steps: usize,
    pub step_size: f64,
    /// Number of grid refinements used for convergence orders.
    pub levels: usize,
    /// Number of random group elements in the invariance suite.
    pub transforms: usize,
}

/// Reads `key = value` lines; `#` starts a comment.
pub fn read_pairs(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    parse_pairs(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

pub fn parse_pairs(text: &str) -> std::result::Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
        out.push((normalize_key(k.trim()), v.trim().to_string()));
    }
    Ok(out)
}

pub fn normalize_key(k: &str) -> String {
    k.trim_start_matches("--").replace('_', "-")
}

/// Splits `key=value` as given to `--set`.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    Ok((normalize_key(k.trim()), v.trim().to_string()))
}

struct Values(BTreeMap<String, String>);

impl Values {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| CliError::Usage(format!("cannot parse {key} = {v:?}"))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let x = self.or(key, default)?;
        if !(x > 0.0) || !x.is_finite() {
            return Err(CliError::Usage(format!("{key} must be positive, got {x}")));
        }
        Ok(x)
    }
}

impl RunConfig {
    pub fn from_pairs(command: &str, pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (k, v) in pairs {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Usage(format!("unknown configuration key {k:?}")));
            }
            map.insert(k, v);
        }
        let vals = Values(map);
        let kind = match vals.get::<String>("kind")? {
            None => None,
            Some(k) => Some(parse_kind(&k, &vals)?),
        };
        let nu: usize = vals.or("grid-nu", 65)?;
        let nv: usize = vals.or("grid-nv", nu)?;
        if nu < 5 || nv < 5 {
            return Err(CliError::Usage(format!("grid {nu}x{nv} too small, need at least 5 nodes per side")));
        }
        let range = |lo: &str, hi: &str| -> Result<Option<(f64, f64)>> {
            match (vals.get::<f64>(lo)?, vals.get::<f64>(hi)?) {
                (None, None) => Ok(None),
                (Some(a), Some(b)) if a < b => Ok(Some((a, b))),
                (Some(_), Some(_)) => Err(CliError::Usage(format!("{lo} must be below {hi}"))),
                _ => Err(CliError::Usage(format!("{lo} and {hi} must be given together"))),
            }
        };
        let tolerance = match vals.get::<f64>("tolerance")? {
            Some(t) if !(t > 0.0) => return Err(CliError::Usage(format!("tolerance must be positive, got {t}"))),
            t => t,
        };
        let lambda = match (vals.get::<f64>("lambda-re")?, vals.get::<f64>("lambda-im")?) {
            (None, None) => None,
            (re, im) => Some((re.unwrap_or(0.0), im.unwrap_or(0.0))),
        };
        let levels: usize = vals.or("levels", 3)?;
        if levels == 0 {
            return Err(CliError::Usage("levels must be at least 1".into()));
        }
        Ok(Self {
            command: command.to_string(),
            kind,
            input: vals.get("input")?,
            grid: GridSpec { nu, nv, u: range("u-min", "u-max")?, v: range("v-min", "v-max")? },
            tolerance,
            seed: vals.or("seed", 0)?,
            out: vals.get("out")?,
            lambda,
            suite: vals.get("suite")?,
            steps: vals.or("steps", 50)?,
            step_size: vals.positive("step-size", 1e-5)?,
            levels,
            transforms: vals.or("transforms", 20)?,
        })
    }
}

fn parse_kind(name: &str, vals: &Values) -> Result<SurfaceKind> {
    Ok(match name {
        "torus" => SurfaceKind::Torus { r: vals.or("r", 1.0)?, big_r: vals.or("R", 3.0)? },
        "ellipsoid" => SurfaceKind::Ellipsoid { a: vals.or("a", 1.0)?, b: vals.or("b", 1.3)?, c: vals.or("c", 1.7)? },
        "sphere" => SurfaceKind::Sphere { r: vals.positive("r", 1.0)? },
        "quadric_graph" => SurfaceKind::QuadricGraph,
        "perturbed_graph" => SurfaceKind::PerturbedGraph { eps: vals.or("eps", 0.1)?, delta: vals.or("delta", 0.1)? },
        "revolution" => SurfaceKind::Revolution(match vals.or("profile", "circle".to_string())?.as_str() {
            "circle" => Profile::Circle { r: vals.or("r", 1.0)?, big_r: vals.or("R", 3.0)? },
            "catenoid" => Profile::Catenoid { c: vals.positive("c", 1.0)? },
            "paraboloid" => Profile::Paraboloid,
            "cone" => Profile::Cone,
            p => return Err(CliError::Usage(format!("unknown profile {p:?} (circle, catenoid, paraboloid, cone)"))),
        }),
        k => {
            return Err(CliError::Usage(format!(
                "unknown surface kind {k:?} (torus, ellipsoid, sphere, quadric_graph, perturbed_graph, revolution)"
            )))
        }
    })
}
