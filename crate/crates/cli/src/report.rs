//! Check reports and their aggregation.

use std::collections::BTreeMap;
use std::path::PathBuf;

use qg_core::grid::{fitted_order, GridChart};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// The value must not exceed the limit.
    Max,
    /// The value must reach the limit.
    Min,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub limit: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridInfo {
    pub nu: usize,
    pub nv: usize,
    pub hu: f64,
    pub hv: f64,
}

impl From<&GridChart> for GridInfo {
    fn from(c: &GridChart) -> Self {
        Self { nu: c.nu, nv: c.nv, hu: c.hu, hv: c.hv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub suite: String,
    pub pass: bool,
    pub surface: String,
    pub grid: GridInfo,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
    pub convergence_orders: BTreeMap<String, f64>,
    /// `(h, value)` per metric along the refinement ladder.
    pub samples: BTreeMap<String, Vec<[f64; 2]>>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

/// Values at or below this count as exact, so no order is fitted.
pub const EXACT: f64 = 1e-13;

impl Report {
    pub fn new(suite: &str, surface: &str, chart: &GridChart, seed: u64) -> Self {
        Self {
            suite: suite.to_string(),
            pass: true,
            surface: surface.to_string(),
            grid: chart.into(),
            seed,
            metrics: BTreeMap::new(),
            convergence_orders: BTreeMap::new(),
            samples: BTreeMap::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        } else {
            self.notes.push(format!("{name} is not finite"));
        }
    }

    /// Records `value` as a metric and grades it.
    pub fn check(&mut self, name: &str, value: f64, bound: Bound, limit: f64) {
        self.metric(name, value);
        self.grade(name, value, bound, limit);
    }

    fn grade(&mut self, name: &str, value: f64, bound: Bound, limit: f64) {
        let pass = value.is_finite()
            && match bound {
                Bound::Max => value <= limit,
                Bound::Min => value >= limit,
            };
        self.pass &= pass;
        self.checks.push(Check { name: name.to_string(), value: if value.is_finite() { value } else { f64::MAX }, bound, limit, pass });
    }

    /// Records the samples and fitted order of `name`; fails the report
    /// when the order falls below `min_order`, unless every sample is
    /// already exact or the ladder has a single level.
    pub fn order(&mut self, name: &str, samples: &[(f64, f64)], min_order: Option<f64>) {
        self.samples.insert(name.to_string(), samples.iter().map(|&(h, e)| [h, e]).collect());
        if samples.len() < 2 {
            self.notes.push(format!("{name}: single grid, no order fitted"));
            return;
        }
        if samples.iter().all(|s| s.1 <= EXACT) {
            self.notes.push(format!("{name}: exact to rounding on every grid"));
            return;
        }
        let p = fitted_order(samples);
        if p.is_finite() {
            self.convergence_orders.insert(name.to_string(), p);
        }
        if let Some(m) = min_order {
            self.grade(&format!("order:{name}"), p, Bound::Min, m);
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub reports: usize,
    pub pass: bool,
    /// `suite/surface` → `nu x nv` → pass.
    pub matrix: BTreeMap<String, BTreeMap<String, bool>>,
    /// `suite/surface` → metric → order fitted across the merged reports,
    /// for metrics with an upper-bound check.
    pub orders: BTreeMap<String, BTreeMap<String, f64>>,
    pub inputs: Vec<Report>,
}

pub fn parse_report(path: &PathBuf, text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| CliError::Schema { path: path.clone(), message: format!("not a check report: {e}") })
}

pub fn merge(reports: Vec<Report>) -> Result<Summary> {
    if reports.is_empty() {
        return Err(CliError::Usage("merge needs at least one report".into()));
    }
    let mut matrix: BTreeMap<String, BTreeMap<String, bool>> = BTreeMap::new();
    let mut groups: BTreeMap<String, Vec<&Report>> = BTreeMap::new();
    for r in &reports {
        let key = format!("{}/{}", r.suite, r.surface);
        let cell = matrix.entry(key.clone()).or_default().entry(format!("{}x{}", r.grid.nu, r.grid.nv)).or_insert(true);
        *cell &= r.pass;
        groups.entry(key).or_default().push(r);
    }
    let mut orders = BTreeMap::new();
    for (key, rs) in groups {
        let mut hs: Vec<f64> = rs.iter().map(|r| r.grid.hu).collect();
        hs.sort_by(f64::total_cmp);
        hs.dedup();
        if hs.len() < 2 {
            continue;
        }
        let mut fitted = BTreeMap::new();
        let errors = rs[0].checks.iter().filter(|c| c.bound == Bound::Max).map(|c| &c.name);
        for name in errors.filter(|n| rs[0].metrics.contains_key(*n)) {
            let samples: Vec<(f64, f64)> =
                rs.iter().filter_map(|r| r.metrics.get(name).map(|v| (r.grid.hu, v.abs()))).collect();
            if samples.len() == rs.len() && samples.iter().any(|s| s.1 > EXACT) {
                let p = fitted_order(&samples);
                if p.is_finite() {
                    fitted.insert(name.clone(), p);
                }
            }
        }
        orders.insert(key, fitted);
    }
    Ok(Summary { reports: reports.len(), pass: reports.iter().all(|r| r.pass), matrix, orders, inputs: reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(h: f64, err: f64) -> Report {
        let chart = GridChart::new(((1.0 / h).round() as usize) + 1, 9, h, 0.1).unwrap();
        let mut r = Report::new("pq-identity", "ellipsoid", &chart, 0);
        r.check("max_deviation", err, Bound::Max, 1.0);
        r
    }

    #[test]
    fn checks_drive_pass() {
        let mut r = report(0.1, 0.5);
        assert!(r.pass);
        r.check("other", 3.0, Bound::Min, 4.0);
        assert!(!r.pass && !r.checks[1].pass);
        r.check("nan", f64::NAN, Bound::Max, 1.0);
        assert!(r.notes.iter().any(|n| n.contains("nan")));
    }

    #[test]
    fn orders_skip_exact_samples() {
        let mut r = report(0.1, 0.0);
        r.order("e", &[(0.2, 0.0), (0.1, 1e-16)], Some(2.0));
        assert!(r.pass && r.convergence_orders.is_empty());
        r.order("f", &[(0.2, 4e-4), (0.1, 1e-4)], Some(1.8));
        assert!(r.pass && (r.convergence_orders["f"] - 2.0).abs() < 1e-12);
        r.order("g", &[(0.2, 2e-4), (0.1, 1e-4)], Some(1.8));
        assert!(!r.pass);
    }

    #[test]
    fn merge_single_wraps() {
        let r = report(0.1, 0.5);
        let s = merge(vec![r.clone()]).unwrap();
        assert_eq!(s.inputs, vec![r]);
        assert!(s.orders.is_empty() && s.pass);
    }

    #[test]
    fn merge_fits_log_ratio_order() {
        let s = merge(vec![report(0.1, 4e-4), report(0.05, 1e-4), report(0.025, 2.5e-5)]).unwrap();
        assert!((s.orders["pq-identity/ellipsoid"]["max_deviation"] - 2.0).abs() < 1e-9);
        assert_eq!(s.matrix["pq-identity/ellipsoid"].len(), 3);
        assert!(matches!(merge(vec![]), Err(CliError::Usage(_))));
    }

    #[test]
    fn report_round_trips_and_rejects_foreign_json() {
        let r = report(0.1, 0.5);
        let p = PathBuf::from("r.json");
        assert_eq!(parse_report(&p, &r.to_json()).unwrap(), r);
        assert!(matches!(parse_report(&p, r#"{"total": 1.0}"#), Err(CliError::Schema { .. })));
    }
}
