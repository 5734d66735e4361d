//! The non-check subcommands: each turns a configuration into one JSON
//! document.

use qg_core::functionals::{willmore_descent, willmore_energy};
use qg_core::gauss_map::{blaschke_residual, GaussMapGrid};
use qg_core::linalg::C;
use qg_core::loop_tools::{
    dual_connection, dualize, frame, harmonicity, maurer_cartan, projector_deviation, spectral_connection, spectral_deform,
    test_lambda,
};
use qg_core::surface::SurfaceGrid;
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::generate::{generate, load_surface};
use crate::pipeline::{gauss_json, legendre_json, legendre_of, pipeline, tension_json};
use crate::suites::run_check;

/// A command's JSON output and whether its thresholds were met.
pub struct Outcome {
    pub json: String,
    pub pass: bool,
}

impl Outcome {
    fn ok(json: String) -> Self {
        Self { json, pass: true }
    }
}

fn source(cfg: &RunConfig) -> Result<SurfaceGrid> {
    match (&cfg.input, &cfg.kind) {
        (Some(p), _) => load_surface(p),
        (None, Some(k)) => generate(k, &cfg.grid),
        (None, None) => Err(CliError::Usage(format!("{} needs a surface: set kind or input", cfg.command))),
    }
}

fn nested(json: String) -> Value {
    serde_json::from_str(&json).expect("module dumps are valid JSON")
}

fn to_string<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("output serializes")
}

fn blaschke(g: &GaussMapGrid) -> f64 {
    let (b1, b2) = blaschke_residual(g);
    g.regular_nodes(&b1).map(|(i, j)| b1.at(i, j).max(*b2.at(i, j))).fold(0.0, f64::max)
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command.as_str() {
        "generate" => Ok(Outcome::ok(source(cfg)?.to_json())),
        "lift" => Ok(Outcome::ok(legendre_json(&legendre_of(&source(cfg)?)?.1))),
        "gauss" => Ok(Outcome::ok(gauss_json(&pipeline(&source(cfg)?)?.gauss))),
        "energy" => Ok(Outcome::ok(willmore_energy(&pipeline(&source(cfg)?)?.gauss).to_json())),
        "tension" => Ok(Outcome::ok(tension_json(&pipeline(&source(cfg)?)?))),
        "deform" => deform(cfg),
        "dualize" => dualize_cmd(cfg),
        "descent" => descent(cfg),
        "check" => {
            let r = run_check(cfg)?;
            Ok(Outcome { json: r.to_json(), pass: r.pass })
        }
        c => Err(CliError::Usage(format!("unknown command {c:?}"))),
    }
}

#[derive(Serialize)]
struct DeformOutput {
    lambda: [f64; 2],
    floor: f64,
    test_flatness: f64,
    blaschke_in: f64,
    blaschke_out: f64,
    /// Largest change of the projector onto `S`.
    projector_change: f64,
    connection: Value,
}

fn deform(cfg: &RunConfig) -> Result<Outcome> {
    let s = pipeline(&source(cfg)?)?.gauss;
    let lambda = cfg.lambda.map(|(a, b)| C::new(a, b)).unwrap_or(test_lambda(s.chart.reality));
    let out = spectral_deform(&s, lambda)?;
    let f = frame(&s)?;
    let alpha = maurer_cartan(&f)?;
    let h = harmonicity(&f, &alpha)?;
    let doc = DeformOutput {
        lambda: [lambda.re, lambda.im],
        floor: h.floor,
        test_flatness: h.test,
        blaschke_in: blaschke(&s),
        blaschke_out: blaschke(&out),
        projector_change: projector_deviation(&s, &out),
        connection: nested(spectral_connection(&alpha, lambda)?.to_json()),
    };
    Ok(Outcome::ok(to_string(&doc)))
}

#[derive(Serialize)]
struct DualOutput {
    signature: (usize, usize),
    dual_signature: (usize, usize),
    round_trip: f64,
    dual_imaginary: f64,
    connection: Value,
}

fn dualize_cmd(cfg: &RunConfig) -> Result<Outcome> {
    let s = pipeline(&source(cfg)?)?.gauss;
    let d = dualize(&s)?;
    let back = dualize(&d)?;
    let conn = dual_connection(&maurer_cartan(&frame(&s)?)?)?;
    let doc = DualOutput {
        signature: s.space.signature(),
        dual_signature: d.space.signature(),
        round_trip: projector_deviation(&back, &s),
        dual_imaginary: conn.max_imag(),
        connection: nested(conn.to_json()),
    };
    Ok(Outcome::ok(to_string(&doc)))
}

#[derive(Serialize)]
struct DescentOutput {
    energies: Vec<f64>,
    accepted: Vec<f64>,
    orientation: f64,
    /// Largest normal displacement of the final surface.
    displacement: f64,
    surface: Value,
}

fn descent(cfg: &RunConfig) -> Result<Outcome> {
    let s = source(cfg)?;
    let t = willmore_descent(&s, cfg.steps, cfg.step_size)?;
    let displacement = s.points.iter().zip(&t.surface.points).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let doc = DescentOutput {
        energies: t.reports.iter().map(|r| r.total).collect(),
        accepted: t.accepted.clone(),
        orientation: t.orientation,
        displacement,
        surface: nested(t.surface.to_json()),
    };
    Ok(Outcome::ok(to_string(&doc)))
}
