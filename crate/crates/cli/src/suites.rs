//! Check suites: each runs one pipeline, usually along a refinement ladder,
//! and grades the finest grid against fixed thresholds.

use qg_core::functionals::{invariance_report, random_lie, random_sl4, willmore_descent, Transform};
use qg_core::gauss_map::{blaschke_residual, d_s, grassmann_pair, reconstruct, tension, tension_lemma, GaussMapGrid};
use qg_core::grid::Field;
use qg_core::legendre::{conjugate_coefficients, line_angle};
use qg_core::linalg::C;
use qg_core::loop_tools::{
    central_flatness, dual_connection, dualize, frame, harmonicity, maurer_cartan, projector_deviation, spectral_connection,
    spectral_deform, test_lambda, HARMONIC_FACTOR,
};
use qg_core::surface::{Geometry, SurfaceGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{RunConfig, SurfaceKind};
use crate::error::{CliError, Result};
use crate::generate::{generate, ladder, load_surface};
use crate::pipeline::{legendre_of, pipeline, Pipeline};
use crate::report::{Bound, Report};

pub const SUITES: &[&str] = &[
    "lift-invariants",
    "pq-identity",
    "conformality",
    "orthogonality",
    "tension-lemma",
    "blaschke-roundtrip",
    "invariance",
    "flatness",
    "deform",
    "dualize",
    "descent",
];

const ELLIPSOID: SurfaceKind = SurfaceKind::Ellipsoid { a: 1.0, b: 1.3, c: 1.7 };
const TORUS: SurfaceKind = SurfaceKind::Torus { r: 1.0, big_r: 3.0 };

pub fn run_check(cfg: &RunConfig) -> Result<Report> {
    let suite = cfg.suite.as_deref().ok_or_else(|| CliError::Usage(format!("check needs a suite: {}", SUITES.join(", "))))?;
    match suite {
        "lift-invariants" => lift_invariants(cfg),
        "pq-identity" => pq_identity(cfg),
        "conformality" => conformality(cfg),
        "orthogonality" => orthogonality(cfg),
        "tension-lemma" => tension_suite(cfg),
        "blaschke-roundtrip" => blaschke_roundtrip(cfg),
        "invariance" => invariance(cfg),
        "flatness" => flatness(cfg),
        "deform" => deform(cfg),
        "dualize" => dualize_suite(cfg),
        "descent" => descent(cfg),
        s => Err(CliError::Usage(format!("unknown suite {s:?}; expected one of {}", SUITES.join(", ")))),
    }
}

fn kind_name(cfg: &RunConfig, default: SurfaceKind) -> String {
    match &cfg.input {
        Some(p) => p.display().to_string(),
        None => cfg.kind.unwrap_or(default).name().to_string(),
    }
}

/// Surfaces along the refinement ladder, coarsest first; a single surface
/// when the configuration names an input file.
fn surfaces(cfg: &RunConfig, default: SurfaceKind) -> Result<Vec<SurfaceGrid>> {
    match &cfg.input {
        Some(p) => Ok(vec![load_surface(p)?]),
        None => ladder(&cfg.grid, cfg.levels).iter().map(|g| generate(&cfg.kind.unwrap_or(default), g)).collect(),
    }
}

/// A threshold on the finest grid, with an optional minimum convergence
/// order along the ladder.
struct Threshold {
    metric: &'static str,
    bound: Bound,
    limit: f64,
    order: Option<f64>,
}

const fn max(metric: &'static str, limit: f64, order: Option<f64>) -> Threshold {
    Threshold { metric, bound: Bound::Max, limit, order }
}

/// Runs `measure` on every ladder level and grades the results.  The
/// configured tolerance replaces the first threshold's limit.
fn ladder_suite(
    cfg: &RunConfig,
    suite: &str,
    default: SurfaceKind,
    thresholds: &[Threshold],
    measure: impl Fn(&Pipeline) -> Result<Vec<(&'static str, f64)>>,
) -> Result<Report> {
    let mut levels = Vec::new();
    for s in surfaces(cfg, default)? {
        let p = pipeline(&s)?;
        let m = measure(&p)?;
        levels.push((p.gauss.chart.clone(), m));
    }
    let (chart, finest) = levels.last().expect("ladder is never empty");
    let mut r = Report::new(suite, &kind_name(cfg, default), chart, cfg.seed);
    for &(name, v) in finest {
        r.metric(name, v);
    }
    for (k, t) in thresholds.iter().enumerate() {
        let limit = if k == 0 { cfg.tolerance.unwrap_or(t.limit) } else { t.limit };
        let v = finest.iter().find(|m| m.0 == t.metric).map(|m| m.1).unwrap_or(f64::NAN);
        r.check(t.metric, v, t.bound, limit);
        let samples: Vec<(f64, f64)> =
            levels.iter().map(|(c, m)| (c.hu, m.iter().find(|x| x.0 == t.metric).map(|x| x.1).unwrap_or(f64::NAN))).collect();
        r.order(t.metric, &samples, t.order);
    }
    Ok(r)
}

fn regular_max(s: &GaussMapGrid, f: &Field<f64>) -> f64 {
    s.regular_nodes(f).map(|(i, j)| *f.at(i, j)).fold(0.0, f64::max)
}

fn lift_invariants(cfg: &RunConfig) -> Result<Report> {
    let th = [max("nullity", 1e-10, None), max("contact", 1e-3, Some(1.8)), max("focal", 1e-3, Some(1.8))];
    ladder_suite(cfg, "lift-invariants", ELLIPSOID, &th, |p| {
        let r = p.legendre.residuals();
        Ok(vec![("nullity", r.nullity), ("contact", r.contact), ("focal", r.focal)])
    })
}

/// Largest `|⟨S_u, S_v⟩ - pq|` over nodes where both are defined.
pub fn pq_deviation(p: &Pipeline) -> Result<(f64, f64)> {
    let (su, sv) = d_s(&p.gauss);
    let pq = conjugate_coefficients(&p.legendre)?.pq();
    let sp = &p.gauss.space;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, j) in p.gauss.regular_nodes(&su).filter(|&(i, j)| pq.is_valid(i, j)).collect::<Vec<_>>() {
        let w = grassmann_pair(sp, su.at(i, j), sv.at(i, j));
        worst = worst.max((w - pq.at(i, j)).norm());
        scale = scale.max(pq.at(i, j).norm());
    }
    Ok((worst, scale))
}

fn pq_identity(cfg: &RunConfig) -> Result<Report> {
    ladder_suite(cfg, "pq-identity", ELLIPSOID, &[max("max_deviation", 1e-3, Some(1.8))], |p| {
        let (dev, scale) = pq_deviation(p)?;
        Ok(vec![("max_deviation", dev), ("max_pq", scale)])
    })
}

/// Largest `|⟨S_u,S_u⟩|, |⟨S_v,S_v⟩|` and largest `|⟨S_u,S_v⟩|`.
pub fn self_pairings(s: &GaussMapGrid) -> (f64, f64) {
    let (su, sv) = d_s(s);
    let sp = &s.space;
    let mut diag: f64 = 0.0;
    let mut off: f64 = 0.0;
    for (i, j) in s.regular_nodes(&su).collect::<Vec<_>>() {
        let (a, b) = (su.at(i, j), sv.at(i, j));
        diag = diag.max(grassmann_pair(sp, a, a).norm()).max(grassmann_pair(sp, b, b).norm());
        off = off.max(grassmann_pair(sp, a, b).norm());
    }
    (diag, off)
}

fn conformality(cfg: &RunConfig) -> Result<Report> {
    ladder_suite(cfg, "conformality", ELLIPSOID, &[max("max_self_pairing", 1e-3, Some(1.8))], |p| {
        let (diag, off) = self_pairings(&p.gauss);
        Ok(vec![("max_self_pairing", diag), ("max_cross_pairing", off)])
    })
}

fn orthogonality(cfg: &RunConfig) -> Result<Report> {
    ladder_suite(cfg, "orthogonality", ELLIPSOID, &[max("cross_gram", 1e-3, Some(1.8))], |p| {
        Ok(vec![("cross_gram", p.gauss.cross_gram.unwrap_or(0.0))])
    })
}

fn tension_suite(cfg: &RunConfig) -> Result<Report> {
    let th = [max("image_angle", 1e-2, None), max("codazzi", 1e-3, None)];
    ladder_suite(cfg, "tension-lemma", ELLIPSOID, &th, |p| {
        let t = tension(&p.gauss);
        let lemma = tension_lemma(&t, &p.gauss, &p.legendre);
        Ok(vec![
            ("image_angle", lemma.image_angle),
            ("kernel_defect", lemma.kernel_defect),
            ("codazzi", t.codazzi),
            ("max_tension", regular_max(&p.gauss, &t.norm)),
        ])
    })
}

/// Largest line angle between the reconstructed and original focal lines.
pub fn roundtrip_angle(p: &Pipeline) -> Result<f64> {
    let g = reconstruct(&p.gauss)?;
    let c = &p.gauss.chart;
    Ok(c.interior(g.margin.max(p.legendre.margin))
        .map(|(i, j)| {
            let k = c.idx(i, j);
            line_angle(&g.l[k], &p.legendre.l[k]).max(line_angle(&g.s[k], &p.legendre.s[k]))
        })
        .fold(0.0, f64::max))
}

fn blaschke_roundtrip(cfg: &RunConfig) -> Result<Report> {
    ladder_suite(cfg, "blaschke-roundtrip", ELLIPSOID, &[max("line_angle", 1e-4, Some(1.8))], |p| {
        let (b1, b2) = blaschke_residual(&p.gauss);
        Ok(vec![("line_angle", roundtrip_angle(p)?), ("blaschke_residual", regular_max(&p.gauss, &b1).max(regular_max(&p.gauss, &b2)))])
    })
}

/// Random group elements for the invariance suite: element `k` is drawn
/// from ChaCha8 seeded with `seed` on stream `k`, so each element is
/// independent of how many others are drawn.
pub fn group_elements(geometry: Geometry, seed: u64, count: usize) -> Vec<Transform> {
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            match geometry {
                Geometry::Euclidean3 => Transform::Lie(random_lie(&mut rng, 0.3)),
                Geometry::Projective3 => Transform::Projective(random_sl4(&mut rng, 0.2)),
            }
        })
        .collect()
}

pub const NORMAL_SHIFTS: [f64; 2] = [0.1, 0.3];

fn invariance(cfg: &RunConfig) -> Result<Report> {
    let surfaces = surfaces(cfg, ELLIPSOID)?;
    let finest = surfaces.last().expect("ladder is never empty");
    let euclid = finest.geometry == Geometry::Euclidean3;
    let lifted = |s: &SurfaceGrid| -> Result<SurfaceGrid> { if euclid { Ok(s.clone()) } else { Ok(legendre_of(s)?.0) } };
    let mut r = Report::new("invariance", &kind_name(cfg, ELLIPSOID), &finest.chart, cfg.seed);
    r.notes.push(format!("{} group elements from ChaCha8 seed {}, stream k for element k", cfg.transforms, cfg.seed));
    let group = invariance_report(&lifted(finest)?, &group_elements(finest.geometry, cfg.seed, cfg.transforms))?;
    let worst = group.iter().map(|e| e.density_deviation).fold(0.0, f64::max);
    r.check("group_deviation", worst, Bound::Max, cfg.tolerance.unwrap_or(1e-4));
    if euclid {
        let mut samples = Vec::new();
        for s in &surfaces {
            let shifts: Vec<Transform> = NORMAL_SHIFTS.iter().map(|&t| Transform::NormalShift(t)).collect();
            let dev = invariance_report(s, &shifts)?.iter().map(|e| e.density_deviation).fold(0.0, f64::max);
            samples.push((s.chart.hu, dev));
        }
        let dev = samples.last().unwrap().1;
        r.check("normal_shift_deviation", dev, Bound::Max, cfg.tolerance.unwrap_or(1e-4));
        r.order("normal_shift_deviation", &samples, Some(1.8));
    }
    Ok(r)
}

fn config_lambda(cfg: &RunConfig, default: C) -> C {
    cfg.lambda.map(|(a, b)| C::new(a, b)).unwrap_or(default)
}

fn flatness(cfg: &RunConfig) -> Result<Report> {
    let mut levels = Vec::new();
    for s in surfaces(cfg, TORUS)? {
        let p = pipeline(&s)?;
        let f = frame(&p.gauss)?;
        let alpha = maurer_cartan(&f)?;
        let h = harmonicity(&f, &alpha)?;
        let lambda = config_lambda(cfg, test_lambda(p.gauss.chart.reality));
        let test = central_flatness(&spectral_connection(&alpha, lambda)?);
        levels.push((p.gauss.chart.clone(), lambda, test, h.floor));
    }
    let (chart, lambda, test, floor) = levels.last().cloned().expect("ladder is never empty");
    let mut r = Report::new("flatness", &kind_name(cfg, TORUS), &chart, cfg.seed);
    r.metric("lambda_re", lambda.re);
    r.metric("lambda_im", lambda.im);
    r.metric("floor", floor);
    r.check("flatness", test, Bound::Max, cfg.tolerance.unwrap_or(HARMONIC_FACTOR * floor));
    let samples: Vec<(f64, f64)> = levels.iter().map(|l| (l.0.hu, l.2)).collect();
    r.order("flatness", &samples, Some(0.9));
    Ok(r)
}

fn deform(cfg: &RunConfig) -> Result<Report> {
    let s = crate::generate::surface(cfg, TORUS)?;
    let p = pipeline(&s)?;
    let lambda = config_lambda(cfg, test_lambda(p.gauss.chart.reality));
    let out = spectral_deform(&p.gauss, lambda)?;
    let blaschke = |g: &GaussMapGrid| {
        let (b1, b2) = blaschke_residual(g);
        regular_max(g, &b1).max(regular_max(g, &b2))
    };
    let (bin, bout) = (blaschke(&p.gauss), blaschke(&out));
    let mut r = Report::new("deform", &kind_name(cfg, TORUS), &out.chart, cfg.seed);
    r.metric("lambda_re", lambda.re);
    r.metric("lambda_im", lambda.im);
    r.metric("blaschke_in", bin);
    r.check("blaschke_out", bout, Bound::Max, 2.0 * bin + cfg.tolerance.unwrap_or(1e-3));
    let (_, off) = self_pairings(&out);
    let (su, _) = d_s(&out);
    let scale = out.regular_nodes(&su).map(|(i, j)| qg_core::gauss_map::op_norm(su.at(i, j)).powi(2)).fold(0.0, f64::max);
    if off <= 1e-8 * scale.max(1.0) {
        r.notes.push("deformed map has <S_u,S_v> = 0 everywhere; no Legendre map to reconstruct".into());
        r.metric("nondegenerate", 0.0);
    } else {
        match reconstruct(&out) {
            Ok(g) => {
                r.metric("nondegenerate", 1.0);
                r.check("reconstructed_nullity", g.residuals().nullity, Bound::Max, 1e-6);
            }
            Err(e) => r.notes.push(format!("reconstruction skipped: {e}")),
        }
    }
    Ok(r)
}

fn dualize_suite(cfg: &RunConfig) -> Result<Report> {
    let s = crate::generate::surface(cfg, ELLIPSOID)?;
    let p = pipeline(&s)?;
    let f = frame(&p.gauss)?;
    let dual = dual_connection(&maurer_cartan(&f)?)?;
    let d = dualize(&p.gauss)?;
    let back = dualize(&d)?;
    let mut r = Report::new("dualize", &kind_name(cfg, ELLIPSOID), &p.gauss.chart, cfg.seed);
    let (m, n) = d.space.signature();
    r.metric("dual_signature_positive", m as f64);
    r.metric("dual_signature_negative", n as f64);
    r.check("round_trip", projector_deviation(&back, &p.gauss), Bound::Max, cfg.tolerance.unwrap_or(1e-3));
    r.check("dual_imaginary", dual.max_imag(), Bound::Max, 1e-10);
    Ok(r)
}

fn descent(cfg: &RunConfig) -> Result<Report> {
    let s = crate::generate::surface(cfg, ELLIPSOID)?;
    let trace = willmore_descent(&s, cfg.steps, cfg.step_size)?;
    let w: Vec<f64> = trace.reports.iter().map(|e| e.total).collect();
    let increase = w.windows(2).map(|p| p[1] - p[0]).fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let (first, last) = (w[0], *w.last().unwrap());
    let mut r = Report::new("descent", &kind_name(cfg, ELLIPSOID), &s.chart, cfg.seed);
    r.metric("initial", first);
    r.metric("final", last);
    r.metric("steps", cfg.steps as f64);
    r.metric("accepted", trace.accepted.iter().filter(|a| **a > 0.0).count() as f64);
    r.check("max_increase", increase, Bound::Max, 0.0);
    r.check("relative_decrease", (first - last) / first.abs().max(1e-300), Bound::Min, cfg.tolerance.unwrap_or(0.01));
    Ok(r)
}
