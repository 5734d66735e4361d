//! Surface → Legendre map → Gauss map, and the JSON dumps of each stage.

use qg_core::gauss_map::{conformal_gauss, tension, tension_lemma, GaussMapGrid};
use qg_core::grid::{GridChart, Reality};
use qg_core::legendre::{asymptotic_reparametrize, proj_lift, ConformalSignature, LegendreGrid};
use qg_core::linalg::V6;
use qg_core::loop_tools::matrix_pairs;
use qg_core::error::Node;
use qg_core::functionals::lie_pipeline;
use qg_core::surface::{Geometry, SurfaceGrid};
use serde::Serialize;

use crate::error::Result;

pub struct Pipeline {
    /// The surface actually lifted: curvatures fitted, or reparametrized
    /// along asymptotic lines.
    pub surface: SurfaceGrid,
    pub legendre: LegendreGrid,
    pub gauss: GaussMapGrid,
}

pub fn legendre_of(surface: &SurfaceGrid) -> Result<(SurfaceGrid, LegendreGrid)> {
    match surface.geometry {
        Geometry::Euclidean3 => {
            let (s, f, _) = lie_pipeline(surface)?;
            Ok((s, f))
        }
        Geometry::Projective3 => {
            let s = if surface.flags.asymptotic { surface.clone() } else { asymptotic_reparametrize(surface, None)?.0 };
            let f = proj_lift(&s)?;
            Ok((s, f))
        }
    }
}

pub fn pipeline(surface: &SurfaceGrid) -> Result<Pipeline> {
    let (surface, legendre) = legendre_of(surface)?;
    let gauss = conformal_gauss(&legendre)?;
    Ok(Pipeline { surface, legendre, gauss })
}

#[derive(Serialize)]
struct ChartDump {
    nu: usize,
    nv: usize,
    hu: f64,
    hv: f64,
    u0: f64,
    v0: f64,
    reality: Reality,
}

impl From<&GridChart> for ChartDump {
    fn from(c: &GridChart) -> Self {
        Self { nu: c.nu, nv: c.nv, hu: c.hu, hv: c.hv, u0: c.u0, v0: c.v0, reality: c.reality }
    }
}

fn vec_pairs(v: &V6) -> [[f64; 2]; 6] {
    std::array::from_fn(|k| [v[k].re, v[k].im])
}

#[derive(Serialize)]
struct Residuals {
    nullity: f64,
    contact: f64,
    focal: f64,
}

#[derive(Serialize)]
struct LegendreDump {
    signature: (usize, usize),
    #[serde(flatten)]
    chart: ChartDump,
    margin: usize,
    l: Vec<[[f64; 2]; 6]>,
    s: Vec<[[f64; 2]; 6]>,
    residuals: Residuals,
}

pub fn legendre_json(f: &LegendreGrid) -> String {
    let r = f.residuals();
    let dump = LegendreDump {
        signature: f.space.signature(),
        chart: (&f.chart).into(),
        margin: f.margin,
        l: f.l.iter().map(vec_pairs).collect(),
        s: f.s.iter().map(vec_pairs).collect(),
        residuals: Residuals { nullity: r.nullity, contact: r.contact, focal: r.focal },
    };
    serde_json::to_string(&dump).expect("legendre dump serializes")
}

#[derive(Serialize)]
struct GaussDump {
    signature: (usize, usize),
    signature_z: ConformalSignature,
    #[serde(flatten)]
    chart: ChartDump,
    margin: usize,
    eps: [f64; 2],
    degenerate: Vec<Node>,
    cross_gram: Option<f64>,
    /// Row-major 6×6 projector onto `S` per node.
    projector: Vec<Vec<[f64; 2]>>,
}

pub fn gauss_json(s: &GaussMapGrid) -> String {
    let dump = GaussDump {
        signature: s.space.signature(),
        signature_z: s.signature_z,
        chart: (&s.chart).into(),
        margin: s.margin,
        eps: [s.eps.re, s.eps.im],
        degenerate: s.degenerate.clone(),
        cross_gram: s.cross_gram,
        projector: s.projector.iter().map(matrix_pairs).collect(),
    };
    serde_json::to_string(&dump).expect("gauss dump serializes")
}

#[derive(Serialize)]
struct TensionDump {
    nu: usize,
    nv: usize,
    margin: usize,
    max_norm: f64,
    codazzi: f64,
    image_angle: f64,
    kernel_defect: f64,
    norm: Vec<f64>,
}

pub fn tension_json(p: &Pipeline) -> String {
    let t = tension(&p.gauss);
    let lemma = tension_lemma(&t, &p.gauss, &p.legendre);
    let dump = TensionDump {
        nu: t.norm.nu,
        nv: t.norm.nv,
        margin: t.norm.margin,
        max_norm: p.gauss.regular_nodes(&t.norm).map(|(i, j)| *t.norm.at(i, j)).fold(0.0, f64::max),
        codazzi: t.codazzi,
        image_angle: lemma.image_angle,
        kernel_defect: lemma.kernel_defect,
        norm: t.norm.data.clone(),
    };
    serde_json::to_string(&dump).expect("tension dump serializes")
}
