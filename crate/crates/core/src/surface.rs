//! Classical surfaces sampled on a chart, their JSON form, and the analytic
//! generators used as test and demo inputs.

use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::grid::{Field, GridChart, Reality};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Euclidean3,
    Projective3,
}

/// A surface in ℝ³ (points, unit normals, optional principal curvatures) or
/// in ℝP³ (homogeneous lifts).  Exactly one of `points` / `lift` is filled.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGrid {
    pub geometry: Geometry,
    pub chart: GridChart,
    pub points: Vec<Vector3<f64>>,
    pub lift: Vec<Vector4<f64>>,
    pub normals: Option<Vec<Vector3<f64>>>,
    pub kappa1: Option<Vec<f64>>,
    pub kappa2: Option<Vec<f64>>,
    pub flags: SurfaceFlags,
    /// Boundary layer whose derived values (e.g. fitted curvatures) are
    /// placeholders and must not feed further differences.
    pub margin: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurfaceFlags {
    #[serde(default, skip_serializing_if = "is_false")]
    pub curvature_line: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub asymptotic: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub umbilic: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl SurfaceGrid {
    pub fn euclidean(chart: GridChart, points: Vec<Vector3<f64>>, normals: Option<Vec<Vector3<f64>>>) -> Result<Self> {
        chart.validate()?;
        let s = Self {
            geometry: Geometry::Euclidean3,
            chart,
            points,
            lift: Vec::new(),
            normals,
            kappa1: None,
            kappa2: None,
            flags: SurfaceFlags::default(),
            margin: 0,
        };
        s.check_lengths()?;
        Ok(s)
    }

    pub fn projective(chart: GridChart, lift: Vec<Vector4<f64>>) -> Result<Self> {
        chart.validate()?;
        let s = Self {
            geometry: Geometry::Projective3,
            chart,
            points: Vec::new(),
            lift,
            normals: None,
            kappa1: None,
            kappa2: None,
            flags: SurfaceFlags::default(),
            margin: 0,
        };
        s.check_lengths()?;
        Ok(s)
    }

    fn check_lengths(&self) -> Result<()> {
        let n = self.chart.len();
        let bad = |what: &str, got: usize| GeomError::InvalidInput(format!("{what}: expected {n} nodes, got {got}"));
        match self.geometry {
            Geometry::Euclidean3 => {
                if self.points.len() != n {
                    return Err(bad("points", self.points.len()));
                }
                if let Some(nr) = &self.normals {
                    if nr.len() != n {
                        return Err(bad("normals", nr.len()));
                    }
                }
            }
            Geometry::Projective3 => {
                if self.lift.len() != n {
                    return Err(bad("points", self.lift.len()));
                }
            }
        }
        for k in [&self.kappa1, &self.kappa2].into_iter().flatten() {
            if k.len() != n {
                return Err(bad("kappa", k.len()));
            }
        }
        Ok(())
    }

    pub fn point_field(&self) -> Field<Vector3<f64>> {
        Field { nu: self.chart.nu, nv: self.chart.nv, margin: self.margin, data: self.points.clone() }
    }

    pub fn normal_field(&self) -> Result<Field<Vector3<f64>>> {
        let n = self.normals.as_ref().ok_or(GeomError::MissingField("normals"))?;
        Ok(Field { nu: self.chart.nu, nv: self.chart.nv, margin: self.margin, data: n.clone() })
    }

    pub fn lift_field(&self) -> Field<Vector4<f64>> {
        Field { nu: self.chart.nu, nv: self.chart.nv, margin: self.margin, data: self.lift.clone() }
    }

    /// Homogeneous lift `(1, x, y, z)` of a Euclidean surface.
    pub fn to_projective(&self) -> Result<Self> {
        if self.geometry != Geometry::Euclidean3 {
            return Err(GeomError::InvalidInput("surface is already projective".into()));
        }
        let lift = self.points.iter().map(|p| Vector4::new(1.0, p.x, p.y, p.z)).collect();
        Self::projective(self.chart.clone(), lift)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SurfaceFile::from(self)).expect("surface serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SurfaceFile = serde_json::from_str(text).map_err(|e| GeomError::Serde(e.to_string()))?;
        f.try_into()
    }
}

/// On-disk form of [`SurfaceGrid`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurfaceFile {
    pub geometry: Geometry,
    pub nu: usize,
    pub nv: usize,
    pub hu: f64,
    pub hv: f64,
    #[serde(default)]
    pub u0: f64,
    #[serde(default)]
    pub v0: f64,
    pub reality: Reality,
    #[serde(default = "default_orientation")]
    pub orientation: i8,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normals: Option<Vec<[f64; 3]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<Vec<f64>>,
    #[serde(default, flatten)]
    pub flags: SurfaceFlags,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub margin: usize,
}

fn is_zero(m: &usize) -> bool {
    *m == 0
}

fn default_orientation() -> i8 {
    1
}

impl From<&SurfaceGrid> for SurfaceFile {
    fn from(s: &SurfaceGrid) -> Self {
        let points = match s.geometry {
            Geometry::Euclidean3 => s.points.iter().map(|p| p.iter().copied().collect()).collect(),
            Geometry::Projective3 => s.lift.iter().map(|p| p.iter().copied().collect()).collect(),
        };
        Self {
            geometry: s.geometry,
            nu: s.chart.nu,
            nv: s.chart.nv,
            hu: s.chart.hu,
            hv: s.chart.hv,
            u0: s.chart.u0,
            v0: s.chart.v0,
            reality: s.chart.reality,
            orientation: s.chart.orientation,
            points,
            normals: s.normals.as_ref().map(|n| n.iter().map(|v| [v.x, v.y, v.z]).collect()),
            kappa1: s.kappa1.clone(),
            kappa2: s.kappa2.clone(),
            flags: s.flags.clone(),
            margin: s.margin,
        }
    }
}

impl TryFrom<SurfaceFile> for SurfaceGrid {
    type Error = GeomError;

    fn try_from(f: SurfaceFile) -> Result<Self> {
        let chart = GridChart {
            nu: f.nu,
            nv: f.nv,
            hu: f.hu,
            hv: f.hv,
            u0: f.u0,
            v0: f.v0,
            reality: f.reality,
            orientation: f.orientation,
        };
        let dim = match f.geometry {
            Geometry::Euclidean3 => 3,
            Geometry::Projective3 => 4,
        };
        if let Some(p) = f.points.iter().find(|p| p.len() != dim) {
            return Err(GeomError::InvalidInput(format!("point with {} coordinates, expected {dim}", p.len())));
        }
        let mut s = match f.geometry {
            Geometry::Euclidean3 => SurfaceGrid::euclidean(
                chart,
                f.points.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
                f.normals.map(|n| n.iter().map(|v| Vector3::new(v[0], v[1], v[2])).collect()),
            )?,
            Geometry::Projective3 => {
                SurfaceGrid::projective(chart, f.points.iter().map(|p| Vector4::new(p[0], p[1], p[2], p[3])).collect())?
            }
        };
        s.kappa1 = f.kappa1;
        s.kappa2 = f.kappa2;
        s.flags = f.flags;
        s.margin = f.margin;
        s.check_lengths()?;
        Ok(s)
    }
}

/// Meridian curves for surfaces of revolution
/// `(ρ(u) cos v, ρ(u) sin v, ζ(u))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum Profile {
    /// Circle of radius `r` centred at distance `big_r` from the axis;
    /// `big_r = 0` is the round sphere.
    Circle { r: f64, big_r: f64 },
    Catenoid { c: f64 },
    Paraboloid,
    Cone,
}

impl Profile {
    /// `(ρ, ρ', ρ'', ζ, ζ', ζ'')` at `u`.
    fn jet(&self, u: f64) -> [f64; 6] {
        match *self {
            Profile::Circle { r, big_r } => {
                let (s, c) = u.sin_cos();
                [big_r + r * c, -r * s, -r * c, r * s, r * c, -r * s]
            }
            Profile::Catenoid { c } => {
                let (ch, sh) = ((u / c).cosh(), (u / c).sinh());
                [c * ch, sh, ch / c, u, 1.0, 0.0]
            }
            Profile::Paraboloid => [u, 1.0, 0.0, u * u, 2.0 * u, 2.0],
            Profile::Cone => [u, 1.0, 0.0, u, 1.0, 0.0],
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Profile::Circle { r, big_r } if !(r > 0.0) || big_r < 0.0 || (big_r > 0.0 && r >= big_r) => {
                Err(GeomError::InvalidInput(format!("circle profile needs 0 < r < R or R = 0, got r={r}, R={big_r}")))
            }
            Profile::Catenoid { c } if !(c > 0.0) => Err(GeomError::InvalidInput("catenoid needs c > 0".into())),
            _ => Ok(()),
        }
    }
}

/// Surface of revolution in its curvature-line chart, with the normal
/// `(-ζ' cos v, -ζ' sin v, ρ')/|γ'|` and exact principal curvatures
/// (κ₁ along the meridian `u`, κ₂ along the parallel `v`).
pub fn revolution(profile: Profile, chart: GridChart) -> Result<SurfaceGrid> {
    profile.validate()?;
    chart.validate()?;
    let n = chart.len();
    let (mut pts, mut nrm, mut k1, mut k2) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..chart.nu {
        let [rho, rho1, rho2, zeta, zeta1, zeta2] = profile.jet(chart.u(i));
        if !(rho > 0.0) {
            return Err(GeomError::InvalidInput(format!("profile meets the axis at u={}", chart.u(i))));
        }
        let w = (rho1 * rho1 + zeta1 * zeta1).sqrt();
        for j in 0..chart.nv {
            let (sv, cv) = chart.v(j).sin_cos();
            pts.push(Vector3::new(rho * cv, rho * sv, zeta));
            nrm.push(Vector3::new(-zeta1 * cv, -zeta1 * sv, rho1) / w);
            k1.push((zeta2 * rho1 - rho2 * zeta1) / (w * w * w));
            k2.push(zeta1 / (w * rho));
        }
    }
    let mut s = SurfaceGrid::euclidean(chart, pts, Some(nrm))?;
    s.flags.umbilic = k1.iter().zip(&k2).all(|(a, b)| crate::umbilic(*a, *b));
    s.flags.curvature_line = true;
    s.kappa1 = Some(k1);
    s.kappa2 = Some(k2);
    Ok(s)
}

/// Torus with tube radius `r` and centre radius `big_r`; `u` runs along the
/// tube circles, so κ₁ = 1/r.
pub fn torus(r: f64, big_r: f64, chart: GridChart) -> Result<SurfaceGrid> {
    if !(big_r > 0.0) {
        return Err(GeomError::InvalidInput("torus needs R > 0".into()));
    }
    revolution(Profile::Circle { r, big_r }, chart)
}

pub fn sphere(r: f64, chart: GridChart) -> Result<SurfaceGrid> {
    revolution(Profile::Circle { r, big_r: 0.0 }, chart)
}

/// Default torus window: an interior patch away from the parallels where
/// κ₂ vanishes.
pub fn torus_chart(n: usize) -> Result<GridChart> {
    GridChart::window(n, n, (0.2, 1.2), (0.0, 1.0))
}

pub fn sphere_chart(n: usize) -> Result<GridChart> {
    GridChart::window(n, n, (-0.6, 0.6), (0.0, 1.2))
}

/// Triaxial ellipsoid `x²/a² + y²/b² + z²/c² = 1` (`a < b < c`) in confocal
/// curvature-line coordinates, first octant, inward normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Ellipsoid {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(0.0 < a && a < b && b < c) {
            return Err(GeomError::InvalidInput(format!("ellipsoid needs 0 < a < b < c, got ({a}, {b}, {c})")));
        }
        Ok(Self { a, b, c })
    }

    fn squares(&self) -> (f64, f64, f64) {
        (self.a * self.a, self.b * self.b, self.c * self.c)
    }

    /// Interior window `u ∈ (a², b²)`, `v ∈ (b², c²)` clear of the umbilics
    /// and coordinate planes.
    pub fn chart(&self, n: usize) -> Result<GridChart> {
        let (a, b, c) = self.squares();
        GridChart::window(n, n, (a + 0.25 * (b - a), a + 0.85 * (b - a)), (b + 0.2 * (c - b), b + 0.85 * (c - b)))
    }

    pub fn point(&self, u: f64, v: f64) -> Vector3<f64> {
        let (a, b, c) = self.squares();
        Vector3::new(
            (a * (u - a) * (v - a) / ((b - a) * (c - a))).sqrt(),
            (b * (b - u) * (v - b) / ((b - a) * (c - b))).sqrt(),
            (c * (c - u) * (c - v) / ((c - a) * (c - b))).sqrt(),
        )
    }

    /// Principal curvatures `(κ_u, κ_v)` for the inward normal.
    pub fn curvatures(&self, u: f64, v: f64) -> (f64, f64) {
        let abc = self.a * self.b * self.c;
        let r = (u * v).sqrt();
        (abc / (u * r), abc / (v * r))
    }

    pub fn normal(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let (a, b, c) = self.squares();
        -Vector3::new(p.x / a, p.y / b, p.z / c).normalize()
    }

    pub fn surface(&self, chart: GridChart) -> Result<SurfaceGrid> {
        chart.validate()?;
        let (a, b, c) = self.squares();
        let (mut pts, mut nrm, mut k1, mut k2) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for i in 0..chart.nu {
            for j in 0..chart.nv {
                let (u, v) = (chart.u(i), chart.v(j));
                if !(a < u && u < b && b < v && v < c) {
                    return Err(GeomError::InvalidInput(format!("node ({u}, {v}) outside the confocal window")));
                }
                let p = self.point(u, v);
                let (ku, kv) = self.curvatures(u, v);
                nrm.push(self.normal(&p));
                pts.push(p);
                k1.push(ku);
                k2.push(kv);
            }
        }
        let mut s = SurfaceGrid::euclidean(chart, pts, Some(nrm))?;
        s.kappa1 = Some(k1);
        s.kappa2 = Some(k2);
        s.flags.curvature_line = true;
        Ok(s)
    }

    /// The same ellipsoid in the longitude/latitude chart
    /// `(a cos θ cos φ, b cos θ sin φ, c sin θ)` over `(φ, θ)`, which is not
    /// curvature-line aligned.  No curvatures are attached.
    pub fn latlong_surface(&self, chart: GridChart) -> Result<SurfaceGrid> {
        chart.validate()?;
        let mut pts = Vec::with_capacity(chart.len());
        let mut nrm = Vec::with_capacity(chart.len());
        for i in 0..chart.nu {
            for j in 0..chart.nv {
                let (sp, cp) = chart.u(i).sin_cos();
                let (st, ct) = chart.v(j).sin_cos();
                let p = Vector3::new(self.a * ct * cp, self.b * ct * sp, self.c * st);
                nrm.push(self.normal(&p));
                pts.push(p);
            }
        }
        SurfaceGrid::euclidean(chart, pts, Some(nrm))
    }
}

/// Polynomial graph `z = xy·c_xy + c_xx x² + c_yy y² + c_x3 x³ + c_y3 y³`
/// with homogeneous lift `(1, x, y, z)` over the chart `(x, y)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub xy: f64,
    pub xx: f64,
    pub yy: f64,
    pub x3: f64,
    pub y3: f64,
}

impl Graph {
    /// The hyperbolic paraboloid `z = xy`, whose coordinate lines are
    /// asymptotic.
    pub fn quadric() -> Self {
        Self { xy: 1.0, ..Self::default() }
    }

    /// `z = xy + εx³ + δy³`.  With `δ = 0` the graph is ruled.
    pub fn perturbed(eps: f64, delta: f64) -> Self {
        Self { xy: 1.0, x3: eps, y3: delta, ..Self::default() }
    }

    pub fn paraboloid() -> Self {
        Self { xx: 1.0, yy: 1.0, ..Self::default() }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.xy * x * y + self.xx * x * x + self.yy * y * y + self.x3 * x * x * x + self.y3 * y * y * y
    }

    /// Hessian of the height, proportional to the second fundamental form.
    pub fn hessian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [[2.0 * self.xx + 6.0 * self.x3 * x, self.xy], [self.xy, 2.0 * self.yy + 6.0 * self.y3 * y]]
    }

    pub fn surface(&self, chart: GridChart) -> Result<SurfaceGrid> {
        chart.validate()?;
        let mut lift = Vec::with_capacity(chart.len());
        for i in 0..chart.nu {
            for j in 0..chart.nv {
                let (x, y) = (chart.u(i), chart.v(j));
                lift.push(Vector4::new(1.0, x, y, self.height(x, y)));
            }
        }
        let mut s = SurfaceGrid::projective(chart, lift)?;
        let asym = self.xx == 0.0 && self.yy == 0.0 && self.x3 == 0.0 && self.y3 == 0.0 && self.xy != 0.0;
        s.flags.asymptotic = asym;
        Ok(s)
    }
}

pub fn graph_chart(n: usize) -> Result<GridChart> {
    GridChart::window(n, n, (-0.5, 0.5), (-0.5, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_residual(s: &SurfaceGrid) -> f64 {
        let (f, n) = (s.point_field(), s.normal_field().unwrap());
        let (fu, fv, nu, nv) = (f.d_u(s.chart.hu), f.d_v(s.chart.hv), n.d_u(s.chart.hu), n.d_v(s.chart.hv));
        let (k1, k2) = (s.kappa1.as_ref().unwrap(), s.kappa2.as_ref().unwrap());
        fu.valid_nodes()
            .map(|(i, j)| {
                let k = s.chart.idx(i, j);
                (nu.at(i, j) + fu.at(i, j) * k1[k]).norm().max((nv.at(i, j) + fv.at(i, j) * k2[k]).norm())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn torus_curvatures() {
        let s = torus(1.0, 3.0, torus_chart(33).unwrap()).unwrap();
        assert!(s.kappa1.as_ref().unwrap().iter().all(|k| (k - 1.0).abs() < 1e-14));
        assert!(fd_residual(&s) < 1e-3);
        assert!(!s.flags.umbilic);
    }

    #[test]
    fn sphere_is_umbilic() {
        let s = sphere(2.0, sphere_chart(9).unwrap()).unwrap();
        assert!(s.flags.umbilic);
        assert!((s.kappa2.as_ref().unwrap()[7] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_torus() {
        assert!(torus(3.0, 1.0, torus_chart(9).unwrap()).is_err());
    }

    #[test]
    fn ellipsoid_frame_is_consistent() {
        let e = Ellipsoid::new(1.0, 1.3, 1.7).unwrap();
        let s = e.surface(e.chart(33).unwrap()).unwrap();
        for p in &s.points {
            let q = p.x * p.x + p.y * p.y / 1.69 + p.z * p.z / 2.89;
            assert!((q - 1.0).abs() < 1e-12);
        }
        assert!(fd_residual(&s) < 1e-3);
        let coarse = e.surface(e.chart(17).unwrap()).unwrap();
        assert!(fd_residual(&s) < 0.3 * fd_residual(&coarse));
    }

    #[test]
    fn revolution_profiles() {
        let c = GridChart::window(17, 17, (-0.5, 0.5), (0.0, 1.0)).unwrap();
        let cat = revolution(Profile::Catenoid { c: 1.0 }, c.clone()).unwrap();
        // minimal: κ₁ + κ₂ = 0
        for (a, b) in cat.kappa1.as_ref().unwrap().iter().zip(cat.kappa2.as_ref().unwrap()) {
            assert!((a + b).abs() < 1e-12);
        }
        assert!(fd_residual(&cat) < 1e-2);
        let c = GridChart::window(17, 17, (0.5, 1.5), (0.0, 1.0)).unwrap();
        assert!(fd_residual(&revolution(Profile::Paraboloid, c).unwrap()) < 1e-2);
    }

    #[test]
    fn json_round_trip() {
        let s = torus(1.0, 3.0, torus_chart(7).unwrap()).unwrap();
        let back = SurfaceGrid::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        let g = Graph::quadric().surface(graph_chart(7).unwrap()).unwrap();
        let back = SurfaceGrid::from_json(&g.to_json()).unwrap();
        assert_eq!(g, back);
        assert!(back.flags.asymptotic);
    }

    #[test]
    fn json_rejects_bad_lengths() {
        let s = torus(1.0, 3.0, torus_chart(7).unwrap()).unwrap();
        let mut f = SurfaceFile::from(&s);
        f.points.pop();
        assert!(SurfaceGrid::try_from(f).is_err());
    }
}
