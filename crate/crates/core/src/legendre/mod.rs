//! Discrete Legendre maps: contact lifts of surfaces into the space of null
//! 2-planes, their focal frames and conjugate coefficients, the induced
//! conformal structure, and recovery of the point surface.

mod reparam;

use nalgebra::{DMatrix, DVector, Matrix2, Vector3, Vector4};

use crate::error::{GeomError, Node, Result};
use crate::grid::{Field, GridChart, Reality};
use crate::linalg::{fit2, kernel_vector, lstsq, orthonormal_columns, re, M6, V4, V6, C};
use crate::pseudo_linalg::{klein_plane_tol, lie, wedge, PseudoSpace};
use crate::surface::{Geometry, SurfaceGrid};

pub use reparam::{asymptotic_reparametrize, curvature_line_reparametrize, off_diagonal_ii, ReparamReport};

/// A Legendre map as its focal frame `(l, s)` over a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreGrid {
    pub space: PseudoSpace,
    pub chart: GridChart,
    pub l: Vec<V6>,
    pub s: Vec<V6>,
    /// Point sphere and tangent plane of a Lie lift.
    pub phi: Option<Vec<V6>>,
    pub nu_sphere: Option<Vec<V6>>,
    /// Nodes within this distance of the boundary carry placeholder data.
    pub margin: usize,
}

/// Largest violations of the Legendre-grid invariants over valid nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreResiduals {
    /// `⟨l,l⟩, ⟨s,s⟩, ⟨l,s⟩` relative to `|l||s|`.
    pub nullity: f64,
    /// `⟨dl, s⟩` relative to `|dl||s|`.
    pub contact: f64,
    /// Distance of `l_u`, `s_v` from `span{l, s}`, relative.
    pub focal: f64,
}

impl LegendreGrid {
    pub fn new(space: PseudoSpace, chart: GridChart, l: Vec<V6>, s: Vec<V6>) -> Result<Self> {
        chart.validate()?;
        if l.len() != chart.len() || s.len() != chart.len() {
            return Err(GeomError::InvalidInput("focal fields do not match the chart".into()));
        }
        Ok(Self { space, chart, l, s, phi: None, nu_sphere: None, margin: 0 })
    }

    pub fn l_field(&self) -> Field<V6> {
        Field { nu: self.chart.nu, nv: self.chart.nv, margin: self.margin, data: self.l.clone() }
    }

    pub fn s_field(&self) -> Field<V6> {
        Field { nu: self.chart.nu, nv: self.chart.nv, margin: self.margin, data: self.s.clone() }
    }

    pub fn residuals(&self) -> LegendreResiduals {
        let c = &self.chart;
        let (l, s) = (self.l_field(), self.s_field());
        let (lu, lv, su, sv) = (c.d_u(&l), c.d_v(&l), c.d_u(&s), c.d_v(&s));
        let sp = &self.space;
        let mut r = LegendreResiduals { nullity: 0.0, contact: 0.0, focal: 0.0 };
        for (i, j) in lu.valid_nodes() {
            let (a, b) = (l.at(i, j), s.at(i, j));
            let ab = a.norm() * b.norm();
            for z in [sp.pair(a, a) / re(a.norm_squared()), sp.pair(b, b) / re(b.norm_squared()), sp.pair(a, b) / re(ab)] {
                r.nullity = r.nullity.max(z.norm());
            }
            for (d, other) in [(lu.at(i, j), b), (lv.at(i, j), b), (su.at(i, j), a), (sv.at(i, j), a)] {
                let scale = d.norm().max(a.norm().min(b.norm())) * other.norm();
                if scale > 0.0 {
                    r.contact = r.contact.max(sp.pair(d, other).norm() / scale);
                }
            }
            for d in [lu.at(i, j), sv.at(i, j)] {
                if let Some((_, _, res)) = fit2(a, b, d) {
                    let scale = d.norm().max(a.norm().min(b.norm()));
                    r.focal = r.focal.max(res.norm() / scale);
                }
            }
        }
        r
    }
}

fn v6_from_lie(v0: f64, x: &Vector3<f64>, vm1: f64, vinf: f64) -> V6 {
    let mut v = V6::zeros();
    v[lie::V1] = re(x.x);
    v[lie::V2] = re(x.y);
    v[lie::V3] = re(x.z);
    v[lie::VM1] = re(vm1);
    v[lie::V0] = re(v0);
    v[lie::VINF] = re(vinf);
    v
}

/// Point sphere `φ = v₀ + 𝔣 + 𝔣²v_∞`.
pub fn point_sphere(f: &Vector3<f64>) -> V6 {
    v6_from_lie(1.0, f, 0.0, f.norm_squared())
}

/// Tangent plane `ν = v₋₁ + 𝔫 + 2(𝔫·𝔣)v_∞`.
pub fn tangent_plane(f: &Vector3<f64>, n: &Vector3<f64>) -> V6 {
    v6_from_lie(0.0, n, 1.0, 2.0 * n.dot(f))
}

fn umbilic_nodes(chart: &GridChart, margin: usize, k1: &[f64], k2: &[f64]) -> Vec<Node> {
    chart
        .interior(margin)
        .filter(|&(i, j)| {
            let k = chart.idx(i, j);
            crate::umbilic(k1[k], k2[k])
        })
        .collect()
}

/// Lie lift of a curvature-line parametrized surface: curvature spheres
/// `l = ν + κ₁φ`, `s = ν + κ₂φ` in `R^{4,2}`.
pub fn lie_lift(surface: &SurfaceGrid) -> Result<LegendreGrid> {
    if surface.geometry != Geometry::Euclidean3 {
        return Err(GeomError::InvalidInput("lie_lift needs a Euclidean surface".into()));
    }
    if surface.chart.reality != Reality::Real {
        return Err(GeomError::InvalidInput("lie_lift needs a real chart".into()));
    }
    let normals = surface.normals.as_ref().ok_or(GeomError::MissingField("normals"))?;
    let k1 = surface.kappa1.as_ref().ok_or(GeomError::MissingField("kappa1"))?;
    let k2 = surface.kappa2.as_ref().ok_or(GeomError::MissingField("kappa2"))?;
    let umb = umbilic_nodes(&surface.chart, surface.margin, k1, k2);
    if !umb.is_empty() {
        return Err(GeomError::Umbilic { nodes: umb });
    }
    let n = surface.chart.len();
    let (mut l, mut s, mut phi, mut nu) =
        (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let p = point_sphere(&surface.points[k]);
        let t = tangent_plane(&surface.points[k], &normals[k]);
        l.push(t + p * re(k1[k]));
        s.push(t + p * re(k2[k]));
        phi.push(p);
        nu.push(t);
    }
    let mut g = LegendreGrid::new(PseudoSpace::lie(), surface.chart.clone(), l, s)?;
    g.phi = Some(phi);
    g.nu_sphere = Some(nu);
    g.margin = surface.margin;
    Ok(g)
}

fn lift_c(surface: &SurfaceGrid) -> Field<V4> {
    let f = surface.lift_field();
    Field { nu: f.nu, nv: f.nv, margin: f.margin, data: f.data.iter().map(|x| x.map(re)).collect() }
}

/// Residual of `𝔣_uu, 𝔣_vv ∈ span{𝔣, 𝔣_u, 𝔣_v}`, relative, with its worst
/// node.  Small exactly when the chart is asymptotic.
pub fn asymptotic_residual(surface: &SurfaceGrid) -> Result<(f64, Node)> {
    if surface.geometry != Geometry::Projective3 {
        return Err(GeomError::InvalidInput("asymptotic residual needs a projective surface".into()));
    }
    let c = &surface.chart;
    let f = lift_c(surface);
    let (fu, fv, fuu, fvv) = (c.d_u(&f), c.d_v(&f), c.d_uu(&f), c.d_vv(&f));
    let mut worst = (0.0, (0, 0));
    for (i, j) in fuu.valid_nodes() {
        let a = DMatrix::from_fn(4, 3, |r, k| [f.at(i, j), fu.at(i, j), fv.at(i, j)][k][r]);
        for y in [fuu.at(i, j), fvv.at(i, j)] {
            let yv = DVector::from_fn(4, |r, _| y[r]);
            let Some((_, res)) = lstsq(&a, &yv) else {
                return Err(GeomError::NotImmersed { nodes: vec![(i, j)] });
            };
            let rel = res / (y.norm() + fu.at(i, j).norm().min(fv.at(i, j).norm()));
            if rel > worst.0 {
                worst = (rel, (i, j));
            }
        }
    }
    Ok(worst)
}

/// Tolerance on the relative asymptotic residual accepted by [`proj_lift`].
pub const ASYMPTOTIC_TOL: f64 = 1e-2;

/// Projective contact lift `l = 𝔣∧𝔣_u`, `s = 𝔣∧𝔣_v` into the Plücker
/// space, for a surface given in asymptotic coordinates.
pub fn proj_lift(surface: &SurfaceGrid) -> Result<LegendreGrid> {
    let (res, node) = asymptotic_residual(surface)?;
    if res > ASYMPTOTIC_TOL {
        return Err(GeomError::NotAsymptotic { residual: res, node });
    }
    let c = &surface.chart;
    let f = lift_c(surface);
    let (fu, fv) = (c.d_u(&f), c.d_v(&f));
    let mut bad = Vec::new();
    let mut l = Vec::with_capacity(c.len());
    let mut s = Vec::with_capacity(c.len());
    for i in 0..c.nu {
        for j in 0..c.nv {
            let x = f.at(i, j);
            let (a, b) = (wedge(x, fu.at(i, j)), wedge(x, fv.at(i, j)));
            if fu.is_valid(i, j) {
                let scale = x.norm() * (fu.at(i, j).norm() + fv.at(i, j).norm());
                let m = DMatrix::from_fn(4, 3, |r, k| [x, fu.at(i, j), fv.at(i, j)][k][r]);
                let sv = m.singular_values();
                if scale == 0.0 || a.norm() < 1e-10 * scale || b.norm() < 1e-10 * scale || sv.min() < 1e-10 * sv.max() {
                    bad.push((i, j));
                }
            }
            l.push(a);
            s.push(b);
        }
    }
    if !bad.is_empty() {
        return Err(GeomError::NotImmersed { nodes: bad });
    }
    let mut g = LegendreGrid::new(PseudoSpace::plucker(), c.clone(), l, s)?;
    g.margin = fu.margin;
    Ok(g)
}

/// Rescales each homogeneous lift so its first coordinate is 1 where that
/// coordinate is not tiny, and to unit length otherwise.
pub fn normalize_lift(surface: &SurfaceGrid) -> SurfaceGrid {
    let mut out = surface.clone();
    for x in out.lift.iter_mut() {
        let n = x.norm();
        if x[0].abs() > 1e-8 * n {
            *x /= x[0];
        } else if n > 0.0 {
            *x /= n;
        }
    }
    out
}

/// Coordinates on `π⊥/π` for a null 2-plane `π = span{a, b}`.
struct Quotient {
    w: [V6; 2],
    gw_inv: Matrix2<C>,
}

impl Quotient {
    fn new(a: &V6, b: &V6, space: &PseudoSpace) -> Option<Self> {
        // oblique projection onto π⊥ along g⁻¹·conj(π)
        let x = [space.gram_inv * a.conjugate(), space.gram_inv * b.conjugate()];
        let basis = [a, b];
        let h = Matrix2::from_fn(|i, j| space.pair(&x[i], basis[j]));
        let h_inv = h.transpose().try_inverse()?;
        let mut cols: Vec<V6> = vec![*a, *b];
        for k in 0..6 {
            let mut e = V6::zeros();
            e[k] = re(1.0);
            let rhs = nalgebra::Vector2::new(space.pair(&e, a), space.pair(&e, b));
            let c = h_inv * rhs;
            cols.push(e - x[0] * c[0] - x[1] * c[1]);
        }
        let m = DMatrix::from_fn(6, cols.len(), |i, j| cols[j][i]);
        let q = orthonormal_columns(&m, 1e-8);
        if q.ncols() < 4 {
            return None;
        }
        let w = [V6::from_fn(|i, _| q[(i, 2)]), V6::from_fn(|i, _| q[(i, 3)])];
        let gw = Matrix2::from_fn(|i, j| space.pair(&w[i], &w[j]));
        Some(Self { w, gw_inv: gw.try_inverse()? })
    }

    fn coords(&self, y: &V6, space: &PseudoSpace) -> nalgebra::Vector2<C> {
        self.gw_inv * nalgebra::Vector2::new(space.pair(y, &self.w[0]), space.pair(y, &self.w[1]))
    }
}

/// Recovers the focal frame of a Legendre map given by an arbitrary pair of
/// null frame fields `(a, b)`: `l` spans the kernel of `f_u` and `s` that of
/// `f_v`, both modulo `f`.
pub fn focal_frame(space: &PseudoSpace, chart: &GridChart, a: &[V6], b: &[V6]) -> Result<LegendreGrid> {
    let grid = LegendreGrid::new(space.clone(), chart.clone(), a.to_vec(), b.to_vec())?;
    let (af, bf) = (grid.l_field(), grid.s_field());
    let (au, bu, av, bv) = (chart.d_u4(&af), chart.d_u4(&bf), chart.d_v4(&af), chart.d_v4(&bf));
    let n = chart.len();
    let mut mats = vec![None; n];
    let mut flat = Vec::new();
    for (i, j) in au.valid_nodes() {
        let q = Quotient::new(af.at(i, j), bf.at(i, j), space).ok_or(GeomError::IllConditioned { node: (i, j) })?;
        let mu = nalgebra::Matrix2::from_columns(&[q.coords(au.at(i, j), space), q.coords(bu.at(i, j), space)]);
        let mv = nalgebra::Matrix2::from_columns(&[q.coords(av.at(i, j), space), q.coords(bv.at(i, j), space)]);
        let scale = af.at(i, j).norm() + bf.at(i, j).norm();
        if mu.norm() < 1e-10 * scale || mv.norm() < 1e-10 * scale {
            flat.push((i, j));
        }
        mats[chart.idx(i, j)] = Some((mu, mv));
    }
    if !flat.is_empty() {
        return Err(GeomError::NotImmersed { nodes: flat });
    }
    let (ci, cj) = chart.center();
    let (mu0, mv0) = mats[chart.idx(ci, cj)].ok_or(GeomError::InvalidInput("grid too small".into()))?;
    // fix which row supplies the kernel formula at the centre so the
    // coefficients vary smoothly
    let row_u = if mu0.row(0).norm() >= mu0.row(1).norm() { 0 } else { 1 };
    let row_v = if mv0.row(0).norm() >= mv0.row(1).norm() { 0 } else { 1 };
    let kernel = |m: &Matrix2<C>, row: usize| -> (C, C) {
        let r = if m.row(row).norm() > 1e-3 * m.norm() { row } else { 1 - row };
        (-m[(r, 1)], m[(r, 0)])
    };
    let mut l = a.to_vec();
    let mut s = b.to_vec();
    for (i, j) in au.valid_nodes() {
        let k = chart.idx(i, j);
        let (mu, mv) = mats[k].unwrap();
        let two_dim = |m: &Matrix2<C>| {
            let sv = m.singular_values();
            sv.max() < 1e-8 * (a[k].norm() + b[k].norm())
        };
        if two_dim(&mu) || two_dim(&mv) {
            return Err(GeomError::DegenerateConformal { nodes: vec![(i, j)] });
        }
        let (x, y) = kernel(&mu, row_u);
        let (z, w) = kernel(&mv, row_v);
        l[k] = a[k] * x + b[k] * y;
        s[k] = a[k] * z + b[k] * w;
    }
    let mut g = LegendreGrid::new(space.clone(), chart.clone(), l, s)?;
    g.margin = au.margin;
    Ok(g)
}

/// Coefficients of `l_u = *l + p s` and `s_v = q l + *s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateCoefficients {
    pub p: Field<C>,
    pub q: Field<C>,
    /// Regression residual of the two fits, relative.
    pub residual: f64,
}

impl ConjugateCoefficients {
    pub fn pq(&self) -> Field<C> {
        Field {
            nu: self.p.nu,
            nv: self.p.nv,
            margin: self.p.margin,
            data: self.p.data.iter().zip(&self.q.data).map(|(a, b)| a * b).collect(),
        }
    }
}

pub fn conjugate_coefficients(f: &LegendreGrid) -> Result<ConjugateCoefficients> {
    let c = &f.chart;
    let (l, s) = (f.l_field(), f.s_field());
    let (lu, sv) = (c.d_u4(&l), c.d_v4(&s));
    let mut p = Field::constant(c.nu, c.nv, C::new(0.0, 0.0)).with_margin(lu.margin);
    let mut q = p.clone();
    let mut residual: f64 = 0.0;
    for (i, j) in lu.valid_nodes() {
        let (a, b) = (l.at(i, j), s.at(i, j));
        let (_, pp, r1) = fit2(a, b, lu.at(i, j)).ok_or(GeomError::IllConditioned { node: (i, j) })?;
        let (qq, _, r2) = fit2(a, b, sv.at(i, j)).ok_or(GeomError::IllConditioned { node: (i, j) })?;
        let scale = a.norm().min(b.norm());
        residual = residual.max(r1.norm().max(r2.norm()) / (scale + lu.at(i, j).norm().max(sv.at(i, j).norm())));
        p.set(i, j, pp);
        q.set(i, j, qq);
    }
    Ok(ConjugateCoefficients { p, q, residual })
}

/// Signature of the induced conformal structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConformalSignature {
    #[serde(rename = "(1,1)")]
    Lorentz,
    #[serde(rename = "(2,0)")]
    Definite,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalStructure {
    /// Per-node form `[[det f_u, m/2], [m/2, det f_v]]` on the null
    /// coordinate directions, up to a per-node scale.
    pub form: Field<[[C; 2]; 2]>,
    pub signature: ConformalSignature,
    /// `max(|det f_u|, |det f_v|) / |m|` over valid nodes.
    pub null_residual: f64,
}

/// The conformal structure `Z ↦ det df(Z)` with `df(Z) ∈ Hom(π, π⊥/π)`.
pub fn conformal_structure(f: &LegendreGrid) -> Result<ConformalStructure> {
    let c = &f.chart;
    let sp = &f.space;
    let (l, s) = (f.l_field(), f.s_field());
    let (lu, lv, su, sv) = (c.d_u(&l), c.d_v(&l), c.d_u(&s), c.d_v(&s));
    let zero = [[C::new(0.0, 0.0); 2]; 2];
    let mut form = Field::constant(c.nu, c.nv, zero).with_margin(lu.margin);
    let mut degenerate = Vec::new();
    let mut null_residual: f64 = 0.0;
    let mut signs = (0usize, 0usize);
    for (i, j) in lu.valid_nodes() {
        let q = Quotient::new(l.at(i, j), s.at(i, j), sp).ok_or(GeomError::IllConditioned { node: (i, j) })?;
        let mu = Matrix2::from_columns(&[q.coords(lu.at(i, j), sp), q.coords(su.at(i, j), sp)]);
        let mv = Matrix2::from_columns(&[q.coords(lv.at(i, j), sp), q.coords(sv.at(i, j), sp)]);
        let (du, dv) = (mu.determinant(), mv.determinant());
        let m = (mu + mv).determinant() - du - dv;
        let scale = mu.norm() * mv.norm();
        if m.norm() <= 1e-8 * scale || scale == 0.0 {
            degenerate.push((i, j));
            continue;
        }
        null_residual = null_residual.max(du.norm().max(dv.norm()) / m.norm());
        let h = [[du, m * 0.5], [m * 0.5, dv]];
        form.set(i, j, h);
        // real tangent form: (∂u, ∂v) on a real chart, (∂x, ∂y) otherwise
        let real_form = match c.reality {
            Reality::Real => h,
            Reality::ComplexConjugate => {
                let ev = |a: C, b: C| du * a * a + m * a * b + dv * b * b;
                let i1 = C::new(0.0, 1.0);
                let qx = ev(re(1.0), re(1.0));
                let qy = ev(i1, -i1);
                let qxy = (ev(re(1.0) + i1, re(1.0) - i1) - qx - qy) * 0.5;
                [[qx, qxy], [qxy, qy]]
            }
        };
        let phase = [real_form[0][0], real_form[0][1], real_form[1][1]]
            .into_iter()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        let unit = phase.conj() / phase.norm();
        let det = ((real_form[0][0] * unit).re * (real_form[1][1] * unit).re) - (real_form[0][1] * unit).re.powi(2);
        if det < 0.0 {
            signs.0 += 1;
        } else {
            signs.1 += 1;
        }
    }
    if !degenerate.is_empty() {
        return Err(GeomError::DegenerateConformal { nodes: degenerate });
    }
    let signature = if signs.0 >= signs.1 { ConformalSignature::Lorentz } else { ConformalSignature::Definite };
    Ok(ConformalStructure { form, signature, null_residual })
}

/// Point surface recovered from a Legendre map, with flagged nodes where
/// the recovery is singular.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSurface {
    pub surface: SurfaceGrid,
    pub singular: Vec<Node>,
}

pub fn point_surface(f: &LegendreGrid) -> Result<PointSurface> {
    match f.space.signature() {
        (4, 2) => point_surface_lie(f),
        _ => point_surface_projective(f),
    }
}

fn point_surface_lie(f: &LegendreGrid) -> Result<PointSurface> {
    let c = &f.chart;
    let mut singular = Vec::new();
    let mut pts = Vec::with_capacity(c.len());
    let mut nrm = Vec::with_capacity(c.len());
    for i in 0..c.nu {
        for j in 0..c.nv {
            let k = c.idx(i, j);
            let (l, s) = (&f.l[k], &f.s[k]);
            // point sphere: v₋₁ coefficient zero; tangent plane: v₀ coefficient zero
            let p = l * s[lie::VM1] - s * l[lie::VM1];
            let t = l * s[lie::V0] - s * l[lie::V0];
            let scale = l.norm() * s.norm();
            let ok_p = p[lie::V0].norm() > 1e-8 * scale;
            let ok_t = t[lie::VM1].norm() > 1e-8 * scale;
            if !ok_p {
                singular.push((i, j));
                pts.push(Vector3::repeat(f64::NAN));
            } else {
                let inv = p[lie::V0].inv();
                pts.push(Vector3::new((p[lie::V1] * inv).re, (p[lie::V2] * inv).re, (p[lie::V3] * inv).re));
            }
            if ok_t {
                let inv = t[lie::VM1].inv();
                nrm.push(Vector3::new((t[lie::V1] * inv).re, (t[lie::V2] * inv).re, (t[lie::V3] * inv).re));
            } else {
                nrm.push(Vector3::repeat(f64::NAN));
            }
        }
    }
    let mut surface = SurfaceGrid::euclidean(c.clone(), pts, Some(nrm))?;
    surface.margin = f.margin;
    let pf = surface.point_field();
    let (fu, fv) = (pf.d_u(c.hu), pf.d_v(c.hv));
    for (i, j) in fu.valid_nodes() {
        let (a, b) = (fu.at(i, j), fv.at(i, j));
        let cross = a.cross(b).norm();
        let bad = !cross.is_finite() || cross <= 1e-6 * (a.norm_squared() + b.norm_squared());
        if bad && !singular.contains(&(i, j)) {
            singular.push((i, j));
        }
    }
    singular.sort_unstable();
    Ok(PointSurface { surface, singular })
}

/// Decomposability tolerance for focal lines in point recovery; lines built
/// by differencing are null only up to truncation error.
const LINE_TOL: f64 = 1e-4;

fn point_surface_projective(f: &LegendreGrid) -> Result<PointSurface> {
    let c = &f.chart;
    let mut singular = Vec::new();
    let mut lift = Vec::with_capacity(c.len());
    for i in 0..c.nu {
        for j in 0..c.nv {
            let k = c.idx(i, j);
            let (pl, ps) = match (klein_plane_tol(&f.l[k], LINE_TOL), klein_plane_tol(&f.s[k], LINE_TOL)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    singular.push((i, j));
                    lift.push(Vector4::repeat(f64::NAN));
                    continue;
                }
            };
            let [x1, y1] = pl.basis;
            let [x2, y2] = ps.basis;
            let m = DMatrix::from_fn(4, 4, |r, col| match col {
                0 => x1[r] / re(x1.norm()),
                1 => y1[r] / re(y1.norm()),
                2 => -x2[r] / re(x2.norm()),
                _ => -y2[r] / re(y2.norm()),
            });
            let (v, gap) = kernel_vector(&m);
            if gap > 1e-3 {
                singular.push((i, j));
            }
            let p: V4 = x1 * (v[0] / re(x1.norm())) + y1 * (v[1] / re(y1.norm()));
            lift.push(real_homogeneous(&p));
        }
    }
    let mut surface = SurfaceGrid::projective(c.clone(), lift)?;
    surface.margin = f.margin;
    Ok(PointSurface { surface, singular })
}

/// Real representative of a complex homogeneous vector that is real up to
/// an overall factor; normalized like [`normalize_lift`].
fn real_homogeneous(p: &V4) -> Vector4<f64> {
    let big = (0..4).max_by(|&a, &b| p[a].norm().total_cmp(&p[b].norm())).unwrap();
    let n = p.norm();
    let q = p / p[big];
    if q[0].norm() > 1e-8 {
        let r = q / q[0];
        Vector4::new(r[0].re, r[1].re, r[2].re, r[3].re)
    } else {
        let v = Vector4::new(q[0].re, q[1].re, q[2].re, q[3].re);
        if n == 0.0 {
            v
        } else {
            v / v.norm()
        }
    }
}

/// Parallel surface `𝔣 + t𝔫`; principal curvatures become `κ/(1 - tκ)`.
pub fn normal_shift(surface: &SurfaceGrid, t: f64) -> Result<SurfaceGrid> {
    if surface.geometry != Geometry::Euclidean3 {
        return Err(GeomError::InvalidInput("normal shift needs a Euclidean surface".into()));
    }
    let normals = surface.normals.as_ref().ok_or(GeomError::MissingField("normals"))?;
    let mut out = surface.clone();
    for (p, n) in out.points.iter_mut().zip(normals) {
        *p += n * t;
    }
    for kappa in [&mut out.kappa1, &mut out.kappa2].into_iter().flatten() {
        for (k, x) in kappa.iter_mut().enumerate() {
            let d = 1.0 - t * *x;
            if d.abs() < 1e-10 {
                let node = (k / out.chart.nv, k % out.chart.nv);
                return Err(GeomError::FocalValue { value: d, node });
            }
            *x /= d;
        }
    }
    Ok(out)
}

/// The Lie sphere transformation realizing the normal shift by `t` on
/// contact elements: sphere radii decrease by `t`.
pub fn normal_shift_matrix(t: f64) -> M6 {
    let mut m = M6::identity();
    // columns are images of basis vectors
    m[(lie::VM1, lie::V0)] = re(-t);
    m[(lie::VINF, lie::V0)] = re(-t * t);
    m[(lie::VINF, lie::VM1)] = re(2.0 * t);
    m
}

/// Applies a pairing-preserving map to the focal frame.
pub fn apply_group(f: &LegendreGrid, g: &M6) -> Result<LegendreGrid> {
    let defect = f.space.isometry_defect(g);
    if defect > 1e-10 {
        return Err(GeomError::NotIsometry { defect });
    }
    let mut out = f.clone();
    out.l = f.l.iter().map(|x| g * x).collect();
    out.s = f.s.iter().map(|x| g * x).collect();
    out.phi = None;
    out.nu_sphere = None;
    Ok(out)
}

/// Fitted principal curvatures and the curvature-line residual.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalReport {
    /// `max |𝔫_u + κ₁𝔣_u| / |𝔫_u|` and its `v` counterpart.
    pub residual: f64,
    pub worst: Node,
}

/// Residual above which a chart is rejected as not curvature-line aligned.
pub const CURVATURE_LINE_TOL: f64 = 1e-2;

/// Fits `κᵢ` from `𝔫_u ≈ -κ₁𝔣_u`, `𝔫_v ≈ -κ₂𝔣_v` using fourth-order
/// differences.  The boundary layer keeps the nearest interior value and is
/// marked by the output margin.
pub fn principal_data(surface: &SurfaceGrid) -> Result<(SurfaceGrid, PrincipalReport)> {
    if surface.geometry != Geometry::Euclidean3 {
        return Err(GeomError::InvalidInput("principal data needs a Euclidean surface".into()));
    }
    let c = &surface.chart;
    let (f, n) = (surface.point_field(), surface.normal_field()?);
    let (fu, fv, nu, nv) = (f.d_u4(c.hu), f.d_v4(c.hv), n.d_u4(c.hu), n.d_v4(c.hv));
    let margin = fu.margin;
    let mut k1 = vec![0.0; c.len()];
    let mut k2 = vec![0.0; c.len()];
    let mut report = PrincipalReport { residual: 0.0, worst: (margin, margin) };
    let mut flat = Vec::new();
    for (i, j) in fu.valid_nodes() {
        let (a, b) = (fu.at(i, j), fv.at(i, j));
        if a.cross(b).norm() <= 1e-10 * (a.norm_squared() + b.norm_squared()) {
            flat.push((i, j));
            continue;
        }
        let x = -nu.at(i, j).dot(a) / a.norm_squared();
        let y = -nv.at(i, j).dot(b) / b.norm_squared();
        let r1 = (nu.at(i, j) + a * x).norm() / (nu.at(i, j).norm() + 1e-300);
        let r2 = (nv.at(i, j) + b * y).norm() / (nv.at(i, j).norm() + 1e-300);
        if r1.max(r2) > report.residual {
            report.residual = r1.max(r2);
            report.worst = (i, j);
        }
        k1[c.idx(i, j)] = x;
        k2[c.idx(i, j)] = y;
    }
    if !flat.is_empty() {
        return Err(GeomError::NotImmersed { nodes: flat });
    }
    if report.residual > CURVATURE_LINE_TOL {
        return Err(GeomError::NotCurvatureLine { residual: report.residual, node: report.worst });
    }
    let umb: Vec<Node> = fu
        .valid_nodes()
        .filter(|&(i, j)| {
            let near = [(0i64, 0i64), (1, 0), (-1, 0), (0, 1), (0, -1)];
            near.iter().all(|&(di, dj)| {
                let (a, b) = ((i as i64 + di) as usize, (j as i64 + dj) as usize);
                !fu.is_valid(a, b) || crate::umbilic(k1[c.idx(a, b)], k2[c.idx(a, b)])
            })
        })
        .collect();
    if !umb.is_empty() {
        return Err(GeomError::Umbilic { nodes: umb });
    }
    for i in 0..c.nu {
        for j in 0..c.nv {
            if !fu.is_valid(i, j) {
                let a = i.clamp(margin, c.nu - 1 - margin);
                let b = j.clamp(margin, c.nv - 1 - margin);
                k1[c.idx(i, j)] = k1[c.idx(a, b)];
                k2[c.idx(i, j)] = k2[c.idx(a, b)];
            }
        }
    }
    let mut out = surface.clone();
    out.kappa1 = Some(k1);
    out.kappa2 = Some(k2);
    out.margin = margin;
    out.flags.curvature_line = true;
    Ok((out, report))
}

/// Hermitian angle between the lines of two six-vectors.
pub fn line_angle(a: &V6, b: &V6) -> f64 {
    crate::linalg::line_angle(a, b)
}

#[cfg(test)]
mod tests;
