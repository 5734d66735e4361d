//! Resampling a surface onto curvature-line or asymptotic coordinates by
//! integrating the two direction fields from a seed at the chart centre.

use nalgebra::{Matrix2, Vector2, Vector3, Vector4};

use crate::error::{GeomError, Result};
use crate::grid::{Field, GridChart, Linear, Reality};
use crate::surface::{Geometry, SurfaceGrid};

const STENCIL: usize = 6;
const SUBSTEPS: usize = 4;

/// Quality of a reparametrized chart, measured on the output grid with
/// fourth-order differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReparamReport {
    /// Curvature lines: `max |II_uv| / |II|`.  Asymptotic:
    /// `max(|II_uu|, |II_vv|) / |II_uv|`.
    pub residual: f64,
}

/// Lagrange weights (value, first, second derivative) on nodes `0..6` at
/// local coordinate `x`.
fn weights(x: f64) -> [[f64; STENCIL]; 3] {
    let mut w = [[0.0; STENCIL]; 3];
    for a in 0..STENCIL {
        let denom: f64 = (0..STENCIL).filter(|&b| b != a).map(|b| a as f64 - b as f64).product();
        let others: Vec<usize> = (0..STENCIL).filter(|&b| b != a).collect();
        let prod = |skip: &[usize]| -> f64 {
            others.iter().filter(|b| !skip.contains(b)).map(|&b| x - b as f64).product()
        };
        w[0][a] = prod(&[]) / denom;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &c in &others {
            d1 += prod(&[c]);
            for &d in &others {
                if d != c {
                    d2 += prod(&[c, d]);
                }
            }
        }
        w[1][a] = d1 / denom;
        w[2][a] = d2 / denom;
    }
    w
}

/// Local degree-5 tensor interpolation of node data.
struct Patch<'a> {
    chart: &'a GridChart,
}

/// Value and partial derivatives `(f, f_x, f_y, f_xx, f_xy, f_yy)`.
type Jet<T> = [T; 6];

impl<'a> Patch<'a> {
    fn inside(&self, p: &Vector2<f64>) -> bool {
        let c = self.chart;
        let (xu, xv) = ((p.x - c.u0) / c.hu, (p.y - c.v0) / c.hv);
        let tol = 1e-6;
        xu >= -tol && xv >= -tol && xu <= (c.nu - 1) as f64 + tol && xv <= (c.nv - 1) as f64 + tol
    }

    fn nearest(&self, p: &Vector2<f64>) -> (usize, usize) {
        let c = self.chart;
        let i = ((p.x - c.u0) / c.hu).round().clamp(0.0, (c.nu - 1) as f64) as usize;
        let j = ((p.y - c.v0) / c.hv).round().clamp(0.0, (c.nv - 1) as f64) as usize;
        (i, j)
    }

    fn eval<T: Linear>(&self, data: &[T], p: &Vector2<f64>) -> Result<Jet<T>> {
        if !self.inside(p) {
            return Err(GeomError::StreamlineExit { at: (p.x, p.y) });
        }
        let c = self.chart;
        let base = |x: f64, n: usize| -> (usize, f64) {
            let b = (x.floor() as i64 - 2).clamp(0, n as i64 - STENCIL as i64) as usize;
            (b, x - b as f64)
        };
        let (iu, xu) = base((p.x - c.u0) / c.hu, c.nu);
        let (iv, xv) = base((p.y - c.v0) / c.hv, c.nv);
        let (wu, wv) = (weights(xu), weights(xv));
        let zero = data[0].zero_like();
        let mut out: Jet<T> = [zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero.clone(), zero];
        // (u-order, v-order) per jet slot
        let orders = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];
        let scale = [1.0, 1.0 / c.hu, 1.0 / c.hv, 1.0 / (c.hu * c.hu), 1.0 / (c.hu * c.hv), 1.0 / (c.hv * c.hv)];
        for a in 0..STENCIL {
            for b in 0..STENCIL {
                let v = &data[c.idx(iu + a, iv + b)];
                for (k, &(ou, ov)) in orders.iter().enumerate() {
                    let w = wu[ou][a] * wv[ov][b] * scale[k];
                    if w != 0.0 {
                        out[k] = out[k].plus(&v.scale(w));
                    }
                }
            }
        }
        Ok(out)
    }
}

/// The two direction fields, each normalized so that a fixed chart
/// coordinate advances at unit rate.
trait Directions {
    fn at(&self, p: &Vector2<f64>) -> Result<[Vector2<f64>; 2]>;
}

fn normalized(d: Vector2<f64>, axis: usize, p: &Vector2<f64>) -> Result<Vector2<f64>> {
    if d[axis].abs() < 1e-6 * d.norm() || d.norm() == 0.0 {
        return Err(GeomError::StreamlineExit { at: (p.x, p.y) });
    }
    Ok(d / d[axis])
}

struct Principal<'a> {
    patch: Patch<'a>,
    points: &'a [Vector3<f64>],
    normals: &'a [Vector3<f64>],
    larger_first: bool,
    axes: [usize; 2],
}

impl Principal<'_> {
    /// Shape operator eigen data `(κ₁, κ₂, d₁, d₂)` in chart directions.
    fn eigen(&self, p: &Vector2<f64>) -> Result<(f64, f64, Vector2<f64>, Vector2<f64>)> {
        let f = self.patch.eval(self.points, p)?;
        let n = self.patch.eval(self.normals, p)?;
        shape_eigen(&f, &n, self.larger_first, p)
    }
}

fn shape_eigen(
    f: &Jet<Vector3<f64>>,
    n: &Jet<Vector3<f64>>,
    larger_first: bool,
    p: &Vector2<f64>,
) -> Result<(f64, f64, Vector2<f64>, Vector2<f64>)> {
    let (fx, fy, nx, ny) = (&f[1], &f[2], &n[1], &n[2]);
    let first = Matrix2::new(fx.dot(fx), fx.dot(fy), fx.dot(fy), fy.dot(fy));
    let m = -0.5 * (nx.dot(fy) + ny.dot(fx));
    let second = Matrix2::new(-nx.dot(fx), m, m, -ny.dot(fy));
    let w = first.try_inverse().ok_or(GeomError::StreamlineExit { at: (p.x, p.y) })? * second;
    let (tr, det) = (w.trace(), w.determinant());
    let disc = tr * tr - 4.0 * det;
    let (ka, kb) = (0.5 * (tr + disc.max(0.0).sqrt()), 0.5 * (tr - disc.max(0.0).sqrt()));
    if crate::umbilic(ka, kb) {
        return Err(GeomError::Umbilic { nodes: vec![] });
    }
    let vec_for = |k: f64| {
        let a = Vector2::new(w[(0, 1)], k - w[(0, 0)]);
        let b = Vector2::new(k - w[(1, 1)], w[(1, 0)]);
        if a.norm() >= b.norm() {
            a
        } else {
            b
        }
    };
    let (k1, k2) = if larger_first { (ka, kb) } else { (kb, ka) };
    Ok((k1, k2, vec_for(k1), vec_for(k2)))
}

impl Directions for Principal<'_> {
    fn at(&self, p: &Vector2<f64>) -> Result<[Vector2<f64>; 2]> {
        let (_, _, d1, d2) = self.eigen(p)?;
        Ok([normalized(d1, self.axes[0], p)?, normalized(d2, self.axes[1], p)?])
    }
}

struct Asymptotic<'a> {
    patch: Patch<'a>,
    lift: &'a [Vector4<f64>],
    swap: bool,
    axes: [usize; 2],
}

/// Projective second fundamental form `II_ij = det(𝔣, 𝔣_x, 𝔣_y, 𝔣_ij)`.
fn projective_ii(f: &Jet<Vector4<f64>>) -> (f64, f64, f64) {
    let det = |x: &Vector4<f64>| nalgebra::Matrix4::from_columns(&[f[0], f[1], f[2], *x]).determinant();
    (det(&f[3]), det(&f[4]), det(&f[5]))
}

/// The two asymptotic directions of `L dx² + 2M dx dy + N dy²`, in a
/// globally consistent order (the `+√D` family first).
fn asymptotic_pair(l: f64, m: f64, n: f64) -> Option<[Vector2<f64>; 2]> {
    let d = m * m - l * n;
    if d <= 1e-12 * (l * l + m * m + n * n) {
        return None;
    }
    let r = d.sqrt();
    let pick = |a: Vector2<f64>, b: Vector2<f64>| if a.norm() >= b.norm() { a } else { b };
    Some([pick(Vector2::new(-m + r, l), Vector2::new(n, -m - r)), pick(Vector2::new(-m - r, l), Vector2::new(n, -m + r))])
}

impl Directions for Asymptotic<'_> {
    fn at(&self, p: &Vector2<f64>) -> Result<[Vector2<f64>; 2]> {
        let f = self.patch.eval(self.lift, p)?;
        let (l, m, n) = projective_ii(&f);
        let [a, b] = asymptotic_pair(l, m, n).ok_or(GeomError::Signature { node: self.patch.nearest(p) })?;
        let (d1, d2) = if self.swap { (b, a) } else { (a, b) };
        Ok([normalized(d1, self.axes[0], p)?, normalized(d2, self.axes[1], p)?])
    }
}

/// Flow of direction field `k` for parameter time `t` (RK4).
fn flow(dirs: &dyn Directions, k: usize, p: Vector2<f64>, t: f64, substeps: usize) -> Result<Vector2<f64>> {
    let h = t / substeps as f64;
    let mut x = p;
    for _ in 0..substeps {
        let k1 = dirs.at(&x)?[k];
        let k2 = dirs.at(&(x + k1 * (0.5 * h)))?[k];
        let k3 = dirs.at(&(x + k2 * (0.5 * h)))?[k];
        let k4 = dirs.at(&(x + k3 * h))?[k];
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    Ok(x)
}

/// Intersection of the field-0 curve through `a` with the field-1 curve
/// through `b`, starting from parameter guesses `(s0, t0)`.
fn intersect(dirs: &dyn Directions, a: Vector2<f64>, b: Vector2<f64>, s0: f64, t0: f64) -> Result<Vector2<f64>> {
    let (mut s, mut t) = (s0, t0);
    let scale = s0.abs() + t0.abs();
    for _ in 0..40 {
        let pa = flow(dirs, 0, a, s, SUBSTEPS)?;
        let pb = flow(dirs, 1, b, t, SUBSTEPS)?;
        let r = pa - pb;
        if r.norm() <= 1e-14 * (1.0 + scale) {
            return Ok(pa);
        }
        let (da, db) = (dirs.at(&pa)?[0], dirs.at(&pb)?[1]);
        let j = Matrix2::from_columns(&[da, -db]);
        let step = j.try_inverse().ok_or(GeomError::StreamlineExit { at: (pa.x, pa.y) })? * r;
        s -= step.x;
        t -= step.y;
    }
    let pa = flow(dirs, 0, a, s, SUBSTEPS)?;
    Ok(pa)
}

/// Chart-parameter positions of the output nodes.
fn march(dirs: &dyn Directions, out: &GridChart, axes: [usize; 2]) -> Result<Vec<Vector2<f64>>> {
    let (ic, jc) = out.center();
    let mut seed = Vector2::zeros();
    seed[axes[0]] = out.u(ic);
    seed[axes[1]] = out.v(jc);
    let mut pos = vec![Vector2::zeros(); out.len()];
    pos[out.idx(ic, jc)] = seed;
    for i in (0..ic).rev().chain(ic + 1..out.nu) {
        let prev = if i < ic { i + 1 } else { i - 1 };
        let h = out.u(i) - out.u(prev);
        pos[out.idx(i, jc)] = flow(dirs, 0, pos[out.idx(prev, jc)], h, SUBSTEPS)?;
    }
    for j in (0..jc).rev().chain(jc + 1..out.nv) {
        let prev = if j < jc { j + 1 } else { j - 1 };
        let h = out.v(j) - out.v(prev);
        pos[out.idx(ic, j)] = flow(dirs, 1, pos[out.idx(ic, prev)], h, SUBSTEPS)?;
    }
    let is: Vec<usize> = (0..ic).rev().chain(ic + 1..out.nu).collect();
    let js: Vec<usize> = (0..jc).rev().chain(jc + 1..out.nv).collect();
    for &i in &is {
        let pi = if i < ic { i + 1 } else { i - 1 };
        for &j in &js {
            let pj = if j < jc { j + 1 } else { j - 1 };
            let a = pos[out.idx(pi, j)];
            let b = pos[out.idx(i, pj)];
            pos[out.idx(i, j)] = intersect(dirs, a, b, out.u(i) - out.u(pi), out.v(j) - out.v(pj))?;
        }
    }
    Ok(pos)
}

/// Dominant chart axis of each direction at the seed; distinct.
fn pick_axes(d1: &Vector2<f64>, d2: &Vector2<f64>) -> [usize; 2] {
    let a1 = if d1.x.abs() >= d1.y.abs() { 0 } else { 1 };
    let a2 = if d2.x.abs() >= d2.y.abs() { 0 } else { 1 };
    if a1 != a2 {
        [a1, a2]
    } else {
        [a1, 1 - a1]
    }
}

fn default_out(input: &GridChart, axes: [usize; 2]) -> Result<GridChart> {
    let range = |axis: usize| {
        let (a, n, h) = if axis == 0 { (input.u0, input.nu, input.hu) } else { (input.v0, input.nv, input.hv) };
        let mid = a + 0.5 * (n - 1) as f64 * h;
        let half = 0.3 * (n - 1) as f64 * h;
        (mid - half, mid + half)
    };
    GridChart::window(input.nu, input.nv, range(axes[0]), range(axes[1]))
}

fn center_point(c: &GridChart) -> Vector2<f64> {
    Vector2::new(c.u0 + 0.5 * (c.nu - 1) as f64 * c.hu, c.v0 + 0.5 * (c.nv - 1) as f64 * c.hv)
}

/// Resamples a Euclidean surface onto curvature-line coordinates.  The
/// output `u` lines follow the principal direction closest to the input
/// `u` direction at the chart centre, and each output coordinate equals the
/// input coordinate it is aligned with along the two axis curves.  `out`
/// defaults to a centred window of 60% of the input extent.
pub fn curvature_line_reparametrize(surface: &SurfaceGrid, out: Option<GridChart>) -> Result<(SurfaceGrid, ReparamReport)> {
    if surface.geometry != Geometry::Euclidean3 || surface.chart.reality != Reality::Real {
        return Err(GeomError::InvalidInput("curvature-line reparametrization needs a real Euclidean surface".into()));
    }
    let normals = surface.normals.as_ref().ok_or(GeomError::MissingField("normals"))?;
    let chart = &surface.chart;
    let seed = center_point(chart);
    let probe = Principal { patch: Patch { chart }, points: &surface.points, normals, larger_first: true, axes: [0, 1] };
    let (_, _, da, db) = probe.eigen(&seed).map_err(|e| umbilic_at(e, chart))?;
    // κ₁ belongs to the direction closest to ∂u
    let larger_first = da.x.abs() / da.norm() >= db.x.abs() / db.norm();
    let (d1, d2) = if larger_first { (da, db) } else { (db, da) };
    let axes = pick_axes(&d1, &d2);
    let dirs = Principal { patch: Patch { chart }, points: &surface.points, normals, larger_first, axes };
    let out = match out {
        Some(c) => c,
        None => default_out(chart, axes)?,
    };
    out.validate()?;
    let pos = march(&dirs, &out, axes).map_err(|e| umbilic_at(e, chart))?;
    let n = out.len();
    let (mut pts, mut nrm, mut k1, mut k2) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for p in &pos {
        let f = dirs.patch.eval(&surface.points, p)?;
        let nn = dirs.patch.eval(normals, p)?;
        let (a, b, _, _) = shape_eigen(&f, &nn, larger_first, p).map_err(|e| umbilic_at(e, chart))?;
        pts.push(f[0]);
        nrm.push(nn[0].normalize());
        k1.push(a);
        k2.push(b);
    }
    let mut s = SurfaceGrid::euclidean(out, pts, Some(nrm))?;
    s.kappa1 = Some(k1);
    s.kappa2 = Some(k2);
    s.flags.curvature_line = true;
    let residual = off_diagonal_ii(&s)?;
    Ok((s, ReparamReport { residual }))
}

fn umbilic_at(e: GeomError, chart: &GridChart) -> GeomError {
    match e {
        GeomError::Umbilic { nodes } if nodes.is_empty() => GeomError::Umbilic { nodes: vec![chart.center()] },
        other => other,
    }
}

/// Resamples a projective surface with hyperbolic second fundamental form
/// onto asymptotic coordinates.
pub fn asymptotic_reparametrize(surface: &SurfaceGrid, out: Option<GridChart>) -> Result<(SurfaceGrid, ReparamReport)> {
    if surface.geometry != Geometry::Projective3 || surface.chart.reality != Reality::Real {
        return Err(GeomError::InvalidInput("asymptotic reparametrization needs a real projective surface".into()));
    }
    let chart = &surface.chart;
    // sign check over all nodes first, so convex input fails cleanly
    let patch = Patch { chart };
    for i in 0..chart.nu {
        for j in 0..chart.nv {
            let p = Vector2::new(chart.u(i), chart.v(j));
            let (l, m, n) = projective_ii(&patch.eval(&surface.lift, &p)?);
            if m * m - l * n <= 1e-12 * (l * l + m * m + n * n) {
                return Err(GeomError::Signature { node: (i, j) });
            }
        }
    }
    let seed = center_point(chart);
    let (l, m, n) = projective_ii(&patch.eval(&surface.lift, &seed)?);
    let [a, b] = asymptotic_pair(l, m, n).ok_or(GeomError::Signature { node: chart.center() })?;
    let swap = a.x.abs() / a.norm() < b.x.abs() / b.norm();
    let (d1, d2) = if swap { (b, a) } else { (a, b) };
    let axes = pick_axes(&d1, &d2);
    let dirs = Asymptotic { patch: Patch { chart }, lift: &surface.lift, swap, axes };
    let out = match out {
        Some(c) => c,
        None => default_out(chart, axes)?,
    };
    out.validate()?;
    let pos = march(&dirs, &out, axes)?;
    let lift = pos.iter().map(|p| Ok(dirs.patch.eval(&surface.lift, p)?[0])).collect::<Result<Vec<_>>>()?;
    let mut s = SurfaceGrid::projective(out, lift)?;
    s.flags.asymptotic = true;
    let residual = diagonal_ii(&s)?;
    Ok((s, ReparamReport { residual }))
}

fn d4<T: Linear>(f: &Field<T>, c: &GridChart) -> [Field<T>; 5] {
    let fu = f.d_u4(c.hu);
    let fv = f.d_v4(c.hv);
    let fuu = fu.d_u4(c.hu);
    let fuv = fu.d_v4(c.hv);
    let fvv = fv.d_v4(c.hv);
    [fu, fv, fuu, fuv, fvv]
}

/// `max |II_uv| / |II|` over valid nodes, with fourth-order differences.
pub fn off_diagonal_ii(surface: &SurfaceGrid) -> Result<f64> {
    let c = &surface.chart;
    let f = surface.point_field();
    let n = surface.normal_field()?;
    let (fu, fv) = (f.d_u4(c.hu), f.d_v4(c.hv));
    let (nu, nv) = (n.d_u4(c.hu), n.d_v4(c.hv));
    let mut worst: f64 = 0.0;
    for (i, j) in fu.valid_nodes() {
        let (a, b, x, y) = (fu.at(i, j), fv.at(i, j), nu.at(i, j), nv.at(i, j));
        let (l, m, nn) = (-x.dot(a), -0.5 * (x.dot(b) + y.dot(a)), -y.dot(b));
        // coefficients relative to the first fundamental form
        let (le, me, ne) = (l / a.norm_squared(), m / (a.norm() * b.norm()), nn / b.norm_squared());
        worst = worst.max(me.abs() / (le * le + 2.0 * me * me + ne * ne).sqrt());
    }
    Ok(worst)
}

/// `max(|II_uu|, |II_vv|) / |II_uv|` over valid nodes of a projective
/// surface, with fourth-order differences.
pub fn diagonal_ii(surface: &SurfaceGrid) -> Result<f64> {
    let c = &surface.chart;
    let f = surface.lift_field();
    let [fu, fv, fuu, fuv, fvv] = d4(&f, c);
    let mut worst: f64 = 0.0;
    for (i, j) in fuu.valid_nodes() {
        let jet = [*f.at(i, j), *fu.at(i, j), *fv.at(i, j), *fuu.at(i, j), *fuv.at(i, j), *fvv.at(i, j)];
        let (l, m, n) = projective_ii(&jet);
        if m == 0.0 {
            return Err(GeomError::Signature { node: (i, j) });
        }
        worst = worst.max(l.abs().max(n.abs()) / m.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_weights_reproduce_quintics() {
        let x = 2.37;
        let w = weights(x);
        let f = |t: f64| t.powi(5) - 2.0 * t * t + 1.0;
        let df = |t: f64| 5.0 * t.powi(4) - 4.0 * t;
        let d2f = |t: f64| 20.0 * t.powi(3) - 4.0;
        let s = |k: usize, g: &dyn Fn(f64) -> f64| (0..STENCIL).map(|a| w[k][a] * g(a as f64)).sum::<f64>();
        assert!((s(0, &f) - f(x)).abs() < 1e-10);
        assert!((s(1, &f) - df(x)).abs() < 1e-9);
        assert!((s(2, &f) - d2f(x)).abs() < 1e-8);
    }

    #[test]
    fn asymptotic_pair_of_hyperbolic_paraboloid() {
        let [a, b] = asymptotic_pair(0.0, 1.0, 0.0).unwrap();
        assert!(a.x.abs() < 1e-15 && b.y.abs() < 1e-15);
        assert!(asymptotic_pair(1.0, 0.0, 1.0).is_none());
    }
}
