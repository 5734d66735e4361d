//! Willmore energy and the two classical Lagrangians it specializes to, the
//! first-variation density, a backtracking descent, and the invariance
//! harness.

use nalgebra::{DMatrix, DVector, Matrix3, Matrix4, Vector3, Vector4};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Node, Result};
use crate::gauss_map::{conformal_gauss, tension, willmore_density, GaussMapGrid, TensionField};
use crate::grid::{Field, GridChart};
use crate::legendre::{apply_group, lie_lift, normal_shift, principal_data, proj_lift, LegendreGrid, ASYMPTOTIC_TOL};
use crate::linalg::{expm, herm_dot, re, M6, V6};
use crate::pseudo_linalg::PseudoSpace;
use crate::surface::{Geometry, SurfaceGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub total: f64,
    pub density: Field<f64>,
    pub excluded: Vec<Node>,
    pub chart: GridChart,
}

#[derive(Serialize, Deserialize)]
struct EnergyFile {
    total: f64,
    nu: usize,
    nv: usize,
    density: Vec<f64>,
    excluded: Vec<Node>,
}

impl EnergyReport {
    pub fn to_json(&self) -> String {
        let file = EnergyFile {
            total: self.total,
            nu: self.chart.nu,
            nv: self.chart.nv,
            density: self.density.data.clone(),
            excluded: self.excluded.clone(),
        };
        serde_json::to_string(&file).expect("energy report serializes")
    }
}

/// Node-centred sum of `density · |dA| · hu·hv` over valid, non-excluded
/// nodes.  `|dA|` is 1 on real charts and 2 on complex-conjugate charts
/// (`|dw ∧ dw̄| = 2 dx ∧ dy`).
pub fn integrate(density: &Field<f64>, chart: &GridChart, excluded: &[Node]) -> f64 {
    let w = chart.null_area_factor().norm() * chart.hu * chart.hv;
    density.valid_nodes().filter(|n| !excluded.contains(n)).map(|(i, j)| density.at(i, j) * w).sum()
}

/// `W = ∫⟨S_u, S_v⟩ du∧dv` over the chart patch.
pub fn willmore_energy(s: &GaussMapGrid) -> EnergyReport {
    let d = willmore_density(s);
    let density = d.map(0.0, |_, _, z| z.re);
    let total = integrate(&density, &s.chart, &s.degenerate);
    EnergyReport { total, density, excluded: s.degenerate.clone(), chart: s.chart.clone() }
}

/// The Lie-sphere Lagrangian density in curvature-line coordinates with
/// both sign conventions.
#[derive(Debug, Clone, PartialEq)]
pub struct LieDensity {
    /// `∂_uκ₁ ∂_vκ₂ / (κ₁ - κ₂)²`.
    pub plus: Field<f64>,
    /// Its negative, the convention under which it equals `⟨S_u, S_v⟩`.
    pub minus: Field<f64>,
}

pub fn lie_density(kappa1: &[f64], kappa2: &[f64], chart: &GridChart) -> Result<LieDensity> {
    if kappa1.len() != chart.len() || kappa2.len() != chart.len() {
        return Err(GeomError::InvalidInput("curvature fields do not match the chart".into()));
    }
    let field = |k: &[f64]| Field { nu: chart.nu, nv: chart.nv, margin: 0, data: k.to_vec() };
    let (k1, k2) = (field(kappa1), field(kappa2));
    let (du, dv) = (k1.d_u4(chart.hu), k2.d_v4(chart.hv));
    let umb: Vec<Node> = du.valid_nodes().filter(|&(i, j)| crate::umbilic(*k1.at(i, j), *k2.at(i, j))).collect();
    if !umb.is_empty() {
        return Err(GeomError::Umbilic { nodes: umb });
    }
    let plus = du.map(0.0, |i, j, a| {
        let d = k1.at(i, j) - k2.at(i, j);
        a * dv.at(i, j) / (d * d)
    });
    let minus = plus.map_linear(|x| -x);
    Ok(LieDensity { plus, minus })
}

/// Conjugate coefficients `p, q` of a projective surface in asymptotic
/// coordinates by regression of `𝔣_uu, 𝔣_vv` onto `(𝔣, 𝔣_u, 𝔣_v)`.
pub fn proj_coefficients(surface: &SurfaceGrid) -> Result<(Field<f64>, Field<f64>)> {
    if surface.geometry != Geometry::Projective3 {
        return Err(GeomError::InvalidInput("projective density needs a projective surface".into()));
    }
    let c = &surface.chart;
    let f = surface.lift_field().with_margin(surface.margin);
    let (fu, fv, fuu, fvv) = (f.d_u4(c.hu), f.d_v4(c.hv), f.d_uu4(c.hu), f.d_vv4(c.hv));
    let mut p = Field::from_fn(c.nu, c.nv, fu.margin, |_, _| 0.0);
    let mut q = p.clone();
    for (i, j) in fu.valid_nodes() {
        let cols = [f.at(i, j), fu.at(i, j), fv.at(i, j)];
        let basis = DMatrix::from_fn(4, 3, |r, c| cols[c][r]);
        let svd = basis.clone().svd(true, true);
        let solve = |y: &Vector4<f64>| -> Result<DVector<f64>> {
            let x = svd.solve(&DVector::from_column_slice(y.as_slice()), 1e-12).map_err(|_| GeomError::IllConditioned { node: (i, j) })?;
            let r = (&basis * &x - DVector::from_column_slice(y.as_slice())).norm();
            if r > ASYMPTOTIC_TOL * (y.norm() + f.at(i, j).norm() * 1e-12) && r > 1e-12 {
                return Err(GeomError::NotAsymptotic { residual: r / y.norm(), node: (i, j) });
            }
            Ok(x)
        };
        p.set(i, j, solve(fuu.at(i, j))?[2]);
        q.set(i, j, solve(fvv.at(i, j))?[1]);
    }
    Ok((p, q))
}

/// `p·q` from [`proj_coefficients`].
pub fn proj_density(surface: &SurfaceGrid) -> Result<Field<f64>> {
    let (p, q) = proj_coefficients(surface)?;
    Ok(p.map(0.0, |i, j, x| x * q.at(i, j)))
}

/// Euler–Lagrange density `g` with `τ⋆σ = g·l` for `σ ∈ S⊥`, `⟨s, σ⟩ = 1`.
pub fn willmore_gradient_density(f: &LegendreGrid, s: &GaussMapGrid, t: &TensionField) -> Result<Field<f64>> {
    let sp = &s.space;
    let id = M6::identity();
    let mut out = t.tau.map(0.0, |_, _, _| 0.0);
    for (i, j) in t.tau.valid_nodes() {
        let k = s.chart.idx(i, j);
        let perp = id - s.projector[k];
        let sigma = (0..6)
            .map(|c| perp.column(c).into_owned())
            .map(|b: V6| (sp.pair(&f.s[k], &b), b))
            .max_by(|a, b| a.0.norm().total_cmp(&b.0.norm()))
            .filter(|(c, _)| c.norm() > 1e-12 * f.s[k].norm())
            .map(|(c, b)| b / c)
            .ok_or(GeomError::IllConditioned { node: (i, j) })?;
        let w = sp.adjoint(t.tau.at(i, j)) * sigma;
        let l = &f.l[k];
        out.set(i, j, (herm_dot(l, &w) / re(l.norm_squared())).re);
    }
    Ok(out)
}

/// Lie lift and Gauss map of a Euclidean surface, fitting curvatures when
/// the surface does not carry them.
pub fn lie_pipeline(surface: &SurfaceGrid) -> Result<(SurfaceGrid, LegendreGrid, GaussMapGrid)> {
    let surface = if surface.kappa1.is_some() && surface.kappa2.is_some() { surface.clone() } else { principal_data(surface)?.0 };
    let f = lie_lift(&surface)?;
    let s = conformal_gauss(&f)?;
    Ok((surface, f, s))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    /// Energy before the first step and after each step.
    pub reports: Vec<EnergyReport>,
    /// Accepted step sizes after backtracking (0 when no decrease was found).
    pub accepted: Vec<f64>,
    /// `±1`: orientation of the last accepted normal motion
    /// `𝔣 ↦ 𝔣 - orientation·h·v·𝔫` (0 when no step was accepted).
    pub orientation: f64,
    pub surface: SurfaceGrid,
}

pub const MAX_HALVINGS: usize = 20;

/// Fourth-order derivative along a line of samples, one-sided near the ends.
fn line_derivative<T>(f: &[T], h: f64) -> Vec<T>
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    const EDGE: [[f64; 5]; 2] = [[-25.0, 48.0, -36.0, 16.0, -3.0], [-3.0, -10.0, 18.0, -6.0, 1.0]];
    const MID: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
    let n = f.len();
    let comb = |start: usize, w: &[f64; 5], sign: f64| {
        (1..5).fold(f[start] * (w[0] * sign / (12.0 * h)), |acc, k| acc + f[start + k] * (w[k] * sign / (12.0 * h)))
    };
    (0..n)
        .map(|k| match k {
            0 | 1 => comb(0, &EDGE[k], 1.0),
            _ if k + 2 >= n => {
                let w = &EDGE[n - 1 - k];
                let rev: Vec<T> = (0..5).map(|q| f[n - 1 - q]).collect();
                (1..5).fold(rev[0] * (-w[0] / (12.0 * h)), |acc, q| acc + rev[q] * (-w[q] / (12.0 * h)))
            }
            _ => comb(k - 2, &MID, 1.0),
        })
        .collect()
}

fn grid_derivatives<T>(data: &[T], chart: &GridChart) -> (Vec<T>, Vec<T>)
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let (nu, nv) = (chart.nu, chart.nv);
    let mut du = vec![T::default(); data.len()];
    let mut dv = vec![T::default(); data.len()];
    for j in 0..nv {
        let col: Vec<T> = (0..nu).map(|i| data[chart.idx(i, j)]).collect();
        for (i, x) in line_derivative(&col, chart.hu).into_iter().enumerate() {
            du[chart.idx(i, j)] = x;
        }
    }
    for i in 0..nu {
        let row = &data[chart.idx(i, 0)..chart.idx(i, 0) + nv];
        dv[chart.idx(i, 0)..chart.idx(i, 0) + nv].copy_from_slice(&line_derivative(row, chart.hv));
    }
    (du, dv)
}

/// Highest Legendre degree of the data on each centre line.
pub const VELOCITY_DEGREE: usize = 4;

fn legendre_poly(n: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if n == 0 {
        return a;
    }
    for k in 1..n {
        let c = ((2 * k + 1) as f64 * x * b - k as f64 * a) / (k + 1) as f64;
        a = b;
        b = c;
    }
    b
}

/// Solves `v_uv = A v_u + B v_v` outward from the centre lines, with `v`
/// given on the row and column through the centre node.
fn goursat(a: &[f64], b: &[f64], row: &[f64], col: &[f64], chart: &GridChart) -> Vec<f64> {
    let (nu, nv) = (chart.nu, chart.nv);
    let (i0, j0) = (nu / 2, nv / 2);
    let mut v = vec![0.0; chart.len()];
    for i in 0..nu {
        v[chart.idx(i, j0)] = col[i];
    }
    for j in 0..nv {
        v[chart.idx(i0, j)] = row[j];
    }
    for (si, sj) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
        let (du, dv) = (si as f64 * chart.hu, sj as f64 * chart.hv);
        let mut i = i0 as i64;
        while (0..nu as i64).contains(&(i + si)) {
            let mut j = j0 as i64;
            while (0..nv as i64).contains(&(j + sj)) {
                let ks = [chart.idx(i as usize, j as usize), chart.idx((i + si) as usize, j as usize), chart.idx(i as usize, (j + sj) as usize), chart.idx((i + si) as usize, (j + sj) as usize)];
                let ca = 0.25 * ks.iter().map(|&k| a[k]).sum::<f64>() * dv / 2.0;
                let cb = 0.25 * ks.iter().map(|&k| b[k]).sum::<f64>() * du / 2.0;
                let (v00, v10, v01) = (v[ks[0]], v[ks[1]], v[ks[2]]);
                v[ks[3]] = (v10 + v01 - v00 + ca * (v10 - v00 - v01) + cb * (v01 - v00 - v10)) / (1.0 - ca - cb);
                j += sj;
            }
            i += si;
        }
    }
    v
}

/// Least-squares projection of `g` onto normal speeds that keep the chart
/// curvature-line aligned to first order. In curvature-line coordinates a
/// normal speed `v` preserves `II_12 = 0` iff `v_uv = (E_v/2E) v_u + (G_u/2G) v_v`;
/// the solutions are spanned by Legendre data on the two centre lines.
/// Since `<g, Pg> = |Pg|^2` the projection stays a descent direction.
fn aligned_velocity(g: &Field<f64>, surface: &SurfaceGrid) -> Vec<f64> {
    let chart = &surface.chart;
    let (fu, fv) = grid_derivatives(&surface.points, chart);
    let le: Vec<f64> = fu.iter().map(|x| x.norm_squared().ln()).collect();
    let lg: Vec<f64> = fv.iter().map(|x| x.norm_squared().ln()).collect();
    let a: Vec<f64> = grid_derivatives(&le, chart).1.iter().map(|x| 0.5 * x).collect();
    let b: Vec<f64> = grid_derivatives(&lg, chart).0.iter().map(|x| 0.5 * x).collect();
    let x = |k: usize, n: usize| 2.0 * k as f64 / (n - 1) as f64 - 1.0;
    let (i0, j0) = (chart.nu / 2, chart.nv / 2);
    let mut modes = Vec::new();
    for d in 0..=VELOCITY_DEGREE {
        // row data P_d(v) - P_d(v0), column data zero, and vice versa
        let row: Vec<f64> = (0..chart.nv).map(|j| legendre_poly(d, x(j, chart.nv)) - legendre_poly(d, x(j0, chart.nv))).collect();
        let col: Vec<f64> = (0..chart.nu).map(|i| legendre_poly(d, x(i, chart.nu)) - legendre_poly(d, x(i0, chart.nu))).collect();
        if d == 0 {
            modes.push(goursat(&a, &b, &vec![1.0; chart.nv], &vec![1.0; chart.nu], chart));
        } else {
            modes.push(goursat(&a, &b, &row, &vec![0.0; chart.nu], chart));
            modes.push(goursat(&a, &b, &vec![0.0; chart.nv], &col, chart));
        }
    }
    let nodes: Vec<(usize, usize)> = g.valid_nodes().collect();
    let m = DMatrix::from_fn(nodes.len(), modes.len(), |r, q| modes[q][chart.idx(nodes[r].0, nodes[r].1)]);
    let rhs = DVector::from_iterator(nodes.len(), nodes.iter().map(|&(i, j)| *g.at(i, j)));
    let Ok(c) = m.svd(true, true).solve(&rhs, 1e-12) else {
        return vec![0.0; chart.len()];
    };
    (0..chart.len()).map(|k| modes.iter().zip(c.iter()).map(|(md, ci)| ci * md[k]).sum()).collect()
}

/// Normals of the moved surface from fourth-order tangents (one-sided at
/// the boundary), oriented like the old normals.
fn recompute_normals(points: &[Vector3<f64>], old: &[Vector3<f64>], chart: &GridChart) -> Vec<Vector3<f64>> {
    let (fu, fv) = grid_derivatives(points, chart);
    (0..points.len())
        .map(|k| {
            let m = fu[k].cross(&fv[k]).normalize();
            if m.dot(&old[k]) < 0.0 {
                -m
            } else {
                m
            }
        })
        .collect()
}

fn moved(surface: &SurfaceGrid, velocity: &[f64], h: f64) -> Result<SurfaceGrid> {
    let normals = surface.normals.as_ref().ok_or(GeomError::MissingField("normals"))?;
    let pts: Vec<Vector3<f64>> = surface.points.iter().zip(normals).zip(velocity).map(|((p, n), v)| p + n * (h * v)).collect();
    let nr = recompute_normals(&pts, normals, &surface.chart);
    let mut out = SurfaceGrid::euclidean(surface.chart.clone(), pts, Some(nr))?;
    out.flags.curvature_line = true;
    Ok(principal_data(&out)?.0)
}

/// Explicit gradient descent on `W` by normal motion along `g`, with step
/// halving whenever `W` would increase. The speed is the curvature-line
/// preserving part of `g` scaled to unit maximum, so `step_size` bounds the
/// largest normal displacement of a step.
pub fn willmore_descent(surface: &SurfaceGrid, steps: usize, step_size: f64) -> Result<DescentTrace> {
    if surface.geometry != Geometry::Euclidean3 {
        return Err(GeomError::InvalidInput("descent needs a Euclidean surface".into()));
    }
    // rediscretize once so every trial is compared on the same footing
    let start = moved(surface, &vec![0.0; surface.chart.len()], 0.0)?;
    let (mut cur, mut f, mut s) = lie_pipeline(&start)?;
    let mut energy = willmore_energy(&s);
    let mut trace = DescentTrace { reports: vec![energy.clone()], accepted: Vec::new(), orientation: 0.0, surface: cur.clone() };
    for _ in 0..steps {
        let t = tension(&s);
        let g = willmore_gradient_density(&f, &s, &t)?;
        let mut velocity = aligned_velocity(&g, &cur);
        let vmax = velocity.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        if vmax > 0.0 {
            velocity.iter_mut().for_each(|x| *x /= vmax);
        }
        let orientations = [1.0, -1.0];
        let mut h = step_size;
        let mut accepted = None;
        'search: for _ in 0..=MAX_HALVINGS {
            if h == 0.0 {
                break;
            }
            for &o in &orientations {
                // a trial that breaks the curvature-line chart counts as rejected
                let trial = moved(&cur, &velocity, -o * h).and_then(|m| lie_pipeline(&m));
                if let Ok((next, nf, ns)) = trial {
                    let e = willmore_energy(&ns);
                    if e.total <= energy.total {
                        accepted = Some((o, next, nf, ns, e));
                        break 'search;
                    }
                }
            }
            h *= 0.5;
        }
        match accepted {
            Some((o, next, nf, ns, e)) => {
                trace.orientation = o;
                cur = next;
                f = nf;
                s = ns;
                energy = e;
                trace.accepted.push(h);
            }
            None => trace.accepted.push(0.0),
        }
        trace.reports.push(energy.clone());
    }
    trace.surface = cur;
    Ok(trace)
}

/// A transformation for the invariance harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    Identity,
    /// Parallel surface at distance `t` (Euclidean surfaces).
    NormalShift(f64),
    /// Inversion in the sphere `|x - centre| = radius` followed by the
    /// similarity `x ↦ scale·R·x + shift` (Euclidean surfaces).
    Mobius { centre: Vector3<f64>, radius: f64, rotation: Matrix3<f64>, scale: f64, shift: Vector3<f64> },
    /// A pairing-preserving map of the Lie quadric space, applied to the lift.
    Lie(M6),
    /// A unimodular projective map (projective surfaces).
    Projective(Matrix4<f64>),
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::NormalShift(_) => "normal_shift",
            Transform::Mobius { .. } => "mobius",
            Transform::Lie(_) => "lie",
            Transform::Projective(_) => "projective",
        }
    }
}

pub fn random_lie(rng: &mut impl Rng, size: f64) -> M6 {
    let sp = PseudoSpace::lie();
    let m = M6::from_fn(|_, _| re(rng.gen_range(-1.0..1.0)));
    expm(&((m - sp.adjoint(&m)) * re(size)))
}

pub fn random_sl4(rng: &mut impl Rng, size: f64) -> Matrix4<f64> {
    let a = Matrix4::identity() + Matrix4::from_fn(|_, _| rng.gen_range(-size..size));
    let d = a.determinant();
    a / d.abs().powf(0.25) * if d < 0.0 { -1.0 } else { 1.0 }
}

/// A random Möbius map whose inversion centre lies at distance `≥ far` from
/// the origin.
pub fn random_mobius(rng: &mut impl Rng, far: f64) -> Transform {
    let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
    let centre = dir * (far * rng.gen_range(1.0..1.5));
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let rotation = *nalgebra::Rotation3::new(axis).matrix();
    Transform::Mobius {
        centre,
        radius: far * rng.gen_range(0.5..1.5),
        rotation,
        scale: rng.gen_range(0.5..2.0),
        shift: Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
    }
}

fn mobius_surface(surface: &SurfaceGrid, centre: &Vector3<f64>, radius: f64, rot: &Matrix3<f64>, scale: f64, shift: &Vector3<f64>) -> Result<SurfaceGrid> {
    let normals = surface.normals.as_ref().ok_or(GeomError::MissingField("normals"))?;
    let mut pts = Vec::with_capacity(surface.points.len());
    let mut nrm = Vec::with_capacity(surface.points.len());
    for (x, n) in surface.points.iter().zip(normals) {
        let w = x - centre;
        let y = centre + w * (radius * radius / w.norm_squared());
        let wh = w.normalize();
        // the differential of an inversion is a scaled reflection
        let m = n - wh * (2.0 * wh.dot(n));
        pts.push(rot * y * scale + shift);
        nrm.push(rot * m);
    }
    SurfaceGrid::euclidean(surface.chart.clone(), pts, Some(nrm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceEntry {
    pub transform: String,
    /// `max |d' - d| / max |d|` over nodes valid in both density fields.
    pub density_deviation: f64,
    /// `|W' - W| / max(|W|, tiny)`.
    pub energy_deviation: f64,
}

fn density_and_energy(s: &GaussMapGrid) -> (Field<f64>, f64) {
    let e = willmore_energy(s);
    (e.density, e.total)
}

fn compare(name: &str, a: &(Field<f64>, f64), b: &(Field<f64>, f64)) -> InvarianceEntry {
    let m = a.0.margin.max(b.0.margin);
    let scale = a.0.max_abs(m).max(1e-300);
    let dev = a.0.valid_nodes().filter(|&(i, j)| b.0.is_valid(i, j)).map(|(i, j)| (a.0.at(i, j) - b.0.at(i, j)).abs()).fold(0.0, f64::max);
    // totals compared over the common valid region
    let w: f64 = a.0.valid_nodes().filter(|&(i, j)| b.0.is_valid(i, j)).map(|(i, j)| *a.0.at(i, j)).sum();
    let w2: f64 = a.0.valid_nodes().filter(|&(i, j)| b.0.is_valid(i, j)).map(|(i, j)| *b.0.at(i, j)).sum();
    InvarianceEntry { transform: name.to_string(), density_deviation: dev / scale, energy_deviation: (w - w2).abs() / w.abs().max(1e-300) }
}

/// Recomputes the Willmore density from scratch after each transform and
/// compares it with the untransformed density node by node.
pub fn invariance_report(surface: &SurfaceGrid, transforms: &[Transform]) -> Result<Vec<InvarianceEntry>> {
    let euclid = surface.geometry == Geometry::Euclidean3;
    // curvatures are always refitted so both sides go through the same pipeline
    let base_surface = if euclid {
        let mut b = surface.clone();
        b.kappa1 = None;
        b.kappa2 = None;
        Some(b)
    } else {
        None
    };
    let (f0, s0) = match &base_surface {
        Some(b) => {
            let (_, f, s) = lie_pipeline(b)?;
            (f, s)
        }
        None => {
            let f = proj_lift(surface)?;
            let s = conformal_gauss(&f)?;
            (f, s)
        }
    };
    let base = density_and_energy(&s0);
    let mut out = Vec::new();
    for t in transforms {
        let incompatible = || GeomError::IncompatibleTransform(t.name().into());
        let s = match t {
            Transform::Identity => s0.clone(),
            Transform::Lie(g) => {
                if f0.space.signature() != (4, 2) {
                    return Err(incompatible());
                }
                conformal_gauss(&apply_group(&f0, g)?)?
            }
            Transform::NormalShift(d) => {
                let b = base_surface.as_ref().ok_or_else(incompatible)?;
                let mut shifted = normal_shift(&principal_data(b)?.0, *d)?;
                shifted.kappa1 = None;
                shifted.kappa2 = None;
                lie_pipeline(&shifted)?.2
            }
            Transform::Mobius { centre, radius, rotation, scale, shift } => {
                let b = base_surface.as_ref().ok_or_else(incompatible)?;
                lie_pipeline(&mobius_surface(b, centre, *radius, rotation, *scale, shift)?)?.2
            }
            Transform::Projective(a) => {
                if euclid {
                    return Err(incompatible());
                }
                let lift = surface.lift.iter().map(|x| a * x).collect();
                let mut moved = SurfaceGrid::projective(surface.chart.clone(), lift)?;
                moved.flags = surface.flags.clone();
                conformal_gauss(&proj_lift(&moved)?)?
            }
        };
        out.push(compare(t.name(), &base, &density_and_energy(&s)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
