//! Frames of a Gauss map in the symmetric space of nondegenerate 3-planes,
//! discrete Maurer–Cartan forms on grid edges, the spectral family and its
//! plaquette flatness, spectral deformation, and the duality between the
//! (4,2) and (3,3) pictures.
//!
//! Edge values are integrated: the value on the edge from node `x` to its
//! neighbour `y` approximates `∫α` along the edge, so `F(y) = F(x)·exp(value)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Node, Result};
use crate::gauss_map::{op_norm, GaussMapGrid};
use crate::grid::{Field, GridChart, Reality};
use crate::linalg::{expm, logm, max_imag, project_to_isometry, re, sqrtm_pair, subspace_gap, C, M6, ONE, V6};
use crate::pseudo_linalg::{indefinite_orthogonalize, PseudoSpace};

/// Relative skew defect accepted by [`symmetric_split`].
pub const SKEW_TOL: f64 = 1e-10;

/// Relative round-trip error above which an edge logarithm is replaced by
/// the first-order difference `F⁻¹ΔF`.
pub const LOG_TOL: f64 = 1e-8;

/// A deformation input is harmonic when its flatness density at `λ = 2`
/// stays below this multiple of the `λ = 1` discretization floor.
pub const HARMONIC_FACTOR: f64 = 10.0;

/// Neighbouring subspaces closer than this (projector operator norm) share
/// a frame, so a Gauss map constant up to roundoff gets a zero connection.
pub const SAME_SUBSPACE_TOL: f64 = 1e-9;

/// Spectral parameter used by the harmonicity test.
pub const TEST_LAMBDA: f64 = 2.0;

/// The decomposition `𝔤 = 𝔨 ⊕ 𝔭` of the pairing-skew endomorphisms at a
/// base subspace `S_o`: `𝔨` preserves `S_o` and `S_o⊥`, `𝔭` swaps them.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPair {
    pub space: PseudoSpace,
    /// Pairing-orthogonal projector onto `S_o`.
    pub projector: M6,
    /// `ε(2P - 1)`.
    pub star: M6,
    pub eps: C,
}

impl SymmetricPair {
    pub fn new(space: PseudoSpace, projector: M6, eps: C) -> Result<Self> {
        let scale = projector.norm().max(1.0);
        if (projector * projector - projector).norm() > 1e-9 * scale {
            return Err(GeomError::InvalidInput("base is not a projector".into()));
        }
        if (space.adjoint(&projector) - projector).norm() > 1e-9 * scale {
            return Err(GeomError::InvalidInput("base projector is not pairing-orthogonal".into()));
        }
        if (projector.trace() - re(3.0)).norm() > 1e-9 {
            return Err(GeomError::InvalidInput("base subspace is not three-dimensional".into()));
        }
        let star = (projector * re(2.0) - M6::identity()) * eps;
        Ok(Self { space, projector, star, eps })
    }

    /// Pair based at `S(node)`.
    pub fn at_node(s: &GaussMapGrid, node: Node) -> Result<Self> {
        Self::new(s.space.clone(), s.projector[s.chart.idx(node.0, node.1)], s.eps)
    }

    fn complement(&self) -> M6 {
        M6::identity() - self.projector
    }

    pub fn k_part(&self, x: &M6) -> M6 {
        let (p, q) = (self.projector, self.complement());
        p * x * p + q * x * q
    }

    pub fn p_part(&self, x: &M6) -> M6 {
        let (p, q) = (self.projector, self.complement());
        p * x * q + q * x * p
    }

    /// The symmetric involution `x ↦ x_𝔨 - x_𝔭`.
    pub fn involution(&self, x: &M6) -> M6 {
        self.k_part(x) - self.p_part(x)
    }

    /// Matrices of the two projections in the coordinates of [`skew_basis`].
    pub fn projector_matrices(&self) -> (DMatrix<C>, DMatrix<C>) {
        let basis = skew_basis(&self.space);
        let col = |f: &dyn Fn(&M6) -> M6| {
            let cols: Vec<Vec<C>> = basis.iter().map(|b| skew_coordinates(&self.space, &f(b))).collect();
            DMatrix::from_fn(15, 15, |i, j| cols[j][i])
        };
        (col(&|x| self.k_part(x)), col(&|x| self.p_part(x)))
    }

    /// Largest relative violation of `[𝔨,𝔨] ⊂ 𝔨`, `[𝔨,𝔭] ⊂ 𝔭`, `[𝔭,𝔭] ⊂ 𝔨`
    /// over the projected basis.
    pub fn bracket_residual(&self) -> f64 {
        let basis = skew_basis(&self.space);
        let ks: Vec<M6> = basis.iter().map(|b| self.k_part(b)).collect();
        let ps: Vec<M6> = basis.iter().map(|b| self.p_part(b)).collect();
        let rel = |wrong: M6, x: &M6, y: &M6| {
            let s = x.norm() * y.norm();
            if s == 0.0 {
                0.0
            } else {
                wrong.norm() / s
            }
        };
        let mut worst: f64 = 0.0;
        for x in &ks {
            for y in &ks {
                worst = worst.max(rel(self.p_part(&bracket(x, y)), x, y));
            }
            for y in &ps {
                worst = worst.max(rel(self.k_part(&bracket(x, y)), x, y));
            }
        }
        for x in &ps {
            for y in &ps {
                worst = worst.max(rel(self.p_part(&bracket(x, y)), x, y));
            }
        }
        worst
    }
}

pub fn bracket(x: &M6, y: &M6) -> M6 {
    x * y - y * x
}

/// Basis `gram⁻¹(E_ab - E_ba)`, `a < b`, of the 15-dimensional algebra of
/// pairing-skew endomorphisms.
pub fn skew_basis(space: &PseudoSpace) -> Vec<M6> {
    let mut out = Vec::with_capacity(15);
    for a in 0..6 {
        for b in a + 1..6 {
            let mut e = M6::zeros();
            e[(a, b)] = ONE;
            e[(b, a)] = -ONE;
            out.push(space.gram_inv * e);
        }
    }
    out
}

/// Coordinates of a skew element in [`skew_basis`]: the upper triangle of
/// `gram·x`.
pub fn skew_coordinates(space: &PseudoSpace, x: &M6) -> Vec<C> {
    let a = space.gram * x;
    let mut out = Vec::with_capacity(15);
    for i in 0..6 {
        for j in i + 1..6 {
            out.push(a[(i, j)]);
        }
    }
    out
}

/// `(ξ_𝔨, ξ_𝔭)` with `ξ_𝔨` preserving `S_o` and `ξ_𝔭` mapping `S_o` into `S_o⊥`.
pub fn symmetric_split(xi: &M6, pair: &SymmetricPair) -> Result<(M6, M6)> {
    let defect = pair.space.skew_defect(xi);
    if defect > SKEW_TOL {
        return Err(GeomError::NotSkew { defect });
    }
    Ok((pair.k_part(xi), pair.p_part(xi)))
}

/// A frame per node with `F·S_o = S(node)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGrid {
    pub chart: GridChart,
    pub base: SymmetricPair,
    pub frames: Vec<M6>,
    pub seed: Node,
    /// Frames are meaningful on the interior at this margin.
    pub margin: usize,
}

impl FrameGrid {
    pub fn at(&self, i: usize, j: usize) -> &M6 {
        &self.frames[self.chart.idx(i, j)]
    }

    fn valid(&self) -> impl Iterator<Item = Node> + '_ {
        self.chart.interior(self.margin)
    }

    /// Largest relative defect of `Fᵀ·gram·F = gram`.
    pub fn isometry_defect(&self) -> f64 {
        self.valid().map(|(i, j)| self.base.space.isometry_defect(self.at(i, j))).fold(0.0, f64::max)
    }

    /// Largest principal angle (its sine) between `F·S_o` and `S(node)`.
    pub fn subspace_defect(&self, s: &GaussMapGrid) -> f64 {
        let to_dm = |m: &M6| DMatrix::from_fn(6, 6, |i, j| m[(i, j)]);
        self.valid()
            .map(|(i, j)| {
                let f = self.at(i, j);
                let image = f * self.base.projector * self.base.space.adjoint(f);
                subspace_gap(&to_dm(&image), &to_dm(&s.projector[self.chart.idx(i, j)]))
            })
            .fold(0.0, f64::max)
    }

    /// Per node, the larger of `‖F(x)⁻¹F(y) - 1‖` over its forward
    /// neighbours `y`, measured in a pairing-orthonormal basis adapted to
    /// `S_o ⊕ S_o⊥` (the Euclidean norm of raw coordinates depends on the
    /// conditioning of the base).
    pub fn jumps(&self) -> Field<f64> {
        let m = self.margin;
        let (nu, nv) = (self.chart.nu, self.chart.nv);
        let sp = &self.base.space;
        let (b, binv) = match adapted_basis(&self.base) {
            Ok(b) => b,
            Err(_) => (M6::identity(), M6::identity()),
        };
        let jump = |x: &M6, y: &M6| op_norm(&(binv * (sp.adjoint(x) * y - M6::identity()) * b));
        Field::from_fn(nu, nv, m, |i, j| {
            let mut worst: f64 = 0.0;
            if i >= m && j >= m && i + m < nu && j + m < nv {
                if i + 1 + m < nu {
                    worst = worst.max(jump(self.at(i, j), self.at(i + 1, j)));
                }
                if j + 1 + m < nv {
                    worst = worst.max(jump(self.at(i, j), self.at(i, j + 1)));
                }
            }
            worst
        })
    }

    pub fn max_jump(&self) -> f64 {
        self.jumps().max_abs(0)
    }

    /// The Gauss map `F·S_o`.
    pub fn gauss_map(&self) -> Result<GaussMapGrid> {
        let b = base_basis(&self.base)?;
        let spans = (0..self.chart.len())
            .map(|k| {
                let (i, j) = (k / self.chart.nv, k % self.chart.nv);
                if self.chart.interior(self.margin).any(|n| n == (i, j)) {
                    let f = &self.frames[k];
                    Some([f * b[0], f * b[1], f * b[2]])
                } else {
                    None
                }
            })
            .collect();
        GaussMapGrid::from_spans(self.base.space.clone(), self.chart.clone(), spans, self.margin)
    }
}

fn base_basis(pair: &SymmetricPair) -> Result<[V6; 3]> {
    let svd = pair.projector.svd(true, false);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let u = svd.u.ok_or_else(|| GeomError::Degenerate("base projector SVD failed".into()))?;
    Ok([u.column(order[0]).into_owned(), u.column(order[1]).into_owned(), u.column(order[2]).into_owned()])
}

/// Columns: a pairing-orthonormal basis of `S_o` followed by one of `S_o⊥`;
/// returned with its inverse.
pub fn adapted_basis(pair: &SymmetricPair) -> Result<(M6, M6)> {
    let id = M6::identity();
    let q = id - pair.projector;
    let cols = |m: &M6| (0..6).map(|j| m.column(j).into_owned()).collect::<Vec<V6>>();
    let a = indefinite_orthogonalize(&cols(&pair.projector), &pair.space)?;
    let b = indefinite_orthogonalize(&cols(&q), &pair.space)?;
    if a.len() != 3 || b.len() != 3 {
        return Err(GeomError::DegenerateSubspace("base splitting is not 3 + 3".into()));
    }
    let m = M6::from_fn(|i, j| if j < 3 { a[j][i] } else { b[j - 3][i] });
    let inv = m.try_inverse().ok_or_else(|| GeomError::Degenerate("adapted basis is singular".into()))?;
    Ok((m, inv))
}

/// Signature of the pairing restricted to the image of a real projector.
fn restricted_signature(space: &PseudoSpace, p: &M6) -> Option<(usize, usize)> {
    let pr = p.map(|x| x.re);
    let g = space.gram.map(|x| x.re);
    let h = pr.transpose() * g * pr;
    let eig = nalgebra::SymmetricEigen::new(h);
    let scale = eig.eigenvalues.abs().max();
    if scale == 0.0 {
        return None;
    }
    let pos = eig.eigenvalues.iter().filter(|&&x| x > 1e-8 * scale).count();
    let neg = eig.eigenvalues.iter().filter(|&&x| x < -1e-8 * scale).count();
    Some((pos, neg))
}

/// Transvection `sqrt(R_to R_from)` carrying the `+1` eigenspace of the
/// reflection `R_from = 2P_from - 1` onto that of `R_to`; it is the
/// isometry closest to the identity doing so.
fn transvection(space: &PseudoSpace, from: &M6, to: &M6) -> Option<M6> {
    let id = M6::identity();
    let m = (to * re(2.0) - id) * (from * re(2.0) - id);
    let (t, _) = sqrtm_pair(&m)?;
    let t = project_to_isometry(&t, &space.gram, &space.gram_inv);
    t.iter().all(|x| x.re.is_finite() && x.im.is_finite()).then_some(t)
}

/// Visiting order from the seed: down the seed column, then along rows.
fn row_order(chart: &GridChart, margin: usize, seed: Node) -> Vec<(Node, Node)> {
    let (lo_u, hi_u) = (margin, chart.nu - margin);
    let (lo_v, hi_v) = (margin, chart.nv - margin);
    let mut steps = Vec::new();
    for i in seed.0 + 1..hi_u {
        steps.push(((i - 1, seed.1), (i, seed.1)));
    }
    for i in (lo_u..seed.0).rev() {
        steps.push(((i + 1, seed.1), (i, seed.1)));
    }
    for i in lo_u..hi_u {
        for j in seed.1 + 1..hi_v {
            steps.push(((i, j - 1), (i, j)));
        }
        for j in (lo_v..seed.1).rev() {
            steps.push(((i, j + 1), (i, j)));
        }
    }
    steps
}

/// Frame of `s` based at `S_o = S(seed)`, seed at the chart centre.  Each
/// frame is the previous one composed with the minimal transvection to the
/// next subspace, followed by a polar re-projection onto the isometries.
pub fn frame(s: &GaussMapGrid) -> Result<FrameGrid> {
    let chart = &s.chart;
    let seed = chart.center();
    let base = SymmetricPair::at_node(s, seed)?;
    if chart.reality == Reality::Real {
        let sig = restricted_signature(&s.space, &base.projector);
        for (i, j) in chart.interior(s.margin) {
            if restricted_signature(&s.space, &s.projector[chart.idx(i, j)]) != sig {
                return Err(GeomError::SignatureMismatch(format!("S changes signature at {:?}", (i, j))));
            }
        }
    }
    let mut frames = vec![M6::identity(); chart.len()];
    for (from, to) in row_order(chart, s.margin, seed) {
        let (a, b) = (chart.idx(from.0, from.1), chart.idx(to.0, to.1));
        if op_norm(&(s.projector[b] - s.projector[a])) <= SAME_SUBSPACE_TOL {
            frames[b] = frames[a];
            continue;
        }
        // start from the previous frame's actual image so errors do not accumulate
        let image = frames[a] * base.projector * s.space.adjoint(&frames[a]);
        let t = transvection(&s.space, &image, &s.projector[b]).ok_or(GeomError::GaugePropagation { node: to })?;
        frames[b] = project_to_isometry(&(t * frames[a]), &s.space.gram, &s.space.gram_inv);
    }
    Ok(FrameGrid { chart: chart.clone(), base, frames, seed, margin: s.margin })
}

/// Integrated connection components on one edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeForm {
    pub k: M6,
    /// The `𝔭`-part paired with the first null coordinate.
    pub p_prime: M6,
    /// The `𝔭`-part paired with the second null coordinate.
    pub p_doubleprime: M6,
}

impl EdgeForm {
    pub fn zero() -> Self {
        Self { k: M6::zeros(), p_prime: M6::zeros(), p_doubleprime: M6::zeros() }
    }

    pub fn total(&self) -> M6 {
        self.k + self.p_prime + self.p_doubleprime
    }
}

/// A discrete connection: `u_edges` has shape `(nu-1) × nv` (edge from
/// `(i,j)` to `(i+1,j)`), `v_edges` has shape `nu × (nv-1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionGrid {
    pub chart: GridChart,
    pub base: SymmetricPair,
    pub lambda: Option<C>,
    pub u_edges: Field<EdgeForm>,
    pub v_edges: Field<EdgeForm>,
}

impl ConnectionGrid {
    /// The zero connection.
    pub fn zero(chart: GridChart, base: SymmetricPair, margin: usize) -> Self {
        let z = EdgeForm::zero();
        Self {
            u_edges: Field::from_fn(chart.nu - 1, chart.nv, margin, |_, _| z),
            v_edges: Field::from_fn(chart.nu, chart.nv - 1, margin, |_, _| z),
            chart,
            base,
            lambda: None,
        }
    }

    pub fn margin(&self) -> usize {
        self.u_edges.margin
    }

    /// Largest imaginary part over all edge values.
    pub fn max_imag(&self) -> f64 {
        let e = |f: &Field<EdgeForm>| f.valid_nodes().map(|(i, j)| max_imag(&f.at(i, j).total())).fold(0.0, f64::max);
        e(&self.u_edges).max(e(&self.v_edges))
    }

    pub fn to_json(&self) -> String {
        let dump = |f: &Field<EdgeForm>| EdgeDump {
            rows: f.nu,
            cols: f.nv,
            margin: f.margin,
            k: f.data.iter().map(|e| matrix_pairs(&e.k)).collect(),
            p_prime: f.data.iter().map(|e| matrix_pairs(&e.p_prime)).collect(),
            p_doubleprime: f.data.iter().map(|e| matrix_pairs(&e.p_doubleprime)).collect(),
        };
        let file = ConnectionFile {
            nu: self.chart.nu,
            nv: self.chart.nv,
            lambda: self.lambda.map(|l| [l.re, l.im]),
            u_edges: dump(&self.u_edges),
            v_edges: dump(&self.v_edges),
        };
        serde_json::to_string(&file).expect("connection serializes")
    }
}

#[derive(Serialize, Deserialize)]
struct EdgeDump {
    rows: usize,
    cols: usize,
    margin: usize,
    k: Vec<Vec<[f64; 2]>>,
    p_prime: Vec<Vec<[f64; 2]>>,
    p_doubleprime: Vec<Vec<[f64; 2]>>,
}

#[derive(Serialize, Deserialize)]
struct ConnectionFile {
    nu: usize,
    nv: usize,
    lambda: Option<[f64; 2]>,
    u_edges: EdgeDump,
    v_edges: EdgeDump,
}

/// Row-major `[re, im]` entries.
pub fn matrix_pairs(m: &M6) -> Vec<[f64; 2]> {
    (0..6).flat_map(|i| (0..6).map(move |j| [m[(i, j)].re, m[(i, j)].im])).collect()
}

/// `log(a⁻¹b)` for isometries, falling back to `a⁻¹(b - a)` near the branch
/// cut.
fn edge_log(space: &PseudoSpace, a: &M6, b: &M6, node: Node) -> Result<M6> {
    let ainv = space.adjoint(a);
    let g = ainv * b;
    if let Some(l) = logm(&g) {
        let back = expm(&l);
        if (back - g).norm() <= LOG_TOL * g.norm() {
            return Ok(l);
        }
    }
    let d = ainv * (b - a);
    if d.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        Ok(d)
    } else {
        Err(GeomError::LogBranch { node })
    }
}

/// Integrated edge values `log(F(x)⁻¹F(y))` split by the base pair.
///
/// On real charts the `𝔭`-part of a `u`-edge is `α_𝔭′` and that of a
/// `v`-edge is `α_𝔭″`.  On complex-conjugate charts the edges run along
/// `x` and `y` with `w = x + iy`; the `𝔭`-part along the other direction is
/// averaged from the four adjacent edges, and both parts are recombined
/// into `dw` and `dw̄` components.
pub fn maurer_cartan(f: &FrameGrid) -> Result<ConnectionGrid> {
    let c = &f.chart;
    let m = f.margin;
    let sp = &f.base.space;
    let pair = &f.base;
    let mut out = ConnectionGrid::zero(c.clone(), pair.clone(), m);
    let mut raw_u = Field::from_fn(c.nu - 1, c.nv, m, |_, _| (M6::zeros(), M6::zeros()));
    let mut raw_v = Field::from_fn(c.nu, c.nv - 1, m, |_, _| (M6::zeros(), M6::zeros()));
    for (i, j) in out.u_edges.valid_nodes().collect::<Vec<_>>() {
        let x = edge_log(sp, f.at(i, j), f.at(i + 1, j), (i, j))?;
        raw_u.set(i, j, (pair.k_part(&x), pair.p_part(&x)));
    }
    for (i, j) in out.v_edges.valid_nodes().collect::<Vec<_>>() {
        let x = edge_log(sp, f.at(i, j), f.at(i, j + 1), (i, j))?;
        raw_v.set(i, j, (pair.k_part(&x), pair.p_part(&x)));
    }
    match c.reality {
        Reality::Real => {
            for (i, j) in raw_u.valid_nodes() {
                let (k, p) = *raw_u.at(i, j);
                out.u_edges.set(i, j, EdgeForm { k, p_prime: p, p_doubleprime: M6::zeros() });
            }
            for (i, j) in raw_v.valid_nodes() {
                let (k, p) = *raw_v.at(i, j);
                out.v_edges.set(i, j, EdgeForm { k, p_prime: M6::zeros(), p_doubleprime: p });
            }
        }
        Reality::ComplexConjugate => {
            let (hu, hv) = (c.hu, c.hv);
            let half = re(0.5);
            let i_unit = C::new(0.0, 1.0);
            // per unit length: α(∂w) = (α_x - iα_y)/2, α(∂w̄) = (α_x + iα_y)/2
            for (i, j) in raw_u.valid_nodes() {
                let (k, px) = *raw_u.at(i, j);
                let py = neighbour_average(&raw_v, &[(i, j), (i + 1, j), (i, j.wrapping_sub(1)), (i + 1, j.wrapping_sub(1))]);
                let (ax, ay) = (px / re(hu), py / re(hv));
                let w = (ax - ay * i_unit) * half;
                let wb = (ax + ay * i_unit) * half;
                out.u_edges.set(i, j, EdgeForm { k, p_prime: w * re(hu), p_doubleprime: wb * re(hu) });
            }
            for (i, j) in raw_v.valid_nodes() {
                let (k, py) = *raw_v.at(i, j);
                let px = neighbour_average(&raw_u, &[(i, j), (i, j + 1), (i.wrapping_sub(1), j), (i.wrapping_sub(1), j + 1)]);
                let (ax, ay) = (px / re(hu), py / re(hv));
                let w = (ax - ay * i_unit) * half;
                let wb = (ax + ay * i_unit) * half;
                out.v_edges.set(i, j, EdgeForm { k, p_prime: w * i_unit * re(hv), p_doubleprime: -wb * i_unit * re(hv) });
            }
        }
    }
    Ok(out)
}

fn neighbour_average(f: &Field<(M6, M6)>, nodes: &[Node]) -> M6 {
    let vals: Vec<M6> = nodes.iter().filter(|&&(i, j)| i < f.nu && j < f.nv && f.is_valid(i, j)).map(|&(i, j)| f.at(i, j).1).collect();
    if vals.is_empty() {
        M6::zeros()
    } else {
        vals.iter().sum::<M6>() / re(vals.len() as f64)
    }
}

/// `α_λ = α_𝔨 + λα_𝔭′ + λ⁻¹α_𝔭″`, edge-wise.
pub fn spectral_connection(alpha: &ConnectionGrid, lambda: C) -> Result<ConnectionGrid> {
    if lambda.norm() == 0.0 {
        return Err(GeomError::ZeroLambda);
    }
    let inv = ONE / lambda;
    let scale = |e: &EdgeForm| EdgeForm { k: e.k, p_prime: e.p_prime * lambda, p_doubleprime: e.p_doubleprime * inv };
    Ok(ConnectionGrid {
        chart: alpha.chart.clone(),
        base: alpha.base.clone(),
        lambda: Some(alpha.lambda.unwrap_or(ONE) * lambda),
        u_edges: alpha.u_edges.map_linear(scale),
        v_edges: alpha.v_edges.map_linear(scale),
    })
}

/// Per plaquette `(i,j)`-`(i+1,j+1)`: `‖log hol‖ / (hu·hv)` for the
/// holonomy `exp(U_ij) exp(V_{i+1,j}) exp(-U_{i,j+1}) exp(-V_ij)`, a discrete
/// curvature density.  The field has shape `(nu-1) × (nv-1)`.
pub fn flatness_residual(alpha: &ConnectionGrid) -> Field<f64> {
    let c = &alpha.chart;
    let m = alpha.margin();
    let area = c.hu * c.hv;
    let (ue, ve) = (&alpha.u_edges, &alpha.v_edges);
    Field::from_fn(c.nu - 1, c.nv - 1, m, |i, j| {
        let inside = i >= m && j >= m && i + 1 + m < c.nu && j + 1 + m < c.nv;
        if !inside {
            return 0.0;
        }
        let hol = expm(&ue.at(i, j).total()) * expm(&ve.at(i + 1, j).total()) * expm(&(-ue.at(i, j + 1).total())) * expm(&(-ve.at(i, j).total()));
        match logm(&hol) {
            Some(l) => l.norm() / area,
            None => (hol - M6::identity()).norm() / area,
        }
    })
}

/// Largest plaquette density.
pub fn max_flatness(alpha: &ConnectionGrid) -> f64 {
    flatness_residual(alpha).max_abs(0)
}

/// Largest plaquette density over the central half of the plaquettes in
/// each direction, away from the chart corners.
pub fn central_flatness(alpha: &ConnectionGrid) -> f64 {
    let r = flatness_residual(alpha);
    let (nu, nv) = (r.nu, r.nv);
    (nu / 4..nu - nu / 4)
        .flat_map(|i| (nv / 4..nv - nv / 4).map(move |j| (i, j)))
        .filter(|&(i, j)| r.is_valid(i, j))
        .map(|(i, j)| *r.at(i, j))
        .fold(0.0, f64::max)
}

/// Integrates `F⁻¹dF = α` from `F(seed) = f0`, down the seed column and
/// then along rows, re-projecting onto the isometries after every step.
/// The second value is the largest row-versus-column mismatch over
/// plaquettes, `‖e^U e^V' - e^V e^U'‖`.
pub fn integrate_frame(alpha: &ConnectionGrid, f0: &M6) -> (FrameGrid, f64) {
    let c = &alpha.chart;
    let sp = &alpha.base.space;
    let m = alpha.margin();
    let seed = c.center();
    let mut frames = vec![M6::identity(); c.len()];
    frames[c.idx(seed.0, seed.1)] = *f0;
    for (from, to) in row_order(c, m, seed) {
        let step = if to.0 == from.0 + 1 {
            expm(&alpha.u_edges.at(from.0, from.1).total())
        } else if from.0 == to.0 + 1 {
            expm(&(-alpha.u_edges.at(to.0, to.1).total()))
        } else if to.1 == from.1 + 1 {
            expm(&alpha.v_edges.at(from.0, from.1).total())
        } else {
            expm(&(-alpha.v_edges.at(to.0, to.1).total()))
        };
        let a = frames[c.idx(from.0, from.1)];
        frames[c.idx(to.0, to.1)] = project_to_isometry(&(a * step), &sp.gram, &sp.gram_inv);
    }
    let mut mismatch: f64 = 0.0;
    for i in m..c.nu - m - 1 {
        for j in m..c.nv - m - 1 {
            let a = expm(&alpha.u_edges.at(i, j).total()) * expm(&alpha.v_edges.at(i + 1, j).total());
            let b = expm(&alpha.v_edges.at(i, j).total()) * expm(&alpha.u_edges.at(i, j + 1).total());
            mismatch = mismatch.max((a - b).norm());
        }
    }
    (FrameGrid { chart: c.clone(), base: alpha.base.clone(), frames, seed, margin: m }, mismatch)
}

/// Flatness of a framed Gauss map at `λ = 1` (the discretization floor)
/// and at the test parameter, both over the central plaquettes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Harmonicity {
    /// Largest plaquette density of the first-order connection `F⁻¹ΔF`.
    pub floor: f64,
    /// Largest plaquette density of `α_λ` at [`TEST_LAMBDA`] (or `e^{iπ/3}`
    /// on complex-conjugate charts).
    pub test: f64,
}

impl Harmonicity {
    pub fn is_harmonic(&self) -> bool {
        self.test <= HARMONIC_FACTOR * self.floor
    }
}

/// Edge values `F⁻¹ΔF` without the logarithm; their `λ = 1` holonomy
/// measures the discretization floor of the grid.
pub fn first_order_connection(f: &FrameGrid) -> ConnectionGrid {
    let c = &f.chart;
    let sp = &f.base.space;
    let mut out = ConnectionGrid::zero(c.clone(), f.base.clone(), f.margin);
    for (i, j) in out.u_edges.valid_nodes().collect::<Vec<_>>() {
        let d = sp.adjoint(f.at(i, j)) * (f.at(i + 1, j) - f.at(i, j));
        out.u_edges.set(i, j, EdgeForm { k: d, p_prime: M6::zeros(), p_doubleprime: M6::zeros() });
    }
    for (i, j) in out.v_edges.valid_nodes().collect::<Vec<_>>() {
        let d = sp.adjoint(f.at(i, j)) * (f.at(i, j + 1) - f.at(i, j));
        out.v_edges.set(i, j, EdgeForm { k: d, p_prime: M6::zeros(), p_doubleprime: M6::zeros() });
    }
    out
}

/// Test parameter admissible for the chart reality.
pub fn test_lambda(reality: Reality) -> C {
    match reality {
        Reality::Real => re(TEST_LAMBDA),
        Reality::ComplexConjugate => C::from_polar(1.0, std::f64::consts::FRAC_PI_3),
    }
}

pub fn harmonicity(f: &FrameGrid, alpha: &ConnectionGrid) -> Result<Harmonicity> {
    let floor = central_flatness(&first_order_connection(f));
    let test = central_flatness(&spectral_connection(alpha, test_lambda(f.chart.reality))?);
    Ok(Harmonicity { floor, test })
}

fn check_lambda(reality: Reality, lambda: C) -> Result<()> {
    if lambda.norm() == 0.0 {
        return Err(GeomError::ZeroLambda);
    }
    let ok = match reality {
        Reality::Real => lambda.im.abs() <= 1e-14 * lambda.norm(),
        Reality::ComplexConjugate => (lambda.norm() - 1.0).abs() <= 1e-12,
    };
    if ok {
        Ok(())
    } else {
        Err(GeomError::InvalidInput(format!(
            "spectral parameter {lambda} is not admissible: real charts need real λ, complex-conjugate charts need |λ| = 1"
        )))
    }
}

/// `S_λ = F_λ·S_o` with `F_λ` integrated from `α_λ` and `F_λ(seed) = 1`.
pub fn spectral_deform(s: &GaussMapGrid, lambda: C) -> Result<GaussMapGrid> {
    check_lambda(s.chart.reality, lambda)?;
    let f = frame(s)?;
    let alpha = maurer_cartan(&f)?;
    let h = harmonicity(&f, &alpha)?;
    if !h.is_harmonic() {
        return Err(GeomError::NotHarmonic { flatness: h.test, threshold: HARMONIC_FACTOR * h.floor });
    }
    let (fl, _) = integrate_frame(&spectral_connection(&alpha, lambda)?, &M6::identity());
    fl.gauss_map()
}

/// The dual pairing `gram·(P_o - Q_o)` (negated if needed so that the
/// signature is `(4,2)` or `(3,3)`), in which `S_o ⊕ √−1·S_o⊥` becomes real.
pub fn dual_space(pair: &SymmetricPair) -> Result<PseudoSpace> {
    let q = M6::identity() - pair.projector;
    let g = pair.space.gram * (pair.projector - q);
    let mut rows = [[0.0; 6]; 6];
    for (i, row) in rows.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            if v.im.abs() > 1e-10 * g.norm() {
                return Err(GeomError::SignatureMismatch("base subspace is not real".into()));
            }
            *x = v.re;
        }
    }
    let sp = PseudoSpace::new(rows).or_else(|_| {
        let neg = rows.map(|r| r.map(|x| -x));
        PseudoSpace::new(neg)
    })?;
    Ok(sp)
}

/// The connection of the dual harmonic map: `α_𝔨 + iα_𝔭′ - iα_𝔭″`
/// (the branch `λ = i`) read through `J = P_o + iQ_o`, which turns `iX` into
/// `P_oXQ_o - Q_oXP_o` for `X ∈ 𝔭`.  The same real formula implements the
/// inverse branch `λ = -i` read through `P_o - iQ_o`, so applying it twice
/// returns the original connection.
pub fn dual_connection(alpha: &ConnectionGrid) -> Result<ConnectionGrid> {
    let pair = &alpha.base;
    let space = dual_space(pair)?;
    let base = SymmetricPair::new(space, pair.projector, pair.eps)?;
    let (p, q) = (pair.projector, M6::identity() - pair.projector);
    let turn = |x: &M6| p * x * q - q * x * p;
    let map = |e: &EdgeForm| EdgeForm { k: e.k, p_prime: turn(&e.p_prime), p_doubleprime: -turn(&e.p_doubleprime) };
    Ok(ConnectionGrid {
        chart: alpha.chart.clone(),
        base,
        lambda: alpha.lambda,
        u_edges: alpha.u_edges.map_linear(map),
        v_edges: alpha.v_edges.map_linear(map),
    })
}

/// Dual Gauss map: frame, dual connection, integration from the identity.
/// Defined up to a constant isometry of the dual space.
pub fn dualize(s: &GaussMapGrid) -> Result<GaussMapGrid> {
    if s.chart.reality != Reality::Real {
        return Err(GeomError::InvalidInput("duality needs a real (1,1) chart".into()));
    }
    let f = frame(s)?;
    let alpha = maurer_cartan(&f)?;
    let dual = dual_connection(&alpha)?;
    let (fd, _) = integrate_frame(&dual, &M6::identity());
    fd.gauss_map()
}

/// Largest `‖P_a - P_b‖` over common interior nodes.
pub fn projector_deviation(a: &GaussMapGrid, b: &GaussMapGrid) -> f64 {
    let m = a.margin.max(b.margin);
    a.chart
        .interior(m)
        .map(|(i, j)| {
            let k = a.chart.idx(i, j);
            op_norm(&(a.projector[k] - b.projector[k]))
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests;
