//! The conformal Gauss map `S = span{l, l_v, l_vv}` of a Legendre map and
//! its first-order analysis: derivative, Grassmannian pairing, tension,
//! Blaschke conditions and reconstruction of the focal frame.
//!
//! Tangent vectors of the Grassmannian, maps `S → S⊥`, are stored as 6×6
//! operators `A` with `A = (1-P) A P` for the projector `P` onto `S`.

use std::collections::VecDeque;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Node, Result};
use crate::grid::{Field, GridChart, Reality};
use crate::legendre::{ConformalSignature, LegendreGrid};
use crate::linalg::{line_angle, re, M6, V6, C, I, ONE};
use crate::pseudo_linalg::{indefinite_orthogonalize, PseudoSpace};

/// A tangent vector `S → S⊥` at one node, as a 6×6 operator.
pub type TangentHom = M6;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussMapGrid {
    pub space: PseudoSpace,
    pub chart: GridChart,
    /// Pairing-orthonormal basis of `S` per node.
    pub basis: Vec<[V6; 3]>,
    pub projector: Vec<M6>,
    /// `ε(2P - 1)`: squares to `ε²` with `S` as its `+ε` eigenspace.
    pub star: Vec<M6>,
    pub eps: C,
    pub signature_z: ConformalSignature,
    /// Nodes where the span collapsed; their data is copied from the
    /// nearest regular node.
    pub degenerate: Vec<Node>,
    pub margin: usize,
    /// Largest relative pairing of `S` against `span{s, s_u, s_uu}`.
    pub cross_gram: Option<f64>,
}

impl GaussMapGrid {
    /// Builds the grid from spanning vectors per node; `None` marks a node
    /// to be filled by continuation.
    pub fn from_spans(space: PseudoSpace, chart: GridChart, spans: Vec<Option<[V6; 3]>>, margin: usize) -> Result<Self> {
        if spans.len() != chart.len() {
            return Err(GeomError::InvalidInput("span field does not match the chart".into()));
        }
        let mut basis: Vec<Option<[V6; 3]>> = vec![None; chart.len()];
        let mut projector = vec![M6::zeros(); chart.len()];
        let mut degenerate = Vec::new();
        for (i, j) in chart.interior(margin) {
            let k = chart.idx(i, j);
            let regular = spans[k].and_then(|v| {
                let b = indefinite_orthogonalize(&v, &space).ok()?;
                if b.len() != 3 {
                    return None;
                }
                let p = space.projector(&b).ok()?;
                Some(([b[0], b[1], b[2]], p))
            });
            match regular {
                Some((b, p)) => {
                    basis[k] = Some(b);
                    projector[k] = p;
                }
                None => degenerate.push((i, j)),
            }
        }
        let filled = fill_by_continuation(&chart, margin, &mut basis, &mut projector)?;
        let (eps, signature_z) = match chart.reality {
            Reality::Real => (ONE, ConformalSignature::Lorentz),
            Reality::ComplexConjugate => (I, ConformalSignature::Definite),
        };
        let star = projector.iter().map(|p| (p * re(2.0) - M6::identity()) * eps).collect();
        debug_assert_eq!(filled, degenerate.len());
        Ok(Self {
            space,
            chart,
            basis: basis.into_iter().map(|b| b.unwrap_or([V6::zeros(); 3])).collect(),
            projector,
            star,
            eps,
            signature_z,
            degenerate,
            margin,
            cross_gram: None,
        })
    }

    pub fn projector_field(&self) -> Field<M6> {
        Field { nu: self.chart.nu, nv: self.chart.nv, margin: self.margin, data: self.projector.clone() }
    }

    pub fn is_degenerate(&self, node: Node) -> bool {
        self.degenerate.contains(&node)
    }

    /// Valid nodes of `field` that are not flagged degenerate.
    pub fn regular_nodes<'a, T: Clone>(&'a self, field: &'a Field<T>) -> impl Iterator<Item = Node> + 'a {
        field.valid_nodes().filter(move |n| !self.is_degenerate(*n))
    }
}

// Breadth-first copy from regular neighbours; returns the number of filled
// nodes.
fn fill_by_continuation(chart: &GridChart, margin: usize, basis: &mut [Option<[V6; 3]>], proj: &mut [M6]) -> Result<usize> {
    let mut queue: VecDeque<Node> = chart.interior(margin).filter(|&(i, j)| basis[chart.idx(i, j)].is_some()).collect();
    if queue.is_empty() {
        return Err(GeomError::DegenerateSubspace("span{l, l_v, l_vv} degenerates at every node".into()));
    }
    let mut filled = 0;
    while let Some((i, j)) = queue.pop_front() {
        let k = chart.idx(i, j);
        for (di, dj) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            let m = margin as i64;
            if a < m || b < m || a >= chart.nu as i64 - m || b >= chart.nv as i64 - m {
                continue;
            }
            let n = chart.idx(a as usize, b as usize);
            if basis[n].is_none() {
                basis[n] = basis[k];
                proj[n] = proj[k];
                filled += 1;
                queue.push_back((a as usize, b as usize));
            }
        }
    }
    Ok(filled)
}

fn rel_pair(space: &PseudoSpace, a: &V6, b: &V6) -> f64 {
    let s = a.norm() * b.norm();
    if s == 0.0 {
        0.0
    } else {
        space.pair(a, b).norm() / s
    }
}

/// `S = span{l, l_v, l_vv}`, with the cross-Gram against
/// `span{s, s_u, s_uu}` recorded.
pub fn conformal_gauss(f: &LegendreGrid) -> Result<GaussMapGrid> {
    let c = &f.chart;
    let (lf, sf) = (f.l_field(), f.s_field());
    let (lv, lvv) = (c.d_v4(&lf), c.d_vv4(&lf));
    let (su, suu) = (c.d_u4(&sf), c.d_uu4(&sf));
    let margin = lvv.margin;
    let mut spans = vec![None; c.len()];
    let mut cross: f64 = 0.0;
    for (i, j) in lvv.valid_nodes() {
        let a = [*lf.at(i, j), *lv.at(i, j), *lvv.at(i, j)];
        let b = [*sf.at(i, j), *su.at(i, j), *suu.at(i, j)];
        for x in &a {
            for y in &b {
                cross = cross.max(rel_pair(&f.space, x, y));
            }
        }
        spans[c.idx(i, j)] = Some(a);
    }
    let mut g = GaussMapGrid::from_spans(f.space.clone(), c.clone(), spans, margin)?;
    g.cross_gram = Some(cross);
    Ok(g)
}

/// `⟨A, B⟩ = -tr(B⋆A)`.
pub fn grassmann_pair(space: &PseudoSpace, a: &TangentHom, b: &TangentHom) -> C {
    -(space.adjoint(b) * a).trace()
}

/// Coefficients of `A` in the given bases of `S` and `S⊥`: column `j` holds
/// the expansion of `A·basis_s[j]`.
pub fn hom_coefficients(space: &PseudoSpace, a: &TangentHom, basis_s: &[V6; 3], basis_perp: &[V6; 3]) -> Matrix3<C> {
    let gram = Matrix3::from_fn(|i, j| space.pair(&basis_perp[i], &basis_perp[j]));
    let inv = gram.try_inverse().unwrap_or_else(Matrix3::zeros);
    let rhs = Matrix3::from_fn(|i, j| space.pair(&basis_perp[i], &(a * basis_s[j])));
    inv * rhs
}

/// `(S_u, S_v)` with `S_u = (1-P) P_u P`.  All derivatives in this module
/// use fourth-order stencils.
pub fn d_s(s: &GaussMapGrid) -> (Field<TangentHom>, Field<TangentHom>) {
    let p = s.projector_field();
    let (pu, pv) = (s.chart.d_u4(&p), s.chart.d_v4(&p));
    let id = M6::identity();
    let wrap = |d: &Field<M6>| d.map(M6::zeros(), |i, j, x| (id - p.at(i, j)) * x * p.at(i, j));
    (wrap(&pu), wrap(&pv))
}

/// `⟨S_u, S_v⟩` per node.
pub fn willmore_density(s: &GaussMapGrid) -> Field<C> {
    let (su, sv) = d_s(s);
    su.map(C::new(0.0, 0.0), |i, j, a| grassmann_pair(&s.space, a, sv.at(i, j)))
}

/// Largest singular value.
pub fn op_norm(m: &M6) -> f64 {
    m.singular_values().max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensionField {
    /// `∇⊥_u∘S_v - S_v∘∇_u`.
    pub tau: Field<TangentHom>,
    /// `∇⊥_v∘S_u - S_u∘∇_v`.
    pub tau_alt: Field<TangentHom>,
    pub norm: Field<f64>,
    /// Largest `‖τ - τ_alt‖` over regular nodes, relative to the largest
    /// `‖τ‖` (absolute when `τ` vanishes).
    pub codazzi: f64,
}

/// Covariant derivative of `A ∈ Hom(S, S⊥)`: `(1-P) A' P`.
fn covariant(p: &Field<M6>, d: &Field<M6>) -> Field<M6> {
    let id = M6::identity();
    d.map(M6::zeros(), |i, j, x| (id - p.at(i, j)) * x * p.at(i, j))
}

pub fn tension(s: &GaussMapGrid) -> TensionField {
    let p = s.projector_field();
    let (su, sv) = d_s(s);
    let tau = covariant(&p, &s.chart.d_u4(&sv));
    let tau_alt = covariant(&p, &s.chart.d_v4(&su));
    let norm = tau.map(0.0, |_, _, t| op_norm(t));
    let diff = s.regular_nodes(&tau).map(|(i, j)| op_norm(&(tau.at(i, j) - tau_alt.at(i, j)))).fold(0.0, f64::max);
    let top = s.regular_nodes(&tau).map(|(i, j)| *norm.at(i, j)).fold(0.0, f64::max);
    let codazzi = if top > 1e-12 { diff / top } else { diff };
    TensionField { tau, tau_alt, norm, codazzi }
}

/// How far `τ_S` is from satisfying `im τ ⊂ span{s}` and `ker τ ⊃ l⊥∩S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensionLemma {
    /// Largest angle between the dominant image direction and `s`.
    pub image_angle: f64,
    /// Largest `‖τσ‖ / (‖τ‖‖σ‖)` over a basis of `l⊥∩S`.
    pub kernel_defect: f64,
}

pub fn tension_lemma(t: &TensionField, s: &GaussMapGrid, f: &LegendreGrid) -> TensionLemma {
    let field = tension_lemma_field(t, s, f);
    s.regular_nodes(&field).fold(TensionLemma { image_angle: 0.0, kernel_defect: 0.0 }, |acc, (i, j)| {
        let x = field.at(i, j);
        TensionLemma { image_angle: acc.image_angle.max(x.image_angle), kernel_defect: acc.kernel_defect.max(x.kernel_defect) }
    })
}

/// Per-node version of [`tension_lemma`]; nodes where `τ` vanishes report
/// zero.
pub fn tension_lemma_field(t: &TensionField, s: &GaussMapGrid, f: &LegendreGrid) -> Field<TensionLemma> {
    let zero = TensionLemma { image_angle: 0.0, kernel_defect: 0.0 };
    t.tau.map(zero, |i, j, tau| {
        let k = s.chart.idx(i, j);
        let n = op_norm(tau);
        if n < 1e-12 {
            return zero;
        }
        let svd = tau.svd(true, false);
        let top = svd.singular_values.imax();
        let image: V6 = svd.u.unwrap().column(top).into_owned();
        let kernel_defect = perp_in(&s.space, &s.basis[k], &f.l[k])
            .iter()
            .map(|sigma| (tau * sigma).norm() / (n * sigma.norm()))
            .fold(0.0, f64::max);
        TensionLemma { image_angle: line_angle(&image, &f.s[k]), kernel_defect }
    })
}

/// Basis of `{σ ∈ span(basis) : ⟨σ, x⟩ = 0}`.
fn perp_in(space: &PseudoSpace, basis: &[V6; 3], x: &V6) -> Vec<V6> {
    let r: Vec<C> = basis.iter().map(|b| space.pair(b, x)).collect();
    let k = (0..3).max_by(|&a, &b| r[a].norm().total_cmp(&r[b].norm())).unwrap();
    if r[k].norm() < 1e-14 {
        return basis.to_vec();
    }
    (0..3).filter(|&j| j != k).map(|j| basis[j] - basis[k] * (r[j] / r[k])).collect()
}

/// `(‖S_u⋆∘S_u‖, ‖S_v∘S_v⋆‖)` per node.
pub fn blaschke_residual(s: &GaussMapGrid) -> (Field<f64>, Field<f64>) {
    let (su, sv) = d_s(s);
    let sp = &s.space;
    (
        su.map(0.0, |_, _, a| op_norm(&(sp.adjoint(a) * a))),
        sv.map(0.0, |_, _, a| op_norm(&(a * sp.adjoint(a)))),
    )
}

/// Spectral gap below which an image is not considered one-dimensional.
pub const RANK_GAP: f64 = 1e3;

/// Dominant image line of a near-rank-one operator, phase-fixed so its
/// largest component is real and positive.
fn image_line(m: &M6, node: Node) -> Result<V6> {
    let svd = m.svd(true, false);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let gap = if sv[order[1]] > 0.0 { sv[order[0]] / sv[order[1]] } else { f64::INFINITY };
    if gap < RANK_GAP {
        return Err(GeomError::NotRankOne { node, gap });
    }
    let v: V6 = svd.u.unwrap().column(order[0]).into_owned();
    let big = v.iter().cloned().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap();
    Ok(v * (big.conj() / re(big.norm())))
}

/// Focal frame from `l = im S_v⋆` and `s = im S_u`.
pub fn reconstruct(s: &GaussMapGrid) -> Result<LegendreGrid> {
    let (su, sv) = d_s(s);
    let c = &s.chart;
    let mut l = vec![V6::zeros(); c.len()];
    let mut sl = vec![V6::zeros(); c.len()];
    for (i, j) in su.valid_nodes() {
        let (a, b) = (su.at(i, j), sv.at(i, j));
        let scale = op_norm(a) * op_norm(b);
        let density = grassmann_pair(&s.space, a, b).norm();
        if density <= 1e-8 * scale.max(1.0) {
            return Err(GeomError::DegenerateReconstruction { node: (i, j) });
        }
        let k = c.idx(i, j);
        sl[k] = image_line(a, (i, j))?;
        l[k] = image_line(&s.space.adjoint(b), (i, j))?;
    }
    let mut g = LegendreGrid::new(s.space.clone(), c.clone(), l, sl)?;
    g.margin = su.margin;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeClass {
    Generic,
    /// Only `S_u∘S_u⋆ = 0` holds.
    GodeauxRozetU,
    /// Only `S_v⋆∘S_v = 0` holds.
    GodeauxRozetV,
    Demoulin,
}

/// The swapped conditions count as holding when their relative residual is
/// within this factor of the largest relative residual of the genuine
/// Blaschke conditions on the same grid, which measures the discretization
/// floor.
pub const ENVELOPE_FACTOR: f64 = 10.0;

pub fn envelope_degeneracy(s: &GaussMapGrid) -> Field<EnvelopeClass> {
    let (su, sv) = d_s(s);
    let sp = &s.space;
    let rel = |prod: M6, a: &M6| {
        let n = op_norm(a);
        if n < 1e-10 {
            0.0
        } else {
            op_norm(&prod) / (n * n)
        }
    };
    let floor = su
        .valid_nodes()
        .map(|(i, j)| {
            let (a, b) = (su.at(i, j), sv.at(i, j));
            rel(sp.adjoint(a) * a, a).max(rel(b * sp.adjoint(b), b))
        })
        .fold(0.0, f64::max);
    let tol = ENVELOPE_FACTOR * floor + 1e-12;
    su.map(EnvelopeClass::Generic, |i, j, a| {
        let b = sv.at(i, j);
        match (rel(a * sp.adjoint(a), a) <= tol, rel(sp.adjoint(b) * b, b) <= tol) {
            (true, true) => EnvelopeClass::Demoulin,
            (true, false) => EnvelopeClass::GodeauxRozetU,
            (false, true) => EnvelopeClass::GodeauxRozetV,
            (false, false) => EnvelopeClass::Generic,
        }
    })
}
