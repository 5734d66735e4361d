//! Indefinite linear algebra on six-dimensional space.
//!
//! Two concrete models are used throughout:
//!
//! * the Lie sphere model `R^{4,2}` in the basis
//!   `(v1, v2, v3, v_{-1}, v0, v_inf)` with `<v0, v_inf> = -1/2`;
//! * the Plücker model `R^{3,3} = Λ²R⁴` in the basis
//!   `(e12, e13, e14, e23, e24, e34)` with `<v, w> = vol(v ∧ w)`.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen};

use crate::error::{GeomError, Result};
use crate::linalg::{csqrt, herm_dot, re, M4, M6, V4, V6, C, ONE, ZERO};

/// Index of each Lie basis vector in the coordinate arrays.
pub mod lie {
    pub const V1: usize = 0;
    pub const V2: usize = 1;
    pub const V3: usize = 2;
    pub const VM1: usize = 3;
    pub const V0: usize = 4;
    pub const VINF: usize = 5;
}

/// Index pairs `(i, j)` of the Plücker basis `e_i ∧ e_j`.
pub const PLUCKER_PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Relative tolerance for the Plücker relation.
pub const DECOMPOSABLE_TOL: f64 = 1e-8;

/// A nondegenerate symmetric pairing of signature `(m, n)` on six-space.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpace {
    pub m: usize,
    pub n: usize,
    pub gram: M6,
    pub gram_inv: M6,
}

impl PseudoSpace {
    pub fn new(gram: [[f64; 6]; 6]) -> Result<Self> {
        let real = nalgebra::Matrix6::from_fn(|i, j| gram[i][j]);
        if (real - real.transpose()).abs().max() > 1e-14 {
            return Err(GeomError::InvalidInput("gram matrix is not symmetric".into()));
        }
        let eig = SymmetricEigen::new(real);
        let scale = eig.eigenvalues.abs().max();
        let m = eig.eigenvalues.iter().filter(|&&x| x > 1e-12 * scale).count();
        let n = eig.eigenvalues.iter().filter(|&&x| x < -1e-12 * scale).count();
        if m + n != 6 {
            return Err(GeomError::Degenerate("gram matrix is singular".into()));
        }
        if !matches!((m, n), (4, 2) | (3, 3)) {
            return Err(GeomError::InvalidInput(format!(
                "unsupported signature ({m},{n}); expected (4,2) or (3,3)"
            )));
        }
        let g = M6::from_fn(|i, j| re(gram[i][j]));
        let gram_inv = g
            .try_inverse()
            .ok_or_else(|| GeomError::Degenerate("gram matrix is singular".into()))?;
        Ok(Self { m, n, gram: g, gram_inv })
    }

    /// `R^{4,2}` in the Lie basis.
    pub fn lie() -> Self {
        let mut g = [[0.0; 6]; 6];
        g[lie::V1][lie::V1] = 1.0;
        g[lie::V2][lie::V2] = 1.0;
        g[lie::V3][lie::V3] = 1.0;
        g[lie::VM1][lie::VM1] = -1.0;
        g[lie::V0][lie::VINF] = -0.5;
        g[lie::VINF][lie::V0] = -0.5;
        Self::new(g).expect("Lie gram is valid")
    }

    /// `Λ²R⁴` with the volume pairing; anti-diagonal in the Plücker basis.
    pub fn plucker() -> Self {
        let mut g = [[0.0; 6]; 6];
        for (a, &(i, j)) in PLUCKER_PAIRS.iter().enumerate() {
            for (b, &(k, l)) in PLUCKER_PAIRS.iter().enumerate() {
                g[a][b] = perm_sign4([i, j, k, l]);
            }
        }
        Self::new(g).expect("Plücker gram is valid")
    }

    /// `diag(+1 x m, -1 x n)`.
    pub fn diagonal(m: usize, n: usize) -> Result<Self> {
        if m + n != 6 {
            return Err(GeomError::InvalidInput("m + n must be 6".into()));
        }
        let mut g = [[0.0; 6]; 6];
        for (i, row) in g.iter_mut().enumerate() {
            row[i] = if i < m { 1.0 } else { -1.0 };
        }
        Self::new(g)
    }

    pub fn signature(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    /// Complex bilinear pairing `xᵀ·gram·y`.
    pub fn pair(&self, x: &V6, y: &V6) -> C {
        (x.transpose() * self.gram * y)[(0, 0)]
    }

    pub fn adjoint(&self, a: &M6) -> M6 {
        crate::linalg::pairing_adjoint(a, &self.gram, &self.gram_inv)
    }

    /// `|| Gᵀ gram G - gram ||` relative to `||gram||`.
    pub fn isometry_defect(&self, g: &M6) -> f64 {
        (g.transpose() * self.gram * g - self.gram).norm() / self.gram.norm()
    }

    /// `|| a* + a ||` relative to `||a||`, zero for pairing-skew maps.
    pub fn skew_defect(&self, a: &M6) -> f64 {
        let n = a.norm();
        if n == 0.0 {
            return 0.0;
        }
        (self.adjoint(a) + a).norm() / n
    }

    /// Orthogonal projector onto the span of the given vectors; the induced
    /// pairing on the span must be nondegenerate.
    pub fn projector(&self, basis: &[V6]) -> Result<M6> {
        let k = basis.len();
        let b = DMatrix::from_fn(6, k, |i, j| basis[j][i]);
        let g = DMatrix::from_fn(6, 6, |i, j| self.gram[(i, j)]);
        let gram_b = b.transpose() * &g * &b;
        let inv = gram_b
            .clone()
            .try_inverse()
            .ok_or_else(|| GeomError::DegenerateSubspace("singular induced gram".into()))?;
        let p = &b * inv * b.transpose() * &g;
        Ok(M6::from_fn(|i, j| p[(i, j)]))
    }
}

fn perm_sign4(idx: [usize; 4]) -> f64 {
    let mut seen = [false; 4];
    for &i in &idx {
        if seen[i] {
            return 0.0;
        }
        seen[i] = true;
    }
    let mut sign = 1.0;
    let mut a = idx;
    for i in 0..4 {
        for j in 0..3 - i {
            if a[j] > a[j + 1] {
                a.swap(j, j + 1);
                sign = -sign;
            }
        }
    }
    sign
}

/// Two linearly independent vectors spanning a 2-plane.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPlane<V> {
    pub basis: [V; 2],
}

impl TwoPlane<V6> {
    /// Whether all pairings of the basis vanish (a point of the space of
    /// null 2-planes).
    pub fn is_null(&self, space: &PseudoSpace, tol: f64) -> bool {
        let [a, b] = &self.basis;
        let scale = a.norm() * b.norm() + a.norm_squared() + b.norm_squared();
        [space.pair(a, a), space.pair(a, b), space.pair(b, b)]
            .iter()
            .all(|z| z.norm() <= tol * scale)
    }
}

/// `x ∧ y` in the Plücker basis.
pub fn plucker_embed(x: &V4, y: &V4) -> Result<V6> {
    let l = wedge(x, y);
    let scale = x.norm() * y.norm();
    if scale == 0.0 || l.norm() <= 1e-12 * scale {
        return Err(GeomError::Degenerate("x and y are parallel".into()));
    }
    Ok(l)
}

/// Real-input convenience wrapper around [`plucker_embed`].
pub fn plucker_embed_real(x: [f64; 4], y: [f64; 4]) -> Result<V6> {
    plucker_embed(&V4::from_fn(|i, _| re(x[i])), &V4::from_fn(|i, _| re(y[i])))
}

/// Bilinear alternating wedge without the independence check.
pub fn wedge(x: &V4, y: &V4) -> V6 {
    V6::from_fn(|a, _| {
        let (i, j) = PLUCKER_PAIRS[a];
        x[i] * y[j] - x[j] * y[i]
    })
}

fn bivector_matrix(l: &V6) -> M4 {
    let mut m = M4::zeros();
    for (a, &(i, j)) in PLUCKER_PAIRS.iter().enumerate() {
        m[(i, j)] = l[a];
        m[(j, i)] = -l[a];
    }
    m
}

/// The 2-plane in `R⁴` (or `C⁴`) whose Plücker coordinates are `l`.
pub fn klein_plane(l: &V6) -> Result<TwoPlane<V4>> {
    klein_plane_tol(l, DECOMPOSABLE_TOL)
}

/// [`klein_plane`] with a caller-chosen decomposability tolerance, for lines
/// that carry discretization error.
pub fn klein_plane_tol(l: &V6, tol: f64) -> Result<TwoPlane<V4>> {
    let space = PseudoSpace::plucker();
    let n2 = l.norm_squared();
    if n2 == 0.0 {
        return Err(GeomError::Degenerate("zero bivector".into()));
    }
    let residual = space.pair(l, l).norm() / n2;
    if residual > tol {
        return Err(GeomError::NotDecomposable { residual });
    }
    // the columns of the bivector matrix span the plane
    let m = bivector_matrix(l);
    let cols: Vec<V4> = (0..4).map(|j| m.column(j).into_owned()).collect();
    let first = (0..4)
        .max_by(|&a, &b| cols[a].norm().total_cmp(&cols[b].norm()))
        .unwrap();
    let x = cols[first];
    let xh = x / re(x.norm());
    let y = (0..4)
        .filter(|&k| k != first)
        .map(|k| {
            let c = cols[k];
            let dot: C = xh.iter().zip(c.iter()).map(|(a, b)| a.conj() * b).sum();
            c - xh * dot
        })
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    Ok(TwoPlane { basis: [x, y] })
}

/// A nondegenerate quadratic form on `R⁴`, defined up to scale.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadricForm {
    pub q: Matrix4<f64>,
    pub vol_normalized: bool,
}

/// Signature class of a quadric form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadricType {
    /// Signature (2,2): `★² = +1`, ruled quadric with real generators.
    Split,
    /// Lorentz signature: `★² = -1`, generators complex conjugate.
    Lorentz,
}

impl QuadricForm {
    pub fn new(q: Matrix4<f64>) -> Result<Self> {
        if (q - q.transpose()).abs().max() > 1e-12 * q.abs().max().max(1.0) {
            return Err(GeomError::InvalidInput("quadric form is not symmetric".into()));
        }
        let f = Self { q, vol_normalized: false };
        f.kind()?;
        Ok(f)
    }

    pub fn kind(&self) -> Result<QuadricType> {
        let eig = SymmetricEigen::new(self.q);
        let scale = eig.eigenvalues.abs().max();
        let pos = eig.eigenvalues.iter().filter(|&&x| x > 1e-12 * scale).count();
        let neg = eig.eigenvalues.iter().filter(|&&x| x < -1e-12 * scale).count();
        match (pos, neg) {
            (2, 2) => Ok(QuadricType::Split),
            (3, 1) | (1, 3) => Ok(QuadricType::Lorentz),
            _ => Err(GeomError::Degenerate(format!(
                "quadric form has signature ({pos},{neg})"
            ))),
        }
    }

    /// Rescaled so that `|det q| = 1`, i.e. `vol_Q = vol`.
    pub fn normalized(&self) -> Self {
        let d = self.q.determinant().abs();
        Self { q: self.q / d.powf(0.25), vol_normalized: true }
    }

    pub fn eval(&self, x: &V4, y: &V4) -> C {
        let mut acc = ZERO;
        for i in 0..4 {
            for j in 0..4 {
                acc += x[i] * re(self.q[(i, j)]) * y[j];
            }
        }
        acc
    }
}

/// Second compound `Λ²A` acting on the Plücker basis.
pub fn compound2(a: &M4) -> M6 {
    M6::from_fn(|r, c| {
        let (i, j) = PLUCKER_PAIRS[r];
        let (k, l) = PLUCKER_PAIRS[c];
        a[(i, k)] * a[(j, l)] - a[(i, l)] * a[(j, k)]
    })
}

pub fn compound2_real(a: &Matrix4<f64>) -> M6 {
    compound2(&a.map(re))
}

/// The Hodge star `★_Q` on `Λ²R⁴` defined by `vol(v ∧ ★_Q w) = Q(v, w)`.
pub fn hodge_star(q: &QuadricForm) -> Result<M6> {
    q.kind()?;
    let qn = q.normalized();
    let space = PseudoSpace::plucker();
    Ok(space.gram_inv * compound2_real(&qn.q))
}

/// Inverse of [`hodge_star`]: the quadric (up to nonzero scale) whose star
/// operator is `star`.
///
/// The two generator families are the null vectors of the `±ε` eigenspaces;
/// `Q` is the one-dimensional solution of the linear conditions "Q vanishes
/// on each generator".
pub fn star_to_quadric(star: &M6) -> Result<QuadricForm> {
    let space = PseudoSpace::plucker();
    let scale = star.norm().max(1.0);
    let sym = space.gram * star;
    if (sym - sym.transpose()).norm() > 1e-8 * scale {
        return Err(GeomError::NotQuadricStar("not symmetric for the pairing".into()));
    }
    let sq = star * star;
    let eps = if (sq - M6::identity()).norm() <= 1e-8 * scale * scale {
        ONE
    } else if (sq + M6::identity()).norm() <= 1e-8 * scale * scale {
        crate::linalg::I
    } else {
        return Err(GeomError::NotQuadricStar("star² is not ±1".into()));
    };

    let mut rows: Vec<[C; 10]> = Vec::new();
    for sign in [ONE, -ONE] {
        let proj = (star + M6::identity() * (eps * sign)) * re(0.5);
        let cols = DMatrix::from_fn(6, 6, |i, j| proj[(i, j)]);
        let q = crate::linalg::orthonormal_columns(&cols, 1e-8);
        if q.ncols() != 3 {
            return Err(GeomError::NotQuadricStar("eigenspace is not 3-dimensional".into()));
        }
        let basis: Vec<V6> = (0..3).map(|j| V6::from_fn(|i, _| q[(i, j)])).collect();
        let w = complex_orthonormal(&space, &basis)?;
        for k in 0..5 {
            let th = 0.37 + 1.1 * k as f64;
            let n = w[0] * re(th.cos()) + w[1] * re(th.sin()) + w[2] * crate::linalg::I;
            let plane = klein_plane(&n)?;
            let [x, y] = &plane.basis;
            rows.push(sym_row(x, x));
            rows.push(sym_row(x, y));
            rows.push(sym_row(y, y));
        }
    }
    let a = DMatrix::from_fn(rows.len(), 10, |i, j| rows[i][j]);
    let svd = a.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| GeomError::NotQuadricStar("svd failed".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let coeffs: Vec<C> = (0..10).map(|j| vt[(imin, j)].conj()).collect();
    let big = coeffs
        .iter()
        .cloned()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap();
    let phase = big.conj() / re(big.norm());
    let mut qm = Matrix4::zeros();
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            let v = (coeffs[k] * phase).re;
            qm[(i, j)] = v;
            qm[(j, i)] = v;
            k += 1;
        }
    }
    // fix the sign: more positive than negative directions, else largest
    // entry positive
    let eig = SymmetricEigen::new(qm);
    let pos = eig.eigenvalues.iter().filter(|&&x| x > 0.0).count();
    let flip = if pos != 2 {
        pos < 2
    } else {
        let (mut best, mut val) = (0.0f64, 0.0);
        for x in qm.iter() {
            if x.abs() > best {
                best = x.abs();
                val = *x;
            }
        }
        val < 0.0
    };
    if flip {
        qm = -qm;
    }
    Ok(QuadricForm::new(qm)?.normalized())
}

fn sym_row(x: &V4, y: &V4) -> [C; 10] {
    let mut row = [ZERO; 10];
    let mut k = 0;
    for i in 0..4 {
        for j in i..4 {
            row[k] = if i == j { x[i] * y[i] } else { x[i] * y[j] + x[j] * y[i] };
            k += 1;
        }
    }
    row
}

/// Basis of the span with `<w_i, w_j> = δ_ij` for the complex bilinear
/// pairing (complex square roots allowed).
fn complex_orthonormal(space: &PseudoSpace, basis: &[V6]) -> Result<Vec<V6>> {
    let mut rest: Vec<V6> = basis.to_vec();
    let mut out = Vec::new();
    while !rest.is_empty() {
        // pivot on the largest self-pairing, mixing in a partner if all are null
        let (idx, val) = rest
            .iter()
            .enumerate()
            .map(|(i, v)| (i, space.pair(v, v).norm() / v.norm_squared()))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if val < 1e-6 && rest.len() > 1 {
            let j = if idx == 0 { 1 } else { 0 };
            let extra = rest[j];
            rest[idx] += extra;
            continue;
        }
        let v = rest.remove(idx);
        let nn = space.pair(&v, &v);
        if nn.norm() < 1e-10 * v.norm_squared() {
            return Err(GeomError::DegenerateSubspace("null eigenspace".into()));
        }
        let w = v / csqrt(nn);
        for r in rest.iter_mut() {
            let c = space.pair(&w, r);
            *r -= w * c;
        }
        out.push(w);
    }
    Ok(out)
}

/// Basis of the same span with diagonal ±1 Gram matrix.
///
/// Pivoted on the largest `|<w, w>|`; when every remaining vector is null a
/// pair with nonzero cross pairing is combined first.  Vectors that become
/// linearly dependent are dropped.  Each output vector is sign-fixed so its
/// largest-magnitude component has positive real part.
pub fn indefinite_orthogonalize(vectors: &[V6], space: &PseudoSpace) -> Result<Vec<V6>> {
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(GeomError::DegenerateSubspace("all vectors vanish".into()));
    }
    let dep_tol = 1e-10 * scale;
    let null_tol = 1e-9;
    let mut rest: Vec<V6> = vectors.to_vec();
    let mut out = Vec::new();
    loop {
        rest.retain(|v| v.norm() > dep_tol);
        if rest.is_empty() {
            break;
        }
        let (idx, val) = rest
            .iter()
            .enumerate()
            .map(|(i, v)| (i, space.pair(v, v).norm() / v.norm_squared()))
            .fold((0, f64::NEG_INFINITY), |best, cur| {
                if cur.1 > best.1 * (1.0 + 1e-9) + 1e-300 { cur } else { best }
            });
        if val < null_tol {
            // all remaining are null: look for a partner with nonzero cross pairing
            let mut best = (0, 0, 0.0);
            for a in 0..rest.len() {
                for b in a + 1..rest.len() {
                    let c = space.pair(&rest[a], &rest[b]).norm()
                        / (rest[a].norm() * rest[b].norm());
                    if c > best.2 {
                        best = (a, b, c);
                    }
                }
            }
            if best.2 < null_tol {
                return Err(GeomError::DegenerateSubspace(format!(
                    "{} remaining direction(s) are null and mutually orthogonal",
                    rest.len()
                )));
            }
            let extra = rest[best.1];
            rest[best.0] += extra;
            continue;
        }
        let v = rest.remove(idx);
        let nn = space.pair(&v, &v);
        let mut w = v / re(nn.norm().sqrt());
        let big = w
            .iter()
            .cloned()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap();
        if big.re < 0.0 {
            w = -w;
        }
        let wn = space.pair(&w, &w);
        for r in rest.iter_mut() {
            let c = space.pair(&w, r) / wn;
            *r -= w * c;
        }
        out.push(w);
    }
    Ok(out)
}

/// An isometry `C` with `Cᵀ·to.gram·C = from_gram`, built from orthonormal
/// bases of the two pairings.  Both must have the same signature.
pub fn isometry_between(from_gram: &M6, to: &PseudoSpace) -> Result<M6> {
    let from = PseudoSpace {
        m: to.m,
        n: to.n,
        gram: *from_gram,
        gram_inv: from_gram
            .try_inverse()
            .ok_or_else(|| GeomError::Degenerate("singular gram".into()))?,
    };
    let std: Vec<V6> = (0..6).map(|i| V6::from_fn(|r, _| if r == i { ONE } else { ZERO })).collect();
    let ba = sorted_by_sign(indefinite_orthogonalize(&std, &from)?, &from);
    let bb = sorted_by_sign(indefinite_orthogonalize(&std, to)?, to);
    let count = |b: &[V6], s: &PseudoSpace| b.iter().filter(|v| s.pair(v, v).re > 0.0).count();
    if count(&ba, &from) != count(&bb, to) {
        return Err(GeomError::SignatureMismatch("pairings have different signatures".into()));
    }
    let ma = M6::from_fn(|i, j| ba[j][i]);
    let mb = M6::from_fn(|i, j| bb[j][i]);
    let inv = ma
        .try_inverse()
        .ok_or_else(|| GeomError::Degenerate("basis not invertible".into()))?;
    Ok(mb * inv)
}

fn sorted_by_sign(mut b: Vec<V6>, s: &PseudoSpace) -> Vec<V6> {
    b.sort_by(|x, y| s.pair(y, y).re.total_cmp(&s.pair(x, x).re));
    b
}

/// Euclidean-normalized copy, used for comparisons of projective data.
pub fn unit(v: &V6) -> V6 {
    v / re(v.norm())
}

/// Hermitian overlap, exposed for tests and diagnostics.
pub fn overlap(a: &V6, b: &V6) -> C {
    herm_dot(a, b)
}
