//! Small dense complex linear algebra on six-dimensional space.
//!
//! Everything is carried in complex arithmetic; real data simply has zero
//! imaginary parts.  The matrix functions here (exponential, logarithm,
//! square roots) are only ever applied to matrices close to the identity or
//! to Lie algebra elements of moderate norm, which is what the grid
//! pipelines produce.

use nalgebra::{DMatrix, SMatrix, SVector};
use num_complex::Complex64;

pub type C = Complex64;
pub type V6 = SVector<C, 6>;
pub type M6 = SMatrix<C, 6, 6>;
pub type V4 = SVector<C, 4>;
pub type M4 = SMatrix<C, 4, 4>;

pub const ZERO: C = C::new(0.0, 0.0);
pub const ONE: C = C::new(1.0, 0.0);
pub const I: C = C::new(0.0, 1.0);

#[inline]
pub fn re(x: f64) -> C {
    C::new(x, 0.0)
}

pub fn v6_real(x: [f64; 6]) -> V6 {
    V6::from_iterator(x.iter().map(|&a| re(a)))
}

pub fn m6_real(rows: [[f64; 6]; 6]) -> M6 {
    M6::from_fn(|i, j| re(rows[i][j]))
}

/// Largest absolute imaginary part among the entries.
pub fn max_imag<const R: usize, const K: usize>(m: &SMatrix<C, R, K>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.im.abs()))
}

/// Euclidean (Hermitian) inner product, conjugate-linear in `a`.
pub fn herm_dot(a: &V6, b: &V6) -> C {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Sine of the angle between the complex lines spanned by `a` and `b`.
pub fn line_angle(a: &V6, b: &V6) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let ah = a / re(na);
    let bh = b / re(nb);
    let resid = bh - ah * herm_dot(&ah, &bh);
    resid.norm().min(1.0)
}

/// Distance between two subspaces given by their (not necessarily
/// orthogonal) projectors, measured as the operator gap on orthonormalized
/// ranges.  Returns the sine of the largest principal angle.
pub fn subspace_gap(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    let qa = orthonormal_columns(a, 1e-10);
    let qb = orthonormal_columns(b, 1e-10);
    if qa.ncols() != qb.ncols() {
        return 1.0;
    }
    // sin of largest principal angle = || (I - Qb Qb^H) Qa ||_2
    let proj = &qb * qb.adjoint();
    let resid = &qa - proj * &qa;
    resid.singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Hermitian Gram-Schmidt on the columns; columns whose residual falls
/// below `tol` times the largest column norm are dropped.
pub fn orthonormal_columns(a: &DMatrix<C>, tol: f64) -> DMatrix<C> {
    let scale = (0..a.ncols())
        .map(|j| a.column(j).norm())
        .fold(0.0, f64::max);
    let mut out: Vec<nalgebra::DVector<C>> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        for _ in 0..2 {
            for q in &out {
                let c = q.dotc(&v);
                v -= q * c;
            }
        }
        let n = v.norm();
        if n > tol * scale.max(f64::MIN_POSITIVE) {
            out.push(v / re(n));
        }
    }
    if out.is_empty() {
        return DMatrix::zeros(a.nrows(), 0);
    }
    DMatrix::from_columns(&out)
}

fn one_norm(m: &M6) -> f64 {
    (0..6)
        .map(|j| (0..6).map(|i| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring with a truncated Taylor
/// series.
pub fn expm(a: &M6) -> M6 {
    let n = one_norm(a);
    let mut s = 0u32;
    if n > 0.5 {
        s = (n / 0.5).log2().ceil() as u32;
    }
    let scaled = a / re(2f64.powi(s as i32));
    let mut term = M6::identity();
    let mut sum = M6::identity();
    for k in 1..=18 {
        term = term * scaled / re(k as f64);
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    for _ in 0..s {
        sum = sum * sum;
    }
    sum
}

/// Denman-Beavers iteration. Returns `(sqrt(a), sqrt(a)^{-1})` or `None`
/// if an intermediate inverse fails.
pub fn sqrtm_pair(a: &M6) -> Option<(M6, M6)> {
    let mut y = *a;
    let mut z = M6::identity();
    for _ in 0..60 {
        let yi = y.try_inverse()?;
        let zi = z.try_inverse()?;
        let yn = (y + zi) * re(0.5);
        let zn = (z + yi) * re(0.5);
        let delta = (yn - y).norm();
        y = yn;
        z = zn;
        if delta < 1e-15 * y.norm().max(1.0) {
            break;
        }
    }
    Some((y, z))
}

/// Principal matrix logarithm by inverse scaling and squaring.  `None` when
/// the square-root iteration fails or the argument is too far from the
/// identity to reach the series' radius.
pub fn logm(a: &M6) -> Option<M6> {
    let id = M6::identity();
    let mut x = *a;
    let mut k = 0;
    while (x - id).norm() > 0.2 {
        if k > 40 {
            return None;
        }
        x = sqrtm_pair(&x)?.0;
        k += 1;
    }
    // log X = 2 atanh(Y), Y = (X - I)(X + I)^{-1}
    let y = (x - id) * (x + id).try_inverse()?;
    let y2 = y * y;
    let mut term = y;
    let mut sum = y;
    for n in 1..40 {
        term *= y2;
        let t = term / re((2 * n + 1) as f64);
        sum += t;
        if t.norm() < 1e-18 {
            break;
        }
    }
    Some(sum * re(2.0 * 2f64.powi(k)))
}

/// Adjoint of `a` with respect to the symmetric pairing `gram`:
/// `<a x, y> = <x, a* y>`.
pub fn pairing_adjoint(a: &M6, gram: &M6, gram_inv: &M6) -> M6 {
    gram_inv * a.transpose() * gram
}

/// Nearest pairing-preserving map in the polar sense: `m (m* m)^{-1/2}`.
pub fn project_to_isometry(m: &M6, gram: &M6, gram_inv: &M6) -> M6 {
    let mm = pairing_adjoint(m, gram, gram_inv) * m;
    match sqrtm_pair(&mm) {
        Some((_, inv_sqrt)) => m * inv_sqrt,
        None => *m,
    }
}

/// Complex square root on the principal branch (continuous on the positive
/// real axis).
pub fn csqrt(z: C) -> C {
    z.sqrt()
}

/// Least-squares fit `y ≈ c₀a + c₁b` in the Hermitian norm.  Returns the
/// coefficients and the residual vector, or `None` when `a, b` are nearly
/// parallel (Gram determinant below `1e-14` relative).
pub fn fit2(a: &V6, b: &V6, y: &V6) -> Option<(C, C, V6)> {
    let (aa, ab, bb) = (herm_dot(a, a), herm_dot(a, b), herm_dot(b, b));
    let det = aa * bb - ab * ab.conj();
    if det.norm() <= 1e-14 * aa.norm() * bb.norm() || det.norm() == 0.0 {
        return None;
    }
    let (ya, yb) = (herm_dot(a, y), herm_dot(b, y));
    let c0 = (bb * ya - ab * yb) / det;
    let c1 = (aa * yb - ab.conj() * ya) / det;
    Some((c0, c1, y - a * c0 - b * c1))
}

/// Dense least squares `A x ≈ y` via SVD; `None` when the condition number
/// exceeds `1e12`.  Returns `(x, residual norm)`.
pub fn lstsq(a: &DMatrix<C>, y: &nalgebra::DVector<C>) -> Option<(nalgebra::DVector<C>, f64)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin < 1e-12 * smax {
        return None;
    }
    let x = svd.solve(y, 0.0).ok()?;
    let r = (a * &x - y).norm();
    Some((x, r))
}

/// Unit vector spanning the (numerical) kernel of a square matrix together
/// with the ratio of its smallest to second-smallest singular value.
pub fn kernel_vector(a: &DMatrix<C>) -> (nalgebra::DVector<C>, f64) {
    let n = a.ncols();
    // pad to square so the full right singular basis is available
    let rows = a.nrows().max(n);
    let mut m = DMatrix::zeros(rows, n);
    m.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&x, &y| sv[x].total_cmp(&sv[y]));
    let k = order[0];
    let gap = if sv.len() > 1 { sv[k] / sv[order[1]].max(f64::MIN_POSITIVE) } else { 0.0 };
    let v = nalgebra::DVector::from_fn(n, |i, _| vt[(k, i)].conj());
    (v, gap)
}
