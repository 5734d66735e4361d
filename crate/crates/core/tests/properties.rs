use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;
use qg_core::linalg::{re, M4, M6, V4, V6};
use qg_core::loop_tools::{symmetric_split, SymmetricPair};
use qg_core::pseudo_linalg::{compound2, compound2_real, hodge_star, star_to_quadric, wedge, PseudoSpace, QuadricForm};

fn v4(x: [f64; 4]) -> V4 {
    V4::from_fn(|i, _| re(x[i]))
}

fn m4(x: [[f64; 4]; 4]) -> Matrix4<f64> {
    Matrix4::from_fn(|i, j| x[i][j])
}

fn coords() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-1.0..1.0f64)
}

fn six() -> impl Strategy<Value = [f64; 6]> {
    prop::array::uniform6(-1.0..1.0f64)
}

/// Perturbations of the identity, rescaled to unit determinant.
fn sl4() -> impl Strategy<Value = Matrix4<f64>> {
    prop::array::uniform4(coords()).prop_filter_map("near singular", |x| {
        let a = Matrix4::identity() + m4(x) * 0.4;
        let d = a.determinant();
        (d > 0.05).then(|| a / d.powf(0.25))
    })
}

fn well_conditioned(b: &Matrix4<f64>) -> bool {
    let s = b.singular_values();
    s.min() > 0.2 * s.max()
}

/// `Bᵀ diag(signs) B` for a random well-conditioned `B`.
fn quadric(signs: [f64; 4]) -> impl Strategy<Value = (Matrix4<f64>, Matrix4<f64>)> {
    prop::array::uniform4(coords()).prop_filter_map("ill conditioned", move |x| {
        let b = Matrix4::identity() + m4(x) * 0.5;
        well_conditioned(&b).then(|| (b.transpose() * Matrix4::from_diagonal(&Vector4::from(signs)) * b, b))
    })
}

fn proportional(a: &Matrix4<f64>, b: &Matrix4<f64>) -> (f64, f64) {
    let c = a.dot(b) / b.dot(b);
    ((a - b * c).norm() / a.norm(), c)
}

fn star_residual(star: &M6, l: &V6) -> f64 {
    let s = star * l;
    ((s - l).norm().min((s + l).norm())) / l.norm()
}

/// Largest value of `Q` on the plane of `x ∧ y`, relative to the plane size.
fn restricted(q: &Matrix4<f64>, x: &V4, y: &V4) -> f64 {
    let qf = QuadricForm::new(*q).unwrap().normalized();
    let n = x.norm() * y.norm().max(x.norm());
    [qf.eval(x, x), qf.eval(x, y), qf.eval(y, y)].iter().map(|z| z.norm()).fold(0.0, f64::max) / (n * n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn decomposable_bivectors_are_null(x in coords(), y in coords()) {
        let l = wedge(&v4(x), &v4(y));
        let sp = PseudoSpace::plucker();
        prop_assert!(sp.pair(&l, &l).norm() <= 1e-12 * l.norm_squared().max(1e-300));
    }

    #[test]
    fn unimodular_compounds_preserve_the_pairing(a in sl4(), v in six(), w in six()) {
        let g = compound2_real(&a);
        let sp = PseudoSpace::plucker();
        let (v, w) = (V6::from_fn(|i, _| re(v[i])), V6::from_fn(|i, _| re(w[i])));
        let scale = v.norm() * w.norm() * g.norm() * g.norm();
        prop_assert!((sp.pair(&(g * v), &(g * w)) - sp.pair(&v, &w)).norm() <= 1e-10 * scale);
        prop_assert!(sp.isometry_defect(&g) <= 1e-10 * g.norm_squared());
    }

    #[test]
    fn compound_is_multiplicative(a in prop::array::uniform4(coords()), b in prop::array::uniform4(coords())) {
        let (a, b): (M4, M4) = (m4(a).map(re), m4(b).map(re));
        let lhs = compound2(&(a * b));
        let rhs = compound2(&a) * compound2(&b);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + compound2(&a).norm() * compound2(&b).norm()));
    }

    #[test]
    fn adjoint_is_an_involution(x in prop::array::uniform6(six())) {
        let a = M6::from_fn(|i, j| re(x[i][j]));
        for sp in [PseudoSpace::lie(), PseudoSpace::plucker()] {
            prop_assert!((sp.adjoint(&sp.adjoint(&a)) - a).norm() <= 1e-12 * a.norm().max(1.0));
            let skew = a - sp.adjoint(&a);
            prop_assert!(sp.skew_defect(&skew) <= 1e-12);
        }
    }

    #[test]
    fn star_and_quadric_invert_each_other(
        (q, _) in prop_oneof![quadric([1.0, 1.0, -1.0, -1.0]), quadric([1.0, 1.0, 1.0, -1.0])]
    ) {
        let form = QuadricForm::new(q).unwrap();
        let star = hodge_star(&form).unwrap();
        let back = star_to_quadric(&star).unwrap();
        let (res, c) = proportional(&back.q, &q);
        prop_assert!(res <= 1e-8, "residual {res}");
        prop_assert!(c.abs() > 0.0);
        let again = hodge_star(&back).unwrap();
        prop_assert!((again - star).norm() <= 1e-8 * star.norm());
    }

    #[test]
    fn generators_are_star_eigenvectors((q, b) in quadric([1.0, 1.0, -1.0, -1.0]), th in 0.0..std::f64::consts::TAU, family in any::<bool>()) {
        let (c, s) = (th.cos(), th.sin());
        let y2 = if family { [0.0, 1.0, -s, c] } else { [0.0, 1.0, s, -c] };
        let binv = b.try_inverse().unwrap();
        let x = v4((binv * Vector4::from([1.0, 0.0, c, s])).into());
        let y = v4((binv * Vector4::from(y2)).into());
        prop_assert!(restricted(&q, &x, &y) <= 1e-9);
        let star = hodge_star(&QuadricForm::new(q).unwrap()).unwrap();
        prop_assert!(star_residual(&star, &wedge(&x, &y)) <= 1e-9);
    }

    #[test]
    fn eigenvector_lemma_agrees_on_random_lines((q, _) in quadric([1.0, 1.0, -1.0, -1.0]), x in coords(), y in coords()) {
        let (x, y) = (v4(x), v4(y));
        let l = wedge(&x, &y);
        prop_assume!(l.norm() > 0.1 * x.norm() * y.norm());
        let star = hodge_star(&QuadricForm::new(q).unwrap()).unwrap();
        prop_assert_eq!(star_residual(&star, &l) <= 1e-9, restricted(&q, &x, &y) <= 1e-9);
    }

    #[test]
    fn symmetric_split_reconstructs(basis in prop::array::uniform3(six()), x in prop::array::uniform6(six())) {
        let sp = PseudoSpace::lie();
        let basis: Vec<V6> = basis.iter().map(|b| V6::from_fn(|i, _| re(b[i]))).collect();
        let proj = sp.projector(&basis);
        prop_assume!(proj.is_ok());
        let proj = proj.unwrap();
        prop_assume!(proj.norm() < 1e3);
        let pair = SymmetricPair::new(sp.clone(), proj, re(1.0)).unwrap();
        let a = M6::from_fn(|i, j| re(x[i][j]));
        let xi = a - sp.adjoint(&a);
        let (k, p) = symmetric_split(&xi, &pair).unwrap();
        let tol = 1e-9 * xi.norm() * proj.norm_squared();
        prop_assert!((k + p - xi).norm() <= tol);
        prop_assert!((k * proj - proj * k).norm() <= tol);
        prop_assert!((proj * p * proj).norm() <= tol);
        prop_assert!(sp.skew_defect(&k) <= 1e-8 * proj.norm_squared() && sp.skew_defect(&p) <= 1e-8 * proj.norm_squared());
    }
}
