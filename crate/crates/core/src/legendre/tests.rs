use super::*;
use crate::grid::fitted_order;
use crate::linalg::line_angle;
use crate::pseudo_linalg::compound2_real;
use crate::surface::{graph_chart, sphere, sphere_chart, torus, torus_chart, Ellipsoid, Graph};

fn ellipsoid(n: usize) -> SurfaceGrid {
    let e = Ellipsoid::new(1.0, 1.3, 1.7).unwrap();
    e.surface(e.chart(n).unwrap()).unwrap()
}

/// `-∂_uκ₁ ∂_vκ₂ / (κ₁ - κ₂)²` from the closed-form confocal curvatures.
fn ellipsoid_pq(u: f64, v: f64) -> f64 {
    let k = 1.0 * 1.3 * 1.7;
    let k1 = k * u.powf(-1.5) * v.powf(-0.5);
    let k2 = k * u.powf(-0.5) * v.powf(-1.5);
    let dk1 = -1.5 * k * u.powf(-2.5) * v.powf(-0.5);
    let dk2 = -1.5 * k * u.powf(-0.5) * v.powf(-2.5);
    -dk1 * dk2 / ((k1 - k2) * (k1 - k2))
}

#[test]
fn lie_lift_at_origin() {
    let f = Vector3::zeros();
    let n = Vector3::new(0.0, 0.0, 1.0);
    let (phi, nu) = (point_sphere(&f), tangent_plane(&f, &n));
    let sp = PseudoSpace::lie();
    let mut v0 = V6::zeros();
    v0[lie::V0] = re(1.0);
    let mut expect_nu = V6::zeros();
    expect_nu[lie::VM1] = re(1.0);
    expect_nu[lie::V3] = re(1.0);
    assert_eq!(phi, v0);
    assert_eq!(nu, expect_nu);
    assert_eq!(sp.pair(&phi, &phi), re(0.0));
    assert_eq!(sp.pair(&phi, &nu), re(0.0));
}

#[test]
fn torus_lift_is_null_and_dupin() {
    let g = lie_lift(&torus(1.0, 3.0, torus_chart(33).unwrap()).unwrap()).unwrap();
    let r = g.residuals();
    assert!(r.nullity <= 1e-12, "{r:?}");
    assert!(r.contact < 1e-3 && r.focal < 1e-3, "{r:?}");
    // κ₁ is constant along u, so l_u vanishes up to differencing error
    let lu = g.chart.d_u(&g.l_field());
    let worst = lu.valid_nodes().map(|(i, j)| lu.at(i, j).norm()).fold(0.0, f64::max);
    assert!(worst < 1e-12, "{worst}");
    let cc = conjugate_coefficients(&g).unwrap();
    let pq = cc.pq();
    assert!(pq.valid_nodes().all(|(i, j)| pq.at(i, j).norm() < 1e-10));
}

#[test]
fn lie_lift_requires_curvatures_and_rejects_umbilics() {
    let mut t = torus(1.0, 3.0, torus_chart(9).unwrap()).unwrap();
    t.kappa1 = None;
    assert_eq!(lie_lift(&t), Err(GeomError::MissingField("kappa1")));
    let s = sphere(1.0, sphere_chart(9).unwrap()).unwrap();
    assert!(matches!(lie_lift(&s), Err(GeomError::Umbilic { .. })));
}

#[test]
fn ellipsoid_pq_matches_curvature_formula() {
    let mut errs = Vec::new();
    for n in [17, 33, 65] {
        let s = ellipsoid(n);
        let g = lie_lift(&s).unwrap();
        let pq = conjugate_coefficients(&g).unwrap().pq();
        let c = &g.chart;
        let e = pq
            .valid_nodes()
            .map(|(i, j)| {
                let want = ellipsoid_pq(c.u(i), c.v(j));
                (pq.at(i, j) - re(want)).norm() / want.abs()
            })
            .fold(0.0, f64::max);
        errs.push((c.hu, e));
    }
    assert!(errs[2].1 < 1e-2, "{errs:?}");
    assert!(fitted_order(&errs) > 1.7, "{errs:?}");
}

#[test]
fn quadric_proj_lift_has_vanishing_coefficients() {
    let s = Graph::quadric().surface(graph_chart(17).unwrap()).unwrap();
    let g = proj_lift(&s).unwrap();
    let r = g.residuals();
    assert!(r.nullity < 1e-14 && r.contact < 1e-12 && r.focal < 1e-12, "{r:?}");
    let cc = conjugate_coefficients(&g).unwrap();
    assert!(cc.p.valid_nodes().all(|(i, j)| cc.p.at(i, j).norm() < 1e-12 && cc.q.at(i, j).norm() < 1e-12));
}

#[test]
fn proj_lift_rejects_non_asymptotic_chart() {
    let s = Graph::perturbed(0.5, 0.5).surface(graph_chart(17).unwrap()).unwrap();
    assert!(matches!(proj_lift(&s), Err(GeomError::NotAsymptotic { .. })));
}

#[test]
fn rescaled_lift_keeps_pq() {
    let base = Graph::perturbed(0.1, 0.1).surface(graph_chart(33).unwrap()).unwrap();
    let (s, _) = asymptotic_reparametrize(&base, None).unwrap();
    let mut scaled = s.clone();
    for (k, x) in scaled.lift.iter_mut().enumerate() {
        let (i, j) = (k / s.chart.nv, k % s.chart.nv);
        *x *= (0.3 * s.chart.u(i) - 0.2 * s.chart.v(j) * s.chart.v(j)).exp();
    }
    let a = conjugate_coefficients(&proj_lift(&s).unwrap()).unwrap().pq();
    let b = conjugate_coefficients(&proj_lift(&scaled).unwrap()).unwrap().pq();
    let dev = a.valid_nodes().map(|(i, j)| (a.at(i, j) - b.at(i, j)).norm()).fold(0.0, f64::max);
    let size = a.valid_nodes().map(|(i, j)| a.at(i, j).norm()).fold(0.0, f64::max);
    assert!(size > 1e-3, "{size}");
    assert!(dev < 1e-2 * size, "{dev} vs {size}");
}

#[test]
fn point_surface_round_trips() {
    let s = ellipsoid(17);
    let back = point_surface(&lie_lift(&s).unwrap()).unwrap();
    assert!(back.singular.is_empty());
    for (a, b) in s.points.iter().zip(&back.surface.points) {
        assert!((a - b).norm() < 1e-8);
    }
    for (a, b) in s.normals.as_ref().unwrap().iter().zip(back.surface.normals.as_ref().unwrap()) {
        assert!((a - b).norm() < 1e-8);
    }

    let (q, _) = asymptotic_reparametrize(&Graph::perturbed(0.1, 0.1).surface(graph_chart(33).unwrap()).unwrap(), None).unwrap();
    let back = point_surface(&proj_lift(&q).unwrap()).unwrap();
    for (i, j) in q.chart.interior(1) {
        let k = q.chart.idx(i, j);
        let (a, b) = (q.lift[k].normalize(), back.surface.lift[k].normalize());
        assert!(a.dot(&b).abs() > 1.0 - 1e-15, "{i} {j}");
        assert!((a - b * a.dot(&b).signum()).norm() < 1e-8);
    }
}

#[test]
fn cone_apex_is_flagged() {
    let c = GridChart::window(9, 9, (-0.4, 0.4), (0.0, 1.0)).unwrap();
    let (mut l, mut s) = (Vec::new(), Vec::new());
    for i in 0..c.nu {
        for j in 0..c.nv {
            let (u, v) = (c.u(i), c.v(j));
            let f = Vector3::new(u * v.cos(), u * v.sin(), u);
            let n = Vector3::new(v.cos(), v.sin(), -1.0) / 2f64.sqrt();
            let nu = tangent_plane(&f, &n);
            // κ₁ = 0 along the rulings; s rescaled so it stays finite at the apex
            l.push(nu);
            s.push(point_sphere(&f) - nu * re(2f64.sqrt() * u));
        }
    }
    let g = LegendreGrid::new(PseudoSpace::lie(), c.clone(), l, s).unwrap();
    assert!(g.residuals().nullity < 1e-14);
    let ps = point_surface(&g).unwrap();
    assert!(!ps.singular.is_empty());
    assert!(ps.singular.iter().all(|&(i, _)| i == 4), "{:?}", ps.singular);
}

#[test]
fn normal_shift_examples() {
    let t = torus(1.0, 3.0, torus_chart(9).unwrap()).unwrap();
    assert_eq!(normal_shift(&t, 0.0).unwrap(), t);
    let s = sphere(1.0, sphere_chart(9).unwrap()).unwrap();
    let h = normal_shift(&s, 0.5).unwrap();
    assert!(h.points.iter().all(|p| (p.norm() - 0.5).abs() < 1e-14));
    assert!(h.kappa1.as_ref().unwrap().iter().all(|k| (k - 2.0).abs() < 1e-14));
    assert!(matches!(normal_shift(&t, 1.0), Err(GeomError::FocalValue { .. })));
}

#[test]
fn normal_shift_matrix_matches_shifted_lift() {
    let t = 0.15;
    let s = ellipsoid(9);
    let g = lie_lift(&s).unwrap();
    let shifted = lie_lift(&normal_shift(&s, t).unwrap()).unwrap();
    let m = normal_shift_matrix(t);
    assert!(g.space.isometry_defect(&m) < 1e-15);
    for (a, b) in g.l.iter().zip(&shifted.l) {
        assert!(line_angle(&(m * a), b) < 1e-12);
    }
    for (a, b) in g.s.iter().zip(&shifted.s) {
        assert!(line_angle(&(m * a), b) < 1e-12);
    }
}

#[test]
fn apply_group_checks_and_acts() {
    let g = lie_lift(&ellipsoid(9)).unwrap();
    let same = apply_group(&g, &M6::identity()).unwrap();
    assert_eq!(same.l, g.l);
    assert!(matches!(apply_group(&g, &(M6::identity() * re(2.0))), Err(GeomError::NotIsometry { .. })));

    let q = proj_lift(&Graph::quadric().surface(graph_chart(9).unwrap()).unwrap()).unwrap();
    let a = nalgebra::Matrix4::<f64>::new(1.0, 0.2, 0.0, 0.1, 0.0, 1.0, 0.3, 0.0, 0.1, 0.0, 1.0, 0.2, 0.0, 0.0, 0.0, 1.0);
    let a = a / a.determinant().powf(0.25);
    let moved = apply_group(&q, &compound2_real(&a)).unwrap();
    assert!(moved.residuals().nullity < 1e-14);
}

#[test]
fn principal_data_examples() {
    let mut t = torus(1.0, 3.0, torus_chart(33).unwrap()).unwrap();
    t.kappa1 = None;
    t.kappa2 = None;
    let (fit, rep) = principal_data(&t).unwrap();
    assert!(rep.residual < 1e-6, "{rep:?}");
    for (i, j) in t.chart.interior(fit.margin) {
        assert!((fit.kappa1.as_ref().unwrap()[t.chart.idx(i, j)] - 1.0).abs() < 1e-6);
    }
    let s = sphere(1.0, sphere_chart(9).unwrap()).unwrap();
    assert!(matches!(principal_data(&s), Err(GeomError::Umbilic { .. })));

    let e = ellipsoid(65);
    let (fit, _) = principal_data(&e).unwrap();
    for (i, j) in e.chart.interior(fit.margin) {
        let k = e.chart.idx(i, j);
        assert!((fit.kappa1.as_ref().unwrap()[k] - e.kappa1.as_ref().unwrap()[k]).abs() < 1e-6);
        assert!((fit.kappa2.as_ref().unwrap()[k] - e.kappa2.as_ref().unwrap()[k]).abs() < 1e-6);
    }
    let el = Ellipsoid::new(1.0, 1.3, 1.7).unwrap();
    let ll = el.latlong_surface(GridChart::window(17, 17, (0.4, 1.0), (0.2, 0.7)).unwrap()).unwrap();
    assert!(matches!(principal_data(&ll), Err(GeomError::NotCurvatureLine { .. })));
}

#[test]
fn focal_frame_undoes_gauge_mixing() {
    let g = lie_lift(&ellipsoid(65)).unwrap();
    let c = &g.chart;
    let mut a = Vec::new();
    let mut b = Vec::new();
    for i in 0..c.nu {
        for j in 0..c.nv {
            let (u, v) = (c.u(i), c.v(j));
            let k = c.idx(i, j);
            let (m11, m12, m21, m22) = (1.0 + 0.3 * u, 0.4 * v.sin(), 0.2 * (u * v).cos(), 1.2 - 0.1 * v);
            a.push(g.l[k] * re(m11) + g.s[k] * re(m12));
            b.push(g.l[k] * re(m21) + g.s[k] * re(m22));
        }
    }
    let f = focal_frame(&g.space, c, &a, &b).unwrap();
    for (i, j) in c.interior(f.margin) {
        let k = c.idx(i, j);
        assert!(line_angle(&f.l[k], &g.l[k]) < 1e-6, "{}", line_angle(&f.l[k], &g.l[k]));
        assert!(line_angle(&f.s[k], &g.s[k]) < 1e-6);
    }
    let same = focal_frame(&g.space, c, &g.l, &g.s).unwrap();
    for (i, j) in c.interior(same.margin) {
        let k = c.idx(i, j);
        assert!(line_angle(&same.l[k], &g.l[k]) < 1e-6);
    }
    let flat = vec![g.l[0]; c.len()];
    let flat_s = vec![g.s[0]; c.len()];
    assert!(matches!(focal_frame(&g.space, c, &flat, &flat_s), Err(GeomError::NotImmersed { .. })));
}

#[test]
fn conformal_structure_signatures() {
    let g = lie_lift(&ellipsoid(33)).unwrap();
    let cs = conformal_structure(&g).unwrap();
    assert_eq!(cs.signature, ConformalSignature::Lorentz);
    assert!(cs.null_residual < 1e-3, "{}", cs.null_residual);

    let mut chart = graph_chart(33).unwrap();
    chart.reality = Reality::ComplexConjugate;
    let convex = Graph::paraboloid().surface(chart).unwrap();
    let g = proj_lift(&convex).unwrap();
    let cs = conformal_structure(&g).unwrap();
    assert_eq!(cs.signature, ConformalSignature::Definite);
    assert!(cs.null_residual < 1e-10, "{}", cs.null_residual);
}

#[test]
fn asymptotic_reparametrize_examples() {
    let q = Graph::quadric().surface(graph_chart(17).unwrap()).unwrap();
    let (out, rep) = asymptotic_reparametrize(&q, Some(q.chart.clone())).unwrap();
    assert!(rep.residual < 1e-12, "{rep:?}");
    for (a, b) in q.lift.iter().zip(&out.lift) {
        assert!((a - b).norm() < 1e-12);
    }
    let p = Graph::perturbed(0.1, 0.0).surface(graph_chart(65).unwrap()).unwrap();
    let (_, rep) = asymptotic_reparametrize(&p, None).unwrap();
    assert!(rep.residual < 1e-5, "{rep:?}");
    let convex = Graph::paraboloid().surface(graph_chart(17).unwrap()).unwrap();
    assert!(matches!(asymptotic_reparametrize(&convex, None), Err(GeomError::Signature { .. })));
}

#[test]
fn curvature_line_reparametrize_examples() {
    let t = torus(1.0, 3.0, torus_chart(33).unwrap()).unwrap();
    let (out, _) = curvature_line_reparametrize(&t, Some(t.chart.clone())).unwrap();
    for (a, b) in t.points.iter().zip(&out.points) {
        assert!((a - b).norm() < 1e-8, "{}", (a - b).norm());
    }
    let e = Ellipsoid::new(1.0, 1.3, 1.7).unwrap();
    let ll = e.latlong_surface(GridChart::window(65, 65, (0.4, 1.0), (0.2, 0.7)).unwrap()).unwrap();
    let (out, rep) = curvature_line_reparametrize(&ll, None).unwrap();
    assert!(rep.residual < 1e-6, "{rep:?}");
    let (_, fit) = principal_data(&SurfaceGrid { kappa1: None, kappa2: None, ..out }).unwrap();
    assert!(fit.residual < 1e-6, "{fit:?}");
    let s = sphere(1.0, sphere_chart(17).unwrap()).unwrap();
    assert!(matches!(curvature_line_reparametrize(&s, None), Err(GeomError::Umbilic { .. })));
}
