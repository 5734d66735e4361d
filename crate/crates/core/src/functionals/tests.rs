use super::*;
use crate::gauss_map::tension;
use crate::grid::fitted_order;
use crate::legendre::{asymptotic_reparametrize, conjugate_coefficients};
use crate::surface::{graph_chart, torus, torus_chart, Ellipsoid, Graph};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ellipsoid_surface(n: usize) -> SurfaceGrid {
    let e = Ellipsoid::new(1.0, 1.3, 1.7).unwrap();
    e.surface(e.chart(n).unwrap()).unwrap()
}

fn asymptotic_patch(n: usize) -> SurfaceGrid {
    let base = Graph::perturbed(0.1, 0.1).surface(graph_chart(n).unwrap()).unwrap();
    asymptotic_reparametrize(&base, None).unwrap().0
}

/// Integral of the closed-form density over the same nodes.
fn ellipsoid_oracle_total(s: &SurfaceGrid, margin: usize) -> f64 {
    let k = 1.0 * 1.3 * 1.7;
    let c = &s.chart;
    c.interior(margin)
        .map(|(i, j)| {
            let (u, v) = (c.u(i), c.v(j));
            let (k1, k2) = (k * u.powf(-1.5) * v.powf(-0.5), k * u.powf(-0.5) * v.powf(-1.5));
            let (d1, d2) = (-1.5 * k * u.powf(-2.5) * v.powf(-0.5), -1.5 * k * u.powf(-0.5) * v.powf(-2.5));
            -d1 * d2 / ((k1 - k2) * (k1 - k2)) * c.hu * c.hv
        })
        .sum()
}

#[test]
fn energy_of_trivial_examples() {
    let (_, _, s) = lie_pipeline(&torus(1.0, 3.0, torus_chart(33).unwrap()).unwrap()).unwrap();
    assert!(willmore_energy(&s).total.abs() < 1e-7);
    let q = Graph::quadric().surface(graph_chart(17).unwrap()).unwrap();
    let s = conformal_gauss(&proj_lift(&q).unwrap()).unwrap();
    let e = willmore_energy(&s);
    assert!(e.total.abs() < 1e-10);
    assert!(proj_density(&q).unwrap().max_abs(0) < 1e-10);
    let json = e.to_json();
    assert!(json.starts_with("{\"total\":"));
}

#[test]
fn ellipsoid_energy_matches_oracle() {
    for (n, tol) in [(65, 0.02), (129, 0.005)] {
        let (_, _, s) = lie_pipeline(&ellipsoid_surface(n)).unwrap();
        let e = willmore_energy(&s);
        let want = ellipsoid_oracle_total(&ellipsoid_surface(n), e.density.margin);
        assert!((e.total - want).abs() <= tol * want.abs(), "{n}: {} vs {want}", e.total);
    }
}

#[test]
fn density_chain_lie() {
    let mut errs = Vec::new();
    for n in [33, 65] {
        let surf = ellipsoid_surface(n);
        let (surf, f, s) = lie_pipeline(&surf).unwrap();
        let lie = lie_density(surf.kappa1.as_ref().unwrap(), surf.kappa2.as_ref().unwrap(), &surf.chart).unwrap();
        let w = willmore_density(&s);
        let pq = conjugate_coefficients(&f).unwrap().pq();
        let mut worst: f64 = 0.0;
        for (i, j) in w.valid_nodes() {
            worst = worst.max((lie.minus.at(i, j) - w.at(i, j).re).abs());
            assert!((lie.plus.at(i, j) + lie.minus.at(i, j)).abs() == 0.0);
            assert!((pq.at(i, j).re - w.at(i, j).re).abs() < 1e-2 * w.at(i, j).re.abs().max(1.0));
        }
        errs.push((surf.chart.hu, worst));
    }
    assert!(errs[1].1 < 1e-3, "{errs:?}");
    assert!(fitted_order(&errs) > 1.8, "{errs:?}");
}

#[test]
fn torus_lie_density_vanishes() {
    let t = torus(1.0, 3.0, torus_chart(17).unwrap()).unwrap();
    let d = lie_density(t.kappa1.as_ref().unwrap(), t.kappa2.as_ref().unwrap(), &t.chart).unwrap();
    assert!(d.plus.max_abs(0) < 1e-12);
}

#[test]
fn density_chain_projective() {
    let mut errs = Vec::new();
    for n in [33, 65] {
        let surf = asymptotic_patch(n);
        let pd = proj_density(&surf).unwrap();
        let s = conformal_gauss(&proj_lift(&surf).unwrap()).unwrap();
        let w = willmore_density(&s);
        let worst = w.valid_nodes().map(|(i, j)| (pd.at(i, j) - w.at(i, j).re).abs()).fold(0.0, f64::max);
        errs.push((surf.chart.hu, worst));
        assert!(pd.max_abs(0) > 1e-3);
    }
    assert!(errs[1].1 < 1e-3, "{errs:?}");
}

#[test]
fn proj_density_is_independent_of_lift_scale() {
    let surf = asymptotic_patch(33);
    let mut scaled = surf.clone();
    for (k, x) in scaled.lift.iter_mut().enumerate() {
        let (i, j) = (k / surf.chart.nv, k % surf.chart.nv);
        *x *= (0.4 * surf.chart.u(i) + 0.3 * surf.chart.v(j) * surf.chart.u(i)).exp();
    }
    let (a, b) = (proj_density(&surf).unwrap(), proj_density(&scaled).unwrap());
    let dev = a.valid_nodes().map(|(i, j)| (a.at(i, j) - b.at(i, j)).abs()).fold(0.0, f64::max);
    assert!(dev < 1e-6 * a.max_abs(0).max(1.0), "{dev}");
}

#[test]
fn proj_density_rejects_non_asymptotic_chart() {
    let s = Graph::perturbed(0.5, 0.5).surface(graph_chart(17).unwrap()).unwrap();
    assert!(matches!(proj_density(&s), Err(GeomError::NotAsymptotic { .. })));
}

#[test]
fn gradient_density_examples() {
    let (_, f, s) = lie_pipeline(&torus(1.0, 3.0, torus_chart(33).unwrap()).unwrap()).unwrap();
    let g = willmore_gradient_density(&f, &s, &tension(&s)).unwrap();
    assert!(g.max_abs(0) < 1e-4, "{}", g.max_abs(0));
    let (_, f, s) = lie_pipeline(&ellipsoid_surface(33)).unwrap();
    let g = willmore_gradient_density(&f, &s, &tension(&s)).unwrap();
    let min = g.valid_nodes().map(|(i, j)| g.at(i, j).abs()).fold(f64::INFINITY, f64::min);
    assert!(g.max_abs(0) > 1e-2, "{}", g.max_abs(0));
    let _ = min;
    let q = Graph::quadric().surface(graph_chart(33).unwrap()).unwrap();
    let fq = proj_lift(&q).unwrap();
    let sq = conformal_gauss(&fq).unwrap();
    assert!(willmore_gradient_density(&fq, &sq, &tension(&sq)).unwrap().max_abs(0) < 1e-10);
}

#[test]
fn descent_zero_step_is_identity() {
    let tr = willmore_descent(&ellipsoid_surface(25), 2, 0.0).unwrap();
    assert_eq!(tr.reports.len(), 3);
    assert!(tr.reports.windows(2).all(|w| w[0].total == w[1].total));
}

#[test]
fn descent_decreases_energy() {
    let tr = willmore_descent(&ellipsoid_surface(33), 50, 1e-4).unwrap();
    let w: Vec<f64> = tr.reports.iter().map(|r| r.total).collect();
    assert!(w.windows(2).all(|p| p[1] <= p[0]), "{w:?}");
    assert!(w[50] < 0.99 * w[0], "{w:?}");
}

#[test]
fn descent_keeps_torus_minimal() {
    let tr = willmore_descent(&torus(1.0, 3.0, torus_chart(25).unwrap()).unwrap(), 2, 1e-2).unwrap();
    assert!(tr.reports.iter().all(|r| r.total.abs() <= 1e-7));
}

#[test]
fn invariance_under_lie_transforms() {
    let surf = ellipsoid_surface(33);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let transforms = vec![
        Transform::Identity,
        Transform::Lie(random_lie(&mut rng, 0.3)),
        Transform::NormalShift(0.1),
        random_mobius(&mut rng, 4.0),
    ];
    let rep = invariance_report(&surf, &transforms).unwrap();
    assert_eq!(rep[0].density_deviation, 0.0);
    assert!(rep[1].density_deviation < 1e-8, "{rep:?}");
    assert!(rep[2].density_deviation < 1e-3, "{rep:?}");
    assert!(rep[3].density_deviation < 1e-3, "{rep:?}");
    assert!(matches!(invariance_report(&surf, &[Transform::Projective(Matrix4::identity())]), Err(GeomError::IncompatibleTransform(_))));
}

#[test]
fn normal_shift_invariance_converges() {
    let mut errs = Vec::new();
    for n in [33, 65] {
        let rep = invariance_report(&ellipsoid_surface(n), &[Transform::NormalShift(0.3)]).unwrap();
        errs.push((1.0 / (n - 1) as f64, rep[0].density_deviation));
    }
    assert!(errs[1].1 < 1e-4, "{errs:?}");
    assert!(fitted_order(&errs) > 1.8, "{errs:?}");
}

#[test]
fn projective_invariance() {
    let surf = asymptotic_patch(65);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rep = invariance_report(&surf, &[Transform::Projective(random_sl4(&mut rng, 0.2))]).unwrap();
    assert!(rep[0].density_deviation < 1e-4, "{rep:?}");
    assert!(matches!(invariance_report(&surf, &[Transform::NormalShift(0.1)]), Err(GeomError::IncompatibleTransform(_))));
}


