use super::*;
use crate::functionals::lie_pipeline;
use crate::gauss_map::{blaschke_residual, d_s};
use crate::grid::fitted_order;
use crate::linalg::expm;
use crate::gauss_map::conformal_gauss;
use crate::grid::Reality;
use crate::legendre::proj_lift;
use crate::surface::{graph_chart, torus, torus_chart, Ellipsoid, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ellipsoid_gauss(n: usize) -> GaussMapGrid {
    let e = Ellipsoid::new(1.0, 1.3, 1.7).unwrap();
    lie_pipeline(&e.surface(e.chart(n).unwrap()).unwrap()).unwrap().2
}

fn torus_gauss(n: usize) -> GaussMapGrid {
    lie_pipeline(&torus(1.0, 3.0, torus_chart(n).unwrap()).unwrap()).unwrap().2
}

fn constant_gauss(n: usize) -> GaussMapGrid {
    let s = ellipsoid_gauss(n);
    let k = s.chart.idx(n / 2, n / 2);
    let b = s.basis[k];
    GaussMapGrid::from_spans(s.space.clone(), s.chart.clone(), vec![Some(b); s.chart.len()], s.margin).unwrap()
}

fn random_skew(space: &PseudoSpace, rng: &mut ChaCha8Rng) -> M6 {
    skew_basis(space).iter().fold(M6::zeros(), |acc, b| acc + b * re(rng.gen_range(-1.0..1.0)))
}

fn ellipsoid_pair() -> SymmetricPair {
    let s = ellipsoid_gauss(17);
    SymmetricPair::at_node(&s, (8, 8)).unwrap()
}

#[test]
fn split_of_commuting_and_anticommuting_elements() {
    let pair = ellipsoid_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = random_skew(&pair.space, &mut rng);
    // x + star x star commutes with the star, x - star x star anticommutes
    let r = pair.projector * re(2.0) - M6::identity();
    let even = (x + r * x * r) * re(0.5);
    let odd = (x - r * x * r) * re(0.5);
    let (k, p) = symmetric_split(&even, &pair).unwrap();
    assert!((k - even).norm() < 1e-12 * even.norm() && p.norm() < 1e-12 * even.norm());
    let (k, p) = symmetric_split(&odd, &pair).unwrap();
    assert!(k.norm() < 1e-12 * odd.norm() && (p - odd).norm() < 1e-12 * odd.norm());
}

#[test]
fn split_satisfies_eigenconditions() {
    let pair = ellipsoid_pair();
    let (p, q) = (pair.projector, M6::identity() - pair.projector);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let x = random_skew(&pair.space, &mut rng);
        let (xk, xp) = symmetric_split(&x, &pair).unwrap();
        let n = x.norm();
        assert!((xk + xp - x).norm() <= 1e-12 * n);
        // ξ_𝔨 preserves S_o and S_o⊥; ξ_𝔭 swaps them
        assert!((q * xk * p).norm() <= 1e-12 * n && (p * xk * q).norm() <= 1e-12 * n);
        assert!((p * xp * p).norm() <= 1e-12 * n && (q * xp * q).norm() <= 1e-12 * n);
        assert!(pair.space.skew_defect(&xk) <= 1e-12 && pair.space.skew_defect(&xp) <= 1e-12);
    }
}

#[test]
fn split_rejects_non_skew() {
    let pair = ellipsoid_pair();
    assert!(matches!(symmetric_split(&M6::identity(), &pair), Err(GeomError::NotSkew { .. })));
}

#[test]
fn symmetric_pair_invariants() {
    let pair = ellipsoid_pair();
    assert!(pair.bracket_residual() <= 1e-12);
    let (pk, pp) = pair.projector_matrices();
    let id = DMatrix::<C>::identity(15, 15);
    assert!((&pk + &pp - &id).norm() <= 1e-12);
    assert!((&pk * &pk - &pk).norm() <= 1e-12);
    // dim 𝔨 = dim so(S_o) + dim so(S_o⊥) = 3 + 3
    assert!((pk.trace() - re(6.0)).norm() <= 1e-12);
}

#[test]
fn skew_basis_spans_the_algebra() {
    let sp = PseudoSpace::lie();
    let basis = skew_basis(&sp);
    assert_eq!(basis.len(), 15);
    assert!(basis.iter().all(|b| sp.skew_defect(b) <= 1e-14));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random_skew(&sp, &mut rng);
    let back = basis.iter().zip(skew_coordinates(&sp, &x)).fold(M6::zeros(), |acc, (b, c)| acc + b * c);
    assert!((back - x).norm() <= 1e-13 * x.norm());
}

#[test]
fn constant_map_has_identity_frame_and_zero_connection() {
    let s = constant_gauss(17);
    let f = frame(&s).unwrap();
    assert!(f.frames.iter().all(|x| (x - M6::identity()).norm() == 0.0));
    let a = maurer_cartan(&f).unwrap();
    assert_eq!(max_flatness(&a), 0.0);
    assert!(a.u_edges.data.iter().chain(&a.v_edges.data).all(|e| e.total().norm() == 0.0));
}

#[test]
fn ellipsoid_frame_maps_base_onto_gauss_map() {
    let s = ellipsoid_gauss(33);
    let f = frame(&s).unwrap();
    assert!(f.subspace_defect(&s) <= 1e-9, "{}", f.subspace_defect(&s));
    assert!(f.isometry_defect() <= 1e-12);
    assert_eq!(f.at(16, 16), &M6::identity());
    // no gauge jumps away from the chart corner next to the umbilic
    assert!(f.jumps().max_abs(8) <= 0.5, "{}", f.jumps().max_abs(8));
}

#[test]
fn frame_jumps_shrink_under_refinement() {
    let j: Vec<f64> = [17, 33, 65].iter().map(|&n| frame(&ellipsoid_gauss(n)).unwrap().max_jump()).collect();
    assert!(j[2] < j[1], "{j:?}");
    assert!(frame(&torus_gauss(33)).unwrap().max_jump() <= 0.5);
}

#[test]
fn torus_frame_is_produced() {
    let s = torus_gauss(33);
    let f = frame(&s).unwrap();
    assert!(f.subspace_defect(&s) <= 1e-9);
    assert!(f.isometry_defect() <= 1e-12);
}

/// Largest deviation of `α_𝔭′/h_u` from `F⁻¹(S_u - S_u⋆)F` at u-edge
/// midpoints, relative to the largest `‖S_u - S_u⋆‖`.
fn structural_defect(n: usize) -> f64 {
    let s = ellipsoid_gauss(n);
    let f = frame(&s).unwrap();
    let a = maurer_cartan(&f).unwrap();
    let (su, _) = d_s(&s);
    let sp = &s.space;
    let x = |i: usize, j: usize| su.at(i, j) - sp.adjoint(su.at(i, j));
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, j) in a.u_edges.valid_nodes() {
        if !su.is_valid(i, j) || !su.is_valid(i + 1, j) {
            continue;
        }
        let e = a.u_edges.at(i, j);
        let mid = f.at(i, j) * expm(&(e.total() * re(0.5)));
        let target = sp.adjoint(&mid) * (x(i, j) + x(i + 1, j)) * re(0.5) * mid;
        worst = worst.max((e.p_prime / re(s.chart.hu) - target).norm());
        scale = scale.max(x(i, j).norm());
    }
    worst / scale
}

#[test]
fn maurer_cartan_structural_identity() {
    let e: Vec<(f64, f64)> = [17, 33, 65].iter().map(|&n| (1.0 / (n - 1) as f64, structural_defect(n))).collect();
    assert!(e[1].1 <= 1e-2, "{e:?}");
    assert!(fitted_order(&e) >= 1.0, "{e:?}");
}

#[test]
fn p_parts_live_on_their_edges() {
    let a = maurer_cartan(&frame(&ellipsoid_gauss(17)).unwrap()).unwrap();
    assert!(a.u_edges.data.iter().all(|e| e.p_doubleprime.norm() == 0.0));
    assert!(a.v_edges.data.iter().all(|e| e.p_prime.norm() == 0.0));
    assert!(a.max_imag() <= 1e-12);
}

#[test]
fn spectral_connection_identities() {
    let a = maurer_cartan(&frame(&ellipsoid_gauss(17)).unwrap()).unwrap();
    let one = spectral_connection(&a, ONE).unwrap();
    assert_eq!(one.u_edges, a.u_edges);
    let minus = spectral_connection(&a, -ONE).unwrap();
    for (e, m) in a.u_edges.data.iter().zip(&minus.u_edges.data) {
        assert!((m.total() - a.base.involution(&e.total())).norm() <= 1e-12 * (1.0 + e.total().norm()));
    }
    let (l, mu) = (C::new(2.0, 0.0), C::new(-0.5, 0.0));
    let twice = spectral_connection(&spectral_connection(&a, l).unwrap(), mu).unwrap();
    let once = spectral_connection(&a, l * mu).unwrap();
    assert_eq!(twice.lambda, once.lambda);
    for (x, y) in twice.v_edges.data.iter().zip(&once.v_edges.data) {
        assert!((x.total() - y.total()).norm() <= 1e-14 * (1.0 + y.total().norm()));
    }
    assert!(matches!(spectral_connection(&a, C::new(0.0, 0.0)), Err(GeomError::ZeroLambda)));
    // real λ keeps a real chart's connection real
    assert!(spectral_connection(&a, re(3.0)).unwrap().max_imag() <= 1e-12);
}

#[test]
fn flatness_of_zero_and_unit_connections() {
    let s = ellipsoid_gauss(17);
    let pair = SymmetricPair::at_node(&s, (8, 8)).unwrap();
    let z = ConnectionGrid::zero(s.chart.clone(), pair, s.margin);
    assert_eq!(max_flatness(&z), 0.0);
    let a = maurer_cartan(&frame(&s).unwrap()).unwrap();
    // exact edge logarithms telescope: flat up to roundoff
    assert!(max_flatness(&a) <= 1e-6, "{}", max_flatness(&a));
}

#[test]
fn flatness_discriminates_harmonic_from_non_harmonic() {
    let lam = re(TEST_LAMBDA);
    let mut ell = Vec::new();
    for n in [17, 33, 65] {
        let t = maurer_cartan(&frame(&torus_gauss(n)).unwrap()).unwrap();
        assert_eq!(max_flatness(&spectral_connection(&t, lam).unwrap()), 0.0);
        let f = frame(&ellipsoid_gauss(n)).unwrap();
        let a = maurer_cartan(&f).unwrap();
        let h = harmonicity(&f, &a).unwrap();
        assert!(!h.is_harmonic(), "{h:?}");
        ell.push((central_flatness(&spectral_connection(&a, lam).unwrap()), max_flatness(&a)));
    }
    // converges to a positive density, far above the unit-λ residual
    let rel = (ell[2].0 - ell[1].0).abs() / ell[2].0;
    assert!(rel <= 0.2, "{ell:?}");
    assert!(ell.iter().all(|(t, one)| *t >= 10.0 * one), "{ell:?}");
}

#[test]
fn integrate_zero_connection_is_constant() {
    let s = ellipsoid_gauss(17);
    let pair = SymmetricPair::at_node(&s, (8, 8)).unwrap();
    let z = ConnectionGrid::zero(s.chart.clone(), pair, s.margin);
    let f0 = frame(&s).unwrap().frames[s.chart.idx(12, 5)];
    let (f, mismatch) = integrate_frame(&z, &f0);
    assert_eq!(mismatch, 0.0);
    assert!(f.chart.interior(f.margin).all(|(i, j)| (f.at(i, j) - f0).norm() <= 1e-12 * f0.norm()));
}

#[test]
fn integrate_recovers_frame() {
    let s = ellipsoid_gauss(33);
    let f = frame(&s).unwrap();
    let a = maurer_cartan(&f).unwrap();
    let (g, mismatch) = integrate_frame(&a, &M6::identity());
    let dev = f.chart.interior(f.margin).map(|(i, j)| (g.at(i, j) - f.at(i, j)).norm() / f.at(i, j).norm()).fold(0.0, f64::max);
    assert!(dev <= 1e-9, "{dev}");
    assert!(mismatch <= 1e-9, "{mismatch}");
    assert!(g.isometry_defect() <= 1e-12);
}

#[test]
fn deform_at_unit_lambda_is_identity() {
    let s = torus_gauss(33);
    let d = spectral_deform(&s, ONE).unwrap();
    assert!(projector_deviation(&s, &d) <= 1e-9);
}

#[test]
fn deform_constant_map_stays_constant() {
    let s = constant_gauss(17);
    let d = spectral_deform(&s, re(-3.0)).unwrap();
    assert!(projector_deviation(&s, &d) <= 1e-12);
}

#[test]
fn deform_torus_preserves_blaschke() {
    let s = torus_gauss(33);
    let d = spectral_deform(&s, re(2.0)).unwrap();
    let (a, b) = blaschke_residual(&s);
    let (c, e) = blaschke_residual(&d);
    assert!(c.max_abs(0) <= 2.0 * a.max_abs(0) + 1e-3);
    assert!(e.max_abs(0) <= 2.0 * b.max_abs(0) + 1e-3);
}

#[test]
fn deform_rejects_non_harmonic_and_bad_lambda() {
    let s = ellipsoid_gauss(33);
    assert!(matches!(spectral_deform(&s, re(2.0)), Err(GeomError::NotHarmonic { .. })));
    let t = torus_gauss(17);
    assert!(matches!(spectral_deform(&t, C::new(0.0, 0.0)), Err(GeomError::ZeroLambda)));
    assert!(matches!(spectral_deform(&t, C::new(1.0, 1.0)), Err(GeomError::InvalidInput(_))));
}

#[test]
fn dual_connection_is_real_and_skew_for_the_dual_pairing() {
    let a = maurer_cartan(&frame(&ellipsoid_gauss(17)).unwrap()).unwrap();
    let d = dual_connection(&a).unwrap();
    assert!(d.max_imag() <= 1e-10);
    assert_ne!(d.base.space.signature(), a.base.space.signature());
    for e in d.u_edges.data.iter().chain(&d.v_edges.data) {
        let x = e.total();
        if x.norm() > 0.0 {
            assert!(d.base.space.skew_defect(&x) <= 1e-10);
        }
    }
    // applying the real formula twice returns the connection
    let back = dual_connection(&d).unwrap();
    assert_eq!(back.base.space.signature(), a.base.space.signature());
    let dev = back.u_edges.data.iter().zip(&a.u_edges.data).map(|(x, y)| (x.total() - y.total()).norm() / (1.0 + y.total().norm())).fold(0.0, f64::max);
    assert!(dev <= 1e-14 * a.base.projector.norm().powi(2), "{dev:e}");
}

#[test]
fn dualize_constant_is_constant() {
    let s = constant_gauss(17);
    let d = dualize(&s).unwrap();
    assert!(d.chart.interior(d.margin).all(|(i, j)| (d.projector[d.chart.idx(i, j)] - s.projector[s.chart.idx(i, j)]).norm() <= 1e-12));
}

#[test]
fn dualize_round_trip() {
    for s in [torus_gauss(33), ellipsoid_gauss(33)] {
        let d = dualize(&s).unwrap();
        assert_eq!(s.space.signature(), (4, 2));
        assert_eq!(d.space.signature(), (3, 3));
        let back = dualize(&d).unwrap();
        assert_eq!(back.space.signature(), (4, 2));
        let dev = projector_deviation(&s, &back);
        assert!(dev <= 1e-6, "{dev:e}");
    }
}


fn paraboloid_gauss(n: usize) -> GaussMapGrid {
    let mut chart = graph_chart(n).unwrap();
    chart.reality = Reality::ComplexConjugate;
    conformal_gauss(&proj_lift(&Graph::paraboloid().surface(chart).unwrap()).unwrap()).unwrap()
}

#[test]
fn complex_chart_unit_circle_keeps_connection_real() {
    let s = paraboloid_gauss(17);
    let f = frame(&s).unwrap();
    assert!(f.subspace_defect(&s) <= 1e-9);
    let a = maurer_cartan(&f).unwrap();
    assert!(a.max_imag() <= 1e-12);
    let e = a.u_edges.at(8, 8);
    // the dw̄ part is the conjugate of the dw part
    assert!((e.p_prime.map(|z| z.conj()) - e.p_doubleprime).norm() <= 1e-12 * (1.0 + e.p_prime.norm()));
    let l = spectral_connection(&a, C::from_polar(1.0, 0.7)).unwrap();
    assert!(l.max_imag() <= 1e-12, "{}", l.max_imag());
}

#[test]
fn complex_chart_rejects_off_circle_lambda_and_duality() {
    let s = paraboloid_gauss(17);
    assert!(matches!(spectral_deform(&s, re(2.0)), Err(GeomError::InvalidInput(_))));
    assert!(matches!(dualize(&s), Err(GeomError::InvalidInput(_))));
}
