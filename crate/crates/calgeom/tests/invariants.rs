//! Randomized invariants across modules. Seeds are drawn by proptest and
//! expanded into data with the crate's own stream so failures shrink to a
//! single integer.

mod common;

use std::sync::OnceLock;

use calgeom::catalog::{complex_structure, Calibration, CalibrationKind};
use calgeom::cones::{positive_cone_membership, verify_certificate, Verdict};
use calgeom::convexity::{boundary_margin, free_test, quad_hull_membership, ConvexityClass, HullProblem, SurfaceJet};
use calgeom::exterior::{binomial, derivation_extend_mv, interior, lambda_phi, pair, rank_one, skew_part, wedge, Form};
use calgeom::grassmann::{calibrated_planes, comass, critical_planes, draw_planes, first_cousin_basis, random_plane};
use calgeom::linalg::complement;
use calgeom::pshcheck::{gradient_square, jet_compose, log_sum_exp, psh_classify, Jet2, PshClass, ScalarJet};
use calgeom::rng::{gaussian, gaussian_matrix, gaussian_vector, stream, symmetric, uniform, unit_vector, Stream};
use calgeom::{Multivector, OrientedPlane};
use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn calibrations() -> &'static [Calibration] {
    static CACHE: OnceLock<Vec<Calibration>> = OnceLock::new();
    CACHE.get_or_init(catalog)
}

fn kahler2() -> &'static Calibration {
    static CACHE: OnceLock<Calibration> = OnceLock::new();
    CACHE.get_or_init(|| cal(CalibrationKind::Kahler { m: 2 }))
}

fn planes_of(c: &Calibration, seed: u64, count: usize) -> Vec<OrientedPlane> {
    draw_planes(c, count, &opts(8, seed)).unwrap()
}

/// `t·P + H` with `P ⪰ 0` and `H` anticommuting with `J`, psh for Kähler.
fn kahler_psh_hessian(s: &mut Stream, m: usize, t: f64) -> DMatrix<f64> {
    let j = complex_structure(m);
    let g = gaussian_matrix(s, 2 * m, 2 * m);
    let a = symmetric(s, 2 * m);
    let plh = &a + &j * &a * &j;
    (&g * g.transpose()) * t + plh * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_identity_on_calibrated_planes(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let mut s = stream(seed);
        let a = symmetric(&mut s, c.n());
        let la = lambda_phi(&a, &c.form).unwrap();
        for xi in planes_of(c, seed, 6) {
            prop_assert!((pair(&la, xi.plucker()).unwrap() - xi.trace_of(&a)).abs() <= 1e-8);
        }
    }

    #[test]
    fn skew_endomorphisms_vanish_on_calibrated_planes(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let mut s = stream(seed);
        let a = skew_part(&gaussian_matrix(&mut s, c.n(), c.n()));
        let la = lambda_phi(&a, &c.form).unwrap();
        for xi in planes_of(c, seed, 6) {
            prop_assert!(pair(&la, xi.plucker()).unwrap().abs() <= 1e-8);
        }
    }

    #[test]
    fn rank_one_pairs_projected_vectors(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let mut s = stream(seed);
        let v = gaussian_vector(&mut s, c.n());
        let w = gaussian_vector(&mut s, c.n());
        let la = lambda_phi(&rank_one(v.as_slice(), w.as_slice()), &c.form).unwrap();
        for xi in planes_of(c, seed, 6) {
            let p = xi.projection();
            let expect = (&p * &v).dot(&(&p * &w));
            prop_assert!((pair(&la, xi.plucker()).unwrap() - expect).abs() <= 1e-8);
        }
    }

    #[test]
    fn first_cousins_vanish(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        for xi in planes_of(c, seed, 4) {
            for eta in first_cousin_basis(&xi).directions {
                prop_assert!(pair(&c.form, &eta).unwrap().abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn cousin_decomposition_on_any_plane(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let n = c.n();
        let mut s = stream(seed);
        let xi = random_plane(n, c.p(), seed).unwrap();
        let p = xi.projection();
        let a = gaussian_matrix(&mut s, n, n);
        let tilde = (DMatrix::identity(n, n) - &p) * &a * &p;
        let lhs = pair(&lambda_phi(&a, &c.form).unwrap(), xi.plucker()).unwrap();
        let rhs = xi.trace_of(&a) * pair(&c.form, xi.plucker()).unwrap()
            + pair(&c.form, &derivation_extend_mv(&tilde, xi.plucker()).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + a.amax()));
    }

    #[test]
    fn gradient_square_is_tangential_gradient_norm(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let mut s = stream(seed);
        let n = c.n();
        let jet = Jet2::new(gaussian(&mut s), gaussian_vector(&mut s, n), symmetric(&mut s, n)).unwrap();
        let g = gradient_square(&jet, c).unwrap();
        for xi in planes_of(c, seed, 6) {
            let t = xi.projection() * &jet.gradient;
            let v = pair(&g, xi.plucker()).unwrap();
            prop_assert!(v >= -1e-8);
            prop_assert!((v - t.norm_squared()).abs() <= 1e-8 * (1.0 + t.norm_squared()));
        }
    }

    #[test]
    fn lambda_is_adjoint_to_pairing(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let mut s = stream(seed);
        let n = c.n();
        let a = gaussian_matrix(&mut s, n, n);
        let x = Multivector::from_vectors(&gaussian_matrix(&mut s, n, c.p())).unwrap();
        let lhs = pair(&lambda_phi(&a, &c.form).unwrap(), &x).unwrap();
        let rhs = pair(&c.form, &derivation_extend_mv(&a, &x).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn wedge_is_graded_commutative(seed in any::<u64>(), p in 0usize..4, q in 0usize..4) {
        let mut s = stream(seed);
        let a = random_form(6, p, &mut s);
        let b = random_form(6, q, &mut s);
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((&ab - &ba.scale(sign)).max_abs() <= 1e-12);
    }

    #[test]
    fn contraction_is_an_antiderivation(seed in any::<u64>(), p in 1usize..4, q in 1usize..4) {
        let mut s = stream(seed);
        let a = random_form(6, p, &mut s);
        let b = random_form(6, q, &mut s);
        let v = gaussian_vector(&mut s, 6);
        let lhs = interior(v.as_slice(), &wedge(&a, &b).unwrap()).unwrap();
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let rhs = &wedge(&interior(v.as_slice(), &a).unwrap(), &b).unwrap()
            + &wedge(&a, &interior(v.as_slice(), &b).unwrap()).unwrap().scale(sign);
        prop_assert!((&lhs - &rhs).max_abs() <= 1e-12);
    }
}

fn random_form(n: usize, p: usize, s: &mut Stream) -> Form {
    let coeffs: Vec<f64> = (0..binomial(n, p)).map(|_| gaussian(s)).collect();
    Form::from_coeffs(n, p, coeffs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn comass_is_orientation_symmetric(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        let o = opts(12, seed);
        let up = comass(&c.form, &o).unwrap();
        let down = comass(&c.form.scale(-1.0), &o).unwrap();
        prop_assert!((up.value - down.value).abs() <= 1e-6);
        let flipped = down.argplanes[0].reversed();
        prop_assert!((c.form.eval(flipped.frame()).unwrap() - up.value).abs() <= 1e-6);
    }

    #[test]
    fn found_planes_satisfy_first_cousins(seed in any::<u64>(), k in 0usize..11) {
        let c = &calibrations()[k];
        for xi in calibrated_planes(c, 1, &opts(8, seed)).unwrap() {
            for eta in first_cousin_basis(&xi).directions {
                prop_assert!(pair(&c.form, &eta).unwrap().abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn critical_planes_satisfy_the_criticality_identity(seed in any::<u64>()) {
        let mut s = stream(seed);
        let phi = random_form(5, 2, &mut s);
        let crit = critical_planes(&phi, &opts(6, seed)).unwrap();
        for _ in 0..20 {
            let a = symmetric(&mut s, 5);
            let la = lambda_phi(&a, &phi).unwrap();
            for (xi, value) in &crit {
                let lhs = pair(&la, xi.plucker()).unwrap();
                prop_assert!((lhs - xi.trace_of(&a) * value).abs() <= 1e-7 * (1.0 + a.amax()));
            }
        }
    }

    #[test]
    fn psh_is_closed_under_convex_increasing_composition(seed in any::<u64>(), t in 0.05f64..1.0) {
        let c = kahler2();
        let mut s = stream(seed);
        let f = Jet2::new(gaussian(&mut s), gaussian_vector(&mut s, 4), kahler_psh_hessian(&mut s, 2, t)).unwrap();
        let g = Jet2::new(gaussian(&mut s), gaussian_vector(&mut s, 4), kahler_psh_hessian(&mut s, 2, t)).unwrap();
        let o = opts(8, seed);
        prop_assert!(psh_classify(&f, c, &o).unwrap().class.is_psh());
        let e = f.value.exp();
        let composed = jet_compose(ScalarJet { value: e, d1: e, d2: e }, &f).unwrap();
        prop_assert!(psh_classify(&composed, c, &o).unwrap().class.is_psh());
        prop_assert!(psh_classify(&log_sum_exp(&f, &g).unwrap(), c, &o).unwrap().class.is_psh());
    }

    #[test]
    fn pluriharmonic_parts_do_not_change_the_class(seed in any::<u64>()) {
        let c = kahler2();
        let mut s = stream(seed);
        let h = symmetric(&mut s, 4);
        let plh = kahler_psh_hessian(&mut s, 2, 0.0);
        let o = opts(8, seed);
        let base = psh_classify(&Jet2::new(0.0, DVector::zeros(4), h.clone()).unwrap(), c, &o).unwrap();
        let moved = psh_classify(&Jet2::new(0.0, DVector::zeros(4), h + plh).unwrap(), c, &o).unwrap();
        prop_assert!((base.lower_margin - moved.lower_margin).abs() <= 1e-6);
        prop_assert!((base.upper_margin - moved.upper_margin).abs() <= 1e-6);
    }

    #[test]
    fn boundary_margin_scales_with_the_defining_function(seed in any::<u64>(), u in 0.1f64..10.0, k in 0usize..3) {
        let c = &calibrations()[[0, 5, 3][k]];
        let n = c.n();
        let mut s = stream(seed);
        let rho = Jet2::new(0.0, unit_vector(&mut s, n) * uniform(&mut s, 0.5, 2.0), symmetric(&mut s, n)).unwrap();
        let o = opts(10, seed);
        let base = boundary_margin(&SurfaceJet::new(rho.clone()).unwrap(), c, &o).unwrap();
        let scaled = boundary_margin(&SurfaceJet::new(rho.scale(u)).unwrap(), c, &o).unwrap();
        prop_assert!(base.cross_check <= 1e-6 && scaled.cross_check <= 1e-6);
        if base.class != ConvexityClass::Vacuous {
            prop_assert!((scaled.tangential_margin - u * base.tangential_margin).abs() <= 1e-6 * (1.0 + u));
        }
        let sign = |m: f64| if m > 1e-6 { 1 } else if m < -1e-6 { -1 } else { 0 };
        if (base.tangential_margin.abs() > 1e-5) || base.class == ConvexityClass::Vacuous {
            prop_assert_eq!(sign(base.tangential_margin), sign(scaled.tangential_margin));
            prop_assert_eq!(base.class.is_convex(), scaled.class.is_convex());
        }
    }

    #[test]
    fn strictly_psh_kernels_are_free(seed in any::<u64>(), dim in 1usize..3) {
        let c = kahler2();
        let mut s = stream(seed);
        let kernel = random_plane(4, dim, seed).unwrap();
        let n = complement(kernel.frame());
        let w = gaussian_matrix(&mut s, n.ncols(), n.ncols());
        let h = &n * (&w * w.transpose() + DMatrix::identity(n.ncols(), n.ncols()) * 0.1) * n.transpose();
        let h = (&h + h.transpose()) * 0.5;
        let o = opts(8, seed);
        let jet = Jet2::new(0.0, gaussian_vector(&mut s, 4), h).unwrap();
        let class = psh_classify(&jet, c, &o).unwrap().class;
        let report = free_test(kernel.frame(), c, &o).unwrap();
        prop_assert!(report.consistent);
        if class == PshClass::StrictlyPsh {
            prop_assert!(report.free);
        }
    }

    #[test]
    fn free_subspaces_are_consistent(seed in any::<u64>(), k in 0usize..11, dim in 1usize..6) {
        let c = &calibrations()[k];
        let dim = dim.min(c.n() - 1);
        let t = random_plane(c.n(), dim, seed).unwrap();
        let report = free_test(t.frame(), c, &opts(8, seed)).unwrap();
        prop_assert!(report.consistent);
        if dim < c.p() {
            prop_assert!(report.free);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn cone_certificates_reverify(seed in any::<u64>(), mix in 0.0f64..1.0) {
        let c = kahler2();
        let mut s = stream(seed);
        let ps = planes_of(c, seed, 3);
        let inside = ps.iter().fold(Multivector::zeros(4, 2).unwrap(), |acc, xi| &acc + &xi.plucker().scale(uniform(&mut s, 0.1, 1.0)));
        let other = random_plane(4, 2, seed ^ 7).unwrap();
        let target = &inside.scale(mix) + &other.plucker().scale(1.0 - mix);
        let o = opts(8, seed);
        for t in [inside, target] {
            let cert = positive_cone_membership(&t, c, &o).unwrap();
            if matches!(cert.verdict, Verdict::Inside | Verdict::Outside) {
                prop_assert!(verify_certificate(&cert, &t, c, &o).unwrap());
            }
        }
    }

    #[test]
    fn simple_vectors_are_inside_exactly_when_calibrated(seed in any::<u64>()) {
        let c = kahler2();
        let xi = random_plane(4, 2, seed).unwrap();
        let cert = positive_cone_membership(xi.plucker(), c, &opts(8, seed)).unwrap();
        let value = pair(&c.form, xi.plucker()).unwrap();
        prop_assert_ne!(cert.verdict, Verdict::Undecided);
        prop_assert_eq!(cert.verdict == Verdict::Inside, value >= 1.0 - c.tol_plane);
    }

    #[test]
    fn hull_verdicts_survive_growing_the_set(seed in any::<u64>()) {
        let c = dxdy();
        let mut s = stream(seed);
        let mut points: Vec<DVector<f64>> = (0..6).map(|_| gaussian_vector(&mut s, 3)).collect();
        let query = points.iter().fold(DVector::zeros(3), |acc, p| acc + p) / 6.0;
        let o = opts(6, seed);
        let before = quad_hull_membership(&HullProblem { points: points.clone(), query: query.clone(), cal: c.clone() }, &o).unwrap();
        if let Some(sep) = &before.separator {
            prop_assert!(points.iter().all(|k| sep.eval(k) <= 1e-9));
        }
        points.push(gaussian_vector(&mut s, 3) * 2.0);
        let after = quad_hull_membership(&HullProblem { points, query, cal: c }, &o).unwrap();
        prop_assert!(!before.undecided && !after.undecided);
        prop_assert!(!before.inside || after.inside);
    }
}
