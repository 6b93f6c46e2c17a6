use super::*;
use crate::catalog::{make_calibration, Calibration, CalibrationKind};
use crate::exterior::{lambda_phi, pair, rank_one, Form};
use crate::rng::{stream, symmetric};

fn opts(restarts: usize) -> OptOptions {
    OptOptions::default().with_restarts(restarts).with_seed(11)
}

fn cal(kind: CalibrationKind) -> Calibration {
    make_calibration(&kind, &opts(16)).unwrap()
}

fn two_planes(lambda: f64) -> Form {
    Form::from_terms(4, 2, &[(&[0, 1], 1.0), (&[2, 3], lambda)]).unwrap()
}

#[test]
fn random_plane_is_deterministic_and_unit() {
    let a = random_plane(6, 3, 99).unwrap();
    let b = random_plane(6, 3, 99).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, random_plane(6, 3, 100).unwrap());
    for seed in 0..50 {
        let x = random_plane(4, 2, seed).unwrap();
        assert!((x.plucker().norm() - 1.0).abs() < 1e-12);
    }
    assert!(random_plane(13, 2, 0).is_err());
    assert!(random_plane(3, 4, 0).is_err());
}

#[test]
fn kahler_mean_over_planes_vanishes() {
    let omega = cal(CalibrationKind::Kahler { m: 2 }).form;
    let mut s = stream(5);
    let n = 100_000;
    let (mut sum, mut sq) = (0.0, 0.0);
    for _ in 0..n {
        let x = random_plane_from(&mut s, 4, 2).unwrap();
        let v = pair(&omega, x.plucker()).unwrap();
        sum += v;
        sq += v * v;
    }
    let mean = sum / n as f64;
    let sd = (sq / n as f64 - mean * mean).sqrt();
    assert!(mean.abs() <= 3.0 * sd / (n as f64).sqrt(), "mean {mean}");
}

#[test]
fn cousins_of_coordinate_plane() {
    let xi = OrientedPlane::coordinate(3, &[0, 1]).unwrap();
    let cb = first_cousin_basis(&xi);
    assert_eq!(cb.directions.len(), 2);
    let e32 = Multivector::from_terms(3, 2, &[(&[1, 2], -1.0)]).unwrap();
    let e13 = Multivector::from_terms(3, 2, &[(&[0, 2], 1.0)]).unwrap();
    // the normal is ±e3
    let s = cb.normal[(2, 0)];
    assert!((&cb.directions[0] - &e32.scale(s)).max_abs() < 1e-14);
    assert!((&cb.directions[1] - &e13.scale(s)).max_abs() < 1e-14);
    let big = first_cousin_basis(&random_plane(7, 3, 1).unwrap());
    assert_eq!(big.directions.len(), 12);
    for (i, a) in big.directions.iter().enumerate() {
        assert!((a.norm() - 1.0).abs() < 1e-12);
        for b in &big.directions[i + 1..] {
            assert!(a.dot(b).abs() < 1e-12);
        }
    }
}

#[test]
fn comass_of_two_plane_forms() {
    for lambda in [0.3, 0.7, -0.7] {
        let r = comass(&two_planes(lambda), &opts(32)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9 && r.converged);
        let x12 = OrientedPlane::coordinate(4, &[0, 1]).unwrap();
        assert_eq!(r.argplanes.len(), 1);
        assert!(r.argplanes[0].distance(&x12) < 1e-6);
    }
}

#[test]
fn comass_equal_weights_has_a_family_of_maximizers() {
    let phi = two_planes(1.0);
    let r = comass(&phi, &opts(32)).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9);
    assert!(r.argplanes.len() > 3);
    let mut s = stream(3);
    let mut best: f64 = -1.0;
    for _ in 0..1_000_000 {
        let x = random_plane_from(&mut s, 4, 2).unwrap();
        best = best.max(pair(&phi, x.plucker()).unwrap());
    }
    assert!((best - r.value).abs() < 1e-3 && best <= r.value + 1e-12);
}

#[test]
fn comass_is_orientation_symmetric() {
    let phi = cal(CalibrationKind::SpecialLagrangian { m: 2, theta: 0.3 }).form;
    let a = comass(&phi, &opts(16)).unwrap();
    let b = comass(&(-&phi), &opts(16)).unwrap();
    assert!((a.value - b.value).abs() < 1e-10);
    for x in &a.argplanes {
        let rev = x.reversed();
        assert!((pair(&(-&phi), rev.plucker()).unwrap() - a.value).abs() < 1e-9);
    }
}

#[test]
fn volume_grassmannian_is_two_points() {
    let vol = Form::volume(3).unwrap();
    let c = comass(&vol, &opts(8)).unwrap();
    assert_eq!(c.value, 1.0);
    let crit = critical_planes(&vol, &opts(8)).unwrap();
    let mut vals: Vec<f64> = crit.iter().map(|(_, v)| *v).collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(vals, alloc::vec![-1.0, 1.0]);
}

#[test]
fn complex_lines_are_j_invariant() {
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let j = crate::catalog::complex_structure(2);
    for xi in calibrated_planes(&c, 12, &opts(12)).unwrap() {
        let p = xi.projection();
        assert!((&j * &p - &p * &j).abs().max() < 1e-6);
    }
}

#[test]
fn calibrated_planes_obey_first_cousins() {
    for kind in [CalibrationKind::Associative, CalibrationKind::Cayley, CalibrationKind::DoublePoint { n: 2 }] {
        let c = cal(kind);
        let planes = calibrated_planes(&c, 2, &opts(40)).unwrap();
        for xi in planes {
            assert!(pair(&c.form, xi.plucker()).unwrap() >= 1.0 - 1e-6);
            for d in first_cousin_basis(&xi).directions {
                assert!(pair(&c.form, &d).unwrap().abs() <= 1e-8, "{}", c.name);
            }
        }
    }
}

#[test]
fn calibrated_planes_fail_loudly() {
    let c = cal(CalibrationKind::TwoPlanes { lambda: 0.5 });
    assert!(matches!(calibrated_planes(&c, 2, &opts(20)), Err(Error::NotFound(_))));
}

#[test]
fn margin_of_phi_is_one() {
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let r = form_margin(&c.form, &c, None, Sense::Min, &opts(8)).unwrap();
    assert!((r.value - 1.0).abs() < 1e-9);
}

#[test]
fn margin_agrees_with_trace_route_and_exact_kahler_value() {
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let j = crate::catalog::complex_structure(2);
    let mut s = stream(21);
    for _ in 0..5 {
        let a = symmetric(&mut s, 4);
        let via_form = form_margin(&lambda_phi(&a, &c.form).unwrap(), &c, None, Sense::Min, &opts(12)).unwrap();
        let via_trace = trace_margin(&a, &c, None, Sense::Min, &opts(12)).unwrap();
        // tr over span(u, Ju) = uᵀ(A + JᵀAJ)u
        let exact = crate::linalg::min_eigenvalue(&(&a + j.transpose() * &a * &j));
        assert!((via_form.value - exact).abs() < 1e-7, "{} vs {exact}", via_form.value);
        assert!((via_trace.value - exact).abs() < 1e-7);
        let up = form_margin(&lambda_phi(&a, &c.form).unwrap(), &c, None, Sense::Max, &opts(12)).unwrap();
        let exact_up = crate::linalg::sym_eigen(&(&a + j.transpose() * &a * &j)).0[3];
        assert!((up.value - exact_up).abs() < 1e-7);
    }
}

#[test]
fn restricted_margin_feasibility() {
    let c = Calibration::from_form(Form::basis(3, &[0, 1]).unwrap(), "dxdy");
    let a = Form::from_coeffs(3, 2, alloc::vec![0.4, -1.0, 2.0]).unwrap();
    let xy = Subspace::new(DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
    let r = form_margin(&a, &c, Some(&xy), Sense::Min, &opts(8)).unwrap();
    assert!((r.value - 0.4).abs() < 1e-12);
    let xz = Subspace::new(DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])).unwrap();
    assert!(matches!(form_margin(&a, &c, Some(&xz), Sense::Min, &opts(8)), Err(Error::Infeasible)));
    let tilted = Subspace::hyperplane(&[0.0, 0.3, 1.0]).unwrap();
    assert!(matches!(form_margin(&a, &c, Some(&tilted), Sense::Min, &opts(8)), Err(Error::Infeasible)));
}

#[test]
fn restricted_margin_inside_hyperplane() {
    // complex lines of C³ inside the real hyperplane e6⊥ form a CP¹ of C² ⊕ 0
    let c = cal(CalibrationKind::Kahler { m: 3 });
    let h = Subspace::hyperplane(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    let mut s = stream(2);
    let a = symmetric(&mut s, 6);
    let r = form_margin(&lambda_phi(&a, &c.form).unwrap(), &c, Some(&h), Sense::Min, &opts(16)).unwrap();
    let j = crate::catalog::complex_structure(2);
    let a4 = a.view((0, 0), (4, 4)).into_owned();
    let exact = crate::linalg::min_eigenvalue(&(&a4 + j.transpose() * &a4 * &j));
    assert!((r.value - exact).abs() < 1e-7, "{} vs {exact}", r.value);
    for xi in &r.argplanes {
        assert!(xi.frame().row(5).amax() < 1e-12);
    }
}

#[test]
fn critical_planes_of_quaternionic_form() {
    let c = cal(CalibrationKind::Quaternionic { m: 2 });
    let crit = critical_planes(&c.form, &opts(48)).unwrap();
    let has = |v: f64| crit.iter().any(|(_, x)| (x - v).abs() < 1e-6);
    assert!(has(1.0) && has(-1.0));
    assert!(has(1.0 / 3.0) && has(-1.0 / 3.0), "{:?}", crit.iter().map(|c| c.1).collect::<Vec<_>>());
    let mut s = stream(8);
    for (xi, v) in &crit {
        for _ in 0..20 {
            let a = symmetric(&mut s, 8);
            let lhs = pair(&lambda_phi(&a, &c.form).unwrap(), xi.plucker()).unwrap();
            assert!((lhs - xi.trace_of(&a) * v).abs() <= 1e-7);
        }
    }
}

#[test]
fn maxima_are_critical() {
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let crit = critical_planes(&c.form, &opts(24)).unwrap();
    for xi in calibrated_planes(&c, 5, &opts(5)).unwrap() {
        let g = objective::cousin_gradient(&FormObjective::new(c.form.clone()), xi.frame(), &linalg::complement(xi.frame()));
        assert!(g.norm() < 1e-9);
    }
    assert!(crit.iter().any(|(_, v)| (v - 1.0).abs() < 1e-9));
    // rank-one pairing through the plane of a found maximum
    let xi = &crit.iter().find(|(_, v)| (v - 1.0).abs() < 1e-9).unwrap().0;
    let u = xi.frame().column(0).into_owned();
    let l = lambda_phi(&rank_one(u.as_slice(), u.as_slice()), &c.form).unwrap();
    assert!((pair(&l, xi.plucker()).unwrap() - 1.0).abs() < 1e-9);
}
