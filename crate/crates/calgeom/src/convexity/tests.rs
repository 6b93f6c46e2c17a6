use super::*;
use crate::catalog::{complex_structure, make_calibration, CalibrationKind};
use crate::exterior::Form;
use crate::pshcheck::psh_classify;
use crate::rng::{gaussian_vector, stream, unit_vector};

fn opts(r: usize) -> OptOptions {
    OptOptions::default().with_restarts(r).with_seed(11)
}

fn cal(kind: CalibrationKind) -> Calibration {
    make_calibration(&kind, &opts(16)).unwrap()
}

fn dxdy() -> Calibration {
    Calibration::from_form(Form::basis(3, &[0, 1]).unwrap(), "dxdy")
}

/// `ρ = |x| − r − κ(|x| − r)²` at the point `r·u`.
fn sphere_jet(u: &DVector<f64>, r: f64, kappa: f64) -> SurfaceJet {
    let n = u.len();
    let uu = u * u.transpose();
    let h = (DMatrix::identity(n, n) - &uu) / r - uu * (2.0 * kappa);
    SurfaceJet::new(Jet2::new(0.0, u.clone(), h).unwrap()).unwrap()
}

fn hyperplane_jet(n: usize) -> SurfaceJet {
    let mut g = DVector::zeros(n);
    g[n - 1] = 1.0;
    SurfaceJet::new(Jet2::new(0.0, g, DMatrix::zeros(n, n)).unwrap()).unwrap()
}

fn sorted_eigs(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v = linalg::sym_eigen(m).0;
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn fd_hessian(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let at = |a: f64, b: f64| {
            let mut y = x.clone();
            y[i] += a;
            y[j] += b;
            f(&y)
        };
        (at(h, h) - at(h, -h) - at(-h, h) + at(-h, -h)) / (4.0 * h * h)
    })
}

#[test]
fn degenerate_gradient_rejected() {
    let jet = Jet2::new(0.0, DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
    assert!(matches!(SurfaceJet::new(jet), Err(Error::Degenerate(_))));
}

#[test]
fn second_fundamental_forms() {
    let mut s = stream(1);
    let u = unit_vector(&mut s, 4);
    let (_, ii) = second_fundamental(&sphere_jet(&u, 2.0, 0.0)).unwrap();
    assert!((ii + DMatrix::identity(3, 3) * 0.5).abs().max() < 1e-12);
    let (_, ii) = second_fundamental(&hyperplane_jet(4)).unwrap();
    assert_eq!(ii.abs().max(), 0.0);
    // cylinder: finite-difference Hessian of the defining function
    let r = 0.7;
    let rho = |x: &DVector<f64>| x[0].hypot(x[1]) - r;
    let x = DVector::from_column_slice(&[r * 0.3f64.cos(), r * 0.3f64.sin(), 1.4]);
    let g = DVector::from_column_slice(&[x[0] / r, x[1] / r, 0.0]);
    let h = fd_hessian(rho, &x, 1e-4);
    let (_, ii) = second_fundamental(&SurfaceJet::new(Jet2::new(0.0, g, (&h + h.transpose()) * 0.5).unwrap()).unwrap())
        .unwrap();
    let e = sorted_eigs(&ii);
    assert!((e[0] + 1.0 / r).abs() < 1e-6 && e[1].abs() < 1e-6, "{e:?}");
}

#[test]
fn spheres_are_strictly_convex() {
    let o = opts(12);
    let mut s = stream(2);
    for (kind, p) in [
        (CalibrationKind::Kahler { m: 2 }, 2.0),
        (CalibrationKind::SpecialLagrangian { m: 3, theta: 0.0 }, 3.0),
        (CalibrationKind::Associative, 3.0),
    ] {
        let c = cal(kind);
        let u = unit_vector(&mut s, c.n());
        let r = 1.7;
        let rep = boundary_margin(&sphere_jet(&u, r, 0.0), &c, &o).unwrap();
        assert_eq!(rep.class, ConvexityClass::StrictlyConvex, "{}", c.name);
        assert!((rep.tangential_margin - p / r).abs() < 1e-7, "{} {}", c.name, rep.tangential_margin);
        assert!(rep.cross_check < 1e-7);
    }
}

#[test]
fn hyperplanes_are_flat() {
    let o = opts(8);
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let rep = boundary_margin(&hyperplane_jet(4), &c, &o).unwrap();
    assert_eq!(rep.class, ConvexityClass::Flat);
}

#[test]
fn vacuous_when_no_plane_is_tangent() {
    let o = opts(8);
    // the tangent plane of a graph over the xz-plane is never horizontal
    let jet = Jet2::new(0.0, DVector::from_column_slice(&[0.0, 1.0, 0.0]), DMatrix::identity(3, 3)).unwrap();
    let rep = boundary_margin(&SurfaceJet::new(jet).unwrap(), &dxdy(), &o).unwrap();
    assert_eq!(rep.class, ConvexityClass::Vacuous);
    assert!(rep.class.is_convex());
}

#[test]
fn rescaling_the_defining_function() {
    let o = opts(12);
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let mut s = stream(3);
    for _ in 0..3 {
        let g = gaussian_vector(&mut s, 4);
        let h = crate::rng::symmetric(&mut s, 4);
        let base = SurfaceJet::new(Jet2::new(0.0, g.clone(), h.clone()).unwrap()).unwrap();
        let u = 0.5 + crate::rng::uniform(&mut s, 0.0, 2.0);
        let du = gaussian_vector(&mut s, 4);
        // Hess(uρ) = u Hess ρ + du ⊗ dρ + dρ ⊗ du at ρ = 0
        let scaled = Jet2::new(0.0, &g * u, &h * u + &du * g.transpose() + &g * du.transpose()).unwrap();
        let a = boundary_margin(&base, &c, &o).unwrap();
        let b = boundary_margin(&SurfaceJet::new(scaled).unwrap(), &c, &o).unwrap();
        assert!((b.tangential_margin - u * a.tangential_margin).abs() < 1e-7);
        assert_eq!(a.class, b.class);
    }
}

#[test]
fn log_delta_margins() {
    let o = opts(12);
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let mut s = stream(4);
    let u = unit_vector(&mut s, 4);
    let m = log_delta_margin(&sphere_jet(&u, 1.0, 0.0), &c, 1e-2, &o).unwrap();
    assert!(m > 0.0);
    // flat: a complex line lies in every real hyperplane of C²
    let m = log_delta_margin(&hyperplane_jet(4), &c, 0.1, &o).unwrap();
    assert!(m.abs() < 1e-8, "{m}");
    // no horizontal plane is tangent to a vertical wall, so the margin is positive
    let wall = SurfaceJet::new(Jet2::new(0.0, DVector::from_column_slice(&[0.0, 1.0, 0.0]), DMatrix::zeros(3, 3)).unwrap())
        .unwrap();
    let m = log_delta_margin(&wall, &dxdy(), 0.5, &o).unwrap();
    assert!((m - 4.0).abs() < 1e-8, "{m}");
    assert!(log_delta_margin(&wall, &dxdy(), 0.0, &o).is_err());
}

#[test]
fn stabilization() {
    let o = opts(12);
    let c = cal(CalibrationKind::Kahler { m: 2 });
    let mut s = stream(5);
    let u = unit_vector(&mut s, 4);
    // tr over a complex line containing u is 1/r − 2κ + 2A, otherwise ≥ the tangential value
    let (r, kappa) = (1.0, 2.0);
    let st = stabilize_defining(&sphere_jet(&u, r, kappa), &c, &o).unwrap();
    let exact = kappa - 0.5 / r + 0.5 * STABLE_EPS;
    assert!((st.a - exact).abs() <= 2e-3 * exact, "{st:?}");
    assert!(st.margin_at_a >= STABLE_EPS);
    let id = SurfaceJet::new(Jet2::new(0.0, u.clone(), DMatrix::identity(4, 4)).unwrap()).unwrap();
    assert_eq!(stabilize_defining(&id, &c, &o).unwrap().a, 0.0);
    match stabilize_defining(&hyperplane_jet(4), &c, &o) {
        Err(Error::NotStrictlyConvex { witness, .. }) => assert!(witness.is_some()),
        other => panic!("{other:?}"),
    }
}

#[test]
fn free_subspaces() {
    let o = opts(16);
    let sl = cal(CalibrationKind::SpecialLagrangian { m: 3, theta: 0.0 });
    let r = free_test(&DMatrix::identity(6, 2), &sl, &o).unwrap();
    assert!(r.free && r.isotropic && r.consistent && r.sup_phi == 0.0);
    // complex C² = span(e1, Je1, e2, Je2)
    let t = DMatrix::identity(6, 4);
    let r = free_test(&t, &sl, &o).unwrap();
    assert!(r.free && r.consistent, "{r:?}");
    assert!(r.sup_phi < 1e-6 && r.isotropic);
    let k = cal(CalibrationKind::Kahler { m: 2 });
    let j = complex_structure(2);
    let e = DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
    let line = DMatrix::from_columns(&[e.clone(), &j * &e]);
    let r = free_test(&line, &k, &o).unwrap();
    assert!(!r.free && r.consistent && (r.sup_phi - 1.0).abs() < 1e-9 && r.normal_margin.abs() < 1e-8);
    // a totally real plane is Kähler-isotropic
    let r = free_test(&DMatrix::from_columns(&[e.clone(), DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.0])]), &k, &o)
        .unwrap();
    assert!(r.free && r.isotropic && r.consistent);
}

#[test]
fn distance_jets() {
    let mut s = stream(6);
    // affine coordinate subspace
    let m = Surface::Affine { point: DVector::zeros(5), basis: DMatrix::identity(5, 2) };
    let mut x = DVector::zeros(5);
    x[0] = 0.3;
    x[1] = -1.2;
    let j = dist_sq_jet(&m, &x).unwrap();
    let mut pn = DMatrix::zeros(5, 5);
    for i in 2..5 {
        pn[(i, i)] = 1.0;
    }
    assert_eq!(j.hessian, pn);
    // sphere: closed form against finite differences of ½dist²
    let c = gaussian_vector(&mut s, 4);
    let sph = Surface::Sphere { center: c.clone(), radius: 1.3 };
    let u = unit_vector(&mut s, 4);
    let on = &c + &u * 1.3;
    let j = dist_sq_jet(&sph, &on).unwrap();
    assert!((&j.hessian - &u * u.transpose()).abs().max() < 1e-12);
    let f = |y: &DVector<f64>| 0.5 * ((y - &c).norm() - 1.3).powi(2);
    for y in [on.clone(), &c + &u * 1.6] {
        let j = dist_sq_jet(&sph, &y).unwrap();
        assert!((fd_hessian(f, &y, 1e-4) - &j.hessian).abs().max() < 1e-6);
    }
    assert!(dist_sq_jet(&sph, &(&c + &u * 2.7)).is_err());
    // torus
    let tor = Surface::Torus { big: 2.0, small: 0.6 };
    let p = torus_point(2.0, 0.6, 0.4, 1.1) * 1.05;
    let j = dist_sq_jet(&tor, &p).unwrap();
    let f = |y: &DVector<f64>| {
        let g = (y[0].hypot(y[2]) - 2.0).hypot(y[1]);
        0.5 * (g - 0.6) * (g - 0.6)
    };
    assert!((fd_hessian(f, &p, 1e-4) - &j.hessian).abs().max() < 1e-6);
    // graph: on the surface the Hessian is the normal projection
    let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, -0.5]);
    let b = DVector::from_column_slice(&[0.2, -0.1]);
    let gr = Surface::Graph { q: q.clone(), b: b.clone(), c: 0.4 };
    let uu = DVector::from_column_slice(&[0.3, 0.2]);
    let h = 0.5 * uu.dot(&(&q * &uu)) + b.dot(&uu) + 0.4;
    let on = DVector::from_column_slice(&[uu[0], uu[1], h]);
    let j = dist_sq_jet(&gr, &on).unwrap();
    let grad = &q * &uu + &b;
    let nv = DVector::from_column_slice(&[-grad[0], -grad[1], 1.0]).normalize();
    assert!((&j.hessian - &nv * nv.transpose()).abs().max() < 1e-6);
}

#[test]
fn torus_threshold() {
    let o = opts(4);
    let c = dxdy();
    let a = torus_scan(2.0, 0.9, 8, &c, &o).unwrap();
    assert!(a.convex);
    assert!((a.min_margin - (1.0 / 0.9 - 1.0 / 1.1)).abs() < 1e-9);
    assert_eq!(a.points.iter().filter(|p| !p.vacuous).count(), 4);
    let b = torus_scan(2.0, 1.1, 8, &c, &o).unwrap();
    assert!(!b.convex);
    let w = b.witness.unwrap();
    // inner equator
    assert!(w.x.abs() < 1e-12 && w.y.abs() < 1e-12 && (w.z.abs() - 0.9).abs() < 1e-12);
    assert!(torus_scan(2.0, 1.0, 7, &c, &o).is_err());
}

#[test]
fn hull_membership() {
    let o = opts(8);
    let circle: Vec<DVector<f64>> = (0..12)
        .map(|k| {
            let t = k as f64 * core::f64::consts::PI / 6.0;
            DVector::from_column_slice(&[t.cos(), t.sin()])
        })
        .collect();
    let vol = cal(CalibrationKind::Volume { n: 2 });
    let hp = HullProblem { points: circle.clone(), query: DVector::zeros(2), cal: vol.clone() };
    assert!(quad_hull_membership(&hp, &o).unwrap().inside);
    let hp = HullProblem { points: circle.clone(), query: circle[3].clone(), cal: vol.clone() };
    assert!(quad_hull_membership(&hp, &o).unwrap().inside);
    let hp = HullProblem { points: circle.clone(), query: DVector::from_column_slice(&[1.5, 0.0]), cal: vol };
    assert!(!quad_hull_membership(&hp, &o).unwrap().inside);
    let lifted: Vec<DVector<f64>> = circle.iter().map(|p| DVector::from_column_slice(&[p[0], p[1], 0.0])).collect();
    let hp = HullProblem { points: lifted, query: DVector::from_column_slice(&[0.0, 0.0, -0.4]), cal: dxdy() };
    let r = quad_hull_membership(&hp, &o).unwrap();
    assert!(!r.inside && !r.undecided, "{r:?}");
    let sep = r.separator.unwrap();
    assert!(sep.eval(&hp.query) > 0.0 && hp.points.iter().all(|k| sep.eval(k) <= 1e-9));
    assert!(r.psh_margin.unwrap() >= -1e-8);
}

#[test]
fn free_matches_strict_distance_hessian() {
    let o = opts(16);
    let k = cal(CalibrationKind::Kahler { m: 2 });
    for basis in [DMatrix::identity(4, 1), DMatrix::identity(4, 2), DMatrix::identity(4, 3)] {
        let m = Surface::Affine { point: DVector::zeros(4), basis: basis.clone() };
        let j = dist_sq_jet(&m, &DVector::zeros(4)).unwrap();
        let strict = psh_classify(&j, &k, &o).unwrap().class == crate::pshcheck::PshClass::StrictlyPsh;
        assert_eq!(free_test(&basis, &k, &o).unwrap().free, strict);
    }
}
