//! Built-in invariant suites. Every check draws its data from its own seed
//! stream, so results do not depend on the order or thread that runs it.

use calgeom::catalog::{make_calibration, AlgebraTable, Calibration, CalibrationKind};
use calgeom::cones::{hyperplane_boundary_test, normality_check, positive_cone_membership, verify_certificate, Verdict};
use calgeom::convexity::{
    boundary_margin, free_test, quad_hull_membership, torus_scan, ConvexityClass, HullProblem, SurfaceJet,
};
use calgeom::exterior::{
    binomial, derivation_extend_mv, hodge_star, interior, lambda_phi, pair, rank_one, skew_part, wedge, Form,
};
use calgeom::grassmann::{comass, draw_planes, first_cousin_basis, form_margin, random_plane, Sense};
use calgeom::linalg::complement;
use calgeom::pshcheck::{gradient_square, phi_hessian_point, psh_classify, Jet2, PshClass};
use calgeom::rng::{gaussian, gaussian_matrix, gaussian_vector, stream, symmetric, uniform, unit_vector, Stream};
use calgeom::{Multivector, OptOptions};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::{CliError, Global, Outcome, Suite};

type Measured = Result<(f64, String), String>;

struct Ctx {
    seed: u64,
    opts: OptOptions,
    catalog: Vec<Calibration>,
}

struct Check {
    name: &'static str,
    tolerance: f64,
    run: fn(&Ctx) -> Measured,
}

fn kinds() -> Vec<CalibrationKind> {
    vec![
        CalibrationKind::Kahler { m: 2 },
        CalibrationKind::Kahler { m: 3 },
        CalibrationKind::KahlerPower { m: 3, k: 2 },
        CalibrationKind::SpecialLagrangian { m: 3, theta: 0.0 },
        CalibrationKind::Associative,
        CalibrationKind::Coassociative,
        CalibrationKind::Cayley,
        CalibrationKind::Quaternionic { m: 2 },
        CalibrationKind::DoublePoint { n: 3 },
        CalibrationKind::TwoPlanes { lambda: 0.7 },
    ]
}

fn build(kind: CalibrationKind, o: &OptOptions) -> Result<Calibration, String> {
    make_calibration(&kind, o).map_err(|e| format!("{kind:?}: {e}"))
}

fn dxdy() -> Calibration {
    Calibration::from_form(Form::basis(3, &[0, 1]).expect("valid"), "dxdy")
}

fn rng(ctx: &Ctx, salt: u64) -> Stream {
    stream(ctx.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
}

fn lib<T>(r: calgeom::Result<T>, what: &str) -> Result<T, String> {
    r.map_err(|e| format!("{what}: {e}"))
}

/// Worst residual of `f` over the catalog.
fn over_catalog(ctx: &Ctx, mut f: impl FnMut(&Calibration) -> Result<f64, String>) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for c in &ctx.catalog {
        worst = worst.max(f(c).map_err(|e| format!("{}: {e}", c.name))?);
    }
    Ok(worst)
}

fn planes(ctx: &Ctx, c: &Calibration, count: usize) -> Result<Vec<calgeom::OrientedPlane>, String> {
    lib(draw_planes(c, count, &ctx.opts), "draw_planes")
}

fn random_form(s: &mut Stream, n: usize, p: usize) -> Form {
    let coeffs = (0..binomial(n, p)).map(|_| gaussian(s)).collect();
    Form::from_coeffs(n, p, coeffs).expect("sized")
}

fn comass_one(ctx: &Ctx) -> Measured {
    let w = over_catalog(ctx, |c| Ok((lib(comass(&c.form, &ctx.opts), "comass")?.value - 1.0).abs()))?;
    Ok((w, format!("max |comass − 1| over {} calibrations", ctx.catalog.len())))
}

fn trace_identity(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 1);
    let w = over_catalog(ctx, |c| {
        let ps = planes(ctx, c, 10)?;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let a = symmetric(&mut s, c.n());
            let la = lib(lambda_phi(&a, &c.form), "lambda_phi")?;
            for xi in &ps {
                worst = worst.max((lib(pair(&la, xi.plucker()), "pair")? - xi.trace_of(&a)).abs());
            }
        }
        Ok(worst)
    })?;
    Ok((w, "20 symmetric matrices × 10 calibrated planes per calibration".into()))
}

fn skew_vanishing(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 2);
    let w = over_catalog(ctx, |c| {
        let ps = planes(ctx, c, 10)?;
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let la = lib(lambda_phi(&skew_part(&gaussian_matrix(&mut s, c.n(), c.n())), &c.form), "lambda_phi")?;
            for xi in &ps {
                worst = worst.max(lib(pair(&la, xi.plucker()), "pair")?.abs());
            }
        }
        Ok(worst)
    })?;
    Ok((w, "skew endomorphisms on calibrated planes".into()))
}

fn rank_one_trace(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 3);
    let w = over_catalog(ctx, |c| {
        let ps = planes(ctx, c, 10)?;
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let (v, u) = (gaussian_vector(&mut s, c.n()), gaussian_vector(&mut s, c.n()));
            let la = lib(lambda_phi(&rank_one(v.as_slice(), u.as_slice()), &c.form), "lambda_phi")?;
            for xi in &ps {
                let p = xi.projection();
                let expect = (&p * &v).dot(&(&p * &u));
                worst = worst.max((lib(pair(&la, xi.plucker()), "pair")? - expect).abs());
            }
        }
        Ok(worst)
    })?;
    Ok((w, "v∘w against the projected inner product".into()))
}

fn first_cousins(ctx: &Ctx) -> Measured {
    let w = over_catalog(ctx, |c| {
        let mut worst: f64 = 0.0;
        for xi in planes(ctx, c, 10)? {
            for eta in first_cousin_basis(&xi).directions {
                worst = worst.max(lib(pair(&c.form, &eta), "pair")?.abs());
            }
        }
        Ok(worst)
    })?;
    Ok((w, "form on first cousins of calibrated planes".into()))
}

fn cousin_decomposition(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 4);
    let w = over_catalog(ctx, |c| {
        let n = c.n();
        let mut worst: f64 = 0.0;
        for r in 0..10 {
            let xi = lib(random_plane(n, c.p(), ctx.seed.wrapping_add(r)), "random_plane")?;
            let p = xi.projection();
            let a = gaussian_matrix(&mut s, n, n);
            let tilde = (DMatrix::identity(n, n) - &p) * &a * &p;
            let lhs = lib(pair(&lib(lambda_phi(&a, &c.form), "lambda_phi")?, xi.plucker()), "pair")?;
            let moved = lib(derivation_extend_mv(&tilde, xi.plucker()), "derivation")?;
            let rhs = xi.trace_of(&a) * lib(pair(&c.form, xi.plucker()), "pair")? + lib(pair(&c.form, &moved), "pair")?;
            worst = worst.max((lhs - rhs).abs());
        }
        Ok(worst)
    })?;
    Ok((w, "trace term plus normal derivation, arbitrary planes".into()))
}

fn half_norm_square(ctx: &Ctx) -> Measured {
    let w = over_catalog(ctx, |c| {
        let n = c.n();
        let jet = lib(Jet2::new(0.0, DVector::zeros(n), DMatrix::identity(n, n)), "jet")?;
        let h = lib(phi_hessian_point(&jet, c, None), "phi_hessian_point")?;
        Ok((&h - &c.form.scale(c.p() as f64)).max_abs())
    })?;
    Ok((w, "dd^φ of ½|x|² against pφ".into()))
}

fn gradient_squares(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 5);
    let w = over_catalog(ctx, |c| {
        let n = c.n();
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let jet = lib(Jet2::new(0.0, gaussian_vector(&mut s, n), symmetric(&mut s, n)), "jet")?;
            let g = lib(gradient_square(&jet, c), "gradient_square")?;
            for xi in planes(ctx, c, 5)? {
                let t = (xi.projection() * &jet.gradient).norm_squared();
                worst = worst.max((lib(pair(&g, xi.plucker()), "pair")? - t).abs());
            }
        }
        Ok(worst)
    })?;
    Ok((w, "df∧d^φf on calibrated planes against the tangential gradient".into()))
}

fn exterior_laws(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 6);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = 2 + (uniform(&mut s, 0.0, 6.999) as usize);
        let p = uniform(&mut s, 0.0, (n + 1) as f64 - 1e-9) as usize;
        let q = uniform(&mut s, 0.0, (n - p + 1) as f64 - 1e-9) as usize;
        let (a, b) = (random_form(&mut s, n, p), random_form(&mut s, n, q));
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        let ab = lib(wedge(&a, &b), "wedge")?;
        worst = worst.max((&ab - &lib(wedge(&b, &a), "wedge")?.scale(sign)).max_abs());
        let hh = hodge_star(&hodge_star(&a));
        let hs = if (p * (n - p)) % 2 == 0 { 1.0 } else { -1.0 };
        worst = worst.max((&hh - &a.scale(hs)).max_abs());
        if p > 0 && q > 0 {
            let v = gaussian_vector(&mut s, n);
            let lhs = lib(interior(v.as_slice(), &ab), "interior")?;
            let ps = if p % 2 == 0 { 1.0 } else { -1.0 };
            let rhs = &lib(wedge(&lib(interior(v.as_slice(), &a), "interior")?, &b), "wedge")?
                + &lib(wedge(&a, &lib(interior(v.as_slice(), &b), "interior")?), "wedge")?.scale(ps);
            worst = worst.max((&lhs - &rhs).max_abs());
        }
    }
    Ok((worst, "graded commutativity, contraction rule, double Hodge star".into()))
}

fn octonion_norms(ctx: &Ctx) -> Measured {
    let o = AlgebraTable::octonions();
    let mut s = rng(ctx, 7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..8).map(|_| gaussian(&mut s)).collect();
        let y: Vec<f64> = (0..8).map(|_| gaussian(&mut s)).collect();
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        let xy = o.mul(&x, &y);
        worst = worst.max((norm(&xy) - norm(&x) * norm(&y)).abs() / (1.0 + norm(&x) * norm(&y)));
    }
    let a = build(CalibrationKind::Associative, &ctx.opts)?;
    let co = build(CalibrationKind::Coassociative, &ctx.opts)?;
    worst = worst.max((&co.form - &hodge_star(&a.form)).max_abs());
    Ok((worst, "|xy| = |x||y| on 1000 pairs; coassociative = *associative".into()))
}

fn cone_certificates(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 11);
    let mut counts = (0usize, 0usize);
    for kind in [CalibrationKind::Kahler { m: 2 }, CalibrationKind::SpecialLagrangian { m: 3, theta: 0.0 }] {
        let c = build(kind, &ctx.opts)?;
        let ps = planes(ctx, &c, 10)?;
        for i in 0..10 {
            let xi = if i % 2 == 0 {
                lib(random_plane(c.n(), c.p(), ctx.seed.wrapping_add(100 + i)), "random_plane")?
            } else {
                ps[i as usize].clone()
            };
            let t = xi.plucker();
            let cert = lib(positive_cone_membership(t, &c, &ctx.opts), "membership")?;
            let ok = lib(verify_certificate(&cert, t, &c, &ctx.opts), "verify")?;
            let expect = lib(pair(&c.form, t), "pair")? >= 1.0 - c.tol_plane;
            if !ok || (cert.verdict == Verdict::Inside) != expect {
                return Err(format!("{} target {i}: verdict {}, verified {ok}", c.name, cert.verdict.as_str()));
            }
            if expect {
                counts.0 += 1;
            } else {
                counts.1 += 1;
            }
        }
        let mix = ps.iter().take(3).fold(lib(Multivector::zeros(c.n(), c.p()), "zeros")?, |acc, p| {
            &acc + &p.plucker().scale(uniform(&mut s, 0.2, 1.0))
        });
        let cert = lib(positive_cone_membership(&mix, &c, &ctx.opts), "membership")?;
        if cert.verdict != Verdict::Inside || !lib(verify_certificate(&cert, &mix, &c, &ctx.opts), "verify")? {
            return Err(format!("{}: positive combination not certified inside", c.name));
        }
    }
    Ok((0.0, format!("{} inside, {} outside simple targets; combinations inside", counts.0, counts.1)))
}

fn boundary_hyperplanes(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 12);
    let c = dxdy();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let a = uniform(&mut s, 0.0, std::f64::consts::TAU);
        let tilt = if i % 2 == 0 { 0.0 } else { uniform(&mut s, 0.2, 1.4) };
        let e = [a.cos() * tilt.cos(), a.sin() * tilt.cos(), tilt.sin()];
        let r = lib(hyperplane_boundary_test(&c, &e, &ctx.opts), "boundary test")?;
        if r.on_boundary != (i % 2 == 0) {
            return Err(format!("direction {e:?}: on_boundary = {}", r.on_boundary));
        }
        worst = worst.max((r.margin - (1.0 - tilt.cos().powi(2))).abs());
    }
    Ok((worst, "dx∧dy hyperplane margins against 1 − cos²(tilt)".into()))
}

fn gradient_square_positive(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 13);
    let c = build(CalibrationKind::SpecialLagrangian { m: 3, theta: 0.0 }, &ctx.opts)?;
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let jet = lib(Jet2::new(0.0, gaussian_vector(&mut s, 6), symmetric(&mut s, 6)), "jet")?;
        let g = lib(gradient_square(&jet, &c), "gradient_square")?;
        let m = lib(form_margin(&g, &c, None, Sense::Min, &ctx.opts), "form_margin")?.value;
        worst = worst.max(-m);
    }
    Ok((worst.max(0.0), "df∧d^φf is nonnegative on calibrated planes (special Lagrangian)".into()))
}

fn normal_kahler(ctx: &Ctx) -> Measured {
    let c = build(CalibrationKind::Kahler { m: 2 }, &ctx.opts)?;
    let r = lib(normality_check(&c, 2, &ctx.opts), "normality")?;
    if !r.normal {
        return Err(format!("Kähler reported not normal ({} mismatches)", r.mismatches.len()));
    }
    Ok((r.worst_angle, "Kähler on C², worst principal angle".into()))
}

fn torus_threshold(ctx: &Ctx) -> Measured {
    let c = dxdy();
    let o = ctx.opts.clone().with_restarts(4);
    let convex = |r: f64| lib(torus_scan(2.0, r, 8, &c, &o), "torus_scan").map(|t| t.convex);
    if !convex(0.9)? || convex(1.1)? {
        return Err("endpoints misclassified".into());
    }
    let (mut lo, mut hi) = (0.5, 1.5);
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if convex(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let ratio = 0.25 * (lo + hi);
    Ok(((ratio - 0.5).abs(), format!("R = 2: transition at r*/R = {ratio:.4}")))
}

fn sphere_margins(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 21);
    let mut worst: f64 = 0.0;
    for kind in [CalibrationKind::Kahler { m: 2 }, CalibrationKind::Associative] {
        let c = build(kind, &ctx.opts)?;
        let n = c.n();
        let r = uniform(&mut s, 0.5, 3.0);
        let x = unit_vector(&mut s, n) * r;
        let rho = lib(Jet2::quadratic(&(DMatrix::identity(n, n) / r), &DVector::zeros(n), -0.5 * r, &x), "jet")?;
        let rep = lib(boundary_margin(&lib(SurfaceJet::new(rho), "surface")?, &c, &ctx.opts), "boundary")?;
        worst = worst.max((rep.tangential_margin - c.p() as f64 / r).abs()).max(rep.cross_check);
    }
    Ok((worst, "spheres: margin p/r, both routes agree".into()))
}

fn defining_function_scaling(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 22);
    let c = build(CalibrationKind::Kahler { m: 2 }, &ctx.opts)?;
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let rho = lib(Jet2::new(0.0, unit_vector(&mut s, 4), symmetric(&mut s, 4)), "jet")?;
        let u = uniform(&mut s, 0.2, 5.0);
        let a = lib(boundary_margin(&lib(SurfaceJet::new(rho.clone()), "surface")?, &c, &ctx.opts), "boundary")?;
        let b = lib(boundary_margin(&lib(SurfaceJet::new(rho.scale(u)), "surface")?, &c, &ctx.opts), "boundary")?;
        if a.class != ConvexityClass::Vacuous {
            worst = worst.max((b.tangential_margin - u * a.tangential_margin).abs() / (1.0 + u));
        }
        worst = worst.max(a.cross_check).max(b.cross_check);
    }
    Ok((worst, "ρ → uρ scales the tangential margin by u; cross-checks".into()))
}

fn strict_kernels_free(ctx: &Ctx) -> Measured {
    let mut s = rng(ctx, 23);
    let c = build(CalibrationKind::Kahler { m: 2 }, &ctx.opts)?;
    let mut strict = 0;
    for i in 0..6 {
        let kernel = lib(random_plane(4, 1 + i % 2, ctx.seed.wrapping_add(200 + i as u64)), "random_plane")?;
        let nrm = complement(kernel.frame());
        let w = gaussian_matrix(&mut s, nrm.ncols(), nrm.ncols());
        let h = &nrm * (&w * w.transpose() + DMatrix::identity(nrm.ncols(), nrm.ncols()) * 0.1) * nrm.transpose();
        let h = (&h + h.transpose()) * 0.5;
        let jet = lib(Jet2::new(0.0, DVector::zeros(4), h), "jet")?;
        if lib(psh_classify(&jet, &c, &ctx.opts), "classify")?.class == PshClass::StrictlyPsh {
            strict += 1;
            let f = lib(free_test(kernel.frame(), &c, &ctx.opts), "free_test")?;
            if !f.free || !f.consistent {
                return Err(format!("kernel {i} of a strictly psh jet is not free"));
            }
        }
    }
    Ok((0.0, format!("{strict} strictly psh jets, kernels free")))
}

fn hull_cases(ctx: &Ctx) -> Measured {
    let c = build(CalibrationKind::Volume { n: 2 }, &ctx.opts)?;
    let circle: Vec<DVector<f64>> = (0..12)
        .map(|k| {
            let t = k as f64 * std::f64::consts::PI / 6.0;
            DVector::from_column_slice(&[t.cos(), t.sin()])
        })
        .collect();
    let inner = lib(
        quad_hull_membership(&HullProblem { points: circle.clone(), query: DVector::zeros(2), cal: c }, &ctx.opts),
        "hull",
    )?;
    if !inner.inside {
        return Err("circle center not inside".into());
    }
    let lifted: Vec<DVector<f64>> = circle.iter().map(|p| DVector::from_column_slice(&[p[0], p[1], 0.0])).collect();
    let query = DVector::from_column_slice(&[0.0, 0.0, 0.3]);
    let hp = HullProblem { points: lifted, query: query.clone(), cal: dxdy() };
    let off = lib(quad_hull_membership(&hp, &ctx.opts), "hull")?;
    let sep = off.separator.ok_or("no separator for the lifted center")?;
    let worst_k = hp.points.iter().map(|k| sep.eval(k)).fold(f64::NEG_INFINITY, f64::max);
    if off.inside || sep.eval(&query) <= 0.0 {
        return Err(format!("lifted center: inside {}, separator value {}", off.inside, sep.eval(&query)));
    }
    Ok((worst_k.max(0.0), "center inside; lifted center separated (residual: max of separator on K)".into()))
}

fn registry(suite: Suite) -> Vec<Check> {
    let identities = vec![
        Check { name: "comass_one", tolerance: 1e-6, run: comass_one },
        Check { name: "trace_identity", tolerance: 1e-8, run: trace_identity },
        Check { name: "skew_vanishing", tolerance: 1e-8, run: skew_vanishing },
        Check { name: "rank_one_trace", tolerance: 1e-8, run: rank_one_trace },
        Check { name: "first_cousins", tolerance: 1e-8, run: first_cousins },
        Check { name: "cousin_decomposition", tolerance: 1e-10, run: cousin_decomposition },
        Check { name: "half_norm_square", tolerance: 0.0, run: half_norm_square },
        Check { name: "gradient_square", tolerance: 1e-8, run: gradient_squares },
        Check { name: "exterior_laws", tolerance: 1e-12, run: exterior_laws },
        Check { name: "octonions", tolerance: 1e-12, run: octonion_norms },
    ];
    let cones = vec![
        Check { name: "cone_certificates", tolerance: 0.0, run: cone_certificates },
        Check { name: "boundary_hyperplanes", tolerance: 1e-8, run: boundary_hyperplanes },
        Check { name: "gradient_square_positive", tolerance: 1e-8, run: gradient_square_positive },
        Check { name: "normality", tolerance: 1e-4, run: normal_kahler },
    ];
    let convexity = vec![
        Check { name: "torus_threshold", tolerance: 5e-3, run: torus_threshold },
        Check { name: "sphere_margins", tolerance: 1e-6, run: sphere_margins },
        Check { name: "defining_function_scaling", tolerance: 1e-6, run: defining_function_scaling },
        Check { name: "strict_kernels_free", tolerance: 0.0, run: strict_kernels_free },
        Check { name: "hull", tolerance: 1e-9, run: hull_cases },
    ];
    match suite {
        Suite::Identities => identities,
        Suite::Cones => cones,
        Suite::Convexity => convexity,
        Suite::All => identities.into_iter().chain(cones).chain(convexity).collect(),
    }
}

pub fn run_suite(suite: Suite, g: &Global) -> Result<Outcome, CliError> {
    let opts = g.opts();
    let checks = registry(suite);
    let catalog = if matches!(suite, Suite::Identities | Suite::All) {
        kinds().into_par_iter().map(|k| build(k, &opts)).collect::<Result<Vec<_>, _>>().map_err(CliError::Input)?
    } else {
        Vec::new()
    };
    let ctx = Ctx { seed: g.seed, opts, catalog };
    let results: Vec<Value> = checks
        .par_iter()
        .map(|c| match (c.run)(&ctx) {
            Ok((residual, detail)) => json!({
                "name": c.name,
                "pass": residual <= c.tolerance,
                "residual": residual,
                "tolerance": c.tolerance,
                "detail": detail,
            }),
            Err(e) => json!({"name": c.name, "pass": false, "residual": null, "tolerance": c.tolerance, "detail": e}),
        })
        .collect();
    let failed: Vec<String> =
        results.iter().filter(|r| r["pass"] == json!(false)).map(|r| r["name"].as_str().unwrap_or("").to_string()).collect();
    let payload = json!({
        "suite": suite,
        "seed": g.seed,
        "checks": results,
        "passed": checks.len() - failed.len(),
        "failed": failed.len(),
    });
    let failure = (!failed.is_empty()).then(|| failed.join(", "));
    Ok(Outcome { payload, flagged: false, failure, csv: None })
}
