//! One function per subcommand. Each returns a deterministic payload.

use calgeom::catalog::Calibration;
use calgeom::cones::{
    essential_subspace, lambda_span, normality_check, pluriharmonic_mod_d_test, positive_cone_membership,
    verify_certificate, ConeCertificate, SubspaceBasis, Verdict,
};
use calgeom::convexity::{
    boundary_margin, dist_sq_jet, free_test, log_delta_margin, quad_hull_membership, stabilize_defining, torus_scan,
    ConvexityClass, HullProblem, HullReport, SurfaceJet,
};
use calgeom::exterior::binomial;
use calgeom::grassmann::{calibrated_planes, comass, random_plane, OptReport};
use calgeom::pshcheck::{
    ellipticity_report, nonconvex_psh_witness, phi_hessian_point, phi_laplacian, pluriharmonic_quadratic_space,
    psh_classify, richness_check, Jet2, PshClass, PshReport,
};
use calgeom::{Error, Form, OptOptions, OrientedPlane};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::builtin;
use crate::formats::{
    matrix_from_rows, points_from_rows, read_json, rows_of, CalibrationJson, FormJson, JetJson, PlaneJson,
    SurfaceJson, TargetJson,
};
use crate::{verify, Cli, CliError, Command, Global, Outcome};

pub fn plane_json(xi: &OrientedPlane) -> Value {
    serde_json::to_value(PlaneJson::from_plane(xi)).expect("plain data")
}

pub fn form_json(f: &Form) -> Value {
    serde_json::to_value(FormJson::from_form(f)).expect("plain data")
}

fn planes_json(ps: &[OrientedPlane]) -> Value {
    Value::Array(ps.iter().map(plane_json).collect())
}

fn vector(v: &DVector<f64>) -> Value {
    json!(v.iter().copied().collect::<Vec<_>>())
}

fn matrix(m: &DMatrix<f64>) -> Value {
    json!(rows_of(m))
}

pub fn opt_report(r: &OptReport, o: &OptOptions) -> Value {
    json!({
        "value": r.value,
        "argplanes": planes_json(&r.argplanes),
        "restarts": r.restarts,
        "converged": r.converged,
        "gradient_norm": r.gradient_norm,
        "seed": r.seed,
        "method": r.method,
        "tol_stationary": o.tol_stationary,
        "tol_plane": o.tol_plane,
    })
}

/// Reapplies the requested dead-band to converged margins.
fn psh_class(r: &PshReport, tol: f64) -> PshClass {
    if r.converged {
        PshClass::from_margins(r.lower_margin, r.upper_margin, tol)
    } else {
        PshClass::Indeterminate
    }
}

pub fn psh_report(r: &PshReport, tol: f64) -> Value {
    json!({
        "lower_margin": r.lower_margin,
        "upper_margin": r.upper_margin,
        "class": psh_class(r, tol).as_str(),
        "witness_plane": r.witness_plane.as_ref().map(plane_json),
        "tolerance": tol,
        "cross_check": r.cross_check,
        "converged": r.converged,
        "seed": r.seed,
    })
}

pub fn certificate_json(c: &ConeCertificate) -> Value {
    json!({
        "verdict": c.verdict.as_str(),
        "weights": c.weights.iter().map(|(p, w)| json!({"plane": plane_json(p), "w": w})).collect::<Vec<_>>(),
        "separator": c.separator.as_ref().map(form_json),
        "margin": c.margin,
        "pairing": c.pairing,
        "iters": c.iters,
        "seed": c.seed,
    })
}

fn span_json(s: &SubspaceBasis) -> Value {
    json!({
        "ambient": s.ambient,
        "dim": s.dim(),
        "basis": matrix(&s.basis),
        "singular_values": s.singular_values,
        "rank_gap": s.rank_gap,
        "unstable": s.unstable,
    })
}

pub fn hull_json(r: &HullReport) -> Value {
    json!({
        "inside": r.inside,
        "undecided": r.undecided,
        "value": r.value,
        "separator": r.separator.as_ref().map(|s| json!({"q": matrix(&s.q), "b": vector(&s.b), "c": s.c})),
        "psh_margin": r.psh_margin,
        "cuts": r.cuts,
        "relaxation": "quadratic hull, which contains the hull for all psh functions",
    })
}

fn convexity_class(lower: f64, upper: f64, class: ConvexityClass, tol: f64) -> ConvexityClass {
    match class {
        ConvexityClass::Vacuous | ConvexityClass::Indeterminate => class,
        _ => ConvexityClass::from_margins(lower, upper, tol),
    }
}

fn calibration(arg: &str, g: &Global) -> Result<Calibration, CliError> {
    builtin::resolve(arg, g.tol_plane, &g.opts())
}

fn jet(arg: &str, c: &Calibration) -> Result<Jet2, CliError> {
    let j = read_json::<JetJson>(arg, "jet")?.to_jet()?;
    if j.n() != c.n() {
        return Err(CliError::Input(format!("jet on R^{} for a calibration on R^{}", j.n(), c.n())));
    }
    Ok(j)
}

fn vector_arg(arg: &str, what: &str) -> Result<DVector<f64>, CliError> {
    Ok(DVector::from_vec(read_json::<Vec<f64>>(arg, what)?))
}

/// Either one point or a list of points.
fn queries(arg: &str) -> Result<Vec<DVector<f64>>, CliError> {
    let v: Value = read_json(arg, "query")?;
    match &v {
        Value::Array(items) if items.iter().all(Value::is_number) => {
            Ok(vec![DVector::from_vec(serde_json::from_value(v).map_err(|e| CliError::Input(format!("query: {e}")))?)])
        }
        _ => {
            let rows: Vec<Vec<f64>> =
                serde_json::from_value(v).map_err(|e| CliError::Input(format!("query: {e}")))?;
            points_from_rows(&rows, "query")
        }
    }
}

pub fn dispatch(cli: &Cli) -> Result<Outcome, CliError> {
    let g = &cli.global;
    let o = g.opts();
    match &cli.command {
        Command::Comass { calibration: arg } => {
            let c = calibration(arg, g)?;
            let r = comass(&c.form, &o)?;
            let payload = json!({
                "calibration": serde_json::to_value(CalibrationJson::from_calibration(&c)).expect("plain data"),
                "comass": opt_report(&r, &o),
            });
            Ok(Outcome::flagged_if(payload, !r.converged))
        }
        Command::Planes { calibration: arg, count } => {
            let c = calibration(arg, g)?;
            match calibrated_planes(&c, *count, &o) {
                Ok(ps) => Ok(Outcome::ok(json!({"calibration": c.name, "planes": planes_json(&ps)}))),
                Err(Error::NotFound(m)) => {
                    Ok(Outcome::flagged_if(json!({"calibration": c.name, "planes": [], "note": m}), true))
                }
                Err(e) => Err(e.into()),
            }
        }
        Command::CheckPsh { calibration: arg, jet: j } => {
            let c = calibration(arg, g)?;
            let r = psh_classify(&jet(j, &c)?, &c, &o)?;
            let class = psh_class(&r, g.tol);
            Ok(Outcome::flagged_if(psh_report(&r, g.tol), class == PshClass::Indeterminate))
        }
        Command::Laplacian { calibration: arg, jet: j } => {
            let c = calibration(arg, g)?;
            let jt = jet(j, &c)?;
            let h = phi_hessian_point(&jt, &c, None)?;
            Ok(Outcome::ok(json!({"laplacian": phi_laplacian(&jt, &c)?, "phi_hessian": form_json(&h)})))
        }
        Command::Ellipticity { calibration: arg } => {
            let c = calibration(arg, g)?;
            let e = ellipticity_report(&c, &o)?;
            Ok(Outcome::ok(json!({
                "min_symbol_norm": e.min_symbol_norm,
                "dd_elliptic": e.dd_elliptic,
                "reduced_margin": e.reduced_margin,
                "reduced_elliptic": e.reduced_elliptic,
                "planes_used": e.planes_used,
            })))
        }
        Command::Witness { calibration: arg } => {
            let c = calibration(arg, g)?;
            match nonconvex_psh_witness(&c, &o) {
                Ok(w) => Ok(Outcome::ok(json!({
                    "found": true,
                    "matrix": matrix(&w.matrix),
                    "min_eigenvalue": w.min_eigenvalue,
                    "psh_margin": w.psh_margin,
                    "cuts": w.cuts,
                }))),
                Err(Error::NotFound(m)) => Ok(Outcome::flagged_if(json!({"found": false, "note": m}), true)),
                Err(e) => Err(e.into()),
            }
        }
        Command::PlhSpace { calibration: arg, samples } => {
            let c = calibration(arg, g)?;
            let n = c.n();
            let q = pluriharmonic_quadratic_space(&c, samples.unwrap_or(4 * n * (n + 1)), &o)?;
            Ok(Outcome::flagged_if(
                json!({
                    "dimension": q.dimension,
                    "basis": q.basis.iter().map(matrix).collect::<Vec<_>>(),
                    "residual": q.residual,
                    "rank_gap": q.rank_gap,
                    "unstable": q.unstable,
                    "samples": q.samples,
                }),
                q.unstable,
            ))
        }
        Command::Richness { calibration: arg, plane, line } => {
            let c = calibration(arg, g)?;
            let p = match plane {
                Some(s) => read_json::<PlaneJson>(s, "plane")?.to_plane()?,
                None => random_plane(c.n(), 2, g.seed)?,
            };
            if p.p() != 2 {
                return Err(CliError::Input(format!("richness needs a 2-plane, got p = {}", p.p())));
            }
            let ell = match line {
                Some(s) => vector_arg(s, "line")?,
                None => p.frame().column(0).into_owned(),
            };
            let r = richness_check(&c, p.frame(), ell.as_slice(), &o)?;
            Ok(Outcome::ok(json!({
                "plane": plane_json(&p),
                "line": vector(&ell),
                "found": r.found,
                "value": r.value,
                "xi0": r.xi0.as_ref().map(plane_json),
            })))
        }
        Command::Cone { calibration: arg, target } => {
            let c = calibration(arg, g)?;
            let t = read_json::<TargetJson>(target, "target")?.to_multivector()?;
            let cert = positive_cone_membership(&t, &c, &o)?;
            let verified = verify_certificate(&cert, &t, &c, &o)?;
            let mut payload = certificate_json(&cert);
            payload["verified"] = json!(verified);
            let decided = matches!(cert.verdict, Verdict::Inside | Verdict::Outside);
            Ok(Outcome::flagged_if(payload, !decided || !verified))
        }
        Command::Span { calibration: arg, samples, essential } => {
            let c = calibration(arg, g)?;
            let s = lambda_span(&c, samples.unwrap_or(8 * binomial(c.n(), c.p())), &o)?;
            let mut payload = json!({"span": span_json(&s)});
            let mut flagged = s.unstable;
            if *essential {
                let e = essential_subspace(&c, &o)?;
                flagged |= !e.verified;
                payload["essential"] = json!({
                    "subspace": span_json(&e.subspace),
                    "restriction_defect": e.restriction_defect,
                    "verified": e.verified,
                });
            }
            Ok(Outcome::flagged_if(payload, flagged))
        }
        Command::Normality { calibration: arg, trials } => {
            let c = calibration(arg, g)?;
            let r = normality_check(&c, *trials, &o)?;
            Ok(Outcome::ok(json!({
                "normal": r.normal,
                "worst_angle": r.worst_angle,
                "trials": r.trials,
                "mismatches": r.mismatches.iter()
                    .map(|(e, lhs, rhs)| json!({"direction": e, "restricted_dim": lhs, "span_dim": rhs}))
                    .collect::<Vec<_>>(),
            })))
        }
        Command::PlhModD { calibration: arg, jet: j, samples } => {
            let c = calibration(arg, g)?;
            let jt = jet(j, &c)?;
            let s = lambda_span(&c, samples.unwrap_or(8 * binomial(c.n(), c.p())), &o)?;
            let r = pluriharmonic_mod_d_test(&jt, &c, &s)?;
            Ok(Outcome::flagged_if(
                json!({
                    "residual": r.residual,
                    "alpha": form_json(&r.alpha),
                    "sigma_norm": r.sigma_norm,
                    "degenerate_gradient": r.degenerate_gradient,
                }),
                s.unstable,
            ))
        }
        Command::Boundary { calibration: arg, jet: j, delta, stabilize } => {
            let c = calibration(arg, g)?;
            let s = SurfaceJet::new(jet(j, &c)?)?;
            let r = boundary_margin(&s, &c, &o)?;
            let class = convexity_class(r.tangential_margin, r.upper_margin, r.class, g.tol);
            let mut payload = json!({
                "tangential_margin": r.tangential_margin,
                "upper_margin": r.upper_margin,
                "class": class.as_str(),
                "second_fundamental": matrix(&r.second_fundamental),
                "tangent_basis": matrix(&r.tangent_basis),
                "witness_plane": r.witness_plane.as_ref().map(plane_json),
                "cross_check": r.cross_check,
                "converged": r.converged,
            });
            if let Some(d) = delta {
                payload["log_delta_margin"] = json!(log_delta_margin(&s, &c, *d, &o)?);
            }
            if *stabilize {
                payload["stabilized"] = match stabilize_defining(&s, &c, &o) {
                    Ok(st) => json!({"possible": true, "a": st.a, "margin_at_a": st.margin_at_a}),
                    Err(Error::NotStrictlyConvex { margin, witness }) => json!({
                        "possible": false,
                        "margin": margin,
                        "witness_plane": witness.as_ref().map(plane_json),
                    }),
                    Err(e) => return Err(e.into()),
                };
            }
            Ok(Outcome::flagged_if(payload, class == ConvexityClass::Indeterminate))
        }
        Command::TorusScan { calibration: arg, big, small, resolution } => {
            let c = calibration(arg, g)?;
            let t = torus_scan(*big, *small, *resolution, &c, &o)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["u", "v", "x", "y", "z", "vacuous", "margin"]).map_err(|e| CliError::Io(e.to_string()))?;
            for p in &t.points {
                let row = [p.u, p.v, p.x, p.y, p.z].map(|x| format!("{x:?}"));
                let margin = if p.margin.is_finite() { format!("{:?}", p.margin) } else { String::new() };
                w.write_record(row.iter().map(String::as_str).chain([if p.vacuous { "true" } else { "false" }, &margin]))
                    .map_err(|e| CliError::Io(e.to_string()))?;
            }
            let csv = String::from_utf8(w.into_inner().map_err(|e| CliError::Io(e.to_string()))?).expect("ascii");
            let points: Vec<Value> = t
                .points
                .iter()
                .map(|p| json!({"u": p.u, "v": p.v, "x": p.x, "y": p.y, "z": p.z, "vacuous": p.vacuous, "margin": p.margin}))
                .collect();
            let payload = json!({
                "R": big,
                "r": small,
                "resolution": resolution,
                "min_margin": t.min_margin,
                "convex": t.convex,
                "witness": t.witness.as_ref().map(|p| json!({"u": p.u, "v": p.v, "margin": p.margin})),
                "points": points,
            });
            Ok(Outcome { payload, flagged: false, failure: None, csv: Some(csv) })
        }
        Command::Free { calibration: arg, subspace } => {
            let c = calibration(arg, g)?;
            let t = matrix_from_rows(&read_json::<Vec<Vec<f64>>>(subspace, "subspace")?, "subspace")?;
            let r = free_test(&t, &c, &o)?;
            Ok(Outcome::flagged_if(
                json!({
                    "free": r.free,
                    "sup_phi": r.sup_phi,
                    "isotropic": r.isotropic,
                    "normal_margin": r.normal_margin,
                    "consistent": r.consistent,
                }),
                !r.consistent,
            ))
        }
        Command::DistJet { surface, point, calibration: arg } => {
            let s = read_json::<SurfaceJson>(surface, "surface")?.to_surface()?;
            let x = vector_arg(point, "point")?;
            let j = dist_sq_jet(&s, &x)?;
            let mut payload = json!({"jet": serde_json::to_value(JetJson::from_jet(&j)).expect("plain data")});
            let mut flagged = false;
            if let Some(arg) = arg {
                let c = calibration(arg, g)?;
                let r = psh_classify(&j, &c, &o)?;
                flagged = psh_class(&r, g.tol) == PshClass::Indeterminate;
                payload["psh"] = psh_report(&r, g.tol);
            }
            Ok(Outcome::flagged_if(payload, flagged))
        }
        Command::Hull { calibration: arg, points, query } => {
            let c = calibration(arg, g)?;
            let k = points_from_rows(&read_json::<Vec<Vec<f64>>>(points, "points")?, "points")?;
            let qs = queries(query)?;
            if let Some(bad) = k.iter().chain(&qs).find(|x| x.len() != c.n()) {
                return Err(CliError::Input(format!("point of length {} for a calibration on R^{}", bad.len(), c.n())));
            }
            let reports: Vec<Result<HullReport, Error>> = qs
                .par_iter()
                .map(|q| quad_hull_membership(&HullProblem { points: k.clone(), query: q.clone(), cal: c.clone() }, &o))
                .collect();
            let mut out = Vec::with_capacity(reports.len());
            let mut flagged = false;
            for (q, r) in qs.iter().zip(reports) {
                let r = r?;
                flagged |= r.undecided;
                let mut v = hull_json(&r);
                v["query"] = vector(q);
                out.push(v);
            }
            Ok(Outcome::flagged_if(json!({"reports": out}), flagged))
        }
        Command::Verify { suite } => verify::run_suite(*suite, g),
    }
}
