//! Multi-start Riemannian ascent on `G(p, n)` with QR retraction, Armijo
//! backtracking and a Newton polish on the negative-curvature directions.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::objective::{cousin_gradient, FormObjective, Objective};
use super::{cluster, random_plane, report, sort_candidates, Candidate, OptOptions, OptReport, OrientedPlane};
use crate::catalog::Calibration;
use crate::error::{Error, Result};
use crate::exterior::Form;
use crate::linalg;

/// Moves `frame` along cousin coordinates `coords` scaled by `t`.
pub(crate) fn retract(frame: &DMatrix<f64>, normal: &DMatrix<f64>, coords: &DVector<f64>, t: f64) -> DMatrix<f64> {
    let p = frame.ncols();
    let q = normal.ncols();
    let x = DMatrix::from_fn(q, p, |k, i| coords[i * q + k] * t);
    linalg::orthonormalize(&(frame + normal * x))
}

pub(crate) struct Ascent {
    pub frame: DMatrix<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Local maximization from `start` until the cousin gradient drops below
/// `tol` or `max_iter` iterations pass.
pub(crate) fn ascend(obj: &dyn Objective, start: &DMatrix<f64>, tol: f64, max_iter: usize) -> Ascent {
    let mut f = start.clone();
    let mut v = obj.value(&f);
    let p = f.ncols();
    let n = f.nrows();
    if p == n || p == 0 {
        return Ascent { frame: f, value: v, gradient_norm: 0.0, converged: true };
    }
    let mut t = 1.0;
    let mut gn = f64::INFINITY;
    for _ in 0..max_iter {
        let normal = linalg::complement(&f);
        let g = cousin_gradient(obj, &f, &normal);
        gn = g.norm();
        if gn <= tol {
            return Ascent { frame: f, value: v, gradient_norm: gn, converged: true };
        }
        if let Some(h) = obj.cousin_hessian(&f, &normal) {
            let (vals, vecs) = linalg::sym_eigen(&h);
            let scale = vals.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            let thr = 1e-6 * scale;
            let mut step = DVector::zeros(g.len());
            for (k, lam) in vals.iter().enumerate() {
                let col = vecs.column(k);
                let c = col.dot(&g);
                if *lam < -thr {
                    step -= col * (c / lam);
                } else {
                    step += col * c;
                }
            }
            if step.norm() < 0.5 {
                let f_new = retract(&f, &normal, &step, 1.0);
                let v_new = obj.value(&f_new);
                if v_new >= v - 1e-15 * (1.0 + v.abs()) {
                    f = f_new;
                    v = v_new;
                    continue;
                }
            }
        }
        let mut tt = (2.0 * t).min(1.0 / gn.max(1e-300)).max(1e-12);
        let mut moved = false;
        for _ in 0..60 {
            let f_new = retract(&f, &normal, &g, tt);
            let v_new = obj.value(&f_new);
            if v_new >= v + 1e-4 * tt * gn * gn {
                f = f_new;
                v = v_new;
                t = tt;
                moved = true;
                break;
            }
            tt *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let normal = linalg::complement(&f);
    gn = gn.min(cousin_gradient(obj, &f, &normal).norm());
    Ascent { frame: f, value: v, gradient_norm: gn, converged: gn <= tol }
}

/// Multi-start maximization of an arbitrary objective.
pub fn maximize(obj: &dyn Objective, n: usize, p: usize, opts: &OptOptions) -> Result<OptReport> {
    let mut cands = Vec::with_capacity(opts.restarts);
    for start in start_frames(n, p, opts)? {
        let a = ascend(obj, &start, opts.tol_stationary, opts.max_iter);
        cands.push(Candidate {
            plane: OrientedPlane::new(a.frame)?,
            value: a.value,
            gradient_norm: a.gradient_norm,
            converged: a.converged,
        });
    }
    Ok(report(cands, opts, "riemannian-ascent", 1.0))
}

pub(crate) fn start_frames(n: usize, p: usize, opts: &OptOptions) -> Result<Vec<DMatrix<f64>>> {
    if p == n {
        let id = DMatrix::identity(n, n);
        let mut rev = id.clone();
        rev[(0, 0)] = -1.0;
        return Ok(alloc::vec![id, rev]);
    }
    (0..opts.restarts as u64)
        .map(|r| random_plane(n, p, opts.seed.wrapping_add(r)).map(|pl| pl.frame().clone()))
        .collect()
}

/// Comass: maximum of `φ` over `G(p, n)`.
pub fn comass(phi: &Form, opts: &OptOptions) -> Result<OptReport> {
    if phi.p() == 0 {
        return Err(Error::Invalid("comass needs a form of positive degree".into()));
    }
    maximize(&FormObjective::new(phi.clone()), phi.n(), phi.p(), opts)
}

/// Pulls a nearby plane onto the local maximum set of `φ`.
pub fn polish_on_level(phi: &Form, frame: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let a = ascend(&FormObjective::new(phi.clone()), frame, 1e-13, 60);
    (a.frame, a.value)
}

/// Calibrated planes: `φ(ξ) ≥ 1 − tol_plane`, deduplicated by principal
/// angle. Uses the calibration's closed-form sampler when present.
pub fn calibrated_planes(cal: &Calibration, count: usize, opts: &OptOptions) -> Result<Vec<OrientedPlane>> {
    let budget = opts.restarts.max(4 * count);
    let mut found = Vec::new();
    for r in 0..budget as u64 {
        if let Some(pl) = cal.draw_plane(opts.seed.wrapping_add(r), opts)? {
            found.push(Candidate { value: cal.form.eval(pl.frame())?, plane: pl, gradient_norm: 0.0, converged: true });
        }
        if cal.sampler.is_some() && found.len() >= count {
            break;
        }
    }
    if cal.sampler.is_none() {
        sort_candidates(&mut found);
    }
    let planes = cluster(found.into_iter().map(|c| c.plane), opts.cluster_radius);
    if planes.len() < count {
        return Err(Error::NotFound(format!(
            "only {} distinct calibrated planes of {} after {budget} restarts",
            planes.len(),
            cal.name
        )));
    }
    Ok(planes.into_iter().take(count).collect())
}

/// Up to `count` calibrated planes, not deduplicated (repeats allowed),
/// from at most `max(restarts, 4·count)` draws.
pub fn draw_planes(cal: &Calibration, count: usize, opts: &OptOptions) -> Result<Vec<OrientedPlane>> {
    let budget = opts.restarts.max(4 * count);
    let mut out = Vec::with_capacity(count);
    for r in 0..budget as u64 {
        if out.len() >= count {
            break;
        }
        if let Some(pl) = cal.draw_plane(opts.seed.wrapping_add(r), opts)? {
            out.push(pl);
        }
    }
    if out.is_empty() {
        return Err(Error::NotFound(format!("no calibrated plane of {} after {budget} draws", cal.name)));
    }
    Ok(out)
}

/// All distinct calibrated planes reached in `restarts` draws (at least one).
pub fn distinct_planes(cal: &Calibration, opts: &OptOptions) -> Result<Vec<OrientedPlane>> {
    let mut found = Vec::new();
    for r in 0..opts.restarts as u64 {
        if let Some(pl) = cal.draw_plane(opts.seed.wrapping_add(r), opts)? {
            found.push(pl);
        }
    }
    let planes = cluster(found, opts.cluster_radius);
    if planes.is_empty() {
        return Err(Error::NotFound(format!("no calibrated plane of {} after {} draws", cal.name, opts.restarts)));
    }
    Ok(planes)
}

/// Critical points of `φ|_G`, each with its value `φ(ξ)`, found by damped
/// Newton iterations on the cousin gradient from random starts.
pub fn critical_planes(phi: &Form, opts: &OptOptions) -> Result<Vec<(OrientedPlane, f64)>> {
    let n = phi.n();
    let p = phi.p();
    let obj = FormObjective::new(phi.clone());
    let mut cands = Vec::new();
    for start in start_frames(n, p, opts)? {
        if let Some((f, gn)) = newton_critical(&obj, &start, opts.tol_stationary, opts.max_iter.min(400)) {
            let plane = OrientedPlane::new(f)?;
            let value = phi.eval(plane.frame())?;
            cands.push(Candidate { plane, value, gradient_norm: gn, converged: true });
        }
    }
    sort_candidates(&mut cands);
    let mut kept: Vec<Candidate> = Vec::new();
    for c in cands {
        if kept.iter().all(|k| (k.value - c.value).abs() > 1e-6 || k.plane.distance(&c.plane) > opts.cluster_radius) {
            kept.push(c);
        }
    }
    Ok(kept.into_iter().map(|c| (c.plane, c.value)).collect())
}

fn newton_critical(obj: &FormObjective, start: &DMatrix<f64>, tol: f64, iters: usize) -> Option<(DMatrix<f64>, f64)> {
    let mut f = start.clone();
    if f.ncols() == f.nrows() {
        return Some((f, 0.0));
    }
    let grad_at = |f: &DMatrix<f64>| {
        let normal = linalg::complement(f);
        let g = cousin_gradient(obj, f, &normal);
        (normal, g)
    };
    let (mut normal, mut g) = grad_at(&f);
    for _ in 0..iters {
        let gn = g.norm();
        if gn <= tol {
            return Some((f, gn));
        }
        let h = obj.cousin_hessian(&f, &normal)?;
        let step = linalg::lstsq(&h, &(-&g), 1e-10);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..30 {
            let f_new = retract(&f, &normal, &step, t);
            let (n_new, g_new) = grad_at(&f_new);
            if g_new.norm() < gn * (1.0 - 1e-4 * t) {
                f = f_new;
                normal = n_new;
                g = g_new;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // steepest descent on |g|²
            let d = -(&h * &g);
            let dn = d.norm();
            if dn == 0.0 {
                break;
            }
            let mut t = gn / dn;
            for _ in 0..40 {
                let f_new = retract(&f, &normal, &d, t);
                let (n_new, g_new) = grad_at(&f_new);
                if g_new.norm() < gn {
                    f = f_new;
                    normal = n_new;
                    g = g_new;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    let gn = g.norm();
    (gn <= tol).then_some((f, gn))
}

/// Random plane polished onto the maximum set of `φ`, if it reaches
/// `φ ≥ 1 − tol_plane`.
pub(crate) fn ascent_sample(phi: &Form, seed: u64, opts: &OptOptions) -> Result<Option<OrientedPlane>> {
    let start = random_plane(phi.n(), phi.p(), seed)?;
    let a = ascend(&FormObjective::new(phi.clone()), start.frame(), opts.tol_stationary, opts.max_iter);
    if a.value >= 1.0 - opts.tol_plane {
        Ok(Some(OrientedPlane::new(a.frame)?))
    } else {
        Ok(None)
    }
}
