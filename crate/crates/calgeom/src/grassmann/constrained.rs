//! Extremizing a linear functional over `G(φ)`, optionally restricted to
//! planes inside a subspace.
//!
//! Each restart starts on `G(φ)`, runs a warm-started penalty ascent on
//! `±a(ξ) − μ(1 − φ(ξ))²` for `μ ∈ {10, 10², 10³, 10⁴}`, re-projects onto
//! the maximum set of `φ`, and finishes with projected-gradient steps along
//! the null space of the Hessian of `φ|_G` (the tangent space of `G(φ)`),
//! re-projecting after every step.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use super::ascent::{ascend, polish_on_level, retract};
use super::objective::{cousin_gradient, FormObjective, Objective, Penalized, TraceObjective};
use super::{random_plane, report, Candidate, OptOptions, OptReport, OrientedPlane};
use crate::catalog::Calibration;
use crate::error::{shape_err, Error, Result};
use crate::exterior::{pullback, Form};
use crate::linalg;

const PENALTIES: [f64; 4] = [10.0, 1e2, 1e3, 1e4];
const PENALTY_ITERS: usize = 40;
/// Closed-form samplers draw this many candidates per restart; the best half
/// of the restarts go to the highest objective values, the rest to the
/// earliest draws.
const SCREEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    fn sign(self) -> f64 {
        match self {
            Sense::Min => -1.0,
            Sense::Max => 1.0,
        }
    }
}

/// A linear subspace of Rⁿ given by an orthonormal basis (columns).
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        let d = crate::exterior::orthonormality_defect(&basis);
        if !(d <= 1e-10) {
            return Err(Error::NotOrthonormal(d));
        }
        Ok(Self { basis })
    }

    /// Orthonormalizes spanning columns; dependent columns are dropped.
    pub fn spanned_by(m: &DMatrix<f64>) -> Self {
        let span = linalg::column_span(m, 1e-10);
        Self { basis: span.basis }
    }

    /// Orthogonal complement of `span(v)`.
    pub fn hyperplane(normal: &[f64]) -> Result<Self> {
        let v = DVector::from_column_slice(normal);
        let r = v.norm();
        if r == 0.0 {
            return Err(Error::Degenerate("zero normal vector".into()));
        }
        let f = DMatrix::from_column_slice(normal.len(), 1, (v / r).as_slice());
        Ok(Self { basis: linalg::complement(&f) })
    }

    pub fn whole(n: usize) -> Self {
        Self { basis: DMatrix::identity(n, n) }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self) -> Self {
        Self { basis: linalg::complement(&self.basis) }
    }

    pub fn projection(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }
}

/// Extremum of `a(ξ)` over `ξ ∈ G(φ)` with `span ξ ⊆ restrict_to`.
/// Returns [`Error::Infeasible`] when no calibrated plane lies in the
/// subspace.
pub fn form_margin(
    a: &Form,
    cal: &Calibration,
    restrict_to: Option<&Subspace>,
    sense: Sense,
    opts: &OptOptions,
) -> Result<OptReport> {
    a.same_shape(&cal.form)?;
    let s = sense.sign();
    match restrict_to {
        None => {
            let obj = FormObjective { form: a.clone(), sign: s };
            level_extremum(&obj, cal, &cal.form, None, opts, s)
        }
        Some(sub) => {
            check_sub(sub, cal)?;
            let obj = FormObjective { form: pullback(a, sub.basis())?, sign: s };
            let phi = pullback(&cal.form, sub.basis())?;
            level_extremum(&obj, cal, &phi, Some(sub), opts, s)
        }
    }
}

/// Extremum of `⟨A, P_ξ⟩` over the same feasible set, evaluated directly
/// from the projection rather than through `λ_φ`.
pub fn trace_margin(
    a: &DMatrix<f64>,
    cal: &Calibration,
    restrict_to: Option<&Subspace>,
    sense: Sense,
    opts: &OptOptions,
) -> Result<OptReport> {
    let n = cal.form.n();
    if a.nrows() != n || a.ncols() != n {
        return Err(shape_err!("{}x{} matrix for a calibration on R^{n}", a.nrows(), a.ncols()));
    }
    let s = sense.sign();
    let sym = crate::exterior::sym_part(a);
    match restrict_to {
        None => level_extremum(&TraceObjective { matrix: sym, sign: s }, cal, &cal.form, None, opts, s),
        Some(sub) => {
            check_sub(sub, cal)?;
            let b = sub.basis();
            let obj = TraceObjective { matrix: b.transpose() * sym * b, sign: s };
            let phi = pullback(&cal.form, b)?;
            level_extremum(&obj, cal, &phi, Some(sub), opts, s)
        }
    }
}

fn check_sub(sub: &Subspace, cal: &Calibration) -> Result<()> {
    if sub.ambient() != cal.form.n() {
        return Err(shape_err!("subspace of R^{} for a calibration on R^{}", sub.ambient(), cal.form.n()));
    }
    Ok(())
}

/// Starting planes on `G(φ_S)` (in subspace coordinates).
fn feasible_starts(
    cal: &Calibration,
    phi: &Form,
    restricted: bool,
    opts: &OptOptions,
) -> Result<Vec<DMatrix<f64>>> {
    let m = phi.n();
    let p = phi.p();
    let floor = 1.0 - cal.tol_plane;
    if m < p {
        return Err(Error::Infeasible);
    }
    if m == p {
        let id = DMatrix::<f64>::identity(m, m);
        let mut rev = id.clone();
        rev[(0, 0)] = -1.0;
        let out: Vec<_> = [id, rev].into_iter().filter(|f| phi.eval(f).unwrap_or(0.0) >= floor).collect();
        return if out.is_empty() { Err(Error::Infeasible) } else { Ok(out) };
    }
    let mut out = Vec::new();
    if !restricted && cal.sampler.is_some() {
        let closed_form = !matches!(cal.sampler, Some(crate::catalog::Sampler::Polish));
        let draws = if closed_form { SCREEN * opts.restarts } else { opts.restarts };
        for r in 0..draws as u64 {
            if let Some(pl) = cal.draw_plane(opts.seed.wrapping_add(r), opts)? {
                out.push(pl.frame().clone());
            }
        }
    } else {
        let obj = FormObjective::new(phi.clone());
        for r in 0..opts.restarts as u64 {
            let start = random_plane(m, p, opts.seed.wrapping_add(r))?;
            let a = ascend(&obj, start.frame(), opts.tol_stationary, opts.max_iter);
            if a.value >= floor {
                out.push(a.frame);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::Infeasible);
    }
    Ok(out)
}

fn screen(starts: Vec<DMatrix<f64>>, obj: &dyn Objective, keep: usize) -> Vec<DMatrix<f64>> {
    if starts.len() <= keep {
        return starts;
    }
    let mut order: Vec<(f64, usize)> = starts.iter().enumerate().map(|(i, f)| (obj.value(f), i)).collect();
    order.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(core::cmp::Ordering::Equal).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = order.iter().take(keep.div_ceil(2)).map(|&(_, i)| i).collect();
    for i in 0..starts.len() {
        if chosen.len() >= keep {
            break;
        }
        if !chosen.contains(&i) {
            chosen.push(i);
        }
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| starts[i].clone()).collect()
}

fn level_extremum(
    obj: &dyn Objective,
    cal: &Calibration,
    phi: &Form,
    sub: Option<&Subspace>,
    opts: &OptOptions,
    sign: f64,
) -> Result<OptReport> {
    let starts = screen(feasible_starts(cal, phi, sub.is_some(), opts)?, obj, opts.restarts);
    let phi_obj = FormObjective::new(phi.clone());
    let floor = 1.0 - cal.tol_plane;
    let mut cands = Vec::with_capacity(starts.len());
    for f0 in starts {
        let (f, value, gn, converged) = if f0.ncols() == f0.nrows() {
            (f0.clone(), obj.value(&f0), 0.0, true)
        } else {
            let mut f = f0.clone();
            for mu in PENALTIES {
                let pen = Penalized { obj, phi: &phi_obj, mu };
                f = ascend(&pen, &f, opts.tol_stationary, PENALTY_ITERS).frame;
            }
            let (fp, vp) = polish_on_level(phi, &f);
            let f = if vp >= floor { fp } else { f0.clone() };
            refine(obj, &phi_obj, &f, opts, floor)
        };
        let frame = match sub {
            Some(s) => s.basis() * &f,
            None => f,
        };
        cands.push(Candidate { plane: OrientedPlane::from_spanning(&frame)?, value, gradient_norm: gn, converged });
    }
    Ok(report(cands, opts, "penalty(mu=1e1..1e4)+reprojection+tangent-refinement", sign))
}

/// Ascent on `G(φ)`: Newton steps with the objective Hessian compressed to
/// the tangent space when it is negative definite there, projected gradient
/// steps otherwise, re-projecting onto `G(φ)` after every step.
fn refine(
    obj: &dyn Objective,
    phi: &FormObjective,
    start: &DMatrix<f64>,
    opts: &OptOptions,
    floor: f64,
) -> (DMatrix<f64>, f64, f64, bool) {
    let mut f = start.clone();
    let mut v = obj.value(&f);
    let mut t = 0.5;
    let mut normal = linalg::complement(&f);
    let (mut d, mut tang) = tangent_gradient(obj, phi, &f, &normal);
    for _ in 0..opts.max_iter {
        let gn = d.norm();
        if gn <= opts.tol_stationary {
            return (f, v, gn, true);
        }
        let slack = 1e-12 * (1.0 + v.abs());
        // (frame, value, normal, gradient, tangent basis) after a trial step
        let attempt = |dir: &DVector<f64>, tt: f64| {
            let trial = retract(&f, &normal, dir, tt);
            let (fp, vphi) = polish_on_level(&phi.form, &trial);
            if vphi < floor {
                return None;
            }
            let nn = linalg::complement(&fp);
            let (dn, tn) = tangent_gradient(obj, phi, &fp, &nn);
            Some((obj.value(&fp), fp, nn, dn, tn))
        };
        let mut accepted = None;
        if let Some(step) = newton_step(obj, &f, &normal, &d, &tang) {
            if let Some(r) = attempt(&step, 1.0) {
                if r.0 >= v - slack && r.3.norm() < gn {
                    accepted = Some(r);
                }
            }
        }
        if accepted.is_none() {
            let mut tt = (2.0 * t).min(1.0 / gn).max(1e-14);
            for _ in 0..50 {
                if let Some(r) = attempt(&d, tt) {
                    let armijo = r.0 >= v + 1e-4 * tt * gn * gn;
                    let settle = r.0 >= v - slack && r.3.norm() < gn && tt * gn < 1e-6;
                    if armijo || settle {
                        t = tt;
                        accepted = Some(r);
                        break;
                    }
                }
                tt *= 0.5;
            }
        }
        match accepted {
            Some((vn, fp, nn, dn, tn)) => {
                v = vn;
                f = fp;
                normal = nn;
                d = dn;
                tang = tn;
            }
            None => break,
        }
    }
    let gn = d.norm();
    (f, v, gn, gn <= opts.tol_stationary)
}

/// `−V (VᵀHV)⁻¹ Vᵀg` when `VᵀHV` is negative definite, capped at norm 0.5.
fn newton_step(
    obj: &dyn Objective,
    f: &DMatrix<f64>,
    normal: &DMatrix<f64>,
    g: &DVector<f64>,
    tang: &DMatrix<f64>,
) -> Option<DVector<f64>> {
    if tang.ncols() == 0 {
        return None;
    }
    let h = obj.cousin_hessian(f, normal)?;
    let ht = tang.transpose() * h * tang;
    let (vals, vecs) = linalg::sym_eigen(&ht);
    let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || vals.iter().any(|&l| l > -1e-8 * scale) {
        return None;
    }
    let gt = tang.transpose() * g;
    let mut x = DVector::zeros(gt.len());
    for (k, lam) in vals.iter().enumerate() {
        let c = vecs.column(k);
        x -= c * (c.dot(&gt) / lam);
    }
    let step = tang * x;
    let sn = step.norm();
    Some(if sn > 0.5 { step * (0.5 / sn) } else { step })
}

/// Cousin gradient of `obj` projected onto the null space of the Hessian of
/// `φ|_G` (the tangent space of `G(φ)`), with an orthonormal basis of that
/// null space.
fn tangent_gradient(
    obj: &dyn Objective,
    phi: &FormObjective,
    f: &DMatrix<f64>,
    normal: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let g = cousin_gradient(obj, f, normal);
    let h = phi.cousin_hessian(f, normal).expect("forms carry Hessians");
    let (vals, vecs) = linalg::sym_eigen(&h);
    let scale = vals.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let cols: Vec<DVector<f64>> = vals
        .iter()
        .enumerate()
        .filter(|(_, lam)| lam.abs() <= 1e-5 * scale)
        .map(|(k, _)| vecs.column(k).into_owned())
        .collect();
    let tang = if cols.is_empty() { DMatrix::zeros(g.len(), 0) } else { DMatrix::from_columns(&cols) };
    let d = &tang * (tang.transpose() * &g);
    (d, tang)
}
