//! Boundary convexity of hypersurfaces, `−log δ` margins, stabilization of
//! defining functions, φ-free submanifolds, distance-squared jets, the
//! rotated-torus scan and quadratic hulls of finite sets.
//!
//! Domains are `{ρ < 0}` with outward normal `∇ρ/|∇ρ|`, so the round sphere
//! has `II = −(1/r) Id`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::catalog::Calibration;
use crate::error::{shape_err, Error, Result};
use crate::exterior::{lambda_phi, pullback};
use crate::grassmann::{comass, draw_planes, form_margin, trace_margin, OptOptions, OrientedPlane, Sense, Subspace};
use crate::linalg;
use crate::lp::{Cmp, Lp};
use crate::pshcheck::{from_sym_coords, sym_basis, trace_row, Jet2};

/// Dead-band on margins.
pub const MARGIN_TOL: f64 = 1e-6;
/// Required margin after stabilization.
pub const STABLE_EPS: f64 = 1e-6;
/// Agreement between the form route and the second fundamental form route.
pub const CROSS_TOL: f64 = 1e-6;
/// Optimal hull value below which the query counts as inside.
pub const HULL_TOL: f64 = 1e-7;

/// A defining function at a boundary point; the domain is `{ρ < 0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SurfaceJet {
    pub rho: Jet2,
}

impl SurfaceJet {
    pub fn new(rho: Jet2) -> Result<Self> {
        if !(rho.gradient.norm() >= 1e-8) {
            return Err(Error::Degenerate(format!("defining gradient norm {:.3e}", rho.gradient.norm())));
        }
        Ok(Self { rho })
    }

    pub fn n(&self) -> usize {
        self.rho.n()
    }

    pub fn gradient_norm(&self) -> f64 {
        self.rho.gradient.norm()
    }

    pub fn unit_normal(&self) -> DVector<f64> {
        &self.rho.gradient / self.gradient_norm()
    }

    /// `ker dρ`.
    pub fn tangent_space(&self) -> Result<Subspace> {
        Subspace::hyperplane(self.rho.gradient.as_slice())
    }
}

/// `II = −Hess ρ|_{ker dρ} / |∇ρ|` in the basis of [`SurfaceJet::tangent_space`].
pub fn second_fundamental(s: &SurfaceJet) -> Result<(Subspace, DMatrix<f64>)> {
    let t = s.tangent_space()?;
    let b = t.basis();
    let ii = -(b.transpose() * &s.rho.hessian * b) / s.gradient_norm();
    Ok((t, ii))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvexityClass {
    StrictlyConvex,
    Convex,
    Flat,
    NotConvex,
    /// No calibrated plane is tangent to the boundary.
    Vacuous,
    /// The two routes disagree or an optimizer did not converge.
    Indeterminate,
}

impl ConvexityClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvexityClass::StrictlyConvex => "strictly_convex",
            ConvexityClass::Convex => "convex",
            ConvexityClass::Flat => "flat",
            ConvexityClass::NotConvex => "not_convex",
            ConvexityClass::Vacuous => "vacuous",
            ConvexityClass::Indeterminate => "indeterminate",
        }
    }

    /// Convex in the weak sense (vacuous included).
    pub fn is_convex(&self) -> bool {
        matches!(
            self,
            ConvexityClass::StrictlyConvex | ConvexityClass::Convex | ConvexityClass::Flat | ConvexityClass::Vacuous
        )
    }

    /// Applies the dead-band rules to a pair of tangential margins.
    pub fn from_margins(lower: f64, upper: f64, tol: f64) -> Self {
        if lower.abs() <= tol && upper.abs() <= tol {
            ConvexityClass::Flat
        } else if lower > tol {
            ConvexityClass::StrictlyConvex
        } else if lower >= -tol {
            ConvexityClass::Convex
        } else {
            ConvexityClass::NotConvex
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryReport {
    /// `min dd^φρ(ξ)` over tangential calibrated planes (`+∞` when vacuous).
    pub tangential_margin: f64,
    /// `max dd^φρ(ξ)` over the same planes.
    pub upper_margin: f64,
    pub class: ConvexityClass,
    /// Second fundamental form in the tangent basis.
    pub second_fundamental: DMatrix<f64>,
    pub tangent_basis: DMatrix<f64>,
    pub witness_plane: Option<OrientedPlane>,
    /// `|margin + |∇ρ| max tr_ξ II|`.
    pub cross_check: f64,
    pub converged: bool,
}

/// Margins of `λ_φ(Hess ρ)` over calibrated planes tangent to the boundary.
pub fn boundary_margin(s: &SurfaceJet, cal: &Calibration, opts: &OptOptions) -> Result<BoundaryReport> {
    if s.n() != cal.n() {
        return Err(shape_err!("surface in R^{} for a calibration on R^{}", s.n(), cal.n()));
    }
    let (t, ii) = second_fundamental(s)?;
    let h = lambda_phi(&s.rho.hessian, &cal.form)?;
    let lo = match form_margin(&h, cal, Some(&t), Sense::Min, opts) {
        Ok(r) => r,
        Err(Error::Infeasible) => {
            return Ok(BoundaryReport {
                tangential_margin: f64::INFINITY,
                upper_margin: f64::NEG_INFINITY,
                class: ConvexityClass::Vacuous,
                second_fundamental: ii,
                tangent_basis: t.basis().clone(),
                witness_plane: None,
                cross_check: 0.0,
                converged: true,
            })
        }
        Err(e) => return Err(e),
    };
    let hi = form_margin(&h, cal, Some(&t), Sense::Max, opts)?;
    let b = t.basis();
    let ii_ambient = b * &ii * b.transpose();
    let curv = trace_margin(&ii_ambient, cal, Some(&t), Sense::Max, opts)?;
    let dual = -s.gradient_norm() * curv.value;
    let cross = (lo.value - dual).abs();
    let converged = lo.converged && hi.converged && curv.converged && cross <= CROSS_TOL;
    let lower = lo.value.min(dual);
    let class = if converged { ConvexityClass::from_margins(lower, hi.value, MARGIN_TOL) } else { ConvexityClass::Indeterminate };
    let witness = if lo.value <= dual { lo.argplanes.first() } else { curv.argplanes.first() };
    Ok(BoundaryReport {
        tangential_margin: lower,
        upper_margin: hi.value,
        class,
        second_fundamental: ii,
        tangent_basis: b.clone(),
        witness_plane: witness.cloned(),
        cross_check: cross,
        converged,
    })
}

/// `(1/δ) Hess ρ + (1/δ²) ∇ρ∇ρᵀ`, whose trace on a calibrated plane is
/// `(1/δ) dd^φρ(ξ) + (|∇ρ|²/δ²) cos²θ(ξ)`.
fn log_delta_matrix(s: &SurfaceJet, delta: f64) -> DMatrix<f64> {
    let g = &s.rho.gradient;
    &s.rho.hessian / delta + g * g.transpose() / (delta * delta)
}

/// Minimum over `G(φ)` of `(1/δ) dd^φρ(ξ) + (|∇ρ|²/δ²) cos²θ(ξ)`, where `θ`
/// is the angle between `∇ρ` and the plane.
pub fn log_delta_margin(s: &SurfaceJet, cal: &Calibration, delta: f64, opts: &OptOptions) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::Invalid(format!("distance must be positive, got {delta}")));
    }
    if s.n() != cal.n() {
        return Err(shape_err!("surface in R^{} for a calibration on R^{}", s.n(), cal.n()));
    }
    let m = log_delta_matrix(s, delta);
    let a = form_margin(&lambda_phi(&m, &cal.form)?, cal, None, Sense::Min, opts)?;
    let b = trace_margin(&m, cal, None, Sense::Min, opts)?;
    Ok(a.value.min(b.value))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stabilized {
    pub a: f64,
    pub margin_at_a: f64,
}

fn stabilized_margin(s: &SurfaceJet, cal: &Calibration, a: f64, opts: &OptOptions) -> Result<f64> {
    let g = &s.rho.gradient;
    let r = s.rho.value;
    let m = &s.rho.hessian * (1.0 + 2.0 * a * r) + g * g.transpose() * (2.0 * a);
    let x = form_margin(&lambda_phi(&m, &cal.form)?, cal, None, Sense::Min, opts)?;
    let y = trace_margin(&m, cal, None, Sense::Min, opts)?;
    Ok(x.value.min(y.value))
}

/// Smallest `A ≥ 0` (to relative resolution `1e-3`) for which `ρ + Aρ²` has
/// margin at least [`STABLE_EPS`] on all of `G(φ)` at the point.
pub fn stabilize_defining(s: &SurfaceJet, cal: &Calibration, opts: &OptOptions) -> Result<Stabilized> {
    let rep = boundary_margin(s, cal, opts)?;
    match rep.class {
        ConvexityClass::StrictlyConvex | ConvexityClass::Vacuous => {}
        _ => {
            return Err(Error::NotStrictlyConvex { margin: rep.tangential_margin, witness: rep.witness_plane });
        }
    }
    let m0 = stabilized_margin(s, cal, 0.0, opts)?;
    if m0 >= STABLE_EPS {
        return Ok(Stabilized { a: 0.0, margin_at_a: m0 });
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut m_hi = stabilized_margin(s, cal, hi, opts)?;
    while m_hi < STABLE_EPS {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::NotFound("no finite stabilizing constant below 1e12".into()));
        }
        m_hi = stabilized_margin(s, cal, hi, opts)?;
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        let m = stabilized_margin(s, cal, mid, opts)?;
        if m >= STABLE_EPS {
            hi = mid;
            m_hi = m;
        } else {
            lo = mid;
        }
    }
    Ok(Stabilized { a: hi, margin_at_a: m_hi })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FreeReport {
    pub free: bool,
    /// `max φ` over oriented `p`-planes in the subspace (0 when too small).
    pub sup_phi: f64,
    pub isotropic: bool,
    /// `min ⟨P_N, P_ξ⟩` over `G(φ)`, `N` the orthogonal complement.
    pub normal_margin: f64,
    /// Whether `free` agrees with `normal_margin > MARGIN_TOL`.
    pub consistent: bool,
}

/// Whether no calibrated plane lies in the subspace spanned by the columns
/// of `t`.
pub fn free_test(t: &DMatrix<f64>, cal: &Calibration, opts: &OptOptions) -> Result<FreeReport> {
    let n = cal.n();
    if t.nrows() != n {
        return Err(shape_err!("{} x {} tangent basis for a calibration on R^{n}", t.nrows(), t.ncols()));
    }
    let sub = if t.ncols() == 0 { None } else { Some(Subspace::spanned_by(t)) };
    let dim = sub.as_ref().map_or(0, |s| s.dim());
    let sup_phi = match &sub {
        Some(s) if dim >= cal.p() => comass(&pullback(&cal.form, s.basis())?, opts)?.value.max(0.0),
        _ => 0.0,
    };
    let free = sup_phi <= 1.0 - cal.tol_plane;
    let p_t = sub.as_ref().map_or_else(|| DMatrix::zeros(n, n), |s| s.projection());
    let p_n = DMatrix::identity(n, n) - p_t;
    let normal_margin = trace_margin(&p_n, cal, None, Sense::Min, opts)?.value;
    Ok(FreeReport {
        free,
        sup_phi,
        isotropic: sup_phi <= cal.tol_plane,
        normal_margin,
        consistent: free == (normal_margin > MARGIN_TOL),
    })
}

/// Submanifolds with a computable distance function.
#[derive(Clone, Debug, PartialEq)]
pub enum Surface {
    /// `point + span(columns of basis)`.
    Affine { point: DVector<f64>, basis: DMatrix<f64> },
    /// Round sphere of radius `radius` about `center`.
    Sphere { center: DVector<f64>, radius: f64 },
    /// The disk `y² + (z − R)² = r²` rotated about the `y`-axis in R³.
    Torus { big: f64, small: f64 },
    /// Hypersurface `x_n = ½uᵀQu + bᵀu + c` over `u = (x_1, …, x_{n−1})`.
    Graph { q: DMatrix<f64>, b: DVector<f64>, c: f64 },
}

impl Surface {
    pub fn ambient(&self) -> usize {
        match self {
            Surface::Affine { point, .. } => point.len(),
            Surface::Sphere { center, .. } => center.len(),
            Surface::Torus { .. } => 3,
            Surface::Graph { q, .. } => q.nrows() + 1,
        }
    }

    /// Tangent space at a point of the surface (columns orthonormal).
    pub fn tangent_at(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let jet = dist_sq_jet(self, x)?;
        let (vals, vecs) = linalg::sym_eigen(&jet.hessian);
        let cols: Vec<_> = vals.iter().enumerate().filter(|(_, v)| v.abs() < 0.5).map(|(i, _)| vecs.column(i).into_owned()).collect();
        if cols.is_empty() {
            return Ok(DMatrix::zeros(x.len(), 0));
        }
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Distance to the core circle of the torus and its derivatives.
fn core_distance(big: f64, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    let (px, py, pz) = (x[0], x[1], x[2]);
    let s = px.hypot(pz);
    if s < 1e-12 {
        return Err(Error::Degenerate("point on the rotation axis".into()));
    }
    let a = s - big;
    let g = a.hypot(py);
    if g < 1e-12 {
        return Err(Error::Degenerate("point on the core circle".into()));
    }
    let ds = DVector::from_column_slice(&[px / s, 0.0, pz / s]);
    let mut hs = DMatrix::zeros(3, 3);
    hs[(0, 0)] = 1.0;
    hs[(2, 2)] = 1.0;
    hs -= &ds * ds.transpose();
    hs /= s;
    let ey = DVector::from_column_slice(&[0.0, 1.0, 0.0]);
    let dg = (&ds * a + &ey * py) / g;
    let mut hg = &ds * ds.transpose() + hs * a + &ey * ey.transpose() - &dg * dg.transpose();
    hg /= g;
    Ok((g, dg, hg))
}

fn graph_height(q: &DMatrix<f64>, b: &DVector<f64>, c: f64, u: &DVector<f64>) -> (f64, DVector<f64>) {
    let qu = q * u;
    (0.5 * u.dot(&qu) + b.dot(u) + c, qu + b)
}

/// Nearest point on the graph by damped Newton on the squared distance.
fn graph_projection(q: &DMatrix<f64>, b: &DVector<f64>, c: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    let k = q.nrows();
    let xu = x.rows(0, k).into_owned();
    let xn = x[k];
    let mut u = xu.clone();
    let energy = |u: &DVector<f64>| {
        let (h, _) = graph_height(q, b, c, u);
        0.5 * ((u - &xu).norm_squared() + (h - xn) * (h - xn))
    };
    for _ in 0..200 {
        let (h, dh) = graph_height(q, b, c, &u);
        let grad = &u - &xu + &dh * (h - xn);
        if grad.norm() <= 1e-15 * (1.0 + x.norm()) {
            break;
        }
        let hess = DMatrix::identity(k, k) + &dh * dh.transpose() + q * (h - xn);
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => grad.clone(),
        };
        let e0 = energy(&u);
        let mut t = 1.0;
        loop {
            let cand = &u - &step * t;
            if energy(&cand) <= e0 || t < 1e-12 {
                u = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let (h, dh) = graph_height(q, b, c, &u);
    let hess = DMatrix::identity(k, k) + &dh * dh.transpose() + q * (h - xn);
    if linalg::min_eigenvalue(&hess) <= 1e-8 {
        return Err(Error::Invalid("point outside the tubular neighbourhood of the graph".into()));
    }
    let mut out = DVector::zeros(k + 1);
    out.rows_mut(0, k).copy_from(&u);
    out[k] = h;
    Ok(out)
}

/// Jet of `½ dist(·, M)²` at `x`: closed form for affine subspaces, spheres
/// and tori; central differences of the exact gradient `x − π(x)` for
/// graphs.
pub fn dist_sq_jet(surface: &Surface, x: &DVector<f64>) -> Result<Jet2> {
    let n = surface.ambient();
    if x.len() != n {
        return Err(shape_err!("point in R^{} for a surface in R^{n}", x.len()));
    }
    match surface {
        Surface::Affine { point, basis } => {
            if basis.nrows() != n {
                return Err(shape_err!("{} x {} affine basis in R^{n}", basis.nrows(), basis.ncols()));
            }
            let p_t = if basis.ncols() == 0 {
                DMatrix::zeros(n, n)
            } else {
                Subspace::spanned_by(basis).projection()
            };
            let p_n = DMatrix::identity(n, n) - p_t;
            let g = &p_n * (x - point);
            Jet2::new(0.5 * g.norm_squared(), g, p_n)
        }
        Surface::Sphere { center, radius } => {
            if !(*radius > 0.0) {
                return Err(Error::Invalid(format!("sphere radius must be positive, got {radius}")));
            }
            let d = x - center;
            let s = d.norm();
            if !((s - radius).abs() < *radius) {
                return Err(Error::Invalid("point outside the tubular neighbourhood of the sphere".into()));
            }
            let u = &d / s;
            let uu = &u * u.transpose();
            let h = &uu + (DMatrix::identity(n, n) - &uu) * ((s - radius) / s);
            Jet2::new(0.5 * (s - radius).powi(2), u * (s - radius), h)
        }
        Surface::Torus { big, small } => {
            if !(*small > 0.0 && small < big) {
                return Err(Error::Invalid(format!("torus needs 0 < r < R, got R = {big}, r = {small}")));
            }
            let (g, dg, hg) = core_distance(*big, x)?;
            if !((g - small).abs() < small.min(big - small)) {
                return Err(Error::Invalid("point outside the tubular neighbourhood of the torus".into()));
            }
            let e = g - small;
            Jet2::new(0.5 * e * e, &dg * e, &dg * dg.transpose() + hg * e)
        }
        Surface::Graph { q, b, c } => {
            if q.ncols() != q.nrows() || b.len() != q.nrows() {
                return Err(shape_err!("graph data {} x {} with {} linear terms", q.nrows(), q.ncols(), b.len()));
            }
            let grad = |y: &DVector<f64>| graph_projection(q, b, *c, y).map(|p| y - p);
            let g0 = grad(x)?;
            let h = 1e-5;
            let mut hess = DMatrix::zeros(n, n);
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let col = (grad(&xp)? - grad(&xm)?) / (2.0 * h);
                hess.set_column(i, &col);
            }
            let hess = (&hess + hess.transpose()) * 0.5;
            Jet2::new(0.5 * g0.norm_squared(), g0, hess)
        }
    }
}

/// One sample of the torus scan.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub u: f64,
    pub v: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vacuous: bool,
    pub margin: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorusScan {
    pub min_margin: f64,
    pub convex: bool,
    /// Sample attaining the minimum.
    pub witness: Option<ScanPoint>,
    pub points: Vec<ScanPoint>,
}

/// Point of the rotated torus at parameters `(u, v)`: `u` rotates about the
/// `y`-axis, `v` runs around the tube.
pub fn torus_point(big: f64, small: f64, u: f64, v: f64) -> DVector<f64> {
    let s = big + small * v.cos();
    DVector::from_column_slice(&[s * u.sin(), small * v.sin(), s * u.cos()])
}

/// Boundary margins of the solid torus for `φ = dx∧dy` on an even
/// `resolution × resolution` parameter grid, with `ρ = dist(·, core) − r`.
/// The grid contains `u, v ∈ {0, π}`, where the tangent planes are
/// horizontal.
pub fn torus_scan(big: f64, small: f64, resolution: usize, cal: &Calibration, opts: &OptOptions) -> Result<TorusScan> {
    if !(small > 0.0 && small < big) {
        return Err(Error::Invalid(format!("torus needs 0 < r < R, got R = {big}, r = {small}")));
    }
    if resolution < 2 || resolution % 2 != 0 {
        return Err(Error::Invalid(format!("resolution must be even and at least 2, got {resolution}")));
    }
    if cal.n() != 3 {
        return Err(shape_err!("torus scan in R^3 with a calibration on R^{}", cal.n()));
    }
    let step = 2.0 * core::f64::consts::PI / resolution as f64;
    let mut points = Vec::with_capacity(resolution * resolution);
    let mut best: Option<usize> = None;
    for i in 0..resolution {
        for j in 0..resolution {
            let (u, v) = (step * i as f64, step * j as f64);
            let x = torus_point(big, small, u, v);
            let (g, dg, hg) = core_distance(big, &x)?;
            let jet = SurfaceJet::new(Jet2::new(g - small, dg, hg)?)?;
            let rep = boundary_margin(&jet, cal, opts)?;
            let vacuous = rep.class == ConvexityClass::Vacuous;
            points.push(ScanPoint { u, v, x: x[0], y: x[1], z: x[2], vacuous, margin: rep.tangential_margin });
            if !vacuous && best.map_or(true, |b| rep.tangential_margin < points[b].margin) {
                best = Some(points.len() - 1);
            }
        }
    }
    let witness = best.map(|b| points[b].clone());
    let min_margin = witness.as_ref().map_or(f64::INFINITY, |w| w.margin);
    Ok(TorusScan { min_margin, convex: min_margin >= -MARGIN_TOL, witness, points })
}

/// Finite set `K`, a query point and a calibration.
#[derive(Clone, Debug, PartialEq)]
pub struct HullProblem {
    pub points: Vec<DVector<f64>>,
    pub query: DVector<f64>,
    pub cal: Calibration,
}

/// `f(x) = ½xᵀQx + bᵀx + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct Separator {
    pub q: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: f64,
}

impl Separator {
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.b.dot(x) + self.c
    }
}

/// Membership in the hull of `K` taken with respect to quadratic φ-psh
/// functions. This hull contains the hull for all φ-psh functions.
#[derive(Clone, Debug, PartialEq)]
pub struct HullReport {
    pub inside: bool,
    /// The cutting-plane budget ran out before the cone constraint held.
    pub undecided: bool,
    /// Optimal `f(x₀)` under `f ≤ 0` on `K` and unit box bounds.
    pub value: f64,
    pub separator: Option<Separator>,
    /// Verified `min tr_ξ Q` over `G(φ)` for the returned separator.
    pub psh_margin: Option<f64>,
    pub cuts: usize,
}

/// Maximizes `f(x₀)` over quadratic φ-psh `f` with `f ≤ 0` on `K`, every
/// coordinate of `Q` (in the orthonormal symmetric basis) and of `b` in
/// `[−1, 1]`; the cone `tr_ξ Q ≥ 0` is imposed by cutting planes found with
/// the margin optimizer.
pub fn quad_hull_membership(hp: &HullProblem, opts: &OptOptions) -> Result<HullReport> {
    let n = hp.cal.n();
    if hp.points.is_empty() {
        return Err(Error::Invalid("hull of an empty set".into()));
    }
    for k in hp.points.iter().chain(core::iter::once(&hp.query)) {
        if k.len() != n {
            return Err(shape_err!("point in R^{} for a calibration on R^{n}", k.len()));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite point".into()));
        }
    }
    let basis = sym_basis(n);
    let ds = basis.len();
    let nv = ds + n + 1;
    let row_at = |x: &DVector<f64>| -> Vec<f64> {
        let xx = x * x.transpose() * 0.5;
        let mut r = trace_row(&xx, &basis);
        r.extend(x.iter().copied());
        r.push(1.0);
        r
    };
    let cmax = 1.0
        + hp.points.iter().map(|k| 0.5 * k.norm_squared() * (ds as f64).sqrt() + (n as f64).sqrt() * k.norm()).fold(0.0, f64::max);
    let mut bounds = vec![(-1.0, 1.0); ds + n];
    bounds.push((-cmax, cmax));
    let mut planes: Vec<DMatrix<f64>> = draw_planes(&hp.cal, 2 * ds, opts)?.iter().map(|x| x.projection()).collect();
    let solve = |planes: &[DMatrix<f64>]| -> Result<(f64, Separator)> {
        let mut lp = Lp::new(row_at(&hp.query), bounds.clone())?;
        for k in &hp.points {
            lp.constrain(row_at(k), Cmp::Le, 0.0)?;
        }
        for pr in planes {
            let mut r = trace_row(pr, &basis);
            r.resize(nv, 0.0);
            lp.constrain(r, Cmp::Ge, 0.0)?;
        }
        let sol = lp.maximize()?;
        let q = from_sym_coords(&sol.x[..ds], &basis);
        let b = DVector::from_column_slice(&sol.x[ds..ds + n]);
        Ok((sol.value, Separator { q, b, c: sol.x[nv - 1] }))
    };
    let mut cuts = 0;
    for _ in 0..100 {
        let (value, sep) = solve(&planes)?;
        if value <= HULL_TOL {
            return Ok(HullReport { inside: true, undecided: false, value, separator: None, psh_margin: None, cuts });
        }
        let m = trace_margin(&sep.q, &hp.cal, None, Sense::Min, opts)?;
        if m.value >= -1e-9 {
            let form = form_margin(&lambda_phi(&sep.q, &hp.cal.form)?, &hp.cal, None, Sense::Min, opts)?;
            let margin = m.value.min(form.value);
            let verified = margin >= -1e-8
                && hp.points.iter().all(|k| sep.eval(k) <= 1e-9)
                && sep.eval(&hp.query) > HULL_TOL;
            return Ok(HullReport {
                inside: false,
                undecided: !verified,
                value,
                separator: Some(sep),
                psh_margin: Some(margin),
                cuts,
            });
        }
        for xi in &m.argplanes {
            planes.push(xi.projection());
            cuts += 1;
        }
    }
    let (value, _) = solve(&planes)?;
    Ok(HullReport { inside: value <= HULL_TOL, undecided: value > HULL_TOL, value, separator: None, psh_margin: None, cuts })
}

#[cfg(test)]
mod tests;
