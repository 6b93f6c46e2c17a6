//! Pointwise φ-plurisubharmonicity of second-order jets.
//!
//! A jet is psh when `tr_ξ Hess f ≥ 0` on every calibrated plane. Margins
//! are computed twice, once through the form `λ_φ(Hess f)` and once through
//! the projections `P_ξ`, and the two must agree.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::catalog::Calibration;
use crate::error::{shape_err, Error, Result};
use crate::exterior::{interior, lambda_phi, pullback, sym_part, wedge, Form};
use crate::grassmann::{self, draw_planes, form_margin, trace_margin, OptOptions, OrientedPlane, Sense, Subspace};
use crate::linalg;
use crate::lp::{Cmp, Lp};
use crate::rng;

/// Margins within this band of zero count as zero.
pub const CLASS_TOL: f64 = 1e-6;
/// The two margin computations must agree this closely.
pub const CROSS_TOL: f64 = 1e-6;

/// Value, gradient and Hessian of a function at a point, in an orthonormal
/// frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl Jet2 {
    /// Checks shapes, finiteness and symmetry (within 1e−12, relative).
    pub fn new(value: f64, gradient: DVector<f64>, hessian: DMatrix<f64>) -> Result<Self> {
        let n = gradient.len();
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(shape_err!("gradient of length {n} with a {}x{} Hessian", hessian.nrows(), hessian.ncols()));
        }
        if !value.is_finite() || gradient.iter().chain(hessian.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Invalid("jet entries must be finite".into()));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if asym > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::Invalid(format!("Hessian is not symmetric (defect {asym:e})")));
        }
        Ok(Self { value, gradient, hessian })
    }

    /// Jet at `x` of `½xᵀQx + bᵀx + c`.
    pub fn quadratic(q: &DMatrix<f64>, b: &DVector<f64>, c: f64, x: &DVector<f64>) -> Result<Self> {
        let q = sym_part(q);
        let v = 0.5 * x.dot(&(&q * x)) + b.dot(x) + c;
        Self::new(v, &q * x + b, q)
    }

    pub fn n(&self) -> usize {
        self.gradient.len()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { value: s * self.value, gradient: &self.gradient * s, hessian: &self.hessian * s }
    }

    /// Jet of `a·f + b·g`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        if other.n() != self.n() {
            return Err(shape_err!("jets on R^{} and R^{}", self.n(), other.n()));
        }
        Ok(Self {
            value: a * self.value + b * other.value,
            gradient: &self.gradient * a + &other.gradient * b,
            hessian: &self.hessian * a + &other.hessian * b,
        })
    }
}

/// `(ψ, ψ′, ψ″)` of a function of one variable at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalarJet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PshClass {
    StrictlyPsh,
    Psh,
    Pluriharmonic,
    NotPsh,
    Indeterminate,
}

impl PshClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PshClass::StrictlyPsh => "strictly_psh",
            PshClass::Psh => "psh",
            PshClass::Pluriharmonic => "pluriharmonic",
            PshClass::NotPsh => "not_psh",
            PshClass::Indeterminate => "indeterminate",
        }
    }

    /// Strict, plain and pluriharmonic are all psh.
    pub fn is_psh(&self) -> bool {
        matches!(self, PshClass::StrictlyPsh | PshClass::Psh | PshClass::Pluriharmonic)
    }

    /// Applies the dead-band rules to a pair of margins.
    pub fn from_margins(lower: f64, upper: f64, tol: f64) -> Self {
        if lower.abs().max(upper.abs()) <= tol {
            PshClass::Pluriharmonic
        } else if lower > tol {
            PshClass::StrictlyPsh
        } else if lower >= -tol {
            PshClass::Psh
        } else {
            PshClass::NotPsh
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PshReport {
    /// `min tr_ξ Hess` over `G(φ)`.
    pub lower_margin: f64,
    /// `max tr_ξ Hess` over `G(φ)`.
    pub upper_margin: f64,
    pub class: PshClass,
    /// A plane attaining the lower margin.
    pub witness_plane: Option<OrientedPlane>,
    pub tolerance: f64,
    /// `|lower via λ_φ − lower via P_ξ|`.
    pub cross_check: f64,
    pub converged: bool,
    pub seed: u64,
}

/// `d^φ f = ∇f ⌐ φ` at the point.
pub fn d_phi_point(jet: &Jet2, cal: &Calibration) -> Result<Form> {
    check_dim(jet, cal)?;
    interior(jet.gradient.as_slice(), &cal.form)
}

/// `λ_φ(Hess f)`, plus the caller's correction `∇_{∇f}φ` when φ is not
/// parallel.
pub fn phi_hessian_point(jet: &Jet2, cal: &Calibration, correction: Option<&Form>) -> Result<Form> {
    check_dim(jet, cal)?;
    let h = lambda_phi(&jet.hessian, &cal.form)?;
    match correction {
        None => Ok(h),
        Some(c) => {
            c.same_shape(&h)?;
            Ok(&h + c)
        }
    }
}

/// `Δ_φ f = ⟨dd^φ f, φ⟩`.
pub fn phi_laplacian(jet: &Jet2, cal: &Calibration) -> Result<f64> {
    Ok(phi_hessian_point(jet, cal, None)?.dot(&cal.form))
}

/// `df ∧ d^φ f`, which pairs with `ξ ∈ G(φ)` to `|∇f ⌐ ξ|²`.
pub fn gradient_square(jet: &Jet2, cal: &Calibration) -> Result<Form> {
    let df = Form::from_covector(jet.gradient.as_slice())?;
    wedge(&df, &d_phi_point(jet, cal)?)
}

fn check_dim(jet: &Jet2, cal: &Calibration) -> Result<()> {
    if jet.n() != cal.n() {
        return Err(shape_err!("jet on R^{} for a calibration on R^{}", jet.n(), cal.n()));
    }
    Ok(())
}

/// Classifies a jet by its margins over `G(φ)`.
pub fn psh_classify(jet: &Jet2, cal: &Calibration, opts: &OptOptions) -> Result<PshReport> {
    classify_on(jet, cal, None, opts)
}

/// The same, over calibrated planes inside a subspace.
pub(crate) fn classify_on(
    jet: &Jet2,
    cal: &Calibration,
    sub: Option<&Subspace>,
    opts: &OptOptions,
) -> Result<PshReport> {
    let h = phi_hessian_point(jet, cal, None)?;
    let lo = form_margin(&h, cal, sub, Sense::Min, opts)?;
    let hi = form_margin(&h, cal, sub, Sense::Max, opts)?;
    let dual = trace_margin(&jet.hessian, cal, sub, Sense::Min, opts)?;
    let lower = lo.value.min(dual.value);
    let cross = (lo.value - dual.value).abs();
    let converged = lo.converged && hi.converged && dual.converged && cross <= CROSS_TOL;
    let class = if converged { PshClass::from_margins(lower, hi.value, CLASS_TOL) } else { PshClass::Indeterminate };
    let witness = if lo.value <= dual.value { lo.argplanes.first() } else { dual.argplanes.first() };
    Ok(PshReport {
        lower_margin: lower,
        upper_margin: hi.value,
        class,
        witness_plane: witness.cloned(),
        tolerance: CLASS_TOL,
        cross_check: cross,
        converged,
        seed: opts.seed,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ellipticity {
    /// `min |ζ⌐φ|` over unit `ζ`.
    pub min_symbol_norm: f64,
    pub dd_elliptic: bool,
    /// `min` over unit `u` of the root-mean-square of `|P_ξ u|` across the
    /// sampled calibrated planes.
    pub reduced_margin: f64,
    pub reduced_elliptic: bool,
    pub planes_used: usize,
}

/// Ellipticity of `dd^φ` (the symbol `ζ ↦ ζ∧(ζ⌐φ)`) and of the reduced
/// operator (whether `G(φ)` involves all variables).
pub fn ellipticity_report(cal: &Calibration, opts: &OptOptions) -> Result<Ellipticity> {
    let n = cal.n();
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            interior(&e, &cal.form).map(|f| f.to_dvector())
        })
        .collect::<Result<_>>()?;
    let m = DMatrix::from_columns(&cols);
    let gram = m.transpose() * &m;
    let min_symbol_norm = linalg::min_eigenvalue(&gram).max(0.0).sqrt();
    let planes = grassmann::distinct_planes(cal, opts)?;
    let mut avg = DMatrix::zeros(n, n);
    for xi in &planes {
        avg += xi.projection();
    }
    avg /= planes.len() as f64;
    let reduced_margin = linalg::min_eigenvalue(&avg).max(0.0).sqrt();
    Ok(Ellipticity {
        min_symbol_norm,
        dd_elliptic: min_symbol_norm > 1e-8,
        reduced_margin,
        reduced_elliptic: reduced_margin > 1e-6,
        planes_used: planes.len(),
    })
}

/// Jet of `ψ∘f`.
pub fn jet_compose(outer: ScalarJet, f: &Jet2) -> Result<Jet2> {
    let g = &f.gradient;
    Jet2::new(outer.value, g * outer.d1, &f.hessian * outer.d1 + g * g.transpose() * outer.d2)
}

/// Jet of `log(e^f + e^g)`, shifted by the larger value to avoid overflow.
pub fn log_sum_exp(f: &Jet2, g: &Jet2) -> Result<Jet2> {
    if f.n() != g.n() {
        return Err(shape_err!("jets on R^{} and R^{}", f.n(), g.n()));
    }
    let m = f.value.max(g.value);
    let ef = (f.value - m).exp();
    let eg = (g.value - m).exp();
    let s = ef + eg;
    let (a, b) = (ef / s, eg / s);
    let d = &f.gradient - &g.gradient;
    Jet2::new(
        m + s.ln(),
        &f.gradient * a + &g.gradient * b,
        &f.hessian * a + &g.hessian * b + &d * d.transpose() * (a * b),
    )
}

/// Jet of `h_k = (1/k) log(e^{kf} + e^{kg})`.
pub fn smooth_max(f: &Jet2, g: &Jet2, k: f64) -> Result<Jet2> {
    if !(k > 0.0) {
        return Err(Error::Invalid("smoothing parameter must be positive".into()));
    }
    Ok(log_sum_exp(&f.scale(k), &g.scale(k))?.scale(1.0 / k))
}

/// Orthonormal basis of symmetric matrices (Frobenius inner product):
/// `E_ii`, then `(E_ij + E_ji)/√2` for `i < j`.
pub fn sym_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let mut e = DMatrix::zeros(n, n);
        e[(i, i)] = 1.0;
        out.push(e);
    }
    let r = core::f64::consts::FRAC_1_SQRT_2;
    for i in 0..n {
        for j in i + 1..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = r;
            e[(j, i)] = r;
            out.push(e);
        }
    }
    out
}

/// Coordinates of the linear functional `Q ↦ tr_ξ Q` in [`sym_basis`].
pub(crate) fn trace_row(p: &DMatrix<f64>, basis: &[DMatrix<f64>]) -> Vec<f64> {
    basis.iter().map(|b| b.component_mul(p).sum()).collect()
}

pub(crate) fn from_sym_coords(x: &[f64], basis: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = basis[0].nrows();
    let mut q = DMatrix::zeros(n, n);
    for (c, b) in x.iter().zip(basis) {
        q += b * *c;
    }
    q
}

/// A symmetric matrix with a negative eigenvalue whose trace is
/// nonnegative on every calibrated plane.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub matrix: DMatrix<f64>,
    pub min_eigenvalue: f64,
    /// Verified `min tr_ξ Q` over `G(φ)`.
    pub psh_margin: f64,
    pub cuts: usize,
}

/// Searches for a non-convex quadratic `½xᵀQx` that is φ-psh: a linear
/// program over sampled planes drives `vᵀQv` down for a trial direction `v`,
/// planes where the margin optimizer finds `tr_ξ Q < 0` are added as cuts,
/// and a final shift by a multiple of the identity absorbs what remains.
pub fn nonconvex_psh_witness(cal: &Calibration, opts: &OptOptions) -> Result<Witness> {
    let n = cal.n();
    let p = cal.p() as f64;
    let basis = sym_basis(n);
    let dim = basis.len();
    let mut planes: Vec<DMatrix<f64>> =
        draw_planes(cal, 2 * dim, opts)?.iter().map(|x| x.projection()).collect();
    let mut dirs: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut s = rng::stream(opts.seed ^ 0x5eed);
    for _ in 0..n {
        dirs.push(rng::unit_vector(&mut s, n));
    }
    let solve = |v: &DVector<f64>, planes: &[DMatrix<f64>]| -> Result<(f64, DMatrix<f64>)> {
        let vv = v * v.transpose();
        let c: Vec<f64> = trace_row(&vv, &basis).iter().map(|x| -x).collect();
        let mut lp = Lp::new(c, vec![(-1.0, 1.0); dim])?;
        for pr in planes {
            lp.constrain(trace_row(pr, &basis), Cmp::Ge, 0.0)?;
        }
        let sol = lp.maximize()?;
        Ok((sol.value, from_sym_coords(&sol.x, &basis)))
    };
    let mut ranked: Vec<(f64, usize)> = Vec::new();
    for (k, v) in dirs.iter().enumerate() {
        ranked.push((solve(v, &planes)?.0, k));
    }
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    let mut last = String::from("no trial direction");
    for &(score, k) in ranked.iter().take(4) {
        if score < 0.1 {
            break;
        }
        let v = &dirs[k];
        let mut cuts = 0;
        for _ in 0..30 {
            let (_, q) = solve(v, &planes)?;
            let m = trace_margin(&q, cal, None, Sense::Min, opts)?;
            if m.value >= -1e-9 {
                break;
            }
            for xi in &m.argplanes {
                planes.push(xi.projection());
                cuts += 1;
            }
        }
        let (_, mut q) = solve(v, &planes)?;
        let m = trace_margin(&q, cal, None, Sense::Min, opts)?;
        if m.value < 0.0 {
            q += DMatrix::identity(n, n) * (-m.value / p + 1e-9);
        }
        let margin = trace_margin(&q, cal, None, Sense::Min, opts)?.value;
        let lam = linalg::min_eigenvalue(&q);
        if lam <= -0.1 && margin >= -1e-8 {
            return Ok(Witness { matrix: q, min_eigenvalue: lam, psh_margin: margin, cuts });
        }
        last = format!("direction {k}: eigenvalue {lam}, margin {margin}");
    }
    Err(Error::NotFound(format!("no verified non-convex psh quadratic for {} ({last})", cal.name)))
}

/// Symmetric matrices whose trace vanishes on every calibrated plane.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticSpace {
    pub dimension: usize,
    /// Frobenius-orthonormal.
    pub basis: Vec<DMatrix<f64>>,
    /// Largest `|tr_ξ Q|` over a fresh batch of planes and basis elements.
    pub residual: f64,
    pub rank_gap: f64,
    /// Set when the singular-value gap is below 10.
    pub unstable: bool,
    pub samples: usize,
}

/// Numerical null space of `Q ↦ (tr_ξ Q)_ξ` over sampled calibrated planes.
pub fn pluriharmonic_quadratic_space(cal: &Calibration, samples: usize, opts: &OptOptions) -> Result<QuadraticSpace> {
    let n = cal.n();
    let basis = sym_basis(n);
    let dim = basis.len();
    if samples < 4 * dim {
        return Err(Error::Invalid(format!("{samples} samples for {dim} unknowns; need at least {}", 4 * dim)));
    }
    let planes = draw_planes(cal, samples, opts)?;
    let rows: Vec<Vec<f64>> = planes.iter().map(|x| trace_row(&x.projection(), &basis)).collect();
    let a = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let span = linalg::row_span(&a, 1e-8);
    let null: Vec<DMatrix<f64>> = span.null.column_iter().map(|c| from_sym_coords(c.as_slice(), &basis)).collect();
    let fresh_opts = opts.clone().with_seed(opts.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let fresh = draw_planes(cal, samples / 2, &fresh_opts)?;
    let mut residual: f64 = 0.0;
    for xi in &fresh {
        for q in &null {
            residual = residual.max(xi.trace_of(q).abs());
        }
    }
    Ok(QuadraticSpace {
        dimension: null.len(),
        basis: null,
        residual,
        rank_gap: span.rank_gap,
        unstable: span.rank_gap < 10.0,
        samples: planes.len(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Richness {
    pub found: bool,
    /// Best `φ(ℓ∧η)` over `(p−1)`-planes `η ⊂ P^⊥`.
    pub value: f64,
    pub xi0: Option<OrientedPlane>,
}

/// Looks for a `(p−1)`-plane `ξ₀ ⊥ P` with `ℓ∧ξ₀` calibrated, where `P` is
/// spanned by the two columns of `plane` and `ℓ ∈ P`.
pub fn richness_check(cal: &Calibration, plane: &DMatrix<f64>, ell: &[f64], opts: &OptOptions) -> Result<Richness> {
    let n = cal.n();
    let p = cal.p();
    if plane.nrows() != n || plane.ncols() != 2 || ell.len() != n {
        return Err(shape_err!("richness needs an {n}x2 plane and a line in R^{n}"));
    }
    if n < p + 1 || p == 0 {
        return Err(Error::Invalid(format!("richness needs 1 ≤ p and p + 1 ≤ n (p = {p}, n = {n})")));
    }
    let pf = linalg::orthonormalize(plane);
    let l = DVector::from_column_slice(ell);
    let ln = l.norm();
    if ln == 0.0 {
        return Err(Error::Degenerate("zero line direction".into()));
    }
    let l = l / ln;
    let off = (&l - &pf * (pf.transpose() * &l)).norm();
    if off > 1e-8 {
        return Err(Error::Invalid(format!("line is not in the plane (distance {off:e})")));
    }
    let phi_l = interior(l.as_slice(), &cal.form)?;
    let comp = linalg::complement(&pf);
    let floor = 1.0 - cal.tol_plane;
    if p == 1 {
        let v = phi_l.coeffs()[0];
        return Ok(Richness { found: v >= floor, value: v, xi0: None });
    }
    let restricted = pullback(&phi_l, &comp)?;
    let rep = grassmann::comass(&restricted, opts)?;
    let xi0 = match rep.argplanes.first() {
        Some(eta) => Some(OrientedPlane::from_spanning(&(&comp * eta.frame()))?),
        None => None,
    };
    Ok(Richness { found: rep.value >= floor, value: rep.value, xi0 })
}
