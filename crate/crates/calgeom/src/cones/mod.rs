//! The span `Λ(φ)` of the calibrated planes, the cone `Λ₊(φ)` they
//! generate, its polar `Λ⁺(φ)` of forms nonnegative on `G(φ)`, and the
//! tests built on them.
//!
//! Coefficient vectors of forms and multivectors are paired by the plain dot
//! product, so `Λ(φ)^⊥` is computed inside the same coordinate space.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::catalog::Calibration;
use crate::error::{shape_err, Error, Result};
use crate::exterior::{binomial, interior, pair, pullback, wedge, wedge_mv, Form, Multivector};
use crate::grassmann::{draw_planes, form_margin, OptOptions, OrientedPlane, Sense, Subspace};
use crate::linalg::{self, row_span};
use crate::lp::nnls;
use crate::pshcheck::{phi_hessian_point, Jet2};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_REL: f64 = 1e-8;
/// Largest principal angle (radians) at which two subspaces count as equal.
pub const ANGLE_TOL: f64 = 1e-4;
/// Residual below which a target is reproduced by the working set.
pub const INSIDE_TOL: f64 = 1e-7;

/// An orthonormal basis of a thresholded span.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis {
    /// What the columns live in, e.g. `Λ^3(R^6)` or `R^4`.
    pub ambient: String,
    pub basis: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank_gap: f64,
    /// Set when the gap between kept and dropped singular values is below 10.
    pub unstable: bool,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn from_span(ambient: String, s: linalg::Span) -> Self {
        Self { ambient, unstable: s.rank_gap < 10.0, basis: s.basis, singular_values: s.singular_values, rank_gap: s.rank_gap }
    }

    /// Orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> DMatrix<f64> {
        if self.basis.ncols() == 0 {
            let m = self.basis.nrows();
            return DMatrix::identity(m, m);
        }
        linalg::complement(&self.basis)
    }
}

fn plucker_rows(planes: &[OrientedPlane]) -> DMatrix<f64> {
    let m = planes[0].plucker().coeffs().len();
    DMatrix::from_fn(planes.len(), m, |i, j| planes[i].plucker().coeffs()[j])
}

/// `Λ(φ)`: the span of the Plücker vectors of `samples` calibrated planes.
pub fn lambda_span(cal: &Calibration, samples: usize, opts: &OptOptions) -> Result<SubspaceBasis> {
    let (n, p) = (cal.n(), cal.p());
    let need = 4 * binomial(n, p);
    if samples < need {
        return Err(Error::Invalid(format!("{samples} samples; the span in Λ^{p}(R^{n}) needs at least {need}")));
    }
    let planes = draw_planes(cal, samples, opts)?;
    Ok(SubspaceBasis::from_span(format!("Λ^{p}(R^{n})"), row_span(&plucker_rows(&planes), RANK_REL)))
}

/// Orthogonal projection onto a span of forms.
pub fn project_to_lambda(a: &Form, span: &SubspaceBasis) -> Result<Form> {
    if span.basis.nrows() != a.coeffs().len() {
        return Err(shape_err!("form with {} coefficients against a span in {}", a.coeffs().len(), span.ambient));
    }
    let v = a.to_dvector();
    let w = &span.basis * (span.basis.transpose() * v);
    Form::from_coeffs(a.n(), a.p(), w.as_slice().to_vec())
}

/// The essential subspace `W`: the span of all vectors of all calibrated
/// planes, with a check that `φ|_W` has the same planes.
#[derive(Clone, Debug, PartialEq)]
pub struct Essential {
    pub subspace: SubspaceBasis,
    /// Largest distance from a plane of `φ|_W` (embedded) to `G(φ)` in value:
    /// `1 − min φ(ξ)`.
    pub restriction_defect: f64,
    pub verified: bool,
}

pub fn essential_subspace(cal: &Calibration, opts: &OptOptions) -> Result<Essential> {
    let n = cal.n();
    let planes = draw_planes(cal, opts.restarts.max(4 * n), opts)?;
    let cols: Vec<DVector<f64>> = planes.iter().flat_map(|x| x.frame().column_iter().map(|c| c.into_owned())).collect();
    let span = row_span(&DMatrix::from_columns(&cols).transpose(), RANK_REL);
    let subspace = SubspaceBasis::from_span(format!("R^{n}"), span);
    let w = subspace.basis.clone();
    let restricted = Calibration::from_form(pullback(&cal.form, &w)?, &format!("{}|W", cal.name));
    let again = draw_planes(&restricted, 8, opts)?;
    let mut defect: f64 = 0.0;
    for eta in &again {
        let xi = eta.embed(&w)?;
        defect = defect.max(1.0 - pair(&cal.form, xi.plucker())?);
    }
    Ok(Essential { subspace, restriction_defect: defect, verified: defect <= cal.tol_plane })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Inside,
    Outside,
    Boundary,
    Undecided,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Inside => "inside",
            Verdict::Outside => "outside",
            Verdict::Boundary => "boundary",
            Verdict::Undecided => "undecided",
        }
    }
}

/// Evidence for a cone decision.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeCertificate {
    pub verdict: Verdict,
    /// Inside: calibrated planes with positive weights reproducing the target.
    pub weights: Vec<(OrientedPlane, f64)>,
    /// Outside: a unit form, nonnegative on `G(φ)`, negative on the target.
    pub separator: Option<Form>,
    /// Outside: minimum of the separator over `G(φ)`. Inside: the residual
    /// `‖Σ wᵢξᵢ − target‖`.
    pub margin: f64,
    /// Outside: the separator evaluated on the target.
    pub pairing: f64,
    pub iters: usize,
    pub seed: u64,
}

/// Decides `target ∈ Λ₊(φ)` by cutting planes: fit the target with
/// nonnegative weights on a working set of calibrated planes; if the fit
/// leaves a residual `r`, the form `−r/|r|` separates it from the working
/// set, and the margin optimizer either certifies it on all of `G(φ)` or
/// returns the planes that violate it, which join the working set.
pub fn positive_cone_membership(target: &Multivector, cal: &Calibration, opts: &OptOptions) -> Result<ConeCertificate> {
    if target.n() != cal.n() || target.p() != cal.p() {
        return Err(shape_err!(
            "target in Λ^{}(R^{}) for a calibration of degree {} on R^{}",
            target.p(),
            target.n(),
            cal.p(),
            cal.n()
        ));
    }
    let t = DVector::from_column_slice(target.coeffs());
    let mut work = draw_planes(cal, opts.restarts.max(2 * t.len()).min(4 * t.len()), opts)?;
    // an extreme ray is only reproduced exactly by its own plane
    if let Some(own) = simple_plane(target)? {
        if pair(&cal.form, own.plucker())? >= 1.0 - cal.tol_plane {
            work.push(own);
        }
    }
    let budget = 60;
    for it in 1..=budget {
        let a = plucker_rows(&work).transpose();
        let w = nnls(&a, &t)?;
        let r = &t - &a * &w;
        let rn = r.norm();
        if rn <= INSIDE_TOL {
            let weights = work.iter().zip(w.iter()).filter(|(_, &x)| x > 0.0).map(|(p, &x)| (p.clone(), x)).collect();
            return Ok(ConeCertificate {
                verdict: Verdict::Inside,
                weights,
                separator: None,
                margin: rn,
                pairing: 0.0,
                iters: it,
                seed: opts.seed,
            });
        }
        let sep = Form::from_coeffs(cal.n(), cal.p(), (-&r / rn).as_slice().to_vec())?;
        let pairing = pair(&sep, target)?;
        let round = opts.clone().with_seed(opts.seed.wrapping_add(it as u64));
        let m = form_margin(&sep, cal, None, Sense::Min, &round)?;
        // Adding cφ raises the separator by c on G(φ) and its pairing by
        // cφ(target); spend half the room the pairing leaves on margin.
        let need = (-m.value).max(0.0);
        let phi_t = pair(&cal.form, target)?;
        let room = if phi_t > 1e-12 { -pairing / phi_t } else { f64::INFINITY };
        let mut cuts = m.argplanes;
        if pairing <= -1e-6 && room > need + 1e-6 {
            let c = if room.is_finite() { need + 0.5 * (room - need) } else { need + 0.5 };
            let shifted = &sep + &cal.form.scale(c);
            let s = shifted.scale(1.0 / shifted.norm());
            let sp = pair(&s, target)?;
            let mm = confirmed_min(&s, cal, &round)?;
            if mm.value >= -1e-9 && sp <= -1e-6 {
                return Ok(ConeCertificate {
                    verdict: Verdict::Outside,
                    weights: Vec::new(),
                    separator: Some(s),
                    margin: mm.value,
                    pairing: sp,
                    iters: it,
                    seed: opts.seed,
                });
            }
            cuts.extend(mm.argplanes);
        }
        let before = work.len();
        for xi in cuts {
            if work.iter().all(|w| w.distance(&xi) > 1e-12) {
                work.push(xi);
            }
        }
        if work.len() == before {
            break;
        }
    }
    Ok(ConeCertificate {
        verdict: Verdict::Undecided,
        weights: Vec::new(),
        separator: None,
        margin: f64::NAN,
        pairing: f64::NAN,
        iters: budget,
        seed: opts.seed,
    })
}

/// Minimum over `G(φ)`; a nonnegative result is searched again from a
/// second seed with twice the restarts before it is trusted.
fn confirmed_min(a: &Form, cal: &Calibration, opts: &OptOptions) -> Result<crate::grassmann::OptReport> {
    let first = form_margin(a, cal, None, Sense::Min, opts)?;
    if first.value < -1e-9 {
        return Ok(first);
    }
    let again = OptOptions { restarts: 2 * opts.restarts, seed: opts.seed ^ 0x3c3c_3c3c, ..opts.clone() };
    let second = form_margin(a, cal, None, Sense::Min, &again)?;
    Ok(if second.value < first.value { second } else { first })
}

/// The oriented plane of a simple multivector, read off the kernel of
/// `v ↦ v∧x`; `None` when `x` is not simple.
fn simple_plane(x: &Multivector) -> Result<Option<OrientedPlane>> {
    let (n, p) = (x.n(), x.p());
    let norm = x.norm();
    if p == 0 || p == n || norm == 0.0 {
        return Ok(None);
    }
    let cols: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = alloc::vec![0.0; n];
            e[i] = 1.0;
            wedge_mv(&Multivector::from_vector(&e)?, x).map(|w| w.to_dvector() / norm)
        })
        .collect::<Result<_>>()?;
    let span = row_span(&DMatrix::from_columns(&cols), 1e-9);
    if span.null.ncols() != p {
        return Ok(None);
    }
    let plane = OrientedPlane::new(span.null)?;
    let s = plane.plucker().dot(x) / norm;
    if (s.abs() - 1.0).abs() > 1e-8 {
        return Ok(None);
    }
    Ok(Some(if s < 0.0 { plane.reversed() } else { plane }))
}

/// Re-checks a certificate from scratch: weights, planes and residual for
/// inside; a fresh margin search (different seed) and the pairing sign for
/// outside.
pub fn verify_certificate(
    cert: &ConeCertificate,
    target: &Multivector,
    cal: &Calibration,
    opts: &OptOptions,
) -> Result<bool> {
    match cert.verdict {
        Verdict::Inside => {
            let mut sum = Multivector::zeros(target.n(), target.p())?;
            for (xi, w) in &cert.weights {
                if !(*w >= 0.0) || pair(&cal.form, xi.plucker())? < 1.0 - cal.tol_plane {
                    return Ok(false);
                }
                sum = &sum + &xi.plucker().scale(*w);
            }
            Ok((&sum - target).norm() <= 1e-6)
        }
        Verdict::Outside => {
            let Some(sep) = &cert.separator else { return Ok(false) };
            if pair(sep, target)? > -1e-6 {
                return Ok(false);
            }
            let fresh = opts.clone().with_seed(opts.seed ^ 0xa5a5_a5a5);
            Ok(form_margin(sep, cal, None, Sense::Min, &fresh)?.value >= -1e-8)
        }
        Verdict::Boundary | Verdict::Undecided => Ok(false),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryTest {
    pub on_boundary: bool,
    /// `min (e⌐(e∧φ))(ξ)` over `G(φ)`, equal to `1 − max |P_ξ e|²`.
    pub margin: f64,
    pub witness: Option<OrientedPlane>,
}

/// Whether `φ_e = e⌐(e∧φ)` lies on the boundary of `Λ⁺(φ)`, which happens
/// exactly when `e` lies in some calibrated plane.
pub fn hyperplane_boundary_test(cal: &Calibration, e: &[f64], opts: &OptOptions) -> Result<BoundaryTest> {
    let v = DVector::from_column_slice(e);
    if (v.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Invalid(format!("direction must be a unit vector (norm {})", v.norm())));
    }
    let phi_e = phi_e(cal, e)?;
    let m = form_margin(&phi_e, cal, None, Sense::Min, opts)?;
    Ok(BoundaryTest { on_boundary: m.value <= crate::pshcheck::CLASS_TOL, margin: m.value, witness: m.argplanes.first().cloned() })
}

/// `e⌐(e♭∧φ)`.
pub fn phi_e(cal: &Calibration, e: &[f64]) -> Result<Form> {
    let ef = Form::from_covector(e)?;
    interior(e, &wedge(&ef, &cal.form)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalityReport {
    pub normal: bool,
    pub worst_angle: f64,
    pub trials: usize,
    /// Hyperplanes (by normal vector) where the dimensions differ.
    pub mismatches: Vec<(Vec<f64>, usize, usize)>,
}

/// Compares `Λ(φ|_W)^⊥` with the restriction of `Λ(φ)^⊥` to `W` for
/// coordinate hyperplanes and `trials` random ones.
pub fn normality_check(cal: &Calibration, trials: usize, opts: &OptOptions) -> Result<NormalityReport> {
    let (n, p) = (cal.n(), cal.p());
    if p >= n {
        return Err(Error::Invalid("normality needs p < n".into()));
    }
    let span = lambda_span(cal, 4 * binomial(n, p), opts)?;
    let perp = span.complement();
    let mut normals: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut s = crate::rng::stream(opts.seed ^ 0x6e6f_726d);
    for _ in 0..trials {
        normals.push(crate::rng::unit_vector(&mut s, n));
    }
    let mut worst: f64 = 0.0;
    let mut mismatches = Vec::new();
    for (k, u) in normals.iter().enumerate() {
        let w = Subspace::hyperplane(u.as_slice())?;
        let wb = w.basis();
        let m = binomial(n - 1, p);
        // restriction of Λ(φ)^⊥
        let restricted: Vec<DVector<f64>> = perp
            .column_iter()
            .map(|c| pullback(&Form::from_coeffs(n, p, c.as_slice().to_vec()).unwrap(), wb).map(|f| f.to_dvector()))
            .collect::<Result<_>>()?;
        let left = if restricted.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            row_span(&DMatrix::from_columns(&restricted).transpose(), RANK_REL).basis
        };
        // Λ(φ|_W)^⊥
        let sub = Calibration::from_form(pullback(&cal.form, wb)?, "restriction");
        let sub_opts = opts.clone().with_seed(opts.seed.wrapping_add(1000 * (k as u64 + 1)));
        let right = match draw_planes(&sub, 4 * m, &sub_opts) {
            Ok(planes) => SubspaceBasis::from_span(String::new(), row_span(&plucker_rows(&planes), RANK_REL)).complement(),
            Err(Error::NotFound(_)) => DMatrix::identity(m, m),
            Err(e) => return Err(e),
        };
        if left.ncols() != right.ncols() {
            mismatches.push((u.as_slice().to_vec(), left.ncols(), right.ncols()));
            continue;
        }
        worst = worst.max(linalg::subspace_distance(&left, &right));
    }
    Ok(NormalityReport { normal: mismatches.is_empty() && worst <= ANGLE_TOL, worst_angle: worst, trials: normals.len(), mismatches })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlhModD {
    /// Norm of the part of `dd^φ f` outside `df∧Λ¹ + Λ(φ)^⊥`.
    pub residual: f64,
    pub alpha: Form,
    pub sigma_norm: f64,
    /// Set when the gradient vanishes and only `Λ(φ)^⊥` was used.
    pub degenerate_gradient: bool,
}

/// Least-squares split `dd^φ f = df∧α + σ + residual` with `α` of degree
/// `p − 1` and `σ ⊥ Λ(φ)`.
pub fn pluriharmonic_mod_d_test(jet: &Jet2, cal: &Calibration, span: &SubspaceBasis) -> Result<PlhModD> {
    let (n, p) = (cal.n(), cal.p());
    let h = phi_hessian_point(jet, cal, None)?.to_dvector();
    if span.basis.nrows() != h.len() {
        return Err(shape_err!("span in {} for a form with {} coefficients", span.ambient, h.len()));
    }
    let perp = span.complement();
    let q = p.saturating_sub(1);
    let degenerate = jet.gradient.norm() <= 1e-12;
    let df = Form::from_covector(jet.gradient.as_slice())?;
    let mut cols: Vec<DVector<f64>> = Vec::new();
    if !degenerate && p >= 1 {
        for idx in crate::exterior::subsets(n, q).iter() {
            cols.push(wedge(&df, &Form::basis(n, &idx.to_vec())?)?.to_dvector());
        }
    }
    let nd = cols.len();
    cols.extend(perp.column_iter().map(|c| c.into_owned()));
    if cols.is_empty() {
        return Ok(PlhModD { residual: h.norm(), alpha: Form::zeros(n, q)?, sigma_norm: 0.0, degenerate_gradient: degenerate });
    }
    let a = DMatrix::from_columns(&cols);
    let x = linalg::lstsq(&a, &h, 1e-12);
    let residual = (&a * &x - &h).norm();
    let alpha = if nd > 0 { Form::from_coeffs(n, q, x.rows(0, nd).iter().copied().collect())? } else { Form::zeros(n, q)? };
    let sigma = perp.clone() * x.rows(nd, perp.ncols());
    Ok(PlhModD { residual, alpha, sigma_norm: sigma.norm(), degenerate_gradient: degenerate })
}
