//! The calibrations of the catalog as explicit constant-coefficient forms,
//! with closed-form samplers of their calibrated planes where available.
//!
//! Coordinate conventions:
//! * Cⁿ uses interleaved real coordinates `(x1, y1, …, xn, yn)`, `J x_k = y_k`;
//! * Hⁿ uses blocks `(1, i, j, k)` per quaternionic coordinate, with `I, J, K`
//!   acting by right multiplication;
//! * `Im O` uses `(i, j, k, ε, iε, jε, kε)` and `O` prepends `1`;
//! * the double point form on R²ⁿ uses `(x1, …, xn, y1, …, yn)`.

mod algebra;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)]
use num_traits::Float;

pub use algebra::AlgebraTable;

use crate::error::{Error, Result};
use crate::exterior::{hodge_star, subsets, wedge, Form};
use crate::grassmann::{self, OptOptions, OrientedPlane};
use crate::rng;

/// Which construction to build.
#[derive(Clone, Debug, PartialEq)]
pub enum CalibrationKind {
    /// `ω = Σ dx_k∧dy_k` on Cᵐ.
    Kahler { m: usize },
    /// `ω^k/k!` on Cᵐ.
    KahlerPower { m: usize, k: usize },
    /// `Re(e^{−iθ} dz₁∧…∧dz_m)` on Cᵐ.
    SpecialLagrangian { m: usize, theta: f64 },
    /// `⟨x, yz⟩` on `Im O`.
    Associative,
    /// `*φ` on `Im O`.
    Coassociative,
    /// `⟨x, y×z×w⟩` on `O`.
    Cayley,
    /// `(ω_I² + ω_J² + ω_K²)/6` on Hᵐ.
    Quaternionic { m: usize },
    /// `(ω_I² − ω_J² − ω_K²)/2` on Hᵐ.
    GeneralizedCayley { m: usize },
    /// `dx₁∧…∧dx_n + dy₁∧…∧dy_n` on R²ⁿ.
    DoublePoint { n: usize },
    /// `⟨x, [y, z]⟩` from structure constants `[e_i, e_j] = Σ c e_k`, given
    /// as `(i, j, k, c)`; normalized by its comass.
    LieThreeForm { dim: usize, constants: Vec<(usize, usize, usize, f64)> },
    /// `e¹∧…∧eⁿ`.
    Volume { n: usize },
    /// A single coordinate plane form `e^{i₁}∧…∧e^{i_p}`.
    Coordinate { n: usize, indices: Vec<usize> },
    /// `dx₁∧dx₂ + λ dx₃∧dx₄` on R⁴, `|λ| ≤ 1`.
    TwoPlanes { lambda: f64 },
}

/// Closed-form samplers of `G(φ)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Sampler {
    /// Complex `k`-planes in Cᵐ through a random unitary frame.
    Complex { m: usize, k: usize },
    /// `U·Rᵐ` for special unitary `U` with `det U = e^{iθ}`.
    SpecialLagrangian { m: usize, theta: f64 },
    /// Quaternion lines `span(v, vi, vj, vk)`.
    QuaternionLine { m: usize },
    /// `span(x, y, xy)` for orthonormal imaginary `x, y`.
    Associative,
    /// Orthogonal complements of associative planes in `Im O`.
    Coassociative,
    /// Random plane polished by ascent on `φ`.
    Polish,
}

impl Sampler {
    /// Tag used in calibration files.
    pub fn tag(&self) -> String {
        match self {
            Sampler::Complex { m, k } => format!("complex?n={m}&k={k}"),
            Sampler::SpecialLagrangian { m, theta } => format!("special_lagrangian?n={m}&theta={theta:?}"),
            Sampler::QuaternionLine { m } => format!("quaternion_line?n={m}"),
            Sampler::Associative => "associative".into(),
            Sampler::Coassociative => "coassociative".into(),
            Sampler::Polish => "polish".into(),
        }
    }

    /// Inverse of [`Sampler::tag`].
    pub fn from_tag(tag: &str) -> Result<Self> {
        let (head, query) = match tag.split_once('?') {
            Some((h, q)) => (h, q),
            None => (tag, ""),
        };
        let get = |key: &str| -> Result<&str> {
            query
                .split('&')
                .filter_map(|kv| kv.split_once('='))
                .find(|(k, _)| *k == key)
                .map(|(_, v)| v)
                .ok_or_else(|| Error::Invalid(format!("sampler tag {tag:?} lacks {key}")))
        };
        let int = |key: &str| -> Result<usize> {
            get(key)?.parse().map_err(|_| Error::Invalid(format!("sampler tag {tag:?}: bad {key}")))
        };
        match head {
            "complex" => Ok(Sampler::Complex { m: int("n")?, k: int("k")? }),
            "special_lagrangian" => Ok(Sampler::SpecialLagrangian {
                m: int("n")?,
                theta: get("theta")?.parse().map_err(|_| Error::Invalid(format!("sampler tag {tag:?}: bad theta")))?,
            }),
            "quaternion_line" => Ok(Sampler::QuaternionLine { m: int("n")? }),
            "associative" => Ok(Sampler::Associative),
            "coassociative" => Ok(Sampler::Coassociative),
            "polish" => Ok(Sampler::Polish),
            _ => Err(Error::Invalid(format!("unknown sampler {tag:?}"))),
        }
    }
}

/// A constant-coefficient calibration with metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    pub form: Form,
    pub name: String,
    pub sampler: Option<Sampler>,
    pub comass_certified: bool,
    pub tol_plane: f64,
}

impl Calibration {
    /// Wraps a user form. Nothing is certified.
    pub fn from_form(form: Form, name: &str) -> Self {
        Self { form, name: name.into(), sampler: None, comass_certified: false, tol_plane: 1e-6 }
    }

    pub fn n(&self) -> usize {
        self.form.n()
    }

    pub fn p(&self) -> usize {
        self.form.p()
    }

    /// Runs the comass optimizer and sets `comass_certified` when the value
    /// is within 1e−6 of 1.
    pub fn certify(&mut self, opts: &OptOptions) -> Result<f64> {
        let rep = grassmann::comass(&self.form, opts)?;
        self.comass_certified = rep.converged && (rep.value - 1.0).abs() <= 1e-6;
        Ok(rep.value)
    }

    /// One plane of `G(φ)` drawn from the stream `seed`: from the sampler if
    /// present, otherwise by ascent from a random start (`None` when that
    /// start reaches a lower local maximum).
    pub fn draw_plane(&self, seed: u64, opts: &OptOptions) -> Result<Option<OrientedPlane>> {
        let floor = 1.0 - self.tol_plane;
        let raw = match &self.sampler {
            None | Some(Sampler::Polish) => return grassmann::ascent::ascent_sample(&self.form, seed, opts),
            Some(s) => sample_frame(s, &mut rng::stream(seed))?,
        };
        let mut frame = raw;
        let v = self.form.eval(&frame)?;
        if v < 0.0 {
            for i in 0..frame.nrows() {
                frame[(i, 0)] = -frame[(i, 0)];
            }
        }
        let mut v = v.abs();
        if v < 1.0 - 1e-12 {
            let (f, w) = grassmann::polish_on_level(&self.form, &frame);
            frame = f;
            v = w;
        }
        if v < floor {
            return Ok(None);
        }
        Ok(Some(OrientedPlane::from_spanning(&frame)?))
    }
}

fn cplx_to_real(u: &[Complex<f64>]) -> Vec<f64> {
    u.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn unit_phase(z: Complex<f64>) -> Complex<f64> {
    let r = z.re.hypot(z.im);
    if r > 0.0 {
        Complex::new(z.re / r, z.im / r)
    } else {
        Complex::new(1.0, 0.0)
    }
}

fn random_unitary(s: &mut rng::Stream, m: usize) -> DMatrix<Complex<f64>> {
    let g = DMatrix::from_fn(m, m, |_, _| Complex::new(rng::gaussian(s), rng::gaussian(s)));
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    // Haar measure: rescale columns by the phases of diag(R)
    let mut out = q.clone();
    for j in 0..m {
        let d = r[(j, j)];
        let ph = unit_phase(d);
        for i in 0..m {
            out[(i, j)] = q[(i, j)] * ph;
        }
    }
    out
}

fn sample_frame(s: &Sampler, rng: &mut rng::Stream) -> Result<DMatrix<f64>> {
    match s {
        Sampler::Complex { m, k } => {
            let u = random_unitary(rng, *m);
            let mut f = DMatrix::zeros(2 * m, 2 * k);
            for c in 0..*k {
                let col: Vec<Complex<f64>> = u.column(c).iter().copied().collect();
                let ju: Vec<Complex<f64>> = col.iter().map(|z| z * Complex::new(0.0, 1.0)).collect();
                f.set_column(2 * c, &nalgebra::DVector::from_vec(cplx_to_real(&col)));
                f.set_column(2 * c + 1, &nalgebra::DVector::from_vec(cplx_to_real(&ju)));
            }
            Ok(f)
        }
        Sampler::SpecialLagrangian { m, theta } => {
            let mut u = random_unitary(rng, *m);
            let det = u.determinant();
            let fix = Complex::new(theta.cos(), theta.sin()) / unit_phase(det);
            for i in 0..*m {
                u[(i, 0)] *= fix;
            }
            let mut f = DMatrix::zeros(2 * m, *m);
            for c in 0..*m {
                let col: Vec<Complex<f64>> = u.column(c).iter().copied().collect();
                f.set_column(c, &nalgebra::DVector::from_vec(cplx_to_real(&col)));
            }
            Ok(f)
        }
        Sampler::QuaternionLine { m } => {
            let v = rng::unit_vector(rng, 4 * m);
            let [i, j, k] = quaternionic_structures(*m);
            Ok(DMatrix::from_columns(&[v.clone(), &i * &v, &j * &v, &k * &v]))
        }
        Sampler::Associative | Sampler::Coassociative => {
            let o = AlgebraTable::octonions();
            let x = im_unit(rng, &[]);
            let y = im_unit(rng, &[&x]);
            let xy = o.mul(&x, &y);
            let cols: Vec<nalgebra::DVector<f64>> =
                [x, y, xy].iter().map(|v| nalgebra::DVector::from_column_slice(&v[1..])).collect();
            let assoc = DMatrix::from_columns(&cols);
            if matches!(s, Sampler::Associative) {
                Ok(assoc)
            } else {
                Ok(crate::linalg::complement(&crate::linalg::orthonormalize(&assoc)))
            }
        }
        Sampler::Polish => Err(Error::Invalid("polish sampler has no closed form".into())),
    }
}

/// Random unit imaginary octonion orthogonal to the given ones.
fn im_unit(rng: &mut rng::Stream, against: &[&Vec<f64>]) -> Vec<f64> {
    loop {
        let g = rng::gaussian_vector(rng, 7);
        let mut v: Vec<f64> = core::iter::once(0.0).chain(g.iter().copied()).collect();
        for a in against {
            let d: f64 = v.iter().zip(a.iter()).map(|(x, y)| x * y).sum();
            for (vi, ai) in v.iter_mut().zip(a.iter()) {
                *vi -= d * ai;
            }
        }
        let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if r > 1e-6 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

/// Complex structure `J` on R²ᵐ (interleaved coordinates).
pub fn complex_structure(m: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * m, 2 * m);
    for k in 0..m {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

/// Right multiplications by `i, j, k` on Hᵐ = R⁴ᵐ.
pub fn quaternionic_structures(m: usize) -> [DMatrix<f64>; 3] {
    let h = AlgebraTable::quaternions();
    let mk = |u: usize| {
        let r = h.right_mul_matrix(u);
        let mut big = DMatrix::zeros(4 * m, 4 * m);
        for b in 0..m {
            big.view_mut((4 * b, 4 * b), (4, 4)).copy_from(&r);
        }
        big
    };
    [mk(1), mk(2), mk(3)]
}

/// The 2-form `(v, w) ↦ ⟨Sv, w⟩` of a skew matrix `S`.
pub fn two_form_of(s: &DMatrix<f64>) -> Form {
    let n = s.nrows();
    let coeffs = subsets(n, 2)
        .iter()
        .map(|m| {
            let a = m.as_slice()[0] as usize;
            let b = m.as_slice()[1] as usize;
            // ⟨S e_a, e_b⟩ = S[b, a]
            s[(b, a)]
        })
        .collect();
    Form::from_coeffs(n, 2, coeffs).expect("shape")
}

fn kahler_form(m: usize) -> Result<Form> {
    let terms: Vec<(Vec<usize>, f64)> = (0..m).map(|k| (vec![2 * k, 2 * k + 1], 1.0)).collect();
    let refs: Vec<(&[usize], f64)> = terms.iter().map(|(i, c)| (i.as_slice(), *c)).collect();
    Form::from_terms(2 * m, 2, &refs)
}

fn power(a: &Form, k: usize) -> Result<Form> {
    let mut out = Form::from_coeffs(a.n(), 0, vec![1.0])?;
    for _ in 0..k {
        out = wedge(&out, a)?;
    }
    Ok(out)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// `(Re, Im)` of `dz₁∧…∧dz_m` on R²ᵐ.
pub fn holomorphic_volume(m: usize) -> Result<(Form, Form)> {
    let mut re = Form::from_coeffs(2 * m, 0, vec![1.0])?;
    let mut im = Form::zeros(2 * m, 0)?;
    for k in 0..m {
        let dx = Form::basis(2 * m, &[2 * k])?;
        let dy = Form::basis(2 * m, &[2 * k + 1])?;
        let nre = &wedge(&re, &dx)? - &wedge(&im, &dy)?;
        let nim = &wedge(&re, &dy)? + &wedge(&im, &dx)?;
        re = nre;
        im = nim;
    }
    Ok((re, im))
}

/// Associative 3-form `φ(x, y, z) = ⟨x, yz⟩` on `Im O` = R⁷.
pub fn associative_form() -> Form {
    let o = AlgebraTable::octonions();
    let coeffs = subsets(7, 3)
        .iter()
        .map(|m| {
            let s = m.as_slice();
            let (a, b, c) = (s[0] as usize + 1, s[1] as usize + 1, s[2] as usize + 1);
            let (d, sign) = o.unit_product(b, c);
            if d == a {
                sign
            } else {
                0.0
            }
        })
        .collect();
    Form::from_coeffs(7, 3, coeffs).expect("shape")
}

/// Cayley 4-form `Φ(x, y, z, w) = ⟨x, y×z×w⟩` on `O` = R⁸.
pub fn cayley_form() -> Form {
    let o = AlgebraTable::octonions();
    let coeffs = subsets(8, 4)
        .iter()
        .map(|m| {
            let s = m.as_slice();
            let t = o.triple_cross(&o.unit(s[1] as usize), &o.unit(s[2] as usize), &o.unit(s[3] as usize));
            t[s[0] as usize]
        })
        .collect();
    Form::from_coeffs(8, 4, coeffs).expect("shape")
}

fn quaternionic_squares(m: usize) -> Result<[Form; 3]> {
    let [i, j, k] = quaternionic_structures(m);
    let sq = |s: &DMatrix<f64>| -> Result<Form> {
        let w = two_form_of(s);
        wedge(&w, &w)
    };
    Ok([sq(&i)?, sq(&j)?, sq(&k)?])
}

/// Builds a catalog calibration. Branches whose comass is not a classical
/// fact are certified by running the comass optimizer with `opts`.
pub fn make_calibration(kind: &CalibrationKind, opts: &OptOptions) -> Result<Calibration> {
    let positive = |v: usize, what: &str| -> Result<()> {
        if v == 0 {
            Err(Error::Invalid(format!("{what} must be positive")))
        } else {
            Ok(())
        }
    };
    let mut cal = match kind {
        CalibrationKind::Kahler { m } => {
            positive(*m, "n")?;
            named(kahler_form(*m)?, format!("kahler(n={m})"), Some(Sampler::Complex { m: *m, k: 1 }), true)
        }
        CalibrationKind::KahlerPower { m, k } => {
            positive(*m, "n")?;
            positive(*k, "p")?;
            if k > m {
                return Err(Error::Invalid(format!("power {k} exceeds complex dimension {m}")));
            }
            let f = power(&kahler_form(*m)?, *k)?.scale(1.0 / factorial(*k));
            named(f, format!("kahler_power(n={m},p={k})"), Some(Sampler::Complex { m: *m, k: *k }), true)
        }
        CalibrationKind::SpecialLagrangian { m, theta } => {
            positive(*m, "n")?;
            if !(theta.is_finite() && *theta >= 0.0 && *theta < 2.0 * core::f64::consts::PI) {
                return Err(Error::Invalid(format!("theta = {theta} outside [0, 2π)")));
            }
            let (re, im) = holomorphic_volume(*m)?;
            let f = &re.scale(theta.cos()) + &im.scale(theta.sin());
            named(
                f,
                format!("special_lagrangian(n={m},theta={theta:?})"),
                Some(Sampler::SpecialLagrangian { m: *m, theta: *theta }),
                true,
            )
        }
        CalibrationKind::Associative => named(associative_form(), "associative".into(), Some(Sampler::Associative), true),
        CalibrationKind::Coassociative => {
            named(hodge_star(&associative_form()), "coassociative".into(), Some(Sampler::Coassociative), true)
        }
        CalibrationKind::Cayley => named(cayley_form(), "cayley".into(), Some(Sampler::Polish), true),
        CalibrationKind::Quaternionic { m } => {
            positive(*m, "n")?;
            let [a, b, c] = quaternionic_squares(*m)?;
            let f = (&(&a + &b) + &c).scale(1.0 / 6.0);
            named(f, format!("quaternionic(n={m})"), Some(Sampler::QuaternionLine { m: *m }), true)
        }
        CalibrationKind::GeneralizedCayley { m } => {
            positive(*m, "n")?;
            let [a, b, c] = quaternionic_squares(*m)?;
            let f = (&(&a - &b) - &c).scale(0.5);
            named(f, format!("generalized_cayley(n={m})"), Some(Sampler::Polish), false)
        }
        CalibrationKind::DoublePoint { n } => {
            positive(*n, "n")?;
            let x: Vec<usize> = (0..*n).collect();
            let y: Vec<usize> = (*n..2 * n).collect();
            let f = &Form::basis(2 * n, &x)? + &Form::basis(2 * n, &y)?;
            named(f, format!("double_point(n={n})"), None, true)
        }
        CalibrationKind::LieThreeForm { dim, constants } => {
            let raw = lie_form(*dim, constants)?;
            let rep = grassmann::comass(&raw, opts)?;
            if !(rep.value > 1e-12) {
                return Err(Error::Degenerate("structure constants give a zero 3-form".into()));
            }
            let mut cal = named(raw.scale(1.0 / rep.value), format!("lie_three_form(dim={dim})"), None, false);
            cal.comass_certified = rep.converged;
            return Ok(cal);
        }
        CalibrationKind::Volume { n } => {
            positive(*n, "n")?;
            named(Form::volume(*n)?, format!("volume(n={n})"), None, true)
        }
        CalibrationKind::Coordinate { n, indices } => {
            let mut sorted = indices.clone();
            sorted.sort_unstable();
            let f = Form::from_terms(*n, indices.len(), &[(sorted.as_slice(), 1.0)])?;
            named(f, format!("coordinate(n={n},idx={indices:?})"), None, true)
        }
        CalibrationKind::TwoPlanes { lambda } => {
            if !(lambda.abs() <= 1.0) {
                return Err(Error::Invalid(format!("|lambda| = {} exceeds 1", lambda.abs())));
            }
            let f = Form::from_terms(4, 2, &[(&[0, 1], 1.0), (&[2, 3], *lambda)])?;
            named(f, format!("two_planes(lambda={lambda:?})"), None, true)
        }
    };
    if !cal.comass_certified {
        cal.certify(opts)?;
    }
    Ok(cal)
}

fn named(form: Form, name: String, sampler: Option<Sampler>, certified: bool) -> Calibration {
    Calibration { form, name, sampler, comass_certified: certified, tol_plane: 1e-6 }
}

fn lie_form(dim: usize, constants: &[(usize, usize, usize, f64)]) -> Result<Form> {
    if dim < 3 {
        return Err(Error::Invalid("a Lie three-form needs dimension at least 3".into()));
    }
    // φ(e_a, e_b, e_c) = ⟨e_a, [e_b, e_c]⟩ = c_{bc}^a
    let mut t = vec![0.0; dim * dim * dim];
    for &(i, j, k, c) in constants {
        if i >= dim || j >= dim || k >= dim {
            return Err(Error::Invalid(format!("structure constant index ({i},{j},{k}) out of range")));
        }
        t[(k * dim + i) * dim + j] += c;
    }
    let coeffs = subsets(dim, 3)
        .iter()
        .map(|m| {
            let s = m.as_slice();
            let (a, b, c) = (s[0] as usize, s[1] as usize, s[2] as usize);
            t[(a * dim + b) * dim + c]
        })
        .collect();
    Form::from_coeffs(dim, 3, coeffs)
}

/// Structure constants of su(2) ≅ (R³, ×).
pub fn su2_constants() -> Vec<(usize, usize, usize, f64)> {
    vec![(0, 1, 2, 1.0), (1, 0, 2, -1.0), (1, 2, 0, 1.0), (2, 1, 0, -1.0), (2, 0, 1, 1.0), (0, 2, 1, -1.0)]
}
