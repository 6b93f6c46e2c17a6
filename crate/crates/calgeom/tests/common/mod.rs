//! Oracles shared by the integration tests. None of them call the
//! Grassmannian optimizer: calibrated planes come from closed-form
//! constructions, extrema from dense random search, ranks from a plain SVD.

#![allow(dead_code)]

use calgeom::catalog::{complex_structure, make_calibration, Calibration, CalibrationKind};
use calgeom::exterior::{wedge, Form};
use calgeom::rng::{gaussian, gaussian_matrix, stream, unit_vector, Stream};
use calgeom::{OptOptions, OrientedPlane};
use nalgebra::{Complex, DMatrix, DVector};

pub fn opts(restarts: usize, seed: u64) -> OptOptions {
    OptOptions::default().with_restarts(restarts).with_seed(seed)
}

pub fn cal(kind: CalibrationKind) -> Calibration {
    make_calibration(&kind, &opts(16, 1)).unwrap()
}

pub fn dxdy() -> Calibration {
    Calibration::from_form(Form::basis(3, &[0, 1]).unwrap(), "dxdy")
}

/// The catalog used by the suite-wide identity checks.
pub fn catalog() -> Vec<Calibration> {
    [
        CalibrationKind::Kahler { m: 2 },
        CalibrationKind::Kahler { m: 3 },
        CalibrationKind::KahlerPower { m: 3, k: 2 },
        CalibrationKind::SpecialLagrangian { m: 3, theta: 0.0 },
        CalibrationKind::SpecialLagrangian { m: 3, theta: 0.9 },
        CalibrationKind::Associative,
        CalibrationKind::Coassociative,
        CalibrationKind::Cayley,
        CalibrationKind::Quaternionic { m: 2 },
        CalibrationKind::DoublePoint { n: 3 },
        CalibrationKind::TwoPlanes { lambda: 0.7 },
    ]
    .into_iter()
    .map(cal)
    .collect()
}

/// Largest value of `φ` over `samples` Haar-random planes.
pub fn random_search_max(phi: &Form, samples: usize, seed: u64) -> f64 {
    let mut s = stream(seed);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..samples {
        let q = gaussian_matrix(&mut s, phi.n(), phi.p()).qr().q();
        best = best.max(phi.eval(&q).unwrap());
    }
    best
}

/// `v ↦ φ(x, y, …, ·)`, the vector dual to a partially filled form.
pub fn fill_last(phi: &Form, cols: &[DVector<f64>]) -> DVector<f64> {
    let n = phi.n();
    DVector::from_fn(n, |k, _| {
        let mut m = DMatrix::from_columns(cols);
        m = m.insert_column(cols.len(), 0.0);
        m[(k, cols.len())] = 1.0;
        phi.eval(&m).unwrap()
    })
}

fn orthonormal_pair(s: &mut Stream, n: usize) -> (DVector<f64>, DVector<f64>) {
    let x = unit_vector(s, n);
    let mut y = unit_vector(s, n);
    y -= &x * x.dot(&y);
    (x, y.normalize())
}

/// `x, y, x×y` with the cross product read off the associative form.
pub fn associative_plane(phi: &Form, s: &mut Stream) -> OrientedPlane {
    let (x, y) = orthonormal_pair(s, 7);
    let z = fill_last(phi, &[x.clone(), y.clone()]);
    OrientedPlane::new(DMatrix::from_columns(&[x, y, z])).unwrap()
}

/// Orthogonal complement of an associative plane, oriented by `psi`.
pub fn coassociative_plane(phi: &Form, psi: &Form, s: &mut Stream) -> OrientedPlane {
    let a = associative_plane(phi, s);
    let c = calgeom::linalg::complement(a.frame());
    let pl = OrientedPlane::new(c).unwrap();
    if psi.eval(pl.frame()).unwrap() < 0.0 {
        pl.reversed()
    } else {
        pl
    }
}

/// `x, y, z` and the triple cross product read off the Cayley form.
pub fn cayley_plane(phi: &Form, s: &mut Stream) -> OrientedPlane {
    let (x, y) = orthonormal_pair(s, 8);
    let mut z = unit_vector(s, 8);
    z -= &x * x.dot(&z) + &y * y.dot(&z);
    let z = z.normalize();
    let w = fill_last(phi, &[x.clone(), y.clone(), z.clone()]);
    OrientedPlane::new(DMatrix::from_columns(&[x, y, z, w])).unwrap()
}

/// Haar-random unitary `m × m`.
pub fn random_unitary(s: &mut Stream, m: usize) -> DMatrix<Complex<f64>> {
    let g = DMatrix::from_fn(m, m, |_, _| Complex::new(gaussian(s), gaussian(s)));
    let qr = g.qr();
    let (q, r) = (qr.q(), qr.r());
    let mut q = q;
    for j in 0..m {
        let d = r[(j, j)];
        let ph = d / d.re.hypot(d.im);
        for i in 0..m {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Real frame (interleaved `x_k, y_k`) of complex column vectors.
pub fn realify(cols: &DMatrix<Complex<f64>>) -> DMatrix<f64> {
    let m = cols.nrows();
    DMatrix::from_fn(2 * m, cols.ncols(), |i, j| {
        let c = cols[(i / 2, j)];
        if i % 2 == 0 {
            c.re
        } else {
            c.im
        }
    })
}

/// `U·Rᵐ` with `det U = e^{iθ}`, a plane of phase `θ`.
pub fn special_lagrangian_plane(s: &mut Stream, m: usize, theta: f64) -> OrientedPlane {
    let mut u = random_unitary(s, m);
    let det = u.determinant();
    let fix = Complex::new(theta.cos(), theta.sin()) / det;
    for i in 0..m {
        u[(i, 0)] *= fix;
    }
    OrientedPlane::new(realify(&u)).unwrap()
}

/// `span(u, Ju)` for a random unit `u`.
pub fn complex_line(s: &mut Stream, m: usize) -> OrientedPlane {
    let u = unit_vector(s, 2 * m);
    let j = complex_structure(m);
    OrientedPlane::new(DMatrix::from_columns(&[u.clone(), &j * &u])).unwrap()
}

/// Number of singular values at most `rel` times the largest, plus the
/// column deficit, and the gap across the threshold.
pub fn nullity(a: &DMatrix<f64>, rel: f64) -> (usize, f64) {
    let sv = a.clone().svd(false, false).singular_values;
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let top = v[0];
    let kept = v.iter().filter(|&&x| x > rel * top).count();
    let gap = if kept < v.len() { v[kept - 1] / v[kept].max(1e-300) } else { f64::INFINITY };
    (a.ncols() - kept, gap)
}

/// Row `Q ↦ ⟨Q, P⟩` over the upper triangle of a symmetric matrix.
pub fn trace_row(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut row = Vec::new();
    for i in 0..n {
        for j in i..n {
            row.push(if i == j { p[(i, i)] } else { 2.0 * p[(i, j)] });
        }
    }
    row
}

pub fn stack(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

/// Complex forms as `(real, imaginary)` pairs.
pub type CForm = (Form, Form);

pub fn cwedge(a: &CForm, b: &CForm) -> CForm {
    let re = &wedge(&a.0, &b.0).unwrap() - &wedge(&a.1, &b.1).unwrap();
    let im = &wedge(&a.0, &b.1).unwrap() + &wedge(&a.1, &b.0).unwrap();
    (re, im)
}

pub fn dz(m: usize, k: usize) -> CForm {
    (Form::basis(2 * m, &[2 * k]).unwrap(), Form::basis(2 * m, &[2 * k + 1]).unwrap())
}

pub fn dzbar(m: usize, k: usize) -> CForm {
    let (re, im) = dz(m, k);
    (re, -&im)
}

fn cproduct(parts: &[CForm]) -> CForm {
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        acc = cwedge(&acc, p);
    }
    acc
}

/// `½(Δf) Re dz + 2 Re Σ f_{z̄ᵢz̄ⱼ} Z_{ij}` on Cᵐ, where `Z_{ij}` is
/// `dz₁∧…∧dz_m` with `dz_i` replaced by `dz̄_j`.
pub fn special_lagrangian_expansion(h: &DMatrix<f64>, m: usize) -> Form {
    let slots: Vec<CForm> = (0..m).map(|k| dz(m, k)).collect();
    let vol = cproduct(&slots);
    let mut out = vol.0.scale(0.5 * h.trace());
    for i in 0..m {
        for j in 0..m {
            let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
            let fre = 0.25 * (h[(xi, xj)] - h[(yi, yj)]);
            let fim = 0.25 * (h[(xi, yj)] + h[(yi, xj)]);
            let mut parts = slots.clone();
            parts[i] = dzbar(m, j);
            let z = cproduct(&parts);
            out = &out + &(&z.0.scale(2.0 * fre) - &z.1.scale(2.0 * fim));
        }
    }
    out
}
