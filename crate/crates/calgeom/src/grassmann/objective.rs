//! Smooth functions on `G(p, n)` given through an orthonormal frame.

use nalgebra::{DMatrix, DVector};

use crate::exterior::{partial_eval, two_form_matrix, Form};

/// A function of oriented planes, evaluated on orthonormal frames.
pub trait Objective {
    fn n(&self) -> usize;
    fn p(&self) -> usize;
    fn value(&self, frame: &DMatrix<f64>) -> f64;
    /// Euclidean partial derivatives; column `i` is the gradient in frame
    /// column `i`.
    fn frame_gradient(&self, frame: &DMatrix<f64>) -> DMatrix<f64>;
    /// Riemannian Hessian in cousin coordinates (slot-major), if available.
    fn cousin_hessian(&self, _frame: &DMatrix<f64>, _normal: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

/// Cousin coordinates of the Riemannian gradient: entry `i·(n−p)+k` is the
/// derivative along the first cousin replacing column `i` by normal `k`.
pub fn cousin_gradient(obj: &dyn Objective, frame: &DMatrix<f64>, normal: &DMatrix<f64>) -> DVector<f64> {
    let g = frame_cousins(&obj.frame_gradient(frame), normal);
    g
}

pub(crate) fn frame_cousins(grad: &DMatrix<f64>, normal: &DMatrix<f64>) -> DVector<f64> {
    let q = normal.ncols();
    let p = grad.ncols();
    let proj = normal.transpose() * grad;
    DVector::from_fn(p * q, |r, _| proj[(r % q, r / q)])
}

/// `ξ ↦ s · a(ξ)` for a `p`-form `a`.
#[derive(Clone, Debug)]
pub struct FormObjective {
    pub form: Form,
    pub sign: f64,
}

impl FormObjective {
    pub fn new(form: Form) -> Self {
        Self { form, sign: 1.0 }
    }

    pub fn negated(form: Form) -> Self {
        Self { form, sign: -1.0 }
    }
}

impl Objective for FormObjective {
    fn n(&self) -> usize {
        self.form.n()
    }

    fn p(&self) -> usize {
        self.form.p()
    }

    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        self.sign * self.form.eval(frame).expect("frame shape")
    }

    fn frame_gradient(&self, frame: &DMatrix<f64>) -> DMatrix<f64> {
        let n = frame.nrows();
        let p = frame.ncols();
        let mut g = DMatrix::zeros(n, p);
        for i in 0..p {
            let chi = partial_eval(&self.form, frame, &[i]).expect("frame shape");
            for k in 0..n {
                g[(k, i)] = self.sign * chi.coeffs()[k];
            }
        }
        g
    }

    fn cousin_hessian(&self, frame: &DMatrix<f64>, normal: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let p = frame.ncols();
        let q = normal.ncols();
        let v = self.value(frame);
        let mut h = DMatrix::zeros(p * q, p * q);
        for i in 0..p {
            for k in 0..q {
                h[(i * q + k, i * q + k)] = -v;
            }
            for j in i + 1..p {
                let chi = partial_eval(&self.form, frame, &[i, j]).expect("frame shape");
                let m = normal.transpose() * two_form_matrix(&chi) * normal * self.sign;
                for k in 0..q {
                    for l in 0..q {
                        h[(i * q + k, j * q + l)] = m[(k, l)];
                        h[(j * q + l, i * q + k)] = m[(k, l)];
                    }
                }
            }
        }
        Some(h)
    }
}

/// `ξ ↦ s · ⟨A, P_ξ⟩` for a symmetric matrix `A`.
#[derive(Clone, Debug)]
pub struct TraceObjective {
    pub matrix: DMatrix<f64>,
    pub sign: f64,
}

impl TraceObjective {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix, sign: 1.0 }
    }

    pub fn negated(matrix: DMatrix<f64>) -> Self {
        Self { matrix, sign: -1.0 }
    }
}

impl Objective for TraceObjective {
    fn n(&self) -> usize {
        self.matrix.nrows()
    }

    fn p(&self) -> usize {
        0
    }

    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        self.sign * (frame.transpose() * &self.matrix * frame).trace()
    }

    fn frame_gradient(&self, frame: &DMatrix<f64>) -> DMatrix<f64> {
        (&self.matrix * frame) * (2.0 * self.sign)
    }

    fn cousin_hessian(&self, frame: &DMatrix<f64>, normal: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let p = frame.ncols();
        let q = normal.ncols();
        let nan = normal.transpose() * &self.matrix * normal;
        let faf = frame.transpose() * &self.matrix * frame;
        let mut h = DMatrix::zeros(p * q, p * q);
        for i in 0..p {
            for k in 0..q {
                for l in 0..q {
                    h[(i * q + k, i * q + l)] += 2.0 * self.sign * nan[(k, l)];
                }
            }
            for j in 0..p {
                for k in 0..q {
                    h[(i * q + k, j * q + k)] -= 2.0 * self.sign * faf[(i, j)];
                }
            }
        }
        Some(h)
    }
}

/// `a(ξ) − μ (1 − φ(ξ))²`.
pub(crate) struct Penalized<'a> {
    pub obj: &'a dyn Objective,
    pub phi: &'a FormObjective,
    pub mu: f64,
}

impl Objective for Penalized<'_> {
    fn n(&self) -> usize {
        self.phi.n()
    }

    fn p(&self) -> usize {
        self.phi.p()
    }

    fn value(&self, frame: &DMatrix<f64>) -> f64 {
        let d = 1.0 - self.phi.value(frame);
        self.obj.value(frame) - self.mu * d * d
    }

    fn frame_gradient(&self, frame: &DMatrix<f64>) -> DMatrix<f64> {
        let d = 1.0 - self.phi.value(frame);
        self.obj.frame_gradient(frame) + self.phi.frame_gradient(frame) * (2.0 * self.mu * d)
    }
}
