//! Dense multilinear algebra over Rⁿ with the orthonormal basis covectors
//! `e^I`, `I` a lexicographic multi-index.
//!
//! Conventions:
//! * interior products contract the first slot;
//! * `*` uses the orientation `e1∧…∧en`, so `a ∧ *b = ⟨a,b⟩ vol`;
//! * `D_B` acts on 1-forms (coefficient vectors) by `B` and extends as a
//!   derivation, and `λ_φ(A) = D_{Aᵀ}φ`, so `⟨λ_φ(A), ξ⟩ = ⟨φ, D_A ξ⟩`.

mod index;

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

pub use index::{binomial, subsets, MultiIndex, MAX_N};
pub(crate) use index::{check_shape, rank_raw, sort_with_sign};

use crate::error::{shape_err, Error, Result};

/// Endomorphisms of Rⁿ in the standard basis.
pub type EndoMatrix = DMatrix<f64>;

macro_rules! graded {
    ($name:ident) => {
        #[derive(Clone, Debug, PartialEq)]
        pub struct $name {
            n: usize,
            p: usize,
            coeffs: Vec<f64>,
        }

        impl $name {
            pub fn zeros(n: usize, p: usize) -> Result<Self> {
                check_shape(n, p)?;
                Ok(Self { n, p, coeffs: vec![0.0; binomial(n, p)] })
            }

            pub fn from_coeffs(n: usize, p: usize, coeffs: Vec<f64>) -> Result<Self> {
                check_shape(n, p)?;
                if coeffs.len() != binomial(n, p) {
                    return Err(shape_err!(
                        "expected {} coefficients for (n, p) = ({n}, {p}), got {}",
                        binomial(n, p),
                        coeffs.len()
                    ));
                }
                Ok(Self { n, p, coeffs })
            }

            /// Basis element for an index list in any order; the permutation
            /// sign is absorbed. Repeated indices give zero.
            pub fn basis(n: usize, indices: &[usize]) -> Result<Self> {
                let mut out = Self::zeros(n, indices.len())?;
                let mut raw: Vec<u8> = Vec::with_capacity(indices.len());
                for &i in indices {
                    if i >= n {
                        return Err(shape_err!("index {i} out of range for n = {n}"));
                    }
                    raw.push(i as u8);
                }
                if let Some(s) = sort_with_sign(&mut raw) {
                    out.coeffs[rank_raw(&raw, n)] = s;
                }
                Ok(out)
            }

            /// Sum of `c · e^{idx}` over strictly increasing index tuples.
            pub fn from_terms(n: usize, p: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
                let mut out = Self::zeros(n, p)?;
                for (idx, c) in terms {
                    if idx.len() != p {
                        return Err(shape_err!("term {idx:?} has degree {} not {p}", idx.len()));
                    }
                    let m = MultiIndex::new(idx, n)?;
                    out.coeffs[m.rank(n)] += c;
                }
                Ok(out)
            }

            pub fn n(&self) -> usize {
                self.n
            }

            pub fn p(&self) -> usize {
                self.p
            }

            pub fn coeffs(&self) -> &[f64] {
                &self.coeffs
            }

            pub fn coeffs_mut(&mut self) -> &mut [f64] {
                &mut self.coeffs
            }

            pub fn into_coeffs(self) -> Vec<f64> {
                self.coeffs
            }

            /// Coefficient on a strictly increasing index tuple.
            pub fn get(&self, idx: &[usize]) -> Result<f64> {
                if idx.len() != self.p {
                    return Err(shape_err!("index {idx:?} has wrong degree"));
                }
                Ok(self.coeffs[MultiIndex::new(idx, self.n)?.rank(self.n)])
            }

            /// Nonzero terms in lexicographic order.
            pub fn terms(&self) -> Vec<(MultiIndex, f64)> {
                subsets(self.n, self.p)
                    .into_iter()
                    .zip(self.coeffs.iter())
                    .filter(|(_, c)| **c != 0.0)
                    .map(|(m, c)| (m, *c))
                    .collect()
            }

            pub fn dot(&self, other: &Self) -> f64 {
                debug_assert!(self.n == other.n && self.p == other.p);
                self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum()
            }

            pub fn norm(&self) -> f64 {
                self.dot(self).sqrt()
            }

            pub fn max_abs(&self) -> f64 {
                self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
            }

            pub fn scale(&self, s: f64) -> Self {
                Self { n: self.n, p: self.p, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
            }

            pub fn same_shape(&self, other: &Self) -> Result<()> {
                if self.n != other.n || self.p != other.p {
                    return Err(shape_err!(
                        "(n, p) = ({}, {}) vs ({}, {})",
                        self.n,
                        self.p,
                        other.n,
                        other.p
                    ));
                }
                Ok(())
            }

            pub fn to_dvector(&self) -> DVector<f64> {
                DVector::from_column_slice(&self.coeffs)
            }
        }

        impl Add for &$name {
            type Output = $name;
            fn add(self, rhs: &$name) -> $name {
                assert!(self.n == rhs.n && self.p == rhs.p, "shape mismatch in addition");
                let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
                $name { n: self.n, p: self.p, coeffs }
            }
        }

        impl Sub for &$name {
            type Output = $name;
            fn sub(self, rhs: &$name) -> $name {
                assert!(self.n == rhs.n && self.p == rhs.p, "shape mismatch in subtraction");
                let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
                $name { n: self.n, p: self.p, coeffs }
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                &self + &rhs
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                &self - &rhs
            }
        }

        impl AddAssign<&$name> for $name {
            fn add_assign(&mut self, rhs: &$name) {
                assert!(self.n == rhs.n && self.p == rhs.p, "shape mismatch in addition");
                for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                    *a += b;
                }
            }
        }

        impl SubAssign<&$name> for $name {
            fn sub_assign(&mut self, rhs: &$name) {
                assert!(self.n == rhs.n && self.p == rhs.p, "shape mismatch in subtraction");
                for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
                    *a -= b;
                }
            }
        }

        impl Mul<f64> for &$name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                self.scale(s)
            }
        }

        impl Mul<f64> for $name {
            type Output = $name;
            fn mul(self, s: f64) -> $name {
                self.scale(s)
            }
        }

        impl Neg for &$name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scale(-1.0)
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                self.scale(-1.0)
            }
        }
    };
}

graded!(Form);
graded!(Multivector);

impl Form {
    /// The 1-form `Σ vᵢ e^i`.
    pub fn from_covector(v: &[f64]) -> Result<Self> {
        Self::from_coeffs(v.len(), 1, v.to_vec())
    }

    /// Metric dual `ξ ↦ ξ♭`.
    pub fn from_multivector(x: &Multivector) -> Self {
        Self { n: x.n, p: x.p, coeffs: x.coeffs.clone() }
    }

    pub fn to_multivector(&self) -> Multivector {
        Multivector { n: self.n, p: self.p, coeffs: self.coeffs.clone() }
    }

    /// The top-degree form `e^1∧…∧e^n`.
    pub fn volume(n: usize) -> Result<Self> {
        Self::from_coeffs(n, n, vec![1.0])
    }

    /// Evaluation `a(v₁, …, v_p)` on the columns of `vectors`.
    pub fn eval(&self, vectors: &DMatrix<f64>) -> Result<f64> {
        if vectors.nrows() != self.n || vectors.ncols() != self.p {
            return Err(shape_err!(
                "evaluation of a ({}, {}) form on a {}x{} frame",
                self.n,
                self.p,
                vectors.nrows(),
                vectors.ncols()
            ));
        }
        Ok(dot(&self.coeffs, &minors(vectors)))
    }
}

impl Multivector {
    pub fn from_vector(v: &[f64]) -> Result<Self> {
        Self::from_coeffs(v.len(), 1, v.to_vec())
    }

    pub fn to_form(&self) -> Form {
        Form::from_multivector(self)
    }

    /// `v₁∧…∧v_p` for arbitrary columns (no orthonormality required).
    pub fn from_vectors(vectors: &DMatrix<f64>) -> Result<Self> {
        check_shape(vectors.nrows(), vectors.ncols())?;
        Ok(Self { n: vectors.nrows(), p: vectors.ncols(), coeffs: minors(vectors) })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn mask_of(m: &MultiIndex) -> u16 {
    m.as_slice().iter().fold(0u16, |acc, &i| acc | (1 << i))
}

fn raw_of_mask(mask: u16) -> ([u8; MAX_N], usize) {
    let mut raw = [0u8; MAX_N];
    let mut len = 0;
    for i in 0..16u8 {
        if mask & (1 << i) != 0 {
            raw[len] = i;
            len += 1;
        }
    }
    (raw, len)
}

/// All `p×p` minors of an `n×p` matrix, in lexicographic row-subset order.
pub(crate) fn minors(f: &DMatrix<f64>) -> Vec<f64> {
    let n = f.nrows();
    let p = f.ncols();
    let mut prev: Vec<f64> = vec![1.0];
    for k in 1..=p {
        let col = k - 1;
        let subs = subsets(n, k);
        let mut cur = Vec::with_capacity(subs.len());
        let mut buf = [0u8; MAX_N];
        for s in &subs {
            let sl = s.as_slice();
            let mut acc = 0.0;
            for r in 0..k {
                let x = f[(sl[r] as usize, col)];
                if x == 0.0 {
                    continue;
                }
                let mut len = 0;
                for (t, &v) in sl.iter().enumerate() {
                    if t != r {
                        buf[len] = v;
                        len += 1;
                    }
                }
                let sub = prev[rank_raw(&buf[..len], n)];
                let sign = if (r + k - 1) % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * x * sub;
            }
            cur.push(acc);
        }
        prev = cur;
    }
    prev
}

/// Exterior product.
pub fn wedge(a: &Form, b: &Form) -> Result<Form> {
    if a.n != b.n {
        return Err(shape_err!("wedge of forms on R^{} and R^{}", a.n, b.n));
    }
    let n = a.n;
    if a.p + b.p > n {
        return Err(Error::DegreeOverflow { n, p: a.p, q: b.p });
    }
    let mut out = Form::zeros(n, a.p + b.p)?;
    let sa = subsets(n, a.p);
    let sb = subsets(n, b.p);
    for (ia, ca) in sa.iter().zip(&a.coeffs) {
        if *ca == 0.0 {
            continue;
        }
        let ma = mask_of(ia);
        for (ib, cb) in sb.iter().zip(&b.coeffs) {
            if *cb == 0.0 {
                continue;
            }
            let mb = mask_of(ib);
            if ma & mb != 0 {
                continue;
            }
            // inversions: pairs (i in a, j in b) with i > j
            let mut inv = 0u32;
            for &j in ib.as_slice() {
                inv += (ma >> (j + 1)).count_ones();
            }
            let sign = if inv % 2 == 0 { 1.0 } else { -1.0 };
            let (raw, len) = raw_of_mask(ma | mb);
            out.coeffs[rank_raw(&raw[..len], n)] += sign * ca * cb;
        }
    }
    Ok(out)
}

/// Exterior product of multivectors, same rule as [`wedge`].
pub fn wedge_mv(a: &Multivector, b: &Multivector) -> Result<Multivector> {
    Ok(wedge(&a.to_form(), &b.to_form())?.to_multivector())
}

fn contract(v: &[f64], n: usize, p: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
    if v.len() != n {
        return Err(shape_err!("vector of length {} against n = {n}", v.len()));
    }
    if p == 0 {
        return Err(shape_err!("interior product with a degree-0 element"));
    }
    let mut out = vec![0.0; binomial(n, p - 1)];
    let mut buf = [0u8; MAX_N];
    for (m, c) in subsets(n, p).iter().zip(coeffs) {
        if *c == 0.0 {
            continue;
        }
        let sl = m.as_slice();
        for s in 0..p {
            let vi = v[sl[s] as usize];
            if vi == 0.0 {
                continue;
            }
            let mut len = 0;
            for (t, &x) in sl.iter().enumerate() {
                if t != s {
                    buf[len] = x;
                    len += 1;
                }
            }
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            out[rank_raw(&buf[..len], n)] += sign * vi * c;
        }
    }
    Ok(out)
}

/// Interior product `v ⌐ a`, contracting the first slot.
pub fn interior(v: &[f64], a: &Form) -> Result<Form> {
    let coeffs = contract(v, a.n, a.p, &a.coeffs)?;
    Ok(Form { n: a.n, p: a.p - 1, coeffs })
}

/// Metric contraction `v ⌐ ξ` of a multivector.
pub fn interior_mv(v: &[f64], x: &Multivector) -> Result<Multivector> {
    let coeffs = contract(v, x.n, x.p, &x.coeffs)?;
    Ok(Multivector { n: x.n, p: x.p - 1, coeffs })
}

/// Hodge star for the orientation `e1∧…∧en`.
pub fn hodge_star(a: &Form) -> Form {
    let n = a.n;
    let mut out = Form { n, p: n - a.p, coeffs: vec![0.0; binomial(n, n - a.p)] };
    for (m, c) in subsets(n, a.p).iter().zip(&a.coeffs) {
        if *c == 0.0 {
            continue;
        }
        let comp = m.complement(n);
        let mut inv = 0u32;
        for &i in m.as_slice() {
            for &j in comp.as_slice() {
                if i > j {
                    inv += 1;
                }
            }
        }
        let sign = if inv % 2 == 0 { 1.0 } else { -1.0 };
        out.coeffs[comp.rank(n)] += sign * c;
    }
    out
}

fn derive(b: &DMatrix<f64>, n: usize, p: usize, coeffs: &[f64]) -> Result<Vec<f64>> {
    if b.nrows() != n || b.ncols() != n {
        return Err(shape_err!("{}x{} matrix acting on R^{n}", b.nrows(), b.ncols()));
    }
    let mut out = vec![0.0; coeffs.len()];
    let mut buf = [0u8; MAX_N];
    for (m, c) in subsets(n, p).iter().zip(coeffs) {
        if *c == 0.0 {
            continue;
        }
        let sl = m.as_slice();
        for s in 0..p {
            let i = sl[s] as usize;
            for k in 0..n {
                let bk = b[(k, i)];
                if bk == 0.0 || (k != i && m.contains(k)) {
                    continue;
                }
                buf[..p].copy_from_slice(sl);
                buf[s] = k as u8;
                let sign = sort_with_sign(&mut buf[..p]).unwrap_or(0.0);
                out[rank_raw(&buf[..p], n)] += sign * bk * c;
            }
        }
    }
    Ok(out)
}

/// Derivation extension `D_B` of `B` acting on 1-forms as a matrix on
/// coefficient vectors.
pub fn derivation_extend(b: &EndoMatrix, a: &Form) -> Result<Form> {
    let coeffs = derive(b, a.n, a.p, &a.coeffs)?;
    Ok(Form { n: a.n, p: a.p, coeffs })
}

/// Derivation extension `D_A ξ = Σ v₁∧…∧Av_s∧…∧v_p` on multivectors.
pub fn derivation_extend_mv(a: &EndoMatrix, x: &Multivector) -> Result<Multivector> {
    let coeffs = derive(a, x.n, x.p, &x.coeffs)?;
    Ok(Multivector { n: x.n, p: x.p, coeffs })
}

/// `λ_φ(A) = D_{Aᵀ}φ`.
pub fn lambda_phi(a: &EndoMatrix, phi: &Form) -> Result<Form> {
    if phi.p == 0 {
        return Err(shape_err!("λ_φ needs a form of positive degree"));
    }
    derivation_extend(&a.transpose(), phi)
}

/// Adjoint of `λ_φ` for `⟨A, B⟩ = tr ABᵀ`.
pub fn lambda_phi_adjoint(a: &Form, phi: &Form) -> Result<EndoMatrix> {
    a.same_shape(phi)?;
    let n = phi.n;
    let p = phi.p;
    let mut out = DMatrix::zeros(n, n);
    let mut buf = [0u8; MAX_N];
    for (m, c) in subsets(n, p).iter().zip(&phi.coeffs) {
        if *c == 0.0 {
            continue;
        }
        let sl = m.as_slice();
        for s in 0..p {
            let k = sl[s] as usize;
            for l in 0..n {
                if l != k && m.contains(l) {
                    continue;
                }
                buf[..p].copy_from_slice(sl);
                buf[s] = l as u8;
                let sign = sort_with_sign(&mut buf[..p]).unwrap_or(0.0);
                out[(k, l)] += sign * c * a.coeffs[rank_raw(&buf[..p], n)];
            }
        }
    }
    Ok(out)
}

/// Maximum entry of `|FᵀF − I|`.
pub fn orthonormality_defect(frame: &DMatrix<f64>) -> f64 {
    let g = frame.transpose() * frame;
    let mut d: f64 = 0.0;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let t = if i == j { 1.0 } else { 0.0 };
            d = d.max((g[(i, j)] - t).abs());
        }
    }
    d
}

/// Plücker vector (all `p×p` minors) of an orthonormal frame.
pub fn plucker(frame: &DMatrix<f64>) -> Result<Multivector> {
    let d = orthonormality_defect(frame);
    if !(d <= 1e-10) {
        return Err(Error::NotOrthonormal(d));
    }
    Multivector::from_vectors(frame)
}

/// Dual pairing `a(x)`.
pub fn pair(a: &Form, x: &Multivector) -> Result<f64> {
    if a.n != x.n || a.p != x.p {
        return Err(shape_err!("pairing a ({}, {}) form with a ({}, {}) multivector", a.n, a.p, x.n, x.p));
    }
    Ok(dot(&a.coeffs, &x.coeffs))
}

/// The endomorphism `v ↦ ⟨a, v⟩ b`, i.e. the matrix `b aᵀ`.
pub fn rank_one(a: &[f64], b: &[f64]) -> EndoMatrix {
    DMatrix::from_fn(b.len(), a.len(), |i, j| b[i] * a[j])
}

/// Orthogonal projection onto the column span of an orthonormal frame.
pub fn projection(frame: &DMatrix<f64>) -> EndoMatrix {
    frame * frame.transpose()
}

/// Symmetric part `(A + Aᵀ)/2`.
pub fn sym_part(a: &EndoMatrix) -> EndoMatrix {
    (a + a.transpose()) * 0.5
}

/// Skew part `(A − Aᵀ)/2`.
pub fn skew_part(a: &EndoMatrix) -> EndoMatrix {
    (a - a.transpose()) * 0.5
}

/// Frobenius inner product `tr ABᵀ`.
pub fn frobenius(a: &EndoMatrix, b: &EndoMatrix) -> f64 {
    a.component_mul(b).sum()
}

/// Pullback of `a` to the subspace spanned by the columns of `basis`
/// (`n×m`), as a form on Rᵐ.
pub fn pullback(a: &Form, basis: &DMatrix<f64>) -> Result<Form> {
    if basis.nrows() != a.n {
        return Err(shape_err!("basis has {} rows, form lives on R^{}", basis.nrows(), a.n));
    }
    let m = basis.ncols();
    check_shape(m, a.p)?;
    let mut out = Form::zeros(m, a.p)?;
    for (j, sub) in subsets(m, a.p).iter().enumerate() {
        let cols: Vec<usize> = sub.to_vec();
        let f = basis.select_columns(cols.iter());
        out.coeffs[j] = dot(&a.coeffs, &minors(&f));
    }
    Ok(out)
}

/// Partial evaluation: the form `χ` of degree `open.len()` with
/// `χ(x₁, …, x_k) = a(F)` after the columns listed in `open` (increasing)
/// are replaced by `x₁, …, x_k`.
pub fn partial_eval(a: &Form, frame: &DMatrix<f64>, open: &[usize]) -> Result<Form> {
    let p = frame.ncols();
    if p != a.p || frame.nrows() != a.n {
        return Err(shape_err!("partial evaluation shape mismatch"));
    }
    let mut chi = a.clone();
    let mut inv = 0usize;
    for c in 0..p {
        if open.contains(&c) {
            continue;
        }
        inv += open.iter().filter(|&&o| o < c).count();
        let col: Vec<f64> = frame.column(c).iter().copied().collect();
        chi = interior(&col, &chi)?;
    }
    if inv % 2 == 1 {
        chi = -chi;
    }
    Ok(chi)
}

/// The 2-form `β` as an antisymmetric matrix, `β(x, y) = xᵀ M y`.
pub fn two_form_matrix(b: &Form) -> DMatrix<f64> {
    let n = b.n;
    let mut m = DMatrix::zeros(n, n);
    for (s, c) in subsets(n, 2).iter().zip(&b.coeffs) {
        let i = s.as_slice()[0] as usize;
        let j = s.as_slice()[1] as usize;
        m[(i, j)] += c;
        m[(j, i)] -= c;
    }
    m
}
