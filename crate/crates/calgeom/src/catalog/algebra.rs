//! Quaternion and octonion multiplication tables.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

/// A real normed division algebra with basis `e_0 = 1, e_1, …`; the product
/// of two basis elements is `±` a basis element.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraTable {
    dim: usize,
    /// `table[a·dim + b] = (c, s)` means `e_a e_b = s e_c`.
    table: Vec<(usize, f64)>,
}

impl AlgebraTable {
    /// Quaternions with basis `(1, i, j, k)`, `ij = k`.
    pub fn quaternions() -> Self {
        // rows: left factor, columns: right factor
        let t: [[(usize, f64); 4]; 4] = [
            [(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)],
            [(1, 1.0), (0, -1.0), (3, 1.0), (2, -1.0)],
            [(2, 1.0), (3, -1.0), (0, -1.0), (1, 1.0)],
            [(3, 1.0), (2, 1.0), (1, -1.0), (0, -1.0)],
        ];
        Self { dim: 4, table: t.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    /// Octonions by doubling the quaternions:
    /// `(a + bε)(c + dε) = (ac − d̄b) + (da + bc̄)ε`,
    /// basis `(1, i, j, k, ε, iε, jε, kε)`.
    pub fn octonions() -> Self {
        Self::quaternions().double()
    }

    /// Cayley–Dickson doubling with the rule above.
    pub fn double(&self) -> Self {
        let h = self.dim;
        let dim = 2 * h;
        let mut table = Vec::with_capacity(dim * dim);
        for a in 0..dim {
            for b in 0..dim {
                let x = self.unit_doubled(a);
                let y = self.unit_doubled(b);
                let z = self.mul_doubled(&x, &y);
                let (c, s) = z
                    .iter()
                    .enumerate()
                    .find(|(_, v)| **v != 0.0)
                    .map(|(c, v)| (c, *v))
                    .expect("basis products are units");
                table.push((c, s));
            }
        }
        Self { dim, table }
    }

    fn unit_doubled(&self, a: usize) -> Vec<f64> {
        let mut v = vec![0.0; 2 * self.dim];
        v[a] = 1.0;
        v
    }

    fn mul_doubled(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let h = self.dim;
        let (a, b) = x.split_at(h);
        let (c, d) = y.split_at(h);
        let ac = self.mul(a, c);
        let dbar_b = self.mul(&self.conj(d), b);
        let da = self.mul(d, a);
        let b_cbar = self.mul(b, &self.conj(c));
        let mut out = vec![0.0; 2 * h];
        for t in 0..h {
            out[t] = ac[t] - dbar_b[t];
            out[h + t] = da[t] + b_cbar[t];
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `e_a e_b = s e_c` as `(c, s)`.
    pub fn unit_product(&self, a: usize, b: usize) -> (usize, f64) {
        self.table[a * self.dim + b]
    }

    pub fn mul(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (a, xa) in x.iter().enumerate() {
            if *xa == 0.0 {
                continue;
            }
            for (b, yb) in y.iter().enumerate() {
                if *yb == 0.0 {
                    continue;
                }
                let (c, s) = self.unit_product(a, b);
                out[c] += s * xa * yb;
            }
        }
        out
    }

    pub fn conj(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for v in out.iter_mut().skip(1) {
            *v = -*v;
        }
        out
    }

    pub fn unit(&self, a: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        v[a] = 1.0;
        v
    }

    /// Matrix of `x ↦ x e_u`.
    pub fn right_mul_matrix(&self, u: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for a in 0..self.dim {
            let (c, s) = self.unit_product(a, u);
            m[(c, a)] = s;
        }
        m
    }

    /// Triple cross product `x × y × z = ½(x(ȳz) − z(ȳx))`.
    pub fn triple_cross(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let yb = self.conj(y);
        let l = self.mul(x, &self.mul(&yb, z));
        let r = self.mul(z, &self.mul(&yb, x));
        l.iter().zip(&r).map(|(a, b)| 0.5 * (a - b)).collect()
    }
}
