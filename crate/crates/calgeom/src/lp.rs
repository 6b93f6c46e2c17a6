//! Small dense solvers for the cutting-plane loops: a bounded two-phase
//! simplex method and active-set non-negative least squares.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{shape_err, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

/// `maximize cᵀx` subject to row constraints and finite box bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct Lp {
    c: Vec<f64>,
    bounds: Vec<(f64, f64)>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
}

const EPS: f64 = 1e-10;

impl Lp {
    pub fn new(c: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if c.len() != bounds.len() {
            return Err(shape_err!("{} costs, {} bounds", c.len(), bounds.len()));
        }
        if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::Invalid("LP bounds must be finite with lo ≤ hi".into()));
        }
        Ok(Self { c, bounds, rows: Vec::new() })
    }

    pub fn vars(&self) -> usize {
        self.c.len()
    }

    pub fn constrain(&mut self, row: Vec<f64>, cmp: Cmp, rhs: f64) -> Result<()> {
        if row.len() != self.c.len() {
            return Err(shape_err!("row of length {} for {} variables", row.len(), self.c.len()));
        }
        self.rows.push((row, cmp, rhs));
        Ok(())
    }

    pub fn maximize(&self) -> Result<LpSolution> {
        let nv = self.c.len();
        let lo: Vec<f64> = self.bounds.iter().map(|b| b.0).collect();
        // y = x − lo ∈ [0, hi − lo]
        let mut rows: Vec<(Vec<f64>, Cmp, f64)> = Vec::new();
        for (a, cmp, b) in &self.rows {
            let shift: f64 = a.iter().zip(&lo).map(|(x, l)| x * l).sum();
            rows.push((a.clone(), *cmp, b - shift));
        }
        for (j, (l, h)) in self.bounds.iter().enumerate() {
            let mut a = vec![0.0; nv];
            a[j] = 1.0;
            rows.push((a, Cmp::Le, h - l));
        }
        for r in rows.iter_mut() {
            if r.2 < 0.0 {
                r.0.iter_mut().for_each(|x| *x = -*x);
                r.2 = -r.2;
                r.1 = match r.1 {
                    Cmp::Le => Cmp::Ge,
                    Cmp::Ge => Cmp::Le,
                    Cmp::Eq => Cmp::Eq,
                };
            }
        }
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Cmp::Le).count();
        let ncol = nv + n_slack + n_art;
        let mut t = DMatrix::<f64>::zeros(m, ncol + 1);
        let mut basis = vec![0usize; m];
        let mut s = nv;
        let mut a = nv + n_slack;
        let art_start = a;
        for (i, (row, cmp, rhs)) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                t[(i, j)] = *v;
            }
            t[(i, ncol)] = *rhs;
            match cmp {
                Cmp::Le => {
                    t[(i, s)] = 1.0;
                    basis[i] = s;
                    s += 1;
                }
                Cmp::Ge => {
                    t[(i, s)] = -1.0;
                    s += 1;
                    t[(i, a)] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
                Cmp::Eq => {
                    t[(i, a)] = 1.0;
                    basis[i] = a;
                    a += 1;
                }
            }
        }
        let scale = 1.0 + rows.iter().map(|r| r.2).fold(0.0, f64::max);
        if n_art > 0 {
            let mut cost = vec![0.0; ncol];
            for c in cost.iter_mut().skip(art_start) {
                *c = -1.0;
            }
            run(&mut t, &mut basis, &cost, ncol)?;
            let infeas: f64 = basis.iter().enumerate().filter(|(_, &b)| b >= art_start).map(|(i, _)| t[(i, ncol)]).sum();
            if infeas > 1e-9 * scale {
                return Err(Error::Infeasible);
            }
            // drive zero-level artificials out where possible
            for i in 0..m {
                if basis[i] >= art_start {
                    if let Some(j) = (0..art_start).find(|&j| t[(i, j)].abs() > 1e-9) {
                        pivot(&mut t, &mut basis, i, j);
                    }
                }
            }
        }
        let mut cost = vec![0.0; ncol];
        cost[..nv].copy_from_slice(&self.c);
        run(&mut t, &mut basis, &cost, art_start)?;
        let mut y = vec![0.0; nv];
        for (i, &b) in basis.iter().enumerate() {
            if b < nv {
                y[b] = t[(i, ncol)];
            }
        }
        let x: Vec<f64> = y.iter().zip(&lo).map(|(v, l)| v + l).collect();
        let value = x.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        Ok(LpSolution { x, value })
    }
}

fn pivot(t: &mut DMatrix<f64>, basis: &mut [usize], r: usize, c: usize) {
    let pv = t[(r, c)];
    let w = t.ncols();
    for j in 0..w {
        t[(r, j)] /= pv;
    }
    for i in 0..t.nrows() {
        if i != r {
            let f = t[(i, c)];
            if f != 0.0 {
                for j in 0..w {
                    let v = t[(r, j)];
                    t[(i, j)] -= f * v;
                }
            }
        }
    }
    basis[r] = c;
}

/// Primal simplex maximizing `cost·z` over columns `< allowed`, Dantzig's
/// rule with a switch to Bland's rule after degenerate stalls.
fn run(t: &mut DMatrix<f64>, basis: &mut [usize], cost: &[f64], allowed: usize) -> Result<()> {
    let m = t.nrows();
    let rhs = t.ncols() - 1;
    let mut degenerate = 0usize;
    for _ in 0..200_000 {
        let cb: Vec<f64> = basis.iter().map(|&b| cost[b]).collect();
        let reduced = |j: usize, t: &DMatrix<f64>| -> f64 { (0..m).map(|i| cb[i] * t[(i, j)]).sum::<f64>() - cost[j] };
        let bland = degenerate > 50;
        let mut enter = None;
        let mut best = -EPS;
        for j in 0..allowed {
            if basis.contains(&j) {
                continue;
            }
            let r = reduced(j, t);
            if r < best {
                enter = Some(j);
                if bland {
                    break;
                }
                best = r;
            }
        }
        let Some(c) = enter else { return Ok(()) };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[(i, c)];
            if a > EPS {
                let ratio = t[(i, rhs)] / a;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && basis[i] < basis[li]) {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((r, ratio)) = leave else {
            return Err(Error::Degenerate("unbounded linear program".into()));
        };
        degenerate = if ratio.abs() < 1e-14 { degenerate + 1 } else { 0 };
        pivot(t, basis, r, c);
    }
    Err(Error::Degenerate("simplex iteration limit".into()))
}

/// Active-set NNLS: `min ‖Ax − b‖` over `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(shape_err!("{} rows against a right side of length {}", a.nrows(), b.len()));
    }
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * (1.0 + a.abs().max()) * (1.0 + b.amax()) * (n.max(1) as f64);
    let solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut z = DVector::zeros(n);
        if idx.is_empty() {
            return z;
        }
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |i, k| a[(i, idx[k])]);
        let sol = crate::linalg::lstsq(&sub, b, 1e-13);
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };
    for _ in 0..(3 * n + 30) {
        let w = a.transpose() * (b - a * &x);
        let cand = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].partial_cmp(&w[j]).unwrap());
        let Some(j) = cand else { return Ok(x) };
        passive[j] = true;
        loop {
            let z = solve(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for k in 0..n {
                if passive[k] && z[k] <= 0.0 {
                    alpha = alpha.min(x[k] / (x[k] - z[k]));
                }
            }
            x = &x + (&z - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{gaussian_matrix, gaussian_vector, stream, uniform};

    #[test]
    fn textbook_lp() {
        // max 3x + 5y, x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18
        let mut lp = Lp::new(vec![3.0, 5.0], vec![(0.0, 100.0), (0.0, 100.0)]).unwrap();
        lp.constrain(vec![1.0, 0.0], Cmp::Le, 4.0).unwrap();
        lp.constrain(vec![0.0, 2.0], Cmp::Le, 12.0).unwrap();
        lp.constrain(vec![3.0, 2.0], Cmp::Le, 18.0).unwrap();
        let s = lp.maximize().unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn negative_bounds_equalities_and_infeasibility() {
        let mut lp = Lp::new(vec![1.0, -1.0], vec![(-3.0, 3.0), (-3.0, 3.0)]).unwrap();
        lp.constrain(vec![1.0, 1.0], Cmp::Eq, -1.0).unwrap();
        lp.constrain(vec![1.0, 0.0], Cmp::Ge, -2.5).unwrap();
        let s = lp.maximize().unwrap();
        // x + y = −1 with y ≥ −3 ⇒ x ≤ 2, value x − y = 2x + 1 = 5
        assert!((s.value - 5.0).abs() < 1e-9, "{s:?}");
        lp.constrain(vec![1.0, 0.0], Cmp::Ge, 2.5).unwrap();
        assert!(matches!(lp.maximize(), Err(Error::Infeasible)));
    }

    #[test]
    fn random_lps_satisfy_duality_check() {
        // optimum of max cᵀx over a box intersected with Ax ≤ b is verified by
        // comparing with a grid of feasible points in 2-D
        let mut s = stream(4);
        for _ in 0..30 {
            let c = vec![uniform(&mut s, -1.0, 1.0), uniform(&mut s, -1.0, 1.0)];
            let mut lp = Lp::new(c.clone(), vec![(-1.0, 1.0), (-1.0, 1.0)]).unwrap();
            let mut cons = Vec::new();
            for _ in 0..4 {
                let r = vec![uniform(&mut s, -1.0, 1.0), uniform(&mut s, -1.0, 1.0)];
                let rhs = uniform(&mut s, 0.1, 1.0);
                lp.constrain(r.clone(), Cmp::Le, rhs).unwrap();
                cons.push((r, rhs));
            }
            let sol = lp.maximize().unwrap();
            for (r, rhs) in &cons {
                assert!(r[0] * sol.x[0] + r[1] * sol.x[1] <= rhs + 1e-9);
            }
            let mut best = f64::NEG_INFINITY;
            let k = 400;
            for i in 0..=k {
                for j in 0..=k {
                    let x = -1.0 + 2.0 * i as f64 / k as f64;
                    let y = -1.0 + 2.0 * j as f64 / k as f64;
                    if cons.iter().all(|(r, rhs)| r[0] * x + r[1] * y <= *rhs) {
                        best = best.max(c[0] * x + c[1] * y);
                    }
                }
            }
            assert!(sol.value >= best - 1e-12 && sol.value <= best + 0.01, "{} {best}", sol.value);
        }
    }

    #[test]
    fn nnls_matches_kkt() {
        let mut s = stream(9);
        for _ in 0..50 {
            let a = gaussian_matrix(&mut s, 12, 7);
            let b = gaussian_vector(&mut s, 12);
            let x = nnls(&a, &b).unwrap();
            let w = a.transpose() * (&b - &a * &x);
            for j in 0..7 {
                assert!(x[j] >= 0.0);
                assert!(w[j] <= 1e-9);
                if x[j] > 0.0 {
                    assert!(w[j].abs() <= 1e-9);
                }
            }
        }
        let a = DMatrix::identity(3, 3);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        let x = nnls(&a, &b).unwrap();
        assert!((x - DVector::from_vec(vec![1.0, 0.0, 3.0])).amax() < 1e-14);
    }
}
