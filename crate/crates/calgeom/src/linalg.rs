//! Dense helpers on top of nalgebra: orthonormalization, complements,
//! thresholded spans and principal angles.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

/// Q factor of a full-column-rank matrix, with the sign of each column fixed
/// so that R has a positive diagonal (preserves orientation).
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            for i in 0..q.nrows() {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal frame.
pub fn complement(frame: &DMatrix<f64>) -> DMatrix<f64> {
    let n = frame.nrows();
    let p = frame.ncols();
    if p == n {
        return DMatrix::zeros(n, 0);
    }
    let proj = DMatrix::identity(n, n) - frame * frame.transpose();
    let eig = proj.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());
    let cols: Vec<DVector<f64>> = order[..n - p].iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();
    let raw = DMatrix::from_columns(&cols);
    orthonormalize(&raw)
}

/// Result of a thresholded rank decision.
#[derive(Clone, Debug, PartialEq)]
pub struct Span {
    /// Orthonormal basis of the retained directions (columns).
    pub basis: DMatrix<f64>,
    /// Orthonormal basis of the discarded directions (columns).
    pub null: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    /// Ratio of the smallest kept to the largest dropped singular value
    /// (infinite when nothing is dropped or nothing is kept).
    pub rank_gap: f64,
}

impl Span {
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }
}

/// Splits Rᵐ into the span of the rows of `a` (`k×m`) and its null space,
/// counting singular values below `rel · σ_max` as zero.
pub fn row_span(a: &DMatrix<f64>, rel: f64) -> Span {
    let m = a.ncols();
    let padded = if a.nrows() < m {
        let mut z = DMatrix::zeros(m, m);
        z.view_mut((0, 0), (a.nrows(), m)).copy_from(a);
        z
    } else {
        a.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].partial_cmp(&svd.singular_values[x]).unwrap());
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let thr = rel * smax;
    let rank = if smax == 0.0 { 0 } else { sv.iter().filter(|&&s| s > thr).count() };
    let kept: Vec<DVector<f64>> = order[..rank].iter().map(|&k| vt.row(k).transpose()).collect();
    let dropped: Vec<DVector<f64>> = order[rank..].iter().map(|&k| vt.row(k).transpose()).collect();
    let rank_gap = if rank == 0 || rank == sv.len() {
        f64::INFINITY
    } else if sv[rank] == 0.0 {
        f64::INFINITY
    } else {
        sv[rank - 1] / sv[rank]
    };
    let basis = if kept.is_empty() { DMatrix::zeros(m, 0) } else { DMatrix::from_columns(&kept) };
    let null = if dropped.is_empty() { DMatrix::zeros(m, 0) } else { DMatrix::from_columns(&dropped) };
    Span { basis, null, singular_values: sv, rank_gap }
}

/// Column span of `a` (`m×k`) with the same thresholding rule.
pub fn column_span(a: &DMatrix<f64>, rel: f64) -> Span {
    row_span(&a.transpose(), rel)
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let m = a.transpose() * b;
    let sv = m.svd(false, false).singular_values;
    let mut out: Vec<f64> = sv.iter().map(|s| s.clamp(-1.0, 1.0).acos()).collect();
    out.sort_by(|x, y| x.partial_cmp(y).unwrap());
    out
}

/// Largest principal angle between two subspaces of equal dimension; π/2
/// when the dimensions differ.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return core::f64::consts::FRAC_PI_2;
    }
    principal_angles(a, b).last().copied().unwrap_or(0.0)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let s = (m + m.transpose()) * 0.5;
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let cols: Vec<DVector<f64>> = order.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect();
    (vals, DMatrix::from_columns(&cols))
}

/// Least-squares solution of `a x ≈ b` via the pseudo-inverse with relative
/// singular-value cutoff `rel`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, s| m.max(*s));
    let eps = (rel * smax).max(f64::MIN_POSITIVE);
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Orthonormal frame as a row-major nested list.
pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}
