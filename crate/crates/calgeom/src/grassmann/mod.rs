//! Oriented Grassmannians `G(p, n)`: planes, first cousins, comass, the
//! calibrated set `G(φ)`, constrained margins over `G(φ)` and critical
//! planes of `φ|_G`.

pub(crate) mod ascent;
mod constrained;
mod objective;

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;

pub use ascent::{calibrated_planes, comass, critical_planes, distinct_planes, draw_planes, maximize, polish_on_level};
pub use constrained::{form_margin, trace_margin, Sense, Subspace};
pub use objective::{FormObjective, Objective, TraceObjective};

use crate::error::{Error, Result};
use crate::exterior::{self, check_shape, Multivector};
use crate::linalg;
use crate::rng;

/// An oriented `p`-plane in Rⁿ: an orthonormal frame and its Plücker vector.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedPlane {
    frame: DMatrix<f64>,
    plucker: Multivector,
}

impl OrientedPlane {
    /// Validates orthonormality (defect ≤ 1e−10).
    pub fn new(frame: DMatrix<f64>) -> Result<Self> {
        let plucker = exterior::plucker(&frame)?;
        Ok(Self { frame, plucker })
    }

    /// Orthonormalizes the columns first (orientation preserved).
    pub fn from_spanning(m: &DMatrix<f64>) -> Result<Self> {
        check_shape(m.nrows(), m.ncols())?;
        let q = linalg::orthonormalize(m);
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::Degenerate("columns are not independent".into()));
        }
        Self::new(q)
    }

    /// Coordinate plane `e_{i₁}∧…∧e_{i_p}`.
    pub fn coordinate(n: usize, indices: &[usize]) -> Result<Self> {
        let mut f = DMatrix::zeros(n, indices.len());
        for (c, &i) in indices.iter().enumerate() {
            if i >= n {
                return Err(Error::Invalid(alloc::format!("index {i} out of range")));
            }
            f[(i, c)] = 1.0;
        }
        Self::new(f)
    }

    pub fn n(&self) -> usize {
        self.frame.nrows()
    }

    pub fn p(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn plucker(&self) -> &Multivector {
        &self.plucker
    }

    /// Orthogonal projection `P_ξ` onto the span.
    pub fn projection(&self) -> DMatrix<f64> {
        exterior::projection(&self.frame)
    }

    /// The same span with the opposite orientation.
    pub fn reversed(&self) -> Self {
        let mut f = self.frame.clone();
        for i in 0..f.nrows() {
            f[(i, 0)] = -f[(i, 0)];
        }
        Self { plucker: -&self.plucker, frame: f }
    }

    /// `tr_ξ A = ⟨A, P_ξ⟩`.
    pub fn trace_of(&self, a: &DMatrix<f64>) -> f64 {
        (self.frame.transpose() * a * &self.frame).trace()
    }

    /// Largest principal angle between the spans, ignoring orientation.
    pub fn span_distance(&self, other: &Self) -> f64 {
        linalg::subspace_distance(&self.frame, &other.frame)
    }

    /// Largest principal angle if the orientations agree, π otherwise.
    pub fn distance(&self, other: &Self) -> f64 {
        if self.n() != other.n() || self.p() != other.p() {
            return core::f64::consts::PI;
        }
        if self.plucker.dot(&other.plucker) <= 0.0 {
            return core::f64::consts::PI;
        }
        self.span_distance(other)
    }

    /// Distance from `v` to the span.
    pub fn distance_to_vector(&self, v: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(v);
        let proj = &self.frame * (self.frame.transpose() * &v);
        (v - proj).norm()
    }

    /// Maps a plane in a subspace (given by an orthonormal `n×m` basis) into Rⁿ.
    pub fn embed(&self, basis: &DMatrix<f64>) -> Result<Self> {
        Self::new(basis * &self.frame)
    }
}

/// Uniform random plane: orthonormalized standard Gaussian `n×p` matrix.
pub fn random_plane(n: usize, p: usize, seed: u64) -> Result<OrientedPlane> {
    if p == 0 || p > n {
        return Err(Error::Capacity { n, p });
    }
    check_shape(n, p)?;
    let mut s = rng::stream(seed);
    random_plane_from(&mut s, n, p)
}

pub(crate) fn random_plane_from(s: &mut rng::Stream, n: usize, p: usize) -> Result<OrientedPlane> {
    loop {
        let g = rng::gaussian_matrix(s, n, p);
        if let Ok(pl) = OrientedPlane::from_spanning(&g) {
            return Ok(pl);
        }
    }
}

/// The first cousins `b∧(a⌐ξ)` of a plane for an orthonormal frame `a` of
/// `span ξ` and an orthonormal frame `b` of its complement.
#[derive(Clone, Debug, PartialEq)]
pub struct CousinBasis {
    pub plane: OrientedPlane,
    /// Ordered slot-major: index `i·(n−p) + k` replaces frame column `i` by
    /// normal vector `k`.
    pub directions: Vec<Multivector>,
    pub normal: DMatrix<f64>,
}

pub fn first_cousin_basis(xi: &OrientedPlane) -> CousinBasis {
    let normal = linalg::complement(xi.frame());
    let mut directions = Vec::with_capacity(xi.p() * normal.ncols());
    for i in 0..xi.p() {
        for k in 0..normal.ncols() {
            let mut f = xi.frame().clone();
            f.set_column(i, &normal.column(k));
            directions.push(Multivector::from_vectors(&f).expect("shape checked"));
        }
    }
    CousinBasis { plane: xi.clone(), directions, normal }
}

/// Optimizer settings shared by every Grassmannian search.
#[derive(Clone, Debug, PartialEq)]
pub struct OptOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Cousin-gradient norm declaring stationarity.
    pub tol_stationary: f64,
    /// `φ(ξ) ≥ 1 − tol_plane` defines a calibrated plane.
    pub tol_plane: f64,
    pub max_iter: usize,
    /// Argplanes closer than this (largest principal angle) are merged.
    pub cluster_radius: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self { restarts: 64, seed: 0, tol_stationary: 1e-9, tol_plane: 1e-6, max_iter: 2000, cluster_radius: 1e-3 }
    }
}

impl OptOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// Outcome of a multi-start search.
#[derive(Clone, Debug, PartialEq)]
pub struct OptReport {
    pub value: f64,
    pub argplanes: Vec<OrientedPlane>,
    pub restarts: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub seed: u64,
    /// Short description of the method, recorded for reproducibility.
    pub method: String,
}

/// One restart's result.
#[derive(Clone, Debug)]
pub(crate) struct Candidate {
    pub plane: OrientedPlane,
    pub value: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

/// Sorts by value (descending), ties by lexicographic frame entries.
pub(crate) fn sort_candidates(c: &mut [Candidate]) {
    c.sort_by(|a, b| {
        b.value.partial_cmp(&a.value).unwrap_or(core::cmp::Ordering::Equal).then_with(|| {
            for (x, y) in a.plane.frame().iter().zip(b.plane.frame().iter()) {
                match x.partial_cmp(y) {
                    Some(core::cmp::Ordering::Equal) | None => continue,
                    Some(o) => return o,
                }
            }
            core::cmp::Ordering::Equal
        })
    });
}

/// Greedy clustering by oriented principal-angle distance.
pub(crate) fn cluster(planes: impl IntoIterator<Item = OrientedPlane>, radius: f64) -> Vec<OrientedPlane> {
    let mut kept: Vec<OrientedPlane> = Vec::new();
    for p in planes {
        if kept.iter().all(|k| k.distance(&p) > radius) {
            kept.push(p);
        }
    }
    kept
}

/// Builds a report from restart candidates maximizing the objective.
pub(crate) fn report(mut cands: Vec<Candidate>, opts: &OptOptions, method: &str, sign: f64) -> OptReport {
    sort_candidates(&mut cands);
    let best = cands.first().cloned();
    match best {
        None => OptReport {
            value: f64::NAN,
            argplanes: Vec::new(),
            restarts: opts.restarts,
            converged: false,
            gradient_norm: f64::INFINITY,
            seed: opts.seed,
            method: method.into(),
        },
        Some(b) => {
            let near = 1e-8 * (1.0 + b.value.abs());
            let argplanes = cluster(
                cands.iter().take_while(|c| c.value >= b.value - near).map(|c| c.plane.clone()),
                opts.cluster_radius,
            );
            OptReport {
                value: sign * b.value,
                argplanes,
                restarts: opts.restarts,
                converged: b.converged,
                gradient_norm: b.gradient_norm,
                seed: opts.seed,
                method: method.into(),
            }
        }
    }
}

#[cfg(test)]
mod tests;
