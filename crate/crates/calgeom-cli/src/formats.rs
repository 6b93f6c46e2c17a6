//! JSON shapes for forms, calibrations, planes, jets and surfaces.
//!
//! Coefficients are keyed by zero-based increasing index tuples in
//! lexicographic order; matrices are row-major nested arrays. Floats are
//! written in shortest round-trip decimal form, so a save/load cycle
//! reproduces every coefficient bit for bit.

use std::fs;
use std::path::Path;

use calgeom::catalog::{Calibration, Sampler};
use calgeom::convexity::Surface;
use calgeom::grassmann::OrientedPlane;
use calgeom::pshcheck::Jet2;
use calgeom::{Form, Multivector};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub idx: Vec<usize>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormJson {
    pub n: usize,
    pub p: usize,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationJson {
    pub n: usize,
    pub p: usize,
    pub terms: Vec<Term>,
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default)]
    pub sampler: Option<String>,
    #[serde(default)]
    pub comass_certified: bool,
    #[serde(default = "default_tol_plane")]
    pub tol_plane: f64,
}

fn default_name() -> String {
    "custom".into()
}

fn default_tol_plane() -> f64 {
    1e-6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneJson {
    pub n: usize,
    pub p: usize,
    pub frame: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JetJson {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceJson {
    Affine { point: Vec<f64>, basis: Vec<Vec<f64>> },
    Sphere { center: Vec<f64>, radius: f64 },
    Torus {
        #[serde(rename = "R")]
        big: f64,
        #[serde(rename = "r")]
        small: f64,
    },
    Graph { q: Vec<Vec<f64>>, b: Vec<f64>, c: f64 },
}

/// A cone target: either a Plücker vector in the form layout or a frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetJson {
    Plane(PlaneJson),
    Vector(FormJson),
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

/// Reads `arg` as inline JSON when it starts with `{` or `[`, otherwise as
/// a path.
pub fn read_json<T: for<'de> Deserialize<'de>>(arg: &str, what: &str) -> Result<T, CliError> {
    let trimmed = arg.trim_start();
    let (text, origin) = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        (trimmed.to_string(), "inline".to_string())
    } else {
        let text = fs::read_to_string(Path::new(arg)).map_err(|e| invalid(format!("cannot read {what} file {arg}: {e}")))?;
        (text, arg.to_string())
    };
    serde_json::from_str(&text).map_err(|e| invalid(format!("{what} ({origin}): {e}")))
}

pub fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if let Some(k) = rows.iter().position(|row| row.len() != c) {
        return Err(invalid(format!("{what}: row {k} has {} entries, expected {c}", rows[k].len())));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn rows_of(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn coefficients(n: usize, p: usize, terms: &[Term], what: &str) -> Result<Vec<f64>, CliError> {
    let size = calgeom::exterior::binomial(n, p);
    let mut coeffs = vec![0.0; size];
    let mut seen = vec![false; size];
    for (k, t) in terms.iter().enumerate() {
        if t.idx.len() != p {
            return Err(invalid(format!("{what}: term {k} has {} indices, expected {p}", t.idx.len())));
        }
        if t.idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!("{what}: term {k} index tuple {:?} is not strictly increasing", t.idx)));
        }
        if t.idx.iter().any(|&i| i >= n) {
            return Err(invalid(format!("{what}: term {k} index tuple {:?} exceeds dimension {n}", t.idx)));
        }
        if !t.c.is_finite() {
            return Err(invalid(format!("{what}: term {k} coefficient is not finite")));
        }
        let r = calgeom::MultiIndex::new(&t.idx, n)?.rank(n);
        if seen[r] {
            return Err(invalid(format!("{what}: term {k} repeats index tuple {:?}", t.idx)));
        }
        seen[r] = true;
        coeffs[r] = t.c;
    }
    Ok(coeffs)
}

fn terms_of(coeffs: &[f64], n: usize, p: usize) -> Vec<Term> {
    calgeom::exterior::subsets(n, p)
        .into_iter()
        .zip(coeffs)
        .filter(|(_, &c)| c != 0.0)
        .map(|(idx, &c)| Term { idx: idx.to_vec(), c })
        .collect()
}

impl FormJson {
    pub fn to_form(&self) -> Result<Form, CliError> {
        Ok(Form::from_coeffs(self.n, self.p, coefficients(self.n, self.p, &self.terms, "form")?)?)
    }

    pub fn to_multivector(&self) -> Result<Multivector, CliError> {
        Ok(Multivector::from_coeffs(self.n, self.p, coefficients(self.n, self.p, &self.terms, "multivector")?)?)
    }

    pub fn from_form(f: &Form) -> Self {
        Self { n: f.n(), p: f.p(), terms: terms_of(f.coeffs(), f.n(), f.p()) }
    }

    pub fn from_multivector(x: &Multivector) -> Self {
        Self { n: x.n(), p: x.p(), terms: terms_of(x.coeffs(), x.n(), x.p()) }
    }
}

impl CalibrationJson {
    pub fn from_calibration(c: &Calibration) -> Self {
        let f = FormJson::from_form(&c.form);
        Self {
            n: f.n,
            p: f.p,
            terms: f.terms,
            name: c.name.clone(),
            sampler: c.sampler.as_ref().map(Sampler::tag),
            comass_certified: c.comass_certified,
            tol_plane: c.tol_plane,
        }
    }

    pub fn to_calibration(&self) -> Result<Calibration, CliError> {
        let form = Form::from_coeffs(self.n, self.p, coefficients(self.n, self.p, &self.terms, "calibration")?)?;
        if !(self.tol_plane > 0.0 && self.tol_plane < 1.0) {
            return Err(invalid(format!("calibration: tol_plane must lie in (0, 1), got {}", self.tol_plane)));
        }
        let mut cal = Calibration::from_form(form, &self.name);
        cal.sampler = self.sampler.as_deref().map(Sampler::from_tag).transpose()?;
        cal.comass_certified = self.comass_certified;
        cal.tol_plane = self.tol_plane;
        Ok(cal)
    }
}

pub fn save_calibration(c: &Calibration, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(&CalibrationJson::from_calibration(c)).expect("plain data");
    fs::write(path, text + "\n").map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn load_calibration(path: &Path) -> Result<Calibration, CliError> {
    read_json::<CalibrationJson>(&path.to_string_lossy(), "calibration")?.to_calibration()
}

impl PlaneJson {
    pub fn from_plane(xi: &OrientedPlane) -> Self {
        Self { n: xi.n(), p: xi.p(), frame: rows_of(xi.frame()) }
    }

    /// Orthonormalizes the given columns, keeping their orientation.
    pub fn to_plane(&self) -> Result<OrientedPlane, CliError> {
        let m = matrix_from_rows(&self.frame, "plane frame")?;
        if m.nrows() != self.n || m.ncols() != self.p {
            return Err(invalid(format!(
                "plane frame is {}x{}, header says n = {}, p = {}",
                m.nrows(),
                m.ncols(),
                self.n,
                self.p
            )));
        }
        Ok(OrientedPlane::from_spanning(&m)?)
    }
}

impl TargetJson {
    pub fn to_multivector(&self) -> Result<Multivector, CliError> {
        match self {
            TargetJson::Plane(p) => Ok(p.to_plane()?.plucker().clone()),
            TargetJson::Vector(v) => v.to_multivector(),
        }
    }
}

impl JetJson {
    pub fn to_jet(&self) -> Result<Jet2, CliError> {
        let h = matrix_from_rows(&self.hess, "jet Hessian")?;
        Ok(Jet2::new(self.value, DVector::from_column_slice(&self.grad), h)?)
    }

    pub fn from_jet(j: &Jet2) -> Self {
        Self { value: j.value, grad: j.gradient.iter().copied().collect(), hess: rows_of(&j.hessian) }
    }
}

impl SurfaceJson {
    pub fn to_surface(&self) -> Result<Surface, CliError> {
        Ok(match self {
            SurfaceJson::Affine { point, basis } => Surface::Affine {
                point: DVector::from_column_slice(point),
                basis: matrix_from_rows(basis, "affine basis")?,
            },
            SurfaceJson::Sphere { center, radius } => {
                Surface::Sphere { center: DVector::from_column_slice(center), radius: *radius }
            }
            SurfaceJson::Torus { big, small } => Surface::Torus { big: *big, small: *small },
            SurfaceJson::Graph { q, b, c } => Surface::Graph {
                q: matrix_from_rows(q, "graph Hessian")?,
                b: DVector::from_column_slice(b),
                c: *c,
            },
        })
    }
}

/// A point list given as nested arrays.
pub fn points_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Vec<DVector<f64>>, CliError> {
    matrix_from_rows(rows, what)?;
    Ok(rows.iter().map(|r| DVector::from_column_slice(r)).collect())
}
