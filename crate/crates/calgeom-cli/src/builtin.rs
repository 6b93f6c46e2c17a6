//! `builtin:name?key=value&…` calibration URIs.
//!
//! Resolution order for `--calibration`: a `builtin:` prefix always names a
//! catalog entry; text starting with `{` is inline calibration JSON; anything
//! else is a path to a calibration file.

use calgeom::catalog::{make_calibration, su2_constants, Calibration, CalibrationKind};
use calgeom::OptOptions;

use crate::formats::{read_json, CalibrationJson};
use crate::CliError;

pub const NAMES: &[&str] = &[
    "kahler?n=M",
    "kahler_power?n=M&p=K",
    "special_lagrangian?n=M&theta=T",
    "associative",
    "coassociative",
    "cayley",
    "quaternionic?n=M",
    "generalized_cayley?n=M",
    "double_point?n=N",
    "lie_three_form?algebra=su2",
    "volume?n=N",
    "coordinate?n=N&idx=I,J,…",
    "dxdy",
    "two_planes?lambda=L",
];

struct Query<'a> {
    uri: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> Query<'a> {
    fn get(&self, key: &str) -> Result<&'a str, CliError> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| CliError::Input(format!("{}: missing parameter {key}", self.uri)))
    }

    fn int(&self, key: &str) -> Result<usize, CliError> {
        let v = self.get(key)?;
        v.parse().map_err(|_| CliError::Input(format!("{}: {key} = {v:?} is not a nonnegative integer", self.uri)))
    }

    fn real(&self, key: &str, default: Option<f64>) -> Result<f64, CliError> {
        match (self.get(key), default) {
            (Err(_), Some(d)) => Ok(d),
            (v, _) => {
                let v = v?;
                v.parse().map_err(|_| CliError::Input(format!("{}: {key} = {v:?} is not a number", self.uri)))
            }
        }
    }

    fn only(&self, keys: &[&str]) -> Result<(), CliError> {
        match self.pairs.iter().find(|(k, _)| !keys.contains(k)) {
            Some((k, _)) => Err(CliError::Input(format!("{}: unknown parameter {k}", self.uri))),
            None => Ok(()),
        }
    }
}

/// Parses the part after `builtin:`.
pub fn parse_kind(spec: &str) -> Result<CalibrationKind, CliError> {
    let (name, query) = spec.split_once('?').unwrap_or((spec, ""));
    let mut pairs = Vec::new();
    for kv in query.split('&').filter(|s| !s.is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| CliError::Input(format!("builtin:{spec}: malformed {kv:?}")))?;
        pairs.push((k, v));
    }
    let q = Query { uri: spec, pairs };
    let kind = match name {
        "kahler" => {
            q.only(&["n"])?;
            CalibrationKind::Kahler { m: q.int("n")? }
        }
        "kahler_power" => {
            q.only(&["n", "p"])?;
            CalibrationKind::KahlerPower { m: q.int("n")?, k: q.int("p")? }
        }
        "special_lagrangian" => {
            q.only(&["n", "theta"])?;
            CalibrationKind::SpecialLagrangian { m: q.int("n")?, theta: q.real("theta", Some(0.0))? }
        }
        "associative" => {
            q.only(&[])?;
            CalibrationKind::Associative
        }
        "coassociative" => {
            q.only(&[])?;
            CalibrationKind::Coassociative
        }
        "cayley" => {
            q.only(&[])?;
            CalibrationKind::Cayley
        }
        "quaternionic" => {
            q.only(&["n"])?;
            CalibrationKind::Quaternionic { m: q.int("n")? }
        }
        "generalized_cayley" => {
            q.only(&["n"])?;
            CalibrationKind::GeneralizedCayley { m: q.int("n")? }
        }
        "double_point" => {
            q.only(&["n"])?;
            CalibrationKind::DoublePoint { n: q.int("n")? }
        }
        "lie_three_form" => {
            q.only(&["algebra"])?;
            match q.get("algebra").unwrap_or("su2") {
                "su2" => CalibrationKind::LieThreeForm { dim: 3, constants: su2_constants() },
                other => return Err(CliError::Input(format!("builtin:{spec}: unknown algebra {other:?}"))),
            }
        }
        "volume" => {
            q.only(&["n"])?;
            CalibrationKind::Volume { n: q.int("n")? }
        }
        "coordinate" => {
            q.only(&["n", "idx"])?;
            let idx = q
                .get("idx")?
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Input(format!("builtin:{spec}: idx must be comma-separated integers")))?;
            CalibrationKind::Coordinate { n: q.int("n")?, indices: idx }
        }
        "dxdy" => {
            q.only(&[])?;
            CalibrationKind::Coordinate { n: 3, indices: vec![0, 1] }
        }
        "two_planes" => {
            q.only(&["lambda"])?;
            CalibrationKind::TwoPlanes { lambda: q.real("lambda", None)? }
        }
        _ => {
            return Err(CliError::Input(format!(
                "unknown builtin calibration {name:?}; known: {}",
                NAMES.join(", ")
            )))
        }
    };
    Ok(kind)
}

/// Resolves a `--calibration` argument; an explicit plane tolerance
/// overrides the one stored with the calibration.
pub fn resolve(arg: &str, tol_plane: Option<f64>, opts: &OptOptions) -> Result<Calibration, CliError> {
    let mut cal = if let Some(spec) = arg.strip_prefix("builtin:") {
        make_calibration(&parse_kind(spec)?, opts)?
    } else {
        read_json::<CalibrationJson>(arg, "calibration")?.to_calibration()?
    };
    if let Some(t) = tol_plane {
        cal.tol_plane = t;
    }
    Ok(cal)
}
