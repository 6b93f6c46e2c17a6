//! Command-line front end for `calgeom`: argument parsing, input files,
//! report envelopes and the verification suites.

use std::ffi::OsString;
use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use calgeom::OptOptions;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

pub mod builtin;
pub mod commands;
pub mod formats;
pub mod verify;

/// Environment variable holding the default worker count.
pub const THREADS_ENV: &str = "CALGEOM_THREADS";

#[derive(Debug)]
pub enum CliError {
    /// Malformed or inconsistent input.
    Input(String),
    /// The library rejected the request.
    Lib(calgeom::Error),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<calgeom::Error> for CliError {
    fn from(e: calgeom::Error) -> Self {
        CliError::Lib(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Identities,
    Cones,
    Convexity,
    All,
}

#[derive(Clone, Debug, Args, Serialize)]
pub struct Global {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Multi-start count for Grassmannian searches.
    #[arg(long, global = true, default_value_t = 32)]
    pub restarts: usize,
    /// Dead-band on margins for psh and convexity classes.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    /// `φ(ξ) ≥ 1 − tol` makes a plane calibrated; overrides the calibration's own value.
    #[arg(long = "tol-plane", global = true)]
    pub tol_plane: Option<f64>,
    /// Report destination (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = THREADS_ENV)]
    pub threads: Option<usize>,
}

impl Global {
    pub fn opts(&self) -> OptOptions {
        let mut o = OptOptions::default().with_seed(self.seed).with_restarts(self.restarts);
        if let Some(t) = self.tol_plane {
            o.tol_plane = t;
        }
        o
    }
}

#[derive(Clone, Debug, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Maximum of the form over oriented planes.
    Comass {
        #[arg(long)]
        calibration: String,
    },
    /// Distinct calibrated planes.
    Planes {
        #[arg(long)]
        calibration: String,
        #[arg(long, default_value_t = 4)]
        count: usize,
    },
    /// Psh class of a 2-jet.
    CheckPsh {
        #[arg(long)]
        calibration: String,
        /// Jet JSON (inline or path).
        #[arg(long)]
        jet: String,
    },
    /// `dd^φ f` and the φ-Laplacian of a 2-jet.
    Laplacian {
        #[arg(long)]
        calibration: String,
        #[arg(long)]
        jet: String,
    },
    /// Ellipticity of `dd^φ` and of the reduced operator.
    Ellipticity {
        #[arg(long)]
        calibration: String,
    },
    /// A psh quadratic that is not convex.
    Witness {
        #[arg(long)]
        calibration: String,
    },
    /// Quadratics pluriharmonic for the calibration.
    PlhSpace {
        #[arg(long)]
        calibration: String,
        /// Calibrated planes sampled (default 4n(n+1)).
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Completion of a line in a 2-plane to a calibrated plane.
    Richness {
        #[arg(long)]
        calibration: String,
        /// Plane JSON with p = 2 (random when absent).
        #[arg(long)]
        plane: Option<String>,
        /// Vector in the plane, as a JSON array (first frame column when absent).
        #[arg(long)]
        line: Option<String>,
    },
    /// Membership of a p-vector in the cone of calibrated planes.
    Cone {
        #[arg(long)]
        calibration: String,
        /// Plane JSON or p-vector in the form layout.
        #[arg(long)]
        target: String,
    },
    /// Span of the calibrated planes.
    Span {
        #[arg(long)]
        calibration: String,
        /// Calibrated planes sampled (default 8·C(n, p)).
        #[arg(long)]
        samples: Option<usize>,
        /// Also compute the essential subspace.
        #[arg(long)]
        essential: bool,
    },
    /// Whether restriction to hyperplanes commutes with taking annihilators.
    Normality {
        #[arg(long)]
        calibration: String,
        #[arg(long, default_value_t = 4)]
        trials: usize,
    },
    /// Decomposition of `dd^φ f` as `df∧α` plus an annihilator of the planes.
    PlhModD {
        #[arg(long)]
        calibration: String,
        #[arg(long)]
        jet: String,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Convexity of `{ρ < 0}` at a boundary point given the jet of `ρ`.
    Boundary {
        #[arg(long)]
        calibration: String,
        #[arg(long)]
        jet: String,
        /// Also report the margin of `−log(−ρ)` at this distance.
        #[arg(long)]
        delta: Option<f64>,
        /// Find the smallest `A` making `ρ + Aρ²` strictly convex.
        #[arg(long)]
        stabilize: bool,
    },
    /// Boundary margins of a solid torus in R³.
    TorusScan {
        #[arg(long, default_value = "builtin:dxdy")]
        calibration: String,
        #[arg(long = "R", default_value_t = 2.0)]
        big: f64,
        #[arg(long = "r", default_value_t = 1.0)]
        small: f64,
        /// Even grid size per angle.
        #[arg(long, default_value_t = 16)]
        resolution: usize,
    },
    /// Whether a subspace contains no calibrated plane.
    Free {
        #[arg(long)]
        calibration: String,
        /// Basis vectors as columns of a row-major JSON matrix.
        #[arg(long)]
        subspace: String,
    },
    /// Jet of half the squared distance to a surface.
    DistJet {
        /// Surface JSON.
        #[arg(long)]
        surface: String,
        /// Point as a JSON array.
        #[arg(long)]
        point: String,
        /// Classify the jet as well.
        #[arg(long)]
        calibration: Option<String>,
    },
    /// Quadratic psh hull membership.
    Hull {
        #[arg(long)]
        calibration: String,
        /// Points of K as a JSON array of arrays.
        #[arg(long)]
        points: String,
        /// One point, or an array of points decided independently.
        #[arg(long)]
        query: String,
    },
    /// Built-in invariant suites.
    Verify {
        #[arg(long, value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
}

#[derive(Clone, Debug, Parser)]
#[command(name = "calgeom", version, about = "Pointwise calibrated geometry on Rⁿ", propagate_version = true)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

/// What a command produced.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub payload: Value,
    /// Undecided or non-converged: exit 2.
    pub flagged: bool,
    /// A failed check: the report is written, then exit 1.
    pub failure: Option<String>,
    /// Replaces the JSON report under `--format csv`.
    pub csv: Option<String>,
}

impl Outcome {
    pub fn ok(payload: Value) -> Self {
        Self { payload, flagged: false, failure: None, csv: None }
    }

    pub fn flagged_if(payload: Value, flagged: bool) -> Self {
        Self { payload, flagged, failure: None, csv: None }
    }

    pub fn status(&self) -> &'static str {
        if self.failure.is_some() {
            "error"
        } else if self.flagged {
            "flagged"
        } else {
            "ok"
        }
    }

    pub fn exit_code(&self) -> i32 {
        if self.failure.is_some() {
            1
        } else if self.flagged {
            2
        } else {
            0
        }
    }
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Report envelope around a payload.
pub fn envelope(cli: &Cli, argv: &[String], threads: usize, wall: f64, out: &Outcome) -> Value {
    let mut global = cli.global.clone();
    global.threads = Some(threads);
    json!({
        "tool": "calgeom",
        "version": env!("CARGO_PKG_VERSION"),
        "command": argv,
        "config": {
            "global": global,
            "command": &cli.command,
        },
        "seed": cli.global.seed,
        "threads": threads,
        "wall_time_s": wall,
        "status": out.status(),
        "payload": &out.payload,
    })
}

fn emit(cli: &Cli, text: &str) -> Result<(), CliError> {
    match &cli.global.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

/// Parses `argv`, runs the command and writes the report. Returns the exit
/// code: 0 ok, 2 flagged, 1 error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if cli.global.format == Format::Csv && !matches!(cli.command, Command::TorusScan { .. }) {
        eprintln!("error: --format csv is only available for torus-scan");
        return 1;
    }
    let echo: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    let threads = cli.global.threads.unwrap_or_else(default_threads).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return 1;
        }
    };
    let start = Instant::now();
    let result = pool.install(|| commands::dispatch(&cli));
    let wall = start.elapsed().as_secs_f64();
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let text = match (&out.csv, cli.global.format) {
        (Some(csv), Format::Csv) => csv.clone(),
        (None, Format::Csv) => {
            eprintln!("error: --format csv is only available for torus-scan");
            return 1;
        }
        _ => serde_json::to_string_pretty(&envelope(&cli, &echo, threads, wall, &out)).expect("plain data") + "\n",
    };
    if let Err(e) = emit(&cli, &text) {
        eprintln!("error: {e}");
        return 1;
    }
    if let Some(f) = &out.failure {
        eprintln!("failed: {f}");
    }
    out.exit_code()
}
