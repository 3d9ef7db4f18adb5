//! Command-line front end: subcommand dispatch and CSV/JSON emission.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::boundary::{classify, green0_apply, resolvent0_norm_scan, unperturbed_spectrum};
use crate::config::{ConfigError, RunConfig};
use crate::diagnostics::{loglog_slope, verify, VerifyOptions};
use crate::grid::{uniform_grid, GridFunction};
use crate::potential::{normalize_trace, ScalarFn};
use crate::solutions::{fundamental_pair, pruefer_solve, SolveOptions};
use crate::spectrum::{localize, LocalizeOptions};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_ANOMALY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dirac-spectral", version, about = "Spectral analysis of 1D Dirac operators on [0, pi]")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; defaults are used for missing fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for randomized probes (overrides `seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel parts.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Boundary preset (overrides the `boundary` table).
    #[arg(long, global = true)]
    pub preset: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Regularity class of the boundary form.
    Classify,
    /// Eigenvalues of the unperturbed operator.
    Spectrum0,
    /// Fundamental solutions c and s at the configured lambdas.
    Fundsys,
    /// Polar (Pruefer) form of the sine-type solution.
    Pruefer,
    /// Localized eigenvalues.
    Spectrum,
    /// Unperturbed Green's operator applied to the forcing, plus resolvent norms.
    Green0,
    /// Asymptotic, eigenfunction and basis diagnostics.
    Verify,
    /// Trace normalization and the induced spectral shift.
    Gauge,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Classify => "classify",
            Command::Spectrum0 => "spectrum0",
            Command::Fundsys => "fundsys",
            Command::Pruefer => "pruefer",
            Command::Spectrum => "spectrum",
            Command::Green0 => "green0",
            Command::Verify => "verify",
            Command::Gauge => "gauge",
        }
    }
}

/// Result of one subcommand before it is written out.
pub struct Artifact {
    pub csv: String,
    pub result: Value,
    pub anomalies: Vec<String>,
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(command: Command, units: &str, header: &[&str]) -> Self {
        let mut text = format!("# dirac-spectral {VERSION} {}; units: {units}\n", command.name());
        text.push_str(&header.join(","));
        text.push('\n');
        Self { text }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

fn f(x: f64) -> String {
    format!("{x:e}")
}

fn re_im(z: C64) -> [String; 2] {
    [f(z.re), f(z.im)]
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Loads and validates the configuration, applying flag overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let src = fs::read_to_string(p).map_err(|e| ConfigError {
                path: "config".into(),
                msg: format!("cannot read {}: {e}", p.display()),
            })?;
            RunConfig::from_toml(&src)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.preset {
        cfg.boundary.preset = Some(p.clone());
        cfg.boundary.matrix = None;
    }
    if let Some(o) = &cli.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let exec = || execute(cli.command, &cfg);
    let out = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => pool.install(exec),
            Err(e) => {
                eprintln!("cannot start thread pool: {e}");
                return EXIT_CONFIG;
            }
        },
        None => exec(),
    };
    let art = match out {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{}: {e}", cli.command.name());
            return EXIT_ANOMALY;
        }
    };
    if let Err(e) = write_artifact(Path::new(&cfg.output.dir), cli.command, &cfg, &art) {
        eprintln!("cannot write output: {e}");
        return EXIT_ANOMALY;
    }
    if art.anomalies.is_empty() {
        EXIT_OK
    } else {
        for a in &art.anomalies {
            eprintln!("anomaly: {a}");
        }
        EXIT_ANOMALY
    }
}

pub fn write_artifact(dir: &Path, command: Command, cfg: &RunConfig, art: &Artifact) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    let name = command.name();
    fs::write(dir.join(format!("{name}.csv")), &art.csv)?;
    let sidecar = json!({
        "command": name,
        "version": VERSION,
        "config": to_value(cfg),
        "result": art.result,
        "anomalies": art.anomalies,
    });
    let mut text = serde_json::to_string_pretty(&sidecar).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(dir.join(format!("{name}.json")), text)
}

/// Computes the artifact of `command` without touching the file system.
pub fn execute(command: Command, cfg: &RunConfig) -> crate::Result<Artifact> {
    let q = cfg.potential().map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    let bf = cfg.boundary().map_err(|e| crate::Error::InvalidInput(e.to_string()))?;
    let [lo, hi] = cfg.command.n_range;
    let solve = SolveOptions {
        cells: cfg.solver.cells,
        alpha: cfg.solver.alpha,
        accuracy: cfg.solver.accuracy,
    };
    let lopts = LocalizeOptions {
        epsilon: cfg.solver.epsilon,
        ..Default::default()
    };
    let mut anomalies = Vec::new();
    let art = match command {
        Command::Classify => {
            let cls = classify(&bf, q.weight_e(std::f64::consts::PI))?;
            let mut csv = Csv::new(command, "dimensionless", &["kind", "w1_re", "w1_im", "w2_re", "w2_im"]);
            let [a, b] = cls.witnesses;
            let [a0, a1] = re_im(a);
            let [b0, b1] = re_im(b);
            csv.row(&[format!("{:?}", cls.kind), a0, a1, b0, b1]);
            Artifact {
                csv: csv.text,
                result: json!({
                    "kind": format!("{:?}", cls.kind),
                    "witnesses": to_value(&cls.witnesses),
                    "middle": to_value(&cls.middle),
                    "discriminant": to_value(&cls.discriminant),
                    "e": to_value(&cls.e),
                }),
                anomalies,
            }
        }
        Command::Spectrum0 => {
            let spec = unperturbed_spectrum(&bf, C64::new(1.0, 0.0))?;
            let mut csv = Csv::new(command, "lambda in 1/rad", &["n", "lambda_re", "lambda_im", "multiplicity"]);
            for a in spec.anchors(lo, hi) {
                let [r, i] = re_im(a.lambda);
                csv.row(&[a.n.to_string(), r, i, a.multiplicity.to_string()]);
            }
            Artifact {
                csv: csv.text,
                result: to_value(&spec),
                anomalies,
            }
        }
        Command::Fundsys => {
            let mut csv = Csv::new(
                command,
                "x in rad, lambda in 1/rad",
                &[
                    "lambda_re", "lambda_im", "x", "c1_re", "c1_im", "c2_re", "c2_im", "s1_re", "s1_im", "s2_re",
                    "s2_im",
                ],
            );
            let mut summary = Vec::new();
            for l in cfg.lambdas() {
                let fp = fundamental_pair(&q, l, cfg.solver.method, &solve)?;
                for ((x, c), s) in fp.c.grid.iter().zip(&fp.c.values).zip(&fp.s.values) {
                    let mut row: Vec<String> = re_im(l).into();
                    row.push(f(*x));
                    for z in [c[0], c[1], s[0], s[1]] {
                        row.extend(re_im(z));
                    }
                    csv.row(&row);
                }
                let w = fp.wronskian();
                summary.push(json!({
                    "lambda": to_value(&l),
                    "method": to_value(&fp.method),
                    "err_estimate": fp.err_estimate,
                    "wronskian_pi": to_value(w.values.last().unwrap()),
                    "at_pi": [to_value(&fp.c.values.last()), to_value(&fp.s.values.last())],
                }));
            }
            Artifact {
                csv: csv.text,
                result: Value::Array(summary),
                anomalies,
            }
        }
        Command::Pruefer => {
            let mut csv = Csv::new(
                command,
                "x in rad, theta in rad",
                &["lambda_re", "lambda_im", "x", "theta_re", "theta_im", "r_re", "r_im", "rho_re", "rho_im"],
            );
            let mut summary = Vec::new();
            for l in cfg.lambdas() {
                let ps = pruefer_solve(&q, l, cfg.solver.alpha)?;
                for k in 0..ps.theta.grid.len() {
                    let mut row: Vec<String> = re_im(l).into();
                    row.push(f(ps.theta.grid[k]));
                    row.extend(re_im(ps.theta.values[k]));
                    row.extend(re_im(ps.r.values[k]));
                    row.extend(re_im(ps.rho.values[k]));
                    csv.row(&row);
                }
                summary.push(json!({
                    "lambda": to_value(&l),
                    "iterations": ps.iterations,
                    "contraction_factor": ps.contraction_factor,
                    "last_update": ps.last_update,
                    "preconditioned": ps.preconditioned,
                }));
            }
            Artifact {
                csv: csv.text,
                result: Value::Array(summary),
                anomalies,
            }
        }
        Command::Spectrum => {
            let pts = localize(&q, &bf, lo, hi, &lopts)?;
            let mut csv = Csv::new(
                command,
                "lambda in 1/rad",
                &[
                    "n", "lambda_re", "lambda_im", "lambda0_re", "lambda0_im", "radius", "multiplicity", "abs_delta",
                ],
            );
            for p in &pts {
                let mut row = vec![p.n.to_string()];
                row.extend(re_im(p.lambda));
                row.extend(re_im(p.anchor));
                row.push(f(p.radius));
                row.push(p.multiplicity.to_string());
                row.push(f(p.det_abs));
                csv.row(&row);
                if let Some(a) = &p.anomaly {
                    anomalies.push(format!("n = {}: {a}", p.n));
                }
            }
            Artifact {
                csv: csv.text,
                result: to_value(&pts),
                anomalies,
            }
        }
        Command::Green0 => {
            let grid = uniform_grid(0.0, std::f64::consts::PI, cfg.solver.cells);
            let f1 = ScalarFn::expr(&cfg.command.forcing[0])?;
            let f2 = ScalarFn::expr(&cfg.command.forcing[1])?;
            let rhs = GridFunction::from_fn(grid, |x| [f1.eval(x), f2.eval(x)]);
            let mut csv = Csv::new(
                command,
                "x in rad, lambda in 1/rad",
                &["lambda_re", "lambda_im", "x", "u1_re", "u1_im", "u2_re", "u2_im"],
            );
            for l in cfg.lambdas() {
                let u = green0_apply(&bf, l, &rhs)?;
                for (x, v) in u.grid.iter().zip(&u.values) {
                    let mut row: Vec<String> = re_im(l).into();
                    row.push(f(*x));
                    row.extend(re_im(v[0]));
                    row.extend(re_im(v[1]));
                    csv.row(&row);
                }
            }
            let taus = &cfg.command.taus;
            let mut scans = Vec::new();
            for (p, qq) in [(2.0, 2.0), (1.0, 2.0), (1.0, f64::INFINITY)] {
                let norms = resolvent0_norm_scan(&bf, taus, p, qq, cfg.seed)?;
                let abs_t: Vec<f64> = taus.iter().map(|t| t.abs()).collect();
                scans.push(json!({
                    "p": p,
                    "q": if qq.is_infinite() { json!("inf") } else { json!(qq) },
                    "taus": taus,
                    "norms": norms,
                    "slope": loglog_slope(&abs_t, &norms),
                }));
            }
            Artifact {
                csv: csv.text,
                result: json!({ "resolvent_scans": scans }),
                anomalies,
            }
        }
        Command::Verify => {
            let [vlo, vhi] = cfg.command.verify_range;
            let rep = verify(
                &q,
                &bf,
                &VerifyOptions {
                    lo: vlo,
                    hi: vhi,
                    epsilon: cfg.solver.epsilon,
                    basis_n: cfg.command.basis_n,
                    bracket: cfg.command.bracket,
                    cells: cfg.solver.cells,
                    seed: cfg.seed,
                },
            )?;
            let mut csv = Csv::new(
                command,
                "lambda in 1/rad",
                &["n", "dev", "s_n_eps", "r_n", "bound", "holds", "b_n", "b_n_adjoint"],
            );
            let opt = |v: Option<f64>| v.map(f).unwrap_or_default();
            for row in &rep.asymptotics.rows {
                let (b, ba) = rep
                    .eigenfunctions
                    .as_ref()
                    .map(|e| {
                        let find = |rs: &[crate::diagnostics::RemainderRow]| {
                            rs.iter().find(|r| r.n == row.n).map(|r| r.b_n)
                        };
                        (find(&e.rows), find(&e.adjoint_rows))
                    })
                    .unwrap_or((None, None));
                csv.row(&[
                    row.n.to_string(),
                    f(row.dev),
                    f(row.s_n_eps),
                    opt(row.r_n),
                    opt(row.bound),
                    row.holds.map(|h| h.to_string()).unwrap_or_default(),
                    opt(b),
                    opt(ba),
                ]);
            }
            anomalies.extend(rep.flags.iter().cloned());
            Artifact {
                csv: csv.text,
                result: to_value(&rep),
                anomalies,
            }
        }
        Command::Gauge => {
            let (qn, shift) = normalize_trace(&q)?;
            let a = localize(&q, &bf, lo, hi, &lopts)?;
            let b = localize(&qn, &bf, lo, hi, &lopts)?;
            let mut csv = Csv::new(
                command,
                "lambda in 1/rad",
                &["n", "lambda_re", "lambda_im", "normalized_re", "normalized_im", "diff"],
            );
            let mut worst: f64 = 0.0;
            for (p, r) in a.iter().zip(&b) {
                let d = (p.lambda - (r.lambda + shift)).norm();
                worst = worst.max(d);
                let mut row = vec![p.n.to_string()];
                row.extend(re_im(p.lambda));
                row.extend(re_im(r.lambda));
                row.push(f(d));
                csv.row(&row);
            }
            Artifact {
                csv: csv.text,
                result: json!({
                    "shift": to_value(&shift),
                    "max_diff": worst,
                    "normalized_trace_l1": qn.trace_l1()?,
                }),
                anomalies,
            }
        }
    };
    Ok(art)
}

/// Parses `args` and runs; used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let mut msg = String::new();
            let _ = write!(msg, "{e}");
            if e.use_stderr() {
                eprint!("{msg}");
            } else {
                print!("{msg}");
            }
            code
        }
    }
}
