//! TOML run configuration for the command-line front end.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::BoundaryForm;
use crate::ode::Accuracy;
use crate::potential::Potential;
use crate::solutions::Method;

/// A validation failure tied to a field of the configuration.
#[derive(Debug, Error)]
#[error("{path}: {msg}")]
pub struct ConfigError {
    pub path: String,
    pub msg: String,
}

fn err(path: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        msg: msg.into(),
    }
}

/// A real number or an `[re, im]` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Real(f64),
    Complex([f64; 2]),
}

impl Number {
    pub fn value(&self) -> C64 {
        match self {
            Number::Real(r) => C64::new(*r, 0.0),
            Number::Complex([a, b]) => C64::new(*a, *b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    /// Expressions for `q1, q2, q3, q4` in the variable `x`.
    pub q: Vec<String>,
    /// Integrability exponent `p`.
    pub p: f64,
    pub singular: Vec<f64>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self {
            q: vec!["0".into(); 4],
            p: 2.0,
            singular: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundaryConfig {
    /// Named form: `dirichlet`, `dirichlet-neumann`, `periodic`,
    /// `antiperiodic` or `quasiperiodic(a)`.
    pub preset: Option<String>,
    /// Two rows of four entries.
    pub matrix: Option<Vec<Vec<Number>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub cells: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub accuracy: Accuracy,
    pub method: Method,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cells: 2048,
            alpha: 1.0,
            epsilon: 0.4,
            accuracy: Accuracy::Fine,
            method: Method::DirectOde,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandConfig {
    pub n_range: [i64; 2],
    /// Spectral parameters for `fundsys`, `pruefer` and `green0`.
    pub lambdas: Vec<Number>,
    /// Imaginary parts for the resolvent norm scan.
    pub taus: Vec<f64>,
    /// Right-hand side of `green0` as two expressions.
    pub forcing: Vec<String>,
    /// Range of `n` for the asymptotic checks of `verify`.
    pub verify_range: [i64; 2],
    pub basis_n: i64,
    pub bracket: bool,
}

impl Default for CommandConfig {
    fn default() -> Self {
        Self {
            n_range: [-10, 10],
            lambdas: vec![Number::Real(10.5)],
            taus: vec![4.0, 8.0, 16.0, 32.0],
            forcing: vec!["1".into(), "cos(x)".into()],
            verify_range: [10, 30],
            basis_n: 8,
            bracket: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// The complete run description; every field has a default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub potential: PotentialConfig,
    pub boundary: BoundaryConfig,
    pub solver: SolverConfig,
    pub command: CommandConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let path = e
                .message()
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".into());
            err(&path, e.to_string().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.potential.q.len() != 4 {
            return Err(err(
                "potential.q",
                format!("expected 4 expressions, got {}", self.potential.q.len()),
            ));
        }
        if !(self.potential.p >= 1.0) {
            return Err(err("potential.p", "must be >= 1"));
        }
        self.potential()?;
        self.boundary()?;
        let s = &self.solver;
        if s.cells < 16 {
            return Err(err("solver.cells", "must be at least 16"));
        }
        if !(s.alpha > 0.0 && s.alpha.is_finite()) {
            return Err(err("solver.alpha", "must be positive"));
        }
        if !(s.epsilon > 0.0 && s.epsilon < 0.5) {
            return Err(err("solver.epsilon", "must lie in (0, 0.5)"));
        }
        let c = &self.command;
        if c.n_range[0] > c.n_range[1] {
            return Err(err("command.n_range", "lower end exceeds upper end"));
        }
        if c.verify_range[0] > c.verify_range[1] {
            return Err(err("command.verify_range", "lower end exceeds upper end"));
        }
        if c.basis_n < 1 {
            return Err(err("command.basis_n", "must be at least 1"));
        }
        if c.taus.iter().any(|t| !t.is_finite() || *t == 0.0) {
            return Err(err("command.taus", "entries must be finite and nonzero"));
        }
        if c.forcing.len() != 2 {
            return Err(err("command.forcing", "expected 2 expressions"));
        }
        for (k, f) in c.forcing.iter().enumerate() {
            crate::potential::ScalarFn::expr(f)
                .map_err(|e| err(&format!("command.forcing[{k}]"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn potential(&self) -> Result<Potential, ConfigError> {
        let mut fns = Vec::with_capacity(4);
        for (k, src) in self.potential.q.iter().enumerate() {
            fns.push(
                crate::potential::ScalarFn::expr(src)
                    .map_err(|e| err(&format!("potential.q[{k}]"), e.to_string()))?,
            );
        }
        let q: [crate::potential::ScalarFn; 4] = fns
            .try_into()
            .map_err(|_| err("potential.q", "expected 4 expressions"))?;
        Potential::with_singular(q, self.potential.p, self.potential.singular.clone())
            .map_err(|e| err("potential", e.to_string()))
    }

    pub fn boundary(&self) -> Result<BoundaryForm, ConfigError> {
        match (&self.boundary.preset, &self.boundary.matrix) {
            (Some(_), Some(_)) => Err(err("boundary", "give either preset or matrix, not both")),
            (Some(p), None) => BoundaryForm::preset(p).map_err(|e| err("boundary.preset", e.to_string())),
            (None, Some(m)) => {
                if m.len() != 2 {
                    return Err(err("boundary.matrix", format!("expected 2 rows, got {}", m.len())));
                }
                let mut u = [[C64::new(0.0, 0.0); 4]; 2];
                for (i, row) in m.iter().enumerate() {
                    if row.len() != 4 {
                        return Err(err(
                            "boundary.matrix",
                            format!("row {i} has {} columns, expected 4", row.len()),
                        ));
                    }
                    for (j, v) in row.iter().enumerate() {
                        u[i][j] = v.value();
                    }
                }
                BoundaryForm::new(u).map_err(|e| err("boundary.matrix", e.to_string()))
            }
            (None, None) => Ok(BoundaryForm::dirichlet()),
        }
    }

    pub fn lambdas(&self) -> Vec<C64> {
        self.command.lambdas.iter().map(Number::value).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert!(cfg.potential().unwrap().is_zero());
    }

    #[test]
    fn matrix_and_complex_entries() {
        let cfg = RunConfig::from_toml(
            "[boundary]\nmatrix = [[1, 0, [-0.5, 0.5], 0], [0, 1, 0, -1]]\n",
        )
        .unwrap();
        let bf = cfg.boundary().unwrap();
        assert_eq!(bf.u[0][2], C64::new(-0.5, 0.5));
    }

    #[test]
    fn malformed_matrix_names_field() {
        let e = RunConfig::from_toml("[boundary]\nmatrix = [[1, 0, 0], [0, 0, 1]]\n").unwrap_err();
        assert_eq!(e.path, "boundary.matrix");
        let e = RunConfig::from_toml("[solver]\nepsilon = 2.0\n").unwrap_err();
        assert_eq!(e.path, "solver.epsilon");
        let e = RunConfig::from_toml("[potential]\nq = [\"x\", \"0\", \"0\", \"(\"]\n").unwrap_err();
        assert_eq!(e.path, "potential.q[3]");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.boundary.preset = Some("periodic".into());
        cfg.command.lambdas = vec![Number::Complex([3.0, 0.5])];
        let s = toml::to_string(&cfg).unwrap();
        assert_eq!(RunConfig::from_toml(&s).unwrap(), cfg);
    }
}
