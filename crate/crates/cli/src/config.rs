//! Run configuration: a TOML file with sections, plus command-line overrides.

use crate::exit::Failure;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use zkflat::domain::Params;
use zkflat::freeflow::FreeFlowOptions;
use zkflat::gevrey::InterpOptions;
use zkflat::synthesis::TargetTerm;

/// Two-mode initial state used when no `[initial]` section is given.
pub const DEFAULT_U0: &str = "x*(x+1)*sin(pi*y) + 0.5*x*(x+1)*sin(2*pi*y)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Null,
    Reach,
    Free,
    Simulate,
    Bounds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSpec {
    /// Expression in `x` and `y`.
    pub expr: Option<String>,
    /// CSV with columns `x, y, value` on the run grid.
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative terminal error allowed for `null` and `reach`.
    pub terminal: f64,
    /// Relative energy-identity residual allowed for `free` and `bounds`.
    pub energy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            terminal: 1e-3,
            energy: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
    /// Time stride of snapshot and history artifacts.
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: PathBuf::from("out"),
            stride: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Subcommand to run when none is given on the command line.
    pub scenario: Option<Scenario>,
    pub params: Params,
    pub solver: FreeFlowOptions,
    pub interp: InterpOptions,
    pub initial: Option<InitialSpec>,
    /// Reach target as `[[target]]` entries `{i, j, beta}`.
    pub target: Vec<TargetTerm>,
    /// Control CSV for `simulate`.
    pub control: Option<PathBuf>,
    /// Precomputed generating-function table (JSON).
    pub table: Option<PathBuf>,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            scenario: None,
            params: Params::default(),
            solver: FreeFlowOptions::default(),
            interp: InterpOptions::default(),
            initial: None,
            target: vec![TargetTerm { i: 0, j: 1, beta: 1.0 }, TargetTerm { i: 1, j: 2, beta: 0.3 }],
            control: None,
            table: None,
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
        }
    }
}

/// Flag overrides applied on top of the file.
#[derive(Debug, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol_terminal: Option<f64>,
    pub i_max: Option<usize>,
    pub j_max: Option<usize>,
    pub table: Option<PathBuf>,
}

impl Config {
    pub fn load(path: Option<&Path>, o: &Overrides) -> Result<Config, Failure> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Failure::config(format!("cannot read {}: {e}", p.display())))?;
                toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", p.display())))?
            }
            None => Config::default(),
        };
        if let Some(d) = &o.out {
            cfg.output.dir = d.clone();
        }
        if let Some(t) = o.tol_terminal {
            cfg.tolerances.terminal = t;
        }
        if let Some(i) = o.i_max {
            cfg.params.i_max = i;
        }
        if let Some(j) = o.j_max {
            cfg.params.j_max = j;
        }
        if let Some(t) = &o.table {
            cfg.table = Some(t.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), Failure> {
        self.params.validate().map_err(Failure::from)?;
        for (name, v) in [("tolerances.terminal", self.tolerances.terminal), ("tolerances.energy", self.tolerances.energy)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Failure::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.output.stride == 0 {
            return Err(Failure::config("output.stride must be at least 1"));
        }
        if let Some(init) = &self.initial {
            if init.expr.is_some() == init.csv.is_some() {
                return Err(Failure::config("[initial] needs exactly one of `expr` and `csv`"));
            }
        }
        for t in &self.target {
            if t.j < 1 || t.j > self.params.j_max || t.i > self.params.i_max {
                return Err(Failure::config(format!(
                    "target term ({}, {}) outside i <= {}, 1 <= j <= {}",
                    t.i, t.j, self.params.i_max, self.params.j_max
                )));
            }
            if !t.beta.is_finite() {
                return Err(Failure::config(format!("target term ({}, {}) has a non-finite coefficient", t.i, t.j)));
            }
        }
        Ok(())
    }

    /// SHA-256 of everything that determines the numbers; the output
    /// location is left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
