//! Experiment configuration: one JSON document per run.

use std::path::PathBuf;

use lattice_pdo::symbols::{self, Potential, Symbol, SymbolOrder};
use lattice_pdo::{KernelMatrix, LatticeSpec};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::RunError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    pub symbol: SymbolConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    pub task: Task,
    #[serde(default)]
    pub params: TaskParams,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    pub hbar: f64,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum SymbolConfig {
    Constant {
        re: f64,
        #[serde(default)]
        im: f64,
    },
    Difference,
    Multiplication {
        eps: f64,
    },
    Schrodinger {
        potential: Potential,
        #[serde(default)]
        shift: f64,
    },
    DecayingTest {
        s: f64,
        a: f64,
        b: f64,
    },
    /// Kernel in the binary format written by the `assemble` task.
    FromMatrix {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationConfig {
    #[default]
    Auto,
    #[serde(untagged)]
    Radius { radius: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Coeffs,
    Assemble,
    CheckBounds,
    CheckNuclear,
    OrderReport,
    DiagApprox,
    Spectrum,
    FitGrowth,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceConfig {
    #[default]
    Auto,
    Quadrature,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskParams {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub p1: Option<f64>,
    pub p2: Option<f64>,
    pub q_tilde: Option<usize>,
    pub j_max: Option<usize>,
    pub tol: Option<f64>,
    pub j_range: Option<(usize, usize)>,
    /// Overrides the symbol's order in `order-report`.
    pub order: Option<OrderConfig>,
    pub freq_radius: Option<usize>,
    #[serde(default)]
    pub source: SourceConfig,
    pub samples: Option<usize>,
    pub max_dim: Option<usize>,
    /// Analyze (K + Kᴴ)/2 in `diag-approx` when K is not Hermitian.
    #[serde(default)]
    pub hermitian_part: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderConfig {
    pub mu: f64,
    #[serde(default = "one")]
    pub rho: f64,
    #[serde(default)]
    pub delta: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Bin,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

pub const DEFAULT_MAX_DIM: usize = 1001;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_FREQ_RADIUS: usize = 3;

/// Parses a config, reporting the JSON path of the first offending field.
pub fn parse(text: &str) -> Result<ExperimentConfig, RunError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        RunError::config(if path == "." { "$".into() } else { path }, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

fn need<T: Copy>(value: Option<T>, field: &str, task: Task) -> Result<T, RunError> {
    value.ok_or_else(|| RunError::config(format!("params.{field}"), format!("required by task {}", task.name())))
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Coeffs => "coeffs",
            Task::Assemble => "assemble",
            Task::CheckBounds => "check-bounds",
            Task::CheckNuclear => "check-nuclear",
            Task::OrderReport => "order-report",
            Task::DiagApprox => "diag-approx",
            Task::Spectrum => "spectrum",
            Task::FitGrowth => "fit-growth",
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if !(self.lattice.hbar > 0.0 && self.lattice.hbar.is_finite()) {
            return Err(RunError::config("lattice.hbar", "must be positive and finite"));
        }
        if self.lattice.dim == 0 {
            return Err(RunError::config("lattice.dim", "must be at least 1"));
        }
        let p = &self.params;
        let task = self.task;
        let positive = |v: Option<f64>, field: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(RunError::config(format!("params.{field}"), "must be positive and finite")),
            _ => Ok(()),
        };
        positive(p.tol, "tol")?;
        for (v, field) in [(p.p, "p"), (p.p1, "p1"), (p.p2, "p2")] {
            if let Some(x) = v {
                if !(x >= 1.0 && x.is_finite()) {
                    return Err(RunError::config(format!("params.{field}"), "must satisfy 1 <= value < inf"));
                }
            }
        }
        if let Some(q) = p.q {
            if q < 1.0 {
                return Err(RunError::config("params.q", "must satisfy q >= 1"));
            }
        }
        if let Some(r) = p.r {
            if !(r > 0.0 && r <= 1.0) {
                return Err(RunError::config("params.r", "must lie in (0, 1]"));
            }
        }
        if let Some(n) = p.samples {
            if n < 2 {
                return Err(RunError::config("params.samples", "must be at least 2"));
            }
        }
        if p.j_max == Some(0) {
            return Err(RunError::config("params.j_max", "must be at least 1"));
        }
        if let Some((lo, hi)) = p.j_range {
            if lo < 1 || hi <= lo {
                return Err(RunError::config("params.j_range", "must satisfy 1 <= lo < hi"));
            }
            if let Some(j_max) = p.j_max {
                if hi > j_max {
                    return Err(RunError::config("params.j_range", "upper end exceeds j_max"));
                }
            }
        }
        match task {
            Task::CheckBounds => {
                need(p.p, "p", task)?;
            }
            Task::CheckNuclear => {
                need(p.r, "r", task)?;
                need(p.p2, "p2", task)?;
            }
            Task::OrderReport => {
                need(p.p, "p", task)?;
                need(p.r, "r", task)?;
            }
            Task::Spectrum => {
                need(p.j_max, "j_max", task)?;
            }
            Task::FitGrowth => {
                need(p.j_range, "j_range", task)?;
            }
            _ => {}
        }
        if matches!(task, Task::Spectrum | Task::FitGrowth) && !matches!(self.symbol, SymbolConfig::Schrodinger { .. }) {
            return Err(RunError::config(
                "symbol.family",
                format!("task {} needs the schrodinger family", task.name()),
            ));
        }
        if let SymbolConfig::Multiplication { eps } = self.symbol {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(RunError::config("symbol.params.eps", "must lie in (0, 1]"));
            }
        }
        if let SymbolConfig::DecayingTest { s, .. } = self.symbol {
            if s.is_nan() || s < 0.0 {
                return Err(RunError::config("symbol.params.s", "must be nonnegative"));
            }
        }
        if let Some(order) = p.order {
            SymbolOrder::new(order.mu, order.rho, order.delta).map_err(|e| RunError::config("params.order", e.to_string()))?;
        }
        if self.output.formats.is_empty() {
            return Err(RunError::config("output.formats", "must name at least one format"));
        }
        Ok(())
    }

    pub fn lattice_spec(&self) -> Result<LatticeSpec, RunError> {
        LatticeSpec::new(self.lattice.hbar, self.lattice.dim).map_err(|e| RunError::config("lattice", e.to_string()))
    }

    pub fn build_symbol(&self, spec: &LatticeSpec) -> Result<Symbol, RunError> {
        Ok(match &self.symbol {
            SymbolConfig::Constant { re, im } => symbols::constant_symbol(Complex64::new(*re, *im)),
            SymbolConfig::Difference => symbols::difference_symbol(),
            SymbolConfig::Multiplication { eps } => symbols::multiplication_symbol(*eps),
            SymbolConfig::Schrodinger { potential, shift } => symbols::schrodinger_symbol(*spec, potential.clone(), *shift),
            SymbolConfig::DecayingTest { s, a, b } => symbols::decaying_test_symbol(*s, *a, *b),
            SymbolConfig::FromMatrix { path } => {
                let bytes = std::fs::read(path)
                    .map_err(|e| RunError::config("symbol.params.path", format!("cannot read {}: {e}", path.display())))?;
                let kernel = KernelMatrix::from_binary(&bytes).map_err(|e| RunError::config("symbol.params.path", e.to_string()))?;
                if kernel.spec() != spec {
                    return Err(RunError::config(
                        "symbol.params.path",
                        "kernel lattice differs from the configured lattice",
                    ));
                }
                symbols::symbol_from_matrix(&kernel)
            }
        })
    }

    pub fn has_format(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }
}
