//! Experiment configuration: TOML schema, typed parsing, and the
//! cross-field parameter conditions checked before any simulation starts.

use selkov_lattice::{
    Boundary, LatticeField, ModelParams, NoiseCoefficient, PairState, SchemeConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StudyKind {
    Simulate,
    Moments,
    Tails,
    Invariant,
    DtStudy,
    NStudy,
    DoubleLimit,
    OpsCheck,
}

impl StudyKind {
    pub fn id(&self) -> &'static str {
        match self {
            StudyKind::Simulate => "simulate",
            StudyKind::Moments => "moments",
            StudyKind::Tails => "tails",
            StudyKind::Invariant => "invariant",
            StudyKind::DtStudy => "dt_study",
            StudyKind::NStudy => "n_study",
            StudyKind::DoubleLimit => "double_limit",
            StudyKind::OpsCheck => "ops_check",
        }
    }

    /// Studies whose statements need the noise-domination condition.
    fn needs_noise_domination(&self) -> bool {
        matches!(
            self,
            StudyKind::Moments
                | StudyKind::Invariant
                | StudyKind::DtStudy
                | StudyKind::NStudy
                | StudyKind::DoubleLimit
        )
    }

    fn needs_step_restriction(&self) -> bool {
        !matches!(self, StudyKind::OpsCheck)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SigmaBlock {
    Zero,
    Linear { beta: f64 },
    Tanh { beta: f64, delta: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBlock {
    pub d1: f64,
    pub d2: f64,
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
    pub p: u32,
    /// Odd-length arrays centered at site 0.
    #[serde(default)]
    pub f: Vec<f64>,
    #[serde(default)]
    pub g: Vec<f64>,
    #[serde(default)]
    pub h: Vec<f64>,
    pub sigma: SigmaBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemeBlock {
    pub dt: f64,
    pub n_sites: usize,
    pub boundary: Boundary,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iters")]
    pub newton_max_iters: usize,
    #[serde(default = "default_fallback_max_iters")]
    pub fallback_max_iters: usize,
    #[serde(default)]
    pub trust_radius: Option<f64>,
    #[serde(default)]
    pub dt_ceiling: Option<f64>,
}

fn default_newton_tol() -> f64 {
    1e-10
}
fn default_newton_max_iters() -> usize {
    50
}
fn default_fallback_max_iters() -> usize {
    500
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct InitialBlock {
    #[serde(default)]
    pub u: Vec<f64>,
    #[serde(default)]
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloBlock {
    pub n_trajectories: usize,
    pub horizon: usize,
    #[serde(default)]
    pub burn_in: usize,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
}

fn default_thinning() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedsBlock {
    pub root_seed: u64,
    #[serde(default = "default_replicates")]
    pub n_replicates: u32,
}

fn default_replicates() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputBlock {
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

/// Study-specific grids and measure-protocol knobs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct StudyParamsBlock {
    #[serde(default)]
    pub i_grid: Vec<usize>,
    #[serde(default)]
    pub dt_grid: Vec<f64>,
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default)]
    pub n_ref: Option<usize>,
    #[serde(default)]
    pub eta_grid: Vec<f64>,
    #[serde(default)]
    pub probe_step: Option<usize>,
    #[serde(default)]
    pub gap_streams: Option<usize>,
    #[serde(default)]
    pub gap_horizon: Option<usize>,
    #[serde(default)]
    pub n_samples: Option<usize>,
    #[serde(default)]
    pub burn_in_time: Option<f64>,
    #[serde(default)]
    pub spacing_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    pub model: ModelBlock,
    pub scheme: SchemeBlock,
    #[serde(default)]
    pub initial: InitialBlock,
    pub monte_carlo: MonteCarloBlock,
    pub seeds: SeedsBlock,
    pub output: OutputBlock,
    #[serde(default)]
    pub study_params: StudyParamsBlock,
}

/// One violated parameter condition, named after the requirement breached.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionViolation {
    pub name: String,
    pub actual: String,
    pub required: String,
}

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    Violations(Vec<ConditionViolation>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Violations(v) => {
                writeln!(f, "{} condition violation(s):", v.len())?;
                for c in v {
                    writeln!(f, "  {}: actual {}, required {}", c.name, c.actual, c.required)?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

fn field_from(values: &[f64], boundary: Boundary, name: &str) -> Result<LatticeField, ConditionViolation> {
    if values.is_empty() {
        return Ok(LatticeField::zeros(0, boundary));
    }
    LatticeField::from_values(values.to_vec(), boundary).map_err(|_| ConditionViolation {
        name: format!("{name} has odd length"),
        actual: values.len().to_string(),
        required: "odd-length array centered at site 0".into(),
    })
}

impl ExperimentConfig {
    pub fn model_params(&self) -> Result<ModelParams, ConfigError> {
        let m = &self.model;
        let mut violations = Vec::new();
        let boundary = Boundary::ZeroPad;
        let build = |vals: &[f64], name: &str, violations: &mut Vec<ConditionViolation>| {
            match field_from(vals, boundary, name) {
                Ok(f) => f,
                Err(v) => {
                    violations.push(v);
                    LatticeField::zeros(0, boundary)
                }
            }
        };
        let f = build(&m.f, "model.f", &mut violations);
        let g = build(&m.g, "model.g", &mut violations);
        let h = build(&m.h, "model.h", &mut violations);
        let sigma = match &m.sigma {
            SigmaBlock::Zero => NoiseCoefficient::zero(),
            SigmaBlock::Linear { beta } => NoiseCoefficient::linear(*beta),
            SigmaBlock::Tanh { beta, delta } => {
                let d = build(delta, "model.sigma.delta", &mut violations);
                NoiseCoefficient::tanh(*beta, d)
            }
        };
        if !violations.is_empty() {
            return Err(ConfigError::Violations(violations));
        }
        Ok(ModelParams {
            d1: m.d1,
            d2: m.d2,
            a1: m.a1,
            a2: m.a2,
            b1: m.b1,
            b2: m.b2,
            p: m.p,
            f,
            g,
            h,
            sigma,
        })
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let s = &self.scheme;
        SchemeConfig {
            dt: s.dt,
            n_sites: s.n_sites,
            boundary: s.boundary,
            newton_tol: s.newton_tol,
            newton_max_iters: s.newton_max_iters,
            fallback_max_iters: s.fallback_max_iters,
            trust_radius: s.trust_radius,
            dt_ceiling: s.dt_ceiling,
        }
    }

    pub fn initial_state(&self) -> Result<PairState, ConfigError> {
        let boundary = self.scheme.boundary;
        let n = self.scheme.n_sites;
        let mut violations = Vec::new();
        let mut build = |vals: &[f64], name: &str| match field_from(vals, Boundary::ZeroPad, name) {
            Ok(f) => {
                if f.radius() > n {
                    violations.push(ConditionViolation {
                        name: format!("{name} fits the window"),
                        actual: format!("radius {}", f.radius()),
                        required: format!("<= n_sites {n}"),
                    });
                }
                f.resized(n).with_boundary(boundary)
            }
            Err(v) => {
                violations.push(v);
                LatticeField::zeros(n, boundary)
            }
        };
        let u = build(&self.initial.u, "initial.u");
        let v = build(&self.initial.v, "initial.v");
        if !violations.is_empty() {
            return Err(ConfigError::Violations(violations));
        }
        Ok(PairState::new(u, v).expect("aligned by construction"))
    }
}

/// Parse and validate raw config text into a typed configuration, or report
/// every violated condition by name.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig =
        toml::from_str(raw).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut violations = Vec::new();

    let params = config.model_params()?;
    let push_core = |violations: &mut Vec<ConditionViolation>, e: selkov_lattice::CoreError| {
        if let selkov_lattice::CoreError::ConfigRejected {
            condition,
            actual,
            required,
        } = e
        {
            violations.push(ConditionViolation {
                name: condition,
                actual,
                required,
            });
        }
    };
    if let Err(e) = params.check_positive() {
        push_core(&mut violations, e);
    }
    if config.study.needs_noise_domination() {
        if let Err(e) = params.check_noise_dominated() {
            push_core(&mut violations, e);
        }
    }
    if config.study.needs_step_restriction() {
        if let Err(e) = params.check_step_size(config.scheme.dt) {
            push_core(&mut violations, e);
        }
        for dt in &config.study_params.dt_grid {
            if let Err(e) = params.check_step_size(*dt) {
                push_core(&mut violations, e);
            }
        }
    }
    if let Err(e) = config.scheme_config().validate() {
        push_core(&mut violations, e);
    }
    for cutoff in &config.study_params.i_grid {
        if *cutoff >= config.scheme.n_sites {
            violations.push(ConditionViolation {
                name: "tail cutoffs < N".into(),
                actual: cutoff.to_string(),
                required: format!("< {}", config.scheme.n_sites),
            });
        }
    }
    if config.study == StudyKind::Tails && config.study_params.i_grid.is_empty() {
        violations.push(ConditionViolation {
            name: "tails study has i_grid".into(),
            actual: "empty".into(),
            required: "nonempty cutoff grid".into(),
        });
    }
    if matches!(config.study, StudyKind::DtStudy | StudyKind::DoubleLimit) {
        if config.study_params.dt_grid.len() < 2 {
            violations.push(ConditionViolation {
                name: "dt_grid has at least two entries".into(),
                actual: config.study_params.dt_grid.len().to_string(),
                required: ">= 2".into(),
            });
        }
        if config
            .study_params
            .dt_grid
            .windows(2)
            .any(|w| w[1] > w[0])
        {
            violations.push(ConditionViolation {
                name: "dt_grid non-increasing".into(),
                actual: format!("{:?}", config.study_params.dt_grid),
                required: "coarse to fine".into(),
            });
        }
    }
    if matches!(config.study, StudyKind::NStudy | StudyKind::DoubleLimit) {
        if config.study_params.n_grid.is_empty() {
            violations.push(ConditionViolation {
                name: "n_grid nonempty".into(),
                actual: "empty".into(),
                required: "increasing truncation grid".into(),
            });
        }
        if config.study_params.n_grid.windows(2).any(|w| w[1] < w[0]) {
            violations.push(ConditionViolation {
                name: "n_grid increasing".into(),
                actual: format!("{:?}", config.study_params.n_grid),
                required: "sorted ascending".into(),
            });
        }
    }
    if config.study == StudyKind::NStudy {
        let n_ref = config.study_params.n_ref.unwrap_or(0);
        if config.study_params.n_grid.iter().any(|n| *n > n_ref) {
            violations.push(ConditionViolation {
                name: "n_ref >= max(n_grid)".into(),
                actual: format!("{n_ref}"),
                required: format!(">= {:?}", config.study_params.n_grid.iter().max()),
            });
        }
    }
    if config.monte_carlo.n_trajectories == 0 {
        violations.push(ConditionViolation {
            name: "n_trajectories >= 1".into(),
            actual: "0".into(),
            required: ">= 1".into(),
        });
    }

    config.initial_state().map_err(|e| match e {
        ConfigError::Violations(mut v) => {
            v.extend(violations.drain(..));
            ConfigError::Violations(v)
        }
        parse => parse,
    })?;

    if violations.is_empty() {
        Ok(config)
    } else {
        Err(ConfigError::Violations(violations))
    }
}
