//! JSON experiment configuration.
//!
//! Precedence is flags > file > defaults: [`load_config_with`] applies
//! [`Overrides`] to the parsed file before validating.

use std::path::{Path, PathBuf};

use growpop_core::{
    EnvelopeDirection, EnvelopeSpec, Error as CoreError, GrowthSchedule, JumpBound, Kernel,
    KernelForm, OpinionSource, RecordGrid, SimConfig, StopRule,
};
use serde::Deserialize;
use thiserror::Error;

pub const DEFAULT_STEP_MAX: f64 = 1e-2;
pub const DEFAULT_RUNS: usize = 100;
pub const DEFAULT_ENVELOPE_N_MAX: usize = 1000;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid value for `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Field path of a semantic error, if any.
    pub fn field(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { field, .. } => Some(field),
            _ => None,
        }
    }
}

impl From<CoreError> for ConfigError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { field, reason } => ConfigError::Invalid { field, reason },
            other => ConfigError::invalid("", other.to_string()),
        }
    }
}

fn default_step_max() -> f64 {
    DEFAULT_STEP_MAX
}

fn default_runs() -> usize {
    DEFAULT_RUNS
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dim: Option<usize>,
    kernel: KernelForm,
    schedule: GrowthSchedule,
    source: OpinionSource,
    initial_opinions: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_step_max")]
    step_max: f64,
    horizon: Option<f64>,
    max_agents: Option<usize>,
    #[serde(default)]
    record_grid: RecordGrid,
    #[serde(default = "default_runs")]
    runs: usize,
    #[serde(default)]
    master_seed: u64,
    output_path: Option<PathBuf>,
    conditions: Option<ConditionsBlock>,
    envelope: Option<EnvelopeBlock>,
}

/// Settings of the `conditions` table.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsBlock {
    /// Rates for the two condition sums; default to the kernel's `psi_star` and `psi_max`.
    pub lambda_star: Option<f64>,
    pub lambda_max: Option<f64>,
    pub n_max: Option<usize>,
    /// Table rows per decade of `n`.
    pub per_decade: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvelopeBlock {
    lambda: Option<f64>,
    y0: Option<f64>,
    jump_bound: JumpBound,
    #[serde(default)]
    direction: EnvelopeDirection,
    n: Option<Vec<usize>>,
}

/// Envelope settings resolved against the simulation config.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeConfig {
    pub spec: EnvelopeSpec,
    /// Rows of the table; `None` means a geometric grid up to the requested `n_max`.
    pub n: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub runs: usize,
    pub master_seed: u64,
    pub output_path: Option<PathBuf>,
    pub conditions: Option<ConditionsBlock>,
    pub envelope: Option<EnvelopeConfig>,
    /// Non-fatal findings, e.g. a degenerate source.
    pub warnings: Vec<String>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub out: Option<PathBuf>,
    pub alpha: Option<f64>,
    pub lambda: Option<f64>,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    load_config_with(path, &Overrides::default())
}

pub fn load_config_with(
    path: &Path,
    overrides: &Overrides,
) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text, overrides)
}

pub fn parse_config(text: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut raw: RawConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    apply(&mut raw, overrides)?;
    build(raw)
}

fn apply(raw: &mut RawConfig, o: &Overrides) -> Result<(), ConfigError> {
    if let Some(seed) = o.seed {
        raw.master_seed = seed;
    }
    if let Some(runs) = o.runs {
        raw.runs = runs;
    }
    if let Some(out) = &o.out {
        raw.output_path = Some(out.clone());
    }
    if let Some(a) = o.alpha {
        match &mut raw.schedule {
            GrowthSchedule::PowerExponential { alpha, .. } => *alpha = a,
            GrowthSchedule::ExplicitTimes { .. } => {
                return Err(ConfigError::invalid(
                    "schedule.alpha",
                    "--alpha needs a power_exp schedule",
                ))
            }
        }
    }
    if let (Some(l), Some(env)) = (o.lambda, raw.envelope.as_mut()) {
        env.lambda = Some(l);
    }
    if let (Some(l), Some(c)) = (o.lambda, raw.conditions.as_mut()) {
        c.lambda_star = Some(l);
        c.lambda_max = Some(l);
    }
    Ok(())
}

fn build(raw: RawConfig) -> Result<ExperimentConfig, ConfigError> {
    let mut warnings = Vec::new();
    let kernel = Kernel::new(raw.kernel).map_err(|e| ConfigError::from(e.within("kernel")))?;
    raw.schedule
        .validate()
        .map_err(|e| ConfigError::from(e.within("schedule")))?;
    raw.source
        .validate()
        .map_err(|e| ConfigError::from(e.within("source")))?;
    if raw.source.sigma2() == 0.0 {
        warnings.push(
            "source.sigma2 = 0: incoming opinions are deterministic; the non-convergence direction needs sigma2 > 0"
                .to_string(),
        );
    }
    let dim = raw.dim.unwrap_or_else(|| raw.source.dim());
    let n0 = raw.schedule.n0();
    let initial_opinions = raw
        .initial_opinions
        .unwrap_or_else(|| vec![raw.source.mean().to_vec(); n0]);
    if raw.runs < 2 {
        return Err(ConfigError::invalid(
            "runs",
            format!("must be at least 2, got {}", raw.runs),
        ));
    }
    let sim = SimConfig {
        dim,
        kernel,
        schedule: raw.schedule,
        source: raw.source,
        initial_opinions,
        step_max: raw.step_max,
        stop: StopRule {
            horizon: raw.horizon,
            max_injections: raw.max_agents,
        },
        record_grid: raw.record_grid,
    };
    sim.validate().map_err(|e| match e {
        CoreError::InvalidParameter { field, reason } => ConfigError::Invalid {
            field: rename_field(&field),
            reason,
        },
        other => ConfigError::from(other),
    })?;

    if let Some(c) = &raw.conditions {
        for (field, l) in [("lambda_star", c.lambda_star), ("lambda_max", c.lambda_max)] {
            if let Some(l) = l {
                if !(l.is_finite() && l > 0.0) {
                    return Err(ConfigError::invalid(
                        format!("conditions.{field}"),
                        format!("must be positive, got {l}"),
                    ));
                }
            }
        }
        if c.per_decade == Some(0) {
            return Err(ConfigError::invalid(
                "conditions.per_decade",
                "must be at least 1",
            ));
        }
    }

    let envelope = raw
        .envelope
        .map(|block| resolve_envelope(block, &sim))
        .transpose()?;

    Ok(ExperimentConfig {
        sim,
        runs: raw.runs,
        master_seed: raw.master_seed,
        output_path: raw.output_path,
        conditions: raw.conditions,
        envelope,
        warnings,
    })
}

// SimConfig names the injection cap max_injections; the file calls it max_agents.
fn rename_field(field: &str) -> String {
    match field {
        "max_injections" => "max_agents".to_string(),
        f => f.to_string(),
    }
}

fn resolve_envelope(block: EnvelopeBlock, sim: &SimConfig) -> Result<EnvelopeConfig, ConfigError> {
    let y0 = match block.y0 {
        Some(y) => y,
        None => {
            let state = growpop_core::SimState::new(sim.dim, &sim.initial_opinions)?;
            growpop_core::compute_moments(&state, &sim.kernel, sim.source.mean()).v
        }
    };
    let spec = EnvelopeSpec {
        lambda: block.lambda.unwrap_or_else(|| sim.kernel.psi_star()),
        y0,
        jump_bound: block.jump_bound,
        direction: block.direction,
    };
    spec.validate()
        .map_err(|e| ConfigError::from(e.within("envelope")))?;
    if let Some(n) = &block.n {
        if n.is_empty() || n.contains(&0) {
            return Err(ConfigError::invalid(
                "envelope.n",
                "must be a nonempty list of positive integers",
            ));
        }
    }
    Ok(EnvelopeConfig { spec, n: block.n })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "kernel": {"type": "constant", "c": 1.0},
        "schedule": {"type": "power_exp", "alpha": 0.5, "n0": 3},
        "source": {"type": "gaussian", "m": [0.0], "sigma2": 1.0},
        "max_agents": 20
    }"#;

    fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config(text, &Overrides::default())
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.sim.step_max, 1e-2);
        assert_eq!(c.runs, 100);
        assert_eq!(c.master_seed, 0);
        assert_eq!(c.sim.dim, 1);
        assert_eq!(c.sim.initial_opinions, vec![vec![0.0]; 3]);
        assert_eq!(c.sim.record_grid, RecordGrid::default());
        assert!(c.warnings.is_empty());
    }

    #[test]
    fn zero_alpha_names_the_field() {
        let err = parse(&MINIMAL.replace("\"alpha\": 0.5", "\"alpha\": 0")).unwrap_err();
        assert_eq!(err.field(), Some("schedule.alpha"), "{err}");
    }

    #[test]
    fn zero_n0_and_negative_sigma_are_rejected() {
        let err = parse(&MINIMAL.replace("\"n0\": 3", "\"n0\": 0")).unwrap_err();
        assert_eq!(err.field(), Some("schedule.n0"), "{err}");
        let err = parse(&MINIMAL.replace("\"sigma2\": 1.0", "\"sigma2\": -1.0")).unwrap_err();
        assert_eq!(err.field(), Some("source.sigma2"), "{err}");
        let err = parse(&MINIMAL.replace("\"c\": 1.0", "\"c\": -1.0")).unwrap_err();
        assert_eq!(err.field(), Some("kernel.c"), "{err}");
    }

    #[test]
    fn zero_sigma_is_accepted_with_a_warning() {
        let c = parse(&MINIMAL.replace("\"sigma2\": 1.0", "\"sigma2\": 0.0")).unwrap();
        assert_eq!(c.warnings.len(), 1);
        assert!(c.warnings[0].contains("sigma2"));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err =
            parse("{\n  \"kernel\": {\"type\": \"constant\", \"c\": 1.0},\n  oops\n}").unwrap_err();
        match err {
            ConfigError::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = parse(&MINIMAL.replace("\"max_agents\"", "\"max_agent\"")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }), "{err}");
    }

    #[test]
    fn flags_override_file_values() {
        let o = Overrides {
            seed: Some(9),
            runs: Some(7),
            alpha: Some(1.5),
            ..Overrides::default()
        };
        let c = parse_config(MINIMAL, &o).unwrap();
        assert_eq!(c.master_seed, 9);
        assert_eq!(c.runs, 7);
        assert_eq!(
            c.sim.schedule,
            GrowthSchedule::PowerExponential { alpha: 1.5, n0: 3 }
        );
        let bad = Overrides {
            alpha: Some(0.0),
            ..Overrides::default()
        };
        assert_eq!(
            parse_config(MINIMAL, &bad).unwrap_err().field(),
            Some("schedule.alpha")
        );
    }

    #[test]
    fn mismatched_initial_opinions_are_rejected() {
        let text = MINIMAL.replace(
            "\"max_agents\": 20",
            "\"max_agents\": 20, \"initial_opinions\": [[0.0]]",
        );
        assert_eq!(parse(&text).unwrap_err().field(), Some("initial_opinions"));
    }

    #[test]
    fn envelope_defaults_to_psi_star_and_initial_variance() {
        let text = MINIMAL.replace(
            "\"max_agents\": 20",
            r#""max_agents": 20, "initial_opinions": [[-1.0], [0.0], [1.0]],
               "envelope": {"jump_bound": {"type": "harmonic", "c": 1.0}}"#,
        );
        let env = parse(&text).unwrap().envelope.unwrap();
        assert_eq!(env.spec.lambda, 1.0);
        assert!((env.spec.y0 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(env.spec.direction, EnvelopeDirection::Upper);
    }
}
