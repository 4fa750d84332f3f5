//! Built-in oracle suite behind `growpop check`.

use growpop_core::analysis::condition_sum_from_times;
use growpop_core::{
    predict_jumps, run_simulation, GrowthSchedule, Kernel, OpinionSource, RecordGrid, SimConfig,
    StopRule,
};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub fn run_checks() -> Vec<OracleResult> {
    vec![constant_decay(), jump_oracles(), exponential_sum()]
}

fn outcome(name: &'static str, result: growpop_core::Result<(bool, String)>) -> OracleResult {
    match result {
        Ok((passed, detail)) => OracleResult {
            name,
            passed,
            detail,
        },
        Err(e) => OracleResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

/// Fixed population under a constant kernel: `v(t) = v(0) exp(-2 c t)`.
fn constant_decay() -> OracleResult {
    let run = || {
        let c = 2.0;
        let config = SimConfig {
            dim: 2,
            kernel: Kernel::constant(c)?,
            schedule: GrowthSchedule::explicit(8, vec![5.0])?,
            source: OpinionSource::IsotropicGaussian {
                m: vec![0.0, 0.0],
                sigma2: 1.0,
            },
            initial_opinions: (0..8)
                .map(|i| vec![(i as f64).sin() * 3.0, (i * i) as f64 / 10.0])
                .collect(),
            step_max: 1e-3,
            stop: StopRule {
                horizon: Some(1.0),
                max_injections: None,
            },
            record_grid: RecordGrid::Uniform { dt: 0.05 },
        };
        let series = run_simulation(&config, 0)?;
        let v0 = series.records[0].v;
        let worst = series
            .records
            .iter()
            .map(|r| {
                let exact = v0 * (-2.0 * c * r.t).exp();
                (r.v - exact).abs() / exact
            })
            .fold(0.0, f64::max);
        Ok((worst <= 1e-6, format!("max relative error {worst:.2e}")))
    };
    outcome("constant-kernel decay", run())
}

/// Observed jumps at injections against the exact jump formulas.
fn jump_oracles() -> OracleResult {
    let run = || {
        let config = SimConfig {
            dim: 1,
            kernel: Kernel::rational(0.5, 1.0)?,
            schedule: GrowthSchedule::power_exponential(1.5, 5)?,
            source: OpinionSource::IsotropicGaussian {
                m: vec![1.0],
                sigma2: 2.0,
            },
            initial_opinions: (0..5).map(|i| vec![i as f64 - 2.0]).collect(),
            step_max: 1e-2,
            stop: StopRule {
                horizon: None,
                max_injections: Some(100),
            },
            record_grid: RecordGrid::EventsOnly,
        };
        let series = run_simulation(&config, 1)?;
        let mut worst: f64 = 0.0;
        for pair in &series.injections {
            let pred = predict_jumps(&pair.pre, &pair.x_new, pair.k, 5)?;
            let scale = 1.0 + pair.pre.m2.abs() + pair.x_new[0] * pair.x_new[0];
            worst = worst
                .max((pair.post.m1[0] - pair.pre.m1[0] - pred.dm1[0]).abs() / scale)
                .max((pair.post.m2 - pair.pre.m2 - pred.dm2).abs() / scale)
                .max((pair.post.v - pair.pre.v - pred.dv).abs() / scale);
        }
        Ok((
            worst <= 1e-12,
            format!(
                "{} injections, max scaled error {worst:.2e}",
                series.injections.len()
            ),
        ))
    };
    outcome("jump oracles", run())
}

/// With `t_k = ln k` and `lambda = 1` the condition sum is exactly 1.
fn exponential_sum() -> OracleResult {
    let run = || {
        let mut worst: f64 = 0.0;
        for n in [10usize, 1000, 100_000] {
            let times: Vec<f64> = (1..=n).map(|k| (k as f64).ln()).collect();
            worst = worst.max((condition_sum_from_times(1.0, &times)? - 1.0).abs());
        }
        Ok((worst <= 1e-12, format!("max |S - 1| {worst:.2e}")))
    };
    outcome("lambda = 1 condition sum", run())
}
