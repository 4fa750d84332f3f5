use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use growpop_core::analysis::{
    asymptotic_times, condition_sum_profile, envelope_profile, geometric_n_grid, MIN_CLASSIFY_N,
};
use growpop_core::io::{write_ensemble_csv, write_series_csv};
use growpop_core::{
    classify_schedule, run_ensemble, run_ensemble_with_workers, run_simulation, Classification,
};

use crate::config::{ExperimentConfig, DEFAULT_ENVELOPE_N_MAX};
use crate::CliError;

pub const DEFAULT_CONDITIONS_N_MAX: usize = 1_000_000;

/// Write to `path`, or stdout when no path is given.
fn with_output(
    path: Option<&Path>,
    f: impl FnOnce(&mut dyn Write) -> Result<(), CliError>,
) -> Result<(), CliError> {
    match path {
        Some(p) => {
            let mut w = BufWriter::new(File::create(p).map_err(|e| CliError::Output {
                path: p.to_path_buf(),
                source: e,
            })?);
            f(&mut w)?;
            w.flush()?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut w = stdout.lock();
            f(&mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

pub fn simulate(config: &ExperimentConfig) -> Result<(), CliError> {
    let seed = config.master_seed;
    let series = run_simulation(&config.sim, seed)?;
    log::info!(
        "simulated {} records, {} injections",
        series.records.len(),
        series.injections.len()
    );
    with_output(config.output_path.as_deref(), |w| {
        write_series_csv(&series, w, &[("seed", seed.to_string())])?;
        Ok(())
    })
}

pub fn ensemble(config: &ExperimentConfig, workers: Option<usize>) -> Result<(), CliError> {
    let seed = config.master_seed;
    let stats = match workers {
        Some(w) => run_ensemble_with_workers(&config.sim, config.runs, seed, w)?,
        None => run_ensemble(&config.sim, config.runs, seed)?,
    };
    log::info!(
        "ensemble of {} runs on {} grid points",
        stats.runs,
        stats.grid.len()
    );
    with_output(config.output_path.as_deref(), |w| {
        write_ensemble_csv(
            &stats,
            w,
            &[
                ("seed", seed.to_string()),
                ("runs", config.runs.to_string()),
            ],
        )?;
        Ok(())
    })
}

/// Inputs of the `conditions` table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsRequest {
    pub alpha: f64,
    pub lambda_star: f64,
    pub lambda_max: f64,
    pub n_max: usize,
    pub per_decade: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionsTable {
    pub class: Classification,
    /// Whether the numeric cross-check ran (it needs `n_max >= MIN_CLASSIFY_N`).
    pub cross_checked: bool,
    pub rows: Vec<(usize, f64, f64)>,
}

pub fn conditions_table(req: &ConditionsRequest) -> Result<ConditionsTable, CliError> {
    let (class, cross_checked) = if req.n_max >= MIN_CLASSIFY_N {
        let verdict = classify_schedule(req.alpha, req.lambda_star, req.lambda_max, req.n_max)?;
        (verdict.class, true)
    } else {
        (Classification::from_alpha(req.alpha)?, false)
    };
    let times = asymptotic_times(req.alpha, req.n_max)?;
    let grid = geometric_n_grid(req.n_max, req.per_decade);
    let s_star = condition_sum_profile(req.lambda_star, &times, &grid)?;
    let s_max = condition_sum_profile(req.lambda_max, &times, &grid)?;
    let rows = grid
        .into_iter()
        .zip(s_star)
        .zip(s_max)
        .map(|((n, a), b)| (n, a, b))
        .collect();
    Ok(ConditionsTable {
        class,
        cross_checked,
        rows,
    })
}

pub fn conditions(req: &ConditionsRequest, out: Option<&Path>) -> Result<(), CliError> {
    let table = conditions_table(req)?;
    with_output(out, |w| {
        writeln!(
            w,
            "# alpha={} lambda_star={} lambda_max={} cross_checked={}",
            req.alpha, req.lambda_star, req.lambda_max, table.cross_checked
        )?;
        writeln!(w, "n,s_psi_star,s_psi_max,classification")?;
        for (n, a, b) in &table.rows {
            writeln!(w, "{n},{a:.12},{b:.12},{}", table.class.as_str())?;
        }
        Ok(())
    })
}

pub fn envelope(config: &ExperimentConfig, n_max: Option<usize>) -> Result<(), CliError> {
    let env = config.envelope.as_ref().ok_or_else(|| {
        CliError::Usage("the envelope command needs an `envelope` block in the config".into())
    })?;
    let rows = match &env.n {
        Some(n) if n_max.is_none() => {
            let mut n = n.clone();
            n.sort_unstable();
            n.dedup();
            n
        }
        _ => geometric_n_grid(n_max.unwrap_or(DEFAULT_ENVELOPE_N_MAX), 4),
    };
    let last = *rows.last().expect("row grid is nonempty");
    let times = config.sim.schedule.injection_times(last)?;
    let profile = envelope_profile(&env.spec, &times)?;
    with_output(config.output_path.as_deref(), |w| {
        writeln!(
            w,
            "# lambda={} y0={} direction={:?}",
            env.spec.lambda, env.spec.y0, env.spec.direction
        )?;
        writeln!(w, "n,t_n,bound")?;
        for &n in &rows {
            writeln!(w, "{n},{:?},{:?}", times[n - 1], profile[n - 1])?;
        }
        Ok(())
    })
}
