use serde::{Deserialize, Serialize};

use super::{Integrator, SimState};
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::montecarlo::{run_rng, OpinionSource};
use crate::observables::{compute_moments, InjectionPair, MomentSeries};
use crate::schedule::GrowthSchedule;

pub const DEFAULT_STEP_MAX: f64 = 1e-2;

/// Times at which a run samples a [`MomentRecord`](crate::observables::MomentRecord)
/// in addition to `t = 0`, the end time, and both sides of every injection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RecordGrid {
    Uniform {
        dt: f64,
    },
    /// `t_min * 10^(i / per_decade)` for `i = 0, 1, ...`
    Geometric {
        t_min: f64,
        per_decade: usize,
    },
    EventsOnly,
}

impl Default for RecordGrid {
    fn default() -> Self {
        RecordGrid::Geometric {
            t_min: 0.01,
            per_decade: 10,
        }
    }
}

impl RecordGrid {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RecordGrid::Uniform { dt } if !(dt.is_finite() && dt > 0.0) => {
                Err(Error::invalid("dt", format!("must be positive, got {dt}")))
            }
            RecordGrid::Geometric { t_min, .. } if !(t_min.is_finite() && t_min > 0.0) => Err(
                Error::invalid("t_min", format!("must be positive, got {t_min}")),
            ),
            RecordGrid::Geometric { per_decade: 0, .. } => {
                Err(Error::invalid("per_decade", "must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Strictly increasing sample times in `(0, t_end]`; `t_end` is always last.
    pub fn times(&self, t_end: f64) -> Vec<f64> {
        let mut out: Vec<f64> = match *self {
            RecordGrid::Uniform { dt } => (1..)
                .map(|i| i as f64 * dt)
                .take_while(|&t| t < t_end)
                .collect(),
            RecordGrid::Geometric { t_min, per_decade } => (0..)
                .map(|i| t_min * 10f64.powf(i as f64 / per_decade as f64))
                .take_while(|&t| t < t_end)
                .collect(),
            RecordGrid::EventsOnly => Vec::new(),
        };
        if t_end > 0.0 {
            out.push(t_end);
        }
        out
    }
}

/// When a run stops: at the horizon, after `max_injections` injections, or
/// whichever comes first when both are set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StopRule {
    pub horizon: Option<f64>,
    pub max_injections: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dim: usize,
    pub kernel: Kernel,
    pub schedule: GrowthSchedule,
    pub source: OpinionSource,
    pub initial_opinions: Vec<Vec<f64>>,
    pub step_max: f64,
    pub stop: StopRule,
    pub record_grid: RecordGrid,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "must be at least 1"));
        }
        self.schedule.validate().map_err(|e| e.within("schedule"))?;
        self.source.validate().map_err(|e| e.within("source"))?;
        if self.source.dim() != self.dim {
            return Err(Error::invalid(
                "source.m",
                format!(
                    "dimension {} does not match dim = {}",
                    self.source.dim(),
                    self.dim
                ),
            ));
        }
        if self.initial_opinions.len() != self.schedule.n0() {
            return Err(Error::invalid(
                "initial_opinions",
                format!(
                    "{} opinions given but schedule.n0 = {}",
                    self.initial_opinions.len(),
                    self.schedule.n0()
                ),
            ));
        }
        SimState::new(self.dim, &self.initial_opinions)?;
        if !(self.step_max.is_finite() && self.step_max > 0.0) {
            return Err(Error::invalid(
                "step_max",
                format!("must be positive, got {}", self.step_max),
            ));
        }
        if let Some(h) = self.stop.horizon {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::invalid(
                    "horizon",
                    format!("must be positive, got {h}"),
                ));
            }
        }
        if self.stop.horizon.is_none()
            && self.stop.max_injections.is_none()
            && self.schedule.max_injections().is_none()
        {
            return Err(Error::invalid(
                "horizon",
                "an unbounded schedule needs a horizon or max_agents",
            ));
        }
        self.record_grid
            .validate()
            .map_err(|e| e.within("record_grid"))
    }

    /// Number of injections the run may apply, ignoring the horizon.
    pub fn injection_cap(&self) -> Option<usize> {
        match (self.stop.max_injections, self.schedule.max_injections()) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Final time of the run.
    pub fn end_time(&self) -> Result<f64> {
        // the count rule only fires if the schedule can produce that many injections
        let by_count = match self.stop.max_injections {
            Some(k)
                if self
                    .schedule
                    .max_injections()
                    .is_none_or(|avail| k <= avail) =>
            {
                Some(self.schedule.injection_time(k)?)
            }
            _ => None,
        };
        match (self.stop.horizon, by_count) {
            (Some(h), Some(t)) => Ok(h.min(t)),
            (Some(h), None) => Ok(h),
            (None, Some(t)) => Ok(t),
            (None, None) => match self.schedule.max_injections() {
                Some(k) => self.schedule.injection_time(k),
                None => Err(Error::invalid("horizon", "no stopping rule")),
            },
        }
    }
}

/// Run one trajectory. Randomness enters only through the injected opinions,
/// one draw per injection in injection order, so the result is a pure
/// function of `(config, seed)`.
pub fn run_simulation(config: &SimConfig, seed: u64) -> Result<MomentSeries> {
    config.validate()?;
    let schedule = &config.schedule;
    let kernel = &config.kernel;
    let m = config.source.mean();
    let t_end = config.end_time()?;
    let cap = config.injection_cap();

    let mut rng = run_rng(seed);
    let mut state = SimState::new(config.dim, &config.initial_opinions)?;
    let mut integrator = Integrator::new(*kernel, config.step_max)?;
    let grid = config.record_grid.times(t_end);

    let mut series = MomentSeries::new(config.dim, m.to_vec());
    series.records.push(compute_moments(&state, kernel, m));

    let next_injection = |j: usize| -> Result<Option<f64>> {
        if cap.is_some_and(|c| j > c) {
            return Ok(None);
        }
        let t = schedule.injection_time(j)?;
        Ok((t <= t_end).then_some(t))
    };

    let mut next_inj = next_injection(1)?;
    let mut grid_iter = grid.iter().copied().peekable();
    loop {
        let next_grid = grid_iter.peek().copied();
        let target = match (next_inj, next_grid) {
            (None, None) => break,
            (Some(a), None) => a,
            (None, Some(b)) => b,
            (Some(a), Some(b)) => a.min(b),
        };
        integrator.advance(&mut state, schedule, target)?;

        if next_inj == Some(target) {
            let pre = compute_moments(&state, kernel, m);
            let x_new = config.source.sample(&mut rng);
            state.inject(&x_new, target)?;
            let post = compute_moments(&state, kernel, m);
            series.injections.push(InjectionPair {
                k: state.k(),
                x_new,
                pre,
                post,
            });
            next_inj = next_injection(state.k() + 1)?;
        }
        if next_grid == Some(target) {
            series.records.push(compute_moments(&state, kernel, m));
            grid_iter.next();
        }
    }
    Ok(series)
}
