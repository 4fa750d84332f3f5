//! Injection times `t_j` and the population counting function `N(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule producing the injection times. `t_0 = 0` and `N(0) = n0` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum GrowthSchedule {
    /// `N(t) = floor(exp(t^alpha))` once it exceeds `n0`; agent `n0 + j` enters
    /// at the first time this count reaches `n0 + j`.
    #[serde(rename = "power_exp")]
    PowerExponential { alpha: f64, n0: usize },
    /// A finite, strictly increasing list of positive injection times.
    #[serde(rename = "explicit")]
    ExplicitTimes { n0: usize, times: Vec<f64> },
}

impl GrowthSchedule {
    pub fn power_exponential(alpha: f64, n0: usize) -> Result<Self> {
        let s = GrowthSchedule::PowerExponential { alpha, n0 };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(n0: usize, times: Vec<f64>) -> Result<Self> {
        let s = GrowthSchedule::ExplicitTimes { n0, times };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n0() < 1 {
            return Err(Error::invalid(
                "n0",
                "initial population must be at least 1",
            ));
        }
        match self {
            GrowthSchedule::PowerExponential { alpha, .. } => {
                if !(alpha.is_finite() && *alpha > 0.0) {
                    return Err(Error::invalid(
                        "alpha",
                        format!("must be positive and finite, got {alpha}"),
                    ));
                }
            }
            GrowthSchedule::ExplicitTimes { times, .. } => {
                if let Some((i, t)) = times
                    .iter()
                    .enumerate()
                    .find(|(_, t)| !(t.is_finite() && **t > 0.0))
                {
                    return Err(Error::invalid(
                        format!("times[{i}]"),
                        format!("must be positive and finite, got {t}"),
                    ));
                }
                if let Some(i) = times.windows(2).position(|w| w[1] <= w[0]) {
                    return Err(Error::invalid(
                        format!("times[{}]", i + 1),
                        format!(
                            "times must be strictly increasing ({} follows {})",
                            times[i + 1],
                            times[i]
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn n0(&self) -> usize {
        match self {
            GrowthSchedule::PowerExponential { n0, .. }
            | GrowthSchedule::ExplicitTimes { n0, .. } => *n0,
        }
    }

    /// Number of injections the schedule can produce; `None` when unbounded.
    pub fn max_injections(&self) -> Option<usize> {
        match self {
            GrowthSchedule::PowerExponential { .. } => None,
            GrowthSchedule::ExplicitTimes { times, .. } => Some(times.len()),
        }
    }

    /// Time `t_j` at which agent `n0 + j` enters. `j = 0` gives `t_0 = 0`.
    pub fn injection_time(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Ok(0.0);
        }
        match self {
            GrowthSchedule::PowerExponential { alpha, n0 } => power_exp_time(*alpha, n0 + j),
            GrowthSchedule::ExplicitTimes { times, .. } => {
                times.get(j - 1).copied().ok_or(Error::OutOfRange {
                    index: j,
                    valid: format!("1..={}", times.len()),
                })
            }
        }
    }

    /// `t_1, ..., t_n`.
    pub fn injection_times(&self, n: usize) -> Result<Vec<f64>> {
        (1..=n).map(|j| self.injection_time(j)).collect()
    }

    /// `N(t) = n0 + max{j : t_j <= t}`; right-continuous and nondecreasing.
    pub fn population_at(&self, t: f64) -> usize {
        let n0 = self.n0();
        if !(t > 0.0) {
            return n0;
        }
        match self {
            GrowthSchedule::ExplicitTimes { times, .. } => {
                n0 + times.partition_point(|&tj| tj <= t)
            }
            GrowthSchedule::PowerExponential { alpha, .. } => {
                // Guess from the closed form, then settle against the injection times
                // themselves so that N(t_j) = n0 + j holds exactly.
                let approx = t.powf(*alpha).exp().floor().min(MAX_POPULATION as f64);
                let mut j = (approx as usize).saturating_sub(n0);
                let time = |j: usize| power_exp_time(*alpha, n0 + j).unwrap_or(f64::INFINITY);
                while j < MAX_POPULATION && time(j + 1) <= t {
                    j += 1;
                }
                while j > 0 && time(j) > t {
                    j -= 1;
                }
                n0 + j
            }
        }
    }
}

const MAX_POPULATION: usize = 1 << 52;

/// First time at which `floor(exp(t^alpha))` reaches `target`.
///
/// Starts from `(ln target)^(1/alpha)` and steps up by ulps until the floor
/// identity holds in floating point, so `floor(exp(t_j^alpha)) = n0 + j` exactly.
fn power_exp_time(alpha: f64, target: usize) -> Result<f64> {
    if target < 2 {
        return Err(Error::Schedule(format!(
            "population target {target} gives a nonpositive injection time"
        )));
    }
    let goal = target as f64;
    let mut t = goal.ln().powf(1.0 / alpha);
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Schedule(format!(
            "injection time for N = {target} is not finite and positive"
        )));
    }
    for _ in 0..256 {
        if t.powf(alpha).exp().floor() >= goal {
            return Ok(t);
        }
        t = t.next_up();
    }
    Err(Error::Schedule(format!(
        "could not resolve the injection time for N = {target}"
    )))
}
