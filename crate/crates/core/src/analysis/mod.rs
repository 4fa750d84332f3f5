//! Consensus criteria for a growth schedule: the harmonic-exponential
//! condition sums, the generalized Dawson integral they are compared with,
//! the jump envelope, and decay-rate fitting.

pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sum_exp;
use crate::schedule::GrowthSchedule;

/// `S(n) = sum_{k=1}^n (1/k) exp(-lambda (t_n - t_k))` for `times = [t_1, ..., t_n]`.
///
/// Every exponent `-lambda (t_n - t_k) - ln k` is nonpositive and the sum is
/// anchored at the largest one, so no term can overflow.
pub fn condition_sum_from_times(lambda: f64, times: &[f64]) -> Result<f64> {
    check_lambda(lambda)?;
    let t_n = *times
        .last()
        .ok_or_else(|| Error::Domain("condition sum needs n >= 1".into()))?;
    let exponents: Vec<f64> = times
        .iter()
        .enumerate()
        .map(|(i, &t_k)| -lambda * (t_n - t_k) - ((i + 1) as f64).ln())
        .collect();
    Ok(sum_exp(&exponents))
}

/// Condition sum for the first `n` injections of `schedule`. With
/// `lambda = psi_star` a vanishing limit gives convergence; with
/// `lambda = psi_max` a positive limsup rules it out.
pub fn condition_sum(lambda: f64, schedule: &GrowthSchedule, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain("condition sum needs n >= 1".into()));
    }
    condition_sum_from_times(lambda, &schedule.injection_times(n)?)
}

/// `S(n)` at each `n` in the increasing list `at`, via the one-step recursion
/// `S(n) = S(n-1) exp(-lambda (t_n - t_{n-1})) + 1/n`.
pub fn condition_sum_profile(lambda: f64, times: &[f64], at: &[usize]) -> Result<Vec<f64>> {
    check_lambda(lambda)?;
    if let Some(&bad) = at.iter().find(|&&n| n == 0 || n > times.len()) {
        return Err(Error::OutOfRange {
            index: bad,
            valid: format!("1..={}", times.len()),
        });
    }
    if at.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain(
            "evaluation points must be nondecreasing".into(),
        ));
    }
    let mut out = Vec::with_capacity(at.len());
    let mut targets = at.iter().peekable();
    let mut s = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let n = i + 1;
        if i > 0 {
            s *= (-lambda * (t - times[i - 1])).exp();
        }
        s += 1.0 / n as f64;
        while targets.next_if(|&&m| m == n).is_some() {
            out.push(s);
        }
        if targets.peek().is_none() {
            break;
        }
    }
    Ok(out)
}

/// `t_k = (ln k)^(1/alpha)`, `k = 1..=n`: the large-`k` form of the injection
/// times of `N(t) = floor(exp(t^alpha))`.
pub fn asymptotic_times(alpha: f64, n: usize) -> Result<Vec<f64>> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::Domain(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let p = 1.0 / alpha;
    Ok((1..=n).map(|k| (k as f64).ln().powf(p)).collect())
}

/// Limit of the condition sum for exponential growth (`t_k = ln k`): `1/lambda`.
pub fn exponential_limit(lambda: f64) -> f64 {
    1.0 / lambda
}

/// Generalized Dawson integral `F(p, x) = exp(-lambda x^p) int_0^x exp(lambda t^p) dt`.
///
/// Evaluated as `x int_0^1 exp(lambda x^p expm1(p ln u)) du`, so the exponent
/// never exceeds zero and `t^p - x^p` keeps full relative precision near `t = x`.
pub fn dawson_f(p: f64, lambda: f64, x: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::Domain(format!("p must be positive, got {p}")));
    }
    check_lambda(lambda)?;
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("x must be positive, got {x}")));
    }
    let scale = lambda * x.powf(p);
    let integrand = |u: f64| {
        if u <= 0.0 {
            (-scale).exp()
        } else {
            (scale * (p * u.ln()).exp_m1()).exp()
        }
    };
    let r = quadrature::integrate(integrand, 0.0, 1.0, 1e-300, 1e-12, 4000);
    Ok(x * r.value)
}

/// Large-`x` behaviour of `F(p, x)` for `p > 1`: `1 / (lambda p x^(p-1))`.
pub fn dawson_asymptote(p: f64, lambda: f64, x: f64) -> f64 {
    1.0 / (lambda * p * x.powf(p - 1.0))
}

/// Outcome of the growth-rate test for `N(t) = floor(exp(t^alpha))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// `alpha < 1`: the `psi_star` condition sum vanishes; mean-variance convergence.
    ConvergesC1,
    /// `alpha > 1`: the `psi_max` condition sum stays positive; no convergence.
    FailsC2,
    /// `alpha = 1`: the condition sum tends to `1/lambda > 0` for every `lambda`.
    ExponentialBoundary,
}

impl Classification {
    /// The class decided by `alpha` alone.
    pub fn from_alpha(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Domain(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(if alpha < 1.0 {
            Classification::ConvergesC1
        } else if alpha > 1.0 {
            Classification::FailsC2
        } else {
            Classification::ExponentialBoundary
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::ConvergesC1 => "converges_c1",
            Classification::FailsC2 => "fails_c2",
            Classification::ExponentialBoundary => "exponential_boundary",
        }
    }
}

/// Classification with the condition sums that were inspected.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleVerdict {
    pub class: Classification,
    pub grid: Vec<usize>,
    pub s_star: Vec<f64>,
    pub s_max: Vec<f64>,
}

pub const MIN_CLASSIFY_N: usize = 10_000;

/// Geometric grid `10, 10^(1+1/4), ...` up to and including `n_max`.
pub fn geometric_n_grid(n_max: usize, per_decade: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (0..)
        .map(|i| (10f64.powf(1.0 + i as f64 / per_decade as f64)).round() as usize)
        .take_while(|&n| n < n_max)
        .collect();
    grid.dedup();
    grid.push(n_max);
    grid
}

/// Classify the power-exponential law with exponent `alpha`.
///
/// The class follows from `alpha` alone. The numbers are a cross-check: for
/// `alpha < 1` the Dawson integral at rate `psi_star` must be decreasing in
/// its tail; otherwise the `psi_max` condition sums over the last two decades
/// of `n` must stay bounded away from zero (and the Dawson integral must not
/// decrease). A disagreement is reported as [`Error::Diagnostic`].
pub fn classify_schedule(
    alpha: f64,
    psi_star: f64,
    psi_max: f64,
    n_max: usize,
) -> Result<ScheduleVerdict> {
    check_lambda(psi_star)?;
    check_lambda(psi_max)?;
    if psi_star > psi_max {
        return Err(Error::Domain(format!(
            "psi_star = {psi_star} exceeds psi_max = {psi_max}"
        )));
    }
    if n_max < MIN_CLASSIFY_N {
        return Err(Error::Domain(format!(
            "n_max = {n_max} is too small to resolve the trend (need >= {MIN_CLASSIFY_N})"
        )));
    }
    let times = asymptotic_times(alpha, n_max)?;
    let grid = geometric_n_grid(n_max, 4);
    let s_star = condition_sum_profile(psi_star, &times, &grid)?;
    let s_max = condition_sum_profile(psi_max, &times, &grid)?;

    let class = Classification::from_alpha(alpha)?;

    let p = 1.0 / alpha;
    // x at which lambda x^p = 100: far into the asymptotic regime
    let x_far = |lambda: f64| (100.0 / lambda).powf(alpha);
    let tail: Vec<f64> = grid
        .iter()
        .zip(&s_max)
        .filter(|(&n, _)| n * 100 >= n_max)
        .map(|(_, &s)| s)
        .collect();
    let tail_min = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let tail_max = tail.iter().copied().fold(0.0, f64::max);

    match class {
        Classification::ConvergesC1 => {
            let x = x_far(psi_star);
            let (near, far) = (dawson_f(p, psi_star, 0.5 * x)?, dawson_f(p, psi_star, x)?);
            if !(far < near) {
                return Err(Error::Diagnostic(format!(
                    "alpha = {alpha} < 1 but F(p, x) does not decrease: F({}) = {near}, F({x}) = {far}",
                    0.5 * x
                )));
            }
        }
        Classification::FailsC2 | Classification::ExponentialBoundary => {
            if !(tail_min > 0.0 && tail_min >= 0.5 * tail_max) {
                return Err(Error::Diagnostic(format!(
                    "alpha = {alpha} >= 1 but the psi_max condition sums fall from {tail_max} to {tail_min}"
                )));
            }
            let x = x_far(psi_max);
            let (near, far) = (dawson_f(p, psi_max, 0.5 * x)?, dawson_f(p, psi_max, x)?);
            if far < near * (1.0 - 1e-9) {
                return Err(Error::Diagnostic(format!(
                    "alpha = {alpha} >= 1 but F(p, x) decreases: F({}) = {near}, F({x}) = {far}",
                    0.5 * x
                )));
            }
        }
    }

    Ok(ScheduleVerdict {
        class,
        grid,
        s_star,
        s_max,
    })
}

/// Algebraic rate exponents for `alpha < 1`. Condition sums decay faster than
/// `(ln n)^(-beta_n)` for `beta_n < 1/alpha - 1`; in time this is `t^(-alpha beta_n)`
/// with `alpha beta_n < 1 - alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateExponents {
    /// Exponent on the `ln n` scale.
    pub n_scale: f64,
    /// Exponent on the `t` scale.
    pub t_scale: f64,
}

pub fn rate_exponents(alpha: f64, n_scale: f64) -> Result<RateExponents> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "an algebraic rate needs 0 < alpha < 1, got {alpha}"
        )));
    }
    let limit = 1.0 / alpha - 1.0;
    if !(n_scale >= 0.0 && n_scale < limit) {
        return Err(Error::Domain(format!(
            "n-scale exponent must lie in [0, {limit}), got {n_scale}"
        )));
    }
    Ok(RateExponents {
        n_scale,
        t_scale: alpha * n_scale,
    })
}

/// Jump bound `g(n)` of the envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpBound {
    /// `g(n) = c / n`
    #[serde(rename = "harmonic")]
    HarmonicScaled { c: f64 },
    /// `g(n) = values[n - 1]`, e.g. ensemble estimates of the expected jumps.
    Explicit { values: Vec<f64> },
}

impl JumpBound {
    pub fn at(&self, n: usize) -> Result<f64> {
        match self {
            JumpBound::HarmonicScaled { c } => Ok(c / n as f64),
            JumpBound::Explicit { values } => {
                values
                    .get(n.wrapping_sub(1))
                    .copied()
                    .ok_or(Error::OutOfRange {
                        index: n,
                        valid: format!("1..={}", values.len()),
                    })
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeDirection {
    /// `y' <= -lambda y` and jumps `<= g(n)`: the envelope bounds `y(t_n)` from above.
    #[default]
    Upper,
    /// `y' >= -lambda y` and jumps `>= g(n)`: the envelope bounds `y(t_n)` from below.
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSpec {
    pub lambda: f64,
    pub y0: f64,
    pub jump_bound: JumpBound,
    #[serde(default)]
    pub direction: EnvelopeDirection,
}

impl EnvelopeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::invalid(
                "lambda",
                format!("must be positive, got {}", self.lambda),
            ));
        }
        if !(self.y0.is_finite() && self.y0 >= 0.0) {
            return Err(Error::invalid(
                "y0",
                format!("must be nonnegative, got {}", self.y0),
            ));
        }
        Ok(())
    }

    fn jump(&self, n: usize) -> Result<f64> {
        let g = self.jump_bound.at(n)?;
        if self.direction == EnvelopeDirection::Upper && g < 0.0 {
            return Err(Error::Domain(format!(
                "upper envelope needs g(n) >= 0, got g({n}) = {g}"
            )));
        }
        Ok(g)
    }
}

/// `y0 exp(-lambda t_n) + sum_{k=1}^n g(k) exp(-lambda (t_n - t_k))`.
pub fn envelope_bound(spec: &EnvelopeSpec, schedule: &GrowthSchedule, n: usize) -> Result<f64> {
    envelope_from_times(spec, &schedule.injection_times(n)?)
}

/// Envelope at `n = times.len()` for `times = [t_1, ..., t_n]` (with `t_0 = 0`).
pub fn envelope_from_times(spec: &EnvelopeSpec, times: &[f64]) -> Result<f64> {
    spec.validate()?;
    let t_n = times.last().copied().unwrap_or(0.0);
    let mut terms = Vec::with_capacity(times.len() + 1);
    let mut signs = Vec::with_capacity(times.len() + 1);
    let push = |terms: &mut Vec<f64>, signs: &mut Vec<f64>, coeff: f64, exponent: f64| {
        if coeff != 0.0 {
            terms.push(coeff.abs().ln() + exponent);
            signs.push(coeff.signum());
        }
    };
    push(&mut terms, &mut signs, spec.y0, -spec.lambda * t_n);
    for (i, &t_k) in times.iter().enumerate() {
        push(
            &mut terms,
            &mut signs,
            spec.jump(i + 1)?,
            -spec.lambda * (t_n - t_k),
        );
    }
    let positive: Vec<f64> = terms
        .iter()
        .zip(&signs)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&t, _)| t)
        .collect();
    let negative: Vec<f64> = terms
        .iter()
        .zip(&signs)
        .filter(|(_, &s)| s < 0.0)
        .map(|(&t, _)| t)
        .collect();
    Ok(sum_exp(&positive) - sum_exp(&negative))
}

/// Envelope values for `n = 1..=times.len()` by the recursion
/// `E(n) = E(n-1) exp(-lambda (t_n - t_{n-1})) + g(n)`, `E(0) = y0`.
pub fn envelope_profile(spec: &EnvelopeSpec, times: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut prev_t = 0.0;
    let mut e = spec.y0;
    let mut out = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        e = e * (-spec.lambda * (t - prev_t)).exp() + spec.jump(i + 1)?;
        prev_t = t;
        out.push(e);
    }
    Ok(out)
}

/// Least-squares power law on the tail of a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Minus the slope of `ln(value)` against `ln(t)`.
    pub beta_hat: f64,
    pub r2: f64,
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Fit `value ~ t^(-beta)` over the last `window` fraction of `series`.
pub fn fit_decay_exponent(series: &[(f64, f64)], window: f64) -> Result<DecayFit> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::Domain(format!(
            "window must lie in (0, 1], got {window}"
        )));
    }
    let take = ((series.len() as f64) * window).ceil() as usize;
    let tail = &series[series.len() - take.min(series.len())..];
    if tail.len() < MIN_FIT_POINTS {
        return Err(Error::Domain(format!(
            "need at least {MIN_FIT_POINTS} points in the window, got {}",
            tail.len()
        )));
    }
    if let Some(&(t, v)) = tail.iter().find(|(t, v)| !(*t > 0.0 && *v > 0.0)) {
        return Err(Error::Domain(format!(
            "nonpositive point ({t}, {v}) in the fit window: no algebraic decay regime"
        )));
    }
    let xs: Vec<f64> = tail.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, v)| v.ln()).collect();
    let n = xs.len() as f64;
    // anchor at the first point so a constant series gives an exactly zero slope
    let (x0, y0) = (xs[0], ys[0]);
    let mx = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n;
    let my = y0 + ys.iter().map(|y| y - y0).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - y0)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("all fit points share one time".into()));
    }
    let slope = sxy / sxx;
    let residual: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (my + slope * (x - mx));
            e * e
        })
        .sum();
    let r2 = if syy <= f64::EPSILON * f64::EPSILON * n {
        1.0
    } else {
        1.0 - residual / syy
    };
    Ok(DecayFit {
        beta_hat: -slope,
        r2,
        points: tail.len(),
    })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda.is_finite() && lambda > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "lambda must be positive, got {lambda}"
        )))
    }
}
