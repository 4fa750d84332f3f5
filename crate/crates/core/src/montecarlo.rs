//! Incoming-opinion sources, per-run seeding, and ensemble statistics.
//!
//! Every run owns a ChaCha8 stream seeded by [`derive_run_seed`], and
//! aggregation walks runs in index order, so ensemble results do not depend
//! on how many worker threads executed the replicas.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{run_simulation, SimConfig};
use crate::error::{Error, Result};
use crate::numeric::squared_distance;
use crate::observables::{MomentSeries, RecordEvent};

pub type RunRng = ChaCha8Rng;

pub fn run_rng(seed: u64) -> RunRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; a bijection on `u64`.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `run_index` under `master_seed`.
///
/// `mix64(mix64(master) ^ mix64(index ^ K))`: for a fixed master the map is
/// injective in the index, and for a fixed index injective in the master.
pub fn derive_run_seed(master_seed: u64, run_index: u64) -> u64 {
    mix64(mix64(master_seed) ^ mix64(run_index ^ 0x9e37_79b9_7f4a_7c15))
}

/// Distribution of the opinions of incoming agents. `sigma2` is the trace of
/// the covariance, i.e. `E|X - m|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OpinionSource {
    /// Covariance `(sigma2 / d) I`.
    #[serde(rename = "gaussian")]
    IsotropicGaussian { m: Vec<f64>, sigma2: f64 },
    /// Independent uniform coordinates on `[m_i - h, m_i + h]`, `h = sqrt(3 sigma2 / d)`.
    UniformBox { m: Vec<f64>, sigma2: f64 },
    /// `m + u` or `m - u` with equal probability, `u = sqrt(sigma2 / d) (1, ..., 1)`.
    TwoPoint { m: Vec<f64>, sigma2: f64 },
}

impl OpinionSource {
    pub fn validate(&self) -> Result<()> {
        let (m, sigma2) = self.parts();
        if m.is_empty() {
            return Err(Error::invalid(
                "m",
                "mean must have at least one coordinate",
            ));
        }
        if let Some(v) = m.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("m", format!("non-finite coordinate {v}")));
        }
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(Error::invalid(
                "sigma2",
                format!("must be nonnegative and finite, got {sigma2}"),
            ));
        }
        Ok(())
    }

    fn parts(&self) -> (&[f64], f64) {
        match self {
            OpinionSource::IsotropicGaussian { m, sigma2 }
            | OpinionSource::UniformBox { m, sigma2 }
            | OpinionSource::TwoPoint { m, sigma2 } => (m, *sigma2),
        }
    }

    pub fn mean(&self) -> &[f64] {
        self.parts().0
    }

    pub fn sigma2(&self) -> f64 {
        self.parts().1
    }

    pub fn dim(&self) -> usize {
        self.mean().len()
    }

    /// One draw `X_k`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let (m, sigma2) = self.parts();
        let per_coord = sigma2 / m.len() as f64;
        match self {
            OpinionSource::IsotropicGaussian { .. } => {
                let s = per_coord.sqrt();
                m.iter()
                    .map(|mi| mi + s * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            OpinionSource::UniformBox { .. } => {
                let h = (3.0 * per_coord).sqrt();
                m.iter()
                    .map(|mi| mi + h * (2.0 * rng.random::<f64>() - 1.0))
                    .collect()
            }
            OpinionSource::TwoPoint { .. } => {
                let u = per_coord.sqrt();
                let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                m.iter().map(|mi| mi + sign * u).collect()
            }
        }
    }
}

/// One draw from `source` using the caller's stream.
pub fn sample_incoming<R: Rng + ?Sized>(source: &OpinionSource, rng: &mut R) -> Vec<f64> {
    source.sample(rng)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

impl Estimate {
    /// Distance from `value` in standard errors (`inf` when the stderr is zero and they differ).
    pub fn z_score(&self, value: f64) -> f64 {
        let d = (self.mean - value).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }
}

/// Welford accumulator; `stderr` uses the unbiased sample variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn estimate(&self) -> Estimate {
        let stderr = if self.count < 2 {
            f64::NAN
        } else {
            (self.m2.max(0.0) / (self.count - 1) as f64 / self.count as f64).sqrt()
        };
        Estimate {
            mean: self.mean,
            stderr,
            count: self.count,
        }
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Shared record time of an ensemble.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub t: f64,
    pub n: usize,
    pub event: RecordEvent,
}

/// Ensemble statistics of the variance jump at injection `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpStats {
    pub k: usize,
    pub t: f64,
    /// `E[v(t_k-)]`
    pub v_pre: Estimate,
    /// `E[v(t_k+) - v(t_k-)]`
    pub dv: Estimate,
}

/// Pointwise sample means and standard errors over replicas sharing one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub runs: usize,
    pub grid: Vec<GridPoint>,
    pub mean_w: Vec<f64>,
    pub stderr_w: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub stderr_v: Vec<f64>,
    pub mean_m1_dev: Vec<f64>,
    pub stderr_m1_dev: Vec<f64>,
    pub jumps: Vec<JumpStats>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    /// Mean square distance to `m`.
    W,
    /// Variance about the running mean.
    V,
    /// `|m1 - m|^2`.
    M1Deviation,
}

impl EnsembleStats {
    fn column(&self, which: Statistic) -> (&[f64], &[f64]) {
        match which {
            Statistic::W => (&self.mean_w, &self.stderr_w),
            Statistic::V => (&self.mean_v, &self.stderr_v),
            Statistic::M1Deviation => (&self.mean_m1_dev, &self.stderr_m1_dev),
        }
    }

    /// Grid index of the state right after injection `k` (`k = 0`: initial record).
    pub fn index_after(&self, k: usize) -> Option<usize> {
        if k == 0 {
            return (!self.grid.is_empty()).then_some(0);
        }
        self.grid
            .iter()
            .enumerate()
            .filter(|(_, g)| g.event == RecordEvent::PostJump)
            .nth(k - 1)
            .map(|(i, _)| i)
    }

    /// Indices of the plain grid records (no injection events).
    pub fn record_indices(&self) -> Vec<usize> {
        self.grid
            .iter()
            .enumerate()
            .filter(|(_, g)| g.event == RecordEvent::Record)
            .map(|(i, _)| i)
            .collect()
    }

    /// Mean variance jump per injection, `E[dv_k]` for `k = 1..`.
    pub fn mean_jump_v(&self) -> Vec<f64> {
        self.jumps.iter().map(|j| j.dv.mean).collect()
    }
}

/// Estimate of `which` at `t_k+`.
pub fn ensemble_statistic(
    stats: &EnsembleStats,
    which: Statistic,
    at_k: usize,
) -> Result<Estimate> {
    let idx = stats.index_after(at_k).ok_or(Error::OutOfRange {
        index: at_k,
        valid: format!("0..={}", stats.jumps.len()),
    })?;
    let (mean, stderr) = stats.column(which);
    Ok(Estimate {
        mean: mean[idx],
        stderr: stderr[idx],
        count: stats.runs,
    })
}

struct RunSummary {
    grid: Vec<GridPoint>,
    w: Vec<f64>,
    v: Vec<f64>,
    m1_dev: Vec<f64>,
    v_pre: Vec<f64>,
    dv: Vec<f64>,
}

impl RunSummary {
    fn from_series(series: &MomentSeries) -> Self {
        let entries = series.entries();
        let m = &series.target_mean;
        Self {
            grid: entries
                .iter()
                .map(|(event, r)| GridPoint {
                    t: r.t,
                    n: r.n,
                    event: *event,
                })
                .collect(),
            w: entries.iter().map(|(_, r)| r.w).collect(),
            v: entries.iter().map(|(_, r)| r.v).collect(),
            m1_dev: entries
                .iter()
                .map(|(_, r)| squared_distance(&r.m1, m))
                .collect(),
            v_pre: series.injections.iter().map(|p| p.pre.v).collect(),
            dv: series
                .injections
                .iter()
                .map(|p| p.post.v - p.pre.v)
                .collect(),
        }
    }
}

/// Run `runs` replicas on the current rayon pool and aggregate them.
pub fn run_ensemble(config: &SimConfig, runs: usize, master_seed: u64) -> Result<EnsembleStats> {
    if runs < 2 {
        return Err(Error::invalid(
            "runs",
            format!("an ensemble needs at least 2 runs, got {runs}"),
        ));
    }
    config.validate()?;
    let summaries: Vec<RunSummary> = (0..runs)
        .into_par_iter()
        .map(|i| {
            run_simulation(config, derive_run_seed(master_seed, i as u64))
                .map(|s| RunSummary::from_series(&s))
                .map_err(|e| Error::Run {
                    run: i,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    aggregate(&summaries)
}

/// [`run_ensemble`] on a dedicated pool of `workers` threads.
pub fn run_ensemble_with_workers(
    config: &SimConfig,
    runs: usize,
    master_seed: u64,
    workers: usize,
) -> Result<EnsembleStats> {
    with_workers(workers, || run_ensemble(config, runs, master_seed))?
}

/// Execute `f` inside a rayon pool with `workers` threads.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Domain(format!("cannot build a pool of {workers} workers: {e}")))?;
    Ok(pool.install(f))
}

fn aggregate(summaries: &[RunSummary]) -> Result<EnsembleStats> {
    let first = &summaries[0];
    for (i, s) in summaries.iter().enumerate().skip(1) {
        let same = s.grid.len() == first.grid.len()
            && s.grid
                .iter()
                .zip(&first.grid)
                .all(|(a, b)| a.t.to_bits() == b.t.to_bits() && a.n == b.n && a.event == b.event);
        if !same {
            return Err(Error::Contract(format!(
                "run {i} did not record on the shared grid"
            )));
        }
    }
    let points = first.grid.len();
    let column = |pick: &dyn Fn(&RunSummary) -> &[f64], len: usize| -> Vec<Estimate> {
        (0..len)
            .map(|p| {
                summaries
                    .iter()
                    .map(|s| pick(s)[p])
                    .collect::<RunningStats>()
                    .estimate()
            })
            .collect()
    };
    let split = |est: Vec<Estimate>| -> (Vec<f64>, Vec<f64>) {
        est.iter().map(|e| (e.mean, e.stderr)).unzip()
    };

    let (mean_w, stderr_w) = split(column(&|s| &s.w, points));
    let (mean_v, stderr_v) = split(column(&|s| &s.v, points));
    let (mean_m1_dev, stderr_m1_dev) = split(column(&|s| &s.m1_dev, points));
    let injections = first.dv.len();
    let v_pre = column(&|s| &s.v_pre, injections);
    let dv = column(&|s| &s.dv, injections);
    let post_times: Vec<f64> = first
        .grid
        .iter()
        .filter(|g| g.event == RecordEvent::PostJump)
        .map(|g| g.t)
        .collect();
    let jumps = (0..injections)
        .map(|i| JumpStats {
            k: i + 1,
            t: post_times[i],
            v_pre: v_pre[i],
            dv: dv[i],
        })
        .collect();

    Ok(EnsembleStats {
        runs: summaries.len(),
        grid: first.grid.clone(),
        mean_w,
        stderr_w,
        mean_v,
        stderr_v,
        mean_m1_dev,
        stderr_m1_dev,
        jumps,
    })
}

/// Monte Carlo estimate of `E|sum_{j<k} (X_j - X_k)|^2`, which equals `k (k - 1) sigma^2`.
pub fn jump_sum_identity(
    source: &OpinionSource,
    k: usize,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    if k < 2 {
        return Err(Error::Domain(format!("the identity needs k >= 2, got {k}")));
    }
    let mut rng = run_rng(seed);
    let dim = source.dim();
    let stats: RunningStats = (0..draws)
        .map(|_| {
            let xs: Vec<Vec<f64>> = (0..k).map(|_| source.sample(&mut rng)).collect();
            let xk = &xs[k - 1];
            (0..dim)
                .map(|a| {
                    let s: f64 = xs[..k - 1].iter().map(|x| x[a] - xk[a]).sum();
                    s * s
                })
                .sum::<f64>()
        })
        .collect();
    Ok(stats.estimate())
}

/// Monte Carlo estimate of `E[(sum_j x_j^0 - n0 X_k) . sum_{j<k} (X_j - X_k)]`,
/// which equals `n0 (k - 1) sigma^2`.
pub fn cross_term_identity(
    source: &OpinionSource,
    x0: &[Vec<f64>],
    k: usize,
    draws: usize,
    seed: u64,
) -> Result<Estimate> {
    if k < 2 {
        return Err(Error::Domain(format!("the identity needs k >= 2, got {k}")));
    }
    let dim = source.dim();
    if x0.is_empty() || x0.iter().any(|x| x.len() != dim) {
        return Err(Error::Domain(
            "initial opinions must be nonempty and match the source dimension".into(),
        ));
    }
    let n0 = x0.len() as f64;
    let x0_sum: Vec<f64> = (0..dim).map(|a| x0.iter().map(|x| x[a]).sum()).collect();
    let mut rng = run_rng(seed);
    let stats: RunningStats = (0..draws)
        .map(|_| {
            let xs: Vec<Vec<f64>> = (0..k).map(|_| source.sample(&mut rng)).collect();
            let xk = &xs[k - 1];
            (0..dim)
                .map(|a| {
                    let left = x0_sum[a] - n0 * xk[a];
                    let right: f64 = xs[..k - 1].iter().map(|x| x[a] - xk[a]).sum();
                    left * right
                })
                .sum::<f64>()
        })
        .collect();
    Ok(stats.estimate())
}
