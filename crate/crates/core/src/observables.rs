//! Moments, the variance functional, the mean-square error about the target
//! mean, the dissipation rate, and the exact jump formulas at injections.

use rayon::prelude::*;

use crate::dynamics::SimState;
use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::numeric::{compensated_sum, squared_distance, squared_norm, CompensatedSum};

/// Snapshot of the population statistics at one time.
///
/// `v` is the variance about the running mean `m1`; `w` is the mean square
/// distance to the target mean `m`, so `w = v + |m1 - m|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub t: f64,
    pub n: usize,
    pub m1: Vec<f64>,
    pub m2: f64,
    pub v: f64,
    pub w: f64,
    pub dissipation: f64,
}

impl MomentRecord {
    /// `|m1 - m|^2`.
    pub fn m1_deviation(&self, m: &[f64]) -> f64 {
        squared_distance(&self.m1, m)
    }

    /// Residuals of `v = m2 - |m1|^2` and `w = v + |m1 - m|^2`.
    pub fn identity_residuals(&self, m: &[f64]) -> (f64, f64) {
        (
            (self.v - (self.m2 - squared_norm(&self.m1))).abs(),
            (self.w - (self.v + self.m1_deviation(m))).abs(),
        )
    }
}

/// Records taken immediately before and after injection `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InjectionPair {
    pub k: usize,
    pub x_new: Vec<f64>,
    pub pre: MomentRecord,
    pub post: MomentRecord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordEvent {
    Record,
    PreJump,
    PostJump,
}

impl RecordEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordEvent::Record => "record",
            RecordEvent::PreJump => "pre_jump",
            RecordEvent::PostJump => "post_jump",
        }
    }
}

impl std::str::FromStr for RecordEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "record" => Ok(RecordEvent::Record),
            "pre_jump" => Ok(RecordEvent::PreJump),
            "post_jump" => Ok(RecordEvent::PostJump),
            other => Err(Error::Domain(format!("unknown record event `{other}`"))),
        }
    }
}

/// Output of one run: grid records at strictly increasing times, plus the
/// pre/post pair of every injection.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub dim: usize,
    /// Mean `m` of the incoming opinions, the target of `w`.
    pub target_mean: Vec<f64>,
    pub records: Vec<MomentRecord>,
    pub injections: Vec<InjectionPair>,
}

impl MomentSeries {
    pub fn new(dim: usize, target_mean: Vec<f64>) -> Self {
        Self {
            dim,
            target_mean,
            records: Vec::new(),
            injections: Vec::new(),
        }
    }

    /// All records in time order. At equal times the injection pair comes
    /// before the grid record, which sees the post-injection state.
    pub fn entries(&self) -> Vec<(RecordEvent, &MomentRecord)> {
        let mut out = Vec::with_capacity(self.records.len() + 2 * self.injections.len());
        let mut inj = self.injections.iter().peekable();
        for rec in &self.records {
            while let Some(pair) = inj.next_if(|p| p.pre.t <= rec.t) {
                out.push((RecordEvent::PreJump, &pair.pre));
                out.push((RecordEvent::PostJump, &pair.post));
            }
            out.push((RecordEvent::Record, rec));
        }
        for pair in inj {
            out.push((RecordEvent::PreJump, &pair.pre));
            out.push((RecordEvent::PostJump, &pair.post));
        }
        out
    }

    pub fn last_record(&self) -> Option<&MomentRecord> {
        self.records.last()
    }
}

/// Population averages of the current state.
pub fn compute_moments(state: &SimState, kernel: &Kernel, m: &[f64]) -> MomentRecord {
    let n = state.len();
    let dim = state.dim();
    let inv_n = 1.0 / n as f64;
    let anchor = state.opinion(0);

    let m1: Vec<f64> = (0..dim)
        .map(|a| anchor[a] + compensated_sum(state.opinions().map(|x| x[a] - anchor[a])) * inv_n)
        .collect();
    let m2 = compensated_sum(state.opinions().map(squared_norm)) * inv_n;
    let v = compensated_sum(state.opinions().map(|x| squared_distance(x, &m1))) * inv_n;
    let w = compensated_sum(state.opinions().map(|x| squared_distance(x, m))) * inv_n;

    let dissipation = match kernel.as_constant() {
        // sum_ij |x_i - x_j|^2 = 2 N^2 v
        Some(c) => -2.0 * c * v,
        None => pairwise_dissipation(state, kernel),
    };

    MomentRecord {
        t: state.t(),
        n,
        m1,
        m2,
        v,
        w,
        dissipation,
    }
}

/// `D = -(1/N^2) sum_ij psi(|x_j - x_i|) |x_j - x_i|^2` by direct summation.
pub fn pairwise_dissipation(state: &SimState, kernel: &Kernel) -> f64 {
    let n = state.len();
    let row = |i: usize| {
        let xi = state.opinion(i);
        let mut acc = CompensatedSum::new();
        for xj in state.opinions() {
            let r2 = squared_distance(xj, xi);
            acc.add(kernel.weight_sq(r2) * r2);
        }
        acc.value()
    };
    let rows: Vec<f64> = if n >= 128 {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    -compensated_sum(rows) / (n as f64 * n as f64)
}

/// Predicted jumps of `m1`, `m2` and `v` across one injection.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpPrediction {
    pub dm1: Vec<f64>,
    pub dm2: f64,
    pub dv: f64,
}

/// Jumps caused by injecting `x_new` as the `k`-th newcomer into the
/// population described by `record_minus` (size `n0 + k - 1`).
///
/// With `N = n0 + k`:
/// `dm1 = (x - m1-)/N`, `dm2 = (|x|^2 - m2-)/N`, and
/// `dv = |x - m1+|^2/N + (N-1)|x - m1-|^2/N^3 - v-/N`.
pub fn predict_jumps(
    record_minus: &MomentRecord,
    x_new: &[f64],
    k: usize,
    n0: usize,
) -> Result<JumpPrediction> {
    if k < 1 {
        return Err(Error::Domain("injection index k must be >= 1".into()));
    }
    if x_new.len() != record_minus.m1.len() {
        return Err(Error::Domain(format!(
            "injected opinion has dimension {}, record has {}",
            x_new.len(),
            record_minus.m1.len()
        )));
    }
    let n = (n0 + k) as f64;
    let dm1: Vec<f64> = x_new
        .iter()
        .zip(&record_minus.m1)
        .map(|(x, m)| (x - m) / n)
        .collect();
    let m1_plus: Vec<f64> = record_minus
        .m1
        .iter()
        .zip(&dm1)
        .map(|(m, d)| m + d)
        .collect();
    let dm2 = (squared_norm(x_new) - record_minus.m2) / n;
    let dv = squared_distance(x_new, &m1_plus) / n
        + (n - 1.0) * squared_distance(x_new, &record_minus.m1) / (n * n * n)
        - record_minus.v / n;
    Ok(JumpPrediction { dm1, dm2, dv })
}

/// `m1` on `[t_k, t_{k+1})`: the plain average of initial and injected opinions.
pub fn m1_closed_form(x0: &[Vec<f64>], xs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let dim = x0
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Domain("at least one initial opinion is required".into()))?;
    if let Some(bad) = x0.iter().chain(xs).find(|x| x.len() != dim) {
        return Err(Error::Domain(format!(
            "opinion of dimension {} among {dim}-vectors",
            bad.len()
        )));
    }
    let total = (x0.len() + xs.len()) as f64;
    Ok((0..dim)
        .map(|a| compensated_sum(x0.iter().chain(xs).map(|x| x[a])) / total)
        .collect())
}

/// Closed-form expectations of `|m1 - m|^2` and `|m1|^2` after `k` injections.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct M1Expectation {
    /// `E|m1 - m|^2 = (A + k sigma^2) / (n0 + k)^2`
    pub deviation: f64,
    /// `E|m1|^2 = (B + k sigma^2 + 2 k C + k^2 |m|^2) / (n0 + k)^2`
    pub norm2: f64,
    /// `A = |sum_j (x_j^0 - m)|^2`
    pub a: f64,
    /// `B = |sum_j x_j^0|^2`
    pub b: f64,
    /// `C = sum_j x_j^0 . m`
    pub c: f64,
}

pub fn expected_m1_deviation(
    n0: usize,
    k: usize,
    x0: &[Vec<f64>],
    m: &[f64],
    sigma2: f64,
) -> Result<M1Expectation> {
    if x0.len() != n0 || n0 == 0 {
        return Err(Error::Domain(format!(
            "n0 = {n0} but {} initial opinions were given",
            x0.len()
        )));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::Domain(format!(
            "sigma2 must be nonnegative, got {sigma2}"
        )));
    }
    if let Some(bad) = x0.iter().find(|x| x.len() != m.len()) {
        return Err(Error::Domain(format!(
            "initial opinion of dimension {} but m has {}",
            bad.len(),
            m.len()
        )));
    }
    let dim = m.len();
    let sum: Vec<f64> = (0..dim)
        .map(|a| compensated_sum(x0.iter().map(|x| x[a])))
        .collect();
    let centered: Vec<f64> = (0..dim).map(|a| sum[a] - n0 as f64 * m[a]).collect();
    let a = squared_norm(&centered);
    let b = squared_norm(&sum);
    let c: f64 = sum.iter().zip(m).map(|(s, mi)| s * mi).sum();
    let kf = k as f64;
    let denom = (n0 + k) as f64 * (n0 + k) as f64;
    Ok(M1Expectation {
        deviation: (a + kf * sigma2) / denom,
        norm2: (b + kf * sigma2 + 2.0 * kf * c + kf * kf * squared_norm(m)) / denom,
        a,
        b,
        c,
    })
}

/// `c_k = (k + 2 n0)(k - 1) / (n0 + k)^2`, the coefficient of `sigma^2` in the
/// expected variance jump at injection `k`.
pub fn jump_coefficient(n0: usize, k: usize) -> f64 {
    let (n0, k) = (n0 as f64, k as f64);
    (k + 2.0 * n0) * (k - 1.0) / ((n0 + k) * (n0 + k))
}
