//! The hybrid flow: all-to-all averaging between injections, one new agent at each `t_k`.

mod run;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::numeric::squared_distance;
use crate::schedule::GrowthSchedule;

pub use run::{run_simulation, RecordGrid, SimConfig, StopRule, DEFAULT_STEP_MAX};

/// Populations at or above this size evaluate the pairwise field in parallel.
const PARALLEL_MIN_AGENTS: usize = 128;

/// Intervals shorter than this are crossed with one explicit Euler step.
pub const TINY_INTERVAL: f64 = 1e-14;

/// Tolerance when checking that an injection happens at the state's time.
pub const INJECTION_TIME_TOL: f64 = 1e-12;

/// Opinions of all living agents at time `t`, after `k` injections.
///
/// Opinions are stored row-major: agent `i` occupies `data[i*dim..(i+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    t: f64,
    k: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SimState {
    /// State at `t = 0` with the given initial opinions.
    pub fn new(dim: usize, initial: &[Vec<f64>]) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid(
                "dim",
                "opinion dimension must be at least 1",
            ));
        }
        if initial.is_empty() {
            return Err(Error::invalid(
                "initial_opinions",
                "at least one initial opinion is required",
            ));
        }
        let mut data = Vec::with_capacity(initial.len() * dim);
        for (i, x) in initial.iter().enumerate() {
            if x.len() != dim {
                return Err(Error::invalid(
                    format!("initial_opinions[{i}]"),
                    format!("expected dimension {dim}, got {}", x.len()),
                ));
            }
            if let Some(v) = x.iter().find(|v| !v.is_finite()) {
                return Err(Error::invalid(
                    format!("initial_opinions[{i}]"),
                    format!("non-finite entry {v}"),
                ));
            }
            data.extend_from_slice(x);
        }
        Ok(Self {
            t: 0.0,
            k: 0,
            dim,
            data,
        })
    }

    /// Build a state from flat row-major storage.
    pub fn from_flat(dim: usize, t: f64, k: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(Error::Domain(format!(
                "flat opinion buffer of length {} does not hold whole {dim}-vectors",
                data.len()
            )));
        }
        Ok(Self { t, k, dim, data })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Current population `N`.
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn opinion(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn opinions(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    /// Append agent `n0 + k + 1` at its injection time. Existing opinions are untouched.
    pub fn inject(&mut self, x_new: &[f64], t_k: f64) -> Result<()> {
        if x_new.len() != self.dim {
            return Err(Error::Domain(format!(
                "injected opinion has dimension {}, state has {}",
                x_new.len(),
                self.dim
            )));
        }
        if (self.t - t_k).abs() > INJECTION_TIME_TOL {
            return Err(Error::Contract(format!(
                "injection at t = {t_k} but the state is at t = {}",
                self.t
            )));
        }
        self.t = t_k;
        self.data.extend_from_slice(x_new);
        self.k += 1;
        Ok(())
    }
}

/// By-value form of [`SimState::inject`].
pub fn inject_agent(mut state: SimState, x_new: &[f64], t_k: f64) -> Result<SimState> {
    state.inject(x_new, t_k)?;
    Ok(state)
}

/// Right-hand side `dx_i/dt = (1/N) sum_j psi(|x_j - x_i|)(x_j - x_i)`, flat layout.
pub fn rhs(state: &SimState, kernel: &Kernel) -> Vec<f64> {
    let mut out = vec![0.0; state.data.len()];
    velocity_field(&state.data, state.dim, kernel, &mut out);
    out
}

/// Evaluate the velocity field into `out`.
///
/// A constant kernel reduces the double sum to `c (m1 - x_i)`, evaluated as
/// `c ((x_0 - x_i) + mean_j (x_j - x_0))` so that a consensus state gives an
/// exactly zero field. Other kernels use the pairwise sum.
pub fn velocity_field(x: &[f64], dim: usize, kernel: &Kernel, out: &mut [f64]) {
    match kernel.as_constant() {
        Some(c) => mean_field_velocity(x, dim, c, out),
        None => pairwise_velocity(x, dim, kernel, out),
    }
}

/// Constant-kernel field in O(N d).
pub fn mean_field_velocity(x: &[f64], dim: usize, c: f64, out: &mut [f64]) {
    let n = x.len() / dim;
    let anchor = &x[..dim];
    let mut shift = vec![0.0; dim];
    for xj in x.chunks_exact(dim) {
        for a in 0..dim {
            shift[a] += xj[a] - anchor[a];
        }
    }
    let inv_n = 1.0 / n as f64;
    for s in &mut shift {
        *s *= inv_n;
    }
    for (xi, oi) in x.chunks_exact(dim).zip(out.chunks_exact_mut(dim)) {
        for a in 0..dim {
            oi[a] = c * ((anchor[a] - xi[a]) + shift[a]);
        }
    }
}

/// Direct O(N^2 d) evaluation. The `j = i` term is kept (it vanishes) and each
/// agent's sum runs left to right, so the result does not depend on threading.
pub fn pairwise_velocity(x: &[f64], dim: usize, kernel: &Kernel, out: &mut [f64]) {
    let n = x.len() / dim;
    let inv_n = 1.0 / n as f64;
    let agent = |(i, oi): (usize, &mut [f64])| {
        let xi = &x[i * dim..(i + 1) * dim];
        if dim == 1 {
            let xi = xi[0];
            let mut acc = 0.0;
            for &xj in x {
                let diff = xj - xi;
                acc += kernel.weight_sq(diff * diff) * diff;
            }
            oi[0] = acc * inv_n;
        } else {
            oi.fill(0.0);
            for xj in x.chunks_exact(dim) {
                let w = kernel.weight_sq(squared_distance(xj, xi));
                for a in 0..dim {
                    oi[a] += w * (xj[a] - xi[a]);
                }
            }
            for v in oi.iter_mut() {
                *v *= inv_n;
            }
        }
    };
    if n >= PARALLEL_MIN_AGENTS {
        out.par_chunks_mut(dim).enumerate().for_each(agent);
    } else {
        out.chunks_mut(dim).enumerate().for_each(agent);
    }
}

/// Fixed-step classical RK4 with exact landing on the requested end time.
#[derive(Debug, Clone)]
pub struct Integrator {
    kernel: Kernel,
    step_max: f64,
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    stage: Vec<f64>,
}

impl Integrator {
    pub fn new(kernel: Kernel, step_max: f64) -> Result<Self> {
        if !(step_max.is_finite() && step_max > 0.0) {
            return Err(Error::invalid(
                "step_max",
                format!("must be positive and finite, got {step_max}"),
            ));
        }
        Ok(Self {
            kernel,
            step_max,
            k1: Vec::new(),
            k2: Vec::new(),
            k3: Vec::new(),
            k4: Vec::new(),
            stage: Vec::new(),
        })
    }

    pub fn step_max(&self) -> f64 {
        self.step_max
    }

    /// Advance `state` to `t_end`. The next injection time of `schedule` may
    /// coincide with `t_end` but must not lie strictly inside the interval.
    pub fn advance(
        &mut self,
        state: &mut SimState,
        schedule: &GrowthSchedule,
        t_end: f64,
    ) -> Result<()> {
        if let Ok(t_next) = schedule.injection_time(state.k + 1) {
            if state.t < t_next && t_next < t_end {
                return Err(Error::Contract(format!(
                    "injection {} at t = {t_next} lies inside ({}, {t_end})",
                    state.k + 1,
                    state.t
                )));
            }
        }
        self.advance_unchecked(state, t_end)
    }

    /// Advance without consulting a schedule (fixed population).
    pub fn advance_unchecked(&mut self, state: &mut SimState, t_end: f64) -> Result<()> {
        if !(t_end >= state.t) {
            return Err(Error::Contract(format!(
                "cannot integrate backwards from t = {} to t = {t_end}",
                state.t
            )));
        }
        let span = t_end - state.t;
        if span == 0.0 {
            return Ok(());
        }
        self.resize(state.data.len());
        if span < TINY_INTERVAL {
            self.euler_step(state, span);
            state.t = t_end;
            return Ok(());
        }
        let t_start = state.t;
        let mut taken = 0u64;
        loop {
            let remaining = t_end - state.t;
            if remaining <= self.step_max {
                self.rk4_step(state, remaining);
                state.t = t_end;
                return Ok(());
            }
            self.rk4_step(state, self.step_max);
            taken += 1;
            state.t = t_start + taken as f64 * self.step_max;
        }
    }

    fn resize(&mut self, len: usize) {
        for buf in [
            &mut self.k1,
            &mut self.k2,
            &mut self.k3,
            &mut self.k4,
            &mut self.stage,
        ] {
            buf.resize(len, 0.0);
        }
    }

    fn euler_step(&mut self, state: &mut SimState, h: f64) {
        let dim = state.dim;
        velocity_field(&state.data, dim, &self.kernel, &mut self.k1);
        for (x, v) in state.data.iter_mut().zip(&self.k1) {
            *x += h * v;
        }
    }

    fn rk4_step(&mut self, state: &mut SimState, h: f64) {
        let dim = state.dim;
        let x = &mut state.data;
        let half = 0.5 * h;

        velocity_field(x, dim, &self.kernel, &mut self.k1);
        for ((s, xi), k) in self.stage.iter_mut().zip(x.iter()).zip(&self.k1) {
            *s = xi + half * k;
        }
        velocity_field(&self.stage, dim, &self.kernel, &mut self.k2);
        for ((s, xi), k) in self.stage.iter_mut().zip(x.iter()).zip(&self.k2) {
            *s = xi + half * k;
        }
        velocity_field(&self.stage, dim, &self.kernel, &mut self.k3);
        for ((s, xi), k) in self.stage.iter_mut().zip(x.iter()).zip(&self.k3) {
            *s = xi + h * k;
        }
        velocity_field(&self.stage, dim, &self.kernel, &mut self.k4);

        let sixth = h / 6.0;
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Integrate a copy of `state` up to `t_end`; see [`Integrator::advance`].
pub fn integrate_interval(
    state: &SimState,
    kernel: &Kernel,
    schedule: &GrowthSchedule,
    t_end: f64,
    step_max: f64,
) -> Result<SimState> {
    let mut next = state.clone();
    Integrator::new(*kernel, step_max)?.advance(&mut next, schedule, t_end)?;
    Ok(next)
}
