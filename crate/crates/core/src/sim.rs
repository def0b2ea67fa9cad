//! Fixed-step integration and run orchestration.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::analysis::{kkt_residual, lyapunov_value, solve_centralized, KktReport, SaddlePoint};
use crate::dynamics::{column_means, DynamicsError, GainConfig, Model, ReducedState, StateLayout, SystemState};
use crate::graph::NetworkGraph;
use crate::linalg::Matrix;
use crate::problem::{validate_assumptions, ProblemError, ProblemSpec};

/// Any state component above this magnitude aborts the run.
pub const DIVERGENCE_LIMIT: f64 = 1e9;
/// Consecutive recorded points below the stop tolerance needed to stop.
pub const EARLY_STOP_STREAK: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("invalid initial state: {0}")]
    InitialState(String),
    #[error("assumptions not satisfied: {0:?}")]
    Assumptions(Vec<&'static str>),
    #[error("state diverged at t = {time}: {component} = {value:e}")]
    Divergence {
        time: f64,
        component: String,
        value: f64,
    },
    #[error("non-finite value in RK4 stage {stage} at t = {time} ({component})")]
    StepFailure {
        time: f64,
        stage: usize,
        component: String,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Non-finite value produced inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("non-finite value in stage {stage}, component {index}")]
pub struct StepError {
    pub stage: usize,
    pub index: usize,
}

/// Scratch buffers for the classical four-stage Runge-Kutta method.
#[derive(Debug, Clone, Default)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

fn first_non_finite(v: &[f64]) -> Option<usize> {
    v.iter().position(|x| !x.is_finite())
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    /// Advances `state` in place by one step of size `dt`.
    #[allow(clippy::needless_range_loop)]
    pub fn step<F>(&mut self, mut rhs: F, state: &mut [f64], dt: f64) -> Result<(), StepError>
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let dim = state.len();
        if self.k1.len() != dim {
            *self = Self::new(dim);
        }
        let check = |stage: usize, v: &[f64]| match first_non_finite(v) {
            Some(index) => Err(StepError { stage, index }),
            None => Ok(()),
        };

        rhs(state, &mut self.k1);
        check(1, &self.k1)?;
        for i in 0..dim {
            self.tmp[i] = state[i] + 0.5 * dt * self.k1[i];
        }
        rhs(&self.tmp, &mut self.k2);
        check(2, &self.k2)?;
        for i in 0..dim {
            self.tmp[i] = state[i] + 0.5 * dt * self.k2[i];
        }
        rhs(&self.tmp, &mut self.k3);
        check(3, &self.k3)?;
        for i in 0..dim {
            self.tmp[i] = state[i] + dt * self.k3[i];
        }
        rhs(&self.tmp, &mut self.k4);
        check(4, &self.k4)?;
        for i in 0..dim {
            self.tmp[i] = state[i]
                + dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        check(5, &self.tmp)?;
        state.copy_from_slice(&self.tmp);
        Ok(())
    }
}

/// One classical RK4 step of `y' = rhs(y)`.
pub fn step_rk4<F>(rhs: F, state: &[f64], dt: f64) -> Result<Vec<f64>, StepError>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut out = state.to_vec();
    Rk4::new(state.len()).step(rhs, &mut out, dt)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Estimators and slow dynamics together.
    Full,
    /// Ideal estimators: the reduced model, integrated in `t` (its `tau`
    /// derivative times `epsilon`) so both modes share a time axis.
    Reduced,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `stride`-th step (step 0 always recorded).
    pub stride: usize,
    /// Multipliers are raised to at least this value after every step.
    pub lambda_floor: f64,
    /// Early stop once the KKT residual stays below this for
    /// [`EARLY_STOP_STREAK`] recorded points. Zero disables.
    pub stop_tolerance: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.005,
            t_final: 4000.0,
            stride: 100,
            lambda_floor: 1e-12,
            stop_tolerance: 1e-7,
        }
    }
}

impl SimConfig {
    /// Largest admissible step for the graph: `0.1 / (1 + 2 lambda_max(L))`.
    pub fn max_stable_dt(g: &NetworkGraph) -> f64 {
        0.1 / (1.0 + 2.0 * g.max_laplacian_eigenvalue())
    }

    pub fn validate(&self, g: &NetworkGraph) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::Config(alloc::format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= self.dt) {
            return Err(SimError::Config(alloc::format!(
                "t_final ({}) must be at least dt ({})",
                self.t_final,
                self.dt
            )));
        }
        if self.stride == 0 {
            return Err(SimError::Config("stride must be at least 1".into()));
        }
        if !(self.lambda_floor >= 0.0) {
            return Err(SimError::Config("lambda_floor must be nonnegative".into()));
        }
        if !(self.stop_tolerance >= 0.0) {
            return Err(SimError::Config("stop_tolerance must be nonnegative".into()));
        }
        let limit = Self::max_stable_dt(g);
        if self.dt > limit {
            return Err(SimError::Config(alloc::format!(
                "dt = {} exceeds the stability limit {limit:.6} for this graph",
                self.dt
            )));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        libm::round(self.t_final / self.dt) as usize
    }
}

/// Optional slow-variable initial values. Missing parts default to
/// `x = 0`, `mu = 0`, `lambda = 1`; estimators always start at zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InitialState {
    pub x: Option<Vec<f64>>,
    pub mu: Option<Matrix>,
    pub lambda: Option<Vec<Vec<f64>>>,
}

impl InitialState {
    pub fn resolve(&self, p: &ProblemSpec) -> Result<ReducedState, SimError> {
        let (n, l) = (p.n(), p.l());
        let x = self.x.clone().unwrap_or_else(|| vec![0.0; n]);
        if x.len() != n {
            return Err(SimError::InitialState(alloc::format!("x needs {n} entries")));
        }
        let mu = self.mu.clone().unwrap_or_else(|| Matrix::zeros(n, l));
        if mu.rows() != n || mu.cols() != l {
            return Err(SimError::InitialState(alloc::format!("mu must be {n}x{l}")));
        }
        let lambda = self.lambda.clone().unwrap_or_else(|| {
            p.inequality_counts().into_iter().map(|m| vec![1.0; m]).collect()
        });
        if lambda.iter().map(Vec::len).ne(p.inequality_counts()) {
            return Err(SimError::InitialState("lambda shape does not match the inequalities".into()));
        }
        if let Some(bad) = lambda.iter().flatten().find(|&&v| !(v > 0.0)) {
            return Err(SimError::InitialState(alloc::format!(
                "lambda must start strictly positive, found {bad}"
            )));
        }
        if x.iter().chain(mu.as_slice()).any(|v| !v.is_finite()) {
            return Err(SimError::InitialState("non-finite initial value".into()));
        }
        Ok(ReducedState { x, mu, lambda })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_time: f64,
    pub steps: usize,
    pub stopped_early: bool,
    pub final_kkt: KktReport,
    pub final_lyapunov: Option<f64>,
    /// Steps in which a multiplier came out of RK4 at or below zero and had
    /// to be repaired by the floor.
    pub floor_triggers: usize,
    /// Multiplier entries raised to the floor (includes natural decay below
    /// a positive floor).
    pub lambda_clamps: usize,
    /// Smallest multiplier over all recorded points (`+inf` if none).
    pub min_lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub mode: Mode,
    pub layout: StateLayout,
    pub times: Vec<f64>,
    /// Flat snapshots, see [`StateLayout`]; reduced layout in reduced mode.
    pub states: Vec<Vec<f64>>,
    pub kkt_max: Vec<f64>,
    /// Lyapunov value per recorded point, when the saddle point is known.
    pub lyapunov: Option<Vec<f64>>,
    pub saddle: Option<SaddlePoint>,
    pub summary: RunSummary,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn reduced_state(&self, k: usize) -> ReducedState {
        ReducedState::from_flat(&self.layout, &self.states[k])
    }

    pub fn system_state(&self, k: usize) -> Option<SystemState> {
        match self.mode {
            Mode::Full => Some(SystemState::from_flat(&self.layout, &self.states[k])),
            Mode::Reduced => None,
        }
    }

    pub fn final_reduced(&self) -> ReducedState {
        self.reduced_state(self.len() - 1)
    }
}

fn kkt_at(p: &ProblemSpec, r: &ReducedState) -> KktReport {
    kkt_residual(p, &r.x, &column_means(&r.mu), &r.lambda)
}

fn lyapunov_at(r: &ReducedState, saddle: &SaddlePoint, k: &GainConfig) -> f64 {
    lyapunov_value(r, saddle, k).unwrap_or(f64::INFINITY)
}

/// Validates the assumptions, then integrates. See [`run_unchecked`].
pub fn run(
    p: &ProblemSpec,
    g: &NetworkGraph,
    k: &GainConfig,
    cfg: &SimConfig,
    mode: Mode,
    init: Option<&InitialState>,
) -> Result<Trajectory, SimError> {
    let report = validate_assumptions(p, g)?;
    if !report.all_passed() {
        let failed = report
            .checks()
            .into_iter()
            .filter(|(_, c)| !c.passed)
            .map(|(name, _)| name)
            .collect();
        return Err(SimError::Assumptions(failed));
    }
    integrate(p, g, k, cfg, mode, init, report.saddle)
}

/// Integrates without checking the standing assumptions. The oracle is
/// still consulted (when it applies) for the Lyapunov column.
pub fn run_unchecked(
    p: &ProblemSpec,
    g: &NetworkGraph,
    k: &GainConfig,
    cfg: &SimConfig,
    mode: Mode,
    init: Option<&InitialState>,
) -> Result<Trajectory, SimError> {
    integrate(p, g, k, cfg, mode, init, solve_centralized(p).ok())
}

fn integrate(
    p: &ProblemSpec,
    g: &NetworkGraph,
    k: &GainConfig,
    cfg: &SimConfig,
    mode: Mode,
    init: Option<&InitialState>,
    saddle: Option<SaddlePoint>,
) -> Result<Trajectory, SimError> {
    if p.n() != g.n() {
        return Err(ProblemError::GraphMismatch {
            problem: p.n(),
            graph: g.n(),
        }
        .into());
    }
    cfg.validate(g)?;
    k.validate(p)?;
    let start = init.cloned().unwrap_or_default().resolve(p)?;

    let model = Model::new(p, g, k);
    let layout = model.layout.clone();
    let mut y = match mode {
        Mode::Full => SystemState::from_reduced(start).to_flat(),
        Mode::Reduced => start.to_flat(),
    };
    let lambda_range = layout.lambda();
    let epsilon = k.epsilon;
    let steps = cfg.step_count();

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut kkt_max = Vec::new();
    let mut lyapunov = saddle.as_ref().map(|_| Vec::new());
    let mut min_lambda = f64::INFINITY;
    let mut streak = 0;
    let mut floor_triggers = 0;
    let mut lambda_clamps = 0;
    let mut stopped_early = false;
    let mut last_step = 0;

    let mut record = |step: usize, y: &[f64]| -> bool {
        let r = ReducedState::from_flat(&layout, y);
        let kkt = kkt_at(p, &r);
        times.push(step as f64 * cfg.dt);
        states.push(y.to_vec());
        min_lambda = y[lambda_range.clone()].iter().copied().fold(min_lambda, f64::min);
        if let (Some(v), Some(s)) = (lyapunov.as_mut(), saddle.as_ref()) {
            v.push(lyapunov_at(&r, s, k));
        }
        if cfg.stop_tolerance > 0.0 && kkt.max_residual < cfg.stop_tolerance {
            streak += 1;
        } else {
            streak = 0;
        }
        kkt_max.push(kkt.max_residual);
        streak >= EARLY_STOP_STREAK
    };

    record(0, &y);
    let mut rk4 = Rk4::new(y.len());
    for step in 1..=steps {
        let result = match mode {
            Mode::Full => rk4.step(|s, d| model.full(s, d), &mut y, cfg.dt),
            Mode::Reduced => rk4.step(|s, d| model.reduced(s, d, epsilon), &mut y, cfg.dt),
        };
        let time = step as f64 * cfg.dt;
        if let Err(e) = result {
            return Err(SimError::StepFailure {
                time,
                stage: e.stage,
                component: layout.component_name(e.index),
            });
        }
        let mut undershoot = false;
        for v in &mut y[lambda_range.clone()] {
            if *v < cfg.lambda_floor {
                undershoot |= *v <= 0.0;
                lambda_clamps += 1;
                *v = cfg.lambda_floor;
            }
        }
        if undershoot {
            floor_triggers += 1;
        }
        if let Some(idx) = y.iter().position(|v| v.abs() > DIVERGENCE_LIMIT) {
            return Err(SimError::Divergence {
                time,
                component: layout.component_name(idx),
                value: y[idx],
            });
        }
        last_step = step;
        if step % cfg.stride == 0 && record(step, &y) {
            stopped_early = true;
            break;
        }
    }

    let final_state = ReducedState::from_flat(&layout, &y);
    let final_kkt = kkt_at(p, &final_state);
    let final_lyapunov = saddle.as_ref().map(|s| lyapunov_at(&final_state, s, k));
    Ok(Trajectory {
        mode,
        layout,
        times,
        states,
        kkt_max,
        lyapunov,
        saddle,
        summary: RunSummary {
            final_time: last_step as f64 * cfg.dt,
            steps: last_step,
            stopped_early,
            final_kkt,
            final_lyapunov,
            floor_triggers,
            lambda_clamps,
            min_lambda,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub final_kkt_max: f64,
    /// `epsilon * t` at the end of the run.
    pub slow_time: f64,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub outcome: Result<SweepResult, SimError>,
}

/// Full-mode runs at each `epsilon`, all to the same slow time
/// `tau_final` (so `t_final = tau_final / epsilon`) from the same initial
/// state. A failing run marks its row and the sweep continues.
#[allow(clippy::too_many_arguments)]
pub fn sweep_epsilon(
    p: &ProblemSpec,
    g: &NetworkGraph,
    k: &GainConfig,
    cfg: &SimConfig,
    epsilons: &[f64],
    tau_final: f64,
    init: Option<&InitialState>,
) -> Result<Vec<SweepRow>, SimError> {
    if epsilons.is_empty() {
        return Ok(Vec::new());
    }
    let report = validate_assumptions(p, g)?;
    if !report.all_passed() {
        let failed = report
            .checks()
            .into_iter()
            .filter(|(_, c)| !c.passed)
            .map(|(name, _)| name)
            .collect();
        return Err(SimError::Assumptions(failed));
    }
    let rows = epsilons
        .iter()
        .map(|&epsilon| {
            let outcome = if !(epsilon > 0.0) {
                Err(SimError::Config(alloc::format!("epsilon must be positive, got {epsilon}")))
            } else {
                let cfg = SimConfig {
                    t_final: tau_final / epsilon,
                    ..cfg.clone()
                };
                integrate(p, g, &k.with_epsilon(epsilon), &cfg, Mode::Full, init, report.saddle.clone())
                    .map(|t| SweepResult {
                        final_kkt_max: t.summary.final_kkt.max_residual,
                        slow_time: epsilon * t.summary.final_time,
                        summary: t.summary,
                    })
            };
            SweepRow { epsilon, outcome }
        })
        .collect();
    Ok(rows)
}
