//! Fixed-step implicit Runge-Kutta integration of first-order systems.
//!
//! Stage equations `w_i = f(t + c_i h, y + h sum_j a_ij w_j)` are solved by
//! simplified Newton on the stacked `s * dim` system, with the Jacobian
//! frozen at `(t, y)` for the whole step.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fitting::{fit_tableau, FitError, FittedMethodSpec, MethodKind};
use crate::tableau::ButcherTableau;

/// A first-order system `y' = f(t, y)`.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]);

    /// `df/dy` at `(t, y)`, or `None` to fall back to finite differences.
    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Fitting frequency used by frequency-dependent methods.
    fn frequency(&self) -> FrequencySchedule {
        FrequencySchedule::constant(0.0)
    }
}

/// Piecewise-constant `omega(t)`: `values[k]` applies up to and including
/// `breakpoints[k]`, the last value beyond the last breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySchedule {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl FrequencySchedule {
    pub fn constant(omega: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            values: vec![omega],
        }
    }

    /// # Panics
    /// If `values.len() != breakpoints.len() + 1` or breakpoints are not
    /// strictly increasing.
    pub fn piecewise(breakpoints: Vec<f64>, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            breakpoints.len() + 1,
            "one more value than breakpoints"
        );
        assert!(
            breakpoints.windows(2).all(|w| w[0] < w[1]),
            "breakpoints must increase"
        );
        Self {
            breakpoints,
            values,
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, t: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b < t);
        self.values[k]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    /// Use [`OdeSystem::jacobian`] when it returns a matrix, finite
    /// differences otherwise.
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stage residual tolerance relative to `max(1, |w|_inf)`.
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub jacobian_mode: JacobianMode,
    /// Relative perturbation for one-sided differences.
    pub fd_epsilon: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            newton_tol: 1e-14,
            newton_max_iters: 50,
            jacobian_mode: JacobianMode::Analytic,
            fd_epsilon: f64::EPSILON.sqrt(),
        }
    }
}

/// A residual within this factor of the tolerance that stops decreasing is
/// accepted as converged to round-off.
const STALL_FACTOR: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NewtonDivergence { residual: f64, iterations: usize },
    #[error("Newton matrix I - h A (x) J is singular")]
    SingularJacobian,
}

/// Converged stage derivatives and the work spent on them.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    /// `w_i` stacked, `w[i * dim + p]`.
    pub w: Vec<f64>,
    pub newton_iterations: usize,
    pub function_evaluations: usize,
    pub residual: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn fd_jacobian(sys: &dyn OdeSystem, t: f64, y: &[f64], f0: &[f64], eps: f64) -> DMatrix<f64> {
    let d = y.len();
    let mut jac = DMatrix::zeros(d, d);
    let mut yp = y.to_vec();
    let mut fp = vec![0.0; d];
    for q in 0..d {
        let delta = eps * y[q].abs().max(1.0);
        yp[q] = y[q] + delta;
        sys.rhs(t, &yp, &mut fp);
        for p in 0..d {
            jac[(p, q)] = (fp[p] - f0[p]) / delta;
        }
        yp[q] = y[q];
    }
    jac
}

/// Solves the stage equations of `tab` for one step of size `h` from `(t, y)`.
pub fn solve_stages(
    tab: &ButcherTableau,
    sys: &dyn OdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<StageSolution, StageError> {
    let d = sys.dim();
    let s = tab.stages();
    let n = s * d;
    let mut evals = 0;

    let mut f0 = vec![0.0; d];
    sys.rhs(t, y, &mut f0);
    evals += 1;
    let mut w: Vec<f64> = (0..s).flat_map(|_| f0.iter().copied()).collect();

    let jac = match cfg.jacobian_mode {
        JacobianMode::Analytic => sys.jacobian(t, y),
        JacobianMode::FiniteDifference => None,
    };
    let jac = jac.unwrap_or_else(|| {
        evals += d;
        fd_jacobian(sys, t, y, &f0, cfg.fd_epsilon)
    });

    let mut m = DMatrix::<f64>::identity(n, n);
    for i in 0..s {
        for j in 0..s {
            let ha = h * tab.a(i, j);
            if ha == 0.0 {
                continue;
            }
            for p in 0..d {
                for q in 0..d {
                    m[(i * d + p, j * d + q)] -= ha * jac[(p, q)];
                }
            }
        }
    }
    let lu = m.lu();
    if !lu.is_invertible() {
        return Err(StageError::SingularJacobian);
    }

    let mut g = DVector::<f64>::zeros(n);
    let mut stage_y = vec![0.0; d];
    let mut stage_f = vec![0.0; d];
    let mut prev = f64::INFINITY;
    for k in 0..=cfg.newton_max_iters {
        for i in 0..s {
            stage_y.copy_from_slice(y);
            for j in 0..s {
                let ha = h * tab.a(i, j);
                if ha != 0.0 {
                    for p in 0..d {
                        stage_y[p] += ha * w[j * d + p];
                    }
                }
            }
            sys.rhs(t + tab.c()[i] * h, &stage_y, &mut stage_f);
            for p in 0..d {
                g[i * d + p] = w[i * d + p] - stage_f[p];
            }
        }
        evals += s;

        let res = inf_norm(g.as_slice());
        let scale = inf_norm(&w).max(1.0);
        if !res.is_finite() {
            return Err(StageError::NewtonDivergence {
                residual: res,
                iterations: k,
            });
        }
        let tol = cfg.newton_tol * scale;
        if res <= tol || (k > 0 && res > 0.5 * prev && res <= STALL_FACTOR * tol) {
            return Ok(StageSolution {
                w,
                newton_iterations: k,
                function_evaluations: evals,
                residual: res / scale,
            });
        }
        if k == cfg.newton_max_iters {
            return Err(StageError::NewtonDivergence {
                residual: res,
                iterations: k,
            });
        }
        let delta = lu.solve(&g).ok_or(StageError::SingularJacobian)?;
        for (wi, di) in w.iter_mut().zip(delta.iter()) {
            *wi -= di;
        }
        prev = res;
    }
    unreachable!("loop returns on its last iteration")
}

/// Advances `y` in place by one step; returns the stage solve statistics.
pub fn step_in_place(
    tab: &ButcherTableau,
    sys: &dyn OdeSystem,
    t: f64,
    y: &mut [f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<StageSolution, StageError> {
    let sol = solve_stages(tab, sys, t, y, h, cfg)?;
    let d = y.len();
    for (i, &bi) in tab.b().iter().enumerate() {
        let hb = h * bi;
        for (yp, wp) in y.iter_mut().zip(&sol.w[i * d..(i + 1) * d]) {
            *yp += hb * wp;
        }
    }
    Ok(sol)
}

/// One step from `(t, y)`.
pub fn step(
    tab: &ButcherTableau,
    sys: &dyn OdeSystem,
    t: f64,
    y: &[f64],
    h: f64,
    cfg: &SolverConfig,
) -> Result<Vec<f64>, StageError> {
    let mut next = y.to_vec();
    step_in_place(tab, sys, t, &mut next, h, cfg)?;
    Ok(next)
}

/// A fixed tableau, or a frequency-fitted method refitted every step.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Fixed(ButcherTableau),
    Fitted(MethodKind),
}

impl Method {
    pub fn stages(&self) -> usize {
        match self {
            Method::Fixed(t) => t.stages(),
            Method::Fitted(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub steps: usize,
    pub stages_per_step: usize,
    pub function_evaluations: usize,
    pub newton_iterations_total: usize,
    /// Largest accepted stage residual, relative to `max(1, |w|_inf)`.
    pub max_newton_residual: f64,
}

impl IntegrationStats {
    /// Steps times stages.
    pub fn work(&self) -> usize {
        self.steps * self.stages_per_step
    }
}

/// Grid times and states, states stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub ts: Vec<f64>,
    ys: Vec<f64>,
    pub stats: IntegrationStats,
}

impl Trajectory {
    fn new(dim: usize, stages: usize, capacity: usize) -> Self {
        Self {
            dim,
            ts: Vec::with_capacity(capacity),
            ys: Vec::with_capacity(capacity * dim),
            stats: IntegrationStats {
                stages_per_step: stages,
                ..Default::default()
            },
        }
    }

    /// Builds a trajectory from external samples, `ys` flattened by state.
    pub fn from_samples(dim: usize, ts: Vec<f64>, ys: Vec<f64>) -> Result<Self, IntegrateError> {
        if dim == 0 || ys.len() != ts.len() * dim {
            return Err(IntegrateError::InvalidArguments(format!(
                "{} values do not form {} states of dimension {dim}",
                ys.len(),
                ts.len()
            )));
        }
        if ts.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(IntegrateError::InvalidArguments(
                "sample times must increase strictly".into(),
            ));
        }
        let steps = ts.len().saturating_sub(1);
        Ok(Self {
            dim,
            ts,
            ys,
            stats: IntegrationStats {
                steps,
                ..Default::default()
            },
        })
    }

    fn push(&mut self, t: f64, y: &[f64]) {
        self.ts.push(t);
        self.ys.extend_from_slice(y);
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.ys[k * self.dim..(k + 1) * self.dim]
    }

    /// Component `p` over the whole grid.
    pub fn component(&self, p: usize) -> impl Iterator<Item = f64> + '_ {
        self.ys.iter().skip(p).step_by(self.dim).copied()
    }

    pub fn last_state(&self) -> Option<&[f64]> {
        self.len().checked_sub(1).map(|k| self.state(k))
    }

    /// Writes `t,y_0,...,y_{dim-1}` rows with a header.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.dim).map(|p| format!("y_{p}")));
        wtr.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{:?}", self.ts[k])];
            row.extend(self.state(k).iter().map(|x| format!("{x:?}")));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("invalid integration request: {0}")]
    InvalidArguments(String),
    #[error("frequency breakpoint {breakpoint} is not on the grid of {n_steps} steps")]
    MisalignedBreakpoint { breakpoint: f64, n_steps: usize },
    #[error("stage solve failed at t = {t}: {source}")]
    Stage {
        t: f64,
        #[source]
        source: StageError,
        partial: Box<Trajectory>,
    },
    #[error("fitting failed at t = {t}: {source}")]
    Fit {
        t: f64,
        #[source]
        source: FitError,
        partial: Box<Trajectory>,
    },
}

impl IntegrateError {
    /// The trajectory up to the failing step, if integration started.
    pub fn partial(&self) -> Option<&Trajectory> {
        match self {
            IntegrateError::Stage { partial, .. } | IntegrateError::Fit { partial, .. } => {
                Some(partial)
            }
            _ => None,
        }
    }
}

const GRID_TOL: f64 = 1e-9;

fn on_grid(t0: f64, t1: f64, n: usize, bp: f64) -> bool {
    let k = (bp - t0) / (t1 - t0) * n as f64;
    (k - k.round()).abs() <= GRID_TOL * k.abs().max(1.0)
}

/// Smallest step count `>= n_steps` that puts every interior breakpoint on
/// the uniform grid of `[t0, t1]`, searched up to `max_factor * n_steps`.
pub fn snap_steps(
    t0: f64,
    t1: f64,
    n_steps: usize,
    breakpoints: &[f64],
    max_factor: usize,
) -> Option<usize> {
    let interior: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > t0 && b < t1)
        .collect();
    let limit = n_steps.max(1).saturating_mul(max_factor.max(1));
    (n_steps.max(1)..=limit).find(|&n| interior.iter().all(|&b| on_grid(t0, t1, n, b)))
}

/// Integrates `sys` from `t0` to `t1` in `n_steps` uniform steps.
///
/// Fitted methods are refitted at `v = omega(t_mid) h` for each step, with
/// tableaus cached per distinct `v`. Breakpoints of the frequency schedule
/// inside `(t0, t1)` must fall on the grid (see [`snap_steps`]).
pub fn integrate(
    method: &Method,
    sys: &dyn OdeSystem,
    y0: &[f64],
    t0: f64,
    t1: f64,
    n_steps: usize,
    cfg: &SolverConfig,
) -> Result<Trajectory, IntegrateError> {
    if n_steps == 0 {
        return Err(IntegrateError::InvalidArguments(
            "n_steps must be at least 1".into(),
        ));
    }
    if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(IntegrateError::InvalidArguments(format!(
            "empty interval [{t0}, {t1}]"
        )));
    }
    if y0.len() != sys.dim() {
        return Err(IntegrateError::InvalidArguments(format!(
            "initial state has {} components, system has {}",
            y0.len(),
            sys.dim()
        )));
    }
    if !(cfg.newton_tol > 0.0) || cfg.newton_max_iters == 0 || !(cfg.fd_epsilon > 0.0) {
        return Err(IntegrateError::InvalidArguments(
            "solver tolerances must be positive".into(),
        ));
    }
    let schedule = sys.frequency();
    if let Method::Fitted(_) = method {
        for &b in schedule.breakpoints() {
            if b > t0 && b < t1 && !on_grid(t0, t1, n_steps, b) {
                return Err(IntegrateError::MisalignedBreakpoint {
                    breakpoint: b,
                    n_steps,
                });
            }
        }
    }

    let h = (t1 - t0) / n_steps as f64;
    let mut traj = Trajectory::new(sys.dim(), method.stages(), n_steps + 1);
    traj.push(t0, y0);
    let mut y = y0.to_vec();
    let mut cache: HashMap<u64, ButcherTableau> = HashMap::new();

    for k in 0..n_steps {
        let t = t0 + (t1 - t0) * (k as f64 / n_steps as f64);
        let t_next = if k + 1 == n_steps {
            t1
        } else {
            t0 + (t1 - t0) * ((k + 1) as f64 / n_steps as f64)
        };
        let tab = match method {
            Method::Fixed(tab) => tab,
            Method::Fitted(kind) => {
                let v = schedule.at(0.5 * (t + t_next)) * h;
                match cache.entry(v.to_bits()) {
                    std::collections::hash_map::Entry::Occupied(e) => &*e.into_mut(),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        match fit_tableau(FittedMethodSpec::new(*kind, v)) {
                            Ok(tab) => &*e.insert(tab),
                            Err(source) => {
                                return Err(IntegrateError::Fit {
                                    t,
                                    source,
                                    partial: Box::new(traj),
                                });
                            }
                        }
                    }
                }
            }
        };
        match step_in_place(tab, sys, t, &mut y, h, cfg) {
            Ok(sol) => {
                traj.stats.steps += 1;
                traj.stats.function_evaluations += sol.function_evaluations;
                traj.stats.newton_iterations_total += sol.newton_iterations;
                traj.stats.max_newton_residual = traj.stats.max_newton_residual.max(sol.residual);
            }
            Err(source) => {
                return Err(IntegrateError::Stage {
                    t,
                    source,
                    partial: Box::new(traj),
                });
            }
        }
        traj.push(t_next, &y);
    }
    Ok(traj)
}
