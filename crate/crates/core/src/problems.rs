//! Benchmark problems: the radial Schrodinger equation with a Woods-Saxon
//! potential at two resonance energies, an inhomogeneous linear oscillator,
//! a forced Duffing oscillator and a weakly nonlinear oscillator.
//!
//! Second-order equations `y'' = g(t, y)` are posed as first-order systems
//! on `(y, y')`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::integrator::{FrequencySchedule, OdeSystem, Trajectory};

pub const WS_DEPTH: f64 = -50.0;
pub const WS_DIFFUSENESS: f64 = 0.6;
pub const WS_RADIUS: f64 = 7.0;

/// Resonance energies used by the registry.
pub const RESONANCE_HIGH: f64 = 989.701916;
pub const RESONANCE_LOW: f64 = 341.495874;

/// Frequency switches from `sqrt(E + u0)` to `sqrt(E)` here.
pub const SCHRODINGER_BREAKPOINT: f64 = 6.5;
pub const SCHRODINGER_END: f64 = 15.0;

pub const DUFFING_COEFFS: [f64; 4] = [0.200179477536, 2.46946143e-4, 3.04014e-7, 3.74e-10];
pub const DUFFING_FORCING: f64 = 1.01;
pub const NONLINEAR_ENDPOINT: f64 = 3.92823991e-4;

pub const PROBLEM_NAMES: [&str; 5] = [
    "resonance-989",
    "resonance-341",
    "inhomogeneous",
    "duffing",
    "nonlinear",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("energy {energy} must exceed {min} for the frequency schedule to be real")]
    Domain { energy: f64, min: f64 },
    #[error("matching point x = {0} is not a grid point of the trajectory")]
    NotOnGrid(f64),
    #[error("matching points must satisfy x_i < x_j, got {0} and {1}")]
    BadMatching(f64, f64),
    #[error("phase-shift numerator and denominator both vanish")]
    DegenerateMatching,
    #[error("trajectory is empty")]
    EmptyTrajectory,
}

/// `V(x) = u0 / (1 + q) + u1 q / (1 + q)^2` with `q = exp((x - x0) / a)` and
/// `u1 = -u0 / a`.
pub fn woods_saxon(x: f64) -> f64 {
    let u1 = -WS_DEPTH / WS_DIFFUSENESS;
    let z = (x - WS_RADIUS) / WS_DIFFUSENESS;
    // Both terms are symmetric under q -> 1/q up to the factor q, so use
    // e = exp(-|z|) to stay finite for large x.
    let e = (-z.abs()).exp();
    let well = if z > 0.0 {
        WS_DEPTH * e / (1.0 + e)
    } else {
        WS_DEPTH / (1.0 + e)
    };
    well + u1 * e / ((1.0 + e) * (1.0 + e))
}

/// `dV/dx`, used by nothing in the integrator but handy for checks.
pub fn woods_saxon_derivative(x: f64) -> f64 {
    let u1 = -WS_DEPTH / WS_DIFFUSENESS;
    let z = (x - WS_RADIUS) / WS_DIFFUSENESS;
    let e = (-z.abs()).exp();
    let p = 1.0 + e;
    let dwell = -WS_DEPTH * e / (p * p) / WS_DIFFUSENESS;
    // d/dz [e / (1 + e)^2] with e = q^{-sign z}; the function is even in z.
    let dbump = e * (1.0 - e) / (p * p * p) * if z > 0.0 { -1.0 } else { 1.0 };
    dwell + u1 * dbump / WS_DIFFUSENESS
}

/// `y'' = (V(x) - E) y` for `l = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerSystem {
    pub energy: f64,
}

impl OdeSystem for SchrodingerSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, x: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = (woods_saxon(x) - self.energy) * y[0];
    }

    fn jacobian(&self, x: f64, _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, woods_saxon(x) - self.energy, 0.0],
        ))
    }

    fn frequency(&self) -> FrequencySchedule {
        FrequencySchedule::piecewise(
            vec![SCHRODINGER_BREAKPOINT],
            vec![(self.energy + WS_DEPTH).sqrt(), self.energy.sqrt()],
        )
    }
}

/// `y'' = -100 y + 99 sin t`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InhomogeneousSystem;

impl OdeSystem for InhomogeneousSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -100.0 * y[0] + 99.0 * t.sin();
    }

    fn jacobian(&self, _t: f64, _y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -100.0, 0.0]))
    }

    fn frequency(&self) -> FrequencySchedule {
        FrequencySchedule::constant(10.0)
    }
}

/// `y'' = -y - y^3 + 0.002 cos(1.01 t)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DuffingSystem;

impl OdeSystem for DuffingSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -y[0] - y[0] * y[0] * y[0] + 0.002 * (DUFFING_FORCING * t).cos();
    }

    fn jacobian(&self, _t: f64, y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -1.0 - 3.0 * y[0] * y[0], 0.0],
        ))
    }

    fn frequency(&self) -> FrequencySchedule {
        FrequencySchedule::constant(1.0)
    }
}

/// `y'' = -100 y + sin y`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NonlinearSystem;

impl OdeSystem for NonlinearSystem {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, _t: f64, y: &[f64], out: &mut [f64]) {
        out[0] = y[1];
        out[1] = -100.0 * y[0] + y[0].sin();
    }

    fn jacobian(&self, _t: f64, y: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 1.0, -100.0 + y[0].cos(), 0.0],
        ))
    }

    fn frequency(&self) -> FrequencySchedule {
        FrequencySchedule::constant(10.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSystem {
    Schrodinger(SchrodingerSystem),
    Inhomogeneous(InhomogeneousSystem),
    Duffing(DuffingSystem),
    Nonlinear(NonlinearSystem),
}

impl ProblemSystem {
    pub fn as_system(&self) -> &dyn OdeSystem {
        match self {
            ProblemSystem::Schrodinger(s) => s,
            ProblemSystem::Inhomogeneous(s) => s,
            ProblemSystem::Duffing(s) => s,
            ProblemSystem::Nonlinear(s) => s,
        }
    }
}

/// How the accuracy of a run is judged.
#[derive(Debug, Clone, Copy)]
pub enum Reference {
    /// Exact `y(t)`; the error is the maximum over all samples.
    ClosedForm(fn(f64) -> f64),
    /// Reference `y(t1)`.
    Endpoint(f64),
    /// Scattering phase shift with wavenumber `k`; the target is `pi/2`.
    PhaseShift { k: f64 },
}

#[derive(Debug, Clone)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub system: ProblemSystem,
    pub t0: f64,
    pub t1: f64,
    pub y0: Vec<f64>,
    pub reference: Reference,
}

impl BenchmarkProblem {
    pub fn system(&self) -> &dyn OdeSystem {
        self.system.as_system()
    }

    pub fn frequency(&self) -> FrequencySchedule {
        self.system().frequency()
    }
}

/// Radial problem on `[0, 15]` with `y(0) = 0`, `y'(0) = 1`.
pub fn schrodinger_problem(energy: f64) -> Result<BenchmarkProblem, ProblemError> {
    let min = -WS_DEPTH;
    if !(energy > min) {
        return Err(ProblemError::Domain { energy, min });
    }
    let name = if energy == RESONANCE_HIGH {
        "resonance-989"
    } else if energy == RESONANCE_LOW {
        "resonance-341"
    } else {
        "resonance"
    };
    Ok(BenchmarkProblem {
        name,
        system: ProblemSystem::Schrodinger(SchrodingerSystem { energy }),
        t0: 0.0,
        t1: SCHRODINGER_END,
        y0: vec![0.0, 1.0],
        reference: Reference::PhaseShift { k: energy.sqrt() },
    })
}

pub fn inhomogeneous_exact(t: f64) -> f64 {
    t.sin() + (10.0 * t).sin() + (10.0 * t).cos()
}

pub fn inhomogeneous_problem() -> BenchmarkProblem {
    BenchmarkProblem {
        name: "inhomogeneous",
        system: ProblemSystem::Inhomogeneous(InhomogeneousSystem),
        t0: 0.0,
        t1: 1000.0 * PI,
        y0: vec![1.0, 11.0],
        reference: Reference::ClosedForm(inhomogeneous_exact),
    }
}

/// Truncated cosine series for the periodic Duffing response.
pub fn duffing_reference(t: f64) -> f64 {
    DUFFING_COEFFS
        .iter()
        .enumerate()
        .map(|(k, c)| c * ((2 * k + 1) as f64 * DUFFING_FORCING * t).cos())
        .sum()
}

pub fn duffing_problem() -> BenchmarkProblem {
    BenchmarkProblem {
        name: "duffing",
        system: ProblemSystem::Duffing(DuffingSystem),
        t0: 0.0,
        t1: 1000.0 * PI,
        y0: vec![0.200426728067, 0.0],
        reference: Reference::ClosedForm(duffing_reference),
    }
}

pub fn nonlinear_problem() -> BenchmarkProblem {
    BenchmarkProblem {
        name: "nonlinear",
        system: ProblemSystem::Nonlinear(NonlinearSystem),
        t0: 0.0,
        t1: 20.0 * PI,
        y0: vec![0.0, 1.0],
        reference: Reference::Endpoint(NONLINEAR_ENDPOINT),
    }
}

pub fn problem_by_name(name: &str) -> Result<BenchmarkProblem, ProblemError> {
    match name {
        "resonance-989" => schrodinger_problem(RESONANCE_HIGH),
        "resonance-341" => schrodinger_problem(RESONANCE_LOW),
        "inhomogeneous" => Ok(inhomogeneous_problem()),
        "duffing" => Ok(duffing_problem()),
        "nonlinear" => Ok(nonlinear_problem()),
        other => Err(ProblemError::UnknownProblem(other.to_string())),
    }
}

/// Matching abscissae for the phase shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Matching {
    /// The last two grid points.
    LastTwo,
    /// Two grid points `x_i < x_j`.
    Points(f64, f64),
}

fn grid_index(ts: &[f64], x: f64) -> Option<usize> {
    let k = ts.partition_point(|&t| t < x);
    let tol = 1e-9 * x.abs().max(1.0);
    [k.checked_sub(1), Some(k)]
        .into_iter()
        .flatten()
        .filter(|&i| i < ts.len())
        .find(|&i| (ts[i] - x).abs() <= tol)
}

/// Phase shift from two samples `(x_i, y_i)`, `(x_j, y_j)` of an `l = 0`
/// solution, with `S(x) = sin kx` and `C(x) = -cos kx`.
///
/// `tan delta = (y_i S_j - y_j S_i) / (y_j C_i - y_i C_j)`, evaluated with a
/// two-argument arctangent and folded into `(-pi/2, pi/2]`.
pub fn phase_shift_from_samples(
    k: f64,
    (xi, yi): (f64, f64),
    (xj, yj): (f64, f64),
) -> Result<f64, ProblemError> {
    let (si, sj) = ((k * xi).sin(), (k * xj).sin());
    let (ci, cj) = (-(k * xi).cos(), -(k * xj).cos());
    let num = yi * sj - yj * si;
    let den = yj * ci - yi * cj;
    if num.abs() < 1e-300 && den.abs() < 1e-300 {
        return Err(ProblemError::DegenerateMatching);
    }
    let mut delta = num.atan2(den);
    if delta > FRAC_PI_2 {
        delta -= PI;
    } else if delta <= -FRAC_PI_2 {
        delta += PI;
    }
    Ok(delta)
}

/// Phase shift of the first component of `traj` at the matching points.
pub fn phase_shift(traj: &Trajectory, k: f64, matching: Matching) -> Result<f64, ProblemError> {
    let n = traj.len();
    let (i, j) = match matching {
        Matching::LastTwo => {
            if n < 2 {
                return Err(ProblemError::EmptyTrajectory);
            }
            (n - 2, n - 1)
        }
        Matching::Points(xi, xj) => {
            if !(xi < xj) {
                return Err(ProblemError::BadMatching(xi, xj));
            }
            let i = grid_index(&traj.ts, xi).ok_or(ProblemError::NotOnGrid(xi))?;
            let j = grid_index(&traj.ts, xj).ok_or(ProblemError::NotOnGrid(xj))?;
            (i, j)
        }
    };
    phase_shift_from_samples(
        k,
        (traj.ts[i], traj.state(i)[0]),
        (traj.ts[j], traj.state(j)[0]),
    )
}

/// Distance from `delta` to `pi/2` modulo `pi`.
pub fn phase_shift_error(delta: f64) -> f64 {
    (delta - FRAC_PI_2).abs().min((delta + FRAC_PI_2).abs())
}

/// Error of `traj` against the problem reference: max over samples for
/// closed forms, endpoint difference, or `|delta - pi/2|` with the default
/// matching points.
pub fn error_metric(problem: &BenchmarkProblem, traj: &Trajectory) -> Result<f64, ProblemError> {
    if traj.is_empty() {
        return Err(ProblemError::EmptyTrajectory);
    }
    match problem.reference {
        Reference::ClosedForm(exact) => Ok(traj
            .ts
            .iter()
            .zip(traj.component(0))
            .map(|(&t, y)| (y - exact(t)).abs())
            .fold(0.0, f64::max)),
        Reference::Endpoint(value) => Ok((traj.last_state().expect("non-empty")[0] - value).abs()),
        Reference::PhaseShift { k } => {
            phase_shift(traj, k, Matching::LastTwo).map(phase_shift_error)
        }
    }
}

/// `-log10(error)`; infinite for an exact result.
pub fn accuracy_digits(error: f64) -> f64 {
    -error.log10()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{integrate, Method, SolverConfig};
    use crate::tableau::gauss2;

    #[test]
    fn woods_saxon_values() {
        assert!((woods_saxon(7.0) + 25.0 / 6.0).abs() < 1e-13);
        let q = (-35.0f64 / 3.0).exp();
        let direct = -50.0 / (1.0 + q) + (250.0 / 3.0) * q / ((1.0 + q) * (1.0 + q));
        assert!((woods_saxon(0.0) - direct).abs() < 1e-13);
        assert!((woods_saxon(0.0) + 50.0).abs() < 2e-3);
        assert_eq!(woods_saxon(1e4), 0.0);
        assert!(woods_saxon(200.0).abs() < 1e-100);
    }

    #[test]
    fn woods_saxon_derivative_matches_differences() {
        for x in [0.5, 6.0, 7.0, 7.3, 9.0, 14.0] {
            let h = 1e-6;
            let fd = (woods_saxon(x + h) - woods_saxon(x - h)) / (2.0 * h);
            assert!(
                (woods_saxon_derivative(x) - fd).abs() < 1e-6 * fd.abs().max(1.0),
                "x = {x}"
            );
        }
    }

    #[test]
    fn woods_saxon_tail_decays_monotonically_to_zero() {
        // Beyond x0 + 5a the u1 term dominates: V > 0 and falls toward 0.
        let start = WS_RADIUS + 5.0 * WS_DIFFUSENESS;
        let vals: Vec<f64> = (0..400)
            .map(|k| woods_saxon(start + k as f64 * 0.05))
            .collect();
        assert!(vals.windows(2).all(|w| w[0] > w[1]));
        assert!(vals.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn schrodinger_schedule_and_domain() {
        let p = schrodinger_problem(RESONANCE_HIGH).unwrap();
        let f = p.frequency();
        assert_eq!(f.values(), &[939.701916f64.sqrt(), 989.701916f64.sqrt()]);
        assert_eq!(f.breakpoints(), &[6.5]);
        let f = schrodinger_problem(RESONANCE_LOW).unwrap().frequency();
        assert_eq!(f.values(), &[291.495874f64.sqrt(), 341.495874f64.sqrt()]);
        assert!(matches!(
            schrodinger_problem(50.0),
            Err(ProblemError::Domain { .. })
        ));
        let mut out = [9.0; 2];
        p.system().rhs(3.0, &[0.0, 1.0], &mut out);
        assert_eq!(out, [1.0, 0.0]);
    }

    #[test]
    fn initial_conditions_match_references() {
        let p = inhomogeneous_problem();
        assert_eq!(inhomogeneous_exact(0.0), p.y0[0]);
        assert!(inhomogeneous_exact(FRAC_PI_2).abs() < 1e-14);
        let mut out = [0.0; 2];
        p.system().rhs(0.0, &p.y0, &mut out);
        assert_eq!(out, [11.0, -100.0]);

        let d = duffing_problem();
        assert!((duffing_reference(0.0) - d.y0[0]).abs() < 1e-9);
        let y = d.y0[0];
        d.system().rhs(0.0, &d.y0, &mut out);
        assert_eq!(out, [0.0, -y - y * y * y + 0.002]);

        let n = nonlinear_problem();
        n.system().rhs(0.0, &n.y0, &mut out);
        assert_eq!(out, [1.0, 0.0]);
        assert!(matches!(n.reference, Reference::Endpoint(r) if r == 3.92823991e-4));
    }

    #[test]
    fn analytic_jacobians_match_differences() {
        for name in PROBLEM_NAMES {
            let p = problem_by_name(name).unwrap();
            let sys = p.system();
            let (t, y) = (7.2, [0.31, -0.8]);
            let jac = sys.jacobian(t, &y).unwrap();
            let mut f0 = [0.0; 2];
            let mut f1 = [0.0; 2];
            for q in 0..2 {
                let mut yp = y;
                let h = 1e-7;
                yp[q] += h;
                sys.rhs(t, &yp, &mut f1);
                yp[q] -= 2.0 * h;
                sys.rhs(t, &yp, &mut f0);
                for p in 0..2 {
                    let fd = (f1[p] - f0[p]) / (2.0 * h);
                    assert!(
                        (jac[(p, q)] - fd).abs() < 1e-5 * fd.abs().max(1.0),
                        "{name}"
                    );
                }
            }
        }
        assert!(problem_by_name("harmonic").is_err());
    }

    #[test]
    fn phase_shift_of_free_solutions() {
        let k = 5.0;
        let d = phase_shift_from_samples(k, (14.0, (k * 14.0).sin()), (15.0, (k * 15.0).sin()))
            .unwrap();
        assert!(d.abs() < 1e-14);
        let d = phase_shift_from_samples(k, (14.0, (k * 14.0).cos()), (15.0, (k * 15.0).cos()))
            .unwrap();
        assert!(phase_shift_error(d) < 1e-14);
        assert!(d > -FRAC_PI_2 && d <= FRAC_PI_2);
        assert_eq!(
            phase_shift_from_samples(k, (14.0, 0.0), (15.0, 0.0)),
            Err(ProblemError::DegenerateMatching)
        );
    }

    #[test]
    fn phase_shift_is_scale_invariant() {
        let k = 3.3;
        let y = |x: f64| (k * x + 0.4).sin();
        let a = phase_shift_from_samples(k, (14.0, y(14.0)), (14.5, y(14.5))).unwrap();
        for s in [-7.0, 1e-8, 3e5] {
            let b = phase_shift_from_samples(k, (14.0, s * y(14.0)), (14.5, s * y(14.5))).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
        assert!((a - 0.4).abs() < 1e-12 || (a + 0.4).abs() < 1e-12);
    }

    #[test]
    fn error_metric_cases() {
        assert!((phase_shift_error(FRAC_PI_2 - 1e-4) - 1e-4).abs() < 1e-15);
        assert!((phase_shift_error(-FRAC_PI_2 + 1e-4) - 1e-4).abs() < 1e-15);
        assert_eq!(accuracy_digits(1e-6), 6.0);

        let p = inhomogeneous_problem();
        let mut traj = integrate(
            &Method::Fixed(gauss2()),
            p.system(),
            &p.y0,
            0.0,
            1.0,
            400,
            &SolverConfig::default(),
        )
        .unwrap();
        let e = error_metric(&p, &traj).unwrap();
        assert!(e < 1e-6);
        assert!(matches!(
            phase_shift(&traj, 1.0, Matching::Points(0.5, 0.2)),
            Err(ProblemError::BadMatching(..))
        ));
        assert!(matches!(
            phase_shift(&traj, 1.0, Matching::Points(0.5, 0.60001)),
            Err(ProblemError::NotOnGrid(_))
        ));
        assert!(phase_shift(&traj, 1.0, Matching::Points(0.5, 0.75)).is_ok());
        traj.ts.clear();
        assert_eq!(error_metric(&p, &traj), Err(ProblemError::EmptyTrajectory));
    }
}
