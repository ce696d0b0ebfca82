//! Seeding on the unstable manifold of the critical point and adaptive
//! integration of the phase system.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{bracket, quintic_hermite};
use crate::model::{constants, critical_point, Mode, ProblemSpec};
use crate::ode::{OdeError, Radau5, StepAction, Tolerances};
use crate::phase::{eval_into, hamiltonian, jacobian_at, lyapunov, PhasePoint, PhaseSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedOrigin,
    ReachedSMax,
    /// The seed is the critical point itself.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub termination: Termination,
    pub mode: Mode,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub rhs_evals: usize,
    /// Final value of `L`; the limit is `-1` for soliton trajectories.
    pub kappa_estimate: f64,
    /// Ricci-flat mode: largest `max(|L|, |H - 1|)` seen before a projection.
    pub max_projection_drift: f64,
    pub sqrt_dims: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<PhasePoint>,
    pub lyapunov: Vec<f64>,
    /// `ΣX² + ΣY²` per sample.
    pub norm_sq: Vec<f64>,
    pub hamiltonian: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.meta.sqrt_dims.len()
    }

    pub fn s_values(&self) -> Vec<f64> {
        self.samples.iter().map(|p| p.s).collect()
    }

    pub fn first(&self) -> &PhasePoint {
        &self.samples[0]
    }

    pub fn last(&self) -> &PhasePoint {
        &self.samples[self.samples.len() - 1]
    }

    /// First and second `s`-derivatives of the state at a sample.
    pub fn derivatives(&self, index: usize) -> (Vec<f64>, Vec<f64>) {
        state_derivatives(&self.meta.sqrt_dims, &self.samples[index].state())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("seed has L = {lyapunov:e} >= 0")]
    SeedLeavesWrongRegion { lyapunov: f64 },
    #[error("seed has Y_{} = {value:e} <= 0", index + 1)]
    NonPositiveY { index: usize, value: f64 },
    #[error("step limit of {steps} exceeded at s = {s}")]
    StepLimitExceeded { s: f64, steps: usize },
    #[error("invariant violated at s = {s}: {invariant}")]
    InvariantViolated { invariant: String, s: f64 },
    #[error("integrator failure: {0}")]
    Integrator(OdeError),
    #[error("s = {s} outside the trajectory range")]
    OutOfRange { s: f64 },
}

impl FlowError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::SeedLeavesWrongRegion { .. } => "SeedLeavesWrongRegion",
            Self::NonPositiveY { .. } => "NonPositiveY",
            Self::StepLimitExceeded { .. } => "StepLimitExceeded",
            Self::InvariantViolated { .. } => "InvariantViolated",
            Self::Integrator(_) => "Integrator",
            Self::OutOfRange { .. } => "OutOfRange",
        }
    }
}

impl From<OdeError> for FlowError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepLimitExceeded { t, steps } => Self::StepLimitExceeded { s: t, steps },
            other => Self::Integrator(other),
        }
    }
}

fn state_derivatives(sqrt_d: &[f64], state: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = state.len();
    let r = n / 2;
    let mut f = vec![0.0; n];
    let (fx, fy) = f.split_at_mut(r);
    eval_into(&state[..r], &state[r..], sqrt_d, fx, fy);
    let mut jac = DMatrix::zeros(n, n);
    jacobian_at(&state[..r], &state[r..], sqrt_d, &mut jac);
    let ff = &jac * nalgebra::DVector::from_column_slice(&f);
    (f, ff.iter().copied().collect())
}

/// Moves `X, Y` onto `{L = 0, H = 1}`: `X` is rescaled to `H = 1`, then `Y`
/// to the unit sphere.
pub fn project_ricci_flat(sqrt_d: &[f64], state: &mut [f64]) {
    let r = sqrt_d.len();
    let h: f64 = state[..r].iter().zip(sqrt_d).map(|(x, s)| x * s).sum();
    if h != 0.0 {
        for x in &mut state[..r] {
            *x /= h;
        }
    }
    let sx: f64 = state[..r].iter().map(|v| v * v).sum();
    let sy: f64 = state[r..].iter().map(|v| v * v).sum();
    if sy > 0.0 && sx < 1.0 {
        let scale = ((1.0 - sx) / sy).sqrt();
        for y in &mut state[r..] {
            *y *= scale;
        }
    }
}

/// Starting point on (the quadratic approximation of) the unstable manifold.
///
/// `seed_coeffs[0]` moves along `(2β, β̂)` in the `(X_1, Y_1)` plane;
/// `seed_coeffs[k]` sets `Y_{k+1}`, with the slaved second-order response
/// `X_{k+1} = ε_k² / (√d_{k+1} (1 + β²))` so that no stable-mode transient
/// is excited.
pub fn seed(spec: &ProblemSpec) -> Result<PhasePoint, FlowError> {
    let mut p = critical_point(spec);
    if spec.seed_coeffs.iter().all(|&c| c == 0.0) {
        return Ok(p);
    }
    let k = constants(spec);
    let b2 = k.beta_sq();
    let eps0 = spec.seed_coeffs[0];
    p.x[0] += eps0 * 2.0 * k.beta;
    p.y[0] += eps0 * k.beta_hat;
    for (i, f) in spec.factors.iter().enumerate().skip(1) {
        let e = spec.seed_coeffs[i];
        p.y[i] = e;
        p.x[i] = e * e / (f.sqrt_dim() * (1.0 + b2));
    }
    match spec.mode {
        Mode::Soliton => {
            let l = lyapunov(&p);
            if l >= 0.0 {
                return Err(FlowError::SeedLeavesWrongRegion { lyapunov: l });
            }
            if let Some((index, &value)) = p.y.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(FlowError::NonPositiveY { index, value });
            }
        }
        Mode::RicciFlat => {
            let mut state = p.state();
            project_ricci_flat(&spec.sqrt_dims(), &mut state);
            p = PhasePoint::from_state(p.s, &state);
            if let Some((index, &value)) = p.y.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(FlowError::NonPositiveY { index, value });
            }
        }
    }
    Ok(p)
}

fn tolerances(spec: &ProblemSpec) -> Tolerances {
    Tolerances {
        rtol: spec.controls.rtol,
        atol: spec.controls.atol,
        initial_step: spec.controls.initial_step,
        max_steps: spec.controls.max_steps,
    }
}

pub fn integrate(spec: &ProblemSpec, seed: &PhasePoint) -> Result<Trajectory, FlowError> {
    let sqrt_d = spec.sqrt_dims();
    let mut traj = Trajectory {
        samples: Vec::new(),
        lyapunov: Vec::new(),
        norm_sq: Vec::new(),
        hamiltonian: Vec::new(),
        meta: TrajectoryMeta {
            termination: Termination::ReachedSMax,
            mode: spec.mode,
            accepted_steps: 0,
            rejected_steps: 0,
            rhs_evals: 0,
            kappa_estimate: lyapunov(seed),
            max_projection_drift: 0.0,
            sqrt_dims: sqrt_d.clone(),
        },
    };
    let push = |traj: &mut Trajectory, p: PhasePoint| {
        traj.lyapunov.push(lyapunov(&p));
        traj.norm_sq.push(p.norm_sq());
        traj.hamiltonian.push(hamiltonian(&p, spec));
        traj.samples.push(p);
    };
    push(&mut traj, seed.clone());

    let (f0, _) = state_derivatives(&sqrt_d, &seed.state());
    if *seed == critical_point(spec) || f0.iter().all(|v| v.abs() <= 1e-15) {
        let mut end = seed.clone();
        end.s = spec.s_max;
        push(&mut traj, end);
        traj.meta.termination = Termination::Stationary;
        return Ok(traj);
    }

    let sys = PhaseSystem::new(spec);
    let solver = Radau5::new(tolerances(spec));
    let origin_tol_sq = spec.controls.origin_tol.powi(2);
    let drift_tol = spec.controls.drift_tol;
    let mut violation: Option<FlowError> = None;
    let mut reached_origin = false;

    let stats = solver.integrate(&sys, seed.s, &seed.state(), spec.s_max, &[], |s, y| {
        if y.iter().any(|v| !v.is_finite()) {
            violation = Some(FlowError::Integrator(OdeError::NonFinite { t: s }));
            return StepAction::Stop;
        }
        match spec.mode {
            Mode::Soliton => {
                let p = PhasePoint::from_state(s, y);
                let nsq = p.norm_sq();
                let prev = *traj.norm_sq.last().expect("seed sample");
                let bad = if let Some(i) = p.y.iter().position(|&v| v <= 0.0) {
                    Some(format!("Y_{} = {:e} is not positive", i + 1, p.y[i]))
                } else if nsq >= prev {
                    Some(format!("L not decreasing ({:e} -> {:e})", prev - 1.0, nsq - 1.0))
                } else if nsq >= 1.0 {
                    Some(format!("L = {:e} left (-1, 0)", nsq - 1.0))
                } else {
                    None
                };
                if let Some(invariant) = bad {
                    violation = Some(FlowError::InvariantViolated { invariant, s });
                    return StepAction::Stop;
                }
                push(&mut traj, p);
                if nsq < origin_tol_sq {
                    reached_origin = true;
                    return StepAction::Stop;
                }
            }
            Mode::RicciFlat => {
                let p = PhasePoint::from_state(s, y);
                let drift = lyapunov(&p)
                    .abs()
                    .max((hamiltonian(&p, spec) - 1.0).abs());
                traj.meta.max_projection_drift = traj.meta.max_projection_drift.max(drift);
                project_ricci_flat(&sqrt_d, y);
                let p = PhasePoint::from_state(s, y);
                let after = lyapunov(&p)
                    .abs()
                    .max((hamiltonian(&p, spec) - 1.0).abs());
                if after > drift_tol {
                    violation = Some(FlowError::InvariantViolated {
                        invariant: format!("Ricci-flat constraint drift {after:e}"),
                        s,
                    });
                    return StepAction::Stop;
                }
                if let Some(i) = p.y.iter().position(|&v| v <= 0.0) {
                    violation = Some(FlowError::InvariantViolated {
                        invariant: format!("Y_{} = {:e} is not positive", i + 1, p.y[i]),
                        s,
                    });
                    return StepAction::Stop;
                }
                push(&mut traj, p);
            }
        }
        StepAction::Continue
    })?;
    if let Some(e) = violation {
        return Err(e);
    }
    traj.meta.accepted_steps = stats.accepted;
    traj.meta.rejected_steps = stats.rejected;
    traj.meta.rhs_evals = stats.rhs_evals;
    traj.meta.kappa_estimate = *traj.lyapunov.last().expect("non-empty");
    if reached_origin {
        traj.meta.termination = Termination::ReachedOrigin;
    }
    Ok(traj)
}

/// Piecewise quintic Hermite interpolant of a trajectory, with first and
/// second derivatives at every knot taken from the vector field.
#[derive(Debug, Clone)]
pub struct DenseOutput {
    knots: Vec<f64>,
    states: Vec<Vec<f64>>,
    d1: Vec<Vec<f64>>,
    d2: Vec<Vec<f64>>,
}

impl DenseOutput {
    pub fn new(traj: &Trajectory) -> Self {
        let states: Vec<Vec<f64>> = traj.samples.iter().map(PhasePoint::state).collect();
        let (d1, d2) = states
            .iter()
            .map(|y| state_derivatives(&traj.meta.sqrt_dims, y))
            .unzip();
        Self {
            knots: traj.s_values(),
            states,
            d1,
            d2,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// State at `s` within the knot interval `i`.
    pub fn eval_in(&self, i: usize, s: f64) -> Vec<f64> {
        let h = self.knots[i + 1] - self.knots[i];
        let theta = (s - self.knots[i]) / h;
        if theta == 0.0 {
            return self.states[i].clone();
        }
        if theta == 1.0 {
            return self.states[i + 1].clone();
        }
        let (y0, y1) = (&self.states[i], &self.states[i + 1]);
        let (d0, d1) = (&self.d1[i], &self.d1[i + 1]);
        let (dd0, dd1) = (&self.d2[i], &self.d2[i + 1]);
        (0..y0.len())
            .map(|j| quintic_hermite(h, theta, y0[j], d0[j], dd0[j], y1[j], d1[j], dd1[j]))
            .collect()
    }

    pub fn eval(&self, s: f64) -> Result<Vec<f64>, FlowError> {
        let i = bracket(&self.knots, s).ok_or(FlowError::OutOfRange { s })?;
        Ok(self.eval_in(i, s))
    }
}

/// Interpolated states at the requested `s`. Knots are reproduced exactly.
pub fn dense_sample(traj: &Trajectory, s_values: &[f64]) -> Result<Vec<PhasePoint>, FlowError> {
    if s_values.is_empty() {
        return Ok(Vec::new());
    }
    let dense = DenseOutput::new(traj);
    s_values
        .iter()
        .map(|&s| Ok(PhasePoint::from_state(s, &dense.eval(s)?)))
        .collect()
}
