//! Direct integration of the second-order equations in `t`
//!
//! ```text
//! g̈_i/g_i = λ_i/g_i² - trL·ġ_i/g_i + (ġ_i/g_i)² + u̇·ġ_i/g_i
//! ü       = Σ d_i g̈_i/g_i
//! ```
//!
//! with `trL = Σ d_j ġ_j/g_j`, as an independent check on the phase-space
//! pipeline. Along solutions
//! `Σ d_iλ_i/g_i² + Σ d_i(ġ_i/g_i)² - (u̇ - trL)²` is constant and equals
//! the gauge constant `C`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interp::{bracket, cubic_hermite, quintic_hermite};
use crate::model::ProblemSpec;
use crate::ode::{Dopri5, OdeError, OdeSystem, StepAction, Tolerances};
use crate::reconstruct::MetricProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderState {
    pub t: f64,
    pub g: Vec<f64>,
    pub g_dot: Vec<f64>,
    pub u_dot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSample {
    pub t: f64,
    pub g: Vec<f64>,
    pub g_dot: Vec<f64>,
    pub g_ddot: Vec<f64>,
    pub u_dot: f64,
    pub u_ddot: f64,
    pub conservation: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("t = {t} is not strictly inside the profile range")]
    OutOfRange { t: f64 },
    #[error("warping function left (0, ∞) at t = {t}")]
    BlowUp { t: f64 },
    #[error("step limit of {steps} exceeded at t = {t}")]
    StepLimitExceeded { t: f64, steps: usize },
    #[error("integrator failure: {0}")]
    Integrator(OdeError),
    #[error("profiles do not overlap in t")]
    NoOverlap,
}

impl OracleError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::OutOfRange { .. } => "OutOfRange",
            Self::BlowUp { .. } => "BlowUp",
            Self::StepLimitExceeded { .. } => "StepLimitExceeded",
            Self::Integrator(_) => "Integrator",
            Self::NoOverlap => "NoOverlap",
        }
    }
}

impl From<OdeError> for OracleError {
    fn from(e: OdeError) -> Self {
        match e {
            OdeError::StepLimitExceeded { t, steps } => Self::StepLimitExceeded { t, steps },
            other => Self::Integrator(other),
        }
    }
}

/// State in the layout `[g_1..g_r, ġ_1..ġ_r, u̇]`.
struct SecondOrderSystem {
    dims: Vec<f64>,
    lambdas: Vec<f64>,
}

impl SecondOrderSystem {
    fn new(spec: &ProblemSpec) -> Self {
        Self {
            dims: spec.factors.iter().map(|f| f.dim as f64).collect(),
            lambdas: spec.factors.iter().map(|f| f.einstein_const).collect(),
        }
    }

    /// `(g̈_i, ü, conservation quantity)`.
    fn accelerations(&self, y: &[f64]) -> (Vec<f64>, f64, f64) {
        let r = self.dims.len();
        let (g, rest) = y.split_at(r);
        let (gd, ud) = rest.split_at(r);
        let u_dot = ud[0];
        let l: Vec<f64> = (0..r).map(|i| gd[i] / g[i]).collect();
        let tr: f64 = (0..r).map(|i| self.dims[i] * l[i]).sum();
        let mut gdd = Vec::with_capacity(r);
        let mut u_ddot = 0.0;
        let mut cons = -(u_dot - tr).powi(2);
        for i in 0..r {
            let lam_g2 = self.lambdas[i] / (g[i] * g[i]);
            let acc = lam_g2 - tr * l[i] + l[i] * l[i] + u_dot * l[i];
            gdd.push(g[i] * acc);
            u_ddot += self.dims[i] * acc;
            cons += self.dims[i] * (lam_g2 + l[i] * l[i]);
        }
        (gdd, u_ddot, cons)
    }

    fn sample(&self, t: f64, y: &[f64]) -> OracleSample {
        let r = self.dims.len();
        let (g_ddot, u_ddot, conservation) = self.accelerations(y);
        OracleSample {
            t,
            g: y[..r].to_vec(),
            g_dot: y[r..2 * r].to_vec(),
            g_ddot,
            u_dot: y[2 * r],
            u_ddot,
            conservation,
        }
    }
}

impl OdeSystem for SecondOrderSystem {
    fn dim(&self) -> usize {
        2 * self.dims.len() + 1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let r = self.dims.len();
        let (gdd, udd, _) = self.accelerations(y);
        dy[..r].copy_from_slice(&y[r..2 * r]);
        dy[r..2 * r].copy_from_slice(&gdd);
        dy[2 * r] = udd;
    }
}

/// Initial data at `t0` from the profile: exact at rows, quintic Hermite in
/// `t` for `g` and `ġ` and cubic Hermite for `u̇` in between.
pub fn init_from_profile(profile: &MetricProfile, t0: f64) -> Result<SecondOrderState, OracleError> {
    let ts = profile.t_values();
    let first = *ts.first().ok_or(OracleError::OutOfRange { t: t0 })?;
    if !(t0 > 0.0 && t0 >= first) {
        return Err(OracleError::OutOfRange { t: t0 });
    }
    let i = bracket(&ts, t0).ok_or(OracleError::OutOfRange { t: t0 })?;
    for row in [&profile.rows[i], &profile.rows[i + 1]] {
        if row.t == t0 {
            return Ok(SecondOrderState {
                t: t0,
                g: row.g.clone(),
                g_dot: row.g_dot.clone(),
                u_dot: row.u_dot,
            });
        }
    }
    let (a, b) = (&profile.rows[i], &profile.rows[i + 1]);
    let h = b.t - a.t;
    let th = (t0 - a.t) / h;
    let r = a.g.len();
    // ġ's second derivative is g⃛; g's is g̈.
    let g = (0..r)
        .map(|j| quintic_hermite(h, th, a.g[j], a.g_dot[j], a.g_ddot[j], b.g[j], b.g_dot[j], b.g_ddot[j]))
        .collect();
    let g_dot = (0..r)
        .map(|j| {
            quintic_hermite(
                h, th, a.g_dot[j], a.g_ddot[j], a.g_dddot[j], b.g_dot[j], b.g_ddot[j], b.g_dddot[j],
            )
        })
        .collect();
    let (u_dot, _) = cubic_hermite(h, th, a.u_dot, a.u_ddot, b.u_dot, b.u_ddot);
    Ok(SecondOrderState { t: t0, g, g_dot, u_dot })
}

pub fn oracle_tolerances() -> Tolerances {
    Tolerances {
        rtol: 1e-12,
        atol: 1e-14,
        initial_step: 1e-4,
        max_steps: 1_000_000,
    }
}

/// Integrates from `state` to `t_end`, recording every accepted step and
/// landing exactly on each time in `stops`.
pub fn integrate_second_order(
    state: &SecondOrderState,
    spec: &ProblemSpec,
    t_end: f64,
    stops: &[f64],
) -> Result<Vec<OracleSample>, OracleError> {
    if t_end.is_nan() || t_end <= state.t {
        return Err(OracleError::OutOfRange { t: t_end });
    }
    let sys = SecondOrderSystem::new(spec);
    let mut y0 = state.g.clone();
    y0.extend_from_slice(&state.g_dot);
    y0.push(state.u_dot);
    let mut out = vec![sys.sample(state.t, &y0)];
    let r = spec.rank();
    let mut blew_up = None;
    Dopri5::new(oracle_tolerances()).integrate(&sys, state.t, &y0, t_end, stops, |t, y| {
        if y[..r].iter().any(|&g| !(g > 0.0 && g < 1e150)) || y.iter().any(|v| !v.is_finite()) {
            blew_up = Some(t);
            return StepAction::Stop;
        }
        out.push(sys.sample(t, y));
        StepAction::Continue
    })?;
    if let Some(t) = blew_up {
        return Err(OracleError::BlowUp { t });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub g: f64,
    pub g_dot: f64,
    pub u_dot: f64,
    pub points: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Deviation {
    pub fn max(&self) -> f64 {
        self.g.max(self.g_dot).max(self.u_dot)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Max relative deviation per field over the rows of `a` inside the oracle
/// range, with the oracle interpolated (cubic Hermite) onto `a`'s grid.
pub fn compare_profiles(a: &MetricProfile, b: &[OracleSample]) -> Result<Deviation, OracleError> {
    let tb: Vec<f64> = b.iter().map(|s| s.t).collect();
    let mut dev = Deviation {
        g: 0.0,
        g_dot: 0.0,
        u_dot: 0.0,
        points: 0,
        t_min: f64::INFINITY,
        t_max: f64::NEG_INFINITY,
    };
    for row in &a.rows {
        let Some(i) = bracket(&tb, row.t) else { continue };
        let (p, q) = (&b[i], &b[i + 1]);
        let h = q.t - p.t;
        let th = (row.t - p.t) / h;
        let at = |v0: f64, d0: f64, v1: f64, d1: f64| {
            if th == 0.0 {
                v0
            } else if th == 1.0 {
                v1
            } else {
                cubic_hermite(h, th, v0, d0, v1, d1).0
            }
        };
        for j in 0..row.g.len() {
            let g = at(p.g[j], p.g_dot[j], q.g[j], q.g_dot[j]);
            let gd = at(p.g_dot[j], p.g_ddot[j], q.g_dot[j], q.g_ddot[j]);
            dev.g = dev.g.max(rel(row.g[j], g));
            dev.g_dot = dev.g_dot.max(rel(row.g_dot[j], gd));
        }
        let ud = at(p.u_dot, p.u_ddot, q.u_dot, q.u_ddot);
        dev.u_dot = dev.u_dot.max(rel(row.u_dot, ud));
        dev.points += 1;
        dev.t_min = dev.t_min.min(row.t);
        dev.t_max = dev.t_max.max(row.t);
    }
    if dev.points == 0 {
        return Err(OracleError::NoOverlap);
    }
    Ok(dev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub t0: f64,
    pub t_end: f64,
    pub deviation: Deviation,
    pub conservation_initial: f64,
    /// `max |Q(t) - Q(t0)|` over the oracle run.
    pub conservation_drift: f64,
    pub samples: Vec<OracleSample>,
}

/// Starts the oracle at the first profile row with `t ≥ 10·t_first` and runs
/// it over one decade, stopping on every profile row in range.
pub fn cross_validate(profile: &MetricProfile, spec: &ProblemSpec) -> Result<CrossValidation, OracleError> {
    let ts = profile.t_values();
    let first = *ts.first().ok_or(OracleError::NoOverlap)?;
    let t0 = *ts
        .iter()
        .find(|&&t| t >= 10.0 * first)
        .ok_or(OracleError::OutOfRange { t: 10.0 * first })?;
    let t_end = 10.0 * t0;
    if t_end > *ts.last().expect("non-empty") {
        return Err(OracleError::OutOfRange { t: t_end });
    }
    let state = init_from_profile(profile, t0)?;
    let stops: Vec<f64> = ts.iter().copied().filter(|&t| t > t0 && t < t_end).collect();
    let samples = integrate_second_order(&state, spec, t_end, &stops)?;
    let q0 = samples[0].conservation;
    let drift = samples
        .iter()
        .fold(0.0f64, |m, s| m.max((s.conservation - q0).abs()));
    let deviation = compare_profiles(profile, &samples)?;
    Ok(CrossValidation {
        t0,
        t_end,
        deviation,
        conservation_initial: q0,
        conservation_drift: drift,
        samples,
    })
}
