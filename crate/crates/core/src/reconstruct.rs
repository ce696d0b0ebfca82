//! Physical data along a trajectory: arclength `t`, warping functions `g_i`
//! with three derivatives, and the potential `u` with two.
//!
//! Everything is expressed through the scale factor `k = dt/ds` inverse,
//! `ds = k dt`, which satisfies `k'/k = -ΣX²`. On soliton trajectories
//! `k = √(C/L)`; on Ricci-flat trajectories `L ≡ 0` and `k` is obtained by
//! integrating `-ΣX²` from `k(s_0) = 1`, which fixes the homothety.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{DenseOutput, Trajectory};
use crate::interp::{bracket, gauss_legendre5};
use crate::model::{constants, Mode, ProblemSpec};

pub const U_GAUGE: &str = "u = 0 at the first trajectory sample";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub s: f64,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lyapunov: f64,
    pub hamiltonian: f64,
    /// `k = ds/dt`
    pub scale: f64,
    pub g: Vec<f64>,
    pub g_dot: Vec<f64>,
    pub g_ddot: Vec<f64>,
    pub g_dddot: Vec<f64>,
    pub u: f64,
    pub u_dot: f64,
    pub u_ddot: f64,
}

impl ProfileRow {
    /// `Σ d_i ġ_i/g_i`, the mean curvature of the level sets.
    pub fn trace_l(&self, dims: &[usize]) -> f64 {
        dims.iter()
            .enumerate()
            .map(|(i, &d)| d as f64 * self.g_dot[i] / self.g[i])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub rows: Vec<ProfileRow>,
    pub gauge_c: f64,
    pub u_gauge: String,
    pub mode: Mode,
}

impl MetricProfile {
    pub fn t_values(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn rank(&self) -> usize {
        self.rows.first().map_or(0, |r| r.g.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Warping {
    pub g: f64,
    pub g_dot: f64,
    pub g_ddot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub u: f64,
    pub u_dot: f64,
    pub u_ddot: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconstructError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("L = {lyapunov:e} is not negative at s = {s}")]
    NonNegativeL { s: f64, lyapunov: f64 },
    #[error("Y_{} vanishes at s = {s}", index + 1)]
    ZeroY { s: f64, index: usize },
    #[error("arclength quadrature failed at s = {s}")]
    QuadratureFailure { s: f64 },
    #[error("s = {s} outside the trajectory range")]
    OutOfRange { s: f64 },
}

impl ReconstructError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyTrajectory => "EmptyTrajectory",
            Self::NonNegativeL { .. } => "NonNegativeL",
            Self::ZeroY { .. } => "ZeroY",
            Self::QuadratureFailure { .. } => "QuadratureFailure",
            Self::OutOfRange { .. } => "OutOfRange",
        }
    }
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

/// `L` from a packed state, computed as `(ΣX² + ΣY²) - 1`.
fn lyapunov_of(state: &[f64]) -> f64 {
    sum_sq(state) - 1.0
}

fn hamiltonian_of(state: &[f64], sqrt_d: &[f64]) -> f64 {
    state[..sqrt_d.len()]
        .iter()
        .zip(sqrt_d)
        .map(|(x, s)| x * s)
        .sum()
}

/// Cumulative integrals at every knot plus the machinery to extend them to
/// arbitrary `s`.
struct Integrals<'a> {
    spec: &'a ProblemSpec,
    dense: DenseOutput,
    sqrt_d: Vec<f64>,
    /// `log k` at knots (Ricci-flat mode only; zeros otherwise).
    log_k: Vec<f64>,
    t: Vec<f64>,
    u: Vec<f64>,
}

impl<'a> Integrals<'a> {
    fn new(traj: &Trajectory, spec: &'a ProblemSpec) -> Result<Self, ReconstructError> {
        if traj.is_empty() {
            return Err(ReconstructError::EmptyTrajectory);
        }
        if spec.mode == Mode::Soliton {
            for (p, &l) in traj.samples.iter().zip(&traj.lyapunov) {
                if l >= 0.0 {
                    return Err(ReconstructError::NonNegativeL { s: p.s, lyapunov: l });
                }
            }
        }
        let n = traj.len();
        let mut me = Self {
            spec,
            dense: DenseOutput::new(traj),
            sqrt_d: spec.sqrt_dims(),
            log_k: vec![0.0; n],
            t: vec![0.0; n],
            u: vec![0.0; n],
        };
        if spec.mode == Mode::RicciFlat {
            for i in 0..n - 1 {
                let inc = me.partial_sum_x_sq(i, me.dense.knots()[i + 1]);
                me.log_k[i + 1] = me.log_k[i] - inc;
            }
        }
        me.t[0] = seed_tail(spec, &traj.samples[0].state(), me.inv_scale_at_knot(0, &traj.samples[0].state()));
        for i in 0..n - 1 {
            let s1 = me.dense.knots()[i + 1];
            let dt = me.partial_t(i, s1);
            let du = me.partial_u(i, s1);
            me.t[i + 1] = me.t[i] + dt;
            me.u[i + 1] = me.u[i] + du;
            if !(me.t[i + 1] > me.t[i] && me.t[i + 1].is_finite()) {
                return Err(ReconstructError::QuadratureFailure { s: s1 });
            }
        }
        Ok(me)
    }

    fn knots(&self) -> &[f64] {
        self.dense.knots()
    }

    fn r(&self) -> usize {
        self.sqrt_d.len()
    }

    /// `∫_{s_i}^{s} ΣX²`.
    fn partial_sum_x_sq(&self, i: usize, s: f64) -> f64 {
        let s0 = self.knots()[i];
        if s == s0 {
            return 0.0;
        }
        let r = self.r();
        gauss_legendre5(s0, s, |v| sum_sq(&self.dense.eval_in(i, v)[..r]))
    }

    fn log_k_in(&self, i: usize, s: f64, state: &[f64]) -> f64 {
        match self.spec.mode {
            Mode::Soliton => 0.5 * (self.spec.gauge_c / lyapunov_of(state)).ln(),
            Mode::RicciFlat => self.log_k[i] - self.partial_sum_x_sq(i, s),
        }
    }

    fn inv_scale_at_knot(&self, i: usize, state: &[f64]) -> f64 {
        match self.spec.mode {
            Mode::Soliton => (lyapunov_of(state) / self.spec.gauge_c).sqrt(),
            Mode::RicciFlat => (-self.log_k[i]).exp(),
        }
    }

    /// `∫_{s_i}^{s} ds / k`.
    fn partial_t(&self, i: usize, s: f64) -> f64 {
        let s0 = self.knots()[i];
        if s == s0 {
            return 0.0;
        }
        gauss_legendre5(s0, s, |v| {
            let y = self.dense.eval_in(i, v);
            (-self.log_k_in(i, v, &y)).exp()
        })
    }

    /// `∫_{s_i}^{s} (H - 1) ds`.
    fn partial_u(&self, i: usize, s: f64) -> f64 {
        let s0 = self.knots()[i];
        if s == s0 {
            return 0.0;
        }
        gauss_legendre5(s0, s, |v| {
            hamiltonian_of(&self.dense.eval_in(i, v), &self.sqrt_d) - 1.0
        })
    }

    fn row_at(&self, s: f64) -> Result<ProfileRow, ReconstructError> {
        let i = bracket(self.knots(), s).ok_or(ReconstructError::OutOfRange { s })?;
        let state = self.dense.eval_in(i, s);
        if self.spec.mode == Mode::Soliton {
            let l = lyapunov_of(&state);
            if l >= 0.0 {
                return Err(ReconstructError::NonNegativeL { s, lyapunov: l });
            }
        }
        let k = self.log_k_in(i, s, &state).exp();
        let t = self.t[i] + self.partial_t(i, s);
        let u = self.u[i] + self.partial_u(i, s);
        closed_form_row(self.spec, s, &state, k, t, u)
    }
}

/// Arclength below the first sample, `∫_{-∞}^{s_0} ds/k`.
///
/// On the unstable manifold `ln(1/k) = β² s + φ(s)` with
/// `φ' = ΣX² - β² ≈ 2β² B e^{2β²(s - s_0)}`, so the integral is
/// `(1/k_0)/β² · (1 - 2B/3)` up to `O(B²)`.
fn seed_tail(spec: &ProblemSpec, state: &[f64], inv_k0: f64) -> f64 {
    let b2 = constants(spec).beta_sq();
    let sum_x_sq = sum_sq(&state[..spec.rank()]);
    let b = (sum_x_sq - b2) / (2.0 * b2);
    inv_k0 / b2 * (1.0 - 2.0 * b / 3.0)
}

/// Evaluates every closed form at one state.
fn closed_form_row(
    spec: &ProblemSpec,
    s: f64,
    state: &[f64],
    k: f64,
    t: f64,
    u: f64,
) -> Result<ProfileRow, ReconstructError> {
    let r = spec.rank();
    let (x, y) = state.split_at(r);
    if let Some(index) = y.iter().position(|&v| v == 0.0) {
        return Err(ReconstructError::ZeroY { s, index });
    }
    let sum_x_sq = sum_sq(x);
    let norm_sq = sum_x_sq + sum_sq(y);
    let h: f64 = x
        .iter()
        .zip(&spec.factors)
        .map(|(xi, f)| xi * f.sqrt_dim())
        .sum();
    let mut row = ProfileRow {
        s,
        t,
        x: x.to_vec(),
        y: y.to_vec(),
        lyapunov: norm_sq - 1.0,
        hamiltonian: h,
        scale: k,
        g: Vec::with_capacity(r),
        g_dot: Vec::with_capacity(r),
        g_ddot: Vec::with_capacity(r),
        g_dddot: Vec::with_capacity(r),
        u,
        u_dot: k * (h - 1.0),
        u_ddot: k * k * (norm_sq - h),
    };
    for (i, f) in spec.factors.iter().enumerate() {
        let d = f.dim as f64;
        let sd = f.sqrt_dim();
        let lam = f.einstein_const;
        let (xi, yi) = (x[i], y[i]);
        let g = (d * lam).sqrt() / (k * yi);
        row.g.push(g);
        row.g_dot.push(lam.sqrt() * xi / yi);
        row.g_ddot
            .push(g * k * k * (xi * xi + yi * yi - sd * xi) / d);
        let bracket = (xi / (yi * yi)) * (-3.0 * xi + xi * xi / sd + sd + sd * sum_x_sq)
            + xi / sd
            - 1.0;
        row.g_dddot.push(k * lam / g * bracket);
    }
    Ok(row)
}

/// Arclength `t` at every trajectory sample.
///
/// The part below the first sample is `(1/k(s_0)) / β²` (exact when
/// `1/k ∝ e^{β² s}`) with a first-order correction from `ΣX²(s_0) - β²`.
pub fn arclength(traj: &Trajectory, spec: &ProblemSpec) -> Result<Vec<f64>, ReconstructError> {
    Ok(Integrals::new(traj, spec)?.t)
}

/// `(g_i, ġ_i, g̈_i)` at every sample, indexed `[sample][factor]`.
pub fn warping_functions(
    traj: &Trajectory,
    spec: &ProblemSpec,
) -> Result<Vec<Vec<Warping>>, ReconstructError> {
    let profile = build_profile(traj, spec)?;
    Ok(profile
        .rows
        .iter()
        .map(|row| {
            (0..row.g.len())
                .map(|i| Warping {
                    g: row.g[i],
                    g_dot: row.g_dot[i],
                    g_ddot: row.g_ddot[i],
                })
                .collect()
        })
        .collect())
}

/// Third `t`-derivative of every `g_i` at sample `index`.
pub fn third_derivative(
    traj: &Trajectory,
    spec: &ProblemSpec,
    index: usize,
) -> Result<Vec<f64>, ReconstructError> {
    let p = traj.samples.get(index).ok_or(ReconstructError::OutOfRange { s: f64::NAN })?;
    let ints = Integrals::new(traj, spec)?;
    Ok(ints.row_at(p.s)?.g_dddot)
}

/// `(u, u̇, ü)` at every sample with `u = 0` at the first sample.
pub fn potential(traj: &Trajectory, spec: &ProblemSpec) -> Result<Vec<Potential>, ReconstructError> {
    let profile = build_profile(traj, spec)?;
    Ok(profile
        .rows
        .iter()
        .map(|r| Potential {
            u: r.u,
            u_dot: r.u_dot,
            u_ddot: r.u_ddot,
        })
        .collect())
}

pub fn build_profile(traj: &Trajectory, spec: &ProblemSpec) -> Result<MetricProfile, ReconstructError> {
    let ints = Integrals::new(traj, spec)?;
    let rows = traj
        .samples
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let state = p.state();
            let k = ints.log_k_in(i, p.s, &state).exp();
            closed_form_row(spec, p.s, &state, k, ints.t[i], ints.u[i])
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricProfile {
        rows,
        gauge_c: spec.gauge_c,
        u_gauge: U_GAUGE.to_string(),
        mode: spec.mode,
    })
}

/// Profile rows at arbitrary `s` inside the trajectory range.
pub fn profile_at(
    traj: &Trajectory,
    spec: &ProblemSpec,
    s_values: &[f64],
) -> Result<MetricProfile, ReconstructError> {
    let ints = Integrals::new(traj, spec)?;
    let rows = s_values
        .iter()
        .map(|&s| ints.row_at(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MetricProfile {
        rows,
        gauge_c: spec.gauge_c,
        u_gauge: U_GAUGE.to_string(),
        mode: spec.mode,
    })
}

/// `s` at which the reconstructed arclength equals `t`, by bisection on the
/// monotone map `s ↦ t(s)`.
pub fn s_for_t(traj: &Trajectory, spec: &ProblemSpec, t: f64) -> Result<f64, ReconstructError> {
    let ints = Integrals::new(traj, spec)?;
    let ts = &ints.t;
    let i = bracket(ts, t).ok_or(ReconstructError::OutOfRange { s: f64::NAN })?;
    let knots = ints.knots();
    let (mut lo, mut hi) = (knots[i], knots[i + 1]);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ts[i] + ints.partial_t(i, mid) < t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
