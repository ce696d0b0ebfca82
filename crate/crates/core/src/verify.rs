//! Claim-by-claim checks on a soliton (or Ricci-flat) run.
//!
//! Boundary values at `t = 0` are never sampled. They are obtained by
//! Richardson extrapolation along a ladder `s_k = s_0 + k·ln2/(2β²)` at the
//! seed end, on which `L` roughly doubles and `t` grows by `√2` per rung.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::flow::{dense_sample, FlowError, Termination, Trajectory};
use crate::geometry::CurvatureReport;
use crate::model::{constants, Mode, ProblemSpec};
use crate::phase::{hamiltonian, lyapunov, PhasePoint};
use crate::reconstruct::{profile_at, MetricProfile, ReconstructError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("extrapolation needs at least 3 samples, got {got}")]
    TooFewSamples { got: usize },
    #[error("incomplete inputs: {0}")]
    IncompleteInputs(String),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
}

impl VerifyError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::TooFewSamples { .. } => "TooFewSamples",
            Self::IncompleteInputs(_) => "IncompleteInputs",
            Self::Flow(e) => e.code(),
            Self::Reconstruct(e) => e.code(),
        }
    }
}

/// Which powers of `t` the extrapolating polynomial may contain besides the
/// constant term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `t, t², t³, ...`
    General,
    /// `t², t⁴, ...`
    Even,
    /// `t, t³, t⁵, ...`
    Odd,
}

impl Parity {
    fn power(self, k: usize) -> i32 {
        match (self, k) {
            (_, 0) => 0,
            (Self::General, k) => k as i32,
            (Self::Even, k) => 2 * k as i32,
            (Self::Odd, k) => 2 * k as i32 - 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    /// Difference between the fits of the two highest orders.
    pub error: f64,
}

fn fit_constant(points: &[(f64, f64)], parity: Parity) -> f64 {
    let m = points.len();
    let scale = points.iter().fold(0.0f64, |a, p| a.max(p.0.abs()));
    let a = DMatrix::from_fn(m, m, |j, k| (points[j].0 / scale).powi(parity.power(k)));
    let b = DVector::from_iterator(m, points.iter().map(|p| p.1));
    match a.lu().solve(&b) {
        Some(c) => c[0],
        None => f64::NAN,
    }
}

/// Limit at `t → 0` of samples `(t, v)`, `t > 0`, fitting `order` correction
/// terms of the declared parity through the `order + 1` samples nearest 0.
pub fn richardson_extrapolate(
    values: &[(f64, f64)],
    order: usize,
    parity: Parity,
) -> Result<Extrapolation, VerifyError> {
    if values.len() < 3 || order < 2 {
        return Err(VerifyError::TooFewSamples { got: values.len().min(order + 1) });
    }
    let mut pts = values.to_vec();
    pts.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
    let m = (order + 1).min(pts.len());
    let high = fit_constant(&pts[..m], parity);
    let low = fit_constant(&pts[..m - 1], parity);
    Ok(Extrapolation {
        limit: high,
        error: (high - low).abs(),
    })
}

pub const LADDER_RUNGS: usize = 5;

/// Limits of the geometry at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLimits {
    pub g: Vec<Extrapolation>,
    pub g_dot: Vec<Extrapolation>,
    pub g_ddot: Vec<Extrapolation>,
    pub u: Extrapolation,
    pub u_dot: Extrapolation,
    pub u_ddot: Extrapolation,
}

/// Everything measured along the seed-end ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedEnd {
    pub ladder_s: Vec<f64>,
    pub ladder_t: Vec<f64>,
    /// `X_i / Y_i²` extrapolated to `L → 0`.
    pub ratio_limits: Vec<Extrapolation>,
    /// `(X_i/Y_i² - limit)/L`, i.e. the linear coefficient of the same fit.
    pub q: Vec<f64>,
    /// Limit of `(ΣX² + Y_1² - 1)/L`.
    pub rho: Extrapolation,
    /// Limit of `(X_1 - β)/L`.
    pub x1_offset: Extrapolation,
    /// Limit of `e^{-2β²s} L`.
    pub l_scaled: Extrapolation,
    /// Fitted rate of `log(-L)` in `s`.
    pub l_exponent: f64,
    /// Fitted rate of `log Y_i` in `s` (`None` for the first factor).
    pub y_exponents: Vec<Option<f64>>,
    pub boundary: BoundaryLimits,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn linear_coefficient(points: &[(f64, f64)]) -> f64 {
    let m = points.len();
    let a = DMatrix::from_fn(m, m, |j, k| points[j].0.powi(k as i32));
    let b = DVector::from_iterator(m, points.iter().map(|p| p.1));
    a.lu().solve(&b).map_or(f64::NAN, |c| c[1])
}

pub fn seed_end_analysis(traj: &Trajectory, spec: &ProblemSpec) -> Result<SeedEnd, VerifyError> {
    let k = constants(spec);
    let b2 = k.beta_sq();
    let s0 = traj.first().s;
    let delta = std::f64::consts::LN_2 / (2.0 * b2);
    let ladder_s: Vec<f64> = (0..LADDER_RUNGS).map(|j| s0 + j as f64 * delta).collect();
    if traj.len() < 2 || *ladder_s.last().expect("non-empty") > traj.last().s {
        return Err(VerifyError::IncompleteInputs("trajectory too short for the seed-end ladder".into()));
    }
    let pts = dense_sample(traj, &ladder_s)?;
    let prof = profile_at(traj, spec, &ladder_s)?;
    let r = spec.rank();
    let ls: Vec<f64> = pts.iter().map(lyapunov).collect();
    let in_l = |f: &dyn Fn(&PhasePoint) -> f64| -> Vec<(f64, f64)> {
        pts.iter().zip(&ls).map(|(p, &l)| (-l, f(p))).collect()
    };
    let order = LADDER_RUNGS - 1;

    let mut ratio_limits = Vec::with_capacity(r);
    let mut q = Vec::with_capacity(r);
    for i in 0..r {
        let data = in_l(&|p| p.x[i] / (p.y[i] * p.y[i]));
        let lim = richardson_extrapolate(&data, order, Parity::General)?;
        // `data` is in `-L`, so the coefficient per unit `L` flips sign.
        q.push(-linear_coefficient(&data[..3]));
        ratio_limits.push(lim);
    }
    let rho = richardson_extrapolate(
        &in_l(&|p| (p.sum_x_sq() + p.y[0] * p.y[0] - 1.0) / lyapunov(p)),
        order,
        Parity::General,
    )?;
    let x1_offset = richardson_extrapolate(
        &in_l(&|p| (p.x[0] - k.beta) / lyapunov(p)),
        order,
        Parity::General,
    )?;
    let l_scaled = richardson_extrapolate(
        &in_l(&|p| (-2.0 * b2 * p.s).exp() * lyapunov(p)),
        order,
        Parity::General,
    )?;
    let log_l: Vec<f64> = ls.iter().map(|l| (-l).ln()).collect();
    let l_exponent = slope(&ladder_s, &log_l);
    let y_exponents = (0..r)
        .map(|i| {
            (i > 0).then(|| {
                let ly: Vec<f64> = pts.iter().map(|p| p.y[i].ln()).collect();
                slope(&ladder_s, &ly)
            })
        })
        .collect();

    let rows = &prof.rows;
    let ladder_t: Vec<f64> = rows.iter().map(|row| row.t).collect();
    let ex = |f: &dyn Fn(usize) -> f64, parity| {
        let data: Vec<(f64, f64)> = (0..rows.len()).map(|j| (rows[j].t, f(j))).collect();
        richardson_extrapolate(&data, order, parity)
    };
    let (mut g, mut g_dot, mut g_ddot) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..r {
        // The collapsing factor is odd in t, the others even.
        let (p0, p1) = if i == 0 {
            (Parity::Odd, Parity::Even)
        } else {
            (Parity::Even, Parity::Odd)
        };
        g.push(ex(&|j| rows[j].g[i], p0)?);
        g_dot.push(ex(&|j| rows[j].g_dot[i], p1)?);
        g_ddot.push(ex(&|j| rows[j].g_ddot[i], p0)?);
    }
    let boundary = BoundaryLimits {
        g,
        g_dot,
        g_ddot,
        u: ex(&|j| rows[j].u, Parity::Even)?,
        u_dot: ex(&|j| rows[j].u_dot, Parity::Odd)?,
        u_ddot: ex(&|j| rows[j].u_ddot, Parity::Even)?,
    };
    Ok(SeedEnd {
        ladder_s,
        ladder_t,
        ratio_limits,
        q,
        rho,
        x1_offset,
        l_scaled,
        l_exponent,
        y_exponents,
        boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckId {
    LyapunovMonotone,
    ReachesOrigin,
    OriginRatio,
    SeedRatio,
    X1BelowBeta,
    X1OffsetConsistency,
    LyapunovGrowthRate,
    BoundaryValues,
    HamiltonianInequalities,
    RicciNonnegative,
    PotentialAtZero,
}

impl CheckId {
    pub const ALL: [CheckId; 11] = [
        Self::LyapunovMonotone,
        Self::ReachesOrigin,
        Self::OriginRatio,
        Self::SeedRatio,
        Self::X1BelowBeta,
        Self::X1OffsetConsistency,
        Self::LyapunovGrowthRate,
        Self::BoundaryValues,
        Self::HamiltonianInequalities,
        Self::RicciNonnegative,
        Self::PotentialAtZero,
    ];

    pub fn letter(self) -> char {
        (b'a' + Self::ALL.iter().position(|&c| c == self).expect("listed") as u8) as char
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::LyapunovMonotone => "lyapunov_monotone",
            Self::ReachesOrigin => "reaches_origin",
            Self::OriginRatio => "origin_ratio",
            Self::SeedRatio => "seed_ratio",
            Self::X1BelowBeta => "x1_below_beta",
            Self::X1OffsetConsistency => "x1_offset_consistency",
            Self::LyapunovGrowthRate => "lyapunov_growth_rate",
            Self::BoundaryValues => "boundary_values",
            Self::HamiltonianInequalities => "hamiltonian_inequalities",
            Self::RicciNonnegative => "ricci_nonnegative",
            Self::PotentialAtZero => "potential_at_zero",
        }
    }

    pub fn claim(self) -> &'static str {
        match self {
            Self::LyapunovMonotone => "L strictly decreasing in (-1, 0) with every Y_i > 0",
            Self::ReachesOrigin => "terminal L = -1 and |(X, Y)| <= 1e-6",
            Self::OriginRatio => "X_i/Y_i^2 -> 1/sqrt(d_i) at the origin",
            Self::SeedRatio => "X_i/Y_i^2 -> 1/(sqrt(d_i)(1 + beta^2)) at the seed end, i > 1",
            Self::X1BelowBeta => "X_1 < beta at every sample",
            Self::X1OffsetConsistency => "(X_1 - beta)/L -> beta rho/(1 + beta^2)",
            Self::LyapunovGrowthRate => "e^(-2 beta^2 s) L has a finite negative limit",
            Self::BoundaryValues => "smooth collapse of the first factor at t = 0",
            Self::HamiltonianInequalities => "H < 1 and L + 1 - H < 0 at every sample",
            Self::RicciNonnegative => "Ric >= 0 and Ric + Hess u = 0",
            Self::PotentialAtZero => "closed-form u(0) agrees with the integrated potential",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub id: char,
    pub name: String,
    pub claim: String,
    /// Individual measured quantities.
    pub values: Vec<f64>,
    /// Worst deviation from the claim (compared with `tolerance`).
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(id: CheckId, values: Vec<f64>, measured: f64, tolerance: f64, passed: bool, detail: String) -> Self {
        Self {
            id: id.letter(),
            name: id.name().to_string(),
            claim: id.claim().to_string(),
            values,
            measured,
            tolerance,
            passed,
            detail,
        }
    }

    fn custom(name: &str, claim: &str, values: Vec<f64>, measured: f64, tolerance: f64) -> Self {
        Self {
            id: '-',
            name: name.to_string(),
            claim: claim.to_string(),
            values,
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Terminal value of `L`.
    pub kappa: f64,
    pub rho_estimate: Option<f64>,
    pub lyapunov_exponent: Option<f64>,
    pub y_exponents: Vec<Option<f64>>,
    /// Extrapolated `g_i(0)`.
    pub boundary_g: Vec<f64>,
    pub q: Vec<f64>,
    pub u0_formula: Option<f64>,
    pub u0_extrapolated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub diagnostics: Diagnostics,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub struct SuiteInputs<'a> {
    pub traj: &'a Trajectory,
    pub profile: &'a MetricProfile,
    pub curv: &'a CurvatureReport,
    pub spec: &'a ProblemSpec,
}

impl SuiteInputs<'_> {
    fn validate(&self, mode: Mode) -> Result<(), VerifyError> {
        let why = if self.spec.mode != mode || self.traj.meta.mode != mode {
            Some(format!("expected a {mode:?} run"))
        } else if self.traj.meta.termination == Termination::Stationary {
            Some("trajectory is stationary".into())
        } else if self.traj.len() < 3 {
            Some("trajectory has fewer than 3 samples".into())
        } else if self.profile.rows.len() != self.traj.len() {
            Some("profile and trajectory lengths differ".into())
        } else if self.curv.samples.len() != self.profile.rows.len() {
            Some("curvature report and profile lengths differ".into())
        } else if self.traj.rank() != self.spec.rank() {
            Some("trajectory rank differs from the problem".into())
        } else {
            None
        };
        why.map_or(Ok(()), |w| Err(VerifyError::IncompleteInputs(w)))
    }
}

fn within(values: &[(f64, f64)]) -> (Vec<f64>, f64) {
    let measured = values.iter().fold(0.0f64, |m, (v, t)| m.max((v - t).abs()));
    (values.iter().map(|p| p.0).collect(), measured)
}

/// `u(0)` from `u - Σ d_i log g_i + s ≡ K` and the seed-end limits.
pub fn u0_formula(profile: &MetricProfile, spec: &ProblemSpec, seed: &SeedEnd) -> f64 {
    let k = constants(spec);
    let row = &profile.rows[0];
    let kk = row.u - spec.factors.iter().zip(&row.g).map(|(f, g)| f.dim as f64 * g.ln()).sum::<f64>() + row.s;
    let f1 = &spec.factors[0];
    let d1 = f1.dim as f64;
    let rest: f64 = spec
        .factors
        .iter()
        .zip(&seed.boundary.g)
        .skip(1)
        .map(|(f, l)| f.dim as f64 * l.limit.ln())
        .sum();
    kk + rest + d1 * (0.5 * (d1 * f1.einstein_const).ln() - k.beta_hat.ln())
        + 0.5 * d1 * (seed.l_scaled.limit / spec.gauge_c).ln()
}

fn evaluate(id: CheckId, inp: &SuiteInputs, seed: &SeedEnd) -> Check {
    let spec = inp.spec;
    let k = constants(spec);
    let samples = &inp.traj.samples;
    let r = spec.rank();
    match id {
        CheckId::LyapunovMonotone => {
            let mut bad = None;
            let mut prev = f64::INFINITY;
            let mut worst = 0.0f64;
            for (j, p) in samples.iter().enumerate() {
                let n = p.norm_sq();
                let l = lyapunov(p);
                let ok = n < prev && n < 1.0 && l > -1.0 && p.y.iter().all(|&y| y > 0.0);
                if !ok && bad.is_none() {
                    bad = Some(j);
                }
                worst = worst.max(l);
                prev = n;
            }
            let detail = bad.map_or(String::new(), |j| {
                format!("first violation at sample {j}, s = {}", samples[j].s)
            });
            Check::new(id, vec![worst], worst, 0.0, bad.is_none(), detail)
        }
        CheckId::ReachesOrigin => {
            let last = inp.traj.last();
            let l = lyapunov(last);
            let norm = last.norm_sq().sqrt();
            let measured = (l + 1.0).abs().max(norm);
            let ok = inp.traj.meta.termination == Termination::ReachedOrigin && measured <= 1e-6;
            Check::new(id, vec![l, norm], measured, 1e-6, ok, format!("{:?}", inp.traj.meta.termination))
        }
        CheckId::OriginRatio => {
            let last = inp.traj.last();
            let pairs: Vec<(f64, f64)> = (0..r)
                .map(|i| (last.x[i] / (last.y[i] * last.y[i]), 1.0 / spec.factors[i].sqrt_dim()))
                .collect();
            let (values, measured) = within(&pairs);
            Check::new(id, values, measured, 1e-4, measured <= 1e-4, String::new())
        }
        CheckId::SeedRatio => {
            let pairs: Vec<(f64, f64)> = (1..r)
                .map(|i| {
                    let t = 1.0 / (spec.factors[i].sqrt_dim() * (1.0 + k.beta_sq()));
                    (seed.ratio_limits[i].limit, t)
                })
                .collect();
            let (values, mut measured) = within(&pairs);
            for e in &seed.ratio_limits[1..] {
                measured = measured.max(e.error);
            }
            let detail = if r == 1 { "no factor beyond the first".into() } else { String::new() };
            Check::new(id, values, measured, 1e-3, measured <= 1e-3, detail)
        }
        CheckId::X1BelowBeta => {
            let worst = samples.iter().map(|p| p.x[0] - k.beta).fold(f64::NEG_INFINITY, f64::max);
            let bad = samples.iter().position(|p| p.x[0] >= k.beta);
            let detail = bad.map_or(String::new(), |j| format!("violated at sample {j}"));
            Check::new(id, vec![worst], worst, 0.0, bad.is_none(), detail)
        }
        CheckId::X1OffsetConsistency => {
            let target = k.beta * seed.rho.limit / (1.0 + k.beta_sq());
            let measured = (seed.x1_offset.limit - target).abs() + seed.x1_offset.error + seed.rho.error;
            Check::new(
                id,
                vec![seed.x1_offset.limit, target, seed.rho.limit],
                measured,
                1e-3,
                measured <= 1e-3,
                String::new(),
            )
        }
        CheckId::LyapunovGrowthRate => {
            let rel = (seed.l_exponent / (2.0 * k.beta_sq()) - 1.0).abs();
            let f = seed.l_scaled;
            let ok = rel <= 0.02 && f.limit < 0.0 && f.limit.is_finite() && f.error <= 1e-3 * f.limit.abs();
            Check::new(id, vec![seed.l_exponent, f.limit], rel, 0.02, ok, String::new())
        }
        CheckId::BoundaryValues => {
            let b = &seed.boundary;
            let mut dev = Vec::new();
            let mut failures = Vec::new();
            let mut target = |name: String, e: Extrapolation, t: f64, tol: f64| {
                let m = (e.limit - t).abs().max(e.error);
                if m > tol {
                    failures.push(name);
                }
                dev.push(m / tol);
            };
            target("g_1".into(), b.g[0], 0.0, 1e-3);
            target("g_dot_1".into(), b.g_dot[0], 1.0, 1e-3);
            target("g_ddot_1".into(), b.g_ddot[0], 0.0, 1e-2);
            target("u_dot".into(), b.u_dot, 0.0, 1e-3);
            for i in 1..r {
                target(format!("g_dot_{}", i + 1), b.g_dot[i], 0.0, 1e-3);
            }
            let mut finite = vec![("u_ddot".to_string(), b.u_ddot)];
            for i in 1..r {
                finite.push((format!("g_ddot_{}", i + 1), b.g_ddot[i]));
                if !(b.g[i].limit > 0.0 && b.g[i].error < b.g[i].limit) {
                    failures.push(format!("g_{}", i + 1));
                }
            }
            for (name, e) in finite {
                if !(e.limit.is_finite() && e.error <= 1e-2 * e.limit.abs().max(1.0)) {
                    failures.push(name);
                }
            }
            let mut values: Vec<f64> = b.g.iter().chain(&b.g_dot).chain(&b.g_ddot).map(|e| e.limit).collect();
            values.extend([b.u_dot.limit, b.u_ddot.limit]);
            let measured = dev.iter().copied().fold(0.0, f64::max);
            let detail = if failures.is_empty() {
                "measured is the worst deviation in units of its tolerance".into()
            } else {
                format!("failed: {}", failures.join(", "))
            };
            Check::new(id, values, measured, 1.0, failures.is_empty(), detail)
        }
        CheckId::HamiltonianInequalities => {
            let mut worst_h = f64::NEG_INFINITY;
            let mut worst_g = f64::NEG_INFINITY;
            let mut bad = None;
            for (j, p) in samples.iter().enumerate() {
                let h = hamiltonian(p, spec);
                // L + 1 - H without forming L.
                let gap = p.norm_sq() - h;
                worst_h = worst_h.max(h - 1.0);
                worst_g = worst_g.max(gap);
                if (h >= 1.0 || gap >= 0.0) && bad.is_none() {
                    bad = Some(j);
                }
            }
            let detail = bad.map_or(String::new(), |j| format!("violated at sample {j}"));
            Check::new(id, vec![worst_h, worst_g], worst_h.max(worst_g), 0.0, bad.is_none(), detail)
        }
        CheckId::RicciNonnegative => {
            let c = inp.curv;
            let ok = c.min_ricci >= -1e-8 && c.soliton_residual_max <= 1e-6;
            Check::new(
                id,
                vec![c.min_ricci, c.soliton_residual_max],
                c.soliton_residual_max.max(-c.min_ricci),
                1e-6,
                ok,
                "min Ricci >= -1e-8, residual <= 1e-6".into(),
            )
        }
        CheckId::PotentialAtZero => {
            let formula = u0_formula(inp.profile, spec, seed);
            let ex = seed.boundary.u;
            let measured = (formula - ex.limit).abs() + ex.error;
            let ok = formula.is_finite() && measured <= 1e-3;
            Check::new(id, vec![formula, ex.limit], measured, 1e-3, ok, String::new())
        }
    }
}

/// Re-runs a single check.
pub fn run_check(id: CheckId, inputs: &SuiteInputs) -> Result<Check, VerifyError> {
    inputs.validate(Mode::Soliton)?;
    let seed = seed_end_analysis(inputs.traj, inputs.spec)?;
    Ok(evaluate(id, inputs, &seed))
}

pub fn run_suite(
    traj: &Trajectory,
    profile: &MetricProfile,
    curv: &CurvatureReport,
    spec: &ProblemSpec,
) -> Result<VerifyReport, VerifyError> {
    let inputs = SuiteInputs { traj, profile, curv, spec };
    inputs.validate(Mode::Soliton)?;
    let seed = seed_end_analysis(traj, spec)?;
    let checks = CheckId::ALL.iter().map(|&id| evaluate(id, &inputs, &seed)).collect();
    let diagnostics = Diagnostics {
        kappa: traj.meta.kappa_estimate,
        rho_estimate: Some(seed.rho.limit),
        lyapunov_exponent: Some(seed.l_exponent),
        y_exponents: seed.y_exponents.clone(),
        boundary_g: seed.boundary.g.iter().map(|e| e.limit).collect(),
        q: seed.q.clone(),
        u0_formula: Some(u0_formula(profile, spec, &seed)),
        u0_extrapolated: Some(seed.boundary.u.limit),
    };
    Ok(VerifyReport { checks, diagnostics })
}

/// Checks for a run on the Ricci-flat locus `{L = 0, H = 1}`.
pub fn run_ricci_flat_suite(
    traj: &Trajectory,
    profile: &MetricProfile,
    curv: &CurvatureReport,
    spec: &ProblemSpec,
) -> Result<VerifyReport, VerifyError> {
    let inputs = SuiteInputs { traj, profile, curv, spec };
    inputs.validate(Mode::RicciFlat)?;
    let drift = traj
        .samples
        .iter()
        .map(|p| lyapunov(p).abs().max((hamiltonian(p, spec) - 1.0).abs()))
        .fold(0.0, f64::max);
    let ricci = curv
        .samples
        .iter()
        .flat_map(|c| std::iter::once(c.ric_tt).chain(c.ric_factor.iter().copied()))
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let u_dot = profile.rows.iter().fold(0.0f64, |m, r| m.max(r.u_dot.abs()));
    let checks = vec![
        Check::custom("ricci_flat_locus", "|L| and |H - 1| stay at zero", vec![drift], drift, 1e-8),
        Check::custom("ricci_flat_curvature", "all Ricci components vanish", vec![ricci], ricci, 1e-6),
        Check::custom("trivial_potential", "u_dot vanishes identically", vec![u_dot], u_dot, 1e-8),
    ];
    Ok(VerifyReport {
        checks,
        diagnostics: Diagnostics {
            kappa: traj.meta.kappa_estimate,
            ..Default::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, seed};
    use crate::geometry::{curvature_report, default_kh_bounds};
    use crate::model::{validate_spec, FactorSpec};
    use crate::reconstruct::build_profile;

    fn pipeline(spec: &ProblemSpec) -> (Trajectory, MetricProfile, CurvatureReport) {
        let traj = integrate(spec, &seed(spec).unwrap()).unwrap();
        let prof = build_profile(&traj, spec).unwrap();
        let curv = curvature_report(&prof, spec, &default_kh_bounds(spec)).unwrap();
        (traj, prof, curv)
    }

    fn spec23() -> ProblemSpec {
        validate_spec(ProblemSpec::new(vec![
            FactorSpec::new(2, 1.0),
            FactorSpec::new(3, 2.0),
        ]))
        .unwrap()
    }

    #[test]
    fn richardson_reproduces_polynomials() {
        let data: Vec<(f64, f64)> = [0.1, 0.05, 0.025].iter().map(|&t| (t, 3.0 + t * t)).collect();
        let e = richardson_extrapolate(&data, 2, Parity::Even).unwrap();
        assert!((e.limit - 3.0).abs() <= 1e-10);
        let g = richardson_extrapolate(&data, 2, Parity::General).unwrap();
        assert!((g.limit - 3.0).abs() <= 1e-10);
    }

    #[test]
    fn richardson_sinc() {
        let data: Vec<(f64, f64)> = [0.4, 0.2, 0.1, 0.05].iter().map(|&t: &f64| (t, t.sin() / t)).collect();
        let e = richardson_extrapolate(&data, 3, Parity::Even).unwrap();
        assert!((e.limit - 1.0).abs() <= 1e-6);
        assert!(e.error <= 1e-4);
    }

    #[test]
    fn richardson_odd_series_with_offset() {
        let data: Vec<(f64, f64)> = [0.2, 0.1, 0.05, 0.025]
            .iter()
            .map(|&t: &f64| (t, 0.5 + t.sin()))
            .collect();
        let e = richardson_extrapolate(&data, 3, Parity::Odd).unwrap();
        assert!((e.limit - 0.5).abs() <= 1e-8);
    }

    #[test]
    fn richardson_needs_three_samples() {
        let err = richardson_extrapolate(&[(0.1, 1.0), (0.05, 1.0)], 2, Parity::Even).unwrap_err();
        assert_eq!(err.code(), "TooFewSamples");
    }

    #[test]
    fn bryant_passes_every_check() {
        let spec = validate_spec(ProblemSpec::with_round_factors(&[2])).unwrap();
        let (t, p, c) = pipeline(&spec);
        let rep = run_suite(&t, &p, &c, &spec).unwrap();
        assert!(rep.passed(), "{:#?}", rep.failed());
        assert_eq!(rep.checks.len(), 11);
        assert!((rep.diagnostics.rho_estimate.unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_factor_seed_ratio_target() {
        let spec = spec23();
        let (t, p, c) = pipeline(&spec);
        let rep = run_suite(&t, &p, &c, &spec).unwrap();
        assert!(rep.passed(), "{:#?}", rep.failed());
        let d = rep.check("seed_ratio").unwrap();
        assert!((d.values[0] - 0.3849002).abs() <= 1e-3);
    }

    #[test]
    fn single_check_is_rerunnable() {
        let spec = spec23();
        let (t, p, c) = pipeline(&spec);
        let inputs = SuiteInputs { traj: &t, profile: &p, curv: &c, spec: &spec };
        let full = run_suite(&t, &p, &c, &spec).unwrap();
        for id in CheckId::ALL {
            let one = run_check(id, &inputs).unwrap();
            assert_eq!(&one, full.check(id.name()).unwrap());
        }
    }

    #[test]
    fn flipped_y_is_caught() {
        let spec = spec23();
        let (mut t, p, c) = pipeline(&spec);
        // Knot just below the second ladder rung, so the dense output there
        // sees the corrupted sample.
        let rung = seed_end_analysis(&t, &spec).unwrap().ladder_s[1];
        let j = t.samples.iter().rposition(|q| q.s < rung).unwrap();
        t.samples[j].y[1] = -t.samples[j].y[1];
        let rep = run_suite(&t, &p, &c, &spec).unwrap();
        let failed: Vec<&str> = rep.failed().iter().map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"lyapunov_monotone"), "{failed:?}");
        assert!(failed.contains(&"seed_ratio"), "{failed:?}");
        assert!(rep.check("lyapunov_monotone").unwrap().detail.contains(&format!("sample {j},")));
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        let spec = spec23();
        let (t, mut p, c) = pipeline(&spec);
        p.rows.pop();
        assert_eq!(run_suite(&t, &p, &c, &spec).unwrap_err().code(), "IncompleteInputs");
    }

    #[test]
    fn ricci_flat_suite_passes() {
        let spec = validate_spec(ProblemSpec::with_round_factors(&[2, 3]).mode(Mode::RicciFlat)).unwrap();
        let (t, p, c) = pipeline(&spec);
        let rep = run_ricci_flat_suite(&t, &p, &c, &spec).unwrap();
        assert!(rep.passed(), "{:#?}", rep.checks);
        assert_eq!(run_suite(&t, &p, &c, &spec).unwrap_err().code(), "IncompleteInputs");
    }
}
