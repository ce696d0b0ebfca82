//! Curvature of `dt² + Σ g_i(t)² h_i` and the steady soliton equation
//! `Ric + Hess u = 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ProblemSpec;
use crate::reconstruct::{MetricProfile, ProfileRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("g_{} vanishes at t = {t}", index + 1)]
    ZeroG { index: usize, t: f64 },
    #[error("expected {expected} curvature bounds, got {got}")]
    BoundsLength { expected: usize, got: usize },
    #[error("profile ends at t = {t_max:e}; need two decades of asymptotic tail")]
    InsufficientTail { t_max: f64 },
}

impl GeometryError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::ZeroG { .. } => "ZeroG",
            Self::BoundsLength { .. } => "BoundsLength",
            Self::InsufficientTail { .. } => "InsufficientTail",
        }
    }
}

/// Sectional-curvature bounds `[min, max]` of the unit factor metric `h_i`,
/// or `None` for one-dimensional factors.
pub type KhBounds = Option<(f64, f64)>;

/// Round-sphere values `λ_i / (d_i - 1)`; exact for round factors and in
/// particular `1` for the collapsing sphere.
pub fn default_kh_bounds(spec: &ProblemSpec) -> Vec<KhBounds> {
    spec.factors
        .iter()
        .map(|f| {
            (f.dim >= 2).then(|| {
                let k = f.einstein_const / (f.dim as f64 - 1.0);
                (k, k)
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RicciSample {
    pub t: f64,
    pub ric_tt: f64,
    pub ric_factor: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionalSample {
    pub t: f64,
    /// `K(U ∧ ∂t) = -g̈_i/g_i`
    pub mixed_t: Vec<f64>,
    /// `K(U ∧ V) = -ġ_iġ_j/(g_ig_j)`, `i ≠ j`; the diagonal is zero.
    pub cross: Vec<Vec<f64>>,
    /// `(K_h - ġ_i²)/g_i²` over the supplied `K_h` interval.
    pub within: Vec<Option<(f64, f64)>>,
}

impl SectionalSample {
    /// All reported values, interval endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let r = self.mixed_t.len();
        let mut v = self.mixed_t.clone();
        for i in 0..r {
            for j in i + 1..r {
                v.push(self.cross[i][j]);
            }
        }
        for (lo, hi) in self.within.iter().flatten() {
            v.push(*lo);
            v.push(*hi);
        }
        v
    }

    pub fn max_abs(&self) -> f64 {
        self.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureSample {
    pub t: f64,
    pub ric_tt: f64,
    pub ric_factor: Vec<f64>,
    pub sectional: SectionalSample,
    /// `Ric_tt + Σ d_i Ric_i`
    pub scalar_r: f64,
    /// `-(ü + trL·u̇)`, the trace of the soliton equation.
    pub scalar_r_trace: f64,
    pub soliton_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub samples: Vec<CurvatureSample>,
    pub soliton_residual_max: f64,
    /// Smallest Ricci eigenvalue over all samples (the Ricci tensor is
    /// diagonal in the frame `∂t`, factor directions).
    pub min_ricci: f64,
    /// Largest relative disagreement of the two scalar-curvature routes.
    pub scalar_mismatch_max: f64,
}

fn check_g(row: &ProfileRow) -> Result<(), GeometryError> {
    match row.g.iter().position(|&g| g == 0.0 || !g.is_finite()) {
        Some(index) => Err(GeometryError::ZeroG { index, t: row.t }),
        None => Ok(()),
    }
}

fn ricci_row(row: &ProfileRow, spec: &ProblemSpec) -> Result<RicciSample, GeometryError> {
    check_g(row)?;
    let dims = spec.dims();
    let tr = row.trace_l(&dims);
    let mut ric_tt = 0.0;
    let mut ric_factor = Vec::with_capacity(dims.len());
    for (i, f) in spec.factors.iter().enumerate() {
        let (g, gd, gdd) = (row.g[i], row.g_dot[i], row.g_ddot[i]);
        let li = gd / g;
        ric_tt -= f.dim as f64 * gdd / g;
        ric_factor.push(f.einstein_const / (g * g) - gdd / g - li * (tr - li));
    }
    Ok(RicciSample {
        t: row.t,
        ric_tt,
        ric_factor,
    })
}

/// `Ric(∂t, ∂t)` and `Ric(U, U)` for unit `U` tangent to each factor.
pub fn ricci_components(
    profile: &MetricProfile,
    spec: &ProblemSpec,
) -> Result<Vec<RicciSample>, GeometryError> {
    profile.rows.iter().map(|r| ricci_row(r, spec)).collect()
}

fn residual_row(row: &ProfileRow, ric: &RicciSample) -> f64 {
    let mut m = (ric.ric_tt + row.u_ddot).abs();
    for i in 0..ric.ric_factor.len() {
        let hess = row.u_dot * row.g_dot[i] / row.g[i];
        m = m.max((ric.ric_factor[i] + hess).abs());
    }
    m
}

/// `max |Ric + Hess u|` over samples and frame components.
pub fn soliton_residual(profile: &MetricProfile, spec: &ProblemSpec) -> Result<f64, GeometryError> {
    let mut m: f64 = 0.0;
    for row in &profile.rows {
        let ric = ricci_row(row, spec)?;
        m = m.max(residual_row(row, &ric));
    }
    Ok(m)
}

fn sectional_row(row: &ProfileRow, bounds: &[KhBounds]) -> Result<SectionalSample, GeometryError> {
    check_g(row)?;
    let r = row.g.len();
    let l: Vec<f64> = (0..r).map(|i| row.g_dot[i] / row.g[i]).collect();
    let mixed_t = (0..r).map(|i| -row.g_ddot[i] / row.g[i]).collect();
    let cross = (0..r)
        .map(|i| (0..r).map(|j| if i == j { 0.0 } else { -l[i] * l[j] }).collect())
        .collect();
    let within = bounds
        .iter()
        .enumerate()
        .map(|(i, b)| {
            b.map(|(lo, hi)| {
                let g2 = row.g[i] * row.g[i];
                let gd2 = row.g_dot[i] * row.g_dot[i];
                ((lo - gd2) / g2, (hi - gd2) / g2)
            })
        })
        .collect();
    Ok(SectionalSample {
        t: row.t,
        mixed_t,
        cross,
        within,
    })
}

pub fn sectional_curvatures(
    profile: &MetricProfile,
    spec: &ProblemSpec,
    bounds: &[KhBounds],
) -> Result<Vec<SectionalSample>, GeometryError> {
    if bounds.len() != spec.rank() {
        return Err(GeometryError::BoundsLength {
            expected: spec.rank(),
            got: bounds.len(),
        });
    }
    profile.rows.iter().map(|r| sectional_row(r, bounds)).collect()
}

pub fn curvature_report(
    profile: &MetricProfile,
    spec: &ProblemSpec,
    bounds: &[KhBounds],
) -> Result<CurvatureReport, GeometryError> {
    let sectional = sectional_curvatures(profile, spec, bounds)?;
    let dims = spec.dims();
    let mut samples = Vec::with_capacity(profile.rows.len());
    let mut residual_max: f64 = 0.0;
    let mut min_ricci = f64::INFINITY;
    let mut mismatch: f64 = 0.0;
    for (row, sec) in profile.rows.iter().zip(sectional) {
        let ric = ricci_row(row, spec)?;
        let residual = residual_row(row, &ric);
        let scalar_r = ric.ric_tt
            + ric
                .ric_factor
                .iter()
                .zip(&dims)
                .map(|(r, &d)| d as f64 * r)
                .sum::<f64>();
        let scalar_r_trace = -(row.u_ddot + row.trace_l(&dims) * row.u_dot);
        residual_max = residual_max.max(residual);
        min_ricci = ric
            .ric_factor
            .iter()
            .fold(min_ricci.min(ric.ric_tt), |m, &v| m.min(v));
        let scale = scalar_r.abs().max(scalar_r_trace.abs());
        if scale > 0.0 {
            mismatch = mismatch.max((scalar_r - scalar_r_trace).abs() / scale);
        }
        samples.push(CurvatureSample {
            t: row.t,
            ric_tt: ric.ric_tt,
            ric_factor: ric.ric_factor,
            sectional: sec,
            scalar_r,
            scalar_r_trace,
            soliton_residual: residual,
        });
    }
    Ok(CurvatureReport {
        samples,
        soliton_residual_max: residual_max,
        min_ricci,
        scalar_mismatch_max: mismatch,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailLimit {
    /// Value at the last sample.
    pub value: f64,
    /// Change against the value one decade of `t` earlier.
    pub error: f64,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    pub t_max: f64,
    /// `g_i ġ_i`, target `λ_i / √(-C)`.
    pub g_gdot: Vec<TailLimit>,
    /// `g_i² / t`, target `2 λ_i / √(-C)`.
    pub g_sq_over_t: Vec<TailLimit>,
    /// Fitted slope of `log g_i²` against `log t` over the final two decades.
    pub g_sq_exponent: Vec<f64>,
    /// Fitted slope of `log R` against `log t`.
    pub scalar_slope: f64,
    /// Fitted slope of `log max|K|` against `log t`.
    pub sectional_slope: f64,
    /// `R t` at the last sample.
    pub scalar_t_limit: f64,
    /// `(t, R t²)` on a geometric ladder across the final two decades.
    pub scalar_t2_ladder: Vec<(f64, f64)>,
    pub scalar_t2_increasing: bool,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Linear interpolation of `log v` against `log t`; `v > 0`.
fn loglog_interp(ts: &[f64], vs: &[f64], t: f64) -> f64 {
    let i = crate::interp::bracket(ts, t).unwrap_or(ts.len() - 2);
    let (x0, x1) = (ts[i].ln(), ts[i + 1].ln());
    let (y0, y1) = (vs[i].ln(), vs[i + 1].ln());
    (y0 + (y1 - y0) * (t.ln() - x0) / (x1 - x0)).exp()
}

/// Minimum `t_max` for which the final two decades are taken to be in the
/// asymptotic regime.
pub const MIN_TAIL_T: f64 = 1e6;

pub fn asymptotics(
    profile: &MetricProfile,
    spec: &ProblemSpec,
    bounds: &[KhBounds],
) -> Result<AsymptoticsReport, GeometryError> {
    let rows = &profile.rows;
    let t_max = rows.last().map_or(0.0, |r| r.t);
    let window: Vec<usize> = (0..rows.len()).filter(|&i| rows[i].t >= t_max / 100.0).collect();
    if t_max < MIN_TAIL_T || window.len() < 10 {
        return Err(GeometryError::InsufficientTail { t_max });
    }
    let report = curvature_report(profile, spec, bounds)?;
    let sqrt_mc = (-profile.gauge_c).sqrt();
    let ts: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let last = rows.last().expect("non-empty");
    let decade = rows
        .iter()
        .rposition(|r| r.t <= t_max / 10.0)
        .unwrap_or(0);
    let earlier = &rows[decade];

    let mut g_gdot = Vec::new();
    let mut g_sq_over_t = Vec::new();
    let mut g_sq_exponent = Vec::new();
    for (i, f) in spec.factors.iter().enumerate() {
        let lam = f.einstein_const;
        let v = last.g[i] * last.g_dot[i];
        let v0 = earlier.g[i] * earlier.g_dot[i];
        g_gdot.push(TailLimit {
            value: v,
            error: (v - v0).abs(),
            target: lam / sqrt_mc,
        });
        let w = last.g[i].powi(2) / last.t;
        let w0 = earlier.g[i].powi(2) / earlier.t;
        g_sq_over_t.push(TailLimit {
            value: w,
            error: (w - w0).abs(),
            target: 2.0 * lam / sqrt_mc,
        });
        let lx: Vec<f64> = window.iter().map(|&k| rows[k].t.ln()).collect();
        let ly: Vec<f64> = window.iter().map(|&k| (rows[k].g[i].powi(2)).ln()).collect();
        g_sq_exponent.push(slope(&lx, &ly));
    }

    let lx: Vec<f64> = window.iter().map(|&k| ts[k].ln()).collect();
    let lr: Vec<f64> = window
        .iter()
        .map(|&k| report.samples[k].scalar_r.abs().ln())
        .collect();
    let lk: Vec<f64> = window
        .iter()
        .map(|&k| report.samples[k].sectional.max_abs().ln())
        .collect();
    let rt2: Vec<f64> = report
        .samples
        .iter()
        .map(|c| c.scalar_r.abs() * c.t * c.t)
        .collect();
    let ladder: Vec<(f64, f64)> = (0..=8)
        .map(|k| {
            let t = t_max * 10f64.powf(-2.0 + 0.25 * k as f64);
            (t, loglog_interp(&ts, &rt2, t))
        })
        .collect();
    let increasing = ladder.windows(2).all(|w| w[1].1 > w[0].1);
    Ok(AsymptoticsReport {
        t_max,
        g_gdot,
        g_sq_over_t,
        g_sq_exponent,
        scalar_slope: slope(&lx, &lr),
        sectional_slope: slope(&lx, &lk),
        scalar_t_limit: report.samples.last().expect("non-empty").scalar_r * t_max,
        scalar_t2_ladder: ladder,
        scalar_t2_increasing: increasing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{integrate, seed};
    use crate::model::{validate_spec, FactorSpec, Mode};
    use crate::reconstruct::build_profile;

    fn profile(spec: &ProblemSpec) -> MetricProfile {
        let traj = integrate(spec, &seed(spec).unwrap()).unwrap();
        build_profile(&traj, spec).unwrap()
    }

    fn spec23() -> ProblemSpec {
        validate_spec(ProblemSpec::new(vec![
            FactorSpec::new(2, 1.0),
            FactorSpec::new(3, 2.0),
        ]))
        .unwrap()
    }

    #[test]
    fn soliton_equation_holds_componentwise() {
        let spec = spec23();
        let prof = profile(&spec);
        let ric = ricci_components(&prof, &spec).unwrap();
        for (row, r) in prof.rows.iter().zip(&ric) {
            assert!((r.ric_tt + row.u_ddot).abs() <= 1e-6);
            for i in 0..2 {
                let hess = row.u_dot * row.g_dot[i] / row.g[i];
                assert!((r.ric_factor[i] + hess).abs() <= 1e-6);
            }
        }
        assert!(soliton_residual(&prof, &spec).unwrap() <= 1e-6);
    }

    #[test]
    fn corrupted_second_derivative_is_detected() {
        let spec = spec23();
        let mut prof = profile(&spec);
        let k = prof.rows.len() / 4;
        prof.rows[k].g_ddot[0] += 1e-3;
        assert!(soliton_residual(&prof, &spec).unwrap() >= 1e-4);
    }

    #[test]
    fn scalar_curvature_routes_agree_and_ricci_is_nonnegative() {
        let spec = spec23();
        let prof = profile(&spec);
        let rep = curvature_report(&prof, &spec, &default_kh_bounds(&spec)).unwrap();
        assert!(rep.scalar_mismatch_max <= 1e-6, "{}", rep.scalar_mismatch_max);
        assert!(rep.min_ricci >= -1e-8);
    }

    #[test]
    fn cross_curvature_is_negative_for_two_factors() {
        let spec = spec23();
        let prof = profile(&spec);
        let sec = sectional_curvatures(&prof, &spec, &default_kh_bounds(&spec)).unwrap();
        assert!(sec.last().unwrap().cross[0][1] < 0.0);
    }

    #[test]
    fn bryant_sectional_curvatures_are_positive() {
        let spec = validate_spec(ProblemSpec::with_round_factors(&[2])).unwrap();
        let prof = profile(&spec);
        let sec = sectional_curvatures(&prof, &spec, &default_kh_bounds(&spec)).unwrap();
        for s in &sec {
            assert!(s.values().iter().all(|&v| v > 0.0), "t = {}", s.t);
        }
    }

    #[test]
    fn bounds_length_is_checked() {
        let spec = spec23();
        let prof = profile(&spec);
        let err = sectional_curvatures(&prof, &spec, &[None]).unwrap_err();
        assert_eq!(err.code(), "BoundsLength");
    }

    #[test]
    fn paraboloid_asymptotics() {
        let spec = spec23();
        let prof = profile(&spec);
        let a = asymptotics(&prof, &spec, &default_kh_bounds(&spec)).unwrap();
        for lim in &a.g_gdot {
            assert!((lim.value - lim.target).abs() <= 1e-3, "{lim:?}");
        }
        assert!((a.g_gdot[1].target - 2.0).abs() < 1e-15);
        for lim in &a.g_sq_over_t {
            assert!((lim.value / lim.target - 1.0).abs() <= 1e-2, "{lim:?}");
        }
        for e in &a.g_sq_exponent {
            assert!((e - 1.0).abs() < 1e-2);
        }
        assert!((a.scalar_slope + 1.0).abs() < 0.1);
        assert!((a.sectional_slope + 1.0).abs() < 0.1);
        assert!(a.scalar_t2_increasing);
        assert!(a.scalar_t_limit > 0.0);
    }

    #[test]
    fn short_profile_has_insufficient_tail() {
        let mut spec = spec23();
        spec.controls.origin_tol = 1e-2;
        let prof = profile(&spec);
        let err = asymptotics(&prof, &spec, &default_kh_bounds(&spec)).unwrap_err();
        assert_eq!(err.code(), "InsufficientTail");
    }

    #[test]
    fn ricci_flat_profile_is_ricci_flat() {
        let spec = validate_spec(ProblemSpec::with_round_factors(&[2, 5]).mode(Mode::RicciFlat)).unwrap();
        let prof = profile(&spec);
        for r in ricci_components(&prof, &spec).unwrap() {
            assert!(r.ric_tt.abs() <= 1e-6, "{r:?}");
            assert!(r.ric_factor.iter().all(|v| v.abs() <= 1e-6), "{r:?}");
        }
    }
}
