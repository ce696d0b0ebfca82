//! Problem description: the Einstein factors, the gauge constant, seeding
//! coefficients and integration controls, plus the closed-form constants
//! attached to the collapsing sphere factor.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::phase::PhasePoint;

/// Default magnitude of the coefficient along the fastest unstable direction.
pub const DEFAULT_EPS0: f64 = -1.0e-4;

/// One Einstein factor `(M_i, h_i)` with `Ric(h_i) = λ_i h_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorSpec {
    pub dim: usize,
    pub einstein_const: f64,
}

impl FactorSpec {
    pub fn new(dim: usize, einstein_const: f64) -> Self {
        Self {
            dim,
            einstein_const,
        }
    }

    /// Unit round sphere of dimension `dim` (`λ = dim - 1`).
    pub fn round_sphere(dim: usize) -> Self {
        Self::new(dim, dim as f64 - 1.0)
    }

    pub fn sqrt_dim(&self) -> f64 {
        (self.dim as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Non-trivial steady soliton trajectories entering `L < 0`.
    #[default]
    Soliton,
    /// Ricci-flat trajectories held on `{L = 0, H = 1}`.
    RicciFlat,
}

/// Integrator and termination controls. Missing fields take their defaults
/// when deserialized; unknown fields are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepControls {
    pub initial_step: f64,
    pub atol: f64,
    pub rtol: f64,
    pub max_steps: usize,
    /// Soliton runs stop once `|(X, Y)|` drops below this. Much below `1e-6`
    /// the sign of `L + 1 - H` (relative size `|(X, Y)|²`) is no longer
    /// resolvable in double precision.
    pub origin_tol: f64,
    /// Allowed drift of `L` and `H - 1` in Ricci-flat runs.
    pub drift_tol: f64,
}

impl Default for StepControls {
    fn default() -> Self {
        Self {
            initial_step: 1.0e-2,
            atol: 1.0e-20,
            rtol: 1.0e-10,
            max_steps: 200_000,
            origin_tol: 1.0e-6,
            drift_tol: 1.0e-8,
        }
    }
}

/// Full problem statement.
///
/// `seed_coeffs[0]` multiplies the eigenvector of the `2β²` eigenvalue,
/// `seed_coeffs[k]` (k ≥ 1) the unit `Y_{k+1}` direction. Under a shift of
/// `s` by `σ` these scale as `e^{2β²σ}` and `e^{β²σ}`, so the geometric
/// family parameters are the combinations `seed_coeffs[k]² / |seed_coeffs[0]|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub factors: Vec<FactorSpec>,
    pub gauge_c: f64,
    pub seed_coeffs: Vec<f64>,
    pub s_start: f64,
    pub s_max: f64,
    pub controls: StepControls,
    pub mode: Mode,
}

impl ProblemSpec {
    /// Soliton-mode problem with default gauge, seeding and controls.
    pub fn new(factors: Vec<FactorSpec>) -> Self {
        let seed_coeffs = default_seed_coeffs(factors.len(), DEFAULT_EPS0);
        Self {
            factors,
            gauge_c: -1.0,
            seed_coeffs,
            s_start: 0.0,
            s_max: default_s_max(Mode::Soliton),
            controls: StepControls::default(),
            mode: Mode::Soliton,
        }
    }

    /// Problem whose first factor is the round sphere `S^{dims[0]}` and the
    /// remaining factors are round spheres as well.
    pub fn with_round_factors(dims: &[usize]) -> Self {
        Self::new(dims.iter().map(|&d| FactorSpec::round_sphere(d)).collect())
    }

    pub fn mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self.s_max = default_s_max(mode);
        self
    }

    pub fn seed(mut self, coeffs: Vec<f64>) -> Self {
        self.seed_coeffs = coeffs;
        self
    }

    pub fn gauge(mut self, c: f64) -> Self {
        self.gauge_c = c;
        self
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    pub fn sqrt_dims(&self) -> Vec<f64> {
        self.factors.iter().map(FactorSpec::sqrt_dim).collect()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.factors.iter().map(|f| f.dim).collect()
    }
}

/// Seed coefficients used when none are configured: `eps0` on the `2β²`
/// direction and `sqrt(|eps0| / (r - 1))` on every `Y_k`, which keeps the
/// seed inside `L < 0` for any number of factors.
pub fn default_seed_coeffs(rank: usize, eps0: f64) -> Vec<f64> {
    let mut coeffs = vec![eps0];
    if rank > 1 {
        let eps = (eps0.abs() / (rank - 1) as f64).sqrt();
        coeffs.extend(std::iter::repeat_n(eps, rank - 1));
    }
    coeffs
}

/// Soliton runs are stopped by the origin test long before this; Ricci-flat
/// runs approach a cone point and are cut off here.
pub fn default_s_max(mode: Mode) -> f64 {
    match mode {
        Mode::Soliton => 1.0e18,
        Mode::RicciFlat => 200.0,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("no factors given")]
    EmptyFactors,
    #[error("first factor must have dimension at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("factor {index}: dimension must be positive and Einstein constant positive and finite")]
    InvalidFactor { index: usize },
    #[error("first factor must satisfy lambda = dim - 1 = {expected}, got {got}")]
    BadNormalization { expected: f64, got: f64 },
    #[error("gauge constant C must be negative, got {0}")]
    NonNegativeGauge(f64),
    #[error("expected {expected} seed coefficients, got {got}")]
    SeedLengthMismatch { expected: usize, got: usize },
    #[error("seed coefficient {index} = {value} has the wrong sign")]
    BadSeedSign { index: usize, value: f64 },
    #[error("invalid integration controls: {0}")]
    InvalidControls(String),
}

impl ModelError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyFactors => "EmptyFactors",
            Self::DimensionTooSmall(_) => "DimensionTooSmall",
            Self::InvalidFactor { .. } => "InvalidFactor",
            Self::BadNormalization { .. } => "BadNormalization",
            Self::NonNegativeGauge(_) => "NonNegativeGauge",
            Self::SeedLengthMismatch { .. } => "SeedLengthMismatch",
            Self::BadSeedSign { .. } => "BadSeedSign",
            Self::InvalidControls(_) => "InvalidControls",
        }
    }
}

/// Returns the problem unchanged iff every standing hypothesis holds.
pub fn validate_spec(raw: ProblemSpec) -> Result<ProblemSpec, ModelError> {
    let first = *raw.factors.first().ok_or(ModelError::EmptyFactors)?;
    if first.dim < 2 {
        return Err(ModelError::DimensionTooSmall(first.dim));
    }
    for (index, f) in raw.factors.iter().enumerate() {
        if f.dim == 0 || !(f.einstein_const.is_finite() && f.einstein_const > 0.0) {
            return Err(ModelError::InvalidFactor { index });
        }
    }
    let expected = first.dim as f64 - 1.0;
    if (first.einstein_const - expected).abs() > 1e-12 * expected {
        return Err(ModelError::BadNormalization {
            expected,
            got: first.einstein_const,
        });
    }
    if !(raw.gauge_c.is_finite() && raw.gauge_c < 0.0) {
        return Err(ModelError::NonNegativeGauge(raw.gauge_c));
    }
    if raw.seed_coeffs.len() != raw.rank() {
        return Err(ModelError::SeedLengthMismatch {
            expected: raw.rank(),
            got: raw.seed_coeffs.len(),
        });
    }
    for (index, &value) in raw.seed_coeffs.iter().enumerate() {
        let ok = match (raw.mode, index) {
            (_, _) if !value.is_finite() => false,
            (Mode::Soliton, 0) => value < 0.0,
            (Mode::Soliton, _) => value > 0.0,
            (Mode::RicciFlat, 0) => true,
            (Mode::RicciFlat, _) => value > 0.0,
        };
        if !ok {
            return Err(ModelError::BadSeedSign { index, value });
        }
    }
    if raw.mode == Mode::RicciFlat && raw.rank() < 2 {
        return Err(ModelError::InvalidControls(
            "Ricci-flat mode needs at least two factors".into(),
        ));
    }
    let c = &raw.controls;
    let positive = |v: f64| v.is_finite() && v > 0.0;
    if !(positive(c.initial_step)
        && positive(c.atol)
        && positive(c.rtol)
        && positive(c.origin_tol)
        && positive(c.drift_tol))
    {
        return Err(ModelError::InvalidControls(
            "step size and tolerances must be positive".into(),
        ));
    }
    if c.max_steps == 0 {
        return Err(ModelError::InvalidControls("max_steps must be positive".into()));
    }
    if !(raw.s_start.is_finite() && raw.s_max > raw.s_start) {
        return Err(ModelError::InvalidControls(
            "s_max must exceed s_start".into(),
        ));
    }
    Ok(raw)
}

/// Closed-form constants of the collapsing sphere factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Constants {
    /// `1/sqrt(d_1)`
    pub beta: f64,
    /// `+sqrt(1 - β²)`
    pub beta_hat: f64,
    /// `Σ d_i`
    pub total_dim_n: usize,
}

impl Constants {
    pub fn beta_sq(&self) -> f64 {
        self.beta * self.beta
    }
}

pub fn constants(spec: &ProblemSpec) -> Constants {
    let d1 = spec.factors[0].dim as f64;
    Constants {
        beta: 1.0 / d1.sqrt(),
        beta_hat: (1.0 - 1.0 / d1).sqrt(),
        total_dim_n: spec.factors.iter().map(|f| f.dim).sum(),
    }
}

/// `X_1 = β, Y_1 = β̂`, all other coordinates zero.
pub fn critical_point(spec: &ProblemSpec) -> PhasePoint {
    let k = constants(spec);
    let r = spec.rank();
    let mut p = PhasePoint::origin(r, spec.s_start);
    p.x[0] = k.beta;
    p.y[0] = k.beta_hat;
    p
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use crate::phase;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn single(dim: usize, lambda: f64) -> ProblemSpec {
        ProblemSpec::new(vec![FactorSpec::new(dim, lambda)])
    }

    #[test]
    fn accepts_bryant_problem() {
        let spec = single(2, 1.0).seed(vec![-1e-6]);
        assert_eq!(validate_spec(spec.clone()).unwrap(), spec);
    }

    #[test]
    fn rejects_one_dimensional_sphere() {
        let err = validate_spec(single(1, 0.5)).unwrap_err();
        assert_eq!(err, ModelError::DimensionTooSmall(1));
    }

    #[test]
    fn rejects_wrong_normalization() {
        let err = validate_spec(single(3, 1.0)).unwrap_err();
        assert_eq!(err.code(), "BadNormalization");
        match err {
            ModelError::BadNormalization { expected, .. } => assert_eq!(expected, 2.0),
            _ => unreachable!(),
        }
    }

    #[test]
    fn rejects_nonnegative_gauge() {
        let err = validate_spec(single(2, 1.0).gauge(0.0)).unwrap_err();
        assert_eq!(err.code(), "NonNegativeGauge");
    }

    #[test]
    fn rejects_seed_signs() {
        let err = validate_spec(single(2, 1.0).seed(vec![1e-4])).unwrap_err();
        assert_eq!(err, ModelError::BadSeedSign { index: 0, value: 1e-4 });
        let spec = ProblemSpec::with_round_factors(&[2, 3]).seed(vec![-1e-4, -1e-2]);
        assert_eq!(validate_spec(spec).unwrap_err().code(), "BadSeedSign");
        let spec = ProblemSpec::with_round_factors(&[2, 3]).seed(vec![-1e-4]);
        assert_eq!(validate_spec(spec).unwrap_err().code(), "SeedLengthMismatch");
    }

    #[test]
    fn default_seed_stays_inside_unit_ball() {
        for r in 1..6 {
            let c = default_seed_coeffs(r, DEFAULT_EPS0);
            assert_eq!(c.len(), r);
            let budget: f64 = c[1..].iter().map(|e| e * e).sum();
            assert!(budget <= DEFAULT_EPS0.abs() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn constants_examples() {
        let k = constants(&single(2, 1.0));
        assert_abs_diff_eq!(k.beta, 0.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(k.beta_hat, 0.7071068, epsilon = 1e-7);
        let k = constants(&single(4, 3.0));
        assert_abs_diff_eq!(k.beta, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(k.beta_hat, 0.8660254, epsilon = 1e-7);
        let k = constants(&ProblemSpec::with_round_factors(&[2, 3]));
        assert_eq!(k.total_dim_n, 5);
    }

    #[test]
    fn critical_point_example() {
        let p = critical_point(&single(2, 1.0));
        assert_abs_diff_eq!(p.x[0], 0.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(p.y[0], 0.7071068, epsilon = 1e-7);
    }

    proptest! {
        #[test]
        fn critical_point_is_fixed_and_on_unit_sphere(
            d1 in 2usize..40,
            rest in proptest::collection::vec((1usize..12, 0.1f64..20.0), 0..4),
        ) {
            let mut factors = vec![FactorSpec::round_sphere(d1)];
            factors.extend(rest.iter().map(|&(d, l)| FactorSpec::new(d, l)));
            let spec = ProblemSpec::new(factors);
            let p = critical_point(&spec);
            let k = constants(&spec);
            prop_assert!((k.beta_sq() + k.beta_hat * k.beta_hat - 1.0).abs() < 1e-15);
            prop_assert!(k.beta > 0.0 && k.beta < 1.0);
            prop_assert!(phase::lyapunov(&p).abs() < 1e-15);
            let f = phase::vector_field(&p, &spec).unwrap();
            for v in f.dx.iter().chain(f.dy.iter()) {
                prop_assert!(v.abs() < 1e-15);
            }
        }
    }
}
