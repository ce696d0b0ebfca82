//! The first-order phase system in `(X, Y)` with independent variable `s`.
//!
//! ```text
//! X_i' = X_i (ΣX² - 1) + Y_i² / √d_i
//! Y_i' = Y_i (ΣX² - X_i / √d_i)
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{constants, critical_point, ProblemSpec};
use crate::ode::OdeSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub s: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PhasePoint {
    pub fn origin(rank: usize, s: f64) -> Self {
        Self {
            s,
            x: vec![0.0; rank],
            y: vec![0.0; rank],
        }
    }

    /// Packs into the integrator layout `[X_1..X_r, Y_1..Y_r]`.
    pub fn state(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend_from_slice(&self.y);
        v
    }

    pub fn from_state(s: f64, state: &[f64]) -> Self {
        let r = state.len() / 2;
        Self {
            s,
            x: state[..r].to_vec(),
            y: state[r..].to_vec(),
        }
    }

    pub fn rank(&self) -> usize {
        self.x.len()
    }

    pub fn sum_x_sq(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }

    /// `ΣX² + ΣY²`, which unlike `L` keeps full relative precision near the
    /// origin.
    pub fn norm_sq(&self) -> f64 {
        self.sum_x_sq() + self.y.iter().map(|v| v * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDerivative {
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseError {
    #[error("state has lengths ({x}, {y}) but the problem has {rank} factors")]
    LengthMismatch { x: usize, y: usize, rank: usize },
}

impl PhaseError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::LengthMismatch { .. } => "LengthMismatch",
        }
    }
}

fn check_len(p: &PhasePoint, spec: &ProblemSpec) -> Result<(), PhaseError> {
    let rank = spec.rank();
    if p.x.len() != rank || p.y.len() != rank {
        return Err(PhaseError::LengthMismatch {
            x: p.x.len(),
            y: p.y.len(),
            rank,
        });
    }
    Ok(())
}

pub(crate) fn eval_into(x: &[f64], y: &[f64], sqrt_d: &[f64], dx: &mut [f64], dy: &mut [f64]) {
    let sx: f64 = x.iter().map(|v| v * v).sum();
    for i in 0..x.len() {
        dx[i] = x[i] * (sx - 1.0) + y[i] * y[i] / sqrt_d[i];
        dy[i] = y[i] * (sx - x[i] / sqrt_d[i]);
    }
}

pub fn vector_field(p: &PhasePoint, spec: &ProblemSpec) -> Result<PhaseDerivative, PhaseError> {
    check_len(p, spec)?;
    let r = spec.rank();
    let mut out = PhaseDerivative {
        dx: vec![0.0; r],
        dy: vec![0.0; r],
    };
    eval_into(&p.x, &p.y, &spec.sqrt_dims(), &mut out.dx, &mut out.dy);
    Ok(out)
}

/// `L = ΣX² + ΣY² - 1`.
pub fn lyapunov(p: &PhasePoint) -> f64 {
    p.norm_sq() - 1.0
}

/// `H = Σ √d_i X_i`.
pub fn hamiltonian(p: &PhasePoint, spec: &ProblemSpec) -> f64 {
    p.x.iter()
        .zip(&spec.factors)
        .map(|(x, f)| f.sqrt_dim() * x)
        .sum()
}

/// `|dL/ds - 2 L ΣX²|` with `dL/ds` taken from the vector field.
pub fn lyapunov_derivative_identity(p: &PhasePoint, spec: &ProblemSpec) -> Result<f64, PhaseError> {
    let f = vector_field(p, spec)?;
    let dl: f64 = p
        .x
        .iter()
        .zip(&f.dx)
        .chain(p.y.iter().zip(&f.dy))
        .map(|(v, dv)| 2.0 * v * dv)
        .sum();
    Ok((dl - 2.0 * lyapunov(p) * p.sum_x_sq()).abs())
}

/// Analytic Jacobian in the `[X, Y]` layout.
pub fn jacobian_at(x: &[f64], y: &[f64], sqrt_d: &[f64], jac: &mut DMatrix<f64>) {
    let r = x.len();
    let sx: f64 = x.iter().map(|v| v * v).sum();
    jac.fill(0.0);
    for i in 0..r {
        for j in 0..r {
            jac[(i, j)] = 2.0 * x[i] * x[j];
            jac[(r + i, j)] = 2.0 * y[i] * x[j];
        }
        jac[(i, i)] += sx - 1.0;
        jac[(i, r + i)] = 2.0 * y[i] / sqrt_d[i];
        jac[(r + i, i)] -= y[i] / sqrt_d[i];
        jac[(r + i, r + i)] = sx - x[i] / sqrt_d[i];
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationReport {
    pub matrix: DMatrix<f64>,
    /// Closed-form spectrum, ascending.
    pub eigenvalues: Vec<f64>,
    /// `(2β, β̂)` in the `(X_1, Y_1)` plane, then the unit `Y_k` directions.
    pub unstable_basis: Vec<Vec<f64>>,
    /// `(β̂, -β)` in the `(X_1, Y_1)` plane.
    pub stable_block_vector: Vec<f64>,
}

pub fn linearization(spec: &ProblemSpec) -> LinearizationReport {
    let r = spec.rank();
    let k = constants(spec);
    let b2 = k.beta_sq();
    let p = critical_point(spec);
    let mut matrix = DMatrix::zeros(2 * r, 2 * r);
    jacobian_at(&p.x, &p.y, &spec.sqrt_dims(), &mut matrix);

    let mut eigenvalues = vec![2.0 * b2];
    eigenvalues.extend(std::iter::repeat_n(b2, r - 1));
    eigenvalues.extend(std::iter::repeat_n(b2 - 1.0, r));
    eigenvalues.sort_by(f64::total_cmp);

    let mut v0 = vec![0.0; 2 * r];
    v0[0] = 2.0 * k.beta;
    v0[r] = k.beta_hat;
    let mut unstable_basis = vec![v0];
    for i in 1..r {
        let mut v = vec![0.0; 2 * r];
        v[r + i] = 1.0;
        unstable_basis.push(v);
    }
    let mut stable = vec![0.0; 2 * r];
    stable[0] = k.beta_hat;
    stable[r] = -k.beta;

    LinearizationReport {
        matrix,
        eigenvalues,
        unstable_basis,
        stable_block_vector: stable,
    }
}

/// Numerical spectrum of the linearization (real parts, ascending), as an
/// independent check on the closed form.
pub fn numerical_eigenvalues(report: &LinearizationReport) -> Vec<f64> {
    let mut ev: Vec<f64> = report
        .matrix
        .clone()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// The phase system as an [`OdeSystem`] over `s`.
#[derive(Debug, Clone)]
pub struct PhaseSystem {
    sqrt_d: Vec<f64>,
}

impl PhaseSystem {
    pub fn new(spec: &ProblemSpec) -> Self {
        Self {
            sqrt_d: spec.sqrt_dims(),
        }
    }
}

impl OdeSystem for PhaseSystem {
    fn dim(&self) -> usize {
        2 * self.sqrt_d.len()
    }

    fn rhs(&self, _s: f64, y: &[f64], dy: &mut [f64]) {
        let r = self.sqrt_d.len();
        let (dx, dyy) = dy.split_at_mut(r);
        eval_into(&y[..r], &y[r..], &self.sqrt_d, dx, dyy);
    }

    fn jacobian(&self, _s: f64, y: &[f64], jac: &mut DMatrix<f64>) {
        let r = self.sqrt_d.len();
        jacobian_at(&y[..r], &y[r..], &self.sqrt_d, jac);
    }
}
