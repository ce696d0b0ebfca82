//! Adaptive one-step integrators.
//!
//! [`Radau5`] is a three-stage Radau IIA collocation method (order 5,
//! L-stable) with step-doubling error control. It is used for the phase
//! system, which turns stiff on the approach to the origin: there the
//! `X`-equations relax at unit rate while the solution itself only varies on
//! scale `s`. [`Dopri5`] is the explicit Dormand–Prince 5(4) pair, used for
//! non-stiff problems such as the second-order cross-check.

mod dopri;
mod radau;

pub use dopri::Dopri5;
pub use radau::Radau5;

use nalgebra::DMatrix;
use thiserror::Error;

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);

    /// Jacobian `∂f/∂y`. The default uses forward differences.
    fn jacobian(&self, t: f64, y: &[f64], jac: &mut DMatrix<f64>) {
        let n = self.dim();
        let mut f0 = vec![0.0; n];
        let mut f1 = vec![0.0; n];
        let mut yp = y.to_vec();
        self.rhs(t, y, &mut f0);
        for j in 0..n {
            let delta = f64::EPSILON.sqrt() * y[j].abs().max(1e-5);
            yp[j] = y[j] + delta;
            self.rhs(t, &yp, &mut f1);
            yp[j] = y[j];
            for i in 0..n {
                jac[(i, j)] = (f1[i] - f0[i]) / delta;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: 1e-3,
            max_steps: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepAction {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
    pub final_t: f64,
    /// The step callback asked to stop before `t_end`.
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step limit of {steps} exceeded at t = {t}")]
    StepLimitExceeded { t: f64, steps: usize },
    #[error("step size underflow (h = {h:e}) at t = {t}")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
}

/// RMS norm of `e` scaled by `atol + rtol * max(|a|, |b|)`.
pub(crate) fn scaled_rms(e: &[f64], a: &[f64], b: &[f64], tol: &Tolerances) -> f64 {
    let n = e.len().max(1) as f64;
    let sum: f64 = e
        .iter()
        .zip(a.iter().zip(b))
        .map(|(ei, (ai, bi))| {
            let sc = tol.atol + tol.rtol * ai.abs().max(bi.abs());
            (ei / sc).powi(2)
        })
        .sum();
    (sum / n).sqrt()
}

/// Output times strictly inside `(t0, t_end]`, sorted, with `t_end` last.
pub(crate) fn stop_schedule(t0: f64, t_end: f64, stops: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = stops
        .iter()
        .copied()
        .filter(|&s| s > t0 && s < t_end)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out.push(t_end);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// y'' = -y as a first-order system.
    pub(super) struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = y[1];
            dy[1] = -y[0];
        }
    }

    /// Prothero–Robinson type stiff test problem with exact solution sin(t).
    pub(super) struct Stiff {
        pub lambda: f64,
    }

    impl OdeSystem for Stiff {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = self.lambda * (y[0] - t.sin()) + t.cos();
        }
        fn jacobian(&self, _t: f64, _y: &[f64], jac: &mut DMatrix<f64>) {
            jac[(0, 0)] = self.lambda;
        }
    }

    fn run<I>(integrate: I) -> (Vec<f64>, IntegrationStats)
    where
        I: FnOnce(&mut dyn FnMut(f64, &mut [f64]) -> StepAction) -> IntegrationStats,
    {
        let mut last = Vec::new();
        let stats = integrate(&mut |_, y| {
            last = y.to_vec();
            StepAction::Continue
        });
        (last, stats)
    }

    #[test]
    fn both_integrators_solve_oscillator() {
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-12,
            ..Tolerances::default()
        };
        let t_end = 10.0;
        let (y, _) = run(|cb| {
            Dopri5::new(tol)
                .integrate(&Oscillator, 0.0, &[0.0, 1.0], t_end, &[], cb)
                .unwrap()
        });
        assert!((y[0] - t_end.sin()).abs() < 1e-8, "dopri {}", y[0]);
        let (y, _) = run(|cb| {
            Radau5::new(tol)
                .integrate(&Oscillator, 0.0, &[0.0, 1.0], t_end, &[], cb)
                .unwrap()
        });
        assert!((y[0] - t_end.sin()).abs() < 1e-8, "radau {}", y[0]);
    }

    #[test]
    fn radau_takes_large_steps_on_stiff_problem() {
        let tol = Tolerances {
            rtol: 1e-8,
            atol: 1e-10,
            ..Tolerances::default()
        };
        let sys = Stiff { lambda: -1e8 };
        let (y, stats) = run(|cb| {
            Radau5::new(tol)
                .integrate(&sys, 0.0, &[0.0], 20.0, &[], cb)
                .unwrap()
        });
        assert!((y[0] - 20f64.sin()).abs() < 1e-7);
        assert!(stats.accepted < 2000, "accepted {}", stats.accepted);
    }

    #[test]
    fn stops_are_hit_exactly() {
        let stops = [0.25, 1.0, 3.5];
        let mut seen = Vec::new();
        Dopri5::new(Tolerances::default())
            .integrate(&Oscillator, 0.0, &[0.0, 1.0], 4.0, &stops, |t, _| {
                seen.push(t);
                StepAction::Continue
            })
            .unwrap();
        for s in stops.iter().chain([4.0].iter()) {
            assert!(seen.contains(s), "missing stop {s}");
        }
        let mut seen = Vec::new();
        Radau5::new(Tolerances::default())
            .integrate(&Oscillator, 0.0, &[0.0, 1.0], 4.0, &stops, |t, _| {
                seen.push(t);
                StepAction::Continue
            })
            .unwrap();
        for s in stops.iter().chain([4.0].iter()) {
            assert!(seen.contains(s), "missing stop {s}");
        }
    }

    #[test]
    fn callback_can_stop() {
        let stats = Dopri5::new(Tolerances::default())
            .integrate(&Oscillator, 0.0, &[0.0, 1.0], 100.0, &[], |t, _| {
                if t > 1.0 {
                    StepAction::Stop
                } else {
                    StepAction::Continue
                }
            })
            .unwrap();
        assert!(stats.stopped);
        assert!(stats.final_t < 100.0);
    }

    #[test]
    fn step_limit_is_reported() {
        let tol = Tolerances {
            max_steps: 5,
            ..Tolerances::default()
        };
        let err = Radau5::new(tol)
            .integrate(&Oscillator, 0.0, &[0.0, 1.0], 100.0, &[], |_, _| {
                StepAction::Continue
            })
            .unwrap_err();
        assert!(matches!(err, OdeError::StepLimitExceeded { .. }));
    }

    #[test]
    fn finite_difference_jacobian_matches_linear_system() {
        let mut jac = DMatrix::zeros(2, 2);
        Oscillator.jacobian(0.0, &[0.3, -0.2], &mut jac);
        assert!((jac[(0, 1)] - 1.0).abs() < 1e-7);
        assert!((jac[(1, 0)] + 1.0).abs() < 1e-7);
        assert!(jac[(0, 0)].abs() < 1e-7 && jac[(1, 1)].abs() < 1e-7);
    }
}
