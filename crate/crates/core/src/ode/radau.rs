use nalgebra::{DMatrix, DVector};

use super::{scaled_rms, stop_schedule, IntegrationStats, OdeError, OdeSystem, StepAction, Tolerances};

const SQ6: f64 = 2.449_489_742_783_178;

fn nodes() -> [f64; 3] {
    [(4.0 - SQ6) / 10.0, (4.0 + SQ6) / 10.0, 1.0]
}

fn butcher() -> [[f64; 3]; 3] {
    [
        [
            (88.0 - 7.0 * SQ6) / 360.0,
            (296.0 - 169.0 * SQ6) / 1800.0,
            (-2.0 + 3.0 * SQ6) / 225.0,
        ],
        [
            (296.0 + 169.0 * SQ6) / 1800.0,
            (88.0 + 7.0 * SQ6) / 360.0,
            (-2.0 - 3.0 * SQ6) / 225.0,
        ],
        [(16.0 - SQ6) / 36.0, (16.0 + SQ6) / 36.0, 1.0 / 9.0],
    ]
}

/// Three-stage Radau IIA (order 5).
///
/// Stage equations are solved by simplified Newton on the full `3n` system
/// and iterated down to round-off, so that tiny quantities near an
/// equilibrium keep their relative accuracy. The local error is estimated by
/// step doubling.
#[derive(Debug, Clone, Copy)]
pub struct Radau5 {
    pub tol: Tolerances,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    pub max_newton: usize,
}

struct Work {
    n: usize,
    c: [f64; 3],
    a: [[f64; 3]; 3],
    jac: DMatrix<f64>,
    f: Vec<f64>,
    ys: Vec<f64>,
    rhs_evals: usize,
}

impl Radau5 {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 5.0,
            max_newton: 20,
        }
    }

    /// One collocation step of size `h` from `(t, y)`; `None` if Newton fails.
    fn step<S: OdeSystem + ?Sized>(
        &self,
        sys: &S,
        w: &mut Work,
        t: f64,
        y: &[f64],
        h: f64,
        fresh_jac: bool,
    ) -> Option<Vec<f64>> {
        let n = w.n;
        if fresh_jac {
            sys.jacobian(t, y, &mut w.jac);
        }
        let mut m = DMatrix::<f64>::identity(3 * n, 3 * n);
        for i in 0..3 {
            for j in 0..3 {
                let hij = h * w.a[i][j];
                for p in 0..n {
                    for q in 0..n {
                        m[(i * n + p, j * n + q)] -= hij * w.jac[(p, q)];
                    }
                }
            }
        }
        let lu = m.lu();
        let mut z = vec![0.0; 3 * n];
        let mut fz = vec![0.0; 3 * n];
        let mut prev = f64::INFINITY;
        for it in 0..self.max_newton {
            for j in 0..3 {
                for p in 0..n {
                    w.ys[p] = y[p] + z[j * n + p];
                }
                sys.rhs(t + w.c[j] * h, &w.ys, &mut w.f);
                w.rhs_evals += 1;
                fz[j * n..(j + 1) * n].copy_from_slice(&w.f);
            }
            let mut res = DVector::<f64>::zeros(3 * n);
            for i in 0..3 {
                for p in 0..n {
                    let mut acc = 0.0;
                    for j in 0..3 {
                        acc += w.a[i][j] * fz[j * n + p];
                    }
                    res[i * n + p] = -z[i * n + p] + h * acc;
                }
            }
            let dz = lu.solve(&res)?;
            let mut sum = 0.0;
            for i in 0..3 {
                for p in 0..n {
                    z[i * n + p] += dz[i * n + p];
                    let sc = self.tol.atol + self.tol.rtol * y[p].abs();
                    sum += (dz[i * n + p] / sc).powi(2);
                }
            }
            let dn = (sum / (3 * n) as f64).sqrt();
            if !dn.is_finite() {
                return None;
            }
            if dn <= 1e-5 {
                break;
            }
            // Stagnation at round-off level.
            if it >= 1 && dn < 1e-2 && dn > 0.5 * prev {
                break;
            }
            if it >= 2 && dn > prev {
                return None;
            }
            if it + 1 == self.max_newton {
                return None;
            }
            prev = dn;
        }
        let out: Vec<f64> = (0..n).map(|p| y[p] + z[2 * n + p]).collect();
        if out.iter().all(|v| v.is_finite()) {
            Some(out)
        } else {
            None
        }
    }

    /// Integrates from `t0` to `t_end`, landing exactly on every time in
    /// `stops`. `on_step` sees every accepted step and may edit the state.
    pub fn integrate<S, F>(
        &self,
        sys: &S,
        t0: f64,
        y0: &[f64],
        t_end: f64,
        stops: &[f64],
        mut on_step: F,
    ) -> Result<IntegrationStats, OdeError>
    where
        S: OdeSystem + ?Sized,
        F: FnMut(f64, &mut [f64]) -> StepAction,
    {
        let n = sys.dim();
        let mut w = Work {
            n,
            c: nodes(),
            a: butcher(),
            jac: DMatrix::zeros(n, n),
            f: vec![0.0; n],
            ys: vec![0.0; n],
            rhs_evals: 0,
        };
        let schedule = stop_schedule(t0, t_end, stops);
        let mut next = 0;
        let mut stats = IntegrationStats {
            final_t: t0,
            ..Default::default()
        };
        let mut t = t0;
        let mut y = y0.to_vec();
        if y.iter().any(|v| !v.is_finite()) {
            return Err(OdeError::NonFinite { t });
        }
        let mut h = self.tol.initial_step.min(t_end - t0);
        let mut rejected_last = false;

        while t < t_end {
            if stats.accepted + stats.rejected >= self.tol.max_steps {
                return Err(OdeError::StepLimitExceeded {
                    t,
                    steps: self.tol.max_steps,
                });
            }
            let target = schedule[next];
            let mut hits = false;
            if t + h >= target - 1e-13 * target.abs().max(1.0) {
                h = target - t;
                hits = true;
            }
            if h <= 1e-14 * t.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { t, h });
            }

            let full = self.step(sys, &mut w, t, &y, h, true);
            let half = full.as_ref().and_then(|_| {
                let mid = self.step(sys, &mut w, t, &y, 0.5 * h, false)?;
                self.step(sys, &mut w, t + 0.5 * h, &mid, 0.5 * h, true)
            });
            let (full, half) = match (full, half) {
                (Some(f), Some(hf)) => (f, hf),
                _ => {
                    stats.rejected += 1;
                    h *= 0.25;
                    rejected_last = true;
                    continue;
                }
            };
            let diff: Vec<f64> = half
                .iter()
                .zip(&full)
                .map(|(a, b)| (a - b) / 31.0)
                .collect();
            let e = scaled_rms(&diff, &y, &half, &self.tol);
            if !e.is_finite() {
                stats.rejected += 1;
                h *= 0.25;
                rejected_last = true;
                continue;
            }
            let fac = (self.safety * e.max(1e-12).powf(-1.0 / 6.0))
                .clamp(self.fac_min, self.fac_max);
            if e <= 1.0 {
                let mut h_new = h * fac;
                if rejected_last {
                    h_new = h_new.min(h);
                }
                t = if hits { target } else { t + h };
                y = half;
                stats.accepted += 1;
                stats.final_t = t;
                if hits {
                    next += 1;
                }
                let action = on_step(t, &mut y);
                if action == StepAction::Stop {
                    stats.stopped = t < t_end;
                    stats.rhs_evals = w.rhs_evals;
                    return Ok(stats);
                }
                h = h_new;
                rejected_last = false;
            } else {
                h *= fac.min(0.9);
                stats.rejected += 1;
                rejected_last = true;
            }
        }
        stats.rhs_evals = w.rhs_evals;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_satisfy_row_sums_and_order_conditions() {
        let a = butcher();
        let c = nodes();
        for i in 0..3 {
            let row: f64 = a[i].iter().sum();
            assert!((row - c[i]).abs() < 1e-15);
        }
        // Stiffly accurate: last row equals the weights, which integrate
        // polynomials up to degree 4 exactly.
        for k in 0..5 {
            let q: f64 = (0..3).map(|j| a[2][j] * c[j].powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-14, "degree {k}");
        }
    }

    struct Decay;
    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    #[test]
    fn relative_accuracy_survives_tiny_values() {
        let tol = Tolerances {
            rtol: 1e-10,
            atol: 1e-300,
            initial_step: 1e-2,
            max_steps: 100_000,
        };
        let mut last = 0.0;
        Radau5::new(tol)
            .integrate(&Decay, 0.0, &[1.0], 200.0, &[], |_, y| {
                last = y[0];
                StepAction::Continue
            })
            .unwrap();
        let exact = (-200f64).exp();
        assert!(((last - exact) / exact).abs() < 1e-7, "{last} vs {exact}");
    }
}
