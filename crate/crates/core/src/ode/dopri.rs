use super::{scaled_rms, stop_schedule, IntegrationStats, OdeError, OdeSystem, StepAction, Tolerances};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Dormand–Prince 5(4) with PI step control (FSAL).
#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub tol: Tolerances,
    pub safety: f64,
    pub fac_min: f64,
    pub fac_max: f64,
    pub beta: f64,
}

impl Dopri5 {
    pub fn new(tol: Tolerances) -> Self {
        Self {
            tol,
            safety: 0.9,
            fac_min: 0.2,
            fac_max: 10.0,
            beta: 0.04,
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
        let schedule = stop_schedule(t0, t_end, stops);
        let mut next = 0;
        let mut stats = IntegrationStats {
            final_t: t0,
            ..Default::default()
        };
        let mut t = t0;
        let mut y = y0.to_vec();
        let mut h = self.tol.initial_step.min(t_end - t0);
        let expo = 0.2 - self.beta * 0.75;
        let mut err_old: f64 = 1e-4;

        let mut k1 = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let mut k5 = vec![0.0; n];
        let mut k6 = vec![0.0; n];
        let mut k7 = vec![0.0; n];
        let mut ytmp = vec![0.0; n];
        let mut ynew = vec![0.0; n];
        let mut err = vec![0.0; n];

        sys.rhs(t, &y, &mut k1);
        stats.rhs_evals += 1;
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

            for i in 0..n {
                ytmp[i] = y[i] + h * A21 * k1[i];
            }
            sys.rhs(t + C2 * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            sys.rhs(t + C3 * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            sys.rhs(t + C4 * h, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            sys.rhs(t + C5 * h, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            sys.rhs(t + h, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            sys.rhs(t + h, &ynew, &mut k7);
            stats.rhs_evals += 6;
            for i in 0..n {
                err[i] = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            }
            let e = scaled_rms(&err, &y, &ynew, &self.tol);
            if !e.is_finite() || ynew.iter().any(|v| !v.is_finite()) {
                stats.rejected += 1;
                h *= 0.25;
                rejected_last = true;
                continue;
            }

            if e <= 1.0 {
                let e = e.max(1e-10);
                let mut fac = e.powf(expo) / (self.safety * err_old.powf(self.beta));
                fac = fac.clamp(1.0 / self.fac_max, 1.0 / self.fac_min);
                let mut h_new = h / fac;
                if rejected_last {
                    h_new = h_new.min(h);
                }
                err_old = e.max(1e-4);
                t = if hits { target } else { t + h };
                std::mem::swap(&mut y, &mut ynew);
                stats.accepted += 1;
                stats.final_t = t;
                if hits {
                    next += 1;
                }
                let before = y.clone();
                let action = on_step(t, &mut y);
                if y != before {
                    sys.rhs(t, &y, &mut k1);
                    stats.rhs_evals += 1;
                } else {
                    std::mem::swap(&mut k1, &mut k7);
                }
                if action == StepAction::Stop {
                    stats.stopped = t < t_end;
                    return Ok(stats);
                }
                h = h_new;
                rejected_last = false;
            } else {
                let fac = (e.powf(expo) / self.safety).min(1.0 / self.fac_min);
                h /= fac;
                stats.rejected += 1;
                rejected_last = true;
            }
        }
        Ok(stats)
    }
}
