//! Acceptance gate: one PASS/FAIL line per criterion; exits nonzero if any
//! criterion fails.

use std::process::ExitCode;

use solitonforge_core::flow::{integrate, seed, Trajectory};
use solitonforge_core::geometry::{asymptotics, curvature_report, default_kh_bounds, CurvatureReport};
use solitonforge_core::model::{constants, critical_point, validate_spec, FactorSpec, Mode, ProblemSpec};
use solitonforge_core::oracle::cross_validate;
use solitonforge_core::phase::{linearization, lyapunov, lyapunov_derivative_identity, numerical_eigenvalues, vector_field};
use solitonforge_core::reconstruct::{build_profile, MetricProfile};
use solitonforge_core::verify::{run_ricci_flat_suite, run_suite, seed_end_analysis, CheckId, SeedEnd, VerifyReport};

struct Run {
    spec: ProblemSpec,
    traj: Trajectory,
    profile: MetricProfile,
    curv: CurvatureReport,
}

impl Run {
    fn new(spec: ProblemSpec) -> Self {
        let traj = integrate(&spec, &seed(&spec).expect("seed")).expect("integrate");
        let profile = build_profile(&traj, &spec).expect("profile");
        let curv = curvature_report(&profile, &spec, &default_kh_bounds(&spec)).expect("curvature");
        Self { spec, traj, profile, curv }
    }

    fn label(&self) -> String {
        let d: Vec<String> = self.spec.factors.iter().map(|f| f.dim.to_string()).collect();
        format!("d=({})", d.join(","))
    }

    fn report(&self) -> VerifyReport {
        run_suite(&self.traj, &self.profile, &self.curv, &self.spec).expect("suite")
    }

    fn seed_end(&self) -> SeedEnd {
        seed_end_analysis(&self.traj, &self.spec).expect("seed end")
    }
}

fn shipped_dims() -> Vec<Vec<usize>> {
    vec![vec![2], vec![3], vec![4], vec![9], vec![2, 3], vec![3, 5], vec![2, 2, 3]]
}

fn soliton_runs() -> Vec<Run> {
    shipped_dims()
        .iter()
        .map(|d| Run::new(validate_spec(ProblemSpec::with_round_factors(d)).unwrap()))
        .collect()
}

/// Accumulates the worst measurement and the failures of one criterion.
#[derive(Default)]
struct Outcome {
    notes: Vec<String>,
    failures: Vec<String>,
}

impl Outcome {
    fn require(&mut self, ok: bool, what: String) {
        if !ok {
            self.failures.push(what);
        }
    }

    fn note(&mut self, s: String) {
        self.notes.push(s);
    }
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::default();
    let (mut worst_f, mut worst_ev) = (0.0f64, 0.0f64);
    for d1 in [2usize, 3, 4, 9] {
        for r in 1..=3 {
            let dims: Vec<usize> = std::iter::once(d1).chain([3, 4].into_iter().take(r - 1)).collect();
            let spec = validate_spec(ProblemSpec::with_round_factors(&dims)).unwrap();
            let f = vector_field(&critical_point(&spec), &spec).unwrap();
            let fmax = f.dx.iter().chain(&f.dy).fold(0.0f64, |m, v| m.max(v.abs()));
            let b2 = constants(&spec).beta_sq();
            let mut want = vec![2.0 * b2];
            want.extend(std::iter::repeat_n(b2, r - 1));
            want.extend(std::iter::repeat_n(b2 - 1.0, r));
            want.sort_by(f64::total_cmp);
            let got = numerical_eigenvalues(&linearization(&spec));
            let ev = got.iter().zip(&want).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst_f = worst_f.max(fmax);
            worst_ev = worst_ev.max(ev);
            o.require(fmax <= 1e-14, format!("d1={d1} r={r}: |f| = {fmax:.1e}"));
            o.require(got.len() == want.len() && ev <= 1e-10, format!("d1={d1} r={r}: spectrum off by {ev:.1e}"));
        }
    }
    o.note(format!("max |f| {worst_f:.1e}, max eigenvalue error {worst_ev:.1e}"));
    o
}

fn criterion_2(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let (mut worst_id, mut worst_end) = (0.0f64, 0.0f64);
    for run in runs {
        let rep = run.report();
        for id in [CheckId::LyapunovMonotone, CheckId::ReachesOrigin] {
            let c = rep.check(id.name()).unwrap();
            o.require(c.passed, format!("{} {}: {:.2e} {}", run.label(), c.name, c.measured, c.detail));
        }
        worst_end = worst_end.max(rep.check("reaches_origin").unwrap().measured);
        for p in &run.traj.samples {
            let id = lyapunov_derivative_identity(p, &run.spec).unwrap();
            worst_id = worst_id.max(id);
        }
    }
    o.require(worst_id <= 1e-12, format!("identity residual {worst_id:.1e}"));
    o.note(format!("terminal deviation {worst_end:.1e}, identity residual {worst_id:.1e}"));
    o
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let worst = runs.iter().fold(0.0f64, |m, r| m.max(r.curv.soliton_residual_max));
    o.require(worst <= 1e-6, format!("residual {worst:.1e}"));
    o.note(format!("max |Ric + Hess u| {worst:.1e}"));
    o
}

fn criterion_4(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let (mut dev, mut drift) = (0.0f64, 0.0f64);
    for run in runs {
        let cv = cross_validate(&run.profile, &run.spec).expect("oracle");
        o.require(cv.t_end >= 10.0 * cv.t0 * (1.0 - 1e-12), format!("{}: range too short", run.label()));
        o.require(cv.deviation.max() <= 1e-6, format!("{}: deviation {:?}", run.label(), cv.deviation));
        o.require(cv.conservation_drift <= 1e-8, format!("{}: drift {:.1e}", run.label(), cv.conservation_drift));
        o.require(
            (cv.conservation_initial - run.spec.gauge_c).abs() <= 1e-8,
            format!("{}: conservation {} != C", run.label(), cv.conservation_initial),
        );
        dev = dev.max(cv.deviation.max());
        drift = drift.max(cv.conservation_drift);
    }
    o.note(format!("max relative deviation {dev:.1e}, conservation drift {drift:.1e}"));
    o
}

fn criterion_5(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let mut worst_rate = 0.0f64;
    for run in runs {
        let rep = run.report();
        for id in [CheckId::OriginRatio, CheckId::SeedRatio] {
            let c = rep.check(id.name()).unwrap();
            o.require(c.passed, format!("{} {}: {:.2e}", run.label(), c.name, c.measured));
        }
        let se = run.seed_end();
        let b2 = constants(&run.spec).beta_sq();
        let rel = (se.l_exponent / (2.0 * b2) - 1.0).abs();
        worst_rate = worst_rate.max(rel);
        o.require(rel <= 0.05, format!("{}: L rate {}", run.label(), se.l_exponent));
        for (i, y) in se.y_exponents.iter().enumerate() {
            if let Some(y) = y {
                let rel = (y / b2 - 1.0).abs();
                worst_rate = worst_rate.max(rel);
                o.require(rel <= 0.05, format!("{}: Y_{} rate {y}", run.label(), i + 1));
            }
        }
    }
    o.note(format!("worst relative rate error {worst_rate:.1e}"));
    o
}

fn criterion_6(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    for run in runs {
        let c = run.report();
        let c = c.check(CheckId::BoundaryValues.name()).unwrap();
        o.require(c.passed, format!("{}: {}", run.label(), c.detail));
        let se = run.seed_end();
        o.note(format!(
            "{} g'_1(0)={:.6}",
            run.label(),
            se.boundary.g_dot[0].limit
        ));
    }
    o.notes = vec![o.notes.join(", ")];
    o
}

fn criterion_7(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let (mut min_ric, mut worst_slope) = (f64::INFINITY, 0.0f64);
    for run in runs {
        min_ric = min_ric.min(run.curv.min_ricci);
        o.require(run.curv.min_ricci >= -1e-8, format!("{}: min Ricci {:.1e}", run.label(), run.curv.min_ricci));
        let r = run.spec.rank();
        if r >= 2 {
            let last = &run.curv.samples.last().unwrap().sectional;
            let neg = (0..r).any(|i| (i + 1..r).any(|j| last.cross[i][j] < 0.0));
            o.require(neg, format!("{}: no negative cross curvature at large t", run.label()));
        } else {
            let pos = run.curv.samples.iter().all(|c| c.sectional.values().iter().all(|&v| v > 0.0));
            o.require(pos, format!("{}: non-positive sectional value", run.label()));
        }
        let a = asymptotics(&run.profile, &run.spec, &default_kh_bounds(&run.spec)).expect("asymptotics");
        for (what, s) in [("R", a.scalar_slope), ("|K|", a.sectional_slope)] {
            worst_slope = worst_slope.max((s + 1.0).abs());
            o.require((s + 1.0).abs() <= 0.1, format!("{}: slope of log {what} = {s:.4}", run.label()));
        }
        o.require(a.scalar_t2_increasing, format!("{}: R t^2 not increasing", run.label()));
    }
    o.note(format!("min Ricci {min_ric:.1e}, worst slope error {worst_slope:.1e}"));
    o
}

fn criterion_8(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let (mut w1, mut w2) = (0.0f64, 0.0f64);
    for run in runs {
        let a = asymptotics(&run.profile, &run.spec, &default_kh_bounds(&run.spec)).expect("asymptotics");
        for (i, (p, q)) in a.g_gdot.iter().zip(&a.g_sq_over_t).enumerate() {
            let e1 = (p.value / p.target - 1.0).abs();
            let e2 = (q.value / q.target - 1.0).abs();
            w1 = w1.max(e1);
            w2 = w2.max(e2);
            o.require(e1 <= 1e-3, format!("{}: g_{0}g'_{0} off by {e1:.1e}", i + 1));
            o.require(e2 <= 1e-2, format!("{}: g_{0}^2/t off by {e2:.1e}", i + 1));
        }
    }
    o.note(format!("g g' relative error {w1:.1e}, g^2/t relative error {w2:.1e}"));
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::default();
    let mut worst = Vec::new();
    for d in [vec![2, 3], vec![3, 5], vec![2, 2, 3]] {
        let run = Run::new(validate_spec(ProblemSpec::with_round_factors(&d).mode(Mode::RicciFlat)).unwrap());
        let rep = run_ricci_flat_suite(&run.traj, &run.profile, &run.curv, &run.spec).expect("suite");
        for c in &rep.checks {
            o.require(c.passed, format!("{} {}: {:.1e}", run.label(), c.name, c.measured));
        }
        worst.push(rep.checks.iter().map(|c| c.measured).fold(0.0, f64::max));
    }
    o.note(format!("worst measured {:.1e}", worst.iter().copied().fold(0.0, f64::max)));
    o
}

fn criterion_10(runs: &[Run]) -> Outcome {
    let mut o = Outcome::default();
    let mut n = 0;
    for run in runs {
        let rep = run.report();
        for id in [CheckId::HamiltonianInequalities, CheckId::X1BelowBeta] {
            let c = rep.check(id.name()).unwrap();
            o.require(c.passed, format!("{} {}: {}", run.label(), c.name, c.detail));
        }
        n += run.traj.samples.iter().filter(|p| lyapunov(p) < 0.0).count();
    }
    o.note(format!("{n} samples checked"));
    o
}

fn criterion_11() -> Outcome {
    let mut o = Outcome::default();
    let eps0 = 1e-4;
    let mut limits = Vec::new();
    for ratio in [25.0, 50.0, 75.0, 100.0, 125.0] {
        let spec = validate_spec(
            ProblemSpec::new(vec![FactorSpec::new(2, 1.0), FactorSpec::new(3, 2.0)]).seed(vec![-eps0, ratio * eps0]),
        )
        .unwrap();
        let run = Run::new(spec);
        limits.push(run.seed_end().boundary.g[1]);
    }
    for i in 0..limits.len() {
        for j in i + 1..limits.len() {
            let (a, b) = (limits[i], limits[j]);
            o.require(
                (a.limit - b.limit).abs() > a.error + b.error,
                format!("g_2(0) {} and {} not separated", a.limit, b.limit),
            );
        }
    }
    let v: Vec<String> = limits.iter().map(|e| format!("{:.6}", e.limit)).collect();
    o.note(format!("g_2(0) = [{}]", v.join(", ")));
    o
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let runs = soliton_runs();
    let criteria: Vec<Criterion> = vec![
        ("fixed point and spectrum", Box::new(criterion_1)),
        ("Lyapunov monotonicity and identity", Box::new(|| criterion_2(&runs))),
        ("soliton equation residual", Box::new(|| criterion_3(&runs))),
        ("second-order oracle agreement", Box::new(|| criterion_4(&runs))),
        ("limits at both ends and decay rates", Box::new(|| criterion_5(&runs))),
        ("smooth collapse at t = 0", Box::new(|| criterion_6(&runs))),
        ("curvature signs and decay", Box::new(|| criterion_7(&runs))),
        ("paraboloid asymptotics", Box::new(|| criterion_8(&runs))),
        ("Ricci-flat mode", Box::new(criterion_9)),
        ("inequalities along trajectories", Box::new(|| criterion_10(&runs))),
        ("family distinctness", Box::new(criterion_11)),
    ];
    let mut all = true;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let out = f();
        let ok = out.failures.is_empty();
        all &= ok;
        println!(
            "{} criterion {:>2}: {name} [{}]",
            if ok { "PASS" } else { "FAIL" },
            k + 1,
            out.notes.join("; ")
        );
        for f in &out.failures {
            println!("    {f}");
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
