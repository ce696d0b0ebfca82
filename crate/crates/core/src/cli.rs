//! Batch orchestration behind the `solitonforge` binary. Every command writes
//! into its own output directory and is deterministic given the config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, Format, RunConfig};
use crate::export::{export_profile, write_curvature_csv, write_json_file, ExportError, PlotQuantity};
use crate::flow::{integrate, seed, Trajectory, TrajectoryMeta};
use crate::geometry::{asymptotics, curvature_report, default_kh_bounds, CurvatureReport, GeometryError};
use crate::model::{Mode, ProblemSpec};
use crate::oracle::cross_validate;
use crate::reconstruct::{build_profile, MetricProfile};
use crate::verify::{run_ricci_flat_suite, run_suite, seed_end_analysis, Extrapolation, VerifyReport};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Verify,
    Curvature,
    Oracle,
    RicciFlat,
    Sweep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// 0 on success, 1 when a verification step fails.
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    /// Human-readable summary lines.
    pub summary: String,
}

#[derive(Debug, Clone, Serialize)]
struct RunSummary<'a> {
    spec: &'a ProblemSpec,
    trajectory: &'a TrajectoryMeta,
    samples: usize,
    t_range: (f64, f64),
}

struct Solved {
    spec: ProblemSpec,
    traj: Trajectory,
    profile: MetricProfile,
}

fn solve(spec: ProblemSpec) -> Result<Solved, Error> {
    let traj = integrate(&spec, &seed(&spec)?)?;
    let profile = build_profile(&traj, &spec)?;
    Ok(Solved { spec, traj, profile })
}

fn plots(cfg: &RunConfig) -> Result<Vec<PlotQuantity>, Error> {
    cfg.output
        .plots
        .iter()
        .map(|q| PlotQuantity::parse(q, cfg.rank()).ok_or_else(|| ExportError::UnknownQuantity(q.clone()).into()))
        .collect()
}

fn write_solution(dir: &Path, cfg: &RunConfig, s: &Solved) -> Result<Vec<PathBuf>, Error> {
    let mut out = export_profile(dir, &s.profile, &cfg.output.formats, cfg.output.thin, &plots(cfg)?)?;
    let rows = &s.profile.rows;
    let summary = RunSummary {
        spec: &s.spec,
        trajectory: &s.traj.meta,
        samples: s.traj.len(),
        t_range: (rows[0].t, rows[rows.len() - 1].t),
    };
    out.push(write_json_file(&dir.join("summary.json"), &summary)?);
    Ok(out)
}

fn curvature(s: &Solved) -> Result<CurvatureReport, Error> {
    Ok(curvature_report(&s.profile, &s.spec, &default_kh_bounds(&s.spec))?)
}

fn report_lines(report: &VerifyReport, text: &mut String) {
    for c in &report.checks {
        let _ = writeln!(
            text,
            "{} ({}) {}: measured {:.3e}, tolerance {:.1e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            c.measured,
            c.tolerance,
            c.detail
        );
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    ratio: f64,
    directory: PathBuf,
    boundary_g: Vec<Extrapolation>,
}

pub fn run(command: Command, cfg: &RunConfig, out_dir: &Path) -> Result<RunOutcome, Error> {
    let mut text = String::new();
    let mut artifacts = Vec::new();
    let mut exit_code = 0;
    let mut cfg = cfg.clone();
    if command == Command::RicciFlat {
        cfg.mode = Mode::RicciFlat;
        cfg.s_max = None;
    }
    let spec = cfg.to_spec()?;
    std::fs::create_dir_all(out_dir).map_err(|e| ExportError::Io {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    match command {
        Command::Solve => {
            let s = solve(spec)?;
            artifacts = write_solution(out_dir, &cfg, &s)?;
            let _ = writeln!(
                text,
                "{:?} after {} steps, {} samples, t in [{:.6e}, {:.6e}]",
                s.traj.meta.termination,
                s.traj.meta.accepted_steps,
                s.traj.len(),
                s.profile.rows[0].t,
                s.profile.rows[s.profile.rows.len() - 1].t
            );
        }
        Command::Verify | Command::RicciFlat => {
            let s = solve(spec)?;
            artifacts = write_solution(out_dir, &cfg, &s)?;
            let curv = curvature(&s)?;
            let report = match s.spec.mode {
                Mode::Soliton => run_suite(&s.traj, &s.profile, &curv, &s.spec)?,
                Mode::RicciFlat => run_ricci_flat_suite(&s.traj, &s.profile, &curv, &s.spec)?,
            };
            artifacts.push(write_json_file(&out_dir.join("verify_report.json"), &report)?);
            report_lines(&report, &mut text);
            exit_code = if report.passed() { 0 } else { 1 };
        }
        Command::Curvature => {
            let s = solve(spec)?;
            artifacts = write_solution(out_dir, &cfg, &s)?;
            let bounds = default_kh_bounds(&s.spec);
            let curv = curvature(&s)?;
            if cfg.output.formats.contains(&Format::Csv) {
                let p = out_dir.join("curvature.csv");
                let f = std::fs::File::create(&p).map(std::io::BufWriter::new);
                f.and_then(|w| write_curvature_csv(&curv, w)).map_err(|e| ExportError::Io {
                    path: p.clone(),
                    message: e.to_string(),
                })?;
                artifacts.push(p);
            }
            if cfg.output.formats.contains(&Format::Json) {
                artifacts.push(write_json_file(&out_dir.join("curvature.json"), &curv)?);
            }
            let _ = writeln!(
                text,
                "min Ricci {:.3e}, soliton residual {:.3e}",
                curv.min_ricci, curv.soliton_residual_max
            );
            match asymptotics(&s.profile, &s.spec, &bounds) {
                Ok(a) => {
                    let _ = writeln!(
                        text,
                        "slopes: R {:.4}, max|K| {:.4}; R t^2 increasing: {}",
                        a.scalar_slope, a.sectional_slope, a.scalar_t2_increasing
                    );
                    artifacts.push(write_json_file(&out_dir.join("asymptotics.json"), &a)?);
                }
                Err(GeometryError::InsufficientTail { t_max }) => {
                    let _ = writeln!(text, "tail too short for asymptotics (t_max = {t_max:.3e})");
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Oracle => {
            let s = solve(spec)?;
            artifacts = write_solution(out_dir, &cfg, &s)?;
            let cv = cross_validate(&s.profile, &s.spec)?;
            artifacts.push(write_json_file(&out_dir.join("oracle.json"), &cv)?);
            let ok = cv.deviation.max() <= 1e-6 && cv.conservation_drift <= 1e-8;
            let _ = writeln!(
                text,
                "{} oracle over t in [{:.4e}, {:.4e}]: deviation g {:.2e}, g_dot {:.2e}, u_dot {:.2e}; conservation drift {:.2e}",
                if ok { "PASS" } else { "FAIL" },
                cv.t0,
                cv.t_end,
                cv.deviation.g,
                cv.deviation.g_dot,
                cv.deviation.u_dot,
                cv.conservation_drift
            );
            exit_code = if ok { 0 } else { 1 };
        }
        Command::Sweep => {
            let factor = cfg.sweep.factor;
            let eps0 = cfg.seed.eps0.abs();
            let points = cfg
                .sweep
                .ratios
                .par_iter()
                .map(|&ratio| {
                    let mut c = cfg.clone();
                    c.set_eps(factor, ratio * eps0)?;
                    let dir = out_dir.join(format!("ratio_{ratio}"));
                    let s = solve(c.to_spec()?)?;
                    let mut files = write_solution(&dir, &c, &s)?;
                    let seed_end = seed_end_analysis(&s.traj, &s.spec)?;
                    files.push(write_json_file(&dir.join("boundary.json"), &seed_end)?);
                    Ok((
                        SweepPoint {
                            ratio,
                            directory: dir,
                            boundary_g: seed_end.boundary.g,
                        },
                        files,
                    ))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            for (p, files) in &points {
                let g = p.boundary_g[factor - 1];
                let _ = writeln!(
                    text,
                    "ratio {}: g_{factor}(0) = {:.10} +- {:.1e}",
                    p.ratio, g.limit, g.error
                );
                artifacts.extend(files.iter().cloned());
            }
            let summary: Vec<&SweepPoint> = points.iter().map(|(p, _)| p).collect();
            artifacts.push(write_json_file(&out_dir.join("sweep_summary.json"), &summary)?);
        }
    }
    Ok(RunOutcome {
        exit_code,
        artifacts,
        summary: text,
    })
}

impl From<ConfigError> for Error {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Validation(m) => Error::Model(m),
            other => Error::Config(other),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn verify_bryant_exits_zero() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(r#"{"factors":[{"dim":2,"lambda":1}]}"#).unwrap();
        let out = run(Command::Verify, &cfg, dir.path()).unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.summary);
        assert!(dir.path().join("verify_report.json").exists());
        assert!(dir.path().join("profile.csv").exists());
    }

    #[test]
    fn solve_is_deterministic() {
        let cfg = parse_config(r#"{"factors":[{"dim":2},{"dim":3}],"output":{"plots":["g2"]}}"#).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run(Command::Solve, &cfg, a.path()).unwrap();
        run(Command::Solve, &cfg, b.path()).unwrap();
        for f in ["profile.csv", "g2_vs_t.dat", "summary.json"] {
            let x = std::fs::read(a.path().join(f)).unwrap();
            let y = std::fs::read(b.path().join(f)).unwrap();
            assert_eq!(x, y, "{f}");
        }
    }

    #[test]
    fn ricci_flat_command_forces_mode() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = parse_config(r#"{"factors":[{"dim":2},{"dim":3}]}"#).unwrap();
        let out = run(Command::RicciFlat, &cfg, dir.path()).unwrap();
        assert_eq!(out.exit_code, 0, "{}", out.summary);
        let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
        assert!(text.contains("ricci_flat"));
    }
}
