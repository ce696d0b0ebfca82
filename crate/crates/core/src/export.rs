//! Flat-file output: profile CSV (17 significant digits), JSON documents and
//! two-column `(t, value)` plot series.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::Format;
use crate::geometry::CurvatureReport;
use crate::reconstruct::{MetricProfile, ProfileRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExportError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("unknown plot quantity `{0}`")]
    UnknownQuantity(String),
}

impl ExportError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Io { .. } => "IoError",
            Self::Malformed { .. } => "Malformed",
            Self::UnknownQuantity(_) => "UnknownQuantity",
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column names in export order.
pub fn profile_header(rank: usize) -> Vec<String> {
    let mut h = vec!["s".to_string(), "t".to_string()];
    let idx = |p: &'static str| (1..=rank).map(move |i| format!("{p}_{i}"));
    h.extend(idx("X"));
    h.extend(idx("Y"));
    h.push("L".into());
    h.push("H".into());
    h.extend(idx("g"));
    h.extend(idx("g_dot"));
    h.extend(idx("g_ddot"));
    h.extend(["u", "u_dot", "u_ddot"].map(String::from));
    h
}

pub fn profile_row_values(row: &ProfileRow) -> Vec<f64> {
    let mut v = vec![row.s, row.t];
    v.extend(&row.x);
    v.extend(&row.y);
    v.push(row.lyapunov);
    v.push(row.hamiltonian);
    v.extend(&row.g);
    v.extend(&row.g_dot);
    v.extend(&row.g_ddot);
    v.extend([row.u, row.u_dot, row.u_ddot]);
    v
}

/// Every `thin`-th index plus the last one.
pub fn thin_indices(n: usize, thin: usize) -> Vec<usize> {
    let thin = thin.max(1);
    let mut idx: Vec<usize> = (0..n).step_by(thin).collect();
    if n > 0 && idx.last() != Some(&(n - 1)) {
        idx.push(n - 1);
    }
    idx
}

pub fn write_profile_csv<W: Write>(profile: &MetricProfile, thin: usize, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", profile_header(profile.rank()).join(","))?;
    for i in thin_indices(profile.rows.len(), thin) {
        let vals: Vec<String> = profile_row_values(&profile.rows[i]).into_iter().map(num).collect();
        writeln!(w, "{}", vals.join(","))?;
    }
    w.flush()
}

/// Header and numeric rows of a CSV written by [`write_profile_csv`].
pub fn read_profile_csv<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>), ExportError> {
    let mut lines = r.lines();
    let io = |e: std::io::Error| ExportError::Malformed {
        line: 0,
        message: e.to_string(),
    };
    let header: Vec<String> = match lines.next() {
        Some(l) => l.map_err(io)?.split(',').map(String::from).collect(),
        None => {
            return Err(ExportError::Malformed {
                line: 1,
                message: "empty file".into(),
            })
        }
    };
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(io)?;
        let vals = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ExportError::Malformed {
                line: n + 2,
                message: e.to_string(),
            })?;
        if vals.len() != header.len() {
            return Err(ExportError::Malformed {
                line: n + 2,
                message: format!("expected {} fields, got {}", header.len(), vals.len()),
            });
        }
        rows.push(vals);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotQuantity {
    X(usize),
    Y(usize),
    G(usize),
    GDot(usize),
    GDdot(usize),
    Lyapunov,
    Hamiltonian,
    U,
    UDot,
    UDdot,
}

impl PlotQuantity {
    /// Names such as `g1`, `g_dot2`, `X1`, `L`, `u_dot`; factor indices are
    /// 1-based and must not exceed `rank`.
    pub fn parse(name: &str, rank: usize) -> Option<Self> {
        let simple = match name {
            "L" => Some(Self::Lyapunov),
            "H" => Some(Self::Hamiltonian),
            "u" => Some(Self::U),
            "u_dot" => Some(Self::UDot),
            "u_ddot" => Some(Self::UDdot),
            _ => None,
        };
        if simple.is_some() {
            return simple;
        }
        let split = name.find(|c: char| c.is_ascii_digit())?;
        let (prefix, digits) = name.split_at(split);
        let i: usize = digits.parse().ok()?;
        if i == 0 || i > rank {
            return None;
        }
        let i = i - 1;
        match prefix {
            "X" => Some(Self::X(i)),
            "Y" => Some(Self::Y(i)),
            "g" => Some(Self::G(i)),
            "g_dot" => Some(Self::GDot(i)),
            "g_ddot" => Some(Self::GDdot(i)),
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            Self::X(i) => format!("X{}", i + 1),
            Self::Y(i) => format!("Y{}", i + 1),
            Self::G(i) => format!("g{}", i + 1),
            Self::GDot(i) => format!("g_dot{}", i + 1),
            Self::GDdot(i) => format!("g_ddot{}", i + 1),
            Self::Lyapunov => "L".into(),
            Self::Hamiltonian => "H".into(),
            Self::U => "u".into(),
            Self::UDot => "u_dot".into(),
            Self::UDdot => "u_ddot".into(),
        }
    }

    pub fn value(self, row: &ProfileRow) -> f64 {
        match self {
            Self::X(i) => row.x[i],
            Self::Y(i) => row.y[i],
            Self::G(i) => row.g[i],
            Self::GDot(i) => row.g_dot[i],
            Self::GDdot(i) => row.g_ddot[i],
            Self::Lyapunov => row.lyapunov,
            Self::Hamiltonian => row.hamiltonian,
            Self::U => row.u,
            Self::UDot => row.u_dot,
            Self::UDdot => row.u_ddot,
        }
    }
}

pub fn write_plot<W: Write>(profile: &MetricProfile, q: PlotQuantity, thin: usize, mut w: W) -> std::io::Result<()> {
    writeln!(w, "# t {}", q.name())?;
    for i in thin_indices(profile.rows.len(), thin) {
        let row = &profile.rows[i];
        writeln!(w, "{} {}", num(row.t), num(q.value(row)))?;
    }
    w.flush()
}

pub fn write_curvature_csv<W: Write>(report: &CurvatureReport, mut w: W) -> std::io::Result<()> {
    let rank = report.samples.first().map_or(0, |c| c.ric_factor.len());
    let mut header = vec!["t".to_string(), "ric_tt".to_string()];
    header.extend((1..=rank).map(|i| format!("ric_{i}")));
    header.extend(["R", "R_trace", "max_abs_sectional", "soliton_residual"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for c in &report.samples {
        let mut v = vec![c.t, c.ric_tt];
        v.extend(&c.ric_factor);
        v.extend([c.scalar_r, c.scalar_r_trace, c.sectional.max_abs(), c.soliton_residual]);
        let v: Vec<String> = v.into_iter().map(num).collect();
        writeln!(w, "{}", v.join(","))?;
    }
    w.flush()
}

fn create(path: &Path) -> Result<BufWriter<File>, ExportError> {
    File::create(path).map(BufWriter::new).map_err(|e| ExportError::io(path, e))
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf, ExportError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| ExportError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| ExportError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// Writes the profile in each requested format plus one plot file per
/// quantity; returns the paths written.
pub fn export_profile(
    dir: &Path,
    profile: &MetricProfile,
    formats: &[Format],
    thin: usize,
    plots: &[PlotQuantity],
) -> Result<Vec<PathBuf>, ExportError> {
    std::fs::create_dir_all(dir).map_err(|e| ExportError::io(dir, e))?;
    let mut out = Vec::new();
    for f in formats {
        match f {
            Format::Csv => {
                let p = dir.join("profile.csv");
                write_profile_csv(profile, thin, create(&p)?).map_err(|e| ExportError::io(&p, e))?;
                out.push(p);
            }
            Format::Json => {
                let mut thinned = profile.clone();
                thinned.rows = thin_indices(profile.rows.len(), thin)
                    .into_iter()
                    .map(|i| profile.rows[i].clone())
                    .collect();
                out.push(write_json_file(&dir.join("profile.json"), &thinned)?);
            }
        }
    }
    for &q in plots {
        let p = dir.join(format!("{}_vs_t.dat", q.name()));
        write_plot(profile, q, thin, create(&p)?).map_err(|e| ExportError::io(&p, e))?;
        out.push(p);
    }
    Ok(out)
}
