use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, ValueEnum};
use solitonforge_core::cli::{run, Command};
use solitonforge_core::config::{load_config, Format};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CommandArg {
    Solve,
    Verify,
    Curvature,
    Oracle,
    RicciFlat,
    Sweep,
}

impl From<CommandArg> for Command {
    fn from(c: CommandArg) -> Self {
        match c {
            CommandArg::Solve => Command::Solve,
            CommandArg::Verify => Command::Verify,
            CommandArg::Curvature => Command::Curvature,
            CommandArg::Oracle => Command::Oracle,
            CommandArg::RicciFlat => Command::RicciFlat,
            CommandArg::Sweep => Command::Sweep,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

/// Construct and verify steady gradient Ricci solitons on multiply warped products.
#[derive(Debug, Parser)]
#[command(name = "solitonforge", version)]
struct Args {
    #[arg(value_enum)]
    command: CommandArg,

    /// JSON run configuration
    #[arg(long, value_name = "PATH")]
    config: PathBuf,

    /// Output directory
    #[arg(long, value_name = "DIR", env = "SOLITONFORGE_OUT", default_value = "solitonforge-out")]
    out: PathBuf,

    /// Export format (replaces the formats listed in the config)
    #[arg(long, value_enum)]
    format: Option<FormatArg>,

    /// Relative integration tolerance
    #[arg(long)]
    tol: Option<f64>,

    /// Seed coefficient along the fastest unstable direction
    #[arg(long, allow_hyphen_values = true)]
    seed_eps0: Option<f64>,

    /// Seed coefficient of factor i >= 2, as i=value (repeatable)
    #[arg(long, value_name = "I=VALUE", value_parser = parse_eps)]
    seed_eps: Vec<(usize, f64)>,
}

fn parse_eps(s: &str) -> Result<(usize, f64), String> {
    let (i, v) = s.split_once('=').ok_or_else(|| format!("expected i=value, got `{s}`"))?;
    let i = i.trim().parse().map_err(|e| format!("factor index: {e}"))?;
    let v = v.trim().parse().map_err(|e| format!("value: {e}"))?;
    Ok((i, v))
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    let args = Args::parse();
    let mut cfg = load_config(&args.config).map_err(|e| {
        anyhow!("[{}] {e}", solitonforge_core::Error::from(e.clone()).code())
    })?;
    if let Some(f) = args.format {
        cfg.output.formats = vec![match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }];
    }
    if let Some(tol) = args.tol {
        cfg.set_tol(tol);
    }
    if let Some(eps0) = args.seed_eps0 {
        cfg.seed.eps0 = eps0;
    }
    for (i, v) in args.seed_eps {
        cfg.set_eps(i, v).context("--seed-eps")?;
    }
    let out = run(args.command.into(), &cfg, &args.out).map_err(|e| anyhow!("[{}] {e}", e.code()))?;
    print!("{}", out.summary);
    println!("wrote {} files to {}", out.artifacts.len(), args.out.display());
    Ok(ExitCode::from(out.exit_code as u8))
}
