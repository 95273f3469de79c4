mod report;
mod run;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use report::{Artifacts, Checks, Manifest, CHECKS, MANIFEST, REPORT};
use scenario::Scenario;

/// Runs mockfield scenarios and reports on their checks.
///
/// Exit status: 0 when every check passes, 2 when a check exceeds its
/// tolerance, 1 for configuration or runtime errors.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Multiplies every tolerance, e.g. to loosen desk runs or tighten CI.
    #[arg(long, global = true)]
    tolerance_scale: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario file and write its artifacts.
    Run {
        config: PathBuf,
        /// Directory that relative output directories are resolved against.
        #[arg(long, env = "MOCKFIELD_OUTPUT_ROOT")]
        output_root: Option<PathBuf>,
    },
    /// Print the report of a finished run.
    Report { dir: PathBuf },
    /// Parse a scenario and build its inputs without running it.
    Validate { config: PathBuf },
}

fn scale_or_default(scale: Option<f64>) -> Result<Option<f64>> {
    match scale {
        Some(s) if !(s > 0.0 && s.is_finite()) => bail!("tolerance scale must be positive, got {s}"),
        s => Ok(s),
    }
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn output_dir(sc: &Scenario, config: &Path, root: Option<&Path>) -> PathBuf {
    let rel = sc.output_dir.clone().unwrap_or_else(|| {
        let stem = config.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        PathBuf::from("runs").join(stem)
    });
    match root {
        Some(r) if rel.is_relative() => r.join(rel),
        _ => rel,
    }
}

fn run_scenario(config: &Path, root: Option<&Path>, scale: Option<f64>) -> Result<bool> {
    let scale = scale.unwrap_or(1.0);
    let (sc, src) = Scenario::load(config)?;
    let prepared = run::prepare(&sc, &base_dir(config))?;
    let mut out = Artifacts::new(output_dir(&sc, config, root))?;

    let manifest = |out: &Artifacts, status: String, checks: &[report::Check]| Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: sc.kind,
        seed: sc.seed,
        status,
        tolerance_scale: scale,
        tolerances: checks.iter().map(|c| (c.name.clone(), c.tolerance)).collect(),
        artifacts: out.names(),
        config: sc.clone(),
        config_source: src.clone(),
    };

    let checks = match run::execute(prepared, &mut out) {
        Ok(c) => c,
        Err(e) => {
            let m = manifest(&out, format!("aborted: {e:#}"), &[]);
            out.write_json(MANIFEST, &m)?;
            return Err(e);
        }
    };
    out.write_json(CHECKS, &Checks { kind: sc.kind, checks: checks.clone() })?;
    let text = report::render(sc.kind, &checks, scale);
    out.write(REPORT, text.as_bytes())?;
    let m = manifest(&out, "complete".into(), &checks);
    out.write_json(MANIFEST, &m)?;
    print!("{text}");
    eprintln!("artifacts in {}", out.dir().display());
    Ok(checks.iter().all(|c| c.passes(scale)))
}

fn dispatch(cli: Cli) -> Result<bool> {
    let scale = scale_or_default(cli.tolerance_scale)?;
    match cli.command {
        Command::Run { config, output_root } => run_scenario(&config, output_root.as_deref(), scale),
        Command::Report { dir } => {
            let (text, pass) = report::emit(&dir, scale)?;
            print!("{text}");
            Ok(pass)
        }
        Command::Validate { config } => {
            let (sc, _) = Scenario::load(&config)?;
            run::prepare(&sc, &base_dir(&config)).with_context(|| format!("validating {}", config.display()))?;
            println!("{}: valid {} scenario", config.display(), sc.kind.as_str());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // Clap reports usage errors with status 2, which is reserved for failed checks.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
