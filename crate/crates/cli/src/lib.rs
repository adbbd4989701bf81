//! Command-line driver for gengeom: scenario registry access, command
//! dispatch, result files with manifests, and the acceptance suite.

pub mod acceptance;
pub mod commands;
pub mod error;
pub mod flags;
pub mod output;
pub mod settings;

use std::io::Write;
use std::time::{Instant, SystemTime};

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};
use output::{Artifacts, RunManifest};
pub use settings::Settings;

#[derive(Debug, Parser)]
#[command(name = "gengeom", version, about = "Generalized pseudo-Riemannian geometry on regularized metric families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Decide nondegeneracy of the metric determinant over the region.
    CheckMetric(Settings),
    /// Negative-eigenvalue count per eps and its stability.
    Index(Settings),
    /// Nonzero Christoffel symbols as expressions.
    Christoffel(Settings),
    /// Integrate the geodesic family over the eps grid.
    Geodesic(Settings),
    /// Riemann, Ricci, scalar and Einstein curvature at a point, with identity checks.
    Curvature(Settings),
    /// Limit curves of a geodesic family and comparison with closed forms.
    Shadow(Settings),
    /// Growth order and strict-nonzero verdict of a scalar net.
    Classify(Settings),
    /// Names of the built-in scenarios.
    ListScenarios(Settings),
    /// Run the acceptance criteria and print PASS/FAIL per item.
    Acceptance(Settings),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::CheckMetric(_) => "check-metric",
            Command::Index(_) => "index",
            Command::Christoffel(_) => "christoffel",
            Command::Geodesic(_) => "geodesic",
            Command::Curvature(_) => "curvature",
            Command::Shadow(_) => "shadow",
            Command::Classify(_) => "classify",
            Command::ListScenarios(_) => "list-scenarios",
            Command::Acceptance(_) => "acceptance",
        }
    }

    pub fn settings(&self) -> &Settings {
        match self {
            Command::CheckMetric(s)
            | Command::Index(s)
            | Command::Christoffel(s)
            | Command::Geodesic(s)
            | Command::Curvature(s)
            | Command::Shadow(s)
            | Command::Classify(s)
            | Command::ListScenarios(s)
            | Command::Acceptance(s) => s,
        }
    }
}

/// Execute one command with fully resolved settings.
pub fn execute(command: &str, cfg: &Settings) -> CliResult<Artifacts> {
    match command {
        "check-metric" => commands::check_metric(cfg),
        "index" => commands::index(cfg),
        "christoffel" => commands::christoffel(cfg),
        "geodesic" => commands::geodesic(cfg),
        "curvature" => commands::curvature(cfg),
        "shadow" => commands::shadow(cfg),
        "classify" => commands::classify(cfg),
        "list-scenarios" => Ok(commands::list_scenarios()),
        "acceptance" => run_acceptance(cfg),
        other => Err(CliError::Validation(format!("unknown command '{other}'"))),
    }
}

fn run_acceptance(cfg: &Settings) -> CliResult<Artifacts> {
    let only = match &cfg.only {
        Some(s) => flags::parse_ids(s).map_err(CliError::Validation)?,
        None => Vec::new(),
    };
    let results = acceptance::run(&only);
    let mut art = Artifacts::default();
    let mut csv = output::Csv::new(&["id", "name", "passed", "seconds", "budget_seconds"]);
    for r in &results {
        csv.row(&[r.id.to_string(), r.name.to_string(), r.passed.to_string(), format!("{:.3}", r.seconds), output::num(r.budget_seconds)]);
    }
    art.file("result.csv", csv.finish());
    art.json("summary.json", &results);
    art.stdout = results.iter().map(|r| format!("{r}\n")).collect();
    let failed: Vec<String> = results.iter().filter(|r| !r.passed).map(|r| r.id.to_string()).collect();
    if !failed.is_empty() {
        return Err(CliError::Acceptance(format!(
            "criteria failed: {}\n{}",
            failed.join(", "),
            art.stdout.trim_end()
        )));
    }
    Ok(art)
}

/// Parse arguments, run, write artifacts. Returns the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = write!(out, "{e}");
            return 0;
        }
        Err(e) => {
            let ce = CliError::Validation(e.to_string().trim_end().to_string());
            let _ = writeln!(err, "{}", ce.to_json());
            return ce.exit_code();
        }
    };
    let name = cli.command.name();
    let started = SystemTime::now();
    let clock = Instant::now();
    let result = cli
        .command
        .settings()
        .clone()
        .resolve()
        .and_then(|cfg| execute(name, &cfg).map(|art| (cfg, art)));
    match result {
        Ok((cfg, art)) => {
            if let Some(dir) = cfg.out_dir() {
                let manifest = RunManifest::new(name, &cfg, started, clock.elapsed(), &art);
                if let Err(e) = output::write_all(dir, &art, &manifest) {
                    let _ = writeln!(err, "{}", e.to_json());
                    return e.exit_code();
                }
            }
            let _ = write!(out, "{}", art.stdout);
            0
        }
        Err(e) => {
            if let CliError::Acceptance(msg) = &e {
                let _ = writeln!(out, "{}", msg.split_once('\n').map_or("", |(_, lines)| lines));
            }
            let _ = writeln!(err, "{}", e.to_json());
            e.exit_code()
        }
    }
}
