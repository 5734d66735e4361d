use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qg::commands::run;
use qg::config::{parse_assignment, read_pairs, RunConfig};
use qg::error::{CliError, Result};
use qg::report::{merge, parse_report};

#[derive(Parser)]
#[command(name = "qg", version, about = "Legendre surfaces, conformal Gauss maps and their spectral deformations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a sampled surface
    Generate(Common),
    /// Contact lift into the space of lines
    Lift(Common),
    /// Conformal Gauss map
    Gauss(Common),
    /// Willmore energy and density
    Energy(Common),
    /// Tension field of the Gauss map
    Tension(Common),
    /// Run a check suite; exit status 0 iff every threshold is met
    Check {
        /// lift-invariants, pq-identity, conformality, orthogonality, tension-lemma,
        /// blaschke-roundtrip, invariance, flatness, deform, dualize, descent
        suite: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Spectral deformation of a harmonic Gauss map
    Deform(Common),
    /// Dual harmonic map in the other real form
    Dualize(Common),
    /// Backtracked gradient descent on the Willmore energy
    Descent(Common),
    /// Aggregate check reports
    Merge {
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Options shared by every pipeline command.  Values from `--config` are
/// applied first, then the flags below, then `--set` in order.
#[derive(Args)]
struct Common {
    /// Plain-text file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    /// torus, ellipsoid, sphere, quadric_graph, perturbed_graph, revolution
    #[arg(long)]
    kind: Option<String>,
    /// Surface JSON to use instead of a generator
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    grid_nu: Option<String>,
    #[arg(long)]
    grid_nv: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_re: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_im: Option<String>,
    /// Any configuration key, e.g. `--set R=4`
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    set: Vec<String>,
}

impl Common {
    fn config(self, command: &str, suite: Option<String>) -> Result<RunConfig> {
        let mut pairs = match &self.config {
            Some(p) => read_pairs(p)?,
            None => Vec::new(),
        };
        let path = |p: PathBuf| p.display().to_string();
        let flags = [
            ("kind", self.kind),
            ("input", self.input.map(path)),
            ("grid-nu", self.grid_nu),
            ("grid-nv", self.grid_nv),
            ("tolerance", self.tolerance),
            ("seed", self.seed),
            ("out", self.out.map(path)),
            ("lambda-re", self.lambda_re),
            ("lambda-im", self.lambda_im),
            ("suite", suite),
        ];
        pairs.extend(flags.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        for s in &self.set {
            pairs.push(parse_assignment(s).map_err(CliError::Usage)?);
        }
        RunConfig::from_pairs(command, pairs)
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|source| CliError::Io { path: p.to_path_buf(), source }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    let (name, common, suite) = match cli.command {
        Command::Merge { reports, out } => {
            let mut parsed = Vec::new();
            for p in &reports {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
                parsed.push(parse_report(p, &text)?);
            }
            let summary = merge(parsed)?;
            emit(out.as_deref(), &serde_json::to_string_pretty(&summary).expect("summary serializes"))?;
            return Ok(summary.pass);
        }
        Command::Generate(c) => ("generate", c, None),
        Command::Lift(c) => ("lift", c, None),
        Command::Gauss(c) => ("gauss", c, None),
        Command::Energy(c) => ("energy", c, None),
        Command::Tension(c) => ("tension", c, None),
        Command::Check { suite, common } => ("check", common, suite),
        Command::Deform(c) => ("deform", c, None),
        Command::Dualize(c) => ("dualize", c, None),
        Command::Descent(c) => ("descent", c, None),
    };
    let cfg = common.config(name, suite)?;
    let outcome = run(&cfg)?;
    emit(cfg.out.as_deref(), &outcome.json)?;
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("qg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
