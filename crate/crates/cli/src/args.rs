use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use risemf_core::{PolicyKind, Profile};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "risemf", version, about = "EMF-aware RIS-aided uplink offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Single run per seed.
    Run(Common),
    /// Exposure/delay trade-off over the V grid.
    SweepV(Common),
    /// Exposure versus UE–AP distance at the delay bound.
    SweepRange(Common),
    /// Exposure versus arrival rate at the delay bound.
    SweepArrival(Common),
    /// Invariant checks and a short smoke run.
    Validate(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (TOML); keys override the profile defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Comma-separated seed list.
    #[arg(long)]
    seeds: Option<String>,
    /// Dotted-key override, e.g. `lyapunov.v=1e9`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    profile: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Run,
    SweepV,
    SweepRange,
    SweepArrival,
    Validate,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Run => "run",
            CommandKind::SweepV => "sweep-v",
            CommandKind::SweepRange => "sweep-range",
            CommandKind::SweepArrival => "sweep-arrival",
            CommandKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// `None` when `--seeds` was not given.
    pub seeds: Option<Vec<u64>>,
    pub overrides: Vec<String>,
    pub policy: Option<PolicyKind>,
    pub profile: Option<Profile>,
}

/// Parses argv, program name included. Help and version requests surface as
/// [`CliError::Clap`].
pub fn parse_args<I, T>(argv: I) -> Result<ExperimentSpec>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv)?;
    let (command, c) = match cli.command {
        Command::Run(c) => (CommandKind::Run, c),
        Command::SweepV(c) => (CommandKind::SweepV, c),
        Command::SweepRange(c) => (CommandKind::SweepRange, c),
        Command::SweepArrival(c) => (CommandKind::SweepArrival, c),
        Command::Validate(c) => (CommandKind::Validate, c),
    };
    let seeds = c.seeds.as_deref().map(parse_seeds).transpose()?;
    let policy = c
        .policy
        .as_deref()
        .map(|p| p.parse::<PolicyKind>().map_err(|e| CliError::usage(format!("--policy: {e}"))))
        .transpose()?;
    let profile = c
        .profile
        .as_deref()
        .map(|p| p.parse::<Profile>().map_err(|e| CliError::usage(format!("--profile: {e}"))))
        .transpose()?;
    for o in &c.overrides {
        crate::settings::split_override(o)?;
    }
    Ok(ExperimentSpec {
        command,
        config_path: c.config,
        output_dir: c.out,
        seeds,
        overrides: c.overrides,
        policy,
        profile,
    })
}

/// `"1, 2,3"` → `[1, 2, 3]`. An empty list is an error.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let seeds = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| CliError::usage(format!("--seeds: `{t}` is not a seed"))))
        .collect::<Result<Vec<_>>>()?;
    if seeds.is_empty() {
        return Err(CliError::usage("--seeds: seed list is empty"));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<ExperimentSpec> {
        parse_args(std::iter::once("risemf").chain(args.iter().copied()))
    }

    #[test]
    fn run_with_config_and_seed() {
        let s = parse(&["run", "--config", "s.toml", "--seeds", "1"]).unwrap();
        assert_eq!(s.command, CommandKind::Run);
        assert_eq!(s.config_path, Some(PathBuf::from("s.toml")));
        assert_eq!(s.seeds, Some(vec![1]));
        assert_eq!(s.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn repeated_overrides_and_profile() {
        let s = parse(&[
            "sweep-v", "--set", "lyapunov.v=1e9", "--set", "run.horizon=500", "--profile", "paper", "--policy",
            "boa-no-ris",
        ])
        .unwrap();
        assert_eq!(s.overrides.len(), 2);
        assert_eq!(s.profile, Some(Profile::Paper));
        assert_eq!(s.policy, Some(PolicyKind::BoaNoRis));
    }

    #[test]
    fn rejects_unknown_flags_and_bad_values() {
        assert!(matches!(parse(&["run", "--bogus"]), Err(CliError::Clap(_))));
        assert!(matches!(parse(&["run", "--seeds", ""]), Err(CliError::Usage(_))));
        assert!(matches!(parse(&["run", "--seeds", "1,x"]), Err(CliError::Usage(_))));
        assert!(matches!(parse(&["run", "--set", "novalue"]), Err(CliError::Usage(_))));
        assert!(matches!(parse(&["run", "--profile", "lab"]), Err(CliError::Usage(_))));
        assert!(matches!(parse(&["frobnicate"]), Err(CliError::Clap(_))));
    }
}
