//! Argument parsing and dispatch.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checks;
use crate::config::{self, sha256_hex, LoadedConfig};
use crate::experiments::{self, ensure_dir, SimulateOpts};
use crate::report::{timed, unix_now, write_csv, Manifest, Report};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "ksns", version, about = "Blowup laboratory for Keller-Segel coupled to Navier-Stokes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form checks of the stationary profile.
    Profile {
        #[command(subcommand)]
        action: ProfileAction,
    },
    /// Exactness checks of the linearized operators and the semigroup.
    Linop {
        #[command(subcommand)]
        action: LinopAction,
    },
    /// Unstable spectrum of the linearized operator.
    Spectrum(SpectrumArgs),
    /// Run a configuration file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Bisection on the unstable coefficients of a radial configuration.
    Shoot {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Regenerate a named experiment with its built-in configuration.
    Reproduce {
        target: Target,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ProfileAction {
    Check {
        #[arg(long, default_value_t = 128)]
        n: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum LinopAction {
    Check {
        /// One sector; all of 0, 1, 2 when absent.
        #[arg(long)]
        ell: Option<usize>,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
}

#[derive(Debug, Args)]
#[command(args_conflicts_with_subcommands = true)]
pub struct SpectrumArgs {
    #[command(subcommand)]
    pub modified: Option<SpectrumSub>,
    #[arg(long, default_value_t = 2)]
    pub ell_max: usize,
    #[arg(long, default_value_t = 192)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SpectrumSub {
    /// Modified unstable projections with cutoff radius `R`.
    Modified {
        #[arg(long = "R", num_args = 1.., required = true)]
        radius: Vec<f64>,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Profile,
    Spectrum,
    RadialStability,
    AppendixB,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Profile => "profile",
            Target::Spectrum => "spectrum",
            Target::RadialStability => "radial-stability",
            Target::AppendixB => "appendix-b",
        }
    }
}

fn print(r: &Report) {
    print!("{}", r.render());
}

fn finish(reports: Vec<Report>, manifest: Option<(&Path, String, String, f64)>) -> Result<(), CliError> {
    for r in &reports {
        print(r);
    }
    if let Some((dir, command, hash, started)) = manifest {
        let m = Manifest { command, config_sha256: hash, started, finished: unix_now(), reports: reports.clone() };
        m.write(dir)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.title.as_str()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Tolerance(failed.join(", ")))
    }
}

fn spectrum_csv(path: &Path, rows: &[checks::SpectrumRow]) -> Result<(), CliError> {
    use crate::report::fmt_f64;
    write_csv(
        path,
        checks::SPECTRUM_HEADER,
        rows.iter().map(|r| {
            vec![
                r.ell.to_string(),
                fmt_f64(r.lambda.re),
                fmt_f64(r.lambda.im),
                u8::from(r.refinement_stable).to_string(),
                u8::from(r.unstable).to_string(),
            ]
        }),
    )
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let started = unix_now();
    match cli.command {
        Command::Profile { action: ProfileAction::Check { n } } => {
            finish(vec![timed(|| checks::profile_report(n, 0))?], None)
        }
        Command::Linop { action: LinopAction::Check { ell, n, k } } => {
            let ells = ell.map_or_else(|| vec![0, 1, 2], |l| vec![l]);
            let reports = vec![
                timed(|| checks::l0_report(n, &ells, k))?,
                timed(|| checks::semigroup_report(n, &ells))?,
                timed(|| checks::resolvent_report(n, &ells))?,
            ];
            finish(reports, None)
        }
        Command::Spectrum(a) => match a.modified {
            Some(SpectrumSub::Modified { radius, n, k, seed }) => {
                finish(vec![timed(|| checks::modified_report(&radius, n, k, seed))?], None)
            }
            None => {
                let mut rows = Vec::new();
                let rep = timed(|| {
                    let (rep, r) = checks::spectrum_report(a.ell_max, a.n, a.k)?;
                    rows = r;
                    Ok(rep)
                })?;
                if let Some(p) = &a.out {
                    spectrum_csv(p, &rows)?;
                }
                finish(vec![rep], None)
            }
        },
        Command::Simulate { config, out_dir, snapshot_every } => {
            let cfg = config::load(&config)?;
            ensure_dir(&out_dir)?;
            let opts = SimulateOpts { out_dir: out_dir.clone(), snapshot_every };
            let rep = timed(|| experiments::simulate(&cfg.run, &opts))?;
            finish(vec![rep], Some((&out_dir, format!("simulate {}", config.display()), cfg.hash(), started)))
        }
        Command::Shoot { config, out_dir } => {
            let cfg = config::load(&config)?;
            ensure_dir(&out_dir)?;
            let rep = timed(|| experiments::shoot(&cfg.run, &out_dir))?;
            finish(vec![rep], Some((&out_dir, format!("shoot {}", config.display()), cfg.hash(), started)))
        }
        Command::Reproduce { target, out_dir } => {
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("results").join(target.name()));
            ensure_dir(&dir)?;
            reproduce(target, &dir, started)
        }
    }
}

fn builtin(text: &str) -> Result<LoadedConfig, CliError> {
    Ok(LoadedConfig { run: config::parse(text)?, text: text.to_string() })
}

/// Runs a `reproduce` target into `dir`.
pub fn reproduce(target: Target, dir: &Path, started: f64) -> Result<(), CliError> {
    let command = format!("reproduce {}", target.name());
    match target {
        Target::Profile => {
            let r = timed(|| checks::profile_report(128, 0))?;
            let hash = sha256_hex(b"profile n=128 seed=0");
            finish(vec![r], Some((dir, command, hash, started)))
        }
        Target::Spectrum => {
            let mut rows = Vec::new();
            let r = timed(|| {
                let (rep, r) = checks::spectrum_report(2, 192, 2)?;
                rows = r;
                Ok(rep)
            })?;
            spectrum_csv(&dir.join("spectrum.csv"), &rows)?;
            let m = timed(|| checks::modified_report(&[5.0, 10.0, 20.0, 40.0], 128, 2, 0))?;
            let hash = sha256_hex(b"spectrum ell_max=2 n=192 k=2; modified R=5,10,20,40 n=128");
            finish(vec![r, m], Some((dir, command, hash, started)))
        }
        Target::RadialStability => {
            let cfg = builtin(config::RADIAL_STABILITY)?;
            // a fresh shoot_report.csv per reproduction
            let _ = std::fs::remove_file(dir.join("shoot_report.csv"));
            let r = timed(|| experiments::radial_stability(&cfg.run, dir))?;
            finish(vec![r], Some((dir, command, cfg.hash(), started)))
        }
        Target::AppendixB => {
            let cfg = builtin(config::APPENDIX_B)?;
            let r = timed(|| experiments::appendix_b(&cfg.run, dir))?;
            finish(vec![r], Some((dir, command, cfg.hash(), started)))
        }
    }
}

/// Parses arguments, runs, and maps the outcome to an exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ksns: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_with_2() {
        assert_eq!(main_with(["ksns", "frobnicate"]), 2);
        assert_eq!(main_with(["ksns", "profile", "check", "--n", "x"]), 2);
        assert_eq!(main_with(["ksns", "simulate", "--config", "/nonexistent/cfg.toml"]), 2);
    }

    #[test]
    fn parses_spectrum_forms() {
        let c = Cli::try_parse_from(["ksns", "spectrum", "--ell-max", "1", "--n", "64", "--k", "2"]).unwrap();
        assert!(matches!(c.command, Command::Spectrum(SpectrumArgs { ell_max: 1, n: 64, modified: None, .. })));
        let c = Cli::try_parse_from(["ksns", "spectrum", "modified", "--R", "5", "10"]).unwrap();
        match c.command {
            Command::Spectrum(SpectrumArgs { modified: Some(SpectrumSub::Modified { radius, .. }), .. }) => {
                assert_eq!(radius, vec![5.0, 10.0])
            }
            other => panic!("{other:?}"),
        }
        let c = Cli::try_parse_from(["ksns", "reproduce", "appendix-b"]).unwrap();
        assert!(matches!(c.command, Command::Reproduce { target: Target::AppendixB, .. }));
    }
}
