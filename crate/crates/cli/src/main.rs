//! `sublab`: runs the checking suites over a parameter profile and writes a
//! machine-readable report. Exit code 0 when every check passes, 1 when
//! some check fails and 2 on usage, profile or input errors.

mod profile;
mod report;
mod suites;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use profile::Profile;
use report::{config_hash, Format, Report};
use suites::Run;

#[derive(Parser, Debug)]
#[command(name = "sublab", version, about = "Checks cover submeasures, thinness and avoidance certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML profile; the built-in one is used when absent.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Report path; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Node budget of the cover search.
    #[arg(long, global = true)]
    budget: Option<u64>,
    #[arg(long, global = true)]
    depth: Option<u32>,
    /// Instances per suite.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Class file (JSON lines) replacing the profile's.
    #[arg(long, global = true)]
    class: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Submeasure axioms on random pairs of sets.
    VerifyAxioms,
    /// Avoidance walk, counting, transversal and main-estimate suites.
    Certificates,
    /// Stabilized subsequences of disjoint sequences and their witnesses.
    Exhaustivity,
    /// Cover values of one set or of random sets.
    Eval {
        /// Set as `depth:hex`.
        #[arg(long)]
        set: Option<String>,
        /// Use the explicit tower class of this level.
        #[arg(long)]
        level: Option<u32>,
    },
}

impl Command {
    fn echo(&self) -> String {
        match self {
            Command::VerifyAxioms => "verify-axioms".into(),
            Command::Certificates => "certificates".into(),
            Command::Exhaustivity => "exhaustivity".into(),
            Command::Eval { set, level } => {
                let mut s = String::from("eval");
                if let Some(b) = set {
                    s += &format!(" --set {b}");
                }
                if let Some(k) = level {
                    s += &format!(" --level {k}");
                }
                s
            }
        }
    }
}

/// Everything a run depends on; hashed into the report.
#[derive(Serialize)]
struct RunConfig<'a> {
    command: &'a Command,
    seed: u64,
    profile: &'a Profile,
}

fn run(cli: &Cli) -> Result<Report> {
    let start = Instant::now();
    let mut profile = Profile::load(cli.profile.as_deref())?;
    if let Some(d) = cli.depth {
        profile.depth = d;
    }
    if let Some(b) = cli.budget {
        profile.budget = b;
    }
    if let Some(s) = cli.samples {
        profile.samples = s;
    }
    if let Some(c) = &cli.class {
        profile.class = Some(c.clone());
    }
    profile.validate()?;
    let hash = config_hash(&RunConfig { command: &cli.command, seed: cli.seed, profile: &profile })?;
    let mut r = Run::new(&profile, cli.seed)?;
    let (records, witnesses) = match &cli.command {
        Command::VerifyAxioms => (r.verify_axioms()?, None),
        Command::Certificates => (r.certificates()?, None),
        Command::Exhaustivity => {
            let (rec, rows) = r.exhaustivity()?;
            (rec, Some(rows))
        }
        Command::Eval { set, level } => (r.eval(set.as_deref(), *level)?, None),
    };
    let mut echo = format!("sublab {} --seed {}", cli.command.echo(), cli.seed);
    if let Some(p) = &cli.profile {
        echo += &format!(" --profile {}", p.display());
    }
    Ok(Report::new(echo, hash, records, witnesses, start.elapsed().as_millis()))
}

fn emit(cli: &Cli, report: &Report) -> Result<()> {
    match &cli.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
            let mut w = BufWriter::new(f);
            report.write(&mut w, cli.format)?;
            w.flush()?;
        }
        None => report.write(io::stdout().lock(), cli.format)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = emit(&cli, &report) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let failed = report.records.iter().filter(|r| !r.passed).count();
    if report.passed {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failed} of {} checks failed", report.records.len());
        ExitCode::from(1)
    }
}
