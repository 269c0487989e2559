use std::io::ErrorKind;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pexrep::backend::Repository;
use pexrep::fixtures::{self, Profile};
use pexrep::report::ValidationResult;
use pexrep::{Error, Pipeline, ReportOptions};

const VALID: u8 = 0;
const INVALID: u8 = 1;
const USAGE: u8 = 2;
const BACKEND: u8 = 3;
const PASSED: u8 = 4;

/// Build small, self-contained packages that reproduce a failing test.
#[derive(Debug, Parser)]
#[command(name = "pexrep", version)]
struct Cli {
    #[command(flatten)]
    env: EnvArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct EnvArgs {
    /// Artifact repository serving public libraries.
    #[arg(long, global = true, env = "PEXREP_REPO")]
    repo: Option<PathBuf>,
    /// Where scratch build workspaces go.
    #[arg(long, global = true, env = "PEXREP_WORKDIR")]
    workdir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Trace a failing test and write a pruned package for it.
    Create(CreateArgs),
    /// Rebuild a package and check that it still fails the same way.
    Validate {
        #[arg(long)]
        package: PathBuf,
    },
    /// Print reduction metrics of a package against its project as JSON.
    Metrics {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        package: PathBuf,
    },
    /// Write a built-in sample project.
    Fixture {
        #[arg(value_enum)]
        kind: FixtureKind,
        #[arg(long)]
        out: PathBuf,
        /// Seed for `random`.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
struct CreateArgs {
    #[arg(long)]
    project: PathBuf,
    /// Fully qualified id of the failing test.
    #[arg(long)]
    test: String,
    /// Output directory; must be absent or empty.
    #[arg(long)]
    out: PathBuf,
    /// Trace statically from the test alone.
    #[arg(long)]
    no_dynamic: bool,
    /// Keep a default build configuration instead of a sliced one.
    #[arg(long)]
    no_config_slice: bool,
    /// Skip the resources the test touches.
    #[arg(long)]
    no_resources: bool,
    /// Leave generated sources out.
    #[arg(long)]
    no_gencode: bool,
    /// Sources and dependencies only.
    #[arg(long, conflicts_with_all = ["no_config_slice", "no_resources", "no_gencode"])]
    bare: bool,
}

impl CreateArgs {
    fn options(&self) -> ReportOptions {
        let base = if self.bare {
            ReportOptions::bare()
        } else {
            ReportOptions::default()
        };
        ReportOptions {
            dynamic: base.dynamic && !self.no_dynamic,
            config_slice: base.config_slice && !self.no_config_slice,
            resources: base.resources && !self.no_resources,
            gencode: base.gencode && !self.no_gencode,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FixtureKind {
    Fig3,
    Fig4,
    Random,
}

fn pipeline(env: &EnvArgs) -> Pipeline {
    let repo = env.repo.clone().unwrap_or_else(|| {
        std::env::var_os("HOME")
            .map(PathBuf::from)
            .unwrap_or_default()
            .join(".pexrep")
            .join("repository")
    });
    let workdir = env.workdir.clone().unwrap_or_else(std::env::temp_dir);
    Pipeline::new(Repository::new(repo), workdir)
}

fn create_code(e: &Error) -> u8 {
    match e {
        Error::UnknownTest(_) | Error::InvalidValue(_) => USAGE,
        Error::Io { source, .. } if source.kind() == ErrorKind::AlreadyExists => USAGE,
        Error::TestPassed(_) => PASSED,
        _ => BACKEND,
    }
}

fn summarize(v: &ValidationResult) -> String {
    let verdict = if v.valid { "valid" } else { "invalid" };
    format!(
        "{verdict}: expected {} got {} ({} ms)",
        v.original, v.reproduced, v.elapsed_ms
    )
}

fn create(p: &Pipeline, args: &CreateArgs) -> u8 {
    match p.create(&args.project, &args.test, &args.out, args.options()) {
        Ok(created) => {
            let reduction = created
                .report
                .metrics
                .source_plus_internal
                .percent_reduction
                * 100.0;
            if let Some(v) = &created.report.validation {
                eprintln!(
                    "{} -> {}: {}, {reduction:.1}% of classes pruned",
                    args.test,
                    args.out.display(),
                    summarize(v)
                );
            }
            if created.valid() {
                VALID
            } else {
                INVALID
            }
        }
        Err(e) => {
            eprintln!("pexrep create: {e}");
            create_code(&e)
        }
    }
}

fn validate(p: &Pipeline, package: &Path) -> u8 {
    match p.validate(package) {
        Ok(v) => {
            eprintln!("{}", summarize(&v));
            if v.valid {
                VALID
            } else {
                INVALID
            }
        }
        Err(e) => {
            eprintln!("pexrep validate: {e}");
            BACKEND
        }
    }
}

fn metrics(p: &Pipeline, project: &Path, package: &Path) -> u8 {
    match p.metrics(project, package) {
        Ok(report) => {
            println!(
                "{}",
                serde_json::to_string_pretty(&report.metrics).expect("metrics serialize")
            );
            match &report.validation {
                Some(v) => eprintln!("{}", summarize(v)),
                None => eprintln!("no recorded failure; reductions reported as 0"),
            }
            VALID
        }
        Err(e) => {
            eprintln!("pexrep metrics: {e}");
            BACKEND
        }
    }
}

fn fixture(kind: FixtureKind, seed: u64, out: &Path) -> u8 {
    let fx = match kind {
        FixtureKind::Fig3 => fixtures::fig3(),
        FixtureKind::Fig4 => fixtures::fig4(),
        FixtureKind::Random => fixtures::random(seed, &Profile::default()),
    };
    match fx.write(out) {
        Ok(()) => {
            eprintln!("wrote {} (failing test {})", out.display(), fx.failing_test);
            VALID
        }
        Err(e) => {
            eprintln!("pexrep fixture: {e}");
            BACKEND
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { VALID });
        }
    };
    let p = pipeline(&cli.env);
    let code = match &cli.command {
        Command::Create(args) => create(&p, args),
        Command::Validate { package } => validate(&p, package),
        Command::Metrics { project, package } => metrics(&p, project, package),
        Command::Fixture { kind, out, seed } => fixture(*kind, *seed, out),
    };
    ExitCode::from(code)
}
