use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use rtj::apply;
use rtj::report::{emit_report, human_summary};
use rtj::runner::RunnerConfig;
use rtj::{analyze, AnalyzeOptions};
use rtj_core::refactor::RefactorPolicy;

#[derive(Parser)]
#[command(name = "rtj", version, about = "Finds passing tests whose assertions never run")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Instrument, run and analyze the tests of a Cargo package.
    Analyze(AnalyzeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Refactor {
    None,
    Todo,
    FixMissedFail,
    All,
}

impl Refactor {
    fn policy(self) -> RefactorPolicy {
        match self {
            Refactor::None => RefactorPolicy::NONE,
            Refactor::Todo => RefactorPolicy { todo_comments: true, fix_missed_fail: false },
            Refactor::FixMissedFail => RefactorPolicy { todo_comments: false, fix_missed_fail: true },
            Refactor::All => RefactorPolicy::ALL,
        }
    }
}

#[derive(clap::Args)]
struct AnalyzeArgs {
    /// Package root (the directory holding Cargo.toml).
    project: PathBuf,
    /// Report file.
    #[arg(long, default_value = "rtj-report.json")]
    out: PathBuf,
    /// Comma-separated analyzer names; default all.
    #[arg(long, value_delimiter = ',')]
    analyzers: Option<Vec<String>>,
    /// Only tests whose qualified name matches this `*` pattern.
    #[arg(long)]
    tests: Option<String>,
    /// Per-test timeout in seconds.
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    /// Which refactorings to propose.
    #[arg(long, value_enum, default_value_t = Refactor::All)]
    refactor: Refactor,
    /// Write the proposed edits into the project instead of printing a diff.
    #[arg(long)]
    apply: bool,
    /// Keep the instrumented copy under <project>/target/rtj/project.
    #[arg(long)]
    keep_instrumented: bool,
    /// Parallel test processes; default one per CPU.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Analyze(args) = cli.command;
    match run(args) {
        Ok(rotten) => ExitCode::from(u8::from(rotten)),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(args: AnalyzeArgs) -> Result<bool, Box<dyn std::error::Error>> {
    let mut runner = RunnerConfig { timeout: Duration::from_secs(args.timeout.max(1)), ..RunnerConfig::default() };
    if let Some(jobs) = args.jobs {
        runner.jobs = jobs.max(1);
    }
    let opts = AnalyzeOptions {
        analyzers: args.analyzers,
        tests: args.tests,
        policy: args.refactor.policy(),
        runner,
        keep_instrumented: args.keep_instrumented,
        ..AnalyzeOptions::new(&args.project)
    };
    let analysis = analyze(&opts)?;
    for w in &analysis.warnings {
        eprintln!("warning: {w}");
    }
    emit_report(&analysis.report, &args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    print!("{}", human_summary(&analysis.report));
    if let Some(copy) = &analysis.copy {
        eprintln!("instrumented copy kept at {}", copy.display());
    }
    let root = &analysis.project.package.root;
    let plan = apply::plan(root, &analysis.output.refactors)?;
    for (i, e) in &plan.skipped {
        eprintln!("warning: proposal for {} skipped: {e}", analysis.output.refactors[*i].test);
    }
    if args.apply {
        apply::write(root, &plan)?;
        for file in plan.files.keys() {
            println!("rewrote {file}");
        }
    } else {
        print!("{}", apply::unified_diff(&plan));
    }
    Ok(analysis.report.has_rotten())
}
