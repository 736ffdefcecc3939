//! Command-line surface. Exit codes: 0 ok, 1 problem-level failure, 2 usage
//! or input error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::equiv::check_formulations;
use crate::gateway::BackendKind;
use crate::harness::{self, Metric, RunConfig};
use crate::model::{self, Formulation};
use crate::solver::{lower, to_lp_string, SolveLimits, SolverKind, Status};

#[derive(Debug, Parser)]
#[command(name = "autoformulate", version, about = "Tree-search autoformulation of optimization problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search every problem of a dataset and write one run record each.
    Run {
        #[arg(long)]
        dataset: PathBuf,
        /// TOML or JSON with `search`, `gateway` and `backend` sections.
        #[arg(long)]
        config: Option<PathBuf>,
        /// `scripted[:FIXTURES]`, `expert[:POOLS]` or `http`; overrides the config.
        #[arg(long)]
        backend: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Metrics table over a directory of run records.
    Score {
        #[arg(long)]
        runs: PathBuf,
        /// pass@N, best-of-N, accuracy or entropy.
        #[arg(long)]
        metric: Metric,
        #[arg(long)]
        tsv: bool,
    },
    /// Print the search tree of a run record.
    Inspect {
        #[arg(long)]
        run: PathBuf,
    },
    /// Trivial-equivalence checks.
    Equiv {
        #[command(subcommand)]
        command: EquivCommand,
    },
    /// Lower a formulation; optionally solve it or print it in LP format.
    Lower {
        #[arg(long)]
        formulation: PathBuf,
        #[arg(long)]
        solve: bool,
        #[arg(long)]
        lp: bool,
        #[arg(long, value_enum, default_value = "builtin")]
        solver: SolverChoice,
    },
}

#[derive(Debug, Subcommand)]
pub enum EquivCommand {
    /// Compare two formulation files component by component.
    Check { a: PathBuf, b: PathBuf },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum SolverChoice {
    Builtin,
    Microlp,
}

impl From<SolverChoice> for SolverKind {
    fn from(c: SolverChoice) -> Self {
        match c {
            SolverChoice::Builtin => SolverKind::Builtin,
            SolverChoice::Microlp => SolverKind::Microlp,
        }
    }
}

/// A failure and the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure { code: 2, message: e.to_string() }
}

fn problem(e: impl std::fmt::Display) -> Failure {
    Failure { code: 1, message: e.to_string() }
}

/// Parses `args` (program name first) and runs the command, writing normal
/// output to `out`.
pub fn run_with(args: impl IntoIterator<Item = String>, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { 2 } else { 0 };
        Failure { code, message: e.to_string() }
    })?;
    execute(cli.command, out)
}

pub fn main_exit() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let mut stdout = std::io::stdout().lock();
    match run_with(std::env::args(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) if f.code == 0 => {
            print!("{}", f.message);
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message.trim_end());
            ExitCode::from(f.code)
        }
    }
}

fn read_formulation(path: &Path) -> Result<Formulation, Failure> {
    let bytes = std::fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    model::deserialize(&bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn emit(out: &mut dyn std::io::Write, text: &str) -> Result<(), Failure> {
    out.write_all(text.as_bytes()).map_err(problem)
}

fn apply_backend_flag(cfg: &mut RunConfig, flag: &str) -> Result<(), Failure> {
    let (kind, path) = match flag.split_once(':') {
        Some((k, p)) => (k, Some(PathBuf::from(p))),
        None => (flag, None),
    };
    cfg.backend.kind = match kind {
        "scripted" => BackendKind::Scripted,
        "expert" => BackendKind::Expert,
        "http" => BackendKind::Http,
        other => return Err(usage(format!("unknown backend `{other}`"))),
    };
    match (cfg.backend.kind, path) {
        (BackendKind::Scripted, Some(p)) => cfg.backend.fixtures = Some(p),
        (BackendKind::Expert, Some(p)) => cfg.backend.pools = Some(p),
        (BackendKind::Http, Some(p)) => cfg.backend.endpoint = p.display().to_string(),
        (_, None) => {}
    }
    Ok(())
}

fn execute(command: Command, out: &mut dyn std::io::Write) -> Result<(), Failure> {
    match command {
        Command::Run { dataset, config, backend, out: dir, workers } => {
            let problems = harness::load_dataset(&dataset).map_err(usage)?;
            let (mut cfg, base) = match &config {
                Some(p) => (RunConfig::load(p).map_err(|e| usage(format!("{e:#}")))?, p.parent().map(Path::to_path_buf).unwrap_or_default()),
                None => (RunConfig::default(), PathBuf::from(".")),
            };
            if let Some(flag) = &backend {
                apply_backend_flag(&mut cfg, flag)?;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            // Paths given on the command line are relative to the working
            // directory, those in the config to the config's directory.
            let base = if backend.as_deref().is_some_and(|b| b.contains(':')) { PathBuf::from(".") } else { base };
            let gen = harness::build_backend(&cfg.backend, &base).map_err(|e| usage(format!("{e:#}")))?;
            let runs = harness::run_dataset(&problems, &cfg, gen);
            let mut failed = 0;
            for run in &runs {
                let path = harness::write_problem_run(&dir, run).map_err(|e| problem(format!("{e:#}")))?;
                let status = match &run.record.error {
                    Some(e) => {
                        failed += 1;
                        format!("error: {e}")
                    }
                    None => format!("{} terminals", run.record.search.as_ref().map_or(0, |s| s.records.len())),
                };
                emit(out, &format!("{}\t{}\t{status}\n", run.record.problem_id, path.display()))?;
            }
            if failed > 0 {
                return Err(problem(format!("{failed} of {} problems failed", runs.len())));
            }
            Ok(())
        }
        Command::Score { runs, metric, tsv } => {
            let records = harness::read_runs(&runs).map_err(|e| usage(format!("{e:#}")))?;
            if records.is_empty() {
                return Err(usage(format!("no *.run.json files in {}", runs.display())));
            }
            let rows = harness::score_runs(&records, metric);
            emit(out, &harness::render_table(&rows, metric, tsv))
        }
        Command::Inspect { run } => {
            let record = harness::read_run(&run).map_err(|e| usage(format!("{e:#}")))?;
            let Some(search) = &record.search else {
                return Err(problem(format!("{}: run failed: {}", record.problem_id, record.error.unwrap_or_default())));
            };
            let lambda = record.config.search.lambda;
            let mut text = format!("problem {}  nodes {}  terminals {}  rollouts {}\n", record.problem_id, search.tree.nodes.len(), search.records.len(), search.rollouts.len());
            text.push_str(&harness::render_tree(&search.tree, lambda));
            for r in &search.records {
                let value = r.objective_value().map_or("-".to_string(), |v| format!("{v}"));
                text.push_str(&format!("record {}  node {}  reward {:.4}  objective {value}\n", r.ordinal, r.node, r.reward));
            }
            emit(out, &text)
        }
        Command::Equiv { command: EquivCommand::Check { a, b } } => {
            let (fa, fb) = (read_formulation(&a)?, read_formulation(&b)?);
            let verdict = check_formulations(&fa, &fb).map_err(problem)?;
            let json = serde_json::json!({
                "all_equivalent": verdict.all_equivalent(),
                "objective": verdict.objective,
                "equality_constraints": verdict.equalities,
                "inequality_constraints": verdict.inequalities,
            });
            emit(out, &format!("{}\n", serde_json::to_string_pretty(&json).map_err(problem)?))
        }
        Command::Lower { formulation, solve, lp, solver } => {
            let f = read_formulation(&formulation)?;
            let m = lower(&f).map_err(problem)?;
            if lp {
                emit(out, &to_lp_string(&m))?;
            }
            if solve {
                let result = SolverKind::from(solver).backend().solve(&m, &SolveLimits::default());
                emit(out, &format!("{}\n", serde_json::to_string_pretty(&result).map_err(problem)?))?;
                if result.status != Status::Optimal {
                    return Err(problem(format!("solver status {:?}", result.status)));
                }
            } else if !lp {
                emit(out, &format!("{}\n", serde_json::to_string_pretty(&m).map_err(problem)?))?;
            }
            Ok(())
        }
    }
}
