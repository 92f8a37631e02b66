//! Command-line front end.

use crate::assertions::{parse_assertion, AssertionError};
use crate::events::{dump_futures, load_futures, EventsError};
use crate::executor::{
    explore, parse_trace, prepare, replay_trace, ExecError, ExploreOptions, FutureState, PrepareOptions, Prepared,
    ReplayOptions, DEFAULT_BUDGET, DEFAULT_UNROLL,
};
use crate::futures::{collapse_labels, ThreadFutures};
use crate::lang::{parse_program, ParseError, Value, Var};
use crate::proofcheck::{
    check_condition, check_og, load_outline, CheckMode, OutlineError, ProofError, ProofOptions, ProofSpace,
    DEFAULT_INTERFERENCE,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;
pub const EXIT_OUTLINE: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "futurestep",
    version,
    about = "Explore, judge and prove programs under a futures-based relaxed memory semantics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List every final outcome with a witness trace.
    Explore {
        #[command(flatten)]
        run: RunArgs,
        /// Replay this trace instead of exploring.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// Decide whether a condition on final configurations is reachable or forbidden.
    Check {
        #[command(flatten)]
        run: RunArgs,
        #[arg(value_enum)]
        mode: Mode,
        condition: String,
    },
    /// Check an Owicki-Gries proof outline.
    Prove {
        #[command(flatten)]
        run: RunArgs,
        outline: PathBuf,
        /// Environment writes interleaved with the program while checking obligations.
        #[arg(long, default_value_t = DEFAULT_INTERFERENCE)]
        interference: usize,
    },
    /// Judge a trace as ALLOWED or DISALLOWED.
    Replay {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        trace: PathBuf,
        /// Memory actions must take effect in trace order.
        #[arg(long)]
        strict: bool,
    },
    /// Print the initial futures as JSON.
    Futures {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Reachable,
    Forbidden,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    pub program: PathBuf,
    #[arg(long, default_value_t = DEFAULT_UNROLL)]
    pub unroll: usize,
    /// `var=lo..hi`, `var=v1,v2,..` or `var=v`; fixes the values a variable may hold.
    #[arg(long = "domain", value_parser = parse_domain)]
    pub domains: Vec<(Var, BTreeSet<Value>)>,
    /// Use these futures instead of computing them.
    #[arg(long)]
    pub futures: Option<PathBuf>,
    /// Run over label futures instead of event futures.
    #[arg(long)]
    pub collapse: bool,
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

pub fn parse_domain(s: &str) -> Result<(Var, BTreeSet<Value>), String> {
    let (var, spec) = s
        .split_once('=')
        .ok_or_else(|| format!("expected `var=values`, got `{s}`"))?;
    let var = var.trim();
    if var.is_empty() {
        return Err("missing variable name".into());
    }
    let num = |t: &str| {
        t.trim()
            .parse::<Value>()
            .map_err(|_| format!("bad value `{}`", t.trim()))
    };
    let values: BTreeSet<Value> = if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if hi < lo || hi - lo > 4096 {
            return Err(format!("bad range {lo}..{hi}"));
        }
        (lo..=hi).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_, _>>()?
    };
    if values.is_empty() {
        return Err("empty domain".into());
    }
    Ok((Var::from(var), values))
}

/// A failure with its exit code.
struct Failure(i32, String);

impl From<ExecError> for Failure {
    fn from(e: ExecError) -> Self {
        let code = if matches!(e, ExecError::Budget { .. }) {
            EXIT_BUDGET
        } else {
            EXIT_INPUT
        };
        Failure(code, e.to_string())
    }
}

impl From<ProofError> for Failure {
    fn from(e: ProofError) -> Self {
        match e {
            ProofError::Exec(e) => e.into(),
            other => Failure(EXIT_INPUT, other.to_string()),
        }
    }
}

impl From<OutlineError> for Failure {
    fn from(e: OutlineError) -> Self {
        Failure(EXIT_OUTLINE, format!("malformed outline: {e}"))
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn load(run: &RunArgs) -> Result<Prepared, Failure> {
    let text = read(&run.program)?;
    let program =
        parse_program(&text).map_err(|e: ParseError| Failure(EXIT_INPUT, format!("{}: {e}", run.program.display())))?;
    let opts = PrepareOptions {
        unroll: run.unroll,
        domains: run.domains.iter().cloned().collect(),
        ..Default::default()
    };
    Ok(prepare(&program, &opts)?)
}

fn condition(text: &str) -> Result<crate::assertions::Assertion, Failure> {
    parse_assertion(text).map_err(|e: AssertionError| Failure(EXIT_INPUT, format!("condition: {e}")))
}

/// Runs `f` with whichever futures representation the arguments select.
fn with_futures<R>(
    run: &RunArgs,
    prepared: &Prepared,
    f: &mut dyn FnMut(Selected) -> Result<R, Failure>,
) -> Result<R, Failure> {
    let computed = match &run.futures {
        Some(path) => {
            let text = read(path)?;
            let flat = load_futures(&text, &prepared.program)
                .map_err(|e: EventsError| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?;
            let threads: BTreeSet<_> = prepared.threads().collect();
            match ThreadFutures::try_from_flat(&flat, &threads) {
                Some(tf) if !run.collapse => return f(Selected::Product(tf)),
                _ if !run.collapse => return f(Selected::Flat(flat)),
                _ => flat,
            }
        }
        None if !run.collapse => return f(Selected::Product(prepared.initial_futures())),
        None => prepared.initial_futures().flatten(),
    };
    let labels = collapse_labels(&computed)
        .map_err(|e| Failure(EXIT_INPUT, format!("cannot collapse futures to labels: {e}")))?;
    f(Selected::Labels(labels))
}

enum Selected {
    Product(ThreadFutures),
    Flat(crate::futures::FutureSet),
    Labels(crate::futures::LabelFutureSet),
}

macro_rules! dispatch {
    ($sel:expr, |$fs:ident| $body:expr) => {
        match $sel {
            Selected::Product($fs) => $body,
            Selected::Flat($fs) => $body,
            Selected::Labels($fs) => $body,
        }
    };
}

fn explore_cmd<F: FutureState>(prepared: &Prepared, fs: F, run: &RunArgs) -> Result<(i32, String), Failure> {
    let ex = explore(
        prepared,
        fs,
        &ExploreOptions {
            budget: run.budget,
            jobs: run.jobs,
        },
    )?;
    let text = match run.format {
        Format::Json => ex.report.to_json(),
        Format::Table => ex.report.to_table(),
    };
    Ok((EXIT_OK, text))
}

fn replay_cmd<F: FutureState>(
    prepared: &Prepared,
    fs: F,
    trace: &Path,
    strict: bool,
    budget: usize,
) -> Result<(i32, String), Failure> {
    let steps = parse_trace(&read(trace)?).map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", trace.display())))?;
    let v = replay_trace(prepared, fs, &steps, &ReplayOptions { strict, budget })?;
    let code = if v.is_allowed() { EXIT_OK } else { EXIT_VERDICT };
    Ok((code, format!("{v}\n")))
}

fn execute(cli: Cli, err: &mut dyn Write) -> Result<(i32, String), Failure> {
    let run = match &cli.command {
        Command::Explore { run, .. }
        | Command::Check { run, .. }
        | Command::Prove { run, .. }
        | Command::Replay { run, .. }
        | Command::Futures { run } => run.clone(),
    };
    let prepared = load(&run)?;
    for w in &prepared.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    match cli.command {
        Command::Explore {
            trace: Some(trace),
            strict,
            ..
        }
        | Command::Replay { trace, strict, .. } => with_futures(&run, &prepared, &mut |sel| {
            dispatch!(sel, |fs| replay_cmd(&prepared, fs, &trace, strict, run.budget))
        }),
        Command::Explore { trace: None, .. } => with_futures(&run, &prepared, &mut |sel| {
            dispatch!(sel, |fs| explore_cmd(&prepared, fs, &run))
        }),
        Command::Check {
            mode, condition: text, ..
        } => {
            let cond = condition(&text)?;
            let mode = match mode {
                Mode::Reachable => CheckMode::Reachable,
                Mode::Forbidden => CheckMode::Forbidden,
            };
            let opts = ExploreOptions {
                budget: run.budget,
                jobs: run.jobs,
            };
            let v = with_futures(&run, &prepared, &mut |sel| {
                dispatch!(sel, |fs| check_condition(&prepared, fs, &cond, mode, &opts)
                    .map_err(Failure::from))
            })?;
            let code = if v.holds { EXIT_OK } else { EXIT_VERDICT };
            let text = match run.format {
                Format::Json => serde_json::to_string_pretty(&v).expect("verdict serialises") + "\n",
                Format::Table => {
                    let mut s = format!(
                        "{}: `{cond}` is {}{mode} ({} of {} terminal configurations satisfy it)\n",
                        if v.holds { "HOLDS" } else { "FAILS" },
                        if v.holds { "" } else { "not " },
                        v.matching,
                        v.terminals,
                    );
                    if let Some(w) = &v.witness {
                        s.push_str(&format!("witness: {}\n", w.join("; ")));
                    }
                    s
                }
            };
            Ok((code, text))
        }
        Command::Prove {
            outline, interference, ..
        } => {
            if run.futures.is_some() || run.collapse {
                return Err(Failure(
                    EXIT_INPUT,
                    "prove works on the computed event futures only".into(),
                ));
            }
            let text = read(&outline)?;
            let opts = ProofOptions {
                interference,
                budget: run.budget,
                jobs: run.jobs,
            };
            let ps = ProofSpace::build(&prepared, &opts)?;
            let outline = load_outline(&text, &prepared, &ps.scope)?;
            let report = check_og(&ps, &outline)?;
            let code = if report.passed { EXIT_OK } else { EXIT_VERDICT };
            let text = match run.format {
                Format::Json => report.to_json(),
                Format::Table => report.to_table(),
            };
            Ok((code, text))
        }
        Command::Futures { .. } => {
            let flat = match &run.futures {
                Some(path) => load_futures(&read(path)?, &prepared.program)
                    .map_err(|e| Failure(EXIT_INPUT, format!("{}: {e}", path.display())))?,
                None => prepared.initial_futures().flatten(),
            };
            Ok((EXIT_OK, dump_futures(&flat)))
        }
    }
}

/// Runs a parsed command line, writing the result to `out` and diagnostics
/// to `err`. Returns the exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match execute(cli, err) {
        Ok((code, text)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(Failure(code, msg)) => {
            let _ = writeln!(err, "error: {msg}");
            code
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli, out, err),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            code
        }
    }
}
