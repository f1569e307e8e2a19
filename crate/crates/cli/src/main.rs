use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use moca::engine::{Machine, Pid};
use moca::explorer::{self, ExploreConfig};
use moca::par::Pool;
use moca::transform::early_write_transform;
use moca::Program;

/// stdout writers that ignore a closed pipe instead of panicking
macro_rules! outln {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($t)*);
    }};
}

mod render;

/// Stateless model checker for C11 litmus programs under multi-copy atomicity.
#[derive(Debug, Parser)]
#[command(name = "moca-verify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Explore every MCA-valid trace and report violations and races.
    Verify {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[command(flatten)]
        opts: Common,
        #[arg(long, default_value_t = 1_000_000)]
        max_seqs: u64,
        #[arg(long, default_value_t = 10_000)]
        max_depth: usize,
        /// Print a summary of every distinct trace.
        #[arg(long)]
        dump_trace: bool,
        /// Replay one schedule instead of exploring.
        #[arg(long, value_name = "SCHEDULE_FILE")]
        replay: Option<PathBuf>,
        /// With --replay, also print the relations of the replayed sequence.
        #[arg(long)]
        dump_relations: bool,
        /// Do not compare results against `expect` lines.
        #[arg(long)]
        no_expect: bool,
    },
    /// Enumerate every admissible interleaving without reduction.
    Enumerate {
        file: PathBuf,
        #[command(flatten)]
        opts: Common,
        /// Refuse programs with more schedulable events than this.
        #[arg(long, default_value_t = explorer::DEFAULT_CAP)]
        cap: usize,
    },
    /// Apply the early-write transformation and check it preserves semantics.
    Transform {
        file: PathBuf,
        /// Print the transformed program.
        #[arg(long)]
        emit_transformed: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the relations of one replayed sequence.
    Relations {
        file: PathBuf,
        #[arg(long, value_name = "SCHEDULE_FILE")]
        replay: PathBuf,
        #[arg(long)]
        json: bool,
        /// Graphviz output.
        #[arg(long, conflicts_with = "json")]
        dot: bool,
        #[arg(long)]
        no_early_write: bool,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    json: bool,
    /// Worker threads for analysis (0 = all cores, 1 = sequential).
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Explore the program as written (diagnostic).
    #[arg(long)]
    no_early_write: bool,
}

/// Outcome classes, ordered by how they combine across several files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Ok = 0,
    Budget = 3,
    Finding = 1,
    Usage = 2,
}

impl Status {
    fn rank(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Budget => 1,
            Status::Finding => 2,
            Status::Usage => 3,
        }
    }

    fn worst(self, other: Status) -> Status {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

fn load(path: &Path) -> Result<Program> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    moca::parse_program(&text).map_err(|e| anyhow::anyhow!("{}:\n{e}", path.display()))
}

fn prepared(p: &Program, no_early_write: bool) -> Program {
    if no_early_write {
        p.clone()
    } else {
        early_write_transform(p)
    }
}

fn read_schedule(m: &Machine, path: &Path) -> Result<Vec<Pid>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or_default();
        for tok in line.split_whitespace() {
            match m.parse_pid(tok) {
                Some(p) => out.push(p),
                None => bail!("unknown schedule token `{tok}`"),
            }
        }
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Verify {
            files,
            opts,
            max_seqs,
            max_depth,
            dump_trace,
            replay,
            dump_relations,
            no_expect,
        } => {
            if let Some(sched) = replay {
                let [file] = files.as_slice() else {
                    bail!("--replay takes exactly one program");
                };
                let p = prepared(&load(file)?, opts.no_early_write);
                let m = Machine::new(&p);
                let schedule = read_schedule(&m, &sched)?;
                return render::replay(&m, &schedule, opts.json, dump_relations);
            }
            let cfg = ExploreConfig {
                max_seqs,
                max_depth,
                early_write: !opts.no_early_write,
                jobs: opts.jobs,
            };
            let mut status = Status::Ok;
            let mut json = Vec::new();
            for f in &files {
                let p = load(f)?;
                let report = explorer::explore(&p, &cfg);
                let checks = if no_expect {
                    Vec::new()
                } else {
                    render::expectations(&p, &report)
                };
                let s = render::classify(&report, &checks);
                status = status.worst(s);
                if opts.json {
                    json.push(render::verify_json(f, &report, &checks, s as u8));
                } else {
                    out!("{}", render::verify_text(f, &report, &checks, dump_trace));
                }
            }
            if opts.json {
                let out = match json.len() {
                    1 => json.pop().unwrap(),
                    _ => serde_json::Value::Array(json),
                };
                outln!("{}", serde_json::to_string_pretty(&out)?);
            }
            Ok(status)
        }
        Command::Enumerate { file, opts, cap } => {
            let p = prepared(&load(&file)?, opts.no_early_write);
            let pool = Pool::new(opts.jobs);
            let e = explorer::enumerate_all(&p, cap, &pool)?;
            let m = Machine::new(&p);
            render::enumeration(&m, &e, opts.json)?;
            Ok(Status::Ok)
        }
        Command::Transform {
            file,
            emit_transformed,
            json,
        } => {
            let p = load(&file)?;
            let q = early_write_transform(&p);
            let verdict = moca::transform::check_spr(&p, &q);
            if json {
                let v = serde_json::json!({
                    "schema_version": explorer::SCHEMA_VERSION,
                    "changed": p != q,
                    "spr": verdict,
                    "transformed": emit_transformed.then(|| q.to_string()),
                });
                outln!("{}", serde_json::to_string_pretty(&v)?);
            } else if emit_transformed {
                out!("{q}");
            } else {
                for (rule, fail) in &verdict.rules {
                    match fail {
                        None => outln!("{rule}: pass"),
                        Some(why) => outln!("{rule}: FAIL ({why})"),
                    }
                }
            }
            Ok(if verdict.is_ok() {
                Status::Ok
            } else {
                Status::Finding
            })
        }
        Command::Relations {
            file,
            replay,
            json,
            dot,
            no_early_write,
        } => {
            let p = prepared(&load(&file)?, no_early_write);
            let m = Machine::new(&p);
            let schedule = read_schedule(&m, &replay)?;
            render::relations(&m, &schedule, json, dot)?;
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(s) => ExitCode::from(s as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Status::Usage as u8)
        }
    }
}
