//! The `kern` command line.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use kern_core::analysis::{all_race_sets, explore, race_variant, symptoms, ExploreConfig, Symptoms, SymptomKind};
use kern_core::lang::{parse, Program};
use kern_core::rdebug::{replay, ReplayStatus};
use kern_core::runtime::{run, Delivery, SchedulerConfig, SchedulerOptions, StopReason, TransitionChoice};
use kern_core::trace::{log_of, read_log, read_trace, write_log, write_trace, EventRef, Trace};
use kern_core::{Pid, Tag};

pub const OK: i32 = 0;
pub const NO_WITNESS: i32 = 1;
pub const INPUT_ERROR: i32 = 2;
pub const SYMPTOMS: i32 = 3;
pub const BUDGET: i32 = 4;
pub const REPLAY_FAILED: i32 = 5;

#[derive(Parser)]
#[command(name = "kern", version, about = "Record, analyze and reversibly debug actor programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Policy {
    Rr,
    Random,
    Scripted,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum DeliveryArg {
    Eager,
    Lazy,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Find {
    Deadlock,
    Orphan,
    Lost,
}

#[derive(Subcommand)]
pub enum Command {
    /// Run a program and write its trace.
    Run {
        program: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        #[arg(long, value_enum, default_value = "random")]
        sched: Policy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Transitions per turn under round-robin.
        #[arg(long, default_value_t = 1)]
        fuel: u32,
        /// Schedule file (a JSON list of transition choices) for `--sched scripted`.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "lazy")]
        delivery: DeliveryArg,
        #[arg(long, default_value_t = kern_core::runtime::DEFAULT_BUDGET)]
        budget: usize,
        /// Trace file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Report symptoms and race sets of a trace file.
    Analyze {
        trace: PathBuf,
        #[arg(long, conflicts_with = "text")]
        json: bool,
        #[arg(long)]
        text: bool,
    },
    /// Print the log of a trace file.
    Log { trace: PathBuf },
    /// Print the race variant log that makes a receive consume another message.
    Variant {
        trace: PathBuf,
        /// The receive event, as `<pid>#<index>`, e.g. `p2#1`.
        #[arg(long)]
        receive: String,
        #[arg(long)]
        tag: Tag,
    },
    /// Replay a log.
    Replay {
        program: PathBuf,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "main")]
        entry: String,
        #[arg(long, default_value_t = kern_core::runtime::DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search race variants for a run showing a symptom.
    Explore {
        program: PathBuf,
        #[arg(long, value_enum, required = true)]
        find: Vec<Find>,
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "main")]
        entry: String,
        #[arg(long, default_value_t = kern_core::runtime::DEFAULT_BUDGET)]
        budget: usize,
        #[arg(long, default_value_t = 64)]
        max_runs: usize,
        /// Also consider delaying a message past the end of the run.
        #[arg(long)]
        delayed: bool,
        /// Print the whole exploration report.
        #[arg(long)]
        json: bool,
    },
    /// Serve debugging sessions.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Directory with the UI bundle, served at `/`.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
        /// Speak the protocol on stdin and stdout instead.
        #[arg(long)]
        stdio: bool,
    },
}

/// An error to report on stderr, with its exit code.
pub struct Failure(pub i32, pub String);

fn input(message: impl std::fmt::Display) -> Failure {
    Failure(INPUT_ERROR, message.to_string())
}

/// Runs a command; returns the exit code.
pub fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Run {
            program,
            entry,
            sched,
            seed,
            fuel,
            script,
            delivery,
            budget,
            out: file,
        } => {
            let opts = RunOpts { entry, sched, seed, fuel, script, delivery, budget };
            cmd_run(out, err, &program, &opts, file.as_deref())
        }
        Command::Analyze { trace, json, .. } => cmd_analyze(out, &trace, json),
        Command::Log { trace } => load_trace(&trace).map(|t| {
            let _ = write!(out, "{}", write_log(&log_of(&t)));
            OK
        }),
        Command::Variant { trace, receive, tag } => cmd_variant(out, &trace, &receive, tag),
        Command::Replay {
            program,
            log,
            entry,
            budget,
            out: file,
        } => cmd_replay(out, &program, &log, &entry, budget, file.as_deref()),
        Command::Explore {
            program,
            find,
            depth,
            seed,
            entry,
            budget,
            max_runs,
            delayed,
            json,
        } => {
            let targets = find
                .iter()
                .map(|f| match f {
                    Find::Deadlock => SymptomKind::Blocked,
                    Find::Orphan => SymptomKind::Orphan,
                    Find::Lost => SymptomKind::Lost,
                })
                .collect();
            let config = ExploreConfig {
                max_depth: depth,
                budget,
                max_runs,
                seed,
                targets,
                stop_at_witness: true,
                include_delayed: delayed,
            };
            cmd_explore(out, &program, &entry, &config, json)
        }
        Command::Serve { addr, static_dir, stdio } => cmd_serve(err, addr, static_dir, stdio),
    };
    match result {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_program(path: &Path) -> Result<Program, Failure> {
    parse(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_trace(path: &Path) -> Result<Trace, Failure> {
    let loaded = read_trace(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let mut t = loaded.trace;
    // Processes that never acted still belong to the trace.
    for pid in t.spawned() {
        t.0.entry(pid).or_default();
    }
    Ok(t)
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| input(format!("{}: {e}", path.display())))
}

pub struct RunOpts {
    pub entry: String,
    pub sched: Policy,
    pub seed: u64,
    pub fuel: u32,
    pub script: Option<PathBuf>,
    pub delivery: DeliveryArg,
    pub budget: usize,
}

fn cmd_run(
    out: &mut dyn Write,
    err: &mut dyn Write,
    program: &Path,
    opts: &RunOpts,
    file: Option<&Path>,
) -> Result<i32, Failure> {
    let prog = load_program(program)?;
    let script: Vec<TransitionChoice> = match (&opts.script, opts.sched) {
        (Some(path), _) => serde_json::from_str(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?,
        (None, Policy::Scripted) => return Err(input("--sched scripted needs --script")),
        (None, _) => Vec::new(),
    };
    let policy = match (opts.sched, &opts.script) {
        (Policy::Rr, None) => "rr",
        (Policy::Random, None) => "random",
        _ => "scripted",
    };
    let config = SchedulerConfig {
        policy: policy.into(),
        options: SchedulerOptions {
            fuel: opts.fuel,
            seed: opts.seed,
            script,
        },
        delivery: match opts.delivery {
            DeliveryArg::Eager => Delivery::Eager,
            DeliveryArg::Lazy => Delivery::Lazy,
        },
    };
    let r = run(&prog, &opts.entry, &config, opts.budget).map_err(input)?;
    let json = write_trace(&r.events);
    match file {
        Some(path) => write_file(path, &json)?,
        None => write!(out, "{json}").map_err(input)?,
    }
    for (pid, value) in &r.results {
        let _ = writeln!(err, "{pid} exited with {value}");
    }
    Ok(match r.stop {
        StopReason::Completed => OK,
        StopReason::Budget => {
            let _ = writeln!(err, "budget of {} transitions exhausted", opts.budget);
            BUDGET
        }
        StopReason::Stuck | StopReason::ScriptEnded => {
            let blocked: Vec<String> = r.blocked().iter().map(Pid::to_string).collect();
            let _ = writeln!(err, "blocked: {}", blocked.join(" "));
            if r.stop == StopReason::ScriptEnded {
                let _ = writeln!(err, "the schedule ended with transitions still enabled");
            }
            SYMPTOMS
        }
    })
}

fn list<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    let v: Vec<String> = items.into_iter().map(|x| x.to_string()).collect();
    if v.is_empty() {
        "-".into()
    } else {
        v.join(" ")
    }
}

fn symptoms_text(s: &Symptoms) -> String {
    if s.is_empty() {
        return "no symptoms\n".into();
    }
    format!(
        "blocked: {}\nlost: {}\norphan: {}\n",
        list(&s.blocked),
        list(&s.lost),
        list(&s.orphan)
    )
}

fn cmd_analyze(out: &mut dyn Write, path: &Path, json: bool) -> Result<i32, Failure> {
    let t = load_trace(path)?;
    let s = symptoms(&t);
    let sets: Vec<_> = all_race_sets(&t).into_values().collect();
    if json {
        let v = serde_json::json!({ "symptoms": s, "race_sets": sets });
        writeln!(out, "{}", serde_json::to_string_pretty(&v).unwrap()).map_err(input)?;
    } else {
        let mut text = symptoms_text(&s);
        for rs in &sets {
            let races: Vec<String> = rs
                .races
                .iter()
                .map(|(p, tags)| format!("{p}:[{}]", tags.iter().map(Tag::to_string).collect::<Vec<_>>().join(", ")))
                .collect();
            text += &format!("race set of {} rec({}): {}\n", rs.receive, rs.consumed, races.join(" "));
        }
        write!(out, "{text}").map_err(input)?;
    }
    Ok(if s.is_empty() { OK } else { SYMPTOMS })
}

fn parse_ref(s: &str) -> Result<EventRef, Failure> {
    let bad = || input(format!("invalid event `{s}`, expected <pid>#<index>"));
    let (pid, index) = s.split_once('#').ok_or_else(bad)?;
    Ok(EventRef::new(pid.parse().map_err(|_| bad())?, index.parse().map_err(|_| bad())?))
}

fn cmd_variant(out: &mut dyn Write, path: &Path, receive: &str, tag: Tag) -> Result<i32, Failure> {
    let t = load_trace(path)?;
    let log = race_variant(&t, parse_ref(receive)?, tag).map_err(input)?;
    write!(out, "{}", write_log(&log)).map_err(input)?;
    Ok(OK)
}

fn cmd_replay(
    out: &mut dyn Write,
    program: &Path,
    log: &Path,
    entry: &str,
    budget: usize,
    file: Option<&Path>,
) -> Result<i32, Failure> {
    let prog = load_program(program)?;
    let log = read_log(&read(log)?).map_err(|e| input(format!("{}: {e}", log.display())))?;
    let r = replay(&prog, entry, log, budget).map_err(input)?;
    if let Some(path) = file {
        write_file(path, &write_trace(&r.events))?;
    }
    writeln!(out, "{}", r.trace).map_err(input)?;
    match r.status {
        ReplayStatus::Complete => {
            writeln!(out, "replay complete").map_err(input)?;
            Ok(OK)
        }
        ReplayStatus::Budget => Err(Failure(BUDGET, format!("budget of {budget} transitions exhausted"))),
        ReplayStatus::Divergence { pid, expected, found } => Err(Failure(
            REPLAY_FAILED,
            format!("divergence at {pid}: the log expects {expected}, the program does {found}"),
        )),
        ReplayStatus::StuckAtReceive { pid, tag } => Err(Failure(
            REPLAY_FAILED,
            format!("StuckAtReceive({pid}, {tag}): the logged message never becomes receivable"),
        )),
        ReplayStatus::Stalled { pid, next } => Err(Failure(
            REPLAY_FAILED,
            format!("{pid} cannot reach its next logged action {next}"),
        )),
    }
}

fn cmd_explore(
    out: &mut dyn Write,
    program: &Path,
    entry: &str,
    config: &ExploreConfig,
    json: bool,
) -> Result<i32, Failure> {
    let prog = load_program(program)?;
    let report = explore(&prog, entry, config).map_err(input)?;
    if json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report).unwrap()).map_err(input)?;
    }
    let Some(w) = report.witness else {
        if !json {
            writeln!(out, "no witness ({} runs explored)", report.runs.len()).map_err(input)?;
        }
        return Ok(NO_WITNESS);
    };
    if !json {
        let run = &report.runs[w];
        let mut text = format!("witness: run {w} at depth {}\n", run.depth);
        if let Some((r, tag)) = run.flipped {
            text += &format!("flipped: {r} receives {tag}\n");
        }
        text += &symptoms_text(&run.symptoms);
        text += &write_log(&run.log);
        write!(out, "{text}").map_err(input)?;
    }
    Ok(OK)
}

fn cmd_serve(err: &mut dyn Write, addr: SocketAddr, static_dir: Option<PathBuf>, stdio: bool) -> Result<i32, Failure> {
    if stdio {
        let stdin = std::io::stdin();
        crate::server::serve_stdio(stdin.lock(), std::io::stdout().lock()).map_err(input)?;
        return Ok(OK);
    }
    let rt = tokio::runtime::Runtime::new().map_err(input)?;
    let mut announce = |bound: SocketAddr| {
        let _ = writeln!(err, "listening on http://{bound}");
    };
    rt.block_on(crate::server::serve(addr, static_dir, &mut announce)).map_err(input)?;
    Ok(OK)
}
