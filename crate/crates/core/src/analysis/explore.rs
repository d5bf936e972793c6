//! Systematic exploration of race variants.
//!
//! Starting from one recorded run, every message race is flipped in turn:
//! the race variant's log is replayed and the run is continued freely from
//! where the log ends. New runs are explored depth first, up to a depth
//! bound, skipping runs whose canonical log has been seen already.

use std::collections::BTreeMap;

use serde::{Serialize, Serializer};

use super::{all_race_sets, race_variant, symptoms, AnalysisError, Symptoms};
use crate::ids::Tag;
use crate::lang::Program;
use crate::rdebug::{replay, ReplayStatus};
use crate::runtime::{run_from, Delivery, RandomScheduler, RunResult, StopReason, System};
use crate::trace::{canonicalize_log, log_of, Event, EventRef, Log, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymptomKind {
    Blocked,
    Lost,
    Orphan,
}

impl SymptomKind {
    pub const ALL: [SymptomKind; 3] = [SymptomKind::Blocked, SymptomKind::Lost, SymptomKind::Orphan];

    fn present(self, s: &Symptoms) -> bool {
        match self {
            SymptomKind::Blocked => !s.blocked.is_empty(),
            SymptomKind::Lost => !s.lost.is_empty(),
            SymptomKind::Orphan => !s.orphan.is_empty(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Variants of variants are explored down to this depth.
    pub max_depth: usize,
    /// Transition budget of each run.
    pub budget: usize,
    pub max_runs: usize,
    /// Seed of the first run; continuations use `seed + run index`.
    pub seed: u64,
    /// A run showing any of these symptoms is a witness.
    pub targets: Vec<SymptomKind>,
    pub stop_at_witness: bool,
    /// Variants where a message is delayed past the end of the run.
    pub include_delayed: bool,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig {
            max_depth: 3,
            budget: crate::runtime::DEFAULT_BUDGET,
            max_runs: 64,
            seed: 0,
            targets: SymptomKind::ALL.to_vec(),
            stop_at_witness: true,
            include_delayed: false,
        }
    }
}

fn ser_log<S: Serializer>(log: &Log, s: S) -> Result<S::Ok, S::Error> {
    log.0.serialize(s)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExploredRun {
    pub depth: usize,
    /// The run this one was derived from, and the flipped race.
    pub parent: Option<usize>,
    pub flipped: Option<(EventRef, Tag)>,
    pub events: Vec<Event>,
    #[serde(serialize_with = "ser_log")]
    pub log: Log,
    #[serde(skip)]
    pub trace: Trace,
    pub stop: StopReason,
    pub symptoms: Symptoms,
    pub witness: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum VariantOutcome {
    Explored { run: usize },
    Duplicate { of: usize },
    Infeasible { replay: ReplayStatus },
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantRecord {
    pub parent: usize,
    pub receive: EventRef,
    pub tag: Tag,
    pub outcome: VariantOutcome,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplorationReport {
    pub runs: Vec<ExploredRun>,
    pub variants: Vec<VariantRecord>,
    /// The first witness run, if any.
    pub witness: Option<usize>,
    /// The run limit cut the search short.
    pub truncated: bool,
}

struct Explorer<'a> {
    program: &'a Program,
    entry: &'a str,
    config: &'a ExploreConfig,
    report: ExplorationReport,
    seen: BTreeMap<Log, usize>,
}

impl Explorer<'_> {
    fn add(&mut self, res: RunResult, depth: usize, parent: Option<usize>, flipped: Option<(EventRef, Tag)>) -> VariantOutcome {
        let log = log_of(&res.trace);
        let key = canonicalize_log(&log).unwrap_or_else(|_| log.clone());
        if let Some(&of) = self.seen.get(&key) {
            return VariantOutcome::Duplicate { of };
        }
        let index = self.report.runs.len();
        self.seen.insert(key, index);
        let symptoms = symptoms(&res.trace);
        let witness = self.config.targets.iter().any(|k| k.present(&symptoms));
        if witness && self.report.witness.is_none() {
            self.report.witness = Some(index);
        }
        self.report.runs.push(ExploredRun {
            depth,
            parent,
            flipped,
            events: res.events,
            log,
            trace: res.trace,
            stop: res.stop,
            symptoms,
            witness,
        });
        VariantOutcome::Explored { run: index }
    }

    fn done(&self) -> bool {
        (self.config.stop_at_witness && self.report.witness.is_some()) || self.report.truncated
    }

    fn continue_run(&self, sys: System, events: Vec<Event>, seed: u64) -> Result<RunResult, AnalysisError> {
        let mut sched = RandomScheduler::new(seed);
        run_from(self.program, sys, events, &mut sched, Delivery::Lazy, self.config.budget)
            .map_err(|e| AnalysisError::Unsupported(e.to_string()))
    }

    fn try_variant(&mut self, parent: usize, e_r: EventRef, tag: Tag) -> Result<VariantOutcome, AnalysisError> {
        let log = race_variant(&self.report.runs[parent].trace, e_r, tag)?;
        let out = replay(self.program, self.entry, log, self.config.budget)
            .map_err(|e| AnalysisError::Unsupported(e.to_string()))?;
        if !out.is_complete() {
            return Ok(VariantOutcome::Infeasible { replay: out.status });
        }
        let seed = self.config.seed.wrapping_add(self.report.runs.len() as u64);
        let res = self.continue_run(out.system.to_system(), out.events, seed)?;
        let depth = self.report.runs[parent].depth + 1;
        Ok(self.add(res, depth, Some(parent), Some((e_r, tag))))
    }

    fn visit(&mut self, run: usize) -> Result<(), AnalysisError> {
        if self.done() || self.report.runs[run].depth >= self.config.max_depth {
            return Ok(());
        }
        let race_sets = all_race_sets(&self.report.runs[run].trace);
        for (e_r, rs) in race_sets {
            for tags in rs.races.values() {
                for &tag in tags {
                    if self.report.runs.len() >= self.config.max_runs {
                        self.report.truncated = true;
                        return Ok(());
                    }
                    let outcome = self.try_variant(run, e_r, tag)?;
                    let feasible = !matches!(outcome, VariantOutcome::Infeasible { .. });
                    let next = match outcome {
                        VariantOutcome::Explored { run } => Some(run),
                        _ => None,
                    };
                    self.report.variants.push(VariantRecord {
                        parent: run,
                        receive: e_r,
                        tag,
                        outcome,
                    });
                    if let Some(next) = next {
                        self.visit(next)?;
                    }
                    if self.done() {
                        return Ok(());
                    }
                    if feasible {
                        break;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Records a seeded random run of `entry()` and explores its race variants.
pub fn explore(program: &Program, entry: &str, config: &ExploreConfig) -> Result<ExplorationReport, AnalysisError> {
    let sys = System::initial(program, entry).map_err(|e| AnalysisError::Unsupported(e.to_string()))?;
    let mut sched = RandomScheduler::new(config.seed);
    let first = run_from(program, sys, Vec::new(), &mut sched, Delivery::Lazy, config.budget)
        .map_err(|e| AnalysisError::Unsupported(e.to_string()))?;
    explore_from(program, entry, first, config)
}

/// Explores the race variants of a given run of `entry()`.
pub fn explore_from(
    program: &Program,
    entry: &str,
    first: RunResult,
    config: &ExploreConfig,
) -> Result<ExplorationReport, AnalysisError> {
    if config.include_delayed {
        return Err(AnalysisError::Unsupported(
            "variants with delayed messages are not implemented".into(),
        ));
    }
    let mut ex = Explorer {
        program,
        entry,
        config,
        report: ExplorationReport {
            runs: Vec::new(),
            variants: Vec::new(),
            witness: None,
            truncated: false,
        },
        seen: BTreeMap::new(),
    };
    ex.add(first, 0, None, None);
    ex.visit(0)?;
    Ok(ex.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse;

    const FIG1: &str = "
        main() -> P2 = spawn(consumer, []), P3 = spawn(producer, [P2]), P2 ! {a, 1}.
        consumer() -> receive {a, X} -> X end.
        producer(P) -> P ! {b, 2}, P ! {a, 3}.
    ";

    #[test]
    fn explores_both_consumers() {
        // The consumer waits forever after its first receive, so every
        // message is delivered and both {a,_} messages race.
        let prog = parse(
            "main() -> P2 = spawn(consumer, []), P3 = spawn(producer, [P2]), P2 ! {a, 1}.
             consumer() -> X = receive {a, V} -> V end, receive done -> X end.
             producer(P) -> P ! {b, 2}, P ! {a, 3}.",
        )
        .unwrap();
        let config = ExploreConfig {
            stop_at_witness: false,
            ..Default::default()
        };
        for seed in 0..5 {
            let report = explore(&prog, "main", &ExploreConfig { seed, ..config.clone() }).unwrap();
            assert_eq!(report.runs.len(), 2, "seed {seed}: {:#?}", report.variants);
            assert_eq!(report.witness, Some(0));
            let firsts: std::collections::BTreeSet<_> = report
                .runs
                .iter()
                .map(|r| r.log.seq(crate::ids::Pid(2))[0])
                .collect();
            assert_eq!(firsts.len(), 2);
            assert!(
                report
                    .variants
                    .iter()
                    .any(|v| matches!(v.outcome, VariantOutcome::Duplicate { of: 0 })),
                "{}",
                serde_json::to_string_pretty(&report.variants).unwrap()
            );
        }
    }

    #[test]
    fn delayed_is_unsupported() {
        let prog = parse(FIG1).unwrap();
        let config = ExploreConfig {
            include_delayed: true,
            ..Default::default()
        };
        assert!(matches!(explore(&prog, "main", &config), Err(AnalysisError::Unsupported(_))));
    }
}
