//! Symptoms, message races, race variants and their systematic exploration.

mod explore;

use std::collections::{BTreeMap, BTreeSet};

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::ids::{Pid, Tag};
use crate::trace::{log_of, precedes, Action, CausalOrder, ClosureOrder, EventRef, Log, Trace};

pub use explore::{explore, explore_from, ExplorationReport, ExploreConfig, ExploredRun, SymptomKind, VariantOutcome, VariantRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("event {0} is not a receive")]
    NotARec(EventRef),
    #[error("receive {0} has no delivery in the same process")]
    NoDeliver(EventRef),
    #[error("tag {tag} is not in the race set of {receive}")]
    NotRacing { receive: EventRef, tag: Tag },
    #[error("{0}")]
    Unsupported(String),
}

/// Blocked processes, lost messages and orphan messages.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Symptoms {
    pub blocked: BTreeSet<Pid>,
    pub lost: BTreeSet<Tag>,
    pub orphan: BTreeSet<Tag>,
}

impl Symptoms {
    pub fn is_empty(&self) -> bool {
        self.blocked.is_empty() && self.lost.is_empty() && self.orphan.is_empty()
    }
}

pub fn symptoms(trace: &Trace) -> Symptoms {
    let mut s = Symptoms::default();
    let (mut sent, mut delivered, mut received) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
    for (&pid, seq) in &trace.0 {
        if seq.last() != Some(&Action::Exit) {
            s.blocked.insert(pid);
        }
        for a in seq {
            match *a {
                Action::Send { tag, .. } => {
                    sent.insert(tag);
                }
                Action::Deliver { tag } => {
                    delivered.insert(tag);
                }
                Action::Rec { tag } => {
                    received.insert(tag);
                }
                _ => {}
            }
        }
    }
    s.lost = sent.difference(&delivered).copied().collect();
    s.orphan = delivered.difference(&received).copied().collect();
    s
}

/// The messages that race with the consumed one for a receive event, one
/// list per sender, each in send order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaceSet {
    pub receive: EventRef,
    pub consumed: Tag,
    pub races: BTreeMap<Pid, Vec<Tag>>,
}

impl RaceSet {
    /// `[[race_set]]`: every racing tag.
    pub fn tags(&self) -> BTreeSet<Tag> {
        self.races.values().flatten().copied().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.races.is_empty()
    }

    /// Racing tags, sender by sender, in list order.
    pub fn ordered(&self) -> Vec<Tag> {
        self.races.values().flatten().copied().collect()
    }
}

impl Serialize for RaceSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Receive {
            pid: Pid,
            index: usize,
            tag: Tag,
        }
        let mut st = s.serialize_struct("RaceSet", 2)?;
        st.serialize_field(
            "receive",
            &Receive {
                pid: self.receive.pid,
                index: self.receive.index,
                tag: self.consumed,
            },
        )?;
        st.serialize_field("races", &self.races)?;
        st.end()
    }
}

/// `race_set_τ(e_r)` under a given causal order backend.
pub fn race_set_with(
    trace: &Trace,
    order: &dyn CausalOrder,
    e_r: EventRef,
) -> Result<RaceSet, AnalysisError> {
    let Some(Action::Rec { tag: consumed }) = trace.get(e_r) else {
        return Err(AnalysisError::NotARec(e_r));
    };
    let p = e_r.pid;
    let seq = trace.seq(p);
    let deliver_index = |tag: Tag| seq.iter().position(|a| *a == Action::Deliver { tag });
    let e_d = deliver_index(consumed)
        .map(|i| EventRef::new(p, i))
        .ok_or(AnalysisError::NoDeliver(e_r))?;

    let mut races: BTreeMap<Pid, Vec<Tag>> = BTreeMap::new();
    for (&sender, sseq) in &trace.0 {
        for (i, a) in sseq.iter().enumerate() {
            let Action::Send { tag, to } = *a else { continue };
            if to != p || tag == consumed {
                continue;
            }
            let Some(d) = deliver_index(tag) else { continue };
            let e_s = EventRef::new(sender, i);
            let e_d2 = EventRef::new(p, d);
            if precedes(e_d2, e_d) != Some(true) && !order.happened_before(e_d, e_s) {
                races.entry(sender).or_default().push(tag);
            }
        }
    }
    Ok(RaceSet {
        receive: e_r,
        consumed,
        races,
    })
}

pub fn race_set(trace: &Trace, e_r: EventRef) -> Result<RaceSet, AnalysisError> {
    race_set_with(trace, &ClosureOrder::new(trace), e_r)
}

/// Race sets of every receive, omitting empty ones.
pub fn all_race_sets(trace: &Trace) -> BTreeMap<EventRef, RaceSet> {
    let order = ClosureOrder::new(trace);
    trace
        .refs()
        .into_iter()
        .filter(|&r| matches!(trace.get(r), Some(Action::Rec { .. })))
        .filter_map(|r| race_set_with(trace, &order, r).ok())
        .filter(|rs| !rs.is_empty())
        .map(|rs| (rs.receive, rs))
        .collect()
}

/// Deletes every event happened-after `e_r`, makes `e_r` receive `tag`
/// instead, and returns the log of the result.
pub fn race_variant(trace: &Trace, e_r: EventRef, tag: Tag) -> Result<Log, AnalysisError> {
    let order = ClosureOrder::new(trace);
    let rs = race_set_with(trace, &order, e_r)?;
    if !rs.tags().contains(&tag) {
        return Err(AnalysisError::NotRacing { receive: e_r, tag });
    }
    let pruned = Trace(
        trace
            .0
            .iter()
            .map(|(&pid, seq)| {
                let kept = seq
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| !order.happened_before(e_r, EventRef::new(pid, i)))
                    .map(|(i, a)| if EventRef::new(pid, i) == e_r { Action::Rec { tag } } else { *a })
                    .collect();
                (pid, kept)
            })
            .collect(),
    );
    Ok(log_of(&pruned))
}
