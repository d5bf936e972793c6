mod common;

use common::*;
use kern_core::analysis::{race_set, race_variant, symptoms};
use kern_core::rdebug::{Driver, Prerequisite, RSystem, UndoStatus};
use kern_core::runtime::{run, SchedulerConfig, TransitionChoice};
use kern_core::trace::{
    canonicalize, canonicalize_log, log_equal, log_of, trace_equal, Action, Event, Log, OrderRegistry,
};
use kern_core::{Pid, Tag};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 64,
        ..ProptestConfig::default()
    }
}

/// A corpus program partway through replaying one of its runs.
fn replayed_prefix(index: usize, seed: u64, steps: usize) -> (kern_core::lang::Program, RSystem) {
    let corpus = corpus();
    let (_, prog) = corpus[index % corpus.len()].clone();
    let rec = run(&prog, "main", &SchedulerConfig::random(seed), 300).unwrap();
    let mut s = RSystem::new(&prog, "main", log_of(&rec.trace)).unwrap();
    let mut driver = Driver::replay();
    for _ in 0..steps {
        if !matches!(driver.step(&prog, &mut s), Ok(Some(_))) {
            break;
        }
    }
    (prog, s)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn backends_match_oracle(seed in any::<u64>()) {
        let t = random_trace(seed, 40);
        let oracle = Oracle::new(&t);
        let registry = OrderRegistry::default();
        for name in registry.names() {
            let o = registry.build(name, &t).unwrap();
            for &a in &oracle.refs {
                for &b in &oracle.refs {
                    prop_assert_eq!(o.happened_before(a, b), oracle.hb(a, b), "{} {} {}", name, a, b);
                }
            }
        }
    }

    #[test]
    fn happened_before_is_a_strict_partial_order(seed in any::<u64>()) {
        let t = random_trace(seed, 30);
        let o = OrderRegistry::default().build("vclock", &t).unwrap();
        let refs = t.refs();
        for &a in &refs {
            prop_assert!(!o.happened_before(a, a));
            for &b in &refs {
                if o.happened_before(a, b) {
                    prop_assert!(!o.happened_before(b, a));
                    for &c in &refs {
                        if o.happened_before(b, c) {
                            prop_assert!(o.happened_before(a, c));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn program_order_without_deliveries(seed in any::<u64>()) {
        let t = random_trace(seed, 40);
        let o = OrderRegistry::default().build("closure", &t).unwrap();
        for pid in t.pids() {
            let seq = t.seq(pid);
            for i in 0..seq.len() {
                for j in i + 1..seq.len() {
                    if !seq[i].is_deliver() && !seq[j].is_deliver() {
                        let (a, b) = (kern_core::trace::EventRef::new(pid, i), kern_core::trace::EventRef::new(pid, j));
                        prop_assert!(o.happened_before(a, b));
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_form_ignores_renaming(seed in any::<u64>(), k in 1u32..50, m in 1u32..50) {
        let t = random_trace(seed, 40);
        let renamed = t.rename(|p| Pid(p.0 * 3 + k), |l| Tag(l.0 * 7 + m));
        prop_assert!(trace_equal(&t, &renamed));
        prop_assert_eq!(canonicalize(&t).unwrap(), canonicalize(&renamed).unwrap());
        let c = canonicalize(&t).unwrap();
        prop_assert_eq!(canonicalize(&c).unwrap(), c.clone());
        prop_assert!(log_equal(&log_of(&t), &log_of(&renamed)));
    }

    #[test]
    fn log_of_commutes_with_renaming(seed in any::<u64>(), k in 1u32..50, m in 1u32..50) {
        let t = random_trace(seed, 40);
        let rp = |p: Pid| Pid(p.0 + k);
        let rt = |l: Tag| Tag(l.0 * 2 + m);
        let a = log_of(&t.rename(rp, rt));
        let b = {
            let mut l = Log::default();
            for (pid, seq) in &log_of(&t).0 {
                let mapped = seq.iter().map(|a| match *a {
                    kern_core::trace::LogAction::Spawn { child } => kern_core::trace::LogAction::Spawn { child: rp(child) },
                    kern_core::trace::LogAction::Send { tag } => kern_core::trace::LogAction::Send { tag: rt(tag) },
                    kern_core::trace::LogAction::Rec { tag } => kern_core::trace::LogAction::Rec { tag: rt(tag) },
                }).collect();
                l.0.insert(rp(*pid), mapped);
            }
            l
        };
        prop_assert_eq!(canonicalize_log(&a).unwrap(), canonicalize_log(&b).unwrap());
        prop_assert_eq!(a, b);
    }

    #[test]
    fn race_sets_match_definition(seed in any::<u64>()) {
        let t = random_trace(seed, 50);
        let oracle = Oracle::new(&t);
        for &r in &oracle.refs {
            if !matches!(t.get(r), Some(Action::Rec { .. })) {
                continue;
            }
            let got = race_set(&t, r).unwrap();
            let want = oracle_race_set(&t, &oracle, r);
            prop_assert_eq!(got.tags(), want);
            for (sender, tags) in &got.races {
                // Each list is in send order.
                let positions: Vec<usize> = tags.iter().map(|&l| t.send_of(l).unwrap().index).collect();
                prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
                prop_assert!(tags.iter().all(|&l| t.send_of(l).unwrap().pid == *sender));
            }
        }
    }

    #[test]
    fn race_variant_keeps_only_the_causal_past(seed in any::<u64>()) {
        let t = random_trace(seed, 50);
        let o = OrderRegistry::default().build("closure", &t).unwrap();
        for r in t.refs() {
            if !matches!(t.get(r), Some(Action::Rec { .. })) {
                continue;
            }
            let rs = race_set(&t, r).unwrap();
            for tag in rs.tags() {
                let v = race_variant(&t, r, tag).unwrap();
                // The receive now consumes `tag` and is the last action of its process.
                prop_assert_eq!(v.seq(r.pid).last().copied(), Some(kern_core::trace::LogAction::Rec { tag }));
                // Nothing caused by the receive survives.
                for e in t.refs() {
                    if o.happened_before(r, e) {
                        if let Some(la) = t.get(e).and_then(|a| a.log_action()) {
                            let present = v.seq(e.pid).contains(&la);
                            let allowed = matches!(la, kern_core::trace::LogAction::Rec { tag: x } if x == tag);
                            prop_assert!(!present || allowed);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn symptoms_partition_messages(seed in any::<u64>()) {
        let t = random_trace(seed, 50);
        let s = symptoms(&t);
        prop_assert!(s.lost.is_disjoint(&s.orphan));
        for &l in &s.lost {
            prop_assert!(t.deliver_of(l).is_none());
        }
        for &l in &s.orphan {
            prop_assert!(t.deliver_of(l).is_some() && t.rec_of(l).is_none());
        }
    }

    #[test]
    fn loop_property(index in 0usize..64, seed in 0u64..1000, steps in 0usize..120) {
        let (prog, s) = replayed_prefix(index, seed, steps);
        for c in s.enabled(&prog) {
            let mut t = s.clone();
            let event = t.fwd_step(&prog, c).unwrap();
            match c {
                TransitionChoice::Proc { pid } => {
                    prop_assert_eq!(t.bwd_step(pid).unwrap(), event);
                }
                TransitionChoice::Deliver { to, .. } => {
                    let Some(Event { action: Action::Deliver { tag }, .. }) = event else {
                        return Err(TestCaseError::fail("delivery without event"));
                    };
                    t.bwd_deliver(to, tag).unwrap();
                }
            }
            prop_assert!(t == s, "{} did not round-trip", c);
        }
    }

    #[test]
    fn undo_guard_is_sound(index in 0usize..64, seed in 0u64..1000, steps in 0usize..120) {
        let (_, s) = replayed_prefix(index, seed, steps);
        for (&pid, proc) in &s.pool {
            let status = s.can_undo(pid);
            prop_assert_eq!(status == UndoStatus::NothingToUndo, proc.history.is_empty());
            let mut t = s.clone();
            match status {
                UndoStatus::NothingToUndo => {}
                UndoStatus::Ok => {
                    prop_assert!(t.bwd_step(pid).is_ok());
                }
                UndoStatus::Blocked(plan) => {
                    let before = t.clone();
                    prop_assert!(t.bwd_step(pid).is_err());
                    prop_assert!(t == before);
                    for item in plan {
                        match item {
                            Prerequisite::Undo { pid, .. } => { t.bwd_step(pid).unwrap(); }
                            Prerequisite::Silent { pid, steps } => {
                                for _ in 0..steps {
                                    prop_assert!(t.bwd_step(pid).unwrap().is_none());
                                }
                            }
                            Prerequisite::UndoDeliver { pid, tag } => { t.bwd_deliver(pid, tag).unwrap(); }
                        }
                    }
                    prop_assert_eq!(t.can_undo(pid), UndoStatus::Ok);
                    prop_assert!(t.bwd_step(pid).is_ok());
                }
            }
        }
    }

    #[test]
    fn undo_cascade_then_replay_restores(index in 0usize..64, seed in 0u64..1000, steps in 0usize..120) {
        let (prog, s) = replayed_prefix(index, seed, steps);
        let Some((&pid, _)) = s.pool.iter().find(|(_, p)| !p.history.is_empty()) else { return Ok(()) };
        let mut t = s.clone();
        t.undo_cascade(pid).unwrap();
        prop_assert!(t.log.len() >= s.log.len());
        // The undone actions went back to the log, so replay reaches the
        // same remaining log from both systems.
        let (mut a, mut b) = (s.clone(), t);
        for sys in [&mut a, &mut b] {
            let mut driver = Driver::replay();
            while let Ok(Some(_)) = driver.step(&prog, sys) {}
        }
        prop_assert_eq!(a.log, b.log);
    }
}
