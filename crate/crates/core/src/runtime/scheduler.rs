//! Scheduling policies, registered by name.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RuntimeError, System, TransitionChoice};
use crate::ids::Pid;
use crate::trace::Event;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delivery {
    /// Every send is immediately followed by its delivery.
    Eager,
    /// Deliveries are ordinary schedulable transitions.
    #[default]
    Lazy,
}

/// Picks the next transition among the enabled ones.
pub trait Scheduler: Send {
    fn name(&self) -> &'static str;

    /// `Ok(None)` means the policy has nothing more to say.
    fn choose(
        &mut self,
        sys: &System,
        enabled: &[TransitionChoice],
    ) -> Result<Option<TransitionChoice>, RuntimeError>;

    /// Called after every applied transition.
    fn observe(&mut self, _choice: TransitionChoice, _event: Option<&Event>) {}
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulerOptions {
    /// Transitions per turn for round-robin.
    pub fuel: u32,
    pub seed: u64,
    pub script: Vec<TransitionChoice>,
}

impl Default for SchedulerOptions {
    fn default() -> Self {
        SchedulerOptions {
            fuel: 1,
            seed: 0,
            script: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulerConfig {
    pub policy: String,
    pub options: SchedulerOptions,
    pub delivery: Delivery,
}

impl SchedulerConfig {
    pub fn new(policy: &str, options: SchedulerOptions) -> Self {
        SchedulerConfig {
            policy: policy.to_string(),
            options,
            delivery: Delivery::Lazy,
        }
    }

    pub fn round_robin(fuel: u32) -> Self {
        Self::new(
            "rr",
            SchedulerOptions {
                fuel,
                ..Default::default()
            },
        )
    }

    pub fn random(seed: u64) -> Self {
        Self::new(
            "random",
            SchedulerOptions {
                seed,
                ..Default::default()
            },
        )
    }

    pub fn scripted(script: Vec<TransitionChoice>) -> Self {
        Self::new(
            "scripted",
            SchedulerOptions {
                script,
                ..Default::default()
            },
        )
    }

    pub fn with_delivery(mut self, delivery: Delivery) -> Self {
        self.delivery = delivery;
        self
    }
}

type Builder = fn(&SchedulerOptions) -> Box<dyn Scheduler>;

pub struct SchedulerRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

impl Default for SchedulerRegistry {
    fn default() -> Self {
        let mut r = SchedulerRegistry {
            builders: BTreeMap::new(),
        };
        r.register("rr", |o| Box::new(RoundRobin::new(o.fuel)));
        r.register("random", |o| Box::new(RandomScheduler::new(o.seed)));
        r.register("scripted", |o| Box::new(Scripted::new(o.script.clone())));
        r
    }
}

impl SchedulerRegistry {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn build(&self, config: &SchedulerConfig) -> Result<Box<dyn Scheduler>, RuntimeError> {
        let b = self
            .builders
            .get(config.policy.as_str())
            .ok_or_else(|| RuntimeError::UnknownScheduler(config.policy.clone()))?;
        Ok(b(&config.options))
    }
}

/// Turns of up to `fuel` transitions per process, cycling through pids in
/// order, with one delivery between turns (queues also taken in turn).
pub struct RoundRobin {
    fuel: u32,
    current: Option<Pid>,
    used: u32,
    delivered: bool,
    last_queue: Option<(Pid, Pid)>,
}

impl RoundRobin {
    pub fn new(fuel: u32) -> Self {
        RoundRobin {
            fuel: fuel.max(1),
            current: None,
            used: 0,
            delivered: true,
            last_queue: None,
        }
    }

    fn next_delivery(&mut self, enabled: &[TransitionChoice]) -> Option<TransitionChoice> {
        let queues: Vec<(Pid, Pid)> = enabled
            .iter()
            .filter_map(|c| match *c {
                TransitionChoice::Deliver { from, to } => Some((from, to)),
                _ => None,
            })
            .collect();
        let pick = match self.last_queue {
            Some(last) => queues.iter().find(|&&q| q > last).or(queues.first()),
            None => queues.first(),
        }
        .copied()?;
        self.last_queue = Some(pick);
        Some(TransitionChoice::Deliver {
            from: pick.0,
            to: pick.1,
        })
    }
}

impl Scheduler for RoundRobin {
    fn name(&self) -> &'static str {
        "rr"
    }

    fn choose(
        &mut self,
        _sys: &System,
        enabled: &[TransitionChoice],
    ) -> Result<Option<TransitionChoice>, RuntimeError> {
        let procs: Vec<Pid> = enabled
            .iter()
            .filter_map(|c| match *c {
                TransitionChoice::Proc { pid } => Some(pid),
                _ => None,
            })
            .collect();
        if let Some(cur) = self.current {
            if self.used < self.fuel && procs.contains(&cur) {
                self.used += 1;
                return Ok(Some(TransitionChoice::Proc { pid: cur }));
            }
        }
        if !self.delivered {
            self.delivered = true;
            if let Some(d) = self.next_delivery(enabled) {
                return Ok(Some(d));
            }
        }
        let next = match self.current {
            Some(cur) => procs.iter().find(|&&p| p > cur).or(procs.first()),
            None => procs.first(),
        }
        .copied();
        match next {
            Some(pid) => {
                self.current = Some(pid);
                self.used = 1;
                self.delivered = false;
                Ok(Some(TransitionChoice::Proc { pid }))
            }
            None => Ok(self.next_delivery(enabled)),
        }
    }
}

/// Uniform choice among enabled transitions, reproducible from the seed.
pub struct RandomScheduler {
    rng: ChaCha8Rng,
}

impl RandomScheduler {
    pub fn new(seed: u64) -> Self {
        RandomScheduler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Scheduler for RandomScheduler {
    fn name(&self) -> &'static str {
        "random"
    }

    fn choose(
        &mut self,
        _sys: &System,
        enabled: &[TransitionChoice],
    ) -> Result<Option<TransitionChoice>, RuntimeError> {
        if enabled.is_empty() {
            return Ok(None);
        }
        Ok(Some(enabled[self.rng.gen_range(0..enabled.len())]))
    }
}

/// Follows a fixed list of choices. A `proc` entry runs the process through
/// its silent steps up to and including its next event, or until it can no
/// longer step; a `deliver` entry is a single delivery. An entry whose first
/// transition is not enabled is an error.
pub struct Scripted {
    script: Vec<TransitionChoice>,
    next: usize,
    active: Option<Pid>,
}

impl Scripted {
    pub fn new(script: Vec<TransitionChoice>) -> Self {
        Scripted {
            script,
            next: 0,
            active: None,
        }
    }
}

impl Scheduler for Scripted {
    fn name(&self) -> &'static str {
        "scripted"
    }

    fn choose(
        &mut self,
        _sys: &System,
        enabled: &[TransitionChoice],
    ) -> Result<Option<TransitionChoice>, RuntimeError> {
        if let Some(pid) = self.active {
            let choice = TransitionChoice::Proc { pid };
            if enabled.contains(&choice) {
                return Ok(Some(choice));
            }
            self.active = None;
        }
        let Some(&choice) = self.script.get(self.next) else {
            return Ok(None);
        };
        let index = self.next;
        self.next += 1;
        if !enabled.contains(&choice) {
            return Err(RuntimeError::Script {
                index,
                choice,
                reason: "transition not enabled".into(),
            });
        }
        if let TransitionChoice::Proc { pid } = choice {
            self.active = Some(pid);
        }
        Ok(Some(choice))
    }

    fn observe(&mut self, _choice: TransitionChoice, event: Option<&Event>) {
        if event.is_some() {
            self.active = None;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(n: u32) -> Pid {
        Pid(n)
    }

    fn empty() -> System {
        System {
            network: Default::default(),
            pool: Default::default(),
            next_pid: 1,
            next_tag: 1,
        }
    }

    #[test]
    fn registry_names() {
        let reg = SchedulerRegistry::default();
        assert_eq!(reg.names().collect::<Vec<_>>(), vec!["random", "rr", "scripted"]);
        assert!(reg.build(&SchedulerConfig::new("fifo", Default::default())).is_err());
    }

    #[test]
    fn round_robin_alternates_with_deliveries() {
        let mut rr = RoundRobin::new(1);
        let sys = empty();
        let en = vec![
            TransitionChoice::proc(p(1)),
            TransitionChoice::proc(p(2)),
            TransitionChoice::deliver(p(1), p(2)),
            TransitionChoice::deliver(p(3), p(2)),
        ];
        let picks: Vec<_> = (0..6).map(|_| rr.choose(&sys, &en).unwrap().unwrap()).collect();
        assert_eq!(
            picks,
            vec![
                TransitionChoice::proc(p(1)),
                TransitionChoice::deliver(p(1), p(2)),
                TransitionChoice::proc(p(2)),
                TransitionChoice::deliver(p(3), p(2)),
                TransitionChoice::proc(p(1)),
                TransitionChoice::deliver(p(1), p(2)),
            ]
        );
    }

    #[test]
    fn round_robin_fuel() {
        let mut rr = RoundRobin::new(2);
        let sys = empty();
        let en = vec![TransitionChoice::proc(p(1)), TransitionChoice::proc(p(2))];
        let picks: Vec<_> = (0..4).map(|_| rr.choose(&sys, &en).unwrap().unwrap().pid()).collect();
        assert_eq!(picks, vec![p(1), p(1), p(2), p(2)]);
    }

    #[test]
    fn scripted_fails_loudly() {
        let mut s = Scripted::new(vec![TransitionChoice::proc(p(2))]);
        let err = s.choose(&empty(), &[TransitionChoice::proc(p(1))]).unwrap_err();
        assert!(matches!(err, RuntimeError::Script { index: 0, .. }));
        let mut s = Scripted::new(vec![]);
        assert_eq!(s.choose(&empty(), &[TransitionChoice::proc(p(1))]).unwrap(), None);
    }
}
