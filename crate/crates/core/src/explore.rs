//! Schedule exploration: replay-based depth-first search, seeded random
//! scheduling and schedule replay.

use std::collections::hash_map::Entry;
use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pcm::ThreadId;
use crate::report::{ExplorationReport, Mode, ReportBuilder};
use crate::scenarios::{ConfigError, Scenario};
use crate::vm::{Bounds, VmError, World};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("invalid schedule at position {index}: {source}")]
    InvalidSchedule {
        index: usize,
        #[source]
        source: VmError,
    },
}

/// Visits every maximal schedule of `init` in depth-first order, re-executing
/// each from the initial state. Returns the number of schedules visited.
pub fn for_each_schedule(init: &World, mut visit: impl FnMut(&World, &[ThreadId])) -> usize {
    // (chosen index, number of alternatives) per step of the current path.
    let mut path: Vec<(usize, usize)> = Vec::new();
    let mut count = 0;
    loop {
        let mut w = init.clone();
        let mut schedule = Vec::with_capacity(path.len());
        for &(ci, _) in &path {
            let t = w.runnable()[ci];
            w.step(t).expect("replayed choice is runnable");
            schedule.push(t);
        }
        loop {
            let r = w.runnable();
            if r.is_empty() {
                break;
            }
            path.push((0, r.len()));
            w.step(r[0]).expect("runnable thread steps");
            schedule.push(r[0]);
        }
        visit(&w, &schedule);
        count += 1;
        loop {
            match path.pop() {
                None => return count,
                Some((ci, n)) if ci + 1 < n => {
                    path.push((ci + 1, n));
                    break;
                }
                Some(_) => {}
            }
        }
    }
}

/// Depth-first search that skips any state already expanded with at least as
/// much step budget left. Every reachable state and every transition out of
/// it is still executed, so all per-step, per-call and terminal checks still
/// run; outcome counts become counts of distinct arrivals rather than of
/// schedules. Returns the number of revisits that were cut.
pub fn for_each_state_path(init: &World, mut visit: impl FnMut(&World, &[ThreadId])) -> usize {
    let mut seen: HashMap<u128, usize> = HashMap::new();
    let mut merged = 0;
    let mut stack = vec![(init.clone(), Vec::new())];
    while let Some((w, schedule)) = stack.pop() {
        let r = w.runnable();
        if r.is_empty() {
            visit(&w, &schedule);
            continue;
        }
        for &t in r.iter().rev() {
            let mut next = w.clone();
            next.step(t).expect("runnable thread steps");
            let mut s = schedule.clone();
            s.push(t);
            if next.is_terminal() {
                stack.push((next, s));
                continue;
            }
            // Report violations now: every continuation may be cut later.
            if next.violations().count() > w.violations().count() {
                visit(&next, &s);
            }
            let steps = next.steps();
            match seen.entry(next.fingerprint()) {
                Entry::Occupied(e) if *e.get() <= steps => merged += 1,
                e => {
                    e.and_modify(|s| *s = steps).or_insert(steps);
                    stack.push((next, s));
                }
            }
        }
    }
    merged
}

/// How exhaustive search treats revisited states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Stateless replay of every maximal schedule.
    None,
    /// Skip states already expanded.
    StateCache,
    /// State caching for scenarios with retry loops, none otherwise.
    #[default]
    Auto,
}

impl Reduction {
    fn resolve(self, scenario: &Scenario) -> Reduction {
        match (self, scenario) {
            (Reduction::Auto, Scenario::ExSeq { .. }) => Reduction::StateCache,
            (Reduction::Auto, _) => Reduction::None,
            (r, _) => r,
        }
    }
}

/// Enumerates all maximal schedules, checking every step, call and terminal
/// state.
pub fn explore_exhaustive(
    scenario: &Scenario,
    bounds: Bounds,
) -> Result<ExplorationReport, ConfigError> {
    explore_exhaustive_with(scenario, bounds, Reduction::Auto)
}

pub fn explore_exhaustive_with(
    scenario: &Scenario,
    bounds: Bounds,
    reduction: Reduction,
) -> Result<ExplorationReport, ConfigError> {
    scenario.validate_exhaustive()?;
    let init = scenario.compile(bounds);
    let mut b = ReportBuilder::new(scenario, Mode::Exhaustive, bounds, None);
    match reduction.resolve(scenario) {
        Reduction::StateCache => {
            let merged = for_each_state_path(&init, |w, s| b.record(w, s));
            b.note_merged(merged);
        }
        _ => {
            for_each_schedule(&init, |w, s| b.record(w, s));
        }
    }
    Ok(b.finish())
}

/// Runs `runs` executions under a uniformly random scheduler seeded by `seed`.
pub fn run_random(
    scenario: &Scenario,
    runs: usize,
    seed: u64,
    bounds: Bounds,
) -> ExplorationReport {
    let init = scenario.compile(bounds);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = ReportBuilder::new(scenario, Mode::Random, bounds, Some(seed));
    for _ in 0..runs {
        let mut w = init.clone();
        let mut schedule = Vec::new();
        while let Some(&t) = w.runnable().choose(&mut rng) {
            w.step(t).expect("runnable thread steps");
            schedule.push(t);
        }
        b.record(&w, &schedule);
    }
    b.finish()
}

/// Executes `schedule` from the initial state and returns the final world.
pub fn replay_world(
    scenario: &Scenario,
    bounds: Bounds,
    schedule: &[ThreadId],
) -> Result<World, ReplayError> {
    let mut w = scenario.compile(bounds);
    for (index, &t) in schedule.iter().enumerate() {
        w.step(t)
            .map_err(|source| ReplayError::InvalidSchedule { index, source })?;
    }
    Ok(w)
}

/// Replays `schedule` with full checking.
pub fn replay_trace(
    scenario: &Scenario,
    bounds: Bounds,
    schedule: &[ThreadId],
) -> Result<ExplorationReport, ReplayError> {
    let w = replay_world(scenario, bounds, schedule)?;
    let mut b = ReportBuilder::new(scenario, Mode::Replay, bounds, None);
    b.record(&w, schedule);
    Ok(b.finish())
}
