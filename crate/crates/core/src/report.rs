//! Exploration reports and their accumulation.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::pcm::ThreadId;
use crate::scenarios::{format_outcome, Outcome, Scenario};
use crate::vm::{Bounds, Status, World};

/// Fraction of pruned executions above which a warning is attached.
pub const PRUNE_WARN_FRACTION: f64 = 0.5;
/// Violation records kept verbatim; the rest are only counted.
pub const MAX_VIOLATION_RECORDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exhaustive,
    Random,
    Replay,
    Native,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exhaustive => "exhaustive",
            Mode::Random => "random",
            Mode::Replay => "replay",
            Mode::Native => "native",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCount {
    pub tuple: Outcome,
    pub count: usize,
    /// First schedule that produced this outcome.
    pub schedule: Vec<ThreadId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViolationRecord {
    /// Schedule prefix up to and including the offending step.
    pub schedule: Vec<ThreadId>,
    pub step: usize,
    pub clause: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub name: String,
    pub schedule: Vec<ThreadId>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationReport {
    pub scenario: String,
    pub params: BTreeMap<String, String>,
    pub mode: Mode,
    pub bounds: Bounds,
    pub seed: Option<u64>,
    pub outcomes: Vec<OutcomeCount>,
    pub executions: usize,
    pub complete: usize,
    pub pruned: usize,
    /// Revisited states cut by state caching (zero for stateless search).
    #[serde(default)]
    pub merged: usize,
    pub violations: Vec<ViolationRecord>,
    pub violation_count: usize,
    pub witnesses: Vec<Witness>,
    pub warnings: Vec<String>,
}

impl ExplorationReport {
    /// No violations; exhaustive and random runs also count a run without
    /// complete executions as a violation.
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    pub fn outcome_set(&self) -> Vec<&Outcome> {
        self.outcomes.iter().map(|o| &o.tuple).collect()
    }

    pub fn count_of(&self, tuple: &[crate::scenarios::OutVal]) -> usize {
        self.outcomes
            .iter()
            .find(|o| o.tuple == tuple)
            .map_or(0, |o| o.count)
    }

    pub fn witness(&self, name: &str) -> Option<&Witness> {
        self.witnesses.iter().find(|w| w.name == name)
    }

    /// Human-readable summary.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let params: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        s += &format!(
            "scenario {} {} mode={} max_steps={} retry_bound={} yield_count={}",
            self.scenario,
            params.join(" "),
            self.mode,
            self.bounds.max_steps,
            self.bounds.retry_bound,
            self.bounds.yield_count
        );
        if let Some(seed) = self.seed {
            s += &format!(" seed={seed}");
        }
        s += &format!(
            "\nexecutions {} (complete {}, pruned {})\n",
            self.executions, self.complete, self.pruned
        );
        if self.merged > 0 {
            s += &format!("revisited states cut: {}\n", self.merged);
        }
        s += "outcomes:\n";
        for o in &self.outcomes {
            s += &format!("  {} x{}\n", format_outcome(&o.tuple), o.count);
        }
        for w in &self.witnesses {
            s += &format!(
                "witness {}: {} schedule {:?}\n",
                w.name,
                format_outcome(&w.outcome),
                w.schedule
            );
        }
        for w in &self.warnings {
            s += &format!("warning: {w}\n");
        }
        s += &format!("violations: {}\n", self.violation_count);
        for v in &self.violations {
            s += &format!(
                "  step {} [{}] {} schedule {:?}\n",
                v.step, v.clause, v.detail, v.schedule
            );
        }
        s += if self.passed() { "PASS\n" } else { "FAIL\n" };
        s
    }
}

/// Accumulates executions into a report.
pub struct ReportBuilder<'a> {
    scenario: &'a Scenario,
    mode: Mode,
    bounds: Bounds,
    seed: Option<u64>,
    outcomes: BTreeMap<Outcome, (usize, Vec<ThreadId>)>,
    executions: usize,
    complete: usize,
    pruned: usize,
    merged: usize,
    violations: Vec<ViolationRecord>,
    violation_count: usize,
    seen: HashSet<(Vec<ThreadId>, String, String)>,
    witnesses: Vec<Witness>,
}

impl<'a> ReportBuilder<'a> {
    pub fn new(scenario: &'a Scenario, mode: Mode, bounds: Bounds, seed: Option<u64>) -> Self {
        ReportBuilder {
            scenario,
            mode,
            bounds,
            seed,
            outcomes: BTreeMap::new(),
            executions: 0,
            complete: 0,
            pruned: 0,
            merged: 0,
            violations: Vec::new(),
            violation_count: 0,
            seen: HashSet::new(),
            witnesses: Vec::new(),
        }
    }

    fn push_violation(
        &mut self,
        schedule: Vec<ThreadId>,
        step: usize,
        clause: String,
        detail: String,
    ) {
        // Replay-based search revisits shared prefixes; report each once.
        if !self
            .seen
            .insert((schedule.clone(), clause.clone(), detail.clone()))
        {
            return;
        }
        self.violation_count += 1;
        if self.violations.len() < MAX_VIOLATION_RECORDS {
            self.violations.push(ViolationRecord {
                schedule,
                step,
                clause,
                detail,
            });
        }
    }

    pub fn note_merged(&mut self, merged: usize) {
        self.merged += merged;
    }

    /// Records one execution ending in `world`, reached via `schedule`. A
    /// world that has not terminated contributes only its violations.
    pub fn record(&mut self, world: &World, schedule: &[ThreadId]) {
        if world.is_terminal() {
            self.executions += 1;
        }
        for sv in world.violations() {
            let end = (sv.step + 1).min(schedule.len());
            self.push_violation(
                schedule[..end].to_vec(),
                sv.step,
                sv.violation.clause,
                sv.violation.detail,
            );
        }
        match world.status() {
            Status::Complete => {
                self.complete += 1;
                for v in self.scenario.final_check(world) {
                    self.push_violation(schedule.to_vec(), schedule.len(), v.clause, v.detail);
                }
                let outcome = self.scenario.outcome(world);
                for name in self.scenario.witnesses(&outcome) {
                    if !self.witnesses.iter().any(|w| w.name == name) {
                        self.witnesses.push(Witness {
                            name: name.to_string(),
                            schedule: schedule.to_vec(),
                            outcome: outcome.clone(),
                        });
                    }
                }
                self.outcomes
                    .entry(outcome)
                    .or_insert_with(|| (0, schedule.to_vec()))
                    .0 += 1;
            }
            Status::Pruned(_) | Status::Aborted(_) => self.pruned += 1,
            Status::Running => {}
        }
    }

    pub fn finish(mut self) -> ExplorationReport {
        let mut warnings = Vec::new();
        if self.executions > 0
            && (self.pruned as f64) > PRUNE_WARN_FRACTION * self.executions as f64
        {
            warnings.push(format!(
                "budget-too-small: {} of {} executions were pruned",
                self.pruned, self.executions
            ));
        }
        if matches!(self.mode, Mode::Exhaustive | Mode::Random) && self.complete == 0 {
            self.push_violation(
                Vec::new(),
                0,
                "complete".into(),
                "no execution completed".into(),
            );
        }
        ExplorationReport {
            scenario: self.scenario.name().to_string(),
            params: self
                .scenario
                .params()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            mode: self.mode,
            bounds: self.bounds,
            seed: self.seed,
            outcomes: self
                .outcomes
                .into_iter()
                .map(|(tuple, (count, schedule))| OutcomeCount {
                    tuple,
                    count,
                    schedule,
                })
                .collect(),
            executions: self.executions,
            complete: self.complete,
            pruned: self.pruned,
            merged: self.merged,
            violations: self.violations,
            violation_count: self.violation_count,
            witnesses: self.witnesses,
            warnings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explore::explore_exhaustive;

    #[test]
    fn json_round_trip_keeps_schema_fields() {
        let r = explore_exhaustive(&Scenario::e_qqc(1), Bounds::default()).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "scenario",
            "mode",
            "bounds",
            "outcomes",
            "violations",
            "pruned",
            "complete",
            "seed",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["outcomes"][0]["tuple"], serde_json::json!(["0", "1"]));
        assert_eq!(v["mode"], "exhaustive");
        let back: ExplorationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn empty_run_is_a_failure() {
        let s = Scenario::e_qqc(0);
        let r = ReportBuilder::new(&s, Mode::Exhaustive, Bounds::default(), None).finish();
        assert!(!r.passed());
        assert_eq!(r.violations[0].clause, "complete");
    }
}
