//! Trace files: a header naming the scenario, seed and bounds, then one line
//! per executed step, `<step-index> <thread-id> <op-name> <result>`.

use std::fmt::Write as _;

use thiserror::Error;

use crate::explore::{replay_world, ReplayError};
use crate::pcm::ThreadId;
use crate::report::{ExplorationReport, Mode, ReportBuilder};
use crate::scenarios::{ConfigError, Scenario};
use crate::vm::{Bounds, StepLog, World};

const MAGIC: &str = "# subjhist-trace v1";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("trace is truncated: header announces {expected} steps, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("replay diverged at step {index}: recorded `{recorded}`, replayed `{replayed}`")]
    Divergence {
        index: usize,
        recorded: String,
        replayed: String,
    },
}

fn field<'a>(kv: &'a [(String, String)], key: &str, line: usize) -> Result<&'a str, TraceError> {
    kv.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| TraceError::Malformed {
            line,
            msg: format!("missing {key}"),
        })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub scenario: Scenario,
    pub bounds: Bounds,
    pub seed: Option<u64>,
    pub steps: Vec<StepLog>,
}

impl Trace {
    pub fn from_world(scenario: &Scenario, world: &World, seed: Option<u64>) -> Trace {
        Trace {
            scenario: scenario.clone(),
            bounds: world.bounds(),
            seed,
            steps: world.log().to_vec(),
        }
    }

    /// Executes `schedule` and captures the resulting step log.
    pub fn record(
        scenario: &Scenario,
        bounds: Bounds,
        schedule: &[ThreadId],
        seed: Option<u64>,
    ) -> Result<Trace, ReplayError> {
        let w = replay_world(scenario, bounds, schedule)?;
        Ok(Trace::from_world(scenario, &w, seed))
    }

    pub fn schedule(&self) -> Vec<ThreadId> {
        self.steps.iter().map(|s| s.thread).collect()
    }

    pub fn format(&self) -> String {
        let mut out = String::new();
        let params: String = self
            .scenario
            .params()
            .into_iter()
            .map(|(k, v)| format!(" {k}={v}"))
            .collect();
        let seed = self.seed.map_or("-".to_string(), |s| s.to_string());
        let _ = writeln!(out, "{MAGIC}");
        let _ = writeln!(out, "# scenario={}{params}", self.scenario.name());
        let _ = writeln!(
            out,
            "# seed={seed} max_steps={} retry_bound={} yield_count={}",
            self.bounds.max_steps, self.bounds.retry_bound, self.bounds.yield_count
        );
        let _ = writeln!(out, "# steps={}", self.steps.len());
        for s in &self.steps {
            let _ = writeln!(out, "{s}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Trace, TraceError> {
        let bad = |line: usize, msg: String| TraceError::Malformed { line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        match lines.next() {
            Some((_, MAGIC)) => {}
            _ => return Err(bad(1, format!("expected `{MAGIC}`"))),
        }
        let mut header = |key: &str| -> Result<(usize, Vec<(String, String)>), TraceError> {
            let (n, l) = lines
                .next()
                .ok_or_else(|| bad(0, format!("missing `{key}` header")))?;
            let body = l
                .strip_prefix('#')
                .ok_or_else(|| bad(n, format!("expected `{key}` header")))?;
            let kv: Vec<(String, String)> = body
                .split_whitespace()
                .map(|tok| {
                    tok.split_once('=')
                        .map(|(k, v)| (k.to_string(), v.to_string()))
                        .ok_or_else(|| bad(n, format!("expected key=value, got `{tok}`")))
                })
                .collect::<Result<_, _>>()?;
            if kv.first().map(|(k, _)| k.as_str()) != Some(key) {
                return Err(bad(n, format!("expected `{key}` header")));
            }
            Ok((n, kv))
        };
        let (_, scen) = header("scenario")?;
        let (bn, bkv) = header("seed")?;
        let (sn, skv) = header("steps")?;

        let scenario = Scenario::from_params(&scen[0].1, &scen[1..])?;
        let num = |s: &str, n: usize| -> Result<u64, TraceError> {
            s.parse().map_err(|_| bad(n, format!("bad number `{s}`")))
        };
        let seed = match field(&bkv, "seed", bn)? {
            "-" => None,
            s => Some(num(s, bn)?),
        };
        let bounds = Bounds {
            max_steps: num(field(&bkv, "max_steps", bn)?, bn)? as usize,
            retry_bound: num(field(&bkv, "retry_bound", bn)?, bn)? as u32,
            yield_count: num(field(&bkv, "yield_count", bn)?, bn)? as u32,
        };
        let expected = num(field(&skv, "steps", sn)?, sn)? as usize;

        let mut steps = Vec::new();
        for (n, l) in lines {
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = l.split_whitespace().collect();
            let [index, thread, op, result] = parts.as_slice() else {
                return Err(bad(n, format!("expected 4 fields, got {}", parts.len())));
            };
            let index = num(index, n)? as usize;
            if index != steps.len() {
                return Err(bad(
                    n,
                    format!("step index {index}, expected {}", steps.len()),
                ));
            }
            steps.push(StepLog {
                index,
                thread: num(thread, n)? as usize,
                op: op.to_string(),
                result: result.to_string(),
            });
        }
        if steps.len() != expected {
            return Err(TraceError::Truncated {
                expected,
                found: steps.len(),
            });
        }
        Ok(Trace {
            scenario,
            bounds,
            seed,
            steps,
        })
    }

    /// Replays the trace with full checking; every replayed step must match
    /// the recorded operation and result.
    pub fn replay(&self) -> Result<(ExplorationReport, World), TraceError> {
        let schedule = self.schedule();
        let w = replay_world(&self.scenario, self.bounds, &schedule)?;
        for (rec, got) in self.steps.iter().zip(w.log()) {
            if rec != got {
                return Err(TraceError::Divergence {
                    index: rec.index,
                    recorded: rec.to_string(),
                    replayed: got.to_string(),
                });
            }
        }
        let mut b = ReportBuilder::new(&self.scenario, Mode::Replay, self.bounds, self.seed);
        b.record(&w, &schedule);
        Ok((b.finish(), w))
    }
}
