//! Deterministic step machine driving client programs over the objects.
//!
//! A [`World`] owns the object states and one small interpreter per thread.
//! Each call to [`World::step`] executes exactly one atomic object step for
//! the chosen thread, checks the touched object's invariants, and checks the
//! call's postcondition when the call returns. Everything is deterministic
//! given the sequence of chosen threads.

use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::Violation;
use crate::exchanger::{self, ExchangeCallRecord, ExchangerState, Hole};
use crate::flip2::{self, Flip2CallRecord, FlipState};
use crate::network::{self, IncCallRecord, NetworkState};
use crate::pcm::{OfferId, ThreadId, Token, Value};

/// Exploration budgets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bounds {
    /// Executions longer than this are cut and counted as pruned.
    pub max_steps: usize,
    /// Extra attempts a retrying exchange may make after its first failure.
    pub retry_bound: u32,
    /// Yield steps standing in for the exchanger's back-off sleep.
    pub yield_count: u32,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_steps: 400,
            retry_bound: 3,
            yield_count: 1,
        }
    }
}

/// Source of the value a thread offers to the exchanger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueSrc {
    Const(Value),
    /// Result of the thread's most recent `flip2`.
    LastFlip2,
}

/// One entry of a thread's straight-line program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// `exchange v`, or `exchange' v` when `retry` is set.
    Exchange {
        value: ValueSrc,
        retry: bool,
    },
    Flip2,
    GetAndInc,
    /// Join point shared by all threads (parallel compositions in sequence).
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CallResult {
    Exchange(Option<Value>),
    Flip2(u32),
    Inc(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum ExPc {
    Alloc,
    Install,
    Sleep(u32),
    Retire,
    Dealloc,
    ReadG,
    Match,
    Unlink,
    ReadVal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ExCall {
    v: Value,
    retry: bool,
    attempts: u32,
    pc: ExPc,
    offer: OfferId,
    cur: OfferId,
    matched: bool,
    record: Option<ExchangeCallRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct IncCall {
    token: Option<Token>,
    record: Option<IncCallRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct FlipCall {
    previous: Vec<u8>,
    record: Flip2CallRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Active {
    Exchange(ExCall),
    Flip2(FlipCall),
    Inc(IncCall),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ThreadVm {
    tasks: Vec<Task>,
    next_task: usize,
    active: Option<Active>,
    results: Vec<CallResult>,
}

impl ThreadVm {
    fn finished(&self) -> bool {
        self.active.is_none() && self.next_task >= self.tasks.len()
    }

    fn at_barrier(&self) -> bool {
        self.active.is_none() && self.tasks.get(self.next_task) == Some(&Task::Barrier)
    }

    fn last_flip2(&self) -> Option<u32> {
        self.results.iter().rev().find_map(|r| match r {
            CallResult::Flip2(x) => Some(*x),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Running,
    Complete,
    /// Cut by a budget; checked along the way but excluded from final
    /// assertions.
    Pruned(String),
    /// An object step failed its precondition.
    Aborted(String),
}

/// One executed atomic step, as written to trace files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StepLog {
    pub index: usize,
    pub thread: ThreadId,
    pub op: String,
    pub result: String,
}

impl fmt::Display for StepLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.index, self.thread, self.op, self.result
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VmError {
    #[error("thread {thread} is not runnable at step {step}")]
    NotRunnable { thread: ThreadId, step: usize },
    #[error("execution already finished")]
    Finished,
}

/// Violation attributed to the step during or after which it was detected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepViolation {
    pub step: usize,
    pub violation: Violation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct World {
    pub ex: Option<ExchangerState>,
    pub net: Option<NetworkState>,
    pub flip: Option<FlipState>,
    threads: Vec<ThreadVm>,
    bounds: Bounds,
    steps: usize,
    /// Index of the step being executed, used to attribute violations.
    current: usize,
    status: Status,
    violations: Vec<(usize, Violation)>,
    log: Vec<StepLog>,
}

enum Touched {
    Exchanger,
    Network,
    Flip,
}

impl World {
    /// Builds a world from per-thread programs. Object states are created
    /// for every object some program uses.
    pub fn new(programs: Vec<Vec<Task>>, bounds: Bounds, flip_initial: u8) -> World {
        let n = programs.len();
        let uses = |pred: fn(&Task) -> bool| programs.iter().flatten().any(pred);
        let ex = uses(|t| matches!(t, Task::Exchange { .. })).then(|| ExchangerState::new(n));
        let net = uses(|t| matches!(t, Task::GetAndInc)).then(|| NetworkState::new(n));
        let flip = uses(|t| matches!(t, Task::Flip2)).then(|| FlipState::new(flip_initial, n));
        let threads = programs
            .into_iter()
            .map(|tasks| ThreadVm {
                tasks,
                next_task: 0,
                active: None,
                results: Vec::new(),
            })
            .collect();
        let mut w = World {
            ex,
            net,
            flip,
            threads,
            bounds,
            steps: 0,
            current: 0,
            status: Status::Running,
            violations: Vec::new(),
            log: Vec::new(),
        };
        w.settle();
        w
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn thread_count(&self) -> usize {
        self.threads.len()
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn status(&self) -> &Status {
        &self.status
    }

    pub fn log(&self) -> &[StepLog] {
        &self.log
    }

    pub fn violations(&self) -> impl Iterator<Item = StepViolation> + '_ {
        self.violations.iter().map(|(s, v)| StepViolation {
            step: *s,
            violation: v.clone(),
        })
    }

    pub fn results(&self, thread: ThreadId) -> &[CallResult] {
        &self.threads[thread].results
    }

    pub fn is_terminal(&self) -> bool {
        self.status != Status::Running
    }

    /// Fingerprint of everything that determines future behaviour apart from
    /// the step count: object states, thread machines and status. The log
    /// and recorded violations are excluded.
    pub fn fingerprint(&self) -> u128 {
        let half = |salt: u64| {
            let mut h = DefaultHasher::new();
            salt.hash(&mut h);
            self.ex.hash(&mut h);
            self.net.hash(&mut h);
            self.flip.hash(&mut h);
            self.threads.hash(&mut h);
            self.status.hash(&mut h);
            h.finish()
        };
        (half(0x9e37_79b9) as u128) << 64 | half(0x7f4a_7c15) as u128
    }

    /// Threads that can take a step, in ascending id order.
    pub fn runnable(&self) -> Vec<ThreadId> {
        if self.is_terminal() {
            return Vec::new();
        }
        self.threads
            .iter()
            .enumerate()
            .filter(|(_, t)| t.active.is_some())
            .map(|(i, _)| i)
            .collect()
    }

    fn violation(&mut self, v: Violation) {
        self.violations.push((self.current, v));
    }

    /// Activates pending calls and releases barriers; decides termination.
    fn settle(&mut self) {
        loop {
            let mut changed = false;
            for t in &mut self.threads {
                if t.active.is_none() {
                    if let Some(task) = t.tasks.get(t.next_task).copied() {
                        if task != Task::Barrier {
                            t.next_task += 1;
                            t.active = Some(Self::activate(task, t));
                            changed = true;
                        }
                    }
                }
            }
            let any_active = self.threads.iter().any(|t| t.active.is_some());
            let waiting = self.threads.iter().filter(|t| t.at_barrier()).count();
            if !any_active && waiting > 0 {
                self.check_quiescent();
                for t in self.threads.iter_mut().filter(|t| t.at_barrier()) {
                    t.next_task += 1;
                }
                changed = true;
            }
            if !changed {
                break;
            }
        }
        if self.status == Status::Running {
            if self.threads.iter().all(ThreadVm::finished) {
                self.status = Status::Complete;
            } else if self.steps >= self.bounds.max_steps {
                self.status =
                    Status::Pruned(format!("step budget {} exhausted", self.bounds.max_steps));
            }
        }
    }

    fn activate(task: Task, t: &ThreadVm) -> Active {
        match task {
            Task::Exchange { value, retry } => {
                let v = match value {
                    ValueSrc::Const(v) => v,
                    ValueSrc::LastFlip2 => t.last_flip2().unwrap_or(0) as Value,
                };
                Active::Exchange(ExCall {
                    v,
                    retry,
                    attempts: 0,
                    pc: ExPc::Alloc,
                    offer: 0,
                    cur: 0,
                    matched: false,
                    record: None,
                })
            }
            Task::Flip2 => Active::Flip2(FlipCall {
                previous: Vec::new(),
                record: Flip2CallRecord::default(),
            }),
            Task::GetAndInc => Active::Inc(IncCall {
                token: None,
                record: None,
            }),
            Task::Barrier => unreachable!("barriers are not activated"),
        }
    }

    /// Objects are quiescent when every thread has joined at a barrier.
    fn check_quiescent(&mut self) {
        if let Some(net) = &self.net {
            if let Ok(alive) = net.alive() {
                if !alive.is_empty() {
                    self.violation(Violation::new(
                        "quiescence",
                        format!("alive tokens {alive:?} at a join point"),
                    ));
                }
            }
        }
        if let Some(ex) = &self.ex {
            if !ex.pending.is_empty() || ex.selves.iter().any(|s| !s.perms.is_empty()) {
                self.violation(Violation::new(
                    "quiescence",
                    "outstanding exchanger offers at a join point",
                ));
            }
        }
    }

    /// Executes one atomic step of `thread`.
    pub fn step(&mut self, thread: ThreadId) -> Result<StepLog, VmError> {
        if self.is_terminal() {
            return Err(VmError::Finished);
        }
        self.current = self.steps;
        let Some(active) = self.threads.get_mut(thread).and_then(|t| t.active.take()) else {
            return Err(VmError::NotRunnable {
                thread,
                step: self.steps,
            });
        };
        let outcome = match active {
            Active::Exchange(call) => self.step_exchange(thread, call),
            Active::Flip2(call) => self.step_flip2(thread, call),
            Active::Inc(call) => self.step_inc(thread, call),
        };
        let log = match outcome {
            Ok((op, result, touched)) => {
                let log = StepLog {
                    index: self.steps,
                    thread,
                    op: op.to_string(),
                    result,
                };
                self.steps += 1;
                let inv = match touched {
                    Touched::Exchanger => self.ex.as_ref().map(|s| s.check_invariants()),
                    Touched::Network => self.net.as_ref().map(|s| s.check_invariants()),
                    Touched::Flip => self.flip.as_ref().map(|s| s.check_invariants()),
                };
                for v in inv.unwrap_or_default() {
                    self.violation(v);
                }
                log
            }
            Err((op, msg)) => {
                let log = StepLog {
                    index: self.steps,
                    thread,
                    op: op.to_string(),
                    result: "error".to_string(),
                };
                self.steps += 1;
                self.violation(Violation::new("precondition", msg.clone()));
                self.status = Status::Aborted(msg);
                log
            }
        };
        self.log.push(log.clone());
        self.settle();
        Ok(log)
    }

    /// Offer ids held in the registers of in-flight exchange calls.
    fn offer_registers(&self) -> Vec<OfferId> {
        self.threads
            .iter()
            .filter_map(|t| match &t.active {
                Some(Active::Exchange(c)) => Some([c.offer, c.cur]),
                _ => None,
            })
            .flatten()
            .filter(|&id| id != 0)
            .collect()
    }

    fn finish_call(&mut self, thread: ThreadId, result: CallResult) {
        self.threads[thread].results.push(result);
    }

    fn step_exchange(
        &mut self,
        thread: ThreadId,
        mut call: ExCall,
    ) -> Result<(&'static str, String, Touched), (&'static str, String)> {
        let ex = self.ex.as_mut().expect("exchanger present");
        if call.record.is_none() {
            call.record = Some(
                ex.begin_call(thread, call.v)
                    .map_err(|e| ("alloc", e.to_string()))?,
            );
        }
        let err = |op: &'static str| move |e: exchanger::ExchangerError| (op, e.to_string());
        let mut returned: Option<Option<Value>> = None;
        let (op, res) = match call.pc {
            ExPc::Alloc => {
                call.offer = ex.step_alloc(thread, call.v).map_err(err("alloc"))?;
                call.pc = ExPc::Install;
                ("alloc", format!("p{}", call.offer))
            }
            ExPc::Install => {
                let ok = ex
                    .step_install(thread, call.offer)
                    .map_err(err("install"))?;
                call.pc = match (ok, self.bounds.yield_count) {
                    (false, _) => ExPc::Dealloc,
                    (true, 0) => ExPc::Retire,
                    (true, n) => ExPc::Sleep(n),
                };
                ("install", ok.to_string())
            }
            ExPc::Sleep(n) => {
                call.pc = if n > 1 {
                    ExPc::Sleep(n - 1)
                } else {
                    ExPc::Retire
                };
                ("yield", "-".to_string())
            }
            ExPc::Retire => {
                let hole = ex
                    .step_timeout_cas(thread, call.offer)
                    .map_err(err("retire"))?;
                returned = Some(match hole {
                    Hole::Matched(w) => Some(w),
                    _ => None,
                });
                ("retire", hole.to_string())
            }
            ExPc::Dealloc => {
                ex.step_dealloc(thread, call.offer)
                    .map_err(err("dealloc"))?;
                call.pc = ExPc::ReadG;
                ("dealloc", "-".to_string())
            }
            ExPc::ReadG => match ex.step_read_g(thread) {
                None => {
                    returned = Some(None);
                    ("read_g", "null".to_string())
                }
                Some(cur) => {
                    call.cur = cur;
                    call.pc = ExPc::Match;
                    ("read_g", format!("p{cur}"))
                }
            },
            ExPc::Match => {
                let hole = ex
                    .step_match(thread, call.cur, call.v)
                    .map_err(err("match"))?;
                call.matched = hole == Hole::Unmatched;
                call.pc = ExPc::Unlink;
                ("match", hole.to_string())
            }
            ExPc::Unlink => {
                let ok = ex.step_unlink(thread, call.cur);
                if call.matched {
                    call.pc = ExPc::ReadVal;
                } else {
                    returned = Some(None);
                }
                ("unlink", ok.to_string())
            }
            ExPc::ReadVal => {
                let w = ex
                    .step_read_val(thread, call.cur)
                    .map_err(err("read_val"))?;
                returned = Some(Some(w));
                ("read_val", w.to_string())
            }
        };

        if let Some(result) = returned {
            let mut record = call.record.take().expect("record taken at first step");
            record.complete(result, ex);
            let post = exchanger::check_post(&record, ex);
            for v in post {
                self.violation(v);
            }
            match result {
                None if call.retry => {
                    call.attempts += 1;
                    if call.attempts > self.bounds.retry_bound {
                        self.status = Status::Pruned(format!(
                            "thread {thread} exhausted its retry budget of {}",
                            self.bounds.retry_bound
                        ));
                    }
                    call.pc = ExPc::Alloc;
                    call.offer = 0;
                    call.cur = 0;
                    call.matched = false;
                    self.threads[thread].active = Some(Active::Exchange(call));
                }
                _ => {
                    self.finish_call(thread, CallResult::Exchange(result));
                }
            }
        } else {
            self.threads[thread].active = Some(Active::Exchange(call));
        }
        let roots = self.offer_registers();
        if let Some(ex) = self.ex.as_mut() {
            ex.reclaim(&roots);
        }
        Ok((op, res, Touched::Exchanger))
    }

    fn step_flip2(
        &mut self,
        thread: ThreadId,
        mut call: FlipCall,
    ) -> Result<(&'static str, String, Touched), (&'static str, String)> {
        let fl = self.flip.as_mut().expect("flip object present");
        let seq = fl.seq_next;
        let old = fl
            .step_flip_x(thread)
            .map_err(|e| ("flip_x", e.to_string()))?;
        call.previous.push(old);
        call.record.thread = thread;
        call.record.entries.push((seq, 1 - old));
        if call.previous.len() == 2 {
            let res = call.previous.iter().map(|&b| b as u32).sum();
            call.record.result = Some(res);
            let post = flip2::check_post(&call.record, fl);
            for v in post {
                self.violation(v);
            }
            self.finish_call(thread, CallResult::Flip2(res));
        } else {
            self.threads[thread].active = Some(Active::Flip2(call));
        }
        Ok(("flip_x", old.to_string(), Touched::Flip))
    }

    fn step_inc(
        &mut self,
        thread: ThreadId,
        mut call: IncCall,
    ) -> Result<(&'static str, String, Touched), (&'static str, String)> {
        let net = self.net.as_mut().expect("network present");
        match call.token {
            None => {
                call.record = Some(
                    net.begin_call(thread)
                        .map_err(|e| ("flip", e.to_string()))?,
                );
                let z = net.step_flip(thread).map_err(|e| ("flip", e.to_string()))?;
                call.token = Some(z);
                self.threads[thread].active = Some(Active::Inc(call));
                Ok(("flip", z.parity.bit().to_string(), Touched::Network))
            }
            Some(z) => {
                let res = net
                    .step_faa2(thread, z)
                    .map_err(|e| ("faa2", e.to_string()))?;
                let mut record = call.record.take().expect("record taken at flip");
                record.complete(res, net);
                let post = network::check_post(&record, net);
                for v in post {
                    self.violation(v);
                }
                self.finish_call(thread, CallResult::Inc(res));
                Ok(("faa2", res.to_string(), Touched::Network))
            }
        }
    }
}
