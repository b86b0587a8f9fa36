//! Elimination exchanger as an atomic-step machine with its ghost state.
//!
//! Real state is the global pointer `g` and the joint offer heap. Ghost state
//! is the pending map plus, per thread, a private offer heap, a set of owned
//! offers, and an exchange history. Every `step_*` method is one atomic action;
//! the ghost transitions (install, match, collect, retire) happen inside the
//! same call as the CAS that hosts them.
//!
//! Timestamp assignment at a match: the matcher records the odd timestamp
//! `t` (the smallest unused one) and the pending entry for the offer owner
//! carries `t + 1`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::{Checker, Violation};
use crate::pcm::{
    gather, join_all, last, twin, ExchangeHistory, Exchanged, OfferId, Pcm, PcmError, PcmMap,
    PcmSet, PendingEntry, PendingMap, ThreadId, Timestamp, Value,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hole {
    Unmatched,
    Retired,
    Matched(Value),
}

impl fmt::Display for Hole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Hole::Unmatched => write!(f, "U"),
            Hole::Retired => write!(f, "R"),
            Hole::Matched(w) => write!(f, "M({w})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Offer {
    pub id: OfferId,
    pub value: Value,
    pub hole: Hole,
}

/// One thread's self contribution to the exchanger's ghost state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct ExSelf {
    /// Offers allocated but not yet published.
    pub heap: PcmMap<OfferId, Offer>,
    /// Published offers this thread may still retire or collect.
    pub perms: PcmSet<OfferId>,
    pub hist: ExchangeHistory,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExchangerError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Pcm(#[from] PcmError),
}

type Result<T> = std::result::Result<T, ExchangerError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExchangerState {
    pub g: Option<OfferId>,
    pub offers: BTreeMap<OfferId, Offer>,
    pub pending: PendingMap,
    pub selves: Vec<ExSelf>,
}

impl ExchangerState {
    /// Fresh exchanger with `g = null` shared by `threads` threads.
    pub fn new(threads: usize) -> Self {
        ExchangerState {
            g: None,
            offers: BTreeMap::new(),
            pending: PendingMap::new(),
            selves: vec![ExSelf::default(); threads],
        }
    }

    pub fn threads(&self) -> usize {
        self.selves.len()
    }

    fn me(&self, thread: ThreadId) -> Result<&ExSelf> {
        self.selves
            .get(thread)
            .ok_or_else(|| ExchangerError::Precondition(format!("unknown thread {thread}")))
    }

    fn me_mut(&mut self, thread: ThreadId) -> Result<&mut ExSelf> {
        self.selves
            .get_mut(thread)
            .ok_or_else(|| ExchangerError::Precondition(format!("unknown thread {thread}")))
    }

    /// `χ = ⊎ χ_s ⊎ ⌊π⌋` over all threads.
    pub fn global_history(&self) -> std::result::Result<ExchangeHistory, PcmError> {
        join_all(self.selves.iter().map(|s| &s.hist))?.join(&gather(&self.pending)?)
    }

    /// `χ_o ⊎ ⌊π⌋` as seen by `thread`.
    pub fn other_history(
        &self,
        thread: ThreadId,
    ) -> std::result::Result<ExchangeHistory, PcmError> {
        let hists: Vec<ExchangeHistory> = self.selves.iter().map(|s| s.hist.clone()).collect();
        crate::pcm::other_view(&hists, thread)?.join(&gather(&self.pending)?)
    }

    /// Smallest id that is neither published nor in any private heap.
    fn free_id(&self) -> OfferId {
        (1..)
            .find(|id| {
                !self.offers.contains_key(id)
                    && self.selves.iter().all(|s| !s.heap.contains_key(id))
            })
            .expect("ids are unbounded")
    }

    /// Drops published offers nobody can reach any more: not linked from
    /// `g`, not owned, not pending and not held in a register listed in
    /// `roots`. Their ids become available to later allocations.
    pub fn reclaim(&mut self, roots: &[OfferId]) {
        let owned: Vec<OfferId> = self
            .selves
            .iter()
            .flat_map(|s| s.perms.iter().copied())
            .collect();
        let g = self.g;
        let pending = &self.pending;
        self.offers.retain(|id, _| {
            g == Some(*id) || owned.contains(id) || pending.contains_key(id) || roots.contains(id)
        });
    }

    pub fn step_alloc(&mut self, thread: ThreadId, v: Value) -> Result<OfferId> {
        let id = self.free_id();
        let offer = Offer {
            id,
            value: v,
            hole: Hole::Unmatched,
        };
        let me = self.me_mut(thread)?;
        me.heap = me.heap.with(id, offer)?;
        Ok(id)
    }

    /// `CAS(g, null, p)`; on success `p` moves into the joint heap and into
    /// the caller's owned offers.
    pub fn step_install(&mut self, thread: ThreadId, p: OfferId) -> Result<bool> {
        if !self.me(thread)?.heap.contains_key(&p) {
            return Err(ExchangerError::Precondition(format!(
                "offer {p} is not in thread {thread}'s private heap"
            )));
        }
        if self.g.is_some() {
            return Ok(false);
        }
        let me = self.me_mut(thread)?;
        let (heap, offer) = me.heap.without(&p).expect("checked above");
        me.heap = heap;
        me.perms = me.perms.with(p)?;
        self.offers.insert(p, offer);
        self.g = Some(p);
        Ok(true)
    }

    /// `CAS(p+1, U, R)`. On `U` the offer is retired; on `M w` the CAS fails
    /// and the pending entry is collected into the caller's history.
    pub fn step_timeout_cas(&mut self, thread: ThreadId, p: OfferId) -> Result<Hole> {
        if !self.me(thread)?.perms.contains(&p) {
            return Err(ExchangerError::Precondition(format!(
                "thread {thread} does not own offer {p}"
            )));
        }
        let hole = self
            .offers
            .get(&p)
            .ok_or_else(|| ExchangerError::Precondition(format!("offer {p} not published")))?
            .hole;
        match hole {
            Hole::Unmatched => {
                self.offers.get_mut(&p).expect("present").hole = Hole::Retired;
                let me = self.me_mut(thread)?;
                me.perms = me.perms.without(&p).expect("owned");
            }
            Hole::Matched(_) => {
                let (pending, entry) = self.pending.without(&p).ok_or_else(|| {
                    ExchangerError::Precondition(format!("matched offer {p} has no pending entry"))
                })?;
                self.pending = pending;
                let me = self.me_mut(thread)?;
                me.perms = me.perms.without(&p).expect("owned");
                me.hist = me
                    .hist
                    .with(entry.t, Exchanged::new(entry.offered, entry.matched))?;
            }
            Hole::Retired => {
                return Err(ExchangerError::Precondition(format!(
                    "owned offer {p} was retired by someone else"
                )))
            }
        }
        Ok(hole)
    }

    pub fn step_dealloc(&mut self, thread: ThreadId, p: OfferId) -> Result<()> {
        let me = self.me_mut(thread)?;
        match me.heap.without(&p) {
            Some((heap, _)) => {
                me.heap = heap;
                Ok(())
            }
            None => Err(ExchangerError::Precondition(format!(
                "offer {p} is not in thread {thread}'s private heap"
            ))),
        }
    }

    pub fn step_read_g(&self, _thread: ThreadId) -> Option<OfferId> {
        self.g
    }

    /// `|dom χ| + 1`, the smallest timestamp not yet used.
    pub fn smallest_unused_t(&self) -> Result<Timestamp> {
        Ok(self.global_history()?.len() as Timestamp + 1)
    }

    /// `CAS(cur+1, U, M v)`; on success the caller takes the fresh odd
    /// timestamp and the offer owner's entry goes to the pending map.
    pub fn step_match(&mut self, thread: ThreadId, cur: OfferId, v: Value) -> Result<Hole> {
        self.me(thread)?;
        let offer = *self
            .offers
            .get(&cur)
            .ok_or_else(|| ExchangerError::Precondition(format!("offer {cur} not published")))?;
        if offer.hole != Hole::Unmatched {
            return Ok(offer.hole);
        }
        let t = self.smallest_unused_t()?;
        let pending = self.pending.with(
            cur,
            PendingEntry {
                t: twin(t)?,
                offered: offer.value,
                matched: v,
            },
        )?;
        let me = self.me_mut(thread)?;
        me.hist = me.hist.with(t, Exchanged::new(v, offer.value))?;
        self.pending = pending;
        self.offers.get_mut(&cur).expect("present").hole = Hole::Matched(v);
        Ok(Hole::Unmatched)
    }

    /// `CAS(g, cur, null)`.
    pub fn step_unlink(&mut self, _thread: ThreadId, cur: OfferId) -> bool {
        if self.g == Some(cur) {
            self.g = None;
            true
        } else {
            false
        }
    }

    pub fn step_read_val(&self, _thread: ThreadId, cur: OfferId) -> Result<Value> {
        self.offers
            .get(&cur)
            .map(|o| o.value)
            .ok_or_else(|| ExchangerError::Precondition(format!("offer {cur} not published")))
    }

    /// Evaluates the twin invariant and the offer bookkeeping invariants.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut c = Checker::default();

        // Disjointness of histories and ownership sets.
        let gathered = match gather(&self.pending) {
            Ok(h) => Some(h),
            Err(e) => {
                c.fail("disjoint", format!("pending timestamps overlap: {e}"));
                None
            }
        };
        let selves_hist = join_all(self.selves.iter().map(|s| &s.hist));
        let chi = match (&selves_hist, &gathered) {
            (Ok(s), Some(g)) => match s.join(g) {
                Ok(h) => Some(h),
                Err(e) => {
                    c.fail("disjoint", format!("self histories overlap pending: {e}"));
                    None
                }
            },
            (Err(e), _) => {
                c.fail("disjoint", format!("self histories overlap: {e}"));
                None
            }
            _ => None,
        };
        let owned = join_all(self.selves.iter().map(|s| &s.perms));
        if let Err(e) = &owned {
            c.fail("disjoint", format!("owned offer sets overlap: {e}"));
        }
        let owned = owned.unwrap_or_else(|_| {
            self.selves
                .iter()
                .fold(PcmSet::new(), |acc, s| acc.union(&s.perms))
        });
        for (i, s) in self.selves.iter().enumerate() {
            for p in s.heap.keys() {
                c.ensure(!self.offers.contains_key(p), "disjoint", || {
                    format!("thread {i}'s private offer {p} is also published")
                });
            }
        }

        if let Some(chi) = &chi {
            for (t, e) in chi.iter() {
                let ok = match twin(*t) {
                    Ok(tt) => chi.get(&tt) == Some(&e.flipped()),
                    Err(_) => false,
                };
                c.ensure(ok, "twins", || {
                    format!(
                        "entry {t} ↦ ({}, {}) has no matching twin",
                        e.given, e.received
                    )
                });
            }
            c.ensure(chi.len() % 2 == 0, "twins.even", || {
                format!("history has odd size {}", chi.len())
            });
            let n = chi.len() as Timestamp;
            let gapless = chi.keys().copied().eq(1..=n);
            c.ensure(gapless, "gapless", || {
                format!(
                    "history domain {:?} is not gapless",
                    chi.keys().collect::<Vec<_>>()
                )
            });
        }

        if let Some(g) = self.g {
            c.ensure(self.offers.contains_key(&g), "g.published", || {
                format!("g points to unknown offer {g}")
            });
        }

        // Pending entries mirror owned matched offers.
        for (p, e) in self.pending.iter() {
            let hole = self.offers.get(p).map(|o| o.hole);
            c.ensure(
                owned.contains(p) && hole == Some(Hole::Matched(e.matched)),
                "pending",
                || {
                    format!(
                        "pending offer {p} is not owned and matched with {}",
                        e.matched
                    )
                },
            );
            if let Some(o) = self.offers.get(p) {
                c.ensure(o.value == e.offered, "pending", || {
                    format!("pending offer {p} stores {} not {}", o.value, e.offered)
                });
            }
        }
        for p in owned.iter() {
            if let Some(Offer {
                hole: Hole::Matched(_),
                ..
            }) = self.offers.get(p)
            {
                c.ensure(self.pending.contains_key(p), "pending", || {
                    format!("owned matched offer {p} missing from pending")
                });
            }
        }

        // At most one live offer, linked from g; retired offers are unowned.
        let unmatched: Vec<OfferId> = self
            .offers
            .values()
            .filter(|o| o.hole == Hole::Unmatched)
            .map(|o| o.id)
            .collect();
        c.ensure(unmatched.len() <= 1, "unmatched", || {
            format!("several unmatched offers {unmatched:?}")
        });
        for p in &unmatched {
            c.ensure(self.g == Some(*p) && owned.contains(p), "unmatched", || {
                format!("unmatched offer {p} is not linked from g or not owned")
            });
        }
        for o in self.offers.values().filter(|o| o.hole == Hole::Retired) {
            c.ensure(!owned.contains(&o.id), "retired.unowned", || {
                format!("retired offer {} is still owned", o.id)
            });
        }

        for p in owned.iter() {
            c.ensure(self.offers.contains_key(p), "owned.published", || {
                format!("owned offer {p} is not published")
            });
        }

        c.finish()
    }

    /// Captures the call-start snapshot for an `exchange v` by `thread`.
    pub fn begin_call(&self, thread: ThreadId, v: Value) -> Result<ExchangeCallRecord> {
        let me = self.me(thread)?;
        Ok(ExchangeCallRecord {
            thread,
            value: v,
            heap_at_start: me.heap.clone(),
            perms_at_start: me.perms.clone(),
            self_at_start: me.hist.clone(),
            gamma: self.other_history(thread)?,
            result: None,
            committed: None,
        })
    }
}

/// Call-start snapshot and outcome of one `exchange` call.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExchangeCallRecord {
    pub thread: ThreadId,
    pub value: Value,
    pub heap_at_start: PcmMap<OfferId, Offer>,
    pub perms_at_start: PcmSet<OfferId>,
    /// Caller's own history at call start (framed out of the postcondition).
    pub self_at_start: ExchangeHistory,
    /// `γ`: the other history plus gathered pending entries at call start.
    pub gamma: ExchangeHistory,
    pub result: Option<Option<Value>>,
    pub committed: Option<(Timestamp, Exchanged)>,
}

impl ExchangeCallRecord {
    /// Records the call's result and its committed history entry, if any.
    pub fn complete(&mut self, result: Option<Value>, state: &ExchangerState) {
        self.result = Some(result);
        self.committed = state
            .selves
            .get(self.thread)
            .and_then(|s| s.hist.minus(&self.self_at_start))
            .and_then(|d| d.iter().next().map(|(t, e)| (*t, *e)));
    }
}

/// Checks the exchange postcondition for a completed call against the state
/// at return.
pub fn check_post(record: &ExchangeCallRecord, state: &ExchangerState) -> Vec<Violation> {
    let mut c = Checker::default();
    let Some(result) = record.result else {
        c.fail("exchange.post", "call record is incomplete");
        return c.finish();
    };
    let Some(me) = state.selves.get(record.thread) else {
        c.fail("exchange.post", format!("unknown thread {}", record.thread));
        return c.finish();
    };
    c.ensure(me.heap == record.heap_at_start, "exchange.heap", || {
        format!(
            "private heap changed: {:?} -> {:?}",
            record.heap_at_start, me.heap
        )
    });
    c.ensure(me.perms == record.perms_at_start, "exchange.perms", || {
        format!(
            "owned offers changed: {:?} -> {:?}",
            record.perms_at_start, me.perms
        )
    });
    match state.other_history(record.thread) {
        Ok(now) => c.ensure(record.gamma.is_sub_of(&now), "exchange.gamma", || {
            format!("γ = {:?} not contained in {:?}", record.gamma, now)
        }),
        Err(e) => c.fail("exchange.gamma", e.to_string()),
    }
    let Some(delta) = me.hist.minus(&record.self_at_start) else {
        c.fail("exchange.self", "self history lost entries during the call");
        return c.finish();
    };
    match result {
        None => c.ensure(delta.is_empty(), "exchange.self", || {
            format!("failed call added {delta:?}")
        }),
        Some(w) => {
            let entries: Vec<_> = delta.iter().collect();
            match entries.as_slice() {
                [(t, e)] => {
                    let t = **t;
                    c.ensure(
                        e.given == record.value && e.received == w,
                        "exchange.self",
                        || {
                            format!(
                                "entry {t} ↦ ({}, {}) does not match exchange of {} for {w}",
                                e.given, e.received, record.value
                            )
                        },
                    );
                    let fresh = match (last(&record.gamma), twin(t)) {
                        (_, Err(_)) => false,
                        (None, Ok(_)) => true,
                        (Some(l), Ok(tt)) => l < t && l < tt,
                    };
                    c.ensure(fresh, "exchange.fresh", || {
                        format!(
                            "timestamp {t} is not above last(γ) = {:?}",
                            last(&record.gamma)
                        )
                    });
                }
                _ => c.fail(
                    "exchange.self",
                    format!("successful call must add exactly one entry, added {delta:?}"),
                ),
            }
        }
    }
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn installed(v: Value) -> (ExchangerState, OfferId) {
        let mut s = ExchangerState::new(2);
        let p = s.step_alloc(0, v).unwrap();
        assert!(s.step_install(0, p).unwrap());
        (s, p)
    }

    #[test]
    fn init_is_clean() {
        let s = ExchangerState::new(2);
        assert_eq!(s.g, None);
        assert!(s.global_history().unwrap().is_empty());
        assert!(s.check_invariants().is_empty());
        assert_eq!(s.smallest_unused_t().unwrap(), 1);
    }

    #[test]
    fn alloc_is_private_and_fresh() {
        let mut s = ExchangerState::new(2);
        let a = s.step_alloc(0, 5).unwrap();
        let b = s.step_alloc(1, 6).unwrap();
        assert_eq!(a, 1);
        assert_ne!(a, b);
        assert!(s.selves[0].heap.contains_key(&a));
        assert!(!s.offers.contains_key(&a));
        assert!(s.check_invariants().is_empty());
    }

    #[test]
    fn install_and_failed_install() {
        let (mut s, p) = installed(5);
        assert_eq!(s.g, Some(p));
        assert!(s.selves[0].perms.contains(&p));
        assert!(s.check_invariants().is_empty());
        let q = s.step_alloc(1, 6).unwrap();
        let before = s.clone();
        assert!(!s.step_install(1, q).unwrap());
        assert_eq!(s, before);
        assert_eq!(s.step_read_g(1), Some(p));
    }

    #[test]
    fn retire_unmatched_offer() {
        let (mut s, p) = installed(5);
        assert_eq!(s.step_timeout_cas(0, p).unwrap(), Hole::Unmatched);
        assert_eq!(s.offers[&p].hole, Hole::Retired);
        assert!(s.selves[0].hist.is_empty());
        assert!(s.selves[0].perms.is_empty());
        // the retired offer leaks
        assert!(s.offers.contains_key(&p));
        assert!(s.check_invariants().is_empty());
    }

    #[test]
    fn match_then_collect() {
        let (mut s, p) = installed(5);
        assert_eq!(s.step_match(1, p, 9).unwrap(), Hole::Unmatched);
        assert_eq!(
            s.selves[1].hist,
            ExchangeHistory::singleton(1, Exchanged::new(9, 5))
        );
        assert_eq!(
            s.pending.get(&p),
            Some(&PendingEntry {
                t: 2,
                offered: 5,
                matched: 9
            })
        );
        assert!(s.check_invariants().is_empty());
        // second match attempt fails without changes
        let before = s.clone();
        assert_eq!(s.step_match(0, p, 3).unwrap(), Hole::Matched(9));
        assert_eq!(s, before);

        assert!(s.step_unlink(1, p));
        assert!(!s.step_unlink(1, p));
        assert!(s.offers.contains_key(&p));
        assert_eq!(s.step_read_val(1, p).unwrap(), 5);

        assert_eq!(s.step_timeout_cas(0, p).unwrap(), Hole::Matched(9));
        assert_eq!(
            s.selves[0].hist,
            ExchangeHistory::singleton(2, Exchanged::new(5, 9))
        );
        assert!(s.pending.is_empty());
        assert!(s.check_invariants().is_empty());
        assert_eq!(s.smallest_unused_t().unwrap(), 3);
    }

    #[test]
    fn dealloc_preconditions() {
        let mut s = ExchangerState::new(2);
        let p = s.step_alloc(0, 1).unwrap();
        let q = s.step_alloc(1, 2).unwrap();
        assert!(s.step_install(0, p).unwrap());
        assert!(!s.step_install(1, q).unwrap());
        s.step_dealloc(1, q).unwrap();
        assert!(s.selves[1].heap.is_empty());
        assert!(matches!(
            s.step_dealloc(0, p),
            Err(ExchangerError::Precondition(_))
        ));
        assert!(s.check_invariants().is_empty());
    }

    #[test]
    fn timeout_requires_ownership() {
        let (mut s, p) = installed(5);
        assert!(s.step_timeout_cas(1, p).is_err());
        assert!(s.step_read_val(0, 42).is_err());
        assert!(s.step_match(0, 42, 1).is_err());
    }

    #[test]
    fn missing_twin_is_reported() {
        let mut s = ExchangerState::new(1);
        s.selves[0].hist = ExchangeHistory::singleton(1, Exchanged::new(1, 2));
        let v = s.check_invariants();
        assert!(v.iter().any(|v| v.clause == "twins"));
        assert!(v.iter().any(|v| v.clause == "twins.even"));
    }

    #[test]
    fn gap_is_reported() {
        let mut s = ExchangerState::new(2);
        s.selves[0].hist = ExchangeHistory::singleton(3, Exchanged::new(1, 2));
        s.selves[1].hist = ExchangeHistory::singleton(4, Exchanged::new(2, 1));
        let v = s.check_invariants();
        assert!(v.iter().any(|v| v.clause == "gapless"), "{v:?}");
    }

    #[test]
    fn post_for_failed_and_successful_calls() {
        let mut s = ExchangerState::new(2);
        let mut r0 = s.begin_call(0, 1).unwrap();
        let mut r1 = s.begin_call(1, 2).unwrap();
        let p = s.step_alloc(0, 1).unwrap();
        s.step_install(0, p).unwrap();
        let q = s.step_alloc(1, 2).unwrap();
        assert!(!s.step_install(1, q).unwrap());
        s.step_dealloc(1, q).unwrap();
        let cur = s.step_read_g(1).unwrap();
        assert_eq!(s.step_match(1, cur, 2).unwrap(), Hole::Unmatched);
        s.step_unlink(1, cur);
        let w = s.step_read_val(1, cur).unwrap();
        r1.complete(Some(w), &s);
        assert!(check_post(&r1, &s).is_empty());
        assert_eq!(r1.committed, Some((1, Exchanged::new(2, 1))));

        let Hole::Matched(w) = s.step_timeout_cas(0, p).unwrap() else {
            panic!("offer should be matched")
        };
        r0.complete(Some(w), &s);
        assert!(check_post(&r0, &s).is_empty());
        assert_eq!(r0.committed, Some((2, Exchanged::new(1, 2))));

        // a failed call with no history change passes
        let mut r2 = s.begin_call(0, 7).unwrap();
        r2.complete(None, &s);
        assert!(check_post(&r2, &s).is_empty());
    }

    #[test]
    fn post_rejects_stale_timestamp() {
        let mut s = ExchangerState::new(2);
        s.selves[0].hist = ExchangeHistory::singleton(1, Exchanged::new(1, 2));
        let mut forged = ExchangeCallRecord {
            thread: 0,
            value: 1,
            heap_at_start: PcmMap::new(),
            perms_at_start: PcmSet::new(),
            self_at_start: ExchangeHistory::new(),
            gamma: [
                (1, Exchanged::new(5, 6)),
                (2, Exchanged::new(6, 5)),
                (4, Exchanged::new(0, 0)),
            ]
            .into_iter()
            .collect(),
            result: None,
            committed: None,
        };
        forged.result = Some(Some(2));
        let v = check_post(&forged, &s);
        assert!(v.iter().any(|v| v.clause == "exchange.fresh"), "{v:?}");
    }
}
