//! Shared bit flipped twice per `flip2` call.
//!
//! Each atomic flip appends the newly written bit to the flipping thread's
//! history under a global sequence index; the joined history must alternate
//! and end with the bit's current value.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::check::{Checker, Violation};
use crate::pcm::{join_all, PcmError, PcmMap, ThreadId};

/// Flip history: sequence index ↦ bit written.
pub type FlipHistory = PcmMap<u64, u8>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FlipError {
    #[error("unknown thread {0}")]
    UnknownThread(ThreadId),
    #[error(transparent)]
    Pcm(#[from] PcmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FlipState {
    pub x: u8,
    pub x_initial: u8,
    pub selves: Vec<FlipHistory>,
    pub seq_next: u64,
}

impl FlipState {
    pub fn new(x0: u8, threads: usize) -> Self {
        FlipState {
            x: x0 & 1,
            x_initial: x0 & 1,
            selves: vec![FlipHistory::new(); threads],
            seq_next: 0,
        }
    }

    pub fn history(&self) -> Result<FlipHistory, PcmError> {
        join_all(self.selves.iter())
    }

    /// Atomically inverts `x`, returning the previous value.
    pub fn step_flip_x(&mut self, thread: ThreadId) -> Result<u8, FlipError> {
        let old = self.x;
        let new = 1 - old;
        let seq = self.seq_next;
        let me = self
            .selves
            .get_mut(thread)
            .ok_or(FlipError::UnknownThread(thread))?;
        *me = me.with(seq, new)?;
        self.x = new;
        self.seq_next += 1;
        Ok(old)
    }

    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut c = Checker::default();
        let h = match self.history() {
            Ok(h) => h,
            Err(e) => {
                c.fail("flip.disjoint", e.to_string());
                return c.finish();
            }
        };
        c.ensure(h.keys().copied().eq(0..self.seq_next), "flip.seq", || {
            format!(
                "sequence indices {:?} are not 0..{}",
                h.keys().collect::<Vec<_>>(),
                self.seq_next
            )
        });
        let mut expect = 1 - self.x_initial;
        for (i, b) in h.iter() {
            c.ensure(*b == expect, "flip.alternate", || {
                format!("entry {i} wrote {b}, expected {expect}")
            });
            expect = 1 - *b;
        }
        let last = h
            .iter()
            .next_back()
            .map(|(_, b)| *b)
            .unwrap_or(self.x_initial);
        c.ensure(last == self.x, "flip.last", || {
            format!("last history value {last} differs from x = {}", self.x)
        });
        c.finish()
    }
}

/// `ā + b̄` for the two bits written by one `flip2` call.
pub fn flip2_result(a: u8, b: u8) -> u32 {
    (1 - (a & 1) as u32) + (1 - (b & 1) as u32)
}

/// Entries appended and result returned by one `flip2` call.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Flip2CallRecord {
    pub thread: ThreadId,
    /// `(sequence index, bit written)` per flip, in call order.
    pub entries: Vec<(u64, u8)>,
    pub result: Option<u32>,
}

pub fn check_post(record: &Flip2CallRecord, state: &FlipState) -> Vec<Violation> {
    let mut c = Checker::default();
    let Some(res) = record.result else {
        c.fail("flip2.post", "call record is incomplete");
        return c.finish();
    };
    c.ensure(res <= 2, "flip2.range", || {
        format!("result {res} exceeds 2")
    });
    let [(ia, a), (ib, b)] = record.entries.as_slice() else {
        c.fail(
            "flip2.post",
            format!("expected two entries, got {:?}", record.entries),
        );
        return c.finish();
    };
    c.ensure(res == flip2_result(*a, *b), "flip2.post", || {
        format!(
            "result {res} but entries ({a}, {b}) give {}",
            flip2_result(*a, *b)
        )
    });
    c.ensure(ia < ib, "flip2.order", || {
        format!("entries out of order: {ia} then {ib}")
    });
    match state.selves.get(record.thread) {
        Some(me) => c.ensure(
            me.get(ia) == Some(a) && me.get(ib) == Some(b),
            "flip2.self",
            || {
                format!(
                    "entries {:?} are not in the caller's history",
                    record.entries
                )
            },
        ),
        None => c.fail("flip2.self", format!("unknown thread {}", record.thread)),
    }
    c.finish()
}
