//! Single-balancer counting network with token and interference-history
//! ghost state.
//!
//! `getAndInc` is two atomic steps: `flip` on the balancer, which awards the
//! caller a fresh token of the old balancer parity, and `fetchAndAdd2` on the
//! counter of that parity, which spends the token and records
//! `(old + 2) ↦ (alive tokens, token)` in the caller's history.
//!
//! The initial history `{0 ↦ ({0}, 0), 1 ↦ ({1}, 1)}` lives in a separate
//! initializer part that belongs to no running thread, so every thread sees
//! it as part of its environment.

use thiserror::Error;

use crate::check::{Checker, Violation};
use crate::pcm::{
    join_all, last, spent, NetEntry, NetworkHistory, Parity, Pcm, PcmError, ThreadId, Timestamp,
    Token, TokenId, TokenSet,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct NetSelf {
    pub tokens: TokenSet,
    pub hist: NetworkHistory,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Pcm(#[from] PcmError),
}

type Result<T> = std::result::Result<T, NetworkError>;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NetworkState {
    pub bal: u8,
    pub c0: u64,
    pub c1: u64,
    pub selves: Vec<NetSelf>,
    /// Initializer contribution holding the default history.
    pub initial: NetworkHistory,
    next_token: TokenId,
}

/// The default history for the initial counter values.
pub fn initial_history() -> NetworkHistory {
    let z0 = Token::new(0, Parity::Even);
    let z1 = Token::new(1, Parity::Odd);
    [
        (
            0,
            NetEntry {
                snapshot: TokenSet::singleton(z0),
                spent: z0,
            },
        ),
        (
            1,
            NetEntry {
                snapshot: TokenSet::singleton(z1),
                spent: z1,
            },
        ),
    ]
    .into_iter()
    .collect()
}

impl NetworkState {
    pub fn new(threads: usize) -> Self {
        NetworkState {
            bal: 0,
            c0: 0,
            c1: 1,
            selves: vec![NetSelf::default(); threads],
            initial: initial_history(),
            next_token: 2,
        }
    }

    pub fn threads(&self) -> usize {
        self.selves.len()
    }

    fn me_mut(&mut self, thread: ThreadId) -> Result<&mut NetSelf> {
        self.selves
            .get_mut(thread)
            .ok_or_else(|| NetworkError::Precondition(format!("unknown thread {thread}")))
    }

    /// `τ⁰ ⊎ τ¹`.
    pub fn alive(&self) -> std::result::Result<TokenSet, PcmError> {
        join_all(self.selves.iter().map(|s| &s.tokens))
    }

    /// `χ`: initializer part joined with every thread's history.
    pub fn history(&self) -> std::result::Result<NetworkHistory, PcmError> {
        join_all(self.selves.iter().map(|s| &s.hist))?.join(&self.initial)
    }

    pub fn other_tokens(&self, thread: ThreadId) -> std::result::Result<TokenSet, PcmError> {
        let parts: Vec<TokenSet> = self.selves.iter().map(|s| s.tokens.clone()).collect();
        crate::pcm::other_view(&parts, thread)
    }

    /// `χ_o`, which includes the initializer part.
    pub fn other_history(&self, thread: ThreadId) -> std::result::Result<NetworkHistory, PcmError> {
        let parts: Vec<NetworkHistory> = self.selves.iter().map(|s| s.hist.clone()).collect();
        crate::pcm::other_view(&parts, thread)?.join(&self.initial)
    }

    fn counter(&self, p: Parity) -> u64 {
        match p {
            Parity::Even => self.c0,
            Parity::Odd => self.c1,
        }
    }

    /// Atomic `flip(bal)`: returns a fresh token whose parity is the old bit.
    pub fn step_flip(&mut self, thread: ThreadId) -> Result<Token> {
        let b = self.bal;
        let z = Token::new(self.next_token, Parity::from_bit(b));
        let me = self.me_mut(thread)?;
        me.tokens = me.tokens.with(z)?;
        self.next_token += 1;
        self.bal = 1 - b;
        Ok(z)
    }

    /// Atomic `fetchAndAdd2(c_i)` spending token `z`.
    pub fn step_faa2(&mut self, thread: ThreadId, z: Token) -> Result<u64> {
        let snapshot = self.alive()?;
        let old = self.counter(z.parity);
        let me = self.me_mut(thread)?;
        let Some(tokens) = me.tokens.without(&z) else {
            return Err(NetworkError::Precondition(format!(
                "thread {thread} does not hold token {z}"
            )));
        };
        me.hist = me.hist.with(old + 2, NetEntry { snapshot, spent: z })?;
        me.tokens = tokens;
        match z.parity {
            Parity::Even => self.c0 += 2,
            Parity::Odd => self.c1 += 2,
        }
        Ok(old)
    }

    /// Evaluates the token balance, counter shape, history and snapshot invariants.
    pub fn check_invariants(&self) -> Vec<Violation> {
        let mut c = Checker::default();

        // Balancer bit and counter parities.
        c.ensure(self.bal <= 1, "counters", || format!("bal = {}", self.bal));
        c.ensure(self.c0.is_multiple_of(2), "counters", || {
            format!("c0 = {} is odd", self.c0)
        });
        c.ensure(self.c1 % 2 == 1, "counters", || {
            format!("c1 = {} is even", self.c1)
        });

        // Histories and alive tokens are disjoint across parts.
        let chi = match self.history() {
            Ok(h) => h,
            Err(e) => {
                c.fail("history.disjoint", format!("histories overlap: {e}"));
                return c.finish();
            }
        };
        let tau = match self.alive() {
            Ok(t) => t,
            Err(e) => {
                c.fail("tokens.spent", format!("alive token sets overlap: {e}"));
                return c.finish();
            }
        };
        let tau0 = tau.filter(|z| z.parity == Parity::Even);
        let tau1 = tau.filter(|z| z.parity == Parity::Odd);
        let chi0 = chi.filter(|t, _| t % 2 == 0);
        let chi1 = chi.filter(|t, _| t % 2 == 1);

        let lhs = chi0.len() + tau0.len();
        let rhs = chi1.len() + tau1.len() + self.bal as usize;
        c.ensure(lhs == rhs, "tokens.balance", || {
            format!(
                "|χ⁰|+|τ⁰| = {}+{} but |χ¹|+|τ¹|+b = {}+{}+{}",
                chi0.len(),
                tau0.len(),
                chi1.len(),
                tau1.len(),
                self.bal
            )
        });

        // Each counter equals the frontier of its history.
        c.ensure(
            chi0.keys().copied().eq((0..=self.c0).step_by(2)),
            "history.prefix",
            || {
                format!(
                    "even history {:?} vs c0 = {}",
                    chi0.keys().collect::<Vec<_>>(),
                    self.c0
                )
            },
        );
        c.ensure(
            chi1.keys().copied().eq((1..=self.c1).step_by(2)),
            "history.prefix",
            || {
                format!(
                    "odd history {:?} vs c1 = {}",
                    chi1.keys().collect::<Vec<_>>(),
                    self.c1
                )
            },
        );

        // Every entry spends a distinct dead token.
        let sp = spent(&chi);
        c.ensure(sp.len() == chi.len(), "tokens.spent", || {
            "a token was spent more than once".to_string()
        });
        c.ensure(sp.is_disjoint(&tau), "tokens.spent", || {
            format!(
                "spent tokens {:?} still alive",
                sp.filter(|z| tau.contains(z))
            )
        });

        for (t, e) in chi.iter() {
            c.ensure(e.snapshot.contains(&e.spent), "snapshot.spent", || {
                format!("entry {t}: spent token {} not in snapshot", e.spent)
            });
            // Snapshots bound how far an entry may run ahead.
            let s0 = 2 * e.snapshot.intersection_len(&tau0) as u64;
            let s1 = 2 * e.snapshot.intersection_len(&tau1) as u64;
            let (ok, msg) = if t % 2 == 0 {
                (t + s0 < self.c1 + s1 + 2, "even")
            } else {
                (t + s1 < self.c0 + s0 + 2, "odd")
            };
            c.ensure(ok, "snapshot.bound", || {
                format!(
                    "{msg} entry {t} with snapshot {:?} exceeds bound (c0={}, c1={}, τ={:?})",
                    e.snapshot, self.c0, self.c1, tau
                )
            });
        }
        c.finish()
    }

    pub fn begin_call(&self, thread: ThreadId) -> Result<IncCallRecord> {
        let me = self
            .selves
            .get(thread)
            .ok_or_else(|| NetworkError::Precondition(format!("unknown thread {thread}")))?;
        Ok(IncCallRecord {
            thread,
            tokens_at_start: me.tokens.clone(),
            gamma_self: me.hist.clone(),
            gamma_other: self.other_history(thread)?,
            iota_other: self.other_tokens(thread)?,
            result: None,
            committed: None,
        })
    }
}

/// Call-start snapshot and outcome of one `getAndInc`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IncCallRecord {
    pub thread: ThreadId,
    pub tokens_at_start: TokenSet,
    /// `γ_s`
    pub gamma_self: NetworkHistory,
    /// `γ_o`
    pub gamma_other: NetworkHistory,
    /// `ι_o`
    pub iota_other: TokenSet,
    pub result: Option<u64>,
    pub committed: Option<(Timestamp, NetEntry)>,
}

impl IncCallRecord {
    pub fn complete(&mut self, res: u64, state: &NetworkState) {
        self.result = Some(res);
        self.committed = state
            .selves
            .get(self.thread)
            .and_then(|s| s.hist.minus(&self.gamma_self))
            .and_then(|d| d.iter().next().map(|(t, e)| (*t, e.clone())));
    }
}

/// Bounds relating a result to every entry of a past history `gamma`.
pub fn res_past(
    gamma: &NetworkHistory,
    res: u64,
    snapshot: &TokenSet,
    z: Token,
    thread: ThreadId,
    state: &NetworkState,
) -> Vec<Violation> {
    let mut c = Checker::default();
    match (state.other_tokens(thread), state.other_history(thread)) {
        (Ok(tau_o), Ok(chi_o)) => {
            let allowed = tau_o.union(&spent(&chi_o)).union(&TokenSet::singleton(z));
            c.ensure(snapshot.is_subset(&allowed), "past.snapshot", || {
                format!("snapshot {snapshot:?} not within {allowed:?}")
            });
        }
        (Err(e), _) | (_, Err(e)) => c.fail("past.snapshot", e.to_string()),
    }
    for (t, e) in gamma.iter() {
        c.ensure(!e.snapshot.contains(&z), "past.fresh", || {
            format!("token {z} already appears in past entry {t}")
        });
        let bound = res + 2 + 2 * snapshot.intersection_len(&e.snapshot) as u64;
        c.ensure(*t < bound, "past.bound", || {
            format!("past entry {t} not below {bound}")
        });
    }
    c.finish()
}

/// Checks the `getAndInc` postcondition for a completed call.
pub fn check_post(record: &IncCallRecord, state: &NetworkState) -> Vec<Violation> {
    let mut c = Checker::default();
    let Some(res) = record.result else {
        c.fail("inc.post", "call record is incomplete");
        return c.finish();
    };
    let Some(me) = state.selves.get(record.thread) else {
        c.fail("inc.post", format!("unknown thread {}", record.thread));
        return c.finish();
    };
    c.ensure(record.tokens_at_start.is_empty(), "inc.pre", || {
        format!("call started holding tokens {:?}", record.tokens_at_start)
    });
    c.ensure(me.tokens == record.tokens_at_start, "inc.tokens", || {
        format!("token set changed to {:?}", me.tokens)
    });

    let gamma = match record.gamma_self.join(&record.gamma_other) {
        Ok(g) => g,
        Err(e) => {
            c.fail("inc.frame", format!("γ_s and γ_o overlap: {e}"));
            return c.finish();
        }
    };
    // I(γ_o, ι_o), restricted to what the snapshot determines
    c.ensure(
        record.iota_other.is_disjoint(&spent(&gamma)),
        "inc.frame",
        || "ι_o contains spent tokens".to_string(),
    );
    for (t, e) in gamma.iter() {
        c.ensure(e.snapshot.contains(&e.spent), "inc.frame", || {
            format!("entry {t} does not contain its spent token")
        });
    }

    let entry = match me.hist.minus(&record.gamma_self) {
        None => {
            c.fail("inc.self", "self history lost entries during the call");
            return c.finish();
        }
        Some(delta) => {
            let entries: Vec<_> = delta.iter().map(|(t, e)| (*t, e.clone())).collect();
            match entries.as_slice() {
                [(t, e)] if *t == res + 2 => Some(e.clone()),
                _ => {
                    c.fail(
                        "inc.self",
                        format!("expected one entry at {} but call added {delta:?}", res + 2),
                    );
                    None
                }
            }
        }
    };

    match (
        state.other_history(record.thread),
        state.other_tokens(record.thread),
    ) {
        (Ok(chi_o), Ok(tau_o)) => {
            c.ensure(record.gamma_other.is_sub_of(&chi_o), "inc.other", || {
                "γ_o is no longer contained in χ_o".to_string()
            });
            let newly_spent = spent(&chi_o).difference(&spent(&record.gamma_other));
            let cover = tau_o.union(&newly_spent);
            c.ensure(
                record.iota_other.is_subset(&cover),
                "inc.other_tokens",
                || format!("ι_o = {:?} escapes {cover:?}", record.iota_other),
            );
        }
        (Err(e), _) | (_, Err(e)) => c.fail("inc.other", e.to_string()),
    }

    if let Some(entry) = entry {
        let bound = res + 2 + 2 * entry.snapshot.intersection_len(&record.iota_other) as u64;
        c.ensure(last(&gamma).is_none_or(|l| l < bound), "inc.last", || {
            format!("last(γ) = {:?} not below {bound}", last(&gamma))
        });
        c.out.extend(res_past(
            &gamma,
            res,
            &entry.snapshot,
            entry.spent,
            record.thread,
            state,
        ));
    }
    c.finish()
}

/// `|ι̂ ∩ ι| ≤ |ι̂| − 1` whenever `z ∈ ι̂` and `z ∉ ι`.
pub fn intersection_bound(snapshot: &TokenSet, past: &TokenSet, z: Token) -> Option<bool> {
    if !snapshot.contains(&z) || past.contains(&z) {
        return None;
    }
    Some(snapshot.intersection_len(past) < snapshot.len())
}
