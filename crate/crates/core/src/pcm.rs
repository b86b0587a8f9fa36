//! Partial commutative monoids used as ghost-state carriers.
//!
//! Every auxiliary component tracked by the objects in this crate (offer
//! heaps, ownership sets, histories, token sets) is a finite map or a finite
//! set whose join is disjoint union. Values are immutable: joins return new
//! values and leave their arguments untouched, so the explorer can snapshot
//! ghost state by cloning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Timestamps index history entries. Exchanger timestamps start at 1;
/// network and flip timestamps start at 0.
pub type Timestamp = u64;

/// Payload type exchanged by exchanger clients.
pub type Value = i64;

/// Thread identifier inside a scenario.
pub type ThreadId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PcmError {
    #[error("join undefined: key {0} present on both sides")]
    Overlap(String),
    #[error("invalid timestamp {0}")]
    InvalidTimestamp(Timestamp),
    #[error("allocation does not join to the parent's self part")]
    Allocation,
    #[error("thread {0} is not part of the world")]
    UnknownThread(ThreadId),
}

/// A carrier with a partial, commutative, associative join and a unit.
pub trait Pcm: Clone + PartialEq {
    fn unit() -> Self;
    fn join(&self, other: &Self) -> Result<Self, PcmError>;
    fn is_unit(&self) -> bool {
        *self == Self::unit()
    }
}

/// Finite map under disjoint union.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PcmMap<K: Ord, V>(BTreeMap<K, V>);

impl<K: Ord + fmt::Debug, V: fmt::Debug> fmt::Debug for PcmMap<K, V> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}

impl<K: Ord, V> Default for PcmMap<K, V> {
    fn default() -> Self {
        PcmMap(BTreeMap::new())
    }
}

impl<K: Ord + Clone + fmt::Debug, V: Clone + PartialEq> PcmMap<K, V> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(k: K, v: V) -> Self {
        let mut m = BTreeMap::new();
        m.insert(k, v);
        PcmMap(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, k: &K) -> Option<&V> {
        self.0.get(k)
    }

    pub fn contains_key(&self, k: &K) -> bool {
        self.0.contains_key(k)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&K, &V)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl DoubleEndedIterator<Item = &K> {
        self.0.keys()
    }

    /// Largest key, if any.
    pub fn last_key(&self) -> Option<&K> {
        self.0.keys().next_back()
    }

    /// Returns a copy extended with `k ↦ v`; undefined if `k` is taken.
    pub fn with(&self, k: K, v: V) -> Result<Self, PcmError> {
        if self.0.contains_key(&k) {
            return Err(PcmError::Overlap(format!("{k:?}")));
        }
        let mut m = self.0.clone();
        m.insert(k, v);
        Ok(PcmMap(m))
    }

    /// Returns a copy with `k` removed together with the removed value.
    pub fn without(&self, k: &K) -> Option<(Self, V)> {
        let mut m = self.0.clone();
        let v = m.remove(k)?;
        Some((PcmMap(m), v))
    }

    /// `self ⊆ other`: every entry of `self` appears verbatim in `other`.
    pub fn is_sub_of(&self, other: &Self) -> bool {
        self.0.iter().all(|(k, v)| other.0.get(k) == Some(v))
    }

    /// The frame `d` with `sub ⊎ d = self`, if `sub ⊆ self`.
    pub fn minus(&self, sub: &Self) -> Option<Self> {
        if !sub.is_sub_of(self) {
            return None;
        }
        Some(PcmMap(
            self.0
                .iter()
                .filter(|(k, _)| !sub.0.contains_key(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        ))
    }

    pub fn filter(&self, mut keep: impl FnMut(&K, &V) -> bool) -> Self {
        PcmMap(
            self.0
                .iter()
                .filter(|(k, v)| keep(k, v))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }
}

impl<K: Ord + Clone + fmt::Debug, V: Clone + PartialEq> Pcm for PcmMap<K, V> {
    fn unit() -> Self {
        Self::default()
    }

    fn join(&self, other: &Self) -> Result<Self, PcmError> {
        let (big, small) = if self.len() >= other.len() {
            (self, other)
        } else {
            (other, self)
        };
        let mut m = big.0.clone();
        for (k, v) in &small.0 {
            if m.insert(k.clone(), v.clone()).is_some() {
                return Err(PcmError::Overlap(format!("{k:?}")));
            }
        }
        Ok(PcmMap(m))
    }
}

impl<K: Ord + Clone + fmt::Debug, V: Clone + PartialEq> FromIterator<(K, V)> for PcmMap<K, V> {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        PcmMap(iter.into_iter().collect())
    }
}

/// Finite set under disjoint union.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PcmSet<T: Ord>(BTreeSet<T>);

impl<T: Ord + fmt::Debug> fmt::Debug for PcmSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.0.iter()).finish()
    }
}

impl<T: Ord> Default for PcmSet<T> {
    fn default() -> Self {
        PcmSet(BTreeSet::new())
    }
}

impl<T: Ord + Clone + fmt::Debug> PcmSet<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(x: T) -> Self {
        PcmSet(BTreeSet::from([x]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: &T) -> bool {
        self.0.contains(x)
    }

    pub fn iter(&self) -> impl DoubleEndedIterator<Item = &T> {
        self.0.iter()
    }

    pub fn with(&self, x: T) -> Result<Self, PcmError> {
        if self.0.contains(&x) {
            return Err(PcmError::Overlap(format!("{x:?}")));
        }
        let mut s = self.0.clone();
        s.insert(x);
        Ok(PcmSet(s))
    }

    pub fn without(&self, x: &T) -> Option<Self> {
        let mut s = self.0.clone();
        s.remove(x).then_some(PcmSet(s))
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.0.is_disjoint(&other.0)
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.0.intersection(&other.0).count()
    }

    /// Plain set union (not a PCM join; overlap is allowed).
    pub fn union(&self, other: &Self) -> Self {
        PcmSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &Self) -> Self {
        PcmSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn filter(&self, mut keep: impl FnMut(&T) -> bool) -> Self {
        PcmSet(self.0.iter().filter(|x| keep(x)).cloned().collect())
    }
}

impl<T: Ord + Clone + fmt::Debug> Pcm for PcmSet<T> {
    fn unit() -> Self {
        Self::default()
    }

    fn join(&self, other: &Self) -> Result<Self, PcmError> {
        if let Some(x) = self.0.intersection(&other.0).next() {
            return Err(PcmError::Overlap(format!("{x:?}")));
        }
        Ok(PcmSet(self.0.union(&other.0).cloned().collect()))
    }
}

impl<T: Ord + Clone + fmt::Debug> FromIterator<T> for PcmSet<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        PcmSet(iter.into_iter().collect())
    }
}

/// Joins a sequence of PCM values left to right.
pub fn join_all<'a, P: Pcm + 'a>(parts: impl IntoIterator<Item = &'a P>) -> Result<P, PcmError> {
    parts.into_iter().try_fold(P::unit(), |acc, p| acc.join(p))
}

pub fn pcm_join<P: Pcm>(a: &P, b: &P) -> Result<P, PcmError> {
    a.join(b)
}

/// Partner timestamp of an exchange: `t+1` for odd `t`, `t-1` for even `t`.
pub fn twin(t: Timestamp) -> Result<Timestamp, PcmError> {
    match t {
        0 => Err(PcmError::InvalidTimestamp(0)),
        t if t % 2 == 1 => Ok(t + 1),
        t => Ok(t - 1),
    }
}

/// Largest timestamp in a history; `None` for the empty history.
pub fn last<V>(h: &PcmMap<Timestamp, V>) -> Option<Timestamp> {
    h.0.keys().next_back().copied()
}

/// `last(h) < t`, vacuously true for the empty history.
pub fn last_below<V>(h: &PcmMap<Timestamp, V>, t: Timestamp) -> bool {
    last(h).is_none_or(|l| l < t)
}

/// Exchanger history entry: the caller gave `given` and received `received`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exchanged {
    pub given: Value,
    pub received: Value,
}

impl Exchanged {
    pub fn new(given: Value, received: Value) -> Self {
        Exchanged { given, received }
    }

    pub fn flipped(self) -> Self {
        Exchanged::new(self.received, self.given)
    }
}

pub type ExchangeHistory = PcmMap<Timestamp, Exchanged>;

/// Offer identifier. Id 0 plays the role of `null`; allocation starts at 1.
pub type OfferId = u64;

/// Matched-but-uncollected offer: the offer initially stored `offered`
/// and was matched with `matched`; the owner collects it at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PendingEntry {
    pub t: Timestamp,
    pub offered: Value,
    pub matched: Value,
}

pub type PendingMap = PcmMap<OfferId, PendingEntry>;

/// Collects the timestamped entries of all pending offers.
pub fn gather(pending: &PendingMap) -> Result<ExchangeHistory, PcmError> {
    pending
        .iter()
        .try_fold(ExchangeHistory::new(), |acc, (_, e)| {
            acc.with(e.t, Exchanged::new(e.offered, e.matched))
        })
}

pub type TokenId = u64;

/// Counter parity a token grants access to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Parity {
    Even = 0,
    Odd = 1,
}

impl Parity {
    pub fn from_bit(b: u8) -> Parity {
        if b & 1 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn bit(self) -> u8 {
        self as u8
    }

    pub fn of(t: Timestamp) -> Parity {
        Parity::from_bit((t & 1) as u8)
    }
}

/// Capability to perform one increment of the counter of its parity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Token {
    pub id: TokenId,
    pub parity: Parity,
}

impl Token {
    pub fn new(id: TokenId, parity: Parity) -> Self {
        Token { id, parity }
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "z{}^{}", self.id, self.parity.bit())
    }
}

pub type TokenSet = PcmSet<Token>;

/// Network history entry: tokens alive when the value was written, and the
/// token spent to write it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NetEntry {
    pub snapshot: TokenSet,
    pub spent: Token,
}

pub type NetworkHistory = PcmMap<Timestamp, NetEntry>;

/// All tokens spent in `h`.
pub fn spent(h: &NetworkHistory) -> TokenSet {
    h.iter().map(|(_, e)| e.spent).collect()
}

/// A thread's subjective split of one ghost component.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectiveView<P> {
    pub self_part: P,
    pub other_part: P,
}

impl<P: Pcm> SubjectiveView<P> {
    pub fn new(self_part: P, other_part: P) -> Result<Self, PcmError> {
        self_part.join(&other_part)?;
        Ok(SubjectiveView {
            self_part,
            other_part,
        })
    }

    /// The whole component as seen from this view.
    pub fn total(&self) -> Result<P, PcmError> {
        self.self_part.join(&self.other_part)
    }
}

/// Join of all self parts except thread `i`'s.
pub fn other_view<P: Pcm>(world: &[P], i: ThreadId) -> Result<P, PcmError> {
    if i >= world.len() {
        return Err(PcmError::UnknownThread(i));
    }
    // Full join first so overlaps involving `i` are reported too.
    join_all(world.iter())?;
    join_all(
        world
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, p)| p),
    )
}

/// Splits a parent view between two forked children: each child's other part
/// is the sibling's allocation joined with the parent's other part.
pub fn fork_split<P: Pcm>(
    parent: &SubjectiveView<P>,
    allocation: (P, P),
) -> Result<(SubjectiveView<P>, SubjectiveView<P>), PcmError> {
    let (x1, x2) = allocation;
    match x1.join(&x2) {
        Ok(s) if s == parent.self_part => {}
        _ => return Err(PcmError::Allocation),
    }
    let o1 = x2.join(&parent.other_part)?;
    let o2 = x1.join(&parent.other_part)?;
    Ok((
        SubjectiveView {
            self_part: x1,
            other_part: o1,
        },
        SubjectiveView {
            self_part: x2,
            other_part: o2,
        },
    ))
}

/// Inverse of [`fork_split`] at thread join. The parent's other part is
/// recovered by removing the sibling contribution from a child's other part.
pub fn join_merge<P: Pcm>(
    left: &SubjectiveView<P>,
    right: &SubjectiveView<P>,
    parent_other: &P,
) -> Result<SubjectiveView<P>, PcmError> {
    let self_part = left.self_part.join(&right.self_part)?;
    let expect_left_other = right.self_part.join(parent_other)?;
    let expect_right_other = left.self_part.join(parent_other)?;
    if expect_left_other != left.other_part || expect_right_other != right.other_part {
        return Err(PcmError::Allocation);
    }
    SubjectiveView::new(self_part, parent_other.clone())
}
