//! The exchanger and the counting network on hardware atomics, run by real
//! threads. No ghost state; results are checked after all threads join.

use std::collections::BTreeMap;
use std::ptr;
use std::sync::atomic::{AtomicPtr, AtomicU64, AtomicU8, AtomicUsize, Ordering::SeqCst};
use std::thread;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NativeObject {
    Exchanger,
    Network,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressReport {
    pub object: NativeObject,
    pub threads: usize,
    pub ops: usize,
    pub seed: u64,
    pub counters: BTreeMap<String, u64>,
    pub failures: Vec<String>,
    pub elapsed_ms: u128,
}

impl StressReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = format!(
            "native {:?} threads={} ops={} seed={} ({} ms)\n",
            self.object, self.threads, self.ops, self.seed, self.elapsed_ms
        );
        for (k, v) in &self.counters {
            s += &format!("  {k} = {v}\n");
        }
        for f in &self.failures {
            s += &format!("  failure: {f}\n");
        }
        s += if self.passed() { "PASS\n" } else { "FAIL\n" };
        s
    }
}

/// Balancer bit in front of an even and an odd counter.
pub struct NativeNetwork {
    bal: AtomicU8,
    counters: [AtomicU64; 2],
}

impl Default for NativeNetwork {
    fn default() -> Self {
        NativeNetwork {
            bal: AtomicU8::new(0),
            counters: [AtomicU64::new(0), AtomicU64::new(1)],
        }
    }
}

impl NativeNetwork {
    pub fn get_and_inc(&self) -> u64 {
        let b = self.bal.fetch_xor(1, SeqCst) as usize;
        self.counters[b].fetch_add(2, SeqCst)
    }

    pub fn counters(&self) -> (u64, u64) {
        (self.counters[0].load(SeqCst), self.counters[1].load(SeqCst))
    }
}

const UNMATCHED: u64 = 0;
const RETIRED: u64 = 1;

fn matched(v: u64) -> u64 {
    (v << 2) | 2
}

struct NativeOffer {
    value: u64,
    hole: AtomicU64,
}

/// Lock-free elimination exchanger. Published offers are never freed while
/// the exchanger is in use; each thread hands its published offers back to
/// the caller, which frees them after every thread has joined.
pub struct NativeExchanger {
    g: AtomicPtr<NativeOffer>,
}

impl Default for NativeExchanger {
    fn default() -> Self {
        NativeExchanger {
            g: AtomicPtr::new(ptr::null_mut()),
        }
    }
}

/// Published offers owned by one thread, freed by [`release`].
pub struct Published(Vec<usize>);

/// Frees offers published through `ex` once no thread can reach them.
pub fn release(_ex: NativeExchanger, published: Vec<Published>) {
    for p in published.into_iter().flat_map(|p| p.0) {
        // SAFETY: `p` came from `Box::into_raw` in `exchange`, was published
        // at most once, and every thread that could read it has joined.
        drop(unsafe { Box::from_raw(p as *mut NativeOffer) });
    }
}

impl NativeExchanger {
    /// One `exchange v`; `spins` is the back-off before retiring an offer.
    /// Values must be below 2^62.
    pub fn exchange(&self, v: u64, spins: u32, published: &mut Published) -> Option<u64> {
        let p = Box::into_raw(Box::new(NativeOffer {
            value: v,
            hole: AtomicU64::new(UNMATCHED),
        }));
        if self
            .g
            .compare_exchange(ptr::null_mut(), p, SeqCst, SeqCst)
            .is_ok()
        {
            published.0.push(p as usize);
            for _ in 0..spins {
                std::hint::spin_loop();
            }
            thread::yield_now();
            // SAFETY: `p` is published and freed only by `release`.
            let hole = unsafe { &(*p).hole };
            return match hole.compare_exchange(UNMATCHED, RETIRED, SeqCst, SeqCst) {
                Ok(_) => None,
                Err(m) => Some(m >> 2),
            };
        }
        // SAFETY: installation failed, so no other thread ever saw `p`.
        drop(unsafe { Box::from_raw(p) });
        let cur = self.g.load(SeqCst);
        if cur.is_null() {
            return None;
        }
        // SAFETY: non-null values of `g` are published offers, freed only by
        // `release` after all threads have joined.
        let offer = unsafe { &*cur };
        let won = offer
            .hole
            .compare_exchange(UNMATCHED, matched(v), SeqCst, SeqCst)
            .is_ok();
        let _ = self
            .g
            .compare_exchange(cur, ptr::null_mut(), SeqCst, SeqCst);
        won.then_some(offer.value)
    }
}

/// `threads × ops` getAndInc calls.
pub fn stress_network(threads: usize, ops: usize, seed: u64) -> StressReport {
    let start = Instant::now();
    let net = NativeNetwork::default();
    let per_thread: Vec<Vec<u64>> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|_| s.spawn(|| (0..ops).map(|_| net.get_and_inc()).collect::<Vec<u64>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut failures = Vec::new();
    let mut all: Vec<u64> = per_thread.iter().flatten().copied().collect();
    all.sort_unstable();
    let total = all.len();
    all.dedup();
    let duplicates = total - all.len();
    if duplicates > 0 {
        failures.push(format!("{duplicates} duplicate results"));
    }
    let even: Vec<u64> = all.iter().copied().filter(|r| r % 2 == 0).collect();
    let odd: Vec<u64> = all.iter().copied().filter(|r| r % 2 == 1).collect();
    let (c0, c1) = net.counters();
    if c0 != 2 * even.len() as u64 {
        failures.push(format!("c0 = {c0} but {} even results", even.len()));
    }
    if c1 != 2 * odd.len() as u64 + 1 {
        failures.push(format!("c1 = {c1} but {} odd results", odd.len()));
    }
    if !even
        .iter()
        .copied()
        .eq((0..even.len() as u64).map(|i| 2 * i))
        || !odd
            .iter()
            .copied()
            .eq((0..odd.len() as u64).map(|i| 2 * i + 1))
    {
        failures.push("results per counter are not a contiguous prefix".into());
    }
    let counters = BTreeMap::from([
        ("results".to_string(), total as u64),
        ("duplicates".to_string(), duplicates as u64),
        ("even".to_string(), even.len() as u64),
        ("odd".to_string(), odd.len() as u64),
        ("c0".to_string(), c0),
        ("c1".to_string(), c1),
    ]);
    StressReport {
        object: NativeObject::Network,
        threads,
        ops,
        seed,
        counters,
        failures,
        elapsed_ms: start.elapsed().as_millis(),
    }
}

/// Attempts per retrying call before it gives up.
pub const EXCHANGE_ATTEMPTS: usize = 10_000;

/// `threads × ops` retrying exchanges of distinct values. A thread stops
/// early once it is the only one left, since nobody can answer it.
pub fn stress_exchanger(threads: usize, ops: usize, seed: u64) -> StressReport {
    let start = Instant::now();
    let ex = NativeExchanger::default();
    let running = AtomicUsize::new(threads);
    type Output = (Vec<(u64, u64)>, u64, Published);
    let outputs: Vec<Output> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (ex, running) = (&ex, &running);
                s.spawn(move || {
                    let mut rng = ChaCha8Rng::seed_from_u64(
                        seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                    );
                    let mut published = Published(Vec::new());
                    let mut pairs = Vec::new();
                    let mut gave_up = 0;
                    'ops: for i in 0..ops {
                        let v = (t * ops + i + 1) as u64;
                        for _ in 0..EXCHANGE_ATTEMPTS {
                            if let Some(w) = ex.exchange(v, rng.gen_range(0..64), &mut published) {
                                pairs.push((v, w));
                                continue 'ops;
                            }
                            if running.load(SeqCst) == 1 {
                                gave_up += (ops - i) as u64;
                                break 'ops;
                            }
                        }
                        gave_up += 1;
                    }
                    running.fetch_sub(1, SeqCst);
                    (pairs, gave_up, published)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut published = Vec::new();
    let mut pairs = Vec::new();
    let mut gave_up = 0;
    for (p, g, pubs) in outputs {
        pairs.extend(p);
        gave_up += g;
        published.push(pubs);
    }
    release(ex, published);

    let mut failures = Vec::new();
    let mut forward = pairs.clone();
    let mut backward: Vec<(u64, u64)> = pairs.iter().map(|&(v, w)| (w, v)).collect();
    forward.sort_unstable();
    backward.sort_unstable();
    if forward != backward {
        let unpaired = forward
            .iter()
            .filter(|p| backward.binary_search(p).is_err())
            .count();
        failures.push(format!("{unpaired} successful exchanges have no partner"));
    }
    if pairs.iter().any(|(v, w)| v == w) {
        failures.push("a value was exchanged with itself".into());
    }
    let counters = BTreeMap::from([
        ("calls".to_string(), (threads * ops) as u64),
        ("successes".to_string(), pairs.len() as u64),
        ("gave_up".to_string(), gave_up),
    ]);
    StressReport {
        object: NativeObject::Exchanger,
        threads,
        ops,
        seed,
        counters,
        failures,
        elapsed_ms: start.elapsed().as_millis(),
    }
}

pub fn run_native_stress(
    object: NativeObject,
    threads: usize,
    ops: usize,
    seed: u64,
) -> StressReport {
    match object {
        NativeObject::Exchanger => stress_exchanger(threads, ops, seed),
        NativeObject::Network => stress_network(threads, ops, seed),
    }
}
