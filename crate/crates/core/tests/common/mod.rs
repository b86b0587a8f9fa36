//! Reference interpreters of the client programs, written directly against
//! the real memory of each object with no ghost state, plus a recursive
//! enumerator over all their interleavings.

#![allow(dead_code)]

use std::collections::BTreeMap;

pub trait Model: Clone {
    type Out: Ord + Clone;
    fn runnable(&self) -> Vec<usize>;
    fn step(&mut self, thread: usize);
    fn outcome(&self) -> Self::Out;
}

/// Outcome multiset and number of maximal schedules.
pub fn enumerate<M: Model>(m: &M) -> (BTreeMap<M::Out, usize>, usize) {
    fn go<M: Model>(m: &M, out: &mut BTreeMap<M::Out, usize>, n: &mut usize) {
        let r = m.runnable();
        if r.is_empty() {
            *out.entry(m.outcome()).or_default() += 1;
            *n += 1;
            return;
        }
        for t in r {
            let mut next = m.clone();
            next.step(t);
            go(&next, out, n);
        }
    }
    let mut out = BTreeMap::new();
    let mut n = 0;
    go(m, &mut out, &mut n);
    (out, n)
}

/// Number of interleavings of straight-line threads with the given lengths.
pub fn multinomial(lens: &[usize]) -> u128 {
    let mut total = 0usize;
    let mut acc: u128 = 1;
    for &l in lens {
        for i in 1..=l {
            total += 1;
            acc = acc * total as u128 / i as u128;
        }
    }
    acc
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Hole {
    U,
    R,
    M(i64),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Pc {
    Alloc,
    Install,
    Sleep(u32),
    Timeout,
    Dealloc,
    ReadG,
    Match,
    Unlink,
    ReadVal,
    Done,
}

#[derive(Clone, Debug)]
struct ExThread {
    v: i64,
    pc: Pc,
    mine: usize,
    cur: usize,
    won: bool,
    res: Option<i64>,
}

/// Concurrent single `exchange` calls, one per thread.
#[derive(Clone, Debug)]
pub struct ExchangeModel {
    g: Option<usize>,
    cells: Vec<(i64, Hole)>,
    threads: Vec<ExThread>,
    yields: u32,
}

impl ExchangeModel {
    pub fn new(values: &[i64], yields: u32) -> Self {
        ExchangeModel {
            g: None,
            cells: Vec::new(),
            threads: values
                .iter()
                .map(|&v| ExThread {
                    v,
                    pc: Pc::Alloc,
                    mine: 0,
                    cur: 0,
                    won: false,
                    res: None,
                })
                .collect(),
            yields,
        }
    }
}

impl Model for ExchangeModel {
    type Out = Vec<Option<i64>>;

    fn runnable(&self) -> Vec<usize> {
        (0..self.threads.len())
            .filter(|&i| self.threads[i].pc != Pc::Done)
            .collect()
    }

    fn step(&mut self, i: usize) {
        let yields = self.yields;
        let t = &mut self.threads[i];
        t.pc = match t.pc {
            Pc::Alloc => {
                t.mine = self.cells.len();
                self.cells.push((t.v, Hole::U));
                Pc::Install
            }
            Pc::Install if self.g.is_none() => {
                self.g = Some(t.mine);
                if yields > 0 {
                    Pc::Sleep(yields)
                } else {
                    Pc::Timeout
                }
            }
            Pc::Install => Pc::Dealloc,
            Pc::Sleep(n) if n > 1 => Pc::Sleep(n - 1),
            Pc::Sleep(_) => Pc::Timeout,
            Pc::Timeout => {
                match self.cells[t.mine].1 {
                    Hole::U => self.cells[t.mine].1 = Hole::R,
                    Hole::M(w) => t.res = Some(w),
                    Hole::R => panic!("own offer retired twice"),
                }
                Pc::Done
            }
            Pc::Dealloc => Pc::ReadG,
            Pc::ReadG => match self.g {
                None => Pc::Done,
                Some(c) => {
                    t.cur = c;
                    Pc::Match
                }
            },
            Pc::Match => {
                if self.cells[t.cur].1 == Hole::U {
                    self.cells[t.cur].1 = Hole::M(t.v);
                    t.won = true;
                }
                Pc::Unlink
            }
            Pc::Unlink => {
                if self.g == Some(t.cur) {
                    self.g = None;
                }
                if t.won {
                    Pc::ReadVal
                } else {
                    Pc::Done
                }
            }
            Pc::ReadVal => {
                t.res = Some(self.cells[t.cur].0);
                Pc::Done
            }
            Pc::Done => panic!("finished thread scheduled"),
        };
    }

    fn outcome(&self) -> Vec<Option<i64>> {
        self.threads.iter().map(|t| t.res).collect()
    }
}

/// Concurrent `flip2` calls on a bit starting at 0.
#[derive(Clone, Debug)]
pub struct FlipModel {
    x: u8,
    threads: Vec<(u8, i64)>,
}

impl FlipModel {
    pub fn new(threads: usize) -> Self {
        FlipModel {
            x: 0,
            threads: vec![(0, 0); threads],
        }
    }
}

impl Model for FlipModel {
    type Out = Vec<i64>;

    fn runnable(&self) -> Vec<usize> {
        (0..self.threads.len())
            .filter(|&i| self.threads[i].0 < 2)
            .collect()
    }

    fn step(&mut self, i: usize) {
        let old = self.x;
        self.x ^= 1;
        // the result counts zeros among the written bits, i.e. the old ones
        self.threads[i].0 += 1;
        self.threads[i].1 += old as i64;
    }

    fn outcome(&self) -> Vec<i64> {
        self.threads.iter().map(|t| t.1).collect()
    }
}

#[derive(Clone, Debug)]
struct IncThread {
    calls: usize,
    wire: Option<usize>,
    results: Vec<u64>,
}

/// Threads making sequential `getAndInc` calls on a balancer and two
/// counters. Thread 0 is the observed one.
#[derive(Clone, Debug)]
pub struct NetModel {
    bal: usize,
    counters: [u64; 2],
    threads: Vec<IncThread>,
}

impl NetModel {
    pub fn new(calls: &[usize]) -> Self {
        NetModel {
            bal: 0,
            counters: [0, 1],
            threads: calls
                .iter()
                .map(|&calls| IncThread {
                    calls,
                    wire: None,
                    results: Vec::new(),
                })
                .collect(),
        }
    }
}

impl Model for NetModel {
    type Out = Vec<i64>;

    fn runnable(&self) -> Vec<usize> {
        (0..self.threads.len())
            .filter(|&i| self.threads[i].results.len() < self.threads[i].calls)
            .collect()
    }

    fn step(&mut self, i: usize) {
        let t = &mut self.threads[i];
        match t.wire.take() {
            None => {
                t.wire = Some(self.bal);
                self.bal ^= 1;
            }
            Some(w) => {
                t.results.push(self.counters[w]);
                self.counters[w] += 2;
            }
        }
    }

    fn outcome(&self) -> Vec<i64> {
        self.threads[0].results.iter().map(|&r| r as i64).collect()
    }
}
