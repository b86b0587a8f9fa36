//! Registered client programs, their closed-world teardown checks and final
//! assertions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::check::{Checker, Violation};
use crate::pcm::{
    join_merge, twin, ExchangeHistory, Exchanged, Pcm, PcmMap, SubjectiveView, ThreadId, Timestamp,
    Value,
};
use crate::vm::{Bounds, CallResult, Task, ValueSrc, World};

/// Largest `k` accepted by exhaustive `e-qc`.
pub const EQC_MAX_K: usize = 2;
/// Largest `N` accepted by exhaustive `e-qqc`.
pub const EQQC_MAX_N: usize = 4;
/// Largest list length accepted by exhaustive `ex-seq`.
pub const EXSEQ_MAX_LEN: usize = 3;
/// Hard cap on parameters in any mode.
pub const PARAM_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("parameter {param} = {value} is out of range (at most {limit} in {mode} mode)")]
    OutOfRange {
        param: &'static str,
        value: usize,
        limit: usize,
        mode: &'static str,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// One component of a terminal result tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OutVal {
    Opt(Option<Value>),
    Int(i64),
    List(Vec<Value>),
}

impl fmt::Display for OutVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutVal::Opt(None) => write!(f, "None"),
            OutVal::Opt(Some(v)) => write!(f, "Some {v}"),
            OutVal::Int(v) => write!(f, "{v}"),
            OutVal::List(vs) => {
                let items: Vec<String> = vs.iter().map(|v| v.to_string()).collect();
                write!(f, "[{}]", items.join(","))
            }
        }
    }
}

impl FromStr for OutVal {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = |_| format!("bad outcome component `{s}`");
        if s == "None" {
            Ok(OutVal::Opt(None))
        } else if let Some(v) = s.strip_prefix("Some ") {
            Ok(OutVal::Opt(Some(v.trim().parse().map_err(bad)?)))
        } else if let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            if inner.trim().is_empty() {
                return Ok(OutVal::List(Vec::new()));
            }
            inner
                .split(',')
                .map(|x| x.trim().parse().map_err(bad))
                .collect::<Result<_, _>>()
                .map(OutVal::List)
        } else {
            Ok(OutVal::Int(s.parse().map_err(bad)?))
        }
    }
}

impl Serialize for OutVal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OutVal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub type Outcome = Vec<OutVal>;

pub fn format_outcome(o: &[OutVal]) -> String {
    let parts: Vec<String> = o.iter().map(|v| v.to_string()).collect();
    format!("({})", parts.join(", "))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// `exchange a ∥ exchange b`, no retries.
    ExchangePair { a: Value, b: Value },
    /// `threads` concurrent `flip2` calls on a bit initialised to 0.
    Flip2 { threads: usize },
    /// Both threads run `flip2`, join, then exchange their results once.
    FlipExchange,
    /// Each thread exchanges its list element by element, retrying.
    ExSeq { vs1: Vec<Value>, vs2: Vec<Value> },
    /// Two `getAndInc` calls separated by a quiescent point, each running
    /// alongside `k` interfering calls.
    EQc { k: usize },
    /// Two sequential `getAndInc` calls alongside `n` interfering calls.
    EQqc { n: usize },
}

/// Registry entry shown by `list`.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub params: &'static str,
    pub assertion: &'static str,
}

pub fn registry() -> Vec<ScenarioInfo> {
    vec![
        ScenarioInfo {
            name: "exchange-pair",
            params: "none",
            assertion: "(r1, r2) in {(None, None), (Some 2, Some 1)}",
        },
        ScenarioInfo {
            name: "flip2-pair",
            params: "none",
            assertion: "r1 + r2 = 2; flip entries are a permutation of [1,0,1,0]",
        },
        ScenarioInfo {
            name: "flip-exchange",
            params: "none",
            assertion: "t = 2; on double success v1 = r2 and v2 = r1",
        },
        ScenarioInfo {
            name: "ex-seq",
            params: "--vs1 a,b --vs2 c,d (equal lengths, at most 3 when exhaustive)",
            assertion: "res = (vs2, vs1); each self history = zip ts vs res with ts increasing and twin-free",
        },
        ScenarioInfo {
            name: "e-qc",
            params: "--k calls per interferer (at most 2 when exhaustive)",
            assertion: "res1 < res2",
        },
        ScenarioInfo {
            name: "e-qqc",
            params: "--n interferer calls (at most 4 when exhaustive)",
            assertion: "res1 < res2 + 2N; all results distinct",
        },
    ]
}

/// Raw parameters as supplied on the command line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioParams {
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub vs1: Option<Vec<Value>>,
    pub vs2: Option<Vec<Value>>,
}

impl Scenario {
    pub fn exchange_pair() -> Self {
        Scenario::ExchangePair { a: 1, b: 2 }
    }

    pub fn flip2_pair() -> Self {
        Scenario::Flip2 { threads: 2 }
    }

    pub fn flip_exchange() -> Self {
        Scenario::FlipExchange
    }

    pub fn ex_seq(vs1: Vec<Value>, vs2: Vec<Value>) -> Self {
        Scenario::ExSeq { vs1, vs2 }
    }

    pub fn e_qc(k: usize) -> Self {
        Scenario::EQc { k }
    }

    pub fn e_qqc(n: usize) -> Self {
        Scenario::EQqc { n }
    }

    pub fn from_name(name: &str, p: &ScenarioParams) -> Result<Self, ConfigError> {
        let cap = |param: &'static str, v: usize| {
            if v > PARAM_CAP {
                Err(ConfigError::OutOfRange {
                    param,
                    value: v,
                    limit: PARAM_CAP,
                    mode: "any",
                })
            } else {
                Ok(v)
            }
        };
        match name {
            "exchange-pair" => Ok(Scenario::exchange_pair()),
            "flip2-pair" => Ok(Scenario::flip2_pair()),
            "flip-exchange" => Ok(Scenario::FlipExchange),
            "ex-seq" => {
                let vs1 = p.vs1.clone().unwrap_or_else(|| vec![1, 2]);
                let vs2 = p.vs2.clone().unwrap_or_else(|| vec![3, 4]);
                if vs1.len() != vs2.len() {
                    return Err(ConfigError::Invalid(format!(
                        "vs1 and vs2 must have equal lengths ({} vs {})",
                        vs1.len(),
                        vs2.len()
                    )));
                }
                cap("vs length", vs1.len())?;
                Ok(Scenario::ExSeq { vs1, vs2 })
            }
            "e-qc" => Ok(Scenario::EQc {
                k: cap("k", p.k.unwrap_or(1))?,
            }),
            "e-qqc" => Ok(Scenario::EQqc {
                n: cap("n", p.n.unwrap_or(1))?,
            }),
            other => Err(ConfigError::UnknownScenario(other.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ExchangePair { .. } => "exchange-pair",
            Scenario::Flip2 { .. } => "flip2-pair",
            Scenario::FlipExchange => "flip-exchange",
            Scenario::ExSeq { .. } => "ex-seq",
            Scenario::EQc { .. } => "e-qc",
            Scenario::EQqc { .. } => "e-qqc",
        }
    }

    /// Parameters as `key=value` pairs, used in trace headers.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        let list = |vs: &[Value]| {
            vs.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match self {
            Scenario::ExchangePair { a, b } => vec![("a", a.to_string()), ("b", b.to_string())],
            Scenario::Flip2 { threads } => vec![("threads", threads.to_string())],
            Scenario::FlipExchange => vec![],
            Scenario::ExSeq { vs1, vs2 } => vec![("vs1", list(vs1)), ("vs2", list(vs2))],
            Scenario::EQc { k } => vec![("k", k.to_string())],
            Scenario::EQqc { n } => vec![("n", n.to_string())],
        }
    }

    /// Rebuilds a scenario from its name and [`Scenario::params`] output.
    pub fn from_params(name: &str, kv: &[(String, String)]) -> Result<Self, ConfigError> {
        let get = |key: &str| kv.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let num = |key: &str| -> Result<Option<i64>, ConfigError> {
            get(key)
                .map(|v| {
                    v.parse()
                        .map_err(|_| ConfigError::Invalid(format!("bad {key}={v}")))
                })
                .transpose()
        };
        let list = |key: &str| -> Result<Option<Vec<Value>>, ConfigError> {
            get(key)
                .map(|v| parse_values(v).map_err(ConfigError::Invalid))
                .transpose()
        };
        match name {
            "exchange-pair" => Ok(Scenario::ExchangePair {
                a: num("a")?.unwrap_or(1),
                b: num("b")?.unwrap_or(2),
            }),
            "flip2-pair" => {
                let threads = num("threads")?.unwrap_or(2);
                let threads = usize::try_from(threads)
                    .ok()
                    .filter(|&t| t <= PARAM_CAP)
                    .ok_or_else(|| ConfigError::Invalid(format!("bad threads={threads}")))?;
                Ok(Scenario::Flip2 { threads })
            }
            _ => {
                let to_usize = |v: Option<i64>| v.map(|x| x.max(0) as usize);
                let params = ScenarioParams {
                    n: to_usize(num("n")?),
                    k: to_usize(num("k")?),
                    vs1: list("vs1")?,
                    vs2: list("vs2")?,
                };
                Scenario::from_name(name, &params)
            }
        }
    }

    /// Rejects parameters whose schedule tree is too large to enumerate.
    pub fn validate_exhaustive(&self) -> Result<(), ConfigError> {
        let check = |param, value, limit| {
            if value > limit {
                Err(ConfigError::OutOfRange {
                    param,
                    value,
                    limit,
                    mode: "exhaustive",
                })
            } else {
                Ok(())
            }
        };
        match self {
            Scenario::EQc { k } => check("k", *k, EQC_MAX_K),
            Scenario::EQqc { n } => check("n", *n, EQQC_MAX_N),
            Scenario::ExSeq { vs1, .. } => check("vs length", vs1.len(), EXSEQ_MAX_LEN),
            Scenario::Flip2 { threads } => check("threads", *threads, 3),
            _ => Ok(()),
        }
    }

    /// Per-thread programs.
    pub fn programs(&self) -> Vec<Vec<Task>> {
        let exch = |v, retry| Task::Exchange {
            value: ValueSrc::Const(v),
            retry,
        };
        match self {
            Scenario::ExchangePair { a, b } => vec![vec![exch(*a, false)], vec![exch(*b, false)]],
            Scenario::Flip2 { threads } => vec![vec![Task::Flip2]; *threads],
            Scenario::FlipExchange => {
                let t = vec![
                    Task::Flip2,
                    Task::Barrier,
                    Task::Exchange {
                        value: ValueSrc::LastFlip2,
                        retry: false,
                    },
                ];
                vec![t.clone(), t]
            }
            Scenario::ExSeq { vs1, vs2 } => vec![
                vs1.iter().map(|&v| exch(v, true)).collect(),
                vs2.iter().map(|&v| exch(v, true)).collect(),
            ],
            Scenario::EQc { k } => {
                let mut inter = vec![Task::GetAndInc; *k];
                inter.push(Task::Barrier);
                inter.extend(vec![Task::GetAndInc; *k]);
                vec![vec![Task::GetAndInc, Task::Barrier, Task::GetAndInc], inter]
            }
            Scenario::EQqc { n } => vec![vec![Task::GetAndInc; 2], vec![Task::GetAndInc; *n]],
        }
    }

    /// Initial world: object states plus compiled programs.
    pub fn compile(&self, bounds: Bounds) -> World {
        World::new(self.programs(), bounds, 0)
    }

    /// Terminal result tuple.
    pub fn outcome(&self, w: &World) -> Outcome {
        let ex_results = |t: ThreadId| -> Vec<Option<Value>> {
            w.results(t)
                .iter()
                .filter_map(|r| match r {
                    CallResult::Exchange(x) => Some(*x),
                    _ => None,
                })
                .collect()
        };
        let flip_result = |t: ThreadId| {
            w.results(t).iter().find_map(|r| match r {
                CallResult::Flip2(x) => Some(*x as i64),
                _ => None,
            })
        };
        let inc_results = |t: ThreadId| -> Vec<i64> {
            w.results(t)
                .iter()
                .filter_map(|r| match r {
                    CallResult::Inc(x) => Some(*x as i64),
                    _ => None,
                })
                .collect()
        };
        match self {
            Scenario::ExchangePair { .. } => (0..2)
                .map(|t| OutVal::Opt(ex_results(t).first().copied().flatten()))
                .collect(),
            Scenario::Flip2 { threads } => (0..*threads)
                .map(|t| OutVal::Int(flip_result(t).unwrap_or(-1)))
                .collect(),
            Scenario::FlipExchange => {
                let r: Vec<i64> = (0..2).map(|t| flip_result(t).unwrap_or(-1)).collect();
                let v: Vec<Option<Value>> = (0..2)
                    .map(|t| ex_results(t).first().copied().flatten())
                    .collect();
                let t = match (v[0], v[1]) {
                    (Some(a), Some(b)) => a + b,
                    _ => 2,
                };
                vec![
                    OutVal::Int(r[0]),
                    OutVal::Int(r[1]),
                    OutVal::Opt(v[0]),
                    OutVal::Opt(v[1]),
                    OutVal::Int(t),
                ]
            }
            Scenario::ExSeq { .. } => (0..2)
                .map(|t| {
                    OutVal::List(
                        ex_results(t)
                            .into_iter()
                            .map(|x| x.unwrap_or(i64::MIN))
                            .collect(),
                    )
                })
                .collect(),
            Scenario::EQc { .. } | Scenario::EQqc { .. } => {
                let main = inc_results(0);
                vec![
                    OutVal::Int(main.first().copied().unwrap_or(-1)),
                    OutVal::Int(main.get(1).copied().unwrap_or(-1)),
                ]
            }
        }
    }

    /// Names of the witnesses an outcome exhibits.
    pub fn witnesses(&self, o: &[OutVal]) -> Vec<&'static str> {
        match (self, o) {
            (Scenario::ExchangePair { .. }, [OutVal::Opt(Some(_)), OutVal::Opt(Some(_))]) => {
                vec!["double-success"]
            }
            (Scenario::FlipExchange, [_, _, OutVal::Opt(Some(_)), OutVal::Opt(Some(_)), _]) => {
                vec!["double-success"]
            }
            (Scenario::EQqc { .. }, [OutVal::Int(a), OutVal::Int(b)]) if a > b => vec!["reorder"],
            _ => vec![],
        }
    }

    /// Final assertion plus closed-world teardown, for complete executions.
    pub fn final_check(&self, w: &World) -> Vec<Violation> {
        let mut c = Checker::default();
        let o = self.outcome(w);
        match self {
            Scenario::ExchangePair { a, b } => {
                let ok = o == [OutVal::Opt(None), OutVal::Opt(None)]
                    || o == [OutVal::Opt(Some(*b)), OutVal::Opt(Some(*a))];
                c.ensure(ok, "final.exchange", || {
                    format!(
                        "outcome {} is neither (None, None) nor (Some {b}, Some {a})",
                        format_outcome(&o)
                    )
                });
                exchanger_teardown(&mut c, w);
            }
            Scenario::Flip2 { threads } => {
                let sum: i64 = o
                    .iter()
                    .map(|v| if let OutVal::Int(x) = v { *x } else { 0 })
                    .sum();
                c.ensure(sum == *threads as i64, "final.flip2", || {
                    format!(
                        "results {} sum to {sum}, expected {threads}",
                        format_outcome(&o)
                    )
                });
                flip_teardown(&mut c, w, *threads);
            }
            Scenario::FlipExchange => {
                c.ensure(o[4] == OutVal::Int(2), "final.flip_exchange", || {
                    format!("t = {} in outcome {}", o[4], format_outcome(&o))
                });
                if let [OutVal::Int(r1), OutVal::Int(r2), OutVal::Opt(Some(v1)), OutVal::Opt(Some(v2)), _] =
                    o.as_slice()
                {
                    c.ensure(v1 == r2 && v2 == r1, "final.flip_exchange.swap", || {
                        format!("double success with v = ({v1}, {v2}) but r = ({r1}, {r2})")
                    });
                }
                flip_teardown(&mut c, w, 2);
                exchanger_teardown(&mut c, w);
            }
            Scenario::ExSeq { vs1, vs2 } => {
                let expect = vec![OutVal::List(vs2.clone()), OutVal::List(vs1.clone())];
                c.ensure(o == expect, "final.exseq", || {
                    format!(
                        "outcome {} differs from {}",
                        format_outcome(&o),
                        format_outcome(&expect)
                    )
                });
                if let Some(ex) = &w.ex {
                    let mut ts_all = Vec::new();
                    for (t, vs) in [vs1, vs2].into_iter().enumerate() {
                        let hist = &ex.selves[t].hist;
                        let ts: Vec<Timestamp> = hist.keys().copied().collect();
                        let ws: Vec<Value> = match &o[t] {
                            OutVal::List(ws) => ws.clone(),
                            _ => Vec::new(),
                        };
                        if let Err(v) = check_zip_post(hist, &ts, vs, &ws) {
                            c.out.push(v);
                        }
                        ts_all.push(ts);
                    }
                    let image: Option<Vec<Timestamp>> =
                        ts_all[0].iter().map(|&t| twin(t).ok()).collect();
                    let mut image = image.unwrap_or_default();
                    image.sort_unstable();
                    c.ensure(image == ts_all[1], "final.exseq.twins", || {
                        format!(
                            "second thread's timestamps {:?} are not the twin image of {:?}",
                            ts_all[1], ts_all[0]
                        )
                    });
                }
                exchanger_teardown(&mut c, w);
            }
            Scenario::EQc { k } => {
                if let [OutVal::Int(r1), OutVal::Int(r2)] = o.as_slice() {
                    c.ensure(r1 < r2, "quiescent.order", || {
                        format!("res1 = {r1} is not below res2 = {r2}")
                    });
                }
                network_teardown(&mut c, w, 2 * k);
            }
            Scenario::EQqc { n } => {
                if let [OutVal::Int(r1), OutVal::Int(r2)] = o.as_slice() {
                    let bound = r2 + 2 * *n as i64;
                    c.ensure(r1 < &bound, "reorder.bound", || {
                        format!("res1 = {r1} is not below res2 + 2N = {bound}")
                    });
                }
                network_teardown(&mut c, w, *n);
            }
        }
        c.finish()
    }
}

/// Parses a comma-separated value list.
pub fn parse_values(s: &str) -> Result<Vec<Value>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| format!("bad value `{x}` in list `{s}`"))
        })
        .collect()
}

/// `⊎ tᵢ ↦ (vᵢ, wᵢ)`.
pub fn zip(ts: &[Timestamp], vs: &[Value], ws: &[Value]) -> Option<ExchangeHistory> {
    if ts.len() != vs.len() || vs.len() != ws.len() {
        return None;
    }
    let mut h = ExchangeHistory::new();
    for ((&t, &v), &w) in ts.iter().zip(vs).zip(ws) {
        h = h.with(t, Exchanged::new(v, w)).ok()?;
    }
    Some(h)
}

/// Strictly increasing, and never both `t` and `twin(t)`.
pub fn grows_notwins(ts: &[Timestamp]) -> bool {
    ts.windows(2).all(|w| w[0] < w[1])
        && ts
            .iter()
            .all(|&t| twin(t).map(|u| !ts.contains(&u)).unwrap_or(false))
}

pub fn check_zip_post(
    hist: &ExchangeHistory,
    ts: &[Timestamp],
    vs: &[Value],
    ws: &[Value],
) -> Result<(), Violation> {
    let Some(expect) = zip(ts, vs, ws) else {
        return Err(Violation::new(
            "zip",
            format!("lengths differ or timestamps repeat: ts={ts:?} vs={vs:?} ws={ws:?}"),
        ));
    };
    if &expect != hist {
        return Err(Violation::new(
            "zip",
            format!("history {hist:?} differs from {expect:?}"),
        ));
    }
    if !grows_notwins(ts) {
        return Err(Violation::new(
            "zip.grows_notwins",
            format!("timestamps {ts:?}"),
        ));
    }
    Ok(())
}

/// Merges the two children's views back into the group's view; the group's
/// other part must be exactly `external` and its total the whole component.
fn merge_pair<P: Pcm + fmt::Debug>(
    c: &mut Checker,
    clause: &str,
    selves: &[P],
    external: &P,
    total: &P,
) -> Option<SubjectiveView<P>> {
    let [s0, s1] = selves else { return None };
    let view = |me: &P, sib: &P| {
        sib.join(external).map(|o| SubjectiveView {
            self_part: me.clone(),
            other_part: o,
        })
    };
    let merged = view(s0, s1)
        .and_then(|l| view(s1, s0).map(|r| (l, r)))
        .and_then(|(l, r)| join_merge(&l, &r, external));
    match merged {
        Ok(parent) => {
            c.ensure(parent.total().as_ref() == Ok(total), clause, || {
                format!("group view {parent:?} does not cover {total:?}")
            });
            Some(parent)
        }
        Err(e) => {
            c.fail(clause, format!("children do not merge: {e}"));
            None
        }
    }
}

fn exchanger_teardown(c: &mut Checker, w: &World) {
    let Some(ex) = &w.ex else { return };
    c.ensure(ex.pending.is_empty(), "hide.exchanger", || {
        format!("matched offers left uncollected: {:?}", ex.pending)
    });
    for (t, s) in ex.selves.iter().enumerate() {
        c.ensure(
            s.perms.is_empty() && s.heap.is_empty(),
            "hide.exchanger",
            || {
                format!(
                    "thread {t} still owns offers: heap {:?}, perms {:?}",
                    s.heap, s.perms
                )
            },
        );
    }
    if let Ok(total) = ex.global_history() {
        let hists: Vec<ExchangeHistory> = ex.selves.iter().map(|s| s.hist.clone()).collect();
        merge_pair(
            c,
            "hide.exchanger",
            &hists,
            &ExchangeHistory::unit(),
            &total,
        );
    }
}

fn flip_teardown(c: &mut Checker, w: &World, threads: usize) {
    let Some(fl) = &w.flip else { return };
    let Ok(h) = fl.history() else { return };
    let mut bits: Vec<u8> = h.iter().map(|(_, b)| *b).collect();
    bits.sort_unstable();
    let mut expect: Vec<u8> = [1u8, 0].repeat(threads);
    expect.sort_unstable();
    c.ensure(bits == expect, "final.flip2.perm", || {
        format!("flip entries {h:?} are not a permutation of [1,0]x{threads}")
    });
    merge_pair(c, "hide.flip", &fl.selves, &PcmMap::unit(), &h);
}

/// Interferer (thread 1) must leave `interferer_entries` history entries and
/// no alive tokens; the group's external part is only the default history.
fn network_teardown(c: &mut Checker, w: &World, interferer_entries: usize) {
    let Some(net) = &w.net else { return };
    let results: Vec<u64> = (0..w.thread_count())
        .flat_map(|t| w.results(t).iter())
        .filter_map(|r| match r {
            CallResult::Inc(x) => Some(*x),
            _ => None,
        })
        .collect();
    let mut sorted = results.clone();
    sorted.sort_unstable();
    sorted.dedup();
    c.ensure(sorted.len() == results.len(), "distinct", || {
        format!("duplicate results in {results:?}")
    });
    for (t, s) in net.selves.iter().enumerate() {
        c.ensure(s.tokens.is_empty(), "hide.network", || {
            format!("thread {t} still holds tokens {:?}", s.tokens)
        });
    }
    if let Some(inter) = net.selves.get(1) {
        c.ensure(
            inter.hist.len() == interferer_entries,
            "hide.interferer",
            || {
                format!(
                    "interferer contributed {} entries, expected {interferer_entries}",
                    inter.hist.len()
                )
            },
        );
    }
    if let Ok(total) = net.history() {
        let hists: Vec<_> = net.selves.iter().map(|s| s.hist.clone()).collect();
        merge_pair(c, "hide.network", &hists, &net.initial, &total);
        let tokens: Vec<_> = net.selves.iter().map(|s| s.tokens.clone()).collect();
        if let Ok(alive) = net.alive() {
            merge_pair(c, "hide.network", &tokens, &Default::default(), &alive);
        }
    }
}
