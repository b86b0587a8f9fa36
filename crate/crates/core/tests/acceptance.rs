//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{enumerate, multinomial, ExchangeModel, FlipModel, NetModel};
use subjhist::explore::{explore_exhaustive, replay_trace, replay_world};
use subjhist::native::{stress_exchanger, stress_network};
use subjhist::network::intersection_bound;
use subjhist::pcm::{Parity, Token, TokenSet};
use subjhist::report::ExplorationReport;
use subjhist::scenarios::{format_outcome, OutVal, Scenario};
use subjhist::trace::Trace;
use subjhist::vm::Bounds;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exhaustive(s: &Scenario, bounds: Bounds) -> Result<ExplorationReport, String> {
    let r = explore_exhaustive(s, bounds).map_err(|e| e.to_string())?;
    ensure(r.passed(), || {
        format!("{} reported violations:\n{}", s.name(), r.render())
    })?;
    Ok(r)
}

fn ints(o: &[OutVal]) -> Vec<i64> {
    o.iter()
        .map(|v| match v {
            OutVal::Int(x) => *x,
            other => panic!("expected an integer, got {other}"),
        })
        .collect()
}

fn exchanger_client_outcomes() -> Check {
    let r = exhaustive(&Scenario::exchange_pair(), Bounds::default())?;
    let none = vec![OutVal::Opt(None), OutVal::Opt(None)];
    let swap = vec![OutVal::Opt(Some(2)), OutVal::Opt(Some(1))];
    let set: Vec<_> = r.outcome_set().into_iter().cloned().collect();
    ensure(set == vec![none.clone(), swap.clone()], || {
        format!(
            "outcome set {:?}",
            set.iter().map(|o| format_outcome(o)).collect::<Vec<_>>()
        )
    })?;
    ensure(r.count_of(&none) > 0 && r.count_of(&swap) > 0, || {
        "an outcome was not witnessed".into()
    })?;
    Ok(format!(
        "{} schedules, (None, None) x{}, (Some 2, Some 1) x{}",
        r.executions,
        r.count_of(&none),
        r.count_of(&swap)
    ))
}

fn sequential_schedules() -> Check {
    let s = Scenario::exchange_pair();
    for (first, second) in [(0, 1), (1, 0)] {
        let mut w = s.compile(Bounds::default());
        let mut schedule = Vec::new();
        for t in [first, second] {
            while w.runnable().contains(&t) {
                w.step(t).map_err(|e| e.to_string())?;
                schedule.push(t);
            }
        }
        let o = s.outcome(&w);
        ensure(w.is_terminal(), || {
            "sequential schedule did not terminate".into()
        })?;
        ensure(o == [OutVal::Opt(None), OutVal::Opt(None)], || {
            format!("thread {first} then {second} gave {}", format_outcome(&o))
        })?;
        let r = replay_trace(&s, Bounds::default(), &schedule).map_err(|e| e.to_string())?;
        ensure(r.passed(), || r.render())?;
    }
    Ok("both orders give (None, None)".into())
}

fn combined_client() -> Check {
    let bounds = Bounds {
        retry_bound: 0,
        ..Bounds::default()
    };
    let r = exhaustive(&Scenario::flip_exchange(), bounds)?;
    for o in r.outcome_set() {
        ensure(o[4] == OutVal::Int(2), || {
            format!("t != 2 in {}", format_outcome(o))
        })?;
    }
    ensure(r.complete == r.executions, || {
        "some executions did not complete".into()
    })?;
    Ok(format!(
        "{} schedules, t = 2 throughout, flip entries checked per execution",
        r.executions
    ))
}

fn hidden_exchange_sequence() -> Check {
    let s = Scenario::ex_seq(vec![1, 2], vec![3, 4]);
    let bounds = Bounds {
        retry_bound: 3,
        ..Bounds::default()
    };
    let r = exhaustive(&s, bounds)?;
    let expect = vec![OutVal::List(vec![3, 4]), OutVal::List(vec![1, 2])];
    let set: Vec<_> = r.outcome_set().into_iter().cloned().collect();
    ensure(set == vec![expect], || format!("outcomes {set:?}"))?;
    ensure(r.complete > 0, || "no execution completed".into())?;
    Ok(format!(
        "{} complete, {} pruned by the retry budget, {} revisited states cut",
        r.complete, r.pruned, r.merged
    ))
}

fn network_step_invariants() -> Check {
    let mut runs = Vec::new();
    for n in 0..=3 {
        let t = Instant::now();
        let r = exhaustive(&Scenario::e_qqc(n), Bounds::default())?;
        ensure(t.elapsed() < Duration::from_secs(30), || {
            format!("N={n} took {:?}", t.elapsed())
        })?;
        runs.push(format!("N={n}: {}", r.executions));
    }
    Ok(format!("no violations; schedules {}", runs.join(", ")))
}

fn distinct_results() -> Check {
    let mut scenarios: Vec<Scenario> = (0..=4).map(Scenario::e_qqc).collect();
    scenarios.extend((0..=2).map(Scenario::e_qc));
    let mut total = 0;
    for s in &scenarios {
        let r = explore_exhaustive(s, Bounds::default()).map_err(|e| e.to_string())?;
        ensure(!r.violations.iter().any(|v| v.clause == "distinct"), || {
            r.render()
        })?;
        ensure(r.passed(), || r.render())?;
        for o in r.outcome_set() {
            let v = ints(o);
            ensure(v[0] != v[1], || {
                format!("{}: equal results {v:?}", s.name())
            })?;
        }
        total += r.executions;
    }
    Ok(format!(
        "{total} executions across e-qqc N<=4 and e-qc k<=2"
    ))
}

fn quiescent_order() -> Check {
    let mut counts = Vec::new();
    for k in 0..=2 {
        let r = exhaustive(&Scenario::e_qc(k), Bounds::default())?;
        for o in r.outcome_set() {
            let v = ints(o);
            ensure(v[0] < v[1], || format!("k={k}: res1 >= res2 in {v:?}"))?;
        }
        counts.push(format!("k={k}: {}", r.executions));
    }
    Ok(format!(
        "res1 < res2 always; schedules {}",
        counts.join(", ")
    ))
}

fn quantitative_order() -> Check {
    let mut notes = Vec::new();
    for n in 0..=4usize {
        let s = Scenario::e_qqc(n);
        let r = exhaustive(&s, Bounds::default())?;
        let mut max_gap = i64::MIN;
        for o in r.outcome_set() {
            let v = ints(o);
            ensure(v[0] < v[1] + 2 * n as i64, || {
                format!("N={n}: bound broken by {v:?}")
            })?;
            max_gap = max_gap.max(v[0] - v[1]);
        }
        if n >= 1 {
            let w = r
                .witness("reorder")
                .ok_or_else(|| format!("N={n}: no reordering witness"))?;
            let trace = Trace::record(&s, Bounds::default(), &w.schedule, None)
                .map_err(|e| e.to_string())?;
            let parsed = Trace::parse(&trace.format()).map_err(|e| e.to_string())?;
            let (replayed, _) = parsed.replay().map_err(|e| e.to_string())?;
            ensure(replayed.outcome_set() == vec![&w.outcome], || {
                format!("N={n}: witness replayed to {:?}", replayed.outcome_set())
            })?;
            let again =
                replay_world(&s, Bounds::default(), &w.schedule).map_err(|e| e.to_string())?;
            ensure(s.outcome(&again) == w.outcome, || {
                "second replay differs".into()
            })?;
        }
        if n == 1 {
            ensure(max_gap == 1, || {
                format!("N=1: largest res1 - res2 is {max_gap}, expected 1")
            })?;
        }
        notes.push(format!("N={n}: max gap {max_gap}"));
    }
    Ok(notes.join(", "))
}

fn oracle_equivalence() -> Check {
    let bounds = Bounds::default();

    let r = exhaustive(&Scenario::exchange_pair(), bounds)?;
    let (model, n) = enumerate(&ExchangeModel::new(&[1, 2], bounds.yield_count));
    let mine: BTreeMap<Vec<Option<i64>>, usize> = r
        .outcomes
        .iter()
        .map(|o| {
            let t = o
                .tuple
                .iter()
                .map(|v| match v {
                    OutVal::Opt(x) => *x,
                    other => panic!("unexpected {other}"),
                })
                .collect();
            (t, o.count)
        })
        .collect();
    ensure(mine == model, || {
        format!("exchange pair: {mine:?} vs reference {model:?}")
    })?;
    ensure(r.executions == n, || {
        format!("exchange pair: {} schedules vs reference {n}", r.executions)
    })?;
    let pair_count = n;

    let r = exhaustive(&Scenario::flip2_pair(), bounds)?;
    let (model, n) = enumerate(&FlipModel::new(2));
    let mine: BTreeMap<Vec<i64>, usize> = r
        .outcomes
        .iter()
        .map(|o| (ints(&o.tuple), o.count))
        .collect();
    ensure(mine == model, || {
        format!("flip2 pair: {mine:?} vs reference {model:?}")
    })?;
    ensure(
        r.executions == n && n as u128 == multinomial(&[2, 2]),
        || format!("flip2 pair: {} schedules, reference {n}", r.executions),
    )?;

    let r = exhaustive(&Scenario::e_qqc(1), bounds)?;
    let (model, n) = enumerate(&NetModel::new(&[2, 1]));
    let mine: BTreeMap<Vec<i64>, usize> = r
        .outcomes
        .iter()
        .map(|o| (ints(&o.tuple), o.count))
        .collect();
    ensure(mine == model, || {
        format!("e-qqc(1): {mine:?} vs reference {model:?}")
    })?;
    ensure(
        r.executions == n && n as u128 == multinomial(&[4, 2]),
        || format!("e-qqc(1): {} schedules, reference {n}", r.executions),
    )?;

    Ok(format!(
        "schedule counts {pair_count}, 6, 15 match the reference enumerator"
    ))
}

fn native_stress() -> Check {
    let net = stress_network(8, 10_000, 1);
    ensure(net.passed(), || net.render())?;
    let ex = stress_exchanger(4, 2_000, 1);
    ensure(ex.passed(), || ex.render())?;
    let successes = ex.counters["successes"];
    ensure(successes > 0, || "no exchange succeeded".into())?;
    Ok(format!(
        "network c0={} c1={} with no duplicates; {successes} exchanges paired",
        net.counters["c0"], net.counters["c1"]
    ))
}

fn intersection_bound_cases() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e55);
    for i in 0..10_000 {
        let universe = rng.gen_range(1..24u64);
        let tok = |id: u64| Token::new(id, Parity::from_bit((id % 2) as u8));
        let z = tok(rng.gen_range(0..universe));
        let snapshot: TokenSet = (0..universe)
            .filter(|_| rng.gen_bool(0.5))
            .map(tok)
            .chain([z])
            .collect();
        let past: TokenSet = (0..universe)
            .map(tok)
            .filter(|t| *t != z && rng.gen_bool(0.5))
            .collect();
        let inter = snapshot.iter().filter(|t| past.contains(t)).count();
        ensure(inter < snapshot.len(), || {
            format!("case {i}: {inter} >= {}", snapshot.len())
        })?;
        ensure(
            intersection_bound(&snapshot, &past, z) == Some(true),
            || format!("case {i}: library disagrees"),
        )?;
    }
    Ok("10000 random cases".into())
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Check, Duration);
    let criteria: [Criterion; 11] = [
        (
            "exchanger client outcomes",
            exchanger_client_outcomes,
            Duration::from_secs(5),
        ),
        (
            "sequential schedules fail both exchanges",
            sequential_schedules,
            Duration::from_secs(1),
        ),
        (
            "flip2 then exchange client",
            combined_client,
            Duration::from_secs(30),
        ),
        (
            "retrying exchange sequence",
            hidden_exchange_sequence,
            Duration::from_secs(120),
        ),
        (
            "counting network step invariants",
            network_step_invariants,
            Duration::from_secs(120),
        ),
        (
            "distinct results",
            distinct_results,
            Duration::from_secs(120),
        ),
        ("quiescent order", quiescent_order, Duration::from_secs(60)),
        (
            "bounded reordering",
            quantitative_order,
            Duration::from_secs(120),
        ),
        (
            "reference enumerator equivalence",
            oracle_equivalence,
            Duration::from_secs(60),
        ),
        ("native stress", native_stress, Duration::from_secs(30)),
        (
            "intersection bound",
            intersection_bound_cases,
            Duration::from_secs(1),
        ),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let result = match result {
            Ok(note) if took > budget => Err(format!("{note}; took {took:.2?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(note) => println!("PASS {:>2} {name} ({took:.2?}): {note}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
