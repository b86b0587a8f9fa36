use subjhist::explore::{explore_exhaustive, replay_trace, replay_world, run_random};
use subjhist::scenarios::{
    check_zip_post, grows_notwins, registry, zip, ConfigError, OutVal, Scenario, ScenarioParams,
};
use subjhist::vm::{Bounds, Status};

fn ints(o: &[OutVal]) -> Vec<i64> {
    o.iter()
        .map(|v| match v {
            OutVal::Int(x) => *x,
            other => panic!("not an integer: {other}"),
        })
        .collect()
}

/// Longest per-thread step count over all complete schedules.
fn max_thread_steps(s: &Scenario, bounds: Bounds) -> Vec<usize> {
    let mut longest = vec![0; s.programs().len()];
    let init = s.compile(bounds);
    subjhist::explore::for_each_schedule(&init, |w, sched| {
        if *w.status() == Status::Complete {
            for (t, m) in longest.iter_mut().enumerate() {
                *m = (*m).max(sched.iter().filter(|x| **x == t).count());
            }
        }
    });
    longest
}

#[test]
fn interleaved_increments_return_out_of_order() {
    // Interferer flips first, the main thread then runs both calls before
    // the interferer writes.
    let s = Scenario::e_qqc(1);
    let w = replay_world(&s, Bounds::default(), &[1, 0, 0, 0, 0, 1]).unwrap();
    assert_eq!(s.outcome(&w), vec![OutVal::Int(1), OutVal::Int(0)]);
    assert_eq!(*w.status(), Status::Complete);
    assert!(s.final_check(&w).is_empty());
    let r = replay_trace(&s, Bounds::default(), &[1, 0, 0, 0, 0, 1]).unwrap();
    assert!(r.passed(), "{}", r.render());
}

#[test]
fn without_interference_there_is_one_execution() {
    for s in [Scenario::e_qc(0), Scenario::e_qqc(0)] {
        let r = explore_exhaustive(&s, Bounds::default()).unwrap();
        assert_eq!(r.executions, 1);
        assert_eq!(r.outcome_set(), vec![&vec![OutVal::Int(0), OutVal::Int(1)]]);
    }
}

#[test]
fn solo_double_flip_returns_one() {
    let r = explore_exhaustive(&Scenario::Flip2 { threads: 1 }, Bounds::default()).unwrap();
    assert!(r.passed());
    assert_eq!(r.outcome_set(), vec![&vec![OutVal::Int(1)]]);
}

#[test]
fn double_flip_pair_sums_to_two() {
    let r = explore_exhaustive(&Scenario::flip2_pair(), Bounds::default()).unwrap();
    assert!(r.passed(), "{}", r.render());
    for o in r.outcome_set() {
        assert_eq!(ints(o).iter().sum::<i64>(), 2);
    }
}

#[test]
fn reordering_gap_stays_below_the_bound() {
    let r = explore_exhaustive(&Scenario::e_qqc(2), Bounds::default()).unwrap();
    assert!(r.passed());
    let gap = r
        .outcome_set()
        .iter()
        .map(|o| ints(o))
        .map(|v| v[0] - v[1])
        .max()
        .unwrap();
    assert!((1..=3).contains(&gap), "gap {gap}");
    assert!(r.witness("reorder").is_some());
}

#[test]
fn quiescent_barrier_orders_results() {
    let r = explore_exhaustive(&Scenario::e_qc(1), Bounds::default()).unwrap();
    assert!(r.passed(), "{}", r.render());
    for o in r.outcome_set() {
        let v = ints(o);
        assert!(v[0] < v[1]);
    }
}

#[test]
fn exchange_pair_threads_are_short() {
    let longest = max_thread_steps(&Scenario::exchange_pair(), Bounds::default());
    assert!(longest.iter().all(|n| *n <= 9), "{longest:?}");
    // alloc, failed install, dealloc, read_g, match, unlink, read_val
    assert_eq!(longest, vec![7, 7]);
}

#[test]
fn increment_threads_take_two_steps_per_call() {
    for n in 0..=3 {
        let longest = max_thread_steps(&Scenario::e_qqc(n), Bounds::default());
        assert_eq!(longest, vec![4, 2 * n]);
    }
}

#[test]
fn yield_count_sets_the_back_off_length() {
    let s = Scenario::exchange_pair();
    for y in 1..=3 {
        let bounds = Bounds {
            yield_count: y,
            ..Bounds::default()
        };
        let w = replay_world(&s, bounds, &vec![0; 3 + y as usize]).unwrap();
        assert!(!w.runnable().contains(&0));
        let yields = w.log().iter().filter(|l| l.op == "yield").count();
        assert_eq!(yields, y as usize);
    }
}

#[test]
fn back_off_length_does_not_change_reachable_outcomes() {
    let s = Scenario::exchange_pair();
    let base = explore_exhaustive(&s, Bounds::default()).unwrap();
    for y in 2..=3 {
        let r = explore_exhaustive(
            &s,
            Bounds {
                yield_count: y,
                ..Bounds::default()
            },
        )
        .unwrap();
        assert!(r.passed());
        assert_eq!(r.outcome_set(), base.outcome_set());
    }
}

#[test]
fn flip_then_exchange_swaps_results_on_double_success() {
    let r = explore_exhaustive(
        &Scenario::flip_exchange(),
        Bounds {
            retry_bound: 0,
            ..Bounds::default()
        },
    )
    .unwrap();
    assert!(r.passed(), "{}", r.render());
    let swapped: Vec<_> = r
        .outcome_set()
        .into_iter()
        .filter(|o| matches!(o[2], OutVal::Opt(Some(_))))
        .collect();
    assert!(!swapped.is_empty());
    for o in swapped {
        assert_eq!((&o[0], &o[1]), (&int_of(&o[3]), &int_of(&o[2])));
    }
}

fn int_of(v: &OutVal) -> OutVal {
    match v {
        OutVal::Opt(Some(x)) => OutVal::Int(*x),
        other => other.clone(),
    }
}

#[test]
fn single_element_sequences_swap() {
    let r = explore_exhaustive(&Scenario::ex_seq(vec![5], vec![7]), Bounds::default()).unwrap();
    assert!(r.passed(), "{}", r.render());
    assert!(r.complete > 0);
    assert_eq!(
        r.outcome_set(),
        vec![&vec![OutVal::List(vec![7]), OutVal::List(vec![5])]]
    );
}

#[test]
fn empty_sequences_finish_immediately() {
    let r = explore_exhaustive(&Scenario::ex_seq(vec![], vec![]), Bounds::default()).unwrap();
    assert!(r.passed());
    assert_eq!(
        r.outcome_set(),
        vec![&vec![OutVal::List(vec![]), OutVal::List(vec![])]]
    );
}

#[test]
fn zip_helpers() {
    let h = zip(&[1, 3], &[10, 20], &[30, 40]).unwrap();
    assert_eq!(h.len(), 2);
    assert!(check_zip_post(&h, &[1, 3], &[10, 20], &[30, 40]).is_ok());
    assert!(check_zip_post(&h, &[1, 3], &[10, 20], &[30, 41]).is_err());
    assert!(grows_notwins(&[1, 3]));
    assert!(!grows_notwins(&[1, 2]));
    assert!(!grows_notwins(&[3, 1]));
    assert!(check_zip_post(&zip(&[], &[], &[]).unwrap(), &[], &[], &[]).is_ok());
}

#[test]
fn oversized_parameters_are_rejected() {
    let big = ScenarioParams {
        k: Some(9999),
        ..ScenarioParams::default()
    };
    let s = Scenario::from_name("e-qc", &big);
    match s {
        Err(ConfigError::OutOfRange { .. }) => {}
        Ok(s) => assert!(matches!(
            explore_exhaustive(&s, Bounds::default()),
            Err(ConfigError::OutOfRange { .. })
        )),
        Err(e) => panic!("unexpected {e}"),
    }
    assert!(matches!(
        Scenario::from_name("nope", &ScenarioParams::default()),
        Err(ConfigError::UnknownScenario(_))
    ));
    assert!(matches!(
        explore_exhaustive(&Scenario::e_qqc(5), Bounds::default()),
        Err(ConfigError::OutOfRange { .. })
    ));
}

#[test]
fn random_mode_is_seeded() {
    let s = Scenario::flip_exchange();
    let a = run_random(&s, 30, 11, Bounds::default());
    assert_eq!(a, run_random(&s, 30, 11, Bounds::default()));
    assert!(a.passed());
    assert_eq!(a.executions, 30);
}

#[test]
fn registry_lists_every_scenario() {
    let names: Vec<_> = registry().into_iter().map(|i| i.name).collect();
    for n in &names {
        assert!(
            Scenario::from_name(n, &ScenarioParams::default()).is_ok(),
            "{n}"
        );
    }
    assert_eq!(names.len(), 6);
}
