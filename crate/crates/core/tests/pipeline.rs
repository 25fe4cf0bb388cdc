mod common;

use std::fs;
use std::time::Duration;

use mapf_core::anytime::{run_anytime, Algorithm, AnytimeConfig, CollectSink, RestartPolicy};
use mapf_core::highlevel::{bcbs_solve, cbs_solve, ecbs_solve, SolveStatus};
use mapf_core::validate::validate_solution;
use mapf_core::{build_instance, Bound, Deadline, GridMap, Instance, Scenario};
use proptest::prelude::*;

use common::{fixture, random_instance};

fn load(map: &str, scen: &str, k: usize) -> Instance {
    let m = GridMap::parse(&fs::read_to_string(fixture(map)).unwrap()).unwrap();
    let s = Scenario::parse(&fs::read_to_string(fixture(scen)).unwrap()).unwrap();
    build_instance(m, &s, k).unwrap()
}

#[test]
fn fixtures_solve_and_validate() {
    for (map, scen, k) in [
        ("valid/empty-8-8.map", "valid/empty-8-8-even-1.scen", 8),
        ("valid/random-8-8-20.map", "valid/random-8-8-20-random-1.scen", 6),
        ("valid/corridor-12-5.map", "valid/corridor-12-5-even-1.scen", 3),
    ] {
        let inst = load(map, scen, k);
        let opt = cbs_solve(&inst, &Deadline::after(Duration::from_secs(30)));
        assert_eq!(opt.status, SolveStatus::Solved, "{map}");
        let opt_cost = opt.cost().unwrap();
        assert!(validate_solution(&inst, opt.solution.as_ref().unwrap(), None).valid);
        let eps = Bound::new(3, 2).unwrap();
        let (e, _) = ecbs_solve(&inst, eps, &Deadline::never(), false);
        let (b, _) = bcbs_solve(&inst, eps, eps, &Deadline::never(), false);
        for r in [e, b] {
            let sol = r.solution.unwrap();
            assert!(validate_solution(&inst, &sol, None).valid, "{map}");
            assert!(r.lb <= opt_cost && opt_cost <= sol.soc());
            assert!(eps.admits(sol.soc(), r.lb));
        }
    }
}

#[test]
fn scenario_shorter_than_k_is_rejected() {
    let m = GridMap::parse(&fs::read_to_string(fixture("valid/corridor-12-5.map")).unwrap()).unwrap();
    let s = Scenario::parse(&fs::read_to_string(fixture("valid/corridor-12-5-even-1.scen")).unwrap()).unwrap();
    assert!(build_instance(m, &s, 4).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn bounded_solvers_are_valid_and_sound(
        seed in any::<u64>(),
        k in 2usize..6,
        dense in any::<bool>(),
        eps_tenths in 10u64..30,
    ) {
        let inst = random_instance(seed, 7, 7, if dense { 0.2 } else { 0.0 }, k);
        let opt = cbs_solve(&inst, &Deadline::never()).cost().unwrap();
        let eps = Bound::new(eps_tenths, 10).unwrap();
        let (e, _) = ecbs_solve(&inst, eps, &Deadline::never(), false);
        let (b, _) = bcbs_solve(&inst, eps, Bound::ONE, &Deadline::never(), false);
        for r in [e, b] {
            let sol = r.solution.unwrap();
            prop_assert!(validate_solution(&inst, &sol, None).valid);
            prop_assert!(r.lb <= opt);
            prop_assert!(eps.admits(sol.soc(), r.lb));
        }
    }

    #[test]
    fn anytime_incumbents_are_valid(seed in any::<u64>(), k in 2usize..6, ecbs in any::<bool>()) {
        let inst = random_instance(seed, 7, 7, 0.1, k);
        let cfg = if ecbs {
            AnytimeConfig::new(Algorithm::Aecbs).with_res(RestartPolicy::Never)
        } else {
            AnytimeConfig::new(Algorithm::Abcbs)
        }
        .with_budget(Duration::from_secs(30));
        let mut sink = CollectSink::default();
        let log = run_anytime(&inst, &cfg, &Deadline::after(cfg.budget), &mut sink);
        prop_assert_eq!(sink.events.len(), log.events.len());
        for (ev, sol) in &sink.events {
            prop_assert!(validate_solution(&inst, sol, None).valid);
            prop_assert_eq!(ev.cost, sol.soc());
            prop_assert!(ev.lb <= ev.cost);
        }
        prop_assert_eq!(sink.finished, Some(log.final_status));
    }
}
