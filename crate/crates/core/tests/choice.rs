use std::time::Instant;

use bikelane::choice::{
    eval_choice_objective, generate_routes, kkt_residual, ll_lin_solve, ll_objective, mnl,
    mnl_probabilities, ChoiceContext, OdGroup, Route,
};
use bikelane::model::{build_instance, UtilitySpec};
use bikelane::solvers::{solve_choice, solve_exact, ChoiceOptions, ExactOptions};
use bikelane::testsupport::{brute_force_choice, chain_network, random_context, random_instance, regret_suite, RandomInstanceSpec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn choice_spec() -> RandomInstanceSpec {
    RandomInstanceSpec {
        max_segments: 12,
        include_adjacency: false,
        ..Default::default()
    }
}

#[test]
fn two_route_probabilities() {
    let w = vec![vec![2.0f64.ln(), 0.0], vec![0.3, 0.3], vec![-1.0]];
    let p = mnl(&w);
    assert!((p[0][0] - 2.0 / 3.0).abs() < 1e-15 && (p[0][1] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(p[1], vec![0.5, 0.5]);
    assert_eq!(p[2], vec![1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn logit_solves_the_follower(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<Vec<f64>> = (0..rng.gen_range(1..5))
            .map(|_| (0..rng.gen_range(1..6)).map(|_| rng.gen_range(-30.0..10.0)).collect())
            .collect();
        let p = mnl(&w);
        for ps in &p {
            prop_assert!((ps.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        prop_assert!(kkt_residual(&p, &w) <= 1e-8);
        // shifting one OD's utilities leaves its probabilities unchanged
        let shifted: Vec<Vec<f64>> = w.iter().map(|ws| ws.iter().map(|x| x + 7.5).collect()).collect();
        for (a, b) in mnl(&shifted).iter().flatten().zip(p.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        let base = ll_objective(&p, &w);
        let lin = ll_lin_solve(&w, 200, 1e-6).unwrap();
        prop_assert!(ll_objective(&lin.p, &w) >= base - 1e-9);
    }
}

#[test]
fn regret_halves_with_doubled_breakpoints() {
    let ks = [10, 20, 40, 80];
    let r = regret_suite(0..100, &ks, 1e-4).unwrap();
    for (k, w) in ks.windows(2).zip(r.windows(2)) {
        assert!(w[1].0 <= 0.55 * w[0].0 + 1e-9, "K {} -> {}: {} -> {}", k[0], k[1], w[0].0, w[1].0);
    }
    // the objective change never exceeds its bound
    assert!(r.iter().all(|(a, b)| a <= &(b + 1e-12)));
}

#[test]
fn exact_objective_of_empty_plan() {
    let net = chain_network(4);
    let inst = build_instance(net.clone(), vec![], 2.0, UtilitySpec::power(1.1)).unwrap();
    let ctx = ChoiceContext {
        ods: vec![OdGroup {
            origin: 0,
            destination: 3,
            demand: 2.0,
            routes: vec![
                Route {
                    segments: vec![0, 1, 2, 3],
                    vbar: 1.5,
                },
                Route {
                    segments: vec![0, 1],
                    vbar: 1.5,
                },
            ],
        }],
        eta: 0.0,
    };
    assert!((eval_choice_objective(&inst, &ctx, &[false; 4]).unwrap() + 3.0).abs() < 1e-12);
    let p = mnl_probabilities(&inst, &ctx, &[false; 4]).unwrap();
    assert_eq!(p[0], vec![0.5, 0.5]);
}

#[test]
fn route_generation() {
    let net = chain_network(5);
    let routes = generate_routes(&net, (0, 2), 3, 20.0).unwrap();
    assert_eq!(routes.len(), 1);
    assert_eq!(routes[0].segments, vec![0, 1, 2]);
    assert!((routes[0].vbar - 20.0 * 0.003).abs() < 1e-12);
}

#[test]
fn single_route_choice_matches_exact_planning() {
    for seed in 0..8 {
        let inst = random_instance(seed, &choice_spec());
        let ctx = random_context(seed, &inst, 3, 1, 0.0).unwrap();
        if ctx.ods.is_empty() {
            continue;
        }
        // the induced instance: each route as a trajectory weighted by its demand
        let trajs = ctx
            .ods
            .iter()
            .enumerate()
            .map(|(m, od)| bikelane::model::Trajectory::new(format!("od{m}"), od.routes[0].segments.clone()).with_weight(od.demand))
            .collect();
        let induced = build_instance(inst.network.clone(), trajs, inst.budget, inst.utility.clone()).unwrap();
        let sol = solve_choice(&inst, &ctx, &ChoiceOptions::default()).unwrap();
        let exact = solve_exact(&induced, &ExactOptions::default()).unwrap();
        assert!((sol.plan.objective - exact.objective).abs() <= 1e-6 * exact.objective.max(1.0), "seed {seed}");
        assert!(sol.exact_probabilities.iter().all(|p| p == &vec![1.0]));
    }
}

#[test]
fn choice_milp_matches_enumeration() {
    let start = Instant::now();
    let mut checked = 0;
    for seed in 0..10 {
        let inst = random_instance(seed, &choice_spec());
        let ctx = random_context(seed, &inst, 4, 3, 2.0).unwrap();
        if ctx.ods.is_empty() {
            continue;
        }
        let oracle = brute_force_choice(&inst, &ctx).unwrap();
        let sol = solve_choice(
            &inst,
            &ctx,
            &ChoiceOptions {
                k: 50,
                ..Default::default()
            },
        )
        .unwrap();
        let gap = (oracle.value - sol.plan.objective).abs() / oracle.value.abs().max(1e-9);
        assert!(gap <= 0.02, "seed {seed}: {} vs {}", sol.plan.objective, oracle.value);
        assert!(sol.strong_duality_residual <= 1e-6, "seed {seed}: residual {}", sol.strong_duality_residual);
        assert!(sol.plan.feasible);
        checked += 1;
    }
    assert!(checked >= 5);
    eprintln!("choice enumeration suite: {checked} instances in {:?}", start.elapsed());
}
