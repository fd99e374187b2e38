use matchnet::simulator::{
    compare_to_closed_form, generate_population, monte_carlo, realize_network, run_round, write_replications_csv,
    PassRule, SimConfig,
};
use matchnet::{Education, ModelParams, Profile};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(n: usize, reps: usize, h: f64, rule: PassRule) -> SimConfig {
    SimConfig {
        n,
        reps,
        seed: 11,
        pass_rule: rule,
        params: ModelParams::default()
            .with_arrival(0.5)
            .with_divorce(0.015)
            .with_cost(0.003)
            .with_high_share(h),
        profile: Profile::uniform(1.5),
    }
}

#[test]
fn population_pairs_every_agent_once() {
    let pop = generate_population(1000, 0.8, 3).unwrap();
    assert_eq!(pop.count(Education::High), 800);
    for g in 0..2 {
        let mut seen = vec![false; pop.n];
        for &w in &pop.spouse[g] {
            assert!(!std::mem::replace(&mut seen[w as usize], true));
        }
    }
    for m in 0..pop.n {
        assert_eq!(pop.spouse[1][pop.spouse[0][m] as usize] as usize, m);
    }
}

#[test]
fn friendship_graphs_are_symmetric_with_mean_degree_s() {
    let pop = generate_population(20_000, 0.8, 5).unwrap();
    let net = realize_network(&pop, &Profile::uniform(1.5), &mut ChaCha8Rng::seed_from_u64(9));
    for g in &net.graphs {
        assert!(g.is_symmetric());
        let mean = 2.0 * g.edge_count() as f64 / g.len() as f64;
        assert!((mean - 1.5).abs() < 0.05, "mean degree {mean}");
        assert!((0..g.len()).all(|i| !g.neighbors(i).contains(&(i as u32))));
    }
    assert_eq!(net.clipped_pairs, 0);
}

#[test]
fn a_round_marries_mutually_and_conserves_counts() {
    let cfg = config(5000, 1, 0.8, PassRule::PsiConsistent);
    let pop = generate_population(cfg.n, 0.8, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let net = realize_network(&pop, &cfg.profile, &mut rng);
    let out = run_round(&pop, &net, &cfg.params.with_population(cfg.n), &mut rng, cfg.pass_rule);
    assert_eq!(out.divorces[0].iter().sum::<u64>(), out.divorces[1].iter().sum::<u64>());
    assert_eq!(out.direct_meetings[0], out.direct_meetings[1]);
    let by_gender = |g: usize| {
        out.direct_marriages[g].iter().sum::<u64>()
            + out.upsilon_marriages[g].iter().flatten().sum::<u64>()
            + out.psi_marriages[g].iter().flatten().sum::<u64>()
    };
    assert_eq!(by_gender(0), by_gender(1));
    assert_eq!(out.newly_married(), by_gender(0) + by_gender(1));
    assert!(by_gender(0) <= out.divorces[0].iter().sum::<u64>());
    assert!(out.viable_introductions <= out.passes);
    assert!(out.conflicts <= out.viable_introductions);
}

#[test]
fn runs_repeat_under_a_seed_and_change_with_it() {
    let cfg = config(4000, 8, 0.8, PassRule::PsiConsistent);
    let a = monte_carlo(&cfg).unwrap();
    let b = monte_carlo(&cfg).unwrap();
    assert_eq!(a, b);
    let mut out_a = Vec::new();
    let mut out_b = Vec::new();
    write_replications_csv(&a, &mut out_a).unwrap();
    write_replications_csv(&b, &mut out_b).unwrap();
    assert_eq!(out_a, out_b);
    let other = monte_carlo(&SimConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.totals, other.totals);
}

#[test]
fn one_worker_and_many_agree() {
    let cfg = config(3000, 12, 1.0, PassRule::UpsilonConsistent);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo(&cfg).unwrap())
    };
    assert_eq!(run(1), run(5));
}

#[test]
fn small_market_estimates_sit_near_the_limits() {
    for rule in [PassRule::PsiConsistent, PassRule::UpsilonConsistent] {
        let cfg = config(10_000, 40, 0.8, rule);
        let est = monte_carlo(&cfg).unwrap();
        let report = compare_to_closed_form(&est, &cfg.params, &cfg.profile);
        for row in report.rows.iter().filter(|r| r.applicable) {
            assert!(row.z.unwrap().abs() <= 4.0, "{:?}: {row:?}", rule);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let cfg = config(1, 1, 0.8, PassRule::PsiConsistent);
    assert!(monte_carlo(&cfg).is_err());
    let mut cfg = config(100, 1, 0.8, PassRule::PsiConsistent);
    cfg.profile = Profile::uniform(-1.0);
    assert!(monte_carlo(&cfg).is_err());
}
