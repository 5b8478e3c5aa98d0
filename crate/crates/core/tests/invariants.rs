//! Property checks of the model identities across modules.

use proptest::prelude::*;
use regretlab::catalog::{generate_weighted_potential, resolve, ENTRIES};
use regretlab::continuous::{
    best_reply_violation, cfp_integrate, cont_no_regret_integrate, regret_conservation_residual, CfpOptions,
    StepControl,
};
use regretlab::discrete::{run, Initial, RunConfig, Schedule};
use regretlab::equilibrium::{
    curb_constants, curb_enumerate, delta_b, delta_b_grid, nash_support_enumeration, strict_dominance_eliminate,
    ScanOrder,
};
use regretlab::perturbation::graph_br_distance;
use regretlab::strategy::PotentialSpec;
use regretlab::{update_average, Game, HannanClass, JointDistribution, MixedAction, MixedProfile, Player};

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

fn game(max: usize) -> impl Strategy<Value = Game> {
    (2..=max, 2..=max).prop_flat_map(|(r, c)| {
        (prop::collection::vec(-1.0f64..1.0, r * c), prop::collection::vec(-1.0f64..1.0, r * c))
            .prop_map(move |(u1, u2)| Game::new(r, c, u1, u2).unwrap())
    })
}

fn game_and_joint(max: usize) -> impl Strategy<Value = (Game, JointDistribution)> {
    game(max).prop_flat_map(|g| {
        let (r, c) = (g.rows(), g.cols());
        simplex(r * c).prop_map(move |w| (g.clone(), JointDistribution::new(r, c, w).unwrap()))
    })
}

fn game_and_profile(max: usize) -> impl Strategy<Value = (Game, MixedProfile)> {
    game(max).prop_flat_map(|g| {
        let (r, c) = (g.rows(), g.cols());
        (simplex(r), simplex(c)).prop_map(move |(x, y)| {
            (g.clone(), MixedProfile::new(MixedAction::new(x).unwrap(), MixedAction::new(y).unwrap()))
        })
    })
}

fn catalog_games() -> Vec<(String, Game)> {
    ENTRIES
        .iter()
        .map(|e| match e.name {
            "fig3ii" => "fig3ii:0.25".to_string(),
            "fig5" => "fig5:0.1".to_string(),
            n => n.to_string(),
        })
        .map(|r| (r.clone(), resolve(&r).unwrap()))
        .collect()
}

fn own_weights(z: &JointDistribution, p: Player) -> Vec<f64> {
    z.marginal(p).weights().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn weighted_regret_sum_is_product_gap((g, z) in game_and_joint(4)) {
        let (u1, u2) = g.expected_payoffs(&z).unwrap();
        let prod = JointDistribution::product(&z.marginals());
        let (p1, p2) = g.expected_payoffs(&prod).unwrap();
        for (p, u, up) in [(Player::One, u1, p1), (Player::Two, u2, p2)] {
            let r = g.regret_vector(p, &z).unwrap();
            let s: f64 = own_weights(&z, p).iter().zip(&r.values).map(|(w, v)| w * v).sum();
            prop_assert!((s - (up - u)).abs() <= 1e-12);
            let rp = g.regret_vector(p, &prod).unwrap();
            let sp: f64 = own_weights(&prod, p).iter().zip(&rp.values).map(|(w, v)| w * v).sum();
            prop_assert!(sp.abs() <= 1e-12);
        }
    }

    #[test]
    fn max_regret_is_best_reply_gain((g, z) in game_and_joint(4)) {
        let (u1, u2) = g.expected_payoffs(&z).unwrap();
        for (p, u) in [(Player::One, u1), (Player::Two, u2)] {
            let r = g.regret_vector(p, &z).unwrap();
            let rmax = r.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let best = g
                .reply_payoffs(p, z.marginal(p.opponent()).weights())
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max);
            prop_assert!((rmax - (best - u)).abs() <= 1e-12);
        }
    }

    #[test]
    fn running_average_is_the_mean(cells in prop::collection::vec((0usize..3, 0usize..2), 1..100)) {
        let mut z = JointDistribution::point(3, 2, cells[0].0, cells[0].1);
        for (t, &(a1, a2)) in cells.iter().enumerate().skip(1) {
            z = update_average(&z, &JointDistribution::point(3, 2, a1, a2), t as u64 + 1).unwrap();
        }
        let mut mean = [0.0; 6];
        for &(a1, a2) in &cells {
            mean[a1 * 2 + a2] += 1.0 / cells.len() as f64;
        }
        for (a, b) in z.weights().iter().zip(&mean) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn best_reply_sets_at_the_extremes((g, p) in game_and_profile(4)) {
        for pl in Player::BOTH {
            let opp = p.get(pl.opponent());
            let all = g.best_replies(pl, opp, 2.0 * g.payoff_bound()).unwrap();
            prop_assert_eq!(all.len(), g.actions(pl));
            let pay = g.reply_payoffs(pl, opp.weights());
            let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let expected: Vec<usize> = (0..pay.len()).filter(|&k| pay[k] == best).collect();
            let got: Vec<usize> = g.best_replies(pl, opp, 0.0).unwrap().into_iter().map(|(k, _)| k).collect();
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn strict_pure_equilibria_are_hannan(g in game(4)) {
        for a1 in 0..g.rows() {
            for a2 in 0..g.cols() {
                let strict1 = (0..g.rows()).all(|k| k == a1 || g.payoff(Player::One, k, a2) < g.payoff(Player::One, a1, a2));
                let strict2 = (0..g.cols()).all(|k| k == a2 || g.payoff(Player::Two, a1, k) < g.payoff(Player::Two, a1, a2));
                if strict1 && strict2 {
                    let s = g.hannan_status(&JointDistribution::point_in(&g, a1, a2), 1e-9).unwrap();
                    prop_assert!(matches!(s.class, HannanClass::InteriorH | HannanClass::ReducedHR));
                }
            }
        }
    }

    #[test]
    fn nash_profiles_have_no_regret(g in game(4)) {
        for e in nash_support_enumeration(&g, 1e-9).unwrap() {
            let z = JointDistribution::product(&e);
            for pl in Player::BOTH {
                let r = g.regret_vector(pl, &z).unwrap();
                prop_assert!(r.values.iter().all(|v| *v <= 1e-9));
            }
        }
    }

    #[test]
    fn elimination_ignores_scan_order(g in game(4), mixed in any::<bool>()) {
        let a = strict_dominance_eliminate(&g, mixed, ScanOrder::PlayerOneFirst).unwrap();
        let b = strict_dominance_eliminate(&g, mixed, ScanOrder::PlayerTwoFirst).unwrap();
        prop_assert_eq!(a.surviving, b.surviving);
    }

    #[test]
    fn weighted_potential_identity(rows in 2usize..5, cols in 2usize..5, seed in any::<u64>()) {
        let w = generate_weighted_potential(rows, cols, seed).unwrap();
        let pot = |a1: usize, a2: usize| w.potential[a1 * cols + a2];
        for a1 in 0..rows {
            for a2 in 0..cols {
                for b in 0..rows {
                    let lhs = w.game.payoff(Player::One, a1, a2) - w.game.payoff(Player::One, b, a2);
                    prop_assert!((lhs - w.weights[0] * (pot(a1, a2) - pot(b, a2))).abs() <= 1e-12);
                }
                for b in 0..cols {
                    let lhs = w.game.payoff(Player::Two, a1, a2) - w.game.payoff(Player::Two, a1, b);
                    prop_assert!((lhs - w.weights[1] * (pot(a1, a2) - pot(a1, b))).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn graph_distance_below_pure_witness((g, p) in game_and_profile(4)) {
        for pl in Player::BOTH {
            let (own, opp) = (p.get(pl), p.get(pl.opponent()));
            let d = graph_br_distance(&g, pl, own, opp).unwrap();
            prop_assert!((0.0..=1.0 + 1e-12).contains(&d));
            for j in 0..g.actions(pl.opponent()) {
                let e = MixedAction::pure(g.actions(pl.opponent()), j);
                let pay = g.reply_payoffs(pl, e.weights());
                let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if own.support().iter().all(|&k| pay[k] >= best - 1e-12) {
                    prop_assert!(d <= opp.sup_distance(&e) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn graph_distance_vanishes_exactly_on_best_replies((g, p) in game_and_profile(4)) {
        for pl in Player::BOTH {
            let opp = p.get(pl.opponent());
            let n = g.actions(pl);
            let pay = g.reply_payoffs(pl, opp.weights());
            let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for k in 0..n {
                let d = graph_br_distance(&g, pl, &MixedAction::pure(n, k), opp).unwrap();
                if pay[k] >= best - 1e-12 {
                    prop_assert!(d <= 1e-10, "best reply {k} at distance {d}");
                } else if best - pay[k] > 1e-6 {
                    prop_assert!(d > 0.0, "action {k} loses {} but has distance 0", best - pay[k]);
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regret_matching_identities(g in game(4), seed in any::<u64>()) {
        let mut cfg = RunConfig::regret_matching(3000, seed);
        cfg.schedule = Schedule::Every(1);
        cfg.diagnostics = true;
        let traj = run(&g, &cfg).unwrap();
        let d = &traj.diagnostics;
        prop_assert!(d.orthogonality <= 1e-12, "orthogonality {}", d.orthogonality);
        prop_assert!(d.recompute_gap <= 1e-9, "recompute gap {}", d.recompute_gap);
        prop_assert!(d.constant_fallback_drift <= 1e-10);
        for i in 0..2 {
            let mut positive = false;
            for s in &traj.snapshots {
                if positive {
                    prop_assert!(s.r_max[i] > 0.0, "regret of player {} returned to {} at t={}", i + 1, s.r_max[i], s.t);
                }
                positive |= s.r_max[i] > 0.0;
            }
        }
    }

    #[test]
    fn recorded_state_is_recomputable(g in game(3), seed in any::<u64>()) {
        let mut cfg = RunConfig::regret_matching(500, seed);
        cfg.schedule = Schedule::Geometric(1.3);
        let traj = run(&g, &cfg).unwrap();
        for s in &traj.snapshots {
            prop_assert!(s.beliefs.sup_distance(&s.z.marginals()) <= 1e-12);
            for pl in Player::BOTH {
                let r = g.regret_vector(pl, &s.z).unwrap();
                for (a, b) in r.values.iter().zip(&s.regrets[pl.index()]) {
                    prop_assert!((a - b).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn cfp_conserves_scaled_regret((g, p) in game_and_profile(3)) {
        let z0 = JointDistribution::product(&p);
        let traj = cfp_integrate(&g, &p, &z0, 50.0, CfpOptions::default()).unwrap();
        let res = regret_conservation_residual(&traj);
        prop_assert!(res[0] <= 1e-6 && res[1] <= 1e-6, "residual {res:?}");
        for b in &traj.breakpoints {
            prop_assert!(b.x.iter().flatten().all(|w| *w >= -1e-12));
        }
        prop_assert!(best_reply_violation(&g, &traj) <= CfpOptions::default().root_tol);
    }

    #[test]
    fn no_regret_flow_keeps_positive_regret((g, z) in game_and_joint(3)) {
        let positive = Player::BOTH.iter().all(|&pl| {
            g.regret_vector(pl, &z).unwrap().values.iter().any(|v| *v > 1e-3)
        });
        prop_assume!(positive);
        let l2 = PotentialSpec::regret_matching();
        let flow = cont_no_regret_integrate(&g, [&l2, &l2], &z, 30.0, &StepControl::default()).unwrap();
        prop_assert_eq!(flow.positivity_violations, 0);
        let m = flow.min_r_max();
        prop_assert!(m[0] > 0.0 && m[1] > 0.0, "{m:?}");
    }
}

#[test]
fn dfp_off_diagonal_regret_floor_on_fig1() {
    let g = resolve("fig1").unwrap();
    let floor = 2f64.sqrt() / (1.0 + 2f64.sqrt());
    for (a1, a2) in [(0, 1), (1, 0)] {
        let mut cfg = RunConfig::dfp(20_000);
        cfg.initial = Initial::Profile(a1, a2);
        cfg.schedule = Schedule::Every(1);
        let traj = run(&g, &cfg).unwrap();
        for s in traj.snapshots.iter().filter(|s| s.t >= 2) {
            for r in s.r_max {
                assert!(r >= floor - 1e-12, "t={} r={r}", s.t);
            }
        }
    }
}

#[test]
fn curb_sets_contain_vertex_best_replies() {
    for (name, g) in catalog_games() {
        let Ok(sets) = curb_enumerate(&g) else { continue };
        for b in sets {
            for pl in Player::BOTH {
                let opp_n = g.actions(pl.opponent());
                for &j in b.get(pl.opponent()) {
                    let pay = g.reply_payoffs(pl, MixedAction::pure(opp_n, j).weights());
                    let best = pay.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    for k in 0..pay.len() {
                        if pay[k] == best {
                            assert!(b.get(pl).contains(&k), "{name}: {} misses reply {k}", b.describe(&g));
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn curb_constants_are_consistent() {
    let l2 = PotentialSpec::regret_matching();
    for (name, g) in catalog_games() {
        let Ok(sets) = curb_enumerate(&g) else { continue };
        let u_bar = g.payoff_bound();
        for b in sets.iter().filter(|b| !b.is_full(&g)) {
            let d = delta_b(&g, b).unwrap();
            if let Some(grid) = delta_b_grid(&g, b, 64) {
                assert!(d >= grid - 4.0 * u_bar / 64.0, "{name} {}: {d} vs grid {grid}", b.describe(&g));
            }
            let c = curb_constants(&g, b, [&l2, &l2], u_bar).unwrap();
            assert!(c.delta_b > 0.0);
            assert!(c.gamma_b > 0.0 && c.gamma_b < c.delta_b / (2.0 * u_bar + c.delta_b) + 1e-10);
        }
    }
}

