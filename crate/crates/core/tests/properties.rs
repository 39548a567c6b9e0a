use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use levelshare::dpgmm::init_state;
use levelshare::engine::{npla, npla_curve, SlotAction, SlotRecord};
use levelshare::policy::{act, belief_update_predict, belief_update_transmit, solve_policy, Ack, Action, SolveOptions};
use levelshare::sensing::{classify, decision_intervals, default_ack, estimate_confusion, survival, transition_matrix};
use levelshare::{BeliefState, GibbsState, MixtureModel, RewardSpec, SenseModel};

fn mixture() -> impl Strategy<Value = MixtureModel> {
    (2usize..6).prop_flat_map(|k| {
        (
            prop::collection::vec(-20.0f64..20.0, k),
            prop::collection::vec(0.05f64..20.0, k),
            prop::collection::vec(0.05f64..1.0, k),
        )
            .prop_map(|(mu, prec, w)| {
                let s: f64 = w.iter().sum();
                MixtureModel::new(mu, prec, w.iter().map(|v| v / s).collect()).unwrap()
            })
    })
}

fn simplex(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, k).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.iter().map(|v| v / s).collect()
    })
}

fn sense_model() -> impl Strategy<Value = SenseModel> {
    (2usize..5).prop_flat_map(|k| {
        (prop::collection::vec(simplex(k), k), simplex(k), 2.0f64..150.0).prop_map(move |(mut h, pi, nu)| {
            // diagonal dominance keeps the model well posed
            for (i, row) in h.iter_mut().enumerate() {
                row[i] += 1.0;
                row.iter_mut().for_each(|v| *v /= 2.0);
            }
            SenseModel {
                h,
                c: transition_matrix(&pi).unwrap(),
                nu_hat: nu,
                ack: default_ack(k),
            }
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn confusion_rows_are_distributions(m in mixture()) {
        let h = estimate_confusion(&m).unwrap();
        for row in &h {
            prop_assert!(row.iter().all(|&v| (0.0..=1.0 + 1e-12).contains(&v)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn intervals_agree_with_classify(m in mixture(), xs in prop::collection::vec(-40.0f64..40.0, 50)) {
        let iv = decision_intervals(&m);
        for w in iv.windows(2) {
            prop_assert!(w[0].hi == w[1].lo);
        }
        for &x in &xs {
            let hit = iv.iter().find(|d| x > d.lo && x <= d.hi).expect("intervals cover the line");
            prop_assert_eq!(hit.k, classify(x, &m));
        }
    }

    #[test]
    fn transition_zero_diagonal(pi in (2usize..7).prop_flat_map(simplex)) {
        let c = transition_matrix(&pi).unwrap();
        for (k, row) in c.iter().enumerate() {
            prop_assert_eq!(row[k], 0.0);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for j in 0..pi.len() {
                if j != k {
                    prop_assert!((row[j] - pi[j] / (1.0 - pi[k])).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn survival_is_a_probability_and_non_increasing(nu in 0.5f64..300.0, tau in 0u64..600, t0 in 0u64..20) {
        let a = survival(nu, tau, t0).value;
        let b = survival(nu, tau, t0 + 1).value;
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a + 1e-12);
        prop_assert_eq!(survival(nu, tau, 0).value, if survival::<f64>(nu, tau, 0).saturated { 0.0 } else { 1.0 });
    }

    #[test]
    fn beliefs_stay_in_unit_interval(
        sm in sense_model(),
        steps in prop::collection::vec((0usize..5, any::<bool>(), any::<bool>()), 1..40),
        tau_s in 1usize..6,
    ) {
        let n = sm.k();
        let mut b = BeliefState::anchored(0);
        for (j, predict, pos) in steps {
            let next = if predict {
                belief_update_predict(b, j % n, &sm)
            } else {
                belief_update_transmit(b, if pos { Ack::Positive } else { Ack::Negative }, &sm, tau_s)
            };
            match next {
                Ok(nb) => {
                    prop_assert!((0.0..=1.0).contains(&nb.p));
                    prop_assert!(nb.tau > b.tau);
                    b = nb;
                }
                Err(_) => b = BeliefState::anchored(j % n),
            }
        }
    }

    #[test]
    fn policy_thresholds_are_consistent(sm in sense_model(), tau_s in 1usize..6, p in 0.0f64..=1.0, tau in 0usize..400) {
        let rs = RewardSpec::unit(sm.k(), tau_s);
        let table = solve_policy(&sm, &rs, &SolveOptions { grid_size: 201, keep_grids: false }).unwrap();
        for lp in &table.levels {
            prop_assert_eq!(lp.p_star.len(), lp.horizon + 1);
            for (lo, hi) in lp.p_star.iter().zip(&lp.p_star2) {
                prop_assert!((0.0..=1.0).contains(lo) && (0.0..=1.0).contains(hi));
                prop_assert!(lo <= hi);
            }
            prop_assert!(lp.v0 >= 0.0);
            let b = BeliefState { k: lp.k, tau, p };
            if tau > lp.horizon {
                prop_assert_eq!(act(b, &table), Action::Predict);
            } else if p <= lp.p_star[tau] {
                prop_assert_eq!(act(b, &table), Action::Predict);
            }
        }
    }

    #[test]
    fn npla_bounded_and_curve_consistent(
        blocks in prop::collection::vec((0usize..3, prop::collection::vec(any::<bool>(), 1..6)), 1..30),
        tau_s in 1usize..6,
    ) {
        let mut records = Vec::new();
        for (predicts, matches) in blocks {
            for _ in 0..predicts {
                records.push(SlotRecord { slot: records.len(), action: SlotAction::Predict, st_level: Some(0), pt_level: 0, block_start: false, observation: None });
            }
            for o in 0..tau_s {
                let hit = matches[o % matches.len()];
                records.push(SlotRecord {
                    slot: records.len(),
                    action: SlotAction::Transmit,
                    st_level: Some(if hit { 1 } else { 2 }),
                    pt_level: 1,
                    block_start: o == 0,
                    observation: None,
                });
            }
        }
        let grid: Vec<usize> = (1..=records.len()).collect();
        let curve = npla_curve(&records, tau_s, &grid);
        for (&t, &u) in grid.iter().zip(&curve) {
            prop_assert!((0.0..=1.0).contains(&u));
            prop_assert_eq!(u, npla(&records, tau_s, t));
            let transmit = records[..t].iter().filter(|r| r.action == SlotAction::Transmit).count();
            prop_assert!(u * t as f64 <= transmit as f64 + 1e-9);
        }
    }

    #[test]
    fn gibbs_bookkeeping_survives_sliding(seed in 0u64..1000, slides in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..60).map(|i| if i % 3 == 0 { 5.0 } else { 0.0 } + (i as f64 * 0.37).sin()).collect();
        let mut st: GibbsState = init_state(&x[..40], 0.5, 3, &mut rng).unwrap();
        let mut window: std::collections::VecDeque<f64> = x[..40].iter().copied().collect();
        for s in 0..slides {
            window.push_back(x[(40 + s) % x.len()]);
            let w: Vec<f64> = window.iter().copied().collect();
            st.push_back(&w, &mut rng);
            window.pop_front();
            st.pop_front();
            let w: Vec<f64> = window.iter().copied().collect();
            st.sweep(&w, &mut rng);
            prop_assert!(st.check_consistency().is_ok());
            prop_assert_eq!(st.n(), window.len());
            prop_assert_eq!(st.counts.iter().sum::<usize>(), st.n());
            prop_assert!(st.counts.iter().all(|&c| c > 0));
        }
    }
}
