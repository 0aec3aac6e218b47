use proptest::prelude::*;

use prompt_core::diagnostics::{check_decomposition, check_information_bound, kl_divergence};
use prompt_core::inference::{classic_posterior, r_weighted_posterior, ProxyObservation};
use prompt_core::math::{log_sum_exp, sigmoid};
use prompt_core::model::{gp_model, linear_model, Observation, SharedParam, TaskParam};
use prompt_core::relevance::{
    prior_expected_relevance, sigmoid_ratio_weights, Normalizer, RelevanceProvider,
    RelevanceWeights,
};
use prompt_core::rng::seeded_rng;
use prompt_core::synthetic::{gen_toy_instance, ToySpec};
use prompt_core::{ParameterGrid, Prior};

fn distribution(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn linear_grid() -> ParameterGrid {
    let prior = Prior::Normal { mean: 0.0, sd: 1.0 };
    ParameterGrid::scalar((-4.0, 4.0, 21, prior), (-4.0, 4.0, 21, prior)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kl_is_nonnegative(p in distribution(6), q in distribution(6)) {
        prop_assert!(kl_divergence(&p, &q) >= -1e-12);
        prop_assert!(kl_divergence(&p, &p).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_matches_direct(v in prop::collection::vec(-30.0f64..30.0, 1..20), shift in -500.0f64..500.0) {
        let direct = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        prop_assert!((log_sum_exp(&v) - direct).abs() < 1e-10);
        let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
        prop_assert!((log_sum_exp(&shifted) - direct - shift).abs() < 1e-9);
    }

    #[test]
    fn toy_posteriors_normalize(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let inst = gen_toy_instance(ToySpec::random(&mut rng), &mut rng).unwrap();
        let data = inst.true_process.simulate(&inst.model, &mut rng).unwrap();
        let classic = classic_posterior(&inst.model, &data, &inst.grid, &inst.source_psi_prior).unwrap();
        prop_assert!((classic.joint_mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let weights: Vec<RelevanceWeights> = inst.grid.psi_nodes().iter().enumerate()
            .map(|(p, psi)| RelevanceWeights::new(Some(p), inst.relevance.weights(&data, p, psi).unwrap()).unwrap())
            .collect();
        let post = r_weighted_posterior(&inst.model, &data, &inst.grid, &weights, &ProxyObservation::uninformative()).unwrap();
        prop_assert!((post.joint_mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((post.theta_marginal().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prior_expected_weights_in_unit_interval(
        xs in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0, -8.0f64..8.0), 1..8),
        psi in -4.0f64..4.0,
        belief in distribution(21),
    ) {
        let data: Vec<Observation> = xs.iter().map(|(a, b, y)| Observation::real(vec![*a, *b], *y)).collect();
        let grid = linear_grid();
        for normalizer in [Normalizer::ModeDensity, Normalizer::MatchedVariance, Normalizer::None] {
            let w = prior_expected_relevance(&linear_model(), &data, &grid, &belief, &TaskParam::scalar(psi), normalizer).unwrap();
            prop_assert_eq!(w.weights.len(), data.len());
            prop_assert!(w.weights.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn sigmoid_ratio_weights_range(ll in prop::collection::vec(-40.0f64..0.0, 1..12)) {
        let w = sigmoid_ratio_weights(&ll).unwrap();
        prop_assert!(w.iter().all(|v| (0.5..=1.0).contains(v)));
        let total: f64 = ll.iter().sum();
        let n = ll.len() as f64;
        for (v, l) in w.iter().zip(&ll) {
            let arg = (n.ln() + l - total).exp();
            if arg.is_finite() {
                prop_assert!((v - sigmoid(arg)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gp_kernel_factors(theta in 0.05f64..12.0, psi in 0.05f64..12.0, m in 2usize..25) {
        let model = gp_model((0..m).map(|i| i as f64 / (m - 1) as f64).collect()).unwrap();
        let f = model.factor(&SharedParam::scalar(theta), &TaskParam::scalar(psi)).unwrap();
        prop_assert!(f.log_det.is_finite());
        prop_assert!(f.jitter <= prompt_core::model::GP_MAX_JITTER);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_and_bound_hold(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let inst = gen_toy_instance(ToySpec::random(&mut rng), &mut rng).unwrap();
        let d = check_decomposition(&inst.model, &inst.true_process, &inst.grid, &inst.relevance).unwrap();
        prop_assert!(d.residual.abs() < 1e-9, "residual {}", d.residual);
        let b = check_information_bound(&inst.model, &inst.true_process, &inst.grid, &inst.source_psi_prior).unwrap();
        prop_assert!(b.satisfied, "IG {} > bound {}", b.ig_classic, b.rhs);
    }
}
