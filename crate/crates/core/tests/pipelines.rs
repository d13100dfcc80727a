use adaptint_core::domain::Horizon;
use adaptint_core::envs::{smart, MdpSpec, Misspecification, ObservationalSpec, SeparableSpec, SmartSpec};
use adaptint_core::eval::{regime_agreement, smart_regime_value};
use adaptint_core::indefinite::markov_steps;
use adaptint_core::offline::{
    g_estimation_fit, q_learning_fit, tabular_q_update, value_aiptw, value_iptw, AdjunctModel, BehaviorProbs, Bootstrap, GEstimationSpec,
    OutcomeFit, PropensityModel, QLoss, TabularQ,
};
use adaptint_core::RngSpec;
use proptest::prelude::*;

#[test]
fn fitted_smart_regime_is_valued_consistently_by_iptw_and_monte_carlo() {
    let spec = SmartSpec::default();
    let data = spec.simulate(20_000, &mut RngSpec::new(10, 0).stream()).unwrap();
    let (_, regime) = q_learning_fit(&data, &smart::standard_maps(), 1.0, &QLoss::Ols).unwrap();
    let (mc, mc_se) = smart_regime_value(&spec, &regime, 1.0, 200_000, &mut RngSpec::new(10, 1).stream()).unwrap();
    let fresh = spec.simulate(20_000, &mut RngSpec::new(10, 2).stream()).unwrap();
    let est = value_iptw(&fresh, &regime, &BehaviorProbs::Recorded, 1.0, Bootstrap::new(200, RngSpec::new(10, 3)).unwrap()).unwrap();
    assert!((est.point - mc).abs() < 4.0 * (est.std_error + mc_se), "iptw {} vs mc {mc}", est.point);
    assert!(mc <= spec.optimal_value(1.0) + 4.0 * mc_se);
}

#[test]
fn q_learning_and_g_estimation_agree_under_correct_models() {
    let spec = SmartSpec::default();
    let data = spec.simulate(20_000, &mut RngSpec::new(11, 0).stream()).unwrap();
    let (_, q) = q_learning_fit(&data, &smart::standard_maps(), 1.0, &QLoss::Ols).unwrap();
    let gspec = GEstimationSpec {
        contrast_maps: smart::standard_maps(),
        propensity: vec![PropensityModel::Constant],
        adjunct: vec![AdjunctModel::new(vec![0]), AdjunctModel::new(vec![0, 2, 5, 4])],
        gamma: 1.0,
    };
    let (_, g) = g_estimation_fit(&data, &gspec).unwrap();
    let test = spec.simulate(5_000, &mut RngSpec::new(11, 1).stream()).unwrap();
    assert!(regime_agreement(&q, &g, &test).unwrap().iter().all(|a| *a > 0.97));
}

#[test]
fn aiptw_matches_truth_on_observational_design() {
    let spec = ObservationalSpec::default();
    let data = spec.simulate(20_000, &mut RngSpec::new(12, 0).stream()).unwrap();
    let cell = Misspecification::None;
    let propensity = spec.propensity_model(cell).fit(&data, 0).unwrap();
    let outcome = OutcomeFit::fit(&data, &spec.outcome_map(cell), 0.0).unwrap();
    let boot = Bootstrap::new(200, RngSpec::new(12, 1)).unwrap();
    let est = value_aiptw(&data, &spec.oracle_regime(), &propensity, &outcome, boot).unwrap();
    assert!((est.point - spec.optimal_value()).abs() < 4.0 * est.std_error, "{} vs {}", est.point, spec.optimal_value());
}

#[test]
fn separable_oracle_earns_the_gain() {
    let spec = SeparableSpec::default();
    let data = spec.simulate(20_000, &mut RngSpec::new(13, 0).stream()).unwrap();
    assert_eq!(data.horizon, Horizon::Finite(1));
    let oracle = spec.oracle_regime();
    let (mut hit, mut count) = (0.0, 0usize);
    for tr in &data.trajectories {
        let total: f64 = tr.stages.iter().map(|s| s.reward.unwrap_or(0.0)).sum();
        let concordant = (0..2).all(|t| oracle.decide(tr, t).unwrap() == tr.stages[t].action.0);
        if concordant {
            hit += total;
            count += 1;
        } else {
            assert_eq!(total, 0.0);
        }
    }
    let mean = hit / count as f64;
    assert!((mean - (spec.gain + spec.noise / 2.0)).abs() < 0.02, "{mean}");
}

#[test]
fn tabular_q_on_logged_transitions_approaches_optimal_q() {
    let m = MdpSpec::three_state_example();
    let data = m.rollout(&m.uniform_policy(), 500, 200, &mut RngSpec::new(14, 0).stream()).unwrap();
    let steps = markov_steps(&data).unwrap();
    let mut table = TabularQ::new(m.n_states, m.n_actions);
    for _ in 0..500 {
        for s in &steps {
            let x = m.decode(s.state).unwrap();
            let next = s.next.map(|v| m.decode(v).unwrap());
            tabular_q_update(&mut table, x, s.action, s.reward, next, 0.5, m.gamma).unwrap();
        }
    }
    let q = m.optimal_q(1e-12);
    for (x, row) in q.iter().enumerate() {
        for (a, want) in row.iter().enumerate() {
            assert!((table.get(x, a).unwrap() - want).abs() < 1e-6, "Q({x}, {a})");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn simulators_are_pure_functions_of_the_stream(seed in any::<u64>(), n in 1usize..40) {
        let smart = SmartSpec::default();
        let a = smart.simulate(n, &mut RngSpec::new(seed, 0).stream()).unwrap();
        let b = smart.simulate(n, &mut RngSpec::new(seed, 0).stream()).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), n);

        let m = MdpSpec::three_state_example();
        let c = m.rollout(&m.uniform_policy(), n, 50, &mut RngSpec::new(seed, 1).stream()).unwrap();
        let d = m.rollout(&m.uniform_policy(), n, 50, &mut RngSpec::new(seed, 1).stream()).unwrap();
        prop_assert_eq!(c, d);
    }

    #[test]
    fn recorded_behavior_probs_are_valid(seed in any::<u64>()) {
        let data = ObservationalSpec::default().simulate(50, &mut RngSpec::new(seed, 0).stream()).unwrap();
        for tr in &data.trajectories {
            for s in &tr.stages {
                let p = s.behavior_prob.unwrap();
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
