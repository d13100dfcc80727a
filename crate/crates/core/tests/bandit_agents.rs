use adaptint_core::bandits::{AgentSpec, CenteredVariant, PolicyFeatures};
use adaptint_core::envs::{BanditEnvSpec, HabituationSpec};
use adaptint_core::eval::{run_bandit, Player, RunOptions};
use adaptint_core::RngSpec;
use proptest::prelude::*;

fn linear_agents() -> Vec<AgentSpec> {
    vec![
        AgentSpec::LinUcb { alpha: 1.0, lambda: 1.0 },
        AgentSpec::LinTs { nu: 0.5, lambda: 1.0, nig: None },
        AgentSpec::LinTs { nu: 1.0, lambda: 1.0, nig: Some((2.0, 1.0)) },
        AgentSpec::Bts { replicates: 10, lambda: 1.0 },
        AgentSpec::Centered { variant: CenteredVariant::Bose, nu: 1.0, lambda: 1.0, epsilon: 0.1, draws: 50 },
        AgentSpec::Centered { variant: CenteredVariant::Kim, nu: 1.0, lambda: 1.0, epsilon: 0.1, draws: 50 },
        AgentSpec::EpsilonGreedy { epsilon: 0.1, lambda: 1.0 },
        AgentSpec::Boltzmann { temperature: 0.5, lambda: 1.0 },
        AgentSpec::Uniform,
    ]
}

fn send_agents() -> Vec<AgentSpec> {
    vec![
        AgentSpec::Acts { nu: 1.0, pi_min: 0.1, pi_max: 0.9, lambda: 1.0, draws: 50, uniform_candidate: false },
        AgentSpec::ActorCritic {
            lambda_actor: 0.1,
            lambda_critic: 1.0,
            learning_rate: 0.5,
            iterations: 5,
            policy_features: PolicyFeatures::default(),
        },
    ]
}

fn mrt_env() -> BanditEnvSpec {
    let mut env = BanditEnvSpec::send_or_not(3);
    env.missing_prob = 0.2;
    env.availability = 0.7;
    env.habituation = Some(HabituationSpec { cap: 5, effect: -0.3 });
    env
}

fn check_run(agent: &AgentSpec, env: &BanditEnvSpec, seed: u64) {
    let run = run_bandit(&Player::Agent(agent.clone()), env, 150, RngSpec::new(seed, 0), RunOptions { keep_log: true })
        .unwrap_or_else(|e| panic!("{agent:?}: {e}"));
    assert_eq!(run.cumulative_regret.len(), 150);
    assert!(run.cumulative_regret.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{agent:?}: regret decreased");
    for entry in &run.log {
        assert!(entry.arms.available[entry.arm], "{agent:?} played an unavailable arm");
        if let Some(p) = &entry.probs {
            let total: f64 = p.iter().sum();
            assert!((total - 1.0).abs() < 1e-9, "{agent:?}: probabilities sum to {total}");
            assert!(p.iter().zip(&entry.arms.available).all(|(p, a)| *a || *p == 0.0));
        }
    }
}

#[test]
fn every_linear_agent_runs_on_stationary_and_adversarial_envs() {
    for env in [BanditEnvSpec::stationary(4, 3), BanditEnvSpec::adversarial(4, 3)] {
        for agent in linear_agents() {
            check_run(&agent, &env, 1);
        }
    }
}

#[test]
fn send_agents_handle_missing_rewards_and_availability() {
    let env = mrt_env();
    for agent in send_agents().into_iter().chain(linear_agents()) {
        check_run(&agent, &env, 2);
    }
}

#[test]
fn oracle_has_zero_regret() {
    let run = run_bandit(&Player::Oracle, &BanditEnvSpec::adversarial(5, 2), 300, RngSpec::new(3, 0), RunOptions::default()).unwrap();
    assert!(run.cumulative_regret.iter().all(|r| r.abs() < 1e-12));
}

#[test]
fn agents_learn_faster_than_uniform() {
    let env = BanditEnvSpec::stationary(5, 3);
    let regret = |agent: AgentSpec| {
        (0..4u64)
            .map(|s| {
                *run_bandit(&Player::Agent(agent.clone()), &env, 2000, RngSpec::new(s, 4), RunOptions::default())
                    .unwrap()
                    .cumulative_regret
                    .last()
                    .unwrap()
            })
            .sum::<f64>()
    };
    let uniform = regret(AgentSpec::Uniform);
    for agent in [
        AgentSpec::LinUcb { alpha: 1.0, lambda: 1.0 },
        AgentSpec::LinTs { nu: 0.5, lambda: 1.0, nig: None },
        AgentSpec::Bts { replicates: 10, lambda: 1.0 },
    ] {
        let r = regret(agent.clone());
        assert!(r * 5.0 < uniform, "{agent:?}: {r} vs uniform {uniform}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn runs_are_reproducible_from_the_rng_spec(seed in any::<u64>(), stream in 0u64..4) {
        let agent = Player::Agent(AgentSpec::LinTs { nu: 0.5, lambda: 1.0, nig: None });
        let env = mrt_env();
        let a = run_bandit(&agent, &env, 60, RngSpec::new(seed, stream), RunOptions { keep_log: true }).unwrap();
        let b = run_bandit(&agent, &env, 60, RngSpec::new(seed, stream), RunOptions { keep_log: true }).unwrap();
        prop_assert_eq!(a, b);
    }
}
