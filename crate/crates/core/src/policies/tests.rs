use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::*;
use crate::contexts::{ContextSampler, DistributionKind, DistributionSpec};
use crate::util::stream_rng;

fn sampler(rho2: f64, d: usize, arms: usize) -> ContextSampler {
    let spec = DistributionSpec::new(DistributionKind::GaussianEquicorrelated { rho2 }, d, arms);
    ContextSampler::new(&spec, &mut stream_rng(0, 0)).unwrap()
}

fn setup(d: usize, arms: usize) -> PolicySetup {
    PolicySetup {
        d,
        arms,
        link: LinkKind::Linear,
        lambda0: 1.0,
        refit_growth: None,
        lasso_bandit: LassoBanditTuning::for_sparsity(2, arms),
        dr_lasso: DrLassoTuning::for_sparsity(2, arms),
        solver: SolverOptions::default(),
    }
}

#[test]
fn first_round_ties_pick_arm_zero() {
    let mut p = SaLasso::new(3, SaLassoConfig::new(1.0, LinkKind::Linear)).unwrap();
    let ctx = sampler(0.0, 3, 4).sample(1, &mut stream_rng(1, 0));
    assert_eq!(p.choose(&ctx), 0);
}

#[test]
fn greedy_on_estimate() {
    let beta = DVector::from_vec(vec![1.0, 0.0]);
    let ctx = ContextSet::new(DMatrix::from_row_slice(2, 2, &[0.5, 3.0, 0.9, -1.0]), 1);
    assert_eq!(sa_lasso_choose(&beta, &ctx), 1);
}

#[test]
fn choice_invariant_to_positive_rescaling_and_link() {
    let s = sampler(0.3, 8, 5);
    let mut rng = stream_rng(2, 0);
    for t in 0..1000 {
        let ctx = s.sample(t, &mut rng);
        let beta = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let c: f64 = rng.random_range(1e-3..1e3);
        let base = sa_lasso_choose(&beta, &ctx);
        assert_eq!(sa_lasso_choose(&(c * &beta), &ctx), base);
        let through_link = argmax(ctx.scores(&beta).iter().map(|&z| LinkKind::Logistic.mu(z)));
        assert_eq!(through_link, base);
    }
}

#[test]
fn oracle_and_sa_agree_when_estimate_is_proportional_to_truth() {
    let s = sampler(0.7, 10, 3);
    let mut rng = stream_rng(3, 0);
    let param = crate::contexts::make_parameter(10, 4, &mut rng).unwrap();
    let model = ModelSpec::from_parameter(param, LinkKind::Logistic, 1.0).unwrap();
    let mut sa = SaLasso::new(10, SaLassoConfig::new(1.0, LinkKind::Logistic)).unwrap();
    sa.set_beta_hat(0.37 * &model.beta_star);
    let mut oracle = Oracle::new(model.clone());
    for t in 0..1000 {
        let ctx = s.sample(t, &mut rng);
        assert_eq!(sa.choose(&ctx), oracle.choose(&ctx));
    }
}

#[test]
fn heavy_penalty_keeps_estimate_at_zero() {
    let mut p = SaLasso::new(4, SaLassoConfig::new(1e6, LinkKind::Linear)).unwrap();
    let x = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.0]);
    p.observe(&x, 3.0).unwrap();
    assert!(p.beta_hat().iter().all(|&b| b == 0.0));
    assert_eq!(p.round(), 2);
    assert!((p.last_lambda().unwrap() - lambda_schedule_ref(1e6, 1, 4)).abs() < 1e-6);
}

fn lambda_schedule_ref(lambda0: f64, t: usize, d: usize) -> f64 {
    lambda0 * ((4.0 * (t as f64).ln() + 2.0 * (d as f64).ln()) / t as f64).sqrt()
}

#[test]
fn estimate_improves_on_noiseless_trajectory() {
    let (d, arms) = (2, 2);
    let s = sampler(0.0, d, arms);
    let mut rng = stream_rng(4, 0);
    let model = ModelSpec::from_parameter(crate::contexts::make_parameter(d, 1, &mut rng).unwrap(), LinkKind::Linear, 0.0).unwrap();
    let mut p = SaLasso::new(d, SaLassoConfig::new(0.1, LinkKind::Linear)).unwrap();
    let mut err_at_20 = None;
    for t in 1..=200 {
        let ctx = s.sample(t, &mut rng);
        let a = p.choose(&ctx);
        let y = model.reward_with_noise(ctx.arm(a).dot(&model.beta_star), 0.0);
        p.update(&ctx, a, y).unwrap();
        if t == 20 {
            err_at_20 = Some((p.beta_hat() - &model.beta_star).lp_norm(1));
        }
    }
    let err_final = (p.beta_hat() - &model.beta_star).lp_norm(1);
    assert!(err_final < err_at_20.unwrap(), "{err_final} vs {err_at_20:?}");
}

#[test]
fn refit_accelerator_skips_rounds() {
    let s = sampler(0.0, 5, 2);
    let mut rng = stream_rng(5, 0);
    let mut cfg = SaLassoConfig::new(1.0, LinkKind::Linear);
    cfg.refit_growth = Some(1.5);
    let mut p = SaLasso::new(5, cfg).unwrap();
    let mut refits = 0;
    let mut last = None;
    for t in 1..=100 {
        let ctx = s.sample(t, &mut rng);
        p.update(&ctx, 0, 1.0).unwrap();
        if p.last_lambda() != last {
            refits += 1;
            last = p.last_lambda();
        }
    }
    assert!(refits < 20, "{refits} refits");
    assert!(SaLasso::new(5, SaLassoConfig { refit_growth: Some(1.0), ..cfg }).is_err());
    assert!(SaLasso::new(5, SaLassoConfig::new(0.0, LinkKind::Linear)).is_err());
}

/// Direct enumeration of the forced-sampling sets, 1-based arms and times.
fn enumerate_forced(arms: usize, q: usize, horizon: usize) -> Vec<Option<usize>> {
    let mut out = vec![None; horizon + 1];
    for n in 0..20u32 {
        for i in 1..=arms {
            for j in (q * (i - 1) + 1)..=(q * i) {
                let t = (2usize.pow(n) - 1) * arms * q + j;
                if t <= horizon {
                    out[t] = Some(i - 1);
                }
            }
        }
    }
    out
}

#[test]
fn forced_schedule_matches_enumeration() {
    for (arms, q) in [(2, 1), (2, 3), (3, 2), (5, 1)] {
        let expected = enumerate_forced(arms, q, 2000);
        for (t, &want) in expected.iter().enumerate().skip(1) {
            assert_eq!(forced_arm(t, arms, q), want, "arms {arms} q {q} t {t}");
        }
    }
    let first: Vec<_> = (1..=8).map(|t| forced_arm(t, 2, 1)).collect();
    assert_eq!(first, vec![Some(0), Some(1), Some(0), Some(1), None, None, Some(0), Some(1)]);
}

#[test]
fn saturated_forced_schedule_ignores_data() {
    let (arms, horizon) = (2, 60);
    let tuning = LassoBanditTuning { q: horizon, h: 5.0, lambda1: 0.05, lambda2: 0.05 };
    let mut p = ForcedSamplingLasso::new(3, arms, tuning, SolverOptions::default()).unwrap();
    let s = sampler(0.0, 3, arms);
    let mut rng = stream_rng(6, 0);
    for t in 1..=horizon {
        let ctx = s.sample(t, &mut rng);
        let a = p.choose(&ctx);
        assert_eq!(Some(a), forced_arm(t, arms, horizon));
        p.update(&ctx, a, rng.random()).unwrap();
    }
    assert_eq!(p.forced_samples(0), horizon);
    assert_eq!(p.rounds_observed(), horizon);
}

#[test]
fn invalid_baseline_tuning_rejected() {
    let bad = LassoBanditTuning { q: 0, ..LassoBanditTuning::for_sparsity(5, 2) };
    assert!(ForcedSamplingLasso::new(3, 2, bad, SolverOptions::default()).is_err());
    let bad = DrLassoTuning { lambda2: -1.0, ..DrLassoTuning::for_sparsity(5, 2) };
    assert!(DrLasso::new(3, bad, SolverOptions::default(), stream_rng(0, 0)).is_err());
}

#[test]
fn single_arm_pseudo_rewards_are_observed_rewards() {
    let s = sampler(0.0, 4, 1);
    let mut rng = stream_rng(7, 0);
    let mut p = DrLasso::new(4, DrLassoTuning::for_sparsity(2, 1), SolverOptions::default(), stream_rng(7, 1)).unwrap();
    let mut observed = Vec::new();
    for t in 1..=50 {
        let ctx = s.sample(t, &mut rng);
        let a = p.choose(&ctx);
        assert_eq!(a, 0);
        let y = ctx.arm(0).sum() + rng.random::<f64>();
        observed.push(y);
        p.update(&ctx, a, y).unwrap();
    }
    let mean_obs = observed.iter().sum::<f64>() / 50.0;
    let mean_pseudo = p.pseudo_rewards().iter().sum::<f64>() / 50.0;
    assert!((mean_obs - mean_pseudo).abs() < 1e-12);
}

#[test]
fn pseudo_reward_is_unbiased_over_arm_randomization() {
    // E over a ~ π of the pseudo-reward equals X̄ᵀβ* for noiseless rewards.
    let ctx = ContextSet::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, -1.0]), 1);
    let beta_star = DVector::from_vec(vec![0.5, 1.5]);
    let beta_hat = DVector::from_vec(vec![-0.2, 0.4]);
    let probs = [0.2, 0.5, 0.3];
    let expect: f64 = (0..3)
        .map(|a| probs[a] * pseudo_reward(&ctx, &beta_hat, a, ctx.arm(a).dot(&beta_star), probs[a]))
        .sum();
    let target = ctx.features.row_mean().transpose().dot(&beta_star);
    assert!((expect - target).abs() < 1e-12);
}

fn play(kind: PolicyKind, seed: u64, rounds: usize) -> (Vec<usize>, usize) {
    let (d, arms) = (6, 3);
    let s = sampler(0.3, d, arms);
    let mut rng = stream_rng(seed, 0);
    let model = ModelSpec::from_parameter(crate::contexts::make_parameter(d, 2, &mut rng).unwrap(), LinkKind::Linear, 1.0).unwrap();
    let mut p = setup(d, arms).build(kind, &model, stream_rng(seed, 1)).unwrap();
    let mut actions = Vec::new();
    for t in 1..=rounds {
        let ctx = s.sample(t, &mut rng);
        let a = p.choose(&ctx);
        let y = model.reward_with_noise(ctx.arm(a).dot(&model.beta_star), rng.random_range(-1.0..1.0));
        p.update(&ctx, a, y).unwrap();
        actions.push(a);
    }
    (actions, p.rounds_observed())
}

#[test]
fn replay_is_deterministic_and_histories_complete() {
    for kind in PolicyKind::ALL {
        let (a, n) = play(kind, 11, 80);
        let (b, _) = play(kind, 11, 80);
        assert_eq!(a, b, "{kind}");
        assert_eq!(n, 80, "{kind}");
    }
    let (a, _) = play(PolicyKind::DrLasso, 11, 80);
    let (b, _) = play(PolicyKind::DrLasso, 12, 80);
    assert_ne!(a, b);
}

#[test]
fn learning_policies_ignore_the_true_model() {
    let (d, arms) = (5, 2);
    let s = sampler(0.0, d, arms);
    let m1 = ModelSpec::new(DVector::from_element(d, 1.0), LinkKind::Linear, 1.0).unwrap();
    let m2 = ModelSpec::new(DVector::from_element(d, -3.0), LinkKind::Linear, 0.1).unwrap();
    for kind in [PolicyKind::SaLasso, PolicyKind::LassoBandit, PolicyKind::DrLasso, PolicyKind::Random] {
        let mut p1 = setup(d, arms).build(kind, &m1, stream_rng(1, 1)).unwrap();
        let mut p2 = setup(d, arms).build(kind, &m2, stream_rng(1, 1)).unwrap();
        let mut rng = stream_rng(1, 2);
        for t in 1..=40 {
            let ctx = s.sample(t, &mut rng);
            let (a1, a2) = (p1.choose(&ctx), p2.choose(&ctx));
            assert_eq!(a1, a2, "{kind}");
            let y: f64 = rng.random();
            p1.update(&ctx, a1, y).unwrap();
            p2.update(&ctx, a2, y).unwrap();
        }
    }
}

#[test]
fn random_choice_is_uniform() {
    let mut rng = stream_rng(8, 0);
    let mut counts = [0usize; 4];
    for _ in 0..40_000 {
        counts[random_choose(&mut rng, 4)] += 1;
    }
    for c in counts {
        assert!((c as f64 / 40_000.0 - 0.25).abs() < 0.01);
    }
}

#[test]
fn policy_names_parse() {
    for kind in PolicyKind::ALL {
        assert_eq!(kind.as_str().parse::<PolicyKind>().unwrap(), kind);
    }
    assert!("ucb".parse::<PolicyKind>().is_err());
}
