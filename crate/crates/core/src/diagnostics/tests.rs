use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, RngCore};

use super::cone::{project_l1_ball, project_simplex};
use super::*;
use crate::contexts::{ContextSampler, ContextSet, ContextSource, DistributionKind, DistributionSpec};
use crate::util::stream_rng;

fn random_psd(d: usize, rank: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let a = DMatrix::from_fn(d, rank, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() / rank as f64
}

fn ratio(m: &DMatrix<f64>, beta: &DVector<f64>, support: &[usize]) -> f64 {
    let on: f64 = support.iter().map(|&j| beta[j].abs()).sum();
    support.len() as f64 * beta.dot(&(m * beta)) / (on * on)
}

#[test]
fn simplex_projection_is_optimal() {
    let mut rng = stream_rng(1, 0);
    for _ in 0..200 {
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut p = x.clone();
        project_simplex(&mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
        // Variational inequality against random feasible points.
        for _ in 0..20 {
            let mut q: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= s);
            let ip: f64 = (0..5).map(|i| (x[i] - p[i]) * (q[i] - p[i])).sum();
            assert!(ip <= 1e-12);
        }
    }
}

#[test]
fn l1_projection_is_optimal() {
    let mut rng = stream_rng(2, 0);
    for _ in 0..200 {
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut p = x.clone();
        project_l1_ball(&mut p, 3.0);
        let norm: f64 = p.iter().map(|v| v.abs()).sum();
        assert!(norm <= 3.0 + 1e-12);
        if x.iter().map(|v| v.abs()).sum::<f64>() <= 3.0 {
            assert_eq!(p, x);
        }
        for _ in 0..20 {
            let mut q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let n: f64 = q.iter().map(|v| v.abs()).sum();
            let r = 3.0 * rng.random::<f64>();
            q.iter_mut().for_each(|v| *v *= r / n);
            let ip: f64 = (0..4).map(|i| (x[i] - p[i]) * (q[i] - p[i])).sum();
            assert!(ip <= 1e-10);
        }
    }
}

#[test]
fn cone_membership() {
    let s = [0];
    assert!(in_cone(&DVector::from_vec(vec![1.0, 3.0, 0.0]), &s));
    assert!(in_cone(&DVector::from_vec(vec![-1.0, 1.5, -1.5]), &s));
    assert!(!in_cone(&DVector::from_vec(vec![1.0, 3.0, 1e-9]), &s));
    assert!(!in_cone(&DVector::from_vec(vec![0.0, 0.0, 0.0]), &s));
    assert!(ConeSample::new(DVector::from_vec(vec![1.0, 4.0]), &s).is_err());
    assert!(ConeSample::new(DVector::from_vec(vec![1.0, 2.0]), &[0, 0]).is_err());
    assert_eq!(ConeSample::new(DVector::from_vec(vec![1.0, 2.0]), &s).unwrap().beta()[1], 2.0);
}

#[test]
fn identity_has_unit_compatibility() {
    for d in [3, 6, 10] {
        for s in 1..=3 {
            let support: Vec<usize> = (0..s).map(|k| k * d / s).collect();
            let est = compatibility_constant(&DMatrix::identity(d, d), &support, &ConeOptions::default()).unwrap();
            assert!((est.value - 1.0).abs() < 1e-9, "d {d} s {s}: {}", est.value);
            assert!(est.exhaustive);
            let re = restricted_eigenvalue(&DMatrix::identity(d, d), &support, &ConeOptions::default()).unwrap();
            assert!((re.value - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn zero_matrix_and_scaling() {
    let opts = ConeOptions::default();
    assert_eq!(compatibility_constant(&DMatrix::zeros(4, 4), &[1, 2], &opts).unwrap().value, 0.0);
    for seed in 0..5 {
        let m = random_psd(6, 4, seed);
        let a = compatibility_constant(&m, &[0, 2, 5], &opts).unwrap().value;
        let b = compatibility_constant(&(&m * 2.0), &[0, 2, 5], &opts).unwrap().value;
        assert_eq!(b, 2.0 * a);
    }
}

#[test]
fn invariant_to_joint_permutation() {
    let m = random_psd(5, 5, 7);
    let perm = [3, 0, 4, 1, 2];
    let pm = DMatrix::from_fn(5, 5, |i, j| m[(perm[i], perm[j])]);
    // Index `perm[i]` of `m` becomes index `i` of `pm`.
    let support = [0, 4];
    let moved: Vec<usize> = support.iter().map(|&j| perm.iter().position(|&p| p == j).unwrap()).collect();
    let opts = ConeOptions::default();
    let a = compatibility_constant(&m, &support, &opts).unwrap().value;
    let b = compatibility_constant(&pm, &moved, &opts).unwrap().value;
    assert!((a - b).abs() < 1e-8 * a.max(1.0), "{a} vs {b}");
}

#[test]
fn compatibility_matches_grid_search() {
    // d = 3: enumerate the scale-fixed cone on a fine grid.
    for seed in 0..4 {
        let m = random_psd(3, 3, 100 + seed);
        for support in [vec![0], vec![0, 2]] {
            let est = compatibility_constant(&m, &support, &ConeOptions::default()).unwrap();
            let n = 400;
            let mut best = f64::INFINITY;
            let rest: Vec<usize> = (0..3).filter(|j| !support.contains(j)).collect();
            for i in 0..=n {
                for k in 0..=n {
                    let mut beta = DVector::zeros(3);
                    if support.len() == 1 {
                        beta[support[0]] = 1.0;
                        let (a, b) = (-3.0 + 6.0 * i as f64 / n as f64, -3.0 + 6.0 * k as f64 / n as f64);
                        if a.abs() + b.abs() > 3.0 {
                            continue;
                        }
                        beta[rest[0]] = a;
                        beta[rest[1]] = b;
                    } else {
                        let u = i as f64 / n as f64;
                        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                        beta[support[0]] = u;
                        beta[support[1]] = sign * (1.0 - u);
                        beta[rest[0]] = -3.0 + 6.0 * (k / 2) as f64 / (n / 2) as f64;
                    }
                    best = best.min(ratio(&m, &beta, &support));
                }
            }
            assert!(est.value <= best + 1e-12, "{} > grid {best}", est.value);
            assert!(best - est.value < 2e-3 * best.max(1.0), "{} vs grid {best}", est.value);
        }
    }
}

#[test]
fn non_exhaustive_mode_is_an_upper_bound() {
    let m = random_psd(12, 12, 3);
    let support: Vec<usize> = (0..9).collect();
    let exhaustive = compatibility_constant(&m, &support, &ConeOptions { max_exhaustive_orthants: 256, ..ConeOptions::default() }).unwrap();
    let opts = ConeOptions { max_exhaustive_orthants: 8, refine_top: 4, samples: 2000, ..ConeOptions::default() };
    let partial = compatibility_constant(&m, &support, &opts).unwrap();
    assert!(exhaustive.exhaustive && !partial.exhaustive);
    assert_eq!(partial.orthants_refined, 4);
    assert!(partial.value >= exhaustive.value - 1e-9);
}

#[test]
fn cone_input_errors() {
    let opts = ConeOptions::default();
    assert!(compatibility_constant(&DMatrix::identity(3, 3), &[], &opts).is_err());
    assert!(compatibility_constant(&DMatrix::identity(3, 3), &[3], &opts).is_err());
    assert!(compatibility_constant(&DMatrix::zeros(3, 2), &[0], &opts).is_err());
    let mut m = DMatrix::identity(3, 3);
    m[(1, 1)] = f64::NAN;
    assert!(restricted_eigenvalue(&m, &[0], &opts).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimate_below_any_cone_point(seed in 0u64..1000, s in 1usize..4, probes in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 6), 1..8)) {
        let m = random_psd(6, 3, seed);
        let support: Vec<usize> = (0..s).collect();
        let est = compatibility_constant(&m, &support, &ConeOptions { samples: 500, ..ConeOptions::default() }).unwrap();
        let lmin = m.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(est.value >= lmin - 1e-9);
        prop_assert!(in_cone(&DVector::from_vec(est.beta.clone()), &support) || est.value == 0.0);
        for p in probes {
            let mut beta = DVector::from_vec(p);
            let (on, off) = support.iter().fold((0.0, 0.0), |acc, &j| (acc.0 + beta[j].abs(), acc.1));
            let off = off + beta.iter().map(|v| v.abs()).sum::<f64>() - on;
            if on == 0.0 { continue; }
            if off > 3.0 * on {
                let scale = 3.0 * on / off;
                for j in 0..6 { if !support.contains(&j) { beta[j] *= scale; } }
            }
            prop_assert!(ratio(&m, &beta, &support) >= est.value - 1e-9);
        }
    }
}

#[test]
fn lemma_quantities() {
    // 2·√(2(ln 40 + ln 10)) evaluated independently.
    assert!((lemma_lambda(1.0, 1.0, 0.05, 10, 1) - 6.923_273_5).abs() < 1e-6);
    assert!((lemma_lambda(0.5, 4.0, 0.05, 10, 4) - 6.923_273_5).abs() < 1e-6);
    let (l, k, p) = (0.3, 0.8, 0.6);
    assert!(oracle_bound_l1(4, l, k, p) >= 2.0 * oracle_bound_l1(2, l, k, p) - 1e-15);
    assert!((oracle_bound_l2(4, 1.0, 1.0, 1.0) - 6.0).abs() < 1e-15);
}

fn small_oracle() -> OracleIneqConfig {
    OracleIneqConfig {
        trajectories: 40,
        horizon: 200,
        checkpoints: vec![20, 50, 100, 200],
        burn_in: 20,
        seed: 5,
        ..OracleIneqConfig::default()
    }
}

#[test]
fn oracle_check_passes_and_is_deterministic() {
    let a = check_oracle_inequality(&small_oracle()).unwrap();
    assert!(a.pass);
    assert_eq!(a.checkpoints.len(), 4);
    assert!(a.checkpoints.iter().all(|c| c.used + c.excluded == 40));
    assert_eq!(a, check_oracle_inequality(&small_oracle()).unwrap());
}

#[test]
fn noiseless_oracle_bound_holds_everywhere() {
    let cfg = OracleIneqConfig { sigma: 0.0, lambda0: Some(0.2), ..small_oracle() };
    let r = check_oracle_inequality(&cfg).unwrap();
    for c in &r.checkpoints {
        assert_eq!(c.violations, 0, "t {}", c.t);
        assert!(c.mean_error_l1 < 1e-4, "t {}: {}", c.t, c.mean_error_l1);
    }
}

#[test]
fn logistic_oracle_check_runs() {
    let cfg = OracleIneqConfig { link: crate::LinkKind::Logistic, trajectories: 10, ..small_oracle() };
    let r = check_oracle_inequality(&cfg).unwrap();
    assert!(r.checkpoints.iter().all(|c| c.mean_bound_l1.is_finite()));
}

#[test]
fn oracle_config_errors() {
    for cfg in [
        OracleIneqConfig { s0: 0, ..small_oracle() },
        OracleIneqConfig { delta: 1.0, ..small_oracle() },
        OracleIneqConfig { checkpoints: vec![500], ..small_oracle() },
    ] {
        assert!(check_oracle_inequality(&cfg).is_err());
    }
}

#[test]
fn greedy_conditional_gram_is_identity_for_two_independent_gaussian_arms() {
    // For K = 2 i.i.d. N(0, I) arms, E[X_a X_aᵀ] = I whatever the greedy direction.
    let spec = DistributionSpec::new(DistributionKind::GaussianEquicorrelated { rho2: 0.0 }, 4, 2);
    let sampler = ContextSampler::new(&spec, &mut stream_rng(0, 0)).unwrap();
    let beta = DVector::from_vec(vec![0.8, -0.3, 0.0, 1.5]);
    let n = 200_000;
    let g = conditional_gram(&sampler, Some(&beta), n, &mut stream_rng(3, 0));
    // Entry variances are at most 3 for Gaussian fourth moments.
    let tol = 4.0 * (3.0 / n as f64).sqrt();
    for i in 0..4 {
        for j in 0..4 {
            let target = if i == j { 1.0 } else { 0.0 };
            assert!((g[(i, j)] - target).abs() < tol, "({i},{j}) = {}", g[(i, j)]);
        }
    }
}

#[test]
fn concentration_decays_for_sa_trajectories() {
    let cfg = ConcentrationConfig { trajectories: 20, seed: 4, ..ConcentrationConfig::default() };
    let r = check_matrix_concentration(&cfg).unwrap();
    assert!(r.pass, "ratio {}", r.decay_ratio);
    assert!((r.phi0_sq_estimate - 1.0).abs() < 0.05);
    // Empirical compatibility is positive and stays so after burn-in.
    assert!(r.checkpoints.iter().filter(|c| c.t >= 50).all(|c| c.min_phi2_empirical > 0.05));
    assert_eq!(r, check_matrix_concentration(&cfg).unwrap());
}

#[test]
fn random_policy_on_uniform_contexts_decays_at_root_rate() {
    let cfg = ConcentrationConfig {
        dist: crate::ContextFamily::Uniform,
        policy: ConcentrationPolicy::Random,
        trajectories: 50,
        horizon: 1600,
        checkpoints: vec![100, 200, 400, 800, 1600],
        decay_from: 100,
        decay_to: 400,
        seed: 8,
        ..ConcentrationConfig::default()
    };
    let r = check_matrix_concentration(&cfg).unwrap();
    assert!((-0.65..=-0.35).contains(&r.log_log_slope), "slope {}", r.log_log_slope);
}

#[test]
fn bernstein_threshold_and_bound_shapes() {
    // w + √(2w) + √(4 ln 50 / 100) + 2 ln 50 / 100 at w = 0.05.
    assert!((bernstein_threshold(100, 0.05, 5) - 0.840_042).abs() < 1e-5);
    let cfg = BernsteinConfig { d: 1, grid: vec![(100, 0.01), (200, 0.01), (100, 50.0)], trials: 100_000, seed: 2, ..BernsteinConfig::default() };
    let r = check_bernstein_adapted(&cfg).unwrap();
    assert!(r.pass);
    let (a, b, c) = (&r.rows[0], &r.rows[1], &r.rows[2]);
    assert!((b.bound - a.bound * a.bound).abs() < 1e-15);
    assert!(a.empirical > 0.0, "tail should be visible at this threshold");
    assert!(b.empirical <= a.empirical + 3.0 * (a.empirical / 100_000.0).sqrt());
    assert!(c.bound < 1e-100 && c.exceedances == 0);
}

#[test]
fn every_generator_respects_the_bound() {
    for generator in [MartingaleKind::Rademacher, MartingaleKind::Adapted, MartingaleKind::OuterProduct] {
        let cfg = BernsteinConfig { trials: 5_000, generator, seed: 1, ..BernsteinConfig::default() };
        let r = check_bernstein_adapted(&cfg).unwrap();
        assert!(r.pass, "{generator:?}");
        assert!(r.rows.iter().all(|row| row.max_statistic > 0.0 && row.max_statistic < 1.0));
    }
    let a = check_bernstein_adapted(&BernsteinConfig { trials: 3000, jobs: Some(1), ..BernsteinConfig::default() }).unwrap();
    let b = check_bernstein_adapted(&BernsteinConfig { trials: 3000, jobs: Some(3), ..BernsteinConfig::default() }).unwrap();
    assert_eq!(a.rows, b.rows);
}

#[test]
fn generalized_eigenvalue_of_diagonal_pair() {
    let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
    let b = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
    assert!((super::balanced::generalized_max_eigenvalue(&a, &b).unwrap() - 2.0).abs() < 1e-12);
    assert!(super::balanced::generalized_max_eigenvalue(&a, &DMatrix::zeros(2, 2)).is_none());
}

#[test]
fn identical_arms_give_half() {
    // Every rank has the same covariance, so each middle rank sits at half the extremes sum.
    let report = estimate_balanced_covariance_constant(&IdenticalArms(3, 4), &DVector::from_element(4, 1.0), 5000, 5, 0, None).unwrap();
    assert_eq!(report.orderings_seen, 1);
    assert!((report.estimate - 0.5).abs() < 1e-9, "{}", report.estimate);
    assert!(report.estimate <= 1.0);
}

/// Every arm gets the same Gaussian vector.
struct IdenticalArms(usize, usize);

impl ContextSource for IdenticalArms {
    fn arms(&self) -> usize {
        self.0
    }

    fn dim(&self) -> usize {
        self.1
    }

    fn sample_context_set(&self, round: usize, rng: &mut dyn RngCore) -> ContextSet {
        let x: Vec<f64> = (0..self.1).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
        ContextSet::new(DMatrix::from_fn(self.0, self.1, |_, j| x[j]), round)
    }
}

#[test]
fn balanced_constant_for_independent_gaussian_arms() {
    let cfg = BalancedConfig { d: 5, samples: 300_000, seed: 1, ..BalancedConfig::default() };
    let r = cfg.run().unwrap();
    assert_eq!(r.orderings_seen, 6);
    assert_eq!(r.rows.len(), 6);
    assert!(r.estimate <= 2.0 + 3.0 * r.se, "{} ± {}", r.estimate, r.se);
    assert!(r.estimate > 0.0 && r.se > 0.0);
}

#[test]
fn balanced_input_errors() {
    let two = BalancedConfig { arms: 2, samples: 1000, ..BalancedConfig::default() };
    assert!(two.run().is_err());
    let wrong_beta = BalancedConfig { beta: Some(vec![1.0; 3]), samples: 1000, ..BalancedConfig::default() };
    assert!(wrong_beta.run().is_err());
}

#[test]
fn sparse_orderings_are_skipped_with_a_note() {
    let cfg = BalancedConfig { d: 10, arms: 4, samples: 200, batches: 2, ..BalancedConfig::default() };
    let r = cfg.run().unwrap();
    assert!(r.notes.iter().any(|n| n.contains("skipped")));
}

#[test]
fn reports_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let r = check_bernstein_adapted(&BernsteinConfig { trials: 2000, ..BernsteinConfig::default() }).unwrap();
    let [toml_path, csv_path] = write_report(dir.path(), "bernstein", &r, &r.rows).unwrap();
    let back: BernsteinReport = toml::from_str(&std::fs::read_to_string(toml_path).unwrap()).unwrap();
    assert_eq!(back, r);
    let rows: Vec<BernsteinRow> = csv::Reader::from_path(csv_path).unwrap().deserialize().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);

    let c = check_matrix_concentration(&ConcentrationConfig { trajectories: 3, horizon: 100, checkpoints: vec![50, 100], decay_from: 50, decay_to: 100, ..ConcentrationConfig::default() }).unwrap();
    let [toml_path, _] = write_report(dir.path(), "concentration", &c, &c.checkpoints).unwrap();
    let back: ConcentrationReport = toml::from_str(&std::fs::read_to_string(toml_path).unwrap()).unwrap();
    assert_eq!(back.checkpoints.len(), 2);
}
