use super::*;
use crate::classifiers::{Activation, LinearClassifier, Mlp, TrainConfig};
use crate::distributions::{
    adversarial_shift, isotropic_gaussians, perturb_gaussians, sample, Dataset,
};
use crate::numerics::special::norm_cdf;
use crate::numerics::{Norm, Rng};
use crate::transport::{cwd_empirical, cwd_gaussian};

fn linear_objective<'a>(w: &'a [f64]) -> impl Fn(&[f64]) -> (f64, Vec<f64>) + 'a {
    move |x| (w.iter().zip(x).map(|(a, b)| a * b).sum(), w.to_vec())
}

#[test]
fn pgd_zero_budget_returns_input() {
    let cfg = AttackConfig {
        epsilon: 0.0,
        ..AttackConfig::default()
    };
    let x = vec![0.3, -0.7];
    let out = pgd_attack(linear_objective(&[1.0, 1.0]), &x, &cfg, &mut Rng::new(1));
    assert_eq!(out, x);
}

#[test]
fn pgd_linf_matches_sign_step() {
    let w = vec![2.0, -1.0, 0.5];
    let x = vec![0.0, 1.0, -1.0];
    let cfg = AttackConfig {
        norm: Norm::Linf,
        epsilon: 0.25,
        ..AttackConfig::default()
    };
    let out = pgd_attack(linear_objective(&w), &x, &cfg, &mut Rng::new(2));
    for ((o, xi), wi) in out.iter().zip(&x).zip(&w) {
        assert!((o - (xi + 0.25 * wi.signum())).abs() < 1e-9);
    }
}

#[test]
fn pgd_l2_matches_steepest_ascent() {
    let w = vec![3.0, 4.0];
    let x = vec![1.0, -2.0];
    let cfg = AttackConfig {
        norm: Norm::L2,
        epsilon: 0.5,
        ..AttackConfig::default()
    };
    let out = pgd_attack(linear_objective(&w), &x, &cfg, &mut Rng::new(3));
    let wn = Norm::L2.len(&w);
    for ((o, xi), wi) in out.iter().zip(&x).zip(&w) {
        assert!((o - (xi + 0.5 * wi / wn)).abs() < 1e-9);
    }
}

#[test]
fn pgd_respects_norm_constraint() {
    let model = Mlp::new(&[3, 16, 2], Activation::Relu, 10).unwrap();
    let mut rng = Rng::new(4);
    for norm in [Norm::L2, Norm::Linf] {
        for trial in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let cfg = AttackConfig {
                norm,
                epsilon: 0.3,
                seed: trial,
                ..AttackConfig::default()
            };
            let adv = pgd_attack(ce_objective(&model, 0), &x, &cfg, &mut rng);
            assert!(norm.dist(&adv, &x) <= 0.3 + 1e-9);
        }
    }
}

#[test]
fn warm_started_sweep_is_monotone() {
    let model = Mlp::new(&[4, 24, 3], Activation::Relu, 11).unwrap();
    let mut rng = Rng::new(5);
    let cfg = AttackConfig::default();
    for _ in 0..5 {
        let x: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let eps: Vec<f64> = (1..=8).map(|i| 0.1 * i as f64).collect();
        let results = pgd_attack_sweep(ce_objective(&model, 0), &x, &eps, &cfg, &mut rng);
        for pair in results.windows(2) {
            assert!(pair[1].1 >= pair[0].1 - 1e-12);
        }
    }
}

#[test]
fn boundary_distance_on_misclassified_point_is_zero() {
    let h = LinearClassifier::new(vec![1.0, 0.0], 0.0).unwrap();
    let cfg = AttackConfig::default();
    let r = boundary_distance(&h, &[-1.0, 0.0], 1, 4.0, &cfg, &Rng::new(6));
    assert_eq!(r.distance, 0.0);
}

#[test]
fn boundary_distance_linear_is_exact() {
    let h = LinearClassifier::new(vec![1.0, 0.0], 0.0).unwrap();
    let cfg = AttackConfig::default();
    let r = boundary_distance(&h, &[2.0, 0.0], 1, 4.0, &cfg, &Rng::new(7));
    assert_eq!(r.distance, 2.0);
    assert!(!r.censored);
    // Beyond the cap: censored at eps_max.
    let far = boundary_distance(&h, &[9.0, 0.0], 1, 4.0, &cfg, &Rng::new(8));
    assert_eq!(far.distance, 4.0);
    assert!(far.censored);
}

#[test]
fn boundary_bisection_matches_dense_sweep() {
    // Train a small MLP so its boundary is nontrivial, then compare the
    // bisection estimate against a dense ε-grid scan.
    let d = isotropic_gaussians(vec![vec![-1.5, 0.0], vec![1.5, 0.0]], 0.6, Norm::L2).unwrap();
    let data = sample(&d, 60, &Rng::new(9));
    let model = Mlp::new(&[2, 16, 2], Activation::Relu, 12).unwrap();
    let cfg_train = TrainConfig {
        epochs: 40,
        ..TrainConfig::default()
    };
    let (model, _) =
        crate::classifiers::sgd_train(model, &data.points, &data.labels, &cfg_train).unwrap();

    // Single-start attack: the flip predicate is then a deterministic
    // function of ε, so bisection and the dense sweep probe the same
    // threshold rather than per-ε restart luck.
    let attack = AttackConfig {
        steps: 20,
        restarts: 1,
        ..AttackConfig::default()
    };
    let eps_max = 4.0;
    let gap = eps_max / 4096.0;
    let eval = sample(&d, 3, &Rng::new(10));
    for i in 0..eval.len() {
        let (x, y) = (&eval.points[i], eval.labels[i]);
        if model.predict(x) != y {
            continue;
        }
        let rng = Rng::new(100 + i as u64);
        let bisect = boundary_distance(&model, x, y, eps_max, &attack, &rng);
        // Dense sweep over the same flip predicate: smallest grid ε that flips.
        let dense = (1..=4096)
            .map(|k| gap * k as f64)
            .find(|&eps| attack_flips(&model, x, y, eps, &attack, &rng))
            .expect("dense sweep found no flip below eps_max");
        assert!(
            (bisect.distance - dense).abs() <= gap + 1e-12,
            "point {i}: bisection {} vs dense sweep {dense}",
            bisect.distance
        );
    }
}

#[test]
fn avg_robustness_zero_when_always_wrong() {
    let h = LinearClassifier::new(vec![1.0], 0.0).unwrap();
    // All points positive but labeled 0: every point misclassified.
    let data = Dataset::new(vec![vec![1.0], vec![2.0]], vec![0, 0], "t".into()).unwrap();
    let est = avg_robustness(&h, &data, 4.0, &AttackConfig::default());
    assert_eq!(est.mean_distance, 0.0);
}

#[test]
fn avg_robustness_matches_closed_form_margins() {
    let d = isotropic_gaussians(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.5, Norm::L2).unwrap();
    let data = sample(&d, 100, &Rng::new(11));
    let h = LinearClassifier::new(vec![1.0, 0.0], 0.0).unwrap();
    let eps_max = 100.0;
    let est = avg_robustness(&h, &data, eps_max, &AttackConfig::default());
    let expect: f64 = data
        .points
        .iter()
        .zip(&data.labels)
        .map(|(x, &y)| {
            if h.predict(x) != y {
                0.0
            } else {
                x[0].abs()
            }
        })
        .sum::<f64>()
        / data.len() as f64;
    assert!((est.mean_distance - expect).abs() < 1e-9);
}

#[test]
fn avg_robustness_is_homogeneous_in_scale() {
    let d = isotropic_gaussians(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.5, Norm::L2).unwrap();
    let data = sample(&d, 50, &Rng::new(12));
    let h = LinearClassifier::new(vec![0.7, -0.1], 0.0).unwrap();
    let base = avg_robustness(&h, &data, 1e6, &AttackConfig::default());
    let c = 3.0;
    let scaled_data = Dataset::new(
        data.points
            .iter()
            .map(|p| p.iter().map(|v| c * v).collect())
            .collect(),
        data.labels.clone(),
        "scaled".into(),
    )
    .unwrap();
    let scaled = avg_robustness(&h, &scaled_data, 1e6, &AttackConfig::default());
    assert!((scaled.mean_distance - c * base.mean_distance).abs() < 1e-9);
}

#[test]
fn decomposition_degenerate_terms_vanish() {
    let d = isotropic_gaussians(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.5, Norm::L2).unwrap();
    let data = sample(&d, 80, &Rng::new(13));
    let h = LinearClassifier::new(vec![1.0, 0.0], 0.0).unwrap();
    // Same evaluation set for proxy and real: shift penalty 0.
    let dec = decomposition(&h, &data, &data, &data, 10.0, &AttackConfig::default());
    assert_eq!(dec.shift_penalty, 0.0);
    assert_eq!(dec.generalization_penalty, 0.0);
    assert!(dec.empirical > 0.0);
}

/// Theorem 1 on a small Gaussian suite: the robustness gap between real and
/// proxy is bounded by the closed-form conditional W2 plus statistical slack.
#[test]
fn distribution_shift_penalty_bounded_by_cwd() {
    let d = isotropic_gaussians(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.8, Norm::L2).unwrap();
    let train = sample(&d, 150, &Rng::new(14));
    let model = Mlp::new(&[2, 16, 2], Activation::Relu, 13).unwrap();
    let attack = AttackConfig::default();
    let (model, _) = adv_train(
        model,
        &train,
        &Dataset::new(vec![], vec![], "empty".into()).unwrap(),
        1.0,
        &attack,
        &TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
    )
    .unwrap();

    let mut perturb_rng = Rng::new(15);
    let eps_max = 4.0;
    for k in 0..3 {
        let proxy = perturb_gaussians(&d, 0.2 + 0.2 * k as f64, 0.05, &mut perturb_rng).unwrap();
        let real_eval = sample(&d, 400, &Rng::new(300 + k));
        let proxy_eval = sample(&proxy, 400, &Rng::new(400 + k));
        let rob_real = avg_robustness(&model, &real_eval, eps_max, &attack);
        let rob_proxy = avg_robustness(&model, &proxy_eval, eps_max, &attack);
        let gap = (rob_real.mean_distance - rob_proxy.mean_distance).abs();
        let bound = cwd_gaussian(&d, &proxy).unwrap().total;
        let slack = 3.0 * (rob_real.standard_error() + rob_proxy.standard_error());
        assert!(
            gap <= bound + slack,
            "proxy {k}: |ΔRob| = {gap} > cwd {bound} + slack {slack}"
        );
    }
}

/// Theorem 7 exactness: the adversarially shifted distribution scales
/// robustness by (1−α) and sits at conditional distance α·Rob from the
/// original, both to machine-level precision on matched samples.
#[test]
fn adversarial_shift_tightness_is_exact() {
    let d = isotropic_gaussians(vec![vec![-2.0, 0.0], vec![2.0, 0.0]], 0.5, Norm::L2).unwrap();
    let h = LinearClassifier::new(vec![1.0, 0.0], 0.0).unwrap();
    let n = 150;
    let seed = Rng::new(16);
    let base = sample(&d, n, &seed);
    let eps_max = 1e9;
    let cfg = AttackConfig::default();
    let rob_base = avg_robustness(&h, &base, eps_max, &cfg).mean_distance;
    for &alpha in &[0.0, 0.25, 0.5, 1.0] {
        let shifted_dist = adversarial_shift(&d, &h, alpha).unwrap();
        let shifted = sample(&shifted_dist, n, &seed);
        let rob_shifted = avg_robustness(&h, &shifted, eps_max, &cfg).mean_distance;
        assert!(
            (rob_shifted - (1.0 - alpha) * rob_base).abs() < 1e-6,
            "alpha {alpha}: Rob {rob_shifted} vs (1-α)Rob {}",
            (1.0 - alpha) * rob_base
        );
        let cwd = cwd_empirical(&base, &shifted, Norm::L2).unwrap().total;
        assert!(
            (cwd - alpha * rob_base).abs() < 1e-6,
            "alpha {alpha}: cwd {cwd} vs α·Rob {}",
            alpha * rob_base
        );
    }
}

fn two_blob_dataset(n: usize, seed: u64) -> Dataset {
    let d = isotropic_gaussians(vec![vec![-1.5, 0.0], vec![1.5, 0.0]], 0.5, Norm::L2).unwrap();
    sample(&d, n, &Rng::new(seed))
}

#[test]
fn gamma_one_ignores_proxy_entirely() {
    let real = two_blob_dataset(40, 17);
    let proxy = two_blob_dataset(40, 18);
    let empty = Dataset::new(vec![], vec![], "empty".into()).unwrap();
    let attack = AttackConfig {
        epsilon: 0.3,
        ..AttackConfig::default()
    };
    let train = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let run = |proxy: &Dataset| {
        let model = Mlp::new(&[2, 8, 2], Activation::Relu, 19).unwrap();
        adv_train(model, &real, proxy, 1.0, &attack, &train).unwrap()
    };
    let (with_proxy, trace_a) = run(&proxy);
    let (without_proxy, trace_b) = run(&empty);
    assert_eq!(trace_a, trace_b);
    for i in 0..with_proxy.param_count() {
        assert_eq!(with_proxy.get_param(i), without_proxy.get_param(i));
    }
}

#[test]
fn gamma_zero_never_touches_real_data() {
    let real = two_blob_dataset(30, 20);
    let proxy = two_blob_dataset(30, 21);
    let attack = AttackConfig::default();
    let train = TrainConfig {
        epochs: 3,
        ..TrainConfig::default()
    };
    let model = Mlp::new(&[2, 8, 2], Activation::Relu, 22).unwrap();
    let mut real_touches = 0usize;
    adv_train_observed(model, &real, &proxy, 0.0, &attack, &train, |source, _| {
        if source == BatchSource::Real {
            real_touches += 1;
        }
    })
    .unwrap();
    assert_eq!(real_touches, 0);
}

#[test]
fn mixture_validation_errors() {
    let empty = Dataset::new(vec![], vec![], "empty".into()).unwrap();
    let data = two_blob_dataset(10, 23);
    let model = || Mlp::new(&[2, 4, 2], Activation::Relu, 0).unwrap();
    let attack = AttackConfig::default();
    let train = TrainConfig {
        epochs: 1,
        ..TrainConfig::default()
    };
    assert!(adv_train(model(), &empty, &data, 0.5, &attack, &train).is_err());
    assert!(adv_train(model(), &data, &empty, 0.5, &attack, &train).is_err());
    assert!(adv_train(model(), &data, &data, 1.5, &attack, &train).is_err());
}

#[test]
fn beta_zero_matches_natural_training_bitwise() {
    let real = two_blob_dataset(30, 24);
    let proxy = two_blob_dataset(30, 25);
    let train = TrainConfig {
        epochs: 4,
        ..TrainConfig::default()
    };
    let scfg = SmoothingConfig {
        beta: 0.0,
        ..SmoothingConfig::default()
    };
    let natural_attack = AttackConfig {
        epsilon: 0.0,
        ..AttackConfig::default()
    };
    let (smooth_model, trace) = smooth_train(
        Mlp::new(&[2, 8, 2], Activation::Relu, 26).unwrap(),
        &real,
        &proxy,
        0.4,
        &scfg,
        &train,
    )
    .unwrap();
    let (natural_model, _) = adv_train(
        Mlp::new(&[2, 8, 2], Activation::Relu, 26).unwrap(),
        &real,
        &proxy,
        0.4,
        &natural_attack,
        &train,
    )
    .unwrap();
    for i in 0..smooth_model.param_count() {
        assert_eq!(smooth_model.get_param(i), natural_model.get_param(i));
    }
    assert!(trace.kl.iter().all(|&k| k == 0.0));
}

#[test]
fn vanishing_sigma_gives_vanishing_kl() {
    let real = two_blob_dataset(30, 27);
    let proxy = two_blob_dataset(30, 28);
    let scfg = SmoothingConfig {
        sigma: 1e-8,
        beta: 6.0,
        ..SmoothingConfig::default()
    };
    let train = TrainConfig {
        epochs: 5,
        ..TrainConfig::default()
    };
    let (_, trace) = smooth_train(
        Mlp::new(&[2, 8, 2], Activation::Relu, 29).unwrap(),
        &real,
        &proxy,
        0.5,
        &scfg,
        &train,
    )
    .unwrap();
    assert!(trace.kl.iter().all(|&k| k < 1e-6), "kl trace {:?}", trace.kl);
}

#[test]
fn constant_classifier_certifies_its_class() {
    let mut m = Mlp::new(&[2, 2], Activation::Relu, 30).unwrap();
    for i in 0..m.param_count() {
        m.set_param(i, 0.0);
    }
    // Bias pushes class 1 always.
    m.set_param(m.param_count() - 1, 5.0);
    let scfg = SmoothingConfig {
        n_estimation: 1000,
        ..SmoothingConfig::default()
    };
    let cert = certify(&m, &[0.0, 0.0], &scfg, &mut Rng::new(31));
    match cert {
        Certification::Certified { class, radius, p_lower, .. } => {
            assert_eq!(class, 1);
            assert!(radius.is_finite() && radius > 0.0);
            assert!(p_lower < 1.0);
        }
        Certification::Abstain { .. } => panic!("constant classifier must certify"),
    }
}

#[test]
fn smoothing_certificate_sound_and_tight_on_halfspace() {
    // For h(x) = 1{x₁ > 0}, the smoothed vote probability at margin m is
    // Φ(m/σ) exactly, so the certified radius can never exceed m and should
    // approach it at large vote counts.
    let h = LinearClassifier::new(vec![1.0, 0.0, 0.0, 0.0], 0.0).unwrap();
    let scfg = SmoothingConfig {
        sigma: 0.25,
        n_selection: 100,
        n_estimation: 100_000,
        alpha: 0.001,
        beta: 0.0,
    };
    let margin = 0.5;
    let mut radii = Vec::new();
    for trial in 0..20 {
        let mut rng = Rng::new(500 + trial);
        let x = vec![margin, rng.normal(), rng.normal(), rng.normal()];
        let cert = certify(&h, &x, &scfg, &mut rng);
        if let Certification::Certified { class, radius, .. } = cert {
            assert_eq!(class, 1);
            assert!(radius <= margin + 1e-12, "radius {radius} exceeds margin");
            radii.push(radius);
        }
    }
    assert!(!radii.is_empty());
    let mean: f64 = radii.iter().sum::<f64>() / radii.len() as f64;
    assert!(mean >= 0.8 * margin, "mean certified radius {mean}");
    // Sanity: the analytic vote probability is comfortably above 1/2.
    assert!(norm_cdf(margin / scfg.sigma) > 0.97);
}

#[test]
fn boundary_point_abstains() {
    let h = LinearClassifier::new(vec![1.0, 0.0], 0.0).unwrap();
    let scfg = SmoothingConfig {
        n_estimation: 1000,
        ..SmoothingConfig::default()
    };
    let mut abstains = 0;
    for trial in 0..50 {
        let cert = certify(&h, &[0.0, 1.0], &scfg, &mut Rng::new(600 + trial));
        if cert.is_abstain() {
            abstains += 1;
        }
    }
    assert!(abstains >= 40, "only {abstains}/50 abstentions at the boundary");
}

#[test]
fn certification_is_deterministic() {
    let h = LinearClassifier::new(vec![1.0, -0.5], 0.2).unwrap();
    let scfg = SmoothingConfig {
        n_estimation: 500,
        ..SmoothingConfig::default()
    };
    let a = certify(&h, &[0.4, 0.1], &scfg, &mut Rng::new(32));
    let b = certify(&h, &[0.4, 0.1], &scfg, &mut Rng::new(32));
    match (a, b) {
        (
            Certification::Certified { radius: ra, votes: va, .. },
            Certification::Certified { radius: rb, votes: vb, .. },
        ) => {
            assert_eq!(ra, rb);
            assert_eq!(va, vb);
        }
        (Certification::Abstain { votes: va, .. }, Certification::Abstain { votes: vb, .. }) => {
            assert_eq!(va, vb)
        }
        _ => panic!("outcomes differ across identical seeds"),
    }
}
