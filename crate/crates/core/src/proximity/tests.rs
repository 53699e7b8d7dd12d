use super::*;
use crate::classifiers::Activation;
use crate::distributions::{isotropic_gaussians, sample, ClassConditional, LabeledDistribution};
use crate::transport::cwd_gaussian;

fn quick_cfg() -> ProximityConfig {
    ProximityConfig {
        hidden: vec![32],
        train: TrainConfig {
            epochs: 30,
            ..TrainConfig::default()
        },
        ..ProximityConfig::default()
    }
}

fn gaussian_blob(center: Vec<f64>, sigma: f64) -> LabeledDistribution {
    isotropic_gaussians(vec![center], sigma, Norm::L2).unwrap()
}

fn sphere_dist(radius: f64, dim: usize) -> LabeledDistribution {
    LabeledDistribution::uniform_weights(
        vec![(
            0,
            ClassConditional::UniformSphere {
                center: vec![0.0; dim],
                radius,
            },
        )],
        Norm::L2,
    )
    .unwrap()
}

#[test]
fn indistinguishable_classes_stay_near_chance() {
    let d = gaussian_blob(vec![0.0, 0.0], 1.0);
    let real = sample(&d, 1000, &Rng::new(1));
    let proxy = sample(&d, 1000, &Rng::new(2));
    let cfg = quick_cfg();
    for &eps in &[0.0, 0.3] {
        let disc = train_robust_discriminator(&real, &proxy, eps, &cfg, &Rng::new(3)).unwrap();
        let value = racc(
            &disc.model,
            &disc.holdout_real,
            &disc.holdout_proxy,
            eps,
            &cfg.attack,
        );
        assert!(
            value <= 0.55,
            "same-distribution pair separated with racc {value} at eps {eps}"
        );
    }
}

#[test]
fn separated_blobs_are_fully_distinguishable() {
    let real = sample(&gaussian_blob(vec![0.0, 0.0], 0.4), 600, &Rng::new(4));
    let proxy = sample(&gaussian_blob(vec![5.0, 0.0], 0.4), 600, &Rng::new(5));
    let cfg = quick_cfg();
    let disc = train_robust_discriminator(&real, &proxy, 0.0, &cfg, &Rng::new(6)).unwrap();
    let value = racc(&disc.model, &disc.holdout_real, &disc.holdout_proxy, 0.0, &cfg.attack);
    assert!(value >= 0.99, "separable blobs scored only {value}");
}

#[test]
fn sphere_pair_racc_follows_the_gap_threshold() {
    // Concentric spheres r = 1, r̃ = 3: the optimal discriminator stays
    // perfect below half the gap and collapses to chance above it.
    let real = sample(&sphere_dist(1.0, 4), 800, &Rng::new(7));
    let proxy = sample(&sphere_dist(3.0, 4), 800, &Rng::new(8));
    let cfg = quick_cfg();
    // ε = 0.5·(r̃−r)/2 = 0.5: comfortably below the gap threshold 1.0.
    let below = train_robust_discriminator(&real, &proxy, 0.5, &cfg, &Rng::new(9)).unwrap();
    let racc_below = racc(&below.model, &below.holdout_real, &below.holdout_proxy, 0.5, &cfg.attack);
    assert!(racc_below >= 0.95, "racc below threshold only {racc_below}");
    // ε = 1.5 ≥ 0.75·(r̃−r): past the threshold, near chance.
    let above = train_robust_discriminator(&real, &proxy, 1.5, &cfg, &Rng::new(10)).unwrap();
    let racc_above = racc(&above.model, &above.holdout_real, &above.holdout_proxy, 1.5, &cfg.attack);
    assert!(racc_above <= 0.6, "racc above threshold {racc_above}");
}

#[test]
fn unbalanced_sides_are_rejected() {
    let d = gaussian_blob(vec![0.0], 1.0);
    let real = sample(&d, 50, &Rng::new(11));
    let proxy = sample(&d, 40, &Rng::new(12));
    assert!(train_robust_discriminator(&real, &proxy, 0.1, &quick_cfg(), &Rng::new(13)).is_err());
}

#[test]
fn racc_with_constant_discriminator_is_exactly_chance() {
    // Zero-weight model predicts one class everywhere: one side fully
    // right, the other fully wrong.
    let mut m = Mlp::new(&[2, 2], Activation::Relu, 0).unwrap();
    for i in 0..m.param_count() {
        m.set_param(i, 0.0);
    }
    let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, 0.0]).collect();
    let value = racc(&m, &pts, &pts, 0.2, &AttackConfig::default());
    assert_eq!(value, 0.5);
}

#[test]
fn racc_at_zero_budget_is_plain_balanced_accuracy() {
    let real = sample(&gaussian_blob(vec![2.0, 0.0], 0.8), 200, &Rng::new(14));
    let proxy = sample(&gaussian_blob(vec![-2.0, 0.0], 0.8), 200, &Rng::new(15));
    let cfg = quick_cfg();
    let disc = train_robust_discriminator(&real, &proxy, 0.0, &cfg, &Rng::new(16)).unwrap();
    let value = racc(&disc.model, &disc.holdout_real, &disc.holdout_proxy, 0.0, &cfg.attack);
    let manual = 0.5
        * (disc
            .holdout_real
            .iter()
            .filter(|x| disc.model.predict(x) == REAL_CLASS)
            .count() as f64
            / disc.holdout_real.len() as f64)
        + 0.5
            * (disc
                .holdout_proxy
                .iter()
                .filter(|x| disc.model.predict(x) == PROXY_CLASS)
                .count() as f64
                / disc.holdout_proxy.len() as f64);
    assert_eq!(value, manual);
}

#[test]
fn arc_vanishes_for_identical_distributions() {
    let d = gaussian_blob(vec![0.0, 0.0], 1.0);
    let real = sample(&d, 600, &Rng::new(17));
    let proxy = sample(&d, 600, &Rng::new(18));
    let grid = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0];
    let report = arc(&real, &proxy, Some(&grid), &quick_cfg(), &Rng::new(19)).unwrap();
    assert!(
        report.arc <= 0.02 * 2.0,
        "chance curve integrated to {}",
        report.arc
    );
    assert!((report.arc - report.recomputed_arc()).abs() < 1e-12);
}

#[test]
fn arc_orders_proxies_by_mean_shift() {
    let real_dist = gaussian_blob(vec![0.0, 0.0, 0.0], 1.0);
    let real = sample(&real_dist, 700, &Rng::new(20));
    let grid = [0.0, 0.3, 0.6, 1.0, 1.5, 2.2, 3.0];
    let mut arcs = Vec::new();
    let mut cwds = Vec::new();
    for (i, shift) in [0.8, 2.0, 4.0].iter().enumerate() {
        let proxy_dist = gaussian_blob(vec![*shift, 0.0, 0.0], 1.0);
        let proxy = sample(&proxy_dist, 700, &Rng::new(30 + i as u64));
        let report = arc(&real, &proxy, Some(&grid), &quick_cfg(), &Rng::new(40 + i as u64)).unwrap();
        arcs.push(report.arc);
        cwds.push(cwd_gaussian(&real_dist, &proxy_dist).unwrap().total);
        // The 4·ARC ≤ cwd direction, with statistical slack.
        assert!(
            4.0 * report.arc <= cwds[i] + 4.0 * 3.0 * report.arc_se + 0.1,
            "4·arc {} vs cwd {}",
            4.0 * report.arc,
            cwds[i]
        );
    }
    assert!(arcs[0] < arcs[1] && arcs[1] < arcs[2], "arcs {arcs:?}");
    // Perfect ranking agreement with the exact transport ordering.
    let rd = ranking_difference(
        &arcs,
        &cwds.iter().map(|c| -c).collect::<Vec<_>>(),
        MetricDirection::LowerBetter,
    )
    .unwrap();
    assert_eq!(rd, 0.0);
}

#[test]
fn score_is_raw_probability_at_zero_budget() {
    let real = sample(&gaussian_blob(vec![1.5, 0.0], 0.7), 300, &Rng::new(50));
    let proxy = sample(&gaussian_blob(vec![-1.5, 0.0], 0.7), 300, &Rng::new(51));
    let cfg = quick_cfg();
    let disc = train_robust_discriminator(&real, &proxy, 0.0, &cfg, &Rng::new(52)).unwrap();
    let x = vec![0.3, -0.2];
    let score = synthetic_score(&disc.model, &x, 0.0, &cfg.attack, &mut Rng::new(53));
    assert_eq!(score, disc.synthetic_probability(&x));
}

#[test]
fn constant_discriminator_scores_constant() {
    let mut m = Mlp::new(&[2, 2], Activation::Relu, 0).unwrap();
    for i in 0..m.param_count() {
        m.set_param(i, 0.0);
    }
    let cfg = AttackConfig::default();
    for &eps in &[0.0, 0.5, 2.0] {
        let s = synthetic_score(&m, &[0.7, -0.4], eps, &cfg, &mut Rng::new(54));
        assert!((s - 0.5).abs() < 1e-12);
    }
}

#[test]
fn score_sweep_is_monotone_non_increasing() {
    let real = sample(&gaussian_blob(vec![1.0, 0.0], 0.6), 300, &Rng::new(55));
    let proxy = sample(&gaussian_blob(vec![-1.0, 0.0], 0.6), 300, &Rng::new(56));
    let cfg = quick_cfg();
    let disc = train_robust_discriminator(&real, &proxy, 0.2, &cfg, &Rng::new(57)).unwrap();
    let eps: Vec<f64> = (1..=8).map(|k| 0.1 * k as f64).collect();
    let mut rng = Rng::new(58);
    for i in 0..10 {
        let x = &proxy.points[i];
        let scores = synthetic_score_sweep(&disc.model, x, &eps, &cfg.attack, &mut rng);
        for w in scores.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "scores not monotone: {scores:?}");
        }
        assert!(scores.iter().all(|s| (0.0..=1.0).contains(s)));
    }
}

#[test]
fn selection_identity_and_tie_break() {
    let scored = ScoredSamples {
        points: vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
        labels: vec![0, 0, 0, 0],
        scores: vec![0.5, 0.5, 0.5, 0.5],
        epsilon: 0.1,
    };
    let all = select_by_score(&scored, 4).unwrap();
    assert_eq!(all.points, scored.points);
    // All-equal scores: first k by original index.
    let two = select_by_score(&scored, 2).unwrap();
    assert_eq!(two.points, vec![vec![0.0], vec![1.0]]);
    assert!(select_by_score(&scored, 0).is_err());
    assert!(select_by_score(&scored, 5).is_err());
}

#[test]
fn groups_are_equal_sized_and_score_ordered() {
    let scored = ScoredSamples {
        points: (0..25).map(|i| vec![i as f64]).collect(),
        labels: vec![0; 25],
        scores: (0..25).map(|i| (24 - i) as f64 / 25.0).collect(),
        epsilon: 0.1,
    };
    let groups = score_groups(&scored, 10).unwrap();
    assert_eq!(groups.len(), 10);
    assert!(groups.iter().all(|g| g.len() == 2));
    // Scores descend with index here, so the lowest-score group holds the
    // highest-index points.
    assert_eq!(groups[0].points, vec![vec![24.0], vec![23.0]]);
    assert!(score_groups(&scored, 26).is_err());
}

#[test]
fn planted_mixture_is_recovered_by_score() {
    // Pool: 70% near (small shift) + 30% far (large shift). The lowest
    // scored half must be dominated by near samples.
    let real_dist = gaussian_blob(vec![0.0, 0.0], 1.0);
    let near_dist = gaussian_blob(vec![0.25, 0.0], 1.0);
    let far_dist = gaussian_blob(vec![5.0, 0.0], 1.0);
    let real = sample(&real_dist, 700, &Rng::new(60));
    let near = sample(&near_dist, 490, &Rng::new(61));
    let far = sample(&far_dist, 210, &Rng::new(62));
    // Track provenance through labels: near = 0, far = 1.
    let mut pool_points = near.points.clone();
    pool_points.extend(far.points.clone());
    let mut pool_tags = vec![0usize; near.len()];
    pool_tags.extend(vec![1usize; far.len()]);
    let pool = Dataset::new(pool_points, pool_tags, "planted pool".into()).unwrap();

    let cfg = quick_cfg();
    let disc = train_robust_discriminator(
        &real,
        &Dataset::new(pool.points.clone(), vec![0; pool.len()], "pool".into()).unwrap(),
        0.25,
        &cfg,
        &Rng::new(63),
    )
    .unwrap();
    let scored = score_samples(&disc.model, &pool, 0.25, &cfg.attack);
    let half = select_by_score(&scored, pool.len() / 2).unwrap();
    let near_fraction =
        half.labels.iter().filter(|&&t| t == 0).count() as f64 / half.len() as f64;
    assert!(
        near_fraction >= 0.6,
        "lowest-score half holds only {near_fraction} near samples"
    );
}

#[test]
fn one_nn_examples() {
    let real = Dataset::new(
        (0..10).map(|i| vec![i as f64]).collect(),
        vec![0; 10],
        "grid".into(),
    )
    .unwrap();
    // Subset: zero distance.
    let subset = real.subset(&[2, 5, 7]);
    assert_eq!(one_nn_distance(&subset, &real), 0.0);
    // Unit offset on a unit grid: nearest real point is at distance ≤ 1.
    let offset = Dataset::new(
        (0..10).map(|i| vec![i as f64 + 1.0]).collect(),
        vec![0; 10],
        "offset".into(),
    )
    .unwrap();
    assert!(one_nn_distance(&offset, &real) <= 1.0 + 1e-12);
}

#[test]
fn one_nn_matches_exhaustive_double_loop() {
    let mut rng = Rng::new(64);
    let proxy = Dataset::new(
        (0..15).map(|_| vec![rng.normal(), rng.normal()]).collect(),
        vec![0; 15],
        "p".into(),
    )
    .unwrap();
    let real = Dataset::new(
        (0..20).map(|_| vec![rng.normal(), rng.normal()]).collect(),
        vec![0; 20],
        "r".into(),
    )
    .unwrap();
    let mut acc = 0.0;
    for p in &proxy.points {
        let mut best = f64::INFINITY;
        for r in &real.points {
            let d = Norm::L2.dist(p, r);
            if d < best {
                best = d;
            }
        }
        acc += best;
    }
    assert!((one_nn_distance(&proxy, &real) - acc / 15.0).abs() < 1e-12);
}

#[test]
fn frechet_identity_mean_shift_and_formula_equality() {
    let a = sample(&gaussian_blob(vec![0.0, 0.0], 1.0), 400, &Rng::new(65));
    assert!(gaussian_frechet(&a, &a).unwrap() < 1e-3);

    let b = sample(&gaussian_blob(vec![3.0, 0.0], 1.0), 400, &Rng::new(66));
    let fd = gaussian_frechet(&a, &b).unwrap();
    assert!((fd - 3.0).abs() < 0.3, "mean-shift Fréchet {fd}");

    // Bypassing the fit: identical formula as the transport closed form.
    let da = gaussian_blob(vec![0.0, 0.0], 1.0);
    let db = gaussian_blob(vec![3.0, 0.0], 1.0);
    let exact = cwd_gaussian(&da, &db).unwrap().total;
    let direct = gaussian_w2(
        &[0.0, 0.0],
        &Mat::identity(2),
        &[3.0, 0.0],
        &Mat::identity(2),
    )
    .unwrap();
    assert!((exact - direct).abs() < 1e-12);

    // Too few samples for the fit.
    let tiny = Dataset::new(vec![vec![0.0, 0.0]; 3], vec![0; 3], "tiny".into()).unwrap();
    assert!(gaussian_frechet(&tiny, &a).is_err());
}

#[test]
fn ranking_difference_basics() {
    let truth = [9.0, 7.0, 5.0, 3.0];
    assert_eq!(
        ranking_difference(&[1.0, 2.0, 3.0, 4.0], &truth, MetricDirection::LowerBetter).unwrap(),
        0.0
    );
    // Fully reversed ranking of 4 items: (3+1+1+3)/4 = 2.
    assert_eq!(
        ranking_difference(&[4.0, 3.0, 2.0, 1.0], &truth, MetricDirection::LowerBetter).unwrap(),
        2.0
    );
    assert!(ranking_difference(&[1.0], &[1.0], MetricDirection::LowerBetter).is_err());
}

#[test]
fn published_rank_table_reproduces_as_golden_fixture() {
    // Seven generative models ranked by transferred robust accuracy, with
    // the published metric columns; regression values, not re-measured.
    let robust_acc = [53.1, 45.0, 43.5, 39.6, 33.7, 33.4, 32.4];
    let arc_col = [0.06, 0.32, 1.09, 1.19, 1.30, 1.43, 1.55];
    let fid_col = [3.17, 2.92, 12.96, 11.26, 4.30, 12.61, 4.61];
    let is_col = [9.46, 10.24, 8.34, 8.51, 9.17, 8.47, 9.16];
    let one_nn_col = [9.34, 9.42, 10.10, 8.96, 9.84, 9.72, 9.73];

    let arc_diff =
        ranking_difference(&arc_col, &robust_acc, MetricDirection::LowerBetter).unwrap();
    assert_eq!(arc_diff, 0.0);
    let fid_diff =
        ranking_difference(&fid_col, &robust_acc, MetricDirection::LowerBetter).unwrap();
    assert!((fid_diff - 12.0 / 7.0).abs() < 1e-12);
    assert_eq!(format!("{fid_diff:.1}"), "1.7");
    let is_diff =
        ranking_difference(&is_col, &robust_acc, MetricDirection::HigherBetter).unwrap();
    assert!((is_diff - 12.0 / 7.0).abs() < 1e-12);
    let nn_diff =
        ranking_difference(&one_nn_col, &robust_acc, MetricDirection::LowerBetter).unwrap();
    assert_eq!(nn_diff, 2.0);
}

#[test]
fn crossing_epsilon_interpolates() {
    let curve = RaccCurve {
        points: vec![
            RaccPoint { epsilon: 0.0, racc: 1.0, se: 0.0, discriminator_seed: 0 },
            RaccPoint { epsilon: 1.0, racc: 0.9, se: 0.0, discriminator_seed: 0 },
            RaccPoint { epsilon: 2.0, racc: 0.5, se: 0.0, discriminator_seed: 0 },
        ],
        n_train_per_side: 0,
        n_eval_per_side: 0,
    };
    // 0.75 is crossed between ε = 1 and ε = 2 at 1.375.
    assert!((curve.crossing_epsilon(0.75) - 1.375).abs() < 1e-12);
    // Never dropping below 0.2: falls back to the last ε.
    assert_eq!(curve.crossing_epsilon(0.2), 2.0);
}
