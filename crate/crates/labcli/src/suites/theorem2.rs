//! The ARC/cwd relation: equality on concentric uniform spheres, and the
//! 4·ARC ≤ cwd direction on random Gaussian proxy pairs.

use crate::config::ExperimentConfig;
use crate::record::{ResultRecord, SeedOutput};
use portlab::distributions::{
    isotropic_gaussians, perturb_gaussians, sample, ClassConditional, LabeledDistribution,
};
use portlab::numerics::{Norm, Rng};
use portlab::proximity::arc;
use portlab::transport::{cwd_gaussian, cwd_sphere};
use portlab::{Error, Result};

fn sphere(radius: f64, dim: usize) -> LabeledDistribution {
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
    .expect("valid construction")
}

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let p = &cfg.theorem2;
    let root = Rng::new(seed);
    let mut output = SeedOutput::default();

    // Equality case: concentric uniform spheres.
    let real_dist = sphere(p.radius, p.dim);
    let proxy_dist = sphere(p.radius_proxy, p.dim);
    let real = sample(&real_dist, p.n_per_side, &root.child(0));
    let proxy = sample(&proxy_dist, p.n_per_side, &root.child(1));
    let report = arc(&real, &proxy, Some(&p.grid), &cfg.proximity, &root.child(2))?;
    let exact_cwd = cwd_sphere(&real_dist, &proxy_dist)?.total;

    let racc_at = |eps: f64| -> Result<f64> {
        report
            .curve
            .points
            .iter()
            .find(|pt| (pt.epsilon - eps).abs() < 1e-12)
            .map(|pt| pt.racc)
            .ok_or_else(|| Error::Argument(format!("grid must contain ε = {eps}")))
    };
    let racc_high = racc_at(p.racc_high_eps)?;
    let racc_low = racc_at(p.racc_low_eps)?;

    let mut record = ResultRecord::new("theorem2", seed);
    record
        .scalar("cwd_exact", exact_cwd)
        .scalar("arc", report.arc)
        .scalar("arc_se", report.arc_se)
        .scalar("four_arc", 4.0 * report.arc)
        .scalar("racc_high", racc_high)
        .scalar("racc_low", racc_low);
    record.verdict("arc_in_range", report.arc >= p.arc_min && report.arc <= p.arc_max);
    record.verdict(
        "equality_within_20pct",
        (4.0 * report.arc - exact_cwd).abs() <= 0.2 * exact_cwd,
    );
    record.verdict("racc_high_holds", racc_high >= p.racc_high_min);
    record.verdict("racc_low_holds", racc_low <= p.racc_low_max);
    output.records.push(record);
    output.push_curve(
        "racc_curve.csv",
        "epsilon,racc",
        &report
            .curve
            .points
            .iter()
            .map(|pt| vec![pt.epsilon, pt.racc])
            .collect::<Vec<_>>(),
    );

    // Inequality direction on random Gaussian proxy pairs.
    let mut pair_rng = root.child(3);
    for i in 0..p.inequality_pairs {
        let dim = 3;
        let base = super::random_gaussian_classes(1, dim, 1.0, 1.0, &mut pair_rng);
        let shifted = perturb_gaussians(
            &base,
            0.4 + 0.5 * pair_rng.uniform(),
            0.1 * pair_rng.uniform(),
            &mut pair_rng,
        )?;
        let real = sample(&base, 600, &root.child(100 + i as u64));
        let proxy = sample(&shifted, 600, &root.child(200 + i as u64));
        let mut prox_cfg = cfg.proximity.clone();
        prox_cfg.auto_grid_points = 8;
        let report = arc(&real, &proxy, None, &prox_cfg, &root.child(300 + i as u64))?;
        let bound = cwd_gaussian(&base, &shifted)?.total;
        let slack = 3.0 * 4.0 * report.arc_se;

        let mut record = ResultRecord::new("theorem2", seed);
        record
            .scalar("pair_index", i as f64)
            .scalar("four_arc", 4.0 * report.arc)
            .scalar("cwd_w2", bound)
            .scalar("slack", slack);
        record.verdict("inequality_holds", 4.0 * report.arc <= bound + slack);
        output.records.push(record);
    }

    // Gaussian pure mean shift: isotropic equal covariances make W1 = W2,
    // so cwd_gaussian doubles as the exact value there (recorded for the
    // curve consumers; the sphere case above carries the verdicts).
    let a = isotropic_gaussians(vec![vec![0.0, 0.0]], 1.0, Norm::L2)?;
    let b = isotropic_gaussians(vec![vec![3.0, 4.0]], 1.0, Norm::L2)?;
    let mut sanity = ResultRecord::new("theorem2", seed);
    sanity.scalar("mean_shift_w2", cwd_gaussian(&a, &b)?.total);
    sanity.verdict(
        "w2_closed_form_exact",
        (cwd_gaussian(&a, &b)?.total - 5.0).abs() < 1e-9,
    );
    output.records.push(sanity);

    Ok(output)
}
