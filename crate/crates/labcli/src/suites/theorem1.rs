//! Bound validation on Gaussian classes: an adversarially trained model's
//! robustness gap to each perturbed proxy, against the closed-form
//! conditional W2 upper bound.

use super::empty_dataset;
use crate::config::ExperimentConfig;
use crate::record::{ResultRecord, SeedOutput};
use portlab::classifiers::{Activation, Mlp};
use portlab::classifiers::TrainConfig;
use portlab::distributions::{perturb_gaussians, sample};
use portlab::numerics::Rng;
use portlab::robustness::{adv_train, avg_robustness, AttackConfig};
use portlab::transport::cwd_gaussian;
use portlab::Result;

pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<SeedOutput> {
    let p = &cfg.theorem1;
    let root = Rng::new(seed);

    let base = super::random_gaussian_classes(
        p.classes,
        p.dim,
        p.mean_scale,
        p.sigma,
        &mut root.child(0),
    );
    let train_set = sample(&base, p.n_train_per_class, &root.child(1));

    let dims: Vec<usize> = std::iter::once(p.dim)
        .chain(cfg.model.hidden.iter().copied())
        .chain(std::iter::once(p.classes))
        .collect();
    let model = Mlp::new(&dims, Activation::Relu, root.child(2).seed())?;
    let train_cfg = TrainConfig {
        seed: root.child(3).seed(),
        ..cfg.train.clone()
    };
    let (model, _) = adv_train(model, &train_set, &empty_dataset(), 1.0, &cfg.attack, &train_cfg)?;

    let real_eval = sample(&base, p.n_eval_per_class, &root.child(4));
    let rob_real = avg_robustness(
        &model,
        &real_eval,
        p.eps_max,
        &AttackConfig {
            seed: root.child(5).seed(),
            ..cfg.attack.clone()
        },
    );

    let mut output = SeedOutput::default();
    let mut curve_rows = Vec::new();
    let mut perturb_rng = root.child(6);
    for k in 1..=p.n_proxies {
        let fraction = k as f64 / p.n_proxies as f64;
        let mean_shift = fraction * p.max_mean_shift;
        let cov_shift = fraction * p.max_cov_shift;
        let proxy = perturb_gaussians(&base, mean_shift, cov_shift, &mut perturb_rng)?;
        let proxy_eval = sample(&proxy, p.n_eval_per_class, &root.child(200 + k as u64));
        let rob_proxy = avg_robustness(
            &model,
            &proxy_eval,
            p.eps_max,
            &AttackConfig {
                seed: root.child(300 + k as u64).seed(),
                ..cfg.attack.clone()
            },
        );
        let delta = (rob_real.mean_distance - rob_proxy.mean_distance).abs();
        let bound = cwd_gaussian(&base, &proxy)?.total;
        let slack = 3.0 * (rob_real.standard_error() + rob_proxy.standard_error());

        let mut record = ResultRecord::new("theorem1", seed);
        record
            .scalar("proxy_index", k as f64)
            .scalar("mean_shift_scale", mean_shift)
            .scalar("cov_shift_scale", cov_shift)
            .scalar("rob_real", rob_real.mean_distance)
            .scalar("rob_proxy", rob_proxy.mean_distance)
            .scalar("delta_rob", delta)
            .scalar("cwd_w2", bound)
            .scalar("slack", slack)
            .scalar("censored_real", rob_real.censored_fraction)
            .scalar("censored_proxy", rob_proxy.censored_fraction);
        record.verdict("bound_holds", delta <= bound + slack);
        output.records.push(record);
        curve_rows.push(vec![k as f64, bound, delta, slack]);
    }
    output.push_curve(
        "bound_curve.csv",
        "proxy_index,cwd_w2,delta_rob,slack",
        &curve_rows,
    );
    Ok(output)
}
