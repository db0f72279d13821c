// Fit a second-order trend with the one-step likelihood and with the
// 5-step criterion, then compare j-step prediction error variances.
//
// cargo run --example fit_trend

use horizon_ssm::criteria::{horizon_error_variances, CriterionConfig, Variant};
use horizon_ssm::models::{compose, HyperParams, ModelSpec};
use horizon_ssm::optimizer::{fit, FitOptions};
use horizon_ssm::ssm::{observed, simulate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> horizon_ssm::Result<()> {
    let truth = ModelSpec::trend(2).with_theta(HyperParams {
        tau1_sq: 0.01,
        sigma_sq: 1.0,
        ..HyperParams::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (_, y) = simulate(&compose(&truth)?, &[0.0, 0.0], 400, &mut rng)?;
    let y = observed(&y);

    let spec = ModelSpec::trend(2);
    let burn_in = spec.state_dim();
    let mut rows = Vec::new();
    for (p, variant) in [
        (1, Variant::Standard),
        (5, Variant::ConcentratedP),
        (5, Variant::Literal),
    ] {
        let cfg = CriterionConfig::new(p, variant, burn_in);
        let f = fit(&spec, &y, &cfg, &FitOptions::default())?;
        let model = compose(&spec.clone().with_theta(f.theta_hat.clone()))?;
        let s = horizon_error_variances(&model, &y, 10, burn_in)?;
        println!(
            "p={p} {variant:<12} tau^2/sigma^2 = {:.5}  sigma^2 = {:.4}  ({} iterations)",
            f.ratios.tau1_sq, f.theta_hat.sigma_sq, f.iterations
        );
        rows.push((format!("p={p} {variant}"), s));
    }
    println!(
        "\n   j {}",
        rows.iter()
            .map(|(n, _)| format!("{n:>18}"))
            .collect::<String>()
    );
    for j in 0..10 {
        println!(
            "{:>4} {}",
            j + 1,
            rows.iter()
                .map(|(_, s)| format!("{:>18.4}", s[j]))
                .collect::<String>()
        );
    }
    println!("true ratio 0.01");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}
