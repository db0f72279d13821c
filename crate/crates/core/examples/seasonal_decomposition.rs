// Fit trend + seasonal to a synthetic monthly series and split it into
// smoothed components.
//
// cargo run --release --example seasonal_decomposition

use horizon_ssm::criteria::{CriterionConfig, Variant};
use horizon_ssm::models::{compose, Component, HyperParams, ModelSpec};
use horizon_ssm::optimizer::{fit, FitOptions};
use horizon_ssm::ssm::{observed, simulate};
use horizon_ssm::sweep::decompose;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> horizon_ssm::Result<()> {
    let truth = ModelSpec::new(2, 1, 12, 0).with_theta(HyperParams {
        tau1_sq: 0.001,
        tau2_sq: 0.01,
        sigma_sq: 0.5,
        ..HyperParams::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (_, y) = simulate(
        &compose(&truth)?,
        &vec![0.0; truth.state_dim()],
        144,
        &mut rng,
    )?;
    let mut y = observed(&y);
    y[50] = None;

    let spec = ModelSpec::new(2, 1, 12, 0);
    let cfg = CriterionConfig::new(1, Variant::Standard, spec.state_dim());
    let f = fit(&spec, &y, &cfg, &FitOptions::default())?;
    let t = &f.theta_hat;
    println!(
        "tau1^2 {:.2e}  tau2^2 {:.2e}  sigma^2 {:.3}",
        t.tau1_sq, t.tau2_sq, t.sigma_sq
    );
    println!("truth  1.00e-3  1.00e-2  sigma^2 0.500");

    let d = decompose(&spec, t, &y)?;
    let trend = d.component(Component::Trend).expect("trend is active");
    let seasonal = d
        .component(Component::Seasonal)
        .expect("seasonal is active");
    println!("\n   n        y    trend  +-2sd  seasonal    noise");
    for n in (0..144).step_by(24).chain(48..53) {
        let y = d.y[n].map_or("      NA".to_string(), |v| format!("{v:>8.3}"));
        let noise = d.noise[n].map_or("      NA".to_string(), |v| format!("{v:>8.3}"));
        println!(
            "{:>4} {y} {:>8.3} {:>6.3} {:>9.3} {noise}",
            n + 1,
            trend.mean[n],
            2.0 * trend.sd[n],
            seasonal.mean[n]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}
