// Kalman filter, exact likelihood and smoother on a simulated
// trend-plus-seasonal series.
//
// cargo run --example filter_and_likelihood

use horizon_ssm::criteria::loglik_concentrated;
use horizon_ssm::models::{compose, HyperParams, ModelSpec};
use horizon_ssm::ssm::{observed, run_filter, run_smoother, simulate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> horizon_ssm::Result<()> {
    let spec = ModelSpec::trend(2)
        .with_seasonal(4)
        .with_theta(HyperParams {
            tau1_sq: 0.02,
            tau2_sq: 0.1,
            sigma_sq: 1.0,
            ..HyperParams::default()
        });
    let model = compose(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (_, y) = simulate(&model, &vec![0.0; model.state_dim()], 80, &mut rng)?;
    let y = observed(&y);

    let run = run_filter(&model, &y)?;
    println!(
        "state dimension {}, {} observations",
        model.state_dim(),
        run.n_observed()
    );
    println!("exact log-likelihood      {:.4}", run.log_likelihood());

    // the same model with every variance doubled has the same profile likelihood
    let k = spec.state_dim();
    let a = loglik_concentrated(&model, &y, k)?;
    let b = loglik_concentrated(&model.scaled(2.0)?, &y, k)?;
    println!(
        "concentrated likelihood   {:.4} (sigma^2 = {:.4})",
        a.value, a.sigma_sq_hat
    );
    println!(
        "after scaling by 2        {:.4} (sigma^2 = {:.4})",
        b.value, b.sigma_sq_hat
    );

    let smooth = run_smoother(&model, &run)?;
    println!("\n   n        y   filtered   smoothed");
    for n in (0..80).step_by(10) {
        println!(
            "{:>4} {:>8.3} {:>10.3} {:>10.3}",
            n + 1,
            y[n].unwrap(),
            run.filtered[n].obs_mean(&model),
            smooth.states[n].obs_mean(&model)
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
