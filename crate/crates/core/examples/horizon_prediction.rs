// Multi-step prediction from the end of a series. For a random-walk trend
// the prediction variance grows by tau^2 per step.
//
// cargo run --example horizon_prediction

use horizon_ssm::models::{compose, HyperParams, ModelSpec};
use horizon_ssm::ssm::{observed, predict_horizon, run_filter, simulate};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> horizon_ssm::Result<()> {
    let tau_sq = 0.5;
    let spec = ModelSpec::trend(1).with_theta(HyperParams {
        tau1_sq: tau_sq,
        sigma_sq: 2.0,
        ..HyperParams::default()
    });
    let model = compose(&spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, y) = simulate(&model, &[10.0], 50, &mut rng)?;
    let run = run_filter(&model, &observed(&y))?;
    let last = run.filtered.last().expect("nonempty series");

    let pred = predict_horizon(&model, last, 8)?;
    println!("lead      mean  variance  increment");
    let mut prev = last.obs_state_var(&model) + model.r();
    for (j, (m, d)) in pred.obs_mean.iter().zip(&pred.obs_var).enumerate() {
        println!("{:>4} {:>9.3} {:>9.4} {:>10.4}", j + 1, m, d, d - prev);
        prev = *d;
    }
    println!("tau^2 = {tau_sq}");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}
