// Sweep the criterion horizon p and tabulate sigma_j^2 for every fit.
//
// cargo run --release --example horizon_sweep

use horizon_ssm::criteria::Variant;
use horizon_ssm::models::{compose, HyperParams, ModelSpec};
use horizon_ssm::ssm::{observed, simulate};
use horizon_ssm::sweep::{diagonal_min_check, run_sweep, SweepOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn run() -> horizon_ssm::Result<()> {
    // data from a seasonal model, fitted with a trend-only model
    let truth = ModelSpec::trend(2)
        .with_seasonal(6)
        .with_theta(HyperParams {
            tau1_sq: 0.005,
            tau2_sq: 0.05,
            sigma_sq: 1.0,
            ..HyperParams::default()
        });
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (_, y) = simulate(
        &compose(&truth)?,
        &vec![0.0; truth.state_dim()],
        240,
        &mut rng,
    )?;
    let y = observed(&y);

    let mut opts = SweepOptions::new(vec![1, 2, 3, 4, 6, 8], 8);
    opts.variant = Variant::ConcentratedP;
    let table = run_sweep(&ModelSpec::trend(2), &y, &opts)?;

    print!("   j");
    for p in table.p_values() {
        print!("{:>9}", format!("p={p}"));
    }
    println!();
    for j in 1..=table.j_max {
        print!("{j:>4}");
        for p in table.p_values() {
            print!("{:>9.3}", table.cell(j, p).unwrap_or(f64::NAN));
        }
        println!();
    }
    print!("mean");
    for m in table.col_means() {
        print!("{:>9.3}", m.unwrap_or(f64::NAN));
    }
    println!();

    let report = diagonal_min_check(&table, 1);
    for row in &report.rows {
        println!("j={:<2} minimum at p={:?}", row.j, row.argmin);
    }
    println!(
        "rows with minimum within 1 of p=j: {:.0}%",
        100.0 * report.fraction_within
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}
