// Partial autocorrelations, AR coefficients and stationarity.
//
// cargo run --example ar_parcor

use horizon_ssm::models::{ar_to_pacs, build_ar, is_stationary, pacs_to_ar, spectral_radius};

pub fn run() -> horizon_ssm::Result<()> {
    for pacs in [vec![0.5], vec![0.9, -0.5], vec![0.95, -0.9, 0.3]] {
        let a = pacs_to_ar(&pacs)?;
        let back = ar_to_pacs(&a)?;
        println!(
            "pacs {:?} -> ar {:?} -> pacs {:?}, root radius {:.4}",
            pacs,
            a.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            back.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
            spectral_radius(&a)
        );
    }
    for a in [vec![1.5, -0.9], vec![2.0, -1.0], vec![0.5, 0.6]] {
        let verdict = match build_ar(&a, 1.0) {
            Ok(_) => "accepted".to_string(),
            Err(e) => format!("rejected [{}]", e.code()),
        };
        println!("ar {a:?}: stationary {}, {verdict}", is_stationary(&a));
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
