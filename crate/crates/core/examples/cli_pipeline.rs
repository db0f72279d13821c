// The command-line workflow driven from code: write a CSV, then run
// `fit`, `predict` and `decompose` into a scratch directory.
//
// cargo run --example cli_pipeline
//
// The same commands from a shell:
//
// horizon-ssm fit --data series.csv --m1 2 --p 4 --variant concentrated --out-dir out

use clap::Parser;
use horizon_ssm::cli::{run as run_cli, Cli};
use horizon_ssm::io::read_tsv;

pub fn run() -> horizon_ssm::Result<()> {
    let dir = std::env::temp_dir().join(format!("horizon-ssm-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|source| horizon_ssm::Error::Io {
        path: dir.clone(),
        source,
    })?;
    let data = dir.join("series.csv");
    let mut text = String::from("level\n");
    for n in 0..120 {
        let t = n as f64;
        text.push_str(&format!(
            "{}\n",
            20.0 + 0.05 * t + 3.0 * (t / 9.0).sin() + 0.4 * (t * 1.7).cos()
        ));
    }
    std::fs::write(&data, text).map_err(|source| horizon_ssm::Error::Io {
        path: data.clone(),
        source,
    })?;

    let data_arg = data.to_string_lossy().into_owned();
    let out_arg = dir.to_string_lossy().into_owned();
    let base = [
        "horizon-ssm",
        "--data",
        &data_arg,
        "--m1",
        "2",
        "--variant",
        "concentrated",
        "--out-dir",
        &out_arg,
    ];
    for (cmd, extra) in [
        ("fit", vec!["--p", "4"]),
        ("predict", vec!["--horizon", "6"]),
        ("decompose", vec![]),
    ] {
        let mut args = vec![base[0], cmd];
        args.extend(&base[1..]);
        args.extend(extra);
        for path in run_cli(&Cli::parse_from(args))?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "tsv"))
        {
            let t = read_tsv(&path)?;
            println!(
                "{cmd}: {} ({} rows, columns {:?})",
                path.display(),
                t.rows.len(),
                t.header
            );
        }
    }
    print!(
        "{}",
        std::fs::read_to_string(dir.join("fit_report.txt")).unwrap_or_default()
    );
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run() {
        eprintln!("error[{}]: {e}", e.code());
        std::process::exit(1);
    }
}
