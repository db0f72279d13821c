//! Command-line front end: `fit`, `sweep`, `decompose` and `predict`.
//!
//! Every command reads one series, builds the model from flags and writes
//! TSV files into `--out-dir`. Hyperparameters for `decompose` and
//! `predict` come from `--tau-sq`/`--pacs`/`--sigma-sq` when given and are
//! fitted otherwise.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::criteria::{horizon_error_variances, CriterionConfig, Variant};
use crate::error::{Error, Result};
use crate::io::{fmt_float, fmt_opt, read_series, write_atomic, write_tsv, Tsv};
use crate::models::{compose, Component, HyperParams, ModelSpec};
use crate::optimizer::{fit, FitOptions, FitResult, NelderMeadOptions};
use crate::ssm::{predict_horizon, run_filter};
use crate::sweep::{decompose, run_sweep, SweepOptions, SweepTable};

#[derive(Debug, Parser)]
#[command(
    name = "horizon-ssm",
    version,
    about = "State-space models fitted for long-term prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit hyperparameters by maximizing the p-step criterion.
    Fit(RunConfig),
    /// Fit once per p and tabulate j-step prediction error variances.
    Sweep(RunConfig),
    /// Smoothed trend / seasonal / AR / noise decomposition.
    Decompose(RunConfig),
    /// Forecast beyond the end of the series.
    Predict(RunConfig),
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// CSV or TSV file with the series.
    #[arg(long)]
    pub data: PathBuf,
    /// 1-based column holding the values.
    #[arg(long, default_value_t = 1)]
    pub column: usize,
    #[arg(long, default_value = "NA")]
    pub missing_token: String,

    /// Trend order (0, 1 or 2).
    #[arg(long, default_value_t = 2)]
    pub m1: usize,
    /// Seasonal component on (1) or off (0).
    #[arg(long, default_value_t = 0)]
    pub m2: usize,
    #[arg(long, default_value_t = 12)]
    pub period: usize,
    /// AR order.
    #[arg(long, default_value_t = 0)]
    pub m3: usize,

    /// Criterion horizon.
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// literal, concentrated or standard.
    #[arg(long, default_value = "literal", value_parser = parse_variant)]
    pub variant: Variant,
    /// First forecast origin used by the criteria; defaults to the state dimension.
    #[arg(long)]
    pub burn_in: Option<usize>,

    #[arg(long, default_value_t = 20)]
    pub j_max: usize,
    /// Horizons for `sweep`, e.g. `1,2,5` or `1-20`; defaults to 1..=j-max.
    #[arg(long)]
    pub p_list: Option<String>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub f_tol: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub x_tol: f64,
    /// Number of optimizer starts; defaults to 5 with an AR component, else 1.
    #[arg(long)]
    pub multistart: Option<usize>,

    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Forecast length for `predict`.
    #[arg(long, default_value_t = 12)]
    pub horizon: usize,

    /// System noise variances of the active components, comma separated, in
    /// trend, seasonal, AR order.
    #[arg(long)]
    pub tau_sq: Option<String>,
    /// AR partial autocorrelations, comma separated.
    #[arg(long)]
    pub pacs: Option<String>,
    /// Observation noise variance.
    #[arg(long)]
    pub sigma_sq: Option<f64>,
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .map_err(|_| Error::InvalidSpec(format!("{flag}: cannot parse '{t}'")))
        })
        .collect()
}

/// Parses `1,2,5` and ranges like `1-20`.
pub fn parse_p_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: usize = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("--p-list: bad range '{part}'")))?;
                let b: usize = b
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidSpec(format!("--p-list: bad range '{part}'")))?;
                if a > b {
                    return Err(Error::InvalidSpec(format!(
                        "--p-list: empty range '{part}'"
                    )));
                }
                out.extend(a..=b);
            }
            None => out.push(
                part.parse()
                    .map_err(|_| Error::InvalidSpec(format!("--p-list: cannot parse '{part}'")))?,
            ),
        }
    }
    if out.is_empty() {
        return Err(Error::InvalidSpec("--p-list is empty".into()));
    }
    Ok(out)
}

impl RunConfig {
    pub fn spec(&self) -> ModelSpec {
        ModelSpec::new(self.m1, self.m2, self.period, self.m3)
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
            .unwrap_or_else(|| self.spec().state_dim())
            .max(1)
    }

    pub fn criterion(&self) -> CriterionConfig {
        CriterionConfig::new(self.p, self.variant, self.burn_in())
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            nelder_mead: NelderMeadOptions {
                f_tol: self.f_tol,
                x_tol: self.x_tol,
                max_iter: self.max_iter,
                ..NelderMeadOptions::default()
            },
            multistart: self.multistart,
            seed: self.seed,
            ..FitOptions::default()
        }
    }

    /// Hyperparameters given on the command line, if any.
    pub fn supplied_theta(&self) -> Result<Option<HyperParams>> {
        let Some(sigma_sq) = self.sigma_sq else {
            if self.tau_sq.is_some() || self.pacs.is_some() {
                return Err(Error::InvalidSpec("--tau-sq/--pacs need --sigma-sq".into()));
            }
            return Ok(None);
        };
        let spec = self.spec();
        let active = spec.active_components();
        let taus: Vec<f64> = match &self.tau_sq {
            Some(s) => parse_list("--tau-sq", s)?,
            None => Vec::new(),
        };
        if taus.len() != active.len() {
            return Err(Error::InvalidSpec(format!(
                "--tau-sq needs {} values for components {:?}",
                active.len(),
                active.iter().map(ToString::to_string).collect::<Vec<_>>()
            )));
        }
        let mut theta = HyperParams {
            tau1_sq: 0.0,
            tau2_sq: 0.0,
            tau3_sq: 0.0,
            ar_pacs: match &self.pacs {
                Some(s) => parse_list("--pacs", s)?,
                None => vec![0.0; self.m3],
            },
            sigma_sq,
        };
        for (c, t) in active.iter().zip(taus) {
            match c {
                Component::Trend => theta.tau1_sq = t,
                Component::Seasonal => theta.tau2_sq = t,
                Component::Ar => theta.tau3_sq = t,
            }
        }
        spec.clone().with_theta(theta.clone()).validate()?;
        Ok(Some(theta))
    }

    pub fn series(&self) -> Result<Vec<Option<f64>>> {
        Ok(read_series(&self.data, self.column, &self.missing_token)?.values)
    }
}

fn theta_rows(spec: &ModelSpec, theta: &HyperParams) -> Vec<(String, f64)> {
    let mut rows = Vec::new();
    for c in spec.active_components() {
        let (key, v) = match c {
            Component::Trend => ("tau1_sq", theta.tau1_sq),
            Component::Seasonal => ("tau2_sq", theta.tau2_sq),
            Component::Ar => ("tau3_sq", theta.tau3_sq),
        };
        rows.push((key.to_string(), v));
    }
    for (i, r) in theta.ar_pacs.iter().enumerate() {
        rows.push((format!("pac{}", i + 1), *r));
    }
    if let Ok(a) = theta.ar_coefficients() {
        for (i, c) in a.iter().enumerate() {
            rows.push((format!("ar{}", i + 1), *c));
        }
    }
    rows.push(("sigma_sq".into(), theta.sigma_sq));
    rows
}

/// Output of the `fit` command.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub spec: ModelSpec,
    pub cfg: CriterionConfig,
    pub n: usize,
    pub result: FitResult,
    /// One-step mean squared prediction error of the fitted model.
    pub sigma1_sq: f64,
}

impl FitReport {
    pub fn to_tsv(&self) -> Tsv {
        let mut t = Tsv::new(["key", "value"]);
        let mut kv = |k: &str, v: String| t.push(vec![k.to_string(), v]);
        kv("n", self.n.to_string());
        kv("m1", self.spec.m1.to_string());
        kv("m2", self.spec.m2.to_string());
        kv("period", self.spec.period.to_string());
        kv("m3", self.spec.m3.to_string());
        kv("p", self.cfg.p.to_string());
        kv("variant", self.cfg.variant.to_string());
        kv("burn_in", self.cfg.burn_in.to_string());
        for (k, v) in theta_rows(&self.spec, &self.result.theta_hat) {
            kv(&k, fmt_float(v));
        }
        kv("criterion", fmt_float(self.result.criterion.value));
        kv(
            "sigma_p_sq_hat",
            fmt_float(self.result.criterion.sigma_p_sq_hat),
        );
        kv("n_terms", self.result.criterion.n_terms.to_string());
        kv("sigma1_sq", fmt_float(self.sigma1_sq));
        kv("iterations", self.result.iterations.to_string());
        kv("evaluations", self.result.evaluations.to_string());
        kv("converged", self.result.converged.to_string());
        t
    }

    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "model: m1={} m2={} period={} m3={} (k={})\ncriterion: p={} variant={} burn_in={} over {} observations\n",
            s.m1,
            s.m2,
            s.period,
            s.m3,
            s.state_dim(),
            self.cfg.p,
            self.cfg.variant,
            self.cfg.burn_in,
            self.n
        );
        for (k, v) in theta_rows(&self.spec, &self.result.theta_hat) {
            out.push_str(&format!("  {k:<10} {v:.6e}\n"));
        }
        let r = &self.result;
        out.push_str(&format!(
            "log-likelihood {:.6} ({} terms), p-step error variance {:.6}\none-step error variance {:.6}\n{} after {} iterations, {} evaluations\n",
            r.criterion.value,
            r.criterion.n_terms,
            r.criterion.sigma_p_sq_hat,
            self.sigma1_sq,
            if r.converged { "converged" } else { "not converged" },
            r.iterations,
            r.evaluations
        ));
        out
    }
}

pub fn cmd_fit_report(cfg: &RunConfig) -> Result<FitReport> {
    let y = cfg.series()?;
    let spec = cfg.spec();
    let crit = cfg.criterion();
    let result = fit(&spec, &y, &crit, &cfg.fit_options())?;
    let model = compose(&spec.clone().with_theta(result.theta_hat.clone()))?;
    let sigma1_sq = horizon_error_variances(&model, &y, 1, crit.burn_in)?[0];
    Ok(FitReport {
        spec,
        cfg: crit,
        n: y.len(),
        result,
        sigma1_sq,
    })
}

pub fn cmd_fit(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let report = cmd_fit_report(cfg)?;
    let tsv = cfg.out_dir.join("fit_report.tsv");
    let txt = cfg.out_dir.join("fit_report.txt");
    write_tsv(&tsv, &report.to_tsv())?;
    write_atomic(&txt, &report.to_text())?;
    Ok(vec![tsv, txt])
}

pub fn sweep_matrix(table: &SweepTable) -> Tsv {
    let mut header = vec!["j".to_string()];
    header.extend(table.columns.iter().map(|c| format!("p{}", c.p)));
    let mut t = Tsv::new(header);
    for j in 1..=table.j_max {
        let mut row = vec![j.to_string()];
        row.extend(table.columns.iter().map(|c| fmt_opt(table.cell(j, c.p))));
        t.push(row);
    }
    let mut row = vec!["mean".to_string()];
    row.extend(table.col_means().into_iter().map(fmt_opt));
    t.push(row);
    t
}

pub fn sweep_long(table: &SweepTable) -> Tsv {
    let mut t = Tsv::new(["p", "j", "sigma_sq"]);
    for c in &table.columns {
        for j in 1..=table.j_max {
            t.push(vec![
                c.p.to_string(),
                j.to_string(),
                fmt_opt(table.cell(j, c.p)),
            ]);
        }
    }
    t
}

pub fn sweep_fits(table: &SweepTable, spec: &ModelSpec) -> Tsv {
    let n_params = theta_rows(spec, &spec.theta).len();
    let mut header = vec!["p".to_string()];
    header.extend(theta_rows(spec, &spec.theta).into_iter().map(|(k, _)| k));
    header.extend(["criterion", "converged", "error"].map(String::from));
    let mut t = Tsv::new(header);
    for c in &table.columns {
        let mut row = vec![c.p.to_string()];
        match &c.fit {
            Some(f) => {
                row.extend(
                    theta_rows(spec, &f.theta_hat)
                        .into_iter()
                        .map(|(_, v)| fmt_float(v)),
                );
                row.push(fmt_float(f.criterion.value));
                row.push(f.converged.to_string());
                row.push("NA".into());
            }
            None => {
                row.extend(std::iter::repeat_n("NA".to_string(), n_params + 2));
                row.push(c.error.as_ref().map_or("NA".into(), |e| e.code.to_string()));
            }
        }
        t.push(row);
    }
    t
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let y = cfg.series()?;
    let spec = cfg.spec();
    let p_values = match &cfg.p_list {
        Some(s) => parse_p_list(s)?,
        None => (1..=cfg.j_max).collect(),
    };
    let opts = SweepOptions {
        p_values,
        j_max: cfg.j_max,
        variant: cfg.variant,
        burn_in: Some(cfg.burn_in()),
        fit: cfg.fit_options(),
    };
    let table = run_sweep(&spec, &y, &opts)?;
    if let Some(e) = table
        .columns
        .iter()
        .all(|c| c.error.is_some())
        .then(|| table.columns[0].error.clone())
        .flatten()
    {
        return Err(Error::Optimizer(format!(
            "every fit failed; first: [{}] {}",
            e.code, e.message
        )));
    }
    let paths = [
        cfg.out_dir.join("sweep_matrix.tsv"),
        cfg.out_dir.join("sweep_long.tsv"),
        cfg.out_dir.join("sweep_fits.tsv"),
    ];
    write_tsv(&paths[0], &sweep_matrix(&table))?;
    write_tsv(&paths[1], &sweep_long(&table))?;
    write_tsv(&paths[2], &sweep_fits(&table, &spec))?;
    Ok(paths.to_vec())
}

fn resolve_theta(cfg: &RunConfig, y: &[Option<f64>]) -> Result<HyperParams> {
    match cfg.supplied_theta()? {
        Some(t) => Ok(t),
        None => Ok(fit(&cfg.spec(), y, &cfg.criterion(), &cfg.fit_options())?.theta_hat),
    }
}

pub fn cmd_decompose(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let y = cfg.series()?;
    let spec = cfg.spec();
    let theta = resolve_theta(cfg, &y)?;
    let d = decompose(&spec, &theta, &y)?;
    let mut header = vec!["index", "y"];
    for c in &d.components {
        match c.component {
            Component::Trend => header.extend(["trend", "trend_lo", "trend_hi"]),
            Component::Seasonal => header.push("seasonal"),
            Component::Ar => header.push("ar"),
        }
    }
    header.push("noise");
    let mut t = Tsv::new(header);
    for n in 0..d.len() {
        let mut row = vec![(n + 1).to_string(), fmt_opt(d.y[n])];
        for c in &d.components {
            row.push(fmt_float(c.mean[n]));
            if c.component == Component::Trend {
                let (lo, hi) = c.bounds(n, 2.0);
                row.push(fmt_float(lo));
                row.push(fmt_float(hi));
            }
        }
        row.push(fmt_opt(d.noise[n]));
        t.push(row);
    }
    let path = cfg.out_dir.join("decomposition.tsv");
    write_tsv(&path, &t)?;
    Ok(vec![path])
}

pub fn cmd_predict(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let y = cfg.series()?;
    let theta = resolve_theta(cfg, &y)?;
    let model = compose(&cfg.spec().with_theta(theta))?;
    let run = run_filter(&model, &y)?;
    let last = run.filtered.last().ok_or(Error::InsufficientData {
        needed: 0,
        available: 0,
    })?;
    let pred = predict_horizon(&model, last, cfg.horizon)?;
    let mut t = Tsv::new(["lead", "mean", "variance", "lo", "hi"]);
    for (j, (m, v)) in pred.obs_mean.iter().zip(&pred.obs_var).enumerate() {
        let sd = v.max(0.0).sqrt();
        t.push(vec![
            (j + 1).to_string(),
            fmt_float(*m),
            fmt_float(*v),
            fmt_float(m - 2.0 * sd),
            fmt_float(m + 2.0 * sd),
        ]);
    }
    let path = cfg.out_dir.join("prediction.tsv");
    write_tsv(&path, &t)?;
    Ok(vec![path])
}

/// Runs one parsed command and returns the files it wrote.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Fit(c) => cmd_fit(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Decompose(c) => cmd_decompose(c),
        Command::Predict(c) => cmd_predict(c),
    }
}

pub fn display_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_list_forms() {
        assert_eq!(parse_p_list("1,2,5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_p_list("1-3, 8").unwrap(), vec![1, 2, 3, 8]);
        assert!(parse_p_list("3-1").is_err());
        assert!(parse_p_list("").is_err());
        assert!(parse_p_list("a").is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "horizon-ssm",
            "sweep",
            "--data",
            "x.csv",
            "--m1",
            "1",
            "--variant",
            "concentrated",
            "--p-list",
            "1-4",
            "--j-max",
            "6",
        ])
        .unwrap();
        let Command::Sweep(c) = cli.command else {
            panic!()
        };
        assert_eq!(c.variant, Variant::ConcentratedP);
        assert_eq!(c.burn_in(), 1);
        assert!(
            Cli::try_parse_from(["horizon-ssm", "fit", "--data", "x", "--variant", "bogus"])
                .is_err()
        );
    }

    #[test]
    fn supplied_theta_follows_active_components() {
        let cli = Cli::try_parse_from([
            "horizon-ssm",
            "predict",
            "--data",
            "x",
            "--m1",
            "2",
            "--m2",
            "1",
            "--period",
            "4",
            "--m3",
            "1",
            "--tau-sq",
            "0.1,0.2,0.3",
            "--pacs",
            "0.5",
            "--sigma-sq",
            "2",
        ])
        .unwrap();
        let Command::Predict(c) = cli.command else {
            panic!()
        };
        let t = c.supplied_theta().unwrap().unwrap();
        assert_eq!(
            (t.tau1_sq, t.tau2_sq, t.tau3_sq, t.sigma_sq),
            (0.1, 0.2, 0.3, 2.0)
        );
        assert_eq!(t.ar_pacs, vec![0.5]);
        let mut c2 = c.clone();
        c2.tau_sq = Some("0.1".into());
        assert_eq!(c2.supplied_theta().unwrap_err().code(), "E_INVALID_SPEC");
        c2.sigma_sq = None;
        assert!(c2.supplied_theta().is_err());
    }
}
