//! Horizon sweeps: fit once per criterion horizon `p`, then tabulate the
//! `j`-step prediction error variances of every fit. Also smoothed
//! component decompositions of a fitted model.

use rayon::prelude::*;

use crate::criteria::{horizon_error_variances, CriterionConfig, Variant};
use crate::error::{Error, Result};
use crate::models::{compose, Component, HyperParams, ModelSpec};
use crate::optimizer::{fit, FitOptions, FitResult};
use crate::ssm::{run_filter, run_smoother};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub p_values: Vec<usize>,
    pub j_max: usize,
    pub variant: Variant,
    /// Defaults to the state dimension.
    pub burn_in: Option<usize>,
    pub fit: FitOptions,
}

impl SweepOptions {
    pub fn new(p_values: Vec<usize>, j_max: usize) -> Self {
        SweepOptions {
            p_values,
            j_max,
            variant: Variant::default(),
            burn_in: None,
            fit: FitOptions::default(),
        }
    }
}

/// Error kept in a sweep column instead of aborting the sweep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnError {
    pub code: &'static str,
    pub message: String,
}

impl From<&Error> for ColumnError {
    fn from(e: &Error) -> Self {
        ColumnError {
            code: e.code(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepColumn {
    pub p: usize,
    /// σ̂²_j for j = 1..=j_max; `None` when the fit failed.
    pub variances: Option<Vec<f64>>,
    pub mean: Option<f64>,
    pub fit: Option<FitResult>,
    pub error: Option<ColumnError>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub j_max: usize,
    pub burn_in: usize,
    pub columns: Vec<SweepColumn>,
}

impl SweepTable {
    pub fn p_values(&self) -> Vec<usize> {
        self.columns.iter().map(|c| c.p).collect()
    }

    /// σ̂²_j for the column with horizon `p`.
    pub fn cell(&self, j: usize, p: usize) -> Option<f64> {
        let col = self.columns.iter().find(|c| c.p == p)?;
        col.variances.as_ref()?.get(j.checked_sub(1)?).copied()
    }

    pub fn col_means(&self) -> Vec<Option<f64>> {
        self.columns.iter().map(|c| c.mean).collect()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sweep_column(
    spec: &ModelSpec,
    y: &[Option<f64>],
    p: usize,
    j_max: usize,
    cfg: CriterionConfig,
    fit_opts: &FitOptions,
) -> Result<(FitResult, Vec<f64>)> {
    let fitted = fit(spec, y, &CriterionConfig { p, ..cfg }, fit_opts)?;
    let model = compose(&spec.clone().with_theta(fitted.theta_hat.clone()))?;
    let variances = horizon_error_variances(&model, y, j_max, cfg.burn_in)?;
    Ok((fitted, variances))
}

/// Fits one model per `p` (in parallel) and tabulates σ̂²_j for each.
pub fn run_sweep(spec: &ModelSpec, y: &[Option<f64>], opts: &SweepOptions) -> Result<SweepTable> {
    spec.validate()?;
    if opts.p_values.is_empty() {
        return Err(Error::InvalidSpec("empty list of fitting horizons".into()));
    }
    if opts.j_max == 0 || opts.p_values.contains(&0) {
        return Err(Error::InvalidHorizon);
    }
    let burn_in = opts.burn_in.unwrap_or_else(|| spec.state_dim()).max(1);
    if y.len() <= opts.j_max + burn_in {
        return Err(Error::InsufficientData {
            needed: opts.j_max + burn_in,
            available: y.len(),
        });
    }
    let cfg = CriterionConfig::new(1, opts.variant, burn_in);
    let columns = opts
        .p_values
        .par_iter()
        .map(
            |&p| match sweep_column(spec, y, p, opts.j_max, cfg, &opts.fit) {
                Ok((fitted, variances)) => SweepColumn {
                    p,
                    mean: Some(mean(&variances)),
                    variances: Some(variances),
                    fit: Some(fitted),
                    error: None,
                },
                Err(e) => SweepColumn {
                    p,
                    variances: None,
                    mean: None,
                    fit: None,
                    error: Some((&e).into()),
                },
            },
        )
        .collect();
    Ok(SweepTable {
        j_max: opts.j_max,
        burn_in,
        columns,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalRow {
    pub j: usize,
    /// Every `p` attaining the row minimum.
    pub argmin: Vec<usize>,
    pub min_value: f64,
    pub within_band: bool,
}

impl DiagonalRow {
    pub fn is_tie(&self) -> bool {
        self.argmin.len() > 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalReport {
    pub band: usize,
    pub rows: Vec<DiagonalRow>,
    pub fraction_within: f64,
}

/// For each lead `j`, where does the row minimum over `p` sit relative to
/// `p = j`? Values within a relative 1e-12 of the minimum count as ties.
pub fn diagonal_min_check(table: &SweepTable, band: usize) -> DiagonalReport {
    let mut rows = Vec::with_capacity(table.j_max);
    for j in 1..=table.j_max {
        let cells: Vec<(usize, f64)> = table
            .columns
            .iter()
            .filter_map(|c| Some((c.p, table.cell(j, c.p)?)))
            .collect();
        if cells.is_empty() {
            continue;
        }
        let min_value = cells.iter().map(|&(_, v)| v).fold(f64::INFINITY, f64::min);
        let tol = 1e-12 * min_value.abs();
        let argmin: Vec<usize> = cells
            .iter()
            .filter(|&&(_, v)| v - min_value <= tol)
            .map(|&(p, _)| p)
            .collect();
        let within_band = argmin.iter().any(|&p| p.abs_diff(j) <= band);
        rows.push(DiagonalRow {
            j,
            argmin,
            min_value,
            within_band,
        });
    }
    let fraction_within = if rows.is_empty() {
        0.0
    } else {
        rows.iter().filter(|r| r.within_band).count() as f64 / rows.len() as f64
    };
    DiagonalReport {
        band,
        rows,
        fraction_within,
    }
}

/// Smoothed mean and standard deviation of one component in observation space.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSeries {
    pub component: Component,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl ComponentSeries {
    /// `mean - k·sd` and `mean + k·sd` at time index `n`.
    pub fn bounds(&self, n: usize, k: f64) -> (f64, f64) {
        (self.mean[n] - k * self.sd[n], self.mean[n] + k * self.sd[n])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub y: Vec<Option<f64>>,
    pub components: Vec<ComponentSeries>,
    /// `y` minus the summed component means; `None` where `y` is missing.
    pub noise: Vec<Option<f64>>,
    pub used_pseudo_inverse: bool,
}

impl Decomposition {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn component(&self, c: Component) -> Option<&ComponentSeries> {
        self.components.iter().find(|s| s.component == c)
    }

    pub fn component_sum(&self, n: usize) -> f64 {
        self.components.iter().map(|s| s.mean[n]).sum()
    }
}

/// Splits `y` into smoothed trend, seasonal and AR components plus noise.
pub fn decompose(
    spec: &ModelSpec,
    theta: &HyperParams,
    y: &[Option<f64>],
) -> Result<Decomposition> {
    let spec = spec.clone().with_theta(theta.clone());
    let model = compose(&spec)?;
    let run = run_filter(&model, y)?;
    let smooth = run_smoother(&model, &run)?;
    let h = model.h();
    let components: Vec<ComponentSeries> = spec
        .layout()
        .into_iter()
        .map(|block| {
            let range = block.offset..block.offset + block.dim;
            let hb = &h[range.clone()];
            let (mean, sd) = smooth
                .states
                .iter()
                .map(|s| {
                    let m: f64 = hb
                        .iter()
                        .zip(&s.mean[range.clone()])
                        .map(|(a, b)| a * b)
                        .sum();
                    let mut var = 0.0;
                    for (a, i) in hb.iter().zip(range.clone()) {
                        for (b, j) in hb.iter().zip(range.clone()) {
                            var += a * b * s.cov[(i, j)];
                        }
                    }
                    (m, var.max(0.0).sqrt())
                })
                .unzip();
            ComponentSeries {
                component: block.component,
                mean,
                sd,
            }
        })
        .collect();
    let noise = y
        .iter()
        .enumerate()
        .map(|(n, obs)| obs.map(|v| v - components.iter().map(|c| c.mean[n]).sum::<f64>()))
        .collect();
    Ok(Decomposition {
        y: y.to_vec(),
        components,
        noise,
        used_pseudo_inverse: smooth.used_pseudo_inverse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::NelderMeadOptions;
    use crate::ssm::{observed, simulate};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series(spec: &ModelSpec, n: usize, seed: u64) -> Vec<Option<f64>> {
        let model = compose(spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        observed(
            &simulate(&model, &vec![0.0; model.state_dim()], n, &mut rng)
                .unwrap()
                .1,
        )
    }

    fn quick_opts(p_values: Vec<usize>, j_max: usize) -> SweepOptions {
        let mut o = SweepOptions::new(p_values, j_max);
        o.fit.nelder_mead = NelderMeadOptions {
            max_iter: 200,
            ..NelderMeadOptions::default()
        };
        o
    }

    #[test]
    fn sweep_needs_enough_data() {
        let spec = ModelSpec::trend(2);
        let y = series(&spec, 30, 1);
        let err = run_sweep(&spec, &y, &quick_opts(vec![1], 29)).unwrap_err();
        assert_eq!(err.code(), "E_INSUFFICIENT_DATA");
    }

    #[test]
    fn sweep_table_shape_and_means() {
        let spec = ModelSpec::trend(2).with_theta(HyperParams {
            tau1_sq: 0.05,
            ..HyperParams::default()
        });
        let y = series(&spec, 120, 2);
        let table = run_sweep(&ModelSpec::trend(2), &y, &quick_opts(vec![1, 3, 6], 8)).unwrap();
        assert_eq!(table.p_values(), vec![1, 3, 6]);
        assert_eq!(table.burn_in, 2);
        for col in &table.columns {
            let v = col.variances.as_ref().unwrap();
            assert_eq!(v.len(), 8);
            assert!(v.iter().all(|&s| s >= 0.0));
            assert!((col.mean.unwrap() - v.iter().sum::<f64>() / 8.0).abs() < 1e-12);
            assert!(col.fit.as_ref().unwrap().theta_hat.sigma_sq > 0.0);
        }
        // each column is the same as a standalone fit
        let again = run_sweep(&ModelSpec::trend(2), &y, &quick_opts(vec![3], 8)).unwrap();
        assert_eq!(again.columns[0], table.columns[1]);
    }

    #[test]
    fn failing_column_does_not_abort() {
        let spec = ModelSpec::trend(1);
        let y = series(&spec.clone().with_theta(HyperParams::default()), 40, 5);
        let table = run_sweep(&spec, &y, &quick_opts(vec![1, 39], 5)).unwrap();
        assert!(table.columns[0].variances.is_some());
        let bad = &table.columns[1];
        assert!(bad.variances.is_none() && bad.mean.is_none());
        assert_eq!(bad.error.as_ref().unwrap().code, "E_INSUFFICIENT_DATA");
        assert_eq!(table.cell(1, 39), None);
    }

    fn synthetic_table(rows: &[&[f64]], p_values: &[usize]) -> SweepTable {
        let columns = p_values
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                let v: Vec<f64> = rows.iter().map(|r| r[c]).collect();
                SweepColumn {
                    p,
                    mean: Some(mean(&v)),
                    variances: Some(v),
                    fit: None,
                    error: None,
                }
            })
            .collect();
        SweepTable {
            j_max: rows.len(),
            burn_in: 1,
            columns,
        }
    }

    #[test]
    fn diagonal_check_on_constant_table_reports_ties() {
        let t = synthetic_table(&[&[2.0, 2.0, 2.0], &[2.0, 2.0, 2.0]], &[1, 2, 3]);
        let r = diagonal_min_check(&t, 0);
        assert!(r
            .rows
            .iter()
            .all(|row| row.is_tie() && row.argmin == vec![1, 2, 3]));
        assert_eq!(r.fraction_within, 1.0);
    }

    #[test]
    fn diagonal_check_locates_minimum() {
        let t = synthetic_table(
            &[&[1.0, 1.5, 2.0], &[3.0, 2.5, 2.6], &[5.0, 4.0, 3.9]],
            &[1, 2, 3],
        );
        let r = diagonal_min_check(&t, 0);
        assert_eq!(
            r.rows.iter().map(|x| x.argmin.clone()).collect::<Vec<_>>(),
            vec![vec![1], vec![2], vec![3]]
        );
        assert_eq!(r.fraction_within, 1.0);
        let t = synthetic_table(&[&[1.0, 0.5]], &[1, 5]);
        let r = diagonal_min_check(&t, 2);
        assert!(!r.rows[0].within_band);
        assert_eq!(r.fraction_within, 0.0);
    }

    #[test]
    fn decomposition_of_a_line() {
        let spec = ModelSpec::trend(2);
        let theta = HyperParams {
            tau1_sq: 1e-12,
            ..HyperParams::default()
        };
        let line: Vec<f64> = (1..=40).map(|n| 3.0 + 0.5 * n as f64).collect();
        let d = decompose(&spec, &theta, &observed(&line)).unwrap();
        let trend = d.component(Component::Trend).unwrap();
        for (n, v) in line.iter().enumerate() {
            assert!(
                (trend.mean[n] - v).abs() < 1e-6,
                "{n}: {} vs {v}",
                trend.mean[n]
            );
            assert!(d.noise[n].unwrap().abs() < 1e-6);
            let (lo, hi) = trend.bounds(n, 2.0);
            assert!((hi - trend.mean[n] - (trend.mean[n] - lo)).abs() < 1e-12);
        }
    }

    #[test]
    fn seasonal_decomposition_follows_recursion() {
        let first: Vec<f64> = (0..11).map(|i| ((i as f64) * 0.7).sin() * 3.0).collect();
        let mut pattern = first.clone();
        for n in 11..60 {
            let s: f64 = pattern[n - 11..n].iter().sum();
            pattern.push(-s);
        }
        let spec = ModelSpec::new(0, 1, 12, 0);
        let theta = HyperParams {
            tau2_sq: 1e-12,
            ..HyperParams::default()
        };
        let d = decompose(&spec, &theta, &observed(&pattern)).unwrap();
        let seasonal = d.component(Component::Seasonal).unwrap();
        for (n, (s, p)) in seasonal.mean.iter().zip(&pattern).enumerate().skip(12) {
            assert!((s - p).abs() < 1e-6, "{n}");
        }
        assert!(d.component(Component::Trend).is_none());
    }

    #[test]
    fn decomposition_is_additive() {
        let spec = ModelSpec::new(2, 1, 4, 2).with_theta(HyperParams {
            tau1_sq: 0.01,
            tau2_sq: 0.1,
            tau3_sq: 0.5,
            ar_pacs: vec![0.6, -0.2],
            sigma_sq: 1.0,
        });
        let mut y = series(&spec, 80, 3);
        y[10] = None;
        let d = decompose(&spec, &spec.theta, &y).unwrap();
        assert_eq!(d.len(), 80);
        assert_eq!(d.components.len(), 3);
        assert_eq!(d.noise[10], None);
        for n in (0..80).filter(|&n| n != 10) {
            let y = y[n].unwrap();
            let total = d.component_sum(n) + d.noise[n].unwrap();
            assert!((total - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
        assert!(d.components.iter().all(|c| c.sd.iter().all(|s| *s >= 0.0)));
    }
}
