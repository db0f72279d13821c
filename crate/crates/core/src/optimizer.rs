//! Nelder–Mead maximization of a fitting criterion over an unconstrained
//! parametrization of the structural hyperparameters.
//!
//! Variance ratios `τ²/σ²` enter on a log scale and AR partial
//! autocorrelations through `tanh`, so every point of `Rⁿ` maps to a valid
//! model with σ² = 1. The observation variance is profiled out afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::criteria::{evaluate, loglik_concentrated, CriterionConfig, CriterionValue};
use crate::error::{Error, Result};
use crate::models::{compose, Component, HyperParams, ModelSpec};

/// Meaning of one coordinate of the unconstrained vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamRole {
    /// `ln(τ²/σ²)` for a component.
    LogRatio(Component),
    /// `atanh` of the partial autocorrelation with this index.
    Pac(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamTransform {
    roles: Vec<ParamRole>,
    m3: usize,
}

impl ParamTransform {
    pub fn for_spec(spec: &ModelSpec) -> Self {
        let mut roles: Vec<ParamRole> = spec
            .active_components()
            .into_iter()
            .map(ParamRole::LogRatio)
            .collect();
        roles.extend((0..spec.m3).map(ParamRole::Pac));
        ParamTransform { roles, m3: spec.m3 }
    }

    pub fn dims(&self) -> usize {
        self.roles.len()
    }

    pub fn roles(&self) -> &[ParamRole] {
        &self.roles
    }

    /// Unconstrained vector to hyperparameters with σ² = 1. Inactive
    /// component variances are 0.
    pub fn forward(&self, v: &[f64]) -> HyperParams {
        let mut theta = HyperParams {
            tau1_sq: 0.0,
            tau2_sq: 0.0,
            tau3_sq: 0.0,
            ar_pacs: vec![0.0; self.m3],
            sigma_sq: 1.0,
        };
        for (role, &x) in self.roles.iter().zip(v) {
            match *role {
                ParamRole::LogRatio(Component::Trend) => theta.tau1_sq = x.exp(),
                ParamRole::LogRatio(Component::Seasonal) => theta.tau2_sq = x.exp(),
                ParamRole::LogRatio(Component::Ar) => theta.tau3_sq = x.exp(),
                ParamRole::Pac(i) => theta.ar_pacs[i] = x.tanh(),
            }
        }
        theta
    }

    /// Hyperparameters (any σ² > 0) to the unconstrained vector.
    pub fn inverse(&self, theta: &HyperParams) -> Result<Vec<f64>> {
        theta.validate()?;
        self.roles
            .iter()
            .map(|role| match *role {
                ParamRole::LogRatio(c) => {
                    let tau = match c {
                        Component::Trend => theta.tau1_sq,
                        Component::Seasonal => theta.tau2_sq,
                        Component::Ar => theta.tau3_sq,
                    };
                    if !(tau > 0.0) {
                        return Err(Error::InvalidSpec(format!(
                            "{c} variance must be positive to invert, got {tau}"
                        )));
                    }
                    Ok((tau / theta.sigma_sq).ln())
                }
                ParamRole::Pac(i) => theta.ar_pacs.get(i).map(|r| r.atanh()).ok_or_else(|| {
                    Error::InvalidSpec(format!("missing partial autocorrelation {i}"))
                }),
            })
            .collect()
    }
}

pub fn transform_forward(v: &[f64], layout: &ParamTransform) -> HyperParams {
    layout.forward(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    pub record_trace: bool,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        NelderMeadOptions {
            f_tol: 1e-8,
            x_tol: 1e-8,
            max_iter: 2000,
            initial_step: 0.5,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub argmax: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best vertex and its value after each iteration, when requested.
    pub trace: Vec<(Vec<f64>, f64)>,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Maximizes `f` starting from `start`. Non-finite values and `None` count
/// as −∞, except at the start point, where they are an error.
pub fn nelder_mead<F>(f: F, start: &[f64], opts: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: Fn(&[f64]) -> Option<f64>,
{
    if start.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("optimizer start point".into()));
    }
    let mut evaluations = 0usize;
    // minimize the negation internally
    let mut cost = |x: &[f64]| -> f64 {
        evaluations += 1;
        match f(x) {
            Some(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };
    let n = start.len();
    let c0 = cost(start);
    if !c0.is_finite() {
        return Err(Error::Optimizer(
            "criterion cannot be evaluated at the start point".into(),
        ));
    }
    if n == 0 {
        return Ok(NelderMeadResult {
            argmax: Vec::new(),
            value: -c0,
            iterations: 0,
            evaluations,
            converged: true,
            trace: Vec::new(),
        });
    }

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), c0));
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] += opts.initial_step;
        let c = cost(&x);
        simplex.push((x, c));
    }

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let diameter = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if worst - best <= opts.f_tol || diameter <= opts.x_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let toward = |from: &[f64], coef: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(from)
                .map(|(c, x)| c + coef * (x - c))
                .collect()
        };
        let xr = toward(&simplex[n].0, -ALPHA);
        let cr = cost(&xr);
        if cr < best {
            let xe = toward(&xr, GAMMA);
            let ce = cost(&xe);
            simplex[n] = if ce < cr { (xe, ce) } else { (xr, cr) };
        } else if cr < simplex[n - 1].1 {
            simplex[n] = (xr, cr);
        } else {
            let (xc, cc, accept) = if cr < worst {
                let xc = toward(&xr, RHO);
                let cc = cost(&xc);
                let ok = cc <= cr;
                (xc, cc, ok)
            } else {
                let xc = toward(&simplex[n].0, RHO);
                let cc = cost(&xc);
                let ok = cc < worst;
                (xc, cc, ok)
            };
            if accept {
                simplex[n] = (xc, cc);
            } else {
                let anchor = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = anchor
                        .iter()
                        .zip(&vertex.0)
                        .map(|(a, v)| a + SIGMA * (v - a))
                        .collect();
                    let c = cost(&x);
                    *vertex = (x, c);
                }
            }
        }
        if opts.record_trace {
            let b = simplex.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
            trace.push((b.0.clone(), -b.1));
        }
    }
    let (argmax, c) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        argmax,
        value: -c,
        iterations,
        evaluations,
        converged,
        trace,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitOptions {
    pub nelder_mead: NelderMeadOptions,
    /// Total number of starts; `None` means 5 with an AR component, else 1.
    pub multistart: Option<usize>,
    pub seed: u64,
    /// Per-coordinate fixed unconstrained values; fixed coordinates are not searched.
    pub fixed: Vec<Option<f64>>,
    /// Start point in unconstrained space; defaults to the origin.
    pub start: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted hyperparameters with σ̂² from the one-step concentrated likelihood.
    pub theta_hat: HyperParams,
    /// Hyperparameters with σ² = 1, i.e. the variance ratios.
    pub ratios: HyperParams,
    pub unconstrained: Vec<f64>,
    pub criterion: CriterionValue,
    pub iterations: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub trace: Vec<(Vec<f64>, f64)>,
}

/// Criterion at hyperparameters normalized to σ² = 1.
pub fn evaluate_ratios(
    spec: &ModelSpec,
    ratios: &HyperParams,
    y: &[Option<f64>],
    cfg: &CriterionConfig,
) -> Result<CriterionValue> {
    let model = compose(&spec.clone().with_theta(ratios.clone()))?;
    evaluate(&model, y, cfg)
}

/// Criterion at arbitrary hyperparameters; only the ratios to σ² matter.
pub fn evaluate_theta(
    spec: &ModelSpec,
    theta: &HyperParams,
    y: &[Option<f64>],
    cfg: &CriterionConfig,
) -> Result<CriterionValue> {
    theta.validate()?;
    evaluate_ratios(spec, &theta.scaled(1.0 / theta.sigma_sq), y, cfg)
}

fn base_full(fixed: &[Option<f64>], base: &[f64]) -> Vec<f64> {
    fixed
        .iter()
        .zip(base)
        .map(|(f, b)| f.unwrap_or(*b))
        .collect()
}

/// Maximizes the configured criterion over the hyperparameters of `spec`.
pub fn fit(
    spec: &ModelSpec,
    y: &[Option<f64>],
    cfg: &CriterionConfig,
    opts: &FitOptions,
) -> Result<FitResult> {
    spec.validate()?;
    cfg.validate()?;
    let transform = ParamTransform::for_spec(spec);
    let dims = transform.dims();
    if !opts.fixed.is_empty() && opts.fixed.len() != dims {
        return Err(Error::InvalidSpec(format!(
            "{} fixed entries for {dims} parameters",
            opts.fixed.len()
        )));
    }
    let fixed: Vec<Option<f64>> = if opts.fixed.is_empty() {
        vec![None; dims]
    } else {
        opts.fixed.clone()
    };
    let base = match &opts.start {
        Some(s) if s.len() == dims => s.clone(),
        Some(s) => {
            return Err(Error::InvalidSpec(format!(
                "start has {} entries for {dims} parameters",
                s.len()
            )))
        }
        None => vec![0.0; dims],
    };
    let free: Vec<usize> = (0..dims).filter(|&i| fixed[i].is_none()).collect();
    let embed = |z: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = (0..dims).map(|i| fixed[i].unwrap_or(base[i])).collect();
        for (&i, &x) in free.iter().zip(z) {
            v[i] = x;
        }
        v
    };
    let objective = |z: &[f64]| -> Option<f64> {
        let ratios = transform.forward(&embed(z));
        evaluate_ratios(spec, &ratios, y, cfg).ok().map(|c| c.value)
    };

    // surface the underlying error if the start point itself is unusable
    evaluate_ratios(spec, &transform.forward(&base_full(&fixed, &base)), y, cfg)?;

    let n_starts = opts
        .multistart
        .unwrap_or(if spec.m3 > 0 { 5 } else { 1 })
        .max(1);
    let z0: Vec<f64> = free.iter().map(|&i| base[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let starts: Vec<Vec<f64>> = (0..n_starts)
        .map(|s| {
            if s == 0 {
                z0.clone()
            } else {
                z0.iter().map(|x| x + rng.random_range(-2.0..2.0)).collect()
            }
        })
        .collect();

    let runs: Vec<Result<NelderMeadResult>> = starts
        .par_iter()
        .map(|z| nelder_mead(objective, z, &opts.nelder_mead))
        .collect();
    let mut evaluations = 0;
    let mut best: Option<NelderMeadResult> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(r) => {
                evaluations += r.evaluations;
                if best.as_ref().is_none_or(|b| r.value > b.value) {
                    best = Some(r);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let Some(best) = best else {
        return Err(
            first_err.unwrap_or_else(|| Error::Optimizer("no start point succeeded".into()))
        );
    };

    let unconstrained = embed(&best.argmax);
    let ratios = transform.forward(&unconstrained);
    let criterion = evaluate_ratios(spec, &ratios, y, cfg)?;
    let model = compose(&spec.clone().with_theta(ratios.clone()))?;
    let sigma_sq = loglik_concentrated(&model, y, cfg.burn_in)?.sigma_sq_hat;
    Ok(FitResult {
        theta_hat: ratios.scaled(sigma_sq),
        ratios,
        unconstrained,
        criterion,
        iterations: best.iterations,
        converged: best.converged,
        evaluations,
        trace: best.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::Variant;
    use crate::ssm::{observed, simulate};
    use proptest::prelude::*;

    #[test]
    fn one_dimensional_bowl() {
        let r = nelder_mead(
            |v| Some(-(v[0] - 3.0).powi(2)),
            &[0.0],
            &NelderMeadOptions::default(),
        )
        .unwrap();
        assert!((r.argmax[0] - 3.0).abs() < 1e-6, "{:?}", r.argmax);
        assert!(r.converged);
    }

    #[test]
    fn two_dimensional_bowl() {
        let f = |v: &[f64]| Some(-((v[0] - 1.0).powi(2) + (v[1] - 2.0).powi(2)));
        let opts = NelderMeadOptions {
            f_tol: 1e-14,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(f, &[0.0, 0.0], &opts).unwrap();
        assert!(
            (r.argmax[0] - 1.0).abs() < 1e-6 && (r.argmax[1] - 2.0).abs() < 1e-6,
            "{:?}",
            r.argmax
        );
    }

    #[test]
    fn rosenbrock() {
        let f = |v: &[f64]| Some(-(100.0 * (v[1] - v[0] * v[0]).powi(2) + (1.0 - v[0]).powi(2)));
        let opts = NelderMeadOptions {
            f_tol: 1e-16,
            x_tol: 1e-12,
            max_iter: 5000,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(f, &[-1.2, 1.0], &opts).unwrap();
        assert!(
            (r.argmax[0] - 1.0).abs() < 1e-4 && (r.argmax[1] - 1.0).abs() < 1e-4,
            "{:?}",
            r.argmax
        );
    }

    #[test]
    fn failures_are_avoided_and_start_failures_reported() {
        // undefined for x < 0
        let f = |v: &[f64]| {
            if v[0] < 0.0 {
                None
            } else {
                Some(-(v[0] - 0.2).powi(2))
            }
        };
        let r = nelder_mead(f, &[1.0], &NelderMeadOptions::default()).unwrap();
        assert!((r.argmax[0] - 0.2).abs() < 1e-4);
        let err = nelder_mead(f, &[-1.0], &NelderMeadOptions::default()).unwrap_err();
        assert_eq!(err.code(), "E_OPTIMIZER");
        let err = nelder_mead(f, &[f64::NAN], &NelderMeadOptions::default()).unwrap_err();
        assert_eq!(err.code(), "E_NON_FINITE");
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let f = |v: &[f64]| Some(-(100.0 * (v[1] - v[0] * v[0]).powi(2) + (1.0 - v[0]).powi(2)));
        let opts = NelderMeadOptions {
            max_iter: 5,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(f, &[-1.2, 1.0], &opts).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 5);
    }

    #[test]
    fn best_value_never_decreases() {
        let f =
            |v: &[f64]| Some(-(v[0].powi(2) + 3.0 * (v[1] - 0.5).powi(2) + (v[2] + 1.0).powi(4)));
        let opts = NelderMeadOptions {
            record_trace: true,
            ..NelderMeadOptions::default()
        };
        let r = nelder_mead(f, &[2.0, 2.0, 2.0], &opts).unwrap();
        assert_eq!(r.trace.len(), r.iterations);
        for w in r.trace.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn transform_origin_and_values() {
        let spec = ModelSpec::new(2, 1, 4, 2);
        let t = ParamTransform::for_spec(&spec);
        assert_eq!(t.dims(), 5);
        let theta = t.forward(&[0.0; 5]);
        assert_eq!(
            (theta.tau1_sq, theta.tau2_sq, theta.tau3_sq, theta.sigma_sq),
            (1.0, 1.0, 1.0, 1.0)
        );
        assert_eq!(theta.ar_pacs, vec![0.0, 0.0]);
        let theta = t.forward(&[0.1f64.ln(), 0.0, 0.0, 0.0, 0.0]);
        assert!((theta.tau1_sq - 0.1).abs() < 1e-15);
        let t = ParamTransform::for_spec(&ModelSpec::trend(1));
        assert_eq!(t.roles(), &[ParamRole::LogRatio(Component::Trend)]);
        assert_eq!(t.forward(&[0.0]).tau2_sq, 0.0);
    }

    proptest! {
        #[test]
        fn transform_round_trip(v in prop::collection::vec(-5.0f64..5.0, 5)) {
            let t = ParamTransform::for_spec(&ModelSpec::new(2, 1, 4, 2));
            let back = t.inverse(&t.forward(&v)).unwrap();
            for (a, b) in v.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }

        #[test]
        fn forward_is_always_valid(v in prop::collection::vec(-40.0f64..40.0, 5)) {
            let t = ParamTransform::for_spec(&ModelSpec::new(2, 1, 4, 2));
            let theta = t.forward(&v);
            prop_assert!(theta.tau1_sq >= 0.0 && theta.tau2_sq >= 0.0 && theta.tau3_sq >= 0.0);
        }
    }

    fn trend_series(ratio: f64, n: usize, seed: u64) -> Vec<Option<f64>> {
        let spec = ModelSpec::trend(1).with_theta(HyperParams {
            tau1_sq: ratio,
            ..HyperParams::default()
        });
        let model = compose(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        observed(&simulate(&model, &[0.0], n, &mut rng).unwrap().1)
    }

    #[test]
    fn fit_recovers_trend_ratio() {
        let spec = ModelSpec::trend(1);
        let cfg = CriterionConfig::new(1, Variant::Standard, 1);
        let hits = (0..20u64)
            .filter(|&seed| {
                let y = trend_series(0.1, 500, 1000 + seed);
                let fit = fit(&spec, &y, &cfg, &FitOptions::default()).unwrap();
                let r = fit.ratios.tau1_sq;
                (0.05..=0.2).contains(&r)
            })
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn fit_is_deterministic_and_reevaluates_exactly() {
        let spec = ModelSpec::trend(2).with_ar(1);
        let y = trend_series(0.2, 150, 8);
        let cfg = CriterionConfig::new(3, Variant::Literal, 3);
        let opts = FitOptions {
            seed: 11,
            multistart: Some(3),
            nelder_mead: NelderMeadOptions {
                record_trace: true,
                max_iter: 300,
                ..NelderMeadOptions::default()
            },
            ..FitOptions::default()
        };
        let a = fit(&spec, &y, &cfg, &opts).unwrap();
        let b = fit(&spec, &y, &cfg, &opts).unwrap();
        assert_eq!(a, b);
        let again = evaluate_ratios(&spec, &a.ratios, &y, &cfg).unwrap();
        assert_eq!(again.value.to_bits(), a.criterion.value.to_bits());
        let via_theta = evaluate_theta(&spec, &a.theta_hat, &y, &cfg).unwrap();
        assert!(
            (via_theta.value - a.criterion.value).abs() < 1e-12 * a.criterion.value.abs().max(1.0)
        );
        a.theta_hat.validate().unwrap();
        for w in a.trace.windows(2) {
            assert!(w[1].1 >= w[0].1);
        }
    }

    #[test]
    fn fully_fixed_search_evaluates_once() {
        let spec = ModelSpec::trend(2);
        let y = trend_series(0.2, 80, 4);
        let cfg = CriterionConfig::new(2, Variant::ConcentratedP, 2);
        let v = 0.05f64.ln();
        let opts = FitOptions {
            fixed: vec![Some(v)],
            ..FitOptions::default()
        };
        let r = fit(&spec, &y, &cfg, &opts).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.iterations, 0);
        assert_eq!(r.unconstrained, vec![v]);
        assert!(r.converged);
    }

    #[test]
    fn bad_start_is_an_error() {
        let spec = ModelSpec::trend(1);
        let y = observed(&[0.0; 30]);
        let err = fit(
            &spec,
            &y,
            &CriterionConfig::new(1, Variant::Standard, 1),
            &FitOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err.code(), "E_ZERO_VARIANCE");
    }
}
