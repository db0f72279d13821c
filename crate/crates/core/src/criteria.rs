//! Fitting criteria with the observation variance profiled out, and the
//! increasing-horizon prediction error variances used to compare fits.
//!
//! Burn-in is expressed as a forecast-origin index: a term whose forecast
//! was made after conditioning on `n` observations is summed only when
//! `n >= burn_in`. With all data observed this gives `N - p - burn_in + 1`
//! terms at lead `p`, and the one-step concentrated likelihood is the
//! `p = 1` member of the same family.
//!
//! Variances inside the criteria are measured in units of the model's
//! observation variance (`d / R`), so every criterion depends only on the
//! variance ratios and not on the overall scale of `Q`, `R` and `V0`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ssm::{check_series, filter_step, predict_one, HorizonProjector, StateSpaceModel};

/// Which log-likelihood is maximized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// One-step concentrated log-likelihood, whatever `p` is.
    Standard,
    /// `-(log 2πσ̂²_p + 1) - mean log d̃_{n+p|n}` with the unweighted
    /// p-step error variance σ̂²_p.
    #[default]
    Literal,
    /// The concentrated one-step form applied at lead `p`:
    /// `-½ (N log 2πσ̂² + Σ log d̃ + N)` with `σ̂² = mean ε²/d̃`.
    ConcentratedP,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "standard",
            Variant::Literal => "literal",
            Variant::ConcentratedP => "concentrated",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Variant::Standard),
            "literal" => Ok(Variant::Literal),
            "concentrated" | "concentrated_p" => Ok(Variant::ConcentratedP),
            other => Err(Error::InvalidSpec(format!(
                "unknown criterion variant '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriterionConfig {
    pub p: usize,
    pub variant: Variant,
    pub burn_in: usize,
}

impl CriterionConfig {
    pub fn new(p: usize, variant: Variant, burn_in: usize) -> Self {
        CriterionConfig {
            p,
            variant,
            burn_in,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidHorizon);
        }
        if self.burn_in == 0 {
            return Err(Error::InvalidSpec("burn-in must be at least 1".into()));
        }
        Ok(())
    }

    /// Horizon whose errors enter the criterion.
    pub fn effective_horizon(&self) -> usize {
        match self.variant {
            Variant::Standard => 1,
            _ => self.p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriterionValue {
    /// Log-likelihood, larger is better.
    pub value: f64,
    /// Profiled observation variance. One-step weighted estimate for the
    /// standard and literal variants, lead-`p` weighted for concentrated.
    pub sigma_sq_hat: f64,
    /// Plain mean of squared `p`-step errors, raw data units.
    pub sigma_p_sq_hat: f64,
    pub n_terms: usize,
}

/// One `p`-step forecast from origin `origin` (observations conditioned on).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonTerm {
    pub origin: usize,
    pub error: f64,
    /// `d_{origin+p|origin}` in units of `R`.
    pub scaled_variance: f64,
}

fn check_length(n: usize, p: usize, burn_in: usize) -> Result<()> {
    if n <= p + burn_in {
        return Err(Error::InsufficientData {
            needed: p + burn_in,
            available: n,
        });
    }
    Ok(())
}

fn observation_scale(model: &StateSpaceModel) -> Result<f64> {
    let r = model.r();
    if !(r > 0.0) {
        return Err(Error::InvalidSpec(
            "criteria need a positive observation variance R".into(),
        ));
    }
    Ok(r)
}

/// Streams the filter over `y` and calls `visit(origin, state)` with the
/// filtered state after every origin `0..=N`.
fn walk_filter(
    model: &StateSpaceModel,
    y: &[Option<f64>],
    mut visit: impl FnMut(usize, &crate::ssm::FilterState, Option<(f64, f64)>) -> Result<()>,
) -> Result<()> {
    check_series(y)?;
    let mut state = model.initial_state();
    visit(0, &state, None)?;
    for (i, obs) in y.iter().enumerate() {
        let pred = predict_one(model, &state)?;
        let innov = match obs {
            Some(v) => {
                let upd = filter_step(model, &pred, *v)?;
                state = upd.state;
                Some((upd.innovation.error, upd.innovation.variance))
            }
            None => {
                state = pred;
                None
            }
        };
        visit(i + 1, &state, innov)?;
    }
    Ok(())
}

fn concentrated_value(n: f64, sigma_sq: f64, sum_log_d: f64) -> f64 {
    -0.5 * (n * (2.0 * PI * sigma_sq).ln() + sum_log_d + n)
}

/// Concentrated one-step log-likelihood: σ̂² = mean ε²/d̃ and
/// `ℓ = -½ (N' log 2πσ̂² + Σ log d̃ + N')` over innovations with origin
/// `>= burn_in`.
pub fn loglik_concentrated(
    model: &StateSpaceModel,
    y: &[Option<f64>],
    burn_in: usize,
) -> Result<CriterionValue> {
    let r = observation_scale(model)?;
    let (mut n, mut sum_w, mut sum_sq, mut sum_log) = (0usize, 0.0, 0.0, 0.0);
    walk_filter(model, y, |origin, _, innov| {
        if let Some((e, d)) = innov {
            if origin > burn_in {
                let dt = d / r;
                n += 1;
                sum_w += e * e / dt;
                sum_sq += e * e;
                sum_log += dt.ln();
            }
        }
        Ok(())
    })?;
    if n == 0 {
        return Err(Error::InsufficientData {
            needed: burn_in + 1,
            available: y.len(),
        });
    }
    let nf = n as f64;
    let sigma_sq = sum_w / nf;
    if !(sigma_sq > 0.0) || !sigma_sq.is_finite() {
        return Err(Error::ZeroVariance);
    }
    Ok(CriterionValue {
        value: concentrated_value(nf, sigma_sq, sum_log),
        sigma_sq_hat: sigma_sq,
        sigma_p_sq_hat: sum_sq / nf,
        n_terms: n,
    })
}

/// The `p`-step terms `ε_{n+p|n}` and `d̃_{n+p|n}` for origins
/// `burn_in..=N-p` with `y_{n+p}` observed, from a single filter pass.
pub fn horizon_terms(
    model: &StateSpaceModel,
    y: &[Option<f64>],
    p: usize,
    burn_in: usize,
) -> Result<Vec<HorizonTerm>> {
    if p == 0 {
        return Err(Error::InvalidHorizon);
    }
    let r = observation_scale(model)?;
    let n = y.len();
    let proj = HorizonProjector::new(model, p)?;
    let mut terms = Vec::with_capacity(n.saturating_sub(p + burn_in) + 1);
    walk_filter(model, y, |origin, state, _| {
        if origin >= burn_in && origin + p <= n {
            if let Some(target) = y[origin + p - 1] {
                terms.push(HorizonTerm {
                    origin,
                    error: target - proj.mean(p, state),
                    scaled_variance: proj.variance(p, state) / r,
                });
            }
        }
        Ok(())
    })?;
    Ok(terms)
}

/// Modified `p`-step log-likelihood in the chosen variant.
pub fn loglik_horizon(
    model: &StateSpaceModel,
    y: &[Option<f64>],
    cfg: &CriterionConfig,
) -> Result<CriterionValue> {
    cfg.validate()?;
    if cfg.variant == Variant::Standard {
        check_length(y.len(), 1, cfg.burn_in)?;
        return loglik_concentrated(model, y, cfg.burn_in);
    }
    check_length(y.len(), cfg.p, cfg.burn_in)?;
    let terms = horizon_terms(model, y, cfg.p, cfg.burn_in)?;
    if terms.is_empty() {
        return Err(Error::InsufficientData {
            needed: cfg.p + cfg.burn_in,
            available: y.len(),
        });
    }
    let nf = terms.len() as f64;
    let mut sum_sq = 0.0;
    let mut sum_w = 0.0;
    let mut sum_log = 0.0;
    for t in &terms {
        if !(t.scaled_variance > 0.0) {
            return Err(Error::DegenerateInnovation {
                time: t.origin + cfg.p,
                variance: t.scaled_variance,
            });
        }
        sum_sq += t.error * t.error;
        sum_w += t.error * t.error / t.scaled_variance;
        sum_log += t.scaled_variance.ln();
    }
    let sigma_p_sq = sum_sq / nf;
    let sigma_w = sum_w / nf;
    let (value, sigma_sq_hat) = match cfg.variant {
        Variant::Literal => {
            if !(sigma_p_sq > 0.0) || !sigma_p_sq.is_finite() {
                return Err(Error::ZeroVariance);
            }
            let value = -((2.0 * PI * sigma_p_sq).ln() + 1.0) - sum_log / nf;
            // scale estimate from the one-step innovations of the same model
            let one_step = loglik_concentrated(model, y, cfg.burn_in)?;
            (value, one_step.sigma_sq_hat)
        }
        Variant::ConcentratedP => {
            if !(sigma_w > 0.0) || !sigma_w.is_finite() {
                return Err(Error::ZeroVariance);
            }
            (concentrated_value(nf, sigma_w, sum_log), sigma_w)
        }
        Variant::Standard => unreachable!(),
    };
    Ok(CriterionValue {
        value,
        sigma_sq_hat,
        sigma_p_sq_hat: sigma_p_sq,
        n_terms: terms.len(),
    })
}

/// Criterion dispatch used by the optimizer.
pub fn evaluate(
    model: &StateSpaceModel,
    y: &[Option<f64>],
    cfg: &CriterionConfig,
) -> Result<CriterionValue> {
    loglik_horizon(model, y, cfg)
}

/// σ̂²_j, the mean squared `j`-step prediction error, for j = 1..=j_max,
/// over origins `burn_in..=N-j`.
pub fn horizon_error_variances(
    model: &StateSpaceModel,
    y: &[Option<f64>],
    j_max: usize,
    burn_in: usize,
) -> Result<Vec<f64>> {
    if j_max == 0 {
        return Err(Error::InvalidHorizon);
    }
    let n = y.len();
    check_length(n, j_max, burn_in)?;
    let proj = HorizonProjector::new(model, j_max)?;
    let mut sums = vec![0.0; j_max];
    let mut counts = vec![0usize; j_max];
    walk_filter(model, y, |origin, state, _| {
        if origin < burn_in {
            return Ok(());
        }
        for j in 1..=j_max.min(n - origin) {
            if let Some(target) = y[origin + j - 1] {
                let e = target - proj.mean(j, state);
                sums[j - 1] += e * e;
                counts[j - 1] += 1;
            }
        }
        Ok(())
    })?;
    if counts.contains(&0) {
        return Err(Error::InsufficientData {
            needed: j_max + burn_in,
            available: n,
        });
    }
    Ok(sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect())
}
