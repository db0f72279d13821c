//! Time-invariant linear Gaussian state-space models with a scalar
//! observation:
//!
//! ```text
//! x_n = F x_{n-1} + G v_n,   v_n ~ N(0, Q)
//! y_n = H x_n + w_n,         w_n ~ N(0, R)
//! ```
//!
//! The Kalman filter here keeps the plain `(I - K H) V` covariance update
//! and symmetrizes after every step. Time indices are 1-based: the prior
//! `(x0, V0)` sits at time 0 and observation `y[i]` is time `i + 1`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, dot, Matrix, Vector};

/// Negative covariance diagonals above this are rounding noise and get
/// clamped to zero.
pub const DIAGONAL_CLAMP: f64 = -1e-10;

/// Relative eigenvalue cutoff used when a predicted covariance has to be
/// pseudo-inverted during smoothing.
pub const PINV_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    f: Matrix,
    g: Matrix,
    h: Vec<f64>,
    q: Matrix,
    r: f64,
    x0: Vector,
    v0: Matrix,
    gqg: Matrix,
}

impl StateSpaceModel {
    pub fn new(
        f: Matrix,
        g: Matrix,
        h: Vec<f64>,
        q: Matrix,
        r: f64,
        x0: Vector,
        v0: Matrix,
    ) -> Result<Self> {
        let k = f.rows();
        let dim_err = |op, left, right| Error::DimensionMismatch { op, left, right };
        if k == 0 || !f.is_square() {
            return Err(dim_err("model F", f.shape(), (k, k)));
        }
        if g.rows() != k {
            return Err(dim_err("model G", g.shape(), (k, q.rows())));
        }
        if !q.is_square() || q.rows() != g.cols() {
            return Err(dim_err("model Q", q.shape(), (g.cols(), g.cols())));
        }
        if h.len() != k {
            return Err(dim_err("model H", (1, h.len()), (1, k)));
        }
        if x0.len() != k {
            return Err(dim_err("model x0", (x0.len(), 1), (k, 1)));
        }
        if v0.shape() != (k, k) {
            return Err(dim_err("model V0", v0.shape(), (k, k)));
        }
        let finite = |m: &Matrix| m.as_slice().iter().all(|v| v.is_finite());
        if !(finite(&f) && finite(&g) && finite(&q) && finite(&v0))
            || !h.iter().chain(x0.iter()).all(|v| v.is_finite())
            || !r.is_finite()
        {
            return Err(Error::NonFinite("model matrices".into()));
        }
        if r < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "observation variance R = {r} is negative"
            )));
        }
        if q.max_asymmetry() > 1e-12 * q.max_abs().max(1.0) || q.diagonal().iter().any(|&d| d < 0.0)
        {
            return Err(Error::InvalidSpec(
                "Q must be symmetric nonnegative-definite".into(),
            ));
        }
        if v0.max_asymmetry() > 1e-12 * v0.max_abs().max(1.0)
            || v0.diagonal().iter().any(|&d| d < 0.0)
        {
            return Err(Error::InvalidSpec(
                "V0 must be symmetric nonnegative-definite".into(),
            ));
        }
        let gqg = linalg::congruence(&g, &q)?;
        Ok(StateSpaceModel {
            f,
            g,
            h,
            q,
            r,
            x0,
            v0,
            gqg,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.f.rows()
    }

    pub fn noise_dim(&self) -> usize {
        self.g.cols()
    }

    pub fn f(&self) -> &Matrix {
        &self.f
    }

    pub fn g(&self) -> &Matrix {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn q(&self) -> &Matrix {
        &self.q
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x0(&self) -> &Vector {
        &self.x0
    }

    pub fn v0(&self) -> &Matrix {
        &self.v0
    }

    /// `G Q Gᵀ`, cached at construction.
    pub fn system_noise_cov(&self) -> &Matrix {
        &self.gqg
    }

    /// Same model with `Q`, `R` and `V0` multiplied by `c`. Filtered and
    /// predicted means, and the Kalman gains, do not change.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        StateSpaceModel::new(
            self.f.clone(),
            self.g.clone(),
            self.h.clone(),
            self.q.scale(c),
            self.r * c,
            self.x0.clone(),
            self.v0.scale(c),
        )
    }

    pub fn with_prior(&self, x0: Vector, v0: Matrix) -> Result<Self> {
        StateSpaceModel::new(
            self.f.clone(),
            self.g.clone(),
            self.h.clone(),
            self.q.clone(),
            self.r,
            x0,
            v0,
        )
    }

    pub fn initial_state(&self) -> FilterState {
        FilterState {
            mean: self.x0.clone(),
            cov: self.v0.clone(),
            time: 0,
            cond: 0,
        }
    }
}

/// Conditional moments `x_{time|cond}`, `V_{time|cond}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mean: Vector,
    pub cov: Matrix,
    pub time: usize,
    pub cond: usize,
}

impl FilterState {
    /// Observation-space mean `H x`.
    pub fn obs_mean(&self, model: &StateSpaceModel) -> f64 {
        self.mean.dot(model.h())
    }

    /// Observation-space state variance `H V Hᵀ`, without `R`.
    pub fn obs_state_var(&self, model: &StateSpaceModel) -> f64 {
        self.cov.quad_form(model.h()).unwrap_or(f64::NAN)
    }
}

/// One-step prediction error `y_n - y_{n|n-1}` and its variance `d_{n|n-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Innovation {
    pub error: f64,
    pub variance: f64,
}

/// Result of a single measurement update.
#[derive(Debug, Clone, PartialEq)]
pub struct Update {
    pub state: FilterState,
    pub innovation: Innovation,
    pub gain: Vector,
}

#[derive(Debug, Clone)]
pub struct FilterRun {
    /// `x_{n|n-1}, V_{n|n-1}` for n = 1..N.
    pub predicted: Vec<FilterState>,
    /// `x_{n|n}, V_{n|n}` for n = 1..N; equal to the prediction where `y_n` is missing.
    pub filtered: Vec<FilterState>,
    /// `None` at missing observations.
    pub innovations: Vec<Option<Innovation>>,
}

impl FilterRun {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    pub fn n_observed(&self) -> usize {
        self.innovations.iter().flatten().count()
    }

    /// Exact Gaussian log-likelihood assembled from the innovations.
    pub fn log_likelihood(&self) -> f64 {
        -0.5 * self
            .innovations
            .iter()
            .flatten()
            .map(|e| {
                (2.0 * std::f64::consts::PI * e.variance).ln() + e.error * e.error / e.variance
            })
            .sum::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct HorizonPrediction {
    /// `x_{n+j|n}, V_{n+j|n}` for j = 1..p.
    pub states: Vec<FilterState>,
    /// `y_{n+j|n}`.
    pub obs_mean: Vec<f64>,
    /// `d_{n+j|n} = H V_{n+j|n} Hᵀ + R`.
    pub obs_var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SmootherRun {
    /// `x_{n|N}, V_{n|N}` for n = 1..N.
    pub states: Vec<FilterState>,
    /// Set when some predicted covariance was singular and the gain used a
    /// pseudo-inverse.
    pub used_pseudo_inverse: bool,
}

fn clamp_diagonal(cov: &mut Matrix) {
    for i in 0..cov.rows() {
        if cov[(i, i)] < 0.0 {
            cov[(i, i)] = 0.0;
        }
    }
}

/// Time update: `x ← F x`, `V ← F V Fᵀ + G Q Gᵀ`.
pub fn predict_one(model: &StateSpaceModel, s: &FilterState) -> Result<FilterState> {
    let mean = model.f.mul_vec(&s.mean)?;
    let mut cov = linalg::congruence(&model.f, &s.cov)?.add(&model.gqg)?;
    cov.symmetrize();
    clamp_diagonal(&mut cov);
    Ok(FilterState {
        mean,
        cov,
        time: s.time + 1,
        cond: s.cond,
    })
}

/// Measurement update of a one-step-predicted state with observation `y`.
pub fn filter_step(model: &StateSpaceModel, s: &FilterState, y: f64) -> Result<Update> {
    let k = model.state_dim();
    if s.mean.len() != k || s.cov.shape() != (k, k) {
        return Err(Error::DimensionMismatch {
            op: "filter_step",
            left: s.cov.shape(),
            right: (k, k),
        });
    }
    let vh = s.cov.mul_vec(&model.h)?;
    let d = dot(&model.h, &vh) + model.r;
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::DegenerateInnovation {
            time: s.time,
            variance: d,
        });
    }
    let error = y - s.mean.dot(&model.h);
    let gain: Vector = vh.iter().map(|v| v / d).collect::<Vec<_>>().into();
    let mean: Vector = s
        .mean
        .iter()
        .zip(gain.iter())
        .map(|(m, g)| m + g * error)
        .collect::<Vec<_>>()
        .into();
    // (I - K H) V = V - K (V Hᵀ)ᵀ for symmetric V
    let mut cov = s.cov.clone();
    for i in 0..k {
        if gain[i] == 0.0 {
            continue;
        }
        for j in 0..k {
            cov[(i, j)] -= gain[i] * vh[j];
        }
    }
    cov.symmetrize();
    clamp_diagonal(&mut cov);
    Ok(Update {
        state: FilterState {
            mean,
            cov,
            time: s.time,
            cond: s.time,
        },
        innovation: Innovation { error, variance: d },
        gain,
    })
}

/// Validates a series: observed values must be finite.
pub(crate) fn check_series(y: &[Option<f64>]) -> Result<()> {
    if let Some(i) = y
        .iter()
        .position(|v| matches!(v, Some(x) if !x.is_finite()))
    {
        return Err(Error::NonFinite(format!(
            "observation {} is not finite and not flagged missing",
            i + 1
        )));
    }
    Ok(())
}

/// Runs the Kalman filter over `y` starting from the model prior.
pub fn run_filter(model: &StateSpaceModel, y: &[Option<f64>]) -> Result<FilterRun> {
    if y.is_empty() {
        return Err(Error::InsufficientData {
            needed: 0,
            available: 0,
        });
    }
    check_series(y)?;
    let n = y.len();
    let mut predicted = Vec::with_capacity(n);
    let mut filtered = Vec::with_capacity(n);
    let mut innovations = Vec::with_capacity(n);
    let mut state = model.initial_state();
    for obs in y {
        let pred = predict_one(model, &state)?;
        match obs {
            Some(v) => {
                let upd = filter_step(model, &pred, *v)?;
                innovations.push(Some(upd.innovation));
                state = upd.state;
            }
            None => {
                innovations.push(None);
                state = pred.clone();
            }
        }
        predicted.push(pred);
        filtered.push(state.clone());
    }
    Ok(FilterRun {
        predicted,
        filtered,
        innovations,
    })
}

/// Iterated time updates from `s` for leads 1..=p.
pub fn predict_horizon(
    model: &StateSpaceModel,
    s: &FilterState,
    p: usize,
) -> Result<HorizonPrediction> {
    if p == 0 {
        return Err(Error::InvalidHorizon);
    }
    let mut states = Vec::with_capacity(p);
    let mut obs_mean = Vec::with_capacity(p);
    let mut obs_var = Vec::with_capacity(p);
    let mut cur = s.clone();
    for _ in 0..p {
        cur = predict_one(model, &cur)?;
        let d = cur.obs_state_var(model) + model.r;
        if !(d > 0.0) {
            return Err(Error::DegenerateInnovation {
                time: cur.time,
                variance: d,
            });
        }
        obs_mean.push(cur.obs_mean(model));
        obs_var.push(d);
        states.push(cur.clone());
    }
    Ok(HorizonPrediction {
        states,
        obs_mean,
        obs_var,
    })
}

/// Fixed-interval (Rauch–Tung–Striebel) smoother over a completed filter run.
pub fn run_smoother(model: &StateSpaceModel, run: &FilterRun) -> Result<SmootherRun> {
    let n = run.len();
    if n == 0 {
        return Ok(SmootherRun {
            states: Vec::new(),
            used_pseudo_inverse: false,
        });
    }
    let k = model.state_dim();
    let mut used_pinv = false;
    let mut states = vec![run.filtered[n - 1].clone(); n];
    for t in (0..n - 1).rev() {
        let filt = &run.filtered[t];
        let pred_next = &run.predicted[t + 1];
        let next = &states[t + 1];
        // Aᵀ = V_{t+1|t}⁻¹ F V_{t|t}
        let fv = model.f.matmul(&filt.cov)?;
        let at = match linalg::spd_solve(&pred_next.cov, &fv) {
            Ok(x) => x,
            Err(Error::NotPositiveDefinite { .. }) => {
                used_pinv = true;
                linalg::pinv_symmetric(&pred_next.cov, PINV_TOLERANCE)?.matmul(&fv)?
            }
            Err(e) => return Err(e),
        };
        let a = at.transpose();
        let dx: Vec<f64> = next
            .mean
            .iter()
            .zip(pred_next.mean.iter())
            .map(|(s, p)| s - p)
            .collect();
        let corr = a.mul_vec(&dx)?;
        let mean: Vector = filt
            .mean
            .iter()
            .zip(corr.iter())
            .map(|(m, c)| m + c)
            .collect::<Vec<_>>()
            .into();
        let dv = next.cov.sub(&pred_next.cov)?;
        let mut cov = filt.cov.add(&a.matmul(&dv)?.matmul(&at)?)?;
        cov.symmetrize();
        clamp_diagonal(&mut cov);
        debug_assert_eq!(cov.rows(), k);
        states[t] = FilterState {
            mean,
            cov,
            time: filt.time,
            cond: n,
        };
    }
    Ok(SmootherRun {
        states,
        used_pseudo_inverse: used_pinv,
    })
}

/// Rows `H Fʲ` and accumulated noise variances for leads `0..=max_lead`.
///
/// For a time-invariant model, `y_{n+j|n} = (H Fʲ) x_{n|n}` and
/// `d_{n+j|n} = (H Fʲ) V_{n|n} (H Fʲ)ᵀ + c_j + R` with
/// `c_j = Σ_{i<j} (H Fⁱ) G Q Gᵀ (H Fⁱ)ᵀ`. This lets a single filter pass
/// produce every lead without iterating full covariance predictions.
#[derive(Debug, Clone)]
pub struct HorizonProjector {
    rows: Vec<Vec<f64>>,
    noise: Vec<f64>,
    r: f64,
}

impl HorizonProjector {
    pub fn new(model: &StateSpaceModel, max_lead: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(max_lead + 1);
        let mut noise = Vec::with_capacity(max_lead + 1);
        let mut row = model.h.clone();
        let mut acc = 0.0;
        for _ in 0..=max_lead {
            rows.push(row.clone());
            noise.push(acc);
            acc += model.gqg.quad_form(&row)?;
            row = model.f.vec_mul(&row)?;
        }
        Ok(HorizonProjector {
            rows,
            noise,
            r: model.r,
        })
    }

    pub fn max_lead(&self) -> usize {
        self.rows.len() - 1
    }

    /// `H Fʲ`.
    pub fn row(&self, lead: usize) -> &[f64] {
        &self.rows[lead]
    }

    pub fn mean(&self, lead: usize, state: &FilterState) -> f64 {
        state.mean.dot(&self.rows[lead])
    }

    /// `d_{n+lead|n}` including `R`.
    pub fn variance(&self, lead: usize, state: &FilterState) -> f64 {
        state.cov.quad_form(&self.rows[lead]).unwrap_or(f64::NAN) + self.noise[lead] + self.r
    }
}

/// Draws a sample path of length `n` starting from the given state at time 0.
///
/// Returns the latent states `x_1..x_n` and the observations `y_1..y_n`.
pub fn simulate<R: Rng + ?Sized>(
    model: &StateSpaceModel,
    start: &[f64],
    n: usize,
    rng: &mut R,
) -> Result<(Vec<Vector>, Vec<f64>)> {
    let (qvals, qvecs) = linalg::symmetric_eigen(model.q())?;
    let q_sqrt: Vec<f64> = qvals.iter().map(|v| v.max(0.0).sqrt()).collect();
    let r_sqrt = model.r.sqrt();
    let m = model.noise_dim();
    let mut x: Vector = start.to_vec().into();
    if x.len() != model.state_dim() {
        return Err(Error::DimensionMismatch {
            op: "simulate",
            left: (x.len(), 1),
            right: (model.state_dim(), 1),
        });
    }
    let mut states = Vec::with_capacity(n);
    let mut obs = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Vec<f64> = (0..m)
            .map(|i| q_sqrt[i] * Distribution::<f64>::sample(&StandardNormal, rng))
            .collect::<Vec<f64>>();
        let v = qvecs.mul_vec(&z)?;
        let gv = model.g.mul_vec(&v)?;
        let fx = model.f.mul_vec(&x)?;
        x = fx
            .iter()
            .zip(gv.iter())
            .map(|(a, b)| a + b)
            .collect::<Vec<_>>()
            .into();
        let w: f64 = StandardNormal.sample(rng);
        obs.push(x.dot(&model.h) + r_sqrt * w);
        states.push(x.clone());
    }
    Ok((states, obs))
}

/// Wraps fully observed values as a series without missing entries.
pub fn observed(values: &[f64]) -> Vec<Option<f64>> {
    values.iter().copied().map(Some).collect()
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    pub fn scalar_model(f: f64, q: f64, r: f64, v0: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            Matrix::from_rows(&[&[f]]).unwrap(),
            Matrix::identity(1),
            vec![1.0],
            Matrix::from_diag(&[q]),
            r,
            Vector::zeros(1),
            Matrix::from_diag(&[v0]),
        )
        .unwrap()
    }

    pub fn trend2_model(tau_sq: f64, r: f64, v0: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            Matrix::from_rows(&[&[2.0, -1.0], &[1.0, 0.0]]).unwrap(),
            Matrix::column(&[1.0, 0.0]),
            vec![1.0, 0.0],
            Matrix::from_diag(&[tau_sq]),
            r,
            Vector::zeros(2),
            Matrix::from_diag(&[v0, v0]),
        )
        .unwrap()
    }

    /// Stable random model with state dimension `k` and a proper prior.
    pub fn random_stable_model(rng: &mut impl Rng, k: usize) -> StateSpaceModel {
        let mut f = crate::linalg::test_support::random_matrix(rng, k, k);
        // scale so that the infinity norm stays below 0.95
        let norm = (0..k)
            .map(|i| f.row_slice(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        f = f.scale(0.95 / norm.max(1e-9));
        let m = rng.random_range(1..=k);
        let g = crate::linalg::test_support::random_matrix(rng, k, m);
        let q = Matrix::from_diag(
            &(0..m)
                .map(|_| rng.random_range(0.1..1.5))
                .collect::<Vec<_>>(),
        );
        let h: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = rng.random_range(0.5..2.0);
        let x0: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        StateSpaceModel::new(f, g, h, q, r, x0.into(), Matrix::identity(k)).unwrap()
    }
}
