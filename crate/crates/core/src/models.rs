//! Structural model builders: trend, seasonal and stationary AR blocks,
//! composed block-diagonally into one [`StateSpaceModel`].

use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::ssm::StateSpaceModel;

/// Default diagonal of the initial state covariance.
pub const DIFFUSE_VARIANCE: f64 = 1e7;

/// Companion matrices with spectral radius at or above `1 - STATIONARITY_MARGIN`
/// are rejected.
pub const STATIONARITY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    Trend,
    Seasonal,
    Ar,
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::Trend => "trend",
            Component::Seasonal => "seasonal",
            Component::Ar => "ar",
        })
    }
}

/// One structural block before composition: transition, single noise
/// column, observation row and noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub component: Component,
    pub f: Matrix,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub tau_sq: f64,
}

impl Block {
    pub fn dim(&self) -> usize {
        self.f.rows()
    }

    /// The block as a standalone model with observation variance `r`.
    pub fn into_model(self, r: f64, prior_variance: f64) -> Result<StateSpaceModel> {
        let k = self.dim();
        StateSpaceModel::new(
            self.f,
            Matrix::column(&self.g),
            self.h,
            Matrix::from_diag(&[self.tau_sq]),
            r,
            Vector::zeros(k),
            Matrix::from_diag(&vec![prior_variance; k]),
        )
    }
}

fn check_variance(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidSpec(format!(
            "{name} must be a finite nonnegative variance, got {v}"
        )));
    }
    Ok(())
}

fn unit(k: usize) -> Vec<f64> {
    let mut e = vec![0.0; k];
    e[0] = 1.0;
    e
}

/// First-order (random walk) or second-order (locally linear) trend.
pub fn build_trend(order: usize, tau_sq: f64) -> Result<Block> {
    check_variance("trend variance", tau_sq)?;
    let f = match order {
        1 => Matrix::identity(1),
        2 => Matrix::from_rows(&[&[2.0, -1.0], &[1.0, 0.0]])?,
        _ => {
            return Err(Error::InvalidSpec(format!(
                "trend order {order} not supported (use 1 or 2)"
            )))
        }
    };
    Ok(Block {
        component: Component::Trend,
        g: unit(order),
        h: unit(order),
        f,
        tau_sq,
    })
}

/// Stochastic seasonal whose values over one period sum to noise.
pub fn build_seasonal(period: usize, tau_sq: f64) -> Result<Block> {
    if period < 2 {
        return Err(Error::InvalidSpec(format!(
            "seasonal period must be at least 2, got {period}"
        )));
    }
    check_variance("seasonal variance", tau_sq)?;
    let k = period - 1;
    let mut f = Matrix::zeros(k, k);
    for j in 0..k {
        f[(0, j)] = -1.0;
    }
    for i in 1..k {
        f[(i, i - 1)] = 1.0;
    }
    Ok(Block {
        component: Component::Seasonal,
        g: unit(k),
        h: unit(k),
        f,
        tau_sq,
    })
}

/// Step-down (reverse Levinson) recursion. Returns `None` as soon as a
/// reflection coefficient leaves the open unit interval.
fn step_down(coeffs: &[f64]) -> Option<Vec<f64>> {
    let m = coeffs.len();
    let mut phi = coeffs.to_vec();
    let mut pacs = vec![0.0; m];
    for k in (0..m).rev() {
        let r = phi[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        pacs[k] = r;
        let denom = 1.0 - r * r;
        let prev: Vec<f64> = (0..k)
            .map(|j| (phi[j] + r * phi[k - 1 - j]) / denom)
            .collect();
        phi.truncate(k);
        phi.copy_from_slice(&prev);
    }
    Some(pacs)
}

/// True when every root of `zᵐ - a₁zᵐ⁻¹ - … - aₘ` lies strictly inside the
/// circle of radius `rho`.
fn roots_inside(coeffs: &[f64], rho: f64) -> bool {
    let scaled: Vec<f64> = coeffs
        .iter()
        .enumerate()
        .map(|(j, a)| a / rho.powi(j as i32 + 1))
        .collect();
    if scaled.iter().any(|v| !v.is_finite()) {
        return false;
    }
    step_down(&scaled).is_some()
}

/// Spectral radius of the AR companion matrix, by bisection on the
/// Schur–Cohn test.
pub fn spectral_radius(coeffs: &[f64]) -> f64 {
    if coeffs.iter().all(|&a| a == 0.0) {
        return 0.0;
    }
    let mut hi = 1.0 + coeffs.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if roots_inside(coeffs, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn is_stationary(coeffs: &[f64]) -> bool {
    roots_inside(coeffs, 1.0 - STATIONARITY_MARGIN)
}

/// Stationary AR component `p_n = Σ a_j p_{n-j} + z_n` in companion form.
pub fn build_ar(coeffs: &[f64], tau_sq: f64) -> Result<Block> {
    if coeffs.is_empty() {
        return Err(Error::InvalidSpec("AR order must be at least 1".into()));
    }
    check_variance("AR variance", tau_sq)?;
    if coeffs.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("AR coefficient".into()));
    }
    if !is_stationary(coeffs) {
        return Err(Error::Nonstationary {
            radius: spectral_radius(coeffs),
        });
    }
    let k = coeffs.len();
    let mut f = Matrix::zeros(k, k);
    for (j, &a) in coeffs.iter().enumerate() {
        f[(0, j)] = a;
    }
    for i in 1..k {
        f[(i, i - 1)] = 1.0;
    }
    Ok(Block {
        component: Component::Ar,
        g: unit(k),
        h: unit(k),
        f,
        tau_sq,
    })
}

/// Levinson–Durbin map from partial autocorrelations to AR coefficients.
pub fn pacs_to_ar(pacs: &[f64]) -> Result<Vec<f64>> {
    if let Some((index, &value)) = pacs.iter().enumerate().find(|(_, v)| !(v.abs() < 1.0)) {
        return Err(Error::InvalidPartialAutocorrelation { index, value });
    }
    let mut phi: Vec<f64> = Vec::with_capacity(pacs.len());
    for (k, &r) in pacs.iter().enumerate() {
        let next: Vec<f64> = (0..k).map(|j| phi[j] - r * phi[k - 1 - j]).collect();
        phi = next;
        phi.push(r);
    }
    Ok(phi)
}

/// Inverse of [`pacs_to_ar`]; fails for nonstationary coefficients.
pub fn ar_to_pacs(coeffs: &[f64]) -> Result<Vec<f64>> {
    step_down(coeffs).ok_or_else(|| Error::Nonstationary {
        radius: spectral_radius(coeffs),
    })
}

/// Variances and AR partial autocorrelations of a structural model.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub tau1_sq: f64,
    pub tau2_sq: f64,
    pub tau3_sq: f64,
    pub ar_pacs: Vec<f64>,
    pub sigma_sq: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            tau1_sq: 1.0,
            tau2_sq: 1.0,
            tau3_sq: 1.0,
            ar_pacs: Vec::new(),
            sigma_sq: 1.0,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        check_variance("tau1_sq", self.tau1_sq)?;
        check_variance("tau2_sq", self.tau2_sq)?;
        check_variance("tau3_sq", self.tau3_sq)?;
        if !(self.sigma_sq > 0.0) || !self.sigma_sq.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "sigma_sq must be positive, got {}",
                self.sigma_sq
            )));
        }
        if let Some((index, &value)) = self
            .ar_pacs
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.abs() < 1.0))
        {
            return Err(Error::InvalidPartialAutocorrelation { index, value });
        }
        Ok(())
    }

    /// All variances multiplied by `c`.
    pub fn scaled(&self, c: f64) -> HyperParams {
        HyperParams {
            tau1_sq: self.tau1_sq * c,
            tau2_sq: self.tau2_sq * c,
            tau3_sq: self.tau3_sq * c,
            ar_pacs: self.ar_pacs.clone(),
            sigma_sq: self.sigma_sq * c,
        }
    }

    pub fn ar_coefficients(&self) -> Result<Vec<f64>> {
        pacs_to_ar(&self.ar_pacs)
    }
}

/// Structural orders plus hyperparameters.
///
/// `m1` is the trend order (0, 1 or 2), `m2` switches the seasonal block
/// on (0 or 1) with period `period`, and `m3` is the AR order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub m1: usize,
    pub m2: usize,
    pub period: usize,
    pub m3: usize,
    pub theta: HyperParams,
    pub prior_variance: f64,
}

/// Position of one component inside the composed state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockLayout {
    pub component: Component,
    pub offset: usize,
    pub dim: usize,
}

impl ModelSpec {
    pub fn new(m1: usize, m2: usize, period: usize, m3: usize) -> Self {
        ModelSpec {
            m1,
            m2,
            period,
            m3,
            theta: HyperParams {
                ar_pacs: vec![0.0; m3],
                ..HyperParams::default()
            },
            prior_variance: DIFFUSE_VARIANCE,
        }
    }

    pub fn trend(order: usize) -> Self {
        ModelSpec::new(order, 0, 12, 0)
    }

    pub fn with_seasonal(mut self, period: usize) -> Self {
        self.m2 = 1;
        self.period = period;
        self
    }

    pub fn with_ar(mut self, order: usize) -> Self {
        self.m3 = order;
        self.theta.ar_pacs = vec![0.0; order];
        self
    }

    pub fn with_theta(mut self, theta: HyperParams) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m1 > 2 {
            return Err(Error::InvalidSpec(format!(
                "trend order m1 = {} not supported",
                self.m1
            )));
        }
        if self.m2 > 1 {
            return Err(Error::InvalidSpec(format!(
                "seasonal order m2 = {} not supported",
                self.m2
            )));
        }
        if self.m2 == 1 && self.period < 2 {
            return Err(Error::InvalidSpec(format!(
                "seasonal period must be at least 2, got {}",
                self.period
            )));
        }
        if self.m1 == 0 && self.m2 == 0 && self.m3 == 0 {
            return Err(Error::InvalidSpec("model has no active component".into()));
        }
        if self.theta.ar_pacs.len() != self.m3 {
            return Err(Error::InvalidSpec(format!(
                "{} partial autocorrelations supplied for AR order {}",
                self.theta.ar_pacs.len(),
                self.m3
            )));
        }
        if !(self.prior_variance >= 0.0) || !self.prior_variance.is_finite() {
            return Err(Error::InvalidSpec(
                "prior variance must be finite and nonnegative".into(),
            ));
        }
        self.theta.validate()
    }

    pub fn active_components(&self) -> Vec<Component> {
        let mut out = Vec::with_capacity(3);
        if self.m1 > 0 {
            out.push(Component::Trend);
        }
        if self.m2 > 0 {
            out.push(Component::Seasonal);
        }
        if self.m3 > 0 {
            out.push(Component::Ar);
        }
        out
    }

    /// `k = m1 + (period - 1)·m2 + m3`.
    pub fn state_dim(&self) -> usize {
        self.m1 + (self.period.saturating_sub(1)) * self.m2 + self.m3
    }

    pub fn layout(&self) -> Vec<BlockLayout> {
        let mut offset = 0;
        self.active_components()
            .into_iter()
            .map(|component| {
                let dim = match component {
                    Component::Trend => self.m1,
                    Component::Seasonal => self.period - 1,
                    Component::Ar => self.m3,
                };
                let block = BlockLayout {
                    component,
                    offset,
                    dim,
                };
                offset += dim;
                block
            })
            .collect()
    }

    pub fn variance_of(&self, component: Component) -> f64 {
        match component {
            Component::Trend => self.theta.tau1_sq,
            Component::Seasonal => self.theta.tau2_sq,
            Component::Ar => self.theta.tau3_sq,
        }
    }
}

/// Block-diagonal composition of the active components of `spec`.
pub fn compose(spec: &ModelSpec) -> Result<StateSpaceModel> {
    spec.validate()?;
    let mut blocks = Vec::with_capacity(3);
    if spec.m1 > 0 {
        blocks.push(build_trend(spec.m1, spec.theta.tau1_sq)?);
    }
    if spec.m2 > 0 {
        blocks.push(build_seasonal(spec.period, spec.theta.tau2_sq)?);
    }
    if spec.m3 > 0 {
        blocks.push(build_ar(
            &spec.theta.ar_coefficients()?,
            spec.theta.tau3_sq,
        )?);
    }
    let k: usize = blocks.iter().map(Block::dim).sum();
    let m = blocks.len();
    let f = Matrix::block_diag(&blocks.iter().map(|b| &b.f).collect::<Vec<_>>());
    let mut g = Matrix::zeros(k, m);
    let mut h = Vec::with_capacity(k);
    let mut offset = 0;
    for (c, b) in blocks.iter().enumerate() {
        for (i, gv) in b.g.iter().enumerate() {
            g[(offset + i, c)] = *gv;
        }
        h.extend_from_slice(&b.h);
        offset += b.dim();
    }
    let q = Matrix::from_diag(&blocks.iter().map(|b| b.tau_sq).collect::<Vec<_>>());
    StateSpaceModel::new(
        f,
        g,
        h,
        q,
        spec.theta.sigma_sq,
        Vector::zeros(k),
        Matrix::from_diag(&vec![spec.prior_variance; k]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{predict_horizon, FilterState};
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Durand–Kerner roots of `zᵐ - a₁zᵐ⁻¹ - … - aₘ`; used only as an
    /// independent check on the Schur–Cohn implementation.
    fn companion_eigenvalues(coeffs: &[f64]) -> Vec<Complex64> {
        let m = coeffs.len();
        let poly = |z: Complex64| {
            let mut v = Complex64::new(1.0, 0.0);
            for a in coeffs {
                v = v * z - a;
            }
            v
        };
        let seed = Complex64::new(0.4, 0.9);
        let mut roots: Vec<Complex64> = (0..m).map(|i| seed.powu(i as u32)).collect();
        for _ in 0..2000 {
            let prev = roots.clone();
            for i in 0..m {
                let denom: Complex64 = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| roots[i] - roots[j])
                    .product();
                let ri = roots[i];
                roots[i] = ri - poly(ri) / denom;
            }
            if roots.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15) {
                break;
            }
        }
        roots
    }

    #[test]
    fn trend_blocks() {
        let b = build_trend(2, 0.1).unwrap();
        assert_eq!(
            b.f,
            Matrix::from_rows(&[&[2.0, -1.0], &[1.0, 0.0]]).unwrap()
        );
        assert_eq!(b.g, vec![1.0, 0.0]);
        assert_eq!(b.h, vec![1.0, 0.0]);
        assert_eq!(build_trend(1, 0.1).unwrap().f, Matrix::identity(1));
        assert_eq!(build_trend(3, 0.1).unwrap_err().code(), "E_INVALID_SPEC");
    }

    #[test]
    fn zero_noise_first_order_trend_has_flat_horizon_variance() {
        let model = build_trend(1, 0.0).unwrap().into_model(1.0, 1.0).unwrap();
        let s = FilterState {
            mean: vec![1.0].into(),
            cov: Matrix::from_diag(&[0.3]),
            time: 0,
            cond: 0,
        };
        let hp = predict_horizon(&model, &s, 10).unwrap();
        assert!(hp.obs_var.iter().all(|&v| v == 1.3));
    }

    #[test]
    fn seasonal_blocks() {
        let b = build_seasonal(12, 0.5).unwrap();
        assert_eq!(b.dim(), 11);
        assert!(b.f.row_slice(0).iter().all(|&v| v == -1.0));
        for i in 1..11 {
            assert_eq!(b.f[(i, i - 1)], 1.0);
            assert_eq!(b.f.row_slice(i).iter().sum::<f64>(), 1.0);
        }
        assert_eq!(
            build_seasonal(2, 0.5).unwrap().f,
            Matrix::from_rows(&[&[-1.0]]).unwrap()
        );
        assert_eq!(build_seasonal(1, 0.5).unwrap_err().code(), "E_INVALID_SPEC");
    }

    #[test]
    fn noiseless_seasonal_sums_to_zero_over_each_period() {
        let b = build_seasonal(12, 0.0).unwrap();
        let mut x: Vec<f64> = (0..11).map(|i| (i as f64 * 1.7).sin() * 3.0).collect();
        let mut values = Vec::new();
        for _ in 0..36 {
            x = b.f.mul_vec(&x).unwrap().into_inner();
            values.push(x[0]);
        }
        // the first generated value closes the initial window; from there on
        // every 12 consecutive values sum to zero
        for start in 0..values.len() - 12 {
            let s: f64 = values[start..start + 12].iter().sum();
            assert!(s.abs() < 1e-12, "window {start}: {s}");
        }
    }

    #[test]
    fn ar_blocks() {
        let b = build_ar(&[0.5], 1.0).unwrap();
        assert_eq!(b.f, Matrix::from_rows(&[&[0.5]]).unwrap());
        let model = b.into_model(1.0, 1.0).unwrap();
        let s = FilterState {
            mean: vec![1.0].into(),
            cov: Matrix::from_diag(&[0.0]),
            time: 0,
            cond: 0,
        };
        let hp = predict_horizon(&model, &s, 8).unwrap();
        for (j, m) in hp.obs_mean.iter().enumerate() {
            assert!((m - 0.5f64.powi(j as i32 + 1)).abs() < 1e-15);
        }
        assert_eq!(build_ar(&[1.0], 1.0).unwrap_err().code(), "E_NONSTATIONARY");
        assert_eq!(
            build_ar(&[2.0, -1.0], 1.0).unwrap_err().code(),
            "E_NONSTATIONARY"
        );
    }

    #[test]
    fn ar2_with_complex_roots_is_accepted() {
        // z² - 1.5 z + 0.9: complex pair of modulus sqrt(0.9)
        let b = build_ar(&[1.5, -0.9], 1.0).unwrap();
        assert_eq!(
            b.f,
            Matrix::from_rows(&[&[1.5, -0.9], &[1.0, 0.0]]).unwrap()
        );
        let radius = spectral_radius(&[1.5, -0.9]);
        assert!((radius - 0.9f64.sqrt()).abs() < 1e-12);
        let roots = companion_eigenvalues(&[1.5, -0.9]);
        assert!(roots
            .iter()
            .all(|z| (z.norm() - 0.9f64.sqrt()).abs() < 1e-10));
    }

    #[test]
    fn pacs_simple_cases() {
        assert_eq!(pacs_to_ar(&[0.3]).unwrap(), vec![0.3]);
        assert_eq!(pacs_to_ar(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(pacs_to_ar(&[0.2, 1.0]).unwrap_err().code(), "E_INVALID_PAC");
        assert_eq!(pacs_to_ar(&[-1.5]).unwrap_err().code(), "E_INVALID_PAC");
    }

    #[test]
    fn compose_dimensions_and_noise() {
        let spec = ModelSpec::trend(2)
            .with_seasonal(12)
            .with_ar(2)
            .with_theta(HyperParams {
                tau1_sq: 0.1,
                tau2_sq: 0.2,
                tau3_sq: 0.3,
                ar_pacs: vec![0.5, -0.2],
                sigma_sq: 2.0,
            });
        let model = compose(&spec).unwrap();
        assert_eq!(model.state_dim(), 15);
        assert_eq!(model.q(), &Matrix::from_diag(&[0.1, 0.2, 0.3]));
        assert_eq!(model.r(), 2.0);

        let trend = compose(&ModelSpec::trend(2).with_theta(HyperParams {
            tau1_sq: 0.4,
            sigma_sq: 3.0,
            ..HyperParams::default()
        }))
        .unwrap();
        let block = build_trend(2, 0.4)
            .unwrap()
            .into_model(3.0, DIFFUSE_VARIANCE)
            .unwrap();
        assert_eq!(trend, block);

        assert_eq!(
            compose(&ModelSpec::new(1, 1, 12, 0)).unwrap().state_dim(),
            12
        );
        assert_eq!(
            compose(&ModelSpec::new(0, 0, 12, 0)).unwrap_err().code(),
            "E_INVALID_SPEC"
        );
    }

    #[test]
    fn layout_offsets() {
        let spec = ModelSpec::new(2, 1, 4, 2);
        let layout = spec.layout();
        assert_eq!(
            layout,
            vec![
                BlockLayout {
                    component: Component::Trend,
                    offset: 0,
                    dim: 2
                },
                BlockLayout {
                    component: Component::Seasonal,
                    offset: 2,
                    dim: 3
                },
                BlockLayout {
                    component: Component::Ar,
                    offset: 5,
                    dim: 2
                },
            ]
        );
    }

    fn any_spec() -> impl Strategy<Value = ModelSpec> {
        (0usize..=2, 0usize..=1, 2usize..=13, 0usize..=3)
            .prop_filter("active", |(m1, m2, _, m3)| m1 + m2 + m3 > 0)
            .prop_map(|(m1, m2, period, m3)| ModelSpec::new(m1, m2, period, m3))
    }

    proptest! {
        #[test]
        fn compose_dimension_law(spec in any_spec()) {
            let model = compose(&spec).unwrap();
            prop_assert_eq!(model.state_dim(), spec.m1 + (spec.period - 1) * spec.m2 + spec.m3);
        }

        #[test]
        fn observation_row_sums_component_heads(spec in any_spec(), seed in prop::collection::vec(-5.0f64..5.0, 30)) {
            let model = compose(&spec).unwrap();
            let x = &seed[..model.state_dim()];
            let heads: f64 = spec.layout().iter().map(|b| x[b.offset]).sum();
            prop_assert!((crate::linalg::dot(model.h(), x) - heads).abs() < 1e-12);
        }

        #[test]
        fn pacs_round_trip(pacs in prop::collection::vec(-0.98f64..0.98, 1..6)) {
            let ar = pacs_to_ar(&pacs).unwrap();
            let back = ar_to_pacs(&ar).unwrap();
            for (a, b) in pacs.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn pacs_give_stationary_companions(pacs in prop::collection::vec(-0.95f64..0.95, 5)) {
            let ar = pacs_to_ar(&pacs).unwrap();
            let roots = companion_eigenvalues(&ar);
            prop_assert!(roots.iter().all(|z| z.norm() < 1.0), "{:?}", roots);
            prop_assert!(build_ar(&ar, 1.0).is_ok());
        }

        #[test]
        fn build_ar_rejects_exactly_unit_radius(coeffs in prop::collection::vec(-2.0f64..2.0, 1..4)) {
            let radius = companion_eigenvalues(&coeffs).iter().map(|z| z.norm()).fold(0.0, f64::max);
            // the root solver is only trusted away from the boundary
            prop_assume!((radius - 1.0).abs() > 1e-6);
            prop_assert_eq!(build_ar(&coeffs, 1.0).is_ok(), radius < 1.0 - STATIONARITY_MARGIN);
            prop_assert!((spectral_radius(&coeffs) - radius).abs() < 1e-6);
        }
    }
}
