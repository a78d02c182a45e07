//! Terminal noise covariance and effort-weighted controllability Gramian,
//! continuous (Van Loan and quadrature) and zero-order-hold discrete.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{expm, spectral_norm, symmetrize, Matrix, Quadrature, SpdMatrix, Vector};
use crate::model::{EffortMetric, ModelSpec};

/// Largest `‖A‖₂·T` accepted by a single block exponential.
pub const MAX_NORM_HORIZON: f64 = 200.0;
/// Step-size rule of thumb: warn when `dt > DT_RULE / ‖A‖₂`.
pub const DT_RULE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GramianMethod {
    VanLoan,
    Quadrature,
    DiscreteSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Horizon {
    Continuous { t: f64 },
    Discrete { steps: usize, dt: f64 },
}

/// `V` (terminal noise covariance) and `W` (effort-weighted controllability
/// Gramian) for one horizon.
#[derive(Debug, Clone, Serialize)]
pub struct GramianPair {
    #[serde(serialize_with = "ser_spd")]
    pub v: SpdMatrix,
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub w: Matrix,
    pub horizon: Horizon,
    pub method: GramianMethod,
}

fn ser_spd<S: serde::Serializer>(m: &SpdMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    crate::report::ser_matrix(m.as_matrix(), s)
}

impl GramianPair {
    fn new(v: Matrix, w: Matrix, horizon: Horizon, method: GramianMethod) -> Result<Self> {
        let v = SpdMatrix::new(symmetrize(&v))
            .map_err(|e| Error::Numerical(format!("terminal covariance: {e}")))?;
        Ok(GramianPair { v, w: symmetrize(&w), horizon, method })
    }

    /// `wᵀVw`.
    pub fn noise_variance(&self, w: &Vector) -> f64 {
        self.v.quad_form(w)
    }

    /// `wᵀWw`.
    pub fn reach(&self, w: &Vector) -> f64 {
        w.dot(&(&self.w * w))
    }
}

/// `∫₀ᵗ e^{Aτ} Q e^{Aᵀτ} dτ` from one exponential of `[[−A, Q], [0, Aᵀ]]·t`.
pub fn van_loan_gramian(a: &Matrix, q: &Matrix, t: f64) -> Result<Matrix> {
    let n = a.nrows();
    let mut c = Matrix::zeros(2 * n, 2 * n);
    c.view_mut((0, 0), (n, n)).copy_from(&(-a));
    c.view_mut((0, n), (n, n)).copy_from(q);
    c.view_mut((n, n), (n, n)).copy_from(&a.transpose());
    let f = expm(&(c * t))?;
    let f12 = f.view((0, n), (n, n));
    let f22 = f.view((n, n), (n, n));
    Ok(symmetrize(&(f22.transpose() * f12)))
}

fn check_horizon(model: &ModelSpec) -> Result<()> {
    let norm_t = spectral_norm(model.a()) * model.horizon();
    if norm_t > MAX_NORM_HORIZON {
        return Err(Error::Horizon { norm_t, limit: MAX_NORM_HORIZON });
    }
    Ok(())
}

/// Input weight `B M⁺ Bᵀ` whose Gramian is `W`.
fn control_weight(b: &Matrix, effort: &EffortMetric) -> Matrix {
    symmetrize(&(b * &effort.m_pinv * b.transpose()))
}

pub fn continuous_gramians(model: &ModelSpec) -> Result<GramianPair> {
    check_horizon(model)?;
    let effort = model.effort_metric()?;
    let q_w = control_weight(model.b(), &effort);
    let (v, w) = rayon::join(
        || van_loan_gramian(model.a(), model.sigma().as_matrix(), model.horizon()),
        || van_loan_gramian(model.a(), &q_w, model.horizon()),
    );
    GramianPair::new(
        v?,
        w?,
        Horizon::Continuous { t: model.horizon() },
        GramianMethod::VanLoan,
    )
}

/// Same integrals by composite Gauss-Legendre quadrature.
pub fn quadrature_gramians(model: &ModelSpec, quad: Quadrature) -> Result<GramianPair> {
    if quad.panels * quad.order < 8 {
        return Err(Error::Config("quadrature needs at least 8 nodes".into()));
    }
    let n = model.state_dim();
    let effort = model.effort_metric()?;
    let q_w = control_weight(model.b(), &effort);
    let sigma = model.sigma().as_matrix();
    let mut v = Matrix::zeros(n, n);
    let mut w = Matrix::zeros(n, n);
    for (tau, weight) in quad.points(0.0, model.horizon()) {
        let e = expm(&(model.a() * tau))?;
        v += &e * sigma * e.transpose() * weight;
        w += &e * &q_w * e.transpose() * weight;
    }
    GramianPair::new(
        v,
        w,
        Horizon::Continuous { t: model.horizon() },
        GramianMethod::Quadrature,
    )
}

/// Zero-order-hold companion `X_{k+1} = A_d X_k + B_d U_k + ξ_k`, `ξ_k ~ N(0, Σ_d)`.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteModel {
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub a_d: Matrix,
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub b_d: Matrix,
    #[serde(serialize_with = "ser_spd")]
    pub sigma_d: SpdMatrix,
    #[serde(serialize_with = "crate::report::ser_vector")]
    pub x0: Vector,
    pub dt: f64,
    pub steps: usize,
    /// Per-step effort weight; `B_dᵀΣ_d⁻¹B_d` unless a penalty is set.
    pub effort: EffortMetric,
    /// `B_dᵀΣ_d⁻¹B_d`, the per-step KL weight.
    #[serde(serialize_with = "crate::report::ser_matrix")]
    pub noise_metric: Matrix,
    /// `dt` exceeds the `0.2 / ‖A‖₂` rule of thumb.
    pub dt_warning: bool,
}

impl DiscreteModel {
    pub fn horizon(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn state_dim(&self) -> usize {
        self.a_d.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b_d.ncols()
    }
}

/// Resolves a step count from `T / dt`; the product must reproduce `T`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let ratio = horizon / dt;
    let steps = ratio.round();
    if steps < 1.0 || ((steps * dt) - horizon).abs() > 1e-12 * horizon.max(dt) {
        return Err(Error::Config(format!(
            "T / dt = {ratio} is not an integer step count"
        )));
    }
    Ok(steps as usize)
}

/// Largest step satisfying the sampling rule, or `None` when `A = 0`.
pub fn max_recommended_dt(a: &Matrix) -> Option<f64> {
    let norm = spectral_norm(a);
    (norm > 0.0).then(|| DT_RULE / norm)
}

pub fn zoh_discretize(model: &ModelSpec, dt: f64) -> Result<DiscreteModel> {
    let steps = step_count(model.horizon(), dt)?;
    let (n, m) = (model.state_dim(), model.input_dim());

    let mut block = Matrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(model.a());
    block.view_mut((0, n), (n, m)).copy_from(model.b());
    let e = expm(&(block * dt))?;
    let a_d = e.view((0, 0), (n, n)).into_owned();
    let b_d = e.view((0, n), (n, m)).into_owned();

    let sigma_d = van_loan_gramian(model.a(), model.sigma().as_matrix(), dt)?;
    let sigma_d = SpdMatrix::positive_definite(sigma_d)
        .map_err(|e| Error::Numerical(format!("per-step covariance: {e}")))?;
    let chol = sigma_d.as_matrix().clone().cholesky().expect("checked PD");
    let noise_metric = symmetrize(&(b_d.transpose() * chol.solve(&b_d)));
    let effort = match model.penalty() {
        Some(r) => EffortMetric::from_matrix(r.as_matrix() * dt)?,
        None => EffortMetric::from_matrix(noise_metric.clone())?,
    };
    let dt_warning = max_recommended_dt(model.a()).is_some_and(|limit| dt > limit);

    Ok(DiscreteModel {
        a_d,
        b_d,
        sigma_d,
        x0: model.x0().clone(),
        dt,
        steps,
        effort,
        noise_metric,
        dt_warning,
    })
}

/// `V_N = Σ A_d^j Σ_d A_d^jᵀ`, `W_N = Σ A_d^j B_d M⁺ B_dᵀ A_d^jᵀ` for `j < N`,
/// by the recursion `G ← A_d G A_dᵀ + Q`.
pub fn discrete_gramians(dm: &DiscreteModel) -> Result<GramianPair> {
    let n = dm.state_dim();
    let q_v = dm.sigma_d.as_matrix();
    let q_w = control_weight(&dm.b_d, &dm.effort);
    let a_t = dm.a_d.transpose();
    let mut v = Matrix::zeros(n, n);
    let mut w = Matrix::zeros(n, n);
    for _ in 0..dm.steps {
        v = &dm.a_d * &v * &a_t + q_v;
        w = &dm.a_d * &w * &a_t + &q_w;
    }
    GramianPair::new(
        v,
        w,
        Horizon::Discrete { steps: dm.steps, dt: dm.dt },
        GramianMethod::DiscreteSum,
    )
}
