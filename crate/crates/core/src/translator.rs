//! Energy-to-probability translation for terminal halfspace events.
//!
//! For `Y = wᵀX_T ~ N(m0 + δ, v)` the control only moves the mean, and the
//! cheapest way to move it by `δ` costs `δ² / (2 wᵀWw)`. Requiring the
//! halfspace probability to go from `p0` to `p1` fixes `δ = (z1 − z0)√v`, so
//!
//! ```text
//! E_min = (z1 − z0)² / (2 R²),   R² = wᵀWw / wᵀVw,
//! ```
//!
//! attained by the matched filter `u*(s) = β M⁺ Bᵀ e^{Aᵀ(T−s)} w`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian::{DiscreteModel, GramianPair};
use crate::linalg::{
    compensated_sum, expm, norm_cdf, norm_pdf, norm_quantile, Matrix, Quadrature, Vector,
};
use crate::model::ModelSpec;

/// `wᵀWw ≤ FEASIBILITY_TOL · wᵀVw` means no finite-energy shift along `w`.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Below this `|p1 − p0|` the quantile gap uses the first-order expansion at
/// the midpoint.
pub const GAP_CROSSOVER: f64 = 1e-8;

/// Terminal event `{wᵀX ≥ a}` or, for validation only, `{a ≤ wᵀX ≤ b}`.
#[derive(Debug, Clone, Serialize)]
pub struct EventSpec {
    #[serde(serialize_with = "crate::report::ser_vector")]
    w: Vector,
    a: f64,
    b: Option<f64>,
}

impl EventSpec {
    pub fn halfspace(w: Vector, a: f64) -> Result<Self> {
        Self::build(w, a, None)
    }

    pub fn interval(w: Vector, a: f64, b: f64) -> Result<Self> {
        Self::build(w, a, Some(b))
    }

    pub fn new(w: Vector, a: f64, b: Option<f64>) -> Result<Self> {
        Self::build(w, a, b)
    }

    fn build(w: Vector, a: f64, b: Option<f64>) -> Result<Self> {
        if !w.iter().all(|v| v.is_finite()) || w.norm() == 0.0 {
            return Err(Error::Domain("event direction w must be finite and nonzero".into()));
        }
        if a.is_nan() {
            return Err(Error::Domain("event threshold is NaN".into()));
        }
        if let Some(b) = b {
            if !(b > a) {
                return Err(Error::Domain(format!("interval needs b > a, got a={a}, b={b}")));
            }
        }
        Ok(EventSpec { w, a, b })
    }

    pub fn w(&self) -> &Vector {
        &self.w
    }
    pub fn lower(&self) -> f64 {
        self.a
    }
    pub fn upper(&self) -> Option<f64> {
        self.b
    }
    pub fn is_interval(&self) -> bool {
        self.b.is_some()
    }

    /// Same direction and width, different lower threshold.
    pub fn with_lower(&self, a: f64) -> Self {
        let b = self.b.map(|b| b - self.a + a);
        EventSpec { w: self.w.clone(), a, b }
    }

    /// Whether a terminal projection `y = wᵀx` lies in the event.
    #[inline]
    pub fn contains(&self, y: f64) -> bool {
        match self.b {
            None => y >= self.a,
            Some(b) => y >= self.a && y <= b,
        }
    }

    /// Probability of the event for `Y ~ N(mean, variance)`.
    pub fn probability(&self, mean: f64, variance: f64) -> f64 {
        let sd = variance.sqrt();
        match self.b {
            None => norm_cdf((mean - self.a) / sd),
            Some(b) => norm_cdf((b - mean) / sd) - norm_cdf((self.a - mean) / sd),
        }
    }
}

/// `wᵀ e^{AT} x0`.
pub fn terminal_mean(model: &ModelSpec, w: &Vector) -> Result<f64> {
    let phi = expm(&(model.a() * model.horizon()))?;
    Ok(w.dot(&(phi * model.x0())))
}

/// `wᵀ A_d^N x0`.
pub fn discrete_terminal_mean(dm: &DiscreteModel, w: &Vector) -> f64 {
    let mut x = dm.x0.clone();
    for _ in 0..dm.steps {
        x = &dm.a_d * x;
    }
    w.dot(&x)
}

fn checked_variance(gram: &GramianPair, w: &Vector) -> Result<f64> {
    let v = gram.noise_variance(w);
    if !(v > 0.0) {
        return Err(Error::Degenerate(format!("wᵀVw = {v:e}")));
    }
    Ok(v)
}

/// Uncontrolled terminal mean `m0` and event probability `p0`.
pub fn baseline_probability(
    model: &ModelSpec,
    gram: &GramianPair,
    event: &EventSpec,
) -> Result<(f64, f64)> {
    let v = checked_variance(gram, event.w())?;
    let m0 = terminal_mean(model, event.w())?;
    Ok((m0, event.probability(m0, v)))
}

/// Halfspace threshold `a` whose baseline probability is `p0`.
pub fn threshold_for_baseline(m0: f64, variance: f64, p0: f64) -> Result<f64> {
    let z0 = norm_quantile(p0)?;
    Ok(m0 - z0 * variance.sqrt())
}

/// `Φ⁻¹(p1) − Φ⁻¹(p0)` without cancellation for nearby probabilities.
pub fn quantile_gap(p0: f64, p1: f64) -> Result<f64> {
    let z0 = norm_quantile(p0)?;
    let z1 = norm_quantile(p1)?;
    if p1 == p0 {
        return Ok(0.0);
    }
    let dp = p1 - p0;
    if dp.abs() < GAP_CROSSOVER {
        let mid = norm_quantile(0.5 * (p0 + p1))?;
        Ok(dp / norm_pdf(mid))
    } else {
        Ok(z1 - z0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    pub r_squared: f64,
}

pub fn feasibility_check(gram: &GramianPair, w: &Vector) -> Result<Feasibility> {
    if w.norm() == 0.0 {
        return Err(Error::Domain("direction w must be nonzero".into()));
    }
    let v = checked_variance(gram, w)?;
    let reach = gram.reach(w);
    Ok(Feasibility {
        feasible: reach > FEASIBILITY_TOL * v,
        r_squared: (reach / v).max(0.0),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationResult {
    pub r_squared: f64,
    /// `wᵀVw`
    pub v: f64,
    /// `wᵀWw`
    #[serde(rename = "wWw")]
    pub w_w: f64,
    pub m0: f64,
    pub p0: f64,
    pub p1: f64,
    pub z0: f64,
    pub z1: f64,
    /// `z1 − z0`, cancellation-safe.
    pub gap: f64,
    /// Infinite when infeasible.
    pub e_min: f64,
    pub beta: f64,
    pub feasible: bool,
}

impl TranslationResult {
    /// Mean shift `δ = β wᵀWw` the matched filter produces.
    pub fn mean_shift(&self) -> f64 {
        if self.gap == 0.0 {
            0.0
        } else {
            self.beta * self.w_w
        }
    }
}

/// The equality from scalar ingredients: variance `v = wᵀVw`, reach
/// `wᵀWw`, baseline mean `m0`.
pub fn translate_parts(v: f64, w_w: f64, m0: f64, p0: f64, p1: f64) -> Result<TranslationResult> {
    let z0 = norm_quantile(p0)?;
    let z1 = norm_quantile(p1)?;
    if !(v > 0.0) {
        return Err(Error::Degenerate(format!("wᵀVw = {v:e}")));
    }
    let gap = quantile_gap(p0, p1)?;
    let r_squared = (w_w / v).max(0.0);
    let reachable = w_w > FEASIBILITY_TOL * v;
    let (e_min, beta, feasible) = if gap == 0.0 {
        (0.0, 0.0, true)
    } else if !reachable {
        (f64::INFINITY, gap.signum() * f64::INFINITY, false)
    } else {
        (gap * gap / (2.0 * r_squared), gap * v.sqrt() / w_w, true)
    };
    Ok(TranslationResult { r_squared, v, w_w, m0, p0, p1, z0, z1, gap, e_min, beta, feasible })
}

pub fn translate(
    model: &ModelSpec,
    gram: &GramianPair,
    event: &EventSpec,
    p0: f64,
    p1: f64,
) -> Result<TranslationResult> {
    if event.is_interval() {
        return Err(Error::Domain(
            "the closed-form translation covers halfspace events only".into(),
        ));
    }
    let w = event.w();
    let v = checked_variance(gram, w)?;
    let m0 = terminal_mean(model, w)?;
    translate_parts(v, gram.reach(w), m0, p0, p1)
}

/// Largest (raise) or smallest (lower) probability reachable from `p0` with
/// energy `energy`: `Φ(z0 ± √(2 E R²))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    Raise,
    Lower,
}

pub fn achievable_p1(
    p0: f64,
    r_squared: f64,
    energy: f64,
    direction: ShiftDirection,
) -> Result<f64> {
    let z0 = norm_quantile(p0)?;
    if !(energy >= 0.0) {
        return Err(Error::Domain(format!("energy budget must be >= 0, got {energy}")));
    }
    if energy == 0.0 {
        return Ok(p0);
    }
    if !(r_squared > FEASIBILITY_TOL) {
        return Err(Error::Infeasible { r_squared });
    }
    let dz = (2.0 * energy * r_squared).sqrt();
    Ok(match direction {
        ShiftDirection::Raise => norm_cdf(z0 + dz),
        ShiftDirection::Lower => norm_cdf(z0 - dz),
    })
}

/// Deterministic control law.
#[derive(Clone)]
pub enum ControlLaw {
    /// `u(s) = β M⁺ Bᵀ e^{Aᵀ(T−s)} w` on `[0, T]`.
    ContinuousMatched {
        beta: f64,
        direction: Vector,
        /// `M⁺ Bᵀ`
        gain: Matrix,
        a: Matrix,
        horizon: f64,
        /// Effort weight `M`.
        effort: Matrix,
        /// `wᵀWw` for the closed-form energy.
        reach: f64,
    },
    /// `U_k = β M⁺ B_dᵀ (A_d^{N−1−k})ᵀ w`, `k = 0..N`.
    DiscreteMatched {
        beta: f64,
        direction: Vector,
        inputs: Vec<Vector>,
        effort: Matrix,
    },
    /// Arbitrary deterministic open-loop input on `[0, horizon]`.
    OpenLoop {
        input_dim: usize,
        horizon: f64,
        f: Arc<dyn Fn(f64) -> Vector + Send + Sync>,
    },
    /// `u = −K x`; not deterministic in the path-measure sense.
    StateFeedback { gain: Matrix },
}

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlLaw::ContinuousMatched { beta, horizon, .. } => f
                .debug_struct("ContinuousMatched")
                .field("beta", beta)
                .field("horizon", horizon)
                .finish_non_exhaustive(),
            ControlLaw::DiscreteMatched { beta, inputs, .. } => f
                .debug_struct("DiscreteMatched")
                .field("beta", beta)
                .field("steps", &inputs.len())
                .finish_non_exhaustive(),
            ControlLaw::OpenLoop { input_dim, horizon, .. } => f
                .debug_struct("OpenLoop")
                .field("input_dim", input_dim)
                .field("horizon", horizon)
                .finish_non_exhaustive(),
            ControlLaw::StateFeedback { gain } => {
                f.debug_struct("StateFeedback").field("gain", gain).finish()
            }
        }
    }
}

impl ControlLaw {
    pub fn open_loop(
        input_dim: usize,
        horizon: f64,
        f: impl Fn(f64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        ControlLaw::OpenLoop { input_dim, horizon, f: Arc::new(f) }
    }

    pub fn zero(input_dim: usize, horizon: f64) -> Self {
        Self::open_loop(input_dim, horizon, move |_| Vector::zeros(input_dim))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ControlLaw::ContinuousMatched { .. } => "continuous-matched",
            ControlLaw::DiscreteMatched { .. } => "discrete-matched",
            ControlLaw::OpenLoop { .. } => "open-loop",
            ControlLaw::StateFeedback { .. } => "state-feedback",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ControlLaw::ContinuousMatched { gain, .. } => gain.nrows(),
            ControlLaw::DiscreteMatched { effort, .. } => effort.nrows(),
            ControlLaw::OpenLoop { input_dim, .. } => *input_dim,
            ControlLaw::StateFeedback { gain } => gain.nrows(),
        }
    }

    /// Continuous-time input at time `s`; `None` for discrete or feedback laws.
    pub fn eval(&self, s: f64) -> Result<Option<Vector>> {
        match self {
            ControlLaw::ContinuousMatched { beta, direction, gain, a, horizon, .. } => {
                if *beta == 0.0 {
                    return Ok(Some(Vector::zeros(gain.nrows())));
                }
                let phi_t = expm(&(a.transpose() * (horizon - s)))?;
                Ok(Some(gain * (phi_t * direction) * *beta))
            }
            ControlLaw::OpenLoop { f, .. } => Ok(Some(f(s))),
            ControlLaw::DiscreteMatched { .. } | ControlLaw::StateFeedback { .. } => Ok(None),
        }
    }

    /// Closed-form energy where one exists: `β² wᵀWw / 2` (continuous) or
    /// `Σ ½ U_kᵀ M U_k` (discrete).
    pub fn analytic_energy(&self) -> Option<f64> {
        match self {
            ControlLaw::ContinuousMatched { beta, reach, .. } => {
                Some(if *beta == 0.0 { 0.0 } else { 0.5 * beta * beta * reach })
            }
            ControlLaw::DiscreteMatched { inputs, effort, .. } => Some(discrete_energy(inputs, effort)),
            _ => None,
        }
    }
}

/// `Σ ½ U_kᵀ M U_k`.
pub fn discrete_energy(inputs: &[Vector], effort: &Matrix) -> f64 {
    compensated_sum(inputs.iter().map(|u| 0.5 * u.dot(&(effort * u))))
}

pub fn synthesize_continuous(
    model: &ModelSpec,
    event: &EventSpec,
    result: &TranslationResult,
) -> Result<ControlLaw> {
    if !result.feasible {
        return Err(Error::Infeasible { r_squared: result.r_squared });
    }
    let effort = model.effort_metric()?;
    Ok(ControlLaw::ContinuousMatched {
        beta: result.beta,
        direction: event.w().clone(),
        gain: &effort.m_pinv * model.b().transpose(),
        a: model.a().clone(),
        horizon: model.horizon(),
        effort: effort.m,
        reach: result.w_w,
    })
}

/// Weights `g_k = B_dᵀ (A_d^{N−1−k})ᵀ w` of the discrete mean shift `δ = Σ g_kᵀ U_k`.
pub fn discrete_shift_weights(dm: &DiscreteModel, w: &Vector) -> Vec<Vector> {
    let mut h = w.clone();
    let a_t = dm.a_d.transpose();
    let b_t = dm.b_d.transpose();
    let mut out = vec![Vector::zeros(dm.input_dim()); dm.steps];
    for k in (0..dm.steps).rev() {
        out[k] = &b_t * &h;
        h = &a_t * h;
    }
    out
}

/// Discrete mean shift `Σ wᵀ A_d^{N−1−k} B_d U_k`.
pub fn discrete_mean_shift(dm: &DiscreteModel, w: &Vector, inputs: &[Vector]) -> f64 {
    let g = discrete_shift_weights(dm, w);
    compensated_sum(g.iter().zip(inputs).map(|(gk, uk)| gk.dot(uk)))
}

pub fn synthesize_discrete(
    dgram: &GramianPair,
    dm: &DiscreteModel,
    event: &EventSpec,
    p0: f64,
    p1: f64,
) -> Result<(TranslationResult, ControlLaw)> {
    if event.is_interval() {
        return Err(Error::Domain(
            "the closed-form translation covers halfspace events only".into(),
        ));
    }
    let w = event.w();
    let v = checked_variance(dgram, w)?;
    let m0 = discrete_terminal_mean(dm, w);
    let result = translate_parts(v, dgram.reach(w), m0, p0, p1)?;
    if !result.feasible {
        return Err(Error::Infeasible { r_squared: result.r_squared });
    }
    let inputs: Vec<Vector> = if result.beta == 0.0 {
        vec![Vector::zeros(dm.input_dim()); dm.steps]
    } else {
        discrete_shift_weights(dm, w)
            .into_iter()
            .map(|g| &dm.effort.m_pinv * g * result.beta)
            .collect()
    };
    let law = ControlLaw::DiscreteMatched {
        beta: result.beta,
        direction: w.clone(),
        inputs,
        effort: dm.effort.m.clone(),
    };
    Ok((result, law))
}

/// `δ = ∫₀ᵀ wᵀ e^{A(T−s)} B u(s) ds` by quadrature, for any continuous law.
pub fn terminal_mean_shift(
    model: &ModelSpec,
    law: &ControlLaw,
    w: &Vector,
    quad: Quadrature,
) -> Result<f64> {
    let t = model.horizon();
    let mut acc = Vec::with_capacity(quad.panels * quad.order);
    for (s, weight) in quad.points(0.0, t) {
        let u = law.eval(s)?.ok_or_else(|| {
            Error::UnsupportedLaw(format!("{} has no continuous-time input", law.kind()))
        })?;
        let phi = expm(&(model.a() * (t - s)))?;
        acc.push(weight * w.dot(&(phi * (model.b() * u))));
    }
    Ok(compensated_sum(acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gramian::{continuous_gramians, discrete_gramians, zoh_discretize};
    use crate::model::fixtures;

    fn scalar_event() -> EventSpec {
        EventSpec::halfspace(Vector::from_vec(vec![1.0]), 0.0).unwrap()
    }

    fn drone_event(a: f64) -> EventSpec {
        EventSpec::halfspace(fixtures::drone_direction(), a).unwrap()
    }

    #[test]
    fn event_validation() {
        assert!(EventSpec::halfspace(Vector::zeros(2), 0.0).is_err());
        assert!(EventSpec::interval(Vector::from_vec(vec![1.0]), 1.0, 1.0).is_err());
        let ev = EventSpec::interval(Vector::from_vec(vec![1.0]), -1.0, 1.0).unwrap();
        assert!(ev.contains(0.0) && !ev.contains(1.5));
        let shifted = ev.with_lower(0.0);
        assert_eq!(shifted.upper(), Some(2.0));
    }

    #[test]
    fn scalar_baseline_is_half() {
        let model = fixtures::scalar();
        let g = continuous_gramians(&model).unwrap();
        let (m0, p0) = baseline_probability(&model, &g, &scalar_event()).unwrap();
        assert_eq!(m0, 0.0);
        assert!((p0 - 0.5).abs() < 1e-15);
        let far = EventSpec::halfspace(Vector::from_vec(vec![1.0]), -1e3).unwrap();
        let (_, p) = baseline_probability(&model, &g, &far).unwrap();
        assert!(p > 1.0 - 1e-15);
    }

    #[test]
    fn drone_calibrated_baseline() {
        let model = fixtures::drone();
        let g = continuous_gramians(&model).unwrap();
        let z0 = norm_quantile(0.7).unwrap();
        let a = -z0 * (1.0f64 / 3.0).sqrt();
        let (m0, p0) = baseline_probability(&model, &g, &drone_event(a)).unwrap();
        assert_eq!(m0, 0.0);
        assert!((p0 - 0.7).abs() < 1e-12);
        assert!((threshold_for_baseline(0.0, 1.0 / 3.0, 0.7).unwrap() - a).abs() < 1e-15);
    }

    #[test]
    fn terminal_mean_follows_drift() {
        let model = ModelSpec::new(
            fixtures::drone().a().clone(),
            fixtures::drone().b().clone(),
            Matrix::identity(2, 2) * 0.25,
            Vector::from_vec(vec![1.0, 2.0]),
            1.5,
            None,
        )
        .unwrap();
        // position + velocity * T
        assert!((terminal_mean(&model, &fixtures::drone_direction()).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn scalar_translation() {
        let model = fixtures::scalar();
        let g = continuous_gramians(&model).unwrap();
        let p1 = norm_cdf(1.0);
        let r = translate(&model, &g, &scalar_event(), 0.5, p1).unwrap();
        assert!((r.r_squared - 1.0).abs() < 1e-14);
        assert!((r.gap - 1.0).abs() < 1e-14);
        assert!((r.e_min - 0.5).abs() < 1e-12);
        assert!((r.beta - 1.0).abs() < 1e-12);
        assert!(r.feasible);
    }

    #[test]
    fn drone_translation() {
        let model = fixtures::drone();
        let g = continuous_gramians(&model).unwrap();
        let r = translate(&model, &g, &drone_event(0.0), 0.7, 0.9).unwrap();
        assert!((r.r_squared - 0.25).abs() < 1e-10);
        let gap = 1.2815515655446004 - 0.5244005127080407;
        assert!((r.e_min - gap * gap / 0.5).abs() < 1e-10);
        assert!((r.e_min - 1.146_555_433_623_021_7).abs() < 1e-12);
    }

    #[test]
    fn equal_probabilities_cost_nothing() {
        let model = fixtures::drone();
        let g = continuous_gramians(&model).unwrap();
        let r = translate(&model, &g, &drone_event(0.0), 0.3, 0.3).unwrap();
        assert_eq!(r.e_min, 0.0);
        assert_eq!(r.beta, 0.0);
        let law = synthesize_continuous(&model, &drone_event(0.0), &r).unwrap();
        assert_eq!(law.eval(0.3).unwrap().unwrap().norm(), 0.0);
        assert_eq!(law.analytic_energy(), Some(0.0));
    }

    #[test]
    fn rejects_bad_probabilities_and_intervals() {
        let model = fixtures::scalar();
        let g = continuous_gramians(&model).unwrap();
        for (p0, p1) in [(0.0, 0.5), (0.5, 1.0), (-1.0, 0.5)] {
            let err = translate(&model, &g, &scalar_event(), p0, p1).unwrap_err();
            assert!(matches!(err, Error::Domain(_)));
            assert_eq!(err.exit_code(), 2);
        }
        let ev = EventSpec::interval(Vector::from_vec(vec![1.0]), -1.0, 1.0).unwrap();
        assert!(translate(&model, &g, &ev, 0.5, 0.6).is_err());
    }

    #[test]
    fn infeasible_direction_gives_infinite_sentinel() {
        let model = ModelSpec::new(
            Matrix::identity(2, 2) * -1.0,
            Matrix::from_column_slice(2, 1, &[1.0, 0.0]),
            Matrix::identity(2, 2),
            Vector::zeros(2),
            1.0,
            None,
        )
        .unwrap();
        let g = continuous_gramians(&model).unwrap();
        let w = Vector::from_vec(vec![0.0, 1.0]);
        let f = feasibility_check(&g, &w).unwrap();
        assert!(!f.feasible);
        assert!(f.r_squared <= 1e-12);
        let ev = EventSpec::halfspace(w, 0.0).unwrap();
        let r = translate(&model, &g, &ev, 0.5, 0.6).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.e_min, f64::INFINITY);
        assert!(matches!(synthesize_continuous(&model, &ev, &r), Err(Error::Infeasible { .. })));
        // Trivial query stays feasible.
        assert!(translate(&model, &g, &ev, 0.5, 0.5).unwrap().feasible);
    }

    #[test]
    fn feasibility_examples() {
        let g = continuous_gramians(&fixtures::drone()).unwrap();
        let f = feasibility_check(&g, &fixtures::drone_direction()).unwrap();
        assert!(f.feasible);
        assert!((f.r_squared - 0.25).abs() < 1e-10);
        let full = fixtures::drone().with_b(Matrix::identity(2, 2)).unwrap();
        let g = continuous_gramians(&full).unwrap();
        assert!(feasibility_check(&g, &fixtures::drone_direction()).unwrap().feasible);
    }

    #[test]
    fn gap_crossover_is_continuous() {
        let p0 = 0.37;
        // Just above and below the crossover the two branches agree closely.
        let above = quantile_gap(p0, p0 + 1.0000001 * GAP_CROSSOVER).unwrap();
        let below = quantile_gap(p0, p0 + 0.9999999 * GAP_CROSSOVER).unwrap();
        let slope = 1.0 / norm_pdf(norm_quantile(p0).unwrap());
        assert!((above / (1.0000001 * GAP_CROSSOVER) - slope).abs() / slope < 1e-6);
        assert!((below / (0.9999999 * GAP_CROSSOVER) - slope).abs() / slope < 1e-6);
        let direct = norm_quantile(p0 + 1e-9).unwrap() - norm_quantile(p0).unwrap();
        let safe = quantile_gap(p0, p0 + 1e-9).unwrap();
        assert!((direct - safe).abs() / safe < 1e-6);
        assert!(quantile_gap(0.2, 0.6).unwrap() > 0.0);
        assert!(quantile_gap(0.6, 0.2).unwrap() < 0.0);
    }

    #[test]
    fn achievable_probability_inverse() {
        let p = achievable_p1(0.5, 1.0, 0.5, ShiftDirection::Raise).unwrap();
        assert!((p - norm_cdf(1.0)).abs() < 1e-15);
        let p = achievable_p1(0.5, 1.0, 0.5, ShiftDirection::Lower).unwrap();
        assert!((p - norm_cdf(-1.0)).abs() < 1e-15);
        assert_eq!(achievable_p1(0.3, 0.25, 0.0, ShiftDirection::Raise).unwrap(), 0.3);
        assert!(matches!(
            achievable_p1(0.3, 0.0, 1.0, ShiftDirection::Raise),
            Err(Error::Infeasible { .. })
        ));
        assert!(achievable_p1(0.3, 0.25, -1.0, ShiftDirection::Raise).is_err());
    }

    #[test]
    fn scalar_matched_filter_is_constant() {
        let model = fixtures::scalar();
        let g = continuous_gramians(&model).unwrap();
        let r = translate(&model, &g, &scalar_event(), 0.5, norm_cdf(1.0)).unwrap();
        let law = synthesize_continuous(&model, &scalar_event(), &r).unwrap();
        for s in [0.0, 0.25, 0.9, 1.0] {
            assert!((law.eval(s).unwrap().unwrap()[0] - 1.0).abs() < 1e-12);
        }
        assert!((law.analytic_energy().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn drone_matched_filter_shape_and_energy() {
        let model = fixtures::drone();
        let g = continuous_gramians(&model).unwrap();
        let ev = drone_event(0.0);
        let r = translate(&model, &g, &ev, 0.7, 0.9).unwrap();
        let law = synthesize_continuous(&model, &ev, &r).unwrap();
        // M⁺Bᵀe^{Aᵀ(T−s)}w = σ² (T − s) for the double integrator.
        for s in [0.0, 0.3, 0.8] {
            let u = law.eval(s).unwrap().unwrap()[0];
            assert!((u - r.beta * 0.25 * (1.0 - s)).abs() < 1e-12 * r.beta.abs());
        }
        let e = law.analytic_energy().unwrap();
        assert!((e - r.e_min).abs() <= 1e-12 * r.e_min);
        let delta = r.mean_shift();
        assert!((delta - r.gap * r.v.sqrt()).abs() <= 1e-12 * delta);
        let delta_quad = terminal_mean_shift(&model, &law, ev.w(), Quadrature::default()).unwrap();
        assert!((delta_quad - delta).abs() < 1e-10 * delta);
    }

    #[test]
    fn scalar_discrete_synthesis() {
        let model = fixtures::scalar();
        let dm = zoh_discretize(&model, 0.1).unwrap();
        let dg = discrete_gramians(&dm).unwrap();
        let (r, law) = synthesize_discrete(&dg, &dm, &scalar_event(), 0.5, norm_cdf(1.0)).unwrap();
        assert!((r.e_min - 0.5).abs() < 1e-12);
        let ControlLaw::DiscreteMatched { inputs, .. } = &law else { panic!() };
        assert_eq!(inputs.len(), 10);
        for u in inputs {
            assert!((u[0] - 1.0).abs() < 1e-12);
        }
        assert!((law.analytic_energy().unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_step_discrete_is_one_gaussian_shift() {
        let model = fixtures::drone();
        let dm = zoh_discretize(&model, 1.0).unwrap();
        let dg = discrete_gramians(&dm).unwrap();
        let ev = drone_event(0.0);
        let (r, law) = synthesize_discrete(&dg, &dm, &ev, 0.7, 0.9).unwrap();
        // One step: Y ~ N(wᵀB_dU, wᵀΣ_dw); the cheapest U for shift δ costs
        // δ² / (2 wᵀB_d M⁺ B_dᵀw).
        let w = ev.w();
        let s = w.dot(&(dm.sigma_d.as_matrix() * w));
        let bw = dm.b_d.transpose() * w;
        let reach = bw.dot(&(&dm.effort.m_pinv * &bw));
        let delta = r.gap * s.sqrt();
        assert!((r.e_min - delta * delta / (2.0 * reach)).abs() < 1e-12 * r.e_min);
        let ControlLaw::DiscreteMatched { inputs, .. } = &law else { panic!() };
        assert!((discrete_mean_shift(&dm, w, inputs) - delta).abs() < 1e-12 * delta);
    }
}
