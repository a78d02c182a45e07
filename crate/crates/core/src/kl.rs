//! Path-space KL divergence of a deterministic control against the
//! uncontrolled law.
//!
//! In discrete time each step is a Gaussian with shifted mean and shared
//! covariance, so `KL(N(μ + B_dU, Σ_d) ‖ N(μ, Σ_d)) = ½ UᵀB_dᵀΣ_d⁻¹B_dU` and the
//! path KL is the sum over steps. In continuous time the same holds with
//! `½∫uᵀ(BᵀΣ⁻¹B)u dt`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian::DiscreteModel;
use crate::linalg::{compensated_sum, Matrix, Quadrature, Vector};
use crate::model::ModelSpec;
use crate::translator::{discrete_energy, ControlLaw};

#[derive(Debug, Clone, Serialize)]
pub struct KlReport {
    /// Quadratic effort under the configured effort metric.
    pub energy: f64,
    pub kl: f64,
    /// Per-step terms (discrete laws only).
    pub per_step_kl: Vec<f64>,
    pub max_abs_gap: f64,
}

pub fn kl_discrete(dm: &DiscreteModel, inputs: &[Vector]) -> Result<KlReport> {
    if inputs.len() != dm.steps {
        return Err(Error::Dimension(format!(
            "control has {} steps, model has {}",
            inputs.len(),
            dm.steps
        )));
    }
    let m = dm.input_dim();
    if let Some(bad) = inputs.iter().find(|u| u.len() != m) {
        return Err(Error::Dimension(format!("input of length {} for {m} inputs", bad.len())));
    }
    let per_step_kl: Vec<f64> = inputs
        .iter()
        .map(|u| 0.5 * u.dot(&(&dm.noise_metric * u)))
        .collect();
    let kl = compensated_sum(per_step_kl.iter().copied());
    let energy = discrete_energy(inputs, &dm.effort.m);
    Ok(KlReport { energy, kl, per_step_kl, max_abs_gap: (energy - kl).abs() })
}

/// `½∫₀ᵀ uᵀ M u dt` by composite Gauss-Legendre.
pub fn quadrature_energy(
    law: &ControlLaw,
    metric: &Matrix,
    horizon: f64,
    quad: Quadrature,
) -> Result<f64> {
    let mut terms = Vec::with_capacity(quad.panels * quad.order);
    for (s, weight) in quad.points(0.0, horizon) {
        let u = law.eval(s)?.ok_or_else(|| {
            Error::UnsupportedLaw(format!("{} has no continuous-time input", law.kind()))
        })?;
        terms.push(weight * 0.5 * u.dot(&(metric * &u)));
    }
    Ok(compensated_sum(terms))
}

/// KL of a deterministic continuous-time law. Matched filters use the closed
/// form `β² wᵀWw / 2`; other open-loop laws go through quadrature.
pub fn kl_continuous_analytic(
    law: &ControlLaw,
    model: &ModelSpec,
    quad: Quadrature,
) -> Result<KlReport> {
    match law {
        ControlLaw::StateFeedback { .. } => {
            return Err(Error::UnsupportedLaw(
                "feedback laws are stochastic on path space; only deterministic laws are supported"
                    .into(),
            ))
        }
        ControlLaw::DiscreteMatched { .. } => {
            return Err(Error::UnsupportedLaw(
                "discrete input sequence; use kl_discrete".into(),
            ))
        }
        _ => {}
    }
    let effort = model.effort_metric()?.m;
    let energy = match law.analytic_energy() {
        Some(e) => e,
        None => quadrature_energy(law, &effort, model.horizon(), quad)?,
    };
    let kl = if model.penalty().is_none() {
        energy
    } else {
        quadrature_energy(law, &model.noise_metric(), model.horizon(), quad)?
    };
    Ok(KlReport { energy, kl, per_step_kl: Vec::new(), max_abs_gap: (energy - kl).abs() })
}

/// Piecewise-constant inputs from a continuous law, sampled at step midpoints.
pub fn sample_midpoints(law: &ControlLaw, dm: &DiscreteModel) -> Result<Vec<Vector>> {
    (0..dm.steps)
        .map(|k| {
            law.eval((k as f64 + 0.5) * dm.dt)?.ok_or_else(|| {
                Error::UnsupportedLaw(format!("{} has no continuous-time input", law.kind()))
            })
        })
        .collect()
}
