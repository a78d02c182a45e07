//! Monte Carlo validation of the energy/probability equality.
//!
//! Every path `i` draws from its own ChaCha8 stream keyed by `(seed, i)`, and
//! per-path results are collected in index order before any reduction, so
//! estimates do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gramian::{continuous_gramians, discrete_gramians, zoh_discretize, DiscreteModel};
use crate::kl::{kl_discrete, sample_midpoints};
use crate::linalg::{compensated_sum, norm_cdf, norm_pdf, norm_quantile, psd_sqrt, Matrix, Quadrature, Vector};
use crate::model::ModelSpec;
use crate::translator::{
    feasibility_check, synthesize_continuous, synthesize_discrete, terminal_mean,
    terminal_mean_shift, threshold_for_baseline, translate, ControlLaw, EventSpec,
};

pub const DEFAULT_PATHS: usize = 1_000_000;
/// Stream reserved for direction sampling; path indices never reach it.
const DIRECTION_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    /// Indicator mean over fully simulated discrete paths.
    IndicatorMean,
    /// Indicator mean over direct draws of the scalar `wᵀX_T`.
    ScalarShortcut,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    /// Sample standard deviation over `√n_paths`.
    pub se: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub estimator: Estimator,
}

/// RNG for one path.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// SplitMix64 finalizer; derives independent child seeds.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean and its standard error.
pub fn mean_with_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    let mean = compensated_sum(samples.iter().copied()) / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(samples.iter().map(|y| (y - mean) * (y - mean)));
    let sd = (ss / (n - 1) as f64).sqrt();
    (mean, sd / (n as f64).sqrt())
}

/// Unbiased sample variance with its delete-one jackknife standard error.
pub fn variance_jackknife(samples: &[f64]) -> (f64, f64) {
    let n = samples.len();
    if n < 3 {
        let (_, se) = mean_with_se(samples);
        return (se * se * n as f64, 0.0);
    }
    let nf = n as f64;
    let mean = compensated_sum(samples.iter().copied()) / nf;
    let dev: Vec<f64> = samples.iter().map(|y| y - mean).collect();
    let ss = compensated_sum(dev.iter().map(|d| d * d));
    let var = ss / (nf - 1.0);
    // Leaving out i: SS₍ᵢ₎ = SS − dᵢ² n/(n−1).
    let loo: Vec<f64> = dev.iter().map(|d| (ss - d * d * nf / (nf - 1.0)) / (nf - 2.0)).collect();
    let loo_mean = compensated_sum(loo.iter().copied()) / nf;
    let spread = compensated_sum(loo.iter().map(|v| (v - loo_mean) * (v - loo_mean)));
    (var, ((nf - 1.0) / nf * spread).sqrt())
}

fn indicator_estimate(
    samples: &[f64],
    event: &EventSpec,
    seed: u64,
    estimator: Estimator,
) -> McEstimate {
    let hits: Vec<f64> = samples.iter().map(|&y| if event.contains(y) { 1.0 } else { 0.0 }).collect();
    let (value, se) = mean_with_se(&hits);
    McEstimate { value, se, n_paths: samples.len(), seed, estimator }
}

/// Row-major dense kernel for `x ← F x + c_k + L z`.
struct PathKernel {
    n: usize,
    transition: Vec<f64>,
    noise: Vec<f64>,
    offsets: Option<Vec<Vec<f64>>>,
    x0: Vec<f64>,
    steps: usize,
}

fn row_major(m: &Matrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

impl PathKernel {
    fn new(dm: &DiscreteModel, law: Option<&ControlLaw>) -> Result<Self> {
        let n = dm.state_dim();
        let noise = row_major(&psd_sqrt(&dm.sigma_d)?);
        let mut transition = dm.a_d.clone();
        let offsets = match law {
            None => None,
            Some(ControlLaw::StateFeedback { gain }) => {
                if gain.shape() != (dm.input_dim(), n) {
                    return Err(Error::Dimension(format!(
                        "feedback gain must be {}x{n}",
                        dm.input_dim()
                    )));
                }
                transition -= &dm.b_d * gain;
                None
            }
            Some(ControlLaw::DiscreteMatched { inputs, .. }) => {
                if inputs.len() != dm.steps {
                    return Err(Error::Dimension(format!(
                        "control has {} steps, model has {}",
                        inputs.len(),
                        dm.steps
                    )));
                }
                Some(inputs.iter().map(|u| (&dm.b_d * u).iter().copied().collect()).collect())
            }
            Some(continuous) => Some(
                sample_midpoints(continuous, dm)?
                    .iter()
                    .map(|u| (&dm.b_d * u).iter().copied().collect())
                    .collect(),
            ),
        };
        Ok(PathKernel {
            n,
            transition: row_major(&transition),
            noise,
            offsets,
            x0: dm.x0.iter().copied().collect(),
            steps: dm.steps,
        })
    }

    fn terminal(&self, seed: u64, path: u64) -> Vec<f64> {
        let n = self.n;
        let mut rng = path_rng(seed, path);
        let mut x = self.x0.clone();
        let mut next = vec![0.0; n];
        let mut z = vec![0.0; n];
        for k in 0..self.steps {
            for zi in z.iter_mut() {
                *zi = StandardNormal.sample(&mut rng);
            }
            for r in 0..n {
                let row = &self.transition[r * n..(r + 1) * n];
                let lrow = &self.noise[r * n..(r + 1) * n];
                let mut acc = 0.0;
                for c in 0..n {
                    acc += row[c] * x[c] + lrow[c] * z[c];
                }
                if let Some(off) = &self.offsets {
                    acc += off[k][r];
                }
                next[r] = acc;
            }
            std::mem::swap(&mut x, &mut next);
        }
        x
    }
}

/// Terminal projections `wᵀX_N` of `n_paths` simulated discrete paths; `None`
/// means zero control.
pub fn simulate_terminal(
    dm: &DiscreteModel,
    law: Option<&ControlLaw>,
    w: &Vector,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be >= 1".into()));
    }
    if w.len() != dm.state_dim() {
        return Err(Error::Dimension(format!("w has length {}, state has {}", w.len(), dm.state_dim())));
    }
    let kernel = PathKernel::new(dm, law)?;
    let w: Vec<f64> = w.iter().copied().collect();
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let x = kernel.terminal(seed, i);
            x.iter().zip(&w).map(|(a, b)| a * b).sum()
        })
        .collect())
}

/// Full terminal states of simulated discrete paths.
pub fn simulate_terminal_states(
    dm: &DiscreteModel,
    law: Option<&ControlLaw>,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vector>> {
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be >= 1".into()));
    }
    let kernel = PathKernel::new(dm, law)?;
    Ok((0..n_paths as u64)
        .into_par_iter()
        .map(|i| Vector::from_vec(kernel.terminal(seed, i)))
        .collect())
}

/// Event probability estimated from fully simulated discrete paths.
pub fn path_probability(
    dm: &DiscreteModel,
    law: Option<&ControlLaw>,
    event: &EventSpec,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    let ys = simulate_terminal(dm, law, event.w(), n_paths, seed)?;
    Ok(indicator_estimate(&ys, event, seed, Estimator::IndicatorMean))
}

/// Draws `Y ~ N(mean, variance)` directly and estimates `P(Y ∈ event)`.
pub fn scalar_mc(
    mean: f64,
    variance: f64,
    event: &EventSpec,
    n_paths: usize,
    seed: u64,
) -> Result<McEstimate> {
    if !(variance > 0.0) {
        return Err(Error::Degenerate(format!("variance {variance:e}")));
    }
    if n_paths == 0 {
        return Err(Error::Config("n_paths must be >= 1".into()));
    }
    let sd = variance.sqrt();
    let ys: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut path_rng(seed, i));
            mean + sd * z
        })
        .collect();
    Ok(indicator_estimate(&ys, event, seed, Estimator::ScalarShortcut))
}

#[derive(Debug, Clone, Serialize)]
pub struct TightnessReport {
    /// Halfspace threshold used (recalibrated when `p0` is supplied).
    pub threshold: f64,
    pub p0: f64,
    pub p1: f64,
    pub r_squared: f64,
    pub e_min: f64,
    /// Mean shift of the synthesized law, integrated independently.
    pub mean_shift: f64,
    pub p1_hat: McEstimate,
    /// `(Φ⁻¹(p̂1) − z0)² / (2R²)`
    pub e_hat: f64,
    pub rel_err: f64,
    pub slack: f64,
    /// Delta-method standard error of `e_hat`.
    pub se: f64,
}

/// Synthesizes the matched filter, estimates the achieved probability with
/// scalar Monte Carlo, and compares the implied energy to `E_min`.
pub fn halfspace_tightness(
    model: &ModelSpec,
    event: &EventSpec,
    p0: Option<f64>,
    p1: f64,
    n_paths: usize,
    seed: u64,
    quad: Quadrature,
) -> Result<TightnessReport> {
    let gram = continuous_gramians(model)?;
    let w = event.w();
    let v = gram.noise_variance(w);
    let m0 = terminal_mean(model, w)?;
    let event = match p0 {
        Some(p0) => EventSpec::halfspace(w.clone(), threshold_for_baseline(m0, v, p0)?)?,
        None => EventSpec::halfspace(w.clone(), event.lower())?,
    };
    let p0 = event.probability(m0, v);
    let result = translate(model, &gram, &event, p0, p1)?;
    if !result.feasible {
        return Err(Error::Infeasible { r_squared: result.r_squared });
    }
    let law = synthesize_continuous(model, &event, &result)?;
    let mean_shift = if result.beta == 0.0 {
        0.0
    } else {
        terminal_mean_shift(model, &law, w, quad)?
    };
    let p1_hat = scalar_mc(m0 + mean_shift, v, &event, n_paths, seed)?;

    if result.gap == 0.0 {
        return Ok(TightnessReport {
            threshold: event.lower(),
            p0,
            p1,
            r_squared: result.r_squared,
            e_min: 0.0,
            mean_shift,
            p1_hat,
            e_hat: 0.0,
            rel_err: 0.0,
            slack: 0.0,
            se: 0.0,
        });
    }
    let z_hat = norm_quantile(p1_hat.value).map_err(|_| {
        Error::Numerical(format!("estimated probability {} has no finite quantile", p1_hat.value))
    })?;
    let gap_hat = z_hat - result.z0;
    let e_hat = gap_hat * gap_hat / (2.0 * result.r_squared);
    let de_dp = gap_hat / (result.r_squared * norm_pdf(z_hat));
    Ok(TightnessReport {
        threshold: event.lower(),
        p0,
        p1,
        r_squared: result.r_squared,
        e_min: result.e_min,
        mean_shift,
        p1_hat,
        e_hat,
        rel_err: (e_hat - result.e_min).abs() / result.e_min,
        slack: e_hat - result.e_min,
        se: de_dp.abs() * p1_hat.se,
    })
}

/// `P(a ≤ Y ≤ b)` for `Y ~ N(δ, sd²)`, thresholds relative to the baseline mean.
fn interval_prob(lo: f64, hi: f64, sd: f64, delta: f64) -> f64 {
    norm_cdf((hi - delta) / sd) - norm_cdf((lo - delta) / sd)
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    // f(lo) < 0 ≤ f(hi) need not hold in orientation; only a sign change.
    let flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol {
            break;
        }
        if (f(mid) < 0.0) == (flo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Smallest-magnitude shift `δ` with `P(lo ≤ δ + sd·Z ≤ hi) = target`.
pub fn interval_shift(lo: f64, hi: f64, sd: f64, target: f64) -> Result<f64> {
    let center = 0.5 * (lo + hi);
    let ceiling = interval_prob(lo, hi, sd, center);
    let p0 = interval_prob(lo, hi, sd, 0.0);
    if target == p0 {
        return Ok(0.0);
    }
    if target > ceiling {
        return Err(Error::InfeasibleTarget { target, ceiling });
    }
    let f = |d: f64| interval_prob(lo, hi, sd, d) - target;
    let tol = 1e-12 * sd.max(center.abs());
    if target > p0 {
        return Ok(bisect(0.0, center, f, tol));
    }
    // Moving away from the center lowers the probability; grow the bracket
    // geometrically until it straddles the target.
    let dir = if center > 0.0 { -1.0 } else { 1.0 };
    let mut far = dir * sd;
    let mut guard = 0;
    while f(far) > 0.0 {
        far *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Numerical("interval bracket did not close".into()));
        }
    }
    Ok(bisect(0.0, far, f, tol))
}

/// Interval `[a, a + width]` whose baseline probability is `p0`, placed so
/// its center lies above the baseline mean.
pub fn interval_for_baseline(m0: f64, variance: f64, width: f64, p0: f64) -> Result<(f64, f64)> {
    let sd = variance.sqrt();
    let ceiling = interval_prob(-0.5 * width, 0.5 * width, sd, 0.0);
    if !(p0 > 0.0 && p0 < ceiling) {
        return Err(Error::InfeasibleTarget { target: p0, ceiling });
    }
    let f = |lo: f64| interval_prob(lo, lo + width, sd, 0.0) - p0;
    let mut far = sd.max(width);
    while f(far) > 0.0 {
        far *= 2.0;
    }
    let lo = bisect(-0.5 * width, far, f, 1e-13 * sd.max(width));
    Ok((m0 + lo, m0 + lo + width))
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalReport {
    pub lower: f64,
    pub upper: f64,
    pub p0: f64,
    pub p1: f64,
    pub ceiling: f64,
    pub delta: f64,
    pub e_interval: f64,
    pub e_halfspace: f64,
    /// `E_interval − E_halfspace`, analytic.
    pub delta_e: f64,
    pub p1_hat: McEstimate,
    /// Energy implied by the estimated probability.
    pub e_interval_hat: f64,
    pub delta_e_hat: f64,
    pub se: f64,
    /// `delta_e_hat ≥ −3·se`
    pub passed: bool,
}

/// Energy needed to move an interval event from its baseline to `p1`,
/// compared with the halfspace energy for the same probability change.
pub fn interval_strictness(
    model: &ModelSpec,
    event: &EventSpec,
    p1: f64,
    n_grid: usize,
    n_paths: usize,
    seed: u64,
    quad: Quadrature,
) -> Result<IntervalReport> {
    let upper = event
        .upper()
        .ok_or_else(|| Error::Domain("interval strictness needs an interval event".into()))?;
    norm_quantile(p1)?;
    let gram = continuous_gramians(model)?;
    let w = event.w();
    let v = gram.noise_variance(w);
    let reach = gram.reach(w);
    let feas = feasibility_check(&gram, w)?;
    if !feas.feasible {
        return Err(Error::Infeasible { r_squared: feas.r_squared });
    }
    let sd = v.sqrt();
    let m0 = terminal_mean(model, w)?;
    let (lo, hi) = (event.lower() - m0, upper - m0);
    let p0 = interval_prob(lo, hi, sd, 0.0);
    let ceiling = interval_prob(lo, hi, sd, 0.5 * (lo + hi));

    let delta = interval_shift(lo, hi, sd, p1)?;
    if n_grid >= 2 && delta != 0.0 {
        // Minimal root: no crossing strictly between 0 and δ.
        let sign0 = (p0 - p1).signum();
        for i in 1..n_grid {
            let d = delta * i as f64 / n_grid as f64;
            let s = (interval_prob(lo, hi, sd, d) - p1).signum();
            if s != sign0 && s != 0.0 {
                return Err(Error::Numerical("interval root is not the minimal shift".into()));
            }
        }
    }
    let e_interval = delta * delta / (2.0 * reach);
    let halfspace = crate::translator::translate_parts(v, reach, m0, p0, p1)?;
    let e_halfspace = halfspace.e_min;

    // Realize δ with a matched filter and confirm the probability by MC.
    let law = ControlLaw::ContinuousMatched {
        beta: delta / reach,
        direction: w.clone(),
        gain: &model.effort_metric()?.m_pinv * model.b().transpose(),
        a: model.a().clone(),
        horizon: model.horizon(),
        effort: model.effort_metric()?.m,
        reach,
    };
    let shift = if delta == 0.0 { 0.0 } else { terminal_mean_shift(model, &law, w, quad)? };
    let p1_hat = scalar_mc(m0 + shift, v, event, n_paths, seed)?;
    let target = p1_hat.value.min(ceiling);
    let delta_hat = if target <= 0.0 {
        return Err(Error::Numerical("estimated interval probability is zero".into()));
    } else {
        interval_shift(lo, hi, sd, target)?
    };
    let e_interval_hat = delta_hat * delta_hat / (2.0 * reach);
    let slope = (norm_pdf((lo - delta_hat) / sd) - norm_pdf((hi - delta_hat) / sd)) / sd;
    let de_dp = if slope == 0.0 { f64::INFINITY } else { delta_hat / (reach * slope) };
    let se = de_dp.abs() * p1_hat.se;
    let delta_e_hat = e_interval_hat - e_halfspace;
    Ok(IntervalReport {
        lower: event.lower(),
        upper,
        p0,
        p1,
        ceiling,
        delta,
        e_interval,
        e_halfspace,
        delta_e: e_interval - e_halfspace,
        p1_hat,
        e_interval_hat,
        delta_e_hat,
        se,
        passed: delta_e_hat >= -3.0 * se,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DirectionRow {
    pub w: Vec<f64>,
    pub seed: u64,
    pub r_squared: f64,
    pub e_min: f64,
    pub rel_err: f64,
    pub slack: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub rows: Vec<DirectionRow>,
    pub max_rel_err: f64,
    /// Relative SE (`se / e_min`) of the row attaining the maximum.
    pub se_at_max: f64,
    pub rejected: usize,
}

/// Tightness along each given direction; direction `k` uses seed `seed + k`.
pub fn direction_sweep(
    model: &ModelSpec,
    directions: &[Vector],
    p0: f64,
    p1: f64,
    n_paths: usize,
    seed: u64,
    quad: Quadrature,
) -> Result<SweepReport> {
    if directions.is_empty() {
        return Err(Error::Config("direction sweep needs at least one direction".into()));
    }
    let mut rows = Vec::with_capacity(directions.len());
    for (k, w) in directions.iter().enumerate() {
        let s = seed.wrapping_add(k as u64);
        let ev = EventSpec::halfspace(w.clone(), 0.0)?;
        let t = halfspace_tightness(model, &ev, Some(p0), p1, n_paths, s, quad)?;
        rows.push(DirectionRow {
            w: w.iter().copied().collect(),
            seed: s,
            r_squared: t.r_squared,
            e_min: t.e_min,
            rel_err: t.rel_err,
            slack: t.slack,
            se: t.se,
        });
    }
    let (imax, max_rel_err) = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (i, r.rel_err))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let best = &rows[imax];
    let se_at_max = if best.e_min > 0.0 { best.se / best.e_min } else { 0.0 };
    Ok(SweepReport { rows, max_rel_err, se_at_max, rejected: 0 })
}

/// Uniform random unit directions (infeasible ones rejected), then
/// [`direction_sweep`].
pub fn random_direction_sweep(
    model: &ModelSpec,
    count: usize,
    p0: f64,
    p1: f64,
    n_paths: usize,
    seed: u64,
    quad: Quadrature,
) -> Result<SweepReport> {
    if count == 0 {
        return Err(Error::Config("direction count must be >= 1".into()));
    }
    let gram = continuous_gramians(model)?;
    let n = model.state_dim();
    let mut rng = path_rng(seed, DIRECTION_STREAM);
    let mut dirs = Vec::with_capacity(count);
    let mut rejected = 0;
    let max_attempts = 64 * count;
    let mut attempts = 0;
    while dirs.len() < count && attempts < max_attempts {
        attempts += 1;
        let g = Vector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
        let norm = g.norm();
        if norm == 0.0 {
            continue;
        }
        let w = g / norm;
        if feasibility_check(&gram, &w)?.feasible {
            dirs.push(w);
        } else {
            rejected += 1;
        }
    }
    if dirs.is_empty() {
        return Err(Error::Infeasible { r_squared: 0.0 });
    }
    let mut rep = direction_sweep(model, &dirs, p0, p1, n_paths, seed, quad)?;
    rep.rejected = rejected;
    Ok(rep)
}

/// Discrete exactness: summed matched-filter energy against the closed form,
/// and the per-step KL identity.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteCheck {
    pub steps: usize,
    pub dt: f64,
    pub e_min: f64,
    pub summed_energy: f64,
    pub rel_err: f64,
    pub kl: f64,
    pub kl_gap: f64,
}

pub fn discrete_exactness(
    model: &ModelSpec,
    w: &Vector,
    p0: f64,
    p1: f64,
    dt: f64,
) -> Result<DiscreteCheck> {
    let dm = zoh_discretize(model, dt)?;
    let dg = discrete_gramians(&dm)?;
    let ev = EventSpec::halfspace(w.clone(), 0.0)?;
    let (res, law) = synthesize_discrete(&dg, &dm, &ev, p0, p1)?;
    let ControlLaw::DiscreteMatched { inputs, .. } = &law else {
        unreachable!("synthesize_discrete returns a discrete law")
    };
    let kl = kl_discrete(&dm, inputs)?;
    let rel_err = if res.e_min == 0.0 {
        kl.energy.abs()
    } else {
        (kl.energy - res.e_min).abs() / res.e_min
    };
    Ok(DiscreteCheck {
        steps: dm.steps,
        dt,
        e_min: res.e_min,
        summed_energy: kl.energy,
        rel_err,
        kl: kl.kl,
        kl_gap: kl.max_abs_gap,
    })
}

#[derive(Debug, Clone)]
pub struct ValidationConfig {
    pub model: ModelSpec,
    pub w: Vector,
    pub p0: f64,
    pub p1: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub directions: usize,
    /// Interval width in terminal standard deviations.
    pub interval_width_sd: f64,
    /// Relative tolerance for the tightness rows.
    pub rel_tol: f64,
    pub quad: Quadrature,
}

impl ValidationConfig {
    /// Drone altitude gate, `0.7 → 0.9`, `dt = 0.01`, 10⁶ paths.
    pub fn drone(seed: u64) -> Self {
        ValidationConfig {
            model: crate::model::fixtures::drone(),
            w: crate::model::fixtures::drone_direction(),
            p0: 0.7,
            p1: 0.9,
            dt: 0.01,
            n_paths: DEFAULT_PATHS,
            seed,
            directions: 5,
            interval_width_sd: 6.0,
            rel_tol: 5e-3,
            quad: Quadrature::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    MonteCarlo,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowStatus {
    Pass,
    Fail,
    Error,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationRow {
    pub test: &'static str,
    pub metric: &'static str,
    pub kind: RowKind,
    pub value: Option<f64>,
    pub se: Option<f64>,
    pub reference: Option<f64>,
    pub seed: Option<u64>,
    pub status: RowStatus,
    pub detail: Option<String>,
}

impl ValidationRow {
    fn failed(test: &'static str, metric: &'static str, kind: RowKind, seed: Option<u64>, e: Error) -> Self {
        ValidationRow {
            test,
            metric,
            kind,
            value: None,
            se: None,
            reference: None,
            seed,
            status: RowStatus::Error,
            detail: Some(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub n_paths: usize,
    pub seed: u64,
    pub dt: f64,
    pub p0: f64,
    pub p1: f64,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.status == RowStatus::Pass)
    }
}

fn status(ok: bool) -> RowStatus {
    if ok {
        RowStatus::Pass
    } else {
        RowStatus::Fail
    }
}

/// Runs every validation row; a failing row is recorded, not propagated.
pub fn run_validation_suite(cfg: &ValidationConfig) -> Result<ValidationReport> {
    norm_quantile(cfg.p0)?;
    norm_quantile(cfg.p1)?;
    if cfg.n_paths == 0 {
        return Err(Error::Config("n_paths must be >= 1".into()));
    }
    let model = &cfg.model;
    let seeds: Vec<u64> = (1..=5).map(|tag| derive_seed(cfg.seed, tag)).collect();
    let mut rows = Vec::with_capacity(7);

    // Without Gramians there is nothing row-level to report.
    let gram = continuous_gramians(model)?;
    let v = gram.noise_variance(&cfg.w);
    let m0 = terminal_mean(model, &cfg.w)?;
    let event = EventSpec::halfspace(cfg.w.clone(), threshold_for_baseline(m0, v, cfg.p0)?)?;

    rows.push(
        match zoh_discretize(model, cfg.dt)
            .and_then(|dm| path_probability(&dm, None, &event, cfg.n_paths, seeds[0]))
        {
            Ok(est) => ValidationRow {
                test: "baseline",
                metric: "p0",
                kind: RowKind::MonteCarlo,
                value: Some(est.value),
                se: Some(est.se),
                reference: Some(cfg.p0),
                seed: Some(seeds[0]),
                status: status((est.value - cfg.p0).abs() <= 3.0 * est.se),
                detail: None,
            },
            Err(e) => ValidationRow::failed("baseline", "p0", RowKind::MonteCarlo, Some(seeds[0]), e),
        },
    );

    let r2 = gram.reach(&cfg.w) / v;
    rows.push(
        match crate::gramian::quadrature_gramians(model, cfg.quad) {
            Ok(q) => {
                let r2q = q.reach(&cfg.w) / q.noise_variance(&cfg.w);
                ValidationRow {
                    test: "controllability-to-noise",
                    metric: "R^2",
                    kind: RowKind::Analytic,
                    value: Some(r2),
                    se: None,
                    reference: Some(r2q),
                    seed: None,
                    status: status((r2 - r2q).abs() <= 1e-9 * r2q.abs().max(1e-300)),
                    detail: None,
                }
            }
            Err(e) => ValidationRow::failed("controllability-to-noise", "R^2", RowKind::Analytic, None, e),
        },
    );

    match halfspace_tightness(model, &event, Some(cfg.p0), cfg.p1, cfg.n_paths, seeds[1], cfg.quad) {
        Ok(t) => {
            let rel_se = if t.e_min > 0.0 { t.se / t.e_min } else { 0.0 };
            rows.push(ValidationRow {
                test: "halfspace-tightness",
                metric: "relative error",
                kind: RowKind::MonteCarlo,
                value: Some(t.rel_err),
                se: Some(rel_se),
                reference: Some(0.0),
                seed: Some(seeds[1]),
                status: status(t.rel_err <= cfg.rel_tol.max(3.0 * rel_se)),
                detail: None,
            });
            rows.push(ValidationRow {
                test: "halfspace-slack",
                metric: "E_hat - E_min",
                kind: RowKind::MonteCarlo,
                value: Some(t.slack),
                se: Some(t.se),
                reference: Some(0.0),
                seed: Some(seeds[1]),
                status: status(t.slack.abs() <= 3.0 * t.se),
                detail: None,
            });
        }
        Err(e) => {
            let msg = e.to_string();
            rows.push(ValidationRow::failed(
                "halfspace-tightness",
                "relative error",
                RowKind::MonteCarlo,
                Some(seeds[1]),
                e,
            ));
            let mut slack = rows.last().unwrap().clone();
            slack.test = "halfspace-slack";
            slack.metric = "E_hat - E_min";
            slack.detail = Some(msg);
            rows.push(slack);
        }
    }

    rows.push(match discrete_exactness(model, &cfg.w, cfg.p0, cfg.p1, cfg.dt) {
        Ok(d) => ValidationRow {
            test: "discrete-exactness",
            metric: "relative error",
            kind: RowKind::Analytic,
            value: Some(d.rel_err),
            se: None,
            reference: Some(0.0),
            seed: None,
            status: status(d.rel_err <= 1e-13 && d.kl_gap <= 1e-14),
            detail: Some(format!("N = {}, |energy - KL| = {:e}", d.steps, d.kl_gap)),
        },
        Err(e) => ValidationRow::failed("discrete-exactness", "relative error", RowKind::Analytic, None, e),
    });

    let interval = (|| -> Result<IntervalReport> {
        let (lo, hi) = interval_for_baseline(m0, v, cfg.interval_width_sd * v.sqrt(), cfg.p0)?;
        let ev = EventSpec::interval(cfg.w.clone(), lo, hi)?;
        interval_strictness(model, &ev, cfg.p1, 1000, cfg.n_paths, seeds[2], cfg.quad)
    })();
    rows.push(match interval {
        Ok(r) => ValidationRow {
            test: "interval-event",
            metric: "Delta E",
            kind: RowKind::MonteCarlo,
            value: Some(r.delta_e_hat),
            se: Some(r.se),
            reference: Some(r.delta_e),
            seed: Some(seeds[2]),
            status: status(r.passed),
            detail: Some(format!("[{:.6}, {:.6}]", r.lower, r.upper)),
        },
        Err(e) => ValidationRow::failed("interval-event", "Delta E", RowKind::MonteCarlo, Some(seeds[2]), e),
    });

    rows.push(
        match random_direction_sweep(model, cfg.directions, cfg.p0, cfg.p1, cfg.n_paths, seeds[3], cfg.quad) {
            Ok(s) => ValidationRow {
                test: "random-directions",
                metric: "max relative error",
                kind: RowKind::MonteCarlo,
                value: Some(s.max_rel_err),
                se: Some(s.se_at_max),
                reference: Some(0.0),
                seed: Some(seeds[3]),
                status: status(s.max_rel_err <= cfg.rel_tol.max(3.0 * s.se_at_max)),
                detail: Some(format!("{} directions, {} rejected", s.rows.len(), s.rejected)),
            },
            Err(e) => ValidationRow::failed(
                "random-directions",
                "max relative error",
                RowKind::MonteCarlo,
                Some(seeds[3]),
                e,
            ),
        },
    );

    Ok(ValidationReport { n_paths: cfg.n_paths, seed: cfg.seed, dt: cfg.dt, p0: cfg.p0, p1: cfg.p1, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures;

    fn scalar_dm() -> DiscreteModel {
        zoh_discretize(&fixtures::scalar(), 0.1).unwrap()
    }

    #[test]
    fn seeds_are_reproducible_and_distinct() {
        use rand::RngCore;
        let a = path_rng(7, 3).next_u64();
        assert_eq!(a, path_rng(7, 3).next_u64());
        assert_ne!(a, path_rng(7, 4).next_u64());
        assert_ne!(a, path_rng(8, 3).next_u64());
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
    }

    #[test]
    fn jackknife_matches_normal_theory_scale() {
        let ys: Vec<f64> =
            (0..20_000u64).map(|i| StandardNormal.sample(&mut path_rng(5, i))).collect();
        let (var, se) = variance_jackknife(&ys);
        // For Gaussian data SE[s²] ≈ σ² √(2/(n−1)).
        let expected = (2.0f64 / 19_999.0).sqrt();
        assert!((se - expected).abs() / expected < 0.1);
        assert!((var - 1.0).abs() < 4.0 * se);
    }

    #[test]
    fn zero_control_scalar_is_unbiased() {
        let dm = scalar_dm();
        let ys = simulate_terminal(&dm, None, &Vector::from_vec(vec![1.0]), 100_000, 11).unwrap();
        let (mean, se) = mean_with_se(&ys);
        assert!(mean.abs() <= 3.0 * se);
        let (var, vse) = variance_jackknife(&ys);
        assert!((var - 1.0).abs() <= 3.0 * vse);
    }

    #[test]
    fn scalar_mc_examples() {
        let w = Vector::from_vec(vec![1.0]);
        let half = EventSpec::halfspace(w.clone(), 0.0).unwrap();
        let e = scalar_mc(0.0, 1.0, &half, 100_000, 1).unwrap();
        assert!((e.value - 0.5).abs() <= 3.0 * e.se);
        assert_eq!(e.estimator, Estimator::ScalarShortcut);
        let e = scalar_mc(1.0, 1.0, &half, 100_000, 2).unwrap();
        assert!((e.value - norm_cdf(1.0)).abs() <= 3.0 * e.se);
        let iv = EventSpec::interval(w, -1.0, 1.0).unwrap();
        let e = scalar_mc(0.0, 1.0, &iv, 100_000, 3).unwrap();
        assert!((e.value - (2.0 * norm_cdf(1.0) - 1.0)).abs() <= 3.0 * e.se);
        assert!(matches!(scalar_mc(0.0, 0.0, &half, 10, 1), Err(Error::Degenerate(_))));
    }

    #[test]
    fn feedback_law_contracts_variance() {
        let dm = zoh_discretize(&fixtures::scalar(), 0.1).unwrap();
        let law = ControlLaw::StateFeedback { gain: Matrix::from_element(1, 1, 5.0) };
        let ys = simulate_terminal(&dm, Some(&law), &Vector::from_vec(vec![1.0]), 20_000, 4).unwrap();
        let (var, _) = variance_jackknife(&ys);
        assert!(var < 0.5);
    }

    #[test]
    fn interval_shift_handles_both_branches() {
        let sd = 1.0;
        // Off-center interval, raising toward the center.
        let (lo, hi) = (0.5, 4.5);
        let p0 = interval_prob(lo, hi, sd, 0.0);
        let d = interval_shift(lo, hi, sd, p0 + 0.2).unwrap();
        assert!(d > 0.0 && d < 2.5);
        assert!((interval_prob(lo, hi, sd, d) - (p0 + 0.2)).abs() < 1e-12);
        // Symmetric interval, lowering: |δ| grows away from the center.
        let d = interval_shift(-1.0, 1.0, sd, 0.5).unwrap();
        assert!((interval_prob(-1.0, 1.0, sd, d) - 0.5).abs() < 1e-12);
        assert!(d.abs() > 0.0);
        // Above the ceiling.
        assert!(matches!(
            interval_shift(-1.0, 1.0, sd, 0.9),
            Err(Error::InfeasibleTarget { .. })
        ));
    }

    #[test]
    fn interval_shift_is_the_grid_minimal_root() {
        // Grid-scan oracle over δ ∈ [−6, 6].
        let (lo, hi, sd) = (-0.3, 2.2, 0.8);
        for &target in &[0.2, 0.5, 0.7, 0.85] {
            let d = interval_shift(lo, hi, sd, target).unwrap();
            let grid: Vec<f64> = (0..=1000).map(|i| -6.0 + 12.0 * i as f64 / 1000.0).collect();
            let mut best = f64::INFINITY;
            for pair in grid.windows(2) {
                let (f0, f1) = (
                    interval_prob(lo, hi, sd, pair[0]) - target,
                    interval_prob(lo, hi, sd, pair[1]) - target,
                );
                if f0 == 0.0 || f0.signum() != f1.signum() {
                    let mid = 0.5 * (pair[0] + pair[1]);
                    if mid.abs() < best.abs() {
                        best = mid;
                    }
                }
            }
            assert!((d - best).abs() <= 6.0e-3 + 1e-12, "target={target} d={d} grid={best}");
        }
    }

    #[test]
    fn interval_for_baseline_hits_p0() {
        let (a, b) = interval_for_baseline(0.2, 1.0 / 3.0, 6.0 * (1.0f64 / 3.0).sqrt(), 0.7).unwrap();
        let sd = (1.0f64 / 3.0).sqrt();
        let p = interval_prob(a - 0.2, b - 0.2, sd, 0.0);
        assert!((p - 0.7).abs() < 1e-12);
        assert!(0.5 * (a + b) > 0.2);
    }

    #[test]
    fn wide_interval_recovers_halfspace() {
        let model = fixtures::scalar();
        let ev = EventSpec::interval(Vector::from_vec(vec![1.0]), -0.5, 1e3).unwrap();
        let rep = interval_strictness(&model, &ev, 0.8, 100, 1_000, 9, Quadrature::default()).unwrap();
        assert!(rep.delta_e.abs() < 1e-9, "{}", rep.delta_e);
    }

    #[test]
    fn tightness_trivial_case() {
        let model = fixtures::scalar();
        let ev = EventSpec::halfspace(Vector::from_vec(vec![1.0]), 0.0).unwrap();
        let t = halfspace_tightness(&model, &ev, None, 0.5, 1_000, 1, Quadrature::default()).unwrap();
        assert_eq!(t.rel_err, 0.0);
        assert_eq!(t.slack, 0.0);
        assert_eq!(t.mean_shift, 0.0);
    }

    #[test]
    fn isotropic_directions_share_r_squared() {
        let model = ModelSpec::new(
            Matrix::zeros(3, 3),
            Matrix::identity(3, 3),
            Matrix::identity(3, 3),
            Vector::zeros(3),
            2.0,
            None,
        )
        .unwrap();
        let rep = random_direction_sweep(&model, 4, 0.6, 0.8, 1_000, 3, Quadrature::new(16, 8)).unwrap();
        let r0 = rep.rows[0].r_squared;
        assert!(rep.rows.iter().all(|r| (r.r_squared - r0).abs() < 1e-12));
    }

    #[test]
    fn single_direction_matches_direct_tightness() {
        let model = fixtures::drone();
        let w = fixtures::drone_direction();
        let sweep = direction_sweep(&model, std::slice::from_ref(&w), 0.7, 0.9, 10_000, 77, Quadrature::default()).unwrap();
        let ev = EventSpec::halfspace(w, 0.0).unwrap();
        let t = halfspace_tightness(&model, &ev, Some(0.7), 0.9, 10_000, 77, Quadrature::default()).unwrap();
        assert_eq!(sweep.rows[0].rel_err, t.rel_err);
        assert_eq!(sweep.max_rel_err, t.rel_err);
    }

    #[test]
    fn smoke_suite_emits_seven_rows() {
        let mut cfg = ValidationConfig::drone(42);
        cfg.n_paths = 1_000;
        cfg.quad = Quadrature::new(32, 8);
        let rep = run_validation_suite(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 7);
        assert!(rep.rows.iter().all(|r| r.status != RowStatus::Error), "{:?}", rep.rows);
        for r in &rep.rows {
            assert_eq!(r.se.is_some(), r.kind == RowKind::MonteCarlo);
        }
        let again = run_validation_suite(&cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&rep).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}
