//! Path-integral ingredients of the bounds, checked by quadrature and Monte
//! Carlo: Brownian path ensembles, the retarded piezoelectric kernel, the
//! discretized double-time actions, Jensen rates, the separation estimate and
//! the renormalization integral.

use std::f64::consts::{FRAC_2_PI, PI, SQRT_2};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{c_constants, ModelSpec};
use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};
use crate::summation::{log_mean_exp, mean_and_stderr, pairwise_sum};

/// Kernel evaluations allowed per Monte Carlo probe (`count · (T/dt)²`).
pub const COST_GUARD: f64 = 1e10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EndpointMode {
    /// Brownian motion started at `start`.
    Free { start: Vec<f64> },
    /// Brownian bridge returning to `pin` at the horizon.
    Bridge { pin: Vec<f64> },
}

impl EndpointMode {
    fn anchor(&self) -> &[f64] {
        match self {
            EndpointMode::Free { start } => start,
            EndpointMode::Bridge { pin } => pin,
        }
    }
}

/// A seeded family of discretized Brownian paths in ℝ³ (one particle) or ℝ⁶ (two).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub dimension: usize,
    pub horizon: f64,
    pub dt: f64,
    pub count: usize,
    pub seed: u64,
    pub mode: EndpointMode,
}

impl PathEnsemble {
    /// Free paths from the origin.
    pub fn free(dimension: usize, horizon: f64, dt: f64, count: usize, seed: u64) -> Self {
        Self { dimension, horizon, dt, count, seed, mode: EndpointMode::Free { start: vec![0.0; dimension] } }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension != 3 && self.dimension != 6 {
            return Err(Error::InvalidArgument(format!("dimension {} must be 3 or 6", self.dimension)));
        }
        if self.mode.anchor().len() != self.dimension {
            return Err(Error::InvalidArgument("endpoint has the wrong dimension".into()));
        }
        if self.count == 0 {
            return Err(Error::InvalidArgument("ensemble needs at least one path".into()));
        }
        self.steps().map(|_| ())
    }

    /// Number of time steps `T / dt` (at least 1, i.e. two grid points).
    pub fn steps(&self) -> Result<usize> {
        let invalid = Error::StepGridInvalid { horizon: self.horizon, dt: self.dt };
        if !(self.dt > 0.0 && self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(invalid);
        }
        let ratio = self.horizon / self.dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps || steps > 1e8 {
            return Err(invalid);
        }
        Ok(steps as usize)
    }

    /// Path number `index`, generated from its own ChaCha stream so paths can be
    /// produced in any order.
    pub fn path(&self, index: usize) -> Result<Path> {
        self.validate()?;
        let steps = self.steps()?;
        let dim = self.dimension;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let sd = self.dt.sqrt();

        let mut points = vec![0.0; (steps + 1) * dim];
        for k in 1..=steps {
            for c in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                points[k * dim + c] = points[(k - 1) * dim + c] + sd * z;
            }
        }
        match &self.mode {
            EndpointMode::Free { start } => {
                for k in 0..=steps {
                    for c in 0..dim {
                        points[k * dim + c] += start[c];
                    }
                }
            }
            EndpointMode::Bridge { pin } => {
                let end: Vec<f64> = points[steps * dim..].to_vec();
                for k in 0..=steps {
                    let frac = k as f64 / steps as f64;
                    for c in 0..dim {
                        points[k * dim + c] = pin[c] + points[k * dim + c] - frac * end[c];
                    }
                }
                points[steps * dim..].copy_from_slice(pin);
            }
        }
        Ok(Path { dimension: dim, dt: self.dt, points })
    }
}

/// A discretized path on the grid `0, dt, ..., T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub dimension: usize,
    pub dt: f64,
    points: Vec<f64>,
}

impl Path {
    pub fn len(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dimension..(k + 1) * self.dimension]
    }

    /// The 3D trajectories of the particles the path carries.
    pub fn particles(&self) -> Vec<Trajectory> {
        (0..self.dimension / 3)
            .map(|p| Trajectory {
                dt: self.dt,
                points: (0..self.len())
                    .map(|k| {
                        let q = &self.point(k)[3 * p..3 * p + 3];
                        [q[0], q[1], q[2]]
                    })
                    .collect(),
            })
            .collect()
    }
}

/// One particle's trajectory in ℝ³.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub points: Vec<[f64; 3]>,
}

impl Trajectory {
    pub fn new(dt: f64, points: Vec<[f64; 3]>) -> Self {
        Self { dt, points }
    }
}

pub fn sample_paths(ensemble: &PathEnsemble) -> Result<Vec<Path>> {
    ensemble.validate()?;
    (0..ensemble.count).into_par_iter().map(|i| ensemble.path(i)).collect()
}

/// Distance `d`, time lag `τ` and cutoff `Λ` for the piezoelectric kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelQuery {
    pub distance: f64,
    pub lag: f64,
    pub cutoff: f64,
}

impl KernelQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0) || !self.distance.is_finite() {
            return Err(Error::InvalidArgument(format!("distance {} must be positive", self.distance)));
        }
        if !(self.lag >= 0.0) || !self.lag.is_finite() {
            return Err(Error::InvalidArgument(format!("lag {} must be nonnegative", self.lag)));
        }
        if !(self.cutoff > 0.0) || !self.cutoff.is_finite() {
            return Err(Error::InvalidArgument(format!("cutoff {} must be positive", self.cutoff)));
        }
        Ok(())
    }
}

/// `K / 4π` for `Λ√(d² + τ²) < 1`, from the power series of
/// `∫_0^Λ e^{-rτ} sin(rd)/d dr` (no cancellation, valid at `d = 0`).
fn kernel_series_over_4pi(d: f64, tau: f64, cutoff: f64) -> f64 {
    let (u, v2) = (cutoff * tau, (cutoff * d).powi(2));
    // (−u + iv)^k = P_k + i v Q_k
    let (mut p, mut q) = (1.0, 0.0);
    let mut factorial = 1.0;
    let mut sum = 0.0;
    // |Q_k| <= k ρ^{k-1}, so 25 terms leave less than 26/26! for ρ < 1.
    for k in 0..25 {
        factorial *= (k + 1) as f64;
        sum += q / factorial;
        let next_p = -u * p - v2 * q;
        q = p - u * q;
        p = next_p;
    }
    cutoff * cutoff * sum
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// The brace factor `1 - e^{-Λτ}[(τ/d) sin(Λd) + cos(Λd)]`, which lies in `[0, 2]`.
pub fn piezo_brace(distance: f64, lag: f64, cutoff: f64) -> f64 {
    let r2 = distance * distance + lag * lag;
    if cutoff * r2.sqrt() < 1.0 {
        return kernel_series_over_4pi(distance, lag, cutoff) * r2;
    }
    let (u, v) = (cutoff * lag, cutoff * distance);
    // 1 - e^{-u} cos v = (1 - e^{-u}) + 2 e^{-u} sin²(v/2), both terms nonnegative.
    let decay = (-u).exp();
    -(-u).exp_m1() + decay * (2.0 * (0.5 * v).sin().powi(2) - u * sinc(v))
}

/// `4π {brace} / (d² + τ²)`, finite for all `d, τ >= 0` (equal to `2πΛ²` at the origin).
pub fn piezo_kernel_value(distance: f64, lag: f64, cutoff: f64) -> f64 {
    let r2 = distance * distance + lag * lag;
    if cutoff * r2.sqrt() < 1.0 {
        return 4.0 * PI * kernel_series_over_4pi(distance, lag, cutoff);
    }
    4.0 * PI * piezo_brace(distance, lag, cutoff) / r2
}

/// `∫_{|k|<=Λ} e^{-|k|τ} e^{-ik·x} / |k| dk` with `|x| = d`. The oracle flag
/// integrates `4π ∫_0^Λ e^{-rτ} sin(rd)/d dr` numerically instead of using the
/// closed form.
pub fn piezo_kernel(query: &KernelQuery, use_quadrature_oracle: bool) -> Result<f64> {
    query.validate()?;
    let KernelQuery { distance: d, lag: tau, cutoff } = *query;
    if !use_quadrature_oracle {
        return Ok(piezo_kernel_value(d, tau, cutoff));
    }
    let mut points = vec![0.0];
    // Breakpoints at the decay scale and at every half period of sin(rd).
    if tau > 0.0 {
        points.extend((1..=40).map(|k| k as f64 / tau).take_while(|&r| r < cutoff));
    }
    points.extend((1..).map(|j| j as f64 * PI / d).take_while(|&r| r < cutoff));
    points.push(cutoff);
    points.sort_by(f64::total_cmp);
    let tol = Tolerance { abs: 0.0, rel: 1e-10, max_subdivisions: 100_000 };
    let est = quadrature::integrate_over(|r| (-r * tau).exp() * r * sinc(r * d), &points, tol)?;
    Ok(4.0 * PI * est.value)
}

/// The `(d, τ, Λ)` log-grid on which the closed-form kernel is checked
/// against the quadrature oracle: `d` in `[10⁻³, 10³]` at four points per
/// decade, `τ` in `{0} ∪ [10⁻³, 10²]` at two per decade, `Λ` in `{0.5, 1, 2, 10}`.
pub fn kernel_check_grid() -> Vec<KernelQuery> {
    let distances: Vec<f64> = (-12..=12).map(|k| 10f64.powf(k as f64 / 4.0)).collect();
    let lags: Vec<f64> = std::iter::once(0.0).chain((-6..=4).map(|k| 10f64.powf(k as f64 / 2.0))).collect();
    let mut grid = Vec::with_capacity(distances.len() * lags.len() * 4);
    for &cutoff in &[0.5, 1.0, 2.0, 10.0] {
        for &distance in &distances {
            for &lag in &lags {
                grid.push(KernelQuery { distance, lag, cutoff });
            }
        }
    }
    grid
}

fn action_model(model: &ModelSpec) -> Result<Option<f64>> {
    match *model {
        ModelSpec::Optical => Ok(None),
        ModelSpec::Piezo { cutoff } => {
            model.validate()?;
            Ok(Some(cutoff))
        }
        ModelSpec::Nelson { .. } => Err(Error::UnsupportedModel("actions are defined for the optical and piezo models")),
    }
}

fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// `∫_0^T ∫_0^t w(X_t - Y_s, t - s) ds dt` by the trapezoid rule on the
/// triangle, with `w` the optical weight `(α/√2) e^{-(t-s)} / |·|` or the
/// piezo weight `α K(|·|, t - s, Λ)`.
///
/// For a self pair (`same = true`) the optical diagonal is singular; its
/// trapezoid node takes the value of the first off-diagonal node.
pub fn pair_action(model: &ModelSpec, later: &Trajectory, earlier: &Trajectory, alpha: f64, same: bool) -> Result<f64> {
    if later.points.len() != earlier.points.len() || later.dt != earlier.dt {
        return Err(Error::GridMismatch);
    }
    if later.points.len() < 2 {
        return Err(Error::GridMismatch);
    }
    let cutoff = action_model(model)?;
    let dt = later.dt;
    let m = later.points.len() - 1;
    let decay: Vec<f64> = (0..=m).map(|k| (-(k as f64) * dt).exp()).collect();

    let weight = |i: usize, j: usize| -> f64 {
        let d = distance(&later.points[i], &earlier.points[j]);
        match cutoff {
            None => decay[i - j] / d,
            Some(c) => piezo_kernel_value(d, (i - j) as f64 * dt, c),
        }
    };

    let mut row = Vec::with_capacity(m + 1);
    let mut outer = Vec::with_capacity(m + 1);
    outer.push(0.0);
    for i in 1..=m {
        row.clear();
        row.push(0.5 * weight(i, 0));
        for j in 1..i {
            row.push(weight(i, j));
        }
        let mut diag = weight(i, i);
        if !diag.is_finite() || (same && cutoff.is_none()) {
            diag = weight(i, i - 1);
        }
        row.push(0.5 * diag);
        let inner = dt * pairwise_sum(&row);
        outer.push(if i == m { 0.5 * inner } else { inner });
    }
    let coupling = match cutoff {
        None => alpha / SQRT_2,
        Some(_) => alpha,
    };
    Ok(coupling * dt * pairwise_sum(&outer))
}

/// Sum of [`pair_action`] over all ordered particle pairs `(m, n)`.
pub fn retarded_action(model: &ModelSpec, particles: &[Trajectory], alpha: f64) -> Result<f64> {
    if particles.is_empty() {
        return Err(Error::InvalidArgument("no trajectories given".into()));
    }
    let mut terms = Vec::with_capacity(particles.len() * particles.len());
    for (a, later) in particles.iter().enumerate() {
        for (b, earlier) in particles.iter().enumerate() {
            terms.push(pair_action(model, later, earlier, alpha, a == b)?);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// `E|B_u|⁻¹ = √(2/(πu))` for standard 3D Brownian motion.
fn inverse_distance_mean(lag: f64) -> f64 {
    (FRAC_2_PI / lag).sqrt()
}

/// Expected optical self-action of a free 3D path over `[0, T]`:
/// `(α/√2) √(2/π) ∫_0^T ∫_0^t e^{-u} u^{-1/2} du dt`, by quadrature after `u = v²`.
pub fn optical_self_action_mean(horizon: f64, alpha: f64) -> Result<f64> {
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} must be nonnegative")));
    }
    let root = horizon.sqrt();
    let inner = quadrature::integrate(|v| 2.0 * (horizon - v * v) * (-v * v).exp(), 0.0, root, Tolerance::absolute(1e-13))?;
    Ok(alpha / SQRT_2 * FRAC_2_PI.sqrt() * inner.value)
}

/// Exact expectation of the discretized optical self-action computed by
/// [`pair_action`] on a free 3D path: the same trapezoid weights applied to
/// `E|X_t - X_s|⁻¹`, including the diagonal substitution.
pub fn optical_discrete_self_action_mean(horizon: f64, dt: f64, alpha: f64) -> Result<f64> {
    let steps = PathEnsemble::free(3, horizon, dt, 1, 0).steps()?;
    let lag_weight = |k: usize| (-(k as f64) * dt).exp() * inverse_distance_mean(k as f64 * dt);
    let mut outer = vec![0.0];
    let mut row = Vec::with_capacity(steps + 1);
    for i in 1..=steps {
        row.clear();
        row.push(0.5 * lag_weight(i));
        for j in 1..i {
            row.push(lag_weight(i - j));
        }
        row.push(0.5 * lag_weight(1));
        let inner = dt * pairwise_sum(&row);
        outer.push(if i == steps { 0.5 * inner } else { inner });
    }
    Ok(alpha / SQRT_2 * dt * pairwise_sum(&outer))
}

/// Long-time Jensen rate with its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenRate {
    /// Quadrature value.
    pub rate: f64,
    /// `α` (optical) or `8πα log(1 + Λ/2)` (piezo).
    pub closed_form: f64,
}

/// `lim (1/T) E[action]` for one free particle; `-rate` bounds the
/// one-particle ground-state energy from above.
pub fn jensen_rate(model: &ModelSpec, alpha: f64) -> Result<JensenRate> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!("coupling {alpha} must be finite and >= 0")));
    }
    match *model {
        ModelSpec::Optical => {
            // (α/√2) ∫_0^∞ e^{-u} E|B_u|⁻¹ du, with u = v²: 2 ∫_0^∞ e^{-v²} dv.
            let gauss = quadrature::integrate(|v| 2.0 * (-v * v).exp(), 0.0, 40.0, Tolerance::absolute(1e-14))?;
            Ok(JensenRate { rate: alpha / SQRT_2 * FRAC_2_PI.sqrt() * gauss.value, closed_form: alpha })
        }
        ModelSpec::Piezo { cutoff } => {
            model.validate()?;
            // ∫_{|k|<=Λ} |k|⁻¹ (|k| + k²/2)⁻¹ dk in spherical shells.
            let radial = quadrature::integrate(
                |r| 4.0 * PI * r * r / (r * (r + r * r / 2.0)),
                0.0,
                cutoff,
                Tolerance::absolute(1e-14),
            )?;
            Ok(JensenRate { rate: alpha * radial.value, closed_form: alpha * c_constants(cutoff)?.c1 })
        }
        ModelSpec::Nelson { .. } => Err(Error::UnsupportedModel("jensen rate is defined for the optical and piezo models")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparationCheck {
    /// `16π ∫_0^T ∫_0^t ds dt / (D² + (t-s)²)`.
    pub exact: f64,
    /// `8π² T / D`.
    pub bound: f64,
}

pub fn separation_bound_check(separation: f64, horizon: f64) -> Result<SeparationCheck> {
    if !(separation > 0.0) || !(horizon > 0.0) || !separation.is_finite() || !horizon.is_finite() {
        return Err(Error::InvalidArgument(format!("separation {separation} and horizon {horizon} must be positive")));
    }
    // Inner integral in closed form: ∫_0^t ds / (D² + (t-s)²) = atan(t/D) / D.
    let mut points = vec![0.0];
    points.extend((0..).map(|k| separation * 2f64.powi(k)).take_while(|&t| t < horizon));
    points.push(horizon);
    let outer = quadrature::integrate_over(
        |t| (t / separation).atan() / separation,
        &points,
        Tolerance { abs: 0.0, rel: 1e-13, max_subdivisions: 20_000 },
    )?;
    Ok(SeparationCheck { exact: 16.0 * PI * outer.value, bound: 8.0 * PI * PI * horizon / separation })
}

/// `∫_{|k|<=Λ} |k|⁻² (|k|/2 + 1)⁻¹ dk`, which equals `8π log(1 + Λ/2)`.
pub fn renorm_integral(cutoff: f64) -> Result<f64> {
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be finite and >= 0")));
    }
    let est = quadrature::integrate(
        |r| 4.0 * PI * r * r / (r * r * (r / 2.0 + 1.0)),
        0.0,
        cutoff,
        Tolerance::absolute(1e-13),
    )?;
    Ok(est.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McProbe {
    pub action_mean: f64,
    pub action_stderr: f64,
    /// `log mean exp(action)`; never below `action_mean`.
    pub log_mean_exp: f64,
    pub count: usize,
    pub horizon: f64,
    pub dt: f64,
}

/// Sample statistics of the retarded action over an ensemble. These are
/// diagnostics for the Jensen bounds, not energy estimates.
pub fn mc_energy_probe(model: &ModelSpec, alpha: f64, ensemble: &PathEnsemble) -> Result<McProbe> {
    ensemble.validate()?;
    action_model(model)?;
    let steps = ensemble.steps()? as f64;
    let cost = ensemble.count as f64 * steps * steps;
    if cost > COST_GUARD {
        return Err(Error::CostGuardExceeded { cost, limit: COST_GUARD });
    }
    let actions: Vec<f64> = (0..ensemble.count)
        .into_par_iter()
        .map(|i| {
            let path = ensemble.path(i)?;
            retarded_action(model, &path.particles(), alpha)
        })
        .collect::<Result<_>>()?;
    let (action_mean, action_stderr) = mean_and_stderr(&actions);
    Ok(McProbe {
        action_mean,
        action_stderr,
        log_mean_exp: log_mean_exp(&actions),
        count: ensemble.count,
        horizon: ensemble.horizon,
        dt: ensemble.dt,
    })
}
