//! Minimization of the truncated minimax objective `F_0 ∨ F_1`, extension of
//! the optimum by the linear tail rule, numerical tail certification, and the
//! resulting no-binding constants.
//!
//! The search runs in `(ln b_0, ln b_1, ln b_2, logit x)` so every candidate
//! has positive widths; candidates whose ratio rounds outside the admissible
//! interval get an infinite penalty and are never returned.

use std::cmp::Ordering;
use std::f64::consts::{PI, SQRT_2};

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{Brackets, ModelSpec};
use crate::error::{Error, Result};
use crate::partition::{PartitionSchedule, TailRule, RATIO_MARGIN};
use crate::simplex::{self, SimplexOptions};

/// Widths and pinning ratio of the truncated problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedPoint {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub x: f64,
}

impl TruncatedPoint {
    pub const REFERENCE: TruncatedPoint = TruncatedPoint { b0: 7.27, b1: 3.44, b2: 3.44, x: 0.702 };

    fn as_array(&self) -> [f64; 4] {
        [self.b0, self.b1, self.b2, self.x]
    }

    fn lexicographic(&self, other: &Self) -> Ordering {
        self.as_array()
            .iter()
            .zip(other.as_array().iter())
            .map(|(a, b)| a.total_cmp(b))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    }

    fn encode(&self) -> [f64; 4] {
        [self.b0.ln(), self.b1.ln(), self.b2.ln(), (self.x / (1.0 - self.x)).ln()]
    }

    fn decode(y: &[f64]) -> Self {
        TruncatedPoint { b0: y[0].exp(), b1: y[1].exp(), b2: y[2].exp(), x: 1.0 / (1.0 + (-y[3]).exp()) }
    }

    /// The schedule `b_0, b_1, b_2`, `x_1 = x_2 = x`, with `b_n = (n - 1) b_2`, `x_n = x` beyond.
    pub fn schedule(&self) -> Result<PartitionSchedule> {
        PartitionSchedule::new(
            vec![self.b0, self.b1, self.b2],
            vec![self.x, self.x],
            TailRule::Linear { step: self.b2, ratio: self.x },
        )
    }
}

/// Status of the `F_(n+1) <= F_n` check beyond the searched regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TailCertificate {
    Uncertified,
    /// Checked numerically for `1 <= n <= up_to`.
    Monotone {
        up_to: usize,
        /// `F_n` at `n = up_to`.
        last_value: f64,
        /// `lim F_n` under the linear tail rule.
        asymptotic_limit: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimumReport {
    pub model: ModelSpec,
    pub point: TruncatedPoint,
    /// `max_n F_n` over `per_region`.
    pub value: f64,
    pub per_region: Vec<(usize, f64)>,
    pub achieving_index: usize,
    pub tail: TailCertificate,
    /// `value · √2`, the threshold in the `p²` kinetic-energy convention.
    pub converted_value: f64,
    pub evaluations: usize,
    pub converged_starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    pub starts: usize,
    pub tol: f64,
    pub seed: u64,
    pub max_evaluations: usize,
    /// Extra starting points tried after the random ones (warm starts).
    pub warm_starts: Vec<TruncatedPoint>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { starts: 32, tol: 1e-8, seed: 0x6e6f_6269_6e64, max_evaluations: 100_000, warm_starts: Vec::new() }
    }
}

fn truncated_objective(brackets: &Brackets, p: &TruncatedPoint) -> f64 {
    if !(p.x > RATIO_MARGIN && p.x < 1.0 - RATIO_MARGIN) {
        return f64::INFINITY;
    }
    let f0 = brackets.zero(p.b0, p.b1);
    // Same association as the schedule's partial sums.
    let t2 = p.b0 + p.b1 + p.b2;
    let f1 = brackets.region_from(1, p.b0, t2, p.b2.min(p.b1), p.x);
    match (f0, f1) {
        (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => a.max(b),
        _ => f64::INFINITY,
    }
}

struct StartOutcome {
    point: TruncatedPoint,
    value: f64,
    evaluations: usize,
    converged: bool,
}

fn run_start(brackets: &Brackets, start: TruncatedPoint, opts: &SearchOptions, stream: u64) -> StartOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(stream);
    let objective = |y: &[f64]| truncated_objective(brackets, &TruncatedPoint::decode(y));

    let mut y = start.encode().to_vec();
    let mut best = objective(&y);
    let mut evaluations = 1;
    let mut converged = false;
    let mut scale = 0.5;
    // Restart from the incumbent until a full run no longer improves it; a
    // fresh simplex escapes the false convergence NM shows on `max` kinks.
    for _ in 0..40 {
        let remaining = opts.max_evaluations.saturating_sub(evaluations);
        if remaining == 0 {
            break;
        }
        let steps: Vec<f64> =
            (0..4).map(|_| scale * if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * rng.gen_range(0.5..1.0)).collect();
        let simplex_opts = SimplexOptions { f_tol: opts.tol, x_tol: 1e-9, max_evaluations: remaining };
        let run = simplex::minimize(objective, &y, &steps, simplex_opts);
        evaluations += run.evaluations;
        let improvement = best - run.value;
        if run.value <= best {
            y = run.point;
            best = run.value;
        }
        converged = run.converged;
        if run.converged && improvement.abs() < opts.tol {
            break;
        }
        scale = (scale * 0.5).max(1e-3);
    }
    StartOutcome { point: TruncatedPoint::decode(&y), value: best, evaluations, converged }
}

fn log_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn random_start(seed: u64, index: u64) -> TruncatedPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    TruncatedPoint {
        b0: log_uniform(&mut rng, 0.5, 50.0),
        b1: log_uniform(&mut rng, 0.5, 50.0),
        b2: log_uniform(&mut rng, 0.5, 50.0),
        x: rng.gen_range(0.1..0.9),
    }
}

/// Evaluates `F_0 ∨ F_1` at a fixed point through the schedule, without search.
pub fn evaluate_truncated(model: &ModelSpec, point: TruncatedPoint) -> Result<OptimumReport> {
    let brackets = Brackets::new(model)?;
    let schedule = point.schedule()?;
    let per_region = vec![(0, brackets.region(0, &schedule)?), (1, brackets.region(1, &schedule)?)];
    Ok(report_from(model, point, per_region, TailCertificate::Uncertified, 0, 0))
}

fn report_from(
    model: &ModelSpec,
    point: TruncatedPoint,
    per_region: Vec<(usize, f64)>,
    tail: TailCertificate,
    evaluations: usize,
    converged_starts: usize,
) -> OptimumReport {
    let (achieving_index, value) = per_region
        .iter()
        .copied()
        .fold((0, f64::NEG_INFINITY), |acc, (n, v)| if v > acc.1 { (n, v) } else { acc });
    OptimumReport {
        model: *model,
        point,
        value,
        per_region,
        achieving_index,
        tail,
        converted_value: kinetic_rescale(value),
        evaluations,
        converged_starts,
    }
}

/// Multi-start simplex search on `F_0 ∨ F_1` over `(b_0, b_1, b_2, x)`.
///
/// Starts are drawn log-uniformly from `b ∈ [0.5, 50]` and uniformly from
/// `x ∈ [0.1, 0.9]`, each from its own ChaCha stream, so the result depends
/// only on `opts` and not on how rayon schedules the starts.
pub fn minimize_truncated(model: &ModelSpec, opts: &SearchOptions) -> Result<OptimumReport> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be positive", opts.tol)));
    }
    let brackets = Brackets::new(model)?;
    let mut starts: Vec<TruncatedPoint> = (0..opts.starts as u64).map(|i| random_start(opts.seed, i)).collect();
    starts.extend(opts.warm_starts.iter().copied());
    if starts.is_empty() {
        return Err(Error::InvalidArgument("at least one start is required".into()));
    }

    let outcomes: Vec<StartOutcome> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &s)| run_start(&brackets, s, opts, i as u64))
        .collect();

    let evaluations = outcomes.iter().map(|o| o.evaluations).sum();
    let converged_starts = outcomes.iter().filter(|o| o.converged).count();
    if converged_starts == 0 {
        return Err(Error::NoConvergence { starts: starts.len(), tol: opts.tol });
    }
    let best = outcomes
        .iter()
        .filter(|o| o.value.is_finite())
        .min_by(|a, b| a.value.total_cmp(&b.value).then_with(|| a.point.lexicographic(&b.point)))
        .ok_or_else(|| Error::DomainViolation("every start ended at an infeasible point".into()))?;

    let mut report = evaluate_truncated(model, best.point)?;
    let drift = (report.value - best.value).abs();
    if drift > 1e-12 * best.value.abs() {
        return Err(Error::DomainViolation(format!(
            "re-evaluation gives {} but the search reported {}",
            report.value, best.value
        )));
    }
    report.evaluations = evaluations;
    report.converged_starts = converged_starts;

    let (f0, f1) = (report.per_region[0].1, report.per_region[1].1);
    let imbalance = (f0 - f1).abs() / f0.max(f1);
    if imbalance > 0.05 {
        info!("{}: optimum has F0 = {f0}, F1 = {f1} (imbalance {imbalance:.3})", model.name());
    }
    debug!(
        "{}: best {} at {:?} ({} of {} starts converged, {} evaluations)",
        model.name(),
        report.value,
        report.point,
        converged_starts,
        starts.len(),
        evaluations
    );
    Ok(report)
}

/// `lim_(n→∞) F_n` under `b_n = (n - 1) b_2`, `x_n = x`: `t_(n+1) / t_(n-1) → 1`
/// and `t_(n+1) / b_n² → 1 / (2 b_2)`.
pub fn asymptotic_tail_limit(model: &ModelSpec, point: &TruncatedPoint) -> f64 {
    let kinetic = PI * PI / (4.0 * point.b2);
    match model {
        ModelSpec::Optical => kinetic + SQRT_2 / (1.0 - point.x),
        _ => kinetic + 8.0 * PI * PI / (1.0 - point.x),
    }
}

/// Extends the optimum by the linear tail rule and checks `F_(n+1) <= F_n`
/// for `1 <= n <= n_check`. The returned report carries `F_0..F_(n_check)`.
pub fn build_full_schedule(opt: &OptimumReport, n_check: usize) -> Result<(PartitionSchedule, OptimumReport)> {
    if n_check < 10 {
        return Err(Error::InvalidArgument(format!("n_check = {n_check} must be at least 10")));
    }
    let brackets = Brackets::new(&opt.model)?;
    let schedule = opt.point.schedule()?;

    let mut per_region = Vec::with_capacity(n_check + 1);
    per_region.push((0, brackets.region(0, &schedule)?));
    let mut current = brackets.region(1, &schedule)?;
    per_region.push((1, current));
    for n in 1..=n_check {
        let next = brackets.region(n + 1, &schedule)?;
        if next > current {
            return Err(Error::TailViolation { index: n, current, next });
        }
        if n < n_check {
            per_region.push((n + 1, next));
        }
        current = next;
    }

    let last_value = per_region.last().expect("nonempty").1;
    let asymptotic_limit = asymptotic_tail_limit(&opt.model, &opt.point);
    debug!("tail monotone to n = {n_check}; F_n = {last_value}, limit {asymptotic_limit}");
    let tail = TailCertificate::Monotone { up_to: n_check, last_value, asymptotic_limit };
    let report = report_from(&opt.model, opt.point, per_region, tail, opt.evaluations, opt.converged_starts);
    Ok((schedule, report))
}

/// The certified threshold: `C` in `A >= C α` for the optical and piezo
/// models; for Nelson, whose α⁶ term does not factor, the absolute
/// `A(α) = α · max_n F_n` at the model's α.
pub fn no_binding_constant(opt: &OptimumReport) -> Result<f64> {
    match opt.tail {
        TailCertificate::Monotone { .. } => {}
        TailCertificate::Uncertified => return Err(Error::UncertifiedTail),
    }
    if !opt.value.is_finite() {
        return Err(Error::UncertifiedTail);
    }
    Ok(match opt.model {
        ModelSpec::Optical | ModelSpec::Piezo { .. } => opt.value,
        ModelSpec::Nelson { alpha, .. } => alpha * opt.value,
    })
}

/// Converts a threshold from the `p²/2` to the `p²` kinetic-energy convention.
pub fn kinetic_rescale(value: f64) -> f64 {
    value * SQRT_2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub cutoff: f64,
    pub constant: f64,
    pub point: TruncatedPoint,
}

/// Tabulates `C(Λ)` on an increasing grid, warm-starting each cutoff from its
/// neighbour. A decrease between neighbours can only mean the smaller cutoff
/// was under-optimized (the brackets grow with Λ), so that point is re-searched
/// from the larger cutoff's optimum until the table is nondecreasing.
pub fn lambda_curve(grid: &[f64], opts: &SearchOptions, n_check: usize) -> Result<Vec<CurvePoint>> {
    if grid.iter().any(|&c| !(c > 0.0) || !c.is_finite()) {
        return Err(Error::InvalidArgument("cutoffs must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("cutoff grid must be strictly increasing".into()));
    }

    let solve = |cutoff: f64, warm: &[TruncatedPoint]| -> Result<CurvePoint> {
        let model = ModelSpec::Piezo { cutoff };
        let mut local = opts.clone();
        local.warm_starts.extend_from_slice(warm);
        let found = minimize_truncated(&model, &local)?;
        let (_, certified) = build_full_schedule(&found, n_check)?;
        Ok(CurvePoint { cutoff, constant: no_binding_constant(&certified)?, point: certified.point })
    };

    let mut table: Vec<CurvePoint> = Vec::with_capacity(grid.len());
    for &cutoff in grid {
        let warm: Vec<TruncatedPoint> = table.last().map(|p| p.point).into_iter().collect();
        table.push(solve(cutoff, &warm)?);
    }

    let mut passes = 0;
    while let Some(k) = (1..table.len()).find(|&k| table[k].constant < table[k - 1].constant) {
        passes += 1;
        if passes > table.len() * table.len() + 1 {
            return Err(Error::NoConvergence { starts: opts.starts, tol: opts.tol });
        }
        info!(
            "C({}) = {} exceeds C({}) = {}; re-optimizing",
            table[k - 1].cutoff,
            table[k - 1].constant,
            table[k].cutoff,
            table[k].constant
        );
        let warm = [table[k].point, table[k - 1].point];
        table[k - 1] = solve(table[k - 1].cutoff, &warm)?;
    }
    Ok(table)
}
