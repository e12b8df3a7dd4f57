//! Quadratic partition of unity on the interparticle distance `[0, ∞)` and the
//! Dirichlet pinning profile used for the second localization.
//!
//! The partition is built from widths `b_0, b_1, ...` with partial sums
//! `t_n = b_0 + ... + b_n`:
//!
//! * `φ_0 = 1` on `[0, b_0]`, then `cos(π(t - b_0) / 2b_1)` up to `t_1`;
//! * `φ_n` rises as `sin(π(t - t_(n-1)) / 2b_n)` on `[t_(n-1), t_n]` and decays as
//!   `cos(π(t - t_n) / 2b_(n+1))` on `[t_n, t_(n+1)]`.
//!
//! Only `N + 1` widths are stored; a [`TailRule`] defines every later width in
//! closed form so any index can be evaluated without storage.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{self, Tolerance};

/// Pinning ratios must lie in `(RATIO_MARGIN, 1 - RATIO_MARGIN)`.
pub const RATIO_MARGIN: f64 = 1e-9;

/// Widths and pinning ratios past the stored truncation `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailRule {
    /// `b_n = (n - 1) * step` and `x_n = ratio` for `n > N`.
    Linear { step: f64, ratio: f64 },
    /// `b_n = scale * growth^n` and `x_n = 1/2` (pinning radius `t_(n-1) / 4`).
    Geometric { scale: f64, growth: f64 },
}

impl TailRule {
    fn validate(&self) -> Result<()> {
        match *self {
            TailRule::Linear { step, ratio } => {
                if !(step > 0.0) || !step.is_finite() {
                    return Err(Error::NonPositiveWidth { index: usize::MAX, value: step });
                }
                check_ratio(usize::MAX, ratio)
            }
            TailRule::Geometric { scale, growth } => {
                if !(scale > 0.0) || !scale.is_finite() {
                    return Err(Error::NonPositiveWidth { index: usize::MAX, value: scale });
                }
                if !(growth > 0.0) || !growth.is_finite() {
                    return Err(Error::InvalidArgument(format!("geometric growth {growth} must be positive")));
                }
                Ok(())
            }
        }
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            TailRule::Linear { step, ratio } => TailRule::Linear { step: step * factor, ratio },
            TailRule::Geometric { scale, growth } => TailRule::Geometric { scale: scale * factor, growth },
        }
    }
}

fn check_ratio(index: usize, x: f64) -> Result<()> {
    if x > RATIO_MARGIN && x < 1.0 - RATIO_MARGIN {
        Ok(())
    } else {
        Err(Error::RatioOutOfRange { index, value: x })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSchedule {
    widths: Vec<f64>,
    partial_sums: Vec<f64>,
    /// `ratios[k]` is `x_(k+1)`.
    ratios: Vec<f64>,
    tail: TailRule,
}

impl PartitionSchedule {
    /// Builds a schedule from `b_0..b_N`, `x_1..x_N` and the rule for `n > N`.
    pub fn new(widths: Vec<f64>, ratios: Vec<f64>, tail: TailRule) -> Result<Self> {
        for (index, &value) in widths.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveWidth { index, value });
            }
        }
        for (k, &x) in ratios.iter().enumerate() {
            check_ratio(k + 1, x)?;
        }
        if widths.len() < 3 {
            return Err(Error::TruncationTooShort { len: widths.len() });
        }
        if ratios.len() != widths.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "expected {} pinning ratios for N = {}, got {}",
                widths.len() - 1,
                widths.len() - 1,
                ratios.len()
            )));
        }
        tail.validate()?;

        let mut partial_sums = Vec::with_capacity(widths.len());
        let mut acc = 0.0;
        for w in &widths {
            acc += w;
            partial_sums.push(acc);
        }
        Ok(Self { widths, partial_sums, ratios, tail })
    }

    /// The stored truncation index `N`.
    pub fn truncation(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn tail_rule(&self) -> TailRule {
        self.tail
    }

    pub fn stored_widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn stored_partial_sums(&self) -> &[f64] {
        &self.partial_sums
    }

    pub fn width(&self, n: usize) -> f64 {
        if let Some(&w) = self.widths.get(n) {
            return w;
        }
        match self.tail {
            TailRule::Linear { step, .. } => (n - 1) as f64 * step,
            TailRule::Geometric { scale, growth } => scale * growth.powi(n as i32),
        }
    }

    /// `t_n = b_0 + ... + b_n`, closed form beyond the stored range.
    pub fn partial_sum(&self, n: usize) -> f64 {
        if let Some(&t) = self.partial_sums.get(n) {
            return t;
        }
        let big_n = self.truncation();
        let t_last = self.partial_sums[big_n];
        match self.tail {
            TailRule::Linear { step, .. } => {
                // sum_{i=N+1}^{n} (i - 1) = sum_{j=N}^{n-1} j
                let (n, big_n) = (n as f64, big_n as f64);
                t_last + step * 0.5 * ((n - 1.0) * n - (big_n - 1.0) * big_n)
            }
            TailRule::Geometric { scale, growth } => {
                let count = (n - big_n) as i32;
                let first = scale * growth.powi(big_n as i32 + 1);
                if growth == 1.0 {
                    t_last + first * count as f64
                } else {
                    t_last + first * (growth.powi(count) - 1.0) / (growth - 1.0)
                }
            }
        }
    }

    /// Pinning ratio `x_n = 2 L_n / t_(n-1)` for `n >= 1`.
    pub fn ratio(&self, n: usize) -> f64 {
        assert!(n >= 1, "pinning ratios start at n = 1");
        if let Some(&x) = self.ratios.get(n - 1) {
            return x;
        }
        match self.tail {
            TailRule::Linear { ratio, .. } => ratio,
            TailRule::Geometric { .. } => 0.5,
        }
    }

    /// Pinning radius `L_n = x_n t_(n-1) / 2` for `n >= 1`.
    pub fn pinning_radius(&self, n: usize) -> f64 {
        self.ratio(n) * self.partial_sum(n - 1) / 2.0
    }

    /// Copy with every width (stored and tail) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.widths.iter().map(|w| w * factor).collect(),
            self.ratios.clone(),
            self.tail.scaled(factor),
        )
    }

    /// Smallest `m` with `t < t_m`, i.e. `t` lies in `[t_(m-1), t_m)`
    /// (`m = 0` for `t < b_0`).
    pub fn locate(&self, t: f64) -> usize {
        let stored = self.partial_sums.partition_point(|&s| s <= t);
        if stored < self.partial_sums.len() {
            return stored;
        }
        // Exponential then binary search on the closed-form tail.
        let mut lo = self.truncation();
        let mut hi = lo + 1;
        while self.partial_sum(hi) <= t {
            lo = hi;
            hi = hi.saturating_mul(2);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.partial_sum(mid) <= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Evaluates `φ_n(t)`.
    pub fn phi(&self, n: usize, t: f64) -> Result<f64> {
        check_argument(t)?;
        Ok(self.phi_unchecked(n, t))
    }

    fn phi_unchecked(&self, n: usize, t: f64) -> f64 {
        if n == 0 {
            let b0 = self.widths[0];
            let t1 = self.partial_sums[1];
            return if t <= b0 {
                1.0
            } else if t <= t1 {
                (PI * (t - b0) / (2.0 * self.widths[1])).cos()
            } else {
                0.0
            };
        }
        let lo = self.partial_sum(n - 1);
        let mid = self.partial_sum(n);
        let hi = self.partial_sum(n + 1);
        if t < lo || t > hi {
            0.0
        } else if t <= mid {
            (PI * (t - lo) / (2.0 * self.width(n))).sin()
        } else {
            (PI * (t - mid) / (2.0 * self.width(n + 1))).cos()
        }
    }

    /// The indices whose `φ` may be nonzero at `t` (at most two, consecutive).
    pub fn active(&self, t: f64) -> Result<Vec<(usize, f64)>> {
        check_argument(t)?;
        let m = self.locate(t);
        let candidates: &[usize] = if m == 0 { &[0] } else { &[m - 1, m] };
        Ok(candidates
            .iter()
            .map(|&n| (n, self.phi_unchecked(n, t)))
            .filter(|&(_, v)| v != 0.0)
            .collect())
    }

    /// `Σ_n |φ_n'(t)|²`. At a knot the larger one-sided value is returned.
    pub fn grad_sq_sum(&self, t: f64) -> Result<f64> {
        check_argument(t)?;
        let m = self.locate(t);
        let right = self.interval_grad_sq(m, t);
        if m >= 1 && t == self.partial_sum(m - 1) {
            Ok(right.max(self.interval_grad_sq(m - 1, t)))
        } else {
            Ok(right)
        }
    }

    /// Squared derivatives of the two bumps active on `[t_(m-1), t_m]`.
    fn interval_grad_sq(&self, m: usize, t: f64) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let k = PI / (2.0 * self.width(m));
        let theta = k * (t - self.partial_sum(m - 1));
        let falling = -k * theta.sin();
        let rising = k * theta.cos();
        falling * falling + rising * rising
    }
}

fn check_argument(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("distance {t} must be finite and nonnegative")))
    }
}

/// Free-function form of [`PartitionSchedule::new`].
pub fn make_schedule(widths: Vec<f64>, ratios: Vec<f64>, tail: TailRule) -> Result<PartitionSchedule> {
    PartitionSchedule::new(widths, ratios, tail)
}

pub fn phi_eval(n: usize, t: f64, schedule: &PartitionSchedule) -> Result<f64> {
    schedule.phi(n, t)
}

pub fn grad_sq_sum(t: f64, schedule: &PartitionSchedule) -> Result<f64> {
    schedule.grad_sq_sum(t)
}

/// Dirichlet ground state of `-Δ/2` on the ball of radius `R` in ℝ³,
/// normalized in L²: `f(r) = sin(πr/R) / (√(2πR) r)` for `r < R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinningProfile {
    radius: f64,
}

/// Quadrature results for a [`PinningProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PinningDiagnostics {
    /// `‖f‖₂`.
    pub l2_norm: f64,
    /// `(1/2) ∫ |∇f|²`, which equals `π² / (2R²)`.
    pub localization_error: f64,
}

impl PinningProfile {
    pub fn new(radius: f64) -> Result<Self> {
        if radius > 0.0 && radius.is_finite() {
            Ok(Self { radius })
        } else {
            Err(Error::NonPositiveRadius(radius))
        }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn norm(&self) -> f64 {
        (2.0 * PI * self.radius).sqrt()
    }

    pub fn value(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.radius {
            return 0.0;
        }
        let k = PI / self.radius;
        let sin_over_r = if r < 1e-6 * self.radius {
            let x2 = (k * r) * (k * r);
            k * (1.0 - x2 / 6.0 + x2 * x2 / 120.0)
        } else {
            (k * r).sin() / r
        };
        sin_over_r / self.norm()
    }

    /// Radial derivative `f'(r)`, computed analytically.
    pub fn derivative(&self, r: f64) -> f64 {
        let r = r.abs();
        if r >= self.radius {
            return 0.0;
        }
        let k = PI / self.radius;
        let x = k * r;
        // d/dr [sin(kr)/r] = k² d/dx [sin x / x]
        let d_sinc = if x < 1e-2 {
            let x2 = x * x;
            x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0)
        } else {
            (x * x.cos() - x.sin()) / (x * x)
        };
        k * k * d_sinc / self.norm()
    }

    pub fn diagnostics(&self, quad_tol: f64) -> Result<PinningDiagnostics> {
        if !(quad_tol > 0.0) {
            return Err(Error::InvalidArgument(format!("quadrature tolerance {quad_tol} must be positive")));
        }
        let tol = Tolerance::absolute(quad_tol);
        let four_pi = 4.0 * PI;
        let mass = quadrature::integrate(|r| self.value(r).powi(2) * r * r, 0.0, self.radius, tol)?;
        let kinetic = quadrature::integrate(|r| self.derivative(r).powi(2) * r * r, 0.0, self.radius, tol)?;
        Ok(PinningDiagnostics {
            l2_norm: (four_pi * mass.value).sqrt(),
            localization_error: 0.5 * four_pi * kinetic.value,
        })
    }
}

pub fn pinning_profile(r: f64, radius: f64) -> Result<f64> {
    Ok(PinningProfile::new(radius)?.value(r))
}

pub fn pinning_diagnostics(radius: f64, quad_tol: f64) -> Result<PinningDiagnostics> {
    PinningProfile::new(radius)?.diagnostics(quad_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> PartitionSchedule {
        make_schedule(
            vec![7.27, 3.44, 3.44],
            vec![0.702, 0.702],
            TailRule::Linear { step: 3.44, ratio: 0.702 },
        )
        .unwrap()
    }

    #[test]
    fn reference_schedule_partial_sums() {
        let s = reference();
        assert_eq!(s.truncation(), 2);
        assert!((s.partial_sum(0) - 7.27).abs() < 1e-14);
        assert!((s.partial_sum(1) - 10.71).abs() < 1e-13);
        assert!((s.partial_sum(2) - 14.15).abs() < 1e-13);
        assert_eq!(s.width(3), 2.0 * 3.44);
        assert_eq!(s.width(7), 6.0 * 3.44);
        assert_eq!(s.ratio(50), 0.702);
    }

    #[test]
    fn rejects_invalid_inputs() {
        let tail = TailRule::Linear { step: 1.0, ratio: 0.5 };
        assert!(matches!(
            make_schedule(vec![1.0, -1.0, 1.0], vec![0.5, 0.5], tail),
            Err(Error::NonPositiveWidth { index: 1, .. })
        ));
        assert!(matches!(
            make_schedule(vec![1.0, 1.0, 1.0], vec![1.0, 0.5], tail),
            Err(Error::RatioOutOfRange { index: 1, .. })
        ));
        assert!(matches!(
            make_schedule(vec![1.0, 1.0], vec![0.5], tail),
            Err(Error::TruncationTooShort { len: 2 })
        ));
        assert!(make_schedule(vec![1.0, 1.0, 1.0], vec![0.5, 0.0], tail).is_err());
        assert!(make_schedule(
            vec![1.0, 1.0, 1.0],
            vec![0.5, 0.5],
            TailRule::Linear { step: 1.0, ratio: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn tail_partial_sums_match_recomputation() {
        for tail in [
            TailRule::Linear { step: 3.44, ratio: 0.702 },
            TailRule::Geometric { scale: 0.7, growth: 1.3 },
            TailRule::Geometric { scale: 0.7, growth: 1.0 },
        ] {
            let s = make_schedule(vec![7.27, 3.44, 3.44], vec![0.702, 0.702], tail).unwrap();
            let mut acc = 0.0;
            for n in 0..200 {
                acc += s.width(n);
                let stored = s.partial_sum(n);
                assert!((stored - acc).abs() <= 1e-14 * acc, "{tail:?} n={n}: {stored} vs {acc}");
                if n > 0 {
                    assert!(stored > s.partial_sum(n - 1));
                }
            }
        }
    }

    #[test]
    fn phi_reference_values() {
        let s = reference();
        assert_eq!(s.phi(0, 0.0).unwrap(), 1.0);
        assert!(s.phi(0, 10.71).unwrap().abs() < 1e-15);
        for n in 1..30 {
            assert!((s.phi(n, s.partial_sum(n)).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!(s.phi(0, -1.0).is_err());
    }

    #[test]
    fn grad_sq_sum_values() {
        let s = reference();
        assert_eq!(s.grad_sq_sum(0.0).unwrap(), 0.0);
        assert_eq!(s.grad_sq_sum(7.0).unwrap(), 0.0);
        let inner = s.grad_sq_sum(9.0).unwrap();
        assert!((inner - PI * PI / (4.0 * 3.44 * 3.44)).abs() < 1e-14);
        // At t_0 the left side is flat, the right side is π²/4b_1².
        let at_knot = s.grad_sq_sum(7.27).unwrap();
        assert!((at_knot - PI * PI / (4.0 * 3.44 * 3.44)).abs() < 1e-14);
        // At t_2 the right neighbour is wider, so the left value wins.
        let t2 = s.partial_sum(2);
        assert!((s.grad_sq_sum(t2).unwrap() - PI * PI / (4.0 * 3.44 * 3.44)).abs() < 1e-14);
        let t3 = s.partial_sum(3);
        let just_right = s.grad_sq_sum(t3 + 1e-9).unwrap();
        assert!((just_right - PI * PI / (4.0 * (3.0 * 3.44f64).powi(2))).abs() < 1e-12);
    }

    #[test]
    fn locate_spans_tail() {
        let s = reference();
        assert_eq!(s.locate(0.0), 0);
        assert_eq!(s.locate(7.27), 1);
        for n in [3usize, 10, 1000, 50_000] {
            let mid = 0.5 * (s.partial_sum(n - 1) + s.partial_sum(n));
            assert_eq!(s.locate(mid), n);
        }
    }

    #[test]
    fn pinning_reference_values() {
        let r0 = 1.3;
        let p = PinningProfile::new(r0).unwrap();
        assert_eq!(p.value(r0), 0.0);
        assert_eq!(p.value(2.0 * r0), 0.0);
        let half = p.value(r0 / 2.0);
        assert!((half - 1.0 / ((2.0 * PI * r0).sqrt() * r0 / 2.0)).abs() < 1e-14);
        let origin = PI / ((2.0 * PI * r0).sqrt() * r0);
        assert!((p.value(0.0) - origin).abs() < 1e-15);
        assert!((p.value(1e-9) - origin).abs() < 1e-14);
        assert!(matches!(PinningProfile::new(0.0), Err(Error::NonPositiveRadius(_))));
        assert!(pinning_profile(0.1, -2.0).is_err());
    }

    #[test]
    fn pinning_derivative_matches_differences() {
        let p = PinningProfile::new(2.0).unwrap();
        for &r in &[1e-4, 0.01, 0.3, 1.0, 1.7] {
            let h = 1e-6;
            let fd = (p.value(r + h) - p.value(r - h)) / (2.0 * h);
            assert!((fd - p.derivative(r)).abs() < 1e-8, "r={r}");
        }
    }

    #[test]
    fn pinning_diagnostics_closed_forms() {
        let d1 = pinning_diagnostics(1.0, 1e-12).unwrap();
        assert!((d1.l2_norm - 1.0).abs() < 1e-10);
        assert!((d1.localization_error - PI * PI / 2.0).abs() < 1e-8);
        let d2 = pinning_diagnostics(2.0, 1e-12).unwrap();
        assert!((d2.localization_error - PI * PI / 8.0).abs() < 1e-8);
        assert!(pinning_diagnostics(1.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn at_most_two_consecutive_active(t in 0.0f64..500.0) {
            let s = reference();
            let active = s.active(t).unwrap();
            prop_assert!(!active.is_empty() && active.len() <= 2);
            if active.len() == 2 {
                prop_assert_eq!(active[1].0, active[0].0 + 1);
            }
            // Nothing outside the two candidates is switched on.
            let m = s.locate(t);
            for n in m.saturating_sub(3)..m + 3 {
                if !active.iter().any(|&(k, _)| k == n) {
                    prop_assert!(s.phi(n, t).unwrap().abs() < 1e-15);
                }
            }
        }

        #[test]
        fn scaling_covariance(t in 0.0f64..200.0, lambda in 0.05f64..20.0, n in 0usize..40) {
            let s = reference();
            let scaled = s.scaled(lambda).unwrap();
            let a = scaled.phi(n, lambda * t).unwrap();
            let b = s.phi(n, t).unwrap();
            prop_assert!((a - b).abs() < 1e-13, "{} vs {}", a, b);
        }
    }
}
