//! Region-by-region no-binding brackets `F_0, F_1, ...` for the optical,
//! piezoelectric and Nelson models, plus the cutoff constants `C_1(Λ)`,
//! `C_2(Λ)` built from the shape function `φ(x) = (sin x - x cos x) / x²`.
//!
//! All brackets are written in α-scaled lengths (`b_i = a_i α`,
//! `t_i = s_i α`, `L_n = R_n α`), so the no-binding condition reads
//! `A >= α · max_n F_n`.

use std::f64::consts::{PI, SQRT_2};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::PartitionSchedule;
use crate::quadrature::{self, Tolerance};

const PI2: f64 = PI * PI;

/// Which polaron-type model the brackets describe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Fröhlich optical bipolaron.
    Optical,
    /// Piezoelectric bipolaron with ultraviolet (Debye) cutoff Λ.
    Piezo {
        #[serde(rename = "lambda")]
        cutoff: f64,
    },
    /// Massless Nelson model with user-supplied lower-bound constants.
    Nelson { d1: f64, d2: f64, alpha: f64 },
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::Optical => Ok(()),
            ModelSpec::Piezo { cutoff } => {
                if cutoff > 0.0 && cutoff.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidModel(format!("piezo cutoff {cutoff} must be positive")))
                }
            }
            ModelSpec::Nelson { d1, d2, alpha } => {
                for (name, v) in [("d1", d1), ("d2", d2), ("alpha", alpha)] {
                    if !(v >= 0.0) || !v.is_finite() {
                        return Err(Error::InvalidModel(format!("nelson {name} = {v} must be finite and >= 0")));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Optical => "optical",
            ModelSpec::Piezo { .. } => "piezo",
            ModelSpec::Nelson { .. } => "nelson",
        }
    }
}

/// `φ(x) = (sin x - x cos x) / x²`, with its Taylor series below `x = 0.01`.
pub fn phi_shape(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        x * (1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0)
    } else {
        (x.sin() - x * x.cos()) / (x * x)
    }
}

fn phi_over_x(x: f64) -> f64 {
    if x < 1e-2 {
        let x2 = x * x;
        1.0 / 3.0 - x2 / 30.0 + x2 * x2 / 840.0
    } else {
        phi_shape(x) / x
    }
}

/// Norms of `φ` entering `C_2(Λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiNorms {
    /// `‖φ‖_∞`.
    pub sup_norm: f64,
    /// Where the supremum is attained.
    pub sup_location: f64,
    /// `‖φ(x)/x‖_1` over `(0, ∞)`.
    pub over_x_l1: f64,
    /// Quadrature error estimate of the finite part.
    pub quadrature_error: f64,
    /// Cutoff `X` (a zero of φ) where the quadrature stops.
    pub truncation_point: f64,
    /// Period-averaged estimate of `∫_X^∞ |φ/x|` included in `over_x_l1`.
    pub tail_estimate: f64,
    /// Rigorous majorant `∫_X^∞ (1 + x)/x³ = 1/X + 1/(2X²)` of the same tail.
    pub tail_bound: f64,
}

/// The `k`-th positive zero of φ (root of `tan x = x` in `(kπ, kπ + π/2)`), by bisection.
pub fn phi_zero(k: usize) -> f64 {
    assert!(k >= 1);
    let g = |x: f64| x.sin() - x * x.cos();
    let mut lo = k as f64 * PI;
    let mut hi = lo + PI / 2.0;
    let g_lo = g(lo);
    debug_assert!(g_lo * g(hi) < 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) * g_lo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const PHI_ZERO_COUNT: usize = 3200;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > 1e-13 * (1.0 + a.abs()) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Computes `‖φ‖_∞` (dense grid plus golden-section refinement) and
/// `‖φ(x)/x‖_1` (quadrature split at the zeros of φ plus a tail estimate).
pub fn phi_norms(quad_tol: f64) -> Result<PhiNorms> {
    if !(quad_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("quadrature tolerance {quad_tol} must be positive")));
    }

    // Past x = 20, |φ| <= (1 + x)/x² < 0.053, well under the first maximum.
    let step = 1e-3;
    let mut best = (0.0, 0.0);
    for i in 1..=20_000 {
        let x = i as f64 * step;
        let v = phi_shape(x).abs();
        if v > best.1 {
            best = (x, v);
        }
    }
    let sup_location = golden_max(|x| phi_shape(x).abs(), best.0 - step, best.0 + step);
    let sup_norm = phi_shape(sup_location).abs();

    let mut points = Vec::with_capacity(PHI_ZERO_COUNT + 1);
    points.push(0.0);
    points.extend((1..=PHI_ZERO_COUNT).map(phi_zero));
    let head = quadrature::integrate_over(|x| phi_over_x(x).abs(), &points, Tolerance::absolute(quad_tol))?;
    let truncation_point = *points.last().expect("nonempty");

    // Writing |φ(x)/x| = g(x) |cos u(x)| with g = √(1+x²)/x³ and u = x + atan(1/x),
    // consecutive zeros are one period of |cos u| apart, so averaging |cos| to 2/π
    // leaves an O(X⁻³) error. ∫_X^∞ g dx = ∫_0^{1/X} √(1+w²) dw.
    let w = 1.0 / truncation_point;
    let tail_estimate = (2.0 / PI) * 0.5 * (w * (1.0 + w * w).sqrt() + w.asinh());
    let tail_bound = w + 0.5 * w * w;

    Ok(PhiNorms {
        sup_norm,
        sup_location,
        over_x_l1: head.value + tail_estimate,
        quadrature_error: head.error,
        truncation_point,
        tail_estimate,
        tail_bound,
    })
}

/// Norms computed once per process at tolerance `1e-12`.
pub fn cached_phi_norms() -> &'static PhiNorms {
    static NORMS: OnceLock<PhiNorms> = OnceLock::new();
    NORMS.get_or_init(|| phi_norms(1e-12).expect("φ-norm quadrature converges at the default tolerance"))
}

/// `C_1(Λ)`, `C_2(Λ)` with the φ norms they were built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CutoffConstants {
    pub cutoff: f64,
    pub c1: f64,
    pub c2: f64,
    pub phi_sup: f64,
    pub phi_over_x_l1: f64,
}

/// `C_1 = 8π log(1 + Λ/2)`, `C_2 = 32π² [‖φ/x‖_1 + 4‖φ‖_∞ log(1 + Λ/2)]²`.
pub fn c_constants(cutoff: f64) -> Result<CutoffConstants> {
    if !(cutoff >= 0.0) || !cutoff.is_finite() {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be finite and >= 0")));
    }
    let norms = cached_phi_norms();
    let log_term = (cutoff / 2.0).ln_1p();
    let inner = norms.over_x_l1 + 4.0 * norms.sup_norm * log_term;
    Ok(CutoffConstants {
        cutoff,
        c1: 8.0 * PI * log_term,
        c2: 32.0 * PI2 * inner * inner,
        phi_sup: norms.sup_norm,
        phi_over_x_l1: norms.over_x_l1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SeparationCost {
    /// `√2 t_(n+1) / (t_(n-1) - 2L_n)`, written in the pinning ratio.
    Optical,
    /// `8π² t_(n+1) / (t_(n-1) - 2L_n)`.
    Retarded,
}

/// A model with its constants resolved, ready for bracket evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Brackets {
    model: ModelSpec,
    first_region: f64,
    separation: SeparationCost,
}

impl Brackets {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        model.validate()?;
        let (first_region, separation) = match *model {
            ModelSpec::Optical => (2.0, SeparationCost::Optical),
            ModelSpec::Piezo { cutoff } => (8.0 * c_constants(cutoff)?.c2, SeparationCost::Retarded),
            ModelSpec::Nelson { d1, d2, alpha } => (d1 + d2 * alpha.powi(6), SeparationCost::Retarded),
        };
        Ok(Self { model: *model, first_region, separation })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    /// Coefficient of `(b_0 + b_1)` in `F_0`: 2, `8 C_2(Λ)`, or `D_1 + D_2 α⁶`.
    pub fn first_region_coefficient(&self) -> f64 {
        self.first_region
    }

    /// `F_0 = c (b_0 + b_1) + π² (b_0 + b_1) / (2 b_1²)`.
    pub fn zero(&self, b0: f64, b1: f64) -> Result<f64> {
        if !(b0 > 0.0) || !b0.is_finite() {
            return Err(Error::NonPositiveWidth { index: 0, value: b0 });
        }
        if !(b1 > 0.0) || !b1.is_finite() {
            return Err(Error::NonPositiveWidth { index: 1, value: b1 });
        }
        let t1 = b0 + b1;
        Ok(self.first_region * t1 + PI2 * t1 / (2.0 * b1 * b1))
    }

    /// `F_n` for `n >= 1` read off a schedule.
    pub fn region(&self, n: usize, schedule: &PartitionSchedule) -> Result<f64> {
        if n == 0 {
            let w = schedule.stored_widths();
            return self.zero(w[0], w[1]);
        }
        let min_width = schedule.width(n + 1).min(schedule.width(n));
        self.region_from(n, schedule.partial_sum(n - 1), schedule.partial_sum(n + 1), min_width, schedule.ratio(n))
    }

    /// `F_n` from its ingredients: `t_(n-1)`, `t_(n+1)`, `min(b_(n+1), b_n)`, `x_n`.
    pub fn region_from(&self, n: usize, t_prev: f64, t_next: f64, min_width: f64, ratio: f64) -> Result<f64> {
        if !(ratio > 0.0 && ratio < 1.0) || !(t_prev > 0.0) {
            return Err(Error::PinningViolation { index: n, gap: t_prev * (1.0 - ratio) });
        }
        let kinetic = PI2 * t_next / (2.0 * min_width * min_width);
        match self.separation {
            SeparationCost::Optical => Ok(kinetic
                + (SQRT_2 * t_next / t_prev)
                    * (1.0 / (1.0 - ratio) + SQRT_2 * PI2 / (t_prev * ratio * ratio))),
            SeparationCost::Retarded => {
                let pin = ratio * t_prev / 2.0;
                let gap = t_prev - 2.0 * pin;
                if !(gap > 0.0) {
                    return Err(Error::PinningViolation { index: n, gap });
                }
                Ok(kinetic + 8.0 * PI2 * t_next / gap + PI2 * t_next / (2.0 * pin * pin))
            }
        }
    }

    /// Closed-form majorant of `sup_n F_n` for `b_i = b lⁱ`, `L_n = t_(n-1) / 4`.
    pub fn geometric(&self, b: f64, l: f64) -> Result<f64> {
        if self.separation == SeparationCost::Optical {
            return Err(Error::UnsupportedModel("geometric bound applies to the piezo and nelson models"));
        }
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::NonPositiveWidth { index: 0, value: b });
        }
        if !(l > 1.0) || !l.is_finite() {
            return Err(Error::RatioNotAboveOne(l));
        }
        let first = self.first_region * b * (1.0 + l) + PI2 * (1.0 + l) / (2.0 * b * l * l);
        let l3 = l * l * l;
        let rest = PI2 * l / (2.0 * b * (l - 1.0)) + 16.0 * PI2 * l3 / (l - 1.0) + 8.0 * PI2 * l3 / (b * (l - 1.0));
        Ok(first.max(rest))
    }
}

pub fn bracket_zero(model: &ModelSpec, b0: f64, b1: f64) -> Result<f64> {
    Brackets::new(model)?.zero(b0, b1)
}

pub fn bracket_n(model: &ModelSpec, n: usize, schedule: &PartitionSchedule) -> Result<f64> {
    Brackets::new(model)?.region(n, schedule)
}

pub fn geometric_bound(model: &ModelSpec, b: f64, l: f64) -> Result<f64> {
    Brackets::new(model)?.geometric(b, l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{make_schedule, TailRule};

    fn reference() -> PartitionSchedule {
        make_schedule(vec![7.27, 3.44, 3.44], vec![0.702, 0.702], TailRule::Linear { step: 3.44, ratio: 0.702 })
            .unwrap()
    }

    #[test]
    fn phi_shape_values() {
        assert_eq!(phi_shape(0.0), 0.0);
        assert!((phi_shape(PI) - 1.0 / PI).abs() < 1e-15);
        assert!((phi_shape(1e-3) - 1e-3 / 3.0).abs() < 1e-10);
        // series and direct formula meet at the switch point
        let x: f64 = 1e-2;
        let direct = (x.sin() - x * x.cos()) / (x * x);
        assert!((phi_shape(x) - direct).abs() < 1e-12);
        let below = 1e-2 * (1.0 - 1e-12);
        assert!((phi_shape(below) - direct).abs() < 1e-12);
    }

    #[test]
    fn phi_zeros_solve_tan_x_eq_x() {
        for k in [1, 2, 10, 1000] {
            let z = phi_zero(k);
            assert!(z > k as f64 * PI && z < k as f64 * PI + PI / 2.0);
            assert!(phi_shape(z).abs() < 1e-12, "k={k}");
        }
        assert!((phi_zero(1) - 4.493_409_457_909_064).abs() < 1e-12);
    }

    #[test]
    fn phi_sup_norm() {
        let norms = cached_phi_norms();
        // Independent dense scan at 1e-6 spacing near the peak.
        let mut scan: f64 = 0.0;
        for i in 0..=1_000_000 {
            let x = 1.5 + i as f64 * 1e-6;
            scan = scan.max(phi_shape(x).abs());
        }
        assert!((norms.sup_norm - scan).abs() < 1e-11, "{} vs {}", norms.sup_norm, scan);
        assert!((norms.sup_norm - 0.436).abs() < 1e-3);
        assert!((norms.sup_location - 2.08).abs() < 1e-2);
        // Series bound on the first hundredth.
        let near_zero = (0..=1000).map(|i| phi_shape(i as f64 * 1e-5).abs()).fold(0.0, f64::max);
        assert!(near_zero <= 1e-2 / 3.0 + 1e-6);
    }

    #[test]
    fn phi_l1_tail_is_consistent() {
        let norms = cached_phi_norms();
        assert!(norms.over_x_l1 > 0.0 && norms.over_x_l1.is_finite());
        assert!(norms.tail_estimate <= norms.tail_bound);
        // Moving the cutoff from the 400th to the 3200th zero must not change the total.
        let short: Vec<f64> = std::iter::once(0.0).chain((1..=400).map(phi_zero)).collect();
        let head = quadrature::integrate_over(|x| phi_over_x(x).abs(), &short, Tolerance::absolute(1e-13)).unwrap();
        let w = 1.0 / short.last().unwrap();
        let tail = (2.0 / PI) * 0.5 * (w * (1.0 + w * w).sqrt() + w.asinh());
        assert!((head.value + tail - norms.over_x_l1).abs() < 1e-9);
    }

    #[test]
    fn cutoff_constants() {
        let zero = c_constants(0.0).unwrap();
        assert_eq!(zero.c1, 0.0);
        let two = c_constants(2.0).unwrap();
        assert!((two.c1 - 8.0 * PI * 2f64.ln()).abs() < 1e-13);
        assert!(c_constants(1.0).unwrap().c2 > zero.c2);
        let l1 = cached_phi_norms().over_x_l1;
        assert!((zero.c2 - 32.0 * PI2 * l1 * l1).abs() < 1e-9);
        assert!(c_constants(-1.0).is_err());
    }

    #[test]
    fn optical_bracket_zero_at_reference_point() {
        let f0 = bracket_zero(&ModelSpec::Optical, 7.27, 3.44).unwrap();
        let expected = 2.0 * 10.71 + PI2 * 10.71 / (2.0 * 3.44 * 3.44);
        assert!((f0 - expected).abs() < 1e-12);
        assert!(f0 < 25.9);
        let tiny = bracket_zero(&ModelSpec::Optical, 1e-300, 2.0).unwrap();
        assert!((tiny - (4.0 + PI2 / 4.0)).abs() < 1e-12);
        assert!(matches!(bracket_zero(&ModelSpec::Optical, 0.0, 1.0), Err(Error::NonPositiveWidth { .. })));
    }

    #[test]
    fn optical_bracket_one_at_reference_point() {
        let f1 = bracket_n(&ModelSpec::Optical, 1, &reference()).unwrap();
        // t_0 = 7.27, t_2 = 14.15, min width 3.44, x = 0.702
        let expected = PI2 * 14.15 / (2.0 * 3.44 * 3.44)
            + SQRT_2 * 14.15 / 7.27 * (1.0 / (1.0 - 0.702) + SQRT_2 * PI2 / (7.27 * 0.702 * 0.702));
        assert!((f1 - expected).abs() < 1e-11);
        assert!((f1 - 25.86).abs() < 0.01);
    }

    #[test]
    fn nelson_without_d2_matches_piezo() {
        let cutoff = 1.7;
        let c2 = c_constants(cutoff).unwrap().c2;
        let piezo = Brackets::new(&ModelSpec::Piezo { cutoff }).unwrap();
        let nelson = Brackets::new(&ModelSpec::Nelson { d1: 8.0 * c2, d2: 0.0, alpha: 3.0 }).unwrap();
        assert_eq!(piezo.zero(0.3, 0.2).unwrap().to_bits(), nelson.zero(0.3, 0.2).unwrap().to_bits());
        let s = reference();
        for n in 1..20 {
            assert_eq!(piezo.region(n, &s).unwrap().to_bits(), nelson.region(n, &s).unwrap().to_bits());
        }
    }

    #[test]
    fn piezo_half_ratio_middle_term() {
        let s = make_schedule(vec![2.0, 1.0, 1.5], vec![0.5, 0.5], TailRule::Geometric { scale: 1.0, growth: 1.5 })
            .unwrap();
        let cutoff = 1.0;
        let f1 = bracket_n(&ModelSpec::Piezo { cutoff }, 1, &s).unwrap();
        let (t0, t2) = (2.0, 4.5);
        let l = t0 / 4.0;
        let expected = PI2 * t2 / 2.0 + 16.0 * PI2 * t2 / t0 + PI2 * t2 / (2.0 * l * l);
        assert!((f1 - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn ratio_near_one_diverges() {
        let b = Brackets::new(&ModelSpec::Optical).unwrap();
        let mut last = 0.0;
        for x in [0.9, 0.99, 0.999, 0.999_999] {
            let v = b.region_from(1, 7.0, 14.0, 3.0, x).unwrap();
            assert!(v > last);
            last = v;
        }
        assert!(last > 1e6);
        assert!(matches!(b.region_from(1, 7.0, 14.0, 3.0, 1.0), Err(Error::PinningViolation { .. })));
    }

    #[test]
    fn geometric_bound_edges() {
        let m = ModelSpec::Piezo { cutoff: 1.0 };
        assert!(matches!(geometric_bound(&m, 1.0, 1.0), Err(Error::RatioNotAboveOne(_))));
        assert!(matches!(geometric_bound(&ModelSpec::Optical, 1.0, 2.0), Err(Error::UnsupportedModel(_))));
        assert!(geometric_bound(&m, 1.0, 1.0 + 1e-9).unwrap() > 1e9);
        assert!(geometric_bound(&m, 1e6, 2.0).unwrap() > 1e9);
    }

    #[test]
    fn model_validation() {
        assert!(ModelSpec::Piezo { cutoff: 0.0 }.validate().is_err());
        assert!(ModelSpec::Nelson { d1: -1.0, d2: 0.0, alpha: 1.0 }.validate().is_err());
        assert!(ModelSpec::Nelson { d1: 1.0, d2: 0.0, alpha: f64::NAN }.validate().is_err());
        assert!(ModelSpec::Optical.validate().is_ok());
    }
}
