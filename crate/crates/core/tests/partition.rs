use std::f64::consts::PI;

use nobind_core::partition::{make_schedule, pinning_diagnostics, PartitionSchedule, TailRule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn reference() -> PartitionSchedule {
    make_schedule(vec![7.27, 3.44, 3.44], vec![0.702, 0.702], TailRule::Linear { step: 3.44, ratio: 0.702 }).unwrap()
}

fn geometric() -> PartitionSchedule {
    make_schedule(
        vec![0.4, 0.6, 0.9, 1.35],
        vec![0.5, 0.5, 0.5],
        TailRule::Geometric { scale: 0.4, growth: 1.5 },
    )
    .unwrap()
}

fn samples(upper: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ts: Vec<f64> = (0..100_000).map(|_| rng.gen_range(0.0..upper)).collect();
    let (lo, hi) = ((1e-6f64).ln(), upper.ln());
    ts.extend((0..100_000).map(|_| rng.gen_range(lo..hi).exp()));
    ts
}

#[test]
fn squares_sum_to_one() {
    for schedule in [reference(), geometric()] {
        let upper = schedule.partial_sum(schedule.truncation() + 5);
        let mut worst: f64 = 0.0;
        for t in samples(upper, 11) {
            let active = schedule.active(t).unwrap();
            let sum: f64 = active.iter().map(|(_, v)| v * v).sum();
            worst = worst.max((sum - 1.0).abs());
        }
        assert!(worst < 1e-12, "residual {worst}");
    }
}

#[test]
fn at_most_two_consecutive_bumps() {
    let schedule = reference();
    let upper = schedule.partial_sum(schedule.truncation() + 5);
    for t in samples(upper, 12).into_iter().step_by(7) {
        let active = schedule.active(t).unwrap();
        assert!(!active.is_empty() && active.len() <= 2, "t = {t}");
        if let [(a, _), (b, _)] = active[..] {
            assert_eq!(b, a + 1);
        }
        // Brute force over nearby indices agrees with the active set.
        for n in 0..schedule.truncation() + 8 {
            let v = schedule.phi(n, t).unwrap();
            let listed = active.iter().any(|&(m, _)| m == n);
            assert_eq!(v != 0.0, listed, "n = {n}, t = {t}");
        }
    }
}

#[test]
fn derivative_sum_is_constant_on_each_interval() {
    for schedule in [reference(), geometric()] {
        for m in 1..schedule.truncation() + 5 {
            let (lo, hi) = (schedule.partial_sum(m - 1), schedule.partial_sum(m));
            let expected = PI * PI / (4.0 * schedule.width(m).powi(2));
            for k in 1..50 {
                let t = lo + (hi - lo) * k as f64 / 50.0;
                let g = schedule.grad_sq_sum(t).unwrap();
                assert!((g - expected).abs() <= 1e-12 * expected, "m = {m}: {g} vs {expected}");
            }
        }
    }
}

#[test]
fn pinning_rayleigh_quotient() {
    for radius in [0.5, 1.0, 7.27 / 4.0] {
        let d = pinning_diagnostics(radius, 1e-12).unwrap();
        let quotient = d.localization_error / (d.l2_norm * d.l2_norm);
        let expected = PI * PI / (2.0 * radius * radius);
        assert!((quotient - expected).abs() <= 1e-8 * expected, "R = {radius}: {quotient}");
        assert!((d.l2_norm - 1.0).abs() < 1e-10);
    }
}
