//! Dispatches a validated configuration to the compute modules.

use std::f64::consts::PI;

use log::info;
use nobind_core::bounds::{c_constants, ModelSpec};
use nobind_core::feynman_kac::{
    jensen_rate, kernel_check_grid, mc_energy_probe, piezo_brace, piezo_kernel, renorm_integral,
    separation_bound_check,
};
use nobind_core::optimizer::{build_full_schedule, lambda_curve, minimize_truncated, no_binding_constant};
use nobind_core::partition::{make_schedule, pinning_diagnostics, PartitionSchedule, TailRule};
use nobind_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{Command, RunConfig};
use crate::report::{Body, Check, KernelRow, McSummary, OptimizeSummary, Report};

pub fn execute(config: &RunConfig) -> Result<Report, Error> {
    let command = config.command();
    info!("running {}", command.name());
    let (body, checks) = match command {
        Command::Optimize => optimize(config)?,
        Command::BoundCurve => {
            let grid = config.lambda_grid.as_deref().unwrap_or_default();
            let curve = lambda_curve(grid, &config.optimizer.search_options(), config.optimizer.n_check)?;
            let monotone = curve.windows(2).all(|w| w[0].constant <= w[1].constant);
            let check = Check {
                name: "curve_monotone".into(),
                pass: monotone,
                residual: curve.windows(2).map(|w| w[0].constant - w[1].constant).fold(0.0, f64::max),
                tolerance: 0.0,
                detail: format!("{} cutoffs", curve.len()),
            };
            (Body::Curve(curve), vec![check])
        }
        Command::Verify => {
            let checks = verify(config.verify.samples, config.verify.seed)?;
            (Body::Verify(checks.clone()), checks)
        }
        Command::Mc => {
            let model = config.model.expect("validated");
            let alpha = config.mc.alpha;
            let probe = mc_energy_probe(&model, alpha, &config.mc.ensemble())?;
            let summary = McSummary {
                model,
                alpha,
                probe,
                mean_per_time: probe.action_mean / probe.horizon,
                log_mean_exp_per_time: probe.log_mean_exp / probe.horizon,
                jensen_rate: jensen_rate(&model, alpha)?.rate,
            };
            let check = Check {
                name: "jensen_on_sample".into(),
                pass: probe.log_mean_exp >= probe.action_mean,
                residual: probe.action_mean - probe.log_mean_exp,
                tolerance: 0.0,
                detail: "log mean exp >= mean".into(),
            };
            (Body::Mc(summary), vec![check])
        }
        Command::Kernels => {
            let kernels = config.kernels.as_ref().expect("validated");
            let rows = kernels
                .queries
                .iter()
                .map(|q| {
                    Ok(KernelRow {
                        query: *q,
                        kernel: piezo_kernel(q, false)?,
                        brace: piezo_brace(q.distance, q.lag, q.cutoff),
                        oracle: if kernels.oracle { Some(piezo_kernel(q, true)?) } else { None },
                    })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            (Body::Kernels(rows), Vec::new())
        }
    };
    Ok(Report { command, body, checks })
}

fn optimize(config: &RunConfig) -> Result<(Body, Vec<Check>), Error> {
    let model = config.model.expect("validated");
    let found = minimize_truncated(&model, &config.optimizer.search_options())?;
    let n_check = config.optimizer.n_check;
    let (report, constant, check) = match build_full_schedule(&found, n_check) {
        Ok((_, certified)) => {
            let constant = no_binding_constant(&certified)?;
            let check = Check {
                name: "tail_monotone".into(),
                pass: true,
                residual: 0.0,
                tolerance: 0.0,
                detail: format!("F(n+1) <= F(n) for 1 <= n <= {n_check}"),
            };
            (certified, Some(constant), check)
        }
        Err(Error::TailViolation { index, current, next }) => {
            let check = Check {
                name: "tail_monotone".into(),
                pass: false,
                residual: next - current,
                tolerance: 0.0,
                detail: format!("F({}) = {next} exceeds F({index}) = {current}", index + 1),
            };
            (found, None, check)
        }
        Err(e) => return Err(e),
    };
    Ok((Body::Optimize(OptimizeSummary { report, constant }), vec![check]))
}

fn check(name: &str, residual: f64, tolerance: f64, detail: String) -> Check {
    Check { name: name.into(), pass: residual <= tolerance, residual, tolerance, detail }
}

fn reference_schedule() -> PartitionSchedule {
    make_schedule(vec![7.27, 3.44, 3.44], vec![0.702, 0.702], TailRule::Linear { step: 3.44, ratio: 0.702 })
        .expect("valid schedule")
}

/// The invariant suites, each reported with its worst residual.
pub fn verify(samples: usize, seed: u64) -> Result<Vec<Check>, Error> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();

    let geometric = make_schedule(vec![0.4, 0.6, 0.9], vec![0.5, 0.5], TailRule::Geometric { scale: 0.4, growth: 1.5 })?;
    let mut worst: f64 = 0.0;
    let mut worst_collapse: f64 = 0.0;
    for schedule in [reference_schedule(), geometric] {
        let upper = schedule.partial_sum(schedule.truncation() + 5);
        for k in 0..samples {
            let t = if k % 2 == 0 { rng.gen_range(0.0..upper) } else { rng.gen_range((1e-6f64).ln()..upper.ln()).exp() };
            let sum: f64 = schedule.active(t)?.iter().map(|(_, v)| v * v).sum();
            worst = worst.max((sum - 1.0).abs());
        }
        for m in 1..schedule.truncation() + 5 {
            let (lo, hi) = (schedule.partial_sum(m - 1), schedule.partial_sum(m));
            let expected = PI * PI / (4.0 * schedule.width(m).powi(2));
            for j in 1..20 {
                let g = schedule.grad_sq_sum(lo + (hi - lo) * j as f64 / 20.0)?;
                worst_collapse = worst_collapse.max((g - expected).abs() / expected);
            }
        }
    }
    checks.push(check("partition_identity", worst, 1e-12, format!("{samples} samples per schedule")));
    checks.push(check("derivative_collapse", worst_collapse, 1e-12, "relative, interior points".into()));

    let mut worst_rayleigh: f64 = 0.0;
    let mut worst_norm: f64 = 0.0;
    for radius in [0.5, 1.0, 7.27 / 4.0] {
        let d = pinning_diagnostics(radius, 1e-12)?;
        let expected = PI * PI / (2.0 * radius * radius);
        worst_rayleigh = worst_rayleigh.max((d.localization_error / d.l2_norm.powi(2) - expected).abs() / expected);
        worst_norm = worst_norm.max((d.l2_norm - 1.0).abs());
    }
    checks.push(check("pinning_rayleigh_quotient", worst_rayleigh, 1e-8, "R in {0.5, 1, 7.27/4}".into()));
    checks.push(check("pinning_l2_norm", worst_norm, 1e-10, "R in {0.5, 1, 7.27/4}".into()));

    let grid = kernel_check_grid();
    let mut worst_kernel: f64 = 0.0;
    for q in &grid {
        let closed = piezo_kernel(q, false)?;
        let oracle = piezo_kernel(q, true)?;
        worst_kernel = worst_kernel.max((closed - oracle).abs() / oracle.abs());
    }
    checks.push(check("kernel_identity", worst_kernel, 1e-8, format!("{} grid points, relative", grid.len())));

    let mut violation: f64 = 0.0;
    for _ in 0..samples {
        let d = 10f64.powf(rng.gen_range(-4.0..4.0));
        let tau = 10f64.powf(rng.gen_range(-4.0..3.0));
        let cutoff = 10f64.powf(rng.gen_range(-2.0..2.0));
        let b = piezo_brace(d, tau, cutoff);
        violation = violation.max(-b).max(b - 2.0);
    }
    checks.push(check("brace_bound", violation, 0.0, format!("{samples} random queries, distance outside [0, 2]")));

    let mut worst_renorm: f64 = 0.0;
    for cutoff in [0.5, 1.0, 2.0, 10.0] {
        let q = renorm_integral(cutoff)?;
        worst_renorm = worst_renorm.max((q - c_constants(cutoff)?.c1).abs());
    }
    checks.push(check("renorm_integral", worst_renorm, 1e-10, "cutoff in {0.5, 1, 2, 10}".into()));

    let mut excess = f64::NEG_INFINITY;
    for d in [0.01, 0.1, 1.0, 10.0, 100.0] {
        for t in [1e-6, 1e-2, 1.0, 10.0, 1e3, 1e4] {
            let c = separation_bound_check(d, t)?;
            excess = excess.max(c.exact - c.bound);
        }
    }
    checks.push(check("separation_bound", excess.max(0.0), 0.0, "max(exact - bound) over a 5x6 grid".into()));
    let saturated = separation_bound_check(1.0, 1e3)?;
    let ratio = saturated.exact / saturated.bound;
    checks.push(Check {
        name: "separation_saturation".into(),
        pass: ratio > 0.99 && ratio <= 1.0,
        residual: 1.0 - ratio,
        tolerance: 0.01,
        detail: "1 - exact/bound at T/D = 1e3".into(),
    });

    let mut worst_jensen = (jensen_rate(&ModelSpec::Optical, 1.0)?.rate - 1.0).abs();
    for cutoff in [0.5, 1.0, 2.0, 10.0] {
        let r = jensen_rate(&ModelSpec::Piezo { cutoff }, 1.0)?;
        worst_jensen = worst_jensen.max((r.rate - r.closed_form).abs());
    }
    checks.push(check("jensen_rate", worst_jensen, 1e-10, "optical and piezo, alpha = 1".into()));
    Ok(checks)
}
