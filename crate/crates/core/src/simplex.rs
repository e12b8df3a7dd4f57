//! Nelder–Mead simplex search with dimension-adapted coefficients
//! (Gao & Han), used on the nonsmooth `max` objectives of the optimizer.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    /// Stop once `f_worst - f_best <= f_tol` and the simplex diameter is `<= x_tol`.
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evaluations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { f_tol: 1e-8, x_tol: 1e-7, max_evaluations: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `start`, with initial edge lengths `steps`.
///
/// Non-finite objective values are treated as +∞, so an infeasible vertex is
/// always the first to be replaced.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    steps: &[f64],
    opts: SimplexOptions,
) -> SimplexResult {
    let n = start.len();
    assert_eq!(n, steps.len());
    assert!(n >= 1);
    let dim = n as f64;
    let (reflect, expand, contract, shrink) =
        (1.0, 1.0 + 2.0 / dim, 0.75 - 1.0 / (2.0 * dim), 1.0 - 1.0 / dim);

    let mut evaluations = 0;
    let mut eval = |x: &[f64], evaluations: &mut usize| {
        *evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut vertices: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    vertices.push(start.to_vec());
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += steps[i];
        vertices.push(v);
    }
    let mut values: Vec<f64> = vertices.iter().map(|v| eval(v, &mut evaluations)).collect();

    let mut converged = false;
    while evaluations < opts.max_evaluations {
        // Stable sort keeps tie order deterministic.
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        vertices = order.iter().map(|&i| vertices[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = vertices[1..]
            .iter()
            .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if values[0].is_finite() && spread <= opts.f_tol && diameter <= opts.x_tol {
            converged = true;
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &vertices[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / dim;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&vertices[n]).map(|(c, w)| c + t * (c - w)).collect()
        };

        let xr = along(reflect);
        let fr = eval(&xr, &mut evaluations);
        if fr < values[0] {
            let xe = along(reflect * expand);
            let fe = eval(&xe, &mut evaluations);
            if fe < fr {
                vertices[n] = xe;
                values[n] = fe;
            } else {
                vertices[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            vertices[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(reflect * contract);
            let fc = eval(&xc, &mut evaluations);
            (xc, if fc <= fr { fc } else { f64::INFINITY })
        } else {
            let xc = along(-contract);
            let fc = eval(&xc, &mut evaluations);
            (xc, if fc < values[n] { fc } else { f64::INFINITY })
        };
        if fc.is_finite() {
            vertices[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = vertices[0].clone();
        for i in 1..=n {
            for (x, b) in vertices[i].iter_mut().zip(&best) {
                *x = b + shrink * (*x - b);
            }
            values[i] = eval(&vertices[i], &mut evaluations);
        }
    }

    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).expect("nonempty simplex");
    SimplexResult { point: vertices[best].clone(), value: values[best], evaluations, converged }
}
