//! Minimal Nelder-Mead simplex minimizer for the low-dimensional,
//! derivative-free searches in this crate.

/// Options for one simplex run.
#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    /// Converged when every vertex is within this distance of the best one
    /// (per coordinate) ...
    pub x_tol: f64,
    /// ... and the function spread over the simplex is below this.
    pub f_tol: f64,
    /// Initial simplex edge length.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            x_tol: 1e-8,
            f_tol: 1e-14,
            initial_step: 0.05,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Standard Nelder-Mead (reflection 1, expansion 2, contraction 0.5,
/// shrink 0.5) from a full starting simplex.
pub fn minimize_simplex<F>(
    mut f: F,
    mut simplex: Vec<Vec<f64>>,
    opts: &NelderMeadOptions,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = simplex[0].len();
    assert_eq!(simplex.len(), n + 1, "simplex needs n+1 vertices");
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        // order best..worst
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        let x_spread = (0..=n)
            .flat_map(|v| (0..n).map(move |d| (v, d)))
            .map(|(v, d)| (simplex[v][d] - simplex[best][d]).abs())
            .fold(0.0, f64::max);
        let f_spread = values[worst] - values[best];
        if x_spread < opts.x_tol && f_spread < opts.f_tol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| {
                (0..=n)
                    .filter(|&v| v != worst)
                    .map(|v| simplex[v][d])
                    .sum::<f64>()
                    / n as f64
            })
            .collect();

        let lerp = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|d| centroid[d] + t * (centroid[d] - simplex[worst][d]))
                .collect()
        };

        let reflected = lerp(1.0);
        let f_reflected = f(&reflected);
        if f_reflected < values[best] {
            let expanded = lerp(2.0);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
            continue;
        }
        if f_reflected < values[second_worst] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
            continue;
        }
        let contracted = if f_reflected < values[worst] {
            lerp(0.5)
        } else {
            lerp(-0.5)
        };
        let f_contracted = f(&contracted);
        if f_contracted < values[worst].min(f_reflected) {
            simplex[worst] = contracted;
            values[worst] = f_contracted;
            continue;
        }
        // shrink toward the best vertex
        let anchor = simplex[best].clone();
        for v in 0..=n {
            if v == best {
                continue;
            }
            for (x, &b) in simplex[v].iter_mut().zip(&anchor) {
                *x = b + 0.5 * (*x - b);
            }
            values[v] = f(&simplex[v]);
        }
    }

    let best = (0..values.len())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    OptimResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations,
        converged,
    }
}

/// Convenience wrapper building the axis-aligned initial simplex around `x0`.
pub fn minimize<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex = vec![x0.to_vec()];
    for d in 0..n {
        let mut v = x0.to_vec();
        v[d] += opts.initial_step;
        simplex.push(v);
    }
    minimize_simplex(f, simplex, opts)
}
