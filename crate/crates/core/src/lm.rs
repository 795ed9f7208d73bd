//! Damped Gauss-Newton (Levenberg-Marquardt) for small least-squares problems.

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step improves rss by less than this fraction.
    pub rel_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            rel_tolerance: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LmOutcome<const N: usize> {
    pub params: [f64; N],
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    pub message: &'static str,
}

const LAMBDA_INIT: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

/// Minimises `sum (y_i - f(x, t_i))^2`. `model` returns the prediction and its
/// gradient with respect to the parameters.
pub(crate) fn minimize<const N: usize, F>(
    x0: [f64; N],
    ts: &[f64],
    ys: &[f64],
    model: F,
    options: LmOptions,
) -> LmOutcome<N>
where
    F: Fn(&[f64; N], f64) -> (f64, [f64; N]),
{
    let rss_of = |x: &[f64; N]| -> f64 {
        ts.iter()
            .zip(ys)
            .map(|(&t, &y)| {
                let e = y - model(x, t).0;
                e * e
            })
            .sum()
    };
    let scale: f64 = ys.iter().map(|y| y * y).sum();
    let floor = scale * 1e-30;

    let mut x = x0;
    let mut rss = rss_of(&x);
    if !rss.is_finite() {
        return LmOutcome {
            params: x,
            rss,
            iterations: 0,
            converged: false,
            message: "non-finite residuals at the initial guess",
        };
    }
    let mut lambda = LAMBDA_INIT;

    for iteration in 1..=options.max_iterations {
        if rss <= floor {
            return LmOutcome {
                params: x,
                rss,
                iterations: iteration - 1,
                converged: true,
                message: "exact fit",
            };
        }
        let mut jtj = [[0.0; N]; N];
        let mut jtr = [0.0; N];
        for (&t, &y) in ts.iter().zip(ys) {
            let (f, grad) = model(&x, t);
            let e = y - f;
            for i in 0..N {
                jtr[i] += grad[i] * e;
                for j in 0..N {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let diag_max = (0..N).map(|i| jtj[i][i]).fold(0.0, f64::max);
        if !diag_max.is_finite() {
            return LmOutcome {
                params: x,
                rss,
                iterations: iteration,
                converged: false,
                message: "non-finite jacobian",
            };
        }

        loop {
            let mut damped = jtj;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(diag_max * 1e-12).max(f64::MIN_POSITIVE);
            }
            let accepted = solve(damped, jtr).and_then(|step| {
                let mut candidate = x;
                for i in 0..N {
                    candidate[i] += step[i];
                }
                let new_rss = rss_of(&candidate);
                (new_rss.is_finite() && new_rss < rss).then_some((candidate, new_rss))
            });
            match accepted {
                Some((candidate, new_rss)) => {
                    let improvement = (rss - new_rss) / rss;
                    x = candidate;
                    rss = new_rss;
                    lambda = (lambda / 10.0).max(1e-15);
                    if improvement < options.rel_tolerance {
                        return LmOutcome {
                            params: x,
                            rss,
                            iterations: iteration,
                            converged: true,
                            message: "relative rss change below tolerance",
                        };
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > LAMBDA_MAX {
                        // No step along any damped direction lowers rss.
                        return LmOutcome {
                            params: x,
                            rss,
                            iterations: iteration,
                            converged: true,
                            message: "stationary point",
                        };
                    }
                }
            }
        }
    }
    LmOutcome {
        params: x,
        rss,
        iterations: options.max_iterations,
        converged: false,
        message: "iteration budget exhausted",
    }
}

/// Gaussian elimination with partial pivoting.
fn solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    for col in 0..N {
        let pivot = (col..N).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 || !a[pivot][col].is_finite() {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..N {
            let factor = a[row][col] / a[col][col];
            let pivot_row = a[col];
            for (cell, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                *cell -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = [0.0; N];
    for row in (0..N).rev() {
        let tail: f64 = (row + 1..N).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
