//! Damped Gauss-Newton (Levenberg-Marquardt) least squares.
//!
//! Residual functions are evaluated analytically; the Jacobian is taken by
//! central finite differences with steps relative to max(|p|, 1), so
//! parameters should be of order one (offsets, logs or normalized values). Parameter uncertainties come from the
//! Jacobian at the optimum, scaled by the reduced chi-square so that a
//! uniform rescaling of the weights leaves them unchanged.

use nalgebra::{DMatrix, DVector};

use crate::error::FitError;

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative decrease of the cost below which the fit has converged.
    pub ftol: f64,
    /// Relative step size below which the fit has converged.
    pub xtol: f64,
    /// Singular-value ratio below which the Jacobian counts as rank deficient.
    pub rank_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-15,
            xtol: 1e-13,
            rank_tol: 1e-10,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals.
    pub chi2: f64,
    pub residual_count: usize,
    pub std_errors: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    /// Set when the Jacobian at the optimum is rank deficient: the
    /// unidentifiable parameter combination. Errors are then infinite.
    pub degenerate: Option<String>,
}

impl LmReport {
    pub fn residual_norm(&self) -> f64 {
        self.chi2.sqrt()
    }

    pub fn reduced_chi2(&self) -> f64 {
        let dof = self.residual_count.saturating_sub(self.params.len());
        if dof == 0 {
            f64::NAN
        } else {
            self.chi2 / dof as f64
        }
    }
}

/// A least-squares problem: parameter names and a residual vector function.
pub struct Problem<'a> {
    pub names: &'a [&'a str],
    pub residuals: &'a dyn Fn(&[f64], &mut [f64]),
    pub residual_count: usize,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn jacobian(problem: &Problem<'_>, p: &[f64], scratch: &mut [Vec<f64>; 2]) -> DMatrix<f64> {
    let n = problem.residual_count;
    let mut jac = DMatrix::zeros(n, p.len());
    let mut trial = p.to_vec();
    for j in 0..p.len() {
        let h = f64::EPSILON.cbrt() * p[j].abs().max(1.0);
        trial[j] = p[j] + h;
        (problem.residuals)(&trial, &mut scratch[0]);
        trial[j] = p[j] - h;
        (problem.residuals)(&trial, &mut scratch[1]);
        trial[j] = p[j];
        let denom = 2.0 * h;
        for i in 0..n {
            jac[(i, j)] = (scratch[0][i] - scratch[1][i]) / denom;
        }
    }
    jac
}

fn describe_combination(names: &[&str], v: &DVector<f64>) -> String {
    let mut terms: Vec<(usize, f64)> = v.iter().copied().enumerate().filter(|(_, c)| c.abs() > 0.05).collect();
    terms.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    terms
        .iter()
        .map(|(i, c)| format!("{c:+.3}·{}", names[*i]))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Minimizes the sum of squared residuals starting from `p0`, failing with
/// [`FitError::Degenerate`] if the optimum is not unique.
pub fn minimize(problem: &Problem<'_>, p0: &[f64], opts: &LmOptions) -> Result<LmReport, FitError> {
    let rep = solve(problem, p0, opts)?;
    match rep.degenerate {
        Some(combination) => Err(FitError::Degenerate { combination }),
        None => Ok(rep),
    }
}

/// As [`minimize`], but a rank-deficient optimum is returned with
/// [`LmReport::degenerate`] set instead of as an error.
pub fn solve(problem: &Problem<'_>, p0: &[f64], opts: &LmOptions) -> Result<LmReport, FitError> {
    let m = p0.len();
    let n = problem.residual_count;
    if n < m {
        return Err(FitError::InsufficientData(format!("{n} residuals for {m} parameters")));
    }
    let mut scratch = [vec![0.0; n], vec![0.0; n]];
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n];
    (problem.residuals)(&p, &mut r);
    let mut cost = sum_sq(&r);
    if !cost.is_finite() {
        return Err(FitError::InsufficientData(
            "residuals are not finite at the initial guess".into(),
        ));
    }
    let mut lambda = opts.initial_lambda;
    let mut trial_r = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(problem, &p, &mut scratch);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);
        let diag: Vec<f64> = (0..m).map(|j| jtj[(j, j)].max(1e-300)).collect();

        let mut improved = false;
        // Inner loop: raise damping until a step lowers the cost.
        for _ in 0..60 {
            let mut a = jtj.clone();
            for j in 0..m {
                a[(j, j)] += lambda * diag[j];
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            (problem.residuals)(&trial, &mut trial_r);
            let trial_cost = sum_sq(&trial_r);
            if trial_cost.is_finite() && trial_cost <= cost {
                let rel_drop = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                let rel_step = step
                    .iter()
                    .zip(p.iter())
                    .map(|(s, x)| s.abs() / x.abs().max(1e-300))
                    .fold(0.0, f64::max);
                p = trial;
                std::mem::swap(&mut r, &mut trial_r);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-15);
                improved = true;
                if rel_drop < opts.ftol || rel_step < opts.xtol || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
            if lambda > 1e16 {
                break;
            }
        }
        if converged {
            break;
        }
        if !improved {
            // No downhill step exists at any damping: a (numerical) minimum.
            converged = true;
            break;
        }
    }

    let best: Vec<(String, f64)> = problem
        .names
        .iter()
        .map(|s| s.to_string())
        .zip(p.iter().copied())
        .collect();
    if !converged {
        return Err(FitError::NotConverged { iterations, cost, best });
    }

    let jac = jacobian(problem, &p, &mut scratch);
    // Column-scale before the rank test so units do not matter.
    let norms: Vec<f64> = (0..m).map(|j| jac.column(j).norm().max(1e-300)).collect();
    let mut scaled = jac.clone();
    for (j, norm) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / norm);
    }
    let svd = scaled.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let (imin, smin) = svd.singular_values.argmin();
    let inverse = (scaled.transpose() * &scaled).try_inverse();
    if smax == 0.0 || smin / smax < opts.rank_tol || inverse.is_none() {
        let v_t = svd.v_t.expect("requested V^T");
        let direction = v_t.row(imin).transpose();
        return Ok(LmReport {
            params: p,
            chi2: cost,
            residual_count: n,
            std_errors: vec![f64::INFINITY; m],
            covariance: DMatrix::from_element(m, m, f64::NAN),
            iterations,
            degenerate: Some(describe_combination(problem.names, &direction)),
        });
    }
    let scaled_cov = inverse.expect("checked above");
    let dof = n.saturating_sub(m);
    let s2 = if dof > 0 { cost / dof as f64 } else { 0.0 };
    let mut covariance = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            covariance[(i, j)] = scaled_cov[(i, j)] * s2 / (norms[i] * norms[j]);
        }
    }
    let std_errors = (0..m).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    Ok(LmReport {
        params: p,
        chi2: cost,
        residual_count: n,
        std_errors,
        covariance,
        iterations,
        degenerate: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_decay() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 3.0 * (-1.7 * t).exp() + 0.2).collect();
        let f = |p: &[f64], out: &mut [f64]| {
            for (i, (t, y)) in t.iter().zip(y.iter()).enumerate() {
                out[i] = p[0] * (-p[1] * t).exp() + p[2] - y;
            }
        };
        let problem = Problem {
            names: &["a", "k", "c"],
            residuals: &f,
            residual_count: t.len(),
        };
        let rep = minimize(&problem, &[1.0, 1.0, 0.0], &LmOptions::default()).unwrap();
        assert!((rep.params[0] - 3.0).abs() < 1e-8);
        assert!((rep.params[1] - 1.7).abs() < 1e-8);
        assert!((rep.params[2] - 0.2).abs() < 1e-8);
    }

    #[test]
    fn names_degenerate_combination() {
        // Only a + b is constrained.
        let f = |p: &[f64], out: &mut [f64]| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = (p[0] + p[1]) * i as f64 - 2.0 * i as f64;
            }
        };
        let problem = Problem {
            names: &["a", "b"],
            residuals: &f,
            residual_count: 10,
        };
        match minimize(&problem, &[0.3, 0.1], &LmOptions::default()) {
            Err(FitError::Degenerate { combination }) => {
                assert!(combination.contains('a') && combination.contains('b'), "{combination}");
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn reports_non_convergence_with_best_state() {
        let f = |p: &[f64], out: &mut [f64]| {
            out[0] = 10.0 * (p[1] - p[0] * p[0]);
            out[1] = 1.0 - p[0];
        };
        let problem = Problem {
            names: &["x", "y"],
            residuals: &f,
            residual_count: 2,
        };
        let opts = LmOptions {
            max_iterations: 2,
            ..LmOptions::default()
        };
        match minimize(&problem, &[-1.2, 1.0], &opts) {
            Err(FitError::NotConverged { best, iterations, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(best[0].0, "x");
            }
            other => panic!("{other:?}"),
        }
    }
}
