//! Damped Gauss-Newton (Levenberg-Marquardt style) minimizer for small
//! weighted least-squares problems. Jacobians are numeric central
//! differences; the normal equations are solved by Cholesky factorization
//! with the Marquardt diagonal damping term.
#![allow(clippy::needless_range_loop)] // index form mirrors the matrix algebra

pub(crate) struct LmOptions {
    pub max_iter: usize,
    pub ftol: f64,
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            ftol: 1e-14,
            xtol: 1e-13,
        }
    }
}

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared (weighted) residuals at the optimum.
    pub cost: f64,
    /// (J^T J)^{-1} at the optimum; NaN-filled when singular.
    pub covariance: Vec<Vec<f64>>,
    pub converged: bool,
}

/// Cholesky solve of (A + lambda diag(A)) x = b; returns None when the
/// damped matrix is not positive definite.
fn solve_damped(a: &[Vec<f64>], b: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a[i][j];
        }
        m[i][i] += lambda * a[i][i].max(1e-30);
    }
    let chol = cholesky(&m)?;
    Some(chol_solve(&chol, b))
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

fn chol_solve(l: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i][k] * y[k];
        }
        y[i] = s / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k][i] * x[k];
        }
        x[i] = s / l[i][i];
    }
    x
}

fn chol_inverse(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let l = cholesky(a)?;
    let mut inv = vec![vec![0.0; n]; n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = chol_solve(&l, &e);
        for row in 0..n {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

pub(crate) fn minimize<F>(mut residuals: F, n_res: usize, p0: &[f64], opt: &LmOptions) -> LmOutcome
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n_par = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_res];
    residuals(&p, &mut r);
    let mut cost: f64 = r.iter().map(|x| x * x).sum();

    let mut lambda = 1e-3;
    let mut converged = false;
    let mut jac = vec![vec![0.0; n_par]; n_res];
    let (mut r_plus, mut r_minus) = (vec![0.0; n_res], vec![0.0; n_res]);

    for _ in 0..opt.max_iter {
        // central-difference Jacobian
        for j in 0..n_par {
            let h = 1e-6 * p[j].abs().max(1.0);
            let saved = p[j];
            p[j] = saved + h;
            residuals(&p, &mut r_plus);
            p[j] = saved - h;
            residuals(&p, &mut r_minus);
            p[j] = saved;
            let inv = 1.0 / (2.0 * h);
            for i in 0..n_res {
                jac[i][j] = (r_plus[i] - r_minus[i]) * inv;
            }
        }
        // normal equations
        let mut a = vec![vec![0.0; n_par]; n_par];
        let mut g = vec![0.0; n_par];
        for i in 0..n_res {
            for j in 0..n_par {
                g[j] += jac[i][j] * r[i];
                for k in 0..=j {
                    a[j][k] += jac[i][j] * jac[i][k];
                }
            }
        }
        for j in 0..n_par {
            for k in (j + 1)..n_par {
                a[j][k] = a[k][j];
            }
        }

        let gnorm = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if gnorm < 1e-14 * (1.0 + cost) {
            converged = true;
            break;
        }

        // try steps with growing damping until the cost drops
        let mut accepted = false;
        for _ in 0..40 {
            let neg_g: Vec<f64> = g.iter().map(|x| -x).collect();
            let Some(step) = solve_damped(&a, &neg_g, lambda) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(&step).map(|(x, d)| x + d).collect();
            residuals(&trial, &mut r_plus);
            let trial_cost: f64 = r_plus.iter().map(|x| x * x).sum();
            if trial_cost.is_finite() && trial_cost < cost {
                let drop = cost - trial_cost;
                let max_rel_step = step
                    .iter()
                    .zip(&trial)
                    .fold(0.0f64, |m, (d, x)| m.max(d.abs() / x.abs().max(1.0)));
                p = trial;
                std::mem::swap(&mut r, &mut r_plus);
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-14);
                accepted = true;
                if drop <= opt.ftol * cost.max(1e-300) || max_rel_step <= opt.xtol {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // stuck: damping exhausted without improvement
            converged = gnorm < 1e-8 * (1.0 + cost);
            break;
        }
    }

    // covariance from the undamped normal matrix at the optimum
    for j in 0..n_par {
        let h = 1e-6 * p[j].abs().max(1.0);
        let saved = p[j];
        p[j] = saved + h;
        residuals(&p, &mut r_plus);
        p[j] = saved - h;
        residuals(&p, &mut r_minus);
        p[j] = saved;
        let inv = 1.0 / (2.0 * h);
        for i in 0..n_res {
            jac[i][j] = (r_plus[i] - r_minus[i]) * inv;
        }
    }
    let mut a = vec![vec![0.0; n_par]; n_par];
    for i in 0..n_res {
        for j in 0..n_par {
            for k in 0..=j {
                a[j][k] += jac[i][j] * jac[i][k];
            }
        }
    }
    for j in 0..n_par {
        for k in (j + 1)..n_par {
            a[j][k] = a[k][j];
        }
    }
    let covariance = match chol_inverse(&a) {
        Some(c) => c,
        None => {
            // jittered fallback so errors stay finite but visibly inflated
            let max_diag = (0..n_par).fold(1e-30f64, |m, i| m.max(a[i][i]));
            let mut aj = a.clone();
            for i in 0..n_par {
                aj[i][i] += 1e-10 * max_diag;
            }
            chol_inverse(&aj).unwrap_or_else(|| vec![vec![f64::NAN; n_par]; n_par])
        }
    };

    LmOutcome {
        params: p,
        cost,
        covariance,
        converged,
    }
}
