//! Small dense optimizers: Nelder–Mead simplex descent and a damped Newton
//! solver for square nonlinear systems with a finite-difference Jacobian.

use nalgebra::{DMatrix, DVector};

/// Derivative-free simplex minimizer.
#[derive(Debug, Clone)]
pub struct NelderMead {
    pub max_iter: usize,
    /// Stop when `f_worst - f_best <= f_rel_tol * |f_best| + f_abs_tol`.
    pub f_rel_tol: f64,
    pub f_abs_tol: f64,
    /// Stop when every vertex lies within `x_tol` of the best one.
    pub x_tol: f64,
    pub initial_step: f64,
}

impl Default for NelderMead {
    fn default() -> Self {
        Self { max_iter: 2_000, f_rel_tol: 1e-10, f_abs_tol: 1e-300, x_tol: 1e-13, initial_step: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl NelderMead {
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> Minimum {
        let dim = x0.len();
        let mut eval = |x: &[f64]| {
            let v = f(x);
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };
        if dim == 0 {
            return Minimum { x: vec![], value: eval(x0), iterations: 0, converged: true };
        }

        let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
        simplex.push(x0.to_vec());
        for j in 0..dim {
            let mut v = x0.to_vec();
            v[j] += self.initial_step;
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| eval(v)).collect();

        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.max_iter {
            let mut order: Vec<usize> = (0..=dim).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let (best, worst) = (values[0], values[dim]);
            let spread = simplex[1..]
                .iter()
                .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if (worst - best <= self.f_rel_tol * best.abs() + self.f_abs_tol && worst.is_finite())
                || spread <= self.x_tol
            {
                converged = true;
                break;
            }
            iterations += 1;

            let mut centroid = vec![0.0; dim];
            for v in &simplex[..dim] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / dim as f64;
                }
            }
            let along = |t: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[dim])
                    .map(|(c, w)| c + t * (w - c))
                    .collect()
            };

            let xr = along(-alpha);
            let fr = eval(&xr);
            if fr < values[0] {
                let xe = along(-gamma);
                let fe = eval(&xe);
                if fe < fr {
                    simplex[dim] = xe;
                    values[dim] = fe;
                } else {
                    simplex[dim] = xr;
                    values[dim] = fr;
                }
                continue;
            }
            if fr < values[dim - 1] {
                simplex[dim] = xr;
                values[dim] = fr;
                continue;
            }
            let (xc, fc) = if fr < values[dim] {
                let xc = along(-rho);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(rho);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < values[dim].min(fr) {
                simplex[dim] = xc;
                values[dim] = fc;
                continue;
            }
            // shrink towards the best vertex
            for i in 1..=dim {
                let shrunk: Vec<f64> = simplex[0]
                    .iter()
                    .zip(&simplex[i])
                    .map(|(b, v)| b + sigma * (v - b))
                    .collect();
                values[i] = eval(&shrunk);
                simplex[i] = shrunk;
            }
        }
        let best = (0..=dim).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        Minimum { x: simplex[best].clone(), value: values[best], iterations, converged }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Target on the max-norm of the residual.
    pub tol: f64,
    /// Relative finite-difference step for the Jacobian.
    pub fd_step: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { max_iter: 50, tol: 1e-10, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone)]
pub struct Root {
    pub x: Vec<f64>,
    /// Max-norm of the residual at `x`.
    pub residual: f64,
    pub iterations: usize,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Damped Newton iteration on a square system `g(x) = 0`, keeping iterates
/// inside `feasible`. Steps are halved until the Euclidean residual drops.
pub fn newton_solve<G, P>(g: G, feasible: P, x0: &[f64], opts: &NewtonOptions) -> Root
where
    G: Fn(&[f64]) -> Vec<f64>,
    P: Fn(&[f64]) -> bool,
{
    let dim = x0.len();
    let mut x = x0.to_vec();
    let mut gx = g(&x);
    let mut iterations = 0;
    while iterations < opts.max_iter && max_norm(&gx) > opts.tol {
        iterations += 1;
        let mut jac = DMatrix::<f64>::zeros(gx.len(), dim);
        for j in 0..dim {
            let h = opts.fd_step * x[j].abs().max(1e-2);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (gp, gm, width) = match (feasible(&xp), feasible(&xm)) {
                (true, true) => (g(&xp), g(&xm), 2.0 * h),
                (true, false) => (g(&xp), gx.clone(), h),
                (false, true) => (gx.clone(), g(&xm), h),
                (false, false) => return Root { residual: max_norm(&gx), x, iterations },
            };
            for i in 0..gx.len() {
                jac[(i, j)] = (gp[i] - gm[i]) / width;
            }
        }
        let rhs = DVector::from_iterator(gx.len(), gx.iter().map(|v| -v));
        let step = if gx.len() == dim {
            jac.clone().lu().solve(&rhs)
        } else {
            // least squares for over-determined systems
            let jt = jac.transpose();
            (&jt * &jac).lu().solve(&(&jt * &rhs))
        };
        let Some(step) = step else { break };
        if step.iter().any(|v| !v.is_finite()) {
            break;
        }

        let current = l2(&gx);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..50 {
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if feasible(&cand) {
                let gc = g(&cand);
                if gc.iter().all(|v| v.is_finite()) && l2(&gc) < current {
                    x = cand;
                    gx = gc;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Root { residual: max_norm(&gx), x, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_minimum() {
        let nm = NelderMead { max_iter: 10_000, ..Default::default() };
        let m = nm.minimize(
            |x| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2),
            &[-1.2, 1.0],
        );
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }

    #[test]
    fn zero_dimensional_problem() {
        let m = NelderMead::default().minimize(|_| 3.0, &[]);
        assert_eq!(m.value, 3.0);
        assert!(m.converged);
    }

    #[test]
    fn newton_on_circle_line_intersection() {
        let root = newton_solve(
            |x| vec![x[0] * x[0] + x[1] * x[1] - 1.0, x[0] - x[1]],
            |x| x[0] > 0.0,
            &[0.9, 0.3],
            &NewtonOptions::default(),
        );
        let s = 0.5f64.sqrt();
        assert!(root.residual < 1e-10);
        assert!((root.x[0] - s).abs() < 1e-10 && (root.x[1] - s).abs() < 1e-10);
    }
}
