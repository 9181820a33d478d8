//! Corrections turning walk-biased class weights into estimates of `alpha`.
//!
//! Weights estimated while ignoring the sampling design converge to
//! `alpha_tilde`, not `alpha`. Two remedies are provided: inverting the
//! empirical CDF of the walk positions at the biased cutpoints, and solving
//! the algebraic relation `lambda_q (x^T pi x) = x_q (pi x)_q` for `x`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graphon::BiasedProfile;
use crate::mle::{classical_estimator, Estimate, Method};
use crate::optim::{newton_solve, NelderMead, NewtonOptions};
use crate::sampler::{count_stats, EmpiricalCdf, RdsSample};
use crate::saem::{saem_classical, saem_classical_threshold};
use crate::sbm::{sum, SymMatrix};

/// Acceptance level of the algebraic solver, in max-norm.
pub const ALGEBRAIC_TOL: f64 = 1e-8;
/// Residual above which the algebraic solver reports failure.
pub const ALGEBRAIC_FAIL_TOL: f64 = 1e-6;

fn check_weights(lambda: &[f64]) -> Result<()> {
    if lambda.is_empty() || lambda.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::Argument("weights must be nonnegative".into()));
    }
    let total = sum(lambda);
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// `alpha_q = F^{-1}(Lambda_q) - F^{-1}(Lambda_{q-1})` for cumulative
/// weights `Lambda`, rescaled to sum to one.
pub fn debias_by_inverse<F>(lambda: &[f64], inverse: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    check_weights(lambda)?;
    let mut acc = 0.0;
    let mut prev = inverse(0.0)?;
    let mut out = Vec::with_capacity(lambda.len());
    for (q, w) in lambda.iter().enumerate() {
        acc += w;
        let level = if q + 1 == lambda.len() { 1.0 } else { acc.clamp(0.0, 1.0) };
        let cur = inverse(level)?;
        out.push((cur - prev).max(0.0));
        prev = cur;
    }
    let total = sum(&out);
    if !(total > 0.0) {
        return Err(Error::Degenerate("inverted cutpoints collapse to a point".into()));
    }
    out.iter_mut().for_each(|a| *a /= total);
    Ok(out)
}

/// Weight correction through the empirical CDF of the walk positions.
pub fn debias_by_empirical_cdf(lambda: &[f64], cdf: &EmpiricalCdf) -> Result<Vec<f64>> {
    debias_by_inverse(lambda, |v| cdf.inverse(v))
}

/// Forward map `alpha -> alpha_tilde_1` for two classes with matrix `pi`.
fn forward_q2(alpha1: f64, pi: &SymMatrix) -> f64 {
    BiasedProfile::from_parts(&[alpha1, 1.0 - alpha1], |q| pi.row(q).to_vec()).alpha_tilde[0]
}

/// Solves the two-class relation for `alpha_1` given the biased weight
/// `lambda1`:
/// `a alpha^2 + b alpha + c = 0` with
/// `a = (pi11 + pi22 - 2 pi12) lambda - (pi11 - pi12)`,
/// `b = 2 (pi12 - pi22) lambda - pi12`, `c = pi22 lambda`.
///
/// The root in `[0, 1]` is returned; if both qualify, the one whose forward
/// map lands closest to `lambda1`.
pub fn debias_algebraic_q2(lambda1: f64, pi: &SymMatrix) -> Result<f64> {
    if pi.dim() != 2 {
        return Err(Error::Argument("two-class correction needs a 2x2 matrix".into()));
    }
    if !(0.0..=1.0).contains(&lambda1) {
        return Err(Error::Domain { what: "lambda1", value: lambda1 });
    }
    let (p11, p12, p22) = (pi.get(0, 0), pi.get(0, 1), pi.get(1, 1));
    let a = (p11 + p22 - 2.0 * p12) * lambda1 - (p11 - p12);
    let b = 2.0 * (p12 - p22) * lambda1 - p12;
    let c = p22 * lambda1;

    let mut roots = Vec::with_capacity(2);
    if a.abs() < 1e-12 {
        if b != 0.0 {
            roots.push(-c / b);
        }
    } else {
        // closed form of b^2 - 4ac, nonnegative for entries in [0, 1]
        let disc = p12 * p12 * (2.0 * lambda1 - 1.0).powi(2)
            + 4.0 * p11 * p22 * lambda1 * (1.0 - lambda1);
        let sq = disc.max(0.0).sqrt();
        let t = -0.5 * (b + b.signum() * sq);
        if t != 0.0 {
            roots.push(t / a);
            roots.push(c / t);
        } else {
            roots.push(-b / (2.0 * a));
        }
    }
    let inside: Vec<f64> = roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= -1e-9 && *r <= 1.0 + 1e-9)
        .map(|r| r.clamp(0.0, 1.0))
        .collect();
    inside
        .into_iter()
        .min_by(|x, y| {
            let ex = (forward_q2(*x, pi) - lambda1).abs();
            let ey = (forward_q2(*y, pi) - lambda1).abs();
            ex.total_cmp(&ey)
        })
        .ok_or(Error::NoValidRoot)
}

/// `g(x) = (x^T pi x) lambda - x (.) (pi x)`.
pub fn algebraic_residual(x: &[f64], lambda: &[f64], pi: &SymMatrix) -> Vec<f64> {
    let px = pi.mul_vec(x);
    let quad = sum(&x.iter().zip(&px).map(|(a, b)| a * b).collect::<Vec<_>>());
    lambda.iter().zip(x.iter().zip(&px)).map(|(l, (xi, pxi))| quad * l - xi * pxi).collect()
}

/// Solution of the general algebraic correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgebraicSolution {
    pub alpha: Vec<f64>,
    /// `max_q |g_q(alpha)|`.
    pub residual: f64,
    /// Final residual of every start, in start order.
    pub start_residuals: Vec<f64>,
    /// Set when accepted starts reached points more than `1e-4` apart.
    pub multiple_minima: bool,
}

fn softmax(u: &[f64]) -> Vec<f64> {
    let m = u.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut x: Vec<f64> = u.iter().map(|v| (v - m).exp()).collect();
    x.push((-m).exp());
    let s = sum(&x);
    x.iter_mut().for_each(|v| *v /= s);
    x
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Minimizes `|g(x)|^2` over the open simplex from `lambda` and four random
/// simplex points, then polishes each result by Newton steps on the first
/// `Q - 1` equations (the components of `g` sum to zero on the simplex).
pub fn debias_algebraic_general(lambda: &[f64], pi: &SymMatrix) -> Result<AlgebraicSolution> {
    check_weights(lambda)?;
    let q = lambda.len();
    if q < 2 || pi.dim() != q {
        return Err(Error::Argument("algebraic correction needs Q >= 2 and a QxQ matrix".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0xa16e_b5a1);
    let mut starts: Vec<Vec<f64>> = vec![lambda.iter().map(|l| l.max(1e-6)).collect()];
    for _ in 0..4 {
        let e: Vec<f64> = (0..q).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        starts.push(e);
    }
    let nm = NelderMead { max_iter: 4_000, f_rel_tol: 1e-14, f_abs_tol: 1e-30, ..Default::default() };
    let objective = |u: &[f64]| {
        let g = algebraic_residual(&softmax(u), lambda, pi);
        g.iter().map(|v| v * v).sum::<f64>()
    };

    let mut solutions: Vec<(Vec<f64>, f64)> = Vec::new();
    for s in &starts {
        let total = sum(s);
        let last = s[q - 1] / total;
        let u0: Vec<f64> = s[..q - 1].iter().map(|v| (v / total / last).ln()).collect();
        let m = nm.minimize(objective, &u0);
        let x = softmax(&m.x);
        let root = newton_solve(
            |v| {
                let mut full = v.to_vec();
                full.push(1.0 - sum(v));
                algebraic_residual(&full, lambda, pi)[..q - 1].to_vec()
            },
            |v| v.iter().all(|&a| a > 0.0) && sum(v) < 1.0,
            &x[..q - 1],
            &NewtonOptions { tol: 1e-14, ..Default::default() },
        );
        let mut polished = root.x.clone();
        polished.push(1.0 - sum(&root.x));
        let r_polished = max_abs(&algebraic_residual(&polished, lambda, pi));
        let r_simplex = max_abs(&algebraic_residual(&x, lambda, pi));
        if r_polished <= r_simplex {
            solutions.push((polished, r_polished));
        } else {
            solutions.push((x, r_simplex));
        }
    }

    let start_residuals: Vec<f64> = solutions.iter().map(|s| s.1).collect();
    let accepted: Vec<&Vec<f64>> =
        solutions.iter().filter(|s| s.1 < ALGEBRAIC_TOL).map(|s| &s.0).collect();
    let multiple_minima = accepted.iter().any(|a| {
        accepted.iter().any(|b| a.iter().zip(b.iter()).any(|(x, y)| (x - y).abs() > 1e-4))
    });
    // first start attaining the smallest residual
    let (best_x, best_r) = solutions
        .iter()
        .fold(None::<&(Vec<f64>, f64)>, |acc, s| match acc {
            Some(b) if b.1 <= s.1 => Some(b),
            _ => Some(s),
        })
        .cloned()
        .expect("five starts");
    if best_r > ALGEBRAIC_FAIL_TOL {
        return Err(Error::NonConvergence { residual: best_r, best: best_x });
    }
    Ok(AlgebraicSolution { alpha: best_x, residual: best_r, start_residuals, multiple_minima })
}

/// Classical estimate on the observed labels, weights corrected through the
/// empirical CDF of the positions.
pub fn debias_complete(sample: &RdsSample, q: usize) -> Result<Estimate> {
    let classical = classical_estimator(&count_stats(sample, q)?)?;
    let alpha = debias_by_empirical_cdf(&classical.alpha, &sample.empirical_cdf())?;
    let mut est = Estimate::new(Method::DebiasComplete, alpha, classical.pi);
    est.diagnostics = classical.diagnostics;
    est.set_diag("lambda_1", classical.alpha[0]);
    Ok(est)
}

/// Threshold SAEM on the classical likelihood from `(X, Y)`, then the
/// empirical-CDF correction. Two classes.
pub fn debias_saem<R: Rng + ?Sized>(
    sample: &RdsSample,
    iterations: usize,
    std: f64,
    rng: &mut R,
) -> Result<Estimate> {
    let inner = saem_classical_threshold(&sample.without_labels(), iterations, std, rng)?;
    let alpha = debias_by_empirical_cdf(&inner.alpha, &sample.empirical_cdf())?;
    let mut est = Estimate::new(Method::DebiasSaem, alpha, inner.pi);
    est.diagnostics = inner.diagnostics;
    est.set_diag("lambda_1", inner.alpha[0]);
    Ok(est)
}

/// Classical-likelihood SAEM from `Y` alone, then the algebraic correction:
/// the quadratic for two classes, simplex minimization otherwise.
pub fn debias_algebraic<R: Rng + ?Sized>(
    sample: &RdsSample,
    q: usize,
    iterations: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let unlabeled = RdsSample { x: Vec::new(), ..sample.without_labels() };
    let inner = saem_classical(&unlabeled, q, iterations, rng)?;
    let mut diagnostics = inner.diagnostics.clone();
    let alpha = if q == 2 {
        let a1 = debias_algebraic_q2(inner.alpha[0], &inner.pi)?;
        vec![a1, 1.0 - a1]
    } else {
        let sol = debias_algebraic_general(&inner.alpha, &inner.pi)?;
        diagnostics.insert("algebraic_residual".into(), sol.residual);
        diagnostics.insert("multiple_minima".into(), sol.multiple_minima as u8 as f64);
        sol.alpha
    };
    let mut est = Estimate::new(Method::DebiasAlgebraic, alpha, inner.pi);
    est.diagnostics = diagnostics;
    est.set_diag("lambda_1", inner.alpha[0]);
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sbm::SbmParams;
    use approx::assert_abs_diff_eq;

    fn theta_star() -> SbmParams {
        SbmParams::two_class(2.0 / 3.0, 0.7, 0.4, 0.8).unwrap()
    }

    #[test]
    fn quadratic_reference_case() {
        let t = theta_star();
        let a = debias_algebraic_q2(9.0 / 13.0, t.pi()).unwrap();
        assert_abs_diff_eq!(a, 2.0 / 3.0, epsilon = 1e-12);
        let a = debias_algebraic_q2(0.6923077, t.pi()).unwrap();
        assert_abs_diff_eq!(a, 0.6666667, epsilon = 1e-7);
    }

    #[test]
    fn quadratic_is_identity_without_bias() {
        let er = SymMatrix::filled(2, 0.3);
        assert_abs_diff_eq!(debias_algebraic_q2(0.41, &er).unwrap(), 0.41, epsilon = 1e-15);
    }

    #[test]
    fn exact_cdf_inversion() {
        let t = theta_star();
        let profile = BiasedProfile::new(&t);
        let alpha = debias_by_inverse(&[0.6923077, 0.3076923], |v| profile.inverse(v)).unwrap();
        assert_abs_diff_eq!(alpha[0], 2.0 / 3.0, epsilon = 1e-7);
        let alpha = debias_by_inverse(&[9.0 / 13.0, 4.0 / 13.0], |v| profile.inverse(v)).unwrap();
        assert_abs_diff_eq!(alpha[0], 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn uniform_grid_cdf_is_nearly_identity() {
        let n = 1000;
        let grid: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let cdf = EmpiricalCdf::new(&grid);
        let alpha = debias_by_empirical_cdf(&[0.3, 0.5, 0.2], &cdf).unwrap();
        for (a, l) in alpha.iter().zip([0.3, 0.5, 0.2]) {
            assert_abs_diff_eq!(*a, l, epsilon = 2.0 / n as f64);
        }
        assert_abs_diff_eq!(alpha.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn general_solver_agrees_with_quadratic() {
        let t = theta_star();
        let sol = debias_algebraic_general(&[9.0 / 13.0, 4.0 / 13.0], t.pi()).unwrap();
        assert_abs_diff_eq!(sol.alpha[0], 2.0 / 3.0, epsilon = 1e-6);
        assert!(sol.residual < ALGEBRAIC_TOL);
    }

    #[test]
    fn general_solver_three_classes() {
        let p = SbmParams::from_upper(vec![0.5, 0.3, 0.2], &[0.8, 0.2, 0.3, 0.6, 0.1, 0.7]).unwrap();
        let lambda = BiasedProfile::new(&p).alpha_tilde;
        let sol = debias_algebraic_general(&lambda, p.pi()).unwrap();
        for (a, b) in sol.alpha.iter().zip(p.alpha()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn unbiased_weights_are_fixed() {
        // equal mean connectivities: alpha_tilde = alpha
        let pi = SymMatrix::from_upper(2, &[0.6, 0.2, 0.6]).unwrap();
        let sol = debias_algebraic_general(&[0.5, 0.5], &pi).unwrap();
        assert_abs_diff_eq!(sol.alpha[0], 0.5, epsilon = 1e-9);
        assert!(sol.residual < 1e-12);
    }
}
