//! Complete-data likelihoods, their score system and the two complete-data
//! estimators: the numerical RDS maximum likelihood estimator and the
//! explicit estimator of the classical (bias-ignoring) likelihood.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::optim::{newton_solve, NelderMead, NewtonOptions};
use crate::sampler::CountStats;
use crate::sbm::{sum, SbmParams, SymMatrix};

/// Estimates are kept inside `[CLAMP_EPS, 1 - CLAMP_EPS]`.
pub const CLAMP_EPS: f64 = 1e-6;
/// Stationarity certificate required of a converged MLE.
pub const SCORE_TOL: f64 = 1e-6;

/// Estimator tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    MleComplete,
    Classical,
    SaemRds,
    DebiasComplete,
    DebiasSaem,
    DebiasAlgebraic,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::MleComplete,
        Method::Classical,
        Method::SaemRds,
        Method::DebiasComplete,
        Method::DebiasSaem,
        Method::DebiasAlgebraic,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::MleComplete => "mle-complete",
            Method::Classical => "classical",
            Method::SaemRds => "saem-rds",
            Method::DebiasComplete => "debias-complete",
            Method::DebiasSaem => "debias-saem",
            Method::DebiasAlgebraic => "debias-algebraic",
        }
    }

    /// Whether the estimator is allowed to see the class labels.
    pub fn uses_labels(self) -> bool {
        matches!(self, Method::MleComplete | Method::Classical | Method::DebiasComplete)
    }

    /// Whether the estimator is allowed to see the walk positions.
    pub fn uses_positions(self) -> bool {
        matches!(self, Method::DebiasComplete | Method::DebiasSaem)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s.trim())
            .ok_or_else(|| Error::Argument(format!("unknown method `{s}`")))
    }
}

/// Decimal rendering with 8 significant digits.
pub fn format_sig8(x: f64) -> String {
    format!("{x:.7e}")
}

/// An estimated parameter with its method tag and named diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub method: Method,
    pub alpha: Vec<f64>,
    pub pi: SymMatrix,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Estimate {
    pub fn new(method: Method, alpha: Vec<f64>, pi: SymMatrix) -> Self {
        Self { method, alpha, pi, diagnostics: BTreeMap::new() }
    }

    pub fn num_classes(&self) -> usize {
        self.alpha.len()
    }

    pub fn diag(&self, key: &str) -> Option<f64> {
        self.diagnostics.get(key).copied()
    }

    pub fn set_diag(&mut self, key: &str, value: f64) {
        self.diagnostics.insert(key.to_string(), value);
    }

    pub fn converged(&self) -> bool {
        self.diag("converged").is_none_or(|c| c == 1.0)
    }

    /// Relabels class `q` as `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut alpha = vec![0.0; self.alpha.len()];
        for (q, &a) in self.alpha.iter().enumerate() {
            alpha[perm[q]] = a;
        }
        Self { alpha, pi: self.pi.permuted(perm), ..self.clone() }
    }

    /// Validated parameters; weights are renormalized and must be positive.
    pub fn to_params(&self) -> Result<SbmParams> {
        let total = sum(&self.alpha);
        let alpha: Vec<f64> = self.alpha.iter().map(|a| a / total).collect();
        SbmParams::new(alpha, self.pi.clone())
    }

    pub fn csv_header(q: usize) -> String {
        let mut cols = vec!["method".to_string(), "Q".to_string()];
        cols.extend((1..=q).map(|c| format!("alpha_{c}")));
        cols.extend(SymMatrix::upper_indices(q).map(|(a, b)| format!("pi_{}{}", a + 1, b + 1)));
        cols.push("diagnostics".into());
        cols.join(",")
    }

    /// `method,Q,alpha_1..alpha_Q,pi upper triangle,key=value;...`
    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.method.tag().to_string(), self.num_classes().to_string()];
        cols.extend(self.alpha.iter().map(|&a| format_sig8(a)));
        cols.extend(self.pi.upper().into_iter().map(format_sig8));
        let diag: Vec<String> =
            self.diagnostics.iter().map(|(k, v)| format!("{k}={}", format_sig8(*v))).collect();
        cols.push(diag.join(";"));
        cols.join(",")
    }
}

#[inline]
fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn edge_terms(stats: &CountStats, pi: &SymMatrix) -> f64 {
    let terms: Vec<f64> = SymMatrix::upper_indices(pi.dim())
        .map(|(q, r)| {
            let p = pi.get(q, r);
            xlogy(stats.edges.get(q, r), p) + xlogy(stats.non_edges.get(q, r), 1.0 - p)
        })
        .collect();
    sum(&terms)
}

/// `pibar_q = sum_r pi_qr alpha_r`.
fn mean_connectivity(alpha: &[f64], pi: &SymMatrix) -> Vec<f64> {
    pi.mul_vec(alpha)
}

/// RDS log-likelihood for unvalidated `(alpha, pi)`.
pub(crate) fn ll_rds_raw(stats: &CountStats, alpha: &[f64], pi: &SymMatrix) -> f64 {
    let pibar = mean_connectivity(alpha, pi);
    let mut terms = vec![edge_terms(stats, pi)];
    for q in 0..alpha.len() {
        let c = stats.n_per_class[q] - stats.last_type[q];
        terms.push(xlogy(stats.n_per_class[q], alpha[q]) - xlogy(c, pibar[q]));
    }
    sum(&terms)
}

/// Classical log-likelihood for unvalidated `(alpha, pi)`.
pub(crate) fn ll_classical_raw(stats: &CountStats, alpha: &[f64], pi: &SymMatrix) -> f64 {
    let mut terms = vec![edge_terms(stats, pi)];
    for q in 0..alpha.len() {
        terms.push(xlogy(stats.n_per_class[q], alpha[q]));
    }
    sum(&terms)
}

/// Log-likelihood of the labeled explored graph under the walk model:
/// `sum_{q<=r} [N<->_qr log pi_qr + N</>_qr log(1 - pi_qr)]
///  + sum_q [N_q log alpha_q - (N_q - 1{Z_n = q}) log pibar_q]`.
pub fn log_likelihood_rds(stats: &CountStats, params: &SbmParams) -> f64 {
    ll_rds_raw(stats, params.alpha(), params.pi())
}

/// Log-likelihood of an i.i.d. SBM sample: the walk's `pibar` terms dropped.
pub fn log_likelihood_classical(stats: &CountStats, params: &SbmParams) -> f64 {
    ll_classical_raw(stats, params.alpha(), params.pi())
}

/// Score residual of the RDS likelihood at unvalidated parameters. Entries:
/// `D_q - D_Q` for `q < Q`, then the `pi` partials in upper-triangle order.
pub(crate) fn score_raw(stats: &CountStats, alpha: &[f64], pi: &SymMatrix) -> Vec<f64> {
    let q = alpha.len();
    let pibar = mean_connectivity(alpha, pi);
    let c: Vec<f64> = (0..q).map(|p| stats.n_per_class[p] - stats.last_type[p]).collect();
    let d: Vec<f64> = (0..q)
        .map(|a| {
            let pull: Vec<f64> = (0..q).map(|p| c[p] * pi.get(p, a) / pibar[p]).collect();
            stats.n_per_class[a] / alpha[a] - sum(&pull)
        })
        .collect();
    let mut out: Vec<f64> = (0..q - 1).map(|a| d[a] - d[q - 1]).collect();
    for (a, b) in SymMatrix::upper_indices(q) {
        let p = pi.get(a, b);
        let mut g = stats.edges.get(a, b) / p - stats.non_edges.get(a, b) / (1.0 - p);
        if a == b {
            g -= c[a] * alpha[a] / pibar[a];
        } else {
            g -= c[a] * alpha[b] / pibar[a] + c[b] * alpha[a] / pibar[b];
        }
        out.push(g);
    }
    out
}

/// Left-hand sides of the RDS score system: weight equations as
/// differences against the last class, then one equation per `pi_qr`,
/// `q <= r`. All vanish at an interior maximizer.
pub fn score_residual_rds(stats: &CountStats, params: &SbmParams) -> Vec<f64> {
    score_raw(stats, params.alpha(), params.pi())
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Unconstrained coordinates: `alpha` through a softmax anchored at the
/// last class, `pi` entries through log-odds.
struct Reparam {
    q: usize,
}

impl Reparam {
    fn decode(&self, u: &[f64]) -> (Vec<f64>, SymMatrix) {
        let q = self.q;
        let m = u[..q - 1].iter().fold(0.0f64, |m, &v| m.max(v));
        let mut alpha: Vec<f64> = u[..q - 1].iter().map(|v| (v - m).exp()).collect();
        alpha.push((-m).exp());
        let total = sum(&alpha);
        alpha.iter_mut().for_each(|a| *a /= total);
        let upper: Vec<f64> = u[q - 1..].iter().map(|&v| 1.0 / (1.0 + (-v).exp())).collect();
        (alpha, SymMatrix::from_upper(q, &upper).expect("dimension matches"))
    }

    fn encode(&self, alpha: &[f64], pi: &SymMatrix) -> Vec<f64> {
        let last = alpha[self.q - 1];
        let mut u: Vec<f64> = alpha[..self.q - 1].iter().map(|a| (a / last).ln()).collect();
        u.extend(pi.upper().into_iter().map(|p| (p / (1.0 - p)).ln()));
        u
    }
}

/// Natural coordinates `(alpha_1..alpha_{Q-1}, pi upper)` with
/// `alpha_Q = 1 - sum`.
fn natural_decode(q: usize, v: &[f64]) -> (Vec<f64>, SymMatrix) {
    let mut alpha = v[..q - 1].to_vec();
    alpha.push(1.0 - sum(&alpha));
    (alpha, SymMatrix::from_upper(q, &v[q - 1..]).expect("dimension matches"))
}

fn natural_feasible(q: usize, v: &[f64]) -> bool {
    let head = &v[..q - 1];
    head.iter().all(|&a| a > 0.0) && sum(head) < 1.0 && v[q - 1..].iter().all(|&p| p > 0.0 && p < 1.0)
}

/// Tunables of [`mle_complete_with`].
#[derive(Debug, Clone)]
pub struct MleOptions {
    pub starts: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Standard deviation of the jitter applied to the unconstrained start.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self { starts: 5, max_iter: 2_000, rel_tol: 1e-10, jitter: 0.5, seed: 0x6d6c65 }
    }
}

/// Maximizer of the RDS log-likelihood for fully labeled counts.
pub fn mle_complete(stats: &CountStats) -> Result<Estimate> {
    mle_complete_with(stats, &MleOptions::default())
}

pub fn mle_complete_with(stats: &CountStats, opts: &MleOptions) -> Result<Estimate> {
    let q = stats.num_classes();
    if let Some(empty) = (0..q).find(|&c| !(stats.n_per_class[c] > 0.0)) {
        return Err(Error::EmptyClass(empty));
    }
    let rp = Reparam { q };
    let start_est = classical_estimator(stats)?;
    let base = rp.encode(&start_est.alpha, &start_est.pi);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noise = Normal::new(0.0, opts.jitter.max(1e-12)).expect("positive std");
    let nm = NelderMead { max_iter: opts.max_iter, f_rel_tol: opts.rel_tol, ..Default::default() };
    let objective = |u: &[f64]| {
        let (a, p) = rp.decode(u);
        -ll_rds_raw(stats, &a, &p)
    };

    let mut best: Option<(f64, Vec<f64>, usize, usize)> = None;
    let mut iterations = 0;
    for s in 0..opts.starts.max(1) {
        let x0: Vec<f64> = if s == 0 {
            base.clone()
        } else {
            base.iter().map(|v| v + noise.sample(&mut rng)).collect()
        };
        let m = nm.minimize(objective, &x0);
        iterations += m.iterations;
        // restart once from the simplex optimum to shake off early collapse
        let m = {
            let again = nm.minimize(objective, &m.x);
            iterations += again.iterations;
            if again.value <= m.value { again } else { m }
        };
        if best.as_ref().is_none_or(|b| m.value < b.0) {
            best = Some((m.value, m.x, s, m.iterations));
        }
    }
    let (mut value, u, start, _) = best.expect("at least one start");
    let (mut alpha, mut pi) = rp.decode(&u);

    // Newton polish on the score system in natural coordinates
    let mut natural: Vec<f64> = alpha[..q - 1].to_vec();
    natural.extend(pi.upper());
    let root = newton_solve(
        |v| {
            let (a, p) = natural_decode(q, v);
            score_raw(stats, &a, &p)
        },
        |v| natural_feasible(q, v),
        &natural,
        &NewtonOptions::default(),
    );
    let (pa, pp) = natural_decode(q, &root.x);
    let polished = -ll_rds_raw(stats, &pa, &pp);
    if polished.is_finite() && polished <= value + 1e-9 * value.abs().max(1.0) {
        alpha = pa;
        pi = pp;
        value = polished;
    }

    let residual = max_abs(&score_raw(stats, &alpha, &pi));
    let (alpha, pi, clamped) = clamp_estimate(alpha, pi);
    let mut est = Estimate::new(Method::MleComplete, alpha, pi);
    est.set_diag("score_residual", residual);
    est.set_diag("iterations", iterations as f64);
    est.set_diag("newton_iterations", root.iterations as f64);
    est.set_diag("final_objective", value);
    est.set_diag("start", start as f64);
    est.set_diag("clamped", clamped as f64);
    est.set_diag("converged", if residual < SCORE_TOL { 1.0 } else { 0.0 });
    Ok(est)
}

fn clamp_estimate(alpha: Vec<f64>, mut pi: SymMatrix) -> (Vec<f64>, SymMatrix, usize) {
    let mut clamped = 0;
    for (a, b) in SymMatrix::upper_indices(pi.dim()) {
        let p = pi.get(a, b);
        let c = p.clamp(CLAMP_EPS, 1.0 - CLAMP_EPS);
        if c != p {
            clamped += 1;
            pi.set(a, b, c);
        }
    }
    (alpha, pi, clamped)
}

/// Explicit maximizer of the classical likelihood:
/// `lambda_q = N_q / n`, `pi_qr = N<->_qr / (N<->_qr + N</>_qr)`.
///
/// For integer counts the pair totals are `N_q N_r` and `N_q (N_q - 1) / 2`.
/// A diagonal entry of a class with a single member has no pairs; it is
/// filled with the overall edge density and counted under `undefined`.
pub fn classical_estimator(stats: &CountStats) -> Result<Estimate> {
    let q = stats.num_classes();
    if let Some(empty) = (0..q).find(|&c| !(stats.n_per_class[c] > 0.0)) {
        return Err(Error::EmptyClass(empty));
    }
    let n = stats.n();
    let lambda: Vec<f64> = stats.n_per_class.iter().map(|c| c / n).collect();
    let total_edges = sum(&stats.edges.upper());
    let total_pairs = total_edges + sum(&stats.non_edges.upper());
    let fallback = if total_pairs > 0.0 { total_edges / total_pairs } else { 0.5 };
    let mut pi = SymMatrix::zeros(q);
    let mut undefined = 0;
    for (a, b) in SymMatrix::upper_indices(q) {
        let pairs = stats.pairs(a, b);
        let p = if pairs > 1e-12 {
            stats.edges.get(a, b) / pairs
        } else {
            undefined += 1;
            fallback
        };
        pi.set(a, b, p);
    }
    let (lambda, pi, clamped) = clamp_estimate(lambda, pi);
    let mut est = Estimate::new(Method::Classical, lambda, pi);
    est.set_diag("clamped", clamped as f64);
    est.set_diag("undefined", undefined as f64);
    Ok(est)
}
