//! Stochastic approximation EM for unobserved class labels.
//!
//! Each iteration draws a candidate labeling from a proposal, accepts it
//! with a Metropolis–Hastings ratio, folds the counts of the current
//! labeling into exponentially averaged statistics, and maximizes the
//! averaged complete-data likelihood. Both likelihoods are linear in the
//! counts, so the averaged counts represent the surrogate objective exactly.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::mle::{
    classical_estimator, format_sig8, ll_classical_raw, ll_rds_raw, mle_complete_with, Estimate,
    Method, MleOptions,
};
use crate::sampler::{Adjacency, CountStats, RdsSample};
use crate::sbm::{SbmParams, SymMatrix};

/// Floor applied to proposal probabilities so every labeling stays reachable.
pub const TAU_FLOOR: f64 = 1e-10;

/// Which complete-data likelihood drives the chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Likelihood {
    /// Walk likelihood with the `pibar` transition terms.
    Rds,
    /// SBM likelihood ignoring the sampling design.
    Classical,
}

impl Likelihood {
    fn log_lik(self, stats: &CountStats, alpha: &[f64], pi: &SymMatrix) -> f64 {
        match self {
            Likelihood::Rds => ll_rds_raw(stats, alpha, pi),
            Likelihood::Classical => ll_classical_raw(stats, alpha, pi),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VariationalOptions {
    pub max_iter: usize,
    pub tol: f64,
    pub damping: f64,
}

impl Default for VariationalOptions {
    fn default() -> Self {
        Self { max_iter: 500, tol: 1e-8, damping: 0.5 }
    }
}

/// Row-stochastic `n x Q` matrix of approximate label posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub tau: Vec<Vec<f64>>,
    pub iterations: usize,
    pub converged: bool,
}

impl VariationalParams {
    pub fn uniform(n: usize, q: usize) -> Self {
        Self { tau: vec![vec![1.0 / q as f64; q]; n], iterations: 0, converged: false }
    }

    /// Rows drawn uniformly from the simplex.
    pub fn random<R: Rng + ?Sized>(n: usize, q: usize, rng: &mut R) -> Self {
        let tau = (0..n)
            .map(|_| {
                let e: Vec<f64> = (0..q).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
                let s: f64 = e.iter().sum();
                e.into_iter().map(|v| v / s).collect()
            })
            .collect();
        Self { tau, iterations: 0, converged: false }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let q = self.tau.first().map_or(0, |r| r.len());
        (0..q).map(|c| self.tau.iter().map(|r| r[c]).sum()).collect()
    }

    /// Most probable class of every vertex.
    pub fn hard_labels(&self) -> Vec<usize> {
        self.tau
            .iter()
            .map(|row| (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0))
            .collect()
    }
}

/// One application of the fixed-point map: row `i` of the result is
/// proportional to
/// `alpha_q / pibar_q * prod_{j != i} prod_r b(Y_ij, pi_qr)^{tau_jr}`,
/// where the `pibar_q` factor enters only for the vertices the walk left
/// (`i < n`) and only under the RDS likelihood.
pub fn variational_map(
    adj: &Adjacency,
    alpha: &[f64],
    pi: &SymMatrix,
    likelihood: Likelihood,
    tau: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = adj.len();
    let q = alpha.len();
    let pibar = pi.mul_vec(alpha);
    let log_on: Vec<f64> = (0..q * q).map(|k| pi.get(k / q, k % q).ln()).collect();
    let log_off: Vec<f64> = (0..q * q).map(|k| (1.0 - pi.get(k / q, k % q)).ln()).collect();
    let totals: Vec<f64> = (0..q).map(|r| tau.iter().map(|row| row[r]).sum()).collect();

    let mut out = Vec::with_capacity(n);
    let mut near = vec![0.0; q];
    for i in 0..n {
        near.iter_mut().for_each(|v| *v = 0.0);
        for (wi, &word) in adj.row(i).iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let j = wi * 64 + bits.trailing_zeros() as usize;
                bits &= bits - 1;
                for r in 0..q {
                    near[r] += tau[j][r];
                }
            }
        }
        let mut logs: Vec<f64> = (0..q)
            .map(|c| {
                let mut v = alpha[c].ln();
                if likelihood == Likelihood::Rds && i + 1 < n {
                    v -= pibar[c].ln();
                }
                for r in 0..q {
                    let far = totals[r] - tau[i][r] - near[r];
                    v += near[r] * log_on[c * q + r] + far * log_off[c * q + r];
                }
                v
            })
            .collect();
        let m = logs.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        logs.iter_mut().for_each(|v| *v = (*v - m).exp());
        let s: f64 = logs.iter().sum();
        logs.iter_mut().for_each(|v| *v /= s);
        out.push(logs);
    }
    out
}

/// Variational lower bound on the log-likelihood of `Y`:
/// `sum_i sum_q tau_iq [log alpha_q - log pibar_q 1{i < n} - log tau_iq]
///  + sum_{i<j} sum_{q,r} tau_iq tau_jr log b(Y_ij, pi_qr)`,
/// the `pibar` term present under the RDS likelihood only.
pub fn variational_bound(
    adj: &Adjacency,
    alpha: &[f64],
    pi: &SymMatrix,
    likelihood: Likelihood,
    tau: &[Vec<f64>],
) -> f64 {
    let n = adj.len();
    let q = alpha.len();
    let pibar = pi.mul_vec(alpha);
    let mut single = 0.0;
    let mut pairs = 0.0;
    for i in 0..n {
        for c in 0..q {
            let t = tau[i][c];
            if t <= 0.0 {
                continue;
            }
            let mut v = alpha[c].ln() - t.ln();
            if likelihood == Likelihood::Rds && i + 1 < n {
                v -= pibar[c].ln();
            }
            single += t * v;
        }
        for j in (i + 1)..n {
            let y = adj.get(i, j);
            for c in 0..q {
                for r in 0..q {
                    let p = pi.get(c, r);
                    pairs += tau[i][c] * tau[j][r] * if y { p.ln() } else { (1.0 - p).ln() };
                }
            }
        }
    }
    single + pairs
}

/// Damped iteration `tau <- (1 - d) tau + d Phi(tau)` until
/// `max |Phi(tau) - tau| < opts.tol`; the last undamped image is returned.
pub fn variational_fixed_point(
    adj: &Adjacency,
    params: &SbmParams,
    likelihood: Likelihood,
    init: Option<&VariationalParams>,
    opts: &VariationalOptions,
) -> Result<VariationalParams> {
    let n = adj.len();
    let q = params.num_classes();
    if let Some(v) = init {
        if v.tau.len() != n || v.tau.iter().any(|r| r.len() != q) {
            return Err(Error::Argument("initial tau has the wrong shape".into()));
        }
    }
    Ok(fixed_point_raw(adj, params.alpha(), params.pi(), likelihood, init, opts))
}

fn fixed_point_raw(
    adj: &Adjacency,
    alpha: &[f64],
    pi: &SymMatrix,
    likelihood: Likelihood,
    init: Option<&VariationalParams>,
    opts: &VariationalOptions,
) -> VariationalParams {
    let n = adj.len();
    let q = alpha.len();
    let mut tau = init.map_or_else(|| VariationalParams::uniform(n, q).tau, |v| v.tau.clone());
    let d = opts.damping;
    for it in 1..=opts.max_iter {
        let phi = variational_map(adj, alpha, pi, likelihood, &tau);
        let residual = tau
            .iter()
            .zip(&phi)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0f64, f64::max);
        if residual < opts.tol {
            return VariationalParams { tau: phi, iterations: it, converged: true };
        }
        for (row, new) in tau.iter_mut().zip(&phi) {
            let mut s = 0.0;
            for (t, p) in row.iter_mut().zip(new) {
                *t = (1.0 - d) * *t + d * p;
                s += *t;
            }
            row.iter_mut().for_each(|t| *t /= s);
        }
    }
    VariationalParams { tau, iterations: opts.max_iter, converged: false }
}

/// Robbins–Monro step sizes: `1` during burn-in, then `(k - K0)^(-decay)`.
#[derive(Debug, Clone, Copy)]
pub struct StepSchedule {
    pub burn_in: usize,
    pub decay: f64,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self { burn_in: 50, decay: 0.7 }
    }
}

impl StepSchedule {
    /// Step size of iteration `k >= 1`.
    pub fn step(&self, k: usize) -> f64 {
        if k <= self.burn_in {
            1.0
        } else {
            ((k - self.burn_in) as f64).powf(-self.decay)
        }
    }
}

/// How candidate labelings are drawn.
#[derive(Debug, Clone)]
pub enum ProposalKind {
    /// Independent multinomial rows from the variational fixed point at the
    /// current parameter.
    Variational,
    /// Gaussian random walk on a threshold `lambda`; labels `1{X_i <= lambda}`.
    /// Two classes only.
    Threshold { std: f64 },
    /// Always proposes the given labels.
    Pinned(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct SaemOptions {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub max_restarts: usize,
    pub variational: VariationalOptions,
    pub mle: MleOptions,
    pub record_trace: bool,
    /// Starting threshold of the threshold proposal.
    pub initial_threshold: f64,
    /// Independent chains run under the variational proposal; the one whose
    /// final parameter has the largest variational bound is kept.
    pub chains: usize,
}

impl Default for SaemOptions {
    fn default() -> Self {
        Self {
            iterations: 200,
            schedule: StepSchedule::default(),
            max_restarts: 3,
            variational: VariationalOptions::default(),
            mle: MleOptions { starts: 1, ..MleOptions::default() },
            record_trace: false,
            initial_threshold: 0.5,
            chains: 4,
        }
    }
}

/// One line of the optional trajectory log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub alpha: Vec<f64>,
    pub pi_upper: Vec<f64>,
    pub accepted: bool,
    pub log_lik: f64,
}

/// Chain state after iteration `k`.
#[derive(Debug, Clone)]
pub struct SaemState {
    pub k: usize,
    pub alpha: Vec<f64>,
    pub pi: SymMatrix,
    pub z: Vec<usize>,
    /// Averaged sufficient statistics standing for the surrogate objective.
    pub q_stats: CountStats,
    pub tau: Option<VariationalParams>,
    pub threshold: f64,
    pub accepted: usize,
    /// Whether the last maximization met its stationarity certificate.
    pub m_step_converged: bool,
}

/// Observations and settings shared by every step of one chain.
pub struct SaemContext<'a> {
    pub adjacency: &'a Adjacency,
    /// Walk positions, needed by the threshold proposal only.
    pub positions: Option<&'a [f64]>,
    pub num_classes: usize,
    pub likelihood: Likelihood,
    pub proposal: ProposalKind,
    pub options: SaemOptions,
}

fn labels_nonempty(z: &[usize], q: usize) -> bool {
    let mut seen = vec![false; q];
    for &c in z {
        seen[c] = true;
    }
    seen.into_iter().all(|s| s)
}

fn threshold_labels(x: &[f64], lambda: f64) -> Vec<usize> {
    x.iter().map(|&v| if v <= lambda { 0 } else { 1 }).collect()
}

/// Folds `v` back into `[0, 1]` by reflection at both ends.
fn reflect_unit(mut v: f64) -> f64 {
    if !v.is_finite() {
        return 0.5;
    }
    v = v.rem_euclid(2.0);
    if v > 1.0 {
        2.0 - v
    } else {
        v
    }
}

fn floored(row: &[f64]) -> Vec<f64> {
    let mut r: Vec<f64> = row.iter().map(|p| p.max(TAU_FLOOR)).collect();
    let s: f64 = r.iter().sum();
    r.iter_mut().for_each(|p| *p /= s);
    r
}

fn draw_from_tau<R: Rng + ?Sized>(tau: &[Vec<f64>], rng: &mut R) -> (Vec<usize>, f64) {
    let mut log_q = 0.0;
    let z = tau
        .iter()
        .map(|row| {
            let row = floored(row);
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = row.len() - 1;
            for (c, p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = c;
                    break;
                }
            }
            log_q += row[pick].ln();
            pick
        })
        .collect();
    (z, log_q)
}

fn log_proposal(tau: &[Vec<f64>], z: &[usize]) -> f64 {
    tau.iter().zip(z).map(|(row, &c)| floored(row)[c].ln()).sum()
}

impl SaemContext<'_> {
    fn m_step(&self, stats: &CountStats) -> Result<(Vec<f64>, SymMatrix, bool)> {
        match self.likelihood {
            Likelihood::Rds => {
                let est = mle_complete_with(stats, &self.options.mle)?;
                let ok = est.converged();
                Ok((est.alpha, est.pi, ok))
            }
            Likelihood::Classical => {
                let est = classical_estimator(stats)?;
                Ok((est.alpha, est.pi, true))
            }
        }
    }

    fn log_lik(&self, z: &[usize], alpha: &[f64], pi: &SymMatrix) -> Result<f64> {
        let stats = CountStats::from_labels(self.adjacency, z, self.num_classes)?;
        Ok(self.likelihood.log_lik(&stats, alpha, pi))
    }

    /// Fresh state: uniform weights, connection probabilities uniform on
    /// `[0.2, 0.8]`, and a first labeling drawn from the proposal.
    pub fn initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SaemState> {
        let q = self.num_classes;
        let n = self.adjacency.len();
        if q < 1 || n < q {
            return Err(Error::Argument(format!("cannot fit Q={q} classes to {n} vertices")));
        }
        let alpha = vec![1.0 / q as f64; q];
        let mut pi = SymMatrix::zeros(q);
        for (a, b) in SymMatrix::upper_indices(q) {
            pi.set(a, b, rng.random_range(0.2..0.8));
        }
        let mut threshold = self.options.initial_threshold;
        let mut tau = None;
        let z = match &self.proposal {
            ProposalKind::Pinned(z) => {
                if z.len() != n || z.iter().any(|&c| c >= q) {
                    return Err(Error::Argument("pinned labels do not fit the sample".into()));
                }
                z.clone()
            }
            ProposalKind::Threshold { .. } => {
                let x = self.positions.ok_or_else(|| {
                    Error::Argument("threshold proposal needs walk positions".into())
                })?;
                if q != 2 {
                    return Err(Error::Argument("threshold proposal is defined for Q=2".into()));
                }
                let mut z = threshold_labels(x, threshold);
                if !labels_nonempty(&z, q) {
                    let mut sorted = x.to_vec();
                    sorted.sort_by(|a, b| a.total_cmp(b));
                    threshold = sorted[(n - 1) / 2];
                    z = threshold_labels(x, threshold);
                }
                z
            }
            ProposalKind::Variational => {
                let start = VariationalParams::random(n, q, rng);
                let t = fixed_point_raw(
                    self.adjacency,
                    &alpha,
                    &pi,
                    self.likelihood,
                    Some(&start),
                    &self.options.variational,
                );
                let mut z = draw_from_tau(&t.tau, rng).0;
                let mut tries = 0;
                while !labels_nonempty(&z, q) && tries < 100 {
                    z = draw_from_tau(&t.tau, rng).0;
                    tries += 1;
                }
                if !labels_nonempty(&z, q) {
                    for (c, zc) in z.iter_mut().take(q).enumerate() {
                        *zc = c;
                    }
                }
                tau = Some(t);
                z
            }
        };
        if !labels_nonempty(&z, q) {
            return Err(Error::Degenerate("initial labeling leaves a class empty".into()));
        }
        let q_stats = CountStats::from_labels(self.adjacency, &z, q)?;
        Ok(SaemState {
            k: 0,
            alpha,
            pi,
            z,
            q_stats,
            tau,
            threshold,
            accepted: 0,
            m_step_converged: true,
        })
    }
}

/// Outcome of one [`SaemState::step`].
#[derive(Debug, Clone, Copy)]
pub struct StepReport {
    pub accepted: bool,
    /// Acceptance probability `omega` in `[0, 1]`.
    pub omega: f64,
    /// True when the variational proposal has collapsed onto fewer classes.
    pub degenerate: bool,
}

impl SaemState {
    /// Simulation, stochastic approximation and maximization for iteration
    /// `k + 1`.
    pub fn step<R: Rng + ?Sized>(&mut self, ctx: &SaemContext<'_>, rng: &mut R) -> Result<StepReport> {
        let q = ctx.num_classes;
        let k = self.k + 1;
        let current_ll = ctx.log_lik(&self.z, &self.alpha, &self.pi)?;
        let mut degenerate = false;

        // candidate and log of the proposal ratio q(Z | Z^c) / q(Z^c | Z)
        let (candidate, log_ratio, threshold) = match &ctx.proposal {
            ProposalKind::Pinned(z) => (z.clone(), 0.0, self.threshold),
            ProposalKind::Threshold { std } => {
                let x = ctx.positions.expect("checked at initialization");
                let lambda = if *std > 0.0 {
                    let step = Normal::new(0.0, *std)
                        .map_err(|e| Error::Argument(format!("proposal std: {e}")))?
                        .sample(rng);
                    reflect_unit(self.threshold + step)
                } else {
                    self.threshold
                };
                (threshold_labels(x, lambda), 0.0, lambda)
            }
            ProposalKind::Variational => {
                let t = fixed_point_raw(
                    ctx.adjacency,
                    &self.alpha,
                    &self.pi,
                    ctx.likelihood,
                    self.tau.as_ref(),
                    &ctx.options.variational,
                );
                degenerate = t.column_sums().iter().any(|&s| s < 0.5);
                let (zc, log_qc) = draw_from_tau(&t.tau, rng);
                let log_qz = log_proposal(&t.tau, &self.z);
                self.tau = Some(t);
                (zc, log_qz - log_qc, self.threshold)
            }
        };

        let omega = if candidate == self.z {
            1.0
        } else if !labels_nonempty(&candidate, q) {
            0.0
        } else {
            let cand_ll = ctx.log_lik(&candidate, &self.alpha, &self.pi)?;
            let log_omega = cand_ll - current_ll + log_ratio;
            if log_omega.is_nan() {
                0.0
            } else {
                log_omega.min(0.0).exp()
            }
        };
        let accepted = omega >= 1.0 || rng.random::<f64>() < omega;
        if accepted {
            self.z = candidate;
            self.threshold = threshold;
            self.accepted += 1;
        }

        let stats = CountStats::from_labels(ctx.adjacency, &self.z, q)?;
        self.q_stats.blend(&stats, ctx.options.schedule.step(k));
        let (alpha, pi, ok) = ctx.m_step(&self.q_stats)?;
        self.alpha = alpha;
        self.pi = pi;
        self.m_step_converged = ok;
        self.k = k;
        Ok(StepReport { accepted, omega, degenerate })
    }

    /// Surrogate objective: the likelihood of the averaged counts at the
    /// current parameter.
    pub fn surrogate(&self, likelihood: Likelihood) -> f64 {
        likelihood.log_lik(&self.q_stats, &self.alpha, &self.pi)
    }
}

/// Result of a full chain.
#[derive(Debug, Clone)]
pub struct SaemOutput {
    pub estimate: Estimate,
    pub state: SaemState,
    pub trace: Vec<TraceRow>,
    pub restarts: usize,
}

/// Runs `ctx.options.iterations` steps, restarting from a fresh
/// initialization when the variational proposal degenerates.
pub fn run_saem<R: Rng + ?Sized>(ctx: &SaemContext<'_>, method: Method, rng: &mut R) -> Result<SaemOutput> {
    let chains = match ctx.proposal {
        ProposalKind::Variational => ctx.options.chains.max(1),
        _ => 1,
    };
    let mut best: Option<(f64, SaemOutput)> = None;
    for c in 0..chains {
        let mut out = run_chain(ctx, method, rng)?;
        let bound = if chains > 1 {
            let t = fixed_point_raw(
                ctx.adjacency,
                &out.state.alpha,
                &out.state.pi,
                ctx.likelihood,
                out.state.tau.as_ref(),
                &ctx.options.variational,
            );
            variational_bound(ctx.adjacency, &out.state.alpha, &out.state.pi, ctx.likelihood, &t.tau)
        } else {
            0.0
        };
        out.estimate.set_diag("chain", c as f64);
        if chains > 1 {
            out.estimate.set_diag("variational_bound", bound);
        }
        if best.as_ref().is_none_or(|b| bound > b.0) {
            best = Some((bound, out));
        }
    }
    Ok(best.expect("at least one chain").1)
}

fn run_chain<R: Rng + ?Sized>(ctx: &SaemContext<'_>, method: Method, rng: &mut R) -> Result<SaemOutput> {
    let mut restarts = 0;
    'chain: loop {
        let mut state = ctx.initial_state(rng)?;
        let mut trace = Vec::new();
        for _ in 0..ctx.options.iterations {
            let report = state.step(ctx, rng)?;
            if report.degenerate && restarts < ctx.options.max_restarts {
                restarts += 1;
                continue 'chain;
            }
            if ctx.options.record_trace {
                trace.push(TraceRow {
                    k: state.k,
                    alpha: state.alpha.clone(),
                    pi_upper: state.pi.upper(),
                    accepted: report.accepted,
                    log_lik: state.surrogate(ctx.likelihood),
                });
            }
        }
        let mut estimate = Estimate::new(method, state.alpha.clone(), state.pi.clone());
        let iters = ctx.options.iterations;
        estimate.set_diag("iterations", iters as f64);
        estimate.set_diag("restarts", restarts as f64);
        let rate = if iters > 0 { state.accepted as f64 / iters as f64 } else { 0.0 };
        estimate.set_diag("acceptance_rate", rate);
        estimate.set_diag("surrogate", state.surrogate(ctx.likelihood));
        estimate.set_diag("m_step_converged", if state.m_step_converged { 1.0 } else { 0.0 });
        if matches!(ctx.proposal, ProposalKind::Threshold { .. }) {
            estimate.set_diag("threshold", state.threshold);
        }
        return Ok(SaemOutput { estimate, state, trace, restarts });
    }
}

/// SAEM on the walk likelihood from the adjacency alone; positions and any
/// labels carried by the sample are ignored.
pub fn saem_rds<R: Rng + ?Sized>(
    sample: &RdsSample,
    q: usize,
    iterations: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let ctx = SaemContext {
        adjacency: &sample.adjacency,
        positions: None,
        num_classes: q,
        likelihood: Likelihood::Rds,
        proposal: ProposalKind::Variational,
        options: SaemOptions { iterations, ..SaemOptions::default() },
    };
    Ok(run_saem(&ctx, Method::SaemRds, rng)?.estimate)
}

/// SAEM on the classical likelihood with the variational proposal, from the
/// adjacency alone. The weights target the biased `alpha_tilde`.
pub fn saem_classical<R: Rng + ?Sized>(
    sample: &RdsSample,
    q: usize,
    iterations: usize,
    rng: &mut R,
) -> Result<Estimate> {
    let ctx = SaemContext {
        adjacency: &sample.adjacency,
        positions: None,
        num_classes: q,
        likelihood: Likelihood::Classical,
        proposal: ProposalKind::Variational,
        options: SaemOptions { iterations, ..SaemOptions::default() },
    };
    Ok(run_saem(&ctx, Method::Classical, rng)?.estimate)
}

/// SAEM on the classical likelihood whose latent variable is a threshold on
/// the walk positions (two classes). The returned weights target the biased
/// `alpha_tilde`; the final threshold is reported under `threshold`.
pub fn saem_classical_threshold<R: Rng + ?Sized>(
    sample: &RdsSample,
    iterations: usize,
    std: f64,
    rng: &mut R,
) -> Result<Estimate> {
    if !(std >= 0.0) {
        return Err(Error::Argument(format!("proposal std must be nonnegative, got {std}")));
    }
    let ctx = SaemContext {
        adjacency: &sample.adjacency,
        positions: Some(&sample.x),
        num_classes: 2,
        likelihood: Likelihood::Classical,
        proposal: ProposalKind::Threshold { std },
        options: SaemOptions { iterations, ..SaemOptions::default() },
    };
    Ok(run_saem(&ctx, Method::Classical, rng)?.estimate)
}

pub fn trace_csv_header(q: usize) -> String {
    let mut cols = vec!["k".to_string()];
    cols.extend((1..=q).map(|c| format!("alpha_{c}")));
    cols.extend(SymMatrix::upper_indices(q).map(|(a, b)| format!("pi_{}{}", a + 1, b + 1)));
    cols.push("accepted".into());
    cols.push("log_lik".into());
    cols.join(",")
}

pub fn write_trace<W: Write>(out: &mut W, q: usize, trace: &[TraceRow]) -> Result<()> {
    writeln!(out, "{}", trace_csv_header(q))?;
    for row in trace {
        let mut cols = vec![row.k.to_string()];
        cols.extend(row.alpha.iter().chain(&row.pi_upper).map(|&v| format_sig8(v)));
        cols.push((row.accepted as u8).to_string());
        cols.push(format_sig8(row.log_lik));
        writeln!(out, "{}", cols.join(","))?;
    }
    Ok(())
}
