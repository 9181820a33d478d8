//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rds_sbm::debias::{debias_algebraic_general, debias_algebraic_q2};
use rds_sbm::graphon::BiasedProfile;
use rds_sbm::harness::{derive_seed, run_experiment, ExperimentConfig};
use rds_sbm::metrics::{dsub_truncated, EmpiricalGraphon, GraphLike};
use rds_sbm::mle::{classical_estimator, log_likelihood_rds, mle_complete, score_residual_rds};
use rds_sbm::saem::{
    run_saem, variational_fixed_point, Likelihood, ProposalKind, SaemContext, SaemOptions, VariationalParams,
};
use rds_sbm::sampler::{count_stats, simulate, simulate_walk};
use rds_sbm::{Adjacency, CountStats, Method, SbmParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn theta_star() -> SbmParams {
    SbmParams::two_class(2.0 / 3.0, 0.7, 0.4, 0.8).unwrap()
}

fn random_params<R: Rng>(q: usize, rng: &mut R) -> SbmParams {
    let raw: Vec<f64> = (0..q).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let alpha: Vec<f64> = raw.iter().map(|v| v / total).collect();
    let upper: Vec<f64> = (0..q * (q + 1) / 2).map(|_| rng.random_range(0.05..0.95)).collect();
    SbmParams::from_upper(alpha, &upper).unwrap()
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value <= target * factor && value >= target / factor
}

fn mse(report: &rds_sbm::harness::ExperimentReport, method: Method, param: &str) -> f64 {
    report.row(method, param).map_or(f64::NAN, |r| r.mse)
}

fn reference_mse() -> Outcome {
    let cfg = ExperimentConfig::reference();
    let report = match run_experiment(&cfg, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let checks = [
        (Method::MleComplete, "pi_11", 3.52e-4, 3.0),
        (Method::DebiasComplete, "alpha_1", 6.80e-4, 3.0),
        (Method::MleComplete, "alpha_1", 7.01e-3, 3.0),
        (Method::SaemRds, "alpha_1", 3.80e-2, 5.0),
        (Method::SaemRds, "pi_11", 5.25e-3, 5.0),
        (Method::SaemRds, "pi_12", 5.14e-3, 5.0),
        (Method::SaemRds, "pi_22", 1.45e-2, 5.0),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, p, target, factor) in checks {
        let v = mse(&report, m, p);
        let ok = within_factor(v, target, factor);
        pass &= ok;
        parts.push(format!("{m} {p} {v:.3e} (ref {target:.2e}, x{factor}){}", if ok { "" } else { " !" }));
    }
    outcome(pass, parts.join("; "))
}

fn walk_bias() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 100_000;
    let (_, z) = simulate_walk(&theta_star(), n, &mut rng).unwrap();
    let frac = z.iter().filter(|&&c| c == 0).count() as f64 / n as f64;
    let pass = (frac - 0.6923077).abs() < 0.01 && (frac - 2.0 / 3.0).abs() > 0.02;
    outcome(pass, format!("N_1/n = {frac:.5}"))
}

fn debias_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst2: f64 = 0.0;
    for _ in 0..1000 {
        let a1 = rng.random_range(0.05..0.95);
        let upper: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let p = SbmParams::from_upper(vec![a1, 1.0 - a1], &upper).unwrap();
        let tilde = BiasedProfile::new(&p).alpha_tilde;
        let err = match debias_algebraic_q2(tilde[0], p.pi()) {
            Ok(a) => (a - a1).abs(),
            Err(_) => f64::INFINITY,
        };
        worst2 = worst2.max(err);
    }
    let mut worst3: f64 = 0.0;
    for _ in 0..50 {
        let p = random_params(3, &mut rng);
        let tilde = BiasedProfile::new(&p).alpha_tilde;
        let err = match debias_algebraic_general(&tilde, p.pi()) {
            Ok(s) => s.alpha.iter().zip(p.alpha()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            Err(_) => f64::INFINITY,
        };
        worst3 = worst3.max(err);
    }
    outcome(
        worst2 < 1e-8 && worst3 < 1e-5,
        format!("Q=2 worst {worst2:.2e} over 1000; Q=3 worst {worst3:.2e} over 50"),
    )
}

/// Probability of the walk path and the completed edges, multiplied out
/// vertex by vertex.
fn product_form_log(adj: &Adjacency, z: &[usize], p: &SbmParams) -> f64 {
    let n = z.len();
    let pibar = p.pi().mul_vec(p.alpha());
    let mut prob = p.alpha()[z[0]];
    for i in 1..n {
        let (a, b) = (z[i - 1], z[i]);
        prob *= p.pi().get(a, b) * p.alpha()[b] / pibar[a];
    }
    for i in 0..n {
        for j in (i + 2)..n {
            let pij = p.pi().get(z[i], z[j]);
            prob *= if adj.get(i, j) { pij } else { 1.0 - pij };
        }
    }
    prob.ln()
}

fn likelihood_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = rng.random_range(1..=3);
        let p = random_params(q, &mut rng);
        let n = rng.random_range(2..=8);
        let s = simulate(&p, n, &mut rng).unwrap();
        let z = s.z.clone().unwrap();
        let stats = count_stats(&s, q).unwrap();
        let diff = (product_form_log(&s.adjacency, &z, &p) - log_likelihood_rds(&stats, &p)).abs();
        worst = worst.max(diff);
    }
    let adj = Adjacency::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
    let z = [0, 1, 0];
    let stats = CountStats::from_labels(&adj, &z, 2).unwrap();
    let product = product_form_log(&adj, &z, &theta_star());
    let factorized = log_likelihood_rds(&stats, &theta_star());
    let pass = worst < 1e-10 && (product + 2.9594).abs() < 1e-4 && (factorized + 2.9594).abs() < 1e-4;
    outcome(
        pass,
        format!("worst gap {worst:.2e} over 100; n=3 product {product:.6} factorized {factorized:.6}"),
    )
}

fn mle_certification() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut converged = 0;
    for k in 0..100 {
        let p = if k % 2 == 0 { theta_star() } else { random_params(rng.random_range(2..=3), &mut rng) };
        let s = simulate(&p, 60, &mut rng).unwrap();
        let stats = count_stats(&s, p.num_classes()).unwrap();
        let Ok(est) = mle_complete(&stats) else { continue };
        if !est.converged() {
            continue;
        }
        converged += 1;
        let g = score_residual_rds(&stats, &est.to_params().unwrap());
        worst = worst.max(g.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let mut worst_q1: f64 = 0.0;
    for _ in 0..100 {
        let p = SbmParams::erdos_renyi(vec![1.0], rng.random_range(0.2..0.8)).unwrap();
        let n = rng.random_range(10..=60);
        let s = simulate(&p, n, &mut rng).unwrap();
        let stats = count_stats(&s, 1).unwrap();
        let chain = (n - 1) as f64;
        let (e, f) = (stats.edges.get(0, 0), stats.non_edges.get(0, 0));
        let closed = (e - chain) / (e + f - chain);
        let est = mle_complete(&stats).unwrap();
        worst_q1 = worst_q1.max((est.pi.get(0, 0) - closed).abs()).max((est.alpha[0] - 1.0).abs());
    }
    outcome(
        worst < 1e-6 && worst_q1 < 1e-8 && converged > 0,
        format!("{converged}/100 converged, worst score {worst:.2e}; Q=1 worst {worst_q1:.2e}"),
    )
}

fn consistency_sweep() -> Outcome {
    let mut table = Vec::new();
    for n in [100, 400, 1600] {
        let cfg = ExperimentConfig {
            n,
            replicates: 20,
            methods: vec![Method::MleComplete, Method::DebiasComplete],
            ..ExperimentConfig::reference()
        };
        match run_experiment(&cfg, None) {
            Ok(r) => table.push(r),
            Err(e) => return outcome(false, format!("n={n}: {e}")),
        }
    }
    let series = [
        (Method::MleComplete, "pi_11"),
        (Method::MleComplete, "pi_12"),
        (Method::MleComplete, "pi_22"),
        (Method::DebiasComplete, "alpha_1"),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (m, p) in series {
        let v: Vec<f64> = table.iter().map(|r| mse(r, m, p)).collect();
        let ok = v[0] > v[1] && v[1] > v[2];
        pass &= ok;
        parts.push(format!("{m} {p} {:.2e} > {:.2e} > {:.2e}{}", v[0], v[1], v[2], if ok { "" } else { " !" }));
    }
    outcome(pass, parts.join("; "))
}

fn fitted_graphon_distance() -> Outcome {
    let p = theta_star();
    let mut total = 0.0;
    let reps = 20;
    for r in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(7, r));
        let s = simulate(&p, 800, &mut rng).unwrap();
        let est = classical_estimator(&count_stats(&s, 2).unwrap()).unwrap();
        let fitted = EmpiricalGraphon::new(est.alpha, est.pi).unwrap();
        total += dsub_truncated(GraphLike::Graph(&s.adjacency), GraphLike::Empirical(&fitted), 3).unwrap();
    }
    let mean = total / reps as f64;
    outcome(mean < 0.02, format!("mean d_sub {mean:.5}"))
}

fn saem_degeneracy() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(80 + seed);
        let s = simulate(&theta_star(), 120, &mut rng).unwrap();
        let z = s.z.clone().unwrap();
        let ctx = SaemContext {
            adjacency: &s.adjacency,
            positions: None,
            num_classes: 2,
            likelihood: Likelihood::Rds,
            proposal: ProposalKind::Pinned(z),
            options: SaemOptions::default(),
        };
        let out = run_saem(&ctx, Method::SaemRds, &mut rng).unwrap().estimate;
        let mle = mle_complete(&count_stats(&s, 2).unwrap()).unwrap();
        let a = out.alpha.iter().chain(out.pi.upper().iter()).copied().collect::<Vec<_>>();
        let b = mle.alpha.iter().chain(mle.pi.upper().iter()).copied().collect::<Vec<_>>();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
    }
    let mut worst_er: f64 = 0.0;
    for (seed, q) in [(90u64, 2usize), (91, 3), (92, 4)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = SbmParams::erdos_renyi(vec![1.0 / q as f64; q], rng.random_range(0.2..0.8)).unwrap();
        let s = simulate(&p, 60, &mut rng).unwrap();
        let start = VariationalParams::random(60, q, &mut rng);
        let t = variational_fixed_point(&s.adjacency, &p, Likelihood::Rds, Some(&start), &Default::default())
            .unwrap();
        for row in &t.tau {
            for v in row {
                worst_er = worst_er.max((v - 1.0 / q as f64).abs());
            }
        }
    }
    outcome(
        worst < 1e-3 && worst_er < 1e-9,
        format!("pinned vs MLE worst {worst:.2e}; ER rows worst {worst_er:.2e}"),
    )
}

fn no_bias_invariant() -> Outcome {
    let cfg = ExperimentConfig {
        q: 2,
        alpha: vec![0.4, 0.6],
        pi: vec![0.5; 3],
        n: 800,
        replicates: 20,
        seed: 9,
        methods: vec![Method::Classical, Method::DebiasComplete],
        ..ExperimentConfig::reference()
    };
    let report = match run_experiment(&cfg, None) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("experiment failed: {e}")),
    };
    let mean = |m| report.row(m, "alpha_1").map_or(f64::NAN, |r| r.mean);
    let (raw, debiased) = (mean(Method::Classical), mean(Method::DebiasComplete));
    let estimates = |m| {
        report
            .records
            .iter()
            .filter(move |r| r.method == m && r.param == "alpha_1")
            .map(|r| r.estimate)
    };
    let worst = estimates(Method::Classical)
        .zip(estimates(Method::DebiasComplete))
        .fold(0.0, |w: f64, (a, b)| w.max((a - b).abs()));
    outcome(
        (raw - debiased).abs() < 0.02,
        format!("mean raw {raw:.4} debiased {debiased:.4}; largest single-replicate gap {worst:.4}"),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("reference MSE magnitudes", reference_mse),
        ("walk weights target the biased profile", walk_bias),
        ("de-bias round trips", debias_round_trips),
        ("likelihood product form", likelihood_oracle),
        ("MLE certification", mle_certification),
        ("consistency sweep", consistency_sweep),
        ("fitted graphon distance", fitted_graphon_distance),
        ("SAEM degeneracy", saem_degeneracy),
        ("no-bias invariant", no_bias_invariant),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!("{status} {}: {name} [{:.1}s] {}", i + 1, start.elapsed().as_secs_f64(), o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
