//! `rds-sbm` command-line front end.
//!
//! Exit status: 0 on success, 1 on usage or input errors, 2 when a
//! numerical procedure fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rds_sbm::graphon::biased_params;
use rds_sbm::harness::{align_labels, derive_seed, run_experiment, run_method, ExperimentConfig};
use rds_sbm::metrics::{dsub_truncated, EmpiricalGraphon, GraphLike};
use rds_sbm::mle::classical_estimator;
use rds_sbm::sampler::{count_stats, simulate};
use rds_sbm::{Error, Estimate, Method, RdsSample, Result};

#[derive(Debug, Parser)]
#[command(name = "rds-sbm", version, about = "SBM estimation from random-walk samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one walk with its completed graph and write the sample document.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one estimator on a sample and write a one-row CSV.
    Estimate {
        #[arg(long)]
        method: String,
        #[arg(long)]
        sample: PathBuf,
        /// Writes to standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Config holding the true parameters; estimates are aligned to it.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Number of classes when no truth is given.
        #[arg(long, default_value_t = 2)]
        classes: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Monte Carlo study; writes the error summary CSV.
    Mc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
        /// Replicate-level long-format CSV.
        #[arg(long)]
        replicates_out: Option<PathBuf>,
        /// Histogram bin counts per method and parameter.
        #[arg(long)]
        hist_out: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Truncated subgraph distance between a sample and the graphons of a config.
    Dsub {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        max_k: Option<usize>,
    },
}

fn read_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::parse(&std::fs::read_to_string(path)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = read_config(&config, seed)?;
            let replicate = derive_seed(cfg.seed, 0);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(replicate, 0));
            let sample = simulate(&cfg.params()?, cfg.n, &mut rng)?;
            sample.write(&out)?;
        }
        Command::Estimate { method, sample, out, truth, classes, seed } => {
            let method: Method = method.parse()?;
            let sample = RdsSample::read(&sample)?;
            let truth_cfg = truth.map(|t| read_config(&t, seed)).transpose()?;
            let mut cfg = truth_cfg.clone().unwrap_or_else(|| ExperimentConfig {
                q: classes,
                alpha: vec![1.0 / classes.max(1) as f64; classes],
                pi: vec![0.5; classes * (classes + 1) / 2],
                n: sample.len(),
                ..ExperimentConfig::reference()
            });
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if method.uses_labels() && sample.z.is_none() {
                return Err(Error::Argument(format!("{method} needs a sample with class labels")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
            let mut est = run_method(method, &sample, &cfg, &mut rng)?;
            if let Some(t) = &truth_cfg {
                est = align_labels(&est, &t.params()?)?.0;
            }
            let mut w = output(out.as_deref())?;
            writeln!(w, "{}", Estimate::csv_header(est.num_classes()))?;
            writeln!(w, "{}", est.csv_row())?;
            w.flush()?;
        }
        Command::Mc { config, out, seed, jobs, replicates_out, hist_out, bins } => {
            let cfg = read_config(&config, seed)?;
            let report = run_experiment(&cfg, jobs)?;
            let mut w = output(Some(&out))?;
            report.write_summary(&mut w)?;
            w.flush()?;
            if let Some(p) = replicates_out {
                let mut w = output(Some(&p))?;
                report.write_records(&mut w)?;
                w.flush()?;
            }
            if let Some(p) = hist_out {
                let mut w = output(Some(&p))?;
                report.write_histograms(&mut w, bins)?;
                w.flush()?;
            }
            for f in &report.failures {
                eprintln!("replicate {} {}: {}", f.replicate, f.method, f.message);
            }
        }
        Command::Dsub { sample, config, max_k } => {
            let cfg = read_config(&config, None)?;
            let max_k = max_k.unwrap_or(cfg.dsub_max_k);
            let sample = RdsSample::read(&sample)?;
            let limit = biased_params(&cfg.params()?);
            let graph = GraphLike::Graph(&sample.adjacency);
            let d = dsub_truncated(graph, GraphLike::Sbm(&limit), max_k)?;
            println!("biased-truth,{}", rds_sbm::mle::format_sig8(d));
            if sample.z.is_some() {
                let est = classical_estimator(&count_stats(&sample, cfg.q)?)?;
                let fitted = EmpiricalGraphon::new(est.alpha, est.pi)?;
                let d = dsub_truncated(graph, GraphLike::Empirical(&fitted), max_k)?;
                println!("fitted,{}", rds_sbm::mle::format_sig8(d));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
