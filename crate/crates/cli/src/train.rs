//! `train`: fits one backend and writes a model directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::thread;

use clap::{Args, ValueEnum};
use clda::ags::{self, Init};
use clda::corpus::Corpus;
use clda::eval::{beta_hat_mean, theta_hat, topic_size_from_z};
use clda::lda::{self, LdaHyper};
use clda::mgs::{self, MgsConfig};
use clda::model::{CountStatistics, Hyperparameters};
use clda::trace::{ChainTrace, SamplerConfig, Snapshot, PI_CSV};
use clda::vem::{vem_run, HyperFlags, VemConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::model_dir::{load_data, Estimates, ModelInfo, ELBO_CSV, ESTIMATES_JSON, MODEL_JSON, PARAMS_JSON};
use crate::output::{load_config, write_json, Staged};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Ags,
    Mgs,
    Vem,
    LdaCgs,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Ags => "ags",
            Algo::Mgs => "mgs",
            Algo::Vem => "vem",
            Algo::LdaCgs => "lda-cgs",
        }
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    /// Initial MGS step size.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Keep the MGS step size fixed.
    #[arg(long)]
    pub no_adapt: bool,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub save_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Treat the whole corpus as one collection.
    #[arg(long)]
    pub single_collection: bool,
    /// Independent chains with seeds `seed, seed + 1, ...`.
    #[arg(long)]
    pub chains: Option<usize>,
    /// Re-estimate the hyperparameters in the VEM M-step.
    #[arg(long)]
    pub optimize_hyper: bool,
    /// Train on the training part of this held-out split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// TOML or JSON file with any of the settings above; flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFile {
    pub algo: Option<Algo>,
    pub k: Option<usize>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub epsilon: Option<f64>,
    pub adapt: Option<bool>,
    pub iters: Option<usize>,
    pub burn_in: Option<usize>,
    pub save_every: Option<usize>,
    pub seed: Option<u64>,
    pub single_collection: Option<bool>,
    pub chains: Option<usize>,
    pub optimize_hyper: Option<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSettings {
    pub algo: Algo,
    pub k: usize,
    pub hyper: Hyperparameters,
    pub epsilon: f64,
    pub adapt: bool,
    pub sampler: SamplerConfig,
    pub single_collection: bool,
    pub chains: usize,
    pub optimize_hyper: bool,
}

impl TrainSettings {
    pub fn resolve(args: &TrainArgs, file: TrainFile) -> CliResult<Self> {
        let algo = args.algo.or(file.algo).ok_or_else(|| CliError::usage("--algo is required"))?;
        let k = args.k.or(file.k).ok_or_else(|| CliError::usage("--k is required"))?;
        let need = |flag: Option<f64>, cfg: Option<f64>, name: &str| {
            flag.or(cfg).ok_or_else(|| CliError::usage(format!("--{name} is required")))
        };
        let alpha = need(args.alpha, file.alpha, "alpha")?;
        let eta = need(args.eta, file.eta, "eta")?;
        let gamma = match algo {
            Algo::LdaCgs => k as f64 * alpha,
            _ => need(args.gamma, file.gamma, "gamma")?,
        };
        let iterations = args.iters.or(file.iters).unwrap_or(1000);
        let mut sampler = SamplerConfig::new(iterations, args.seed.or(file.seed).unwrap_or(0));
        if let Some(b) = args.burn_in.or(file.burn_in) {
            sampler.burn_in = b;
        }
        if let Some(s) = args.save_every.or(file.save_every) {
            sampler.save_every = s;
        }
        if algo != Algo::Vem {
            sampler.validate()?;
        }
        let chains = args.chains.or(file.chains).unwrap_or(1);
        if chains == 0 {
            return Err(CliError::usage("--chains must be at least 1"));
        }
        let epsilon = args.epsilon.or(file.epsilon).unwrap_or(0.01);
        if !(epsilon > 0.0) {
            return Err(CliError::usage("--epsilon must be positive"));
        }
        Ok(Self {
            algo,
            k,
            hyper: Hyperparameters::new(alpha, gamma, eta)?,
            epsilon,
            adapt: !args.no_adapt && file.adapt.unwrap_or(true),
            sampler,
            single_collection: args.single_collection || file.single_collection.unwrap_or(false),
            chains,
            optimize_hyper: args.optimize_hyper || file.optimize_hyper.unwrap_or(false),
        })
    }
}

pub fn run(args: &TrainArgs) -> CliResult<String> {
    let file = match &args.config {
        Some(p) => load_config(p)?,
        None => TrainFile::default(),
    };
    let settings = TrainSettings::resolve(args, file)?;
    let data = load_data(&args.corpus, args.split.as_deref(), settings.single_collection)?;
    let staged = Staged::dir(&args.out)?;
    let chain_dir = |root: &Path, c: usize| match settings.chains {
        1 => root.to_path_buf(),
        _ => root.join(format!("chain-{c}")),
    };
    let dirs: Vec<(PathBuf, PathBuf)> = (1..=settings.chains)
        .map(|c| (chain_dir(staged.path(), c), chain_dir(&args.out, c)))
        .collect();
    let summaries: Vec<CliResult<String>> = thread::scope(|scope| {
        let handles: Vec<_> = dirs
            .iter()
            .enumerate()
            .map(|(c, (dir, label))| {
                let mut s = settings.clone();
                s.sampler.seed += c as u64;
                let train = &data.train;
                let split = args.split.is_some();
                scope.spawn(move || train_one(train, &s, split, dir, label))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("training thread panicked")).collect()
    });
    let mut lines = Vec::new();
    for s in summaries {
        lines.push(s?);
    }
    staged.commit()?;
    Ok(lines.join("\n"))
}

fn info(train: &Corpus, s: &TrainSettings, split: bool, hyper: Hyperparameters, iterations: usize) -> ModelInfo {
    ModelInfo {
        algo: s.algo.name().to_string(),
        k: s.k,
        num_collections: train.num_collections(),
        num_docs: train.num_docs(),
        vocab_size: train.vocab_size(),
        single_collection: s.single_collection,
        split,
        hyper,
        seed: s.sampler.seed,
        iterations,
    }
}

/// Trains one chain into `dir`; `label` is where it ends up.
pub fn train_one(train: &Corpus, s: &TrainSettings, split: bool, dir: &Path, label: &Path) -> CliResult<String> {
    fs::create_dir_all(dir)?;
    let k = s.k;
    if s.algo == Algo::Vem {
        let mut config = VemConfig::new(s.sampler.seed);
        config.max_iterations = s.sampler.iterations;
        if s.optimize_hyper {
            config.optimize = HyperFlags::all();
        }
        let fit = vem_run(train, k, s.hyper, &config)?;
        fs::write(dir.join(ELBO_CSV), fit.elbo_csv())?;
        fs::write(dir.join(PI_CSV), fit.pi_csv())?;
        fit.params.save(&dir.join(PARAMS_JSON))?;
        let unwrap = |v: Vec<clda::numerics::SimplexVector>| v.into_iter().map(|x| x.into_inner()).collect();
        let v_eta = train.vocab_size() as f64 * fit.hyper.eta;
        let est = Estimates {
            pi: fit.params.omega.clone(),
            theta: unwrap(fit.params.theta_mean()),
            beta: unwrap(fit.params.beta_mean()),
            topic_size: fit.params.lambda.iter().map(|l| l.iter().sum::<f64>() - v_eta).collect(),
        };
        write_json(&dir.join(ESTIMATES_JSON), &est)?;
        let iterations = fit.history.len();
        write_json(&dir.join(MODEL_JSON), &info(train, s, split, fit.hyper, iterations))?;
        let last = fit.history.last().map_or(f64::NAN, |r| r.total);
        return Ok(format!(
            "vem: {iterations} iterations, converged {}, final bound {last:.4}, output {}",
            fit.converged,
            label.display()
        ));
    }

    let mut trace = match s.algo {
        Algo::Ags => ags::run(train, k, s.hyper, &s.sampler, Init::default())?,
        Algo::Mgs => {
            let mut config = MgsConfig::new(s.sampler.clone());
            config.epsilon = s.epsilon;
            config.adapt = s.adapt;
            mgs::run(train, k, s.hyper, &config, Init::default())?
        }
        Algo::LdaCgs => {
            let h = LdaHyper { alpha: s.hyper.alpha, eta: s.hyper.eta };
            lda::run(train, k, h, &s.sampler, Init::default())?
        }
        Algo::Vem => unreachable!(),
    };
    if trace.snapshots.is_empty() {
        trace.snapshots.push(Snapshot {
            iteration: trace.checkpoint.iteration,
            pi: trace.checkpoint.pi.clone(),
            z: trace.checkpoint.z.clone(),
        });
    }
    trace.save(dir)?;
    write_json(&dir.join(ESTIMATES_JSON), &gibbs_estimates(train, s, &trace)?)?;
    write_json(&dir.join(MODEL_JSON), &info(train, s, split, s.hyper, s.sampler.iterations))?;
    let last = trace.records.last().map_or(f64::NAN, |r| r.log_joint);
    Ok(format!(
        "{}: {} iterations, {} snapshots, final log joint {last:.4}, output {}",
        s.algo.name(),
        trace.records.len(),
        trace.snapshots.len(),
        label.display()
    ))
}

fn gibbs_estimates(train: &Corpus, s: &TrainSettings, trace: &ChainTrace) -> CliResult<Estimates> {
    let k = s.k;
    let n = trace.snapshots.len() as f64;
    let mut theta = vec![vec![0.0; k]; train.num_docs()];
    for snap in &trace.snapshots {
        let counts = CountStatistics::recompute(train, &snap.z, k)?;
        for (d, row) in theta.iter_mut().enumerate() {
            let prior: Vec<f64> = match s.algo {
                Algo::LdaCgs => vec![s.hyper.alpha; k],
                _ => snap.pi[train.collection_of(d)].iter().map(|p| s.hyper.gamma * p).collect(),
            };
            for (a, x) in row.iter_mut().zip(theta_hat(&counts, d, &prior)) {
                *a += x / n;
            }
        }
    }
    let pi = trace.pi_mean().into_iter().map(|p| p.into_inner()).collect();
    Ok(Estimates {
        pi,
        theta,
        beta: beta_hat_mean(train, &trace.snapshots, k, s.hyper.eta)?,
        topic_size: topic_size_from_z(&trace.checkpoint.z, k).into_iter().map(|x| x as f64).collect(),
    })
}
