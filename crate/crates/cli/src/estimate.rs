//! `estimate-hyper`: empirical Bayes estimates of the concentration parameters.

use std::fmt::Write;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use clda::gibbs_em::{gibbs_em_replicates, GibbsEmConfig};
use clda::lda::{estimate_hyper, LdaEmConfig, LdaHyper};
use serde::Serialize;

use crate::error::{CliError, CliResult};
use crate::model_dir::load_data;
use crate::output::{write_json, Staged};

pub const EM_PATH_CSV: &str = "em_path.csv";
pub const HYPER_JSON: &str = "estimates.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmModel {
    Clda,
    Lda,
}

#[derive(Args, Debug)]
pub struct EstimateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Fixed collection-level concentration for cLDA; initial `alpha` for LDA.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = EmModel::Clda)]
    pub model: EmModel,
    #[arg(long, default_value_t = 1)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0)]
    pub eta0: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma0: f64,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub single_collection: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Replicate {
    seed: u64,
    outer_iterations: usize,
    alpha: f64,
    gamma: Option<f64>,
    eta: f64,
}

#[derive(Debug, Serialize)]
struct HyperReport {
    model: &'static str,
    k: usize,
    replicates: Vec<Replicate>,
    mean_alpha: f64,
    mean_gamma: Option<f64>,
    mean_eta: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn run(args: &EstimateArgs) -> CliResult<String> {
    if args.replicates == 0 {
        return Err(CliError::usage("--replicates must be at least 1"));
    }
    let data = load_data(&args.corpus, args.split.as_deref(), args.single_collection)?;
    let seeds: Vec<u64> = (0..args.replicates as u64).map(|r| args.seed + r).collect();
    let mut csv = String::new();
    let replicates: Vec<Replicate> = match args.model {
        EmModel::Clda => {
            let mut config = GibbsEmConfig { alpha: args.alpha, ..GibbsEmConfig::default() };
            if let Some(m) = args.max_outer {
                config.max_outer = m;
            }
            let paths = gibbs_em_replicates(&data.train, args.k, &config, args.eta0, args.gamma0, &seeds)?;
            csv.push_str("replicate,outer,eta,gamma\n");
            for (r, path) in paths.iter().enumerate() {
                for s in path {
                    writeln!(csv, "{},{},{},{}", r + 1, s.outer, s.eta, s.gamma).unwrap();
                }
            }
            paths
                .iter()
                .zip(&seeds)
                .map(|(p, &seed)| {
                    let last = p.last().expect("path starts at the initial value");
                    Replicate {
                        seed,
                        outer_iterations: last.outer,
                        alpha: args.alpha,
                        gamma: Some(last.gamma),
                        eta: last.eta,
                    }
                })
                .collect()
        }
        EmModel::Lda => {
            csv.push_str("replicate,outer,alpha,eta\n");
            let init = LdaHyper { alpha: args.alpha, eta: args.eta0 };
            let mut out = Vec::new();
            for (r, &seed) in seeds.iter().enumerate() {
                let mut config = LdaEmConfig { seed, ..LdaEmConfig::default() };
                if let Some(m) = args.max_outer {
                    config.max_outer = m;
                }
                let (h, path) = estimate_hyper(&data.train, args.k, init, &config)?;
                for (o, p) in path.iter().enumerate() {
                    writeln!(csv, "{},{o},{},{}", r + 1, p.alpha, p.eta).unwrap();
                }
                out.push(Replicate {
                    seed,
                    outer_iterations: path.len().saturating_sub(1),
                    alpha: h.alpha,
                    gamma: None,
                    eta: h.eta,
                });
            }
            out
        }
    };
    let gamma = match args.model {
        EmModel::Clda => Some(mean(replicates.iter().filter_map(|r| r.gamma))),
        EmModel::Lda => None,
    };
    let report = HyperReport {
        model: match args.model {
            EmModel::Clda => "clda",
            EmModel::Lda => "lda",
        },
        k: args.k,
        mean_alpha: mean(replicates.iter().map(|r| r.alpha)),
        mean_gamma: gamma,
        mean_eta: mean(replicates.iter().map(|r| r.eta)),
        replicates,
    };
    let staged = Staged::dir(&args.out)?;
    fs::write(staged.path().join(EM_PATH_CSV), csv)?;
    write_json(&staged.path().join(HYPER_JSON), &report)?;
    staged.commit()?;
    Ok(match report.mean_gamma {
        Some(g) => format!("alpha {:.6}, gamma {g:.6}, eta {:.6}", report.mean_alpha, report.mean_eta),
        None => format!("alpha {:.6}, eta {:.6}", report.mean_alpha, report.mean_eta),
    })
}
