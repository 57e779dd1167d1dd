//! `compare`: collection mixtures from cLDA and from two LDA-based recipes.

use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use clda::ags::{self, Init};
use clda::corpus::{load_corpus_dir, Corpus};
use clda::eval::{align_topics, aligned_pi_distance, beta_hat_mean, permute_mixtures};
use clda::lda::{self, estimate_collection_mixture_from_z, LdaHyper};
use clda::model::Hyperparameters;
use clda::synthetic::{GroundTruth, TRUTH_FILE};
use clda::trace::{ChainTrace, SamplerConfig, Snapshot};
use serde::Serialize;

use crate::error::CliResult;
use crate::output::{rows_csv, write_json, Staged};

pub const MIXTURES_CSV: &str = "mixtures.csv";
pub const COMPARE_JSON: &str = "compare.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// cLDA with the auxiliary-variable sampler.
    M1,
    /// LDA on the pooled corpus, mixtures from each collection's topics.
    M2,
    /// LDA on each collection separately, aligned across collections.
    M3,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Document concentration; LDA runs use `alpha = gamma / K`.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 1000)]
    pub iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct Comparison {
    pub method: Method,
    pub k: usize,
    /// Collection mixtures in the reference topic order.
    pub mixtures: Vec<Vec<f64>>,
    /// `perms[j][i]`: topic of collection `j`'s fit matched to reference topic `i`.
    pub perms: Vec<Vec<usize>>,
    /// Aligned L1 distance to the generating mixtures, when known.
    pub l1_to_truth: Option<Vec<f64>>,
}

fn snapshots(trace: ChainTrace) -> Vec<Snapshot> {
    if trace.snapshots.is_empty() {
        let cp = trace.checkpoint;
        return vec![Snapshot { iteration: cp.iteration, pi: cp.pi, z: cp.z }];
    }
    trace.snapshots
}

fn mean_mixture(snaps: &[Snapshot], collection_of: &[usize], k: usize, j_count: usize) -> CliResult<Vec<Vec<f64>>> {
    let mut acc = vec![vec![0.0; k]; j_count];
    for s in snaps {
        let m = estimate_collection_mixture_from_z(&s.z, collection_of, k, j_count)?;
        for (a, p) in acc.iter_mut().zip(m) {
            for (x, y) in a.iter_mut().zip(p.iter()) {
                *x += y / snaps.len() as f64;
            }
        }
    }
    Ok(acc)
}

/// Runs one method; alignment targets the true topics when given.
pub fn compare(corpus: &Corpus, truth_beta: Option<&[Vec<f64>]>, args: &CompareArgs) -> CliResult<Comparison> {
    let k = args.k;
    let config = SamplerConfig::new(args.iters, args.seed);
    let lda_h = LdaHyper { alpha: args.gamma / k as f64, eta: args.eta };
    let j_count = corpus.num_collections();
    let align_one = |beta: &[Vec<f64>], reference: Option<&[Vec<f64>]>| match reference {
        Some(r) => align_topics(r, beta),
        None => Ok((0..k).collect()),
    };
    let (raw, betas): (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) = match args.method {
        Method::M1 => {
            let h = Hyperparameters::new(args.alpha, args.gamma, args.eta)?;
            let trace = ags::run(corpus, k, h, &config, Init::default())?;
            let snaps = snapshots(trace);
            let pi = clda::trace::pi_mean(&snaps).expect("at least one snapshot");
            let beta = beta_hat_mean(corpus, &snaps, k, args.eta)?;
            (pi.into_iter().map(|p| p.into_inner()).collect(), vec![beta])
        }
        Method::M2 => {
            let flat = corpus.flattened();
            let snaps = snapshots(lda::run(&flat, k, lda_h, &config, Init::default())?);
            let pi = mean_mixture(&snaps, corpus.collections(), k, j_count)?;
            (pi, vec![beta_hat_mean(&flat, &snaps, k, args.eta)?])
        }
        Method::M3 => {
            let mut pis = Vec::with_capacity(j_count);
            let mut betas = Vec::with_capacity(j_count);
            for j in 0..j_count {
                let slice = corpus.collection_slice(j);
                let c = SamplerConfig { seed: args.seed + j as u64, ..config.clone() };
                let snaps = snapshots(lda::run(&slice, k, lda_h, &c, Init::default())?);
                pis.push(mean_mixture(&snaps, slice.collections(), k, 1)?.remove(0));
                betas.push(beta_hat_mean(&slice, &snaps, k, args.eta)?);
            }
            (pis, betas)
        }
    };
    let reference: Option<Vec<Vec<f64>>> = truth_beta.map(<[_]>::to_vec).or_else(|| {
        (args.method == Method::M3).then(|| betas[0].clone())
    });
    let perms: Vec<Vec<usize>> = betas
        .iter()
        .map(|b| align_one(b, reference.as_deref()))
        .collect::<clda::Result<_>>()?;
    let mixtures: Vec<Vec<f64>> = raw
        .iter()
        .enumerate()
        .map(|(j, p)| {
            let perm = &perms[if perms.len() == 1 { 0 } else { j }];
            permute_mixtures(std::slice::from_ref(p), perm).remove(0)
        })
        .collect();
    Ok(Comparison { method: args.method, k, mixtures, perms, l1_to_truth: None })
}

pub fn run(args: &CompareArgs) -> CliResult<String> {
    let corpus = load_corpus_dir(&args.corpus)?;
    let truth_path = args.corpus.join(TRUTH_FILE);
    let truth = truth_path.exists().then(|| GroundTruth::load(&truth_path)).transpose()?;
    let truth_beta = truth.as_ref().filter(|t| t.beta.len() == args.k).map(|t| t.beta.as_slice());
    let mut result = compare(&corpus, truth_beta, args)?;
    if let (Some(t), Some(_)) = (&truth, truth_beta) {
        let identity: Vec<usize> = (0..args.k).collect();
        result.l1_to_truth = Some(aligned_pi_distance(&t.pi, &result.mixtures, &identity));
    }
    let keys: Vec<Vec<String>> = (1..=result.mixtures.len()).map(|j| vec![j.to_string()]).collect();
    let rows: Vec<(Vec<String>, &[f64])> = keys.into_iter().zip(result.mixtures.iter().map(Vec::as_slice)).collect();
    let staged = Staged::dir(&args.out)?;
    fs::write(staged.path().join(MIXTURES_CSV), rows_csv(&["collection"], "pi", &rows))?;
    write_json(&staged.path().join(COMPARE_JSON), &result)?;
    staged.commit()?;
    Ok(match &result.l1_to_truth {
        Some(d) => format!(
            "{} collections, L1 to truth {}",
            result.mixtures.len(),
            d.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
        ),
        None => format!("{} collections written", result.mixtures.len()),
    })
}
