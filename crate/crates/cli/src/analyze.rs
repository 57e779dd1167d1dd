//! `evaluate` and `export`.

use std::fmt::Write;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use clda::corpus::{load_corpus_dir, Vocabulary};
use clda::eval::{
    coherence_csv, matrix_csv, perplexity_clda, perplexity_lda, perplexity_vem, top_words,
    topic_coherence, topic_distance_matrix, DocFrequencies, EvalReport, PerplexityEntry,
};
use clda::lda::LdaHyper;
use clda::trace::{SavedChain, PI_CSV};
use clda::vem::VariationalParams;

use crate::error::{CliError, CliResult};
use crate::model_dir::{load_data, Estimates, ModelInfo, ESTIMATES_JSON, PARAMS_JSON};
use crate::output::{read_json, rows_csv, write_json, Staged};

pub const EVAL_JSON: &str = "eval.json";
pub const COHERENCE_CSV: &str = "coherence.csv";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    Perplexity,
    Coherence,
    Size,
}

fn open_model(dir: &Path) -> CliResult<ModelInfo> {
    if !dir.join(crate::model_dir::MODEL_JSON).exists() && dir.join("chain-1").is_dir() {
        return Err(CliError::usage(format!(
            "{} holds several chains; pass one chain-i directory",
            dir.display()
        )));
    }
    ModelInfo::load(dir)
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    /// The split the model was trained with; needed for perplexity.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "perplexity,coherence,size")]
    pub metrics: Vec<Metric>,
    #[arg(long, default_value_t = 20)]
    pub top_m: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_evaluate(args: &EvaluateArgs) -> CliResult<String> {
    let info = open_model(&args.model)?;
    if info.split != args.split.is_some() {
        return Err(CliError::usage(if info.split {
            "the model was trained on a split; pass it with --split"
        } else {
            "the model was trained on the full corpus; evaluation cannot use a split"
        }));
    }
    let data = load_data(&args.corpus, args.split.as_deref(), info.single_collection)?;
    info.check(&data.train)?;
    let est: Estimates = read_json(&args.model.join(ESTIMATES_JSON))?;
    let mut report = EvalReport { model: info.algo.clone(), ..EvalReport::default() };
    let mut lines = Vec::new();

    if args.metrics.contains(&Metric::Perplexity) {
        let test = data
            .test
            .as_ref()
            .ok_or_else(|| CliError::usage("perplexity needs a held-out split (--split)"))?;
        let k = info.k;
        if info.is_gibbs() {
            let chain = SavedChain::load(&args.model)?;
            let score = |snaps: &[clda::trace::Snapshot]| match info.algo.as_str() {
                "lda-cgs" => {
                    let h = LdaHyper { alpha: info.hyper.alpha, eta: info.hyper.eta };
                    perplexity_lda(&data.train, test, snaps, k, &h)
                }
                _ => perplexity_clda(&data.train, test, snaps, k, &info.hyper),
            };
            report.perplexity = Some(score(&chain.snapshots)?);
            for s in &chain.snapshots {
                report.perplexity_by_checkpoint.push(PerplexityEntry {
                    checkpoint: s.iteration,
                    perplexity: score(std::slice::from_ref(s))?,
                });
            }
        } else {
            let params = VariationalParams::load(&args.model.join(PARAMS_JSON))?;
            report.perplexity = Some(perplexity_vem(test, &params)?);
        }
        lines.push(format!("perplexity {:.4}", report.perplexity.unwrap()));
    }
    if args.metrics.contains(&Metric::Coherence) {
        let freq = DocFrequencies::new(&data.train);
        let c = topic_coherence(&est.beta, &freq, args.top_m)?;
        lines.push(format!("mean coherence {:.4}", c.iter().sum::<f64>() / c.len() as f64));
        report.coherence = Some(c);
    }
    if args.metrics.contains(&Metric::Size) {
        report.size = Some(est.topic_size.iter().map(|&s| s.max(0.0).round() as u64).collect());
    }

    let staged = Staged::dir(&args.out)?;
    write_json(&staged.path().join(EVAL_JSON), &report)?;
    if report.coherence.is_some() || report.size.is_some() {
        fs::write(
            staged.path().join(COHERENCE_CSV),
            coherence_csv(report.size.as_deref(), report.coherence.as_deref()),
        )?;
    }
    staged.commit()?;
    if lines.is_empty() {
        lines.push("topic sizes written".into());
    }
    Ok(lines.join(", "))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Export {
    Pi,
    Theta,
    Beta,
    TopWords,
    TopicDist,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum)]
    pub what: Export,
    /// Corpus whose vocabulary names the terms; ids are used without it.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub top_m: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn labelled(n: usize) -> Vec<Vec<String>> {
    (1..=n).map(|i| vec![i.to_string()]).collect()
}

fn matrix_rows(keys: Vec<Vec<String>>, rows: &[Vec<f64>]) -> Vec<(Vec<String>, &[f64])> {
    keys.into_iter().zip(rows.iter().map(Vec::as_slice)).collect()
}

pub fn run_export(args: &ExportArgs) -> CliResult<String> {
    let info = open_model(&args.model)?;
    let est: Estimates = read_json(&args.model.join(ESTIMATES_JSON))?;
    let vocab = match &args.corpus {
        Some(dir) => {
            let c = load_corpus_dir(dir)?;
            if c.vocab_size() != info.vocab_size {
                return Err(CliError::data("corpus vocabulary does not match the model"));
            }
            c.vocab().clone()
        }
        None => Vocabulary::synthetic(info.vocab_size),
    };
    let staged = Staged::dir(&args.out)?;
    let dir = staged.path();
    let name = match args.what {
        Export::Pi => {
            let rows = matrix_rows(labelled(est.pi.len()), &est.pi);
            fs::write(dir.join("pi.csv"), rows_csv(&["collection"], "pi", &rows))?;
            fs::copy(args.model.join(PI_CSV), dir.join("pi_path.csv"))?;
            "pi.csv, pi_path.csv"
        }
        Export::Theta => {
            let rows = matrix_rows(labelled(est.theta.len()), &est.theta);
            fs::write(dir.join("theta.csv"), rows_csv(&["doc"], "theta", &rows))?;
            "theta.csv"
        }
        Export::Beta => {
            let mut out = String::from("topic,term_id,term,prob\n");
            for (t, row) in est.beta.iter().enumerate() {
                for (v, p) in row.iter().enumerate() {
                    writeln!(out, "{},{v},{},{p}", t + 1, vocab.term(v as u32)).unwrap();
                }
            }
            fs::write(dir.join("beta.csv"), out)?;
            "beta.csv"
        }
        Export::TopWords => {
            let mut out = String::from("topic,rank,term_id,term,prob\n");
            for (t, row) in est.beta.iter().enumerate() {
                for (r, v) in top_words(row, args.top_m).into_iter().enumerate() {
                    writeln!(out, "{},{},{v},{},{}", t + 1, r + 1, vocab.term(v), row[v as usize]).unwrap();
                }
            }
            fs::write(dir.join("top_words.csv"), out)?;
            "top_words.csv"
        }
        Export::TopicDist => {
            fs::write(dir.join("topic_dist.csv"), matrix_csv(&topic_distance_matrix(&est.beta)))?;
            "topic_dist.csv"
        }
    };
    staged.commit()?;
    Ok(format!("wrote {name} to {}", args.out.display()))
}
