//! `preprocess`, `generate` and `split`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use clda::corpus::{preprocess, save_corpus, split_held_out, PreprocessOptions};
use clda::numerics::Rng;
use clda::synthetic::{generate, SynthConfig};

use crate::error::{CliError, CliResult};
use crate::output::{load_config, Staged};

pub const COLLECTIONS_TXT: &str = "collections.txt";

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    /// Directory of text files, or of one subdirectory per collection.
    #[arg(long)]
    pub input: PathBuf,
    /// File with one stopword per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub min_count: usize,
    #[arg(long, default_value_t = 1)]
    pub min_len: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn sorted_entries(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::data(format!("cannot read {}: {e}", dir.display())))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')));
    paths.sort();
    Ok(paths)
}

fn read_text(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::data(format!("{} is not UTF-8", path.display())))
}

/// Raw documents, their labels and the collection names.
pub fn read_input(dir: &Path) -> CliResult<(Vec<String>, Vec<usize>, Vec<String>)> {
    let entries = sorted_entries(dir)?;
    let subdirs: Vec<&PathBuf> = entries.iter().filter(|p| p.is_dir()).collect();
    let (mut docs, mut labels, mut names) = (Vec::new(), Vec::new(), Vec::new());
    if subdirs.is_empty() {
        for p in entries.iter().filter(|p| p.is_file()) {
            docs.push(read_text(p)?);
            labels.push(0);
        }
        names.push(dir.file_name().map_or("all".into(), |n| n.to_string_lossy().into_owned()));
    } else {
        if entries.iter().any(|p| p.is_file()) {
            return Err(CliError::data("input mixes files and collection directories"));
        }
        for (j, sub) in subdirs.iter().enumerate() {
            for p in sorted_entries(sub)?.iter().filter(|p| p.is_file()) {
                docs.push(read_text(p)?);
                labels.push(j);
            }
            names.push(sub.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    if docs.is_empty() {
        return Err(CliError::data(format!("no documents under {}", dir.display())));
    }
    Ok((docs, labels, names))
}

pub fn run_preprocess(args: &PreprocessArgs) -> CliResult<String> {
    let (docs, labels, names) = read_input(&args.input)?;
    let stopwords: HashSet<String> = match &args.stopwords {
        Some(p) => read_text(p)?
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect(),
        None => HashSet::new(),
    };
    let opts = PreprocessOptions { stopwords, min_count: args.min_count, min_len: args.min_len };
    let corpus = preprocess(&docs, Some(&labels), &opts)?;
    let staged = Staged::dir(&args.out)?;
    save_corpus(&corpus, staged.path())?;
    let mut listing = names.join("\n");
    listing.push('\n');
    fs::write(staged.path().join(COLLECTIONS_TXT), listing)?;
    staged.commit()?;
    Ok(format!(
        "{} documents in {} collections, {} terms, {} tokens",
        corpus.num_docs(),
        corpus.num_collections(),
        corpus.vocab_size(),
        corpus.num_tokens()
    ))
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Built-in setting: `synth-3.2` or `synth-3.3`.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    pub preset: Option<String>,
    /// TOML or JSON generator configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_generate(args: &GenerateArgs) -> CliResult<String> {
    let mut config: SynthConfig = match (&args.preset, &args.config) {
        (Some(name), _) => SynthConfig::preset(name, 0)?,
        (None, Some(path)) => load_config(path)?,
        (None, None) => return Err(CliError::usage("--preset or --config is required")),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let synth = generate(&config)?;
    let staged = Staged::dir(&args.out)?;
    synth.save(staged.path())?;
    staged.commit()?;
    Ok(format!(
        "{} documents, {} collections, {} topics, seed {}",
        synth.corpus.num_docs(),
        config.num_collections,
        config.num_topics,
        config.seed
    ))
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 0.2)]
    pub doc_fraction: f64,
    #[arg(long, default_value_t = 0.5)]
    pub word_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_split(args: &SplitArgs) -> CliResult<String> {
    let corpus = clda::corpus::load_corpus_dir(&args.corpus)?;
    let mut rng = Rng::new(args.seed);
    let split = split_held_out(&mut rng, &corpus, args.doc_fraction, args.word_fraction)?;
    let staged = Staged::file(&args.out)?;
    split.save(staged.path())?;
    staged.commit()?;
    let tokens: usize = split.held_out.iter().map(|d| d.test.len()).sum();
    Ok(format!("{} held-out documents, {tokens} test tokens", split.held_out.len()))
}
