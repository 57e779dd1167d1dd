//! Layout of a trained model directory.

use std::path::Path;

use clda::corpus::{load_corpus_dir, Corpus, HeldOutSplit, TestDoc};
use clda::model::Hyperparameters;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::output::read_json;

pub const MODEL_JSON: &str = "model.json";
pub const ESTIMATES_JSON: &str = "estimates.json";
pub const PARAMS_JSON: &str = "params.json";
pub const ELBO_CSV: &str = "elbo.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub algo: String,
    pub k: usize,
    pub num_collections: usize,
    pub num_docs: usize,
    pub vocab_size: usize,
    pub single_collection: bool,
    /// Trained on the training part of a held-out split.
    pub split: bool,
    /// For `lda-cgs`, `gamma` is `K alpha`.
    pub hyper: Hyperparameters,
    pub seed: u64,
    pub iterations: usize,
}

/// Point estimates written at training time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimates {
    pub pi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    pub topic_size: Vec<f64>,
}

impl ModelInfo {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let path = dir.join(MODEL_JSON);
        if !path.exists() {
            return Err(CliError::data(format!("{} is not a model directory", dir.display())));
        }
        read_json(&path)
    }

    pub fn is_gibbs(&self) -> bool {
        self.algo != "vem"
    }

    pub fn check(&self, train: &Corpus) -> CliResult<()> {
        if train.num_docs() != self.num_docs
            || train.vocab_size() != self.vocab_size
            || train.num_collections() != self.num_collections
        {
            return Err(CliError::data("the model was trained on a different corpus or split"));
        }
        Ok(())
    }
}

/// Training corpus and test words a model was fitted to.
pub struct Data {
    pub train: Corpus,
    pub test: Option<Vec<TestDoc>>,
}

pub fn load_data(corpus_dir: &Path, split: Option<&Path>, single_collection: bool) -> CliResult<Data> {
    let corpus = load_corpus_dir(corpus_dir)?;
    let (train, test) = match split {
        Some(p) => {
            let view = HeldOutSplit::load(p)?.apply(&corpus)?;
            (view.train, Some(view.test))
        }
        None => (corpus, None),
    };
    if single_collection {
        let test = test.map(|t| {
            t.into_iter()
                .map(|d| TestDoc { collection: 0, ..d })
                .collect()
        });
        return Ok(Data { train: train.flattened(), test });
    }
    Ok(Data { train, test })
}
