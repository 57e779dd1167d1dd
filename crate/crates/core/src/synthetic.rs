//! Forward simulation of the generative model.

use std::fs;
use std::path::Path;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::corpus::{save_corpus, Corpus, Vocabulary};
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::numerics::{draw_from_weights, sample_dirichlet, Rng, SimplexVector};

pub const TRUTH_FILE: &str = "truth.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_collections: usize,
    pub num_topics: usize,
    pub vocab_size: usize,
    pub docs_per_collection: usize,
    pub doc_length: usize,
    pub hyper: Hyperparameters,
    pub seed: u64,
    /// Draws each length from `Poisson(doc_length)` (at least 1) instead.
    #[serde(default)]
    pub poisson_length: bool,
    #[serde(default)]
    pub beta: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub pi: Option<Vec<Vec<f64>>>,
}

impl SynthConfig {
    pub const PRESETS: [&'static str; 2] = ["synth-3.2", "synth-3.3"];

    /// Two collections of 100 documents with 200 words each over 40 terms and
    /// 3 topics; `synth-3.2` uses `(alpha, gamma, eta) = (0.1, 1, 0.25)` and
    /// `synth-3.3` uses `(1, 0.8, 0.5)`.
    pub fn preset(name: &str, seed: u64) -> Result<Self> {
        let hyper = match name {
            "synth-3.2" => Hyperparameters::new(0.1, 1.0, 0.25)?,
            "synth-3.3" => Hyperparameters::new(1.0, 0.8, 0.5)?,
            other => return Err(Error::domain(format!("unknown preset {other}"))),
        };
        Ok(Self {
            num_collections: 2,
            num_topics: 3,
            vocab_size: 40,
            docs_per_collection: 100,
            doc_length: 200,
            hyper,
            seed,
            poisson_length: false,
            beta: None,
            pi: None,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_collections == 0
            || self.num_topics == 0
            || self.vocab_size == 0
            || self.docs_per_collection == 0
            || self.doc_length == 0
        {
            return Err(Error::domain("synthetic corpus dimensions must be positive"));
        }
        self.hyper.validate()?;
        let check = |rows: &Option<Vec<Vec<f64>>>, n: usize, dim: usize, what: &str| -> Result<()> {
            if let Some(rows) = rows {
                if rows.len() != n || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::domain(format!("{what} override has the wrong shape")));
                }
                for r in rows {
                    SimplexVector::new(r.clone())?;
                }
            }
            Ok(())
        };
        check(&self.beta, self.num_topics, self.vocab_size, "beta")?;
        check(&self.pi, self.num_collections, self.num_topics, "pi")
    }
}

/// The latent draws behind a generated corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub beta: Vec<Vec<f64>>,
    pub pi: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    /// Topic of every token, aligned with the corpus token order.
    pub z: Vec<Vec<u32>>,
}

impl GroundTruth {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn pi_simplex(&self) -> Vec<SimplexVector> {
        self.pi.iter().map(|p| SimplexVector::new(p.clone()).expect("stored simplex")).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Synthetic {
    pub corpus: Corpus,
    pub truth: GroundTruth,
}

impl Synthetic {
    /// Writes the corpus files and `truth.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        save_corpus(&self.corpus, dir)?;
        self.truth.save(&dir.join(TRUTH_FILE))
    }
}

pub fn generate(config: &SynthConfig) -> Result<Synthetic> {
    config.validate()?;
    let (j_count, k, v) = (config.num_collections, config.num_topics, config.vocab_size);
    let h = config.hyper;
    let mut rng = Rng::new(config.seed);
    let beta: Vec<Vec<f64>> = match &config.beta {
        Some(b) => b.clone(),
        None => (0..k)
            .map(|_| sample_dirichlet(&mut rng, &vec![h.eta; v]).map(SimplexVector::into_inner))
            .collect::<Result<_>>()?,
    };
    let pi: Vec<Vec<f64>> = match &config.pi {
        Some(p) => p.clone(),
        None => (0..j_count)
            .map(|_| sample_dirichlet(&mut rng, &vec![h.alpha; k]).map(SimplexVector::into_inner))
            .collect::<Result<_>>()?,
    };
    let lengths = config
        .poisson_length
        .then(|| Poisson::new(config.doc_length as f64).map_err(|e| Error::domain(e.to_string())))
        .transpose()?;

    let num_docs = j_count * config.docs_per_collection;
    let mut docs = Vec::with_capacity(num_docs);
    let mut theta = Vec::with_capacity(num_docs);
    let mut z = Vec::with_capacity(num_docs);
    let mut labels = Vec::with_capacity(num_docs);
    for (j, pi_j) in pi.iter().enumerate() {
        let prior: Vec<f64> = pi_j.iter().map(|&p| h.gamma * p).collect();
        for _ in 0..config.docs_per_collection {
            let theta_d = sample_dirichlet(&mut rng, &prior)?.into_inner();
            let n = match &lengths {
                Some(p) => (p.sample(&mut rng) as usize).max(1),
                None => config.doc_length,
            };
            let mut pairs: Vec<(u32, u32)> = (0..n)
                .map(|_| {
                    let t = draw_from_weights(&mut rng, &theta_d, 1.0);
                    let w = draw_from_weights(&mut rng, &beta[t], 1.0);
                    (w as u32, t as u32)
                })
                .collect();
            pairs.sort_unstable();
            docs.push(pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            z.push(pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            theta.push(theta_d);
            labels.push(j);
        }
    }
    let corpus = Corpus::new(Vocabulary::synthetic(v), docs, labels, j_count)?;
    Ok(Synthetic {
        corpus,
        truth: GroundTruth { config: config.clone(), beta, pi, theta, z },
    })
}
