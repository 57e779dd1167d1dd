//! Collapsed Gibbs sampling for plain LDA, used as a baseline.

use crate::ags::Init;
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::gibbs::CollapsedState;
use crate::model::{finite_or, log_topic_term, Checkpoint, CountStatistics, Hyperparameters, CHECKPOINT_VERSION};
use crate::numerics::{digamma, ln_gamma, Rng, SimplexVector};
use crate::trace::{drive, Chain, ChainTrace, SamplerConfig, StepInfo};

/// Symmetric LDA hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LdaHyper {
    pub alpha: f64,
    pub eta: f64,
}

impl LdaHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.eta > 0.0) {
            return Err(Error::domain("LDA alpha and eta must be positive"));
        }
        Ok(())
    }

    /// The matching cLDA triple: uniform `pi` with `gamma = K alpha` gives the
    /// same document prior.
    pub fn as_clda(&self, k: usize) -> Hyperparameters {
        Hyperparameters {
            alpha: self.alpha,
            gamma: k as f64 * self.alpha,
            eta: self.eta,
        }
    }
}

/// Conditional topic weights of one token, counts excluding the token.
pub fn cgs_weights(counts: &CountStatistics, d: usize, w: u32, h: &LdaHyper) -> Vec<f64> {
    let v_eta = counts.vocab_size() as f64 * h.eta;
    (0..counts.num_topics())
        .map(|t| {
            (h.alpha + counts.n_dk(d, t) as f64) * (h.eta + counts.m_kv(t, w as usize) as f64)
                / (v_eta + counts.m_k(t) as f64)
        })
        .collect()
}

/// Collapsed LDA log posterior of `z`, up to a constant.
pub fn log_collapsed_lda(counts: &CountStatistics, h: &LdaHyper) -> Result<f64> {
    let k = counts.num_topics() as f64;
    let lg_alpha = ln_gamma(h.alpha);
    let mut total = 0.0;
    for d in 0..counts.num_docs() {
        for &n in counts.doc_row(d) {
            if n > 0 {
                total += ln_gamma(h.alpha + n as f64) - lg_alpha;
            }
        }
        total -= ln_gamma(k * h.alpha + counts.n_d(d) as f64) - ln_gamma(k * h.alpha);
    }
    total += log_topic_term(counts, h.eta);
    finite_or(total, "LDA log posterior")
}

/// Normalized topic histogram of each collection's tokens.
pub fn estimate_collection_mixture_from_z(
    z: &[Vec<u32>],
    collection_of: &[usize],
    k: usize,
    num_collections: usize,
) -> Result<Vec<SimplexVector>> {
    let mut hist = vec![vec![0.0; k]; num_collections];
    for (zd, &j) in z.iter().zip(collection_of) {
        for &t in zd {
            hist[j][t as usize] += 1.0;
        }
    }
    hist.into_iter()
        .enumerate()
        .map(|(j, h)| {
            SimplexVector::new(h).map_err(|_| Error::data(format!("collection {} has no tokens", j + 1)))
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct LdaChain {
    h: LdaHyper,
    state: CollapsedState,
    rng: Rng,
    iteration: usize,
    collection_of: Vec<usize>,
    num_collections: usize,
}

impl LdaChain {
    pub fn new(corpus: &Corpus, k: usize, h: LdaHyper, seed: u64, init: Option<Vec<Vec<u32>>>) -> Result<Self> {
        h.validate()?;
        if k == 0 {
            return Err(Error::domain("K must be at least 1"));
        }
        let mut rng = Rng::new(seed);
        let state = match init {
            Some(z) => CollapsedState::from_z(corpus, k, z)?,
            None => CollapsedState::random(&mut rng, corpus, k),
        };
        Ok(Self {
            h,
            state,
            rng,
            iteration: 0,
            collection_of: corpus.collections().to_vec(),
            num_collections: corpus.num_collections(),
        })
    }

    pub fn from_checkpoint(corpus: &Corpus, cp: &Checkpoint) -> Result<Self> {
        if cp.algo != "lda-cgs" {
            return Err(Error::data(format!("checkpoint is for {}, not lda-cgs", cp.algo)));
        }
        Ok(Self {
            h: LdaHyper { alpha: cp.hyper.alpha, eta: cp.hyper.eta },
            state: CollapsedState::from_z(corpus, cp.k, cp.z.clone())?,
            rng: Rng::from_state(&cp.rng)?,
            iteration: cp.iteration,
            collection_of: corpus.collections().to_vec(),
            num_collections: corpus.num_collections(),
        })
    }

    pub fn counts(&self) -> &CountStatistics {
        self.state.counts()
    }

    pub fn set_hyper(&mut self, h: LdaHyper) {
        self.h = h;
    }
}

impl Chain for LdaChain {
    fn algo(&self) -> &'static str {
        "lda-cgs"
    }

    fn hyper(&self) -> Hyperparameters {
        self.h.as_clda(self.state.num_topics())
    }

    fn num_topics(&self) -> usize {
        self.state.num_topics()
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn step(&mut self, corpus: &Corpus) -> Result<StepInfo> {
        let priors = vec![vec![self.h.alpha; self.num_topics()]; corpus.num_collections()];
        self.state.sweep(&mut self.rng, corpus, &priors, self.h.eta);
        self.iteration += 1;
        Ok(StepInfo {
            log_joint: log_collapsed_lda(self.state.counts(), &self.h)?,
            ..StepInfo::default()
        })
    }

    /// Topic histograms of the collections, standing in for `pi`.
    fn pi(&self) -> Vec<SimplexVector> {
        estimate_collection_mixture_from_z(self.state.z(), &self.collection_of, self.num_topics(), self.num_collections)
            .expect("collections are non-empty")
    }

    fn z(&self) -> &[Vec<u32>] {
        self.state.z()
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            algo: "lda-cgs".into(),
            hyper: self.hyper(),
            k: self.num_topics(),
            iteration: self.iteration,
            z: self.state.z().to_vec(),
            pi: self.pi().into_iter().map(SimplexVector::into_inner).collect(),
            varphi: None,
            extra: None,
            rng: self.rng.state(),
        }
    }
}

pub fn run(corpus: &Corpus, k: usize, h: LdaHyper, config: &SamplerConfig, init: Init) -> Result<ChainTrace> {
    config.validate()?;
    let mut chain = LdaChain::new(corpus, k, h, config.seed, init.z)?;
    drive(&mut chain, corpus, config)
}

/// Settings of the LDA hyperparameter estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct LdaEmConfig {
    pub samples: usize,
    pub thin: usize,
    pub burn_in: usize,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub outer_tol: f64,
    pub seed: u64,
}

impl Default for LdaEmConfig {
    fn default() -> Self {
        Self {
            samples: 5,
            thin: 10,
            burn_in: 200,
            max_outer: 50,
            inner_tol: 1e-6,
            outer_tol: 1e-3,
            seed: 0,
        }
    }
}

/// Fixed-point update of symmetric `alpha` from document-topic counts.
pub fn fixed_point_alpha(samples: &[&CountStatistics], alpha: f64) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for c in samples {
        let k = c.num_topics() as f64;
        for d in 0..c.num_docs() {
            for &n in c.doc_row(d) {
                if n > 0 {
                    num += digamma(n as f64 + alpha) - digamma(alpha);
                }
            }
            den += k * (digamma(c.n_d(d) as f64 + k * alpha) - digamma(k * alpha));
        }
    }
    if !(den > 0.0) {
        return Err(Error::data("alpha update needs at least one token"));
    }
    Ok(alpha * num / den)
}

/// Gibbs-EM for `(alpha, eta)` of LDA: alternate a warm-started CGS chain
/// with fixed-point maximization over the collected samples.
pub fn estimate_hyper(corpus: &Corpus, k: usize, init: LdaHyper, config: &LdaEmConfig) -> Result<(LdaHyper, Vec<LdaHyper>)> {
    let mut h = init;
    let mut chain = LdaChain::new(corpus, k, h, config.seed, None)?;
    let mut path = vec![h];
    for outer in 0..config.max_outer {
        chain.set_hyper(h);
        let burn = if outer == 0 { config.burn_in } else { config.thin };
        for _ in 0..burn {
            chain.step(corpus)?;
        }
        let mut samples = Vec::with_capacity(config.samples);
        for _ in 0..config.samples {
            for _ in 0..config.thin {
                chain.step(corpus)?;
            }
            samples.push(chain.counts().clone());
        }
        let refs: Vec<&CountStatistics> = samples.iter().collect();
        let mut next = h;
        for _ in 0..1000 {
            let alpha = fixed_point_alpha(&refs, next.alpha)?;
            let eta = crate::gibbs_em::fixed_point_eta(&refs, next.eta)?;
            let change = ((alpha - next.alpha) / next.alpha).abs().max(((eta - next.eta) / next.eta).abs());
            next = LdaHyper { alpha, eta };
            if change < config.inner_tol {
                break;
            }
        }
        let change = ((next.alpha - h.alpha) / h.alpha).abs().max(((next.eta - h.eta) / h.eta).abs());
        h = next;
        path.push(h);
        if change < config.outer_tol {
            break;
        }
    }
    Ok((h, path))
}
