//! The collapsed topic-assignment sweep shared by every Gibbs backend.
//!
//! Each token is removed from the counts, its topic redrawn from
//! `(prior_k + n_dk) (eta + m_kv) / (V eta + m_k)` and added back. The
//! document-level prior `prior` is `gamma * pi_j` for cLDA and the constant
//! `alpha` for LDA; the per-document denominator is the same for every topic
//! and is dropped.

use crate::corpus::Corpus;
use crate::error::Result;
use crate::model::{CountStatistics, Hyperparameters};
use crate::numerics::{draw_from_weights, sample_uniform, Rng};

/// Topic labels together with their counts.
#[derive(Clone, Debug)]
pub struct CollapsedState {
    k: usize,
    z: Vec<Vec<u32>>,
    counts: CountStatistics,
    weights: Vec<f64>,
}

impl CollapsedState {
    /// Uniformly random labels.
    pub fn random(rng: &mut Rng, corpus: &Corpus, k: usize) -> Self {
        let z = corpus
            .docs()
            .iter()
            .map(|doc| {
                doc.iter()
                    .map(|_| ((sample_uniform(rng) * k as f64) as usize).min(k - 1) as u32)
                    .collect()
            })
            .collect();
        Self::from_z(corpus, k, z).expect("labels drawn below k")
    }

    pub fn from_z(corpus: &Corpus, k: usize, z: Vec<Vec<u32>>) -> Result<Self> {
        let counts = CountStatistics::recompute(corpus, &z, k)?;
        Ok(Self {
            k,
            z,
            counts,
            weights: vec![0.0; k],
        })
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn z(&self) -> &[Vec<u32>] {
        &self.z
    }

    pub fn counts(&self) -> &CountStatistics {
        &self.counts
    }

    /// One systematic scan over documents in corpus order and tokens in
    /// position order. `priors[j]` is the length-`K` document prior of
    /// collection `j`.
    pub fn sweep(&mut self, rng: &mut Rng, corpus: &Corpus, priors: &[Vec<f64>], eta: f64) {
        let v_eta = corpus.vocab_size() as f64 * eta;
        let k = self.k;
        for (d, doc) in corpus.docs().iter().enumerate() {
            let prior = &priors[corpus.collection_of(d)];
            let zd = &mut self.z[d];
            for (i, &w) in doc.iter().enumerate() {
                let old = zd[i];
                self.counts.remove(d, w, old);
                let mut total = 0.0;
                for t in 0..k {
                    let wt = (prior[t] + self.counts.n_dk(d, t) as f64)
                        * (eta + self.counts.m_kv(t, w as usize) as f64)
                        / (v_eta + self.counts.m_k(t) as f64);
                    self.weights[t] = wt;
                    total += wt;
                }
                let new = draw_from_weights(rng, &self.weights, total) as u32;
                self.counts.add(d, w, new);
                zd[i] = new;
            }
        }
    }
}

/// Full conditional weights of one token's topic under cLDA, including the
/// document denominator. `counts` must already exclude the token.
pub fn z_conditional_weights(
    counts: &CountStatistics,
    d: usize,
    w: u32,
    pi_j: &[f64],
    h: &Hyperparameters,
) -> Vec<f64> {
    let v_eta = counts.vocab_size() as f64 * h.eta;
    let doc_den = h.gamma + counts.n_d(d) as f64;
    (0..counts.num_topics())
        .map(|t| {
            (h.gamma * pi_j[t] + counts.n_dk(d, t) as f64) / doc_den
                * (h.eta + counts.m_kv(t, w as usize) as f64)
                / (v_eta + counts.m_k(t) as f64)
        })
        .collect()
}
