//! Held-out perplexity, topic coherence, topic sizes, topic alignment and
//! topic distances.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, TestDoc};
use crate::error::{Error, Result};
use crate::lda::LdaHyper;
use crate::model::{CountStatistics, Hyperparameters};
use crate::numerics::{l1_distance, SimplexVector};
use crate::trace::Snapshot;
use crate::vem::VariationalParams;

/// `(m_kv + eta) / (m_k + V eta)` for every topic.
pub fn beta_hat(counts: &CountStatistics, eta: f64) -> Vec<Vec<f64>> {
    let v = counts.vocab_size() as f64;
    (0..counts.num_topics())
        .map(|k| {
            let den = counts.m_k(k) as f64 + v * eta;
            counts.topic_row(k).iter().map(|&m| (m as f64 + eta) / den).collect()
        })
        .collect()
}

/// `(n_dk + prior_k) / (n_d + sum(prior))`.
pub fn theta_hat(counts: &CountStatistics, d: usize, prior: &[f64]) -> Vec<f64> {
    let den = counts.n_d(d) as f64 + prior.iter().sum::<f64>();
    counts.doc_row(d).iter().zip(prior).map(|(&n, p)| (n as f64 + p) / den).collect()
}

/// One set of point estimates used to score held-out words.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSample {
    /// Per training document.
    pub theta: Vec<Vec<f64>>,
    /// Mixture for a held-out document without training words, per collection.
    pub fallback: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

impl PredictiveSample {
    /// Rao-Blackwell estimates of cLDA given `(pi, z)`.
    pub fn clda(corpus: &Corpus, counts: &CountStatistics, pi: &[Vec<f64>], h: &Hyperparameters) -> Self {
        let priors: Vec<Vec<f64>> = pi.iter().map(|p| p.iter().map(|x| h.gamma * x).collect()).collect();
        Self {
            theta: (0..corpus.num_docs())
                .map(|d| theta_hat(counts, d, &priors[corpus.collection_of(d)]))
                .collect(),
            fallback: pi.to_vec(),
            beta: beta_hat(counts, h.eta),
        }
    }

    /// Rao-Blackwell estimates of LDA given `z`.
    pub fn lda(corpus: &Corpus, counts: &CountStatistics, h: &LdaHyper) -> Self {
        let k = counts.num_topics();
        let prior = vec![h.alpha; k];
        Self {
            theta: (0..corpus.num_docs()).map(|d| theta_hat(counts, d, &prior)).collect(),
            fallback: vec![vec![1.0 / k as f64; k]; corpus.num_collections()],
            beta: beta_hat(counts, h.eta),
        }
    }

    /// Variational means.
    pub fn vem(params: &VariationalParams) -> Self {
        let unwrap = |v: Vec<SimplexVector>| v.into_iter().map(SimplexVector::into_inner).collect();
        Self {
            theta: unwrap(params.theta_mean()),
            fallback: params.omega.clone(),
            beta: unwrap(params.beta_mean()),
        }
    }
}

/// `exp(-mean ln p(w))` over all test words, with
/// `p(w) = (1/S) sum_s sum_k theta_k^[s] beta_kw^[s]`.
pub fn perplexity(test: &[TestDoc], samples: &[PredictiveSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::data("perplexity needs at least one sample"));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for doc in test {
        for &w in &doc.words {
            let mut p = 0.0;
            for s in samples {
                let theta = match doc.train_doc {
                    Some(d) => &s.theta[d],
                    None => &s.fallback[doc.collection],
                };
                p += theta.iter().zip(&s.beta).map(|(t, b)| t * b[w as usize]).sum::<f64>();
            }
            total += (p / samples.len() as f64).ln();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::data("the test set has no words"));
    }
    Ok((-total / n as f64).exp())
}

/// Perplexity of a cLDA chain from its saved snapshots.
pub fn perplexity_clda(
    train: &Corpus,
    test: &[TestDoc],
    snapshots: &[Snapshot],
    k: usize,
    h: &Hyperparameters,
) -> Result<f64> {
    let samples = snapshots
        .iter()
        .map(|s| {
            let counts = CountStatistics::recompute(train, &s.z, k)?;
            Ok(PredictiveSample::clda(train, &counts, &s.pi, h))
        })
        .collect::<Result<Vec<_>>>()?;
    perplexity(test, &samples)
}

/// Perplexity of an LDA chain from its saved snapshots.
pub fn perplexity_lda(train: &Corpus, test: &[TestDoc], snapshots: &[Snapshot], k: usize, h: &LdaHyper) -> Result<f64> {
    let samples = snapshots
        .iter()
        .map(|s| {
            let counts = CountStatistics::recompute(train, &s.z, k)?;
            Ok(PredictiveSample::lda(train, &counts, h))
        })
        .collect::<Result<Vec<_>>>()?;
    perplexity(test, &samples)
}

pub fn perplexity_vem(test: &[TestDoc], params: &VariationalParams) -> Result<f64> {
    perplexity(test, &[PredictiveSample::vem(params)])
}

/// Mean of `beta_hat` over snapshots.
pub fn beta_hat_mean(train: &Corpus, snapshots: &[Snapshot], k: usize, eta: f64) -> Result<Vec<Vec<f64>>> {
    let mut acc = vec![vec![0.0; train.vocab_size()]; k];
    for s in snapshots {
        let b = beta_hat(&CountStatistics::recompute(train, &s.z, k)?, eta);
        for (a, row) in acc.iter_mut().zip(&b) {
            for (x, y) in a.iter_mut().zip(row) {
                *x += y / snapshots.len() as f64;
            }
        }
    }
    if snapshots.is_empty() {
        return Err(Error::data("no snapshots to average"));
    }
    Ok(acc)
}

/// Posting lists of the training documents.
#[derive(Clone, Debug)]
pub struct DocFrequencies {
    postings: Vec<Vec<u32>>,
    num_docs: usize,
}

impl DocFrequencies {
    pub fn new(corpus: &Corpus) -> Self {
        let mut postings = vec![Vec::new(); corpus.vocab_size()];
        for (d, doc) in corpus.docs().iter().enumerate() {
            let mut last = None;
            for &w in doc {
                if last != Some(w) {
                    postings[w as usize].push(d as u32);
                    last = Some(w);
                }
            }
        }
        Self { postings, num_docs: corpus.num_docs() }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn df(&self, v: u32) -> usize {
        self.postings[v as usize].len()
    }

    pub fn codf(&self, a: u32, b: u32) -> usize {
        let (x, y) = (&self.postings[a as usize], &self.postings[b as usize]);
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }
}

/// `sum_{i >= 2} sum_{j < i} ln((codf(v_i, v_j) + 1) / df(v_j))`.
pub fn coherence_from_counts(words: usize, df: impl Fn(usize) -> usize, codf: impl Fn(usize, usize) -> usize) -> Result<f64> {
    let mut score = 0.0;
    for i in 1..words {
        for j in 0..i {
            let d = df(j);
            if d == 0 {
                return Err(Error::data("a top word occurs in no training document"));
            }
            score += ((codf(i, j) as f64 + 1.0) / d as f64).ln();
        }
    }
    Ok(score)
}

pub fn coherence(top: &[u32], freq: &DocFrequencies) -> Result<f64> {
    if top.iter().any(|&w| freq.df(w) == 0) {
        return Err(Error::data("a top word occurs in no training document"));
    }
    coherence_from_counts(top.len(), |j| freq.df(top[j]), |i, j| freq.codf(top[i], top[j]))
}

/// The `m` most probable terms, ties broken by ascending id.
pub fn top_words(beta_k: &[f64], m: usize) -> Vec<u32> {
    let mut ids: Vec<u32> = (0..beta_k.len() as u32).collect();
    ids.sort_by(|&a, &b| beta_k[b as usize].total_cmp(&beta_k[a as usize]).then(a.cmp(&b)));
    ids.truncate(m);
    ids
}

pub fn topic_coherence(beta: &[Vec<f64>], freq: &DocFrequencies, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(Error::domain("the top-word count must be at least 1"));
    }
    beta.iter().map(|b| coherence(&top_words(b, m), freq)).collect()
}

/// Tokens assigned to each topic.
pub fn topic_size(counts: &CountStatistics) -> Vec<u64> {
    counts.topic_totals().iter().map(|&m| m as u64).collect()
}

pub fn topic_size_from_z(z: &[Vec<u32>], k: usize) -> Vec<u64> {
    let mut sizes = vec![0u64; k];
    for &t in z.iter().flatten() {
        sizes[t as usize] += 1;
    }
    sizes
}

/// Pairwise L1 distances between rows.
pub fn topic_distance_matrix(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter().map(|a| rows.iter().map(|b| l1_distance(a, b)).collect()).collect()
}

fn matching_cost(reference: &[Vec<f64>], candidate: &[Vec<f64>], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &p)| l1_distance(&reference[i], &candidate[p])).sum()
}

/// Greedy L1 matching: `perm[i]` is the candidate row matched to reference
/// row `i`. Pairs are taken in order of increasing distance without
/// replacement; the identity is returned when it is no worse.
pub fn align_topics(reference: &[Vec<f64>], candidate: &[Vec<f64>]) -> Result<Vec<usize>> {
    let k = reference.len();
    if candidate.len() != k {
        return Err(Error::data(format!("cannot align {k} topics with {}", candidate.len())));
    }
    if reference.iter().chain(candidate).any(|r| r.len() != reference[0].len()) {
        return Err(Error::data("topic rows have different lengths"));
    }
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(k * k);
    for (i, r) in reference.iter().enumerate() {
        for (j, c) in candidate.iter().enumerate() {
            pairs.push((l1_distance(r, c), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut perm = vec![usize::MAX; k];
    let mut taken = vec![false; k];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !taken[j] {
            perm[i] = j;
            taken[j] = true;
        }
    }
    let identity: Vec<usize> = (0..k).collect();
    if matching_cost(reference, candidate, &identity) <= matching_cost(reference, candidate, &perm) {
        return Ok(identity);
    }
    Ok(perm)
}

/// Applies an alignment to collection mixtures: entry `i` of the result is
/// entry `perm[i]` of the input.
pub fn permute_mixtures(pi: &[Vec<f64>], perm: &[usize]) -> Vec<Vec<f64>> {
    pi.iter().map(|p| perm.iter().map(|&q| p[q]).collect()).collect()
}

/// Per-collection L1 distance between truth and aligned estimates.
pub fn aligned_pi_distance(truth_pi: &[Vec<f64>], est_pi: &[Vec<f64>], perm: &[usize]) -> Vec<f64> {
    truth_pi
        .iter()
        .zip(permute_mixtures(est_pi, perm))
        .map(|(t, e)| l1_distance(t, &e))
        .collect()
}

/// First position in `path` at which every collection mixture, after
/// alignment, lies within `threshold` of the truth; returned 1-based.
pub fn iterations_to_region(
    path: &[Vec<Vec<f64>>],
    truth_pi: &[Vec<f64>],
    perm: &[usize],
    threshold: f64,
) -> Option<usize> {
    path.iter()
        .position(|pi| aligned_pi_distance(truth_pi, pi, perm).iter().all(|&d| d <= threshold))
        .map(|t| t + 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerplexityEntry {
    pub checkpoint: usize,
    pub perplexity: f64,
}

/// Contents of `eval.json`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    /// Pooled over every saved sample.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perplexity: Option<f64>,
    /// One entry per saved sample.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub perplexity_by_checkpoint: Vec<PerplexityEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coherence: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<Vec<u64>>,
}

/// `topic,size,coherence` rows; absent metrics are left empty.
pub fn coherence_csv(sizes: Option<&[u64]>, coherence: Option<&[f64]>) -> String {
    let k = sizes.map(<[u64]>::len).or(coherence.map(<[f64]>::len)).unwrap_or(0);
    let mut out = String::from("topic,size,coherence\n");
    for t in 0..k {
        let s = sizes.map(|s| s[t].to_string()).unwrap_or_default();
        let c = coherence.map(|c| c[t].to_string()).unwrap_or_default();
        writeln!(out, "{},{s},{c}", t + 1).unwrap();
    }
    out
}

pub fn matrix_csv(m: &[Vec<f64>]) -> String {
    let mut out = String::from("topic");
    for t in 1..=m.len() {
        write!(out, ",topic_{t}").unwrap();
    }
    out.push('\n');
    for (i, row) in m.iter().enumerate() {
        write!(out, "{}", i + 1).unwrap();
        for x in row {
            write!(out, ",{x}").unwrap();
        }
        out.push('\n');
    }
    out
}
