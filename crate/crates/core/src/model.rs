//! Hyperparameters, model state, sufficient statistics, exact log densities
//! and chain checkpoints.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::numerics::{ln_gamma, sample_dirichlet, Rng, RngState, SimplexVector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
}

impl Hyperparameters {
    pub fn new(alpha: f64, gamma: f64, eta: f64) -> Result<Self> {
        let h = Self { alpha, gamma, eta };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("alpha", self.alpha), ("gamma", self.gamma), ("eta", self.eta)] {
            if !(x > 0.0 && x.is_finite()) {
                return Err(Error::domain(format!("{name} must be positive, got {x}")));
            }
        }
        Ok(())
    }
}

/// Dense token counts: `n_dk` (documents x topics), `n_d`, `m_kv`
/// (topics x terms) and `m_k`. Per-document per-term topic counts are never
/// stored because no algorithm needs more than these marginals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountStatistics {
    k: usize,
    v: usize,
    n_dk: Vec<u32>,
    n_d: Vec<u32>,
    m_kv: Vec<u32>,
    m_k: Vec<u32>,
}

impl CountStatistics {
    pub fn zeros(num_docs: usize, k: usize, v: usize) -> Self {
        Self {
            k,
            v,
            n_dk: vec![0; num_docs * k],
            n_d: vec![0; num_docs],
            m_kv: vec![0; k * v],
            m_k: vec![0; k],
        }
    }

    /// Counts from scratch. Fails when `z` does not match the corpus shape or
    /// holds a label `>= k`.
    pub fn recompute(corpus: &Corpus, z: &[Vec<u32>], k: usize) -> Result<Self> {
        check_labels(corpus, z, k)?;
        let mut c = Self::zeros(corpus.num_docs(), k, corpus.vocab_size());
        for (d, (doc, zd)) in corpus.docs().iter().zip(z).enumerate() {
            for (&w, &t) in doc.iter().zip(zd) {
                c.add(d, w, t);
            }
        }
        Ok(c)
    }

    #[inline]
    pub fn add(&mut self, d: usize, w: u32, t: u32) {
        let (t, w) = (t as usize, w as usize);
        self.n_dk[d * self.k + t] += 1;
        self.n_d[d] += 1;
        self.m_kv[t * self.v + w] += 1;
        self.m_k[t] += 1;
    }

    #[inline]
    pub fn remove(&mut self, d: usize, w: u32, t: u32) {
        let (t, w) = (t as usize, w as usize);
        self.n_dk[d * self.k + t] -= 1;
        self.n_d[d] -= 1;
        self.m_kv[t * self.v + w] -= 1;
        self.m_k[t] -= 1;
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }

    pub fn vocab_size(&self) -> usize {
        self.v
    }

    pub fn num_docs(&self) -> usize {
        self.n_d.len()
    }

    #[inline]
    pub fn n_dk(&self, d: usize, k: usize) -> u32 {
        self.n_dk[d * self.k + k]
    }

    /// Topic counts of document `d`.
    #[inline]
    pub fn doc_row(&self, d: usize) -> &[u32] {
        &self.n_dk[d * self.k..(d + 1) * self.k]
    }

    #[inline]
    pub fn n_d(&self, d: usize) -> u32 {
        self.n_d[d]
    }

    #[inline]
    pub fn m_kv(&self, k: usize, v: usize) -> u32 {
        self.m_kv[k * self.v + v]
    }

    /// Term counts of topic `k`.
    #[inline]
    pub fn topic_row(&self, k: usize) -> &[u32] {
        &self.m_kv[k * self.v..(k + 1) * self.v]
    }

    #[inline]
    pub fn m_k(&self, k: usize) -> u32 {
        self.m_k[k]
    }

    pub fn topic_totals(&self) -> &[u32] {
        &self.m_k
    }

    pub fn total_tokens(&self) -> u64 {
        self.m_k.iter().map(|&m| m as u64).sum()
    }

    /// Checks the marginal identities between the four tables.
    pub fn check_consistency(&self) -> Result<()> {
        for d in 0..self.num_docs() {
            let s: u32 = self.doc_row(d).iter().sum();
            if s != self.n_d[d] {
                return Err(Error::data(format!("n_d mismatch in document {d}")));
            }
        }
        for k in 0..self.k {
            let s: u32 = self.topic_row(k).iter().sum();
            if s != self.m_k[k] {
                return Err(Error::data(format!("m_k mismatch in topic {k}")));
            }
        }
        let nd: u64 = self.n_d.iter().map(|&n| n as u64).sum();
        if nd != self.total_tokens() {
            return Err(Error::data("document and topic totals disagree"));
        }
        Ok(())
    }
}

pub(crate) fn check_labels(corpus: &Corpus, z: &[Vec<u32>], k: usize) -> Result<()> {
    if z.len() != corpus.num_docs() {
        return Err(Error::data(format!(
            "topic labels cover {} documents, corpus has {}",
            z.len(),
            corpus.num_docs()
        )));
    }
    for (d, (doc, zd)) in corpus.docs().iter().zip(z).enumerate() {
        if doc.len() != zd.len() {
            return Err(Error::data(format!("document {d} has {} labels for {} tokens", zd.len(), doc.len())));
        }
        if let Some(&t) = zd.iter().find(|&&t| t as usize >= k) {
            return Err(Error::data(format!("document {d} has topic label {t} >= K = {k}")));
        }
    }
    Ok(())
}

/// Every latent variable of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub k: usize,
    pub beta: Vec<SimplexVector>,
    pub pi: Vec<SimplexVector>,
    pub theta: Vec<SimplexVector>,
    pub z: Vec<Vec<u32>>,
}

impl ModelState {
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        check_labels(corpus, &self.z, self.k)?;
        let ok = self.beta.len() == self.k
            && self.beta.iter().all(|b| b.dim() == corpus.vocab_size())
            && self.pi.len() == corpus.num_collections()
            && self.pi.iter().all(|p| p.dim() == self.k)
            && self.theta.len() == corpus.num_docs()
            && self.theta.iter().all(|t| t.dim() == self.k);
        if ok {
            Ok(())
        } else {
            Err(Error::data("model state dimensions do not match the corpus"))
        }
    }

    /// Applies a topic relabelling: new topic `i` is old topic `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut inverse = vec![0u32; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i as u32;
        }
        Self {
            k: self.k,
            beta: perm.iter().map(|&p| self.beta[p].clone()).collect(),
            pi: self.pi.iter().map(|p| p.permuted(perm)).collect(),
            theta: self.theta.iter().map(|t| t.permuted(perm)).collect(),
            z: self
                .z
                .iter()
                .map(|zd| zd.iter().map(|&t| inverse[t as usize]).collect())
                .collect(),
        }
    }
}

/// Unnormalized log posterior of `(beta, pi, theta, z)`: the sum of
/// `(n_jdk + gamma pi_jk - 1) ln theta_jdk - ln Gamma(gamma pi_jk)` over
/// documents, `(alpha - 1) ln pi_jk` over collections and
/// `(m_kv + eta - 1) ln beta_kv` over topics. Additive constants are omitted.
pub fn log_joint(corpus: &Corpus, state: &ModelState, h: &Hyperparameters) -> Result<f64> {
    state.validate(corpus)?;
    let counts = CountStatistics::recompute(corpus, &state.z, state.k)?;
    let mut doc_term = 0.0;
    for d in 0..corpus.num_docs() {
        let pi = &state.pi[corpus.collection_of(d)];
        for (k, &th) in state.theta[d].iter().enumerate() {
            let a = h.gamma * pi[k];
            doc_term += (counts.n_dk(d, k) as f64 + a - 1.0) * th.ln() - ln_gamma(a);
        }
    }
    let pi_term: f64 = state
        .pi
        .iter()
        .flat_map(|p| p.iter())
        .map(|&p| (h.alpha - 1.0) * p.ln())
        .sum();
    let mut beta_term = 0.0;
    for (k, beta) in state.beta.iter().enumerate() {
        for (v, &b) in beta.iter().enumerate() {
            beta_term += (counts.m_kv(k, v) as f64 + h.eta - 1.0) * b.ln();
        }
    }
    let total = doc_term + pi_term + beta_term;
    finite_or(total, "log_joint")
}

/// Log of the marginal posterior of `(pi, z)` with `theta` and `beta`
/// integrated out, up to an additive constant.
pub fn log_collapsed(
    corpus: &Corpus,
    counts: &CountStatistics,
    pi: &[SimplexVector],
    h: &Hyperparameters,
) -> Result<f64> {
    let mut total = 0.0;
    for j in 0..corpus.num_collections() {
        let a: Vec<f64> = pi[j].iter().map(|&p| h.gamma * p).collect();
        let lg: Vec<f64> = a.iter().map(|&x| ln_gamma(x)).collect();
        for &d in corpus.members(j) {
            for (t, &n) in counts.doc_row(d).iter().enumerate() {
                if n > 0 {
                    total += ln_gamma(a[t] + n as f64) - lg[t];
                }
            }
        }
        total += pi[j].iter().map(|&p| (h.alpha - 1.0) * p.ln()).sum::<f64>();
    }
    total += log_topic_term(counts, h.eta);
    finite_or(total, "collapsed log posterior")
}

/// `sum_k [sum_v ln Gamma(m_kv + eta) - ln Gamma(m_k + V eta)]`, skipping
/// zero counts, which contribute only a constant.
pub(crate) fn log_topic_term(counts: &CountStatistics, eta: f64) -> f64 {
    let v = counts.vocab_size() as f64;
    let lg_eta = ln_gamma(eta);
    let mut total = 0.0;
    for t in 0..counts.num_topics() {
        for &m in counts.topic_row(t) {
            if m > 0 {
                total += ln_gamma(m as f64 + eta) - lg_eta;
            }
        }
        total -= ln_gamma(counts.m_k(t) as f64 + v * eta) - ln_gamma(v * eta);
    }
    total
}

pub(crate) fn finite_or(x: f64, what: &str) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::numeric(format!("{what} is not finite ({x})")))
    }
}

/// One exact draw of `theta_jd ~ Dir(n_jd + gamma pi_j)` and
/// `beta_k ~ Dir(m_k + eta)` given `(pi, z)`.
pub fn sample_theta_beta(
    rng: &mut Rng,
    counts: &CountStatistics,
    pi: &[SimplexVector],
    collection_of: &[usize],
    h: &Hyperparameters,
) -> Result<(Vec<SimplexVector>, Vec<SimplexVector>)> {
    let k = counts.num_topics();
    let mut params = vec![0.0; k];
    let mut theta = Vec::with_capacity(counts.num_docs());
    for (d, &j) in collection_of.iter().enumerate() {
        for (t, p) in params.iter_mut().enumerate() {
            *p = counts.n_dk(d, t) as f64 + h.gamma * pi[j][t];
        }
        theta.push(sample_dirichlet(rng, &params)?);
    }
    let mut beta = Vec::with_capacity(k);
    for t in 0..k {
        let params: Vec<f64> = counts.topic_row(t).iter().map(|&m| m as f64 + h.eta).collect();
        beta.push(sample_dirichlet(rng, &params)?);
    }
    Ok((theta, beta))
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to resume a chain bit-exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub algo: String,
    pub hyper: Hyperparameters,
    pub k: usize,
    /// Number of completed iterations.
    pub iteration: usize,
    pub z: Vec<Vec<u32>>,
    pub pi: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varphi: Option<Vec<Vec<f64>>>,
    /// Sampler-specific state such as step-size adaptation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
    pub rng: RngState,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        let c: Self = serde_json::from_str(&text)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::data(format!("unsupported checkpoint version {}", c.version)));
        }
        Ok(c)
    }

    pub fn pi_simplex(&self) -> Result<Vec<SimplexVector>> {
        self.pi.iter().map(|p| SimplexVector::new(p.clone())).collect()
    }
}
