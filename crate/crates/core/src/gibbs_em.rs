//! Gibbs-EM estimation of `eta` and `gamma` with `alpha` held fixed.
//!
//! The E-step collects thinned samples from a warm-started augmented Gibbs
//! chain at the current hyperparameters. The M-step iterates Minka-style
//! fixed-point maps for `eta` and `gamma` over those samples.

use std::thread;

use crate::ags::{AgsChain, Init};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{CountStatistics, Hyperparameters};
use crate::numerics::{digamma, ln_gamma, SimplexVector};
use crate::trace::Chain;

/// Counts and mixtures of one posterior sample.
#[derive(Clone, Debug)]
pub struct EmSample {
    pub counts: CountStatistics,
    pub pi: Vec<SimplexVector>,
}

/// `eta' = (eta / V) sum[Psi(m_kv + eta) - Psi(eta)] / sum[Psi(m_k + V eta) - Psi(V eta)]`,
/// summed over samples, topics and terms.
pub fn fixed_point_eta(samples: &[&CountStatistics], eta: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::data("eta update needs at least one sample"));
    }
    let v = samples[0].vocab_size() as f64;
    let (psi_eta, psi_veta) = (digamma(eta), digamma(v * eta));
    let mut num = 0.0;
    let mut den = 0.0;
    for c in samples {
        for k in 0..c.num_topics() {
            for &m in c.topic_row(k) {
                if m > 0 {
                    num += digamma(m as f64 + eta) - psi_eta;
                }
            }
            if c.m_k(k) > 0 {
                den += digamma(c.m_k(k) as f64 + v * eta) - psi_veta;
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::data("eta update is 0/0: all topic counts are zero"));
    }
    Ok(eta / v * num / den)
}

/// `gamma' = gamma sum pi_jk[Psi(n_jdk + gamma pi_jk) - Psi(gamma pi_jk)] / sum[Psi(n_jd + gamma) - Psi(gamma)]`.
pub fn fixed_point_gamma(samples: &[EmSample], collection_of: &[usize], gamma: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::data("gamma update needs at least one sample"));
    }
    let psi_gamma = digamma(gamma);
    let mut num = 0.0;
    let mut den = 0.0;
    for s in samples {
        let psi_a: Vec<Vec<f64>> = s
            .pi
            .iter()
            .map(|p| p.iter().map(|&x| digamma(gamma * x)).collect())
            .collect();
        for (d, &j) in collection_of.iter().enumerate() {
            let pi = &s.pi[j];
            for (k, &n) in s.counts.doc_row(d).iter().enumerate() {
                if n > 0 {
                    num += pi[k] * (digamma(n as f64 + gamma * pi[k]) - psi_a[j][k]);
                }
            }
            let nd = s.counts.n_d(d);
            if nd > 0 {
                den += digamma(nd as f64 + gamma) - psi_gamma;
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::data("gamma update is 0/0: all document counts are zero"));
    }
    Ok(gamma * num / den)
}

/// Minka lower bound on the `eta`-dependent log posterior, built at `eta0`
/// and evaluated at `eta`, summed over samples.
pub fn eta_bound(samples: &[&CountStatistics], eta0: f64, eta: f64) -> f64 {
    let mut total = 0.0;
    for c in samples {
        let v = c.vocab_size() as f64;
        for k in 0..c.num_topics() {
            for &m in c.topic_row(k) {
                let m = m as f64;
                let a = eta0 * (digamma(m + eta0) - digamma(eta0));
                let log_c = ln_gamma(m + eta0) - ln_gamma(eta0) - a * eta0.ln();
                total += log_c + a * eta.ln();
            }
            let mk = c.m_k(k) as f64;
            let b = digamma(mk + v * eta0) - digamma(v * eta0);
            total += ln_gamma(v * eta0) - ln_gamma(mk + v * eta0) + v * (eta0 - eta) * b;
        }
    }
    total
}

/// Minka lower bound on the `gamma`-dependent log posterior.
pub fn gamma_bound(samples: &[EmSample], collection_of: &[usize], gamma0: f64, gamma: f64) -> f64 {
    let mut total = 0.0;
    for s in samples {
        for (d, &j) in collection_of.iter().enumerate() {
            for (k, &n) in s.counts.doc_row(d).iter().enumerate() {
                let (n, x0) = (n as f64, gamma0 * s.pi[j][k]);
                let a = x0 * (digamma(n + x0) - digamma(x0));
                let log_c = ln_gamma(n + x0) - ln_gamma(x0) - a * x0.ln();
                total += log_c + a * gamma.ln() + a * s.pi[j][k].ln();
            }
            let nd = s.counts.n_d(d) as f64;
            let b = digamma(nd + gamma0) - digamma(gamma0);
            total += ln_gamma(gamma0) - ln_gamma(nd + gamma0) + (gamma0 - gamma) * b;
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct GibbsEmConfig {
    /// Samples per E-step.
    pub samples: usize,
    /// Sweeps between collected samples.
    pub thin: usize,
    /// Sweeps before the first E-step.
    pub burn_in: usize,
    pub max_outer: usize,
    pub inner_tol: f64,
    pub inner_max: usize,
    pub outer_tol: f64,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for GibbsEmConfig {
    fn default() -> Self {
        Self {
            samples: 5,
            thin: 10,
            burn_in: 200,
            max_outer: 50,
            inner_tol: 1e-6,
            inner_max: 1000,
            outer_tol: 1e-3,
            alpha: 1.0,
            seed: 0,
        }
    }
}

impl GibbsEmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 || self.max_outer == 0 {
            return Err(Error::domain("samples, thin and max_outer must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::domain("alpha must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmStep {
    pub outer: usize,
    pub eta: f64,
    pub gamma: f64,
}

/// Runs the M-step maps jointly (eta, then gamma) until both relative
/// changes fall below `tol`.
pub fn m_step(
    samples: &[EmSample],
    collection_of: &[usize],
    eta: f64,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(f64, f64)> {
    let counts: Vec<&CountStatistics> = samples.iter().map(|s| &s.counts).collect();
    let (mut eta, mut gamma) = (eta, gamma);
    for _ in 0..max_iter {
        let e = fixed_point_eta(&counts, eta)?;
        let g = fixed_point_gamma(samples, collection_of, gamma)?;
        let change = ((e - eta) / eta).abs().max(((g - gamma) / gamma).abs());
        eta = e;
        gamma = g;
        if change < tol {
            break;
        }
    }
    if !(eta > 0.0 && gamma > 0.0 && eta.is_finite() && gamma.is_finite()) {
        return Err(Error::numeric(format!("M-step left the domain: eta={eta}, gamma={gamma}")));
    }
    Ok((eta, gamma))
}

/// Trajectory of `(eta_t, gamma_t)`, starting with the initial values.
pub fn gibbs_em_run(
    corpus: &Corpus,
    k: usize,
    config: &GibbsEmConfig,
    eta0: f64,
    gamma0: f64,
) -> Result<Vec<EmStep>> {
    config.validate()?;
    let mut h = Hyperparameters::new(config.alpha, gamma0, eta0)?;
    let mut chain = AgsChain::new(corpus, k, h, config.seed, Init::default())?;
    let mut path = vec![EmStep { outer: 0, eta: h.eta, gamma: h.gamma }];
    for _ in 0..config.burn_in {
        chain.step(corpus)?;
    }
    for outer in 1..=config.max_outer {
        chain.set_hyper(h);
        let mut samples = Vec::with_capacity(config.samples);
        for _ in 0..config.samples {
            for _ in 0..config.thin {
                chain.step(corpus)?;
            }
            samples.push(EmSample {
                counts: chain.counts().clone(),
                pi: chain.pi(),
            });
        }
        let (eta, gamma) = m_step(
            &samples,
            corpus.collections(),
            h.eta,
            h.gamma,
            config.inner_tol,
            config.inner_max,
        )?;
        let change = ((eta - h.eta) / h.eta).abs().max(((gamma - h.gamma) / h.gamma).abs());
        h = Hyperparameters { eta, gamma, ..h };
        path.push(EmStep { outer, eta, gamma });
        if change < config.outer_tol {
            break;
        }
    }
    Ok(path)
}

/// Independent replicates, one per seed, run on parallel threads.
pub fn gibbs_em_replicates(
    corpus: &Corpus,
    k: usize,
    config: &GibbsEmConfig,
    eta0: f64,
    gamma0: f64,
    seeds: &[u64],
) -> Result<Vec<Vec<EmStep>>> {
    thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = GibbsEmConfig { seed, ..config.clone() };
                scope.spawn(move || gibbs_em_run(corpus, k, &cfg, eta0, gamma0))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replicate thread panicked"))
            .collect()
    })
}
