//! Manifold MALA within Gibbs.
//!
//! Each `pi_j` is represented by unconstrained `varphi_j` with
//! `pi_jk = |varphi_jk| / sum_k |varphi_jk|` and a `Gamma(alpha, 1)` prior
//! on every `|varphi_jk|`. After each label sweep every `varphi_j` takes one
//! Metropolis-adjusted Langevin step under the metric `diag(|varphi|)^-1`.

use serde::{Deserialize, Serialize};

use crate::ags::{initial_state, priors, Init};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::gibbs::CollapsedState;
use crate::model::{
    finite_or, log_collapsed, Checkpoint, CountStatistics, Hyperparameters, CHECKPOINT_VERSION,
};
use crate::numerics::{digamma, ln_gamma, sample_log_gamma, sample_std_normal, sample_uniform, Rng, SimplexVector};
use crate::trace::{drive, Chain, ChainTrace, SamplerConfig, StepInfo};

/// Smallest magnitude a coordinate of `varphi` may take.
pub const VARPHI_FLOOR: f64 = 1e-10;

/// Topic counts `n_jdk` of the documents in one collection.
#[derive(Clone, Debug, PartialEq)]
pub struct DocCounts {
    k: usize,
    rows: Vec<u32>,
}

impl DocCounts {
    pub fn new(k: usize, rows: Vec<u32>) -> Self {
        assert_eq!(rows.len() % k, 0);
        Self { k, rows }
    }

    pub fn gather(counts: &CountStatistics, docs: &[usize]) -> Self {
        let k = counts.num_topics();
        let mut rows = Vec::with_capacity(docs.len() * k);
        for &d in docs {
            rows.extend_from_slice(counts.doc_row(d));
        }
        Self { k, rows }
    }

    fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.rows.chunks(self.k)
    }
}

fn magnitudes(varphi: &[f64]) -> Vec<f64> {
    varphi.iter().map(|x| x.abs().max(VARPHI_FLOOR)).collect()
}

fn sign(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// `pi_k = |varphi_k| / sum |varphi|`.
pub fn varphi_to_pi(varphi: &[f64]) -> SimplexVector {
    SimplexVector::new(magnitudes(varphi)).expect("positive magnitudes")
}

/// Log conditional density of `varphi_j` given the labels, up to a constant.
pub fn log_target_varphi(varphi: &[f64], counts: &DocCounts, h: &Hyperparameters) -> f64 {
    let abs = magnitudes(varphi);
    let total: f64 = abs.iter().sum();
    let a: Vec<f64> = abs.iter().map(|x| h.gamma * x / total).collect();
    let lg: Vec<f64> = a.iter().map(|&x| ln_gamma(x)).collect();
    let mut data = 0.0;
    for row in counts.rows() {
        for (t, &n) in row.iter().enumerate() {
            if n > 0 {
                data += ln_gamma(a[t] + n as f64) - lg[t];
            }
        }
    }
    let prior: f64 = abs.iter().map(|&x| (h.alpha - 1.0) * x.ln() - x).sum();
    data + prior
}

/// Gradient of [`log_target_varphi`].
pub fn grad_log_target(varphi: &[f64], counts: &DocCounts, h: &Hyperparameters) -> Vec<f64> {
    let abs = magnitudes(varphi);
    let total: f64 = abs.iter().sum();
    let k = abs.len();
    let a: Vec<f64> = abs.iter().map(|x| h.gamma * x / total).collect();
    let psi: Vec<f64> = a.iter().map(|&x| digamma(x)).collect();
    let mut big_a = vec![0.0; k];
    for row in counts.rows() {
        for (t, &n) in row.iter().enumerate() {
            if n > 0 {
                big_a[t] += digamma(a[t] + n as f64) - psi[t];
            }
        }
    }
    let weighted: f64 = abs.iter().zip(&big_a).map(|(x, y)| x * y).sum();
    (0..k)
        .map(|t| {
            sign(varphi[t])
                * (h.gamma * big_a[t] / total - h.gamma * weighted / (total * total)
                    + (h.alpha - 1.0) / abs[t]
                    - 1.0)
        })
        .collect()
}

/// Mean of the Langevin proposal from `varphi`.
pub fn mmala_drift(varphi: &[f64], grad: &[f64], eps: f64) -> Vec<f64> {
    let half = 0.5 * eps * eps;
    varphi
        .iter()
        .zip(grad)
        .map(|(&x, &g)| x + half * x.abs().max(VARPHI_FLOOR) * g + half * sign(x))
        .collect()
}

/// `ln N(to; drift(from), eps^2 diag(|from|))`.
pub fn log_transition(from: &[f64], grad_from: &[f64], to: &[f64], eps: f64) -> f64 {
    let mu = mmala_drift(from, grad_from, eps);
    let var_scale = eps * eps;
    from.iter()
        .zip(&mu)
        .zip(to)
        .map(|((&x, &m), &y)| {
            let var = var_scale * x.abs().max(VARPHI_FLOOR);
            -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (y - m) * (y - m) / (2.0 * var)
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Proposal {
    pub varphi: Vec<f64>,
    /// Standard normal draws used to build the proposal.
    pub xi: Vec<f64>,
    pub log_forward: f64,
    pub log_reverse: f64,
}

fn floor_coordinate(x: f64) -> f64 {
    if x.abs() < VARPHI_FLOOR {
        VARPHI_FLOOR * sign(x)
    } else {
        x
    }
}

/// Draws `varphi* = mu + eps sqrt(|varphi|) xi` and evaluates both
/// transition densities.
pub fn mmala_propose(
    rng: &mut Rng,
    varphi: &[f64],
    counts: &DocCounts,
    h: &Hyperparameters,
    eps: f64,
) -> Proposal {
    let grad = grad_log_target(varphi, counts, h);
    let mu = mmala_drift(varphi, &grad, eps);
    let xi: Vec<f64> = varphi.iter().map(|_| sample_std_normal(rng)).collect();
    let star: Vec<f64> = varphi
        .iter()
        .zip(&mu)
        .zip(&xi)
        .map(|((&x, &m), &z)| floor_coordinate(m + eps * x.abs().max(VARPHI_FLOOR).sqrt() * z))
        .collect();
    let log_forward = log_transition(varphi, &grad, &star, eps);
    let grad_star = grad_log_target(&star, counts, h);
    let log_reverse = log_transition(&star, &grad_star, varphi, eps);
    Proposal {
        varphi: star,
        xi,
        log_forward,
        log_reverse,
    }
}

/// Log Metropolis-Hastings ratio for moving from `current` to `proposal`.
pub fn log_acceptance(current: &[f64], proposal: &Proposal, counts: &DocCounts, h: &Hyperparameters) -> f64 {
    log_target_varphi(&proposal.varphi, counts, h) - log_target_varphi(current, counts, h)
        + proposal.log_reverse
        - proposal.log_forward
}

/// Outcome of one MH step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub accepted: bool,
    /// `min(1, a)`.
    pub accept_prob: f64,
    pub log_ratio: f64,
    pub uniform: f64,
}

/// One MMALA step on `varphi` in place.
pub fn mgs_step(
    rng: &mut Rng,
    varphi: &mut Vec<f64>,
    counts: &DocCounts,
    h: &Hyperparameters,
    eps: f64,
) -> Result<StepOutcome> {
    let proposal = mmala_propose(rng, varphi, counts, h, eps);
    let log_ratio = log_acceptance(varphi, &proposal, counts, h);
    let uniform = sample_uniform(rng);
    let (accepted, accept_prob) = if log_ratio.is_nan() {
        (false, 0.0)
    } else {
        (uniform.ln() < log_ratio, log_ratio.min(0.0).exp())
    };
    if accepted {
        *varphi = proposal.varphi;
    }
    finite_or(log_target_varphi(varphi, counts, h), "varphi log target")?;
    Ok(StepOutcome { accepted, accept_prob, log_ratio, uniform })
}

/// Dual-averaging step-size adaptation targeting a fixed acceptance rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualAveraging {
    pub target: f64,
    pub mu: f64,
    pub h_bar: f64,
    pub log_eps_bar: f64,
    pub t: u64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    pub fn new(eps0: f64, target: f64) -> Self {
        Self {
            target,
            mu: (10.0 * eps0).ln(),
            h_bar: 0.0,
            log_eps_bar: eps0.ln(),
            t: 0,
        }
    }

    /// Records one acceptance probability and returns the next step size.
    pub fn update(&mut self, accept_prob: f64) -> f64 {
        self.t += 1;
        let t = self.t as f64;
        let w = 1.0 / (t + Self::T0);
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept_prob);
        let log_eps = self.mu - t.sqrt() / Self::GAMMA * self.h_bar;
        let decay = t.powf(-Self::KAPPA);
        self.log_eps_bar = decay * log_eps + (1.0 - decay) * self.log_eps_bar;
        log_eps.exp()
    }

    /// The averaged step size used once adaptation stops.
    pub fn final_eps(&self) -> f64 {
        self.log_eps_bar.exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MgsConfig {
    pub sampler: SamplerConfig,
    /// Initial (or fixed) step size.
    pub epsilon: f64,
    /// Adapt the step size during burn-in.
    pub adapt: bool,
    pub target_accept: f64,
}

impl MgsConfig {
    pub fn new(sampler: SamplerConfig) -> Self {
        Self {
            sampler,
            epsilon: 0.01,
            adapt: true,
            target_accept: 0.574,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MgsDiagnostics {
    pub proposals: u64,
    pub accepts: u64,
}

impl MgsDiagnostics {
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepts as f64 / self.proposals as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MgsExtra {
    epsilon: Vec<f64>,
    adaptation: Vec<DualAveraging>,
    diagnostics: MgsDiagnostics,
    config: MgsConfig,
}

#[derive(Clone, Debug)]
pub struct MgsChain {
    h: Hyperparameters,
    state: CollapsedState,
    varphi: Vec<Vec<f64>>,
    pi: Vec<SimplexVector>,
    epsilon: Vec<f64>,
    adaptation: Vec<DualAveraging>,
    diagnostics: MgsDiagnostics,
    config: MgsConfig,
    rng: Rng,
    iteration: usize,
}

impl MgsChain {
    pub fn new(corpus: &Corpus, k: usize, h: Hyperparameters, config: MgsConfig, init: Init) -> Result<Self> {
        h.validate()?;
        if !(config.epsilon > 0.0) {
            return Err(Error::domain("epsilon must be positive"));
        }
        let mut rng = Rng::new(config.sampler.seed);
        let given_pi = init.pi.clone();
        let (state, _) = initial_state(&mut rng, corpus, k, h.alpha, Init { z: init.z, pi: None })?;
        let varphi: Vec<Vec<f64>> = match given_pi {
            Some(pi) => {
                if pi.len() != corpus.num_collections() || pi.iter().any(|p| p.dim() != k) {
                    return Err(Error::data("initial pi has the wrong shape"));
                }
                pi.iter().map(|p| p.iter().map(|&x| x.max(VARPHI_FLOOR)).collect()).collect()
            }
            None => (0..corpus.num_collections())
                .map(|_| {
                    (0..k)
                        .map(|_| sample_log_gamma(&mut rng, h.alpha).exp().max(VARPHI_FLOOR))
                        .collect()
                })
                .collect(),
        };
        let pi = varphi.iter().map(|v| varphi_to_pi(v)).collect();
        let j = corpus.num_collections();
        Ok(Self {
            h,
            state,
            varphi,
            pi,
            epsilon: vec![config.epsilon; j],
            adaptation: vec![DualAveraging::new(config.epsilon, config.target_accept); j],
            diagnostics: MgsDiagnostics::default(),
            config,
            rng,
            iteration: 0,
        })
    }

    pub fn from_checkpoint(corpus: &Corpus, cp: &Checkpoint) -> Result<Self> {
        if cp.algo != "mgs" {
            return Err(Error::data(format!("checkpoint is for {}, not mgs", cp.algo)));
        }
        let varphi = cp
            .varphi
            .clone()
            .ok_or_else(|| Error::data("mgs checkpoint lacks varphi"))?;
        let extra: MgsExtra = serde_json::from_value(
            cp.extra.clone().ok_or_else(|| Error::data("mgs checkpoint lacks sampler state"))?,
        )?;
        Ok(Self {
            h: cp.hyper,
            state: CollapsedState::from_z(corpus, cp.k, cp.z.clone())?,
            pi: varphi.iter().map(|v| varphi_to_pi(v)).collect(),
            varphi,
            epsilon: extra.epsilon,
            adaptation: extra.adaptation,
            diagnostics: extra.diagnostics,
            config: extra.config,
            rng: Rng::from_state(&cp.rng)?,
            iteration: cp.iteration,
        })
    }

    pub fn diagnostics(&self) -> MgsDiagnostics {
        self.diagnostics
    }

    pub fn epsilon(&self) -> &[f64] {
        &self.epsilon
    }

    pub fn varphi(&self) -> &[Vec<f64>] {
        &self.varphi
    }
}

impl Chain for MgsChain {
    fn algo(&self) -> &'static str {
        "mgs"
    }

    fn hyper(&self) -> Hyperparameters {
        self.h
    }

    fn num_topics(&self) -> usize {
        self.state.num_topics()
    }

    fn iteration(&self) -> usize {
        self.iteration
    }

    fn step(&mut self, corpus: &Corpus) -> Result<StepInfo> {
        let priors = priors(&self.pi, self.h.gamma);
        self.state.sweep(&mut self.rng, corpus, &priors, self.h.eta);
        let adapting = self.config.adapt && self.iteration < self.config.sampler.burn_in;
        for j in 0..corpus.num_collections() {
            let counts = DocCounts::gather(self.state.counts(), corpus.members(j));
            let out = mgs_step(&mut self.rng, &mut self.varphi[j], &counts, &self.h, self.epsilon[j])?;
            self.diagnostics.proposals += 1;
            self.diagnostics.accepts += out.accepted as u64;
            if adapting {
                let next = self.adaptation[j].update(out.accept_prob);
                self.epsilon[j] = if self.iteration + 1 == self.config.sampler.burn_in {
                    self.adaptation[j].final_eps()
                } else {
                    next
                };
            }
            self.pi[j] = varphi_to_pi(&self.varphi[j]);
        }
        self.iteration += 1;
        let log_joint = log_collapsed(corpus, self.state.counts(), &self.pi, &self.h)?;
        let mean_eps = self.epsilon.iter().sum::<f64>() / self.epsilon.len() as f64;
        Ok(StepInfo {
            log_joint,
            acceptance_rate: Some(self.diagnostics.acceptance_rate()),
            epsilon: Some(mean_eps),
        })
    }

    fn pi(&self) -> Vec<SimplexVector> {
        self.pi.clone()
    }

    fn z(&self) -> &[Vec<u32>] {
        self.state.z()
    }

    fn checkpoint(&self) -> Checkpoint {
        let extra = MgsExtra {
            epsilon: self.epsilon.clone(),
            adaptation: self.adaptation.clone(),
            diagnostics: self.diagnostics,
            config: self.config.clone(),
        };
        Checkpoint {
            version: CHECKPOINT_VERSION,
            algo: "mgs".into(),
            hyper: self.h,
            k: self.num_topics(),
            iteration: self.iteration,
            z: self.state.z().to_vec(),
            pi: self.pi.iter().map(|p| p.to_vec()).collect(),
            varphi: Some(self.varphi.clone()),
            extra: Some(serde_json::to_value(extra).expect("serializable")),
            rng: self.rng.state(),
        }
    }
}

pub fn run(corpus: &Corpus, k: usize, h: Hyperparameters, config: &MgsConfig, init: Init) -> Result<ChainTrace> {
    config.sampler.validate()?;
    let mut chain = MgsChain::new(corpus, k, h, config.clone(), init)?;
    drive(&mut chain, corpus, &config.sampler)
}
