//! Variational EM.
//!
//! The factorized family is `q(beta_k) = Dir(lambda_k)`, `q(pi_j) = Dir(a_j omega_j)`,
//! `q(theta_jd) = Dir(rho_jd)` and `q(z_jdi) = Mult(phi_jdi)`. The intractable
//! `E log Gamma(gamma pi_jk)` is replaced by an upper bound, so the reported
//! ELBO is a surrogate and is monitored on relative change only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::Hyperparameters;
use crate::numerics::{digamma, ln_gamma, sample_log_gamma, tetragamma, trigamma, Rng, SimplexVector};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationalParams {
    pub k: usize,
    /// `K x V` topic Dirichlets.
    pub lambda: Vec<Vec<f64>>,
    /// Scale of each collection Dirichlet.
    pub a: Vec<f64>,
    /// Base measure of each collection Dirichlet.
    pub omega: Vec<Vec<f64>>,
    /// Per-document Dirichlets.
    pub rho: Vec<Vec<f64>>,
    /// Per-document responsibilities, `n_d x K` row-major.
    pub phi: Vec<Vec<f64>>,
}

impl VariationalParams {
    /// `lambda_kv = eta + jitter * N_v / K`, `a_j = K alpha`, uniform `omega_j`,
    /// and `rho`, `phi` at their values under uniform responsibilities.
    pub fn init(rng: &mut Rng, corpus: &Corpus, k: usize, h: &Hyperparameters) -> Result<Self> {
        if k == 0 {
            return Err(Error::domain("K must be at least 1"));
        }
        h.validate()?;
        let counts = corpus.term_counts();
        let lambda = (0..k)
            .map(|_| {
                counts
                    .iter()
                    .map(|&n| {
                        let jitter = (sample_log_gamma(rng, 100.0)).exp() * 0.01;
                        h.eta + jitter * n as f64 / k as f64
                    })
                    .collect()
            })
            .collect();
        let omega = vec![vec![1.0 / k as f64; k]; corpus.num_collections()];
        let rho = corpus
            .docs()
            .iter()
            .map(|d| vec![h.gamma / k as f64 + d.len() as f64 / k as f64; k])
            .collect();
        let phi = corpus.docs().iter().map(|d| vec![1.0 / k as f64; d.len() * k]).collect();
        Ok(Self {
            k,
            lambda,
            a: vec![k as f64 * h.alpha; corpus.num_collections()],
            omega,
            rho,
            phi,
        })
    }

    /// `tau_j = a_j omega_j`.
    pub fn tau(&self, j: usize) -> Vec<f64> {
        self.omega[j].iter().map(|&w| self.a[j] * w).collect()
    }

    /// `E_q[pi_j] = omega_j`.
    pub fn pi_mean(&self) -> Vec<SimplexVector> {
        self.omega
            .iter()
            .map(|w| SimplexVector::new(w.clone()).expect("omega on the simplex"))
            .collect()
    }

    pub fn beta_mean(&self) -> Vec<SimplexVector> {
        self.lambda.iter().map(|l| normalized(l)).collect()
    }

    pub fn theta_mean(&self) -> Vec<SimplexVector> {
        self.rho.iter().map(|r| normalized(r)).collect()
    }

    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        let k = self.k;
        let pos = |v: &[f64]| v.iter().all(|&x| x > 0.0 && x.is_finite());
        let on_simplex = |v: &[f64]| pos(v) && (v.iter().sum::<f64>() - 1.0).abs() < 1e-9;
        let shapes = self.lambda.len() == k
            && self.lambda.iter().all(|l| l.len() == corpus.vocab_size() && pos(l))
            && self.a.len() == corpus.num_collections()
            && self.a.iter().all(|&a| a > 0.0 && a.is_finite())
            && self.omega.len() == corpus.num_collections()
            && self.omega.iter().all(|w| w.len() == k && on_simplex(w))
            && self.rho.len() == corpus.num_docs()
            && self.rho.iter().all(|r| r.len() == k && pos(r))
            && self.phi.len() == corpus.num_docs()
            && self
                .phi
                .iter()
                .zip(corpus.docs())
                .all(|(p, d)| p.len() == d.len() * k && p.chunks(k).all(on_simplex));
        if shapes {
            Ok(())
        } else {
            Err(Error::data("variational parameters are malformed"))
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn normalized(v: &[f64]) -> SimplexVector {
    let s: f64 = v.iter().sum();
    SimplexVector::new(v.iter().map(|x| x / s).collect()).expect("positive vector")
}

/// `Psi(lambda_kv) - Psi(lambda_k.)`, stored `K x V`.
#[derive(Clone, Debug)]
pub struct ExpectedLogBeta {
    k: usize,
    v: usize,
    values: Vec<f64>,
}

impl ExpectedLogBeta {
    pub fn new(lambda: &[Vec<f64>]) -> Self {
        let k = lambda.len();
        let v = lambda.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(k * v);
        for row in lambda {
            let total = digamma(row.iter().sum());
            values.extend(row.iter().map(|&l| digamma(l) - total));
        }
        Self { k, v, values }
    }

    pub fn get(&self, k: usize, w: u32) -> f64 {
        self.values[k * self.v + w as usize]
    }

    pub fn num_topics(&self) -> usize {
        self.k
    }
}

/// `E_q[log x_k] = Psi(p_k) - Psi(p.)` for `x ~ Dir(p)`.
pub fn expected_log(p: &[f64]) -> Vec<f64> {
    let total = digamma(p.iter().sum());
    p.iter().map(|&x| digamma(x) - total).collect()
}

/// `phi_dik ∝ exp(E log theta_dk + E log beta_{k,w_i})`, one row per token.
pub fn update_phi(words: &[u32], rho_d: &[f64], elog_beta: &ExpectedLogBeta) -> Vec<f64> {
    let k = rho_d.len();
    let elog_theta = expected_log(rho_d);
    let mut phi = Vec::with_capacity(words.len() * k);
    let mut row = vec![0.0; k];
    for &w in words {
        for (t, r) in row.iter_mut().enumerate() {
            *r = elog_theta[t] + elog_beta.get(t, w);
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = (*r - max).exp();
            sum += *r;
        }
        phi.extend(row.iter().map(|r| r / sum));
    }
    phi
}

/// `rho_dk = gamma omega_jk + sum_i phi_dik`.
pub fn update_rho(phi_d: &[f64], omega_j: &[f64], gamma: f64) -> Vec<f64> {
    let mut rho: Vec<f64> = omega_j.iter().map(|&w| gamma * w).collect();
    for row in phi_d.chunks(omega_j.len()) {
        for (r, p) in rho.iter_mut().zip(row) {
            *r += p;
        }
    }
    rho
}

/// `lambda_kv = eta + sum of phi_dik over tokens with w_di = v`.
pub fn update_lambda(corpus: &Corpus, phi: &[Vec<f64>], k: usize, eta: f64) -> Vec<Vec<f64>> {
    let mut lambda = vec![vec![eta; corpus.vocab_size()]; k];
    for (words, phi_d) in corpus.docs().iter().zip(phi) {
        for (&w, row) in words.iter().zip(phi_d.chunks(k)) {
            for (t, p) in row.iter().enumerate() {
                lambda[t][w as usize] += p;
            }
        }
    }
    lambda
}

/// Fit of one document: responsibilities, Dirichlet and sweeps used.
#[derive(Clone, Debug)]
pub struct DocFit {
    pub phi: Vec<f64>,
    pub rho: Vec<f64>,
    pub sweeps: usize,
}

/// Alternates [`update_phi`] and [`update_rho`] from
/// `rho = gamma omega_j + n_d / K` until the largest relative change of `rho`
/// drops below `tol` or `max_sweeps` is reached.
pub fn fit_document(
    words: &[u32],
    omega_j: &[f64],
    gamma: f64,
    elog_beta: &ExpectedLogBeta,
    tol: f64,
    max_sweeps: usize,
) -> DocFit {
    let k = omega_j.len();
    let mut rho: Vec<f64> = omega_j
        .iter()
        .map(|&w| gamma * w + words.len() as f64 / k as f64)
        .collect();
    let mut phi = Vec::new();
    let mut sweeps = 0;
    while sweeps < max_sweeps.max(1) {
        phi = update_phi(words, &rho, elog_beta);
        let next = update_rho(&phi, omega_j, gamma);
        sweeps += 1;
        let change = next
            .iter()
            .zip(&rho)
            .map(|(a, b)| (a - b).abs() / b)
            .fold(0.0, f64::max);
        rho = next;
        if change < tol {
            break;
        }
    }
    DocFit { phi, rho, sweeps }
}

/// Per-collection sufficient statistics of the `tau_j` objective.
#[derive(Clone, Debug, PartialEq)]
pub struct CollectionStats {
    /// `D_j`.
    pub docs: f64,
    /// `sum_d Psi(rho_jdk)`.
    pub psi_rho: Vec<f64>,
    /// `sum_d Psi(rho_jd.)`.
    pub psi_rho_total: f64,
}

impl CollectionStats {
    pub fn gather(rho: &[Vec<f64>], docs: &[usize], k: usize) -> Self {
        let mut psi_rho = vec![0.0; k];
        let mut psi_rho_total = 0.0;
        for &d in docs {
            for (s, &r) in psi_rho.iter_mut().zip(&rho[d]) {
                *s += digamma(r);
            }
            psi_rho_total += digamma(rho[d].iter().sum());
        }
        Self { docs: docs.len() as f64, psi_rho, psi_rho_total }
    }
}

/// Every bound term that involves `tau_j = a omega`: the prior and entropy
/// of `pi_j` plus the bounded `E log p(theta_jd | pi_j)` of its documents.
pub fn tau_objective(a: f64, omega: &[f64], s: &CollectionStats, alpha: f64, gamma: f64) -> f64 {
    let k = omega.len() as f64;
    let psi_a = digamma(a);
    let mut l = -ln_gamma(a)
        - s.docs * gamma * (k - 1.0) / a
        - (gamma - k) * (s.docs * (a.ln() - psi_a) + s.psi_rho_total);
    for (t, &w) in omega.iter().enumerate() {
        let aw = a * w;
        let psi_aw = digamma(aw);
        l += (alpha - aw) * (psi_aw - psi_a) + ln_gamma(aw);
        l -= s.docs * (ln_gamma(gamma * w) + (1.0 - gamma * w) * (aw.ln() - psi_aw))
            + (1.0 - gamma * w) * s.psi_rho[t];
    }
    l
}

fn omega_coefficient(a: f64, w: f64, s: &CollectionStats, alpha: f64, gamma: f64) -> f64 {
    alpha + s.docs - a * w - gamma * s.docs * w
}

/// Gradient of the separable `omega` objective.
pub fn omega_gradient(a: f64, omega: &[f64], s: &CollectionStats, alpha: f64, gamma: f64) -> Vec<f64> {
    omega
        .iter()
        .enumerate()
        .map(|(t, &w)| {
            let aw = a * w;
            a * trigamma(aw) * omega_coefficient(a, w, s, alpha, gamma) - gamma * s.docs * digamma(aw)
                + gamma * s.psi_rho[t]
                - s.docs * (gamma * digamma(gamma * w) + 1.0 / w - gamma - gamma * aw.ln())
        })
        .collect()
}

/// Diagonal Hessian of the separable `omega` objective.
pub fn omega_hessian(a: f64, omega: &[f64], s: &CollectionStats, alpha: f64, gamma: f64) -> Vec<f64> {
    omega
        .iter()
        .map(|&w| {
            let aw = a * w;
            a * a * tetragamma(aw) * omega_coefficient(a, w, s, alpha, gamma)
                - a * trigamma(aw) * (a + 2.0 * gamma * s.docs)
                - s.docs * (gamma * gamma * trigamma(gamma * w) - 1.0 / (w * w) - gamma / w)
        })
        .collect()
}

/// Newton step for a diagonal Hessian under `sum_k delta_k = 0`.
pub fn constrained_newton_step(g: &[f64], h: &[f64]) -> Vec<f64> {
    let num: f64 = g.iter().zip(h).map(|(g, h)| g / h).sum();
    let den: f64 = h.iter().map(|h| 1.0 / h).sum();
    let u = num / den;
    g.iter().zip(h).map(|(g, h)| u / h - g / h).collect()
}

pub fn a_gradient(a: f64, omega: &[f64], s: &CollectionStats, alpha: f64, gamma: f64) -> f64 {
    let k = omega.len() as f64;
    let tg_a = trigamma(a);
    omega
        .iter()
        .map(|&w| (w * trigamma(a * w) - tg_a) * omega_coefficient(a, w, s, alpha, gamma))
        .sum::<f64>()
        + (k - 1.0) * gamma * s.docs / (a * a)
}

pub fn a_hessian(a: f64, omega: &[f64], s: &CollectionStats, alpha: f64, gamma: f64) -> f64 {
    let k = omega.len() as f64;
    let (tg_a, qg_a) = (trigamma(a), tetragamma(a));
    omega
        .iter()
        .map(|&w| {
            (w * w * tetragamma(a * w) - qg_a) * omega_coefficient(a, w, s, alpha, gamma)
                - w * (w * trigamma(a * w) - tg_a)
        })
        .sum::<f64>()
        - 2.0 * (k - 1.0) * gamma * s.docs / (a * a * a)
}

const MAX_HALVINGS: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct TauFit {
    pub a: f64,
    pub omega: Vec<f64>,
    pub rounds: usize,
    /// Steps whose backtracking never found a feasible non-decreasing point.
    pub failures: usize,
}

/// Alternates a constrained Newton step on `omega` with a Newton step on
/// `a`. Each step is halved until it stays feasible and does not lower
/// [`tau_objective`]; a step that never qualifies is dropped.
pub fn update_tau(
    a0: f64,
    omega0: &[f64],
    s: &CollectionStats,
    alpha: f64,
    gamma: f64,
    tol: f64,
    max_rounds: usize,
) -> TauFit {
    let mut a = a0;
    let mut omega = omega0.to_vec();
    let mut failures = 0;
    let mut rounds = 0;
    let mut current = tau_objective(a, &omega, s, alpha, gamma);
    while rounds < max_rounds {
        rounds += 1;
        let mut change: f64 = 0.0;

        if omega.len() > 1 {
            let g = omega_gradient(a, &omega, s, alpha, gamma);
            let h = omega_hessian(a, &omega, s, alpha, gamma);
            let step = constrained_newton_step(&g, &h);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..MAX_HALVINGS {
                let cand: Vec<f64> = omega.iter().zip(&step).map(|(w, d)| w + t * d).collect();
                if cand.iter().all(|&w| w > 0.0) {
                    let value = tau_objective(a, &cand, s, alpha, gamma);
                    if value.is_finite() && value >= current {
                        change = change.max(
                            cand.iter().zip(&omega).map(|(c, w)| (c - w).abs() / w).fold(0.0, f64::max),
                        );
                        let total: f64 = cand.iter().sum();
                        omega = cand.into_iter().map(|w| w / total).collect();
                        current = tau_objective(a, &omega, s, alpha, gamma);
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                failures += 1;
            }
        }

        let g = a_gradient(a, &omega, s, alpha, gamma);
        let h = a_hessian(a, &omega, s, alpha, gamma);
        let step = if h < 0.0 { -g / h } else { g * a };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = a + t * step;
            if cand > 0.0 {
                let value = tau_objective(cand, &omega, s, alpha, gamma);
                if value.is_finite() && value >= current {
                    change = change.max((cand - a).abs() / a);
                    a = cand;
                    current = value;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            failures += 1;
        }
        if change < tol {
            break;
        }
    }
    TauFit { a, omega, rounds, failures }
}

/// Bound terms `E log p - E log q`, one field per factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ElboReport {
    pub iteration: usize,
    pub log_p_beta: f64,
    pub log_p_pi: f64,
    pub log_p_theta: f64,
    pub log_p_z: f64,
    pub log_p_w: f64,
    pub entropy_beta: f64,
    pub entropy_pi: f64,
    pub entropy_theta: f64,
    pub entropy_z: f64,
    pub total: f64,
}

impl ElboReport {
    pub const COLUMNS: [&'static str; 9] = [
        "log_p_beta",
        "log_p_pi",
        "log_p_theta",
        "log_p_z",
        "log_p_w",
        "entropy_beta",
        "entropy_pi",
        "entropy_theta",
        "entropy_z",
    ];

    pub fn terms(&self) -> [f64; 9] {
        [
            self.log_p_beta,
            self.log_p_pi,
            self.log_p_theta,
            self.log_p_z,
            self.log_p_w,
            self.entropy_beta,
            self.entropy_pi,
            self.entropy_theta,
            self.entropy_z,
        ]
    }
}

/// `E_q[log Dir(x | c, ..., c)]` for `x ~ Dir(p)`.
fn symmetric_dirichlet_expectation(c: f64, p: &[f64]) -> f64 {
    let n = p.len() as f64;
    ln_gamma(n * c) - n * ln_gamma(c) + (c - 1.0) * expected_log(p).iter().sum::<f64>()
}

/// Entropy of `Dir(p)`.
pub fn dirichlet_entropy(p: &[f64]) -> f64 {
    let total: f64 = p.iter().sum();
    let el = expected_log(p);
    -(ln_gamma(total) - p.iter().map(|&x| ln_gamma(x)).sum::<f64>()
        + p.iter().zip(&el).map(|(&x, e)| (x - 1.0) * e).sum::<f64>())
}

/// Bounded `E log p(theta_d | pi_j)` under `q(pi_j) = Dir(tau_j)`.
pub fn theta_prior_bound(tau: &[f64], rho_d: &[f64], gamma: f64) -> f64 {
    let k = tau.len() as f64;
    let tau_total: f64 = tau.iter().sum();
    let mut l = ln_gamma(gamma)
        - gamma / tau_total * (k - 1.0)
        - (gamma - k) * (tau_total.ln() - digamma(tau_total) + digamma(rho_d.iter().sum()));
    for (&t, &r) in tau.iter().zip(rho_d) {
        let m = gamma * t / tau_total;
        l -= ln_gamma(m) + (1.0 - m) * (t.ln() - digamma(t) + digamma(r));
    }
    l
}

struct DocTerms {
    log_p_theta: f64,
    log_p_z: f64,
    log_p_w: f64,
    entropy_theta: f64,
    entropy_z: f64,
}

pub fn compute_elbo(corpus: &Corpus, params: &VariationalParams, h: &Hyperparameters) -> Result<ElboReport> {
    let k = params.k;
    let elog_beta = ExpectedLogBeta::new(&params.lambda);
    let mut r = ElboReport::default();
    for l in &params.lambda {
        r.log_p_beta += symmetric_dirichlet_expectation(h.eta, l);
        r.entropy_beta += dirichlet_entropy(l);
    }
    let taus: Vec<Vec<f64>> = (0..corpus.num_collections()).map(|j| params.tau(j)).collect();
    for tau in &taus {
        r.log_p_pi += symmetric_dirichlet_expectation(h.alpha, tau);
        r.entropy_pi += dirichlet_entropy(tau);
    }
    let docs: Vec<DocTerms> = (0..corpus.num_docs())
        .into_par_iter()
        .map(|d| {
            let rho = &params.rho[d];
            let el = expected_log(rho);
            let mut t = DocTerms {
                log_p_theta: theta_prior_bound(&taus[corpus.collection_of(d)], rho, h.gamma),
                log_p_z: 0.0,
                log_p_w: 0.0,
                entropy_theta: dirichlet_entropy(rho),
                entropy_z: 0.0,
            };
            for (&w, row) in corpus.doc(d).iter().zip(params.phi[d].chunks(k)) {
                for (topic, &p) in row.iter().enumerate() {
                    if p > 0.0 {
                        t.log_p_z += p * el[topic];
                        t.log_p_w += p * elog_beta.get(topic, w);
                        t.entropy_z -= p * p.ln();
                    }
                }
            }
            t
        })
        .collect();
    for t in docs {
        r.log_p_theta += t.log_p_theta;
        r.log_p_z += t.log_p_z;
        r.log_p_w += t.log_p_w;
        r.entropy_theta += t.entropy_theta;
        r.entropy_z += t.entropy_z;
    }
    for (name, value) in ElboReport::COLUMNS.iter().zip(r.terms()) {
        if !value.is_finite() {
            return Err(Error::numeric(format!("ELBO term {name} is not finite")));
        }
    }
    r.total = r.terms().iter().sum();
    Ok(r)
}

/// Which hyperparameters the M-step re-estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperFlags {
    pub alpha: bool,
    pub gamma: bool,
    pub eta: bool,
}

impl HyperFlags {
    pub fn all() -> Self {
        Self { alpha: true, gamma: true, eta: true }
    }

    pub fn any(&self) -> bool {
        self.alpha || self.gamma || self.eta
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VemConfig {
    pub max_iterations: usize,
    pub tol: f64,
    pub estep_tol: f64,
    pub estep_max: usize,
    pub tau_tol: f64,
    pub tau_max: usize,
    pub optimize: HyperFlags,
    pub seed: u64,
}

impl VemConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            max_iterations: 200,
            tol: 1e-5,
            estep_tol: 1e-6,
            estep_max: 50,
            tau_tol: 1e-8,
            tau_max: 100,
            optimize: HyperFlags::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || self.estep_max == 0 || self.tau_max == 0 {
            return Err(Error::domain("VEM iteration limits must be positive"));
        }
        if !(self.tol > 0.0 && self.estep_tol > 0.0 && self.tau_tol > 0.0) {
            return Err(Error::domain("VEM tolerances must be positive"));
        }
        Ok(())
    }
}

/// Maximizes a concave-ish scalar function of a positive argument by Newton
/// steps, falling back to a scaled gradient step where the curvature is not
/// negative, and halving each step until it stays positive and does not
/// decrease `f`.
pub fn newton_positive(
    x0: f64,
    f: impl Fn(f64) -> f64,
    grad: impl Fn(f64) -> f64,
    hess: impl Fn(f64) -> f64,
    tol: f64,
    max_iter: usize,
) -> f64 {
    let mut x = x0;
    let mut fx = f(x);
    for _ in 0..max_iter {
        let g = grad(x);
        let h = hess(x);
        let step = if h < 0.0 { -g / h } else { g * x };
        let mut t = 1.0;
        let mut moved = None;
        for _ in 0..MAX_HALVINGS {
            let cand = x + t * step;
            if cand > 0.0 {
                let fc = f(cand);
                if fc.is_finite() && fc >= fx {
                    moved = Some((cand, fc));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = moved else { break };
        let rel = (cand - x).abs() / x;
        x = cand;
        fx = fc;
        if rel < tol {
            break;
        }
    }
    x
}

/// Bound terms that depend on `alpha`.
pub fn alpha_objective(alpha: f64, taus: &[Vec<f64>]) -> f64 {
    taus.iter().map(|t| symmetric_dirichlet_expectation(alpha, t)).sum()
}

pub fn alpha_gradient(alpha: f64, taus: &[Vec<f64>]) -> f64 {
    taus.iter()
        .map(|t| {
            let k = t.len() as f64;
            k * (digamma(k * alpha) - digamma(alpha)) + expected_log(t).iter().sum::<f64>()
        })
        .sum()
}

pub fn alpha_hessian(alpha: f64, taus: &[Vec<f64>]) -> f64 {
    taus.iter()
        .map(|t| {
            let k = t.len() as f64;
            k * k * trigamma(k * alpha) - k * trigamma(alpha)
        })
        .sum()
}

/// Bound terms that depend on `gamma`.
pub fn gamma_objective(gamma: f64, corpus: &Corpus, taus: &[Vec<f64>], rho: &[Vec<f64>]) -> f64 {
    (0..corpus.num_docs())
        .map(|d| theta_prior_bound(&taus[corpus.collection_of(d)], &rho[d], gamma))
        .sum()
}

pub fn gamma_gradient(gamma: f64, corpus: &Corpus, taus: &[Vec<f64>], rho: &[Vec<f64>]) -> f64 {
    let mut g = 0.0;
    for d in 0..corpus.num_docs() {
        let tau = &taus[corpus.collection_of(d)];
        let k = tau.len() as f64;
        let total: f64 = tau.iter().sum();
        let r = &rho[d];
        g += digamma(gamma) - (k - 1.0) / total - (total.ln() - digamma(total) + digamma(r.iter().sum()));
        for (&t, &rk) in tau.iter().zip(r) {
            let m = t / total;
            g -= m * (digamma(gamma * m) - (t.ln() - digamma(t) + digamma(rk)));
        }
    }
    g
}

pub fn gamma_hessian(gamma: f64, corpus: &Corpus, taus: &[Vec<f64>]) -> f64 {
    let mut h = 0.0;
    for d in 0..corpus.num_docs() {
        let tau = &taus[corpus.collection_of(d)];
        let total: f64 = tau.iter().sum();
        h += trigamma(gamma);
        for &t in tau {
            let m = t / total;
            h -= m * m * trigamma(gamma * m);
        }
    }
    h
}

/// Bound terms that depend on `eta`.
pub fn eta_objective(eta: f64, lambda: &[Vec<f64>]) -> f64 {
    lambda.iter().map(|l| symmetric_dirichlet_expectation(eta, l)).sum()
}

pub fn eta_gradient(eta: f64, lambda: &[Vec<f64>]) -> f64 {
    lambda
        .iter()
        .map(|l| {
            let v = l.len() as f64;
            v * (digamma(v * eta) - digamma(eta)) + expected_log(l).iter().sum::<f64>()
        })
        .sum()
}

pub fn eta_hessian(eta: f64, lambda: &[Vec<f64>]) -> f64 {
    lambda
        .iter()
        .map(|l| {
            let v = l.len() as f64;
            v * v * trigamma(v * eta) - v * trigamma(eta)
        })
        .sum()
}

#[derive(Clone, Debug)]
pub struct VemFit {
    pub params: VariationalParams,
    pub hyper: Hyperparameters,
    pub history: Vec<ElboReport>,
    /// `omega` after every outer iteration.
    pub pi_path: Vec<Vec<Vec<f64>>>,
    pub seconds: Vec<f64>,
    pub hyper_path: Vec<Hyperparameters>,
    pub converged: bool,
    pub tau_failures: usize,
}

impl VemFit {
    pub fn elbo_csv(&self) -> String {
        let mut out = String::from("iteration");
        for c in ElboReport::COLUMNS {
            write!(out, ",{c}").unwrap();
        }
        out.push_str(",total,alpha,gamma,eta,seconds\n");
        for ((r, h), s) in self.history.iter().zip(&self.hyper_path).zip(&self.seconds) {
            write!(out, "{}", r.iteration).unwrap();
            for x in r.terms() {
                write!(out, ",{x}").unwrap();
            }
            writeln!(out, ",{},{},{},{},{}", r.total, h.alpha, h.gamma, h.eta, s).unwrap();
        }
        out
    }

    pub fn pi_csv(&self) -> String {
        let mut out = String::from("iteration,collection");
        for t in 1..=self.params.k {
            write!(out, ",pi_{t}").unwrap();
        }
        out.push('\n');
        for (r, pis) in self.history.iter().zip(&self.pi_path) {
            for (j, p) in pis.iter().enumerate() {
                write!(out, "{},{}", r.iteration, j + 1).unwrap();
                for x in p {
                    write!(out, ",{x}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }
}

/// VEM with fixed or re-estimated hyperparameters.
pub fn vem_run(corpus: &Corpus, k: usize, h: Hyperparameters, config: &VemConfig) -> Result<VemFit> {
    config.validate()?;
    let mut rng = Rng::new(config.seed);
    let mut params = VariationalParams::init(&mut rng, corpus, k, &h)?;
    let mut h = h;
    let start = Instant::now();
    let mut fit = VemFit {
        params: params.clone(),
        hyper: h,
        history: Vec::new(),
        pi_path: Vec::new(),
        seconds: Vec::new(),
        hyper_path: Vec::new(),
        converged: false,
        tau_failures: 0,
    };
    let mut previous: Option<f64> = None;
    for it in 1..=config.max_iterations {
        let elog_beta = ExpectedLogBeta::new(&params.lambda);
        let fits: Vec<DocFit> = (0..corpus.num_docs())
            .into_par_iter()
            .map(|d| {
                fit_document(
                    corpus.doc(d),
                    &params.omega[corpus.collection_of(d)],
                    h.gamma,
                    &elog_beta,
                    config.estep_tol,
                    config.estep_max,
                )
            })
            .collect();
        for (d, f) in fits.into_iter().enumerate() {
            params.phi[d] = f.phi;
            params.rho[d] = f.rho;
        }
        params.lambda = update_lambda(corpus, &params.phi, k, h.eta);

        let taus: Vec<TauFit> = (0..corpus.num_collections())
            .into_par_iter()
            .map(|j| {
                let s = CollectionStats::gather(&params.rho, corpus.members(j), k);
                update_tau(params.a[j], &params.omega[j], &s, h.alpha, h.gamma, config.tau_tol, config.tau_max)
            })
            .collect();
        for (j, t) in taus.into_iter().enumerate() {
            fit.tau_failures += t.failures;
            params.a[j] = t.a;
            params.omega[j] = t.omega;
        }

        if config.optimize.any() {
            let taus: Vec<Vec<f64>> = (0..corpus.num_collections()).map(|j| params.tau(j)).collect();
            let (tol, max) = (1e-8, 100);
            if config.optimize.alpha {
                h.alpha = newton_positive(
                    h.alpha,
                    |x| alpha_objective(x, &taus),
                    |x| alpha_gradient(x, &taus),
                    |x| alpha_hessian(x, &taus),
                    tol,
                    max,
                );
            }
            if config.optimize.gamma {
                let rho = &params.rho;
                h.gamma = newton_positive(
                    h.gamma,
                    |x| gamma_objective(x, corpus, &taus, rho),
                    |x| gamma_gradient(x, corpus, &taus, rho),
                    |x| gamma_hessian(x, corpus, &taus),
                    tol,
                    max,
                );
            }
            if config.optimize.eta {
                let lambda = &params.lambda;
                h.eta = newton_positive(
                    h.eta,
                    |x| eta_objective(x, lambda),
                    |x| eta_gradient(x, lambda),
                    |x| eta_hessian(x, lambda),
                    tol,
                    max,
                );
            }
            h.validate()?;
        }

        let mut report = compute_elbo(corpus, &params, &h)?;
        report.iteration = it;
        fit.history.push(report);
        fit.pi_path.push(params.omega.clone());
        fit.hyper_path.push(h);
        fit.seconds.push(start.elapsed().as_secs_f64());
        if let Some(prev) = previous {
            if ((report.total - prev) / prev.abs().max(f64::MIN_POSITIVE)).abs() < config.tol {
                fit.converged = true;
                break;
            }
        }
        previous = Some(report.total);
    }
    fit.params = params;
    fit.hyper = h;
    Ok(fit)
}
