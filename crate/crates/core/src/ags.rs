//! Augmented Gibbs sampler.
//!
//! Every iteration sweeps the topic labels with `pi` fixed, then draws the
//! table counts `s_jdk` by Antoniak's Bernoulli construction and refreshes
//! each `pi_j ~ Dir(sum_d s_jd + alpha)`. `theta` and `beta` stay collapsed.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::gibbs::CollapsedState;
use crate::model::{log_collapsed, Checkpoint, CountStatistics, Hyperparameters, CHECKPOINT_VERSION};
use crate::numerics::{sample_dirichlet, sample_uniform, Rng, SimplexVector};
use crate::trace::{drive, Chain, ChainTrace, SamplerConfig, StepInfo};

pub use crate::gibbs::z_conditional_weights;

/// Table count for `n` customers at concentration `c`: the number of
/// successes among Bernoulli trials with probabilities `c / (c + l - 1)`,
/// `l = 1..=n`.
pub fn antoniak_sample(rng: &mut Rng, n: u32, c: f64) -> u32 {
    debug_assert!(c > 0.0);
    let mut s = 0;
    for l in 0..n {
        if sample_uniform(rng) * (c + l as f64) < c {
            s += 1;
        }
    }
    s
}

/// `s_jdk` for every document of one collection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuxiliaryTables {
    k: usize,
    s: Vec<u32>,
}

impl AuxiliaryTables {
    pub fn sample(
        rng: &mut Rng,
        counts: &CountStatistics,
        docs: &[usize],
        pi_j: &[f64],
        gamma: f64,
    ) -> Self {
        let k = counts.num_topics();
        let mut s = Vec::with_capacity(docs.len() * k);
        for &d in docs {
            for (t, &n) in counts.doc_row(d).iter().enumerate() {
                s.push(antoniak_sample(rng, n, gamma * pi_j[t]));
            }
        }
        Self { k, s }
    }

    pub fn get(&self, i: usize, k: usize) -> u32 {
        self.s[i * self.k + k]
    }

    /// `sum_d s_jdk` per topic.
    pub fn totals(&self) -> Vec<u64> {
        let mut tot = vec![0u64; self.k];
        for row in self.s.chunks(self.k) {
            for (a, &x) in tot.iter_mut().zip(row) {
                *a += x as u64;
            }
        }
        tot
    }
}

/// `pi_j ~ Dir(s_totals + alpha)`.
pub fn sample_pi(rng: &mut Rng, s_totals: &[u64], alpha: f64) -> Result<SimplexVector> {
    let params: Vec<f64> = s_totals.iter().map(|&s| s as f64 + alpha).collect();
    sample_dirichlet(rng, &params)
}

/// Optional starting point for a chain.
#[derive(Clone, Debug, Default)]
pub struct Init {
    pub z: Option<Vec<Vec<u32>>>,
    pub pi: Option<Vec<SimplexVector>>,
}

pub(crate) fn initial_state(
    rng: &mut Rng,
    corpus: &Corpus,
    k: usize,
    alpha: f64,
    init: Init,
) -> Result<(CollapsedState, Vec<SimplexVector>)> {
    if k == 0 {
        return Err(Error::domain("K must be at least 1"));
    }
    let state = match init.z {
        Some(z) => CollapsedState::from_z(corpus, k, z)?,
        None => CollapsedState::random(rng, corpus, k),
    };
    let pi = match init.pi {
        Some(pi) => {
            if pi.len() != corpus.num_collections() || pi.iter().any(|p| p.dim() != k) {
                return Err(Error::data("initial pi has the wrong shape"));
            }
            pi
        }
        None => (0..corpus.num_collections())
            .map(|_| sample_dirichlet(rng, &vec![alpha; k]))
            .collect::<Result<_>>()?,
    };
    Ok((state, pi))
}

pub(crate) fn priors(pi: &[SimplexVector], gamma: f64) -> Vec<Vec<f64>> {
    pi.iter().map(|p| p.iter().map(|&x| gamma * x).collect()).collect()
}

#[derive(Clone, Debug)]
pub struct AgsChain {
    h: Hyperparameters,
    state: CollapsedState,
    pi: Vec<SimplexVector>,
    rng: Rng,
    iteration: usize,
}

impl AgsChain {
    pub fn new(corpus: &Corpus, k: usize, h: Hyperparameters, seed: u64, init: Init) -> Result<Self> {
        h.validate()?;
        let mut rng = Rng::new(seed);
        let (state, pi) = initial_state(&mut rng, corpus, k, h.alpha, init)?;
        Ok(Self { h, state, pi, rng, iteration: 0 })
    }

    pub fn from_checkpoint(corpus: &Corpus, cp: &Checkpoint) -> Result<Self> {
        if cp.algo != "ags" {
            return Err(Error::data(format!("checkpoint is for {}, not ags", cp.algo)));
        }
        Ok(Self {
            h: cp.hyper,
            state: CollapsedState::from_z(corpus, cp.k, cp.z.clone())?,
            pi: cp.pi_simplex()?,
            rng: Rng::from_state(&cp.rng)?,
            iteration: cp.iteration,
        })
    }

    pub fn counts(&self) -> &CountStatistics {
        self.state.counts()
    }

    /// Changes the hyperparameters of a running chain, keeping its state.
    pub fn set_hyper(&mut self, h: Hyperparameters) {
        self.h = h;
    }
}

impl Chain for AgsChain {
    fn algo(&self) -> &'static str {
        "ags"
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
        for j in 0..corpus.num_collections() {
            let tables = AuxiliaryTables::sample(
                &mut self.rng,
                self.state.counts(),
                corpus.members(j),
                &self.pi[j],
                self.h.gamma,
            );
            self.pi[j] = sample_pi(&mut self.rng, &tables.totals(), self.h.alpha)?;
        }
        self.iteration += 1;
        let log_joint = log_collapsed(corpus, self.state.counts(), &self.pi, &self.h)?;
        Ok(StepInfo { log_joint, ..StepInfo::default() })
    }

    fn pi(&self) -> Vec<SimplexVector> {
        self.pi.clone()
    }

    fn z(&self) -> &[Vec<u32>] {
        self.state.z()
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            algo: "ags".into(),
            hyper: self.h,
            k: self.num_topics(),
            iteration: self.iteration,
            z: self.state.z().to_vec(),
            pi: self.pi.iter().map(|p| p.to_vec()).collect(),
            varphi: None,
            extra: None,
            rng: self.rng.state(),
        }
    }
}

pub fn run(
    corpus: &Corpus,
    k: usize,
    h: Hyperparameters,
    config: &SamplerConfig,
    init: Init,
) -> Result<ChainTrace> {
    config.validate()?;
    let mut chain = AgsChain::new(corpus, k, h, config.seed, init)?;
    drive(&mut chain, corpus, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use crate::corpus::Vocabulary;
    use proptest::prelude::*;

    #[test]
    fn antoniak_edge_cases() {
        let mut rng = Rng::new(1);
        assert_eq!(antoniak_sample(&mut rng, 0, 0.3), 0);
        for _ in 0..1000 {
            assert_eq!(antoniak_sample(&mut rng, 1, 1e-6), 1);
        }
    }

    #[test]
    fn antoniak_mean_for_two_customers() {
        let mut rng = Rng::new(2);
        let n = 100_000;
        let mean = (0..n).map(|_| antoniak_sample(&mut rng, 2, 1.0) as f64).sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn pi_draw_means() {
        let mut rng = Rng::new(3);
        let n = 20_000;
        let mut mean = [0.0; 3];
        for _ in 0..n {
            let p = sample_pi(&mut rng, &[10, 0, 0], 0.1).unwrap();
            for (m, x) in mean.iter_mut().zip(p.iter()) {
                *m += x / n as f64;
            }
        }
        let want = [10.1 / 10.3, 0.1 / 10.3, 0.1 / 10.3];
        for (m, w) in mean.iter().zip(want) {
            assert!((m - w).abs() < 0.005, "{m} vs {w}");
        }
        assert_eq!(sample_pi(&mut rng, &[4], 0.5).unwrap().as_slice(), &[1.0]);
    }

    #[test]
    fn single_topic_chain_is_degenerate() {
        let corpus = Corpus::new(Vocabulary::synthetic(3), vec![vec![0, 1], vec![2]], vec![0, 1], 2).unwrap();
        let h = Hyperparameters::new(0.5, 1.0, 0.5).unwrap();
        let trace = run(&corpus, 1, h, &SamplerConfig::new(20, 4), Init::default()).unwrap();
        assert!(trace.pi_path.iter().flatten().all(|p| p == &[1.0]));
        assert!(trace.checkpoint.z.iter().flatten().all(|&t| t == 0));
    }

    #[test]
    fn checkpoint_resume_is_bit_exact() {
        let corpus = Corpus::new(
            Vocabulary::synthetic(4),
            vec![vec![0, 1, 1, 2], vec![3, 3, 0], vec![2, 1]],
            vec![0, 1, 1],
            2,
        )
        .unwrap();
        let h = Hyperparameters::new(0.3, 2.0, 0.4).unwrap();
        let mut a = AgsChain::new(&corpus, 3, h, 9, Init::default()).unwrap();
        for _ in 0..5 {
            a.step(&corpus).unwrap();
        }
        let mut b = AgsChain::from_checkpoint(&corpus, &a.checkpoint()).unwrap();
        for _ in 0..5 {
            assert_eq!(a.step(&corpus).unwrap(), b.step(&corpus).unwrap());
        }
        assert_eq!(a.checkpoint(), b.checkpoint());
    }

    proptest! {
        #[test]
        fn antoniak_bounds_and_mean(n in 0u32..40, c in 0.05f64..20.0, seed in any::<u64>()) {
            let mut rng = Rng::new(seed);
            let draws = 2000;
            let mut sum = 0.0;
            for _ in 0..draws {
                let s = antoniak_sample(&mut rng, n, c);
                prop_assert!(s <= n);
                prop_assert!(n == 0 || s >= 1);
                sum += s as f64;
            }
            let mean = sum / draws as f64;
            let expect: f64 = (1..=n).map(|l| c / (c + l as f64 - 1.0)).sum();
            let var: f64 = (1..=n).map(|l| { let p = c / (c + l as f64 - 1.0); p * (1.0 - p) }).sum();
            let se = (var.max(0.0) / draws as f64).sqrt();
            prop_assert!((mean - expect).abs() <= 5.0 * se + 1e-9, "mean {} expect {}", mean, expect);
        }

        #[test]
        fn tables_positive_iff_counts_positive(seed in any::<u64>()) {
            let corpus = Corpus::new(
                Vocabulary::synthetic(3),
                vec![vec![0, 1, 1, 2, 2, 2], vec![0, 2]],
                vec![0, 0],
                1,
            ).unwrap();
            let mut rng = Rng::new(seed);
            let state = CollapsedState::random(&mut rng, &corpus, 3);
            let tables = AuxiliaryTables::sample(&mut rng, state.counts(), corpus.members(0), &[0.2, 0.3, 0.5], 1.5);
            for (i, &d) in corpus.members(0).iter().enumerate() {
                for k in 0..3 {
                    let n = state.counts().n_dk(d, k);
                    let s = tables.get(i, k);
                    prop_assert!(s <= n);
                    prop_assert_eq!(s == 0, n == 0);
                }
            }
        }
    }
}
