//! Chain driving, per-iteration traces, saved snapshots and their files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::model::{Checkpoint, Hyperparameters};
use crate::numerics::SimplexVector;

/// Loop control shared by the Gibbs backends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub save_every: usize,
    pub seed: u64,
}

impl SamplerConfig {
    /// Burn-in of half the chain and a snapshot every 10th iteration.
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: iterations / 2,
            save_every: 10,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::domain("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::domain(format!(
                "burn-in {} must be below the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.save_every == 0 {
            return Err(Error::domain("save_every must be positive"));
        }
        Ok(())
    }

    pub fn saves(&self, iteration: usize) -> bool {
        iteration > self.burn_in && iteration.is_multiple_of(self.save_every)
    }
}

/// What one chain iteration reports.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub log_joint: f64,
    pub acceptance_rate: Option<f64>,
    pub epsilon: Option<f64>,
}

/// A resumable Markov chain over `(pi, z)`.
pub trait Chain {
    fn algo(&self) -> &'static str;
    fn hyper(&self) -> Hyperparameters;
    fn num_topics(&self) -> usize;
    /// Completed iterations.
    fn iteration(&self) -> usize;
    fn step(&mut self, corpus: &Corpus) -> Result<StepInfo>;
    fn pi(&self) -> Vec<SimplexVector>;
    fn z(&self) -> &[Vec<u32>];
    fn checkpoint(&self) -> Checkpoint;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub log_joint: f64,
    pub acceptance_rate: Option<f64>,
    pub epsilon: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iteration: usize,
    pub pi: Vec<Vec<f64>>,
    pub z: Vec<Vec<u32>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub algo: String,
    pub k: usize,
    pub num_collections: usize,
    pub hyper: Hyperparameters,
    pub config: SamplerConfig,
}

#[derive(Clone, Debug)]
pub struct ChainTrace {
    pub meta: ChainMeta,
    pub records: Vec<IterationRecord>,
    /// `pi_path[t][j]` is `pi_j` after iteration `records[t].iteration`.
    pub pi_path: Vec<Vec<Vec<f64>>>,
    pub snapshots: Vec<Snapshot>,
    pub checkpoint: Checkpoint,
}

/// Runs `chain` until it has completed `config.iterations` iterations,
/// saving a snapshot after every iteration selected by
/// [`SamplerConfig::saves`].
pub fn drive<C: Chain>(chain: &mut C, corpus: &Corpus, config: &SamplerConfig) -> Result<ChainTrace> {
    config.validate()?;
    let start = Instant::now();
    let mut records = Vec::with_capacity(config.iterations.saturating_sub(chain.iteration()));
    let mut pi_path = Vec::with_capacity(records.capacity());
    let mut snapshots = Vec::new();
    while chain.iteration() < config.iterations {
        let info = chain.step(corpus)?;
        let it = chain.iteration();
        let pi: Vec<Vec<f64>> = chain.pi().into_iter().map(SimplexVector::into_inner).collect();
        if config.saves(it) {
            snapshots.push(Snapshot {
                iteration: it,
                pi: pi.clone(),
                z: chain.z().to_vec(),
            });
        }
        pi_path.push(pi);
        records.push(IterationRecord {
            iteration: it,
            log_joint: info.log_joint,
            acceptance_rate: info.acceptance_rate,
            epsilon: info.epsilon,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(ChainTrace {
        meta: ChainMeta {
            algo: chain.algo().to_string(),
            k: chain.num_topics(),
            num_collections: corpus.num_collections(),
            hyper: chain.hyper(),
            config: config.clone(),
        },
        records,
        pi_path,
        snapshots,
        checkpoint: chain.checkpoint(),
    })
}

/// The files a trained chain leaves behind: everything evaluation needs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedChain {
    pub meta: ChainMeta,
    pub snapshots: Vec<Snapshot>,
}

pub const TRACE_CSV: &str = "trace.csv";
pub const PI_CSV: &str = "pi.csv";
pub const CHAIN_JSON: &str = "chain.json";
pub const CHECKPOINT_JSON: &str = "checkpoint.json";

impl ChainTrace {
    /// Posterior mean of `pi` over the saved snapshots, or the final state
    /// when nothing was saved.
    pub fn pi_mean(&self) -> Vec<SimplexVector> {
        pi_mean(&self.snapshots).unwrap_or_else(|| {
            self.checkpoint
                .pi
                .iter()
                .map(|p| SimplexVector::new(p.clone()).expect("stored simplex"))
                .collect()
        })
    }

    pub fn has_mh_columns(&self) -> bool {
        self.records.iter().any(|r| r.acceptance_rate.is_some())
    }

    /// The iteration table with timing in the last column.
    pub fn trace_csv(&self) -> String {
        let mh = self.has_mh_columns();
        let mut out = String::from("iteration,log_joint");
        if mh {
            out.push_str(",acceptance_rate,epsilon");
        }
        out.push_str(",seconds\n");
        for r in &self.records {
            write!(out, "{},{}", r.iteration, r.log_joint).unwrap();
            if mh {
                write!(
                    out,
                    ",{},{}",
                    r.acceptance_rate.unwrap_or(f64::NAN),
                    r.epsilon.unwrap_or(f64::NAN)
                )
                .unwrap();
            }
            writeln!(out, ",{}", r.seconds).unwrap();
        }
        out
    }

    /// Long-format path of every collection mixture.
    pub fn pi_csv(&self) -> String {
        let k = self.meta.k;
        let mut out = String::from("iteration,collection");
        for t in 1..=k {
            write!(out, ",pi_{t}").unwrap();
        }
        out.push('\n');
        for (r, pis) in self.records.iter().zip(&self.pi_path) {
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

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(TRACE_CSV), self.trace_csv())?;
        fs::write(dir.join(PI_CSV), self.pi_csv())?;
        let saved = SavedChain {
            meta: self.meta.clone(),
            snapshots: self.snapshots.clone(),
        };
        fs::write(dir.join(CHAIN_JSON), serde_json::to_string(&saved)?)?;
        self.checkpoint.save(&dir.join(CHECKPOINT_JSON))?;
        Ok(())
    }
}

impl SavedChain {
    pub fn load(dir: &Path) -> Result<Self> {
        let p = dir.join(CHAIN_JSON);
        let text = fs::read_to_string(&p)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", p.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn pi_mean(&self) -> Option<Vec<SimplexVector>> {
        pi_mean(&self.snapshots)
    }
}

/// Entrywise mean of the snapshot mixtures.
pub fn pi_mean(snapshots: &[Snapshot]) -> Option<Vec<SimplexVector>> {
    let first = snapshots.first()?;
    let mut acc: Vec<Vec<f64>> = first.pi.iter().map(|p| vec![0.0; p.len()]).collect();
    for s in snapshots {
        for (a, p) in acc.iter_mut().zip(&s.pi) {
            for (x, y) in a.iter_mut().zip(p) {
                *x += y;
            }
        }
    }
    Some(
        acc.into_iter()
            .map(|a| SimplexVector::new(a).expect("mean of simplex vectors"))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn save_schedule() {
        let c = SamplerConfig::new(100, 0);
        assert_eq!(c.burn_in, 50);
        assert!(!c.saves(50));
        assert!(c.saves(60));
        assert!(!c.saves(61));
        assert!(c.saves(100));
        assert!(SamplerConfig { burn_in: 100, ..c.clone() }.validate().is_err());
        assert!(SamplerConfig { save_every: 0, ..c }.validate().is_err());
    }

    #[test]
    fn mean_of_snapshots() {
        let snaps = vec![
            Snapshot { iteration: 1, pi: vec![vec![1.0, 0.0]], z: vec![] },
            Snapshot { iteration: 2, pi: vec![vec![0.5, 0.5]], z: vec![] },
        ];
        let m = pi_mean(&snaps).unwrap();
        assert!((m[0][0] - 0.75).abs() < 1e-15);
        assert!(pi_mean(&[]).is_none());
    }
}
