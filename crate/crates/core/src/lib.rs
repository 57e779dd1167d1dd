//! Compound latent Dirichlet allocation (cLDA).
//!
//! cLDA extends LDA with a collection layer: each predefined collection of
//! documents `j` carries its own topic mixture `pi_j`, which serves as the
//! Dirichlet base measure of every document mixture `theta_jd` in that
//! collection. This crate provides
//!
//! - forward simulation of the generative model ([`synthetic`]),
//! - three posterior-inference backends: the augmented Gibbs sampler
//!   ([`ags`]), manifold-Langevin updates within Gibbs ([`mgs`]) and
//!   variational EM ([`vem`]),
//! - a collapsed Gibbs LDA baseline ([`lda`]),
//! - Gibbs-EM hyperparameter estimation ([`gibbs_em`]),
//! - held-out perplexity, topic coherence and topic alignment ([`eval`]).
//!
//! All randomness flows through [`numerics::Rng`], so every run is
//! reproducible from a single `u64` seed.

pub mod ags;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod gibbs;
pub mod gibbs_em;
pub mod lda;
pub mod mgs;
pub mod model;
pub mod numerics;
pub mod synthetic;
pub mod trace;
pub mod vem;

pub use error::{Error, Result};
