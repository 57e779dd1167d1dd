use clda::ags::{self, Init};
use clda::corpus::{load_corpus_dir, split_held_out, HeldOutSplit};
use clda::eval::{align_topics, aligned_pi_distance, beta_hat_mean, perplexity_clda};
use clda::lda::{self, estimate_collection_mixture_from_z, LdaHyper};
use clda::model::Hyperparameters;
use clda::numerics::{l1_distance, Rng, SimplexVector};
use clda::synthetic::{generate, GroundTruth, SynthConfig, TRUTH_FILE};
use clda::trace::{SamplerConfig, SavedChain};

fn rows(v: Vec<SimplexVector>) -> Vec<Vec<f64>> {
    v.into_iter().map(SimplexVector::into_inner).collect()
}

#[test]
fn disk_round_trip_preserves_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let synth = generate(&SynthConfig::preset("synth-3.2", 6).unwrap()).unwrap();
    synth.save(dir.path()).unwrap();
    let corpus = load_corpus_dir(dir.path()).unwrap();
    assert_eq!(corpus.docs(), synth.corpus.docs());
    assert_eq!(GroundTruth::load(&dir.path().join(TRUTH_FILE)).unwrap(), synth.truth);

    let split = split_held_out(&mut Rng::new(3), &corpus, 0.2, 0.5).unwrap();
    let split_path = dir.path().join("split.json");
    split.save(&split_path).unwrap();
    let view = HeldOutSplit::load(&split_path).unwrap().apply(&corpus).unwrap();
    assert_eq!(view.num_test_tokens(), 40 * 100);

    let h = synth.truth.config.hyper;
    let trace = ags::run(&view.train, 3, h, &SamplerConfig::new(100, 2), Init::default()).unwrap();
    let chain_dir = dir.path().join("chain");
    trace.save(&chain_dir).unwrap();
    let saved = SavedChain::load(&chain_dir).unwrap();
    let a = perplexity_clda(&view.train, &view.test, &trace.snapshots, 3, &h).unwrap();
    let b = perplexity_clda(&view.train, &view.test, &saved.snapshots, 3, &h).unwrap();
    assert_eq!(a, b);
    assert!(a > 1.0 && a < 40.0);
}

#[test]
fn pooled_lda_mixtures_agree_with_ags() {
    let config = SynthConfig {
        pi: Some(vec![vec![0.7, 0.2, 0.1], vec![0.1, 0.3, 0.6]]),
        ..SynthConfig::preset("synth-3.2", 2).unwrap()
    };
    let synth = generate(&config).unwrap();
    let corpus = &synth.corpus;
    let sampler = SamplerConfig::new(600, 4);
    let h = Hyperparameters::new(1.0, 1.0, 0.25).unwrap();
    let clda_trace = ags::run(corpus, 3, h, &sampler, Init::default()).unwrap();
    let clda_beta = beta_hat_mean(corpus, &clda_trace.snapshots, 3, 0.25).unwrap();
    let clda_perm = align_topics(&synth.truth.beta, &clda_beta).unwrap();
    let clda_pi = rows(clda_trace.pi_mean());

    let flat = corpus.flattened();
    let lda_trace = lda::run(&flat, 3, LdaHyper { alpha: 1.0 / 3.0, eta: 0.25 }, &sampler, Init::default()).unwrap();
    let z = &lda_trace.checkpoint.z;
    let lda_pi = rows(estimate_collection_mixture_from_z(z, corpus.collections(), 3, 2).unwrap());
    let lda_beta = beta_hat_mean(&flat, &lda_trace.snapshots, 3, 0.25).unwrap();
    let lda_perm = align_topics(&synth.truth.beta, &lda_beta).unwrap();

    let to_truth = aligned_pi_distance(&synth.truth.pi, &clda_pi, &clda_perm);
    assert!(to_truth.iter().all(|&d| d <= 0.1), "{to_truth:?}");
    for j in 0..2 {
        let a: Vec<f64> = clda_perm.iter().map(|&p| clda_pi[j][p]).collect();
        let b: Vec<f64> = lda_perm.iter().map(|&p| lda_pi[j][p]).collect();
        assert!(l1_distance(&a, &b) <= 0.1, "collection {j}: {a:?} vs {b:?}");
    }
}
