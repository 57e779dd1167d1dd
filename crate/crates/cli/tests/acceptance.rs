//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::thread;
use std::time::Instant;

use clda::ags::{self, AgsChain, Init};
use clda::corpus::{split_held_out, Corpus, TestDoc, Vocabulary};
use clda::eval::{
    align_topics, aligned_pi_distance, beta_hat_mean, coherence, coherence_from_counts, iterations_to_region,
    perplexity_clda, perplexity_lda, DocFrequencies,
};
use clda::gibbs::CollapsedState;
use clda::gibbs_em::{gibbs_em_run, GibbsEmConfig};
use clda::lda::{self, LdaChain, LdaEmConfig, LdaHyper};
use clda::mgs::{self, grad_log_target, log_target_varphi, DocCounts, MgsChain, MgsConfig};
use clda::model::{log_joint, CountStatistics, Hyperparameters, ModelState};
use clda::numerics::{
    digamma, ln_gamma, sample_dirichlet, sample_uniform, tetragamma, trigamma, Rng, SimplexVector,
};
use clda::synthetic::{generate, GroundTruth, SynthConfig};
use clda::trace::{Chain, SamplerConfig, Snapshot};
use clda::vem::{
    a_gradient, a_hessian, constrained_newton_step, omega_gradient, omega_hessian, tau_objective, vem_run,
    CollectionStats, VemConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn fmt(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join("/")
}

fn into_rows(v: Vec<SimplexVector>) -> Vec<Vec<f64>> {
    v.into_iter().map(SimplexVector::into_inner).collect()
}

// ---------------------------------------------------------------------------
// Criteria 1 and 2

fn identifiable_synth_32() -> (clda::synthetic::Synthetic, u64) {
    for seed in 1..=50 {
        let s = generate(&SynthConfig::preset("synth-3.2", seed).unwrap()).unwrap();
        let k = s.truth.config.num_topics;
        if (0..k).all(|t| s.truth.pi.iter().any(|p| p[t] >= 0.05)) {
            return (s, seed);
        }
    }
    panic!("no identifiable synth-3.2 draw among the first 50 seeds");
}

struct ChainSummary {
    l1: Vec<f64>,
    to_region: Option<usize>,
    seconds: f64,
}

fn summarize(trace: clda::trace::ChainTrace, corpus: &Corpus, truth: &GroundTruth, eta: f64, seconds: f64) -> ChainSummary {
    let beta = beta_hat_mean(corpus, &trace.snapshots, truth.beta.len(), eta).unwrap();
    let perm = align_topics(&truth.beta, &beta).unwrap();
    let pi = into_rows(trace.pi_mean());
    ChainSummary {
        l1: aligned_pi_distance(&truth.pi, &pi, &perm),
        to_region: iterations_to_region(&trace.pi_path, &truth.pi, &perm, 0.07),
        seconds,
    }
}

fn run_ags(corpus: &Corpus, truth: &GroundTruth, seed: u64) -> ChainSummary {
    let h = truth.config.hyper;
    let t = Instant::now();
    let trace = ags::run(corpus, 3, h, &SamplerConfig::new(2000, seed), Init::default()).unwrap();
    summarize(trace, corpus, truth, h.eta, t.elapsed().as_secs_f64())
}

fn run_mgs(corpus: &Corpus, truth: &GroundTruth, seed: u64) -> ChainSummary {
    let h = truth.config.hyper;
    let t = Instant::now();
    let config = MgsConfig::new(SamplerConfig::new(2000, seed));
    let trace = mgs::run(corpus, 3, h, &config, Init::default()).unwrap();
    summarize(trace, corpus, truth, h.eta, t.elapsed().as_secs_f64())
}

fn median(mut xs: Vec<usize>) -> usize {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

fn criteria_1_and_2() -> (Outcome, Outcome) {
    let (synth, corpus_seed) = identifiable_synth_32();
    let (corpus, truth) = (&synth.corpus, &synth.truth);
    let first = run_ags(corpus, truth, 1);
    let seeds: Vec<u64> = (1..=5).collect();
    let (mut ags_runs, mgs_runs): (Vec<ChainSummary>, Vec<ChainSummary>) = thread::scope(|s| {
        let a: Vec<_> = seeds[1..].iter().map(|&c| s.spawn(move || run_ags(corpus, truth, c))).collect();
        let m: Vec<_> = seeds.iter().map(|&c| s.spawn(move || run_mgs(corpus, truth, c))).collect();
        (
            a.into_iter().map(|h| h.join().unwrap()).collect(),
            m.into_iter().map(|h| h.join().unwrap()).collect(),
        )
    });
    ags_runs.insert(0, first);

    let (a, m) = (&ags_runs[0], &mgs_runs[0]);
    let pass1 = a.l1.iter().all(|&d| d <= 0.10) && m.l1.iter().all(|&d| d <= 0.15) && a.seconds <= 120.0;
    let c1 = outcome(
        pass1,
        format!(
            "corpus seed {corpus_seed}; AGS L1 {} (<= 0.10) in {:.1}s (<= 120s); MGS L1 {} (<= 0.15)",
            fmt(&a.l1),
            a.seconds,
            fmt(&m.l1)
        ),
    );

    let hits = |runs: &[ChainSummary]| runs.iter().map(|r| r.to_region.unwrap_or(usize::MAX)).collect::<Vec<_>>();
    let (ha, hm) = (hits(&ags_runs), hits(&mgs_runs));
    let (ma, mm) = (median(ha.clone()), median(hm.clone()));
    let h = truth.config.hyper;
    let fit = vem_run(corpus, 3, h, &VemConfig::new(1)).unwrap();
    let beta = into_rows(fit.params.beta_mean());
    let perm = align_topics(&truth.beta, &beta).unwrap();
    let vem_l1 = aligned_pi_distance(&truth.pi, &fit.params.omega, &perm);
    let show = |v: &[usize]| {
        v.iter().map(|&x| if x == usize::MAX { "never".into() } else { x.to_string() }).collect::<Vec<_>>().join(",")
    };
    let pass2 = ma <= mm && !fit.history.is_empty() && vem_l1.iter().all(|&d| d <= 0.25);
    let c2 = outcome(
        pass2,
        format!(
            "iterations to L1 <= 0.07: AGS [{}] median {ma}, MGS [{}] median {mm}; VEM {} iterations, L1 {} (<= 0.25)",
            show(&ha),
            show(&hm),
            fit.history.len(),
            fmt(&vem_l1)
        ),
    );
    (c1, c2)
}

// ---------------------------------------------------------------------------
// Criterion 3

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let estimates: Vec<(f64, f64)> = thread::scope(|s| {
        let handles: Vec<_> = (1..=10u64)
            .map(|r| {
                s.spawn(move || {
                    let synth = generate(&SynthConfig::preset("synth-3.3", 100 + r).unwrap()).unwrap();
                    let config = GibbsEmConfig { seed: r, alpha: 1.0, ..GibbsEmConfig::default() };
                    let path = gibbs_em_run(&synth.corpus, 3, &config, 1.0, 1.0).unwrap();
                    let last = path.last().unwrap();
                    (last.eta, last.gamma)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let seconds = start.elapsed().as_secs_f64();
    let ok = estimates.iter().filter(|(e, g)| (e - 0.5).abs() <= 0.15 && (g - 0.8).abs() <= 0.4).count();
    let listing =
        estimates.iter().map(|(e, g)| format!("({e:.3},{g:.3})")).collect::<Vec<_>>().join(" ");
    outcome(
        ok >= 8 && seconds <= 600.0,
        format!("{ok}/10 replicates within tolerance (>= 8) in {seconds:.1}s (<= 600s): {listing}"),
    )
}

// ---------------------------------------------------------------------------
// Criterion 4

fn separated_corpus(seed: u64) -> clda::synthetic::Synthetic {
    let pi: Vec<Vec<f64>> =
        (0..4).map(|j| (0..10).map(|k| if k / 2 == j { 0.4 } else { 0.2 / 8.0 }).collect()).collect();
    let config = SynthConfig {
        num_collections: 4,
        num_topics: 10,
        vocab_size: 200,
        docs_per_collection: 50,
        doc_length: 100,
        hyper: Hyperparameters::new(1.0, 1.0, 0.1).unwrap(),
        seed,
        poisson_length: false,
        beta: None,
        pi: Some(pi),
    };
    generate(&config).unwrap()
}

fn perplexity_pair(seed: u64) -> (f64, f64) {
    let synth = separated_corpus(seed);
    let view = split_held_out(&mut Rng::new(seed), &synth.corpus, 0.2, 0.5).unwrap().apply(&synth.corpus).unwrap();
    let k = 10;
    let em = GibbsEmConfig { seed, max_outer: 20, ..GibbsEmConfig::default() };
    let last = *gibbs_em_run(&view.train, k, &em, 1.0, 1.0).unwrap().last().unwrap();
    let h = Hyperparameters::new(1.0, last.gamma, last.eta).unwrap();
    let lda_em = LdaEmConfig { seed, max_outer: 20, ..LdaEmConfig::default() };
    let (lh, _) = lda::estimate_hyper(&view.train, k, LdaHyper { alpha: 0.1, eta: 0.1 }, &lda_em).unwrap();
    let config = SamplerConfig::new(1000, seed);
    let a = ags::run(&view.train, k, h, &config, Init::default()).unwrap();
    let b = lda::run(&view.train, k, lh, &config, Init::default()).unwrap();
    (
        perplexity_clda(&view.train, &view.test, &a.snapshots, k, &h).unwrap(),
        perplexity_lda(&view.train, &view.test, &b.snapshots, k, &lh).unwrap(),
    )
}

fn criterion_4() -> Outcome {
    let pairs: Vec<(f64, f64)> = thread::scope(|s| {
        let handles: Vec<_> = (1..=3u64).map(|seed| s.spawn(move || perplexity_pair(seed))).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let listing = pairs.iter().map(|(c, l)| format!("{c:.3} vs {l:.3}")).collect::<Vec<_>>().join(", ");
    outcome(pairs.iter().all(|(c, l)| c <= l), format!("cLDA vs LDA perplexity over 3 seeds: {listing}"))
}

// ---------------------------------------------------------------------------
// Criterion 5

fn tiny_corpus() -> Corpus {
    Corpus::new(Vocabulary::synthetic(3), vec![vec![0, 0, 1], vec![1, 2], vec![0]], vec![0, 1, 1], 2).unwrap()
}

fn configurations(n: usize) -> impl Iterator<Item = Vec<u32>> {
    (0..1u32 << n).map(move |c| (0..n).map(|i| (c >> i) & 1).collect())
}

fn reshape(corpus: &Corpus, flat: &[u32]) -> Vec<Vec<u32>> {
    let mut at = 0;
    corpus
        .docs()
        .iter()
        .map(|d| {
            let z = flat[at..at + d.len()].to_vec();
            at += d.len();
            z
        })
        .collect()
}

fn topic_marginal(corpus: &Corpus, z: &[Vec<u32>], k: usize, eta: f64) -> f64 {
    let v = corpus.vocab_size();
    let mut m = vec![vec![0u32; v]; k];
    for (doc, zd) in corpus.docs().iter().zip(z) {
        for (&w, &t) in doc.iter().zip(zd) {
            m[t as usize][w as usize] += 1;
        }
    }
    m.iter()
        .map(|row| {
            let total: u32 = row.iter().sum();
            ln_gamma(v as f64 * eta) - ln_gamma(v as f64 * eta + total as f64)
                + row.iter().map(|&c| ln_gamma(eta + c as f64) - ln_gamma(eta)).sum::<f64>()
        })
        .sum()
}

fn doc_counts(zd: &[u32], k: usize) -> Vec<f64> {
    let mut n = vec![0.0; k];
    for &t in zd {
        n[t as usize] += 1.0;
    }
    n
}

fn ln_dir_multinomial(n: &[f64], prior: &[f64]) -> f64 {
    let (a, total): (f64, f64) = (prior.iter().sum(), n.iter().sum());
    ln_gamma(a) - ln_gamma(a + total)
        + n.iter().zip(prior).map(|(&c, &p)| ln_gamma(p + c) - ln_gamma(p)).sum::<f64>()
}

const NODES: usize = 20_000;

fn beta_density(x: f64, alpha: f64) -> f64 {
    ((alpha - 1.0) * (x.ln() + (1.0 - x).ln()) + ln_gamma(2.0 * alpha) - 2.0 * ln_gamma(alpha)).exp()
}

/// Integrals of `p(z_j | pi_j) Dir(pi_j; alpha)` over the 1-simplex, alone
/// and weighted by `pi_j1` and by `max_k pi_jk`.
fn collection_integral(corpus: &Corpus, z: &[Vec<u32>], j: usize, h: &Hyperparameters) -> (f64, f64, f64) {
    let (mut mass, mut first, mut top) = (0.0, 0.0, 0.0);
    for i in 0..NODES {
        let x = (i as f64 + 0.5) / NODES as f64;
        let prior = [h.gamma * x, h.gamma * (1.0 - x)];
        let ln_f: f64 = corpus.members(j).iter().map(|&d| ln_dir_multinomial(&doc_counts(&z[d], 2), &prior)).sum();
        let f = ln_f.exp() * beta_density(x, h.alpha) / NODES as f64;
        mass += f;
        first += x * f;
        top += x.max(1.0 - x) * f;
    }
    (mass, first, top)
}

struct ExactPosterior {
    z: Vec<f64>,
    /// Per collection: `E[pi_j1]` and `E[max_k pi_jk]`.
    pi_moments: Vec<f64>,
}

fn exact_clda(corpus: &Corpus, h: &Hyperparameters) -> ExactPosterior {
    let n = corpus.num_tokens();
    let mut weights = Vec::new();
    let mut firsts = Vec::new();
    for flat in configurations(n) {
        let z = reshape(corpus, &flat);
        let mut w = topic_marginal(corpus, &z, 2, h.eta).exp();
        let mut per_collection = Vec::new();
        for j in 0..corpus.num_collections() {
            let (mass, first, top) = collection_integral(corpus, &z, j, h);
            w *= mass;
            per_collection.push(first / mass);
            per_collection.push(top / mass);
        }
        weights.push(w);
        firsts.push(per_collection);
    }
    let total: f64 = weights.iter().sum();
    let z: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let pi_moments = (0..2 * corpus.num_collections())
        .map(|i| z.iter().zip(&firsts).map(|(p, f)| p * f[i]).sum())
        .collect();
    ExactPosterior { z, pi_moments }
}

fn exact_lda(corpus: &Corpus, h: &LdaHyper) -> Vec<f64> {
    let weights: Vec<f64> = configurations(corpus.num_tokens())
        .map(|flat| {
            let z = reshape(corpus, &flat);
            let doc: f64 = z.iter().map(|zd| ln_dir_multinomial(&doc_counts(zd, 2), &[h.alpha; 2])).sum();
            (doc + topic_marginal(corpus, &z, 2, h.eta)).exp()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    weights.iter().map(|w| w / total).collect()
}

fn state_index(z: &[Vec<u32>]) -> usize {
    z.iter().flatten().enumerate().map(|(i, &t)| (t as usize) << i).sum()
}

fn empirical<C: Chain>(chain: &mut C, corpus: &Corpus, burn: usize, draws: usize) -> (Vec<f64>, Vec<f64>) {
    for _ in 0..burn {
        chain.step(corpus).unwrap();
    }
    let mut hist = vec![0.0; 1 << corpus.num_tokens()];
    let mut pi = vec![0.0; 2 * corpus.num_collections()];
    for _ in 0..draws {
        chain.step(corpus).unwrap();
        hist[state_index(chain.z())] += 1.0 / draws as f64;
        for (j, p) in chain.pi().iter().enumerate() {
            pi[2 * j] += p[0] / draws as f64;
            pi[2 * j + 1] += p[0].max(p[1]) / draws as f64;
        }
    }
    (hist, pi)
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

fn criterion_5() -> Outcome {
    let corpus = tiny_corpus();
    let h = Hyperparameters::new(1.5, 2.0, 0.5).unwrap();
    let lh = LdaHyper { alpha: 0.8, eta: 0.5 };
    let exact = exact_clda(&corpus, &h);
    let exact_cgs = exact_lda(&corpus, &lh);
    let draws = 400_000;

    let mut ags_chain = AgsChain::new(&corpus, 2, h, 11, Init::default()).unwrap();
    let (ags_z, _) = empirical(&mut ags_chain, &corpus, 1000, draws);
    let mut cgs_chain = LdaChain::new(&corpus, 2, lh, 12, None).unwrap();
    let (cgs_z, _) = empirical(&mut cgs_chain, &corpus, 1000, draws);
    let mgs_config = MgsConfig::new(SamplerConfig { iterations: usize::MAX, burn_in: 2000, save_every: 1, seed: 13 });
    let mut mgs_chain = MgsChain::new(&corpus, 2, h, mgs_config, Init::default()).unwrap();
    let (_, mgs_pi) = empirical(&mut mgs_chain, &corpus, 2000, draws);

    let (tv_ags, tv_cgs) = (tv(&ags_z, &exact.z), tv(&cgs_z, &exact_cgs));
    let pi_err = mgs_pi.iter().zip(&exact.pi_moments).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let hand = hand_values();
    let pass = tv_ags <= 0.02 && tv_cgs <= 0.02 && pi_err <= 0.02 && hand.iter().all(|(_, e)| *e <= 1e-10);
    let hand_listing = hand.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(
        pass,
        format!(
            "TV AGS {tv_ags:.4}, CGS {tv_cgs:.4} (<= 0.02); MGS E[pi_j1], E[max pi_j] {} vs quadrature {} (+-0.02); hand errors: {hand_listing} (<= 1e-10)",
            fmt(&mgs_pi),
            fmt(&exact.pi_moments)
        ),
    )
}

fn hand_values() -> Vec<(&'static str, f64)> {
    let mut out = Vec::new();

    let corpus = Corpus::new(Vocabulary::synthetic(2), vec![vec![0, 0, 1]], vec![0], 1).unwrap();
    let sv = |v: Vec<f64>| SimplexVector::new(v).unwrap();
    let state = ModelState {
        k: 2,
        beta: vec![sv(vec![0.8, 0.2]), sv(vec![0.25, 0.75])],
        pi: vec![sv(vec![0.3, 0.7])],
        theta: vec![sv(vec![0.6, 0.4])],
        z: vec![vec![0, 0, 1]],
    };
    let h = Hyperparameters::new(1.5, 2.0, 0.5).unwrap();
    let lj = log_joint(&corpus, &state, &h).unwrap();
    out.push(("log_joint", (lj - -2.1397630670988095).abs()));

    let train = Corpus::new(Vocabulary::synthetic(2), vec![vec![0, 1]], vec![0], 1).unwrap();
    let test = vec![TestDoc { collection: 0, train_doc: Some(0), words: vec![0, 1] }];
    let snap = Snapshot { iteration: 1, pi: vec![vec![0.25, 0.75]], z: vec![vec![0, 1]] };
    let h = Hyperparameters::new(1.0, 2.0, 0.5).unwrap();
    let p = perplexity_clda(&train, &test, std::slice::from_ref(&snap), 2, &h).unwrap();
    out.push(("perplexity", (p - 1.0 / (0.4375f64 * 0.5625).sqrt()).abs()));
    let train = Corpus::new(Vocabulary::synthetic(2), vec![vec![0, 0, 1]], vec![0], 1).unwrap();
    let snap = Snapshot { iteration: 1, pi: vec![vec![0.5, 0.5]], z: vec![vec![0, 0, 1]] };
    let p_lda = perplexity_lda(&train, &test, &[snap], 2, &LdaHyper { alpha: 0.5, eta: 0.5 }).unwrap();
    let (p0, p1): (f64, f64) = (0.625 * 5.0 / 6.0 + 0.375 * 0.25, 0.625 / 6.0 + 0.375 * 0.75);
    out.push(("lda perplexity", (p_lda - 1.0 / (p0 * p1).sqrt()).abs()));

    let together = Corpus::new(Vocabulary::synthetic(3), vec![vec![0, 1]; 5], vec![0; 5], 1).unwrap();
    let c = coherence(&[0, 1], &DocFrequencies::new(&together)).unwrap();
    out.push(("coherence co-occurring", (c - (6.0f64 / 5.0).ln()).abs()));
    let apart = coherence_from_counts(2, |_| 5, |_, _| 0).unwrap();
    out.push(("coherence disjoint", (apart - (1.0f64 / 5.0).ln()).abs()));
    out
}

// ---------------------------------------------------------------------------
// Criterion 6

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn criterion_6() -> Outcome {
    let states = 200;
    let mut rng = Rng::new(2024);
    let mut worst = BTreeMap::<&str, f64>::new();
    let mut note = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for _ in 0..states {
        let k = 2 + (sample_uniform(&mut rng) * 4.0) as usize;
        let h = Hyperparameters::new(0.2 + 2.8 * sample_uniform(&mut rng), 0.3 + 9.7 * sample_uniform(&mut rng), 1.0)
            .unwrap();

        let phi: Vec<f64> = (0..k)
            .map(|_| (0.2 + 2.0 * sample_uniform(&mut rng)) * if sample_uniform(&mut rng) < 0.3 { -1.0 } else { 1.0 })
            .collect();
        let rows: Vec<u32> = (0..3 * k).map(|_| (sample_uniform(&mut rng) * 6.0) as u32).collect();
        let counts = DocCounts::new(k, rows);
        let g = grad_log_target(&phi, &counts, &h);
        for i in 0..k {
            let step = 1e-6 * (1.0 + phi[i].abs());
            let (mut up, mut dn) = (phi.clone(), phi.clone());
            up[i] += step;
            dn[i] -= step;
            let fd = (log_target_varphi(&up, &counts, &h) - log_target_varphi(&dn, &counts, &h)) / (2.0 * step);
            note("mgs gradient", rel_err(fd, g[i]));
        }

        let docs: Vec<usize> = (0..4).collect();
        let rho: Vec<Vec<f64>> = docs.iter().map(|_| (0..k).map(|_| 0.2 + 5.0 * sample_uniform(&mut rng)).collect()).collect();
        let s = CollectionStats::gather(&rho, &docs, k);
        let omega = sample_dirichlet(&mut rng, &vec![4.0; k]).unwrap().into_inner();
        let a = 0.5 + 10.0 * sample_uniform(&mut rng);
        let (alpha, gamma) = (h.alpha, 0.2 + 3.0 * sample_uniform(&mut rng));
        let gw = omega_gradient(a, &omega, &s, alpha, gamma);
        let hw = omega_hessian(a, &omega, &s, alpha, gamma);
        let e = 1e-6;
        for t in 0..k {
            let at = |x: f64| {
                let mut w = omega.clone();
                w[t] = x;
                w
            };
            let f = |x: f64| tau_objective(a, &at(x), &s, alpha, gamma);
            let fd = (f(omega[t] + e) - f(omega[t] - e)) / (2.0 * e);
            note("vem omega gradient", rel_err(fd, gw[t] + a * digamma(a)));
            let gf = |x: f64| omega_gradient(a, &at(x), &s, alpha, gamma)[t];
            note("vem omega hessian", rel_err((gf(omega[t] + e) - gf(omega[t] - e)) / (2.0 * e), hw[t]));
        }
        let ea = 1e-6 * a;
        let f = |x: f64| tau_objective(x, &omega, &s, alpha, gamma);
        note("vem a gradient", rel_err((f(a + ea) - f(a - ea)) / (2.0 * ea), a_gradient(a, &omega, &s, alpha, gamma)));
        let gf = |x: f64| a_gradient(x, &omega, &s, alpha, gamma);
        note("vem a hessian", rel_err((gf(a + ea) - gf(a - ea)) / (2.0 * ea), a_hessian(a, &omega, &s, alpha, gamma)));
        let step = constrained_newton_step(&gw, &hw);
        note("newton step sum", step.iter().sum::<f64>().abs());

        let x = 0.05 + 20.0 * sample_uniform(&mut rng);
        note("lngamma recurrence", (ln_gamma(x + 1.0) - ln_gamma(x) - x.ln()).abs());
        note("digamma recurrence", (digamma(x + 1.0) - digamma(x) - 1.0 / x).abs());
        note("trigamma recurrence", (trigamma(x + 1.0) - trigamma(x) + 1.0 / (x * x)).abs());
        note("tetragamma recurrence", (tetragamma(x + 1.0) - tetragamma(x) - 2.0 / (x * x * x)).abs());
    }

    let mut count_failures = 0;
    for seed in 0..20u64 {
        let mut rng = Rng::new(seed);
        let docs: Vec<Vec<u32>> =
            (0..6).map(|_| (0..1 + (sample_uniform(&mut rng) * 15.0) as usize).map(|_| (sample_uniform(&mut rng) * 8.0) as u32).collect()).collect();
        let labels: Vec<usize> = (0..6).map(|d| d % 2).collect();
        let corpus = Corpus::new(Vocabulary::synthetic(8), docs, labels, 2).unwrap();
        let k = 3;
        let mut state = CollapsedState::random(&mut rng, &corpus, k);
        let priors = vec![vec![0.7; k]; 2];
        for _ in 0..25 {
            state.sweep(&mut rng, &corpus, &priors, 0.3);
            let scratch = CountStatistics::recompute(&corpus, state.z(), k).unwrap();
            if &scratch != state.counts() || state.counts().check_consistency().is_err() {
                count_failures += 1;
            }
        }
        let h = Hyperparameters::new(0.5, 1.5, 0.3).unwrap();
        let mut chain = AgsChain::new(&corpus, k, h, seed, Init::default()).unwrap();
        for _ in 0..25 {
            chain.step(&corpus).unwrap();
        }
        if &CountStatistics::recompute(&corpus, chain.z(), k).unwrap() != chain.counts() {
            count_failures += 1;
        }
    }

    let limits = |name: &str| match name {
        "newton step sum" => 1e-12,
        n if n.ends_with("recurrence") => 1e-9,
        _ => 1e-5,
    };
    let pass = worst.iter().all(|(n, &e)| e <= limits(n)) && count_failures == 0;
    let listing = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    outcome(pass, format!("{states} random states; worst: {listing}; count mismatches {count_failures}"))
}

// ---------------------------------------------------------------------------
// Criterion 7

fn clda(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_clda")).current_dir(dir).args(args).output().unwrap();
    assert!(out.status.success(), "clda {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn pipeline(dir: &Path) {
    fs::create_dir_all(dir.join("raw/alpha")).unwrap();
    fs::create_dir_all(dir.join("raw/beta")).unwrap();
    fs::write(dir.join("raw/alpha/1.txt"), "river water fish boat river").unwrap();
    fs::write(dir.join("raw/alpha/2.txt"), "boat sail water wind").unwrap();
    fs::write(dir.join("raw/beta/1.txt"), "market price trade stock price").unwrap();
    fs::write(dir.join("raw/beta/2.txt"), "trade water price boat").unwrap();
    let hyper = ["--k", "3", "--alpha", "0.1", "--gamma", "1", "--eta", "0.25"];
    let run = |extra: &[&str], base: &[&str]| {
        let mut v: Vec<&str> = base.to_vec();
        v.extend_from_slice(extra);
        clda(dir, &v);
    };
    clda(dir, &["preprocess", "--input", "raw", "--out", "text"]);
    run(&hyper, &["train", "--algo", "ags", "--corpus", "text", "--iters", "40", "--seed", "3", "--out", "text-ags"]);
    clda(dir, &["generate", "--preset", "synth-3.2", "--seed", "5", "--out", "corp"]);
    clda(dir, &["split", "--corpus", "corp", "--seed", "6", "--out", "split.json"]);
    let common = ["--corpus", "corp", "--split", "split.json", "--iters", "120", "--seed", "7"];
    for (algo, out) in [("ags", "m-ags"), ("mgs", "m-mgs"), ("vem", "m-vem")] {
        let mut base = vec!["train", "--algo", algo, "--out", out];
        base.extend_from_slice(&common);
        run(&hyper, &base);
    }
    let mut lda = vec!["train", "--algo", "lda-cgs", "--k", "3", "--alpha", "0.3", "--eta", "0.25", "--chains", "2", "--out", "m-lda"];
    lda.extend_from_slice(&common);
    clda(dir, &lda);
    for m in ["m-ags", "m-mgs", "m-vem", "m-lda/chain-2"] {
        let out = format!("eval-{}", m.replace('/', "-"));
        clda(dir, &["evaluate", "--model", m, "--corpus", "corp", "--split", "split.json", "--out", &out]);
    }
    for what in ["pi", "theta", "beta", "top-words", "topic-dist"] {
        clda(dir, &["export", "--model", "m-ags", "--what", what, "--corpus", "corp", "--out", &format!("export-{what}")]);
    }
    for method in ["m1", "m2", "m3"] {
        clda(dir, &["compare", "--method", method, "--corpus", "corp", "--k", "3", "--iters", "100", "--seed", "8", "--out", &format!("cmp-{method}")]);
    }
    clda(dir, &["estimate-hyper", "--corpus", "corp", "--k", "3", "--max-outer", "2", "--replicates", "2", "--seed", "9", "--out", "em"]);
}

fn drop_last_column(text: &str) -> String {
    text.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn snapshot_tree(root: &Path) -> BTreeMap<String, String> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let name = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
            let text = String::from_utf8(fs::read(&path).unwrap()).unwrap();
            let timed = matches!(path.file_name().and_then(|n| n.to_str()), Some("trace.csv" | "elbo.csv"));
            files.insert(name, if timed { drop_last_column(&text) } else { text });
        }
    }
    files
}

fn criterion_7() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let (ta, tb) = (snapshot_tree(a.path()), snapshot_tree(b.path()));
    let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let pass = ta.len() == tb.len() && differing.is_empty();
    outcome(pass, format!("{} files compared across two runs, {} differ {:?}", ta.len(), differing.len(), differing))
}

#[test]
fn acceptance() {
    let (one, two) = criteria_1_and_2();
    let results: Vec<(usize, Outcome)> = thread::scope(|s| {
        let c3 = s.spawn(criterion_3);
        let c4 = s.spawn(criterion_4);
        let c5 = s.spawn(criterion_5);
        let c6 = s.spawn(criterion_6);
        let c7 = s.spawn(criterion_7);
        vec![
            (1, one),
            (2, two),
            (3, c3.join().unwrap()),
            (4, c4.join().unwrap()),
            (5, c5.join().unwrap()),
            (6, c6.join().unwrap()),
            (7, c7.join().unwrap()),
        ]
    });
    let mut report = String::new();
    for (n, o) in &results {
        report.push_str(&format!("criterion {n}: {} - {}\n", if o.pass { "PASS" } else { "FAIL" }, o.detail));
    }
    std::io::stderr().write_all(report.as_bytes()).unwrap();
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
