use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::error::{Error, Result};
use crate::numerics::Rng;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeldOutDoc {
    pub doc: usize,
    /// Sorted token positions kept for training.
    pub train: Vec<usize>,
    /// Sorted token positions used for evaluation.
    pub test: Vec<usize>,
}

/// Held-out documents with a per-document train/test partition of token
/// positions. Documents not listed are training documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldOutSplit {
    pub doc_fraction: f64,
    pub word_fraction: f64,
    pub seed: u64,
    pub held_out: Vec<HeldOutDoc>,
}

/// Samples held-out documents per collection, then test positions within
/// each of them. Per collection `round(doc_fraction * D_j)` documents are
/// held out and each loses `ceil(word_fraction * n_jd)` positions to test.
pub fn split_held_out(
    rng: &mut Rng,
    corpus: &Corpus,
    doc_fraction: f64,
    word_fraction: f64,
) -> Result<HeldOutSplit> {
    for (name, f) in [("doc_fraction", doc_fraction), ("word_fraction", word_fraction)] {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::domain(format!("{name} must lie in (0, 1), got {f}")));
        }
    }
    let mut held_out = Vec::new();
    for j in 0..corpus.num_collections() {
        let members = corpus.members(j);
        let count = (doc_fraction * members.len() as f64).round() as usize;
        if count >= members.len() {
            return Err(Error::data(format!(
                "collection {} would keep no training documents",
                j + 1
            )));
        }
        let mut picked: Vec<usize> = sample(rng, members.len(), count)
            .into_iter()
            .map(|i| members[i])
            .collect();
        picked.sort_unstable();
        for d in picked {
            let n = corpus.doc(d).len();
            let n_test = ((word_fraction * n as f64) - 1e-9).ceil().max(1.0) as usize;
            let n_test = n_test.min(n);
            let mut test = sample(rng, n, n_test).into_vec();
            test.sort_unstable();
            let mut is_test = vec![false; n];
            for &i in &test {
                is_test[i] = true;
            }
            let train = (0..n).filter(|&i| !is_test[i]).collect();
            held_out.push(HeldOutDoc { doc: d, train, test });
        }
    }
    held_out.sort_by_key(|h| h.doc);
    Ok(HeldOutSplit {
        doc_fraction,
        word_fraction,
        seed: rng.seed(),
        held_out,
    })
}

impl HeldOutSplit {
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Checks that the split refers to `corpus` and partitions every
    /// held-out document.
    pub fn validate(&self, corpus: &Corpus) -> Result<()> {
        let mut last = None;
        for h in &self.held_out {
            if h.doc >= corpus.num_docs() || last.is_some_and(|l| h.doc <= l) {
                return Err(Error::data(format!("split refers to bad document {}", h.doc)));
            }
            last = Some(h.doc);
            let n = corpus.doc(h.doc).len();
            let mut seen = vec![false; n];
            for &i in h.train.iter().chain(&h.test) {
                if i >= n || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::data(format!(
                        "split of document {} is not a partition",
                        h.doc
                    )));
                }
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::data(format!(
                    "split of document {} does not cover it",
                    h.doc
                )));
            }
        }
        Ok(())
    }

    /// Builds the training corpus and the test tokens.
    pub fn apply(&self, corpus: &Corpus) -> Result<TrainingView> {
        self.validate(corpus)?;
        let by_doc: HashMap<usize, &HeldOutDoc> = self.held_out.iter().map(|h| (h.doc, h)).collect();
        let mut docs = Vec::new();
        let mut collection_of = Vec::new();
        let mut test = Vec::new();
        for d in 0..corpus.num_docs() {
            let j = corpus.collection_of(d);
            match by_doc.get(&d) {
                None => {
                    docs.push(corpus.doc(d).to_vec());
                    collection_of.push(j);
                }
                Some(h) => {
                    let words = corpus.doc(d);
                    let train_doc = if h.train.is_empty() {
                        None
                    } else {
                        docs.push(h.train.iter().map(|&i| words[i]).collect());
                        collection_of.push(j);
                        Some(docs.len() - 1)
                    };
                    test.push(TestDoc {
                        collection: j,
                        train_doc,
                        words: h.test.iter().map(|&i| words[i]).collect(),
                    });
                }
            }
        }
        let train = Corpus::new(
            corpus.vocab().clone(),
            docs,
            collection_of,
            corpus.num_collections(),
        )?;
        Ok(TrainingView { train, test })
    }
}

/// Test tokens of one held-out document.
#[derive(Clone, Debug, PartialEq)]
pub struct TestDoc {
    pub collection: usize,
    /// Index of the document's training part in the training corpus, absent
    /// when every token went to test.
    pub train_doc: Option<usize>,
    pub words: Vec<u32>,
}

#[derive(Clone, Debug)]
pub struct TrainingView {
    pub train: Corpus,
    pub test: Vec<TestDoc>,
}

impl TrainingView {
    pub fn num_test_tokens(&self) -> usize {
        self.test.iter().map(|t| t.words.len()).sum()
    }
}
