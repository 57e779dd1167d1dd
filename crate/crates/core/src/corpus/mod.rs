//! Corpus representation, preprocessing, file I/O and held-out splitting.
//!
//! In memory a document is its expanded token sequence (one word id per
//! occurrence) sorted by ascending id. That is the same order the bag-of-words
//! file format expands counts in, so saving and reloading is the identity.

mod io;
mod preprocess;
mod split;

use std::collections::HashMap;

pub use io::{load_corpus, load_corpus_dir, save_corpus, CorpusFiles, BOW_FILE, LABELS_FILE, VOCAB_FILE};
pub use preprocess::{detokenize, preprocess, tokenize, PreprocessOptions};
pub use split::{split_held_out, HeldOutDoc, HeldOutSplit, TestDoc, TrainingView};

use crate::error::{Error, Result};

/// Ordered list of unique terms; a term's position is its word id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn new(terms: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(terms.len());
        for (i, t) in terms.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::data(format!(
                    "vocabulary term {i} is empty or contains whitespace"
                )));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::data(format!("duplicate vocabulary term '{t}'")));
            }
        }
        Ok(Self { terms, index })
    }

    /// Placeholder terms `w0 .. w{size-1}` for corpora without text.
    pub fn synthetic(size: usize) -> Self {
        Self::new((0..size).map(|v| format!("w{v}")).collect()).expect("unique terms")
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term(&self, id: u32) -> &str {
        &self.terms[id as usize]
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Documents grouped into `J` collections over a shared vocabulary.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    vocab: Vocabulary,
    docs: Vec<Vec<u32>>,
    collection_of: Vec<usize>,
    num_collections: usize,
    members: Vec<Vec<usize>>,
}

impl Corpus {
    /// Builds a corpus, sorting each document's tokens and checking every
    /// invariant. `collection_of` holds 0-based collection indices.
    pub fn new(
        vocab: Vocabulary,
        docs: Vec<Vec<u32>>,
        collection_of: Vec<usize>,
        num_collections: usize,
    ) -> Result<Self> {
        if docs.len() != collection_of.len() {
            return Err(Error::data(format!(
                "{} documents but {} collection labels",
                docs.len(),
                collection_of.len()
            )));
        }
        if num_collections == 0 {
            return Err(Error::data("corpus needs at least one collection"));
        }
        let v = vocab.len() as u32;
        let mut members = vec![Vec::new(); num_collections];
        let mut docs = docs;
        for (d, (doc, &j)) in docs.iter_mut().zip(&collection_of).enumerate() {
            if doc.is_empty() {
                return Err(Error::data(format!("document {d} has no words")));
            }
            if let Some(&w) = doc.iter().find(|&&w| w >= v) {
                return Err(Error::data(format!(
                    "document {d} has word id {w} >= vocabulary size {v}"
                )));
            }
            if j >= num_collections {
                return Err(Error::data(format!(
                    "document {d} has collection {} > {num_collections}",
                    j + 1
                )));
            }
            doc.sort_unstable();
            members[j].push(d);
        }
        if let Some(j) = members.iter().position(Vec::is_empty) {
            return Err(Error::data(format!("collection {} has no documents", j + 1)));
        }
        Ok(Self {
            vocab,
            docs,
            collection_of,
            num_collections,
            members,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn num_collections(&self) -> usize {
        self.num_collections
    }

    pub fn num_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn doc(&self, d: usize) -> &[u32] {
        &self.docs[d]
    }

    pub fn docs(&self) -> &[Vec<u32>] {
        &self.docs
    }

    pub fn collection_of(&self, d: usize) -> usize {
        self.collection_of[d]
    }

    pub fn collections(&self) -> &[usize] {
        &self.collection_of
    }

    /// Document indices of collection `j`, in corpus order.
    pub fn members(&self, j: usize) -> &[usize] {
        &self.members[j]
    }

    /// The same documents treated as one collection.
    pub fn flattened(&self) -> Corpus {
        Corpus::new(
            self.vocab.clone(),
            self.docs.clone(),
            vec![0; self.docs.len()],
            1,
        )
        .expect("flattening keeps invariants")
    }

    /// Documents of collection `j` as a single-collection corpus.
    pub fn collection_slice(&self, j: usize) -> Corpus {
        let docs = self.members[j].iter().map(|&d| self.docs[d].clone()).collect::<Vec<_>>();
        let n = docs.len();
        Corpus::new(self.vocab.clone(), docs, vec![0; n], 1).expect("slice keeps invariants")
    }

    /// Per-term occurrence counts over the whole corpus.
    pub fn term_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.vocab_size()];
        for doc in &self.docs {
            for &w in doc {
                counts[w as usize] += 1;
            }
        }
        counts
    }
}
