use std::collections::{BTreeSet, HashMap, HashSet};

use super::{Corpus, Vocabulary};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct PreprocessOptions {
    pub stopwords: HashSet<String>,
    /// Minimum corpus-wide frequency of a kept term.
    pub min_count: usize,
    /// Minimum term length in characters.
    pub min_len: usize,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            stopwords: HashSet::new(),
            min_count: 1,
            min_len: 1,
        }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Turns raw documents into a corpus. `labels` gives each raw document's
/// 0-based collection; when absent all documents share one collection.
/// Documents left empty by filtering are dropped along with their labels.
pub fn preprocess(
    raw_docs: &[String],
    labels: Option<&[usize]>,
    opts: &PreprocessOptions,
) -> Result<Corpus> {
    if raw_docs.is_empty() {
        return Err(Error::data("no input documents"));
    }
    if let Some(l) = labels {
        if l.len() != raw_docs.len() {
            return Err(Error::data(format!(
                "{} labels for {} documents",
                l.len(),
                raw_docs.len()
            )));
        }
    }
    let keep = |t: &str| {
        t.chars().count() >= opts.min_len
            && !opts.stopwords.contains(t)
            && !t.chars().all(char::is_numeric)
    };
    let tokenized: Vec<Vec<String>> = raw_docs
        .iter()
        .map(|d| tokenize(d).into_iter().filter(|t| keep(t)).collect())
        .collect();

    let mut freq: HashMap<&str, usize> = HashMap::new();
    for doc in &tokenized {
        for t in doc {
            *freq.entry(t).or_default() += 1;
        }
    }
    let terms: BTreeSet<&str> = freq
        .iter()
        .filter(|(_, &c)| c >= opts.min_count)
        .map(|(&t, _)| t)
        .collect();
    if terms.is_empty() {
        return Err(Error::data("corpus is empty after filtering"));
    }
    let vocab = Vocabulary::new(terms.iter().map(|t| t.to_string()).collect())?;

    let num_collections = labels.map_or(1, |l| l.iter().max().map_or(1, |m| m + 1));
    let mut docs = Vec::new();
    let mut collection_of = Vec::new();
    for (i, doc) in tokenized.iter().enumerate() {
        let ids: Vec<u32> = doc.iter().filter_map(|t| vocab.id(t)).collect();
        if ids.is_empty() {
            continue;
        }
        docs.push(ids);
        collection_of.push(labels.map_or(0, |l| l[i]));
    }
    if docs.is_empty() {
        return Err(Error::data("corpus is empty after filtering"));
    }
    Corpus::new(vocab, docs, collection_of, num_collections)
}

/// Space-joined terms of each document, in stored token order.
pub fn detokenize(corpus: &Corpus) -> Vec<String> {
    corpus
        .docs()
        .iter()
        .map(|doc| {
            doc.iter()
                .map(|&w| corpus.vocab().term(w))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn opts(stop: &[&str], min_count: usize, min_len: usize) -> PreprocessOptions {
        PreprocessOptions {
            stopwords: stop.iter().map(|s| s.to_string()).collect(),
            min_count,
            min_len,
        }
    }

    fn docs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn drops_stopwords() {
        let c = preprocess(&docs(&["the cat sat", "the dog"]), None, &opts(&["the"], 1, 2)).unwrap();
        assert_eq!(c.vocab_size(), 3);
        assert_eq!(c.num_docs(), 2);
        let mut terms = c.vocab().terms().to_vec();
        terms.sort();
        assert_eq!(terms, vec!["cat", "dog", "sat"]);
    }

    #[test]
    fn min_count_empties_corpus() {
        let r = preprocess(&docs(&["the cat sat", "the dog"]), None, &opts(&["the"], 2, 2));
        assert!(r.is_err());
    }

    #[test]
    fn frequency_filter_keeps_repeated_term() {
        let raw: Vec<String> = (0..10)
            .map(|i| if i < 5 { format!("data word{i}") } else { format!("other{i}") })
            .collect();
        let c = preprocess(&raw, None, &opts(&[], 2, 1)).unwrap();
        assert_eq!(c.vocab().terms(), &["data".to_string()]);
        assert_eq!(c.num_docs(), 5);
    }

    #[test]
    fn lowercases_and_drops_numbers_and_short_tokens() {
        let c = preprocess(&docs(&["Hello, WORLD! 42 a x1"]), None, &opts(&[], 1, 2)).unwrap();
        assert_eq!(c.vocab().terms(), &["hello", "world", "x1"]);
    }

    #[test]
    fn empty_collection_is_an_error() {
        let raw = docs(&["alpha beta", "the"]);
        assert!(preprocess(&raw, Some(&[0, 1]), &opts(&["the"], 1, 1)).is_err());
        let c = preprocess(&raw, Some(&[0, 0]), &opts(&["the"], 1, 1)).unwrap();
        assert_eq!(c.num_docs(), 1);
    }

    proptest! {
        #[test]
        fn preprocessing_is_idempotent(
            raw in prop::collection::vec("[a-zA-Z0-9 ,.]{0,40}", 1..8),
            min_count in 1usize..3,
            min_len in 1usize..4,
        ) {
            let o = opts(&["the", "and"], min_count, min_len);
            if let Ok(c) = preprocess(&raw, None, &o) {
                let again = preprocess(&detokenize(&c), None, &o).unwrap();
                prop_assert_eq!(again, c);
            }
        }
    }
}
