use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{Corpus, Vocabulary};
use crate::error::{Error, Result};

pub const BOW_FILE: &str = "corpus.bow";
pub const LABELS_FILE: &str = "corpus.labels";
pub const VOCAB_FILE: &str = "corpus.vocab";

/// Paths making up one corpus on disk. Labels and vocabulary are optional:
/// without labels every document is in collection 1, without a vocabulary
/// placeholder terms are generated.
#[derive(Clone, Debug)]
pub struct CorpusFiles {
    pub bow: PathBuf,
    pub labels: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
}

impl CorpusFiles {
    /// The standard file names inside `dir`, keeping only those that exist
    /// for the optional parts.
    pub fn in_dir(dir: &Path) -> Self {
        let opt = |name: &str| {
            let p = dir.join(name);
            p.exists().then_some(p)
        };
        Self {
            bow: dir.join(BOW_FILE),
            labels: opt(LABELS_FILE),
            vocab: opt(VOCAB_FILE),
        }
    }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| {
        Error::data(format!("cannot read {}: {e}", path.display()))
    })
}

fn parse_bow_line(path: &Path, lineno: usize, line: &str) -> Result<Vec<u32>> {
    let mut fields = line.split_ascii_whitespace();
    let head = fields
        .next()
        .ok_or_else(|| parse_err(path, lineno, "empty line"))?;
    let unique: usize = head
        .parse()
        .map_err(|_| parse_err(path, lineno, format!("bad term count '{head}'")))?;
    let mut tokens = Vec::new();
    let mut seen = 0usize;
    let mut last: Option<u32> = None;
    for field in fields {
        let (id, count) = field
            .split_once(':')
            .ok_or_else(|| parse_err(path, lineno, format!("expected id:count, got '{field}'")))?;
        let id: u32 = id
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad word id '{id}'")))?;
        let count: u32 = count
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad count '{count}'")))?;
        if count == 0 {
            return Err(parse_err(path, lineno, format!("zero count for word {id}")));
        }
        if last.is_some_and(|l| id <= l) {
            return Err(parse_err(
                path,
                lineno,
                format!("word ids must be strictly increasing (at {id})"),
            ));
        }
        last = Some(id);
        tokens.extend(std::iter::repeat_n(id, count as usize));
        seen += 1;
    }
    if seen != unique {
        return Err(parse_err(
            path,
            lineno,
            format!("header says {unique} terms but line has {seen}"),
        ));
    }
    if tokens.is_empty() {
        return Err(parse_err(path, lineno, "document has no words"));
    }
    Ok(tokens)
}

fn parse_bow(path: &Path) -> Result<Vec<Vec<u32>>> {
    let text = read(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_bow_line(path, i + 1, line))
        .collect()
}

fn parse_labels(path: &Path, expected: usize, num_collections: Option<usize>) -> Result<(Vec<usize>, usize)> {
    let text = read(path)?;
    let mut labels = Vec::with_capacity(expected);
    for (i, line) in text.lines().enumerate() {
        let s = line.trim();
        let label: usize = s
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("bad collection label '{s}'")))?;
        if label == 0 {
            return Err(parse_err(path, i + 1, "collection labels are 1-based"));
        }
        if let Some(j) = num_collections {
            if label > j {
                return Err(parse_err(
                    path,
                    i + 1,
                    format!("label {label} exceeds the {j} declared collections"),
                ));
            }
        }
        labels.push(label - 1);
    }
    if labels.len() != expected {
        return Err(Error::data(format!(
            "{}: {} labels for {expected} documents",
            path.display(),
            labels.len()
        )));
    }
    let j = num_collections.unwrap_or_else(|| labels.iter().max().map_or(1, |m| m + 1));
    Ok((labels, j))
}

fn parse_vocab(path: &Path) -> Result<Vocabulary> {
    let text = read(path)?;
    let terms: Vec<String> = text.lines().map(str::to_owned).collect();
    for (i, t) in terms.iter().enumerate() {
        if t.is_empty() || t.chars().any(char::is_whitespace) {
            return Err(parse_err(path, i + 1, "term is empty or contains whitespace"));
        }
    }
    Vocabulary::new(terms)
}

/// Loads a corpus. `num_collections`, when given, fixes `J` and makes any
/// larger label an error.
pub fn load_corpus(files: &CorpusFiles, num_collections: Option<usize>) -> Result<Corpus> {
    let docs = parse_bow(&files.bow)?;
    let vocab = match &files.vocab {
        Some(p) => parse_vocab(p)?,
        None => {
            let v = docs.iter().flatten().max().map_or(0, |&m| m as usize + 1);
            Vocabulary::synthetic(v)
        }
    };
    let (labels, j) = match &files.labels {
        Some(p) => parse_labels(p, docs.len(), num_collections)?,
        None => (vec![0; docs.len()], num_collections.unwrap_or(1)),
    };
    Corpus::new(vocab, docs, labels, j)
}

pub fn load_corpus_dir(dir: &Path) -> Result<Corpus> {
    let files = CorpusFiles::in_dir(dir);
    if !files.bow.exists() {
        return Err(Error::data(format!("no {BOW_FILE} in {}", dir.display())));
    }
    load_corpus(&files, None)
}

/// Writes `corpus.bow`, `corpus.labels` and `corpus.vocab` into `dir`.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut bow = BufWriter::new(fs::File::create(dir.join(BOW_FILE))?);
    for doc in corpus.docs() {
        let mut runs: Vec<(u32, u32)> = Vec::new();
        for &w in doc {
            match runs.last_mut() {
                Some((id, c)) if *id == w => *c += 1,
                _ => runs.push((w, 1)),
            }
        }
        write!(bow, "{}", runs.len())?;
        for (id, c) in runs {
            write!(bow, " {id}:{c}")?;
        }
        writeln!(bow)?;
    }
    bow.flush()?;
    let mut labels = BufWriter::new(fs::File::create(dir.join(LABELS_FILE))?);
    for &j in corpus.collections() {
        writeln!(labels, "{}", j + 1)?;
    }
    labels.flush()?;
    let mut vocab = BufWriter::new(fs::File::create(dir.join(VOCAB_FILE))?);
    for t in corpus.vocab().terms() {
        writeln!(vocab, "{t}")?;
    }
    vocab.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn expands_counts_in_ascending_id_order() {
        let tokens = parse_bow_line(Path::new("x"), 1, "3 0:2 5:1 7:4").unwrap();
        assert_eq!(tokens, vec![0, 0, 5, 7, 7, 7, 7]);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let bow = write(dir.path(), "a.bow", "1 0:1\n2 1:1\n");
        let err = load_corpus(&CorpusFiles { bow, labels: None, vocab: None }, None).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");

        let bow = write(dir.path(), "b.bow", "1 0:1\n1 x:1\n");
        let err = load_corpus(&CorpusFiles { bow, labels: None, vocab: None }, None).unwrap_err();
        assert!(err.to_string().contains(":2:"), "{err}");
    }

    #[test]
    fn label_out_of_range_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let bow = write(dir.path(), "c.bow", "1 0:1\n1 1:1\n1 0:2\n");
        let labels = write(dir.path(), "c.labels", "1\n2\n3\n");
        let files = CorpusFiles { bow, labels: Some(labels), vocab: None };
        let err = load_corpus(&files, Some(2)).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        assert_eq!(load_corpus(&files, None).unwrap().num_collections(), 3);
    }

    #[test]
    fn label_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let bow = write(dir.path(), "d.bow", "1 0:1\n1 1:1\n");
        let labels = write(dir.path(), "d.labels", "1\n");
        let files = CorpusFiles { bow, labels: Some(labels), vocab: None };
        assert!(load_corpus(&files, None).is_err());
    }

    #[test]
    fn word_id_beyond_vocabulary() {
        let dir = tempfile::tempdir().unwrap();
        let bow = write(dir.path(), "e.bow", "1 4:1\n");
        let vocab = write(dir.path(), "e.vocab", "a\nb\n");
        let files = CorpusFiles { bow, labels: None, vocab: Some(vocab) };
        assert!(load_corpus(&files, None).is_err());
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocabulary::new(vec!["x".into(), "y".into(), "z".into()]).unwrap();
        let c = Corpus::new(vocab, vec![vec![2, 0, 2], vec![1], vec![0, 1, 2]], vec![1, 0, 1], 2)
            .unwrap();
        save_corpus(&c, dir.path()).unwrap();
        assert_eq!(load_corpus_dir(dir.path()).unwrap(), c);
    }
}
