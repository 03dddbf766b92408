//! Text cleaning, tokenization, stop-word removal, and TF-IDF featurization.
//!
//! The vectorizer uses raw term counts, smoothed idf `ln((1 + N) / (1 + df)) + 1`,
//! and L2 row normalization.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");

/// A set of lowercase terms dropped during tokenization.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Stoplist(HashSet<String>);

impl Stoplist {
    /// The bundled English list of common function words.
    pub fn english() -> Self {
        Self::parse(BUNDLED_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    /// One term per line; blank lines ignored; terms are lowercased.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = HashSet::new();
        for line in reader.lines() {
            let term = line?.trim().to_lowercase();
            if !term.is_empty() {
                out.insert(term);
            }
        }
        Ok(Self(out))
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self(iter.into_iter().map(Into::into).collect())
    }
}

/// Lowercased terms in document order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub tokens: Vec<String>,
}

impl TokenSeq {
    pub fn new(tokens: Vec<String>) -> Self {
        Self { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self::new(iter.into_iter().map(Into::into).collect())
    }
}

/// Trims, lowercases, collapses whitespace, and drops URL and mention tokens.
pub fn clean_text(raw: &str) -> String {
    raw.to_lowercase()
        .split_whitespace()
        .filter(|t| !t.starts_with("http") && !t.starts_with('@'))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Splits cleaned text on whitespace, strips punctuation from token edges, and
/// removes empty tokens and stop words. Intra-token hyphens and apostrophes survive.
pub fn tokenize(cleaned: &str, stoplist: &Stoplist) -> TokenSeq {
    cleaned
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty() && !stoplist.contains(t))
        .map(str::to_owned)
        .collect()
}

/// `clean_text` followed by `tokenize`.
pub fn preprocess(raw: &str, stoplist: &Stoplist) -> TokenSeq {
    tokenize(&clean_text(raw), stoplist)
}

/// Dense TF-IDF row; L2-normalized whenever any vocabulary term matched.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfModel {
    /// term → column, assigned in lexicographic order
    vocabulary: BTreeMap<String, usize>,
    /// indexed by column
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

fn smooth_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Fits vocabulary, document frequencies and idf weights.
pub fn fit_tfidf(corpus: &[TokenSeq]) -> Result<TfidfModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("TF-IDF corpus"));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in corpus {
        let unique: HashSet<&str> = doc.tokens.iter().map(String::as_str).collect();
        for t in unique {
            *df.entry(t).or_default() += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::EmptyVocabulary);
    }
    let n_docs = corpus.len();
    let vocabulary = df.keys().enumerate().map(|(i, t)| ((*t).to_owned(), i)).collect();
    let doc_freq: Vec<usize> = df.values().copied().collect();
    let idf = doc_freq.iter().map(|&d| smooth_idf(n_docs, d)).collect();
    Ok(TfidfModel {
        vocabulary,
        doc_freq,
        idf,
        n_docs,
    })
}

impl TfidfModel {
    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }

    /// Terms in column order.
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.vocabulary.keys().map(String::as_str)
    }

    pub fn transform(&self, doc: &TokenSeq) -> FeatureVector {
        let mut v = vec![0.0; self.vocab_size()];
        for t in &doc.tokens {
            if let Some(i) = self.index_of(t) {
                v[i] += self.idf[i];
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        FeatureVector(v)
    }

    /// Audit manifest: header lines then `term<TAB>index<TAB>doc_freq<TAB>idf` rows.
    pub fn manifest(&self) -> String {
        let mut out = String::from("# tfidf-manifest v1\n");
        writeln!(out, "# n_docs\t{}", self.n_docs).expect("write to String");
        for (term, &i) in &self.vocabulary {
            writeln!(out, "{term}\t{i}\t{}\t{}", self.doc_freq[i], self.idf[i]).expect("write to String");
        }
        out
    }

    /// Hex SHA-256 of the manifest text.
    pub fn manifest_hash(&self) -> String {
        manifest_hash(&self.manifest())
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Manifest(msg);
        let mut lines = text.lines();
        if lines.next() != Some("# tfidf-manifest v1") {
            return Err(bad("missing `# tfidf-manifest v1` header".into()));
        }
        let n_docs = lines
            .next()
            .and_then(|l| l.strip_prefix("# n_docs\t"))
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| bad("missing `# n_docs` line".into()))?;
        let mut vocabulary = BTreeMap::new();
        let mut doc_freq = Vec::new();
        let mut idf = Vec::new();
        for (row, line) in lines.enumerate() {
            let fields: Vec<&str> = line.split('\t').collect();
            let parsed = match fields.as_slice() {
                [term, index, df, w] => index
                    .parse::<usize>()
                    .ok()
                    .zip(df.parse::<usize>().ok())
                    .zip(w.parse::<f64>().ok())
                    .map(|((i, d), w)| (*term, i, d, w)),
                _ => None,
            };
            let (term, index, df, w) = parsed.ok_or_else(|| bad(format!("row {}: malformed `{line}`", row + 1)))?;
            if index != row {
                return Err(bad(format!("row {}: index {index} out of order", row + 1)));
            }
            vocabulary.insert(term.to_owned(), index);
            doc_freq.push(df);
            idf.push(w);
        }
        if vocabulary.len() != doc_freq.len() {
            return Err(bad("duplicate terms".into()));
        }
        if vocabulary.values().enumerate().any(|(pos, &i)| pos != i) {
            return Err(bad("indices are not in lexicographic term order".into()));
        }
        Ok(Self {
            vocabulary,
            doc_freq,
            idf,
            n_docs,
        })
    }
}

pub fn manifest_hash(manifest: &str) -> String {
    Sha256::digest(manifest.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            write!(s, "{b:02x}").expect("write to String");
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(words: &[&str]) -> TokenSeq {
        words.iter().copied().collect()
    }

    #[test]
    fn cleaning() {
        assert_eq!(clean_text("  Hijacking NOW  "), "hijacking now");
        assert_eq!(clean_text(""), "");
        assert_eq!(clean_text("Report @SAPS https://t.co/x hijacking"), "report hijacking");
        assert_eq!(clean_text("a\t\tb\n c"), "a b c");
    }

    #[test]
    fn tokenizing() {
        let stop: Stoplist = ["a", "at", "the"].into_iter().collect();
        assert_eq!(tokenize("a hijacking at the mall", &stop), seq(&["hijacking", "mall"]));
        assert_eq!(tokenize("hijacking, cape town!", &Stoplist::empty()), seq(&["hijacking", "cape", "town"]));
        let the: Stoplist = ["the"].into_iter().collect();
        assert!(tokenize("the the the", &the).is_empty());
        assert_eq!(tokenize("bo-kaap's (n2) --", &Stoplist::empty()), seq(&["bo-kaap's", "n2"]));
    }

    #[test]
    fn bundled_stoplist() {
        let s = Stoplist::english();
        assert!(s.len() > 150);
        assert!(s.contains("the") && s.contains("at"));
        assert!(!s.contains("hijacking"));
    }

    #[test]
    fn two_document_fit() {
        let m = fit_tfidf(&[seq(&["hijacking", "cape", "town"]), seq(&["cape", "town", "traffic"])]).unwrap();
        assert_eq!(m.terms().collect::<Vec<_>>(), ["cape", "hijacking", "town", "traffic"]);
        assert_eq!(m.doc_freq("hijacking"), Some(1));
        assert_eq!(m.doc_freq("cape"), Some(2));
        assert!((m.idf("hijacking").unwrap() - ((1.5f64).ln() + 1.0)).abs() < 1e-15);
        assert!((m.idf("hijacking").unwrap() - 1.4055).abs() < 5e-5);
        assert_eq!(m.idf("cape"), Some(1.0));
    }

    #[test]
    fn two_document_transform() {
        let m = fit_tfidf(&[seq(&["hijacking", "cape", "town"]), seq(&["cape", "town", "traffic"])]).unwrap();
        let v = m.transform(&seq(&["hijacking", "cape", "town"]));
        let expected = [("cape", 0.5015), ("hijacking", 0.7049), ("town", 0.5015), ("traffic", 0.0)];
        for (term, want) in expected {
            assert!((v.0[m.index_of(term).unwrap()] - want).abs() < 5e-5, "{term}");
        }
    }

    #[test]
    fn single_term() {
        let m = fit_tfidf(&[seq(&["x"])]).unwrap();
        assert_eq!(m.idf("x"), Some(1.0));
        assert_eq!(m.transform(&seq(&["x"])).0, vec![1.0]);
        assert_eq!(m.transform(&seq(&["y", "z"])).0, vec![0.0]);
    }

    #[test]
    fn fit_errors_and_determinism() {
        assert!(matches!(fit_tfidf(&[]), Err(Error::Empty(_))));
        assert!(matches!(fit_tfidf(&[TokenSeq::default(), TokenSeq::default()]), Err(Error::EmptyVocabulary)));
        let docs = [seq(&["b", "a"]), seq(&["c"])];
        assert_eq!(fit_tfidf(&docs).unwrap(), fit_tfidf(&docs).unwrap());
    }

    #[test]
    fn manifest_round_trip() {
        let m = fit_tfidf(&[seq(&["hijacking", "cape", "town"]), seq(&["cape", "town", "traffic"])]).unwrap();
        let text = m.manifest();
        assert!(text.contains("hijacking\t1\t1\t"));
        let back = TfidfModel::from_manifest(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.manifest_hash(), m.manifest_hash());
        assert_eq!(m.manifest_hash().len(), 64);
        assert!(TfidfModel::from_manifest("junk").is_err());
    }
}
