//! Seeded generator of rule-labeled corpora for desk-scale experiments.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Document, Label, Token, PUNCT};
use crate::error::{Error, Result};

const FILLER_TAGS: [&str; 8] = ["NOUN", "VERB", "ADJ", "ADV", "DET", "PRON", "ADP", "CCONJ"];
const CONNECTIVE_TAG: &str = "CCONJ";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// B on the token following a PUNCT token.
    AfterPunct,
    /// B on every connective token.
    Connective,
    /// B on every sentence-initial token.
    SentenceStart,
}

impl FromStr for BoundaryRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "a" | "punct" => Ok(BoundaryRule::AfterPunct),
            "b" | "connective" => Ok(BoundaryRule::Connective),
            "c" | "sentence" => Ok(BoundaryRule::SentenceStart),
            other => Err(Error::Config(format!("unknown boundary rule `{other}`"))),
        }
    }
}

impl fmt::Display for BoundaryRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryRule::AfterPunct => "punct",
            BoundaryRule::Connective => "connective",
            BoundaryRule::SentenceStart => "sentence",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_docs: usize,
    /// Inclusive token-length range of each document.
    pub doc_len: (usize, usize),
    pub rules: Vec<BoundaryRule>,
    /// Number of distinct filler words.
    pub vocab_size: usize,
    pub seed: u64,
    pub connectives: Vec<String>,
    /// Probability that a clause opens with a connective.
    pub connective_rate: f64,
    /// Filler words are `{word_prefix}{k}`; distinct prefixes give disjoint
    /// filler vocabularies.
    pub word_prefix: String,
    pub id_prefix: String,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_docs: 100,
            doc_len: (10, 30),
            rules: vec![BoundaryRule::Connective],
            vocab_size: 200,
            seed: 1,
            connectives: ["and", "but", "because", "while"].map(String::from).to_vec(),
            connective_rate: 0.5,
            word_prefix: "w".into(),
            id_prefix: "doc".into(),
        }
    }
}

impl SyntheticSpec {
    /// Parses a `key = value` file. Unset keys keep their defaults; `#`
    /// starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut spec = SyntheticSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", idx + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |what: &str| Error::Config(format!("line {}: invalid {what} `{value}`", idx + 1));
            match key {
                "n_docs" => spec.n_docs = value.parse().map_err(|_| bad(key))?,
                "doc_len" => {
                    let (lo, hi) = value.split_once('-').ok_or_else(|| bad(key))?;
                    spec.doc_len = (
                        lo.trim().parse().map_err(|_| bad(key))?,
                        hi.trim().parse().map_err(|_| bad(key))?,
                    );
                }
                "doc_len_min" => spec.doc_len.0 = value.parse().map_err(|_| bad(key))?,
                "doc_len_max" => spec.doc_len.1 = value.parse().map_err(|_| bad(key))?,
                "rules" | "boundary_rules" => {
                    spec.rules = value
                        .split(',')
                        .filter(|s| !s.trim().is_empty())
                        .map(str::parse)
                        .collect::<Result<_>>()?;
                }
                "vocab_size" => spec.vocab_size = value.parse().map_err(|_| bad(key))?,
                "seed" => spec.seed = value.parse().map_err(|_| bad(key))?,
                "connectives" => {
                    spec.connectives = value
                        .split(',')
                        .map(|s| s.trim().to_string())
                        .filter(|s| !s.is_empty())
                        .collect();
                }
                "connective_rate" => spec.connective_rate = value.parse().map_err(|_| bad(key))?,
                "word_prefix" => spec.word_prefix = value.to_string(),
                "id_prefix" => spec.id_prefix = value.to_string(),
                other => return Err(Error::Config(format!("line {}: unknown key `{other}`", idx + 1))),
            }
        }
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    fn validate(&self) -> Result<()> {
        if self.rules.is_empty() {
            return Err(Error::Config("synthetic corpus needs at least one boundary rule".into()));
        }
        let (lo, hi) = self.doc_len;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("invalid document length range {lo}-{hi}")));
        }
        if self.vocab_size == 0 {
            return Err(Error::Config("vocab_size must be positive".into()));
        }
        if self.rules.contains(&BoundaryRule::Connective) && self.connectives.is_empty() {
            return Err(Error::Config("the connective rule needs a connective set".into()));
        }
        if !(0.0..=1.0).contains(&self.connective_rate) {
            return Err(Error::Config("connective_rate must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn filler(&self, k: usize) -> Token {
        Token::new(format!("{}{k}", self.word_prefix), FILLER_TAGS[k % FILLER_TAGS.len()])
    }
}

/// Generates `spec.n_docs` documents whose gold labels follow `spec.rules`.
///
/// Documents are built from sentences of one to three clauses. Clauses may
/// be separated by a comma and may open with a connective; each sentence ends
/// with a period. The first token of a document is always B.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<Document>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut docs = Vec::with_capacity(spec.n_docs);
    for d in 0..spec.n_docs {
        let target = rng.random_range(spec.doc_len.0..=spec.doc_len.1);
        let mut tokens: Vec<Token> = Vec::with_capacity(target + 8);
        let mut connective_at = Vec::new();
        while tokens.len() < target {
            let sentence_start = tokens.len();
            let clauses = rng.random_range(1..=3);
            for k in 0..clauses {
                if k > 0 && rng.random_bool(0.5) {
                    tokens.push(Token::new(",", PUNCT));
                }
                if !spec.connectives.is_empty() && rng.random_bool(spec.connective_rate) {
                    let c = &spec.connectives[rng.random_range(0..spec.connectives.len())];
                    connective_at.push(tokens.len());
                    tokens.push(Token::new(c.clone(), CONNECTIVE_TAG));
                }
                for _ in 0..rng.random_range(2..=5) {
                    tokens.push(spec.filler(rng.random_range(0..spec.vocab_size)));
                }
            }
            tokens.push(Token::new(".", PUNCT));
            tokens[sentence_start].sent_start = true;
        }
        tokens.truncate(target);

        let mut labels = vec![Label::I; tokens.len()];
        labels[0] = Label::B;
        for rule in &spec.rules {
            match rule {
                BoundaryRule::AfterPunct => {
                    for i in 1..tokens.len() {
                        if tokens[i - 1].is_punct() {
                            labels[i] = Label::B;
                        }
                    }
                }
                BoundaryRule::Connective => {
                    for &i in connective_at.iter().filter(|&&i| i < tokens.len()) {
                        labels[i] = Label::B;
                    }
                }
                BoundaryRule::SentenceStart => {
                    for (i, t) in tokens.iter().enumerate() {
                        if t.sent_start {
                            labels[i] = Label::B;
                        }
                    }
                }
            }
        }
        for (t, l) in tokens.iter_mut().zip(labels) {
            t.gold_label = Some(l);
        }
        docs.push(Document::new(format!("{}-{d}", spec.id_prefix), tokens));
    }
    Ok(docs)
}
