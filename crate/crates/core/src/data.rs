//! Corpus representation and I/O.
//!
//! Documents are stored in the DOCSEG text format: one token per line as
//! `surface<TAB>upos<TAB>label<TAB>sentflag`, a `# id = <string>` comment
//! before each document and a blank line between documents. `label` is one
//! of `B`, `I` or `_` (unlabeled); `sentflag` is `S` on sentence-initial
//! tokens and `-` elsewhere.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

mod embeddings;
mod synthetic;

pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingTable};
pub use synthetic::{generate_synthetic, BoundaryRule, SyntheticSpec};

/// Universal POS tag for punctuation.
pub const PUNCT: &str = "PUNCT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    /// Begins an EDU.
    B,
    /// Inside an EDU.
    I,
}

impl Label {
    /// Output class index: B is 0, I is 1.
    pub fn class(self) -> usize {
        match self {
            Label::B => 0,
            Label::I => 1,
        }
    }

    pub fn from_class(class: usize) -> Option<Label> {
        match class {
            0 => Some(Label::B),
            1 => Some(Label::I),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::B => "B",
            Label::I => "I",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "B" => Ok(Label::B),
            "I" => Ok(Label::I),
            other => Err(format!("invalid label `{other}`, expected B or I")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub surface: String,
    pub upos: String,
    pub gold_label: Option<Label>,
    pub sent_start: bool,
}

impl Token {
    pub fn new(surface: impl Into<String>, upos: impl Into<String>) -> Self {
        Token {
            surface: surface.into(),
            upos: upos.into(),
            gold_label: None,
            sent_start: false,
        }
    }

    pub fn labeled(surface: impl Into<String>, upos: impl Into<String>, label: Label) -> Self {
        Token {
            gold_label: Some(label),
            ..Token::new(surface, upos)
        }
    }

    pub fn is_punct(&self) -> bool {
        self.upos == PUNCT
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<Token>,
}

impl Document {
    pub fn new(id: impl Into<String>, tokens: Vec<Token>) -> Self {
        Document {
            id: id.into(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Gold labels, if every token carries one.
    pub fn gold_labels(&self) -> Option<Vec<Label>> {
        self.tokens.iter().map(|t| t.gold_label).collect()
    }

    pub fn has_sentence_marks(&self) -> bool {
        self.tokens.iter().any(|t| t.sent_start)
    }

    /// Copy of the document with `labels` as its gold column.
    pub fn with_labels(&self, labels: &[Label]) -> Result<Document> {
        if labels.len() != self.tokens.len() {
            return Err(Error::Contract(format!(
                "document `{}` has {} tokens but {} labels were given",
                self.id,
                self.tokens.len(),
                labels.len()
            )));
        }
        let tokens = self
            .tokens
            .iter()
            .zip(labels)
            .map(|(t, &l)| Token {
                gold_label: Some(l),
                ..t.clone()
            })
            .collect();
        Ok(Document::new(self.id.clone(), tokens))
    }

    /// Checks the structural invariants of a document.
    pub fn validate(&self) -> Result<()> {
        let first = self
            .tokens
            .first()
            .ok_or_else(|| Error::Data(format!("document `{}` is empty", self.id)))?;
        for (i, t) in self.tokens.iter().enumerate() {
            if t.surface.is_empty() || t.upos.is_empty() {
                return Err(Error::Data(format!(
                    "document `{}` token {i} has an empty surface or POS tag",
                    self.id
                )));
            }
        }
        if first.gold_label == Some(Label::I) {
            return Err(Error::Data(format!(
                "document `{}` starts with label I; the first token always begins an EDU",
                self.id
            )));
        }
        if self.has_sentence_marks() && !first.sent_start {
            return Err(Error::Data(format!(
                "document `{}` has sentence marks but its first token is not sentence-initial",
                self.id
            )));
        }
        Ok(())
    }
}

/// Corpus counts in the layout of the usual corpus statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CorpusStats {
    pub documents: usize,
    pub edus: usize,
    pub sentences: usize,
    pub words: usize,
}

impl CorpusStats {
    pub fn of(docs: &[Document]) -> Self {
        let mut s = CorpusStats {
            documents: docs.len(),
            ..Default::default()
        };
        for t in docs.iter().flat_map(|d| &d.tokens) {
            s.words += 1;
            s.edus += usize::from(t.gold_label == Some(Label::B));
            s.sentences += usize::from(t.sent_start);
        }
        s
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "documents\t{}", self.documents)?;
        writeln!(f, "edus\t{}", self.edus)?;
        writeln!(f, "sentences\t{}", self.sentences)?;
        write!(f, "words\t{}", self.words)
    }
}

pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_docseg(&text, &path.display().to_string())
}

/// Parses DOCSEG text. `origin` is used in error messages.
pub fn parse_docseg(text: &str, origin: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut id: Option<String> = None;
    let mut tokens: Vec<Token> = Vec::new();
    let mut start_line = 0;

    let mut flush = |id: &mut Option<String>, tokens: &mut Vec<Token>, line: usize| -> Result<()> {
        if tokens.is_empty() {
            if let Some(id) = id.take() {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    line,
                    message: format!("document `{id}` has no tokens"),
                });
            }
            return Ok(());
        }
        let doc = Document::new(
            id.take().unwrap_or_else(|| format!("doc-{}", docs.len())),
            std::mem::take(tokens),
        );
        doc.validate().map_err(|e| Error::Parse {
            path: origin.to_string(),
            line,
            message: e.to_string(),
        })?;
        docs.push(doc);
        Ok(())
    };

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            flush(&mut id, &mut tokens, start_line)?;
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim_start().strip_prefix("id") {
                if let Some(value) = rest.trim_start().strip_prefix('=') {
                    if !tokens.is_empty() {
                        flush(&mut id, &mut tokens, start_line)?;
                    }
                    id = Some(value.trim().to_string());
                    start_line = lineno;
                }
            }
            continue;
        }
        if tokens.is_empty() && id.is_none() {
            start_line = lineno;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno,
                message: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        if fields[0].is_empty() || fields[1].is_empty() {
            return Err(Error::Parse {
                path: origin.to_string(),
                line: lineno,
                message: "empty surface or POS field".into(),
            });
        }
        let gold_label = match fields[2] {
            "_" => None,
            other => Some(other.parse::<Label>().map_err(|message| Error::Value {
                path: origin.to_string(),
                line: lineno,
                message,
            })?),
        };
        let sent_start = match fields[3] {
            "S" => true,
            "-" => false,
            other => {
                return Err(Error::Value {
                    path: origin.to_string(),
                    line: lineno,
                    message: format!("invalid sentence flag `{other}`, expected S or -"),
                })
            }
        };
        tokens.push(Token {
            surface: fields[0].to_string(),
            upos: fields[1].to_string(),
            gold_label,
            sent_start,
        });
    }
    flush(&mut id, &mut tokens, start_line)?;
    Ok(docs)
}

/// Renders documents as DOCSEG text using their gold label column.
pub fn format_docseg(docs: &[Document]) -> String {
    let mut out = String::new();
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str("# id = ");
        out.push_str(&doc.id);
        out.push('\n');
        for t in &doc.tokens {
            let label = t.gold_label.map_or("_".to_string(), |l| l.to_string());
            let flag = if t.sent_start { "S" } else { "-" };
            out.push_str(&format!("{}\t{}\t{}\t{}\n", t.surface, t.upos, label, flag));
        }
    }
    out
}

pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_docseg(docs)).map_err(|e| Error::io(path, e))
}

/// Writes `docs` with `labels` in the label column.
pub fn write_predictions(docs: &[Document], labels: &[Vec<Label>], path: impl AsRef<Path>) -> Result<()> {
    if docs.len() != labels.len() {
        return Err(Error::Contract(format!(
            "{} documents but {} label sequences",
            docs.len(),
            labels.len()
        )));
    }
    let labeled = docs
        .iter()
        .zip(labels)
        .map(|(d, l)| d.with_labels(l))
        .collect::<Result<Vec<_>>>()?;
    write_corpus(&labeled, path)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Unk,
    Word(String),
    Pos(String),
}

/// Index space shared by words and POS tags.
///
/// Words and tags live in separate maps, so the tag `NOUN` and the word
/// `NOUN` get distinct indices. Index 0 is reserved for unknown symbols.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocab {
    symbols: Vec<Symbol>,
    words: HashMap<String, usize>,
    tags: HashMap<String, usize>,
}

impl Vocab {
    pub const UNK: usize = 0;

    pub fn new() -> Self {
        Vocab {
            symbols: vec![Symbol::Unk],
            ..Default::default()
        }
    }

    /// Rebuilds a vocabulary from its symbols in index order.
    pub fn from_symbols(symbols: Vec<Symbol>) -> Result<Self> {
        if symbols.first() != Some(&Symbol::Unk) {
            return Err(Error::Format("vocabulary must start with the UNK symbol".into()));
        }
        let mut vocab = Vocab::new();
        for sym in symbols.into_iter().skip(1) {
            let before = vocab.len();
            match &sym {
                Symbol::Unk => return Err(Error::Format("UNK may only appear once".into())),
                Symbol::Word(w) => vocab.add_word(w),
                Symbol::Pos(p) => vocab.add_tag(p),
            };
            if vocab.len() == before {
                return Err(Error::Format(format!("duplicate vocabulary entry {sym:?}")));
            }
        }
        Ok(vocab)
    }

    pub fn add_word(&mut self, word: &str) -> usize {
        if let Some(&i) = self.words.get(word) {
            return i;
        }
        let i = self.symbols.len();
        self.symbols.push(Symbol::Word(word.to_string()));
        self.words.insert(word.to_string(), i);
        i
    }

    pub fn add_tag(&mut self, tag: &str) -> usize {
        if let Some(&i) = self.tags.get(tag) {
            return i;
        }
        let i = self.symbols.len();
        self.symbols.push(Symbol::Pos(tag.to_string()));
        self.tags.insert(tag.to_string(), i);
        i
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn word(&self, word: &str) -> Option<usize> {
        self.words.get(word).copied()
    }

    pub fn tag(&self, tag: &str) -> Option<usize> {
        self.tags.get(tag).copied()
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    /// `(index, word)` for every word entry.
    pub fn words(&self) -> impl Iterator<Item = (usize, &str)> {
        self.symbols.iter().enumerate().filter_map(|(i, s)| match s {
            Symbol::Word(w) => Some((i, w.as_str())),
            _ => None,
        })
    }
}

/// Collects every word and POS tag of `docs`, in first-appearance order.
///
/// Words that only occur in a pretrained embedding table are not added; they
/// encode as UNK.
pub fn build_vocab(docs: &[Document]) -> Result<Vocab> {
    if docs.is_empty() {
        return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
    }
    let mut vocab = Vocab::new();
    for t in docs.iter().flat_map(|d| &d.tokens) {
        vocab.add_word(&t.surface);
        vocab.add_tag(&t.upos);
    }
    Ok(vocab)
}

/// The interleaved word/POS view of a document.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSequence {
    /// `word, pos, word, pos, ...`, length `2T`.
    pub ids: Vec<usize>,
    /// Per-position labels when the document is fully labeled. POS
    /// positions are always I.
    pub labels: Option<Vec<Label>>,
    /// True at word positions.
    pub token_mask: Vec<bool>,
    pub unknown_words: usize,
    pub unknown_tags: usize,
}

impl EncodedSequence {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn encode_document(doc: &Document, vocab: &Vocab) -> Result<EncodedSequence> {
    if doc.is_empty() {
        return Err(Error::Data(format!("document `{}` is empty", doc.id)));
    }
    let n = doc.len() * 2;
    let mut ids = Vec::with_capacity(n);
    let mut token_mask = Vec::with_capacity(n);
    let mut unknown_words = 0;
    let mut unknown_tags = 0;
    for t in &doc.tokens {
        ids.push(vocab.word(&t.surface).unwrap_or_else(|| {
            unknown_words += 1;
            Vocab::UNK
        }));
        ids.push(vocab.tag(&t.upos).unwrap_or_else(|| {
            unknown_tags += 1;
            Vocab::UNK
        }));
        token_mask.extend([true, false]);
    }
    if unknown_tags > 0 {
        log::warn!(
            "document `{}`: {unknown_tags} POS tag(s) not in the vocabulary, encoded as UNK",
            doc.id
        );
    }
    let labels = doc
        .gold_labels()
        .map(|ls| ls.into_iter().flat_map(|l| [l, Label::I]).collect());
    Ok(EncodedSequence {
        ids,
        labels,
        token_mask,
        unknown_words,
        unknown_tags,
    })
}

/// A seeded train/dev/test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

/// Shuffles `docs` with `seed` and carves off `n_test` then `n_dev`
/// documents; the remainder is the training set.
pub fn split_corpus(docs: &[Document], n_test: usize, n_dev: usize, seed: u64) -> Result<CorpusSplit> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if n_test + n_dev > docs.len() {
        return Err(Error::Config(format!(
            "cannot take {n_test} test and {n_dev} dev documents from {}",
            docs.len()
        )));
    }
    let mut order: Vec<usize> = (0..docs.len()).collect();
    order.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    let pick = |range: &[usize]| range.iter().map(|&i| docs[i].clone()).collect();
    Ok(CorpusSplit {
        test: pick(&order[..n_test]),
        dev: pick(&order[n_test..n_test + n_dev]),
        train: pick(&order[n_test + n_dev..]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tok(s: &str, p: &str, l: Label, sent: bool) -> Token {
        Token {
            sent_start: sent,
            ..Token::labeled(s, p, l)
        }
    }

    fn two_docs() -> Vec<Document> {
        vec![
            Document::new(
                "d1",
                vec![
                    tok("He", "PRON", Label::B, true),
                    tok("said", "VERB", Label::I, false),
                    tok(".", "PUNCT", Label::I, false),
                ],
            ),
            Document::new(
                "d2",
                vec![
                    tok("Yes", "INTJ", Label::B, true),
                    tok("but", "CCONJ", Label::B, false),
                    tok("no", "INTJ", Label::I, false),
                ],
            ),
        ]
    }

    #[test]
    fn docseg_round_trip() {
        let docs = two_docs();
        let text = format_docseg(&docs);
        assert!(text.starts_with("# id = d1\nHe\tPRON\tB\tS\n"));
        let back = parse_docseg(&text, "mem").unwrap();
        assert_eq!(back, docs);
    }

    #[test]
    fn read_write_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.docseg");
        let docs = two_docs();
        let labels = vec![
            vec![Label::B, Label::B, Label::I],
            vec![Label::B, Label::I, Label::I],
        ];
        write_predictions(&docs, &labels, &path).unwrap();
        let back = read_corpus(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].id, "d1");
        assert_eq!(back[1].id, "d2");
        assert_eq!(back[0].gold_labels().unwrap(), labels[0]);
        assert_eq!(back[1].gold_labels().unwrap(), labels[1]);
        assert_eq!(back[1].tokens[1].surface, "but");
    }

    #[test]
    fn write_predictions_rejects_mismatch() {
        let docs = two_docs();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.docseg");
        let err = write_predictions(&docs, &[vec![], vec![]], &path).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
        let err = write_predictions(&docs, &[vec![Label::B; 3]], &path).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_docseg("# id = a\nx\tNOUN\tB\n", "f").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        let err = parse_docseg("# id = a\nx\tNOUN\tB\tS\ny\tNOUN\tX\t-\n", "f").unwrap_err();
        assert!(matches!(err, Error::Value { line: 3, .. }), "{err}");
        let err = parse_docseg("x\tNOUN\tB\tQ\n", "f").unwrap_err();
        assert!(matches!(err, Error::Value { line: 1, .. }), "{err}");
    }

    #[test]
    fn first_token_must_begin_an_edu() {
        let err = parse_docseg("# id = a\nx\tNOUN\tI\tS\n", "f").unwrap_err();
        assert!(err.to_string().contains("label I"), "{err}");
    }

    #[test]
    fn unlabeled_tokens_parse() {
        let docs = parse_docseg("a\tX\t_\t-\nb\tY\t_\t-\n", "f").unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].id, "doc-0");
        assert!(docs[0].gold_labels().is_none());
        assert!(!docs[0].has_sentence_marks());
    }

    #[test]
    fn single_edu_document_stats() {
        let docs = vec![Document::new(
            "one",
            vec![
                tok("a", "X", Label::B, true),
                tok("b", "X", Label::I, false),
                tok("c", "X", Label::I, false),
            ],
        )];
        let s = CorpusStats::of(&docs);
        assert_eq!(s.edus, 1);
        assert_eq!(s.words, 3);
        assert_eq!(s.sentences, 1);
    }

    #[test]
    fn stats_match_constructed_counts() {
        // 10 documents, each with 10 EDUs over 6 sentences and 30 words
        let docs: Vec<Document> = (0..10)
            .map(|d| {
                let tokens = (0..30)
                    .map(|i| {
                        let label = if i % 3 == 0 { Label::B } else { Label::I };
                        tok("w", "X", label, i % 5 == 0)
                    })
                    .collect();
                Document::new(format!("d{d}"), tokens)
            })
            .collect();
        let s = CorpusStats::of(&docs);
        assert_eq!(
            s,
            CorpusStats {
                documents: 10,
                edus: 100,
                sentences: 60,
                words: 300
            }
        );
    }

    #[test]
    fn vocab_counts_and_namespaces() {
        let docs = vec![Document::new(
            "d",
            vec![
                Token::new("a", "X"),
                Token::new("b", "Y"),
                Token::new("a", "Y"),
            ],
        )];
        let v = build_vocab(&docs).unwrap();
        assert_eq!(v.len(), 5);
        let again = build_vocab(&docs).unwrap();
        assert_eq!(v, again);

        let docs = vec![Document::new("d", vec![Token::new("NOUN", "NOUN")])];
        let v = build_vocab(&docs).unwrap();
        assert_eq!(v.len(), 3);
        assert_ne!(v.word("NOUN"), v.tag("NOUN"));
        assert!(build_vocab(&[]).is_err());
    }

    #[test]
    fn encode_interleaves_words_and_tags() {
        let doc = Document::new(
            "d",
            vec![
                Token::labeled("He", "PRON", Label::B),
                Token::labeled("said", "VERB", Label::I),
            ],
        );
        let v = build_vocab(std::slice::from_ref(&doc)).unwrap();
        let e = encode_document(&doc, &v).unwrap();
        let he = v.word("He").unwrap();
        let pron = v.tag("PRON").unwrap();
        let said = v.word("said").unwrap();
        let verb = v.tag("VERB").unwrap();
        assert_eq!(e.ids, vec![he, pron, said, verb]);
        assert_eq!(e.labels.unwrap(), vec![Label::B, Label::I, Label::I, Label::I]);
        assert_eq!(e.token_mask, vec![true, false, true, false]);
    }

    #[test]
    fn encode_single_token_and_oov() {
        let train = Document::new("t", vec![Token::new("known", "NOUN")]);
        let v = build_vocab(std::slice::from_ref(&train)).unwrap();
        let e = encode_document(&train, &v).unwrap();
        assert_eq!(e.len(), 2);

        let held_out = Document::new(
            "h",
            vec![Token::new("unseen", "NOUN"), Token::new("known", "WEIRD")],
        );
        let e = encode_document(&held_out, &v).unwrap();
        assert_eq!(e.ids[0], Vocab::UNK);
        assert_eq!(e.ids[1], v.tag("NOUN").unwrap());
        assert_eq!(e.ids[2], v.word("known").unwrap());
        assert_eq!(e.ids[3], Vocab::UNK);
        assert_eq!((e.unknown_words, e.unknown_tags), (1, 1));
        assert!(e.labels.is_none());

        assert!(encode_document(&Document::new("e", vec![]), &v).is_err());
    }

    #[test]
    fn pretrained_only_word_maps_to_unk() {
        let table = parse_embeddings("zebra 0.1 0.2\nknown 0.3 0.4\n", None).unwrap();
        assert!(table.get("zebra").is_some());
        let train = Document::new("t", vec![Token::new("known", "NOUN")]);
        let v = build_vocab(std::slice::from_ref(&train)).unwrap();
        let doc = Document::new("h", vec![Token::new("zebra", "NOUN")]);
        assert_eq!(encode_document(&doc, &v).unwrap().ids[0], Vocab::UNK);
    }

    #[test]
    fn vocab_symbol_round_trip() {
        let v = build_vocab(&two_docs()).unwrap();
        let back = Vocab::from_symbols(v.symbols().to_vec()).unwrap();
        assert_eq!(v, back);
        assert!(Vocab::from_symbols(vec![Symbol::Word("a".into())]).is_err());
    }

    #[test]
    fn split_is_seeded_partition() {
        let docs: Vec<Document> = (0..20)
            .map(|i| Document::new(format!("d{i}"), vec![Token::new("w", "X")]))
            .collect();
        let a = split_corpus(&docs, 5, 3, 9).unwrap();
        let b = split_corpus(&docs, 5, 3, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!((a.test.len(), a.dev.len(), a.train.len()), (5, 3, 12));
        let mut ids: Vec<String> = a
            .train
            .iter()
            .chain(&a.dev)
            .chain(&a.test)
            .map(|d| d.id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 20);
        assert!(split_corpus(&docs, 15, 6, 0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_doc() -> impl Strategy<Value = Document> {
            proptest::collection::vec(("[a-z]{1,4}", "[A-Z]{1,3}", any::<bool>(), any::<bool>()), 1..20)
                .prop_map(|rows| {
                    let tokens = rows
                        .into_iter()
                        .enumerate()
                        .map(|(i, (s, p, b, sent))| Token {
                            surface: s,
                            upos: p,
                            gold_label: Some(if i == 0 || b { Label::B } else { Label::I }),
                            sent_start: i == 0 || sent,
                        })
                        .collect();
                    Document::new("p", tokens)
                })
        }

        proptest! {
            #[test]
            fn encoding_doubles_length_and_pos_positions_are_inside(doc in arb_doc()) {
                let v = build_vocab(std::slice::from_ref(&doc)).unwrap();
                let e = encode_document(&doc, &v).unwrap();
                prop_assert_eq!(e.ids.len(), 2 * doc.len());
                let labels = e.labels.unwrap();
                for (i, l) in labels.iter().enumerate() {
                    prop_assert_eq!(e.token_mask[i], i % 2 == 0);
                    if i % 2 == 1 {
                        prop_assert_eq!(*l, Label::I);
                    }
                }
                prop_assert!(e.ids.iter().all(|&i| i < v.len()));
            }

            #[test]
            fn docseg_write_read_is_identity(docs in proptest::collection::vec(arb_doc(), 1..5)) {
                let docs: Vec<Document> = docs
                    .into_iter()
                    .enumerate()
                    .map(|(i, d)| Document::new(format!("doc{i}"), d.tokens))
                    .collect();
                let back = parse_docseg(&format_docseg(&docs), "mem").unwrap();
                prop_assert_eq!(back, docs);
            }
        }
    }
}
