//! Rule-based reference segmenters.

use crate::data::{Document, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineMode {
    /// Boundaries at sentence starts.
    Sentence,
    /// Boundaries after punctuation.
    Punct,
}

impl std::str::FromStr for BaselineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sent" | "sentence" => Ok(BaselineMode::Sentence),
            "punct" => Ok(BaselineMode::Punct),
            other => Err(Error::Config(format!("unknown baseline mode `{other}`"))),
        }
    }
}

pub fn run_baseline(mode: BaselineMode, doc: &Document) -> Result<Vec<Label>> {
    match mode {
        BaselineMode::Sentence => baseline_sentence(doc),
        BaselineMode::Punct => Ok(baseline_punct(doc)),
    }
}

/// B exactly on sentence-initial tokens (and on the first token).
pub fn baseline_sentence(doc: &Document) -> Result<Vec<Label>> {
    if !doc.has_sentence_marks() {
        return Err(Error::Protocol(format!(
            "document `{}` has no sentence marks; provide them in the sentence flag column",
            doc.id
        )));
    }
    Ok(doc
        .tokens
        .iter()
        .enumerate()
        .map(|(i, t)| if i == 0 || t.sent_start { Label::B } else { Label::I })
        .collect())
}

/// B on the first token and on every token that follows a PUNCT token.
pub fn baseline_punct(doc: &Document) -> Vec<Label> {
    (0..doc.len())
        .map(|i| {
            if i == 0 || doc.tokens[i - 1].is_punct() {
                Label::B
            } else {
                Label::I
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Token;
    use Label::{B, I};

    fn doc(rows: &[(&str, &str)]) -> Document {
        Document::new("d", rows.iter().map(|&(s, p)| Token::new(s, p)).collect())
    }

    #[test]
    fn punct_rule_fixture() {
        let d = doc(&[("He", "PRON"), ("said", "VERB"), (",", "PUNCT"), ("yes", "INTJ"), (".", "PUNCT")]);
        assert_eq!(baseline_punct(&d), vec![B, I, I, B, I]);
    }

    #[test]
    fn punct_extremes() {
        let d = doc(&[("a", "X"), ("b", "X"), ("c", "X")]);
        assert_eq!(baseline_punct(&d), vec![B, I, I]);
        let d = doc(&[(".", "PUNCT"), ("!", "PUNCT"), ("?", "PUNCT")]);
        assert_eq!(baseline_punct(&d), vec![B, B, B]);
    }

    #[test]
    fn sentence_rule() {
        let mut d = doc(&[("w", "X"); 12]);
        for i in [0, 4, 9] {
            d.tokens[i].sent_start = true;
        }
        let labels = baseline_sentence(&d).unwrap();
        for (i, l) in labels.iter().enumerate() {
            assert_eq!(*l == B, [0, 4, 9].contains(&i));
        }
        let mut single = doc(&[("w", "X"); 5]);
        single.tokens[0].sent_start = true;
        assert_eq!(baseline_sentence(&single).unwrap().iter().filter(|&&l| l == B).count(), 1);
        assert!(matches!(baseline_sentence(&doc(&[("w", "X")])), Err(Error::Protocol(_))));
    }

    #[test]
    fn modes_parse() {
        assert_eq!("sent".parse::<BaselineMode>().unwrap(), BaselineMode::Sentence);
        assert_eq!("punct".parse::<BaselineMode>().unwrap(), BaselineMode::Punct);
        assert!("other".parse::<BaselineMode>().is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn punct_depends_only_on_pos(
                rows in proptest::collection::vec(("[a-z]{1,3}", prop_oneof!["PUNCT", "NOUN", "VERB"]), 1..30),
                shift in 1usize..5,
            ) {
                let d = Document::new("p", rows.iter().map(|(s, p)| Token::new(s.clone(), p.clone())).collect());
                let mut permuted = d.clone();
                let surfaces: Vec<String> = d.tokens.iter().map(|t| t.surface.clone()).collect();
                for (i, t) in permuted.tokens.iter_mut().enumerate() {
                    t.surface = surfaces[(i + shift) % surfaces.len()].clone();
                }
                prop_assert_eq!(baseline_punct(&d), baseline_punct(&permuted));
                let labels = baseline_punct(&d);
                prop_assert_eq!(labels.len(), d.len());
                prop_assert_eq!(labels[0], B);
            }

            #[test]
            fn sentence_counts_marks(marks in proptest::collection::vec(any::<bool>(), 1..30)) {
                let mut d = Document::new("s", marks.iter().map(|_| Token::new("w", "X")).collect());
                for (t, &m) in d.tokens.iter_mut().zip(&marks) {
                    t.sent_start = m;
                }
                d.tokens[0].sent_start = true;
                let labels = baseline_sentence(&d).unwrap();
                let marked = d.tokens.iter().filter(|t| t.sent_start).count();
                prop_assert_eq!(labels.iter().filter(|&&l| l == B).count(), marked);
                prop_assert_eq!(labels[0], B);
            }
        }
    }
}
