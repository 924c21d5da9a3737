//! Boundary scoring.
//!
//! Both scorers ignore the first word of every document (it is always a
//! boundary) and pool counts over documents (micro-averaging).

use std::fmt;

use crate::data::{Document, Label};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Metrics {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    /// Multi-line `key value` report.
    pub fn report(&self) -> String {
        format!(
            "tp {}\nfp {}\nfn {}\nprecision {:.4}\nrecall {:.4}\nf1 {:.4}\n",
            self.tp, self.fp, self.fn_, self.precision, self.recall, self.f1
        )
    }
}

/// `tp fp fn precision recall f1`
impl fmt::Display for Metrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {:.4} {:.4} {:.4}",
            self.tp, self.fp, self.fn_, self.precision, self.recall, self.f1
        )
    }
}

/// Confusion counts over positions `from..` of one label sequence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn add(&mut self, other: Counts) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_counts(self.tp, self.fp, self.fn_)
    }
}

/// Counts boundaries at positions `>= from`. The slices must have equal
/// length.
pub fn boundary_counts(gold: &[Label], pred: &[Label], from: usize) -> Counts {
    let mut c = Counts::default();
    for (g, p) in gold.iter().zip(pred).skip(from) {
        match (g, p) {
            (Label::B, Label::B) => c.tp += 1,
            (Label::I, Label::B) => c.fp += 1,
            (Label::B, Label::I) => c.fn_ += 1,
            (Label::I, Label::I) => {}
        }
    }
    c
}

fn aligned_labels(gold: &Document, pred: &Document) -> Result<(Vec<Label>, Vec<Label>)> {
    let err = |message: String| Error::Alignment {
        doc: gold.id.clone(),
        message,
    };
    if gold.id != pred.id {
        return Err(err(format!("paired with predicted document `{}`", pred.id)));
    }
    if gold.len() != pred.len() {
        return Err(err(format!(
            "gold has {} tokens, prediction has {}",
            gold.len(),
            pred.len()
        )));
    }
    let g = gold
        .gold_labels()
        .ok_or_else(|| err("gold document has unlabeled tokens".into()))?;
    let p = pred
        .gold_labels()
        .ok_or_else(|| err("predicted document has unlabeled tokens".into()))?;
    Ok((g, p))
}

fn check_pairing(gold: &[Document], pred: &[Document]) -> Result<()> {
    if gold.len() != pred.len() {
        let doc = gold
            .get(pred.len())
            .or_else(|| pred.get(gold.len()))
            .map(|d| d.id.clone())
            .unwrap_or_default();
        return Err(Error::Alignment {
            doc,
            message: format!("{} gold documents but {} predicted", gold.len(), pred.len()),
        });
    }
    Ok(())
}

/// Document-level boundary F1 excluding the first word of every document.
pub fn boundary_f1(gold: &[Document], pred: &[Document]) -> Result<Metrics> {
    check_pairing(gold, pred)?;
    let mut total = Counts::default();
    for (g, p) in gold.iter().zip(pred) {
        let (gl, pl) = aligned_labels(g, p)?;
        total.add(boundary_counts(&gl, &pl, 1));
    }
    Ok(total.metrics())
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntraSententialReport {
    pub metrics: Metrics,
    pub sentences_scored: usize,
    pub sentences_skipped: usize,
}

impl IntraSententialReport {
    pub fn has_scorable_sentences(&self) -> bool {
        self.sentences_scored > 0
    }
}

/// Boundary F1 inside sentences, ignoring sentences that hold a single EDU.
///
/// Sentences come from the gold sentence marks. A sentence is skipped when
/// its gold labels contain no boundary after the sentence-initial token.
pub fn intra_sentential_f1(gold: &[Document], pred: &[Document]) -> Result<IntraSententialReport> {
    check_pairing(gold, pred)?;
    let mut total = Counts::default();
    let mut scored = 0;
    let mut skipped = 0;
    for (g, p) in gold.iter().zip(pred) {
        if !g.has_sentence_marks() {
            return Err(Error::Protocol(format!(
                "gold document `{}` has no sentence marks; intra-sentential scoring needs them",
                g.id
            )));
        }
        let (gl, pl) = aligned_labels(g, p)?;
        let mut starts: Vec<usize> = g
            .tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| t.sent_start.then_some(i))
            .collect();
        if starts.first() != Some(&0) {
            starts.insert(0, 0);
        }
        starts.push(g.len());
        for w in starts.windows(2) {
            let (s, e) = (w[0], w[1]);
            let inner = boundary_counts(&gl[s..e], &pl[s..e], 1);
            if inner.tp + inner.fn_ == 0 {
                skipped += 1;
                continue;
            }
            scored += 1;
            total.add(inner);
        }
    }
    if scored == 0 {
        log::warn!("no scorable sentences: every sentence holds a single EDU");
    }
    Ok(IntraSententialReport {
        metrics: total.metrics(),
        sentences_scored: scored,
        sentences_skipped: skipped,
    })
}
