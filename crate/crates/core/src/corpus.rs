//! Collections of argument graphs: statistics and parallel pairing.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{adu_text, ArgumentGraph, EdgeTarget, Language, RelationType, Stance};
use crate::text::word_count;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub language: Language,
    /// Sorted by `doc_id`.
    pub documents: Vec<ArgumentGraph>,
}

impl Corpus {
    /// Builds a corpus, sorting documents by id.
    pub fn new(language: Language, mut documents: Vec<ArgumentGraph>) -> Self {
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        Corpus {
            language,
            documents,
        }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&ArgumentGraph> {
        self.documents
            .binary_search_by(|d| d.doc_id.as_str().cmp(doc_id))
            .ok()
            .map(|i| &self.documents[i])
    }

    pub fn ids(&self) -> Vec<String> {
        self.documents.iter().map(|d| d.doc_id.clone()).collect()
    }

    /// Number of ADUs per stance over the whole corpus.
    pub fn stance_counts(&self) -> BTreeMap<Stance, usize> {
        let mut counts: BTreeMap<Stance, usize> = Stance::ALL.iter().map(|s| (*s, 0)).collect();
        for adu in self.documents.iter().flat_map(|d| &d.adus) {
            *counts.entry(adu.stance).or_default() += 1;
        }
        counts
    }
}

/// The rows reported for a Microtext corpus.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsTable {
    pub documents: usize,
    pub sentences: usize,
    pub words: usize,
    pub pro_count: usize,
    pub con_count: usize,
    pub pro_words: usize,
    pub con_words: usize,
}

impl StatsTable {
    pub const ROW_LABELS: [&'static str; 7] = [
        "Documents",
        "Sentences",
        "Words",
        "pro",
        "con",
        "pro Words",
        "con Words",
    ];

    pub fn rows(&self) -> [usize; 7] {
        [
            self.documents,
            self.sentences,
            self.words,
            self.pro_count,
            self.con_count,
            self.pro_words,
            self.con_words,
        ]
    }
}

/// Sentences are counted as EDUs and words by whitespace splitting; stance
/// word counts use each ADU's joined text.
pub fn corpus_stats(corpus: &Corpus) -> StatsTable {
    let mut stats = StatsTable {
        documents: corpus.len(),
        ..StatsTable::default()
    };
    for doc in &corpus.documents {
        stats.sentences += doc.edus.len();
        stats.words += doc.edus.iter().map(|e| word_count(&e.text)).sum::<usize>();
        for adu in &doc.adus {
            let words = adu_text(doc, &adu.id).map(|t| word_count(&t)).unwrap_or(0);
            match adu.stance {
                Stance::Pro => {
                    stats.pro_count += 1;
                    stats.pro_words += words;
                }
                Stance::Con => {
                    stats.con_count += 1;
                    stats.con_words += words;
                }
            }
        }
    }
    stats
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelPair {
    pub en: ArgumentGraph,
    pub fa: ArgumentGraph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub pairs: Vec<ParallelPair>,
}

#[derive(
    Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, thiserror::Error,
)]
pub enum PairingError {
    #[error("document `{0}` exists in only one language")]
    UnmatchedDoc(String),
    #[error("document `{doc_id}` differs across languages at {ids:?}")]
    StructureMismatch { doc_id: String, ids: Vec<String> },
}

type EdgeKey = (String, RelationType, String, bool);

fn structure(g: &ArgumentGraph) -> (BTreeMap<&str, Stance>, BTreeSet<EdgeKey>, BTreeSet<&str>) {
    let adus = g.adus.iter().map(|a| (a.id.as_str(), a.stance)).collect();
    let edges = g
        .argumentative_edges()
        .map(|e| {
            (
                e.source.clone(),
                e.rel,
                String::from(e.target.id()),
                matches!(e.target, EdgeTarget::Edge(_)),
            )
        })
        .collect();
    // EDU translation may merge or split segments, so only the set of ADUs
    // that own text is compared, not the EDU ids.
    let segmented = g
        .edges
        .iter()
        .filter(|e| e.rel == RelationType::Segment)
        .map(|e| e.target.id())
        .collect();
    (adus, edges, segmented)
}

/// Ids (ADUs or edge endpoints) where two graphs disagree in annotation.
pub fn structural_differences(a: &ArgumentGraph, b: &ArgumentGraph) -> Vec<String> {
    let (adus_a, edges_a, seg_a) = structure(a);
    let (adus_b, edges_b, seg_b) = structure(b);
    let mut diff: BTreeSet<String> = BTreeSet::new();
    for id in adus_a.keys().chain(adus_b.keys()) {
        if adus_a.get(id) != adus_b.get(id) {
            diff.insert(String::from(*id));
        }
    }
    for e in edges_a.symmetric_difference(&edges_b) {
        diff.insert(e.0.clone());
    }
    for id in seg_a.symmetric_difference(&seg_b) {
        diff.insert(String::from(*id));
    }
    diff.into_iter().collect()
}

/// Pairs documents by id and checks that the translation kept the
/// annotation. All problems are collected before failing.
pub fn pair_parallel(en: &Corpus, fa: &Corpus) -> Result<ParallelCorpus, Vec<PairingError>> {
    let mut errors = Vec::new();
    let mut pairs = Vec::new();
    let ids: BTreeSet<&str> = en
        .documents
        .iter()
        .chain(&fa.documents)
        .map(|d| d.doc_id.as_str())
        .collect();
    for id in ids {
        match (en.get(id), fa.get(id)) {
            (Some(e), Some(f)) => {
                let diff = structural_differences(e, f);
                if diff.is_empty() {
                    pairs.push(ParallelPair {
                        en: e.clone(),
                        fa: f.clone(),
                    });
                } else {
                    errors.push(PairingError::StructureMismatch {
                        doc_id: String::from(id),
                        ids: diff,
                    });
                }
            }
            _ => errors.push(PairingError::UnmatchedDoc(String::from(id))),
        }
    }
    if errors.is_empty() {
        Ok(ParallelCorpus { pairs })
    } else {
        Err(errors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{case1, case2};

    fn fa(mut g: ArgumentGraph) -> ArgumentGraph {
        g.language = Language::Fa;
        for edu in &mut g.edus {
            edu.text = alloc::format!("ترجمه {}", edu.id);
        }
        g
    }

    #[test]
    fn stats_for_case2() {
        let c = Corpus::new(Language::En, alloc::vec![case2()]);
        let s = corpus_stats(&c);
        assert_eq!((s.documents, s.pro_count, s.con_count), (1, 2, 2));
        assert_eq!(s.sentences, 4);
        assert_eq!(s.pro_words + s.con_words, s.words);
    }

    #[test]
    fn pairing_matches_by_id() {
        let en = Corpus::new(Language::En, alloc::vec![case2(), case1()]);
        let fa_c = Corpus::new(Language::Fa, alloc::vec![fa(case1()), fa(case2())]);
        let p = pair_parallel(&en, &fa_c).unwrap();
        assert_eq!(p.pairs.len(), 2);
        assert_eq!(p.pairs[0].en.doc_id, "micro_d14");
    }

    #[test]
    fn pairing_reports_missing_and_flipped() {
        let en = Corpus::new(Language::En, alloc::vec![case1(), case2()]);
        let mut flipped = fa(case2());
        flipped.adus[2].stance = Stance::Pro;
        let fa_c = Corpus::new(Language::Fa, alloc::vec![flipped]);
        let errs = pair_parallel(&en, &fa_c).unwrap_err();
        assert_eq!(
            errs,
            alloc::vec![
                PairingError::UnmatchedDoc("micro_d14".into()),
                PairingError::StructureMismatch {
                    doc_id: "micro_k015".into(),
                    ids: alloc::vec!["a3".into()]
                }
            ]
        );
    }
}
