//! Shared helpers for the integration tests: fixture paths and a seeded
//! generator for parallel EN/FA corpora with chosen stance totals.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use argmine::microtext::to_microtext_xml;
use argmine_core::corpus::Corpus;
use argmine_core::{Adu, ArgumentGraph, Edge, EdgeTarget, Edu, Language, RelationType, Stance};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

const PRO_EN: &[&str] = &[
    "should", "benefit", "helps", "improves", "support", "fair", "useful", "protects", "saves",
    "better", "good", "needed",
];
const CON_EN: &[&str] = &[
    "however", "although", "costly", "harms", "risk", "unfair", "waste", "fails", "against",
    "worse", "problem", "doubt",
];
const FILLER_EN: &[&str] = &[
    "the", "city", "people", "school", "tax", "money", "time", "public", "students", "health",
    "energy", "rules", "children", "workers", "plan", "system",
];
const PRO_FA: &[&str] = &["باید", "مفید", "بهتر", "کمک", "سود", "عادلانه", "لازم", "خوب"];
const CON_FA: &[&str] = &[
    "اما",
    "هرچند",
    "گران",
    "ضرر",
    "خطر",
    "ناعادلانه",
    "هدر",
    "بدتر",
];
const FILLER_FA: &[&str] = &[
    "شهر",
    "مردم",
    "مدرسه",
    "مالیات",
    "پول",
    "زمان",
    "عمومی",
    "دانشجویان",
    "سلامت",
    "انرژی",
    "قوانین",
    "کودکان",
];
const TOPICS: &[&str] = &[
    "waste_separation",
    "school_uniforms",
    "public_transport_free",
    "night_shopping",
    "tuition_fees",
];

fn sentence(rng: &mut ChaCha8Rng, stance: Stance, lang: Language, serial: usize) -> String {
    let (pro, con, filler) = match lang {
        Language::En => (PRO_EN, CON_EN, FILLER_EN),
        Language::Fa => (PRO_FA, CON_FA, FILLER_FA),
    };
    let cue = match stance {
        Stance::Pro => pro,
        Stance::Con => con,
    };
    let len = rng.random_range(6..12);
    let mut words: Vec<String> = (0..len)
        .map(|_| filler.choose(rng).unwrap().to_string())
        .collect();
    for _ in 0..2 {
        let at = rng.random_range(0..=words.len());
        words.insert(at, cue.choose(rng).unwrap().to_string());
    }
    // A serial keeps every sentence unique in both languages.
    let tag = match lang {
        Language::En => format!("item{serial}"),
        Language::Fa => format!("مورد{serial}"),
    };
    words.push(tag);
    let mut s = words.join(" ");
    s.push('.');
    s
}

/// Splits `total` over `n` slots, each slot getting at least `min`.
fn spread(rng: &mut ChaCha8Rng, total: usize, n: usize, min: usize) -> Vec<usize> {
    assert!(total >= n * min);
    let mut out = vec![min; n];
    for _ in 0..total - n * min {
        let i = rng.random_range(0..n);
        out[i] += 1;
    }
    out
}

/// A parallel corpus of `n_docs` valid graphs with exactly `pro` pro and
/// `con` con ADUs in each language. Persian documents share ids, shape
/// and labels with their English counterparts.
pub fn synthetic_pair(n_docs: usize, pro: usize, con: usize, seed: u64) -> (Corpus, Corpus) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pros = spread(&mut rng, pro, n_docs, 1);
    let cons = spread(&mut rng, con, n_docs, 0);
    let mut en = Vec::new();
    let mut fa = Vec::new();
    let mut serial = 0;
    for d in 0..n_docs {
        let mut stances = vec![Stance::Pro; pros[d] - 1];
        stances.extend(vec![Stance::Con; cons[d]]);
        stances.shuffle(&mut rng);
        stances.insert(0, Stance::Pro);
        let mut links: Vec<(usize, RelationType, EdgeTarget)> = Vec::new();
        for i in 1..stances.len() {
            let opposing: Vec<usize> = links
                .iter()
                .enumerate()
                .filter(|(_, (src, rel, _))| {
                    stances[*src] != stances[i] && *rel != RelationType::Undercut
                })
                .map(|(k, _)| k)
                .collect();
            if !opposing.is_empty() && rng.random_bool(0.15) {
                let k = *opposing.choose(&mut rng).unwrap();
                links.push((
                    i,
                    RelationType::Undercut,
                    EdgeTarget::Edge(format!("c{}", k + 1)),
                ));
                continue;
            }
            let t = rng.random_range(0..i);
            let rel = if stances[t] != stances[i] {
                RelationType::Rebuttal
            } else if rng.random_bool(0.15) {
                RelationType::Example
            } else {
                RelationType::Support
            };
            links.push((i, rel, EdgeTarget::Node(format!("a{}", t + 1))));
        }
        let doc_id = format!("micro_s{d:03}");
        let topic = TOPICS[d % TOPICS.len()].to_string();
        for (lang, out) in [(Language::En, &mut en), (Language::Fa, &mut fa)] {
            let mut text_rng = ChaCha8Rng::seed_from_u64(seed ^ ((d as u64) << 8) ^ lang as u64);
            let mut g = ArgumentGraph {
                doc_id: doc_id.clone(),
                language: lang,
                topic: Some(topic.clone()),
                edus: Vec::new(),
                adus: Vec::new(),
                edges: Vec::new(),
            };
            for (i, s) in stances.iter().enumerate() {
                let n = i + 1;
                g.edus.push(Edu {
                    id: format!("e{n}"),
                    text: sentence(&mut text_rng, *s, lang, serial + i),
                });
                g.adus.push(Adu {
                    id: format!("a{n}"),
                    stance: *s,
                });
            }
            for (k, (src, rel, target)) in links.iter().enumerate() {
                g.edges.push(Edge {
                    id: format!("c{}", k + 1),
                    rel: *rel,
                    source: format!("a{}", src + 1),
                    target: target.clone(),
                });
            }
            for i in 0..stances.len() {
                g.edges.push(Edge {
                    id: format!("s{}", i + 1),
                    rel: RelationType::Segment,
                    source: format!("e{}", i + 1),
                    target: EdgeTarget::Node(format!("a{}", i + 1)),
                });
            }
            out.push(g);
        }
        serial += stances.len();
    }
    (Corpus::new(Language::En, en), Corpus::new(Language::Fa, fa))
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) {
    std::fs::create_dir_all(dir).unwrap();
    for g in &corpus.documents {
        std::fs::write(dir.join(format!("{}.xml", g.doc_id)), to_microtext_xml(g)).unwrap();
    }
}

/// Replay records: `pro` and `con` well-formed English candidates plus a
/// few that the filter must reject (too short, duplicate, wrong script).
pub fn replay_records(pro: usize, con: usize, seed: u64) -> Vec<(String, Stance)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (stance, n) in [(Stance::Pro, pro), (Stance::Con, con)] {
        for i in 0..n {
            if i % 50 == 7 {
                out.push(("too short".to_string(), stance));
                out.push(("این جمله فارسی است و باید رد شود".to_string(), stance));
            }
            let s = sentence(&mut rng, stance, Language::En, 100_000 + out.len());
            if i % 60 == 11 {
                out.push((s.to_uppercase(), stance));
            }
            out.push((s, stance));
        }
    }
    out
}

/// A zero-shot bundle over a small synthetic parallel corpus.
pub fn small_bundle(n_docs: usize, seed: u64) -> argmine_core::dataset::DatasetBundle {
    use argmine_core::dataset::{assemble_scenario, Scenario, ScenarioConfig, SplitRatios};
    let (en, fa) = synthetic_pair(n_docs, n_docs * 4, n_docs, seed);
    let cfg = ScenarioConfig {
        scenario: Scenario::ZeroShot,
        ratios: SplitRatios::default(),
        seed,
        allow_empty_splits: false,
    };
    assemble_scenario(&cfg, &en, Some(&fa), &[]).unwrap()
}
