use std::collections::BTreeMap;

use argmine_core::augment::{filter_malformed, plan_balance, FilterConfig, SyntheticAdu};
use argmine_core::corpus::{pair_parallel, Corpus};
use argmine_core::dataset::{make_splits, SplitRatios};
use argmine_core::eval::{confusion, macro_average, per_class_metrics};
use argmine_core::graph::{root, validate_graph};
use argmine_core::pe::{
    map_pe_to_microtext, ClaimStance, Component, ComponentKind, MappingOptions, PeDocument,
    PeRelation, PeRelationKind,
};
use argmine_core::{Adu, ArgumentGraph, Edge, EdgeTarget, Edu, Language, RelationType, Stance};
use proptest::prelude::*;

fn tree_graph(parents: &[(usize, u8)], stances: &[bool], undercut: Option<usize>) -> ArgumentGraph {
    let n = stances.len();
    let mut g = ArgumentGraph {
        doc_id: "doc".into(),
        language: Language::En,
        topic: None,
        edus: Vec::new(),
        adus: Vec::new(),
        edges: Vec::new(),
    };
    for (i, pro) in stances.iter().enumerate() {
        g.edus.push(Edu {
            id: format!("e{i}"),
            text: format!("text number {i}"),
        });
        g.adus.push(Adu {
            id: format!("a{i}"),
            stance: if *pro { Stance::Pro } else { Stance::Con },
        });
        g.edges.push(Edge {
            id: format!("s{i}"),
            rel: RelationType::Segment,
            source: format!("e{i}"),
            target: EdgeTarget::Node(format!("a{i}")),
        });
    }
    for (i, (p, r)) in parents.iter().enumerate().take(n.saturating_sub(1)) {
        let child = i + 1;
        let rel = [
            RelationType::Support,
            RelationType::Rebuttal,
            RelationType::Example,
        ][*r as usize % 3];
        let target = match undercut {
            Some(u) if u == child && child >= 2 => EdgeTarget::Edge(format!("c{}", 1)),
            _ => EdgeTarget::Node(format!("a{}", p % child)),
        };
        let rel = if matches!(target, EdgeTarget::Edge(_)) {
            RelationType::Undercut
        } else {
            rel
        };
        g.edges.push(Edge {
            id: format!("c{child}"),
            rel,
            source: format!("a{child}"),
            target,
        });
    }
    g
}

fn arb_graph() -> impl Strategy<Value = ArgumentGraph> {
    (1usize..9)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0usize..16, 0u8..3), n - 1),
                prop::collection::vec(any::<bool>(), n),
                prop::option::of(0usize..9),
                prop::collection::vec(0usize..4, 0..3),
            )
        })
        .prop_map(|(parents, stances, undercut, damage)| {
            let mut g = tree_graph(&parents, &stances, undercut);
            // Optional corruption so invalid graphs are covered too.
            for d in damage {
                match d {
                    0 => {
                        g.edges.pop();
                    }
                    1 => g.adus.push(Adu {
                        id: "a0".into(),
                        stance: Stance::Con,
                    }),
                    2 => {
                        if let Some(e) = g.edges.last_mut() {
                            e.target = EdgeTarget::Node(e.source.clone());
                        }
                    }
                    _ => g.edus[0].text.clear(),
                }
            }
            g
        })
}

fn code_multiset(g: &ArgumentGraph) -> (bool, Vec<String>) {
    let r = validate_graph(g);
    let mut codes: Vec<String> = r
        .violations
        .iter()
        .map(|v| v.code.as_str().to_string())
        .collect();
    codes.sort();
    (r.ok, codes)
}

proptest! {
    #[test]
    fn validation_ignores_list_order(g in arb_graph(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut h = g.clone();
        h.edges.shuffle(&mut rng);
        h.adus.shuffle(&mut rng);
        prop_assert_eq!(code_multiset(&g), code_multiset(&h));
    }

    #[test]
    fn valid_trees_have_one_root(
        parents in prop::collection::vec((0usize..16, 0u8..3), 0..8),
        seed in any::<bool>(),
    ) {
        let stances: Vec<bool> = (0..=parents.len()).map(|i| seed ^ (i % 2 == 0)).collect();
        let g = tree_graph(&parents, &stances, None);
        prop_assert!(validate_graph(&g).ok);
        prop_assert_eq!(root(&g).unwrap().id.as_str(), "a0");
    }

    #[test]
    fn filtering_is_idempotent(texts in prop::collection::vec("[a-zA-Z ]{0,40}|[\u{0627}-\u{064A} ]{0,20}", 0..30)) {
        let cands: Vec<SyntheticAdu> =
            texts.iter().map(|t| SyntheticAdu::candidate(t, Stance::Con, "replay")).collect();
        let cfg = FilterConfig::default();
        let (accepted, rejected) = filter_malformed(cands, &[], &cfg);
        prop_assert_eq!(accepted.len() + rejected.len(), texts.len());
        prop_assert!(accepted.iter().all(|a| a.accepted && a.rejection_reason.is_none()));
        prop_assert!(rejected.iter().all(|a| !a.accepted && a.rejection_reason.is_some()));
        let (again, dropped) = filter_malformed(accepted.clone(), &[], &cfg);
        prop_assert!(dropped.is_empty());
        prop_assert_eq!(again, accepted);
    }

    #[test]
    fn plan_fills_every_class(pro in 0usize..1000, con in 0usize..1000, extra in 0usize..500) {
        let counts = BTreeMap::from([(Stance::Pro, pro), (Stance::Con, con)]);
        let t = pro.max(con) + extra;
        prop_assume!(t > 0);
        let plan = plan_balance(&counts, t).unwrap();
        prop_assert_eq!(pro + plan.deficit(Stance::Pro), t);
        prop_assert_eq!(con + plan.deficit(Stance::Con), t);
    }

    #[test]
    fn metrics_stay_in_bounds(pairs in prop::collection::vec((0usize..3, 0usize..3), 0..80)) {
        let classes = ["a", "b", "c"];
        let golds: Vec<&str> = pairs.iter().map(|p| classes[p.0]).collect();
        let preds: Vec<&str> = pairs.iter().map(|p| classes[p.1]).collect();
        let cm = confusion(&golds, &preds, &classes).unwrap();
        prop_assert_eq!(cm.total(), pairs.len());
        let per = per_class_metrics(&cm);
        for (i, m) in per.iter().enumerate() {
            prop_assert_eq!(m.support, golds.iter().filter(|g| **g == classes[i]).count());
            for x in [m.precision, m.recall, m.f1] {
                prop_assert!((0.0..=1.0).contains(&x));
            }
            if m.precision == 0.0 || m.recall == 0.0 {
                prop_assert_eq!(m.f1, 0.0);
            } else {
                prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
                prop_assert!(m.f1 <= m.precision.max(m.recall) + 1e-12);
            }
        }
        let mac = macro_average(&per);
        prop_assert!((0.0..=1.0).contains(&mac.f1));
    }

    #[test]
    fn splits_partition_ids(n in 0usize..150, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("d{i:03}")).collect();
        let a = make_splits(&ids, SplitRatios::default(), seed, true).unwrap();
        prop_assert_eq!(a.assignment.len(), n);
        prop_assert_eq!(a.sizes().iter().sum::<usize>(), n);
        prop_assert_eq!(a, make_splits(&ids, SplitRatios::default(), seed, true).unwrap());
    }

    #[test]
    fn pairing_is_symmetric(
        parents in prop::collection::vec((0usize..16, 0u8..3), 0..6),
        flip in prop::option::of(0usize..7),
        drop_doc in any::<bool>(),
    ) {
        let stances: Vec<bool> = (0..=parents.len()).map(|i| i % 3 != 1).collect();
        let mut docs = Vec::new();
        for d in 0..3 {
            let mut g = tree_graph(&parents, &stances, None);
            g.doc_id = format!("micro_{d}");
            docs.push(g);
        }
        let en = Corpus::new(Language::En, docs.clone());
        let mut fa_docs: Vec<ArgumentGraph> = docs
            .into_iter()
            .map(|mut g| {
                g.language = Language::Fa;
                g
            })
            .collect();
        if let Some(i) = flip {
            if let Some(a) = fa_docs[1].adus.get_mut(i) {
                a.stance = a.stance.flip();
            }
        }
        if drop_doc {
            fa_docs.remove(0);
        }
        let fa = Corpus::new(Language::Fa, fa_docs);
        let forward = pair_parallel(&en, &fa);
        let backward = pair_parallel(&fa, &en);
        match (forward, backward) {
            (Ok(f), Ok(b)) => {
                prop_assert_eq!(f.pairs.len(), b.pairs.len());
                for (x, y) in f.pairs.iter().zip(&b.pairs) {
                    prop_assert_eq!(&x.en, &y.fa);
                    prop_assert_eq!(&x.fa, &y.en);
                }
            }
            (Err(f), Err(b)) => prop_assert_eq!(f, b),
            _ => prop_assert!(false, "pairing outcome depends on argument order"),
        }
    }

    #[test]
    fn premise_stance_counts_attack_flips(
        links in prop::collection::vec((0usize..10, any::<bool>()), 1..9),
        claim_for in any::<bool>(),
    ) {
        // Component 0 is the MajorClaim, 1 a Claim, the rest premises whose
        // parent is an earlier component.
        let mut text = String::new();
        let mut doc = PeDocument { essay_id: "essay".into(), ..PeDocument::default() };
        let n = links.len() + 2;
        for i in 0..n {
            let t = format!("component {i}");
            let start = text.chars().count();
            text.push_str(&t);
            text.push(' ');
            let kind = match i {
                0 => ComponentKind::MajorClaim,
                1 => ComponentKind::Claim,
                _ => ComponentKind::Premise,
            };
            doc.components.push(Component { id: format!("T{i}"), kind, span: (start, start + t.len()), text: t });
        }
        doc.claim_stances.insert("T1".into(), if claim_for { ClaimStance::For } else { ClaimStance::Against });
        let mut parent = vec![0usize; n];
        let mut attack = vec![false; n];
        for (k, (p, att)) in links.iter().enumerate() {
            let i = k + 2;
            parent[i] = 1 + p % (i - 1);
            attack[i] = *att;
            doc.relations.push(PeRelation {
                id: format!("R{i}"),
                source_id: format!("T{i}"),
                target_id: format!("T{}", parent[i]),
                kind: if *att { PeRelationKind::Attack } else { PeRelationKind::Support },
            });
        }
        let (g, _) = map_pe_to_microtext(&doc, MappingOptions::default()).unwrap();
        prop_assert!(validate_graph(&g).ok);
        prop_assert_eq!(g.adus.len(), n);
        for i in 2..n {
            let mut flips = 0;
            let mut j = i;
            while j >= 2 {
                flips += attack[j] as usize;
                j = parent[j];
            }
            flips += (!claim_for) as usize;
            let expected = if flips % 2 == 0 { Stance::Pro } else { Stance::Con };
            let id = format!("a-T{i}");
            prop_assert_eq!(g.adu(&id).unwrap().stance, expected);
        }
    }
}
