//! Persuasive-Essays annotations and their projection onto the Microtext
//! two-stance scheme.
//!
//! The mapping walks the essay top-down. MajorClaims become one root ADU
//! labeled pro. Claims hang off the root, pro with a support edge when
//! argued *for* and con with a rebuttal edge when argued *against*. Each premise
//! then takes its stance from the component it points at: a support edge
//! copies the target's stance, an attack edge flips it and is stored as a
//! rebuttal.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::graph::{
    validate_graph, Adu, ArgumentGraph, Edge, EdgeTarget, Edu, Language, RelationType, Stance,
};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ComponentKind {
    MajorClaim,
    Claim,
    Premise,
}

impl ComponentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::MajorClaim => "MajorClaim",
            ComponentKind::Claim => "Claim",
            ComponentKind::Premise => "Premise",
        }
    }
}

/// An annotated span. `span` holds character (not byte) offsets into the
/// essay text, end exclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    pub span: (usize, usize),
    pub text: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeRelationKind {
    Support,
    Attack,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeRelation {
    pub id: String,
    pub source_id: String,
    pub target_id: String,
    pub kind: PeRelationKind,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClaimStance {
    For,
    Against,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeDocument {
    pub essay_id: String,
    /// Components in annotation order.
    pub components: Vec<Component>,
    /// Relations in annotation order.
    pub relations: Vec<PeRelation>,
    pub claim_stances: BTreeMap<String, ClaimStance>,
}

impl PeDocument {
    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn count(&self, kind: ComponentKind) -> usize {
        self.components.iter().filter(|c| c.kind == kind).count()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingRule {
    Root,
    DirectChild,
    InheritSupport,
    FlipAttack,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingStep {
    /// The component id; for the root, the first MajorClaim's id.
    pub component_id: String,
    pub assigned_stance: Stance,
    pub rule: MappingRule,
    pub edge_label: Option<RelationType>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "component_id", rename_all = "snake_case")]
pub enum MappingWarning {
    /// A premise had several outgoing relations; only the first was used.
    MultipleOutgoing(String),
    /// Relations leaving a Claim or MajorClaim carry no meaning here.
    IgnoredRelation(String),
    /// Lenient mode dropped a premise with no path to the root.
    Dropped(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingTrace {
    pub essay_id: String,
    /// One step per mapped component, top-down.
    pub steps: Vec<MappingStep>,
    pub warnings: Vec<MappingWarning>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum MappingError {
    #[error("essay `{0}` has no MajorClaim")]
    NoMajorClaim(String),
    #[error("relation cycle through components {0:?}")]
    CycleDetected(Vec<String>),
    #[error("component `{0}` has no path to the root")]
    UnreachableComponent(String),
    #[error("Claim `{0}` has no for/against stance")]
    MissingStance(String),
    #[error("relation `{0}` refers to an unknown component")]
    DanglingRelation(String),
    #[error("mapped graph failed validation: {0}")]
    InvalidResult(String),
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct MappingOptions {
    /// Drop unreachable premises (with a warning) instead of failing.
    pub lenient: bool,
}

pub const ROOT_ADU: &str = "a0";
const ROOT_EDU: &str = "e0";

fn adu_id(component: &str) -> String {
    format!("a-{component}")
}

pub fn flip(s: Stance) -> Stance {
    s.flip()
}

fn find_cycle(doc: &PeDocument) -> Option<Vec<String>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in &doc.relations {
        succ.entry(r.source_id.as_str())
            .or_default()
            .push(r.target_id.as_str());
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    for start in doc.components.iter().map(|c| c.id.as_str()) {
        if state.get(start).copied().unwrap_or(0) != 0 {
            continue;
        }
        let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
        let mut path: Vec<&str> = vec![start];
        state.insert(start, 1);
        while let Some((node, next)) = stack.last_mut() {
            let node = *node;
            let children = succ.get(node).map(Vec::as_slice).unwrap_or(&[]);
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                match state.get(child).copied().unwrap_or(0) {
                    0 => {
                        state.insert(child, 1);
                        stack.push((child, 0));
                        path.push(child);
                    }
                    1 => {
                        let from = path.iter().position(|p| *p == child).unwrap_or(0);
                        return Some(path[from..].iter().map(|s| s.to_string()).collect());
                    }
                    _ => {}
                }
            } else {
                state.insert(node, 2);
                stack.pop();
                path.pop();
            }
        }
    }
    None
}

/// Projects an essay onto a Microtext-style graph and records each labeling
/// decision.
pub fn map_pe_to_microtext(
    doc: &PeDocument,
    options: MappingOptions,
) -> Result<(ArgumentGraph, MappingTrace), MappingError> {
    let kinds: BTreeMap<&str, ComponentKind> = doc
        .components
        .iter()
        .map(|c| (c.id.as_str(), c.kind))
        .collect();
    let major: Vec<&Component> = doc
        .components
        .iter()
        .filter(|c| c.kind == ComponentKind::MajorClaim)
        .collect();
    if major.is_empty() {
        return Err(MappingError::NoMajorClaim(doc.essay_id.clone()));
    }
    for r in &doc.relations {
        if !kinds.contains_key(r.source_id.as_str()) || !kinds.contains_key(r.target_id.as_str()) {
            return Err(MappingError::DanglingRelation(r.id.clone()));
        }
    }
    if let Some(cycle) = find_cycle(doc) {
        return Err(MappingError::CycleDetected(cycle));
    }

    let mut trace = MappingTrace {
        essay_id: doc.essay_id.clone(),
        ..MappingTrace::default()
    };

    // Each component hangs under exactly one parent: claims under the root,
    // premises under the target of their first outgoing relation.
    let mut parent: BTreeMap<&str, (&str, PeRelationKind)> = BTreeMap::new();
    for r in &doc.relations {
        match kinds[r.source_id.as_str()] {
            ComponentKind::Premise => {
                if parent.contains_key(r.source_id.as_str()) {
                    let w = MappingWarning::MultipleOutgoing(r.source_id.clone());
                    if !trace.warnings.contains(&w) {
                        trace.warnings.push(w);
                    }
                    continue;
                }
                let target = match kinds[r.target_id.as_str()] {
                    ComponentKind::MajorClaim => ROOT_ADU,
                    _ => r.target_id.as_str(),
                };
                parent.insert(r.source_id.as_str(), (target, r.kind));
            }
            _ => trace
                .warnings
                .push(MappingWarning::IgnoredRelation(r.source_id.clone())),
        }
    }

    let mut children: BTreeMap<&str, Vec<&Component>> = BTreeMap::new();
    for c in &doc.components {
        match c.kind {
            ComponentKind::MajorClaim => {}
            ComponentKind::Claim => children.entry(ROOT_ADU).or_default().push(c),
            ComponentKind::Premise => {
                if let Some((p, _)) = parent.get(c.id.as_str()) {
                    children.entry(p).or_default().push(c);
                }
            }
        }
    }

    // Walk top-down (depth first, annotation order) assigning stances.
    let mut stance_of: BTreeMap<String, Stance> = BTreeMap::new();
    let mut edges_out: Vec<(String, RelationType, String)> = Vec::new();
    stance_of.insert(ROOT_ADU.into(), Stance::Pro);
    trace.steps.push(MappingStep {
        component_id: major[0].id.clone(),
        assigned_stance: Stance::Pro,
        rule: MappingRule::Root,
        edge_label: None,
    });
    let mut stack: Vec<&str> = vec![ROOT_ADU];
    while let Some(node) = stack.pop() {
        let node_stance = stance_of[node];
        let kids = children.get(node).map(Vec::as_slice).unwrap_or(&[]);
        for child in kids {
            let (stance, rel, rule) = match child.kind {
                ComponentKind::Claim => match doc.claim_stances.get(&child.id) {
                    Some(ClaimStance::For) => {
                        (Stance::Pro, RelationType::Support, MappingRule::DirectChild)
                    }
                    Some(ClaimStance::Against) => (
                        Stance::Con,
                        RelationType::Rebuttal,
                        MappingRule::DirectChild,
                    ),
                    None => return Err(MappingError::MissingStance(child.id.clone())),
                },
                _ => match parent[child.id.as_str()].1 {
                    PeRelationKind::Support => (
                        node_stance,
                        RelationType::Support,
                        MappingRule::InheritSupport,
                    ),
                    PeRelationKind::Attack => (
                        node_stance.flip(),
                        RelationType::Rebuttal,
                        MappingRule::FlipAttack,
                    ),
                },
            };
            trace.steps.push(MappingStep {
                component_id: child.id.clone(),
                assigned_stance: stance,
                rule,
                edge_label: Some(rel),
            });
            stance_of.insert(child.id.clone(), stance);
            edges_out.push((child.id.clone(), rel, node.to_string()));
        }
        // Reverse push keeps annotation order for the depth-first visit.
        for child in kids.iter().rev() {
            stack.push(child.id.as_str());
        }
    }

    for c in &doc.components {
        if c.kind == ComponentKind::Premise && !stance_of.contains_key(&c.id) {
            if options.lenient {
                trace.warnings.push(MappingWarning::Dropped(c.id.clone()));
            } else {
                return Err(MappingError::UnreachableComponent(c.id.clone()));
            }
        }
    }

    let graph = build_graph(doc, &major, &stance_of, &edges_out);
    let report = validate_graph(&graph);
    if !report.ok {
        return Err(MappingError::InvalidResult(report.summary()));
    }
    Ok((graph, trace))
}

fn build_graph(
    doc: &PeDocument,
    major: &[&Component],
    stance_of: &BTreeMap<String, Stance>,
    edges_out: &[(String, RelationType, String)],
) -> ArgumentGraph {
    let mut major_sorted: Vec<&Component> = major.to_vec();
    major_sorted.sort_by_key(|c| c.span.0);
    let root_text = major_sorted
        .iter()
        .map(|c| c.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");

    // EDUs in document order; the merged root sits at its first MajorClaim.
    let mut positioned: Vec<(usize, Edu, String, Stance)> = vec![(
        major_sorted[0].span.0,
        Edu {
            id: ROOT_EDU.into(),
            text: root_text,
        },
        ROOT_ADU.into(),
        Stance::Pro,
    )];
    for c in &doc.components {
        if c.kind == ComponentKind::MajorClaim {
            continue;
        }
        if let Some(stance) = stance_of.get(&c.id) {
            positioned.push((
                c.span.0,
                Edu {
                    id: format!("e-{}", c.id),
                    text: c.text.clone(),
                },
                adu_id(&c.id),
                *stance,
            ));
        }
    }
    positioned.sort_by_key(|p| p.0);

    let mut edus = Vec::new();
    let mut adus = Vec::new();
    let mut edges = Vec::new();
    for (_, edu, adu, stance) in positioned {
        edges.push(Edge {
            id: format!("s-{}", edu.id),
            rel: RelationType::Segment,
            source: edu.id.clone(),
            target: EdgeTarget::Node(adu.clone()),
        });
        edus.push(edu);
        adus.push(Adu { id: adu, stance });
    }
    for (source, rel, target) in edges_out {
        let target_adu = if target == ROOT_ADU {
            ROOT_ADU.to_string()
        } else {
            adu_id(target)
        };
        edges.push(Edge {
            id: format!("c-{source}"),
            rel: *rel,
            source: adu_id(source),
            target: EdgeTarget::Node(target_adu),
        });
    }

    ArgumentGraph {
        doc_id: doc.essay_id.clone(),
        language: Language::En,
        topic: None,
        edus,
        adus,
        edges,
    }
}

/// ADU id in the mapped graph for a component id; MajorClaims map to the root.
pub fn mapped_adu_id(doc: &PeDocument, component_id: &str) -> Option<String> {
    match doc.component(component_id)?.kind {
        ComponentKind::MajorClaim => Some(ROOT_ADU.into()),
        _ => Some(adu_id(component_id)),
    }
}
