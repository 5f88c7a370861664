//! Microtext-style argument graphs.
//!
//! A document is a sequence of EDUs (text segments), a set of ADUs carrying a
//! stance, and typed directed edges. Segment edges map EDUs onto ADUs; every
//! other edge links ADUs, except undercuts, which attack an edge (an
//! inference) rather than a node.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

/// Position of an ADU relative to the central claim.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Pro,
    Con,
}

impl Stance {
    pub const ALL: [Stance; 2] = [Stance::Pro, Stance::Con];

    pub fn flip(self) -> Stance {
        match self {
            Stance::Pro => Stance::Con,
            Stance::Con => Stance::Pro,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stance::Pro => "pro",
            Stance::Con => "con",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stance {
    type Err = UnknownName;

    /// Accepts the Microtext spelling (`opp` for the opponent) as well as
    /// `pro`/`con`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pro" | "proponent" => Ok(Stance::Pro),
            "con" | "opp" | "opponent" => Ok(Stance::Con),
            _ => Err(UnknownName(s.to_string())),
        }
    }
}

/// A string that did not name any variant of the target enum.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown name `{0}`")]
pub struct UnknownName(pub String);

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationType {
    Segment,
    Support,
    Rebuttal,
    Undercut,
    Example,
}

impl RelationType {
    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::Segment => "segment",
            RelationType::Support => "support",
            RelationType::Rebuttal => "rebuttal",
            RelationType::Undercut => "undercut",
            RelationType::Example => "example",
        }
    }

    /// The short attribute value used in Microtext XML.
    pub fn microtext_code(self) -> &'static str {
        match self {
            RelationType::Segment => "seg",
            RelationType::Support => "sup",
            RelationType::Rebuttal => "reb",
            RelationType::Undercut => "und",
            RelationType::Example => "exa",
        }
    }

    /// The classification label for this relation; `None` for segment links.
    pub fn label(self) -> Option<RelationLabel> {
        match self {
            RelationType::Segment => None,
            RelationType::Support => Some(RelationLabel::Support),
            RelationType::Rebuttal => Some(RelationLabel::Rebuttal),
            RelationType::Undercut => Some(RelationLabel::Undercut),
            RelationType::Example => Some(RelationLabel::Example),
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationType {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "seg" | "segment" => Ok(RelationType::Segment),
            "sup" | "support" => Ok(RelationType::Support),
            "reb" | "rebuttal" => Ok(RelationType::Rebuttal),
            "und" | "undercut" => Ok(RelationType::Undercut),
            "exa" | "example" => Ok(RelationType::Example),
            _ => Err(UnknownName(s.to_string())),
        }
    }
}

/// Relation classes seen by the relation classifier. Segment links are
/// preprocessing-only and have no label.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Support,
    Rebuttal,
    Undercut,
    Example,
}

impl RelationLabel {
    pub const ALL: [RelationLabel; 4] = [
        RelationLabel::Support,
        RelationLabel::Rebuttal,
        RelationLabel::Undercut,
        RelationLabel::Example,
    ];

    pub fn as_str(self) -> &'static str {
        self.relation().as_str()
    }

    pub fn relation(self) -> RelationType {
        match self {
            RelationLabel::Support => RelationType::Support,
            RelationLabel::Rebuttal => RelationType::Rebuttal,
            RelationLabel::Undercut => RelationType::Undercut,
            RelationLabel::Example => RelationType::Example,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationLabel {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationType::from_str(s)?
            .label()
            .ok_or_else(|| UnknownName(s.to_string()))
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Fa,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Fa => "fa",
        }
    }

    pub fn upper(self) -> &'static str {
        match self {
            Language::En => "EN",
            Language::Fa => "FA",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" | "english" => Ok(Language::En),
            "fa" | "persian" | "farsi" => Ok(Language::Fa),
            _ => Err(UnknownName(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edu {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adu {
    pub id: String,
    pub stance: Stance,
}

/// What an edge points at. Undercuts point at another edge.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum EdgeTarget {
    Node(String),
    Edge(String),
}

impl EdgeTarget {
    pub fn id(&self) -> &str {
        match self {
            EdgeTarget::Node(id) | EdgeTarget::Edge(id) => id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub rel: RelationType,
    pub source: String,
    pub target: EdgeTarget,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentGraph {
    pub doc_id: String,
    pub language: Language,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic: Option<String>,
    pub edus: Vec<Edu>,
    pub adus: Vec<Adu>,
    pub edges: Vec<Edge>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("graph `{doc_id}` is not valid: {summary}")]
    NotValid { doc_id: String, summary: String },
    #[error("ADU `{0}` has no segment edge")]
    NoSegment(String),
    #[error("ADU `{0}` does not exist")]
    UnknownAdu(String),
    #[error("edge `{0}` does not target a resolvable edge")]
    BadTarget(String),
    #[error("edge `{0}` is not an undercut")]
    NotUndercut(String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    DuplicateId,
    EmptyEduText,
    DanglingRef,
    SelfLoop,
    BadSegment,
    BadEndpoint,
    BadUndercutTarget,
    MissingSegment,
    NoRoot,
    MultipleRoots,
    MultipleOutgoing,
    Cycle,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::DuplicateId => "DUPLICATE_ID",
            ViolationCode::EmptyEduText => "EMPTY_EDU_TEXT",
            ViolationCode::DanglingRef => "DANGLING_REF",
            ViolationCode::SelfLoop => "SELF_LOOP",
            ViolationCode::BadSegment => "BAD_SEGMENT",
            ViolationCode::BadEndpoint => "BAD_ENDPOINT",
            ViolationCode::BadUndercutTarget => "BAD_UNDERCUT_TARGET",
            ViolationCode::MissingSegment => "MISSING_SEGMENT",
            ViolationCode::NoRoot => "NO_ROOT",
            ViolationCode::MultipleRoots => "MULTIPLE_ROOTS",
            ViolationCode::MultipleOutgoing => "MULTIPLE_OUTGOING",
            ViolationCode::Cycle => "CYCLE",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub offending_id: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
    /// Findings that were downgraded by the [`ValidationPolicy`].
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    pub fn summary(&self) -> String {
        let parts: Vec<String> = self
            .violations
            .iter()
            .map(|v| alloc::format!("{}({})", v.code, v.offending_id))
            .collect();
        parts.join(", ")
    }
}

/// Knobs for findings whose status depends on the corpus at hand.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationPolicy {
    /// Report ADUs with several outgoing argumentative edges as warnings
    /// instead of violations (linked or serial arguments).
    pub multiple_outgoing_is_warning: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum NodeKind {
    Edu(usize),
    Adu(usize),
    Edge(usize),
}

/// Id lookup built once per graph. Duplicate ids keep their first binding.
struct Index<'g> {
    ids: BTreeMap<&'g str, NodeKind>,
    duplicates: BTreeSet<&'g str>,
}

impl<'g> Index<'g> {
    fn new(g: &'g ArgumentGraph) -> Self {
        let mut ids = BTreeMap::new();
        let mut duplicates = BTreeSet::new();
        let all = g
            .edus
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), NodeKind::Edu(i)))
            .chain(
                g.adus
                    .iter()
                    .enumerate()
                    .map(|(i, a)| (a.id.as_str(), NodeKind::Adu(i))),
            )
            .chain(
                g.edges
                    .iter()
                    .enumerate()
                    .map(|(i, e)| (e.id.as_str(), NodeKind::Edge(i))),
            );
        for (id, kind) in all {
            if ids.contains_key(id) {
                duplicates.insert(id);
            } else {
                ids.insert(id, kind);
            }
        }
        Index { ids, duplicates }
    }

    fn get(&self, id: &str) -> Option<NodeKind> {
        self.ids.get(id).copied()
    }

    fn is_adu(&self, id: &str) -> bool {
        matches!(self.get(id), Some(NodeKind::Adu(_)))
    }
}

impl ArgumentGraph {
    pub fn adu(&self, id: &str) -> Option<&Adu> {
        self.adus.iter().find(|a| a.id == id)
    }

    pub fn edge(&self, id: &str) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Non-segment edges in document order.
    pub fn argumentative_edges(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.rel != RelationType::Segment)
    }
}

/// Checks every structural invariant and reports all failures.
pub fn validate_graph(g: &ArgumentGraph) -> ValidationReport {
    validate_graph_with(g, ValidationPolicy::default())
}

pub fn validate_graph_with(g: &ArgumentGraph, policy: ValidationPolicy) -> ValidationReport {
    let index = Index::new(g);
    let mut violations = Vec::new();
    let mut warnings = Vec::new();
    fn push(violations: &mut Vec<Violation>, code: ViolationCode, id: &str) {
        violations.push(Violation {
            code,
            offending_id: id.to_string(),
        })
    }

    for id in &index.duplicates {
        push(&mut violations, ViolationCode::DuplicateId, id);
    }
    for edu in &g.edus {
        if edu.text.trim().is_empty() {
            push(&mut violations, ViolationCode::EmptyEduText, &edu.id);
        }
    }

    let mut segmented: BTreeSet<&str> = BTreeSet::new();
    let mut outgoing: BTreeMap<&str, Vec<&Edge>> = BTreeMap::new();
    for edge in &g.edges {
        let source = index.get(&edge.source);
        let target = index.get(edge.target.id());
        if source.is_none() || target.is_none() {
            push(&mut violations, ViolationCode::DanglingRef, &edge.id);
            continue;
        }
        if edge.source == edge.target.id() || edge.id == edge.target.id() {
            push(&mut violations, ViolationCode::SelfLoop, &edge.id);
            continue;
        }
        match edge.rel {
            RelationType::Segment => {
                let ok = matches!(source, Some(NodeKind::Edu(_)))
                    && matches!(edge.target, EdgeTarget::Node(_))
                    && index.is_adu(edge.target.id());
                if ok {
                    segmented.insert(edge.target.id());
                } else {
                    push(&mut violations, ViolationCode::BadSegment, &edge.id);
                }
            }
            RelationType::Undercut => {
                if !index.is_adu(&edge.source) {
                    push(&mut violations, ViolationCode::BadEndpoint, &edge.id);
                    continue;
                }
                let attacks_inference = match (&edge.target, target) {
                    (EdgeTarget::Edge(_), Some(NodeKind::Edge(i))) => {
                        g.edges[i].rel != RelationType::Segment
                    }
                    _ => false,
                };
                if !attacks_inference {
                    push(&mut violations, ViolationCode::BadUndercutTarget, &edge.id);
                    continue;
                }
                outgoing.entry(edge.source.as_str()).or_default().push(edge);
            }
            RelationType::Support | RelationType::Rebuttal | RelationType::Example => {
                let ok = index.is_adu(&edge.source)
                    && matches!(edge.target, EdgeTarget::Node(_))
                    && index.is_adu(edge.target.id());
                if !ok {
                    push(&mut violations, ViolationCode::BadEndpoint, &edge.id);
                    continue;
                }
                outgoing.entry(edge.source.as_str()).or_default().push(edge);
            }
        }
    }

    for adu in &g.adus {
        if !segmented.contains(adu.id.as_str()) {
            push(&mut violations, ViolationCode::MissingSegment, &adu.id);
        }
        if outgoing.get(adu.id.as_str()).is_some_and(|e| e.len() > 1) {
            let v = Violation {
                code: ViolationCode::MultipleOutgoing,
                offending_id: adu.id.clone(),
            };
            if policy.multiple_outgoing_is_warning {
                warnings.push(v);
            } else {
                violations.push(v);
            }
        }
    }

    let roots: Vec<&Adu> = g
        .adus
        .iter()
        .filter(|a| !outgoing.contains_key(a.id.as_str()))
        .collect();
    match roots.len() {
        0 => violations.push(Violation {
            code: ViolationCode::NoRoot,
            offending_id: g.doc_id.clone(),
        }),
        1 => {}
        _ => {
            for r in &roots {
                violations.push(Violation {
                    code: ViolationCode::MultipleRoots,
                    offending_id: r.id.clone(),
                });
            }
        }
    }

    // Every ADU must reach a root by following its (first) outgoing edge,
    // with undercuts climbing through the attacked edge's source.
    let parent = |adu: &str| -> Option<&str> {
        let edge = outgoing.get(adu)?.first()?;
        match &edge.target {
            EdgeTarget::Node(t) => Some(t.as_str()),
            EdgeTarget::Edge(t) => match index.get(t) {
                Some(NodeKind::Edge(i)) => Some(g.edges[i].source.as_str()),
                _ => None,
            },
        }
    };
    for adu in &g.adus {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut cur = adu.id.as_str();
        loop {
            if !seen.insert(cur) {
                violations.push(Violation {
                    code: ViolationCode::Cycle,
                    offending_id: adu.id.clone(),
                });
                break;
            }
            match parent(cur) {
                Some(p) => cur = p,
                None => break,
            }
        }
    }

    violations.sort();
    violations.dedup();
    warnings.sort();
    ValidationReport {
        ok: violations.is_empty(),
        violations,
        warnings,
    }
}

/// The central claim: the unique ADU with no outgoing argumentative edge.
pub fn root(g: &ArgumentGraph) -> Result<&Adu, GraphError> {
    let report = validate_graph(g);
    if !report.ok {
        return Err(GraphError::NotValid {
            doc_id: g.doc_id.clone(),
            summary: report.summary(),
        });
    }
    let sources: BTreeSet<&str> = g.argumentative_edges().map(|e| e.source.as_str()).collect();
    g.adus
        .iter()
        .find(|a| !sources.contains(a.id.as_str()))
        .ok_or_else(|| GraphError::NotValid {
            doc_id: g.doc_id.clone(),
            summary: "no root".into(),
        })
}

/// Text of an ADU: its segment-linked EDUs in document order, space-joined.
pub fn adu_text(g: &ArgumentGraph, adu_id: &str) -> Result<String, GraphError> {
    if g.adu(adu_id).is_none() {
        return Err(GraphError::UnknownAdu(adu_id.to_string()));
    }
    let linked: BTreeSet<&str> = g
        .edges
        .iter()
        .filter(|e| e.rel == RelationType::Segment && e.target.id() == adu_id)
        .map(|e| e.source.as_str())
        .collect();
    let parts: Vec<&str> = g
        .edus
        .iter()
        .filter(|edu| linked.contains(edu.id.as_str()))
        .map(|edu| edu.text.as_str())
        .collect();
    if parts.is_empty() {
        return Err(GraphError::NoSegment(adu_id.to_string()));
    }
    Ok(parts.join(" "))
}

/// Resolves an undercut to an ADU pair: the undercutter and the source of
/// the inference it attacks.
pub fn undercut_endpoints<'g>(
    g: &'g ArgumentGraph,
    e: &'g Edge,
) -> Result<(&'g str, &'g str), GraphError> {
    if e.rel != RelationType::Undercut {
        return Err(GraphError::NotUndercut(e.id.clone()));
    }
    let EdgeTarget::Edge(target) = &e.target else {
        return Err(GraphError::BadTarget(e.id.clone()));
    };
    let attacked = g
        .edge(target)
        .ok_or_else(|| GraphError::BadTarget(e.id.clone()))?;
    Ok((e.source.as_str(), attacked.source.as_str()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::*;

    #[test]
    fn case1_is_valid_with_four_links() {
        let g = case1();
        let report = validate_graph(&g);
        assert!(report.ok, "{}", report.summary());
        assert_eq!(g.argumentative_edges().count(), 4);
        assert_eq!(root(&g).unwrap().id, "a1");
    }

    #[test]
    fn case2_root_is_adu1() {
        assert_eq!(root(&case2()).unwrap().id, "a1");
    }

    #[test]
    fn single_adu_graph_is_its_own_root() {
        let g = minimal("d", "Just one claim.");
        assert!(validate_graph(&g).ok);
        assert_eq!(root(&g).unwrap().id, "a1");
    }

    #[test]
    fn two_parentless_adus_are_multiple_roots() {
        let mut g = minimal("d", "one");
        g.edus.push(edu("e2", "two"));
        g.adus.push(adu("a2", Stance::Con));
        g.edges.push(seg("s2", "e2", "a2"));
        let report = validate_graph(&g);
        assert!(!report.ok);
        assert!(report.has(ViolationCode::MultipleRoots));
        assert!(matches!(root(&g), Err(GraphError::NotValid { .. })));
    }

    #[test]
    fn undercut_on_node_is_rejected() {
        let mut g = case1();
        let und = g
            .edges
            .iter_mut()
            .find(|e| e.rel == RelationType::Undercut)
            .unwrap();
        und.target = EdgeTarget::Node("a2".into());
        let report = validate_graph(&g);
        assert!(report.has(ViolationCode::BadUndercutTarget));
    }

    #[test]
    fn every_failure_is_reported() {
        let mut g = case1();
        g.edges.push(Edge {
            id: "x1".into(),
            rel: RelationType::Support,
            source: "a4".into(),
            target: EdgeTarget::Node("a4".into()),
        });
        g.edges.push(Edge {
            id: "x2".into(),
            rel: RelationType::Support,
            source: "a5".into(),
            target: EdgeTarget::Node("ghost".into()),
        });
        g.edus[0].text = "  ".into();
        let report = validate_graph(&g);
        assert!(report.has(ViolationCode::SelfLoop));
        assert!(report.has(ViolationCode::DanglingRef));
        assert!(report.has(ViolationCode::EmptyEduText));
    }

    #[test]
    fn multiple_outgoing_can_be_downgraded() {
        let mut g = case2();
        g.edges.push(Edge {
            id: "x1".into(),
            rel: RelationType::Support,
            source: "a4".into(),
            target: EdgeTarget::Node("a2".into()),
        });
        assert!(validate_graph(&g).has(ViolationCode::MultipleOutgoing));
        let lenient = validate_graph_with(
            &g,
            ValidationPolicy {
                multiple_outgoing_is_warning: true,
            },
        );
        assert!(lenient.ok, "{}", lenient.summary());
        assert_eq!(lenient.warnings.len(), 1);
    }

    #[test]
    fn two_node_cycle_is_detected() {
        // a1 is the root; a2 and a3 point at each other.
        let mut g = minimal("d", "root");
        for (e, a) in [("e2", "a2"), ("e3", "a3")] {
            g.edus.push(edu(e, "text"));
            g.adus.push(adu(a, Stance::Pro));
            g.edges.push(seg(&alloc::format!("s{a}"), e, a));
        }
        g.edges.push(link("c1", RelationType::Support, "a2", "a3"));
        g.edges.push(link("c2", RelationType::Support, "a3", "a2"));
        let report = validate_graph(&g);
        assert!(report.has(ViolationCode::Cycle));
        assert!(!report.has(ViolationCode::MultipleRoots));
    }

    #[test]
    fn missing_segment_is_reported() {
        let mut g = case2();
        g.edges
            .retain(|e| !(e.rel == RelationType::Segment && e.target.id() == "a3"));
        assert!(validate_graph(&g).has(ViolationCode::MissingSegment));
        assert_eq!(adu_text(&g, "a3"), Err(GraphError::NoSegment("a3".into())));
    }

    #[test]
    fn adu_text_single_edu() {
        assert_eq!(
            adu_text(&case2(), "a1").unwrap(),
            "BER should be re-conceptualized from scratch,"
        );
    }

    #[test]
    fn adu_text_multiple_edus_in_document_order() {
        let mut g = minimal("d", "a");
        g.edus.push(edu("e2", "b"));
        // segment edge for the later EDU listed first
        g.edges.insert(0, seg("s2", "e2", "a1"));
        assert_eq!(adu_text(&g, "a1").unwrap(), "a b");
    }

    #[test]
    fn adu_text_unknown_adu() {
        assert_eq!(
            adu_text(&case2(), "zz"),
            Err(GraphError::UnknownAdu("zz".into()))
        );
    }

    #[test]
    fn undercut_resolves_to_attacked_source() {
        let g = case1();
        let und = g
            .edges
            .iter()
            .find(|e| e.rel == RelationType::Undercut)
            .unwrap();
        assert_eq!(undercut_endpoints(&g, und).unwrap(), ("a3", "a2"));
    }

    #[test]
    fn undercut_on_support_edge() {
        let mut g = case2();
        g.edus.push(edu("e5", "undercutting text"));
        g.adus.push(adu("a5", Stance::Con));
        g.edges.push(seg("s5", "e5", "a5"));
        let sup = g
            .edges
            .iter()
            .find(|e| e.rel == RelationType::Support)
            .unwrap()
            .id
            .clone();
        g.edges.push(Edge {
            id: "u1".into(),
            rel: RelationType::Undercut,
            source: "a5".into(),
            target: EdgeTarget::Edge(sup),
        });
        assert!(validate_graph(&g).ok);
        let und = g.edge("u1").unwrap();
        assert_eq!(undercut_endpoints(&g, und).unwrap(), ("a5", "a4"));
    }

    #[test]
    fn undercut_with_missing_target_edge() {
        let g = case1();
        let mut und = g
            .edges
            .iter()
            .find(|e| e.rel == RelationType::Undercut)
            .unwrap()
            .clone();
        und.target = EdgeTarget::Edge("nope".into());
        assert_eq!(
            undercut_endpoints(&g, &und),
            Err(GraphError::BadTarget(und.id.clone()))
        );
    }

    #[test]
    fn stance_parsing_accepts_microtext_spelling() {
        assert_eq!("opp".parse::<Stance>().unwrap(), Stance::Con);
        assert_eq!("pro".parse::<Stance>().unwrap(), Stance::Pro);
        assert!("neutral".parse::<Stance>().is_err());
        assert_eq!(
            "und".parse::<RelationType>().unwrap(),
            RelationType::Undercut
        );
        assert!("segment".parse::<RelationLabel>().is_err());
    }
}
