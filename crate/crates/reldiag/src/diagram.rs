//! Diagram document model: a tree of canvas partitions (the base canvas,
//! dashed negation scopes, and bold fuse-box groups read as disjunctions),
//! table boxes, built-in relation boxes, unlabeled equijoin edges, and an
//! optional output box — plus display hints for the shortcut notations
//! (selections fused into attribute boxes, binary built-ins drawn as
//! labeled arrows).
//!
//! Serialized as versioned JSON with a fixed key order, so files are
//! byte-stable and diffable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{CmpOp, Constant};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionKind {
    Base,
    Negation,
    Fuse,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Partition {
    pub id: String,
    pub kind: PartitionKind,
    pub parent: Option<String>,
    /// Fuse partitions sharing a group id are read as one disjunction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TableBox {
    pub id: String,
    pub relation: String,
    pub var: String,
    pub partition: String,
    /// Displayed attributes, deduplicated, in first-use order.
    pub attrs: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct BuiltinBox {
    pub id: String,
    pub partition: String,
    pub op: CmpOp,
    /// `Some` for a unary built-in (anchor `$1`), `None` for a binary one
    /// (anchors `$1` and `$2`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<Constant>,
}

impl BuiltinBox {
    pub fn is_unary(&self) -> bool {
        self.constant.is_some()
    }

    /// The interpreted relation name (`"<"`, `"=4"`, ...).
    pub fn relation_name(&self) -> String {
        crate::eval::builtin_name(self.op, self.constant.as_ref())
    }

    pub fn anchors(&self) -> &'static [&'static str] {
        if self.is_unary() {
            &["$1"]
        } else {
            &["$1", "$2"]
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Endpoint {
    #[serde(rename = "box")]
    pub box_id: String,
    pub attr: String,
}

/// Unlabeled equijoin between two attribute boxes.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub a: Endpoint,
    pub b: Endpoint,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct OutputBox {
    pub id: String,
    pub var: String,
    pub attrs: Vec<String>,
}

/// Display hints on top of the canonical anchored form; semantics never
/// depend on them.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct Hints {
    /// Unary built-in boxes drawn fused into the joined attribute box
    /// (`A < 4` instead of a separate condition box and edge).
    #[serde(default)]
    pub fused_selections: Vec<String>,
    /// Binary built-in boxes drawn as one labeled arrow between the two
    /// joined attributes.
    #[serde(default)]
    pub arrow_joins: Vec<String>,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Diagram {
    pub version: u32,
    pub partitions: Vec<Partition>,
    pub tables: Vec<TableBox>,
    pub builtins: Vec<BuiltinBox>,
    pub edges: Vec<Edge>,
    pub output: Option<OutputBox>,
    #[serde(default)]
    pub hints: Hints,
}

pub const DIAGRAM_VERSION: u32 = 1;

// ---------------------------------------------------------------------------

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ValidityReport {
    pub problems: Vec<String>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.problems.is_empty()
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            write!(f, "valid")
        } else {
            for p in &self.problems {
                writeln!(f, "invalid: {p}")?;
            }
            Ok(())
        }
    }
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum DiagramError {
    #[error("format error: {0}")]
    Format(String),
    #[error("invalid diagram: {0}")]
    Invalid(String),
}

impl Diagram {
    pub fn partition(&self, id: &str) -> Option<&Partition> {
        self.partitions.iter().find(|p| p.id == id)
    }

    /// Partition of a box id (table, builtin, or output — the output box
    /// always sits in the base partition).
    pub fn box_partition(&self, box_id: &str) -> Option<String> {
        if let Some(t) = self.tables.iter().find(|t| t.id == box_id) {
            return Some(t.partition.clone());
        }
        if let Some(b) = self.builtins.iter().find(|b| b.id == box_id) {
            return Some(b.partition.clone());
        }
        if let Some(o) = &self.output {
            if o.id == box_id {
                return self.base_id();
            }
        }
        None
    }

    pub fn base_id(&self) -> Option<String> {
        self.partitions
            .iter()
            .find(|p| p.kind == PartitionKind::Base)
            .map(|p| p.id.clone())
    }

    /// Number of partitions between `id` and the root.
    pub fn depth(&self, id: &str) -> Option<usize> {
        let mut depth = 0;
        let mut cur = self.partition(id)?;
        let mut seen = BTreeSet::new();
        while let Some(parent) = &cur.parent {
            if !seen.insert(cur.id.clone()) {
                return None; // cycle
            }
            depth += 1;
            cur = self.partition(parent)?;
        }
        Some(depth)
    }

    /// Number of enclosing negation scopes of a partition (fuse boxes do
    /// not change parity; their double-negation shell adds two).
    pub fn negation_depth(&self, id: &str) -> Option<usize> {
        let mut n = 0;
        let mut cur = self.partition(id)?;
        let mut seen = BTreeSet::new();
        loop {
            if !seen.insert(cur.id.clone()) {
                return None;
            }
            if cur.kind == PartitionKind::Negation {
                n += 1;
            }
            match &cur.parent {
                Some(p) => cur = self.partition(p)?,
                None => return Some(n),
            }
        }
    }

    fn ancestor_chain(&self, id: &str) -> Vec<String> {
        let mut chain = vec![id.to_string()];
        let mut cur = id.to_string();
        let mut seen = BTreeSet::new();
        while let Some(p) = self.partition(&cur).and_then(|p| p.parent.clone()) {
            if !seen.insert(cur.clone()) {
                break;
            }
            chain.push(p.clone());
            cur = p;
        }
        chain
    }

    /// True when one partition is an ancestor of (or equal to) the other.
    pub fn on_common_path(&self, a: &str, b: &str) -> bool {
        self.ancestor_chain(a).contains(&b.to_string())
            || self.ancestor_chain(b).contains(&a.to_string())
    }

    /// Ids of all drawn boxes: tables, builtins, and the output box.
    pub fn box_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.tables.iter().map(|t| t.id.clone()).collect();
        ids.extend(self.builtins.iter().map(|b| b.id.clone()));
        if let Some(o) = &self.output {
            ids.push(o.id.clone());
        }
        ids
    }

    /// Dangling-reference check; stricter semantic conditions live in
    /// [`validate`].
    pub fn check_references(&self) -> Result<(), DiagramError> {
        let pids: BTreeSet<&String> = self.partitions.iter().map(|p| &p.id).collect();
        for p in &self.partitions {
            if let Some(parent) = &p.parent {
                if !pids.contains(parent) {
                    return Err(DiagramError::Format(format!(
                        "partition `{}` references unknown parent `{parent}`",
                        p.id
                    )));
                }
            }
        }
        for t in &self.tables {
            if !pids.contains(&t.partition) {
                return Err(DiagramError::Format(format!(
                    "table box `{}` references unknown partition `{}`",
                    t.id, t.partition
                )));
            }
        }
        for b in &self.builtins {
            if !pids.contains(&b.partition) {
                return Err(DiagramError::Format(format!(
                    "builtin box `{}` references unknown partition `{}`",
                    b.id, b.partition
                )));
            }
        }
        let boxes: BTreeSet<String> = self.box_ids().into_iter().collect();
        for e in &self.edges {
            for ep in [&e.a, &e.b] {
                if !boxes.contains(&ep.box_id) {
                    return Err(DiagramError::Format(format!(
                        "edge endpoint references unknown box `{}`",
                        ep.box_id
                    )));
                }
            }
        }
        for h in self.hints.fused_selections.iter().chain(&self.hints.arrow_joins) {
            if !self.builtins.iter().any(|b| &b.id == h) {
                return Err(DiagramError::Format(format!(
                    "hint references unknown builtin box `{h}`"
                )));
            }
        }
        Ok(())
    }
}

/// Attributes an edge may attach to on a given box.
fn endpoint_ok(d: &Diagram, ep: &Endpoint) -> Result<(), String> {
    if let Some(t) = d.tables.iter().find(|t| t.id == ep.box_id) {
        return if t.attrs.contains(&ep.attr) {
            Ok(())
        } else {
            Err(format!(
                "edge attaches to `{}.{}` but the table box displays no such attribute",
                ep.box_id, ep.attr
            ))
        };
    }
    if let Some(b) = d.builtins.iter().find(|b| b.id == ep.box_id) {
        return if b.anchors().contains(&ep.attr.as_str()) {
            Ok(())
        } else {
            Err(format!("edge attaches to `{}.{}`: no such anchor", ep.box_id, ep.attr))
        };
    }
    if let Some(o) = &d.output {
        if o.id == ep.box_id {
            return if o.attrs.contains(&ep.attr) {
                Ok(())
            } else {
                Err(format!("edge attaches to unknown output attribute `{}`", ep.attr))
            };
        }
    }
    Err(format!("edge endpoint references unknown box `{}`", ep.box_id))
}

pub fn validate(d: &Diagram) -> ValidityReport {
    let mut problems = Vec::new();
    let mut push = |p: String| problems.push(p);

    if d.version != DIAGRAM_VERSION {
        push(format!("unsupported version {}", d.version));
    }
    if let Err(e) = d.check_references() {
        push(e.to_string());
        return ValidityReport { problems };
    }

    // partition tree shape
    let mut ids = BTreeSet::new();
    for p in &d.partitions {
        if !ids.insert(&p.id) {
            push(format!("duplicate partition id `{}`", p.id));
        }
    }
    let bases: Vec<&Partition> =
        d.partitions.iter().filter(|p| p.kind == PartitionKind::Base).collect();
    if bases.len() != 1 {
        push(format!("expected exactly one base partition, found {}", bases.len()));
    }
    for p in &d.partitions {
        match (p.kind, &p.parent) {
            (PartitionKind::Base, Some(_)) => {
                push(format!("base partition `{}` must not have a parent", p.id))
            }
            (PartitionKind::Base, None) => {}
            (_, None) => push(format!("partition `{}` must have a parent", p.id)),
            (_, Some(_)) => {}
        }
        if d.depth(&p.id).is_none() {
            push(format!("partition `{}` is part of a parent cycle", p.id));
        }
        match (p.kind, &p.group) {
            (PartitionKind::Fuse, None) => {
                push(format!("fuse partition `{}` has no group id", p.id))
            }
            (PartitionKind::Fuse, Some(_)) => {}
            (_, Some(_)) => push(format!("non-fuse partition `{}` carries a group id", p.id)),
            _ => {}
        }
    }

    // fuse groups: at least two members sharing one parent
    let mut groups: BTreeMap<&String, Vec<&Partition>> = BTreeMap::new();
    for p in &d.partitions {
        if let (PartitionKind::Fuse, Some(g)) = (p.kind, &p.group) {
            groups.entry(g).or_default().push(p);
        }
    }
    for (g, members) in &groups {
        if members.len() < 2 {
            push(format!("fuse group `{g}` has fewer than two members"));
        }
        let parents: BTreeSet<&Option<String>> = members.iter().map(|m| &m.parent).collect();
        if parents.len() > 1 {
            push(format!("fuse group `{g}` spans different parent partitions"));
        }
    }

    // boxes
    let mut box_ids = BTreeSet::new();
    for id in d.box_ids() {
        if !box_ids.insert(id.clone()) {
            push(format!("duplicate box id `{id}`"));
        }
    }
    let mut vars = BTreeSet::new();
    for t in &d.tables {
        if !vars.insert(&t.var) {
            push(format!("tuple variable `{}` used by more than one box", t.var));
        }
        let mut seen = BTreeSet::new();
        for a in &t.attrs {
            if !seen.insert(a) {
                push(format!("table box `{}` lists attribute `{a}` twice", t.id));
            }
        }
    }
    if let Some(o) = &d.output {
        if !vars.insert(&o.var) {
            push(format!("output variable `{}` clashes with a table variable", o.var));
        }
        if o.attrs.is_empty() {
            push("output box has no attributes".to_string());
        }
    }
    for b in &d.builtins {
        if crate::eval::parse_builtin(&b.relation_name()).is_none() {
            push(format!("builtin box `{}` has a malformed relation name", b.id));
        }
    }

    // edges
    let mut incident: BTreeMap<(String, String), usize> = BTreeMap::new();
    for e in &d.edges {
        for ep in [&e.a, &e.b] {
            if let Err(msg) = endpoint_ok(d, ep) {
                push(msg);
            }
            *incident.entry((ep.box_id.clone(), ep.attr.clone())).or_insert(0) += 1;
        }
        if let (Some(pa), Some(pb)) =
            (d.box_partition(&e.a.box_id), d.box_partition(&e.b.box_id))
        {
            if !d.on_common_path(&pa, &pb) {
                push(format!(
                    "edge between `{}` and `{}` connects partitions that are not on an \
                     ancestor/descendant path",
                    e.a.box_id, e.b.box_id
                ));
            }
        }
    }
    for b in &d.builtins {
        for anchor in b.anchors() {
            let n = incident.get(&(b.id.clone(), anchor.to_string())).copied().unwrap_or(0);
            if n != 1 {
                push(format!(
                    "builtin box `{}` anchor `{anchor}` has {n} incident edges, expected 1",
                    b.id
                ));
            }
        }
    }

    // every leaf negation/fuse partition must contain a box
    let mut has_child: BTreeSet<&String> = BTreeSet::new();
    for p in &d.partitions {
        if let Some(parent) = &p.parent {
            has_child.insert(parent);
        }
    }
    let mut occupied: BTreeSet<&String> = BTreeSet::new();
    for t in &d.tables {
        occupied.insert(&t.partition);
    }
    for b in &d.builtins {
        occupied.insert(&b.partition);
    }
    for p in &d.partitions {
        if p.kind != PartitionKind::Base
            && !has_child.contains(&p.id)
            && !occupied.contains(&p.id)
        {
            push(format!("leaf partition `{}` contains no box", p.id));
        }
    }

    // hint sanity
    for h in &d.hints.fused_selections {
        match d.builtins.iter().find(|b| &b.id == h) {
            Some(b) if !b.is_unary() => {
                push(format!("fused-selection hint on binary builtin `{h}`"))
            }
            _ => {}
        }
    }
    for h in &d.hints.arrow_joins {
        match d.builtins.iter().find(|b| &b.id == h) {
            Some(b) if b.is_unary() => push(format!("arrow-join hint on unary builtin `{h}`")),
            Some(b) => {
                // the arrow connects the two boxes at the far ends of the
                // anchor edges, so those must be drawn table/output boxes
                let drawable = |id: &String| {
                    d.tables.iter().any(|t| &t.id == id)
                        || d.output.as_ref().is_some_and(|o| &o.id == id)
                };
                let ok = d.edges.iter().all(|e| {
                    (e.a.box_id != b.id || drawable(&e.b.box_id))
                        && (e.b.box_id != b.id || drawable(&e.a.box_id))
                });
                if !ok {
                    push(format!(
                        "arrow-join hint on `{h}` whose anchors do not join table or output boxes"
                    ));
                }
            }
            _ => {}
        }
    }

    ValidityReport { problems }
}

// ---------------------------------------------------------------------------

/// Replace every fuse-box group with its explicit double-negation reading:
/// the members become negation scopes nested inside one new negation scope
/// under the former parent. Box and edge placements are untouched, so the
/// negation parity of every box's zone is preserved (each enclosing group
/// adds exactly two negations).
pub fn expand_fuse_boxes(d: &Diagram) -> Result<Diagram, DiagramError> {
    let report = validate(d);
    if !report.is_valid() {
        return Err(DiagramError::Invalid(report.problems.join("; ")));
    }
    let mut out = d.clone();
    let mut existing: BTreeSet<String> = out.partitions.iter().map(|p| p.id.clone()).collect();

    // groups in document order of their first member
    let mut seen_groups = Vec::new();
    for p in &d.partitions {
        if let (PartitionKind::Fuse, Some(g)) = (p.kind, &p.group) {
            if !seen_groups.contains(g) {
                seen_groups.push(g.clone());
            }
        }
    }
    for group in seen_groups {
        let parent = d
            .partitions
            .iter()
            .find(|p| p.group.as_ref() == Some(&group))
            .and_then(|p| p.parent.clone())
            .expect("validated fuse member has a parent");
        let mut shell_id = format!("shell-{group}");
        let mut n = 1;
        while !existing.insert(shell_id.clone()) {
            n += 1;
            shell_id = format!("shell-{group}-{n}");
        }
        // insert the shell right before the first member to keep document
        // order stable
        let first_idx = out
            .partitions
            .iter()
            .position(|p| p.group.as_ref() == Some(&group))
            .expect("group member present");
        out.partitions.insert(
            first_idx,
            Partition {
                id: shell_id.clone(),
                kind: PartitionKind::Negation,
                parent: Some(parent),
                group: None,
            },
        );
        for p in &mut out.partitions {
            if p.group.as_ref() == Some(&group) {
                p.kind = PartitionKind::Negation;
                p.parent = Some(shell_id.clone());
                p.group = None;
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------

pub fn write_diagram(d: &Diagram) -> String {
    let mut s = serde_json::to_string_pretty(d).expect("diagram serializes");
    s.push('\n');
    s
}

pub fn read_diagram(text: &str) -> Result<Diagram, DiagramError> {
    let d: Diagram =
        serde_json::from_str(text).map_err(|e| DiagramError::Format(e.to_string()))?;
    d.check_references()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// table R(A) joined to a unary builtin `=1` in the base partition
    fn tiny() -> Diagram {
        Diagram {
            version: 1,
            partitions: vec![Partition {
                id: "p0".into(),
                kind: PartitionKind::Base,
                parent: None,
                group: None,
            }],
            tables: vec![TableBox {
                id: "t1".into(),
                relation: "R".into(),
                var: "r".into(),
                partition: "p0".into(),
                attrs: vec!["A".into()],
            }],
            builtins: vec![BuiltinBox {
                id: "b1".into(),
                partition: "p0".into(),
                op: CmpOp::Eq,
                constant: Some(Constant::Int(1)),
            }],
            edges: vec![Edge {
                a: Endpoint { box_id: "t1".into(), attr: "A".into() },
                b: Endpoint { box_id: "b1".into(), attr: "$1".into() },
            }],
            output: None,
            hints: Hints::default(),
        }
    }

    /// R(A) with two fuse boxes holding `=1` and `=2`, both joined to A
    fn fused_disjunction() -> Diagram {
        let mut d = tiny();
        d.partitions.extend([
            Partition {
                id: "f1".into(),
                kind: PartitionKind::Fuse,
                parent: Some("p0".into()),
                group: Some("g1".into()),
            },
            Partition {
                id: "f2".into(),
                kind: PartitionKind::Fuse,
                parent: Some("p0".into()),
                group: Some("g1".into()),
            },
        ]);
        d.builtins = vec![
            BuiltinBox {
                id: "b1".into(),
                partition: "f1".into(),
                op: CmpOp::Eq,
                constant: Some(Constant::Int(1)),
            },
            BuiltinBox {
                id: "b2".into(),
                partition: "f2".into(),
                op: CmpOp::Eq,
                constant: Some(Constant::Int(2)),
            },
        ];
        d.edges = vec![
            Edge {
                a: Endpoint { box_id: "t1".into(), attr: "A".into() },
                b: Endpoint { box_id: "b1".into(), attr: "$1".into() },
            },
            Edge {
                a: Endpoint { box_id: "t1".into(), attr: "A".into() },
                b: Endpoint { box_id: "b2".into(), attr: "$1".into() },
            },
        ];
        d
    }

    #[test]
    fn tiny_diagram_is_valid() {
        assert!(validate(&tiny()).is_valid());
    }

    #[test]
    fn binary_builtin_needs_two_edges() {
        let mut d = tiny();
        d.builtins[0].constant = None; // now binary, but only one edge
        let r = validate(&d);
        assert!(!r.is_valid());
        assert!(r.problems.iter().any(|p| p.contains("anchor")), "{r}");
    }

    #[test]
    fn dangling_edge_is_format_error() {
        let mut d = tiny();
        d.edges[0].b.box_id = "nope".into();
        let text = write_diagram(&d);
        assert!(matches!(read_diagram(&text), Err(DiagramError::Format(_))));
    }

    #[test]
    fn empty_leaf_partition_is_invalid() {
        let mut d = tiny();
        d.partitions.push(Partition {
            id: "n1".into(),
            kind: PartitionKind::Negation,
            parent: Some("p0".into()),
            group: None,
        });
        let r = validate(&d);
        assert!(r.problems.iter().any(|p| p.contains("no box")), "{r}");
    }

    #[test]
    fn singleton_fuse_group_is_invalid() {
        let mut d = fused_disjunction();
        d.partitions.retain(|p| p.id != "f2");
        d.builtins[1].partition = "p0".into();
        let r = validate(&d);
        assert!(r.problems.iter().any(|p| p.contains("fewer than two")), "{r}");
    }

    #[test]
    fn unrelated_partition_edge_is_invalid() {
        let mut d = tiny();
        d.partitions.extend([
            Partition {
                id: "n1".into(),
                kind: PartitionKind::Negation,
                parent: Some("p0".into()),
                group: None,
            },
            Partition {
                id: "n2".into(),
                kind: PartitionKind::Negation,
                parent: Some("p0".into()),
                group: None,
            },
        ]);
        d.tables[0].partition = "n1".into();
        d.builtins[0].partition = "n2".into();
        let r = validate(&d);
        assert!(r.problems.iter().any(|p| p.contains("ancestor/descendant")), "{r}");
    }

    #[test]
    fn json_round_trip() {
        for d in [tiny(), fused_disjunction()] {
            let text = write_diagram(&d);
            let back = read_diagram(&text).unwrap();
            assert_eq!(d, back);
            // byte-stable
            assert_eq!(text, write_diagram(&back));
        }
    }

    #[test]
    fn expansion_removes_fuse_boxes_and_keeps_parity() {
        let d = fused_disjunction();
        let e = expand_fuse_boxes(&d).unwrap();
        assert!(e.partitions.iter().all(|p| p.kind != PartitionKind::Fuse));
        assert!(validate(&e).is_valid(), "{}", validate(&e));
        // parity of every box's zone is unchanged
        for (before, after) in [("p0", "p0"), ("f1", "f1"), ("f2", "f2")] {
            let pb = d.negation_depth(before).unwrap() % 2;
            let pa = e.negation_depth(after).unwrap() % 2;
            assert_eq!(pb, pa, "parity changed for {before}");
        }
        // members gained exactly two negations
        assert_eq!(d.negation_depth("f1").unwrap() + 2, e.negation_depth("f1").unwrap());
        // idempotent
        assert_eq!(expand_fuse_boxes(&e).unwrap(), e);
    }

    #[test]
    fn expansion_rejects_invalid_input() {
        let mut d = fused_disjunction();
        d.edges.pop(); // leaves b2 unanchored
        assert!(matches!(expand_fuse_boxes(&d), Err(DiagramError::Invalid(_))));
    }
}
