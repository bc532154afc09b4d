//! Bidirectional translation between TRC queries and diagrams.
//!
//! `to_builtin_form` rewrites selection predicates and non-co-scoped joins
//! into quantified built-in relations, after which every remaining predicate
//! is an equijoin anchored in its own scope — exactly what a diagram can
//! draw as an unlabeled edge. `trc_to_diagram` maps that form onto the
//! partition tree, `trc_to_representation_b` additionally turns disjunction
//! branches into fuse-box partitions and records shortcut hints, and
//! `diagram_to_trc` reads a diagram back into a query (fuse groups read
//! directly as disjunctions).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::ast::{
    maximal_scope, AstError, AttrRef, Binding, CmpOp, Formula, Query,
};
use crate::diagram::{
    validate, BuiltinBox, Diagram, Edge, Endpoint, Hints, OutputBox, Partition, PartitionKind,
    TableBox, DIAGRAM_VERSION,
};
use crate::eval::{builtin_name, parse_builtin, BuiltinRel};
use crate::fragment::{classify, Fragment, FragmentError};

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum TranslateError {
    #[error(transparent)]
    Fragment(#[from] FragmentError),
    #[error(transparent)]
    Ast(#[from] AstError),
    #[error("unsupported construct: {0}")]
    Unsupported(String),
    #[error("invalid diagram: {0}")]
    InvalidDiagram(String),
}

// ---------------------------------------------------------------------------
// fresh variable names

struct NameGen {
    used: BTreeSet<String>,
    counters: BTreeMap<char, usize>,
    /// `true`: first occurrence gets the bare initial (`r`, `r2`, ...);
    /// `false`: always indexed (`c1`, `c2`, ...).
    bare_first: bool,
}

impl NameGen {
    fn new(bare_first: bool) -> NameGen {
        NameGen { used: BTreeSet::new(), counters: BTreeMap::new(), bare_first }
    }

    fn reserve(&mut self, name: &str) {
        self.used.insert(name.to_string());
    }

    fn fresh(&mut self, initial: char) -> String {
        let n = self.counters.entry(initial).or_insert(0);
        loop {
            *n += 1;
            let cand = if self.bare_first && *n == 1 {
                initial.to_string()
            } else {
                format!("{initial}{n}")
            };
            if self.used.insert(cand.clone()) {
                return cand;
            }
        }
    }
}

fn bound_vars(f: &Formula, out: &mut BTreeSet<String>) {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => {}
        Formula::Not(g) => bound_vars(g, out),
        Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| bound_vars(c, out)),
        Formula::Implies(a, b) => {
            bound_vars(a, out);
            bound_vars(b, out);
        }
        Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
            out.extend(bs.iter().map(|b| b.var.clone()));
            if let Some(b) = body {
                bound_vars(b, out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// builtin form

/// Replace every selection predicate with a quantified unary built-in
/// relation and every join that is not an equijoin anchored in its own scope
/// with a quantified binary one; the new quantifier wraps the predicate in
/// place, so negation-scope placement is preserved. Equijoins whose deeper
/// operand is bound in the predicate's own scope are kept as-is.
pub fn to_builtin_form(q: &Query) -> Result<Query, TranslateError> {
    if classify(q) == Fragment::Full {
        return Err(FragmentError::UniversalPresent.into());
    }
    let q = q.normalize()?;
    let q = q.map_body(|b| maximal_scope(b.clone()));

    let mut names = NameGen::new(false);
    let mut bound = BTreeSet::new();
    bound_vars(q.body(), &mut bound);
    for v in &bound {
        names.reserve(v);
    }
    let mut env: BTreeMap<String, u32> = BTreeMap::new();
    if let Query::NonBoolean { out_var, .. } = &q {
        names.reserve(out_var);
        env.insert(out_var.clone(), 0);
    }
    let mut next = 1u32;
    let body = rewrite(q.body(), 0, &mut next, &mut env, &mut names)?;
    let out = q.map_body(|_| body).normalize()?;
    Ok(out.map_body(|b| maximal_scope(b.clone())))
}

fn rewrite(
    f: &Formula,
    cur: u32,
    next: &mut u32,
    env: &mut BTreeMap<String, u32>,
    names: &mut NameGen,
) -> Result<Formula, TranslateError> {
    Ok(match f {
        Formula::Sel { left, op, constant } => {
            let v = names.fresh('c');
            Formula::exists(
                vec![Binding::new(v.clone(), builtin_name(*op, Some(constant)))],
                Some(Formula::Join {
                    left: left.clone(),
                    op: CmpOp::Eq,
                    right: AttrRef::new(v, "$1"),
                }),
            )
        }
        Formula::Join { left, op, right } => {
            let keep = *op == CmpOp::Eq
                && (env.get(&left.var) == Some(&cur) || env.get(&right.var) == Some(&cur));
            if keep {
                f.clone()
            } else {
                let v = names.fresh('j');
                Formula::exists(
                    vec![Binding::new(v.clone(), builtin_name(*op, None))],
                    Some(Formula::And(vec![
                        Formula::Join {
                            left: left.clone(),
                            op: CmpOp::Eq,
                            right: AttrRef::new(v.clone(), "$1"),
                        },
                        Formula::Join {
                            left: AttrRef::new(v, "$2"),
                            op: CmpOp::Eq,
                            right: right.clone(),
                        },
                    ])),
                )
            }
        }
        Formula::Not(g) => {
            let id = *next;
            *next += 1;
            Formula::not(rewrite(g, id, next, env, names)?)
        }
        Formula::And(cs) => Formula::And(
            cs.iter().map(|c| rewrite(c, cur, next, env, names)).collect::<Result<_, _>>()?,
        ),
        Formula::Or(cs) => {
            let mut out = Vec::with_capacity(cs.len());
            for c in cs {
                let id = *next;
                *next += 1;
                out.push(rewrite(c, id, next, env, names)?);
            }
            Formula::Or(out)
        }
        Formula::Exists(bs, body) => {
            for b in bs {
                env.insert(b.var.clone(), cur);
            }
            let nb =
                body.as_ref().map(|b| rewrite(b, cur, next, env, names)).transpose()?;
            for b in bs {
                env.remove(&b.var);
            }
            Formula::exists(bs.clone(), nb)
        }
        Formula::Forall(..) | Formula::Implies(..) => {
            return Err(FragmentError::UniversalPresent.into())
        }
    })
}

/// Best-effort inverse of [`to_builtin_form`]: quantified built-in relations
/// whose anchor joins sit in the same conjunction are folded back into
/// selection and comparison predicates. Patterns that do not match exactly
/// are left untouched.
pub fn desugar_builtins(q: &Query) -> Query {
    fn mentions(f: &Formula, var: &str) -> bool {
        crate::ast::free_vars(f).contains(var)
    }
    fn go(f: &Formula) -> Formula {
        match f {
            Formula::Exists(bs, body) => {
                let body = body.as_ref().map(|b| go(b));
                let mut conjuncts = match body {
                    Some(Formula::And(cs)) => cs,
                    Some(x) => vec![x],
                    None => vec![],
                };
                let mut keep = Vec::new();
                for b in bs {
                    match parse_builtin(&b.relation) {
                        Some(BuiltinRel::Unary { op, constant }) => {
                            let hit = find_anchor(&conjuncts, &b.var, "$1");
                            let hit_idx = hit.as_ref().map(|h| h.0);
                            let elsewhere = conjuncts
                                .iter()
                                .enumerate()
                                .any(|(i, c)| Some(i) != hit_idx && mentions(c, &b.var));
                            match hit {
                                Some((i, other)) if !elsewhere => {
                                    conjuncts[i] = Formula::Sel {
                                        left: other,
                                        op,
                                        constant: constant.clone(),
                                    };
                                }
                                _ => keep.push(b.clone()),
                            }
                        }
                        Some(BuiltinRel::Binary { op }) => {
                            let h1 = find_anchor(&conjuncts, &b.var, "$1");
                            let h2 = find_anchor(&conjuncts, &b.var, "$2");
                            let hits: BTreeSet<usize> =
                                [&h1, &h2].iter().filter_map(|h| h.as_ref()).map(|h| h.0).collect();
                            let elsewhere = conjuncts.iter().enumerate().any(|(i, c)| {
                                !hits.contains(&i) && mentions(c, &b.var)
                            });
                            match (h1, h2) {
                                (Some((i1, l)), Some((i2, r))) if i1 != i2 && !elsewhere => {
                                    conjuncts[i1] = Formula::Join { left: l, op, right: r };
                                    conjuncts.remove(i2);
                                }
                                _ => keep.push(b.clone()),
                            }
                        }
                        None => keep.push(b.clone()),
                    }
                }
                let body = if conjuncts.is_empty() { None } else { Some(Formula::and(conjuncts)) };
                if keep.is_empty() {
                    body.expect("a matched builtin leaves its rewritten anchor join behind")
                } else {
                    Formula::exists(keep, body)
                }
            }
            Formula::Not(g) => Formula::not(go(g)),
            Formula::And(cs) => Formula::And(cs.iter().map(go).collect()),
            Formula::Or(cs) => Formula::Or(cs.iter().map(go).collect()),
            Formula::Implies(a, b) => Formula::implies(go(a), go(b)),
            Formula::Forall(bs, body) => {
                Formula::forall(bs.clone(), body.as_ref().map(|b| go(b)))
            }
            leaf => leaf.clone(),
        }
    }
    /// Find the conjunct `x = var.anchor` (either orientation) where the
    /// other side does not reference `var`; returns its index and the other
    /// side.
    fn find_anchor(cs: &[Formula], var: &str, anchor: &str) -> Option<(usize, AttrRef)> {
        for (i, c) in cs.iter().enumerate() {
            if let Formula::Join { left, op: CmpOp::Eq, right } = c {
                let is = |a: &AttrRef| a.var == var && a.attr == anchor;
                if is(left) && !is(right) && right.var != var {
                    return Some((i, right.clone()));
                }
                if is(right) && !is(left) && left.var != var {
                    return Some((i, left.clone()));
                }
            }
        }
        None
    }
    let out = q.map_body(|b| go(b));
    match out.normalize() {
        Ok(n) => n.map_body(|b| maximal_scope(b.clone())),
        Err(_) => q.clone(),
    }
}

// ---------------------------------------------------------------------------
// TRC -> diagram

struct Builder {
    partitions: Vec<Partition>,
    tables: Vec<TableBox>,
    builtins: Vec<BuiltinBox>,
    edges: Vec<Edge>,
    var_box: BTreeMap<String, String>,
    var_part: BTreeMap<String, String>,
    part_depth: BTreeMap<String, usize>,
    header: Vec<String>,
    npart: usize,
    ntab: usize,
    nbi: usize,
    ngroup: usize,
    nfuse: usize,
    allow_or: bool,
}

impl Builder {
    fn endpoint(&mut self, a: &AttrRef) -> Result<Endpoint, TranslateError> {
        let box_id = self.var_box.get(&a.var).cloned().ok_or_else(|| {
            TranslateError::Unsupported(format!("variable `{}` is not in scope", a.var))
        })?;
        if let Some(t) = self.tables.iter_mut().find(|t| t.id == box_id) {
            if !t.attrs.contains(&a.attr) {
                t.attrs.push(a.attr.clone());
            }
        } else if let Some(b) = self.builtins.iter().find(|b| b.id == box_id) {
            if !b.anchors().contains(&a.attr.as_str()) {
                return Err(TranslateError::Unsupported(format!(
                    "`{}` is not an anchor of the built-in relation bound to `{}`",
                    a.attr, a.var
                )));
            }
        } else if !self.header.contains(&a.attr) {
            return Err(TranslateError::Unsupported(format!(
                "output attribute `{}` is not in the header",
                a.attr
            )));
        }
        Ok(Endpoint { box_id, attr: a.attr.clone() })
    }

    fn walk(&mut self, f: &Formula, part: &str) -> Result<(), TranslateError> {
        match f {
            Formula::Exists(bs, body) => {
                for b in bs {
                    if self.var_box.contains_key(&b.var) {
                        return Err(TranslateError::Unsupported(format!(
                            "tuple variable `{}` is bound more than once",
                            b.var
                        )));
                    }
                    let id = match parse_builtin(&b.relation) {
                        Some(bi) => {
                            self.nbi += 1;
                            let id = format!("b{}", self.nbi);
                            let (op, constant) = match bi {
                                BuiltinRel::Unary { op, constant } => (op, Some(constant)),
                                BuiltinRel::Binary { op } => (op, None),
                            };
                            self.builtins.push(BuiltinBox {
                                id: id.clone(),
                                partition: part.to_string(),
                                op,
                                constant,
                            });
                            id
                        }
                        None => {
                            self.ntab += 1;
                            let id = format!("t{}", self.ntab);
                            self.tables.push(TableBox {
                                id: id.clone(),
                                relation: b.relation.clone(),
                                var: b.var.clone(),
                                partition: part.to_string(),
                                attrs: vec![],
                            });
                            id
                        }
                    };
                    self.var_box.insert(b.var.clone(), id);
                    self.var_part.insert(b.var.clone(), part.to_string());
                }
                if let Some(body) = body {
                    self.walk(body, part)?;
                }
                Ok(())
            }
            Formula::And(cs) => {
                for c in cs {
                    self.walk(c, part)?;
                }
                Ok(())
            }
            Formula::Not(g) => {
                self.npart += 1;
                let id = format!("n{}", self.npart);
                self.partitions.push(Partition {
                    id: id.clone(),
                    kind: PartitionKind::Negation,
                    parent: Some(part.to_string()),
                    group: None,
                });
                self.part_depth.insert(id.clone(), self.part_depth[part] + 1);
                self.walk(g, &id)
            }
            Formula::Or(cs) => {
                if !self.allow_or {
                    return Err(FragmentError::DisjunctionPresent.into());
                }
                self.ngroup += 1;
                let group = format!("g{}", self.ngroup);
                for c in cs {
                    self.nfuse += 1;
                    let id = format!("f{}", self.nfuse);
                    self.partitions.push(Partition {
                        id: id.clone(),
                        kind: PartitionKind::Fuse,
                        parent: Some(part.to_string()),
                        group: Some(group.clone()),
                    });
                    self.part_depth.insert(id.clone(), self.part_depth[part] + 1);
                    self.walk(c, &id)?;
                }
                Ok(())
            }
            Formula::Join { left, op, right } => {
                if *op != CmpOp::Eq {
                    return Err(TranslateError::Unsupported(
                        "non-equijoin predicate; convert to builtin form first".to_string(),
                    ));
                }
                let (pl, pr) = (&self.var_part[&left.var], &self.var_part[&right.var]);
                let deeper =
                    if self.part_depth[pl] >= self.part_depth[pr] { pl } else { pr };
                if deeper != part {
                    return Err(TranslateError::Unsupported(
                        "equijoin is not anchored in its own scope; convert to builtin \
                         form first"
                            .to_string(),
                    ));
                }
                let a = self.endpoint(left)?;
                let b = self.endpoint(right)?;
                self.edges.push(Edge { a, b });
                Ok(())
            }
            Formula::Sel { .. } => Err(TranslateError::Unsupported(
                "selection predicate; convert to builtin form first".to_string(),
            )),
            Formula::Forall(..) | Formula::Implies(..) => {
                Err(FragmentError::UniversalPresent.into())
            }
        }
    }
}

fn build_diagram(q: &Query, allow_or: bool) -> Result<Diagram, TranslateError> {
    let q = q.normalize()?;
    let q = q.map_body(|b| maximal_scope(b.clone()));
    let mut b = Builder {
        partitions: vec![Partition {
            id: "p0".to_string(),
            kind: PartitionKind::Base,
            parent: None,
            group: None,
        }],
        tables: vec![],
        builtins: vec![],
        edges: vec![],
        var_box: BTreeMap::new(),
        var_part: BTreeMap::new(),
        part_depth: BTreeMap::from([("p0".to_string(), 0)]),
        header: vec![],
        npart: 0,
        ntab: 0,
        nbi: 0,
        ngroup: 0,
        nfuse: 0,
        allow_or,
    };
    let mut output = None;
    if let Query::NonBoolean { out_var, header, .. } = &q {
        b.header = header.clone();
        b.var_box.insert(out_var.clone(), "out".to_string());
        b.var_part.insert(out_var.clone(), "p0".to_string());
        output = Some(OutputBox {
            id: "out".to_string(),
            var: out_var.clone(),
            attrs: header.clone(),
        });
    }
    b.walk(q.body(), "p0")?;
    Ok(Diagram {
        version: DIAGRAM_VERSION,
        partitions: b.partitions,
        tables: b.tables,
        builtins: b.builtins,
        edges: b.edges,
        output,
        hints: Hints::default(),
    })
}

/// Translate an ENC query already in builtin form (only anchored equijoin
/// predicates) into its diagram.
pub fn trc_to_diagram(q: &Query) -> Result<Diagram, TranslateError> {
    build_diagram(q, false)
}

/// Translate an ENC or ENCV query into a diagram with fuse-box partitions
/// for disjunction branches and shortcut hints for co-scoped selections and
/// comparison joins. Builtin conversion is applied internally.
pub fn trc_to_representation_b(q: &Query) -> Result<Diagram, TranslateError> {
    let q = to_builtin_form(q)?;
    let mut d = build_diagram(&q, true)?;
    d.hints = compute_hints(&d);
    Ok(d)
}

fn compute_hints(d: &Diagram) -> Hints {
    let mut hints = Hints::default();
    for b in &d.builtins {
        if b.is_unary() {
            let edge = d
                .edges
                .iter()
                .find(|e| e.a.box_id == b.id || e.b.box_id == b.id);
            if let Some(e) = edge {
                let other = if e.a.box_id == b.id { &e.b } else { &e.a };
                let fusable = d.tables.iter().any(|t| t.id == other.box_id)
                    || d.output.as_ref().is_some_and(|o| o.id == other.box_id);
                if fusable && d.box_partition(&other.box_id).as_deref() == Some(&b.partition[..])
                {
                    hints.fused_selections.push(b.id.clone());
                }
            }
        } else {
            // an arrow replaces the condition box, so both anchors must join
            // boxes that are actually drawn (not another shortcut builtin)
            let drawable = |id: &String| {
                d.tables.iter().any(|t| &t.id == id)
                    || d.output.as_ref().is_some_and(|o| &o.id == id)
            };
            let anchored = d.edges.iter().all(|e| {
                (e.a.box_id != b.id || drawable(&e.b.box_id))
                    && (e.b.box_id != b.id || drawable(&e.a.box_id))
            });
            if anchored {
                hints.arrow_joins.push(b.id.clone());
            }
        }
    }
    hints
}

// ---------------------------------------------------------------------------
// diagram -> TRC

/// Read a diagram back into a query. Negation partitions become `not`
/// scopes, fuse groups become disjunctions, boxes become quantifier
/// bindings (tables are renamed to the lowercase relation initial indexed
/// by occurrence), and each edge becomes an equijoin in the partition of
/// its deeper endpoint.
pub fn diagram_to_trc(d: &Diagram) -> Result<Query, TranslateError> {
    let report = validate(d);
    if !report.is_valid() {
        return Err(TranslateError::InvalidDiagram(report.problems.join("; ")));
    }
    let mut names = NameGen::new(true);
    if let Some(o) = &d.output {
        names.reserve(&o.var);
    }
    let mut box_var: BTreeMap<String, String> = BTreeMap::new();
    for t in &d.tables {
        let initial = t
            .relation
            .chars()
            .find(|c| c.is_ascii_alphabetic())
            .map(|c| c.to_ascii_lowercase())
            .unwrap_or('r');
        box_var.insert(t.id.clone(), names.fresh(initial));
    }
    for b in &d.builtins {
        let initial = if b.is_unary() { 'c' } else { 'j' };
        box_var.insert(b.id.clone(), names.fresh(initial));
    }
    if let Some(o) = &d.output {
        box_var.insert(o.id.clone(), o.var.clone());
    }

    // each edge is read in the partition of its deeper endpoint
    let mut assigned: BTreeMap<String, Vec<&Edge>> = BTreeMap::new();
    for e in &d.edges {
        let pa = d.box_partition(&e.a.box_id).expect("validated endpoint");
        let pb = d.box_partition(&e.b.box_id).expect("validated endpoint");
        let p = if d.depth(&pa) >= d.depth(&pb) { pa } else { pb };
        assigned.entry(p).or_default().push(e);
    }

    let mut children: BTreeMap<String, Vec<&Partition>> = BTreeMap::new();
    for p in &d.partitions {
        if let Some(parent) = &p.parent {
            children.entry(parent.clone()).or_default().push(p);
        }
    }
    let mut boxes: BTreeMap<String, Vec<Binding>> = BTreeMap::new();
    for t in &d.tables {
        boxes
            .entry(t.partition.clone())
            .or_default()
            .push(Binding::new(box_var[&t.id].clone(), t.relation.clone()));
    }
    for b in &d.builtins {
        boxes
            .entry(b.partition.clone())
            .or_default()
            .push(Binding::new(box_var[&b.id].clone(), b.relation_name()));
    }

    let base = d.base_id().expect("validated diagram has a base partition");
    let body = build_partition(d, &base, &box_var, &assigned, &children, &boxes)?;
    let q = match &d.output {
        Some(o) => Query::NonBoolean {
            out_var: o.var.clone(),
            header: o.attrs.clone(),
            body,
        },
        None => Query::Boolean(body),
    };
    let q = q.normalize().map_err(|e| TranslateError::InvalidDiagram(e.to_string()))?;
    Ok(q.map_body(|b| maximal_scope(b.clone())))
}

fn build_partition(
    d: &Diagram,
    pid: &str,
    box_var: &BTreeMap<String, String>,
    assigned: &BTreeMap<String, Vec<&Edge>>,
    children: &BTreeMap<String, Vec<&Partition>>,
    boxes: &BTreeMap<String, Vec<Binding>>,
) -> Result<Formula, TranslateError> {
    let attr_ref = |ep: &Endpoint| AttrRef::new(box_var[&ep.box_id].clone(), ep.attr.clone());
    let mut parts: Vec<Formula> = Vec::new();
    if let Some(edges) = assigned.get(pid) {
        for e in edges {
            parts.push(Formula::Join {
                left: attr_ref(&e.a),
                op: CmpOp::Eq,
                right: attr_ref(&e.b),
            });
        }
    }
    let empty = vec![];
    let kids = children.get(pid).unwrap_or(&empty);
    let mut done_groups = BTreeSet::new();
    for k in kids {
        match k.kind {
            PartitionKind::Negation => parts.push(Formula::not(build_partition(
                d, &k.id, box_var, assigned, children, boxes,
            )?)),
            PartitionKind::Fuse => {
                let g = k.group.as_ref().expect("validated fuse partition has a group");
                if done_groups.insert(g.clone()) {
                    let members = kids
                        .iter()
                        .filter(|m| m.group.as_ref() == Some(g))
                        .map(|m| build_partition(d, &m.id, box_var, assigned, children, boxes))
                        .collect::<Result<Vec<_>, _>>()?;
                    parts.push(Formula::Or(members));
                }
            }
            PartitionKind::Base => {
                return Err(TranslateError::InvalidDiagram(
                    "base partition nested below the root".to_string(),
                ))
            }
        }
    }
    let bindings = boxes.get(pid).cloned().unwrap_or_default();
    if bindings.is_empty() {
        if parts.is_empty() {
            return Err(TranslateError::InvalidDiagram(format!(
                "partition `{pid}` contributes no bindings or predicates"
            )));
        }
        Ok(Formula::and(parts))
    } else {
        let body = if parts.is_empty() { None } else { Some(Formula::and(parts)) };
        Ok(Formula::exists(bindings, body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::alpha_equiv;
    use crate::diagram::expand_fuse_boxes;
    use crate::eval::{equiv_on, eval, parse_database, EquivOutcome, ResultSet};
    use crate::gen::gen_instances_for;
    use crate::safety::check_safety;

    fn parse(s: &str) -> Query {
        crate::parser::parse_query(s).unwrap().query
    }

    const LT_PLAIN: &str = "exists r in R [not(exists s in S [r.A < s.B])]";
    const LT_INNER: &str =
        "exists r in R [not(exists s in S, j in \"<\" [r.A = j.$1 and j.$2 = s.B])]";
    const LT_OUTER: &str =
        "exists r in R, j in \"<\" [not(exists s in S [r.A = j.$1 and j.$2 = s.B])]";
    // same builtin placement, but with each anchor join in the scope that
    // binds its deeper operand — the form a diagram edge can express
    const LT_OUTER_ANCHORED: &str =
        "exists r in R, j in \"<\" [r.A = j.$1 and not(exists s in S [j.$2 = s.B])]";

    const DIVISION_ENC: &str = "{ q(A) | exists r in R [q.A = r.A and \
        not(exists s in S [s.A > 0 and not(exists r2 in R [not(not(r2.B = s.B) and \
        not(r2.C = s.C)) and r2.A = r.A])])] }";

    #[test]
    fn builtin_form_wraps_in_the_original_scope() {
        let got = to_builtin_form(&parse(LT_PLAIN)).unwrap();
        assert!(alpha_equiv(&got, &parse(LT_INNER)), "{got:?}");
        assert!(!alpha_equiv(&got, &parse(LT_OUTER)));
    }

    #[test]
    fn coscoped_equijoins_are_untouched() {
        let q = parse("exists r in R, s in S [r.A = s.B and not(exists t in T [t.C = s.B])]");
        let got = to_builtin_form(&q).unwrap();
        assert!(alpha_equiv(&got, &q));
    }

    #[test]
    fn division_builtin_form_introduces_three_builtins() {
        let got = to_builtin_form(&parse(DIVISION_ENC)).unwrap();
        let idx = crate::ast::binding_index(got.body());
        let names: Vec<String> = idx
            .values()
            .filter(|(rel, _)| parse_builtin(rel).is_some())
            .map(|(rel, _)| rel.clone())
            .collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["=", "=", ">0"]);
    }

    #[test]
    fn desugar_inverts_builtin_form() {
        for text in [
            LT_PLAIN,
            DIVISION_ENC,
            "{ q(A) | exists r in R [q.A = r.A and r.B != 3 and r.C >= \"m\"] }",
        ] {
            let q = parse(text);
            let back = desugar_builtins(&to_builtin_form(&q).unwrap());
            assert_eq!(
                crate::ast::erased_atoms(&q),
                crate::ast::erased_atoms(&back),
                "{text}"
            );
        }
    }

    #[test]
    fn division_diagram_counts() {
        let d = trc_to_diagram(&to_builtin_form(&parse(DIVISION_ENC)).unwrap()).unwrap();
        assert!(validate(&d).is_valid(), "{}", validate(&d));
        let boxes = d.tables.len() + d.builtins.len() + 1; // + output
        assert_eq!(boxes, 7);
        assert_eq!(d.edges.len(), 7);
        let negs: Vec<&Partition> =
            d.partitions.iter().filter(|p| p.kind == PartitionKind::Negation).collect();
        assert_eq!(negs.len(), 5);
        // exactly one negation partition holds no box: the shell around the
        // two DeMorgan branches
        let occupied: BTreeSet<&String> = d
            .tables
            .iter()
            .map(|t| &t.partition)
            .chain(d.builtins.iter().map(|b| &b.partition))
            .collect();
        let empty: Vec<&&Partition> =
            negs.iter().filter(|p| !occupied.contains(&p.id)).collect();
        assert_eq!(empty.len(), 1);
    }

    #[test]
    fn diagram_round_trip_is_alpha_equivalent() {
        for text in [
            LT_PLAIN,
            LT_INNER,
            LT_OUTER,
            DIVISION_ENC,
            "exists a in A []",
            "{ q(A, B) | exists r in R [q.A = r.A and q.B = r.B and r.C = 3] }",
        ] {
            let qb = to_builtin_form(&parse(text)).unwrap();
            let d = trc_to_diagram(&qb).unwrap();
            assert!(validate(&d).is_valid(), "{text}: {}", validate(&d));
            let back = diagram_to_trc(&d).unwrap();
            assert!(alpha_equiv(&qb, &back), "{text}\n{qb:?}\n{back:?}");
        }
    }

    #[test]
    fn builtin_placement_survives_the_round_trip() {
        let d_inner = trc_to_diagram(&parse(LT_INNER)).unwrap();
        let d_outer = trc_to_diagram(&parse(LT_OUTER_ANCHORED)).unwrap();
        // with the anchor join trapped inside the negation, no edge can
        // express it
        assert!(matches!(
            trc_to_diagram(&parse(LT_OUTER)),
            Err(TranslateError::Unsupported(_))
        ));
        let part_of = |d: &Diagram| {
            d.builtins.iter().find(|b| !b.is_unary()).map(|b| b.partition.clone()).unwrap()
        };
        assert_ne!(part_of(&d_inner), part_of(&d_outer));

        let (db, dom) = parse_database("R(A): (1)\nS(B): (2)\ndomain: 1 2 3").unwrap();
        let inner = diagram_to_trc(&d_inner).unwrap();
        let outer = diagram_to_trc(&d_outer).unwrap();
        assert_eq!(eval(&inner, &db, &dom).unwrap(), ResultSet::Bool(false));
        assert_eq!(eval(&outer, &db, &dom).unwrap(), ResultSet::Bool(true));
    }

    #[test]
    fn raw_selection_is_rejected_without_builtin_form() {
        let q = parse("exists r in R [r.A < 4]");
        assert!(matches!(trc_to_diagram(&q), Err(TranslateError::Unsupported(_))));
    }

    #[test]
    fn disjunction_needs_fuse_boxes() {
        let q = parse("exists r in R [r.A = 1 or r.A = 2]");
        assert!(matches!(
            trc_to_diagram(&to_builtin_form(&q).unwrap()),
            Err(TranslateError::Fragment(FragmentError::DisjunctionPresent))
        ));
        let d = trc_to_representation_b(&q).unwrap();
        assert!(validate(&d).is_valid(), "{}", validate(&d));
        let fuses: Vec<&Partition> =
            d.partitions.iter().filter(|p| p.kind == PartitionKind::Fuse).collect();
        assert_eq!(fuses.len(), 2);
        assert_eq!(fuses[0].group, fuses[1].group);
        assert_eq!(d.builtins.len(), 2);
        // conditions live inside the fuse partitions, away from the table,
        // so they are not fused into the attribute box
        assert!(d.hints.fused_selections.is_empty());
    }

    #[test]
    fn representation_b_round_trip_preserves_semantics() {
        for text in [
            "exists r in R [r.A = 1 or r.A = 2]",
            "{ q(A) | exists r in R [q.A = r.A and (r.B = 1 or r.B > 2)] }",
            DIVISION_ENC,
        ] {
            let q = parse(text);
            let d = trc_to_representation_b(&q).unwrap();
            let back = diagram_to_trc(&d).unwrap();
            let expanded = diagram_to_trc(&expand_fuse_boxes(&d).unwrap()).unwrap();
            let instances = gen_instances_for(&[&q], 12, 7);
            for variant in [&back, &expanded] {
                assert_eq!(
                    equiv_on(&q, variant, &instances).unwrap(),
                    EquivOutcome::Equivalent,
                    "{text}"
                );
            }
        }
    }

    #[test]
    fn coscoped_selections_get_fused_hints() {
        let q = parse("{ q(A) | exists r in R [q.A = r.A and r.A < 4 and r.B = 2] }");
        let d = trc_to_representation_b(&q).unwrap();
        assert_eq!(d.hints.fused_selections.len(), 2);
        assert!(d.hints.arrow_joins.is_empty());
    }

    #[test]
    fn comparison_joins_get_arrow_hints() {
        let d = trc_to_representation_b(&parse(LT_PLAIN)).unwrap();
        assert_eq!(d.hints.arrow_joins.len(), 1);
    }

    #[test]
    fn safety_survives_the_representation_b_round_trip() {
        let safe = parse(
            "{ q(A) | exists r in R [q.A = r.A and \
             not(exists s in S [s.A > 0 and not(exists r2 in R [(r2.B = s.B or \
             r2.C = s.C) and r2.A = r.A])])] }",
        );
        assert!(check_safety(&safe).is_safe());
        let back = diagram_to_trc(&trc_to_representation_b(&safe).unwrap()).unwrap();
        assert!(check_safety(&back).is_safe());
    }

}
