//! Base-partition computation and the four syntactic safety conditions for
//! non-Boolean queries:
//!
//! 1. every header attribute is bound by an equality predicate to either a
//!    column of an existentially quantified relation or a constant;
//! 2. every such binding predicate lies in the base partition (reachable
//!    from the root without crossing `not`, `->`, or `forall`);
//! 3. every disjunction on the path from a binding predicate to the root
//!    has children with exactly one free tuple variable — the output
//!    variable — and the same set of defined header attributes;
//! 4. if a binding predicate's path to the root crosses no disjunction,
//!    the bound header attribute appears in no other predicate.
//!
//! Boolean queries are closed formulas and therefore safe unconditionally.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::{
    binding_index, free_vars, AttrRef, CmpOp, Formula, QuantKind, Query,
};

/// Preorder index of a formula node.
pub type NodeId = usize;

/// The set of AST nodes reachable from the root without crossing a
/// negation, implication, or universal quantifier.
#[derive(Clone, Debug)]
pub struct BasePartition {
    /// Preorder ids of all nodes in the base partition.
    pub nodes: BTreeSet<NodeId>,
    /// Indices (in depth-first leaf order) of predicate leaves in the base.
    pub leaves: BTreeSet<usize>,
    total_leaves: usize,
}

impl BasePartition {
    pub fn contains_leaf(&self, leaf: usize) -> bool {
        self.leaves.contains(&leaf)
    }

    pub fn total_leaves(&self) -> usize {
        self.total_leaves
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Violation {
    /// Safety condition number, 1 through 4.
    pub condition: u8,
    /// Depth-first index of the predicate leaf the violation refers to,
    /// when one exists (condition 1 may have no witnessing predicate).
    pub leaf: Option<usize>,
    pub message: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct SafetyReport {
    pub violations: Vec<Violation>,
}

impl SafetyReport {
    pub fn is_safe(&self) -> bool {
        self.violations.is_empty()
    }

    /// Distinct violated condition numbers, ascending.
    pub fn conditions(&self) -> Vec<u8> {
        let set: BTreeSet<u8> = self.violations.iter().map(|v| v.condition).collect();
        set.into_iter().collect()
    }
}

impl fmt::Display for SafetyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_safe() {
            writeln!(f, "safe")
        } else {
            writeln!(f, "unsafe")?;
            for v in &self.violations {
                writeln!(f, "condition {}: {}", v.condition, v.message)?;
            }
            Ok(())
        }
    }
}

// ---------------------------------------------------------------------------

struct LeafInfo {
    leaf: usize,
    pred: Formula,
    in_base: bool,
    /// Disjunction nodes crossed between the root and this leaf, outermost
    /// first, as (node id, chosen child index).
    ors_on_path: Vec<NodeId>,
}

struct Walk<'f> {
    next_id: NodeId,
    leaves: Vec<LeafInfo>,
    base_nodes: BTreeSet<NodeId>,
    or_children: BTreeMap<NodeId, Vec<&'f Formula>>,
}

impl<'f> Walk<'f> {
    fn walk(&mut self, f: &'f Formula, in_base: bool, ors: &mut Vec<NodeId>) {
        let id = self.next_id;
        self.next_id += 1;
        if in_base {
            self.base_nodes.insert(id);
        }
        match f {
            Formula::Join { .. } | Formula::Sel { .. } => {
                self.leaves.push(LeafInfo {
                    leaf: self.leaves.len(),
                    pred: f.clone(),
                    in_base,
                    ors_on_path: ors.clone(),
                });
            }
            Formula::Not(x) => self.walk(x, false, ors),
            Formula::And(cs) => {
                for c in cs {
                    self.walk(c, in_base, ors);
                }
            }
            Formula::Or(cs) => {
                self.or_children.insert(id, cs.iter().collect());
                ors.push(id);
                for c in cs {
                    self.walk(c, in_base, ors);
                }
                ors.pop();
            }
            Formula::Implies(a, b) => {
                self.walk(a, false, ors);
                self.walk(b, false, ors);
            }
            Formula::Exists(_, body) => {
                if let Some(body) = body {
                    self.walk(body, in_base, ors);
                }
            }
            Formula::Forall(_, body) => {
                if let Some(body) = body {
                    self.walk(body, false, ors);
                }
            }
        }
    }
}

fn analyze(body: &Formula) -> Walk<'_> {
    let mut w = Walk {
        next_id: 0,
        leaves: Vec::new(),
        base_nodes: BTreeSet::new(),
        or_children: BTreeMap::new(),
    };
    w.walk(body, true, &mut Vec::new());
    w
}

pub fn base_partition(q: &Query) -> BasePartition {
    let w = analyze(q.body());
    BasePartition {
        nodes: w.base_nodes,
        leaves: w.leaves.iter().filter(|l| l.in_base).map(|l| l.leaf).collect(),
        total_leaves: w.leaves.len(),
    }
}

/// The header attribute bound when `pred` is a binding predicate for
/// output variable `out_var`: an equality tying `out_var.A` to a constant
/// or to a column of an existentially quantified tuple variable.
fn bound_attr(
    pred: &Formula,
    out_var: &str,
    quant: &BTreeMap<String, (String, QuantKind)>,
) -> Option<String> {
    match pred {
        Formula::Sel { left, op: CmpOp::Eq, .. } if left.var == out_var => Some(left.attr.clone()),
        Formula::Join { left, op: CmpOp::Eq, right } => {
            let (out_side, other) = if left.var == out_var && right.var != out_var {
                (left, right)
            } else if right.var == out_var && left.var != out_var {
                (right, left)
            } else {
                return None;
            };
            match quant.get(&other.var) {
                Some((_, QuantKind::Exists)) => Some(out_side.attr.clone()),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Header attributes of `out_var` mentioned by a predicate (in any role).
fn mentioned_attrs(pred: &Formula, out_var: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut touch = |r: &AttrRef| {
        if r.var == out_var {
            out.push(r.attr.clone());
        }
    };
    match pred {
        Formula::Join { left, right, .. } => {
            touch(left);
            touch(right);
        }
        Formula::Sel { left, .. } => touch(left),
        _ => {}
    }
    out
}

/// Header attributes of the output variable that a subformula "defines":
/// conjunction takes the union of its children, disjunction the
/// intersection, existential quantification passes through, and anything
/// behind a blocker (`not`, `->`, `forall`) defines nothing.
fn defined_attrs(
    f: &Formula,
    out_var: &str,
    quant: &BTreeMap<String, (String, QuantKind)>,
) -> BTreeSet<String> {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => {
            bound_attr(f, out_var, quant).into_iter().collect()
        }
        Formula::And(cs) => {
            let mut out = BTreeSet::new();
            for c in cs {
                out.extend(defined_attrs(c, out_var, quant));
            }
            out
        }
        Formula::Or(cs) => {
            let mut iter = cs.iter().map(|c| defined_attrs(c, out_var, quant));
            let first = iter.next().unwrap_or_default();
            iter.fold(first, |acc, s| acc.intersection(&s).cloned().collect())
        }
        Formula::Exists(_, body) => body
            .as_deref()
            .map(|b| defined_attrs(b, out_var, quant))
            .unwrap_or_default(),
        Formula::Not(_) | Formula::Implies(..) | Formula::Forall(..) => BTreeSet::new(),
    }
}

pub fn check_safety(q: &Query) -> SafetyReport {
    let (out_var, header, body) = match q {
        Query::Boolean(_) => return SafetyReport::default(),
        Query::NonBoolean { out_var, header, body } => (out_var, header, body),
    };
    let quant = binding_index(body);
    let w = analyze(body);
    let mut violations = Vec::new();
    let mut checked_ors: BTreeSet<NodeId> = BTreeSet::new();

    for attr in header {
        let candidates: Vec<&LeafInfo> = w
            .leaves
            .iter()
            .filter(|l| bound_attr(&l.pred, out_var, &quant).as_deref() == Some(attr))
            .collect();

        if candidates.is_empty() {
            let witness = w
                .leaves
                .iter()
                .find(|l| mentioned_attrs(&l.pred, out_var).iter().any(|a| a == attr));
            violations.push(Violation {
                condition: 1,
                leaf: witness.map(|l| l.leaf),
                message: format!(
                    "header attribute {out_var}.{attr} is not bound by an equality to a \
                     column of an existentially quantified relation or to a constant"
                ),
            });
            continue;
        }

        for c in &candidates {
            if !c.in_base {
                violations.push(Violation {
                    condition: 2,
                    leaf: Some(c.leaf),
                    message: format!(
                        "binding predicate `{}` for {out_var}.{attr} is blocked from the root \
                         by a negation, implication, or universal quantifier",
                        c.pred_display()
                    ),
                });
            }
        }

        let base_candidates: Vec<&&LeafInfo> =
            candidates.iter().filter(|c| c.in_base).collect();

        // condition 4: an or-free path to the root demands exclusivity
        if base_candidates.iter().any(|c| c.ors_on_path.is_empty()) {
            let mentions = w
                .leaves
                .iter()
                .filter(|l| mentioned_attrs(&l.pred, out_var).iter().any(|a| a == attr))
                .count();
            if mentions > 1 {
                let first = base_candidates
                    .iter()
                    .find(|c| c.ors_on_path.is_empty())
                    .unwrap();
                violations.push(Violation {
                    condition: 4,
                    leaf: Some(first.leaf),
                    message: format!(
                        "binding predicate `{}` reaches the root without a disjunction, \
                         but {out_var}.{attr} appears in {mentions} predicates",
                        first.pred_display()
                    ),
                });
            }
        }

        // condition 3: every disjunction on a binding-predicate-to-root path
        for c in &base_candidates {
            for or_id in &c.ors_on_path {
                if !checked_ors.insert(*or_id) {
                    continue;
                }
                let children = &w.or_children[or_id];
                let mut ok = true;
                let mut reason = String::new();
                let mut common: Option<BTreeSet<String>> = None;
                for child in children {
                    let fv = free_vars(child);
                    if fv.len() != 1 || !fv.contains(out_var) {
                        ok = false;
                        reason = format!(
                            "a disjunct has free variables {{{}}} instead of exactly {{{out_var}}}",
                            fv.iter().cloned().collect::<Vec<_>>().join(", ")
                        );
                        break;
                    }
                    let defs = defined_attrs(child, out_var, &quant);
                    match &common {
                        None => common = Some(defs),
                        Some(prev) if *prev != defs => {
                            ok = false;
                            reason = "disjuncts define different sets of header attributes"
                                .to_string();
                            break;
                        }
                        Some(_) => {}
                    }
                }
                if !ok {
                    violations.push(Violation {
                        condition: 3,
                        leaf: Some(c.leaf),
                        message: format!(
                            "disjunction on the path from binding predicate `{}`: {reason}",
                            c.pred_display()
                        ),
                    });
                }
            }
        }
    }

    violations.sort_by_key(|v| (v.condition, v.leaf));
    violations.dedup();
    SafetyReport { violations }
}

impl LeafInfo {
    fn pred_display(&self) -> String {
        match &self.pred {
            Formula::Join { left, op, right } => format!("{left} {op} {right}"),
            Formula::Sel { left, op, constant } => format!("{left} {op} {constant}"),
            _ => String::new(),
        }
    }
}
