//! Core AST for tuple relational calculus queries.
//!
//! A query is either Boolean (closed formula) or non-Boolean (an output
//! tuple variable with an ordered header). Formulas are built from three
//! kinds of atoms — bindings `r in R`, join predicates `r.A θ s.B`, and
//! selection predicates `r.A θ c` — combined with `not`, `and`, `or`,
//! `->`, `exists`, and `forall`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Comparison operator used in join and selection predicates. Serialized
/// as its source symbol.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub enum CmpOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CmpOp {
    /// The operator obtained by swapping the two operands: `a op b` iff `b mirror(op) a`.
    pub fn mirror(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<CmpOp> {
        Some(match s {
            "=" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            _ => return None,
        })
    }

    /// Apply the operator to an ordering between two values.
    pub fn test(self, ord: Ordering) -> bool {
        match self {
            CmpOp::Eq => ord == Ordering::Equal,
            CmpOp::Ne => ord != Ordering::Equal,
            CmpOp::Lt => ord == Ordering::Less,
            CmpOp::Le => ord != Ordering::Greater,
            CmpOp::Gt => ord == Ordering::Greater,
            CmpOp::Ge => ord != Ordering::Less,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// A constant: signed integer or string. Constants of different kinds are
/// never comparable (the evaluator reports a type error rather than false).
/// Serialized as a bare JSON number or string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constant {
    Int(i64),
    Str(String),
}

impl Constant {
    pub fn kind(&self) -> ConstKind {
        match self {
            Constant::Int(_) => ConstKind::Int,
            Constant::Str(_) => ConstKind::Str,
        }
    }

    /// Compare two constants of the same kind; None on kind mismatch.
    pub fn same_kind_cmp(&self, other: &Constant) -> Option<Ordering> {
        match (self, other) {
            (Constant::Int(a), Constant::Int(b)) => Some(a.cmp(b)),
            (Constant::Str(a), Constant::Str(b)) => Some(a.cmp(b)),
            _ => None,
        }
    }

    /// Source-syntax rendering: integers bare, strings double-quoted.
    pub fn lexeme(&self) -> String {
        match self {
            Constant::Int(i) => i.to_string(),
            Constant::Str(s) => format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\"")),
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lexeme())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ConstKind {
    Int,
    Str,
}

/// Qualified attribute reference `var.attr`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct AttrRef {
    pub var: String,
    pub attr: String,
}

impl AttrRef {
    pub fn new(var: impl Into<String>, attr: impl Into<String>) -> AttrRef {
        AttrRef { var: var.into(), attr: attr.into() }
    }
}

impl fmt::Display for AttrRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.var, self.attr)
    }
}

/// A quantifier binding `var in Relation`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Binding {
    pub var: String,
    pub relation: String,
}

impl Binding {
    pub fn new(var: impl Into<String>, relation: impl Into<String>) -> Binding {
        Binding { var: var.into(), relation: relation.into() }
    }
}

/// One of the three atom kinds, as collected into an [`AtomBag`].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Atom {
    Binding { var: String, relation: String },
    Join { left: AttrRef, op: CmpOp, right: AttrRef },
    Sel { left: AttrRef, op: CmpOp, constant: Constant },
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Binding { var, relation } => write!(f, "{var} in {relation}"),
            Atom::Join { left, op, right } => write!(f, "{left} {op} {right}"),
            Atom::Sel { left, op, constant } => write!(f, "{left} {op} {constant}"),
        }
    }
}

/// TRC formula. Quantifier bodies are optional: `exists r in R []` asserts
/// non-emptiness of `R` (needed for nullary/propositional queries).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Formula {
    Join { left: AttrRef, op: CmpOp, right: AttrRef },
    Sel { left: AttrRef, op: CmpOp, constant: Constant },
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Exists(Vec<Binding>, Option<Box<Formula>>),
    Forall(Vec<Binding>, Option<Box<Formula>>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn exists(bindings: Vec<Binding>, body: Option<Formula>) -> Formula {
        Formula::Exists(bindings, body.map(Box::new))
    }

    pub fn forall(bindings: Vec<Binding>, body: Option<Formula>) -> Formula {
        Formula::Forall(bindings, body.map(Box::new))
    }

    /// Conjunction that collapses the singleton case.
    pub fn and(mut cs: Vec<Formula>) -> Formula {
        if cs.len() == 1 {
            cs.pop().unwrap()
        } else {
            Formula::And(cs)
        }
    }

    pub fn or(mut cs: Vec<Formula>) -> Formula {
        if cs.len() == 1 {
            cs.pop().unwrap()
        } else {
            Formula::Or(cs)
        }
    }
}

/// A complete query.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Query {
    Boolean(Formula),
    NonBoolean { out_var: String, header: Vec<String>, body: Formula },
}

impl Query {
    pub fn body(&self) -> &Formula {
        match self {
            Query::Boolean(f) => f,
            Query::NonBoolean { body, .. } => body,
        }
    }

    pub fn map_body(&self, f: impl FnOnce(&Formula) -> Formula) -> Query {
        match self {
            Query::Boolean(b) => Query::Boolean(f(b)),
            Query::NonBoolean { out_var, header, body } => Query::NonBoolean {
                out_var: out_var.clone(),
                header: header.clone(),
                body: f(body),
            },
        }
    }

    pub fn header_arity(&self) -> usize {
        match self {
            Query::Boolean(_) => 0,
            Query::NonBoolean { header, .. } => header.len(),
        }
    }

    /// Well-formedness check followed by structural normalization of the body.
    pub fn normalize(&self) -> Result<Query, AstError> {
        check_well_formed(self)?;
        Ok(self.map_body(|b| normalize(b.clone())))
    }
}

/// Errors raised by well-formedness checking.
#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum AstError {
    #[error("variable `{0}` is bound more than once")]
    Rebind(String),
    #[error("variable `{0}` occurs both free and bound")]
    FreeBound(String),
    #[error("variable `{0}` is not bound by any quantifier")]
    Unbound(String),
    #[error("output variable `{0}` must not be quantified")]
    OutVarBound(String),
    #[error("header must not be empty; use a boolean query instead")]
    EmptyHeader,
    #[error("duplicate header attribute `{0}`")]
    DuplicateHeaderAttr(String),
    #[error("header attribute `{0}` does not appear in any predicate")]
    UnusedHeaderAttr(String),
    #[error("connective requires at least two operands")]
    ShortConnective,
    #[error("quantifier requires at least one binding")]
    EmptyBindingList,
    #[error("universal quantifier requires a body")]
    EmptyForallBody,
}

/// Multiset of atoms. Tuple-variable names are kept as written in the
/// source query: structural rewrites never rename variables, so exact
/// multiset equality is the right comparison for atom-preservation checks.
/// Use [`erased_atoms`] to compare across variable renamings.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct AtomBag(pub BTreeMap<Atom, usize>);

impl AtomBag {
    pub fn insert(&mut self, a: Atom) {
        *self.0.entry(a).or_insert(0) += 1;
    }

    pub fn len(&self) -> usize {
        self.0.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for AtomBag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        write!(f, "{{")?;
        for (a, n) in &self.0 {
            for _ in 0..*n {
                if !first {
                    write!(f, ", ")?;
                }
                first = false;
                write!(f, "{a}")?;
            }
        }
        write!(f, "}}")
    }
}

/// Atom with the tuple-variable names erased; joins are oriented
/// canonically so that flipped predicates compare equal.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum ErasedAtom {
    Binding { relation: String },
    Join { left: String, op: CmpOp, right: String },
    Sel { attr: String, op: CmpOp, constant: Constant },
}

// ---------------------------------------------------------------------------
// Well-formedness

fn collect_bound(f: &Formula, bound: &mut Vec<String>, errs: &mut Vec<AstError>) {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => {}
        Formula::Not(x) => collect_bound(x, bound, errs),
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                collect_bound(c, bound, errs);
            }
        }
        Formula::Implies(a, b) => {
            collect_bound(a, bound, errs);
            collect_bound(b, bound, errs);
        }
        Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
            for b in bs {
                if bound.contains(&b.var) {
                    errs.push(AstError::Rebind(b.var.clone()));
                }
                bound.push(b.var.clone());
            }
            if let Some(body) = body {
                collect_bound(body, bound, errs);
            }
        }
    }
}

/// Variables that occur in a predicate of `f` without being bound inside `f`.
pub fn free_vars(f: &Formula) -> BTreeSet<String> {
    fn walk(f: &Formula, scope: &mut Vec<String>, free: &mut BTreeSet<String>) {
        let touch = |v: &String, scope: &Vec<String>, free: &mut BTreeSet<String>| {
            if !scope.contains(v) {
                free.insert(v.clone());
            }
        };
        match f {
            Formula::Join { left, right, .. } => {
                touch(&left.var, scope, free);
                touch(&right.var, scope, free);
            }
            Formula::Sel { left, .. } => touch(&left.var, scope, free),
            Formula::Not(x) => walk(x, scope, free),
            Formula::And(cs) | Formula::Or(cs) => {
                for c in cs {
                    walk(c, scope, free);
                }
            }
            Formula::Implies(a, b) => {
                walk(a, scope, free);
                walk(b, scope, free);
            }
            Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
                let n = scope.len();
                scope.extend(bs.iter().map(|b| b.var.clone()));
                if let Some(body) = body {
                    walk(body, scope, free);
                }
                scope.truncate(n);
            }
        }
    }
    let mut free = BTreeSet::new();
    walk(f, &mut Vec::new(), &mut free);
    free
}

fn check_shape(f: &Formula) -> Result<(), AstError> {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => Ok(()),
        Formula::Not(x) => check_shape(x),
        Formula::And(cs) | Formula::Or(cs) => {
            if cs.len() < 2 {
                return Err(AstError::ShortConnective);
            }
            cs.iter().try_for_each(check_shape)
        }
        Formula::Implies(a, b) => {
            check_shape(a)?;
            check_shape(b)
        }
        Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
            if bs.is_empty() {
                return Err(AstError::EmptyBindingList);
            }
            if body.is_none() && matches!(f, Formula::Forall(..)) {
                return Err(AstError::EmptyForallBody);
            }
            body.as_deref().map_or(Ok(()), check_shape)
        }
    }
}

/// Check formation rules: arity of connectives, no variable bound twice,
/// no variable both free and bound, header sanity for non-Boolean queries.
pub fn check_well_formed(q: &Query) -> Result<(), AstError> {
    let body = q.body();
    check_shape(body)?;

    let mut bound = Vec::new();
    let mut errs = Vec::new();
    collect_bound(body, &mut bound, &mut errs);
    if let Some(e) = errs.into_iter().next() {
        return Err(e);
    }

    let free = free_vars(body);
    for v in &free {
        if bound.contains(v) {
            return Err(AstError::FreeBound(v.clone()));
        }
    }

    match q {
        Query::Boolean(_) => {
            if let Some(v) = free.iter().next() {
                return Err(AstError::Unbound(v.clone()));
            }
        }
        Query::NonBoolean { out_var, header, .. } => {
            if bound.contains(out_var) {
                return Err(AstError::OutVarBound(out_var.clone()));
            }
            for v in &free {
                if v != out_var {
                    return Err(AstError::Unbound(v.clone()));
                }
            }
            if header.is_empty() {
                return Err(AstError::EmptyHeader);
            }
            let mut seen = BTreeSet::new();
            for a in header {
                if !seen.insert(a.clone()) {
                    return Err(AstError::DuplicateHeaderAttr(a.clone()));
                }
            }
            let used = out_attrs_used(body, out_var);
            for a in header {
                if !used.contains(a) {
                    return Err(AstError::UnusedHeaderAttr(a.clone()));
                }
            }
        }
    }
    Ok(())
}

fn out_attrs_used(f: &Formula, out_var: &str) -> BTreeSet<String> {
    let mut used = BTreeSet::new();
    visit_predicates(f, &mut |p| {
        let mut touch = |r: &AttrRef| {
            if r.var == out_var {
                used.insert(r.attr.clone());
            }
        };
        match p {
            Formula::Join { left, right, .. } => {
                touch(left);
                touch(right);
            }
            Formula::Sel { left, .. } => touch(left),
            _ => {}
        }
    });
    used
}

/// Visit every predicate leaf of `f` in depth-first (source) order.
pub fn visit_predicates(f: &Formula, visit: &mut impl FnMut(&Formula)) {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => visit(f),
        Formula::Not(x) => visit_predicates(x, visit),
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                visit_predicates(c, visit);
            }
        }
        Formula::Implies(a, b) => {
            visit_predicates(a, visit);
            visit_predicates(b, visit);
        }
        Formula::Exists(_, body) | Formula::Forall(_, body) => {
            if let Some(body) = body {
                visit_predicates(body, visit);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Normalization

/// Structural normal form: double negations cancelled, nested `and`/`or`
/// flattened, directly nested quantifiers of the same kind merged,
/// singleton connectives collapsed. Leaf order is preserved.
pub fn normalize(f: Formula) -> Formula {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => f,
        Formula::Not(x) => {
            let x = normalize(*x);
            match x {
                Formula::Not(y) => *y,
                other => Formula::not(other),
            }
        }
        Formula::And(cs) => {
            let mut out = Vec::new();
            for c in cs {
                match normalize(c) {
                    Formula::And(inner) => out.extend(inner),
                    other => out.push(other),
                }
            }
            Formula::and(out)
        }
        Formula::Or(cs) => {
            let mut out = Vec::new();
            for c in cs {
                match normalize(c) {
                    Formula::Or(inner) => out.extend(inner),
                    other => out.push(other),
                }
            }
            Formula::or(out)
        }
        Formula::Implies(a, b) => Formula::implies(normalize(*a), normalize(*b)),
        Formula::Exists(mut bs, body) => match body.map(|b| normalize(*b)) {
            Some(Formula::Exists(bs2, inner)) => {
                bs.extend(bs2);
                Formula::Exists(bs, inner)
            }
            other => Formula::Exists(bs, other.map(Box::new)),
        },
        Formula::Forall(mut bs, body) => match body.map(|b| normalize(*b)) {
            Some(Formula::Forall(bs2, inner)) => {
                bs.extend(bs2);
                Formula::Forall(bs, inner)
            }
            other => Formula::Forall(bs, other.map(Box::new)),
        },
    }
}

/// Pull existential quantifiers above conjunctions until no `exists` node
/// is a child of an `and` node. Sound only for well-formed formulas
/// (no variable is bound twice or both free and bound, so hoisting a
/// quantifier over its siblings cannot capture anything).
pub fn maximal_scope(f: Formula) -> Formula {
    fn pass(f: Formula) -> Formula {
        match f {
            Formula::Join { .. } | Formula::Sel { .. } => f,
            Formula::Not(x) => Formula::not(pass(*x)),
            Formula::Or(cs) => Formula::Or(cs.into_iter().map(pass).collect()),
            Formula::Implies(a, b) => Formula::implies(pass(*a), pass(*b)),
            Formula::Exists(bs, body) => match body.map(|b| pass(*b)) {
                Some(Formula::Exists(bs2, inner)) => {
                    let mut bs = bs;
                    bs.extend(bs2);
                    Formula::Exists(bs, inner)
                }
                other => Formula::Exists(bs, other.map(Box::new)),
            },
            Formula::Forall(bs, body) => {
                Formula::Forall(bs, body.map(|b| Box::new(pass(*b))))
            }
            Formula::And(cs) => {
                let mut bindings = Vec::new();
                let mut parts = Vec::new();
                for c in cs {
                    match pass(c) {
                        Formula::Exists(bs, body) => {
                            bindings.extend(bs);
                            match body.map(|b| *b) {
                                Some(Formula::And(inner)) => parts.extend(inner),
                                Some(other) => parts.push(other),
                                None => {}
                            }
                        }
                        Formula::And(inner) => parts.extend(inner),
                        other => parts.push(other),
                    }
                }
                if bindings.is_empty() {
                    Formula::and(parts)
                } else if parts.is_empty() {
                    Formula::Exists(bindings, None)
                } else {
                    Formula::Exists(bindings, Some(Box::new(Formula::and(parts))))
                }
            }
        }
    }
    let mut cur = normalize(f);
    loop {
        let next = normalize(pass(cur.clone()));
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

// ---------------------------------------------------------------------------
// Atom extraction

pub fn atoms(q: &Query) -> AtomBag {
    atoms_of(q.body())
}

pub fn atoms_of(f: &Formula) -> AtomBag {
    let mut bag = AtomBag::default();
    collect_atoms(f, &mut bag);
    bag
}

fn collect_atoms(f: &Formula, bag: &mut AtomBag) {
    match f {
        Formula::Join { left, op, right } => bag.insert(Atom::Join {
            left: left.clone(),
            op: *op,
            right: right.clone(),
        }),
        Formula::Sel { left, op, constant } => bag.insert(Atom::Sel {
            left: left.clone(),
            op: *op,
            constant: constant.clone(),
        }),
        Formula::Not(x) => collect_atoms(x, bag),
        Formula::And(cs) | Formula::Or(cs) => {
            for c in cs {
                collect_atoms(c, bag);
            }
        }
        Formula::Implies(a, b) => {
            collect_atoms(a, bag);
            collect_atoms(b, bag);
        }
        Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
            for b in bs {
                bag.insert(Atom::Binding { var: b.var.clone(), relation: b.relation.clone() });
            }
            if let Some(body) = body {
                collect_atoms(body, bag);
            }
        }
    }
}

/// Name-erased atom multiset, usable for comparing queries whose tuple
/// variables were renamed (e.g. a diagram round trip).
pub fn erased_atoms(q: &Query) -> BTreeMap<ErasedAtom, usize> {
    let mut out = BTreeMap::new();
    for (atom, n) in atoms(q).0 {
        let e = match atom {
            Atom::Binding { relation, .. } => ErasedAtom::Binding { relation },
            Atom::Join { left, op, right } => {
                if left.attr <= right.attr {
                    ErasedAtom::Join { left: left.attr, op, right: right.attr }
                } else {
                    ErasedAtom::Join { left: right.attr, op: op.mirror(), right: left.attr }
                }
            }
            Atom::Sel { left, op, constant } => {
                ErasedAtom::Sel { attr: left.attr, op, constant }
            }
        };
        *out.entry(e).or_insert(0) += n;
    }
    out
}

// ---------------------------------------------------------------------------
// Alpha-equivalence

/// Equality of two normalized queries up to tuple-variable renaming,
/// reordering of conjuncts/disjuncts/binding lists, and flipping a
/// predicate's operands with operator mirroring.
///
/// Implemented as a backtracking isomorphism search over the two ASTs with
/// a variable-correspondence map; queries are small, so the worst-case
/// permutation search is cheap in practice.
pub fn alpha_equiv(q1: &Query, q2: &Query) -> bool {
    match (q1, q2) {
        (Query::Boolean(a), Query::Boolean(b)) => {
            match_formula(a, b, &VarMap::default()).is_some()
        }
        (
            Query::NonBoolean { out_var: v1, header: h1, body: b1 },
            Query::NonBoolean { out_var: v2, header: h2, body: b2 },
        ) => {
            if h1 != h2 {
                return false;
            }
            let mut map = VarMap::default();
            map.bind(v1, v2);
            match_formula(b1, b2, &map).is_some()
        }
        _ => false,
    }
}

#[derive(Clone, Default)]
struct VarMap {
    fwd: BTreeMap<String, String>,
    rev: BTreeMap<String, String>,
}

impl VarMap {
    fn bind(&mut self, a: &str, b: &str) -> bool {
        match (self.fwd.get(a), self.rev.get(b)) {
            (None, None) => {
                self.fwd.insert(a.to_string(), b.to_string());
                self.rev.insert(b.to_string(), a.to_string());
                true
            }
            (Some(x), Some(y)) => x == b && y == a,
            _ => false,
        }
    }

    fn bind_attr(&mut self, a: &AttrRef, b: &AttrRef) -> bool {
        a.attr == b.attr && self.bind(&a.var, &b.var)
    }
}

fn match_formula(a: &Formula, b: &Formula, map: &VarMap) -> Option<VarMap> {
    match (a, b) {
        (
            Formula::Sel { left: l1, op: o1, constant: c1 },
            Formula::Sel { left: l2, op: o2, constant: c2 },
        ) => {
            if o1 != o2 || c1 != c2 {
                return None;
            }
            let mut m = map.clone();
            m.bind_attr(l1, l2).then_some(m)
        }
        (
            Formula::Join { left: l1, op: o1, right: r1 },
            Formula::Join { left: l2, op: o2, right: r2 },
        ) => {
            if *o1 == *o2 {
                let mut m = map.clone();
                if m.bind_attr(l1, l2) && m.bind_attr(r1, r2) {
                    return Some(m);
                }
            }
            if *o1 == o2.mirror() {
                let mut m = map.clone();
                if m.bind_attr(l1, r2) && m.bind_attr(r1, l2) {
                    return Some(m);
                }
            }
            None
        }
        (Formula::Not(x), Formula::Not(y)) => match_formula(x, y, map),
        (Formula::Implies(a1, b1), Formula::Implies(a2, b2)) => {
            let m = match_formula(a1, a2, map)?;
            match_formula(b1, b2, &m)
        }
        (Formula::And(xs), Formula::And(ys)) | (Formula::Or(xs), Formula::Or(ys)) => {
            match_multiset(xs, ys, map)
        }
        (Formula::Exists(bs1, f1), Formula::Exists(bs2, f2))
        | (Formula::Forall(bs1, f1), Formula::Forall(bs2, f2)) => {
            if bs1.len() != bs2.len() {
                return None;
            }
            match_bindings(bs1, bs2, &mut vec![false; bs2.len()], map).into_iter().find_map(
                |m| match (f1, f2) {
                    (None, None) => Some(m),
                    (Some(x), Some(y)) => match_formula(x, y, &m),
                    _ => None,
                },
            )
        }
        _ => None,
    }
}

fn match_bindings(
    bs1: &[Binding],
    bs2: &[Binding],
    used: &mut Vec<bool>,
    map: &VarMap,
) -> Vec<VarMap> {
    let Some((first, rest)) = bs1.split_first() else {
        return vec![map.clone()];
    };
    let mut out = Vec::new();
    for (i, cand) in bs2.iter().enumerate() {
        if used[i] || cand.relation != first.relation {
            continue;
        }
        let mut m = map.clone();
        if !m.bind(&first.var, &cand.var) {
            continue;
        }
        used[i] = true;
        out.extend(match_bindings(rest, bs2, used, &m));
        used[i] = false;
    }
    out
}

fn match_multiset(xs: &[Formula], ys: &[Formula], map: &VarMap) -> Option<VarMap> {
    if xs.len() != ys.len() {
        return None;
    }
    fn go(xs: &[Formula], ys: &[Formula], used: &mut Vec<bool>, map: &VarMap) -> Option<VarMap> {
        let Some((first, rest)) = xs.split_first() else {
            return Some(map.clone());
        };
        for i in 0..ys.len() {
            if used[i] {
                continue;
            }
            if let Some(m) = match_formula(first, &ys[i], map) {
                used[i] = true;
                if let Some(done) = go(rest, ys, used, &m) {
                    return Some(done);
                }
                used[i] = false;
            }
        }
        None
    }
    go(xs, ys, &mut vec![false; ys.len()], map)
}

// ---------------------------------------------------------------------------

/// Map from each bound variable to the relation it ranges over, with the
/// quantifier kind that bound it.
pub fn binding_index(f: &Formula) -> BTreeMap<String, (String, QuantKind)> {
    fn walk(f: &Formula, out: &mut BTreeMap<String, (String, QuantKind)>) {
        match f {
            Formula::Join { .. } | Formula::Sel { .. } => {}
            Formula::Not(x) => walk(x, out),
            Formula::And(cs) | Formula::Or(cs) => cs.iter().for_each(|c| walk(c, out)),
            Formula::Implies(a, b) => {
                walk(a, out);
                walk(b, out);
            }
            Formula::Exists(bs, body) => {
                for b in bs {
                    out.insert(b.var.clone(), (b.relation.clone(), QuantKind::Exists));
                }
                if let Some(body) = body {
                    walk(body, out);
                }
            }
            Formula::Forall(bs, body) => {
                for b in bs {
                    out.insert(b.var.clone(), (b.relation.clone(), QuantKind::Forall));
                }
                if let Some(body) = body {
                    walk(body, out);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(f, &mut out);
    out
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QuantKind {
    Exists,
    Forall,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(var: &str, attr: &str, op: CmpOp, c: i64) -> Formula {
        Formula::Sel { left: AttrRef::new(var, attr), op, constant: Constant::Int(c) }
    }

    fn join(v1: &str, a1: &str, op: CmpOp, v2: &str, a2: &str) -> Formula {
        Formula::Join { left: AttrRef::new(v1, a1), op, right: AttrRef::new(v2, a2) }
    }

    #[test]
    fn double_negation_cancels() {
        let f = Formula::not(Formula::not(sel("r", "A", CmpOp::Eq, 1)));
        assert_eq!(normalize(f), sel("r", "A", CmpOp::Eq, 1));
    }

    #[test]
    fn nested_and_flattens() {
        let a = sel("r", "A", CmpOp::Eq, 1);
        let b = sel("r", "B", CmpOp::Eq, 2);
        let c = sel("r", "C", CmpOp::Eq, 3);
        let f = Formula::And(vec![Formula::And(vec![a.clone(), b.clone()]), c.clone()]);
        assert_eq!(normalize(f), Formula::And(vec![a, b, c]));
    }

    #[test]
    fn nested_exists_merges() {
        let inner = Formula::exists(vec![Binding::new("s", "S")], Some(sel("s", "A", CmpOp::Eq, 1)));
        let f = Formula::exists(vec![Binding::new("r", "R")], Some(inner));
        let n = normalize(f);
        assert_eq!(
            n,
            Formula::exists(
                vec![Binding::new("r", "R"), Binding::new("s", "S")],
                Some(sel("s", "A", CmpOp::Eq, 1))
            )
        );
    }

    #[test]
    fn normalize_is_idempotent() {
        let f = Formula::not(Formula::not(Formula::And(vec![
            Formula::And(vec![sel("r", "A", CmpOp::Eq, 1), sel("r", "B", CmpOp::Eq, 2)]),
            Formula::exists(
                vec![Binding::new("s", "S")],
                Some(Formula::exists(vec![Binding::new("t", "T")], Some(join("s", "A", CmpOp::Lt, "t", "B")))),
            ),
        ])));
        let once = normalize(f.clone());
        assert_eq!(normalize(once.clone()), once);
    }

    #[test]
    fn maximal_scope_pulls_exists_over_and() {
        let f = Formula::And(vec![
            Formula::exists(vec![Binding::new("r", "R")], Some(sel("r", "A", CmpOp::Eq, 1))),
            Formula::exists(vec![Binding::new("s", "S")], Some(sel("s", "B", CmpOp::Eq, 2))),
        ]);
        let got = maximal_scope(f);
        assert_eq!(
            got,
            Formula::exists(
                vec![Binding::new("r", "R"), Binding::new("s", "S")],
                Some(Formula::And(vec![sel("r", "A", CmpOp::Eq, 1), sel("s", "B", CmpOp::Eq, 2)]))
            )
        );
    }

    #[test]
    fn maximal_scope_keeps_negation_sibling() {
        let f = Formula::And(vec![
            Formula::exists(vec![Binding::new("r", "R")], Some(sel("r", "A", CmpOp::Eq, 1))),
            Formula::not(Formula::exists(vec![Binding::new("s", "S")], Some(sel("s", "B", CmpOp::Eq, 2)))),
        ]);
        let got = maximal_scope(f);
        match got {
            Formula::Exists(bs, Some(body)) => {
                assert_eq!(bs, vec![Binding::new("r", "R")]);
                match *body {
                    Formula::And(cs) => assert_eq!(cs.len(), 2),
                    other => panic!("expected conjunction, got {other:?}"),
                }
            }
            other => panic!("expected exists at root, got {other:?}"),
        }
    }

    #[test]
    fn maximal_scope_noop_when_scoped() {
        let f = Formula::exists(vec![Binding::new("r", "R")], Some(sel("r", "A", CmpOp::Eq, 1)));
        assert_eq!(maximal_scope(f.clone()), f);
    }

    #[test]
    fn atom_collection_includes_bindings() {
        let f = Formula::exists(vec![Binding::new("r", "R")], Some(sel("r", "A", CmpOp::Eq, 1)));
        let bag = atoms_of(&f);
        assert_eq!(bag.len(), 2);
        assert!(bag.0.contains_key(&Atom::Binding { var: "r".into(), relation: "R".into() }));
    }

    #[test]
    fn rebind_detected() {
        let f = Formula::And(vec![
            Formula::exists(vec![Binding::new("r", "R")], Some(sel("r", "A", CmpOp::Eq, 1))),
            Formula::exists(vec![Binding::new("r", "S")], Some(sel("r", "A", CmpOp::Eq, 2))),
        ]);
        assert_eq!(
            Query::Boolean(f).normalize(),
            Err(AstError::Rebind("r".to_string()))
        );
    }

    #[test]
    fn free_and_bound_detected() {
        // r is used outside its quantifier and also bound by it
        let f = Formula::And(vec![
            sel("r", "A", CmpOp::Eq, 1),
            Formula::exists(vec![Binding::new("r", "R")], Some(sel("r", "A", CmpOp::Eq, 2))),
        ]);
        assert_eq!(
            Query::Boolean(f).normalize(),
            Err(AstError::FreeBound("r".to_string()))
        );
    }

    #[test]
    fn alpha_equiv_reflexive() {
        let q = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R")],
            Some(join("r", "A", CmpOp::Lt, "r", "B")),
        ));
        assert!(alpha_equiv(&q, &q));
    }

    #[test]
    fn alpha_equiv_rename_and_mirror() {
        let q1 = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R")],
            Some(join("r", "A", CmpOp::Lt, "r", "B")),
        ));
        let q2 = Query::Boolean(Formula::exists(
            vec![Binding::new("x", "R")],
            Some(join("x", "B", CmpOp::Gt, "x", "A")),
        ));
        assert!(alpha_equiv(&q1, &q2));
    }

    #[test]
    fn alpha_equiv_reordering() {
        let q1 = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R"), Binding::new("s", "S")],
            Some(Formula::And(vec![sel("r", "A", CmpOp::Eq, 1), sel("s", "B", CmpOp::Eq, 2)])),
        ));
        let q2 = Query::Boolean(Formula::exists(
            vec![Binding::new("a", "S"), Binding::new("b", "R")],
            Some(Formula::And(vec![sel("a", "B", CmpOp::Eq, 2), sel("b", "A", CmpOp::Eq, 1)])),
        ));
        assert!(alpha_equiv(&q1, &q2));
    }

    #[test]
    fn alpha_equiv_distinguishes_constants() {
        let q1 = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R")],
            Some(sel("r", "A", CmpOp::Eq, 1)),
        ));
        let q2 = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R")],
            Some(sel("r", "A", CmpOp::Eq, 2)),
        ));
        assert!(!alpha_equiv(&q1, &q2));
    }

    #[test]
    fn alpha_equiv_ambiguous_bindings_backtrack() {
        // both queries bind two variables over R; only one pairing works
        let q1 = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R"), Binding::new("s", "R")],
            Some(Formula::And(vec![sel("r", "A", CmpOp::Eq, 1), sel("s", "A", CmpOp::Eq, 2)])),
        ));
        let q2 = Query::Boolean(Formula::exists(
            vec![Binding::new("x", "R"), Binding::new("y", "R")],
            Some(Formula::And(vec![sel("y", "A", CmpOp::Eq, 1), sel("x", "A", CmpOp::Eq, 2)])),
        ));
        assert!(alpha_equiv(&q1, &q2));
    }

    #[test]
    fn erased_atoms_orient_joins() {
        let q1 = Query::Boolean(Formula::exists(
            vec![Binding::new("r", "R"), Binding::new("s", "S")],
            Some(join("r", "A", CmpOp::Lt, "s", "B")),
        ));
        let q2 = Query::Boolean(Formula::exists(
            vec![Binding::new("x", "R"), Binding::new("y", "S")],
            Some(join("y", "B", CmpOp::Gt, "x", "A")),
        ));
        assert_eq!(erased_atoms(&q1), erased_atoms(&q2));
    }
}
