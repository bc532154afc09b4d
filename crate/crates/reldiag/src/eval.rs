//! Brute-force finite-model evaluator, used as the semantic oracle for all
//! query transformations.
//!
//! Evaluation always happens over an explicit finite domain supplied by the
//! caller, not the active domain of the database: the placement of built-in
//! relations inside negation scopes is only observable with domain values
//! outside the stored tuples.
//!
//! Built-in relation names are interpreted, never looked up in the
//! database: a unary name like `"<4"` denotes the set of domain values `d`
//! with `d < 4` (schema `$1`), and a bare operator name like `"<"` denotes
//! all ordered pairs of same-kind domain values related by it (schema
//! `$1, $2`).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::ast::{CmpOp, ConstKind, Constant, Formula, Query};

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Relation {
    pub schema: Vec<String>,
    pub tuples: BTreeSet<Vec<Constant>>,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Database {
    pub relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn insert(
        &mut self,
        name: &str,
        schema: &[&str],
        tuples: &[&[Constant]],
    ) -> Result<(), EvalError> {
        let mut set = BTreeSet::new();
        for t in tuples {
            if t.len() != schema.len() {
                return Err(EvalError::ArityMismatch {
                    relation: name.to_string(),
                    expected: schema.len(),
                    got: t.len(),
                });
            }
            set.insert(t.to_vec());
        }
        self.relations.insert(
            name.to_string(),
            Relation { schema: schema.iter().map(|s| s.to_string()).collect(), tuples: set },
        );
        Ok(())
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.relations
            .values()
            .flat_map(|r| r.tuples.iter().flatten().cloned())
            .collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Domain(pub BTreeSet<Constant>);

impl Domain {
    pub fn of_kind(&self, kind: Option<ConstKind>) -> Vec<Constant> {
        self.0
            .iter()
            .filter(|c| kind.map_or(true, |k| c.kind() == k))
            .cloned()
            .collect()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ResultSet {
    Bool(bool),
    Tuples(BTreeSet<Vec<Constant>>),
}

impl fmt::Display for ResultSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResultSet::Bool(b) => write!(f, "{b}"),
            ResultSet::Tuples(ts) => {
                for t in ts {
                    let cells: Vec<String> = t.iter().map(|c| c.lexeme()).collect();
                    writeln!(f, "({})", cells.join(", "))?;
                }
                write!(f, "{} tuple(s)", ts.len())
            }
        }
    }
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum EvalError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}` expects arity {expected}, got {got}")]
    ArityMismatch { relation: String, expected: usize, got: usize },
    #[error("unknown attribute `{attr}` of variable `{var}` (relation `{relation}`)")]
    UnknownAttribute { var: String, attr: String, relation: String },
    #[error("type error: {0}")]
    TypeError(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
    #[error("domain does not cover constant {0}")]
    DomainCoverage(Constant),
}

/// Parsed built-in relation name.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BuiltinRel {
    Unary { op: CmpOp, constant: Constant },
    Binary { op: CmpOp },
}

/// Recognize a built-in relation name: a comparison operator optionally
/// followed by a constant lexeme (`"<"`, `"=4"`, `">=10"`, `"=\"red\""`).
pub fn parse_builtin(name: &str) -> Option<BuiltinRel> {
    let (op, rest) = ["<=", ">=", "!=", "<", ">", "="]
        .iter()
        .find_map(|sym| name.strip_prefix(sym).map(|rest| (*sym, rest)))?;
    let op = CmpOp::from_symbol(op).unwrap();
    if rest.is_empty() {
        return Some(BuiltinRel::Binary { op });
    }
    if let Ok(i) = rest.parse::<i64>() {
        return Some(BuiltinRel::Unary { op, constant: Constant::Int(i) });
    }
    if rest.len() >= 2 && rest.starts_with('"') && rest.ends_with('"') {
        return Some(BuiltinRel::Unary {
            op,
            constant: Constant::Str(rest[1..rest.len() - 1].to_string()),
        });
    }
    None
}

/// Compose a built-in relation name from its parts; inverse of
/// [`parse_builtin`].
pub fn builtin_name(op: CmpOp, constant: Option<&Constant>) -> String {
    match constant {
        None => op.symbol().to_string(),
        Some(c) => format!("{}{}", op.symbol(), c.lexeme()),
    }
}

// ---------------------------------------------------------------------------
// Kind inference
//
// Before enumeration, attributes are grouped into classes connected by
// predicates (and by sharing a relation schema position), and each class is
// pinned to the constant kind it touches. Two different kinds in one class
// is a type error — the query compares incomparable constants. Enumeration
// of output tuples and built-in relations is then restricted to the
// relevant kind, so a mixed int/string domain never forces a spurious
// cross-kind comparison.

#[derive(Default)]
struct Kinds {
    parent: BTreeMap<String, String>,
    kind: BTreeMap<String, ConstKind>,
}

impl Kinds {
    fn find(&mut self, key: &str) -> String {
        let p = match self.parent.get(key) {
            None => {
                self.parent.insert(key.to_string(), key.to_string());
                return key.to_string();
            }
            Some(p) => p.clone(),
        };
        if p == key {
            return p;
        }
        let root = self.find(&p);
        self.parent.insert(key.to_string(), root.clone());
        root
    }

    fn union(&mut self, a: &str, b: &str) -> Result<(), EvalError> {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra == rb {
            return Ok(());
        }
        let ka = self.kind.get(&ra).copied();
        let kb = self.kind.get(&rb).copied();
        self.parent.insert(ra.clone(), rb.clone());
        match (ka, kb) {
            (Some(x), Some(y)) if x != y => Err(EvalError::TypeError(format!(
                "attributes `{a}` and `{b}` mix integer and string comparisons"
            ))),
            (Some(x), _) => {
                self.kind.insert(rb, x);
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn pin(&mut self, key: &str, kind: ConstKind) -> Result<(), EvalError> {
        let r = self.find(key);
        match self.kind.get(&r) {
            Some(k) if *k != kind => Err(EvalError::TypeError(format!(
                "attribute `{key}` compared against both integer and string constants"
            ))),
            _ => {
                self.kind.insert(r, kind);
                Ok(())
            }
        }
    }

    fn kind_of(&mut self, key: &str) -> Option<ConstKind> {
        let r = self.find(key);
        self.kind.get(&r).copied()
    }
}

/// Key attributes by the relation they belong to (all variables over the
/// same relation share schema kinds); built-in occurrences are keyed by
/// variable since each occurrence is independent.
fn kind_key(var: &str, attr: &str, rel_of: &BTreeMap<String, String>) -> String {
    match rel_of.get(var) {
        Some(rel) if parse_builtin(rel).is_none() => format!("{rel}.{attr}"),
        _ => format!("${var}.{attr}"),
    }
}

fn infer_kinds(q: &Query) -> Result<Kinds, EvalError> {
    let body = q.body();
    let rel_of: BTreeMap<String, String> = crate::ast::binding_index(body)
        .into_iter()
        .map(|(v, (rel, _))| (v, rel))
        .collect();
    let mut kinds = Kinds::default();

    for (var, rel) in &rel_of {
        if let Some(b) = parse_builtin(rel) {
            match b {
                BuiltinRel::Unary { constant, .. } => {
                    kinds.pin(&kind_key(var, "$1", &rel_of), constant.kind())?;
                }
                BuiltinRel::Binary { .. } => {
                    let k1 = kind_key(var, "$1", &rel_of);
                    let k2 = kind_key(var, "$2", &rel_of);
                    kinds.union(&k1, &k2)?;
                }
            }
        }
    }

    let mut result = Ok(());
    crate::ast::visit_predicates(body, &mut |p| {
        if result.is_err() {
            return;
        }
        result = match p {
            Formula::Join { left, right, .. } => kinds.union(
                &kind_key(&left.var, &left.attr, &rel_of),
                &kind_key(&right.var, &right.attr, &rel_of),
            ),
            Formula::Sel { left, constant, .. } => {
                kinds.pin(&kind_key(&left.var, &left.attr, &rel_of), constant.kind())
            }
            _ => Ok(()),
        };
    });
    result?;
    Ok(kinds)
}

/// Kind assignments queryable by relation+attribute; used by instance
/// generation to produce kind-consistent tuples.
pub struct KindMap {
    kinds: Kinds,
}

impl KindMap {
    pub fn relation_attr(&mut self, relation: &str, attr: &str) -> Option<ConstKind> {
        self.kinds.kind_of(&format!("{relation}.{attr}"))
    }
}

pub fn kind_map(q: &Query) -> Result<KindMap, EvalError> {
    Ok(KindMap { kinds: infer_kinds(q)? })
}

// ---------------------------------------------------------------------------
// Evaluation

struct Evaluator<'a> {
    db: &'a Database,
    dom: &'a Domain,
    rel_of: BTreeMap<String, String>,
    kinds: Kinds,
    env: BTreeMap<String, Vec<Constant>>,
    schemas: BTreeMap<String, Vec<String>>,
}

impl<'a> Evaluator<'a> {
    fn attr_value(&self, var: &str, attr: &str) -> Result<Constant, EvalError> {
        let tuple = self.env.get(var).ok_or_else(|| EvalError::UnboundVariable(var.into()))?;
        let schema =
            self.schemas.get(var).ok_or_else(|| EvalError::UnboundVariable(var.into()))?;
        let idx = schema.iter().position(|a| a == attr).ok_or_else(|| {
            EvalError::UnknownAttribute {
                var: var.to_string(),
                attr: attr.to_string(),
                relation: self.rel_of.get(var).cloned().unwrap_or_default(),
            }
        })?;
        Ok(tuple[idx].clone())
    }

    // comparisons only hold between values of the same kind; this matches
    // the built-in relations, which range over same-kind pairs only
    fn compare(&self, a: &Constant, op: CmpOp, b: &Constant) -> Result<bool, EvalError> {
        Ok(a.same_kind_cmp(b).map(|ord| op.test(ord)).unwrap_or(false))
    }

    /// Tuples and schema of the relation a quantifier ranges over.
    fn relation_tuples(
        &mut self,
        var: &str,
        relation: &str,
    ) -> Result<(Vec<String>, Vec<Vec<Constant>>), EvalError> {
        if let Some(b) = parse_builtin(relation) {
            return Ok(match b {
                BuiltinRel::Unary { op, constant } => {
                    let tuples = self
                        .dom
                        .of_kind(Some(constant.kind()))
                        .into_iter()
                        .filter(|d| {
                            d.same_kind_cmp(&constant).map(|ord| op.test(ord)).unwrap_or(false)
                        })
                        .map(|d| vec![d])
                        .collect();
                    (vec!["$1".to_string()], tuples)
                }
                BuiltinRel::Binary { op } => {
                    let kind = self.kinds.kind_of(&kind_key(var, "$1", &self.rel_of));
                    let mut tuples = Vec::new();
                    for k in [ConstKind::Int, ConstKind::Str] {
                        if kind.map_or(false, |pinned| pinned != k) {
                            continue;
                        }
                        let values = self.dom.of_kind(Some(k));
                        for a in &values {
                            for b in &values {
                                if op.test(a.same_kind_cmp(b).unwrap()) {
                                    tuples.push(vec![a.clone(), b.clone()]);
                                }
                            }
                        }
                    }
                    (vec!["$1".to_string(), "$2".to_string()], tuples)
                }
            });
        }
        let rel = self
            .db
            .relations
            .get(relation)
            .ok_or_else(|| EvalError::UnknownRelation(relation.to_string()))?;
        Ok((rel.schema.clone(), rel.tuples.iter().cloned().collect()))
    }

    fn quantify(
        &mut self,
        existential: bool,
        bindings: &[crate::ast::Binding],
        body: Option<&Formula>,
    ) -> Result<bool, EvalError> {
        let Some((first, rest)) = bindings.split_first() else {
            return match body {
                Some(b) => self.formula(b),
                None => Ok(true),
            };
        };
        let (schema, tuples) = self.relation_tuples(&first.var, &first.relation)?;
        self.schemas.insert(first.var.clone(), schema);
        let mut acc = !existential;
        for t in tuples {
            self.env.insert(first.var.clone(), t);
            let inner = self.quantify(existential, rest, body)?;
            if inner == existential {
                acc = existential;
                break;
            }
        }
        self.env.remove(&first.var);
        self.schemas.remove(&first.var);
        Ok(acc)
    }

    fn formula(&mut self, f: &Formula) -> Result<bool, EvalError> {
        match f {
            Formula::Join { left, op, right } => {
                let a = self.attr_value(&left.var, &left.attr)?;
                let b = self.attr_value(&right.var, &right.attr)?;
                self.compare(&a, *op, &b)
            }
            Formula::Sel { left, op, constant } => {
                let a = self.attr_value(&left.var, &left.attr)?;
                self.compare(&a, *op, constant)
            }
            Formula::Not(x) => Ok(!self.formula(x)?),
            Formula::And(cs) => {
                for c in cs {
                    if !self.formula(c)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(cs) => {
                for c in cs {
                    if self.formula(c)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Implies(a, b) => Ok(!self.formula(a)? || self.formula(b)?),
            Formula::Exists(bs, body) => self.quantify(true, bs, body.as_deref()),
            Formula::Forall(bs, body) => self.quantify(false, bs, body.as_deref()),
        }
    }
}

/// All constants mentioned by a query, including built-in relation
/// thresholds; used by instance generation to build covering domains.
pub fn query_constants(q: &Query) -> BTreeSet<Constant> {
    let mut out = BTreeSet::new();
    crate::ast::visit_predicates(q.body(), &mut |p| {
        if let Formula::Sel { constant, .. } = p {
            out.insert(constant.clone());
        }
    });
    for (_, (rel, _)) in crate::ast::binding_index(q.body()) {
        if let Some(BuiltinRel::Unary { constant, .. }) = parse_builtin(&rel) {
            out.insert(constant);
        }
    }
    out
}

pub fn eval(q: &Query, db: &Database, dom: &Domain) -> Result<ResultSet, EvalError> {
    // Stored tuples must live inside the evaluation universe. Query
    // constants need no such check: attribute values always come from the
    // domain, so a comparison against an absent constant is simply never
    // satisfied by equality (and built-in relations are defined as domain
    // subsets in the first place).
    for c in db.constants() {
        if !dom.0.contains(&c) {
            return Err(EvalError::DomainCoverage(c));
        }
    }
    let kinds = infer_kinds(q)?;
    let rel_of: BTreeMap<String, String> = crate::ast::binding_index(q.body())
        .into_iter()
        .map(|(v, (rel, _))| (v, rel))
        .collect();
    let mut ev = Evaluator {
        db,
        dom,
        rel_of,
        kinds,
        env: BTreeMap::new(),
        schemas: BTreeMap::new(),
    };

    match q {
        Query::Boolean(f) => Ok(ResultSet::Bool(ev.formula(f)?)),
        Query::NonBoolean { out_var, header, body } => {
            // enumerate candidate output tuples over the kind-appropriate
            // slice of the domain, per header position
            let mut columns = Vec::new();
            for attr in header {
                let kind = ev.kinds.kind_of(&kind_key(out_var, attr, &ev.rel_of));
                columns.push(dom.of_kind(kind));
            }
            let mut result = BTreeSet::new();
            let mut tuple = vec![Constant::Int(0); header.len()];
            enumerate(&columns, 0, &mut tuple, &mut |t| {
                ev.env.insert(out_var.clone(), t.to_vec());
                ev.schemas.insert(out_var.clone(), header.clone());
                let keep = ev.formula(body)?;
                ev.env.remove(out_var);
                ev.schemas.remove(out_var);
                if keep {
                    result.insert(t.to_vec());
                }
                Ok(())
            })?;
            Ok(ResultSet::Tuples(result))
        }
    }
}

fn enumerate(
    columns: &[Vec<Constant>],
    idx: usize,
    tuple: &mut Vec<Constant>,
    f: &mut impl FnMut(&[Constant]) -> Result<(), EvalError>,
) -> Result<(), EvalError> {
    if idx == columns.len() {
        return f(tuple);
    }
    for v in &columns[idx] {
        tuple[idx] = v.clone();
        enumerate(columns, idx + 1, tuple, f)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Equivalence harness

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum EquivOutcome {
    Equivalent,
    Counterexample { instance: usize, left: ResultSet, right: ResultSet },
}

impl EquivOutcome {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivOutcome::Equivalent)
    }
}

/// Evaluate both queries on each instance and report the first mismatch.
pub fn equiv_on(
    q1: &Query,
    q2: &Query,
    instances: &[(Database, Domain)],
) -> Result<EquivOutcome, EvalError> {
    for (i, (db, dom)) in instances.iter().enumerate() {
        let r1 = eval(q1, db, dom)?;
        let r2 = eval(q2, db, dom)?;
        if r1 != r2 {
            return Ok(EquivOutcome::Counterexample { instance: i, left: r1, right: r2 });
        }
    }
    Ok(EquivOutcome::Equivalent)
}

// ---------------------------------------------------------------------------
// Fixture text format
//
//   R(A,B): (1,2) (3,4)
//   S(B): (2)
//   A():                  <- empty nullary relation
//   T(): ()               <- non-empty nullary relation
//   domain: 1 2 3 4 "red"
//
// `#` starts a comment line; blank lines ignored.

#[derive(Error, Clone, PartialEq, Eq, Debug)]
#[error("line {line}: {message}")]
pub struct DbParseError {
    pub line: usize,
    pub message: String,
}

pub fn parse_database(text: &str) -> Result<(Database, Domain), DbParseError> {
    let mut db = Database::default();
    let mut dom = Domain::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |message: String| DbParseError { line: lineno + 1, message };
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("domain:") {
            for c in parse_constants(rest).map_err(&err)? {
                dom.0.insert(c);
            }
            continue;
        }
        let open = line.find('(').ok_or_else(|| err("expected `Relation(...)`".into()))?;
        let name = line[..open].trim().to_string();
        if name.is_empty() {
            return Err(err("missing relation name".into()));
        }
        let close = line.find(')').ok_or_else(|| err("missing `)` in schema".into()))?;
        let schema: Vec<String> = line[open + 1..close]
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let rest = line[close + 1..]
            .trim()
            .strip_prefix(':')
            .ok_or_else(|| err("expected `:` after schema".into()))?;
        let mut tuples = BTreeSet::new();
        let mut cursor = rest.trim();
        while !cursor.is_empty() {
            let open = cursor
                .find('(')
                .ok_or_else(|| err("expected `(` starting a tuple".into()))?;
            let close = cursor[open..]
                .find(')')
                .map(|i| open + i)
                .ok_or_else(|| err("missing `)` closing a tuple".into()))?;
            let cells = parse_constants_csv(&cursor[open + 1..close]).map_err(&err)?;
            if cells.len() != schema.len() {
                return Err(err(format!(
                    "tuple arity {} does not match schema arity {}",
                    cells.len(),
                    schema.len()
                )));
            }
            tuples.insert(cells);
            cursor = cursor[close + 1..].trim();
        }
        db.relations.insert(name, Relation { schema, tuples });
    }
    for c in db.constants() {
        dom.0.insert(c);
    }
    Ok((db, dom))
}

fn parse_one_constant(tok: &str) -> Result<Constant, String> {
    let tok = tok.trim();
    if tok.starts_with('"') {
        if tok.len() >= 2 && tok.ends_with('"') {
            Ok(Constant::Str(tok[1..tok.len() - 1].to_string()))
        } else {
            Err(format!("bad string literal `{tok}`"))
        }
    } else {
        tok.parse::<i64>()
            .map(Constant::Int)
            .map_err(|_| format!("bad constant `{tok}`"))
    }
}

fn parse_constants(s: &str) -> Result<Vec<Constant>, String> {
    s.split_whitespace().map(parse_one_constant).collect()
}

fn parse_constants_csv(s: &str) -> Result<Vec<Constant>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(parse_one_constant).collect()
}

pub fn write_database(db: &Database, dom: &Domain) -> String {
    let mut out = String::new();
    for (name, rel) in &db.relations {
        out.push_str(name);
        out.push('(');
        out.push_str(&rel.schema.join(","));
        out.push_str("):");
        for t in &rel.tuples {
            let cells: Vec<String> = t.iter().map(|c| c.lexeme()).collect();
            out.push_str(&format!(" ({})", cells.join(",")));
        }
        out.push('\n');
    }
    let cells: Vec<String> = dom.0.iter().map(|c| c.lexeme()).collect();
    out.push_str(&format!("domain: {}\n", cells.join(" ")));
    out
}
