//! Fragment classification and the atom-preserving rewrites between
//! fragments: eliminating `forall`/`->` (yielding the existential fragment
//! with disjunction, ENCV) and eliminating `or` (yielding the purely
//! conjunctive existential fragment, ENC). Each rewrite keeps every atom of
//! the input — bindings and predicates are rearranged, never dropped or
//! duplicated — and is logically equivalent.

use thiserror::Error;

use crate::ast::{normalize, Formula, Query};

/// Connective fragments, most restrictive last.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Fragment {
    /// May contain `forall` or `->`.
    Full,
    /// `exists`, `not`, `and`, `or` only.
    Encv,
    /// `exists`, `not`, `and` only.
    Enc,
}

impl std::fmt::Display for Fragment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Fragment::Full => "full",
            Fragment::Encv => "encv",
            Fragment::Enc => "enc",
        })
    }
}

#[derive(Error, Clone, PartialEq, Eq, Debug)]
pub enum FragmentError {
    #[error("query contains `forall` or `->`; eliminate them first")]
    UniversalPresent,
    #[error("query contains `or`; not in the conjunctive fragment")]
    DisjunctionPresent,
    #[error("{0}")]
    Other(String),
}

/// Most restrictive fragment containing the query.
pub fn classify(q: &Query) -> Fragment {
    fn scan(f: &Formula, has_or: &mut bool) -> bool {
        match f {
            Formula::Join { .. } | Formula::Sel { .. } => false,
            Formula::Forall(..) | Formula::Implies(..) => true,
            Formula::Not(x) => scan(x, has_or),
            Formula::And(cs) => cs.iter().any(|c| scan(c, has_or)),
            Formula::Or(cs) => {
                *has_or = true;
                cs.iter().any(|c| scan(c, has_or))
            }
            Formula::Exists(_, body) => body.as_deref().map_or(false, |b| scan(b, has_or)),
        }
    }
    let mut has_or = false;
    if scan(q.body(), &mut has_or) {
        Fragment::Full
    } else if has_or {
        Fragment::Encv
    } else {
        Fragment::Enc
    }
}

/// Rewrite counter returned by the `_counted` variants; used to check the
/// polynomial termination bound.
pub type Steps = usize;

/// Number of AST nodes (connectives + quantifiers + predicate leaves).
pub fn ast_size(q: &Query) -> usize {
    fn size(f: &Formula) -> usize {
        match f {
            Formula::Join { .. } | Formula::Sel { .. } => 1,
            Formula::Not(x) => 1 + size(x),
            Formula::And(cs) | Formula::Or(cs) => 1 + cs.iter().map(size).sum::<usize>(),
            Formula::Implies(a, b) => 1 + size(a) + size(b),
            Formula::Exists(bs, body) | Formula::Forall(bs, body) => {
                1 + bs.len() + body.as_deref().map_or(0, size)
            }
        }
    }
    size(q.body())
}

/// Eliminate universal quantifiers and implications:
/// `forall rs [φ]` becomes `not(exists rs [not(φ)])` and `a -> b` becomes
/// `not(a and not(b))` (the implication is expanded and its disjunction
/// folded away in one step, so disjunctions already present in the input
/// survive untouched). Double negations are cancelled afterwards.
pub fn remove_forall_implies(q: &Query) -> Query {
    remove_forall_implies_counted(q).0
}

pub fn remove_forall_implies_counted(q: &Query) -> (Query, Steps) {
    let mut steps = 0;
    let out = q.map_body(|b| normalize(rfi(b.clone(), &mut steps)));
    (out, steps)
}

fn rfi(f: Formula, steps: &mut Steps) -> Formula {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => f,
        Formula::Not(x) => Formula::not(rfi(*x, steps)),
        Formula::And(cs) => Formula::And(cs.into_iter().map(|c| rfi(c, steps)).collect()),
        Formula::Or(cs) => Formula::Or(cs.into_iter().map(|c| rfi(c, steps)).collect()),
        Formula::Implies(a, b) => {
            *steps += 1;
            Formula::not(Formula::And(vec![
                rfi(*a, steps),
                Formula::not(rfi(*b, steps)),
            ]))
        }
        Formula::Exists(bs, body) => Formula::Exists(bs, body.map(|b| Box::new(rfi(*b, steps)))),
        Formula::Forall(bs, body) => {
            *steps += 1;
            let body = body.expect("normalized `forall` always has a body");
            Formula::not(Formula::exists(bs, Some(Formula::not(rfi(*body, steps)))))
        }
    }
}

/// Eliminate disjunctions via DeMorgan:
/// `a or b or c` becomes `not(not(a) and not(b) and not(c))`.
pub fn remove_disjunction(q: &Query) -> Result<Query, FragmentError> {
    remove_disjunction_counted(q).map(|(q, _)| q)
}

pub fn remove_disjunction_counted(q: &Query) -> Result<(Query, Steps), FragmentError> {
    if classify(q) == Fragment::Full {
        return Err(FragmentError::UniversalPresent);
    }
    let mut steps = 0;
    let out = q.map_body(|b| normalize(rd(b.clone(), &mut steps)));
    Ok((out, steps))
}

fn rd(f: Formula, steps: &mut Steps) -> Formula {
    match f {
        Formula::Join { .. } | Formula::Sel { .. } => f,
        Formula::Not(x) => Formula::not(rd(*x, steps)),
        Formula::And(cs) => Formula::And(cs.into_iter().map(|c| rd(c, steps)).collect()),
        Formula::Or(cs) => {
            *steps += 1;
            Formula::not(Formula::And(
                cs.into_iter().map(|c| Formula::not(rd(c, steps))).collect(),
            ))
        }
        Formula::Exists(bs, body) => Formula::Exists(bs, body.map(|b| Box::new(rd(*b, steps)))),
        Formula::Implies(..) | Formula::Forall(..) => {
            unreachable!("fragment checked before rewriting")
        }
    }
}

/// Eliminate conjunctions via DeMorgan (`a and b` becomes
/// `not(not(a) or not(b))`). Not used by any pipeline — the dual of
/// [`remove_disjunction`], exposed for testing the rule set.
pub fn remove_conjunction(q: &Query) -> Result<Query, FragmentError> {
    fn rc(f: Formula) -> Formula {
        match f {
            Formula::Join { .. } | Formula::Sel { .. } => f,
            Formula::Not(x) => Formula::not(rc(*x)),
            Formula::Or(cs) => Formula::Or(cs.into_iter().map(rc).collect()),
            Formula::And(cs) => {
                Formula::not(Formula::Or(cs.into_iter().map(|c| Formula::not(rc(c))).collect()))
            }
            Formula::Exists(bs, body) => Formula::Exists(bs, body.map(|b| Box::new(rc(*b)))),
            Formula::Implies(..) | Formula::Forall(..) => unreachable!(),
        }
    }
    if classify(q) == Fragment::Full {
        return Err(FragmentError::UniversalPresent);
    }
    Ok(q.map_body(|b| normalize(rc(b.clone()))))
}
